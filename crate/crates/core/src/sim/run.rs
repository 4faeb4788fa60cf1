use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::build_augmented;
use crate::error::{Error, Result};
use crate::solver::{sns_solve, SnsStatus, TaskRef};
use crate::trajectory::task_sample;

use super::Scenario;

/// One control tick, recorded before the Euler step.
#[derive(Debug, Clone, PartialEq)]
pub struct TickLog {
    pub t: f64,
    pub q: DVector<f64>,
    pub q_dot: DVector<f64>,
    /// End-effector position on the task axes.
    pub ee_pos: DVector<f64>,
    /// Desired minus actual end-effector position.
    pub ee_err: DVector<f64>,
    pub s_star: f64,
    pub status: SnsStatus,
    /// `;`-joined saturation tags, empty when nothing saturated.
    pub sat_tags: String,
    /// Control-point positions on their selected axes, constraints in
    /// scenario order, logged whether or not the constraint is active.
    pub cp_pos: Vec<f64>,
    pub cp_vel: Vec<f64>,
}

/// Simulate the scenario for `tick_count()` ticks.
pub fn run(scenario: &Scenario) -> Result<Vec<TickLog>> {
    let dt = scenario.sample_time;
    let ticks = scenario.tick_count();
    let model = &scenario.robot;
    let mut q = scenario.initial_q.clone();
    let mut log = Vec::with_capacity(ticks);

    for k in 0..ticks {
        let t = k as f64 * dt;
        let sample = task_sample(&scenario.path, &scenario.timing, &scenario.feedback, &q, model, t)?;
        let sys = build_augmented(model, &q, &scenario.joint_limits, &scenario.cartesian, t, dt)?;
        let err = sample.error();
        let task = TaskRef::new(sample.x_dot, sample.jacobian)?;
        let sol = match sns_solve(&task, &sys, &scenario.solver) {
            Ok(sol) => sol,
            Err(Error::SolverDivergence { iterations, best, .. }) => {
                return Err(Error::SolverDivergence {
                    iterations,
                    best,
                    tick: Some(k),
                    time: Some(t),
                })
            }
            Err(e) => return Err(e),
        };

        let mut cp_pos = Vec::new();
        let mut cp_vel = Vec::new();
        for c in &scenario.cartesian {
            let p = model.point_position(&q, &c.point)?;
            let v = model.point_jacobian(&q, &c.point)? * &sol.q_dot;
            for axis in c.sel.axes() {
                cp_pos.push(p[axis.index()]);
                cp_vel.push(v[axis.index()]);
            }
        }

        let q_next = &q + &sol.q_dot * dt;
        log.push(TickLog {
            t,
            q: std::mem::replace(&mut q, q_next),
            q_dot: sol.q_dot,
            ee_pos: sample.x_actual,
            ee_err: err,
            s_star: sol.s_star,
            status: sol.status,
            sat_tags: sol.saturations.tags(),
            cp_pos,
            cp_vel,
        });
    }
    Ok(log)
}

/// Uniform jitter of at most `amplitude` rad per joint, clamped to the joint
/// position limits.
pub fn perturb_initial_q(scenario: &mut Scenario, seed: u64, amplitude: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = &scenario.joint_limits;
    for j in 0..scenario.initial_q.len() {
        let dq = if amplitude > 0.0 { rng.random_range(-amplitude..=amplitude) } else { 0.0 };
        scenario.initial_q[j] = (scenario.initial_q[j] + dq).clamp(lim.q_min[j], lim.q_max[j]);
    }
}
