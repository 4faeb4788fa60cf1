#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use sns::constraints::{AugmentedSystem, RowTag};
use sns::kinematics::Axis;
use sns::sim::{load_scenario_file, Scenario};
use sns::solver::TaskRef;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn bundled(name: &str) -> Scenario {
    load_scenario_file(scenario_path(name)).expect("bundled scenario loads")
}

pub const BUNDLED: [&str; 2] = ["planar6r.scn", "lwr7r.scn"];

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Random single-tick instance with `n` joints, an `m`-dimensional task and
/// `extra` Cartesian-like rows. Every box contains zero.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, m: usize, extra: usize) -> (TaskRef, AugmentedSystem) {
    let jacobian = random_matrix(rng, m, n);
    let x_dot = random_vector(rng, m, 1.0);
    let rows = n + extra;
    let mut a = DMatrix::zeros(rows, n);
    a.view_mut((0, 0), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (extra, n)).copy_from(&random_matrix(rng, extra, n));
    let b_min = DVector::from_fn(rows, |_, _| -rng.random_range(0.05..1.0));
    let b_max = DVector::from_fn(rows, |_, _| rng.random_range(0.05..1.0));
    let mut row_tags: Vec<RowTag> = (0..n).map(RowTag::Joint).collect();
    row_tags.extend((0..extra).map(|k| RowTag::Cartesian {
        id: format!("r{}", k + 1),
        axis: Axis::X,
        coincides_with_task: false,
    }));
    let task = TaskRef::new(x_dot, jacobian).expect("valid task");
    (task, AugmentedSystem { a, b_min, b_max, row_tags })
}

/// Largest box violation of `A qdot`.
pub fn box_violation(sys: &AugmentedSystem, q_dot: &DVector<f64>) -> f64 {
    let a_dot = &sys.a * q_dot;
    (0..sys.rows())
        .map(|h| (sys.b_min[h] - a_dot[h]).max(a_dot[h] - sys.b_max[h]).max(0.0))
        .fold(0.0, f64::max)
}

/// Central finite-difference Jacobian of `f` at `q`.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, q: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let m = f(q).len();
    let mut jac = DMatrix::zeros(m, q.len());
    for j in 0..q.len() {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[j] += h;
        qm[j] -= h;
        jac.set_column(j, &((f(&qp) - f(&qm)) / (2.0 * h)));
    }
    jac
}
