//! Desired end-effector paths, timing laws and the closed-loop task velocity.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kinematics::{self, Axis, AxisSelector, RobotModel};

/// Arc-length parameterized path in 2 or 3 task coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum PathSpec {
    Line {
        start: DVector<f64>,
        end: DVector<f64>,
    },
    /// Counter-clockwise from `center + radius * e1`, where `plane = (e1, e2)`.
    Circle {
        center: DVector<f64>,
        radius: f64,
        plane: (Axis, Axis),
        laps: u32,
    },
}

impl PathSpec {
    pub fn dim(&self) -> usize {
        match self {
            PathSpec::Line { start, .. } => start.len(),
            PathSpec::Circle { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !(d == 2 || d == 3) {
            return Err(Error::invalid(format!("path must have 2 or 3 coordinates, got {d}")));
        }
        match self {
            PathSpec::Line { start, end } => {
                if end.len() != d {
                    return Err(Error::invalid("line start and end differ in dimension"));
                }
                if (end - start).norm() == 0.0 {
                    return Err(Error::invalid("line start and end coincide"));
                }
            }
            PathSpec::Circle {
                radius, plane, laps, ..
            } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid("circle radius must be positive"));
                }
                if plane.0 == plane.1 {
                    return Err(Error::invalid("circle plane needs two distinct axes"));
                }
                if plane.0.index() >= d || plane.1.index() >= d {
                    return Err(Error::invalid("circle plane uses an axis the path does not have"));
                }
                if *laps == 0 {
                    return Err(Error::invalid("circle needs at least one lap"));
                }
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        match self {
            PathSpec::Line { start, end } => (end - start).norm(),
            PathSpec::Circle { radius, laps, .. } => 2.0 * PI * radius * f64::from(*laps),
        }
    }

    /// Axes of the task coordinates (`xy` or `xyz`).
    pub fn task_axes(&self) -> AxisSelector {
        if self.dim() == 2 {
            AxisSelector::xy()
        } else {
            AxisSelector::xyz()
        }
    }
}

/// Point on the path and unit tangent at arc length `sigma` (clamped to the path).
pub fn path_eval(path: &PathSpec, sigma: f64) -> (DVector<f64>, DVector<f64>) {
    let sigma = sigma.clamp(0.0, path.length());
    match path {
        PathSpec::Line { start, end } => {
            let dir = (end - start) / path.length();
            (start + &dir * sigma, dir)
        }
        PathSpec::Circle {
            center,
            radius,
            plane,
            ..
        } => {
            let theta = sigma / radius;
            let (s, c) = theta.sin_cos();
            let mut x = center.clone();
            let mut tangent = DVector::zeros(center.len());
            x[plane.0.index()] += radius * c;
            x[plane.1.index()] += radius * s;
            tangent[plane.0.index()] = -s;
            tangent[plane.1.index()] = c;
            (x, tangent)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimingLaw {
    /// Rest-to-rest fifth-order polynomial covering `length` in `duration`.
    Quintic { duration: f64, length: f64 },
    /// Accelerate / cruise / decelerate; triangular when the cruise speed is
    /// not reachable within `length`.
    Trapezoid { cruise_v: f64, max_a: f64, length: f64 },
}

impl TimingLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimingLaw::Quintic { duration, length } => duration > 0.0 && length >= 0.0,
            TimingLaw::Trapezoid {
                cruise_v,
                max_a,
                length,
            } => cruise_v > 0.0 && max_a > 0.0 && length >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("timing law parameters must be positive"))
        }
    }

    /// Time at which the motion is complete.
    pub fn total_time(&self) -> f64 {
        match *self {
            TimingLaw::Quintic { duration, .. } => duration,
            TimingLaw::Trapezoid {
                cruise_v,
                max_a,
                length,
            } => {
                let (_, t_acc, t_cruise) = trapezoid_phases(cruise_v, max_a, length);
                2.0 * t_acc + t_cruise
            }
        }
    }
}

/// (peak speed, acceleration time, cruise time)
fn trapezoid_phases(cruise_v: f64, max_a: f64, length: f64) -> (f64, f64, f64) {
    let v_peak = cruise_v.min((max_a * length).sqrt());
    let t_acc = v_peak / max_a;
    let d_acc = 0.5 * v_peak * t_acc;
    let t_cruise = if v_peak > 0.0 {
        (length - 2.0 * d_acc).max(0.0) / v_peak
    } else {
        0.0
    };
    (v_peak, t_acc, t_cruise)
}

/// Path parameter and its rate at time `t`.
pub fn timing_eval(law: &TimingLaw, t: f64) -> (f64, f64) {
    let t = t.max(0.0);
    match *law {
        TimingLaw::Quintic { duration, length } => {
            let tau = (t / duration).clamp(0.0, 1.0);
            let tau2 = tau * tau;
            let tau3 = tau2 * tau;
            let sigma = length * tau3 * (10.0 - 15.0 * tau + 6.0 * tau2);
            let sigma_dot = length / duration * 30.0 * tau2 * (1.0 - 2.0 * tau + tau2);
            (sigma, sigma_dot)
        }
        TimingLaw::Trapezoid {
            cruise_v,
            max_a,
            length,
        } => {
            let (v_peak, t_acc, t_cruise) = trapezoid_phases(cruise_v, max_a, length);
            let t_dec = t_acc + t_cruise;
            let t_end = t_dec + t_acc;
            if t <= t_acc {
                (0.5 * max_a * t * t, max_a * t)
            } else if t <= t_dec {
                (0.5 * v_peak * t_acc + v_peak * (t - t_acc), v_peak)
            } else if t < t_end {
                let r = t_end - t;
                (length - 0.5 * max_a * r * r, max_a * r)
            } else {
                (length, 0.0)
            }
        }
    }
}

/// Diagonal proportional gain on the task-space position error.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLaw {
    pub k_p: DVector<f64>,
}

impl FeedbackLaw {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.k_p.len() != dim {
            return Err(Error::invalid(format!("feedback gain has {} entries, task has {dim}", self.k_p.len())));
        }
        if !self.k_p.iter().all(|&k| k > 0.0 && k.is_finite()) {
            return Err(Error::invalid("feedback gains must be positive"));
        }
        Ok(())
    }
}

/// Desired position/velocity at `t` and the feedback-corrected task velocity
/// `sigma_dot * tangent + K_p (x_d - f(q))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSample {
    pub x_desired: DVector<f64>,
    pub x_actual: DVector<f64>,
    pub x_dot: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

impl TaskSample {
    pub fn error(&self) -> DVector<f64> {
        &self.x_desired - &self.x_actual
    }
}

pub fn task_sample(
    path: &PathSpec,
    law: &TimingLaw,
    fb: &FeedbackLaw,
    q: &DVector<f64>,
    model: &RobotModel,
    t: f64,
) -> Result<TaskSample> {
    let sel = path.task_axes();
    let ee = model.end_effector();
    let (sigma, sigma_dot) = timing_eval(law, t);
    let (x_desired, tangent) = path_eval(path, sigma);
    let x_actual = kinematics::forward_position(model, q, &ee, &sel)?;
    if fb.k_p.len() != x_desired.len() {
        return Err(Error::invalid("feedback gain and path dimension differ"));
    }
    let x_dot = tangent * sigma_dot + fb.k_p.component_mul(&(&x_desired - &x_actual));
    let jacobian = kinematics::jacobian(model, q, &ee, &sel)?;
    Ok(TaskSample {
        x_desired,
        x_actual,
        x_dot,
        jacobian,
    })
}

/// Feedback-corrected task velocity at time `t`.
pub fn task_reference(
    path: &PathSpec,
    law: &TimingLaw,
    fb: &FeedbackLaw,
    q: &DVector<f64>,
    model: &RobotModel,
    t: f64,
) -> Result<DVector<f64>> {
    Ok(task_sample(path, law, fb, q, model, t)?.x_dot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn quintic_boundaries_and_midpoint() {
        let law = TimingLaw::Quintic {
            duration: 10.0,
            length: 3.0,
        };
        assert_eq!(timing_eval(&law, 0.0), (0.0, 0.0));
        assert_eq!(timing_eval(&law, 10.0), (3.0, 0.0));
        assert_eq!(timing_eval(&law, 25.0), (3.0, 0.0));
        let (s, sd) = timing_eval(&law, 5.0);
        assert!((s - 1.5).abs() < 1e-15);
        assert!((sd - 1.875 * 3.0 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_reaches_cruise_after_one_second() {
        let law = TimingLaw::Trapezoid {
            cruise_v: 0.15,
            max_a: 0.15,
            length: 2.0 * PI * 0.25 * 3.0,
        };
        assert!((timing_eval(&law, 1.0).1 - 0.15).abs() < 1e-15);
        assert_eq!(timing_eval(&law, 2.0).1, 0.15);
        assert_eq!(timing_eval(&law, 7.0).1, 0.15);
        let t_end = law.total_time();
        assert_eq!(timing_eval(&law, t_end + 1.0), (2.0 * PI * 0.25 * 3.0, 0.0));
    }

    #[test]
    fn trapezoid_degenerates_to_triangle() {
        let law = TimingLaw::Trapezoid {
            cruise_v: 10.0,
            max_a: 1.0,
            length: 1.0,
        };
        // Peak speed sqrt(a L) = 1 reached at t = 1, finished at t = 2.
        assert!((law.total_time() - 2.0).abs() < 1e-15);
        let (s, sd) = timing_eval(&law, 1.0);
        assert!((s - 0.5).abs() < 1e-15);
        assert!((sd - 1.0).abs() < 1e-15);
    }

    #[test]
    fn line_examples() {
        let path = PathSpec::Line {
            start: v(&[0.0, 0.0]),
            end: v(&[1.0, 0.0]),
        };
        let (x, d) = path_eval(&path, 0.25);
        assert_eq!(x, v(&[0.25, 0.0]));
        assert_eq!(d, v(&[1.0, 0.0]));
    }

    #[test]
    fn circle_closes_after_one_lap() {
        let path = PathSpec::Circle {
            center: v(&[0.0, 0.5, 1.5]),
            radius: 0.25,
            plane: (Axis::X, Axis::Y),
            laps: 3,
        };
        let (start, _) = path_eval(&path, 0.0);
        let (lap, _) = path_eval(&path, 2.0 * PI * 0.25);
        assert!((start - lap).norm() < 1e-15);
        for i in 0..50 {
            let (x, t) = path_eval(&path, path.length() * f64::from(i) / 49.0);
            assert!(((&x - v(&[0.0, 0.5, 1.5])).norm() - 0.25).abs() < 1e-12);
            assert!((t.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn reference_examples() {
        let model = RobotModel::planar(vec![1.0, 1.0]).unwrap();
        let q = DVector::zeros(2);
        let fb = FeedbackLaw { k_p: v(&[2.0, 2.0]) };
        // EE at (2, 0); line through it along y.
        let path = PathSpec::Line {
            start: v(&[2.0, 0.0]),
            end: v(&[2.0, 1.0]),
        };
        let rest = TimingLaw::Quintic {
            duration: 1.0,
            length: 1.0,
        };
        let x_dot = task_reference(&path, &rest, &fb, &q, &model, 0.0).unwrap();
        assert_eq!(x_dot, v(&[0.0, 0.0]));

        let cruise = TimingLaw::Trapezoid {
            cruise_v: 0.3,
            max_a: 0.3,
            length: 1.0,
        };
        let x_dot = task_reference(&path, &cruise, &fb, &q, &model, 1.0).unwrap();
        // sigma = 0.15 at t = 1, so the desired point sits 0.15 ahead of the EE.
        assert!((x_dot - v(&[0.0, 0.3 + 2.0 * 0.15])).norm() < 1e-12);

        let offset = PathSpec::Line {
            start: v(&[2.1, -0.2]),
            end: v(&[3.0, -0.2]),
        };
        let x_dot = task_reference(&offset, &rest, &fb, &q, &model, 0.0).unwrap();
        assert!((x_dot - v(&[0.2, -0.4])).norm() < 1e-12);
    }
}
