//! Exhaustive reference solver for small instances.
//!
//! The feasible set `{qdot : J qdot = s x_dot, b_min <= A qdot <= b_max}` is a
//! bounded polytope (the joint rows of `A` box every coordinate), so whenever
//! it is non-empty it has a vertex where some rows of `A` sit at a bound. The
//! oracle enumerates those active sets, solves each equality system through
//! normal equations with an LU factorization, and keeps any candidate inside
//! the box. The best scale is then found by bisection on `s`.
//!
//! Nothing here goes through the SVD pseudoinverse used by the solver.

use nalgebra::{DMatrix, DVector};

use crate::constraints::AugmentedSystem;
use crate::error::{Error, Result};
use crate::solver::TaskRef;

pub const MAX_JOINTS: usize = 6;
pub const MAX_ROWS: usize = 12;
/// Bisection stops once the bracket on `s` is this narrow.
pub const SCALE_RESOLUTION: f64 = 1e-6;
/// Slack used for witness equality residuals and box membership.
pub const WITNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleVerdict {
    /// Some `qdot` realizes the full task inside the box.
    pub feasible_exact: bool,
    /// Largest `s` in `[0, 1]` (to the bisection resolution) for which
    /// `J qdot = s x_dot` is achievable inside the box; 0 if even `s = 0` fails.
    pub best_scale: f64,
    /// Joint velocity achieving `best_scale`, when one exists.
    pub witness: Option<DVector<f64>>,
}

pub fn oracle_solve(task: &TaskRef, sys: &AugmentedSystem) -> Result<OracleVerdict> {
    sys.check()?;
    let n = sys.joints();
    let rows = sys.rows();
    if n > MAX_JOINTS || rows > MAX_ROWS {
        return Err(Error::OracleBudget(format!(
            "{n} joints and {rows} rows (limits {MAX_JOINTS} and {MAX_ROWS})"
        )));
    }
    if task.jacobian.ncols() != n {
        return Err(Error::invalid("task and augmented system disagree on joint count"));
    }

    if let Some(w) = feasible_at(task, sys, 1.0) {
        return Ok(OracleVerdict {
            feasible_exact: true,
            best_scale: 1.0,
            witness: Some(w),
        });
    }
    let Some(mut witness) = feasible_at(task, sys, 0.0) else {
        return Ok(OracleVerdict {
            feasible_exact: false,
            best_scale: 0.0,
            witness: None,
        });
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > SCALE_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        match feasible_at(task, sys, mid) {
            Some(w) => {
                lo = mid;
                witness = w;
            }
            None => hi = mid,
        }
    }
    Ok(OracleVerdict {
        feasible_exact: false,
        best_scale: lo,
        witness: Some(witness),
    })
}

/// Any `qdot` inside the box with `J qdot = s x_dot`.
pub fn feasible_at(task: &TaskRef, sys: &AugmentedSystem, s: f64) -> Option<DVector<f64>> {
    let n = sys.joints();
    let rows = sys.rows();
    let target = &task.x_dot * s;
    let free_dims = n.saturating_sub(task.dim());
    let mut chosen: Vec<(usize, bool)> = Vec::with_capacity(free_dims);
    for size in 0..=free_dims.min(rows) {
        if let Some(w) = search(task, sys, &target, size, 0, &mut chosen) {
            return Some(w);
        }
    }
    None
}

fn search(
    task: &TaskRef,
    sys: &AugmentedSystem,
    target: &DVector<f64>,
    size: usize,
    from: usize,
    chosen: &mut Vec<(usize, bool)>,
) -> Option<DVector<f64>> {
    if chosen.len() == size {
        return candidate(task, sys, target, chosen);
    }
    for row in from..sys.rows() {
        for upper in [false, true] {
            // Equal bounds make both sides the same constraint.
            if upper && sys.b_min[row] == sys.b_max[row] {
                continue;
            }
            chosen.push((row, upper));
            let found = search(task, sys, target, size, row + 1, chosen);
            chosen.pop();
            if found.is_some() {
                return found;
            }
        }
    }
    None
}

fn candidate(
    task: &TaskRef,
    sys: &AugmentedSystem,
    target: &DVector<f64>,
    active: &[(usize, bool)],
) -> Option<DVector<f64>> {
    let n = sys.joints();
    let m = task.dim();
    let k = m + active.len();
    let mut mat = DMatrix::zeros(k, n);
    let mut rhs = DVector::zeros(k);
    mat.rows_mut(0, m).copy_from(&task.jacobian);
    rhs.rows_mut(0, m).copy_from(target);
    for (i, &(row, upper)) in active.iter().enumerate() {
        mat.row_mut(m + i).copy_from(&sys.a.row(row));
        rhs[m + i] = if upper { sys.b_max[row] } else { sys.b_min[row] };
    }
    let q = min_norm_solve(&mat, &rhs)?;
    let residual = (&mat * &q - &rhs).amax();
    if !(residual <= WITNESS_TOL * (1.0 + rhs.amax())) {
        return None;
    }
    let a_dot = &sys.a * &q;
    let inside = (0..sys.rows())
        .all(|h| a_dot[h] >= sys.b_min[h] - WITNESS_TOL && a_dot[h] <= sys.b_max[h] + WITNESS_TOL);
    inside.then_some(q)
}

/// Minimum-norm solution of an underdetermined system via `M^T (M M^T)^-1 r`.
fn min_norm_solve(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if mat.nrows() > mat.ncols() {
        return None;
    }
    let gram = mat * mat.transpose();
    let y = gram.lu().solve(rhs)?;
    let q = mat.transpose() * y;
    q.iter().all(|x| x.is_finite()).then_some(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn toy_instance_scales_to_first_bound() {
        let task = TaskRef::new(v(&[1.0]), DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let sys = AugmentedSystem::joints_only(v(&[-0.4, -1.0]), v(&[0.4, 1.0]));
        let verdict = oracle_solve(&task, &sys).unwrap();
        assert!(!verdict.feasible_exact);
        assert!((verdict.best_scale - 0.4).abs() < 2.0 * SCALE_RESOLUTION);
        let w = verdict.witness.unwrap();
        assert!(((&task.jacobian * &w)[0] - verdict.best_scale).abs() < 1e-9);
    }

    #[test]
    fn wide_box_gives_min_norm_witness() {
        let j = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, -1.0]);
        let task = TaskRef::new(v(&[3.0]), j.clone()).unwrap();
        let sys = AugmentedSystem::joints_only(v(&[-1e9; 3]), v(&[1e9; 3]));
        let verdict = oracle_solve(&task, &sys).unwrap();
        assert!(verdict.feasible_exact);
        assert_eq!(verdict.best_scale, 1.0);
        let expected = j.transpose() * 3.0 / 6.0;
        assert!((verdict.witness.unwrap() - expected.column(0)).amax() < 1e-8);
    }

    #[test]
    fn budget_is_enforced() {
        let task = TaskRef::new(v(&[1.0]), DMatrix::from_element(1, 7, 1.0)).unwrap();
        let sys = AugmentedSystem::joints_only(v(&[-1.0; 7]), v(&[1.0; 7]));
        assert!(matches!(oracle_solve(&task, &sys), Err(Error::OracleBudget(_))));
    }

    #[test]
    fn infeasible_rest_gives_zero_scale() {
        let task = TaskRef::new(v(&[1.0]), DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap();
        let sys = AugmentedSystem::joints_only(v(&[0.5, 0.5]), v(&[0.6, 0.6]));
        // J qdot >= 1.0 always, so s = 1 is feasible, s = 0 is not.
        let verdict = oracle_solve(&task, &sys).unwrap();
        assert!(verdict.feasible_exact);
        let sys = AugmentedSystem::joints_only(v(&[0.6, 0.6]), v(&[0.7, 0.7]));
        let verdict = oracle_solve(&task, &sys).unwrap();
        assert!(!verdict.feasible_exact);
        assert_eq!(verdict.best_scale, 0.0);
        assert!(verdict.witness.is_none());
    }
}
