//! Saturation in the null space with generalized joint/Cartesian limits.
//!
//! [`sns_solve`] starts from the minimum-norm task solution and, while some
//! row of the augmented system leaves its box, pins the single most critical
//! row at its bound and re-solves the task in the null space of everything
//! pinned so far. When pinning a non-task row exhausts the redundancy, the best
//! task scaling seen so far is applied instead, so the commanded end-effector
//! velocity keeps its direction.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::constraints::{AugmentedSystem, RowTag};
use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_REL_TOL};

/// Absolute slack on box membership.
pub const DEFAULT_EPS: f64 = 1e-8;
/// Iteration cap as a multiple of the row count of `A`.
pub const DEFAULT_ITER_MULTIPLIER: usize = 2;

/// Desired task velocity and its Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRef {
    pub x_dot: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

impl TaskRef {
    pub fn new(x_dot: DVector<f64>, jacobian: DMatrix<f64>) -> Result<Self> {
        if x_dot.len() != jacobian.nrows() {
            return Err(Error::invalid(format!(
                "task has {} velocities but Jacobian has {} rows",
                x_dot.len(),
                jacobian.nrows()
            )));
        }
        if !linalg::is_finite_vec(&x_dot) || !linalg::is_finite(&jacobian) {
            return Err(Error::invalid("task has non-finite entries"));
        }
        Ok(TaskRef { x_dot, jacobian })
    }

    pub fn dim(&self) -> usize {
        self.x_dot.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Saturation {
    pub row: usize,
    pub tag: RowTag,
    pub side: Side,
    pub value: f64,
}

impl fmt::Display for Saturation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.side {
            Side::Min => '-',
            Side::Max => '+',
        };
        write!(f, "{}{s}", self.tag)
    }
}

/// Rows pinned at a bound, in the order they were saturated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SaturationRecord(pub Vec<Saturation>);

impl SaturationRecord {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Saturation> {
        self.0.iter()
    }

    pub fn contains_row(&self, row: usize) -> bool {
        self.0.iter().any(|s| s.row == row)
    }

    /// `;`-joined tags such as `q3+;cp2.y-`.
    pub fn tags(&self) -> String {
        self.0.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnsStatus {
    /// Task realized exactly with no task-coincident row pinned.
    Exact,
    /// Task realized except for task-coincident rows pinned at their bounds.
    TaskSaturated,
    /// Task scaled by `0 < s < 1`.
    Scaled,
    /// No positive scaling was feasible.
    Blocked,
}

impl SnsStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SnsStatus::Exact => "exact",
            SnsStatus::TaskSaturated => "task_saturated",
            SnsStatus::Scaled => "scaled",
            SnsStatus::Blocked => "blocked",
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, SnsStatus::Exact | SnsStatus::TaskSaturated)
    }
}

impl fmt::Display for SnsStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SnsStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SnsStatus::Exact),
            "task_saturated" => Ok(SnsStatus::TaskSaturated),
            "scaled" => Ok(SnsStatus::Scaled),
            "blocked" => Ok(SnsStatus::Blocked),
            other => Err(Error::invalid(format!("unknown status `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnsSolution {
    pub q_dot: DVector<f64>,
    /// 1 when the task is not scaled.
    pub s_star: f64,
    pub saturations: SaturationRecord,
    pub status: SnsStatus,
    pub iterations: usize,
    /// Scaling factor computed at each violating iteration.
    pub scale_history: Vec<f64>,
}

/// Which of the five branches of the per-row scaling rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalingBranch {
    /// Decreasing row hits its lower bound before `s = 1`.
    LowerLimited,
    /// Decreasing row stays above its lower bound up to `s = 1`.
    LowerFree,
    /// Increasing row hits its upper bound before `s = 1`.
    UpperLimited,
    /// Increasing row stays below its upper bound up to `s = 1`.
    UpperFree,
    /// Everything else: no positive scaling is admissible for the row.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub s: f64,
    /// Row achieving the minimum; the lowest index wins ties.
    pub critical_row: usize,
    pub per_row_s: DVector<f64>,
    pub branches: Vec<ScalingBranch>,
}

/// Largest admissible scaling of one row, `s alpha + beta in [lo, hi]`.
///
/// Rows whose bias already lies outside the box (checked on the side the row
/// is moving toward) get zero, like rows with `alpha = 0`.
pub fn row_scaling(alpha: f64, beta: f64, lo: f64, hi: f64) -> (f64, ScalingBranch) {
    let l = lo - beta;
    let u = hi - beta;
    if alpha < 0.0 && l < 0.0 && u >= 0.0 {
        if alpha < l {
            (l / alpha, ScalingBranch::LowerLimited)
        } else {
            (1.0, ScalingBranch::LowerFree)
        }
    } else if alpha > 0.0 && u > 0.0 && l <= 0.0 {
        if alpha > u {
            (u / alpha, ScalingBranch::UpperLimited)
        } else {
            (1.0, ScalingBranch::UpperFree)
        }
    } else {
        (0.0, ScalingBranch::Zero)
    }
}

/// Task scaling factor over all rows: the minimum per-row factor.
pub fn task_scaling_factor(
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    b_min: &DVector<f64>,
    b_max: &DVector<f64>,
) -> Result<ScalingResult> {
    let r = alpha.len();
    if beta.len() != r || b_min.len() != r || b_max.len() != r {
        return Err(Error::invalid("task_scaling_factor: length mismatch"));
    }
    if r == 0 {
        return Err(Error::invalid("task_scaling_factor: no rows"));
    }
    let mut per_row_s = DVector::zeros(r);
    let mut branches = Vec::with_capacity(r);
    let mut critical_row = 0;
    for h in 0..r {
        let (s, b) = row_scaling(alpha[h], beta[h], b_min[h], b_max[h]);
        per_row_s[h] = s;
        branches.push(b);
        if s < per_row_s[critical_row] {
            critical_row = h;
        }
    }
    Ok(ScalingResult {
        s: per_row_s[critical_row],
        critical_row,
        per_row_s,
        branches,
    })
}

/// `J# x_dot`, rejecting rank-deficient task Jacobians.
pub fn min_norm_solution(task: &TaskRef, rel_tol: f64) -> Result<DVector<f64>> {
    let m = task.dim();
    let rank = linalg::numerical_rank(&task.jacobian, rel_tol)?;
    if rank < m {
        return Err(Error::SingularTask { rank, expected: m });
    }
    Ok(linalg::pinv(&task.jacobian, rel_tol)? * &task.x_dot)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub rel_tol: f64,
    pub eps: f64,
    pub iter_multiplier: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rel_tol: DEFAULT_REL_TOL,
            eps: DEFAULT_EPS,
            iter_multiplier: DEFAULT_ITER_MULTIPLIER,
        }
    }
}

impl SolverSettings {
    pub fn max_iter(&self, rows: usize) -> usize {
        (self.iter_multiplier * rows).max(1)
    }
}

struct Pinned {
    rows: Vec<usize>,
    values: Vec<f64>,
}

impl Pinned {
    fn matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows.len(), a.ncols());
        for (i, &r) in self.rows.iter().enumerate() {
            out.row_mut(i).copy_from(&a.row(r));
        }
        out
    }

    fn values(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}

/// `q_n + (J P)# (s x_dot - J q_n)`.
fn projected_command(
    task: &TaskRef,
    p: &DMatrix<f64>,
    q_n: &DVector<f64>,
    s: f64,
    rel_tol: f64,
) -> Result<DVector<f64>> {
    let jp_pinv = linalg::pinv_scaled(&(&task.jacobian * p), rel_tol, linalg::spectral_norm(&task.jacobian)?)?;
    let x = if s == 1.0 { task.x_dot.clone() } else { &task.x_dot * s };
    Ok(q_n + jp_pinv * (x - &task.jacobian * q_n))
}

/// Run the saturation loop for one control tick.
pub fn sns_solve(task: &TaskRef, sys: &AugmentedSystem, settings: &SolverSettings) -> Result<SnsSolution> {
    sys.check()?;
    let n = sys.joints();
    if task.jacobian.ncols() != n {
        return Err(Error::invalid(format!(
            "task Jacobian has {} columns, augmented system has {n}",
            task.jacobian.ncols()
        )));
    }
    let m = task.dim();
    let rows = sys.rows();
    let tol = settings.rel_tol;
    let eps = settings.eps;
    // Rank decisions on `J P` are made relative to `J`, so a product that is
    // zero up to rounding is not mistaken for a full-rank one.
    let j_norm = linalg::spectral_norm(&task.jacobian)?;
    let lo = sys.b_min.add_scalar(-eps);
    let hi = sys.b_max.add_scalar(eps);

    let mut q_n = DVector::zeros(n);
    let mut p = DMatrix::identity(n, n);
    let mut s_star = 0.0;
    let mut q_n_star = q_n.clone();
    let mut p_star = p.clone();
    let mut pinned = Pinned {
        rows: Vec::new(),
        values: Vec::new(),
    };
    let mut record = SaturationRecord::default();
    let mut history = Vec::new();

    let fallback = |s_star: f64,
                    q_n_star: &DVector<f64>,
                    p_star: &DMatrix<f64>,
                    record: SaturationRecord,
                    history: Vec<f64>,
                    iterations: usize|
     -> Result<SnsSolution> {
        if s_star > 0.0 {
            Ok(SnsSolution {
                q_dot: projected_command(task, p_star, q_n_star, s_star, tol)?,
                s_star,
                saturations: record,
                status: SnsStatus::Scaled,
                iterations,
                scale_history: history,
            })
        } else {
            Ok(SnsSolution {
                q_dot: q_n_star.clone(),
                s_star: 0.0,
                saturations: record,
                status: SnsStatus::Blocked,
                iterations,
                scale_history: history,
            })
        }
    };

    let max_iter = settings.max_iter(rows);
    for iteration in 1..=max_iter {
        let jp_pinv = linalg::pinv_scaled(&(&task.jacobian * &p), tol, j_norm)?;
        let q_dot = &q_n + &jp_pinv * (&task.x_dot - &task.jacobian * &q_n);
        let a_dot = &sys.a * &q_dot;

        let violated = (0..rows).any(|h| a_dot[h] < lo[h] || a_dot[h] > hi[h]);
        if !violated {
            let status = if record.iter().any(|s| s.tag.coincides_with_task()) {
                SnsStatus::TaskSaturated
            } else {
                SnsStatus::Exact
            };
            return Ok(SnsSolution {
                q_dot,
                s_star: 1.0,
                saturations: record,
                status,
                iterations: iteration,
                scale_history: history,
            });
        }

        let alpha = &sys.a * (&jp_pinv * &task.x_dot);
        let beta = &a_dot - &alpha;

        // Pinned rows hold their values by construction, and a row the task
        // cannot move that already sits inside its box places no limit on s.
        let candidates: Vec<usize> = (0..rows)
            .filter(|&h| !record.contains_row(h))
            .filter(|&h| !(alpha[h] == 0.0 && lo[h] <= beta[h] && beta[h] <= hi[h]))
            .collect();
        if candidates.is_empty() {
            return fallback(s_star, &q_n_star, &p_star, record, history, iteration);
        }
        let pick = |v: &DVector<f64>| DVector::from_iterator(candidates.len(), candidates.iter().map(|&h| v[h]));
        let scaling = task_scaling_factor(&pick(&alpha), &pick(&beta), &pick(&sys.b_min), &pick(&sys.b_max))?;
        let k = candidates[scaling.critical_row];
        let s_k = scaling.s;
        history.push(s_k);

        if s_k > s_star {
            s_star = s_k;
            q_n_star = q_n.clone();
            p_star = p.clone();
        }

        let side = if beta[k] < lo[k] {
            Side::Min
        } else if beta[k] > hi[k] {
            Side::Max
        } else if alpha[k] < 0.0 {
            Side::Min
        } else {
            Side::Max
        };
        let value = match side {
            Side::Min => sys.b_min[k],
            Side::Max => sys.b_max[k],
        };
        pinned.rows.push(k);
        pinned.values.push(value);
        record.0.push(Saturation {
            row: k,
            tag: sys.row_tags[k].clone(),
            side,
            value,
        });

        let a_lim = pinned.matrix(&sys.a);
        // A row dependent on the already pinned ones cannot be enforced separately.
        if linalg::numerical_rank(&a_lim, tol)? < a_lim.nrows() {
            return fallback(s_star, &q_n_star, &p_star, record, history, iteration);
        }
        p = linalg::null_projector(&a_lim, tol)?;

        let task_row = sys.row_tags[k].coincides_with_task();
        if !task_row && linalg::numerical_rank_scaled(&(&task.jacobian * &p), tol, j_norm)? < m {
            return fallback(s_star, &q_n_star, &p_star, record, history, iteration);
        }

        q_n = linalg::pinv(&a_lim, tol)? * pinned.values();
    }

    let best = fallback(s_star, &q_n_star, &p_star, record, history, max_iter)?;
    Err(Error::SolverDivergence {
        iterations: max_iter,
        best: Box::new(best),
        tick: None,
        time: None,
    })
}
