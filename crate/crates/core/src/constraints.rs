//! Hard limits and their conversion into the per-tick velocity box.
//!
//! Position, velocity and (braking) acceleration limits of every joint and of
//! every active Cartesian control point are folded into one box
//! `b_min <= A qdot <= b_max`, where `A` stacks the identity on top of the
//! control-point Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kinematics::{self, Axis, AxisSelector, FramePoint, RobotModel};

#[derive(Debug, Clone, PartialEq)]
pub struct JointLimits {
    pub q_min: DVector<f64>,
    pub q_max: DVector<f64>,
    pub v_min: DVector<f64>,
    pub v_max: DVector<f64>,
    /// Symmetric acceleration bound used for braking.
    pub a_max: DVector<f64>,
}

impl JointLimits {
    pub fn symmetric(n: usize, q: f64, v: f64, a: f64) -> Self {
        JointLimits {
            q_min: DVector::from_element(n, -q),
            q_max: DVector::from_element(n, q),
            v_min: DVector::from_element(n, -v),
            v_max: DVector::from_element(n, v),
            a_max: DVector::from_element(n, a),
        }
    }

    pub fn len(&self) -> usize {
        self.q_min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_min.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q_min.len();
        for (name, v) in [
            ("q_max", &self.q_max),
            ("v_min", &self.v_min),
            ("v_max", &self.v_max),
            ("a_max", &self.a_max),
        ] {
            if v.len() != n {
                return Err(Error::invalid(format!("joint limit `{name}` has {} entries, expected {n}", v.len())));
            }
        }
        for j in 0..n {
            check_bounds(
                &format!("joint {}", j + 1),
                self.q_min[j],
                self.q_max[j],
                self.v_min[j],
                self.v_max[j],
                self.a_max[j],
                false,
            )?;
        }
        Ok(())
    }

    /// Copy with every limit multiplied by `factor`.
    pub fn widened(&self, factor: f64) -> Self {
        JointLimits {
            q_min: &self.q_min * factor,
            q_max: &self.q_max * factor,
            v_min: &self.v_min * factor,
            v_max: &self.v_max * factor,
            a_max: &self.a_max * factor,
        }
    }
}

fn check_bounds(what: &str, p_lo: f64, p_hi: f64, v_lo: f64, v_hi: f64, a: f64, allow_inf_pos: bool) -> Result<()> {
    let pos_ok = if allow_inf_pos {
        !p_lo.is_nan() && !p_hi.is_nan() && p_lo != f64::INFINITY && p_hi != f64::NEG_INFINITY && p_lo < p_hi
    } else {
        p_lo.is_finite() && p_hi.is_finite() && p_lo < p_hi
    };
    if !pos_ok {
        return Err(Error::invalid(format!("{what}: position bounds [{p_lo}, {p_hi}] are not ordered")));
    }
    if !(v_lo.is_finite() && v_hi.is_finite() && v_lo < 0.0 && 0.0 < v_hi) {
        return Err(Error::invalid(format!("{what}: velocity bounds must satisfy v_min < 0 < v_max")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!("{what}: acceleration bound must be positive and finite")));
    }
    Ok(())
}

/// Closed activation interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartesianConstraint {
    pub id: String,
    pub point: FramePoint,
    pub sel: AxisSelector,
    /// May hold infinities for one-sided or velocity-only bounds.
    pub p_min: DVector<f64>,
    pub p_max: DVector<f64>,
    pub v_min: DVector<f64>,
    pub v_max: DVector<f64>,
    pub a_max: DVector<f64>,
    pub window: Option<Window>,
    /// The control point is (part of) the end-effector task.
    pub coincides_with_task: bool,
}

impl CartesianConstraint {
    pub fn dim(&self) -> usize {
        self.sel.len()
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.window.is_none_or(|w| w.contains(t))
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (name, v) in [
            ("p_min", &self.p_min),
            ("p_max", &self.p_max),
            ("v_min", &self.v_min),
            ("v_max", &self.v_max),
            ("a_max", &self.a_max),
        ] {
            if v.len() != d {
                return Err(Error::invalid(format!(
                    "constraint `{}`: `{name}` has {} entries, expected {d}",
                    self.id,
                    v.len()
                )));
            }
        }
        for i in 0..d {
            check_bounds(
                &format!("constraint `{}` axis {}", self.id, self.sel.axes()[i]),
                self.p_min[i],
                self.p_max[i],
                self.v_min[i],
                self.v_max[i],
                self.a_max[i],
                true,
            )?;
        }
        if let Some(w) = self.window {
            if !(w.start.is_finite() && w.end.is_finite() && w.start <= w.end) {
                return Err(Error::invalid(format!("constraint `{}`: window is not ordered", self.id)));
            }
        }
        Ok(())
    }

    pub fn widened(&self, factor: f64) -> Self {
        CartesianConstraint {
            p_min: &self.p_min * factor,
            p_max: &self.p_max * factor,
            v_min: &self.v_min * factor,
            v_max: &self.v_max * factor,
            a_max: &self.a_max * factor,
            ..self.clone()
        }
    }
}

/// Velocity interval for one coordinate.
///
/// The braking term `sqrt(2 a (distance))` is clamped at zero distance. If the
/// coordinate already sits beyond a position bound the resulting interval can
/// invert; it then collapses to the single velocity that moves back toward the
/// bound as fast as the velocity limits allow.
pub fn shape_axis(p: f64, p_min: f64, p_max: f64, v_min: f64, v_max: f64, a_max: f64, dt: f64) -> (f64, f64) {
    let lo = ((p_min - p) / dt)
        .max(v_min)
        .max(-(2.0 * a_max * (p - p_min).max(0.0)).sqrt());
    let hi = ((p_max - p) / dt)
        .min(v_max)
        .min((2.0 * a_max * (p_max - p).max(0.0)).sqrt());
    if lo <= hi {
        return (lo, hi);
    }
    let target = if p > p_max {
        hi
    } else if p < p_min {
        lo
    } else {
        // Cannot happen for a state inside its bounds; keep the point closest to rest.
        0.0_f64.clamp(hi, lo)
    };
    let v = target.clamp(v_min, v_max);
    (v, v)
}

/// Velocity box for every joint.
pub fn shape_joint_box(q: &DVector<f64>, lim: &JointLimits, dt: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    if q.len() != lim.len() {
        return Err(Error::invalid(format!("expected {} joints, got {}", lim.len(), q.len())));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("sample time must be positive"));
    }
    let n = q.len();
    let mut lo = DVector::zeros(n);
    let mut hi = DVector::zeros(n);
    for j in 0..n {
        let (l, h) = shape_axis(q[j], lim.q_min[j], lim.q_max[j], lim.v_min[j], lim.v_max[j], lim.a_max[j], dt);
        lo[j] = l;
        hi[j] = h;
    }
    Ok((lo, hi))
}

/// Velocity box of one control point, given its current selected-axis position.
pub fn shape_cartesian_box(
    p: &DVector<f64>,
    c: &CartesianConstraint,
    dt: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let d = c.dim();
    if p.len() != d {
        return Err(Error::invalid(format!("constraint `{}`: expected {d} coordinates, got {}", c.id, p.len())));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("sample time must be positive"));
    }
    let mut lo = DVector::zeros(d);
    let mut hi = DVector::zeros(d);
    for i in 0..d {
        let (l, h) = shape_axis(p[i], c.p_min[i], c.p_max[i], c.v_min[i], c.v_max[i], c.a_max[i], dt);
        lo[i] = l;
        hi[i] = h;
    }
    Ok((lo, hi))
}

/// Where a row of the augmented system comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowTag {
    /// 0-based joint index.
    Joint(usize),
    Cartesian {
        id: String,
        axis: Axis,
        coincides_with_task: bool,
    },
}

impl RowTag {
    pub fn coincides_with_task(&self) -> bool {
        matches!(
            self,
            RowTag::Cartesian {
                coincides_with_task: true,
                ..
            }
        )
    }
}

impl std::fmt::Display for RowTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowTag::Joint(j) => write!(f, "q{}", j + 1),
            RowTag::Cartesian { id, axis, .. } => write!(f, "{id}.{axis}"),
        }
    }
}

/// Stacked constraint map `A` with its velocity box at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub a: DMatrix<f64>,
    pub b_min: DVector<f64>,
    pub b_max: DVector<f64>,
    pub row_tags: Vec<RowTag>,
}

impl AugmentedSystem {
    /// Joint-only system with `A = I`.
    pub fn joints_only(b_min: DVector<f64>, b_max: DVector<f64>) -> Self {
        let n = b_min.len();
        AugmentedSystem {
            a: DMatrix::identity(n, n),
            b_min,
            b_max,
            row_tags: (0..n).map(RowTag::Joint).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn joints(&self) -> usize {
        self.a.ncols()
    }

    pub fn check(&self) -> Result<()> {
        let r = self.a.nrows();
        if self.b_min.len() != r || self.b_max.len() != r || self.row_tags.len() != r {
            return Err(Error::invalid("augmented system: inconsistent row counts"));
        }
        if (0..r).any(|i| !(self.b_min[i] <= self.b_max[i])) {
            return Err(Error::invalid("augmented system: b_min must not exceed b_max"));
        }
        Ok(())
    }
}

/// Assemble `A`, `b_min`, `b_max` for the current configuration and time.
///
/// Rows are ordered joints first (by index), then control points in list
/// order. Constraints whose window excludes `t` contribute no rows.
pub fn build_augmented(
    model: &RobotModel,
    q: &DVector<f64>,
    lim: &JointLimits,
    cs: &[CartesianConstraint],
    t: f64,
    dt: f64,
) -> Result<AugmentedSystem> {
    let n = model.joint_count();
    if lim.len() != n {
        return Err(Error::invalid(format!("joint limits cover {} joints, model has {n}", lim.len())));
    }
    let (jl, jh) = shape_joint_box(q, lim, dt)?;

    let active: Vec<&CartesianConstraint> = cs.iter().filter(|c| c.is_active(t)).collect();
    let rows = n + active.iter().map(|c| c.dim()).sum::<usize>();

    let mut a = DMatrix::zeros(rows, n);
    let mut b_min = DVector::zeros(rows);
    let mut b_max = DVector::zeros(rows);
    let mut row_tags = Vec::with_capacity(rows);

    a.view_mut((0, 0), (n, n)).fill_with_identity();
    b_min.rows_mut(0, n).copy_from(&jl);
    b_max.rows_mut(0, n).copy_from(&jh);
    row_tags.extend((0..n).map(RowTag::Joint));

    let mut r = n;
    for c in active {
        if c.p_min.len() != c.dim() || c.p_max.len() != c.dim() {
            return Err(Error::invalid(format!("constraint `{}` has inconsistent dimensions", c.id)));
        }
        let p = kinematics::forward_position(model, q, &c.point, &c.sel)?;
        let jac = kinematics::jacobian(model, q, &c.point, &c.sel)?;
        let (lo, hi) = shape_cartesian_box(&p, c, dt)?;
        let d = c.dim();
        a.view_mut((r, 0), (d, n)).copy_from(&jac);
        b_min.rows_mut(r, d).copy_from(&lo);
        b_max.rows_mut(r, d).copy_from(&hi);
        row_tags.extend(c.sel.axes().iter().map(|&axis| RowTag::Cartesian {
            id: c.id.clone(),
            axis,
            coincides_with_task: c.coincides_with_task,
        }));
        r += d;
    }

    Ok(AugmentedSystem {
        a,
        b_min,
        b_max,
        row_tags,
    })
}
