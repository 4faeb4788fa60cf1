//! Serial-chain models: forward kinematics and positional Jacobians of points
//! attached anywhere along the body.
//!
//! Link frame `i` (1-based) sits at the distal end of link `i`; frame 0 is the
//! base. Joint `j` rotates about the z axis of frame `j - 1`, which holds for
//! both the planar chain and standard Denavit-Hartenberg chains.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn from_char(c: char) -> Option<Axis> {
        match c.to_ascii_lowercase() {
            'x' => Some(Axis::X),
            'y' => Some(Axis::Y),
            'z' => Some(Axis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered, duplicate-free subset of the Cartesian axes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisSelector(Vec<Axis>);

impl AxisSelector {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::invalid("axis selector needs 1 to 3 axes"));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::invalid(format!("axis `{a}` selected twice")));
            }
        }
        Ok(AxisSelector(axes))
    }

    pub fn xy() -> Self {
        AxisSelector(vec![Axis::X, Axis::Y])
    }

    pub fn xyz() -> Self {
        AxisSelector(vec![Axis::X, Axis::Y, Axis::Z])
    }

    pub fn single(axis: Axis) -> Self {
        AxisSelector(vec![axis])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn select(&self, v: &Vector3<f64>) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|a| v[a.index()]))
    }
}

impl FromStr for AxisSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| Axis::from_char(c).ok_or_else(|| Error::invalid(format!("unknown axis `{c}`"))))
            .collect::<Result<Vec<_>>>()?;
        AxisSelector::new(axes)
    }
}

impl fmt::Display for AxisSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.0 {
            f.write_str(a.name())?;
        }
        Ok(())
    }
}

/// A point rigidly attached to link frame `frame` (1-based) at `offset`,
/// expressed in that frame. `frame = n` with zero offset is the end effector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePoint {
    pub frame: usize,
    pub offset: Vector3<f64>,
}

impl FramePoint {
    pub fn at_frame(frame: usize) -> Self {
        FramePoint {
            frame,
            offset: Vector3::zeros(),
        }
    }

    pub fn with_offset(frame: usize, offset: Vector3<f64>) -> Self {
        FramePoint { frame, offset }
    }
}

/// One standard DH row; `theta = q + theta_offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RobotModel {
    /// Revolute chain moving in the world xy plane.
    Planar { link_lengths: Vec<f64> },
    /// Spatial revolute chain in standard DH convention, mounted at `base`.
    Dh { rows: Vec<DhRow>, base: Vector3<f64> },
}

/// Pose of one link frame in world coordinates.
#[derive(Debug, Clone, Copy)]
struct Frame {
    origin: Vector3<f64>,
    rotation: Matrix3<f64>,
}

impl RobotModel {
    pub fn planar(link_lengths: Vec<f64>) -> Result<Self> {
        if link_lengths.is_empty() {
            return Err(Error::invalid("planar chain needs at least one link"));
        }
        if link_lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::invalid("link lengths must be positive and finite"));
        }
        Ok(RobotModel::Planar { link_lengths })
    }

    pub fn dh(rows: Vec<DhRow>, base: Vector3<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("DH chain needs at least one row"));
        }
        let finite = rows
            .iter()
            .all(|r| r.a.is_finite() && r.alpha.is_finite() && r.d.is_finite() && r.theta_offset.is_finite());
        if !finite || !base.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("DH parameters must be finite"));
        }
        Ok(RobotModel::Dh { rows, base })
    }

    /// Seven-joint chain with the proportions of a KUKA LWR IV style arm.
    /// The link values are repo-chosen approximations, not vendor data.
    pub fn lwr_like(base: Vector3<f64>) -> Self {
        use std::f64::consts::FRAC_PI_2;
        let row = |alpha: f64, d: f64| DhRow {
            a: 0.0,
            alpha,
            d,
            theta_offset: 0.0,
        };
        RobotModel::Dh {
            rows: vec![
                row(FRAC_PI_2, 0.31),
                row(-FRAC_PI_2, 0.0),
                row(-FRAC_PI_2, 0.40),
                row(FRAC_PI_2, 0.0),
                row(FRAC_PI_2, 0.39),
                row(-FRAC_PI_2, 0.0),
                row(0.0, 0.078),
            ],
            base,
        }
    }

    pub fn joint_count(&self) -> usize {
        match self {
            RobotModel::Planar { link_lengths } => link_lengths.len(),
            RobotModel::Dh { rows, .. } => rows.len(),
        }
    }

    pub fn is_planar(&self) -> bool {
        matches!(self, RobotModel::Planar { .. })
    }

    pub fn end_effector(&self) -> FramePoint {
        FramePoint::at_frame(self.joint_count())
    }

    pub fn check_point(&self, point: &FramePoint) -> Result<()> {
        let n = self.joint_count();
        if point.frame == 0 || point.frame > n {
            return Err(Error::invalid(format!(
                "frame index {} outside chain 1..={n}",
                point.frame
            )));
        }
        if self.is_planar() && point.offset.z != 0.0 {
            return Err(Error::invalid("planar control points cannot have a z offset"));
        }
        Ok(())
    }

    fn check_q(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.joint_count() {
            return Err(Error::invalid(format!(
                "expected {} joint values, got {}",
                self.joint_count(),
                q.len()
            )));
        }
        if !q.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("joint vector has non-finite entries"));
        }
        Ok(())
    }

    /// Frames 0..=upto in world coordinates.
    fn frames(&self, q: &DVector<f64>, upto: usize) -> Vec<Frame> {
        let mut out = Vec::with_capacity(upto + 1);
        match self {
            RobotModel::Planar { link_lengths } => {
                let mut origin = Vector3::zeros();
                let mut theta = 0.0;
                out.push(Frame {
                    origin,
                    rotation: Matrix3::identity(),
                });
                for (l, qi) in link_lengths.iter().zip(q.iter()).take(upto) {
                    theta += qi;
                    let (s, c) = theta.sin_cos();
                    origin += Vector3::new(l * c, l * s, 0.0);
                    out.push(Frame {
                        origin,
                        rotation: rot_z(c, s),
                    });
                }
            }
            RobotModel::Dh { rows, base } => {
                let mut frame = Frame {
                    origin: *base,
                    rotation: Matrix3::identity(),
                };
                out.push(frame);
                for (row, qi) in rows.iter().zip(q.iter()).take(upto) {
                    let (st, ct) = (qi + row.theta_offset).sin_cos();
                    let (sa, ca) = row.alpha.sin_cos();
                    // Rz(theta) Tz(d) Tx(a) Rx(alpha)
                    let local_rot = Matrix3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca);
                    let local_pos = Vector3::new(row.a * ct, row.a * st, row.d);
                    frame = Frame {
                        origin: frame.origin + frame.rotation * local_pos,
                        rotation: frame.rotation * local_rot,
                    };
                    out.push(frame);
                }
            }
        }
        out
    }

    /// World position of `point` (all three coordinates).
    pub fn point_position(&self, q: &DVector<f64>, point: &FramePoint) -> Result<Vector3<f64>> {
        self.check_q(q)?;
        self.check_point(point)?;
        let frames = self.frames(q, point.frame);
        let f = &frames[point.frame];
        Ok(f.origin + f.rotation * point.offset)
    }

    /// Full 3 x n positional Jacobian of `point`.
    pub fn point_jacobian(&self, q: &DVector<f64>, point: &FramePoint) -> Result<DMatrix<f64>> {
        self.check_q(q)?;
        self.check_point(point)?;
        let n = self.joint_count();
        let frames = self.frames(q, point.frame);
        let tip = frames[point.frame].origin + frames[point.frame].rotation * point.offset;
        let mut jac = DMatrix::zeros(3, n);
        for (j, frame) in frames.iter().take(point.frame).enumerate() {
            let axis = frame.rotation.column(2).into_owned();
            let col = axis.cross(&(tip - frame.origin));
            jac.fixed_view_mut::<3, 1>(0, j).copy_from(&col);
        }
        Ok(jac)
    }
}

fn rot_z(c: f64, s: f64) -> Matrix3<f64> {
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Position of `point` restricted to the selected axes.
pub fn forward_position(
    model: &RobotModel,
    q: &DVector<f64>,
    point: &FramePoint,
    sel: &AxisSelector,
) -> Result<DVector<f64>> {
    Ok(sel.select(&model.point_position(q, point)?))
}

/// `sel.len() x n` positional Jacobian; columns of joints distal to the
/// attachment frame are exactly zero.
pub fn jacobian(
    model: &RobotModel,
    q: &DVector<f64>,
    point: &FramePoint,
    sel: &AxisSelector,
) -> Result<DMatrix<f64>> {
    let full = model.point_jacobian(q, point)?;
    let n = model.joint_count();
    Ok(DMatrix::from_fn(sel.len(), n, |r, c| full[(sel.axes()[r].index(), c)]))
}
