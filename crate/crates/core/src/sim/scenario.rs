//! Scenario documents.
//!
//! A scenario is a TOML document; see `docs/scenario-format.md` for the
//! grammar. Parsing happens in two passes: serde maps the text onto raw
//! structs (syntax and type errors carry the TOML line), then the raw values
//! are converted and validated, with errors anchored to the line of the
//! offending key.

use std::path::Path;

use nalgebra::{DVector, Vector3};
use serde::Deserialize;

use crate::constraints::{CartesianConstraint, JointLimits, Window};
use crate::error::{Error, Result};
use crate::kinematics::{Axis, AxisSelector, DhRow, FramePoint, RobotModel};
use crate::solver::SolverSettings;
use crate::trajectory::{FeedbackLaw, PathSpec, TimingLaw};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub robot: RobotModel,
    pub initial_q: DVector<f64>,
    pub joint_limits: JointLimits,
    pub cartesian: Vec<CartesianConstraint>,
    pub path: PathSpec,
    pub timing: TimingLaw,
    pub feedback: FeedbackLaw,
    pub sample_time: f64,
    pub duration: f64,
    pub solver: SolverSettings,
}

impl Scenario {
    /// Number of control ticks, `round(duration / sample_time)`.
    pub fn tick_count(&self) -> usize {
        if self.duration <= 0.0 {
            return 0;
        }
        (self.duration / self.sample_time).round() as usize
    }

    pub fn task_dim(&self) -> usize {
        self.path.dim()
    }

    /// Same scenario with every joint and Cartesian limit scaled by `factor`.
    pub fn widened(&self, factor: f64) -> Scenario {
        Scenario {
            joint_limits: self.joint_limits.widened(factor),
            cartesian: self.cartesian.iter().map(|c| c.widened(factor)).collect(),
            ..self.clone()
        }
    }

    /// Re-check the invariants of a programmatically built scenario.
    pub fn validate(&self) -> Result<()> {
        let n = self.robot.joint_count();
        let v = |field: &str, e: Error| Error::Validation {
            field: field.to_string(),
            line: None,
            message: strip(e),
        };
        if !(self.sample_time > 0.0 && self.sample_time.is_finite()) {
            return Err(v("sample_time", Error::invalid("must be positive")));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(v("duration", Error::invalid("must be positive")));
        }
        if self.initial_q.len() != n {
            return Err(v("initial_q", Error::invalid(format!("expected {n} entries"))));
        }
        self.joint_limits.validate().map_err(|e| v("joint_limits", e))?;
        if self.joint_limits.len() != n {
            return Err(v("joint_limits", Error::invalid(format!("expected {n} joints"))));
        }
        for j in 0..n {
            let q = self.initial_q[j];
            if !(self.joint_limits.q_min[j] <= q && q <= self.joint_limits.q_max[j]) {
                return Err(v(
                    "initial_q",
                    Error::invalid(format!("joint {} starts outside its position limits", j + 1)),
                ));
            }
        }
        for c in &self.cartesian {
            c.validate().map_err(|e| v("cartesian", e))?;
            self.robot.check_point(&c.point).map_err(|e| v("cartesian", e))?;
            if self.robot.is_planar() && c.sel.axes().contains(&Axis::Z) {
                return Err(v("cartesian", Error::invalid(format!("constraint `{}`: planar robots have no z motion", c.id))));
            }
        }
        self.path.validate().map_err(|e| v("path", e))?;
        if self.robot.is_planar() && self.path.dim() != 2 {
            return Err(v("path", Error::invalid("planar robots need a 2D path")));
        }
        self.timing.validate().map_err(|e| v("timing", e))?;
        self.feedback.validate(self.path.dim()).map_err(|e| v("feedback", e))?;
        let s = &self.solver;
        if !(s.rel_tol > 0.0 && s.eps >= 0.0 && s.iter_multiplier >= 1) {
            return Err(v("solver", Error::invalid("rel_tol > 0, eps >= 0 and iter_multiplier >= 1 required")));
        }
        Ok(())
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl ScalarOrList {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            ScalarOrList::Scalar(x) => vec![*x; n],
            ScalarOrList::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    angle_unit: Option<String>,
    sample_time: f64,
    duration: f64,
    robot: RawRobot,
    initial_q: Vec<f64>,
    joint_limits: RawJointLimits,
    #[serde(default)]
    cartesian: Vec<RawCartesian>,
    path: RawPath,
    timing: RawTiming,
    feedback: RawFeedback,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawRobot {
    Planar {
        link_lengths: Vec<f64>,
    },
    Dh {
        #[serde(default)]
        preset: Option<String>,
        /// Rows of `[a, alpha, d, theta_offset]`.
        #[serde(default)]
        rows: Option<Vec<[f64; 4]>>,
        #[serde(default)]
        base: Option<[f64; 3]>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJointLimits {
    #[serde(default)]
    q_min: Option<ScalarOrList>,
    #[serde(default)]
    q_max: Option<ScalarOrList>,
    #[serde(default)]
    v_min: Option<ScalarOrList>,
    #[serde(default)]
    v_max: Option<ScalarOrList>,
    a_max: ScalarOrList,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCartesian {
    id: String,
    frame: usize,
    #[serde(default)]
    offset: Option<[f64; 3]>,
    axes: String,
    #[serde(default)]
    p_min: Option<ScalarOrList>,
    #[serde(default)]
    p_max: Option<ScalarOrList>,
    #[serde(default)]
    v_min: Option<ScalarOrList>,
    v_max: ScalarOrList,
    a_max: ScalarOrList,
    #[serde(default)]
    window: Option<[f64; 2]>,
    #[serde(default)]
    coincides_with_task: bool,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawPath {
    Line {
        start: Vec<f64>,
        end: Vec<f64>,
    },
    Circle {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        plane: Option<String>,
        #[serde(default)]
        laps: Option<u32>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawTiming {
    Quintic { duration: f64 },
    Trapezoid { cruise_v: f64, max_a: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeedback {
    k_p: ScalarOrList,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default)]
    rel_tol: Option<f64>,
    #[serde(default)]
    eps: Option<f64>,
    #[serde(default)]
    iter_multiplier: Option<usize>,
}

/// Finds the 1-based line of `key` inside table `table` (the `index`-th
/// occurrence for arrays of tables). An empty `table` means the top level; a
/// `None` key returns the table header line.
fn locate(text: &str, table: &str, index: usize, key: Option<&str>) -> Option<usize> {
    let mut current = String::new();
    let mut counts: std::collections::HashMap<String, usize> = Default::default();
    let mut current_index = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix("[[") {
            let name = rest.split("]]").next().unwrap_or("").trim().to_string();
            let c = counts.entry(name.clone()).or_insert(0);
            current_index = *c;
            *c += 1;
            current = name;
            if key.is_none() && current == table && current_index == index {
                return Some(i + 1);
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.split(']').next().unwrap_or("").trim().to_string();
            current_index = 0;
            if key.is_none() && current == table {
                return Some(i + 1);
            }
            continue;
        }
        if let Some(k) = key {
            if current == table && current_index == index {
                let lhs = line.split('=').next().unwrap_or("").trim();
                if line.contains('=') && lhs == k {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, table: &str, index: usize, key: &str, message: impl Into<String>) -> Error {
        let line = locate(self.text, table, index, Some(key)).or_else(|| locate(self.text, table, index, None));
        let field = match (table, key) {
            ("", k) => k.to_string(),
            (t, "") => t.to_string(),
            (t, k) => format!("{t}.{k}"),
        };
        Error::Validation {
            field,
            line,
            message: message.into(),
        }
    }

    fn list(&self, table: &str, index: usize, key: &str, v: &ScalarOrList, n: usize) -> Result<DVector<f64>> {
        let x = v.expand(n);
        if x.len() != n {
            return Err(self.err(table, index, key, format!("expected {n} entries, got {}", x.len())));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(self.err(table, index, key, "NaN is not allowed"));
        }
        Ok(DVector::from_vec(x))
    }
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    load_scenario(&text)
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1)),
        message: e.message().to_string(),
    })?;
    let cx = Ctx { text };

    let angle = match raw.angle_unit.as_deref() {
        None | Some("rad") => 1.0,
        Some("deg") => std::f64::consts::PI / 180.0,
        Some(other) => return Err(cx.err("", 0, "angle_unit", format!("expected `rad` or `deg`, got `{other}`"))),
    };

    if !(raw.sample_time > 0.0 && raw.sample_time.is_finite()) {
        return Err(cx.err("", 0, "sample_time", "must be positive"));
    }
    if !(raw.duration > 0.0 && raw.duration.is_finite()) {
        return Err(cx.err("", 0, "duration", "must be positive"));
    }

    let robot = match raw.robot {
        RawRobot::Planar { link_lengths } => {
            RobotModel::planar(link_lengths).map_err(|e| cx.err("robot", 0, "link_lengths", strip(e)))?
        }
        RawRobot::Dh { preset, rows, base } => {
            let base = base.map(Vector3::from).unwrap_or_else(Vector3::zeros);
            match (preset.as_deref(), rows) {
                (Some("lwr"), None) => RobotModel::lwr_like(base),
                (Some(p), None) => return Err(cx.err("robot", 0, "preset", format!("unknown preset `{p}`"))),
                (None, Some(rows)) => {
                    let rows = rows
                        .into_iter()
                        .map(|[a, alpha, d, theta_offset]| DhRow {
                            a,
                            alpha: alpha * angle,
                            d,
                            theta_offset: theta_offset * angle,
                        })
                        .collect();
                    RobotModel::dh(rows, base).map_err(|e| cx.err("robot", 0, "rows", strip(e)))?
                }
                _ => return Err(cx.err("robot", 0, "", "give exactly one of `preset` or `rows`")),
            }
        }
    };
    let n = robot.joint_count();

    if raw.initial_q.len() != n {
        return Err(cx.err("", 0, "initial_q", format!("expected {n} entries, got {}", raw.initial_q.len())));
    }
    let initial_q = DVector::from_vec(raw.initial_q) * angle;

    let jl = &raw.joint_limits;
    let q_max = match (&jl.q_max, &jl.q_min) {
        (Some(v), _) => cx.list("joint_limits", 0, "q_max", v, n)?,
        (None, _) => return Err(cx.err("joint_limits", 0, "q_max", "missing")),
    };
    let q_min = match &jl.q_min {
        Some(v) => cx.list("joint_limits", 0, "q_min", v, n)?,
        None => -&q_max,
    };
    let v_max = match &jl.v_max {
        Some(v) => cx.list("joint_limits", 0, "v_max", v, n)?,
        None => return Err(cx.err("joint_limits", 0, "v_max", "missing")),
    };
    let v_min = match &jl.v_min {
        Some(v) => cx.list("joint_limits", 0, "v_min", v, n)?,
        None => -&v_max,
    };
    let a_max = cx.list("joint_limits", 0, "a_max", &jl.a_max, n)?;
    let joint_limits = JointLimits {
        q_min: q_min * angle,
        q_max: q_max * angle,
        v_min: v_min * angle,
        v_max: v_max * angle,
        a_max: a_max * angle,
    };
    joint_limits.validate().map_err(|e| cx.err("joint_limits", 0, "", strip(e)))?;
    for j in 0..n {
        let q = initial_q[j];
        if !(joint_limits.q_min[j] <= q && q <= joint_limits.q_max[j]) {
            return Err(cx.err("", 0, "initial_q", format!("joint {} starts outside its position limits", j + 1)));
        }
    }

    let mut cartesian = Vec::with_capacity(raw.cartesian.len());
    for (i, rc) in raw.cartesian.iter().enumerate() {
        let t = "cartesian";
        if cartesian.iter().any(|c: &CartesianConstraint| c.id == rc.id) {
            return Err(cx.err(t, i, "id", format!("duplicate constraint id `{}`", rc.id)));
        }
        if rc.id.is_empty() || rc.id.contains([',', ';', ' ']) {
            return Err(cx.err(t, i, "id", "ids must be non-empty without spaces, commas or semicolons"));
        }
        let sel: AxisSelector = rc.axes.parse().map_err(|e| cx.err(t, i, "axes", strip(e)))?;
        let d = sel.len();
        let point = FramePoint::with_offset(rc.frame, rc.offset.map(Vector3::from).unwrap_or_else(Vector3::zeros));
        robot.check_point(&point).map_err(|e| cx.err(t, i, "frame", strip(e)))?;
        if robot.is_planar() && sel.axes().contains(&Axis::Z) {
            return Err(cx.err(t, i, "axes", "planar robots have no z motion"));
        }
        let inf = ScalarOrList::Scalar(f64::INFINITY);
        let neg_inf = ScalarOrList::Scalar(f64::NEG_INFINITY);
        let v_max = cx.list(t, i, "v_max", &rc.v_max, d)?;
        let c = CartesianConstraint {
            id: rc.id.clone(),
            point,
            sel,
            p_min: cx.list(t, i, "p_min", rc.p_min.as_ref().unwrap_or(&neg_inf), d)?,
            p_max: cx.list(t, i, "p_max", rc.p_max.as_ref().unwrap_or(&inf), d)?,
            v_min: match &rc.v_min {
                Some(v) => cx.list(t, i, "v_min", v, d)?,
                None => -&v_max,
            },
            v_max,
            a_max: cx.list(t, i, "a_max", &rc.a_max, d)?,
            window: rc.window.map(|[start, end]| Window { start, end }),
            coincides_with_task: rc.coincides_with_task,
        };
        c.validate().map_err(|e| {
            let key = if rc.window.is_some() && matches!(c.window, Some(w) if !(w.start <= w.end)) {
                "window"
            } else {
                ""
            };
            cx.err(t, i, key, strip(e))
        })?;
        cartesian.push(c);
    }

    let path = match raw.path {
        RawPath::Line { start, end } => PathSpec::Line {
            start: DVector::from_vec(start),
            end: DVector::from_vec(end),
        },
        RawPath::Circle {
            center,
            radius,
            plane,
            laps,
        } => {
            let plane_str = plane.unwrap_or_else(|| "xy".to_string());
            let axes: Vec<Axis> = plane_str.chars().filter_map(Axis::from_char).collect();
            if axes.len() != 2 || plane_str.trim().len() != 2 {
                return Err(cx.err("path", 0, "plane", format!("expected two axes like `xy`, got `{plane_str}`")));
            }
            PathSpec::Circle {
                center: DVector::from_vec(center),
                radius,
                plane: (axes[0], axes[1]),
                laps: laps.unwrap_or(1),
            }
        }
    };
    path.validate().map_err(|e| cx.err("path", 0, "", strip(e)))?;
    if robot.is_planar() && path.dim() != 2 {
        return Err(cx.err("path", 0, "", "planar robots need a 2D path"));
    }

    let length = path.length();
    let timing = match raw.timing {
        RawTiming::Quintic { duration } => TimingLaw::Quintic { duration, length },
        RawTiming::Trapezoid { cruise_v, max_a } => TimingLaw::Trapezoid {
            cruise_v,
            max_a,
            length,
        },
    };
    timing.validate().map_err(|e| cx.err("timing", 0, "", strip(e)))?;

    let feedback = FeedbackLaw {
        k_p: cx.list("feedback", 0, "k_p", &raw.feedback.k_p, path.dim())?,
    };
    feedback
        .validate(path.dim())
        .map_err(|e| cx.err("feedback", 0, "k_p", strip(e)))?;

    let defaults = SolverSettings::default();
    let solver = SolverSettings {
        rel_tol: raw.solver.rel_tol.unwrap_or(defaults.rel_tol),
        eps: raw.solver.eps.unwrap_or(defaults.eps),
        iter_multiplier: raw.solver.iter_multiplier.unwrap_or(defaults.iter_multiplier),
    };
    if !(solver.rel_tol > 0.0) {
        return Err(cx.err("solver", 0, "rel_tol", "must be positive"));
    }
    if !(solver.eps >= 0.0) {
        return Err(cx.err("solver", 0, "eps", "must be non-negative"));
    }
    if solver.iter_multiplier == 0 {
        return Err(cx.err("solver", 0, "iter_multiplier", "must be at least 1"));
    }

    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| "scenario".to_string()),
        robot,
        initial_q,
        joint_limits,
        cartesian,
        path,
        timing,
        feedback,
        sample_time: raw.sample_time,
        duration: raw.duration,
        solver,
    })
}
