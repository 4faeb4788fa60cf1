//! CSV tick logs.
//!
//! Column order: `t`, `q_1..q_n`, `qd_1..qd_n`, `ee_<axis>` and `err_<axis>`
//! for each task axis, `s_star`, `status`, `sat_tags`, then `cp_<id>_<axis>`
//! for every constraint axis followed by `cpd_<id>_<axis>` in the same order.
//! That is `1 + 2n + 2m + 3 + 2 * sum(d_i)` columns. Numbers are written in
//! scientific notation with ten significant digits.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kinematics::{Axis, AxisSelector};

use super::{Scenario, TickLog};

/// Shape of a log: what the variable-width column groups contain.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLayout {
    pub joints: usize,
    pub task_axes: AxisSelector,
    pub control_points: Vec<(String, AxisSelector)>,
}

impl LogLayout {
    pub fn for_scenario(s: &Scenario) -> Self {
        LogLayout {
            joints: s.robot.joint_count(),
            task_axes: s.path.task_axes(),
            control_points: s.cartesian.iter().map(|c| (c.id.clone(), c.sel.clone())).collect(),
        }
    }

    fn cp_width(&self) -> usize {
        self.control_points.iter().map(|(_, sel)| sel.len()).sum()
    }

    pub fn column_count(&self) -> usize {
        1 + 2 * self.joints + 2 * self.task_axes.len() + 3 + 2 * self.cp_width()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=self.joints).map(|j| format!("q_{j}")));
        h.extend((1..=self.joints).map(|j| format!("qd_{j}")));
        h.extend(self.task_axes.axes().iter().map(|a| format!("ee_{a}")));
        h.extend(self.task_axes.axes().iter().map(|a| format!("err_{a}")));
        h.extend(["s_star", "status", "sat_tags"].map(String::from));
        for prefix in ["cp", "cpd"] {
            for (id, sel) in &self.control_points {
                h.extend(sel.axes().iter().map(|a| format!("{prefix}_{id}_{a}")));
            }
        }
        h
    }

    /// Recover the layout from a header row.
    pub fn from_header(header: &[String]) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: Some(1), message: msg };
        let mut it = header.iter().map(String::as_str).peekable();
        if it.next() != Some("t") {
            return Err(bad("first column must be `t`".into()));
        }
        let mut joints = 0;
        while it.peek().is_some_and(|c| c.starts_with("q_")) {
            joints += 1;
            if it.next() != Some(format!("q_{joints}").as_str()) {
                return Err(bad(format!("expected `q_{joints}`")));
            }
        }
        for j in 1..=joints {
            if it.next() != Some(format!("qd_{j}").as_str()) {
                return Err(bad(format!("expected `qd_{j}`")));
            }
        }
        let mut axes = Vec::new();
        while let Some(c) = it.peek().and_then(|c| c.strip_prefix("ee_")) {
            axes.push(parse_axis(c).ok_or_else(|| bad(format!("bad column `ee_{c}`")))?);
            it.next();
        }
        let task_axes = AxisSelector::new(axes).map_err(|e| bad(e.to_string()))?;
        for a in task_axes.axes() {
            if it.next() != Some(format!("err_{a}").as_str()) {
                return Err(bad(format!("expected `err_{a}`")));
            }
        }
        for name in ["s_star", "status", "sat_tags"] {
            if it.next() != Some(name) {
                return Err(bad(format!("expected `{name}`")));
            }
        }
        let mut cps: Vec<(String, Vec<Axis>)> = Vec::new();
        while let Some(rest) = it.peek().and_then(|c| c.strip_prefix("cp_")) {
            let (id, axis) = rest
                .rsplit_once('_')
                .and_then(|(id, a)| Some((id, parse_axis(a)?)))
                .ok_or_else(|| bad(format!("bad column `cp_{rest}`")))?;
            match cps.last_mut() {
                Some((last, axes)) if last == id => axes.push(axis),
                _ => cps.push((id.to_string(), vec![axis])),
            }
            it.next();
        }
        let control_points = cps
            .into_iter()
            .map(|(id, axes)| Ok((id, AxisSelector::new(axes).map_err(|e| bad(e.to_string()))?)))
            .collect::<Result<Vec<_>>>()?;
        let layout = LogLayout {
            joints,
            task_axes,
            control_points,
        };
        if layout.header() != header {
            return Err(bad("header does not follow the log layout".into()));
        }
        Ok(layout)
    }
}

fn parse_axis(s: &str) -> Option<Axis> {
    let mut chars = s.chars();
    let axis = Axis::from_char(chars.next()?)?;
    chars.next().is_none().then_some(axis)
}

fn num(x: f64) -> String {
    format!("{x:.9e}")
}

/// Write the log as CSV. An empty log produces a header-only file.
pub fn write_log<W: Write>(log: &[TickLog], layout: &LogLayout, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(layout.header()).map_err(io)?;
    let mut rec: Vec<String> = Vec::with_capacity(layout.column_count());
    for tick in log {
        if tick.q.len() != layout.joints
            || tick.ee_pos.len() != layout.task_axes.len()
            || tick.cp_pos.len() != layout.cp_width()
        {
            return Err(Error::invalid("tick record does not match the log layout"));
        }
        rec.clear();
        rec.push(num(tick.t));
        rec.extend(tick.q.iter().chain(tick.q_dot.iter()).map(|&x| num(x)));
        rec.extend(tick.ee_pos.iter().chain(tick.ee_err.iter()).map(|&x| num(x)));
        rec.push(num(tick.s_star));
        rec.push(tick.status.to_string());
        rec.push(tick.sat_tags.clone());
        rec.extend(tick.cp_pos.iter().chain(tick.cp_vel.iter()).map(|&x| num(x)));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_log_file(log: &[TickLog], layout: &LogLayout, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_log(log, layout, std::io::BufWriter::new(file))
}

/// Parse a log written by [`write_log`].
pub fn read_log<R: Read>(input: R) -> Result<(LogLayout, Vec<TickLog>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = r.records();
    let parse_err = |line: usize, e: csv::Error| Error::Parse {
        line: Some(line),
        message: e.to_string(),
    };
    let header: Vec<String> = match records.next() {
        Some(rec) => rec.map_err(|e| parse_err(1, e))?.iter().map(String::from).collect(),
        None => return Err(Error::Parse { line: None, message: "empty log".into() }),
    };
    let layout = LogLayout::from_header(&header)?;
    let n = layout.joints;
    let m = layout.task_axes.len();
    let c = layout.cp_width();

    let mut log = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e))?;
        let field = |k: usize| -> Result<f64> {
            rec[k].parse().map_err(|_| Error::Parse {
                line: Some(line),
                message: format!("column `{}`: not a number: `{}`", header[k], &rec[k]),
            })
        };
        let flat = |from: usize, len: usize| -> Result<Vec<f64>> { (from..from + len).map(field).collect() };
        let vec = |from: usize, len: usize| flat(from, len).map(DVector::from_vec);
        let mut k = 0;
        let t = field(k)?;
        k += 1;
        let q = vec(k, n)?;
        k += n;
        let q_dot = vec(k, n)?;
        k += n;
        let ee_pos = vec(k, m)?;
        k += m;
        let ee_err = vec(k, m)?;
        k += m;
        let s_star = field(k)?;
        let status = rec[k + 1].parse().map_err(|e: Error| Error::Parse {
            line: Some(line),
            message: e.to_string(),
        })?;
        let sat_tags = rec[k + 2].to_string();
        k += 3;
        let cp_pos = flat(k, c)?;
        k += c;
        let cp_vel = flat(k, c)?;
        log.push(TickLog {
            t,
            q,
            q_dot,
            ee_pos,
            ee_err,
            s_star,
            status,
            sat_tags,
            cp_pos,
            cp_vel,
        });
    }
    Ok((layout, log))
}
