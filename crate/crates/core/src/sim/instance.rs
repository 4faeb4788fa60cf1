//! Single-tick solver instances, as consumed by `sns oracle`.
//!
//! ```toml
//! jacobian = [[1.0, 0.0]]
//! x_dot = [1.0]
//! b_min = [-0.4, -1.0]
//! b_max = [0.4, 1.0]
//! # optional rows stacked under the joint identity
//! extra_rows = [[1.0, 1.0]]
//! extra_min = [-0.5]
//! extra_max = [0.5]
//! task_rows = [0]        # extra rows coinciding with a task direction
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::constraints::{AugmentedSystem, RowTag};
use crate::error::{Error, Result};
use crate::kinematics::Axis;
use crate::solver::TaskRef;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub task: TaskRef,
    pub system: AugmentedSystem,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    jacobian: Vec<Vec<f64>>,
    x_dot: Vec<f64>,
    b_min: Vec<f64>,
    b_max: Vec<f64>,
    #[serde(default)]
    extra_rows: Vec<Vec<f64>>,
    #[serde(default)]
    extra_min: Vec<f64>,
    #[serde(default)]
    extra_max: Vec<f64>,
    #[serde(default)]
    task_rows: Vec<usize>,
}

fn matrix(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid(format!("`{what}`: every row needs {cols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn load_instance_file(path: impl AsRef<Path>) -> Result<Instance> {
    load_instance(&std::fs::read_to_string(path)?)
}

pub fn load_instance(text: &str) -> Result<Instance> {
    let raw: RawInstance = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1)),
        message: e.message().to_string(),
    })?;
    let n = raw.jacobian.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::invalid("`jacobian` must have at least one row and column"));
    }
    let jacobian = matrix(&raw.jacobian, n, "jacobian")?;
    let task = TaskRef::new(DVector::from_vec(raw.x_dot), jacobian)?;
    if raw.b_min.len() != n || raw.b_max.len() != n {
        return Err(Error::invalid(format!("`b_min` and `b_max` need {n} entries")));
    }
    let extra = matrix(&raw.extra_rows, n, "extra_rows")?;
    let e = extra.nrows();
    if raw.extra_min.len() != e || raw.extra_max.len() != e {
        return Err(Error::invalid(format!("`extra_min` and `extra_max` need {e} entries")));
    }
    if let Some(&bad) = raw.task_rows.iter().find(|&&k| k >= e) {
        return Err(Error::invalid(format!("`task_rows` entry {bad} is not an extra row")));
    }

    let mut a = DMatrix::zeros(n + e, n);
    a.view_mut((0, 0), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (e, n)).copy_from(&extra);
    let b_min = DVector::from_iterator(n + e, raw.b_min.into_iter().chain(raw.extra_min));
    let b_max = DVector::from_iterator(n + e, raw.b_max.into_iter().chain(raw.extra_max));
    let mut row_tags: Vec<RowTag> = (0..n).map(RowTag::Joint).collect();
    row_tags.extend((0..e).map(|k| RowTag::Cartesian {
        id: format!("r{}", k + 1),
        axis: Axis::X,
        coincides_with_task: raw.task_rows.contains(&k),
    }));
    let system = AugmentedSystem {
        a,
        b_min,
        b_max,
        row_tags,
    };
    system.check()?;
    Ok(Instance { task, system })
}
