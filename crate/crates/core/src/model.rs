//! JSON model files.
//!
//! ```json
//! {
//!   "name": "example1",
//!   "f": ["-x1 - x1*x2", "x1^2 - x2 - x2*x3", "x2^2 - x3"],
//!   "region": { "x": [[-0.9, 3], [-0.9, 3], [-0.9, 3]], "t": [0, 10] }
//! }
//! ```
//!
//! Optional fields: `n` (checked against `f`), `description`, `modules`
//! (1-based index blocks), `block_metrics` (one symmetric matrix per module),
//! `delays` (`{"from": j, "to": i, "delay": T}`, 1-based: `x_j` is read at
//! `t - T` inside `f_i`), `history` (constant pre-history for delayed runs)
//! and `x0`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::expr::{parse_expression, DynamicsError, DynamicsSpec, ParseError};
use crate::metric::{BlockMetric, MetricError};
use crate::region::{Region, RegionError};
use crate::sim::{DelaySpec, EdgeDelay, SimError};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("f{index}: {source}")]
    Parse { index: usize, source: ParseError },
    #[error("\"n\" is {n} but {got} right-hand sides are given")]
    Count { n: usize, got: usize },
    #[error("model has no right-hand sides")]
    Empty,
    #[error("{field} has {got} entries, expected {expected}")]
    Length { field: &'static str, expected: usize, got: usize },
    #[error("index {index} in {field} is outside 1..={n}")]
    Index { field: &'static str, index: usize, n: usize },
    #[error("block_metrics given without modules")]
    MetricsWithoutModules,
    #[error("block metric {module} is not square")]
    Ragged { module: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Delay(#[from] SimError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDelay {
    from: usize,
    to: usize,
    delay: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    n: Option<usize>,
    f: Vec<String>,
    region: Region,
    #[serde(default)]
    modules: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    block_metrics: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    delays: Vec<RawDelay>,
    #[serde(default)]
    history: Option<Vec<f64>>,
    #[serde(default)]
    x0: Option<Vec<f64>>,
}

/// A validated model; all indices 0-based.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: Option<String>,
    pub description: Option<String>,
    pub dynamics: DynamicsSpec,
    pub region: Region,
    pub block_metric: Option<BlockMetric>,
    pub delays: Vec<EdgeDelay>,
    pub history: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
}

impl Model {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let raw: RawModel = serde_json::from_str(text)?;
        let n = raw.f.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        if let Some(m) = raw.n.filter(|&m| m != n) {
            return Err(ModelError::Count { n: m, got: n });
        }
        let exprs = raw
            .f
            .iter()
            .enumerate()
            .map(|(i, s)| parse_expression(s, n).map_err(|source| ModelError::Parse { index: i + 1, source }))
            .collect::<Result<Vec<_>, _>>()?;
        let mut dynamics = DynamicsSpec::new(exprs)?;
        let region = Region::new(raw.region.x, raw.region.t)?;
        region.check_dim(n)?;

        let zero_based = |field: &'static str, k: usize| {
            if k == 0 || k > n {
                Err(ModelError::Index { field, index: k, n })
            } else {
                Ok(k - 1)
            }
        };
        let mut block_metric = None;
        if let Some(modules) = raw.modules {
            let modules = modules
                .into_iter()
                .map(|b| b.into_iter().map(|k| zero_based("modules", k)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            dynamics = dynamics.with_modules(modules.clone())?;
            if let Some(rows) = raw.block_metrics {
                let mut matrices = Vec::with_capacity(rows.len());
                for (k, m) in rows.iter().enumerate() {
                    let size = m.len();
                    if m.iter().any(|r| r.len() != size) {
                        return Err(ModelError::Ragged { module: k + 1 });
                    }
                    matrices.push(DMatrix::from_fn(size, size, |r, c| m[r][c]));
                }
                block_metric = Some(BlockMetric::new(modules, matrices)?);
            }
        } else if raw.block_metrics.is_some() {
            return Err(ModelError::MetricsWithoutModules);
        }

        let delays = raw
            .delays
            .iter()
            .map(|d| {
                Ok(EdgeDelay { from: zero_based("delays", d.from)?, to: zero_based("delays", d.to)?, delay: d.delay })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        DelaySpec::new(delays.clone(), vec![0.0; n])?;
        for (field, v) in [("history", &raw.history), ("x0", &raw.x0)] {
            if let Some(v) = v.as_ref().filter(|v| v.len() != n) {
                return Err(ModelError::Length { field, expected: n, got: v.len() });
            }
        }

        Ok(Model {
            name: raw.name,
            description: raw.description,
            dynamics,
            region,
            block_metric,
            delays,
            history: raw.history,
            x0: raw.x0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }
}
