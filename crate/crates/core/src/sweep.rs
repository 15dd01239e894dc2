//! Parameter sweeps over generation rate, queue limit, model variant and
//! schedule, written as long-format CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Variant;
use crate::multihop::{evaluate_network, NetworkError, NetworkScenario};
use crate::schedule::{Schedule, ScheduleError};
use crate::schedulers::{generate, Algorithm, SchedulerError};
use crate::topology::{Topology, TopologyError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error("sweep file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("{schedule} ({nodes} nodes), K={queue_limit}, rate {rate}: {source}")]
    Network {
        schedule: String,
        nodes: usize,
        queue_limit: usize,
        rate: f64,
        source: NetworkError,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SweepError {
    /// `true` for problems with the inputs rather than with the evaluation.
    pub fn is_input(&self) -> bool {
        !matches!(self, SweepError::Scheduler(_) | SweepError::Network { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    /// Packets per slot per node.
    Rate,
    /// Mean generation interval in seconds.
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|j| {
                let f = j as f64 / last;
                match self.scale {
                    Scale::Linear => self.min + f * (self.max - self.min),
                    Scale::Log => (self.min.ln() + f * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

/// A network to sweep: either a generated concentric network evaluated
/// under a list of bundled schedules, or a topology/schedule file pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default)]
    pub rings: Option<usize>,
    #[serde(default)]
    pub schedules: Vec<Algorithm>,
    #[serde(default)]
    pub topology: Option<PathBuf>,
    #[serde(default)]
    pub schedule: Option<PathBuf>,
    /// Label used in the `schedule` column for file-based schedules.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: Parameter,
    pub grid: Grid,
    pub queue_limits: Vec<usize>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    pub networks: Vec<NetworkSpec>,
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Full]
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, SweepError> {
        let spec: Self = serde_json::from_str(text)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SweepError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SweepError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<(), SweepError> {
        let g = &self.grid;
        let bad = |m: &str| Err(SweepError::Spec(m.to_string()));
        if g.count < 2 {
            return bad("grid needs at least 2 points");
        }
        if !(g.min.is_finite() && g.max.is_finite() && g.min < g.max) {
            return bad("grid needs finite min < max");
        }
        if g.min < 0.0 {
            return bad("grid values must be non-negative");
        }
        if (g.scale == Scale::Log || self.parameter == Parameter::Interval) && g.min <= 0.0 {
            return bad("log grids and interval grids need min > 0");
        }
        if self.queue_limits.is_empty() || self.queue_limits.contains(&0) {
            return bad("queue_limits must be non-empty and at least 1");
        }
        if self.variants.is_empty() || self.networks.is_empty() {
            return bad("variants and networks must be non-empty");
        }
        for n in &self.networks {
            let generated = n.rings.is_some();
            let files = n.topology.is_some() || n.schedule.is_some();
            if generated == files {
                return bad("each network needs either rings or a topology/schedule pair");
            }
            if generated && (n.schedules.is_empty() || n.rings == Some(0)) {
                return bad("generated networks need rings >= 1 and a schedule list");
            }
            if files && (n.topology.is_none() || n.schedule.is_none() || !n.schedules.is_empty()) {
                return bad("file networks need both topology and schedule and no schedule list");
            }
        }
        Ok(())
    }
}

/// One row of the long-format output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub schedule: String,
    pub nodes: usize,
    pub variant: Variant,
    #[serde(rename = "K")]
    pub queue_limit: usize,
    /// Generation rate, packets per slot per node.
    pub rate: f64,
    pub metric: &'static str,
    pub value: f64,
}

/// Metrics emitted per grid point, in output order.
pub const METRICS: [&str; 5] = [
    "throughput",
    "outer_pdr",
    "outer_delay_slots",
    "outer_delay_s",
    "min_pdr",
];

struct Case {
    label: String,
    schedule: Schedule,
    topology: Topology,
}

fn cases(spec: &SweepSpec) -> Result<Vec<Case>, SweepError> {
    let mut out = Vec::new();
    for n in &spec.networks {
        if let Some(rings) = n.rings {
            let topology = Topology::concentric(rings);
            for &a in &n.schedules {
                out.push(Case {
                    label: a.name().to_string(),
                    schedule: generate(a, &topology)?.schedule,
                    topology: topology.clone(),
                });
            }
        } else {
            let (t, s) = (n.topology.as_ref().unwrap(), n.schedule.as_ref().unwrap());
            out.push(Case {
                label: n.name.clone().unwrap_or_else(|| s.display().to_string()),
                schedule: Schedule::load(s)?,
                topology: Topology::load(t)?,
            });
        }
    }
    Ok(out)
}

/// Evaluates every grid point of every case. Rows come out in a fixed order
/// (network, schedule, K, variant, grid point, metric) whatever the
/// parallelism.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<Row>, SweepError> {
    spec.check()?;
    let cases = cases(spec)?;
    let grid = spec.grid.values();
    let mut jobs = Vec::new();
    for case in &cases {
        for &k in &spec.queue_limits {
            for &v in &spec.variants {
                for &x in &grid {
                    jobs.push((case, k, v, x));
                }
            }
        }
    }
    let results: Vec<Vec<Row>> = jobs
        .par_iter()
        .map(|&(case, k, v, x)| {
            let slot = case.schedule.slot_duration();
            let rate = match spec.parameter {
                Parameter::Rate => x,
                Parameter::Interval => slot / x,
            };
            let scenario = NetworkScenario::new(case.schedule.clone(), case.topology.clone(), rate, k)
                .with_variant(v);
            let nodes = case.topology.node_count();
            let r = evaluate_network(&scenario).map_err(|source| SweepError::Network {
                schedule: case.label.clone(),
                nodes,
                queue_limit: k,
                rate,
                source,
            })?;
            let outer = case.topology.outermost();
            let (pdr, delay) = r.average(&outer);
            let min_pdr = r.pdr.iter().copied().fold(1.0, f64::min);
            let values = [r.throughput(), pdr, delay, delay * slot, min_pdr];
            Ok(METRICS
                .iter()
                .zip(values)
                .map(|(&metric, value)| Row {
                    schedule: case.label.clone(),
                    nodes,
                    variant: v,
                    queue_limit: k,
                    rate,
                    metric,
                    value,
                })
                .collect())
        })
        .collect::<Result<_, SweepError>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// Writes rows as CSV with header
/// `schedule,nodes,variant,K,rate,metric,value`.
pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| SweepError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}
