use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use priv_ebc::{
    load_edge_list, partition_nodes, ClampMode, EdgeListFormat, GraphError, MechMask,
    PartitionedGraph, PrecisionContext,
};
use serde::Serialize;

use crate::synth::{preferential_attachment, SyntheticSpec};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Dataset { path: PathBuf, source: GraphError },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Protocol(#[from] priv_ebc::protocol::ProtocolError),
}

impl ExperimentError {
    /// 2 for bad configuration, 3 for I/O and dataset problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Dataset { .. } | ExperimentError::Io(_) | ExperimentError::Csv(_) => 3,
            ExperimentError::Json(_) | ExperimentError::Protocol(_) => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource {
    EdgeList(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub enum EgoSelection {
    /// Node labels as they appear in the dataset.
    Explicit(Vec<String>),
    /// Uniform sample of X nodes without replacement.
    Random { count: usize, seed: u64 },
    /// X nodes spread evenly over the range of degrees.
    DegreeStratified { count: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Parallelism {
    Off,
    Workers(usize),
}

impl FromStr for Parallelism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" | "0" | "1" => Ok(Parallelism::Off),
            n => n
                .parse()
                .map(Parallelism::Workers)
                .map_err(|_| format!("expected `off` or a worker count, got {s:?}")),
        }
    }
}

impl fmt::Display for Parallelism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parallelism::Off => f.write_str("off"),
            Parallelism::Workers(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub source: GraphSource,
    pub partition_seed: u64,
    pub x_fraction: f64,
    pub egos: EgoSelection,
    pub epsilons: Vec<f64>,
    pub trials: usize,
    pub clamp: ClampMode,
    pub mech_masks: Vec<MechMask>,
    pub precision_bits: u32,
    pub parallelism: Parallelism,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Defaults for a synthetic graph: half the nodes in X, 60 random egos, one
    /// trial, all mechanisms private.
    pub fn synthetic(spec: SyntheticSpec, epsilons: Vec<f64>) -> Self {
        Self {
            source: GraphSource::Synthetic(spec),
            partition_seed: 1,
            x_fraction: 0.5,
            egos: EgoSelection::Random { count: 60, seed: 0 },
            epsilons,
            trials: 1,
            clamp: ClampMode::default(),
            mech_masks: vec![MechMask::ALL],
            precision_bits: PrecisionContext::DEFAULT_BITS,
            parallelism: Parallelism::Off,
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.epsilons.is_empty() {
            return bad("no epsilon values".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("epsilon must be positive and finite, got {e}"));
        }
        if !(0.0..=1.0).contains(&self.x_fraction) {
            return bad(format!(
                "x fraction must lie in [0, 1], got {}",
                self.x_fraction
            ));
        }
        if self.mech_masks.is_empty() {
            return bad("no mechanism masks".into());
        }
        if let Err(e) = PrecisionContext::new(self.precision_bits) {
            return bad(e.to_string());
        }
        if self.parallelism == Parallelism::Workers(0) {
            return bad("worker count must be positive".into());
        }
        match &self.egos {
            EgoSelection::Explicit(v) if v.is_empty() => bad("empty ego list".into()),
            EgoSelection::Random { count: 0, .. } | EgoSelection::DegreeStratified { count: 0 } => {
                bad("ego count must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

/// A partitioned graph and the name it is reported under.
pub struct Dataset {
    pub name: String,
    pub graph: PartitionedGraph,
}

impl Dataset {
    pub fn load(config: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let (name, g) = match &config.source {
            GraphSource::EdgeList(path) => {
                let file = File::open(path).map_err(|e| ExperimentError::Dataset {
                    path: path.clone(),
                    source: e.into(),
                })?;
                let (g, _) = load_edge_list(BufReader::new(file), &EdgeListFormat::default())
                    .map_err(|source| ExperimentError::Dataset {
                        path: path.clone(),
                        source,
                    })?;
                (dataset_name(path), g)
            }
            GraphSource::Synthetic(spec) => {
                (format!("synthetic({spec})"), preferential_attachment(spec))
            }
        };
        Ok(Self {
            name,
            graph: partition_nodes(g, config.partition_seed, config.x_fraction),
        })
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
