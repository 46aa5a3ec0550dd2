use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::EvalSplit;
use crate::em::FitConfig;
use crate::error::{Error, Result};
use crate::io::read_to_string;
use crate::model::EventRecord;
use crate::simulate::DEFAULT_EVENT_CAP;

/// Settings of a synthetic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Number of types.
    pub n: usize,
    /// Embedding dimension of the ground truth.
    pub m: usize,
    pub kernels: usize,
    /// Stop after this many events...
    pub events: Option<usize>,
    /// ...or at this horizon.
    pub horizon: Option<f64>,
    pub seed: u64,
    pub event_cap: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            n: 15,
            m: 2,
            kernels: 1,
            events: Some(300),
            horizon: None,
            seed: 0,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }
}

/// How a record is divided into training and test windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitSpec {
    /// Absolute split time.
    SplitTime(f64),
    /// Test window of this length at the end of the record.
    TestLast(f64),
    /// Train on this fraction of the events.
    TrainFraction(f64),
}

impl SplitSpec {
    pub fn resolve(&self, record: &EventRecord) -> Result<EvalSplit> {
        let split = match *self {
            SplitSpec::SplitTime(t) => EvalSplit { split_time: t },
            SplitSpec::TestLast(d) => {
                if !(d > 0.0) {
                    return Err(Error::Config(format!("test window length must be positive, got {d}")));
                }
                EvalSplit {
                    split_time: (record.horizon() - d).max(0.0),
                }
            }
            SplitSpec::TrainFraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::Config(format!("train fraction must lie in (0, 1), got {f}")));
                }
                let k = (f * record.len() as f64).floor() as usize;
                EvalSplit::before_event(record, k)?
            }
        };
        split.windows(record)?;
        Ok(split)
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub simulate: Option<SimulateConfig>,
    pub fit: Option<FitConfig>,
    pub split: Option<SplitSpec>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(fit) = &cfg.fit {
            fit.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }
}
