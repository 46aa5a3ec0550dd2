use serde::{Deserialize, Serialize};

use crate::em::branching::DEFAULT_FLOOR;
use crate::em::mstep::GammaPrior;
use crate::error::{Error, Result};
use crate::geometry::NewtonRegularizers;

/// Estimator variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Gradient ascent on the reception points.
    HhgA,
    /// Regularized Newton steps on the reception points.
    HhgB,
    /// Spectral re-embedding of the current influence matrix every epoch.
    HhgDm,
    /// Unconstrained influence matrix.
    Frb,
    /// Embedding held fixed at its initial coordinates.
    Geo,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::HhgA, Mode::HhgB, Mode::HhgDm, Mode::Frb, Mode::Geo];

    pub fn name(self) -> &'static str {
        match self {
            Mode::HhgA => "hhg-a",
            Mode::HhgB => "hhg-b",
            Mode::HhgDm => "hhg-dm",
            Mode::Frb => "frb",
            Mode::Geo => "geo",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings of one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub mode: Mode,
    pub epochs: usize,
    /// Number of kernels R.
    pub kernels: usize,
    /// Embedding dimension m.
    pub dim: usize,
    /// Ascent rate; defaults to `15 n / N` when unset.
    pub eps: Option<f64>,
    /// Newton regularizer on the step size; `inf` disables it.
    #[serde(with = "maybe_infinite")]
    pub eps1: f64,
    /// Newton regularizer anchoring the points to the origin.
    pub eps2: f64,
    pub inner_steps: usize,
    /// Density exponent of the spectral embedding.
    pub dm_alpha: f64,
    pub prior: GammaPrior,
    pub seed: u64,
    pub branching_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mode: Mode::HhgB,
            epochs: 500,
            kernels: 1,
            dim: 2,
            eps: None,
            eps1: f64::INFINITY,
            eps2: 0.1,
            inner_steps: 4,
            dm_alpha: 1.0,
            prior: GammaPrior::default(),
            seed: 0,
            branching_floor: DEFAULT_FLOOR,
        }
    }
}

impl FitConfig {
    pub fn regularizers(&self) -> NewtonRegularizers {
        NewtonRegularizers {
            eps1: self.eps1,
            eps2: self.eps2,
        }
    }

    /// Ascent rate for `n` types and `n_events` training events.
    pub fn ascent_rate(&self, n: usize, n_events: usize) -> f64 {
        self.eps.unwrap_or(15.0 * n as f64 / n_events.max(1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.kernels == 0 || self.dim == 0 {
            return Err(Error::Config("kernel count and dimension must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.dm_alpha) {
            return Err(Error::Config(format!("dm_alpha {} outside [0, 1]", self.dm_alpha)));
        }
        if !(self.prior.alpha >= 1.0) || !(self.prior.beta >= 0.0) {
            return Err(Error::Config("gamma prior needs alpha >= 1 and beta >= 0".into()));
        }
        if !(self.branching_floor >= 0.0 && self.branching_floor < 1.0) {
            return Err(Error::Config("branching floor must lie in [0, 1)".into()));
        }
        match self.mode {
            Mode::HhgA => {
                if let Some(eps) = self.eps {
                    if !(eps > 0.0 && eps.is_finite()) {
                        return Err(Error::Config(format!("eps must be positive, got {eps}")));
                    }
                }
            }
            Mode::HhgB => {
                self.regularizers().validate()?;
                if self.inner_steps == 0 {
                    return Err(Error::Config("inner_steps must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Serializes infinity as the string "inf" so the value survives JSON.
mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {t:?}"
            ))),
        }
    }
}
