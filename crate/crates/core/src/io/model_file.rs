use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_to_string, write_json};
use crate::model::{EmbeddingPair, InfluenceMatrix, KernelBank, ModelParams, Points};

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "reception_X")]
    pub reception: Vec<Vec<f64>>,
    #[serde(rename = "influence_Y")]
    pub influence: Vec<Vec<f64>>,
    pub beta_sq: Vec<f64>,
    pub kappa: Vec<f64>,
    pub gamma: Vec<f64>,
    pub xi: Vec<f64>,
    pub mu: Vec<f64>,
    pub type_labels: Vec<String>,
    /// Free influence matrix of a full-rank model, row `k` receiving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<Vec<f64>>>,
}

impl ModelFile {
    pub fn from_params(params: &ModelParams, labels: &[String]) -> Result<Self> {
        params.validate()?;
        if labels.len() != params.n_types() {
            return Err(Error::Shape(format!(
                "{} labels for {} types",
                labels.len(),
                params.n_types()
            )));
        }
        Ok(ModelFile {
            schema_version: SCHEMA_VERSION,
            n: params.n_types(),
            m: params.dim(),
            r: params.n_kernels(),
            reception: params.embedding.reception.rows(),
            influence: params.embedding.influence.rows(),
            beta_sq: params.kernels.beta_sq.clone(),
            kappa: params.kernels.kappa.clone(),
            gamma: params.kernels.gamma.clone(),
            xi: params.xi.clone(),
            mu: params.mu.clone(),
            type_labels: labels.to_vec(),
            phi: params
                .full_rank
                .as_ref()
                .map(|p| p.0.row_iter().map(|r| r.iter().copied().collect()).collect()),
        })
    }

    pub fn to_params(&self) -> Result<(ModelParams, Vec<String>)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let check = |field: &str, len: usize, want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(Error::Schema(format!(
                    "field `{field}` has {len} entries, expected {want}"
                )))
            }
        };
        check("reception_X", self.reception.len(), self.n)?;
        check("influence_Y", self.influence.len(), self.n)?;
        check("xi", self.xi.len(), self.n)?;
        check("mu", self.mu.len(), self.n)?;
        check("type_labels", self.type_labels.len(), self.n)?;
        check("beta_sq", self.beta_sq.len(), self.r)?;
        check("kappa", self.kappa.len(), self.r)?;
        check("gamma", self.gamma.len(), self.r)?;
        let points = |field: &str, rows: &[Vec<f64>]| {
            Points::from_rows(rows, self.m).map_err(|e| Error::Schema(format!("field `{field}`: {e}")))
        };
        let full_rank = match &self.phi {
            None => None,
            Some(rows) => {
                if rows.len() != self.n || rows.iter().any(|r| r.len() != self.n) {
                    return Err(Error::Schema(format!("field `phi` must be {0}x{0}", self.n)));
                }
                Some(InfluenceMatrix(DMatrix::from_fn(self.n, self.n, |k, l| rows[k][l])))
            }
        };
        let params = ModelParams {
            embedding: EmbeddingPair::new(
                points("reception_X", &self.reception)?,
                points("influence_Y", &self.influence)?,
            )?,
            kernels: KernelBank {
                beta_sq: self.beta_sq.clone(),
                kappa: self.kappa.clone(),
                gamma: self.gamma.clone(),
            },
            xi: self.xi.clone(),
            mu: self.mu.clone(),
            full_rank,
        };
        params.validate().map_err(|e| Error::Schema(e.to_string()))?;
        Ok((params, self.type_labels.clone()))
    }
}

pub fn save_model(params: &ModelParams, labels: &[String], path: &Path) -> Result<()> {
    write_json(path, &ModelFile::from_params(params, labels)?)
}

pub fn load_model(path: &Path) -> Result<(ModelParams, Vec<String>)> {
    let text = read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    file.to_params()
}
