use serde::{Deserialize, Serialize};

use crate::em::{Attribution, BranchingStructure, FitConfig, FitReport};
use crate::error::{Error, Result};
use crate::io::model_file::{ModelFile, SCHEMA_VERSION};
use crate::model::ModelParams;

/// Attribution of one event: background probability and `(source, kernel, p)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingRow {
    pub background: f64,
    pub parents: Vec<(usize, usize, f64)>,
}

/// On-disk form of a fit. Wall time is left out so that identical runs
/// produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitReportFile {
    pub schema_version: u32,
    pub config: FitConfig,
    pub train_ll: Vec<f64>,
    pub best_epoch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub final_model: ModelFile,
    pub best_model: ModelFile,
    pub branching: Vec<BranchingRow>,
}

impl FitReportFile {
    pub fn new(report: &FitReport, config: &FitConfig, labels: &[String]) -> Result<Self> {
        let b = &report.branching;
        Ok(FitReportFile {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            train_ll: report.train_ll.clone(),
            best_epoch: report.best_epoch,
            aborted: report.aborted.clone(),
            warnings: report.warnings.clone(),
            final_model: ModelFile::from_params(&report.final_params, labels)?,
            best_model: ModelFile::from_params(&report.best_params, labels)?,
            branching: (0..b.len())
                .map(|j| BranchingRow {
                    background: b.background(j),
                    parents: b.row(j).iter().map(|a| (a.source, a.kernel, a.prob)).collect(),
                })
                .collect(),
        })
    }

    pub fn check_version(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "report schema_version {} is not supported",
                self.schema_version
            )));
        }
        Ok(())
    }

    pub fn final_params(&self) -> Result<(ModelParams, Vec<String>)> {
        self.check_version()?;
        self.final_model.to_params()
    }

    pub fn best_params(&self) -> Result<(ModelParams, Vec<String>)> {
        self.check_version()?;
        self.best_model.to_params()
    }

    pub fn branching(&self) -> Result<BranchingStructure> {
        BranchingStructure::from_rows(
            self.branching
                .iter()
                .map(|row| {
                    (
                        row.parents
                            .iter()
                            .map(|&(source, kernel, prob)| Attribution { source, kernel, prob })
                            .collect(),
                        row.background,
                    )
                })
                .collect(),
        )
        .map_err(|e| Error::Schema(format!("field `branching`: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{fit, Mode};
    use crate::testutil::random_record;
    use rand::SeedableRng;

    #[test]
    fn report_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let record = random_record(&mut rng, 3, 40, 20.0);
        let cfg = FitConfig {
            mode: Mode::HhgA,
            epochs: 5,
            ..FitConfig::default()
        };
        let rep = fit(&record, &cfg, None).unwrap();
        let labels: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let file = FitReportFile::new(&rep, &cfg, &labels).unwrap();
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back: FitReportFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.final_params().unwrap().0, rep.final_params);
        assert_eq!(back.branching().unwrap(), rep.branching);
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    }
}
