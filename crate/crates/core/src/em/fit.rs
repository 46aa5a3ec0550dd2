use std::time::{Duration, Instant};

use crate::em::branching::{e_step, BranchingStructure};
use crate::em::config::{FitConfig, Mode};
use crate::em::mstep::*;
use crate::error::{Error, Result};
use crate::geometry::{gradient_from_stats, hessian_from_stats, hhg_a_step, hhg_b_step};
use crate::model::{influence_matrix, log_likelihood, EventRecord, ModelParams};
use crate::spectral::{density_normalize, diffusion_embed, init_params, DiffusionConfig};

/// Outcome of one estimation run.
#[derive(Debug, Clone)]
pub struct FitReport {
    /// Training log-likelihood after each epoch.
    pub train_ll: Vec<f64>,
    pub final_params: ModelParams,
    /// Parameters of the epoch with the highest training log-likelihood.
    pub best_params: ModelParams,
    pub best_epoch: usize,
    /// Attribution under the final parameters.
    pub branching: BranchingStructure,
    pub warnings: Vec<String>,
    /// Set when the run stopped early on a non-finite objective.
    pub aborted: Option<String>,
    pub wall_time: Duration,
}

/// Puts parameters into the full-rank form: the current influence matrix
/// becomes the free matrix and the basis coefficients become temporal weights.
pub fn to_full_rank(params: &ModelParams) -> ModelParams {
    let mut out = params.clone();
    if out.full_rank.is_none() {
        out.full_rank = Some(influence_matrix(params));
        let total: f64 = out.kernels.gamma.iter().sum();
        let r = out.kernels.gamma.len();
        out.kernels.gamma = if total > 0.0 {
            out.kernels.gamma.iter().map(|g| g / total).collect()
        } else {
            vec![1.0 / r as f64; r]
        };
    }
    out
}

/// Runs EM from `init`, or from the default initialization when `None`.
pub fn fit(record: &EventRecord, config: &FitConfig, init: Option<ModelParams>) -> Result<FitReport> {
    config.validate()?;
    if record.is_empty() {
        return Err(Error::domain("cannot fit an empty record"));
    }
    let started = Instant::now();
    let mut notes = FitNotes::default();
    let mut params = match init {
        Some(p) => {
            p.validate()?;
            if p.n_types() != record.n_types() {
                return Err(Error::Shape(format!(
                    "initial model has {} types, record has {}",
                    p.n_types(),
                    record.n_types()
                )));
            }
            p
        }
        None => init_params(record, config, &mut notes)?,
    };
    if config.mode == Mode::Frb {
        params = to_full_rank(&params);
    } else {
        params.full_rank = None;
    }

    let window = record.full_window();
    let mut train_ll = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut aborted = None;
    for epoch in 0..config.epochs {
        let branching = e_step(record, &params, config.branching_floor)?;
        let stats = BranchingStats::new(record, &branching, params.n_kernels());
        let mut next = params.clone();
        let stepped = m_step(&stats, &mut next, record, config, &mut notes);
        let ll = stepped.and_then(|_| {
            next.validate()?;
            log_likelihood(record, &next, window)
        });
        match ll {
            Ok(ll) if ll.is_finite() => {
                params = next;
                train_ll.push(ll);
                if best.as_ref().is_none_or(|(b, _, _)| ll > *b) {
                    best = Some((ll, epoch, params.clone()));
                }
            }
            Ok(ll) => {
                aborted = Some(format!("epoch {epoch}: objective became {ll}"));
                break;
            }
            Err(e) => {
                aborted = Some(format!("epoch {epoch}: {e}"));
                break;
            }
        }
    }
    if let Some(msg) = &aborted {
        notes.warn(format!("fit stopped early at {msg}"));
    }
    let (best_epoch, best_params) = match best {
        Some((_, e, p)) => (e, p),
        None => (0, params.clone()),
    };
    let branching = e_step(record, &params, config.branching_floor)?;
    Ok(FitReport {
        train_ll,
        final_params: params,
        best_params,
        best_epoch,
        branching,
        warnings: notes.messages(),
        aborted,
        wall_time: started.elapsed(),
    })
}

/// One M-phase, updating `params` in place.
pub fn m_step(
    stats: &BranchingStats,
    params: &mut ModelParams,
    record: &EventRecord,
    config: &FitConfig,
    notes: &mut FitNotes,
) -> Result<()> {
    let r_count = params.n_kernels();
    for r in 0..r_count {
        match update_kappa(stats, config.prior, r) {
            Some(k) => params.kernels.kappa[r] = k,
            None => notes.warn(format!("kernel {r} inactive; decay rate kept")),
        }
    }
    params.mu = update_mu(stats, record.horizon())?;

    if config.mode == Mode::Frb {
        if let Some(w) = frb_temporal_weights(stats) {
            params.kernels.gamma = w;
        }
        params.full_rank = Some(frb_update(stats));
        return Ok(());
    }

    let update_bandwidths = |params: &mut ModelParams, notes: &mut FitNotes| {
        for r in 0..r_count {
            if let Some(b) = update_beta_sq(stats, &params.embedding, r, notes) {
                params.kernels.beta_sq[r] = b;
            }
        }
    };
    if config.mode != Mode::HhgDm {
        update_bandwidths(params, notes);
    }
    let gamma = (0..r_count)
        .map(|r| update_gamma(stats, &params.xi, r))
        .collect::<Result<Vec<_>>>()?;
    let mut xi = update_xi(stats, &gamma, notes);
    let mut gamma = gamma;
    rescale_exertions(&mut xi, &mut gamma);
    params.kernels.gamma = gamma;
    params.xi = xi;

    let n_events = record.len();
    match config.mode {
        Mode::HhgA => {
            params.embedding.influence = update_influence_points(stats, &params.embedding, notes);
            let grad = gradient_from_stats(stats, params);
            let eps = config.ascent_rate(record.n_types(), n_events);
            params.embedding.reception = hhg_a_step(&params.embedding.reception, &grad, eps, n_events, notes);
        }
        Mode::HhgB => {
            params.embedding.influence = update_influence_points(stats, &params.embedding, notes);
            for _ in 0..config.inner_steps {
                let grad = gradient_from_stats(stats, params);
                let hess = hessian_from_stats(stats, params);
                params.embedding.reception = hhg_b_step(
                    &params.embedding.reception,
                    &grad,
                    &hess,
                    config.regularizers(),
                    n_events,
                    notes,
                );
            }
        }
        Mode::HhgDm => {
            let phi = influence_matrix(params);
            let a = density_normalize(&phi, config.dm_alpha, notes)?;
            params.embedding = diffusion_embed(
                &a,
                DiffusionConfig {
                    alpha: config.dm_alpha,
                    dim: params.dim(),
                },
                notes,
            )?;
            update_bandwidths(params, notes);
        }
        Mode::Geo | Mode::Frb => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_params, random_record};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> EventRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        random_record(&mut rng, 4, 60, 30.0)
    }

    #[test]
    fn every_mode_runs_and_reports() {
        let record = sample();
        for mode in Mode::ALL {
            let cfg = FitConfig {
                mode,
                epochs: 15,
                ..FitConfig::default()
            };
            let rep = fit(&record, &cfg, None).unwrap();
            assert_eq!(rep.train_ll.len(), 15, "{mode}");
            assert!(rep.aborted.is_none());
            assert!(rep.train_ll[rep.best_epoch] >= rep.train_ll.iter().cloned().fold(f64::MIN, f64::max));
            assert!(rep.branching.max_row_error() < 1e-9);
            let mean_xi = rep.final_params.xi.iter().sum::<f64>() / 4.0;
            if mode != Mode::Frb {
                assert!((mean_xi - 1.0).abs() < 1e-9);
            }
            assert_eq!(rep.final_params.full_rank.is_some(), mode == Mode::Frb);
        }
    }

    #[test]
    fn geo_keeps_coordinates_bitwise() {
        let record = sample();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let init = random_params(&mut rng, 4, 2, 1);
        let cfg = FitConfig {
            mode: Mode::Geo,
            epochs: 10,
            ..FitConfig::default()
        };
        let rep = fit(&record, &cfg, Some(init.clone())).unwrap();
        assert_eq!(rep.final_params.embedding, init.embedding);
        assert_ne!(rep.final_params.kernels, init.kernels);
    }

    #[test]
    fn frb_likelihood_never_decreases() {
        // Without geometric approximations in play, EM is monotone up to the
        // integral truncation at the horizon.
        let record = sample();
        let cfg = FitConfig {
            mode: Mode::Frb,
            epochs: 30,
            ..FitConfig::default()
        };
        let rep = fit(&record, &cfg, None).unwrap();
        let first = rep.train_ll[0];
        let last = *rep.train_ll.last().unwrap();
        assert!(last >= first - 1e-6, "{first} -> {last}");
    }

    #[test]
    fn deterministic_given_seed() {
        let record = sample();
        let cfg = FitConfig {
            epochs: 8,
            seed: 3,
            ..FitConfig::default()
        };
        let a = fit(&record, &cfg, None).unwrap();
        let b = fit(&record, &cfg, None).unwrap();
        assert_eq!(a.train_ll, b.train_ll);
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn rejects_mismatched_initial_model() {
        let record = sample();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = random_params(&mut rng, 3, 2, 1);
        assert!(fit(&record, &FitConfig::default(), Some(init)).is_err());
        let empty = EventRecord::new(vec![], 2, 1.0).unwrap();
        assert!(fit(&empty, &FitConfig::default(), None).is_err());
    }
}
