//! Random ground-truth models and exact simulation by thinning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Gamma, LogNormal};

use crate::em::{e_step, BranchingStructure, BETA_SQ_FLOOR};
use crate::error::{Error, Result};
use crate::model::likelihood::ResponseTable;
use crate::model::{influence_matrix, EmbeddingPair, Event, EventRecord, KernelBank, ModelParams, Points};

/// Random stream of the ground-truth draw.
pub const TRUTH_STREAM: u64 = 0;
/// Random stream of the event simulation.
pub const SIMULATION_STREAM: u64 = 1;

/// Default bound on simulated events before a run is declared explosive.
pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

/// A randomly drawn model together with its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub params: ModelParams,
    pub seed: u64,
    /// Spectral radius of the influence matrix.
    pub stability_radius: f64,
}

/// Seeded generator on a dedicated stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a subcritical model: uniform embedding on the unit cube, gamma
/// bandwidths of shape `1/sqrt(n)`, log-normal clocks and backgrounds, unit
/// exertions, and basis coefficients scaled so the influence matrix has unit
/// Frobenius norm.
pub fn sample_ground_truth(n: usize, dim: usize, kernels: usize, seed: u64) -> Result<GroundTruth> {
    if n == 0 || dim == 0 || kernels == 0 {
        return Err(Error::domain("types, dimension and kernel count must be positive"));
    }
    let mut rng = stream_rng(seed, TRUTH_STREAM);
    let uniform_points = |rng: &mut ChaCha20Rng| {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        Points::from_rows(&rows, dim)
    };
    let reception = uniform_points(&mut rng)?;
    let influence = uniform_points(&mut rng)?;
    let gamma_dist = Gamma::new(1.0 / (n as f64).sqrt(), 1.0).map_err(|e| Error::domain(e.to_string()))?;
    let lognormal = LogNormal::new(0.0, 1.0).map_err(|e| Error::domain(e.to_string()))?;
    let beta_sq = (0..kernels)
        .map(|_| gamma_dist.sample(&mut rng).max(BETA_SQ_FLOOR))
        .collect();
    let kappa = (0..kernels).map(|_| lognormal.sample(&mut rng)).collect();
    let mu = (0..n).map(|_| lognormal.sample(&mut rng) / n as f64).collect();
    let mut params = ModelParams {
        embedding: EmbeddingPair::new(reception, influence)?,
        kernels: KernelBank {
            beta_sq,
            kappa,
            gamma: vec![1.0 / (n as f64).sqrt(); kernels],
        },
        xi: vec![1.0; n],
        mu,
        full_rank: None,
    };
    let norm = influence_matrix(&params).frobenius();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numerical(format!("influence matrix norm {norm}")));
    }
    params.kernels.gamma.iter_mut().for_each(|g| *g /= norm);
    let stability_radius = influence_matrix(&params).spectral_radius();
    Ok(GroundTruth {
        params,
        seed,
        stability_radius,
    })
}

/// When to stop a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Keep every event before the horizon.
    Horizon(f64),
    /// Keep the first N events; the horizon is the time of event N + 1.
    Events(usize),
}

/// Simulates on `[0, T)` by Ogata thinning. Between events the total
/// intensity only decays, so its value just after the current time bounds it
/// until the next acceptance.
pub fn simulate_thinning(params: &ModelParams, stop: Stop, seed: u64, event_cap: usize) -> Result<EventRecord> {
    params.validate()?;
    let n = params.n_types();
    let r_count = params.n_kernels();
    let table = ResponseTable::new(params);
    let mu_total = table.mu_total();
    let mut rng = stream_rng(seed, SIMULATION_STREAM);

    let (horizon, target) = match stop {
        Stop::Horizon(t) if t > 0.0 => (t, usize::MAX),
        Stop::Horizon(t) => return Err(Error::domain(format!("horizon must be positive, got {t}"))),
        Stop::Events(count) => (f64::INFINITY, count + 1),
    };

    // state[r][l]: sum over past type-l events of kappa_r exp(-kappa_r (t - t_i)).
    let mut state = vec![vec![0.0; n]; r_count];
    let mut events = Vec::new();
    let mut t = 0.0;
    let total_at = |state: &[Vec<f64>]| {
        let mut total = mu_total;
        for (r, s) in state.iter().enumerate() {
            for (l, v) in s.iter().enumerate() {
                total += table.column_sum(r, l) * v;
            }
        }
        total
    };
    loop {
        let bound = total_at(&state);
        if !(bound > 0.0) {
            break;
        }
        let wait: f64 = Exp1.sample(&mut rng);
        let t_next = t + wait / bound;
        if t_next >= horizon {
            break;
        }
        for (r, s) in state.iter_mut().enumerate() {
            let decay = (-table.kappa(r) * (t_next - t)).exp();
            s.iter_mut().for_each(|v| *v *= decay);
        }
        t = t_next;
        let total = total_at(&state);
        debug_assert!(total <= bound * (1.0 + 1e-12), "thinning bound violated");
        if rng.random::<f64>() * bound >= total {
            continue;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut kind = n - 1;
        for k in 0..n {
            let mut lambda = table.mu(k);
            for (r, s) in state.iter().enumerate() {
                for (l, v) in s.iter().enumerate() {
                    lambda += table.weight(r, k, l) * v;
                }
            }
            if pick < lambda {
                kind = k;
                break;
            }
            pick -= lambda;
        }
        events.push(Event { kind, time: t });
        for (r, s) in state.iter_mut().enumerate() {
            s[kind] += table.kappa(r);
        }
        if events.len() >= target {
            break;
        }
        if events.len() >= event_cap {
            return Err(Error::Runaway {
                cap: event_cap,
                time: t,
            });
        }
    }

    match stop {
        Stop::Horizon(h) => EventRecord::new(events, n, h),
        Stop::Events(count) => {
            if events.len() < target {
                return Err(Error::Numerical(format!(
                    "process died out after {} of {count} events",
                    events.len()
                )));
            }
            let last = events.pop().expect("target is at least one");
            EventRecord::new(events, n, last.time)
        }
    }
}

/// Attribution of every event under the true parameters.
pub fn ground_truth_branching(record: &EventRecord, truth: &GroundTruth) -> Result<BranchingStructure> {
    e_step(record, &truth.params, 0.0)
}
