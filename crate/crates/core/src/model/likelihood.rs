//! Responses, conditional intensities, the exact compensator and the
//! point-process log-likelihood.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::kernels::{normalized_column, temporal_kernel};
use crate::model::params::{InfluenceMatrix, ModelParams};
use crate::model::record::{EventRecord, Window};
use crate::numeric::pairwise_sum;

/// Per-kernel excitation weights `w_r(k, l)`, so that the response of type
/// `k` to an event of type `l` through kernel `r` is `w_r(k, l) f_r(tau)`.
///
/// Building the table once per parameter set turns every intensity
/// evaluation into lookups.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    n: usize,
    kappa: Vec<f64>,
    mu: Vec<f64>,
    weights: Vec<Vec<f64>>,
    col_sums: Vec<Vec<f64>>,
    max_weight: Vec<f64>,
}

impl ResponseTable {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.n_types();
        let r_count = params.n_kernels();
        let mut weights = Vec::with_capacity(r_count);
        for r in 0..r_count {
            let gamma = params.kernels.gamma[r];
            let mut w = vec![0.0; n * n];
            match &params.full_rank {
                Some(phi) => {
                    for k in 0..n {
                        for l in 0..n {
                            w[k * n + l] = phi.get(k, l) * gamma;
                        }
                    }
                }
                None => {
                    let beta_sq = params.kernels.beta_sq[r];
                    let x = &params.embedding.reception;
                    for l in 0..n {
                        let column = normalized_column(x, params.embedding.influence.point(l), beta_sq);
                        let scale = params.xi[l] * gamma;
                        for k in 0..n {
                            w[k * n + l] = scale * column[k];
                        }
                    }
                }
            }
            weights.push(w);
        }
        let col_sums = weights
            .iter()
            .map(|w| (0..n).map(|l| (0..n).map(|k| w[k * n + l]).sum()).collect())
            .collect();
        let max_weight = weights.iter().map(|w| w.iter().copied().fold(0.0, f64::max)).collect();
        ResponseTable {
            n,
            kappa: params.kernels.kappa.clone(),
            mu: params.mu.clone(),
            weights,
            col_sums,
            max_weight,
        }
    }

    pub fn n_types(&self) -> usize {
        self.n
    }

    pub fn n_kernels(&self) -> usize {
        self.kappa.len()
    }

    pub fn kappa(&self, r: usize) -> f64 {
        self.kappa[r]
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.mu[k]
    }

    pub fn mu_total(&self) -> f64 {
        self.mu.iter().sum()
    }

    /// Time-integrated weight of kernel `r` from type `l` onto type `k`.
    #[inline]
    pub fn weight(&self, r: usize, k: usize, l: usize) -> f64 {
        self.weights[r][k * self.n + l]
    }

    /// Total weight of kernel `r` emitted by type `l` across all receivers.
    #[inline]
    pub fn column_sum(&self, r: usize, l: usize) -> f64 {
        self.col_sums[r][l]
    }

    pub(crate) fn max_weight(&self, r: usize) -> f64 {
        self.max_weight[r]
    }

    /// Single-kernel response `h_r(k_to, k_from, tau)`.
    #[inline]
    pub fn kernel_response(&self, r: usize, k_to: usize, k_from: usize, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        self.weight(r, k_to, k_from) * temporal_kernel(tau, self.kappa[r])
    }

    /// Full response summed over kernels.
    pub fn response(&self, k_to: usize, k_from: usize, tau: f64) -> f64 {
        (0..self.n_kernels())
            .map(|r| self.kernel_response(r, k_to, k_from, tau))
            .sum()
    }

    pub fn influence_matrix(&self) -> InfluenceMatrix {
        let n = self.n;
        let mut phi = DMatrix::zeros(n, n);
        for w in &self.weights {
            for k in 0..n {
                for l in 0..n {
                    phi[(k, l)] += w[k * n + l];
                }
            }
        }
        InfluenceMatrix(phi)
    }
}

/// Which kernels a response evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSel {
    All,
    Only(usize),
}

/// Response of type `k_to` at lag `tau` after an event of type `k_from`.
pub fn response(k_to: usize, k_from: usize, tau: f64, params: &ModelParams, kernels: KernelSel) -> f64 {
    let table = ResponseTable::new(params);
    match kernels {
        KernelSel::All => table.response(k_to, k_from, tau),
        KernelSel::Only(r) => table.kernel_response(r, k_to, k_from, tau),
    }
}

/// Conditional intensity of type `k` at time `t`, counting only events
/// strictly before `t`.
pub fn intensity(k: usize, t: f64, record: &EventRecord, params: &ModelParams) -> f64 {
    let table = ResponseTable::new(params);
    intensity_with(&table, k, t, record)
}

pub(crate) fn intensity_with(table: &ResponseTable, k: usize, t: f64, record: &EventRecord) -> f64 {
    let excitation: f64 = record
        .events()
        .iter()
        .take_while(|e| e.time < t)
        .map(|e| table.response(k, e.kind, t - e.time))
        .sum();
    table.mu(k) + excitation
}

/// Intensities evaluated at an event, just before it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventIntensity {
    /// `lambda(k_j, t_j)` for the realized type.
    pub own: f64,
    /// `sum_l lambda(l, t_j)`.
    pub total: f64,
}

/// Intensities at every event of the record, computed by the exponential
/// recursion in O(N n R). Simultaneous events do not excite one another.
pub fn event_intensities(record: &EventRecord, table: &ResponseTable) -> Vec<EventIntensity> {
    let n = table.n_types();
    let r_count = table.n_kernels();
    // decayed[r][l] = sum over past events i of type l of exp(-kappa_r (t - t_i)).
    let mut decayed = vec![vec![0.0; n]; r_count];
    let mut out = Vec::with_capacity(record.len());
    let events = record.events();
    let mu_total = table.mu_total();
    let mut t_prev = 0.0;
    let mut start = 0;
    while start < events.len() {
        let t = events[start].time;
        let end = start + events[start..].iter().take_while(|e| e.time == t).count();
        let dt = t - t_prev;
        if dt > 0.0 {
            for (r, state) in decayed.iter_mut().enumerate() {
                let factor = (-table.kappa(r) * dt).exp();
                state.iter_mut().for_each(|s| *s *= factor);
            }
        }
        let mut total = mu_total;
        for (r, state) in decayed.iter().enumerate() {
            let kappa = table.kappa(r);
            total += kappa
                * state
                    .iter()
                    .enumerate()
                    .map(|(l, s)| table.column_sum(r, l) * s)
                    .sum::<f64>();
        }
        for e in &events[start..end] {
            let mut own = table.mu(e.kind);
            for (r, state) in decayed.iter().enumerate() {
                let kappa = table.kappa(r);
                own += kappa
                    * state
                        .iter()
                        .enumerate()
                        .map(|(l, s)| table.weight(r, e.kind, l) * s)
                        .sum::<f64>();
            }
            out.push(EventIntensity { own, total });
        }
        for e in &events[start..end] {
            for state in decayed.iter_mut() {
                state[e.kind] += 1.0;
            }
        }
        t_prev = t;
        start = end;
    }
    out
}

/// Exact integral of the total intensity over `window`.
pub fn compensator(record: &EventRecord, params: &ModelParams, window: Window) -> Result<f64> {
    check_window(record, window)?;
    Ok(compensator_with(&ResponseTable::new(params), record, window))
}

pub(crate) fn compensator_with(table: &ResponseTable, record: &EventRecord, window: Window) -> f64 {
    let (a, b) = (window.start, window.end);
    let background = table.mu_total() * (b - a);
    let terms: Vec<f64> = record
        .events()
        .iter()
        .take_while(|e| e.time < b)
        .map(|e| {
            (0..table.n_kernels())
                .map(|r| {
                    let kappa = table.kappa(r);
                    let from = (a - e.time).max(0.0);
                    let to = b - e.time;
                    // exp(-k from) - exp(-k to), without cancellation.
                    let mass = -(-kappa * from).exp() * (-kappa * (to - from)).exp_m1();
                    table.column_sum(r, e.kind) * mass
                })
                .sum::<f64>()
        })
        .collect();
    background + pairwise_sum(&terms)
}

fn check_window(record: &EventRecord, window: Window) -> Result<()> {
    if window.start > window.end || window.start < 0.0 || window.end > record.horizon() {
        return Err(Error::domain(format!(
            "window [{}, {}) outside [0, {}]",
            window.start,
            window.end,
            record.horizon()
        )));
    }
    Ok(())
}

/// Log-likelihood of the events inside `window`, with every intensity
/// conditioned on the complete history (including events before the window).
pub fn log_likelihood(record: &EventRecord, params: &ModelParams, window: Window) -> Result<f64> {
    check_window(record, window)?;
    let table = ResponseTable::new(params);
    log_likelihood_with(&table, record, window)
}

pub(crate) fn log_likelihood_with(table: &ResponseTable, record: &EventRecord, window: Window) -> Result<f64> {
    let intensities = event_intensities(record, table);
    let range = record.window_range(window);
    let mut logs = Vec::with_capacity(range.len());
    for j in range {
        let lambda = intensities[j].own;
        if !(lambda > 0.0) {
            return Err(Error::ZeroIntensity { index: j });
        }
        logs.push(lambda.ln());
    }
    Ok(pairwise_sum(&logs) - compensator_with(table, record, window))
}

/// Time-integrated excitation matrix of the model.
pub fn influence_matrix(params: &ModelParams) -> InfluenceMatrix {
    ResponseTable::new(params).influence_matrix()
}
