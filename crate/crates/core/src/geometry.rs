//! Optimizers for the reception embedding: a first-order ascent step and a
//! regularized Newton step on per-type blocks.
//!
//! Both work on the approximated complete-data objective
//!
//! ```text
//! F(X) = sum_r sum_{k,l} M_r(k,l) log g_r(x_k, y_l) - sum_r sum_l c_l xi(l) gamma_r sum_k g_r(x_k, y_l)
//! ```
//!
//! where `M_r(k,l)` is the branching mass from type `l` onto type `k`, `c_l` the
//! occurrences of type `l` and `g_r` the unnormalized Gaussian. The reception
//! points are decoupled: each `x_k` has its own gradient and Hessian block.

use nalgebra::{DMatrix, DVector};

use crate::em::{BranchingStats, BranchingStructure, FitNotes};
use crate::error::{Error, Result};
use crate::model::kernels::gaussian;
use crate::model::{EventRecord, ModelParams, Points};

/// Gradient of the approximated objective with respect to each reception point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceptionGradient(pub Points);

/// Curvature of the objective in one reception point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceptionHessianBlock {
    /// Diagonal coefficient before the zero ceiling.
    pub c: f64,
    /// Accumulated outer products `sum w (x - y)(x - y)^T / beta^4`.
    pub outer_sum: DMatrix<f64>,
}

impl ReceptionHessianBlock {
    /// Exact block `c I - outer_sum`.
    pub fn raw(&self) -> DMatrix<f64> {
        let m = self.outer_sum.nrows();
        DMatrix::identity(m, m) * self.c - &self.outer_sum
    }

    /// Block with the diagonal coefficient capped at zero; negative semidefinite.
    pub fn ceiled(&self) -> DMatrix<f64> {
        let m = self.outer_sum.nrows();
        DMatrix::identity(m, m) * self.c.min(0.0) - &self.outer_sum
    }
}

/// Regularizers of the Newton step. `eps1 = inf` disables the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonRegularizers {
    pub eps1: f64,
    pub eps2: f64,
}

impl NewtonRegularizers {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps1 > 0.0) || !(self.eps2 >= 0.0) || !self.eps2.is_finite() {
            return Err(Error::Config(format!(
                "need eps1 > 0 and finite eps2 >= 0, got eps1={}, eps2={}",
                self.eps1, self.eps2
            )));
        }
        if self.eps1.is_infinite() && self.eps2 == 0.0 {
            return Err(Error::Config(
                "eps1 = inf with eps2 = 0 leaves the Newton step unregularized".into(),
            ));
        }
        Ok(())
    }

    fn ridge(&self, n_events: f64) -> f64 {
        2.0 * n_events * (self.eps1.recip() + self.eps2)
    }
}

/// Objective value whose derivatives the optimizers follow.
pub fn approximate_objective(stats: &BranchingStats, params: &ModelParams) -> f64 {
    let n = stats.n_types();
    let m = params.dim();
    let emb = &params.embedding;
    let mut total = 0.0;
    for r in 0..stats.n_kernels() {
        let beta_sq = params.kernels.beta_sq[r];
        let gamma = params.kernels.gamma[r];
        for k in 0..n {
            for l in 0..n {
                let d2 = emb.dyad_sq(k, l);
                let mass = stats.pair_mass(r, k, l);
                if mass > 0.0 {
                    let log_g = -0.5 * m as f64 * (2.0 * std::f64::consts::PI * beta_sq).ln() - d2 / (2.0 * beta_sq);
                    total += mass * log_g;
                }
                let exerted = stats.counts()[l] as f64 * params.xi[l] * gamma;
                total -= exerted * gaussian(d2, beta_sq, m);
            }
        }
    }
    total
}

/// Gradient from aggregated branching statistics.
pub fn gradient_from_stats(stats: &BranchingStats, params: &ModelParams) -> ReceptionGradient {
    let n = stats.n_types();
    let m = params.dim();
    let emb = &params.embedding;
    let mut grad = Points::zeros(n, m);
    for k in 0..n {
        let x = emb.reception.point(k);
        let a = grad.point_mut(k);
        for r in 0..stats.n_kernels() {
            let beta_sq = params.kernels.beta_sq[r];
            let gamma = params.kernels.gamma[r];
            for l in 0..n {
                let y = emb.influence.point(l);
                let d2 = emb.dyad_sq(k, l);
                let exerted = stats.counts()[l] as f64 * params.xi[l] * gamma;
                let w = (exerted * gaussian(d2, beta_sq, m) - stats.pair_mass(r, k, l)) / beta_sq;
                for ((ai, xi), yi) in a.iter_mut().zip(x).zip(y) {
                    *ai += w * (xi - yi);
                }
            }
        }
    }
    ReceptionGradient(grad)
}

/// Hessian blocks from aggregated branching statistics.
pub fn hessian_from_stats(stats: &BranchingStats, params: &ModelParams) -> Vec<ReceptionHessianBlock> {
    let n = stats.n_types();
    let m = params.dim();
    let emb = &params.embedding;
    (0..n)
        .map(|k| {
            let x = emb.reception.point(k);
            let mut c = 0.0;
            let mut outer_sum = DMatrix::zeros(m, m);
            for r in 0..stats.n_kernels() {
                let beta_sq = params.kernels.beta_sq[r];
                let gamma = params.kernels.gamma[r];
                for l in 0..n {
                    let d2 = emb.dyad_sq(k, l);
                    let exerted = stats.counts()[l] as f64 * params.xi[l] * gamma * gaussian(d2, beta_sq, m);
                    c += (exerted - stats.pair_mass(r, k, l)) / beta_sq;
                    if exerted > 0.0 {
                        let diff = DVector::from_iterator(m, x.iter().zip(emb.influence.point(l)).map(|(a, b)| a - b));
                        outer_sum += (&diff * diff.transpose()) * (exerted / (beta_sq * beta_sq));
                    }
                }
            }
            ReceptionHessianBlock { c, outer_sum }
        })
        .collect()
}

/// Gradient of the approximated objective for every reception point.
pub fn reception_gradient(
    record: &EventRecord,
    params: &ModelParams,
    branching: &BranchingStructure,
) -> ReceptionGradient {
    let stats = BranchingStats::new(record, branching, params.n_kernels());
    gradient_from_stats(&stats, params)
}

/// Hessian block of the approximated objective for every reception point.
pub fn reception_hessian(
    record: &EventRecord,
    params: &ModelParams,
    branching: &BranchingStructure,
) -> Vec<ReceptionHessianBlock> {
    let stats = BranchingStats::new(record, branching, params.n_kernels());
    hessian_from_stats(&stats, params)
}

/// Gradient-ascent step `x_k + (eps / N) a_k`. Types with a non-finite
/// gradient stay put.
pub fn hhg_a_step(
    reception: &Points,
    gradient: &ReceptionGradient,
    eps: f64,
    n_events: usize,
    notes: &mut FitNotes,
) -> Points {
    let scale = eps / n_events as f64;
    let mut out = reception.clone();
    for k in 0..reception.len() {
        let a = gradient.0.point(k);
        if !a.iter().all(|v| v.is_finite()) {
            notes.warn(format!("non-finite gradient for type {k}; reception point kept"));
            continue;
        }
        for (x, g) in out.point_mut(k).iter_mut().zip(a) {
            *x += scale * g;
        }
    }
    out
}

/// Regularized Newton step on every block:
/// `x_k - (B_k - 2N(1/eps1 + eps2) I)^{-1} (a_k - 2 N eps2 x_k)`,
/// using the ceiled blocks. A block whose factorization fails is retried once
/// with a tenfold ridge and otherwise left unchanged.
pub fn hhg_b_step(
    reception: &Points,
    gradient: &ReceptionGradient,
    hessians: &[ReceptionHessianBlock],
    reg: NewtonRegularizers,
    n_events: usize,
    notes: &mut FitNotes,
) -> Points {
    let n_ev = n_events as f64;
    let ridge = reg.ridge(n_ev);
    let m = reception.dim();
    assert_eq!(hessians.len(), reception.len(), "one Hessian block per reception point");
    let mut out = reception.clone();
    for (k, hessian) in hessians.iter().enumerate() {
        let x = DVector::from_column_slice(reception.point(k));
        let a = DVector::from_column_slice(gradient.0.point(k));
        let a_reg = &a - &x * (2.0 * n_ev * reg.eps2);
        let block = hessian.ceiled();
        if !a_reg.iter().all(|v| v.is_finite()) || !block.iter().all(|v| v.is_finite()) {
            notes.warn(format!("non-finite curvature for type {k}; reception point kept"));
            continue;
        }
        // Solve (-B~) d = a~, then x <- x + d.
        let neg = |extra: f64| -&block + DMatrix::identity(m, m) * (ridge * extra);
        let step = neg(1.0)
            .cholesky()
            .or_else(|| neg(10.0).cholesky())
            .map(|ch| ch.solve(&a_reg));
        match step {
            Some(d) if d.iter().all(|v| v.is_finite()) => {
                for (xi, di) in out.point_mut(k).iter_mut().zip(d.iter()) {
                    *xi += di;
                }
            }
            _ => notes.warn(format!("singular curvature block for type {k}; step skipped")),
        }
    }
    out
}
