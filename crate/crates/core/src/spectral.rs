//! Diffusion-map embedding of an asymmetric influence matrix and the default
//! initialization built on it.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::em::{FitConfig, FitNotes};
use crate::error::{Error, Result};
use crate::model::{EmbeddingPair, EventRecord, InfluenceMatrix, KernelBank, ModelParams, Points};

/// Smoothing added to every entry when a row or column has no mass.
const SMOOTHING: f64 = 1e-12;

/// Random stream used for breaking degenerate initial embeddings.
const INIT_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionConfig {
    /// Density exponent in `[0, 1]`.
    pub alpha: f64,
    /// Output dimension.
    pub dim: usize,
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(())
    }
}

/// `diag(c)^-alpha Phi diag(r)^-alpha` with `c_k` the k-th column sum and
/// `r_l` the l-th row sum of `Phi`.
pub fn density_normalize(phi: &InfluenceMatrix, alpha: f64, notes: &mut FitNotes) -> Result<DMatrix<f64>> {
    phi.validate()?;
    let mut a = phi.0.clone();
    let n = a.nrows();
    let degenerate = (0..n).any(|i| !(a.row(i).sum() > 0.0) || !(a.column(i).sum() > 0.0));
    if degenerate {
        notes.warn("influence matrix has an empty row or column; smoothed".into());
        a.add_scalar_mut(SMOOTHING);
    }
    if alpha == 0.0 {
        return Ok(a);
    }
    let col: Vec<f64> = (0..n).map(|k| a.column(k).sum().powf(-alpha)).collect();
    let row: Vec<f64> = (0..n).map(|l| a.row(l).sum().powf(-alpha)).collect();
    for k in 0..n {
        for l in 0..n {
            a[(k, l)] *= col[k] * row[l];
        }
    }
    Ok(a)
}

/// Divides every row by its sum.
pub fn row_normalize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = a.clone();
    for mut row in out.row_iter_mut() {
        let s = row.sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Numerical(format!("row sum {s} cannot be normalized")));
        }
        row /= s;
    }
    Ok(out)
}

/// Spectral coordinates of a row-stochastic matrix: left singular vectors
/// scaled by their singular values, skipping the leading component.
fn diffusion_coordinates(b: &DMatrix<f64>, dim: usize, notes: &mut FitNotes) -> Points {
    let n = b.nrows();
    let svd = b.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });
    let top = order.first().map_or(0.0, |&i| svd.singular_values[i]);

    let lead = order.first().map(|&i| u.column(i));
    if let Some(col) = lead {
        let spread = col.max() - col.min();
        if spread > 1e-8 * col.amax().max(1e-300) {
            notes.warn("leading spectral component is not constant; dropped anyway".into());
        }
    }

    let mut pts = Points::zeros(n, dim);
    let mut padded = false;
    for d in 0..dim {
        let Some(&idx) = order.get(d + 1) else {
            padded = true;
            continue;
        };
        let sigma = svd.singular_values[idx];
        if !(sigma > 1e-12 * top) {
            padded = true;
            continue;
        }
        let col = u.column(idx);
        // Orient so the largest-magnitude entry is positive.
        let pivot = (0..n).fold(0, |best, i| if col[i].abs() > col[best].abs() { i } else { best });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            pts.point_mut(k)[d] = sign * sigma * col[k];
        }
    }
    if padded {
        notes.warn(format!(
            "fewer than {} informative spectral components; padded with zeros",
            dim + 1
        ));
    }
    pts
}

/// Reception coordinates from the row-stochastic `A`, influence coordinates
/// from the row-stochastic `A^T`.
pub fn diffusion_embed(a: &DMatrix<f64>, config: DiffusionConfig, notes: &mut FitNotes) -> Result<EmbeddingPair> {
    config.validate()?;
    if a.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain("affinity matrix must be finite and nonnegative"));
    }
    let b_r = row_normalize(a)?;
    let b_i = row_normalize(&a.transpose())?;
    EmbeddingPair::new(
        diffusion_coordinates(&b_r, config.dim, notes),
        diffusion_coordinates(&b_i, config.dim, notes),
    )
}

/// Typical waiting time between events of one type:
/// `n (t_N - t_1) / (N - 1)`.
pub fn typical_interarrival(record: &EventRecord) -> Result<f64> {
    let ev = record.events();
    if ev.len() < 2 {
        return Err(Error::domain("need at least two events"));
    }
    let span = ev[ev.len() - 1].time - ev[0].time;
    let t_hat = record.n_types() as f64 * span / (ev.len() - 1) as f64;
    if !(t_hat > 0.0) {
        return Err(Error::domain("all events are simultaneous"));
    }
    Ok(t_hat)
}

/// Unscaled excitation guess: exponentially discounted counts of ordered type
/// pairs at the typical inter-arrival rate.
pub fn init_influence_guess(record: &EventRecord) -> Result<InfluenceMatrix> {
    let kappa = typical_interarrival(record)?.recip();
    let n = record.n_types();
    let ev = record.events();
    let mut phi = DMatrix::zeros(n, n);
    // state[l] = sum over earlier type-l events of kappa exp(-kappa (t_last - t_i)).
    let mut state = vec![0.0; n];
    let mut t_last = ev[0].time;
    let mut start = 0;
    while start < ev.len() {
        let t = ev[start].time;
        let mut end = start;
        while end < ev.len() && ev[end].time == t {
            end += 1;
        }
        let decay = (-kappa * (t - t_last)).exp();
        state.iter_mut().for_each(|s| *s *= decay);
        t_last = t;
        for e in &ev[start..end] {
            for l in 0..n {
                phi[(e.kind, l)] += state[l];
            }
        }
        for e in &ev[start..end] {
            state[e.kind] += kappa;
        }
        start = end;
    }
    Ok(InfluenceMatrix(phi))
}

/// Default starting point of a fit.
pub fn init_params(record: &EventRecord, config: &FitConfig, notes: &mut FitNotes) -> Result<ModelParams> {
    let n = record.n_types();
    if n == 0 {
        return Err(Error::domain("record declares no event types"));
    }
    let t_hat = typical_interarrival(record)?;
    let guess = init_influence_guess(record)?;
    let a = density_normalize(&guess, config.dm_alpha, notes)?;
    let mut embedding = diffusion_embed(
        &a,
        DiffusionConfig {
            alpha: config.dm_alpha,
            dim: config.dim,
        },
        notes,
    )?;
    jitter_flat_columns(&mut embedding, config.seed, notes);

    let mean_sq = (0..n)
        .flat_map(|k| (0..n).map(move |l| (k, l)))
        .map(|(k, l)| embedding.dyad_sq(k, l))
        .sum::<f64>()
        / (n * n) as f64;
    let beta_sq = if mean_sq > 0.0 {
        mean_sq
    } else {
        notes.warn("initial embedding has no spread; bandwidth set to 1".into());
        1.0
    };
    let r_count = config.kernels;
    let params = ModelParams {
        embedding,
        kernels: KernelBank {
            beta_sq: vec![beta_sq; r_count],
            kappa: (1..=r_count).map(|r| 1.0 / (r as f64 * t_hat)).collect(),
            gamma: vec![1.0 / r_count as f64; r_count],
        },
        xi: vec![1.0; n],
        mu: vec![record.len() as f64 / (record.horizon() * n as f64); n],
        full_rank: None,
    };
    params.validate()?;
    Ok(params)
}

/// Replaces coordinates that are identically zero on both sides with small
/// seeded noise, so that gradient-based refinement can move them.
fn jitter_flat_columns(embedding: &mut EmbeddingPair, seed: u64, notes: &mut FitNotes) {
    let n = embedding.n_types();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    for d in 0..embedding.dim() {
        let flat = (0..n).all(|k| embedding.reception.point(k)[d] == 0.0 && embedding.influence.point(k)[d] == 0.0);
        if !flat {
            continue;
        }
        notes.warn(format!("initial coordinate {d} is degenerate; jittered"));
        for k in 0..n {
            embedding.reception.point_mut(k)[d] = 1e-3 * rng.random_range(-1.0..1.0);
            embedding.influence.point_mut(k)[d] = 1e-3 * rng.random_range(-1.0..1.0);
        }
    }
}
