//! Evaluation metrics: windowed likelihoods, attribution divergence,
//! background residuals, predictive accuracy and embedding recovery.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::em::BranchingStructure;
use crate::error::{Error, Result};
use crate::model::likelihood::{event_intensities, log_likelihood_with, ResponseTable};
use crate::model::{EmbeddingPair, EventRecord, InfluenceMatrix, ModelParams, Window};
use crate::numeric::{mean, pairwise_sum, std_dev};
use crate::simulate::stream_rng;

/// Random stream used when sampling background events.
pub const QQ_STREAM: u64 = 2;
/// Random stream used for bootstrap resampling.
pub const BOOTSTRAP_STREAM: u64 = 4;

/// Train window `[0, split)` and test window `[split, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSplit {
    pub split_time: f64,
}

impl EvalSplit {
    pub fn windows(&self, record: &EventRecord) -> Result<(Window, Window)> {
        let t = record.horizon();
        if !(self.split_time >= 0.0 && self.split_time <= t) {
            return Err(Error::domain(format!("split {} outside [0, {t}]", self.split_time)));
        }
        Ok((
            Window {
                start: 0.0,
                end: self.split_time,
            },
            Window {
                start: self.split_time,
                end: t,
            },
        ))
    }

    /// Split placed between the events at positions `k - 1` and `k`.
    pub fn before_event(record: &EventRecord, k: usize) -> Result<Self> {
        let ev = record.events();
        if k == 0 || k >= ev.len() {
            return Err(Error::domain(format!(
                "cannot split {} events before event {k}",
                ev.len()
            )));
        }
        Ok(EvalSplit {
            split_time: 0.5 * (ev[k - 1].time + ev[k].time),
        })
    }
}

/// Per-event log-likelihoods of a split; a side is `None` when its window
/// holds no events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub train: Option<f64>,
    pub test: Option<f64>,
}

/// Log-likelihood per event over each window, with every intensity
/// conditioned on the whole preceding history.
pub fn split_eval(record: &EventRecord, params: &ModelParams, split: EvalSplit) -> Result<SplitScores> {
    params.validate()?;
    let (train, test) = split.windows(record)?;
    let table = ResponseTable::new(params);
    let score = |w: Window| -> Result<Option<f64>> {
        let count = record.window_range(w).len();
        if count == 0 || !(w.width() > 0.0) {
            return Ok(None);
        }
        Ok(Some(log_likelihood_with(&table, record, w)? / count as f64))
    };
    Ok(SplitScores {
        train: score(train)?,
        test: score(test)?,
    })
}

/// Mean over events of the Hellinger distance between the two attribution
/// distributions, the background counted as one outcome.
pub fn hellinger_divergence(estimated: &BranchingStructure, truth: &BranchingStructure) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::Shape(format!(
            "branching structures cover {} and {} events",
            estimated.len(),
            truth.len()
        )));
    }
    if estimated.is_empty() {
        return Err(Error::domain("no events to compare"));
    }
    let per_event: Vec<f64> = (0..estimated.len())
        .map(|j| {
            let mut p: Vec<_> = estimated
                .row(j)
                .iter()
                .map(|a| ((a.source, a.kernel), a.prob))
                .collect();
            let mut q: Vec<_> = truth.row(j).iter().map(|a| ((a.source, a.kernel), a.prob)).collect();
            p.sort_by_key(|e| e.0);
            q.sort_by_key(|e| e.0);
            let mut bc = (estimated.background(j) * truth.background(j)).sqrt();
            let (mut a, mut b) = (0, 0);
            while a < p.len() && b < q.len() {
                match p[a].0.cmp(&q[b].0) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        bc += (p[a].1 * q[b].1).sqrt();
                        a += 1;
                        b += 1;
                    }
                }
            }
            (1.0 - bc).max(0.0).sqrt()
        })
        .collect();
    Ok(mean(&per_event))
}

/// Pairs of (empirical, theoretical) quantiles.
pub type QqPoints = Vec<(f64, f64)>;

/// Samples likely background events (each event kept with its background
/// probability) and pairs the sorted gaps between them with quantiles of the
/// exponential law at the total background rate. `None` when fewer than two
/// events are sampled.
pub fn background_qq(
    record: &EventRecord,
    params: &ModelParams,
    branching: &BranchingStructure,
    seed: u64,
) -> Result<Option<QqPoints>> {
    if branching.len() != record.len() {
        return Err(Error::Shape("branching does not match the record".into()));
    }
    let rate: f64 = params.mu.iter().sum();
    if !(rate > 0.0) {
        return Err(Error::domain("total background rate is zero"));
    }
    let mut rng = stream_rng(seed, QQ_STREAM);
    let times: Vec<f64> = record
        .events()
        .iter()
        .zip(branching.backgrounds())
        .filter(|&(_, &p)| rng.random::<f64>() < p)
        .map(|(e, _)| e.time)
        .collect();
    if times.len() < 2 {
        return Ok(None);
    }
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let count = gaps.len() as f64;
    Ok(Some(
        gaps.into_iter()
            .enumerate()
            .map(|(i, g)| {
                let p = (i as f64 + 0.5) / count;
                (g, -(-p).ln_1p() / rate)
            })
            .collect(),
    ))
}

/// One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut total = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        total += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

fn effective_scale(n: usize) -> f64 {
    let s = (n as f64).sqrt();
    s + 0.12 + 0.11 / s
}

/// KS test of `samples` against the exponential law with `rate`.
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsResult> {
    if samples.is_empty() || !(rate > 0.0) {
        return Err(Error::domain("KS test needs samples and a positive rate"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let statistic = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = -(-rate * x.max(0.0)).exp_m1();
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_sf(effective_scale(s.len()) * statistic),
    })
}

/// Critical KS distance for `n` samples at significance `level`.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / effective_scale(n)
}

/// Geometric-mean probability assigned to the realized types in `window`,
/// together with the same score for constant rates equal to the empirical
/// frequencies in `reference`.
pub fn categorical_accuracy(
    record: &EventRecord,
    params: &ModelParams,
    window: Window,
    reference: Window,
) -> Result<(f64, f64)> {
    params.validate()?;
    let range = record.window_range(window);
    if range.is_empty() {
        return Err(Error::domain("no events in the scored window"));
    }
    let table = ResponseTable::new(params);
    let intens = event_intensities(record, &table);
    let mut log_score = Vec::with_capacity(range.len());
    for j in range.clone() {
        let e = intens[j];
        if !(e.total > 0.0) {
            return Err(Error::ZeroIntensity { index: j });
        }
        log_score.push((e.own / e.total).ln());
    }
    let mut counts = vec![0usize; record.n_types()];
    for e in &record.events()[record.window_range(reference)] {
        counts[e.kind] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::domain("no events in the reference window"));
    }
    let naive_log: Vec<f64> = record.events()[range]
        .iter()
        .map(|e| (counts[e.kind] as f64 / total as f64).ln())
        .collect();
    Ok((mean(&log_score).exp(), mean(&naive_log).exp()))
}

/// Kendall's tau-b between two equally long samples, in O(M log M).
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape("samples differ in length".into()));
    }
    if a.len() < 2 {
        return Err(Error::domain("need at least two observations"));
    }
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let tie_pairs = |run: usize| (run * run.saturating_sub(1) / 2) as u64;

    let n = pairs.len();
    let n0 = (n * (n - 1) / 2) as u64;
    let (mut ties_a, mut ties_joint) = (0u64, 0u64);
    let (mut run_a, mut run_joint) = (1usize, 1usize);
    for i in 1..n {
        if pairs[i].0 == pairs[i - 1].0 {
            run_a += 1;
            if pairs[i].1 == pairs[i - 1].1 {
                run_joint += 1;
            } else {
                ties_joint += tie_pairs(run_joint);
                run_joint = 1;
            }
        } else {
            ties_a += tie_pairs(run_a);
            ties_joint += tie_pairs(run_joint);
            run_a = 1;
            run_joint = 1;
        }
    }
    ties_a += tie_pairs(run_a);
    ties_joint += tie_pairs(run_joint);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys);
    let mut ties_b = 0u64;
    let mut run_b = 1usize;
    for i in 1..n {
        if ys[i] == ys[i - 1] {
            run_b += 1;
        } else {
            ties_b += tie_pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += tie_pairs(run_b);

    let num = n0 as f64 - ties_a as f64 - ties_b as f64 + ties_joint as f64 - 2.0 * swaps as f64;
    let den = ((n0 - ties_a) as f64 * (n0 - ties_b) as f64).sqrt();
    if den == 0.0 {
        return Err(Error::domain("one sample is constant"));
    }
    Ok(num / den)
}

/// Sorts `v` and returns the number of strict inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    swaps
}

/// All `n^2` reception-to-influence distances `|y_l - x_k|`, row-major in `k`.
pub fn dyad_distances(embedding: &EmbeddingPair) -> Vec<f64> {
    let n = embedding.n_types();
    (0..n)
        .flat_map(|k| (0..n).map(move |l| embedding.dyad_sq(k, l).sqrt()))
        .collect()
}

/// Rank agreement of the dyad distances of two embeddings of the same types.
pub fn kendall_distance_correlation(learned: &EmbeddingPair, truth: &EmbeddingPair) -> Result<f64> {
    if learned.n_types() != truth.n_types() {
        return Err(Error::Shape("embeddings cover different types".into()));
    }
    kendall_tau_b(&dyad_distances(learned), &dyad_distances(truth))
}

/// Root mean squared entrywise difference.
pub fn phi_rmse(estimated: &InfluenceMatrix, truth: &InfluenceMatrix) -> Result<f64> {
    if estimated.0.shape() != truth.0.shape() {
        return Err(Error::Shape("influence matrices differ in size".into()));
    }
    let sq: Vec<f64> = estimated
        .0
        .iter()
        .zip(truth.0.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok((pairwise_sum(&sq) / sq.len() as f64).sqrt())
}

/// P-value of the one-sided t-test of `mean > mu0`.
pub fn one_sided_t_test(samples: &[f64], mu0: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::domain("t-test needs at least two samples"));
    }
    let n = samples.len() as f64;
    let sd = std_dev(samples);
    if sd == 0.0 {
        return Ok(if mean(samples) > mu0 { 0.0 } else { 1.0 });
    }
    let t = (mean(samples) - mu0) / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::domain(e.to_string()))?;
    Ok(1.0 - dist.cdf(t))
}

/// Percentile bootstrap of the mean: `(mean, lower, upper)` at the given
/// two-sided coverage.
pub fn bootstrap_mean(samples: &[f64], reps: usize, coverage: f64, seed: u64) -> Result<(f64, f64, f64)> {
    if samples.is_empty() || reps == 0 {
        return Err(Error::domain("bootstrap needs samples and replicates"));
    }
    let mut rng = stream_rng(seed, BOOTSTRAP_STREAM);
    let mut means: Vec<f64> = (0..reps)
        .map(|_| {
            let draw: Vec<f64> = (0..samples.len())
                .map(|_| *samples.choose(&mut rng).expect("nonempty"))
                .collect();
            mean(&draw)
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - coverage);
    let at = |q: f64| means[((q * reps as f64) as usize).min(reps - 1)];
    Ok((mean(samples), at(tail), at(1.0 - tail)))
}

/// Metrics gathered by a diagnostics run; absent entries lacked inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_ll_per_event: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_ll_per_event: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hellinger: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qq_points: Option<QqPoints>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qq_ks: Option<KsResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cat_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub naive_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kendall_tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi_rmse: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}
