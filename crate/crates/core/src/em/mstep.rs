//! Closed-form M-step maximizers of the approximated complete-data objective.
//!
//! All updates see the branching only through [`BranchingStats`]: attributed
//! mass per kernel and (receiver, influencer) type pair, lag-weighted mass per
//! kernel, and background mass per type.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::em::branching::BranchingStructure;
use crate::error::{Error, Result};
use crate::model::{EmbeddingPair, EventRecord, InfluenceMatrix, Points};

/// Smallest bandwidth the M-step will return.
pub const BETA_SQ_FLOOR: f64 = 1e-12;

/// Gamma prior on each decay rate; `(1, 0)` is uninformative.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        GammaPrior { alpha: 1.0, beta: 0.0 }
    }
}

/// Deduplicated warnings raised while fitting; each distinct message is
/// logged once.
#[derive(Debug, Clone, Default)]
pub struct FitNotes {
    seen: BTreeSet<String>,
}

impl FitNotes {
    pub fn warn(&mut self, msg: String) {
        if !self.seen.contains(&msg) {
            log::warn!("{msg}");
            self.seen.insert(msg);
        }
    }

    pub fn messages(&self) -> Vec<String> {
        self.seen.iter().cloned().collect()
    }
}

/// Aggregates of a branching structure that the M-step depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingStats {
    n: usize,
    /// `[r][k * n + l]`: mass attributed to kernel r from type-l parents to type-k children.
    pair_mass: Vec<Vec<f64>>,
    /// `[r]`: attributed mass weighted by the parent-child lag.
    lag_mass: Vec<f64>,
    /// `[k]`: background mass of type-k events.
    background: Vec<f64>,
    counts: Vec<usize>,
}

impl BranchingStats {
    pub fn new(record: &EventRecord, branching: &BranchingStructure, n_kernels: usize) -> Self {
        let n = record.n_types();
        let events = record.events();
        let mut pair_mass = vec![vec![0.0; n * n]; n_kernels];
        let mut lag_mass = vec![0.0; n_kernels];
        let mut background = vec![0.0; n];
        for (j, target) in events.iter().enumerate() {
            for a in branching.row(j) {
                let source = events[a.source];
                pair_mass[a.kernel][target.kind * n + source.kind] += a.prob;
                lag_mass[a.kernel] += a.prob * (target.time - source.time);
            }
            background[target.kind] += branching.background(j);
        }
        BranchingStats {
            n,
            pair_mass,
            lag_mass,
            background,
            counts: record.type_counts(),
        }
    }

    pub fn n_types(&self) -> usize {
        self.n
    }

    pub fn n_kernels(&self) -> usize {
        self.lag_mass.len()
    }

    /// Mass of kernel `r` from influencer type `l` onto receiver type `k`.
    pub fn pair_mass(&self, r: usize, k: usize, l: usize) -> f64 {
        self.pair_mass[r][k * self.n + l]
    }

    /// Total mass attributed to kernel `r`.
    pub fn kernel_mass(&self, r: usize) -> f64 {
        self.pair_mass[r].iter().sum()
    }

    pub fn lag_mass(&self, r: usize) -> f64 {
        self.lag_mass[r]
    }

    pub fn background_mass(&self, k: usize) -> f64 {
        self.background[k]
    }

    /// Occurrences of each type in the record.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Mass of all offspring attributed to parents of type `l`.
    pub fn offspring_mass(&self, l: usize) -> f64 {
        (0..self.n_kernels())
            .map(|r| (0..self.n).map(|k| self.pair_mass(r, k, l)).sum::<f64>())
            .sum()
    }
}

/// Decay-rate maximizer (MAP under the gamma prior). `None` when the kernel
/// carries no usable mass; the caller keeps the previous value.
pub fn update_kappa(stats: &BranchingStats, prior: GammaPrior, r: usize) -> Option<f64> {
    let num = stats.kernel_mass(r) + prior.alpha - 1.0;
    let den = stats.lag_mass(r) + prior.beta;
    let kappa = num / den;
    (num > 0.0 && den > 0.0 && kappa.is_finite()).then_some(kappa)
}

/// Bandwidth maximizer: attributed mean squared dyad distance per dimension.
pub fn update_beta_sq(
    stats: &BranchingStats,
    embedding: &EmbeddingPair,
    r: usize,
    notes: &mut FitNotes,
) -> Option<f64> {
    let n = stats.n_types();
    let mass = stats.kernel_mass(r);
    if !(mass > 0.0) {
        notes.warn(format!("kernel {r} carries no attributed mass; bandwidth kept"));
        return None;
    }
    let mut spread = 0.0;
    for k in 0..n {
        for l in 0..n {
            let w = stats.pair_mass(r, k, l);
            if w > 0.0 {
                spread += w * embedding.dyad_sq(k, l);
            }
        }
    }
    let beta_sq = spread / (embedding.dim() as f64 * mass);
    if beta_sq < BETA_SQ_FLOOR {
        notes.warn(format!(
            "kernel {r} bandwidth collapsed to {beta_sq:e}; clamped to {BETA_SQ_FLOOR:e}"
        ));
        return Some(BETA_SQ_FLOOR);
    }
    Some(beta_sq)
}

/// Basis-coefficient maximizer given the current exertions.
pub fn update_gamma(stats: &BranchingStats, xi: &[f64], r: usize) -> Result<f64> {
    let exerted: f64 = stats.counts().iter().zip(xi).map(|(&c, &x)| c as f64 * x).sum();
    if !(exerted > 0.0) {
        return Err(Error::domain("total exertion of the record is zero"));
    }
    Ok(stats.kernel_mass(r) / exerted)
}

/// Exertion maximizers given the basis coefficients, before rescaling.
/// Types that never occur keep the uninformative value 1.
pub fn update_xi(stats: &BranchingStats, gamma: &[f64], notes: &mut FitNotes) -> Vec<f64> {
    let gamma_total: f64 = gamma.iter().sum();
    (0..stats.n_types())
        .map(|l| {
            let count = stats.counts()[l];
            if count == 0 || !(gamma_total > 0.0) {
                notes.warn(format!("type {l} never influences; exertion set to 1"));
                return 1.0;
            }
            stats.offspring_mass(l) / (gamma_total * count as f64)
        })
        .collect()
}

/// Rescales exertions to unit mean and moves the removed factor into the
/// basis coefficients, leaving every product `xi(l) gamma_r` unchanged.
pub fn rescale_exertions(xi: &mut [f64], gamma: &mut [f64]) {
    let mean = xi.iter().sum::<f64>() / xi.len() as f64;
    if !(mean > 0.0 && mean.is_finite()) {
        return;
    }
    xi.iter_mut().for_each(|x| *x /= mean);
    gamma.iter_mut().for_each(|g| *g *= mean);
}

/// Background-rate maximizers.
pub fn update_mu(stats: &BranchingStats, horizon: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    Ok((0..stats.n_types())
        .map(|k| stats.background_mass(k) / horizon)
        .collect())
}

/// Influence points: each `y_l` moves to the attributed mean of the reception
/// points it excites. Types without offspring keep their point.
pub fn update_influence_points(stats: &BranchingStats, embedding: &EmbeddingPair, notes: &mut FitNotes) -> Points {
    let n = stats.n_types();
    let m = embedding.dim();
    let mut out = embedding.influence.clone();
    for l in 0..n {
        let mut weight = 0.0;
        let mut acc = vec![0.0; m];
        for k in 0..n {
            let w: f64 = (0..stats.n_kernels()).map(|r| stats.pair_mass(r, k, l)).sum();
            if w > 0.0 {
                weight += w;
                for (a, x) in acc.iter_mut().zip(embedding.reception.point(k)) {
                    *a += w * x;
                }
            }
        }
        if weight > 0.0 {
            for (y, a) in out.point_mut(l).iter_mut().zip(acc) {
                *y = a / weight;
            }
        } else {
            notes.warn(format!("type {l} has no attributed offspring; influence point kept"));
        }
    }
    out
}

/// Full-rank influence maximizer: attributed offspring per parent occurrence.
pub fn frb_update(stats: &BranchingStats) -> InfluenceMatrix {
    let n = stats.n_types();
    let mut phi = DMatrix::zeros(n, n);
    for l in 0..n {
        let count = stats.counts()[l];
        if count == 0 {
            continue;
        }
        for k in 0..n {
            let mass: f64 = (0..stats.n_kernels()).map(|r| stats.pair_mass(r, k, l)).sum();
            phi[(k, l)] = mass / count as f64;
        }
    }
    InfluenceMatrix(phi)
}

/// Temporal split of the full-rank response across kernels: each kernel's
/// share of the attributed mass. `None` when nothing is attributed.
pub fn frb_temporal_weights(stats: &BranchingStats) -> Option<Vec<f64>> {
    let masses: Vec<f64> = (0..stats.n_kernels()).map(|r| stats.kernel_mass(r)).collect();
    let total: f64 = masses.iter().sum();
    (total > 0.0).then(|| masses.iter().map(|m| m / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::branching::{Attribution, BranchingStructure};
    use crate::model::Event;
    use approx::assert_relative_eq;

    fn pair_record(dt: f64) -> EventRecord {
        EventRecord::new(
            vec![Event { kind: 0, time: 0.0 }, Event { kind: 1, time: dt }],
            2,
            dt + 1.0,
        )
        .unwrap()
    }

    fn full_pair() -> BranchingStructure {
        BranchingStructure::from_rows(vec![
            (vec![], 1.0),
            (
                vec![Attribution {
                    source: 0,
                    kernel: 0,
                    prob: 1.0,
                }],
                0.0,
            ),
        ])
        .unwrap()
    }

    #[test]
    fn kappa_examples() {
        let rec = pair_record(2.0);
        let stats = BranchingStats::new(&rec, &full_pair(), 1);
        assert_relative_eq!(update_kappa(&stats, GammaPrior::default(), 0).unwrap(), 0.5);
        let prior = GammaPrior { alpha: 2.0, beta: 1.0 };
        assert_relative_eq!(update_kappa(&stats, prior, 0).unwrap(), 2.0 / 3.0);

        let empty = BranchingStructure::from_rows(vec![(vec![], 1.0), (vec![], 1.0)]).unwrap();
        let stats = BranchingStats::new(&rec, &empty, 1);
        assert_eq!(update_kappa(&stats, GammaPrior::default(), 0), None);
    }

    #[test]
    fn beta_sq_examples() {
        let rec = pair_record(1.0);
        let stats = BranchingStats::new(&rec, &full_pair(), 1);
        // Receiver type 1 at (2, 0); influencer type 0 at (0, 0): distance^2 = 4.
        let emb = EmbeddingPair::new(
            Points::from_rows(&[vec![5.0, 5.0], vec![2.0, 0.0]], 2).unwrap(),
            Points::from_rows(&[vec![0.0, 0.0], vec![9.0, 9.0]], 2).unwrap(),
        )
        .unwrap();
        let mut notes = FitNotes::default();
        assert_relative_eq!(update_beta_sq(&stats, &emb, 0, &mut notes).unwrap(), 2.0);

        let collapsed = EmbeddingPair::new(
            Points::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]], 2).unwrap(),
            Points::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]], 2).unwrap(),
        )
        .unwrap();
        assert_eq!(update_beta_sq(&stats, &collapsed, 0, &mut notes), Some(BETA_SQ_FLOOR));
        assert_eq!(notes.messages().len(), 1);
    }

    #[test]
    fn gamma_and_mu_examples() {
        let rec = pair_record(1.0);
        let stats = BranchingStats::new(&rec, &full_pair(), 1);
        assert_relative_eq!(update_gamma(&stats, &[1.0, 1.0], 0).unwrap(), 0.5);
        let mu = update_mu(&stats, rec.horizon()).unwrap();
        assert_relative_eq!(mu[0], 1.0 / 2.0);
        assert_eq!(mu[1], 0.0);

        let empty = BranchingStructure::from_rows(vec![(vec![], 1.0), (vec![], 1.0)]).unwrap();
        let stats = BranchingStats::new(&rec, &empty, 1);
        assert_eq!(update_gamma(&stats, &[1.0, 1.0], 0).unwrap(), 0.0);
    }

    #[test]
    fn xi_rescale_preserves_products() {
        let mut xi = vec![1.0, 3.0];
        let mut gamma = vec![0.2];
        rescale_exertions(&mut xi, &mut gamma);
        assert_eq!(xi, vec![0.5, 1.5]);
        assert_relative_eq!(gamma[0], 0.4, max_relative = 1e-15);

        let mut xi = vec![0.5, 1.5];
        let mut gamma = vec![0.7, 0.1];
        rescale_exertions(&mut xi, &mut gamma);
        assert_eq!(xi, vec![0.5, 1.5]);
        assert_eq!(gamma, vec![0.7, 0.1]);

        let mut xi = vec![4.2];
        let mut gamma = vec![0.3];
        rescale_exertions(&mut xi, &mut gamma);
        assert_eq!(xi, vec![1.0]);
    }

    #[test]
    fn absent_types_default_exertion() {
        let rec = EventRecord::new(vec![Event { kind: 0, time: 0.5 }], 2, 1.0).unwrap();
        let b = BranchingStructure::from_rows(vec![(vec![], 1.0)]).unwrap();
        let stats = BranchingStats::new(&rec, &b, 1);
        let mut notes = FitNotes::default();
        let xi = update_xi(&stats, &[0.5], &mut notes);
        assert_eq!(xi, vec![0.0, 1.0]);
        assert_eq!(notes.messages().len(), 1);
    }

    #[test]
    fn influence_point_weighted_mean() {
        // Type-0 parent; children of type 0 (mass 0.2) at x=(0,0) and type 1 (mass 0.6) at x=(1,0).
        let rec = EventRecord::new(
            vec![
                Event { kind: 0, time: 0.0 },
                Event { kind: 0, time: 1.0 },
                Event { kind: 1, time: 2.0 },
            ],
            2,
            3.0,
        )
        .unwrap();
        let b = BranchingStructure::from_rows(vec![
            (vec![], 1.0),
            (
                vec![Attribution {
                    source: 0,
                    kernel: 0,
                    prob: 0.2,
                }],
                0.8,
            ),
            (
                vec![Attribution {
                    source: 0,
                    kernel: 0,
                    prob: 0.6,
                }],
                0.4,
            ),
        ])
        .unwrap();
        let stats = BranchingStats::new(&rec, &b, 1);
        let emb = EmbeddingPair::new(
            Points::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]], 2).unwrap(),
            Points::from_rows(&[vec![3.0, 3.0], vec![-2.0, 7.0]], 2).unwrap(),
        )
        .unwrap();
        let mut notes = FitNotes::default();
        let y = update_influence_points(&stats, &emb, &mut notes);
        assert_relative_eq!(y.point(0)[0], 0.75, max_relative = 1e-15);
        assert_eq!(y.point(0)[1], 0.0);
        // Type 1 excites nothing and keeps its point.
        assert_eq!(y.point(1), &[-2.0, 7.0]);
    }

    #[test]
    fn frb_examples() {
        let rec = EventRecord::new(
            vec![
                Event { kind: 0, time: 0.0 },
                Event { kind: 0, time: 1.0 },
                Event { kind: 0, time: 2.0 },
            ],
            1,
            3.0,
        )
        .unwrap();
        let a = |source, prob| Attribution {
            source,
            kernel: 0,
            prob,
        };
        let b = BranchingStructure::from_rows(vec![
            (vec![], 1.0),
            (vec![a(0, 0.5)], 0.5),
            (vec![a(0, 0.1), a(1, 0.3)], 0.6),
        ])
        .unwrap();
        let stats = BranchingStats::new(&rec, &b, 1);
        assert_relative_eq!(frb_update(&stats).get(0, 0), 0.9 / 3.0, max_relative = 1e-15);
        assert_eq!(frb_temporal_weights(&stats), Some(vec![1.0]));

        let empty = BranchingStructure::from_rows(vec![(vec![], 1.0); 3]).unwrap();
        let stats = BranchingStats::new(&rec, &empty, 1);
        assert_eq!(frb_update(&stats).get(0, 0), 0.0);
        assert_eq!(frb_temporal_weights(&stats), None);
    }
}
