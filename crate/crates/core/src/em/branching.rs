//! Expected branching structure: the E-step attribution and the
//! complete-data log-likelihood it induces.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::likelihood::{compensator_with, ResponseTable};
use crate::model::{EventRecord, ModelParams};
use crate::numeric::pairwise_sum;

/// Attribution of an event to an earlier event through one kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attribution {
    pub source: usize,
    pub kernel: usize,
    pub prob: f64,
}

/// Per-event attribution distributions, stored sparsely (CSR by target event).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingStructure {
    offsets: Vec<usize>,
    entries: Vec<Attribution>,
    background: Vec<f64>,
}

/// Default probability below which attributions are dropped.
pub const DEFAULT_FLOOR: f64 = 1e-12;

impl BranchingStructure {
    /// Assembles a structure from per-event rows, checking that each row is a
    /// distribution over earlier events and the background.
    pub fn from_rows(rows: Vec<(Vec<Attribution>, f64)>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut entries = Vec::new();
        let mut background = Vec::with_capacity(rows.len());
        offsets.push(0);
        for (j, (row, bg)) in rows.into_iter().enumerate() {
            let mut total = bg;
            for a in &row {
                if a.source >= j {
                    return Err(Error::domain(format!(
                        "event {j} attributed to non-preceding event {}",
                        a.source
                    )));
                }
                if !(0.0..=1.0).contains(&a.prob) {
                    return Err(Error::domain(format!("probability {} out of range", a.prob)));
                }
                total += a.prob;
            }
            if !(0.0..=1.0).contains(&bg) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!(
                    "attributions of event {j} sum to {total}, not 1"
                )));
            }
            entries.extend(row);
            offsets.push(entries.len());
            background.push(bg);
        }
        Ok(BranchingStructure {
            offsets,
            entries,
            background,
        })
    }

    pub fn len(&self) -> usize {
        self.background.len()
    }

    pub fn is_empty(&self) -> bool {
        self.background.is_empty()
    }

    /// Attributions of event `j` to earlier events.
    pub fn row(&self, j: usize) -> &[Attribution] {
        &self.entries[self.offsets[j]..self.offsets[j + 1]]
    }

    /// Probability that event `j` is a background event.
    pub fn background(&self, j: usize) -> f64 {
        self.background[j]
    }

    pub fn backgrounds(&self) -> &[f64] {
        &self.background
    }

    /// Number of stored (nonzero) pair attributions.
    pub fn stored_pairs(&self) -> usize {
        self.entries.len()
    }

    /// Largest deviation of a row total from one.
    pub fn max_row_error(&self) -> f64 {
        (0..self.len())
            .map(|j| {
                let s: f64 = self.row(j).iter().map(|a| a.prob).sum::<f64>() + self.background[j];
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// E-step: attribute every event to its possible parents in proportion to
/// their contribution to the intensity. Entries below `floor` are dropped and
/// each row renormalized.
pub fn e_step(record: &EventRecord, params: &ModelParams, floor: f64) -> Result<BranchingStructure> {
    let table = ResponseTable::new(params);
    e_step_with(&table, record, floor)
}

pub(crate) fn e_step_with(table: &ResponseTable, record: &EventRecord, floor: f64) -> Result<BranchingStructure> {
    let rows: Vec<Result<(Vec<Attribution>, f64)>> = (0..record.len())
        .into_par_iter()
        .map(|j| attribute_event(table, record, j, floor))
        .collect();
    let mut offsets = Vec::with_capacity(record.len() + 1);
    let mut entries = Vec::new();
    let mut background = Vec::with_capacity(record.len());
    offsets.push(0);
    for row in rows {
        let (row, bg) = row?;
        entries.extend(row);
        offsets.push(entries.len());
        background.push(bg);
    }
    Ok(BranchingStructure {
        offsets,
        entries,
        background,
    })
}

fn attribute_event(
    table: &ResponseTable,
    record: &EventRecord,
    j: usize,
    floor: f64,
) -> Result<(Vec<Attribution>, f64)> {
    let events = record.events();
    let target = events[j];
    let mu = table.mu(target.kind);
    let r_count = table.n_kernels();
    let mut contributions: Vec<Attribution> = Vec::new();
    let mut lambda = mu;
    for i in (0..j).rev() {
        let tau = target.time - events[i].time;
        if tau <= 0.0 {
            continue;
        }
        if floor > 0.0 && lambda > 0.0 {
            // Every older event contributes at most this much per kernel.
            let bound: f64 = (0..r_count)
                .map(|r| {
                    let kappa = table.kappa(r);
                    table.max_weight(r) * kappa * (-kappa * tau).exp()
                })
                .sum::<f64>()
                * (i + 1) as f64;
            if bound < floor * lambda {
                break;
            }
        }
        for r in 0..r_count {
            let h = table.kernel_response(r, target.kind, events[i].kind, tau);
            if h > 0.0 {
                lambda += h;
                contributions.push(Attribution {
                    source: i,
                    kernel: r,
                    prob: h,
                });
            }
        }
    }
    if !(lambda > 0.0) {
        return Err(Error::DegenerateEvent { index: j });
    }
    let mut bg = mu / lambda;
    contributions.iter_mut().for_each(|a| a.prob /= lambda);
    contributions.retain(|a| a.prob >= floor);
    let kept: f64 = contributions.iter().map(|a| a.prob).sum::<f64>() + bg;
    if kept != 1.0 {
        bg /= kept;
        contributions.iter_mut().for_each(|a| a.prob /= kept);
    }
    // Sources ascending keeps the layout independent of the scan direction.
    contributions.reverse();
    Ok((contributions, bg))
}

/// Complete-data log-likelihood of the model under the given attribution,
/// with the exact compensator over the whole record.
pub fn complete_data_loglik(record: &EventRecord, params: &ModelParams, branching: &BranchingStructure) -> Result<f64> {
    if branching.len() != record.len() {
        return Err(Error::Shape(format!(
            "branching covers {} events, record has {}",
            branching.len(),
            record.len()
        )));
    }
    let table = ResponseTable::new(params);
    let events = record.events();
    let mut terms = Vec::with_capacity(record.len());
    for (j, target) in events.iter().enumerate() {
        let mut parts = Vec::with_capacity(branching.row(j).len() + 1);
        for a in branching.row(j) {
            if a.prob == 0.0 {
                continue;
            }
            let h = table.kernel_response(
                a.kernel,
                target.kind,
                events[a.source].kind,
                target.time - events[a.source].time,
            );
            if !(h > 0.0) {
                return Err(Error::ZeroRateAttribution { index: j });
            }
            parts.push(a.prob * h.ln());
        }
        let pb = branching.background(j);
        if pb > 0.0 {
            let mu = table.mu(target.kind);
            if !(mu > 0.0) {
                return Err(Error::ZeroRateAttribution { index: j });
            }
            parts.push(pb * mu.ln());
        }
        terms.push(pairwise_sum(&parts));
    }
    Ok(pairwise_sum(&terms) - compensator_with(&table, record, record.full_window()))
}
