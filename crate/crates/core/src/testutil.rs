//! Random instances for unit tests.

use rand::Rng;

use crate::model::{EmbeddingPair, Event, EventRecord, KernelBank, ModelParams, Points};

pub(crate) fn random_points<R: Rng>(rng: &mut R, n: usize, m: usize) -> Points {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Points::from_rows(&rows, m).unwrap()
}

pub(crate) fn random_params<R: Rng>(rng: &mut R, n: usize, m: usize, r: usize) -> ModelParams {
    let mut xi: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..2.0)).collect();
    let mean = xi.iter().sum::<f64>() / n as f64;
    xi.iter_mut().for_each(|v| *v /= mean);
    ModelParams {
        embedding: EmbeddingPair::new(random_points(rng, n, m), random_points(rng, n, m)).unwrap(),
        kernels: KernelBank {
            beta_sq: (0..r).map(|_| rng.random_range(0.1..1.5)).collect(),
            kappa: (0..r).map(|_| rng.random_range(0.3..3.0)).collect(),
            gamma: (0..r).map(|_| rng.random_range(0.05..0.5)).collect(),
        },
        xi,
        mu: (0..n).map(|_| rng.random_range(0.05..1.0)).collect(),
        full_rank: None,
    }
}

pub(crate) fn random_record<R: Rng>(rng: &mut R, n: usize, len: usize, horizon: f64) -> EventRecord {
    let events = (0..len)
        .map(|_| Event {
            kind: rng.random_range(0..n),
            time: rng.random_range(0.0..horizon),
        })
        .collect();
    EventRecord::new(events, n, horizon).unwrap()
}
