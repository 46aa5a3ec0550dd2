//! Estimation on long simulated records recovers the generating parameters.

use hhg::em::{fit, FitConfig, Mode};
use hhg::model::{influence_matrix, EmbeddingPair, InfluenceMatrix, KernelBank, ModelParams, Points};
use hhg::simulate::{simulate_thinning, Stop, DEFAULT_EVENT_CAP};
use nalgebra::DMatrix;

fn model(n: usize, mu: Vec<f64>, kappa: f64, gamma: f64) -> ModelParams {
    ModelParams {
        embedding: EmbeddingPair::new(Points::zeros(n, 1), Points::zeros(n, 1)).unwrap(),
        kernels: KernelBank {
            beta_sq: vec![1.0],
            kappa: vec![kappa],
            gamma: vec![gamma],
        },
        xi: vec![1.0; n],
        mu,
        full_rank: None,
    }
}

#[test]
fn univariate_hawkes() {
    // With one type the spatial factor is 1 and the model is the classic
    // exponential Hawkes process.
    let truth = model(1, vec![0.5], 2.0, 0.5);
    let record = simulate_thinning(&truth, Stop::Horizon(20_000.0), 3, DEFAULT_EVENT_CAP).unwrap();
    let cfg = FitConfig {
        mode: Mode::Geo,
        epochs: 200,
        dim: 1,
        ..FitConfig::default()
    };
    let report = fit(&record, &cfg, None).unwrap();
    assert!(report.aborted.is_none());
    let p = &report.best_params;
    assert!((p.mu[0] / 0.5 - 1.0).abs() < 0.08, "mu {}", p.mu[0]);
    assert!(
        (p.kernels.kappa[0] / 2.0 - 1.0).abs() < 0.1,
        "kappa {}",
        p.kernels.kappa[0]
    );
    let branching_ratio = p.kernels.gamma[0] * p.xi[0];
    assert!((branching_ratio - 0.5).abs() < 0.04, "ratio {branching_ratio}");
}

#[test]
fn full_rank_influence() {
    let phi = DMatrix::from_row_slice(3, 3, &[0.3, 0.0, 0.2, 0.1, 0.2, 0.0, 0.0, 0.25, 0.1]);
    let mut truth = model(3, vec![0.3, 0.2, 0.4], 1.5, 1.0);
    truth.full_rank = Some(InfluenceMatrix(phi.clone()));
    let record = simulate_thinning(&truth, Stop::Horizon(30_000.0), 9, DEFAULT_EVENT_CAP).unwrap();
    let cfg = FitConfig {
        mode: Mode::Frb,
        epochs: 150,
        ..FitConfig::default()
    };
    let report = fit(&record, &cfg, None).unwrap();
    let est = influence_matrix(&report.best_params);
    let worst = (&est.0 - &phi).abs().max();
    assert!(worst < 0.04, "max entry error {worst}\n{}", est.0);
    assert!((report.best_params.kernels.kappa[0] / 1.5 - 1.0).abs() < 0.1);
}

#[test]
fn training_likelihood_improves_in_every_mode() {
    let truth = hhg::simulate::sample_ground_truth(6, 2, 1, 4).unwrap();
    let record = simulate_thinning(&truth.params, Stop::Events(400), 4, DEFAULT_EVENT_CAP).unwrap();
    for mode in Mode::ALL {
        let cfg = FitConfig {
            mode,
            epochs: 60,
            ..FitConfig::default()
        };
        let report = fit(&record, &cfg, None).unwrap();
        assert!(report.aborted.is_none(), "{mode}: {:?}", report.aborted);
        let best = report.train_ll[report.best_epoch];
        assert!(best > report.train_ll[0], "{mode}: {best} vs {}", report.train_ll[0]);
        report.best_params.validate().unwrap();
        assert_eq!(report.best_params.full_rank.is_some(), mode == Mode::Frb);
        assert!(report.branching.max_row_error() < 1e-12);
    }
}
