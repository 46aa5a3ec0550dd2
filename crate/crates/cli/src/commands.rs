use std::fmt;
use std::path::{Path, PathBuf};

use hhg::diagnostics::{
    background_qq, categorical_accuracy, hellinger_divergence, kendall_distance_correlation, ks_exponential, phi_rmse,
    split_eval, DiagnosticsReport, EvalSplit,
};
use hhg::em::{e_step, fit, FitConfig, FitNotes, GammaPrior, Mode};
use hhg::io::{
    discretize_counts, embedding_csv, learning_curve_csv, load_counts_csv, load_embedding_csv, load_events_csv,
    load_model, qq_csv, read_to_string, save_model, write_atomic, write_events_csv, write_json, FitReportFile,
    LabeledRecord, RunConfig, SimulateConfig, SplitSpec,
};
use hhg::model::{half_life, influence_matrix, EventRecord, ModelParams, Window};
use hhg::simulate::{sample_ground_truth, simulate_thinning, Stop};
use hhg::spectral::init_params;
use serde::Serialize;

use crate::args::*;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or paths.
    Usage(String),
    Run(hhg::Error),
    /// The fit ran but stopped on a non-finite objective; the report was written.
    Aborted(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Run(hhg::Error::Config(_)) => 1,
            CliError::Run(e) if e.is_numerical() => 3,
            CliError::Run(_) => 2,
            CliError::Aborted(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Aborted(msg) => write!(f, "fit aborted at {msg}"),
        }
    }
}

impl From<hhg::Error> for CliError {
    fn from(e: hhg::Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn check_input(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file {} does not exist", path.display())))
    }
}

fn check_output(path: &Path) -> CliResult {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => return Ok(()),
    };
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "output directory {} does not exist",
            dir.display()
        )))
    }
}

fn check_inputs<'a>(paths: impl IntoIterator<Item = Option<&'a PathBuf>>) -> CliResult {
    paths.into_iter().flatten().try_for_each(|p| check_input(p))
}

fn run_config(path: Option<&PathBuf>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn load_fitted(input: &ModelInput) -> CliResult<(ModelParams, Vec<String>)> {
    match (&input.model, &input.report) {
        (Some(p), _) => Ok(load_model(p)?),
        (None, Some(p)) => {
            let text = read_to_string(p)?;
            let report: FitReportFile =
                serde_json::from_str(&text).map_err(|e| hhg::Error::Schema(format!("{}: {e}", p.display())))?;
            Ok(report.best_params()?)
        }
        (None, None) => Err(CliError::Usage("one of --model or --report is required".into())),
    }
}

fn check_labels(model: &[String], data: &LabeledRecord) -> CliResult {
    if model != data.labels.as_slice() {
        return Err(hhg::Error::Shape(format!(
            "model types {:?} differ from the record's types {:?}",
            model, data.labels
        ))
        .into());
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&PathBuf>) -> CliResult {
    match out {
        Some(p) => Ok(write_json(p, value)?),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| hhg::Error::Schema(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn type_labels(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|k| format!("t{k:0width$}")).collect()
}

pub fn simulate(args: &SimulateArgs) -> CliResult {
    check_inputs([args.config.as_ref()])?;
    check_output(&args.out)?;
    if let Some(p) = &args.truth {
        check_output(p)?;
    }
    let mut cfg = run_config(args.config.as_ref())?.simulate.unwrap_or_default();
    let SimulateConfig {
        n,
        m,
        kernels,
        seed,
        event_cap,
        ..
    } = &mut cfg;
    *n = args.n.unwrap_or(*n);
    *m = args.m.unwrap_or(*m);
    *kernels = args.kernels.unwrap_or(*kernels);
    *seed = args.seed.unwrap_or(*seed);
    *event_cap = args.event_cap.unwrap_or(*event_cap);
    if args.events.is_some() {
        cfg.events = args.events;
        cfg.horizon = None;
    } else if args.horizon.is_some() {
        cfg.horizon = args.horizon;
        cfg.events = None;
    }
    let stop = match (cfg.events, cfg.horizon) {
        (Some(count), None) => Stop::Events(count),
        (None, Some(t)) => Stop::Horizon(t),
        _ => {
            return Err(CliError::Usage(
                "give exactly one of an event count or a horizon".into(),
            ))
        }
    };
    if cfg.n == 0 || cfg.m == 0 || cfg.kernels == 0 {
        return Err(CliError::Usage("n, m and kernels must be positive".into()));
    }

    let truth = sample_ground_truth(cfg.n, cfg.m, cfg.kernels, cfg.seed)?;
    log::info!("ground truth spectral radius {:.4}", truth.stability_radius);
    let record = simulate_thinning(&truth.params, stop, cfg.seed, cfg.event_cap)?;
    let labels = type_labels(cfg.n);
    if let Some(p) = &args.truth {
        save_model(&truth.params, &labels, p)?;
    }
    write_events_csv(&args.out, &LabeledRecord { record, labels })?;
    Ok(())
}

fn fit_config(args: &FitArgs, base: Option<FitConfig>) -> FitConfig {
    let mut cfg = base.unwrap_or_default();
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    cfg.epochs = args.epochs.unwrap_or(cfg.epochs);
    cfg.kernels = args.kernels.unwrap_or(cfg.kernels);
    cfg.dim = args.dim.unwrap_or(cfg.dim);
    cfg.eps = args.eps.or(cfg.eps);
    cfg.eps1 = args.eps1.unwrap_or(cfg.eps1);
    cfg.eps2 = args.eps2.unwrap_or(cfg.eps2);
    cfg.inner_steps = args.inner_steps.unwrap_or(cfg.inner_steps);
    cfg.dm_alpha = args.dm_alpha.unwrap_or(cfg.dm_alpha);
    cfg.prior = GammaPrior {
        alpha: args.prior_alpha.unwrap_or(cfg.prior.alpha),
        beta: args.prior_beta.unwrap_or(cfg.prior.beta),
    };
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.branching_floor = args.branching_floor.unwrap_or(cfg.branching_floor);
    cfg
}

/// The record restricted to the training window of `split`, if any.
fn training_record(record: &EventRecord, split: Option<SplitSpec>) -> CliResult<EventRecord> {
    match split {
        Some(s) => Ok(record.truncated(s.resolve(record)?.split_time)?),
        None => Ok(record.clone()),
    }
}

pub fn fit_cmd(args: &FitArgs) -> CliResult {
    check_inputs([
        Some(&args.input.events),
        args.config.as_ref(),
        args.init.as_ref(),
        args.frozen_embedding.as_ref(),
    ])?;
    check_output(&args.out)?;
    if let Some(p) = &args.model_out {
        check_output(p)?;
    }
    let run = run_config(args.config.as_ref())?;
    let mut cfg = fit_config(args, run.fit);
    if args.frozen_embedding.is_some() {
        match args.mode {
            None | Some(Mode::Geo) => cfg.mode = Mode::Geo,
            Some(m) => return Err(CliError::Usage(format!("--frozen-embedding needs mode geo, not {m}"))),
        }
    }
    cfg.validate()?;

    let data = load_events_csv(&args.input.events, args.input.horizon)?;
    let record = training_record(&data.record, args.split.spec().or(run.split))?;
    let init = match (&args.init, &args.frozen_embedding) {
        (Some(p), _) => {
            let (params, labels) = load_model(p)?;
            check_labels(&labels, &data)?;
            Some(params)
        }
        (None, Some(p)) => {
            let embedding = load_embedding_csv(p, &data.labels)?;
            cfg.dim = embedding.dim();
            let mut notes = FitNotes::default();
            let mut params = init_params(&record, &cfg, &mut notes)?;
            params.embedding = embedding;
            Some(params)
        }
        (None, None) => None,
    };

    let report = fit(&record, &cfg, init)?;
    log::info!(
        "{} epochs in {:.2?}, best epoch {}",
        report.train_ll.len(),
        report.wall_time,
        report.best_epoch
    );
    write_json(&args.out, &FitReportFile::new(&report, &cfg, &data.labels)?)?;
    if let Some(p) = &args.model_out {
        save_model(&report.best_params, &data.labels, p)?;
    }
    match report.aborted {
        Some(msg) => Err(CliError::Aborted(msg)),
        None => Ok(()),
    }
}

/// Output of `evaluate`.
#[derive(Debug, Serialize)]
struct Evaluation {
    split_time: f64,
    train_events: usize,
    test_events: usize,
    train_ll_per_event: Option<f64>,
    test_ll_per_event: Option<f64>,
    /// Geometric-mean probability of the realized test types.
    cat_accuracy: Option<f64>,
    /// Same score for constant train-window frequencies.
    naive_accuracy: Option<f64>,
    gamma: Vec<f64>,
    kappa: Vec<f64>,
    half_life: Vec<f64>,
    spectral_radius: f64,
}

fn required_split(split: &SplitArgs, config: Option<&PathBuf>) -> CliResult<SplitSpec> {
    split
        .spec()
        .or(run_config(config)?.split)
        .ok_or_else(|| CliError::Usage("a split is required (--split-time, --test-last or --train-fraction)".into()))
}

/// Categorical accuracy on `test` with `train` frequencies as the reference;
/// `None` when either window is empty.
fn accuracy(
    record: &EventRecord,
    params: &ModelParams,
    train: Window,
    test: Window,
) -> CliResult<(Option<f64>, Option<f64>)> {
    if record.window_range(train).is_empty() || record.window_range(test).is_empty() {
        return Ok((None, None));
    }
    let (score, naive) = categorical_accuracy(record, params, test, train)?;
    Ok((Some(score), Some(naive)))
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult {
    check_inputs([
        Some(&args.input.events),
        args.model.model.as_ref(),
        args.model.report.as_ref(),
        args.config.as_ref(),
    ])?;
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    let spec = required_split(&args.split, args.config.as_ref())?;
    let data = load_events_csv(&args.input.events, args.input.horizon)?;
    let (params, labels) = load_fitted(&args.model)?;
    check_labels(&labels, &data)?;
    let record = &data.record;
    let split = spec.resolve(record)?;
    let (train, test) = split.windows(record)?;
    let scores = split_eval(record, &params, split)?;
    let (cat_accuracy, naive_accuracy) = accuracy(record, &params, train, test)?;
    let out = Evaluation {
        split_time: split.split_time,
        train_events: record.window_range(train).len(),
        test_events: record.window_range(test).len(),
        train_ll_per_event: scores.train,
        test_ll_per_event: scores.test,
        cat_accuracy,
        naive_accuracy,
        gamma: params.kernels.gamma.clone(),
        kappa: params.kernels.kappa.clone(),
        half_life: params.kernels.kappa.iter().map(|&k| half_life(k)).collect(),
        spectral_radius: influence_matrix(&params).spectral_radius(),
    };
    emit_json(&out, args.out.as_ref())
}

pub fn diagnose(args: &DiagnoseArgs) -> CliResult {
    check_inputs([
        Some(&args.input.events),
        args.model.model.as_ref(),
        args.model.report.as_ref(),
        args.truth.as_ref(),
        args.config.as_ref(),
    ])?;
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    let split = args.split.spec().or(run_config(args.config.as_ref())?.split);
    let data = load_events_csv(&args.input.events, args.input.horizon)?;
    let (params, labels) = load_fitted(&args.model)?;
    check_labels(&labels, &data)?;
    let truth = match &args.truth {
        Some(p) => {
            let (t, l) = load_model(p)?;
            check_labels(&l, &data)?;
            Some(t)
        }
        None => None,
    };

    let record = &data.record;
    let mut report = DiagnosticsReport::default();
    let scored = match split {
        Some(spec) => {
            let split: EvalSplit = spec.resolve(record)?;
            let (train, test) = split.windows(record)?;
            let scores = split_eval(record, &params, split)?;
            report.train_ll_per_event = scores.train;
            report.test_ll_per_event = scores.test;
            (report.cat_accuracy, report.naive_accuracy) = accuracy(record, &params, train, test)?;
            record.truncated(split.split_time)?
        }
        None => {
            let w = record.full_window();
            (report.cat_accuracy, report.naive_accuracy) = accuracy(record, &params, w, w)?;
            record.clone()
        }
    };

    if !scored.is_empty() {
        let branching = e_step(&scored, &params, 0.0)?;
        if let Some(t) = &truth {
            report.hellinger = Some(hellinger_divergence(&branching, &e_step(&scored, t, 0.0)?)?);
        }
        match background_qq(&scored, &params, &branching, args.seed)? {
            Some(points) => {
                let gaps: Vec<f64> = points.iter().map(|p| p.0).collect();
                report.qq_ks = Some(ks_exponential(&gaps, params.mu.iter().sum())?);
                report.qq_points = Some(points);
            }
            None => report
                .notes
                .push("fewer than two background events sampled; no QQ plot".into()),
        }
    }
    if let Some(t) = &truth {
        // A full-rank fit carries no learned geometry.
        if params.full_rank.is_none() {
            report.kendall_tau = Some(kendall_distance_correlation(&params.embedding, &t.embedding)?);
        }
        report.phi_rmse = Some(phi_rmse(&influence_matrix(&params), &influence_matrix(t))?);
    }
    emit_json(&report, args.out.as_ref())
}

pub fn discretize(args: &DiscretizeArgs) -> CliResult {
    check_input(&args.counts)?;
    check_output(&args.out)?;
    let series = load_counts_csv(&args.counts)?;
    let mut notes = FitNotes::default();
    let data = discretize_counts(&series, args.threshold, &mut notes)?;
    write_events_csv(&args.out, &data)?;
    Ok(())
}

pub fn export(args: &ExportArgs) -> CliResult {
    check_inputs([
        args.model.as_ref(),
        args.report.as_ref(),
        args.diagnostics.as_ref(),
        args.events.as_ref(),
    ])?;
    check_output(&args.out)?;
    let missing = |flag: &str| CliError::Usage(format!("this export needs {flag}"));
    let text = match args.what {
        ExportKind::Embedding => {
            let input = ModelInput {
                model: args.model.clone(),
                report: args.report.clone(),
            };
            if input.model.is_none() && input.report.is_none() {
                return Err(missing("--model or --report"));
            }
            let (params, labels) = load_fitted(&input)?;
            embedding_csv(&params.embedding, &labels)?
        }
        ExportKind::Curve => {
            let path = args.report.as_ref().ok_or_else(|| missing("--report"))?;
            let report: FitReportFile = serde_json::from_str(&read_to_string(path)?)
                .map_err(|e| hhg::Error::Schema(format!("{}: {e}", path.display())))?;
            report.check_version()?;
            learning_curve_csv(&report.train_ll)?
        }
        ExportKind::Qq => {
            let path = args.diagnostics.as_ref().ok_or_else(|| missing("--diagnostics"))?;
            let diag: DiagnosticsReport = serde_json::from_str(&read_to_string(path)?)
                .map_err(|e| hhg::Error::Schema(format!("{}: {e}", path.display())))?;
            let points = diag
                .qq_points
                .ok_or_else(|| hhg::Error::Schema(format!("{} holds no QQ points", path.display())))?;
            qq_csv(&points)?
        }
        ExportKind::Events => {
            let path = args.events.as_ref().ok_or_else(|| missing("--events"))?;
            let data = load_events_csv(path, None)?;
            write_events_csv(&args.out, &data)?;
            return Ok(());
        }
    };
    write_atomic(&args.out, text.as_bytes())?;
    Ok(())
}
