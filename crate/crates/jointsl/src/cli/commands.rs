//! Implementations of the five CLI commands. The binary in `src/bin`
//! parses arguments with clap and delegates here; everything in this module
//! is also callable as a library for tests.

use crate::cli::archive::{save_archive, FitArchive};
use crate::cli::formats::{
    fmt_float, read_dataset_csv, read_library_json, write_dataset_csv, write_truth_csv,
};
use crate::cli::report::{
    interval_label, quantile_summary, render_tables, replication_csv, summarize_rows,
    write_json_pretty, EvaluationBundle, PanelBundle, ReplicationRow,
};
use crate::cli::TOOL_VERSION;
use crate::data::{assign_folds, Dataset};
use crate::error::{Error, Result};
use crate::jointmodel::{
    fit_mcmc, BaselineConfig, FunctionalForm, JointModelSpec, McmcConfig, PriorSpec,
    TrajectoryBasis,
};
use crate::scoring::{DiffScheme, Metric};
use crate::simulate::{
    simulate_dataset_with, six_cells, tune_censoring, CensoringCalibration, GenTrajectory,
    Scenario, ScenarioSpec, SimulatedDataset, STD_HORIZON,
};
use crate::streams::{self, tags};
use crate::superlearn::{
    evaluate_on_test, fit_library_full, train_super_learner, LibraryMember, ModelLibrary,
    PredictSettings, ScorePanel, TestEvaluation,
};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;
use std::path::{Path, PathBuf};

/// Default target censoring rate of the standard design.
pub const DEFAULT_TARGET_CENSORING: f64 = 0.45;

// ---------------------------------------------------------------------------
// Shared option handling.
// ---------------------------------------------------------------------------

/// `--metric` choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MetricChoice {
    Ibs,
    Epce,
    Both,
}

/// `--censoring-weights` choices (how IBS handles censoring).
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CensoringChoice {
    Ipcw,
    Model,
    Both,
}

/// `--diff` choices for the EPCE density bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DiffChoice {
    Forward,
    Central,
}

impl DiffChoice {
    pub fn scheme(self) -> DiffScheme {
        match self {
            DiffChoice::Forward => DiffScheme::Forward,
            DiffChoice::Central => DiffScheme::Central,
        }
    }
}

/// Expands the metric/censoring-weight flags into the concrete metric list.
pub fn expand_metrics(metric: MetricChoice, weights: CensoringChoice) -> Vec<Metric> {
    let ibs: &[Metric] = match weights {
        CensoringChoice::Ipcw => &[Metric::IbsIpcw],
        CensoringChoice::Model => &[Metric::IbsModel],
        CensoringChoice::Both => &[Metric::IbsIpcw, Metric::IbsModel],
    };
    match metric {
        MetricChoice::Ibs => ibs.to_vec(),
        MetricChoice::Epce => vec![Metric::Epce],
        MetricChoice::Both => {
            let mut all = ibs.to_vec();
            all.push(Metric::Epce);
            all
        }
    }
}

/// Refuses to overwrite existing outputs unless `--force` was given.
pub fn refuse_existing(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(Error::invalid(format!(
                "output {} already exists; pass --force to overwrite",
                p.display()
            )));
        }
    }
    Ok(())
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what} {} does not exist or is not a file",
            path.display()
        )))
    }
}

/// Validates the landmark grid: finite, positive, strictly increasing.
pub fn validate_landmarks(landmarks: &[f64], dt: f64) -> Result<()> {
    if landmarks.is_empty() {
        return Err(Error::invalid("at least one landmark time is required"));
    }
    for &t in landmarks {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid(format!(
                "landmark times must be finite and non-negative, got {t}"
            )));
        }
    }
    for w in landmarks.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid(
                "landmark times must be strictly increasing",
            ));
        }
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!(
            "the prediction window dt must be positive, got {dt}"
        )));
    }
    Ok(())
}

/// Per-interval event support: < 1 event is a hard error (the scores are
/// undefined), < 10 events is an instability warning.
pub fn check_interval_events(
    data: &Dataset,
    landmarks: &[f64],
    dt: f64,
    label: &str,
) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    for &t in landmarks {
        let end = t + dt;
        let events = data.events_in(t, end);
        if events < 1 {
            return Err(Error::invalid(format!(
                "{label}: no events in the interval ({}, {}]; \
                 scores over this window are undefined",
                fmt_float(t),
                fmt_float(end)
            )));
        }
        if events < 10 {
            let w = format!(
                "{label}: only {events} events in the interval ({}, {}]; \
                 score estimates will be unstable",
                fmt_float(t),
                fmt_float(end)
            );
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    Ok(warnings)
}

fn follow_up_of(datasets: &[&Dataset]) -> f64 {
    datasets
        .iter()
        .flat_map(|d| d.subjects.iter())
        .map(|s| s.obs_time)
        .fold(0.0_f64, f64::max)
}

/// Per-replication derived seed. Slot 0 = training data, 1 = test data,
/// 2 = fold assignment, 3 = fit/prediction streams.
pub fn rep_seed(master: u64, replication: u64, slot: u64) -> u64 {
    streams::stream(master, &[tags::REPLICATE, replication, slot]).gen::<u64>()
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub scenario: Scenario,
    pub n: usize,
    pub test_n: usize,
    pub reps: usize,
    pub seed: u64,
    pub target_censoring: f64,
    pub out_dir: PathBuf,
    pub force: bool,
}

fn sim_file(out_dir: &Path, scenario: Scenario, r: usize, tail: &str) -> PathBuf {
    out_dir.join(format!("sim-{}-r{r:03}-{tail}", scenario.name()))
}

fn generator_manifest() -> serde_json::Value {
    let cells: Vec<serde_json::Value> = six_cells()
        .iter()
        .map(|(cell, gen)| {
            let trajectory = match &gen.trajectory {
                GenTrajectory::Linear => json!({"kind": "linear"}),
                GenTrajectory::Nonlinear(basis) => json!({
                    "kind": "spline",
                    "degree": basis.degree(),
                    "interior_knots": basis.interior_knots(),
                    "boundary": [basis.boundary().0, basis.boundary().1],
                }),
            };
            let d: Vec<Vec<f64>> = (0..gen.d.nrows())
                .map(|i| (0..gen.d.ncols()).map(|j| gen.d[(i, j)]).collect())
                .collect();
            json!({
                "name": cell.name(),
                "trajectory": trajectory,
                "functional_form": match cell.form() {
                    crate::simulate::GenForm::Value => "value",
                    crate::simulate::GenForm::Slope => "slope",
                    crate::simulate::GenForm::Area => "area",
                },
                "beta": gen.beta,
                "d": d,
                "sigma": gen.sigma,
                "alpha": gen.alpha,
                "log_baseline_hazard": gen.baseline.log_constant,
                "gamma": gen.gamma,
                "schedule": gen.schedule,
                "horizon": gen.horizon,
            })
        })
        .collect();
    json!(cells)
}

/// Simulates `reps` train/test dataset pairs plus truth sidecars and a
/// manifest. File contents are a pure function of the configuration.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let train_spec = ScenarioSpec::new(args.scenario, args.n, args.target_censoring)?;
    let test_spec = ScenarioSpec::new(args.scenario, args.test_n, args.target_censoring)?;
    if args.reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }

    let mut outputs: Vec<PathBuf> = vec![args.out_dir.join("manifest.json")];
    for r in 0..args.reps {
        for tail in [
            "train.csv",
            "train-truth.csv",
            "test.csv",
            "test-truth.csv",
        ] {
            outputs.push(sim_file(&args.out_dir, args.scenario, r, tail));
        }
    }
    refuse_existing(&outputs, args.force)?;
    std::fs::create_dir_all(&args.out_dir)?;

    // One censoring calibration per run: the tuned parameter depends only on
    // the scenario and target, so every replication shares it.
    let mut tune_rng = streams::stream(args.seed, &[tags::TUNE]);
    let calibration = tune_censoring(&train_spec, &mut tune_rng)?;
    log::info!(
        "calibrated {} censoring: parameter {:.6}, realized {:.3} (tuning) / {:.3} (fresh)",
        calibration.kind,
        calibration.parameter,
        calibration.realized_tuning,
        calibration.realized_fresh
    );

    let mut realized = Vec::with_capacity(args.reps);
    for r in 0..args.reps {
        let train = simulate_dataset_with(&train_spec, &calibration, rep_seed(args.seed, r as u64, 0))?;
        let test = simulate_dataset_with(&test_spec, &calibration, rep_seed(args.seed, r as u64, 1))?;
        write_dataset_csv(&train.dataset, &sim_file(&args.out_dir, args.scenario, r, "train.csv"))?;
        write_truth_csv(&train.truth, &sim_file(&args.out_dir, args.scenario, r, "train-truth.csv"))?;
        write_dataset_csv(&test.dataset, &sim_file(&args.out_dir, args.scenario, r, "test.csv"))?;
        write_truth_csv(&test.truth, &sim_file(&args.out_dir, args.scenario, r, "test-truth.csv"))?;
        realized.push(json!({
            "replication": r,
            "train_censoring": train.dataset.censoring_rate(),
            "test_censoring": test.dataset.censoring_rate(),
        }));
        log::info!(
            "replication {r}: train censoring {:.3}, test censoring {:.3}",
            train.dataset.censoring_rate(),
            test.dataset.censoring_rate()
        );
    }

    let manifest = json!({
        "tool_version": TOOL_VERSION,
        "command": "simulate",
        "seed": args.seed,
        "config": {
            "scenario": args.scenario.name(),
            "n": args.n,
            "test_n": args.test_n,
            "reps": args.reps,
            "target_censoring": args.target_censoring,
        },
        "calibration": calibration,
        "realized_censoring": realized,
        "generator_cells": generator_manifest(),
    });
    write_json_pretty(&manifest, &args.out_dir.join("manifest.json"))?;
    println!(
        "wrote {} dataset pairs under {}",
        args.reps,
        args.out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub data: PathBuf,
    pub model: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub store_random_effects: bool,
    pub force: bool,
}

/// Fits one joint model by MCMC and saves the posterior archive.
pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    require_file(&args.data, "dataset")?;
    require_file(&args.model, "model specification")?;
    refuse_existing(std::slice::from_ref(&args.out), args.force)?;

    let data = read_dataset_csv(&args.data)?;
    let follow_up = follow_up_of(&[&data]);
    let library = read_library_json(&args.model)?.resolve(follow_up)?;
    if library.len() != 1 {
        return Err(Error::invalid(format!(
            "fit expects a single model specification, found {} \
             (use the superlearn command for model libraries)",
            library.len()
        )));
    }
    let member = &library.members[0];
    let mcmc = McmcConfig {
        iterations: args.iterations,
        burn_in: args.burn_in,
        thin: args.thin,
        seed: args.seed,
        fix_sigma: None,
        fix_d: None,
        store_random_effects: args.store_random_effects,
    };
    log::info!(
        "fitting '{}' on {} subjects ({} iterations, burn-in {}, thin {})",
        member.spec.name,
        data.len(),
        mcmc.iterations,
        mcmc.burn_in,
        mcmc.thin
    );
    let fit = fit_mcmc(&member.spec, &member.priors, &data, &mcmc)?;
    for (block, rate) in &fit.acceptance {
        log::info!("acceptance[{block}] = {rate:.3}");
    }
    let archive = FitArchive {
        tool_version: TOOL_VERSION.to_string(),
        spec: member.spec.clone(),
        priors: member.priors.clone(),
        covariate_names: data.covariate_names.clone(),
        mcmc,
        fit,
    };
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    save_archive(&archive, &args.out)?;
    println!(
        "saved {} posterior draws for '{}' to {}",
        archive.fit.thetas.len(),
        member.spec.name,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// superlearn
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SuperlearnArgs {
    pub data: PathBuf,
    pub library: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub folds: usize,
    pub landmarks: Vec<f64>,
    pub dt: f64,
    pub metric: MetricChoice,
    pub censoring_weights: CensoringChoice,
    pub epsilon: f64,
    pub diff: DiffChoice,
    pub mc_draws: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub force: bool,
}

impl SuperlearnArgs {
    fn settings(&self, seed: u64) -> PredictSettings {
        PredictSettings {
            mc_draws: self.mc_draws,
            eps: self.epsilon,
            scheme: self.diff.scheme(),
            seed,
            mcmc: McmcConfig {
                iterations: self.iterations,
                burn_in: self.burn_in,
                thin: self.thin,
                seed: 0,
                fix_sigma: None,
                fix_d: None,
                store_random_effects: false,
            },
        }
    }

    fn config_json(&self) -> serde_json::Value {
        json!({
            "folds": self.folds,
            "landmarks": self.landmarks,
            "dt": self.dt,
            "metric": format!("{:?}", self.metric).to_lowercase(),
            "censoring_weights": format!("{:?}", self.censoring_weights).to_lowercase(),
            "epsilon": self.epsilon,
            "diff": format!("{:?}", self.diff).to_lowercase(),
            "mc_draws": self.mc_draws,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thin": self.thin,
        })
    }
}

fn panel_summary_lines(panel: &ScorePanel) -> Vec<String> {
    let mut lines = Vec::new();
    for ip in &panel.intervals {
        lines.push(format!(
            "({}, {}] {}: eSL {} | dSL {} ({}) | selected {}",
            fmt_float(ip.landmark),
            fmt_float(ip.landmark + panel.dt),
            ip.metric,
            fmt_float(ip.esl.score.0),
            fmt_float(ip.member_scores[ip.dsl_index].0),
            ip.dsl_name,
            ip.selected
        ));
    }
    lines
}

/// Cross-validates the library, optimizes interval weights, and writes the
/// score-panel bundle.
pub fn cmd_superlearn(args: &SuperlearnArgs) -> Result<()> {
    require_file(&args.data, "dataset")?;
    require_file(&args.library, "model library")?;
    refuse_existing(std::slice::from_ref(&args.out), args.force)?;
    validate_landmarks(&args.landmarks, args.dt)?;
    if !(args.epsilon.is_finite() && args.epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }

    let data = read_dataset_csv(&args.data)?;
    let follow_up = follow_up_of(&[&data]);
    let library = read_library_json(&args.library)?.resolve(follow_up)?;
    let metrics = expand_metrics(args.metric, args.censoring_weights);
    let warnings = check_interval_events(&data, &args.landmarks, args.dt, "training data")?;
    let folds = assign_folds(&data, args.folds, args.seed)?;
    let settings = args.settings(args.seed);

    let (panel, _cube) = train_super_learner(
        &library,
        &data,
        &folds,
        &args.landmarks,
        args.dt,
        &metrics,
        &settings,
    )?;
    let table = render_tables(&panel)?;
    let bundle = PanelBundle {
        tool_version: TOOL_VERSION.to_string(),
        seed: args.seed,
        config: args.config_json(),
        settings,
        warnings,
        panel,
        table,
    };
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_json_pretty(&bundle, &args.out)?;
    for line in panel_summary_lines(&bundle.panel) {
        println!("{line}");
    }
    println!("wrote score panel to {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub train: PathBuf,
    pub test: PathBuf,
    pub library: PathBuf,
    pub panel: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub force: bool,
}

/// Refits the library on the full training data and scores the frozen panel
/// weights on an external test set.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    require_file(&args.train, "training dataset")?;
    require_file(&args.test, "test dataset")?;
    require_file(&args.library, "model library")?;
    require_file(&args.panel, "score panel")?;
    refuse_existing(std::slice::from_ref(&args.out), args.force)?;

    let bundle: PanelBundle = crate::cli::report::read_json(&args.panel)?;
    let train = read_dataset_csv(&args.train)?;
    let test = read_dataset_csv(&args.test)?;
    let follow_up = follow_up_of(&[&train, &test]);
    let library = read_library_json(&args.library)?.resolve(follow_up)?;
    if library.names() != bundle.panel.model_names {
        return Err(Error::invalid(format!(
            "library models {:?} do not match the panel's models {:?}",
            library.names(),
            bundle.panel.model_names
        )));
    }
    let mut warnings =
        check_interval_events(&test, &bundle.panel.landmarks, bundle.panel.dt, "test data")?;
    let mut settings = bundle.settings.clone();
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }

    let fits = fit_library_full(&library, &train, &settings)?;
    let evaluations = evaluate_on_test(&fits, &test, &bundle.panel, &settings)?;
    for ev in &evaluations {
        if ev.esl_score.0.is_infinite() {
            let w = format!(
                "eSL test score is infinite at landmark {} ({})",
                fmt_float(ev.landmark),
                ev.metric
            );
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    let out_bundle = EvaluationBundle {
        tool_version: TOOL_VERSION.to_string(),
        seed: settings.seed,
        config: json!({
            "train": args.train.display().to_string(),
            "test": args.test.display().to_string(),
            "panel": args.panel.display().to_string(),
            "panel_seed": bundle.seed,
        }),
        warnings,
        evaluations,
    };
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_json_pretty(&out_bundle, &args.out)?;
    for ev in &out_bundle.evaluations {
        println!(
            "({}, {}] {}: eSL {} | dSL {} | oracle {} ({})",
            fmt_float(ev.landmark),
            fmt_float(ev.landmark + bundle.panel.dt),
            ev.metric,
            fmt_float(ev.esl_score.0),
            fmt_float(ev.dsl_score.0),
            fmt_float(ev.oracle_score.0),
            bundle.panel.model_names[ev.oracle_index]
        );
    }
    println!("wrote test evaluation to {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// replicate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ReplicateArgs {
    pub scenario: Scenario,
    pub reps: usize,
    pub n: usize,
    pub test_n: usize,
    pub folds: usize,
    pub landmarks: Vec<f64>,
    pub dt: f64,
    pub metric: MetricChoice,
    pub censoring_weights: CensoringChoice,
    pub epsilon: f64,
    pub diff: DiffChoice,
    pub seed: u64,
    pub target_censoring: f64,
    pub library: Option<PathBuf>,
    pub mc_draws: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub out_dir: PathBuf,
    pub force: bool,
}

/// The built-in six-model library: {linear, spline} trajectories crossed
/// with {value, slope, area} association forms, named to mirror the
/// generator cells.
pub fn builtin_library() -> Result<ModelLibrary> {
    let spline = TrajectoryBasis::Spline {
        degree: 2,
        interior_knots: vec![STD_HORIZON / 3.0, 2.0 * STD_HORIZON / 3.0],
        boundary: (0.0, STD_HORIZON),
    };
    let trajectories: [(&str, TrajectoryBasis); 2] = [
        ("linear", TrajectoryBasis::Linear),
        ("nonlinear", spline),
    ];
    let forms: [(&str, FunctionalForm); 3] = [
        ("value", FunctionalForm::Value),
        ("slope", FunctionalForm::Slope),
        ("area", FunctionalForm::Area { v: None }),
    ];
    let mut members = Vec::with_capacity(6);
    for (traj_name, traj) in &trajectories {
        for (form_name, form) in &forms {
            members.push(LibraryMember {
                spec: JointModelSpec {
                    name: format!("{traj_name}-{form_name}"),
                    trajectory: traj.clone(),
                    long_covariates: vec![],
                    forms: vec![form.clone()],
                    hazard_covariates: vec![],
                    baseline: BaselineConfig::default(),
                },
                priors: PriorSpec::default(),
            });
        }
    }
    ModelLibrary::new(members)
}

/// Everything produced by one successful replication.
struct RepOutput {
    replication: usize,
    panel: ScorePanel,
    evaluations: Vec<TestEvaluation>,
    train_censoring: f64,
    test_censoring: f64,
}

fn rep_rows(out: &RepOutput, dt: f64) -> Vec<ReplicationRow> {
    let mut rows = Vec::new();
    let mut push = |arm: &str, metric: Metric, t: f64, value: f64| {
        rows.push(ReplicationRow {
            replication: out.replication,
            arm: arm.to_string(),
            metric: metric.label().to_string(),
            interval: interval_label(t, dt),
            value,
        });
    };
    for ip in &out.panel.intervals {
        push("dSL-train", ip.metric, ip.landmark, ip.member_scores[ip.dsl_index].0);
        push("eSL-train", ip.metric, ip.landmark, ip.esl.score.0);
    }
    for ev in &out.evaluations {
        push("dSL-test", ev.metric, ev.landmark, ev.dsl_score.0);
        push("eSL-test", ev.metric, ev.landmark, ev.esl_score.0);
        push("oracle-test", ev.metric, ev.landmark, ev.oracle_score.0);
    }
    rows
}

fn run_one_replication(
    r: usize,
    args: &ReplicateArgs,
    train_spec: &ScenarioSpec,
    test_spec: &ScenarioSpec,
    calibration: &CensoringCalibration,
    library: &ModelLibrary,
    metrics: &[Metric],
) -> Result<RepOutput> {
    let train: SimulatedDataset =
        simulate_dataset_with(train_spec, calibration, rep_seed(args.seed, r as u64, 0))?;
    let test: SimulatedDataset =
        simulate_dataset_with(test_spec, calibration, rep_seed(args.seed, r as u64, 1))?;
    check_interval_events(&train.dataset, &args.landmarks, args.dt, "training data")?;
    check_interval_events(&test.dataset, &args.landmarks, args.dt, "test data")?;

    let folds = assign_folds(&train.dataset, args.folds, rep_seed(args.seed, r as u64, 2))?;
    let settings = PredictSettings {
        mc_draws: args.mc_draws,
        eps: args.epsilon,
        scheme: args.diff.scheme(),
        seed: rep_seed(args.seed, r as u64, 3),
        mcmc: McmcConfig {
            iterations: args.iterations,
            burn_in: args.burn_in,
            thin: args.thin,
            seed: 0,
            fix_sigma: None,
            fix_d: None,
            store_random_effects: false,
        },
    };
    let (panel, _cube) = train_super_learner(
        library,
        &train.dataset,
        &folds,
        &args.landmarks,
        args.dt,
        metrics,
        &settings,
    )?;
    let fits = fit_library_full(library, &train.dataset, &settings)?;
    let evaluations = evaluate_on_test(&fits, &test.dataset, &panel, &settings)?;
    Ok(RepOutput {
        replication: r,
        panel,
        evaluations,
        train_censoring: train.dataset.censoring_rate(),
        test_censoring: test.dataset.censoring_rate(),
    })
}

/// Per-(metric, interval) oracle statistics across replications. Emitted as
/// descriptive rates, never asserted: the oracle inequality is asymptotic.
fn oracle_statistics(outputs: &[RepOutput], dt: f64) -> Vec<serde_json::Value> {
    let mut keys: Vec<(Metric, f64)> = Vec::new();
    for out in outputs {
        for ev in &out.evaluations {
            if !keys.contains(&(ev.metric, ev.landmark)) {
                keys.push((ev.metric, ev.landmark));
            }
        }
    }
    keys.iter()
        .map(|&(metric, t)| {
            let evs: Vec<&TestEvaluation> = outputs
                .iter()
                .flat_map(|o| &o.evaluations)
                .filter(|e| e.metric == metric && e.landmark == t)
                .collect();
            let n = evs.len();
            let esl_beats_oracle =
                evs.iter().filter(|e| e.esl_score.0 < e.oracle_score.0).count();
            let dsl_is_oracle = evs
                .iter()
                .filter(|e| e.dsl_score.0 <= e.oracle_score.0)
                .count();
            let gaps: Vec<f64> = evs
                .iter()
                .filter(|e| e.esl_score.0.is_finite() && e.oracle_score.0.is_finite())
                .map(|e| e.esl_score.0 - e.oracle_score.0)
                .collect();
            json!({
                "metric": metric.label(),
                "interval": interval_label(t, dt),
                "replications": n,
                "esl_beats_oracle_rate": esl_beats_oracle as f64 / n.max(1) as f64,
                "dsl_matches_oracle_rate": dsl_is_oracle as f64 / n.max(1) as f64,
                "esl_minus_oracle": quantile_summary(&gaps),
            })
        })
        .collect()
}

/// Per-(model, metric, interval) ensemble-weight summaries across reps.
fn weight_statistics(outputs: &[RepOutput], dt: f64) -> Vec<serde_json::Value> {
    let Some(first) = outputs.first() else {
        return vec![];
    };
    let names = first.panel.model_names.clone();
    let mut stats = Vec::new();
    for ip in &first.panel.intervals {
        for (l, name) in names.iter().enumerate() {
            let weights: Vec<f64> = outputs
                .iter()
                .filter_map(|o| {
                    o.panel
                        .interval(ip.landmark, ip.metric)
                        .map(|p| p.esl.weights[l])
                })
                .collect();
            let dsl_picks = outputs
                .iter()
                .filter_map(|o| o.panel.interval(ip.landmark, ip.metric))
                .filter(|p| p.dsl_index == l)
                .count();
            stats.push(json!({
                "metric": ip.metric.label(),
                "interval": interval_label(ip.landmark, dt),
                "model": name,
                "weight": quantile_summary(&weights),
                "dsl_selection_rate": dsl_picks as f64 / outputs.len() as f64,
            }));
        }
    }
    stats
}

/// Runs the full simulate → cross-validate → super-learn → test pipeline
/// `reps` times and writes the long-format results plus summaries. Failed
/// replications are recorded and skipped; the error return marks partial or
/// total failure for the exit code.
pub fn cmd_replicate(args: &ReplicateArgs) -> Result<()> {
    if args.reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    validate_landmarks(&args.landmarks, args.dt)?;
    if !(args.epsilon.is_finite() && args.epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let outputs_paths = [
        args.out_dir.join("replications.csv"),
        args.out_dir.join("panels.json"),
        args.out_dir.join("summary.json"),
    ];
    refuse_existing(&outputs_paths, args.force)?;

    let train_spec = ScenarioSpec::new(args.scenario, args.n, args.target_censoring)?;
    let test_spec = ScenarioSpec::new(args.scenario, args.test_n, args.target_censoring)?;
    let library = match &args.library {
        Some(path) => {
            require_file(path, "model library")?;
            read_library_json(path)?.resolve(STD_HORIZON)?
        }
        None => builtin_library()?,
    };
    if library.len() < 2 {
        return Err(Error::invalid(
            "replication needs a library of at least two models",
        ));
    }

    let mut metrics = expand_metrics(args.metric, args.censoring_weights);
    // Under informative censoring the IPCW weights are misspecified, so the
    // design reports the model-based Brier variant alongside them.
    if args.scenario == Scenario::III
        && metrics.contains(&Metric::IbsIpcw) != metrics.contains(&Metric::IbsModel)
    {
        for m in [Metric::IbsIpcw, Metric::IbsModel] {
            if !metrics.contains(&m) {
                let pos = metrics
                    .iter()
                    .position(|x| matches!(x, Metric::IbsIpcw | Metric::IbsModel))
                    .map(|p| p + 1)
                    .unwrap_or(metrics.len());
                metrics.insert(pos, m);
                log::info!("scenario III: adding {m} so both Brier variants are reported");
            }
        }
    }

    std::fs::create_dir_all(&args.out_dir)?;
    let mut tune_rng = streams::stream(args.seed, &[tags::TUNE]);
    let calibration = tune_censoring(&train_spec, &mut tune_rng)?;
    log::info!(
        "calibrated {} censoring at parameter {:.6} (realized {:.3})",
        calibration.kind,
        calibration.parameter,
        calibration.realized_fresh
    );

    let results: Vec<(usize, Result<RepOutput>)> = (0..args.reps)
        .into_par_iter()
        .map(|r| {
            let res = run_one_replication(
                r,
                args,
                &train_spec,
                &test_spec,
                &calibration,
                &library,
                &metrics,
            );
            match &res {
                Ok(_) => log::info!("replication {r}: done"),
                Err(e) => log::error!("replication {r}: failed: {e}"),
            }
            (r, res)
        })
        .collect();

    let mut outputs: Vec<RepOutput> = Vec::new();
    let mut failures: Vec<serde_json::Value> = Vec::new();
    for (r, res) in results {
        match res {
            Ok(out) => outputs.push(out),
            Err(e) => failures.push(json!({"replication": r, "error": e.to_string()})),
        }
    }
    outputs.sort_by_key(|o| o.replication);

    let mut rows: Vec<ReplicationRow> = Vec::new();
    for out in &outputs {
        rows.extend(rep_rows(out, args.dt));
    }
    std::fs::write(
        args.out_dir.join("replications.csv"),
        replication_csv(&rows)?,
    )?;

    let panels: Vec<serde_json::Value> = outputs
        .iter()
        .map(|o| {
            json!({
                "replication": o.replication,
                "train_censoring": o.train_censoring,
                "test_censoring": o.test_censoring,
                "panel": o.panel,
                "evaluations": o.evaluations,
            })
        })
        .collect();
    write_json_pretty(&panels, &args.out_dir.join("panels.json"))?;

    let censoring: Vec<f64> = outputs.iter().map(|o| o.train_censoring).collect();
    let summary = json!({
        "tool_version": TOOL_VERSION,
        "command": "replicate",
        "seed": args.seed,
        "config": {
            "scenario": args.scenario.name(),
            "reps": args.reps,
            "n": args.n,
            "test_n": args.test_n,
            "folds": args.folds,
            "landmarks": args.landmarks,
            "dt": args.dt,
            "metrics": metrics.iter().map(|m| m.label()).collect::<Vec<_>>(),
            "epsilon": args.epsilon,
            "diff": format!("{:?}", args.diff).to_lowercase(),
            "mc_draws": args.mc_draws,
            "iterations": args.iterations,
            "burn_in": args.burn_in,
            "thin": args.thin,
            "target_censoring": args.target_censoring,
            "library": library.names(),
        },
        "calibration": calibration,
        "completed": outputs.len(),
        "failed": failures.len(),
        "train_censoring": quantile_summary(&censoring),
        "scores": summarize_rows(&rows),
        "oracle": oracle_statistics(&outputs, args.dt),
        "weights": weight_statistics(&outputs, args.dt),
        "failures": failures,
    });
    write_json_pretty(&summary, &args.out_dir.join("summary.json"))?;

    println!(
        "completed {} of {} replications ({} rows) under {}",
        outputs.len(),
        args.reps,
        rows.len(),
        args.out_dir.display()
    );
    let failed = failures.len();
    if failed == args.reps {
        return Err(Error::numerical(format!(
            "all {} replications failed; see {}",
            args.reps,
            args.out_dir.join("summary.json").display()
        )));
    }
    if failed > 0 {
        return Err(Error::PartialReplication {
            failed,
            total: args.reps,
        });
    }
    Ok(())
}
