//! Command-line front end: estimation, diagnostics, simulation studies,
//! factor analysis and forecast evaluation.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ergodicity_core::diagnostics::{
    bootstrap_lambda, diagnose, BootstrapConfig, DiagnosticsConfig, DiagnosticsReport,
};
use ergodicity_core::evaluation::{evaluate_panel, write_table_csv};
use ergodicity_core::factors::{
    drop_sparse_columns, extract_factors, impute_missing, marginal_r2, standardize_panel,
    ImputeConfig,
};
use ergodicity_core::forecast::ForecastConfig;
use ergodicity_core::ingest::{group_label, parse_fredqd_csv, GroupMap, Ingested};
use ergodicity_core::likelihood::{estimate_lambda, EstimateConfig, LikelihoodMode, ProfileResult};
use ergodicity_core::policy::{transform_panel, Policy, PolicyConfig, SeriesTransform};
use ergodicity_core::series::TimeSeries;
use ergodicity_core::simulate::{
    run_recovery_study, simulate_abm, simulate_gbm, Process, ProcessParams, StudyConfig,
};
use ergodicity_core::transform::{ergodic_increments, TransformSpec};

use output::{num, opt, Run};

#[derive(Parser)]
#[command(
    name = "ergodicity",
    version,
    about = "Estimate ergodicity transformations of time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile likelihood, exponent estimate and diagnostics for one series.
    Estimate(EstimateCmd),
    /// Diagnostics of the transformed increments of one series.
    Diagnose(DiagnoseCmd),
    /// Write one simulated GBM or ABM path.
    Simulate(SimulateCmd),
    /// Monte Carlo recovery study of the estimator.
    SimulateStudy(StudyCmd),
    /// Principal-components factors of a FRED-QD panel and their marginal R^2.
    Factors(FactorsCmd),
    /// Out-of-sample comparison of the three transformation policies.
    ForecastEval(ForecastCmd),
}

#[derive(Args)]
struct SeriesArgs {
    /// CSV with a header row; one column holds the series.
    #[arg(long)]
    input: PathBuf,
    /// Column name; defaults to the last column.
    #[arg(long)]
    column: Option<String>,
}

#[derive(Args, Clone)]
struct LambdaArgs {
    #[arg(long, default_value = "iid")]
    mode: LikelihoodMode,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda_min: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda_max: f64,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

impl LambdaArgs {
    fn config(&self) -> EstimateConfig {
        EstimateConfig {
            grid_points: self.grid,
            ..EstimateConfig::default()
                .with_range(self.lambda_min, self.lambda_max)
                .with_alpha(self.alpha)
        }
    }

    fn to_json(&self) -> serde_json::Value {
        json!({
            "mode": self.mode.to_string(),
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "grid": self.grid,
            "alpha": self.alpha,
        })
    }
}

#[derive(Args)]
struct EstimateCmd {
    #[command(flatten)]
    series: SeriesArgs,
    #[arg(long, default_value_t = 1)]
    n_diffs: usize,
    #[command(flatten)]
    lambda: LambdaArgs,
    /// Re-estimate on overlapping sub-samples derived from this many blocks.
    #[arg(long)]
    bootstrap_blocks: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseCmd {
    #[command(flatten)]
    series: SeriesArgs,
    #[arg(long, default_value_t = 1)]
    n_diffs: usize,
    /// Exponent to diagnose; estimated when omitted.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[command(flatten)]
    estimate: LambdaArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateCmd {
    #[arg(long)]
    process: Process,
    #[arg(long, default_value_t = 756)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0 / 252.0)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct StudyCmd {
    #[arg(long)]
    process: Process,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Comma-separated sample sizes.
    #[arg(long = "Ts", value_delimiter = ',', required = true)]
    ts: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0 / 252.0)]
    dt: f64,
    #[arg(long, default_value = "iid")]
    mode: LikelihoodMode,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    lambda_min: f64,
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    lambda_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PanelArgs {
    /// File in the FRED-QD layout.
    #[arg(long)]
    input: PathBuf,
    /// Mnemonic-to-group CSV replacing the bundled mapping.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[command(flatten)]
    lambda: LambdaArgs,
}

impl PanelArgs {
    fn load(&self) -> Result<Ingested> {
        let groups = match &self.groups {
            Some(p) => GroupMap::from_path(p)
                .with_context(|| format!("reading group map {}", p.display()))?,
            None => GroupMap::bundled(),
        };
        let ingested = parse_fredqd_csv(&self.input, &groups)
            .with_context(|| format!("reading panel {}", self.input.display()))?;
        for id in &ingested.unknown_mnemonics {
            eprintln!("warning: series {id}: no group mapping, reported as Other");
        }
        Ok(ingested)
    }

    fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            mode: self.lambda.mode,
            estimate: self.lambda.config(),
        }
    }
}

#[derive(Args)]
struct FactorsCmd {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, default_value = "benchmark")]
    policy: Policy,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Length of the per-factor ranking.
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long, default_value_t = 1e-6)]
    impute_tol: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ForecastCmd {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, default_value_t = 48)]
    holdout: usize,
    #[arg(long, default_value_t = 4)]
    ar_order: usize,
    #[arg(long, default_value_t = 40)]
    min_train: usize,
    /// Level of the false-discovery-rate controlled test.
    #[arg(long, default_value_t = 0.05)]
    test_alpha: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(c) => run_estimate(c),
        Command::Diagnose(c) => run_diagnose(c),
        Command::Simulate(c) => run_simulate(c),
        Command::SimulateStudy(c) => run_study(c),
        Command::Factors(c) => run_factors(c),
        Command::ForecastEval(c) => run_forecast(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Reads one numeric column; every row must hold a finite value.
fn read_series(args: &SeriesArgs) -> Result<TimeSeries> {
    let path = &args.input;
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = match &args.column {
        Some(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("column '{name}' not found in {}", path.display()))?,
        None if headers.is_empty() => bail!("{} has no columns", path.display()),
        None => headers.len() - 1,
    };
    let id = headers[col].trim().to_string();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(col).unwrap_or("").trim();
        let v: f64 = cell
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .with_context(|| {
                format!(
                    "series {id}: row {}: '{cell}' is not a finite number",
                    i + 2
                )
            })?;
        values.push(v);
    }
    Ok(TimeSeries::new(values).with_id(id))
}

fn write_profile(run: &mut Run, r: &ProfileResult, id: &str) -> Result<()> {
    run.write_csv(
        "profile.csv",
        &["lambda", "llf"],
        r.lambdas
            .iter()
            .zip(&r.llf)
            .map(|(l, v)| vec![num(*l), num(*v)]),
    )?;
    run.write_csv(
        "estimate.csv",
        &[
            "series",
            "mode",
            "n_diffs",
            "lambda_hat",
            "llf_hat",
            "ci_low",
            "ci_high",
            "alpha",
            "curvature",
            "boundary",
            "weak_identification",
        ],
        [vec![
            id.to_string(),
            r.mode.to_string(),
            r.n_diffs.to_string(),
            num(r.lambda_hat),
            num(r.llf_hat),
            num(r.ci_low),
            num(r.ci_high),
            num(r.alpha),
            opt(r.curvature),
            r.boundary.to_string(),
            r.weak_identification.to_string(),
        ]],
    )
}

fn write_diagnostics(run: &mut Run, d: &DiagnosticsReport) -> Result<()> {
    let v = d.verdict;
    let mut rows = Vec::new();
    if let Some(s) = d.shapiro {
        rows.push(vec![
            "shapiro_wilk".into(),
            num(s.statistic),
            num(s.p_value),
            String::new(),
            opt_bool(v.normality),
        ]);
    }
    rows.push(vec![
        "kpss".into(),
        num(d.kpss.statistic),
        num(d.kpss.p_value),
        format!("{:?}", d.kpss.band).to_lowercase(),
        v.kpss.to_string(),
    ]);
    rows.push(vec![
        "adf".into(),
        num(d.adf.statistic),
        num(d.adf.p_value),
        String::new(),
        v.adf.to_string(),
    ]);
    rows.push(vec![
        format!("ljung_box_{}", d.ljung_box.lag),
        num(d.ljung_box.statistic),
        num(d.ljung_box.p_value),
        String::new(),
        v.ljung_box.to_string(),
    ]);
    run.write_csv(
        "diagnostics.csv",
        &["test", "statistic", "p_value", "p_value_band", "pass"],
        rows,
    )?;
    let c = &d.correlogram;
    run.write_csv(
        "correlogram.csv",
        &["lag", "acf", "pacf", "band"],
        (0..c.acf.len()).map(|j| vec![j.to_string(), num(c.acf[j]), num(c.pacf[j]), num(c.band)]),
    )?;
    run.write_csv(
        "qq.csv",
        &["theoretical", "sample"],
        d.qq.iter().map(|p| vec![num(p.theoretical), num(p.sample)]),
    )?;
    if !d.bootstrap_lambdas.is_empty() {
        run.write_csv(
            "bootstrap.csv",
            &["window", "lambda_hat"],
            d.bootstrap_lambdas
                .iter()
                .enumerate()
                .map(|(i, l)| vec![i.to_string(), num(*l)]),
        )?;
    }
    Ok(())
}

fn opt_bool(b: Option<bool>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

fn increments_at(x: &TimeSeries, lambda: f64, n_diffs: usize) -> Result<Vec<f64>> {
    let spec = TransformSpec::for_levels(&x.values, lambda, n_diffs)?;
    Ok(ergodic_increments(x, &spec)?.values)
}

fn run_estimate(c: EstimateCmd) -> Result<()> {
    let x = read_series(&c.series)?;
    let id = x.label().to_string();
    let cfg = c.lambda.config();
    let n_diffs = if c.lambda.mode == LikelihoodMode::BoxcoxLevels {
        0
    } else {
        c.n_diffs
    };
    let mut run = Run::new(&c.out, "estimate")?;
    let profile = run
        .timed("estimate", || {
            estimate_lambda(&x, n_diffs, c.lambda.mode, &cfg)
        })
        .with_context(|| format!("series {id}: estimation"))?;
    let z = increments_at(&x, profile.lambda_hat, n_diffs)
        .with_context(|| format!("series {id}: transform"))?;
    let mut report = run
        .timed("diagnostics", || {
            diagnose(
                &z,
                &DiagnosticsConfig {
                    alpha: c.lambda.alpha,
                    ..Default::default()
                },
            )
        })
        .with_context(|| format!("series {id}: diagnostics"))?;
    if let Some(blocks) = c.bootstrap_blocks {
        let bcfg = BootstrapConfig {
            blocks,
            seed: c.seed,
            ..Default::default()
        };
        report.bootstrap_lambdas = run
            .timed("bootstrap", || {
                bootstrap_lambda(&x, n_diffs, c.lambda.mode, &bcfg, &cfg)
            })
            .with_context(|| format!("series {id}: bootstrap"))?;
    }
    write_profile(&mut run, &profile, &id)?;
    write_diagnostics(&mut run, &report)?;
    run.write_json(
        "report.json",
        &json!({ "series": id, "profile": profile, "diagnostics": report }),
    )?;
    let config = json!({
        "input": c.series.input,
        "column": c.series.column,
        "n_diffs": n_diffs,
        "estimate": c.lambda.to_json(),
        "bootstrap_blocks": c.bootstrap_blocks,
    });
    run.finish(config, Some(c.seed))
}

fn run_diagnose(c: DiagnoseCmd) -> Result<()> {
    let x = read_series(&c.series)?;
    let id = x.label().to_string();
    let mut run = Run::new(&c.out, "diagnose")?;
    let lambda = match c.lambda {
        Some(l) => l,
        None => {
            run.timed("estimate", || {
                estimate_lambda(&x, c.n_diffs, c.estimate.mode, &c.estimate.config())
            })
            .with_context(|| format!("series {id}: estimation"))?
            .lambda_hat
        }
    };
    let z =
        increments_at(&x, lambda, c.n_diffs).with_context(|| format!("series {id}: transform"))?;
    let report = run
        .timed("diagnostics", || {
            diagnose(
                &z,
                &DiagnosticsConfig {
                    alpha: c.estimate.alpha,
                    ..Default::default()
                },
            )
        })
        .with_context(|| format!("series {id}: diagnostics"))?;
    write_diagnostics(&mut run, &report)?;
    run.write_json(
        "diagnostics.json",
        &json!({ "series": id, "lambda": lambda, "diagnostics": report }),
    )?;
    let config = json!({
        "input": c.series.input,
        "column": c.series.column,
        "n_diffs": c.n_diffs,
        "lambda": lambda,
        "estimate": c.estimate.to_json(),
    });
    run.finish(config, None)
}

fn run_simulate(c: SimulateCmd) -> Result<()> {
    let params = ProcessParams {
        x0: c.x0,
        mu: c.mu,
        sigma: c.sigma,
        dt: c.dt,
        steps: c.steps,
    };
    let series = match c.process {
        Process::Gbm => simulate_gbm(&params, c.seed)?,
        Process::Abm => {
            let path = simulate_abm(&params, c.seed)?;
            if path.non_positive {
                eprintln!("warning: simulated ABM path reaches non-positive values");
            }
            path.series
        }
    };
    write_path(&c.output, &series)
}

fn write_path(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["t", "value"])?;
    for (i, v) in series.values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

fn run_study(c: StudyCmd) -> Result<()> {
    let mut cfg = StudyConfig::new(c.process, c.ts.clone(), c.reps, c.seed).with_x0(c.x0);
    cfg.mu = c.mu;
    cfg.sigma = c.sigma;
    cfg.dt = c.dt;
    cfg.mode = c.mode;
    cfg.estimate = cfg.estimate.with_range(c.lambda_min, c.lambda_max);
    let mut run = Run::new(&c.out, "simulate-study")?;
    let result = run
        .timed("study", || run_recovery_study(&cfg))
        .with_context(|| format!("{} recovery study", c.process))?;
    run.write_records("study.csv", &result.rows)?;
    run.write_csv(
        "lambdas.csv",
        &["T", "rep", "lambda_hat"],
        result
            .rows
            .iter()
            .zip(&result.lambdas)
            .flat_map(|(row, ls)| {
                ls.iter()
                    .enumerate()
                    .map(move |(i, l)| vec![row.t.to_string(), i.to_string(), num(*l)])
            }),
    )?;
    run.finish(serde_json::to_value(&cfg)?, Some(c.seed))
}

fn transform_label(t: &SeriesTransform) -> (&'static str, usize) {
    match t {
        SeriesTransform::Levels { n_diffs } => ("levels", *n_diffs),
        SeriesTransform::Power { spec } => ("power", spec.n_diffs),
        SeriesTransform::PctChangeDiff => ("pct_change_diff", 1),
    }
}

fn run_factors(c: FactorsCmd) -> Result<()> {
    let mut run = Run::new(&c.out, "factors")?;
    let raw = run.timed("ingest", || c.panel.load())?.panel;
    let pcfg = c.panel.policy_config();
    let transformed = run.timed("transform", || transform_panel(&raw, c.policy, &pcfg));
    for e in &transformed.excluded {
        eprintln!("warning: series {}: transform stage: {:?}", e.id, e.reason);
    }
    run.write_csv(
        "lambdas.csv",
        &[
            "series",
            "group",
            "tcode",
            "transform",
            "n_diffs",
            "lambda",
            "lambda_hat",
            "fallback",
        ],
        transformed.choices.iter().map(|s| {
            let (kind, n) = transform_label(&s.choice.transform);
            vec![
                s.id.clone(),
                group_label(s.group),
                s.tcode.map(|t| t.code().to_string()).unwrap_or_default(),
                kind.to_string(),
                n.to_string(),
                opt(s.choice.transform.lambda()),
                opt(s.choice.lambda_hat),
                s.choice.fallback.to_string(),
            ]
        }),
    )?;

    let (dense, sparse) = drop_sparse_columns(&transformed.panel, 0.5);
    let std = standardize_panel(&dense);
    let mut excluded = transformed.excluded.clone();
    excluded.extend(sparse);
    excluded.extend(std.excluded.clone());
    let imputed = run
        .timed("impute", || {
            impute_missing(
                &std.panel,
                &ImputeConfig {
                    k: c.k,
                    tol: c.impute_tol,
                    max_iter: 500,
                },
            )
        })
        .context("imputation stage")?;
    if !imputed.converged {
        eprintln!(
            "warning: imputation stopped after {} iterations with change {:e}",
            imputed.iterations, imputed.max_change
        );
    }
    let panel = imputed.panel;
    let fr = run
        .timed("extract", || extract_factors(&panel, c.k))
        .context("factor extraction stage")?;
    if fr.rank_deficient {
        eprintln!(
            "warning: panel rank below {}; extracted {} factors",
            c.k,
            fr.k()
        );
    }
    let m = run
        .timed("marginal_r2", || marginal_r2(&fr.factors, &panel, c.top))
        .context("marginal R^2 stage")?;
    let k = fr.k();

    let mut header: Vec<String> = vec!["series".into(), "group".into()];
    header.extend((1..=k).map(|j| format!("r2_{j}")));
    header.extend((1..=k).map(|j| format!("mr2_{j}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    run.write_csv(
        "mr2.csv",
        &header_refs,
        (0..panel.n_series()).map(|i| {
            let mut row = vec![m.ids[i].clone(), group_label(m.groups[i])];
            row.extend((0..k).map(|j| num(m.r2[(i, j)])));
            row.extend((0..k).map(|j| num(m.mr2[(i, j)])));
            row
        }),
    )?;
    run.write_csv(
        "top.csv",
        &["factor", "rank", "series", "mr2", "group"],
        m.top.iter().enumerate().flat_map(|(j, list)| {
            list.iter().enumerate().map(move |(r, s)| {
                vec![
                    (j + 1).to_string(),
                    (r + 1).to_string(),
                    s.id.clone(),
                    num(s.mr2),
                    group_label(s.group),
                ]
            })
        }),
    )?;
    run.write_csv(
        "factor_importance.csv",
        &["factor", "mr2", "explained", "eigenvalue"],
        (0..k).map(|j| {
            vec![
                (j + 1).to_string(),
                num(m.factor_mean[j]),
                num(fr.explained[j]),
                num(fr.eigenvalues[j]),
            ]
        }),
    )?;
    let mut gheader: Vec<String> = vec!["group".into(), "n_series".into()];
    gheader.extend((1..=k).map(|j| format!("mr2_{j}")));
    let gheader_refs: Vec<&str> = gheader.iter().map(String::as_str).collect();
    run.write_csv(
        "groups.csv",
        &gheader_refs,
        m.by_group.iter().map(|g| {
            let mut row = vec![group_label(g.group), g.count.to_string()];
            row.extend(g.mean_mr2.iter().map(|v| num(*v)));
            row
        }),
    )?;
    let mut fheader: Vec<String> = vec!["date".into()];
    fheader.extend((1..=k).map(|j| format!("f{j}")));
    let fheader_refs: Vec<&str> = fheader.iter().map(String::as_str).collect();
    run.write_csv(
        "factors.csv",
        &fheader_refs,
        (0..panel.n_periods()).map(|t| {
            let mut row = vec![panel.dates[t].clone()];
            row.extend((0..k).map(|j| num(fr.factors[(t, j)])));
            row
        }),
    )?;
    run.write_records(
        "excluded.csv",
        &excluded
            .iter()
            .map(|e| (e.id.clone(), format!("{:?}", e.reason)))
            .collect::<Vec<_>>(),
    )?;
    run.write_json(
        "factors.json",
        &json!({
            "policy": c.policy,
            "series": panel.ids,
            "k": k,
            "explained_total": fr.explained_total,
            "eigenvalues": fr.eigenvalues,
            "loadings": (0..k).map(|j| fr.loadings.column(j).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
            "imputation": { "iterations": imputed.iterations, "converged": imputed.converged, "max_change": imputed.max_change },
            "rank_deficient": fr.rank_deficient,
        }),
    )?;
    let config = json!({
        "input": c.panel.input,
        "groups": c.panel.groups,
        "policy": c.policy,
        "k": c.k,
        "top": c.top,
        "impute_tol": c.impute_tol,
        "estimate": c.panel.lambda.to_json(),
    });
    run.finish(config, None)
}

fn run_forecast(c: ForecastCmd) -> Result<()> {
    let mut run = Run::new(&c.out, "forecast-eval")?;
    let raw = run.timed("ingest", || c.panel.load())?.panel;
    let fcfg = ForecastConfig {
        holdout: c.holdout,
        ar_order: c.ar_order,
        min_train: c.min_train,
    };
    let pcfg = c.panel.policy_config();
    let report = run
        .timed("evaluate", || {
            evaluate_panel(&raw, &pcfg, &fcfg, c.test_alpha)
        })
        .context("forecast evaluation")?;
    for s in &report.skipped {
        eprintln!(
            "warning: series {}: {} policy: {}",
            s.id, s.policy, s.message
        );
    }
    run.write_with("table.csv", |f| write_table_csv(&report, f))?;
    let names: Vec<String> = Policy::ALL.iter().map(|p| p.to_string()).collect();
    let mut header: Vec<String> = vec!["series".into(), "group".into()];
    for stat in ["mase", "lambda_hat", "p_adjusted", "significant", "clipped"] {
        header.extend(names.iter().map(|p| format!("{stat}_{p}")));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    run.write_csv(
        "series.csv",
        &header_refs,
        report.series.iter().enumerate().map(|(i, s)| {
            let mut row = vec![s[0].id.clone(), group_label(s[0].group)];
            row.extend(s.iter().map(|e| num(e.mase)));
            row.extend(s.iter().map(|e| opt(e.lambda_hat)));
            for k in 0..3 {
                row.push(opt(report.significance[k].series[i]
                    .as_ref()
                    .map(|x| x.p_adjusted)));
            }
            for k in 0..3 {
                row.push(opt_bool(
                    report.significance[k].series[i]
                        .as_ref()
                        .map(|x| x.significant),
                ));
            }
            row.extend(s.iter().map(|e| e.clipped.to_string()));
            row
        }),
    )?;
    run.write_csv(
        "skipped.csv",
        &["series", "policy", "message"],
        report
            .skipped
            .iter()
            .map(|s| vec![s.id.clone(), s.policy.to_string(), s.message.clone()]),
    )?;
    let config = json!({
        "input": c.panel.input,
        "groups": c.panel.groups,
        "forecast": fcfg,
        "test_alpha": c.test_alpha,
        "estimate": c.panel.lambda.to_json(),
    });
    run.finish(config, None)
}
