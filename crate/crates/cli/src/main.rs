mod config;
mod csv;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tcopula::copula::CopulaParams;
use tcopula::empirical::{kendall_tau, LossSample};
use tcopula::gof::{analyze, FamilyOutcome, LambdaU, StudyConfig, StudyReport, TcEstimator};
use tcopula::reference::{gauss_fit_from_tau, gumbel_fit_from_tau, gumbel_lambda_u};
use tcopula::two_component::{
    log_spaced_grid, tc_fit_margins, tc_lambda_u_curve, tc_sample, ModelParams, TailCurve,
    TwoComponentCopula, TwoComponentParams,
};
use tcopula::{Family, StreamRng};

use crate::config::{parse_families, FileConfig};
use crate::csv::{fmt_num, pairs_to_csv, read_pairs, write_file};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or parameter values (exit 2).
    Usage(String),
    /// Unreadable or malformed files (exit 3).
    Io(String),
    /// No valid fit for the data (exit 4).
    Fit(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Fit(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Fit(m) => m,
        }
    }
}

impl From<tcopula::Error> for CliError {
    fn from(e: tcopula::Error) -> Self {
        match e {
            tcopula::Error::Domain(_) => CliError::Usage(e.to_string()),
            tcopula::Error::Fit(_) | tcopula::Error::Degenerate(_) => CliError::Fit(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "tcopula", version, about = "Two-component copula toolkit")]
struct Cli {
    /// Worker threads for the bootstrap (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate losses from the two-component model and write `x1,x2` CSV.
    Simulate(SimulateArgs),
    /// Fit one copula family to a data file.
    Fit(FitArgs),
    /// Run the bootstrap goodness-of-fit test for each family.
    Gof(GofArgs),
    /// Write the copula density on an interior grid.
    DensityGrid(DensityArgs),
    /// Write the pre-limit upper tail dependence curve.
    TailCurve(TailArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    sigma1: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV of `x1,x2` rows.
    data: PathBuf,
    #[arg(long)]
    family: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GofArgs {
    /// CSV of `x1,x2` rows.
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated families (default: gaussian,gumbel,two-component).
    #[arg(long)]
    family: Option<String>,
    #[arg(long = "bootstrap-k")]
    bootstrap_k: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// pseudo_likelihood or margin_mle.
    #[arg(long = "tc-estimator")]
    tc_estimator: Option<String>,
    /// Additional p-value for the correction, as NAME=VALUE (repeatable).
    #[arg(long = "external-p")]
    external_p: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Histogram data file (default: `<out>.hist.csv`).
    #[arg(long)]
    hist: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    alpha1: f64,
    #[arg(long)]
    alpha2: f64,
    #[arg(long = "grid-n", default_value_t = 50)]
    grid_n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TailArgs {
    #[arg(long)]
    alpha1: f64,
    #[arg(long)]
    alpha2: f64,
    #[arg(long = "t-min", default_value_t = 1e-6)]
    t_min: f64,
    #[arg(long = "t-max", default_value_t = 0.5)]
    t_max: f64,
    #[arg(long, default_value_t = 40)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

const DEFAULT_ALPHA: (f64, f64) = (3.387732, 1.181292);
const DEFAULT_SIGMA: (f64, f64) = (1.0, 0.9);
const DEFAULT_N: usize = 1000;
const DEFAULT_SEED: u64 = 1;

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let model = ModelParams::new(
        args.alpha1.or(file.alpha1).unwrap_or(DEFAULT_ALPHA.0),
        args.alpha2.or(file.alpha2).unwrap_or(DEFAULT_ALPHA.1),
        args.sigma1.or(file.sigma1).unwrap_or(DEFAULT_SIGMA.0),
        args.sigma2.or(file.sigma2).unwrap_or(DEFAULT_SIGMA.1),
    )?;
    let n = args.n.or(file.n).unwrap_or(DEFAULT_N);
    if n == 0 {
        return Err(CliError::Usage("n must be at least 1".into()));
    }
    let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let data = tc_sample(&model, n, &mut StreamRng::new(seed, 0))?;
    emit(
        args.out.or(file.data_out).as_deref(),
        &pairs_to_csv(data.pairs()),
    )
}

fn push_lambda(out: &mut String, lambda: &LambdaU) {
    match lambda {
        LambdaU::Value(v) => {
            let _ = writeln!(out, "lambda_u={}", fmt_num(*v));
        }
        LambdaU::Curve(curve) => push_curve_summary(out, curve),
    }
}

fn push_curve_summary(out: &mut String, curve: &TailCurve) {
    let (t, l) = curve.points[0];
    let _ = writeln!(out, "lambda_u_verdict={}", curve.verdict.as_str());
    let _ = writeln!(out, "lambda_u_t_min={}", fmt_num(t));
    let _ = writeln!(out, "lambda_u_at_t_min={}", fmt_num(l));
}

fn fit(args: FitArgs) -> Result<(), CliError> {
    let family: Family = args
        .family
        .parse()
        .map_err(|e: tcopula::Error| CliError::Usage(e.to_string()))?;
    let data = read_pairs(&args.data)?;
    let mut out = String::new();
    let _ = writeln!(out, "family={family}");
    let _ = writeln!(out, "n={}", data.len());
    let tau = kendall_tau(data.pairs())?;
    let _ = writeln!(out, "kendall_tau={}", fmt_num(tau));
    match family {
        Family::Gaussian => {
            let p = gauss_fit_from_tau(tau)?;
            let _ = writeln!(out, "r12={}", fmt_num(p.r12));
            push_lambda(&mut out, &LambdaU::Value(0.0));
        }
        Family::Gumbel => {
            let p = gumbel_fit_from_tau(tau)?;
            let _ = writeln!(out, "theta={}", fmt_num(p.theta));
            push_lambda(&mut out, &LambdaU::Value(gumbel_lambda_u(&p)));
        }
        Family::TwoComponent => {
            let fit = tc_fit_margins(&data)?;
            let _ = writeln!(out, "alpha1={}", fmt_num(fit.params.alpha1));
            let _ = writeln!(out, "alpha2={}", fmt_num(fit.params.alpha2));
            let _ = writeln!(out, "xi1={}", fmt_num(fit.first.params.xi));
            let _ = writeln!(out, "xi2={}", fmt_num(fit.second.params.xi));
            let _ = writeln!(out, "sigma1={}", fmt_num(fit.first.params.sigma));
            let _ = writeln!(out, "sigma2={}", fmt_num(fit.second.params.sigma));
            let curve =
                tc_lambda_u_curve(&fit.params, &tcopula::two_component::default_tail_grid())?;
            push_curve_summary(&mut out, &curve);
        }
    }
    emit(args.out.as_deref(), &out)
}

fn parse_external(items: &[String]) -> Result<Vec<(String, f64)>, CliError> {
    items
        .iter()
        .map(|item| {
            let (name, value) = item.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("--external-p expects NAME=VALUE, got '{item}'"))
            })?;
            let p: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid p-value '{value}'")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Usage(format!("p-value {p} outside [0, 1]")));
            }
            Ok((name.trim().to_string(), p))
        })
        .collect()
}

fn params_lines(out: &mut String, prefix: &str, params: &CopulaParams) {
    for (key, value) in params.key_values() {
        let _ = writeln!(out, "{prefix}.{key}={}", fmt_num(value));
    }
}

fn study_report_text(report: &StudyReport, cfg: &StudyConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n={}", report.n);
    let _ = writeln!(out, "seed={}", cfg.seed);
    let _ = writeln!(out, "bootstrap_k={}", cfg.bootstrap_k);
    let _ = writeln!(out, "beta={}", cfg.beta);
    let _ = writeln!(out, "tc_estimator={}", cfg.tc_estimator);
    let _ = writeln!(out, "kendall_tau={}", fmt_num(report.kendall_tau));
    for fam in &report.families {
        let name = fam.family.name();
        match &fam.headline_fit {
            Ok(p) => params_lines(&mut out, &format!("{name}.fit"), p),
            Err(msg) => {
                let _ = writeln!(out, "{name}.fit.error={msg}");
            }
        }
        match &fam.lambda_u {
            Some(LambdaU::Value(v)) => {
                let _ = writeln!(out, "{name}.lambda_u={}", fmt_num(*v));
            }
            Some(LambdaU::Curve(c)) => {
                let _ = writeln!(out, "{name}.lambda_u_verdict={}", c.verdict.as_str());
                let _ = writeln!(out, "{name}.lambda_u_at_t_min={}", fmt_num(c.points[0].1));
            }
            None => {}
        }
        match &fam.outcome {
            FamilyOutcome::Completed(r) => {
                let _ = writeln!(out, "{name}.status=completed");
                params_lines(&mut out, &format!("{name}.gof"), &r.fitted_params);
                let _ = writeln!(out, "{name}.statistic={}", fmt_num(r.observed_statistic));
                let _ = writeln!(out, "{name}.p_value={}", fmt_num(r.p_value));
                let _ = writeln!(out, "{name}.valid_iterations={}", r.valid_iterations);
                let _ = writeln!(out, "{name}.skipped_iterations={}", r.skipped_iterations);
                if let Some(reject) = report.rejected(fam.family) {
                    let _ = writeln!(out, "{name}.reject={reject}");
                }
            }
            FamilyOutcome::Failed(msg) => {
                let _ = writeln!(out, "{name}.status=failed");
                let _ = writeln!(out, "{name}.error={msg}");
            }
        }
    }
    if let Some(bh) = &report.bh {
        let _ = writeln!(out, "bh.m={}", bh.m);
        let _ = writeln!(out, "bh.threshold={}", fmt_num(bh.threshold));
        for (name, reject) in &bh.decisions {
            let _ = writeln!(out, "bh.reject.{name}={reject}");
        }
    }
    out
}

fn histogram_text(report: &StudyReport) -> String {
    let mut out = String::from("family,statistic\n");
    for fam in &report.families {
        if let FamilyOutcome::Completed(r) = &fam.outcome {
            let name = fam.family.name();
            let _ = writeln!(out, "{name}:observed,{}", fmt_num(r.observed_statistic));
            for s in &r.bootstrap_statistics {
                let _ = writeln!(out, "{name},{}", fmt_num(*s));
            }
        }
    }
    out
}

fn gof(args: GofArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let families = match &args.family {
        Some(list) => parse_families(list)?,
        None => file
            .families
            .clone()
            .unwrap_or_else(|| Family::ALL.to_vec()),
    };
    if families.is_empty() {
        return Err(CliError::Usage("no copula families selected".into()));
    }
    let mut cfg = StudyConfig::new(args.seed.or(file.seed).unwrap_or(DEFAULT_SEED));
    cfg.families = families;
    cfg.bootstrap_k = args
        .bootstrap_k
        .or(file.bootstrap_k)
        .unwrap_or(cfg.bootstrap_k);
    if cfg.bootstrap_k == 0 {
        return Err(CliError::Usage("bootstrap-k must be at least 1".into()));
    }
    cfg.beta = args.beta.or(file.beta).unwrap_or(cfg.beta);
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) {
        return Err(CliError::Usage(format!(
            "beta must lie in (0, 1), got {}",
            cfg.beta
        )));
    }
    cfg.tc_estimator = match &args.tc_estimator {
        Some(s) => s
            .parse::<TcEstimator>()
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None => file.tc_estimator.unwrap_or_default(),
    };
    cfg.external_p_values = parse_external(&args.external_p)?;

    let data: LossSample = read_pairs(&args.data)?;
    let report = analyze(&data, &cfg)?;
    let out_path = args.out.or(file.report_out);
    emit(out_path.as_deref(), &study_report_text(&report, &cfg))?;
    let hist_path = args.hist.or(file.hist_out).or_else(|| {
        out_path
            .as_ref()
            .map(|p| PathBuf::from(format!("{}.hist.csv", p.display())))
    });
    if let Some(path) = hist_path {
        write_file(&path, &histogram_text(&report))?;
    }
    let completed = report
        .families
        .iter()
        .filter(|f| matches!(f.outcome, FamilyOutcome::Completed(_)))
        .count();
    if completed == 0 {
        return Err(CliError::Fit("no family produced a valid fit".into()));
    }
    Ok(())
}

fn density_grid(args: DensityArgs) -> Result<(), CliError> {
    if args.grid_n < 2 {
        return Err(CliError::Usage(format!(
            "grid-n must be at least 2, got {}",
            args.grid_n
        )));
    }
    let copula = TwoComponentCopula::new(TwoComponentParams::new(args.alpha1, args.alpha2)?)?;
    let step = 1.0 / (args.grid_n as f64 + 1.0);
    let mut out = String::from("u,v,c\n");
    for i in 1..=args.grid_n {
        for j in 1..=args.grid_n {
            let (u, v) = (i as f64 * step, j as f64 * step);
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_num(u),
                fmt_num(v),
                fmt_num(copula.density(u, v)?)
            );
        }
    }
    emit(args.out.as_deref(), &out)
}

fn tail_curve(args: TailArgs) -> Result<(), CliError> {
    if !(args.t_min > 0.0 && args.t_min < args.t_max && args.t_max <= 0.5) {
        return Err(CliError::Usage(format!(
            "need 0 < t-min < t-max <= 0.5, got t-min={} t-max={}",
            args.t_min, args.t_max
        )));
    }
    if args.points < 2 {
        return Err(CliError::Usage("points must be at least 2".into()));
    }
    let params = TwoComponentParams::new(args.alpha1, args.alpha2)?;
    let curve = tc_lambda_u_curve(
        &params,
        &log_spaced_grid(args.t_min, args.t_max, args.points),
    )?;
    let mut out = String::from("t,lambda_u_t\n");
    for &(t, l) in &curve.points {
        let _ = writeln!(out, "{},{}", fmt_num(t), fmt_num(l));
    }
    let _ = writeln!(out, "# verdict={}", curve.verdict.as_str());
    match args.out.as_deref() {
        Some(path) => {
            write_file(path, &out)?;
            println!("verdict={}", curve.verdict.as_str());
            Ok(())
        }
        None => emit(None, &out),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Gof(a) => gof(a),
        Command::DensityGrid(a) => density_grid(a),
        Command::TailCurve(a) => tail_curve(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
