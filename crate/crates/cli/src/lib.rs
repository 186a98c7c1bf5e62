//! Command-line front end for the fiscal-crisis hazard pipeline.
//!
//! `eci` -> `spells` -> `fit` / `ladder` / `robustness` -> `report`, plus
//! `simulate` and `coverage` for synthetic-data experiments.

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fiscrisk_core::complexity::{eci_from_raw, ActivityMatrix};
use fiscrisk_core::ladder::{self, LadderResult};
use fiscrisk_core::panel::{
    attach_covariates, build_spells, load_panel, EciTable, PanelSchema, SpellConfig, SpellSet, YearWindow,
};
use fiscrisk_core::report::{self, TableFormat};
use fiscrisk_core::simgen::{self, CovariateLaw, SimParams};
use fiscrisk_core::survival::{fit_cox, FitConfig, ModelSpec, SurvivalData, Ties};
use fiscrisk_core::{Error as CoreError, ErrorCategory};
use log::info;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: invalid JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Argument(String),
    #[error("{0}")]
    NoModel(String),
}

impl CliError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Io { .. } => ErrorCategory::Io,
            CliError::Json { .. } => ErrorCategory::Schema,
            CliError::Argument(_) => ErrorCategory::Argument,
            CliError::NoModel(_) => ErrorCategory::Numeric,
        }
    }
}

macro_rules! core_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}
core_from!(
    fiscrisk_core::panel::PanelError,
    fiscrisk_core::complexity::ComplexityError,
    fiscrisk_core::survival::SurvivalError,
    fiscrisk_core::ladder::LadderError,
    fiscrisk_core::simgen::SimError
);

/// Process exit status for an error category.
pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Io => 2,
        ErrorCategory::Capacity => 3,
        ErrorCategory::Schema | ErrorCategory::Parse => 4,
        ErrorCategory::Numeric => 5,
        ErrorCategory::Data => 6,
        ErrorCategory::Spec => 7,
        ErrorCategory::Argument => 8,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Markdown,
    Json,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TableFormat::Csv,
            Format::Markdown => TableFormat::Markdown,
            Format::Json => TableFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TiesArg {
    Breslow,
    Efron,
    Exact,
}

impl From<TiesArg> for Ties {
    fn from(t: TiesArg) -> Self {
        match t {
            TiesArg::Breslow => Ties::Breslow,
            TiesArg::Efron => Ties::Efron,
            TiesArg::Exact => Ties::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawArg {
    Uniform01,
    StandardNormal,
    ProductPair,
    LadderPanel,
}

impl From<LawArg> for CovariateLaw {
    fn from(l: LawArg) -> Self {
        match l {
            LawArg::Uniform01 => CovariateLaw::Uniform01,
            LawArg::StandardNormal => CovariateLaw::StandardNormal,
            LawArg::ProductPair => CovariateLaw::ProductPair,
            LawArg::LadderPanel => CovariateLaw::LadderPanel,
        }
    }
}

/// Fiscal-crisis hazard models with trade and research economic complexity.
#[derive(Debug, Parser)]
#[command(
    name = "fiscrisk",
    version,
    after_help = "Every flag can also be set through an environment variable named \
                  FISCRISK_<FLAG>, e.g. FISCRISK_SEED=7 or FISCRISK_TIES=breslow.\n\
                  Exit codes: 0 ok, 2 io, 3 capacity, 4 schema/parse, 5 numeric, 6 data, 7 spec, 8 argument."
)]
pub struct RunConfig {
    /// Master seed for every random draw.
    #[arg(long, global = true, env = "FISCRISK_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Output format for tables.
    #[arg(long, global = true, env = "FISCRISK_FORMAT")]
    pub format: Option<Format>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true, env = "FISCRISK_OUT")]
    pub out: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Economic Complexity Index from a long `country,activity,value` file.
    Eci(EciArgs),
    /// Crisis spells from a country-year panel.
    Spells(SpellsArgs),
    /// Fit one Cox model.
    Fit(FitArgs),
    /// Fit the ten-model ladder and select by AIC.
    Ladder(LadderArgs),
    /// Refit one model under the exact, Breslow and Efron tie methods.
    Robustness(RobustnessArgs),
    /// Write a synthetic spell file.
    Simulate(SimArgs),
    /// Monte Carlo bias and interval coverage, as JSON.
    Coverage(CoverageArgs),
    /// Render a saved ladder or robustness result.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct EciArgs {
    #[arg(long, env = "FISCRISK_INPUT")]
    pub input: PathBuf,
    /// RCA cut-off for specialisation.
    #[arg(long, env = "FISCRISK_THRESHOLD", default_value_t = 1.0)]
    pub threshold: f64,
}

#[derive(Debug, Args, Clone)]
pub struct PanelArgs {
    #[arg(long, env = "FISCRISK_PANEL")]
    pub panel: Option<PathBuf>,
    /// Trade ECI scores (`country,eci,...`).
    #[arg(long, env = "FISCRISK_ECI_TRADE")]
    pub eci_trade: Option<PathBuf>,
    /// Research ECI scores (`country,eci,...`).
    #[arg(long, env = "FISCRISK_ECI_RESEARCH")]
    pub eci_research: Option<PathBuf>,
    /// Inclusive year range.
    #[arg(long, env = "FISCRISK_WINDOW", default_value = "1998:2021")]
    pub window: YearWindow,
    /// Years after a crisis before a new spell may start.
    #[arg(long, env = "FISCRISK_REENTRY_GAP", default_value_t = 1)]
    pub reentry_gap: u32,
    /// Covariates are read this many years after spell entry.
    #[arg(long, env = "FISCRISK_COVARIATE_LAG", default_value_t = 0)]
    pub covariate_lag: u32,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Spell file with covariate columns, as written by `spells`.
    #[arg(long, env = "FISCRISK_SPELLS", conflicts_with = "panel")]
    pub spells: Option<PathBuf>,
    #[command(flatten)]
    pub panel: PanelArgs,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct ModelArgs {
    #[arg(long, value_enum, env = "FISCRISK_TIES", default_value = "efron")]
    pub ties: TiesArg,
    /// Significance level of the Wald intervals.
    #[arg(long, env = "FISCRISK_ALPHA", default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct SpellsArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `1`-`10`, `baseline`, `final`, a JSON spec file, or comma-separated terms.
    #[arg(long, env = "FISCRISK_SPEC", default_value = "final")]
    pub spec: String,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct LadderArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write `model_label,k,loglik,aic,is_best,status` here.
    #[arg(long, env = "FISCRISK_AIC_OUT")]
    pub aic_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, env = "FISCRISK_SPEC", default_value = "final")]
    pub spec: String,
    #[arg(long, env = "FISCRISK_ALPHA", default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args, Clone)]
pub struct SimArgs {
    #[arg(long, env = "FISCRISK_N", default_value_t = 200)]
    pub n: usize,
    /// Comma-separated true coefficients.
    #[arg(long, env = "FISCRISK_BETA", value_delimiter = ',', allow_hyphen_values = true, default_value = "0.5,-0.5")]
    pub beta: Vec<f64>,
    /// Constant baseline hazard per year.
    #[arg(long, env = "FISCRISK_RATE", default_value_t = 0.1)]
    pub rate: f64,
    /// Censoring horizon in years.
    #[arg(long, env = "FISCRISK_HORIZON", default_value_t = 25.0)]
    pub horizon: f64,
    #[arg(long, value_enum, env = "FISCRISK_LAW", default_value = "standard-normal")]
    pub law: LawArg,
}

impl SimArgs {
    fn params(&self, seed: u64) -> SimParams {
        SimParams {
            n_subjects: self.n,
            true_beta: self.beta.clone(),
            baseline_rate: self.rate,
            censor_horizon: self.horizon,
            covariate_law: self.law.into(),
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, env = "FISCRISK_REPLICATES", default_value_t = 500)]
    pub replicates: usize,
    #[arg(long, value_enum, env = "FISCRISK_TIES", default_value = "efron")]
    pub ties: TiesArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Ladder result written by `ladder --format json`.
    #[arg(long, env = "FISCRISK_LADDER", conflicts_with = "robustness")]
    pub ladder: Option<PathBuf>,
    /// Robustness result written by `robustness --format json`.
    #[arg(long, env = "FISCRISK_ROBUSTNESS")]
    pub robustness: Option<PathBuf>,
    /// Also write AIC figure data for a ladder here.
    #[arg(long, env = "FISCRISK_FIGURE")]
    pub figure: Option<PathBuf>,
    #[arg(long, env = "FISCRISK_ALPHA", default_value_t = 0.05)]
    pub alpha: f64,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io { path: path.into(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?).map_err(|source| CliError::Json { path: path.into(), source })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io { path: p.into(), source }),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn level(alpha: f64) -> Result<f64, CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(1.0 - alpha)
    } else {
        Err(CliError::Argument(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_exists(paths: &[&Path]) -> Result<(), CliError> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Io {
                path: p.to_path_buf(),
                source: io::Error::new(io::ErrorKind::NotFound, "file not found"),
            });
        }
    }
    Ok(())
}

/// Resolves a standard name, a JSON file, or a comma-separated term list.
pub fn resolve_spec(s: &str) -> Result<ModelSpec, CliError> {
    if let Ok(spec) = ladder::standard_spec(s) {
        return Ok(spec);
    }
    let path = Path::new(s);
    if path.is_file() {
        return read_json(path);
    }
    let terms: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if terms.is_empty() {
        return Err(CliError::Argument("empty --spec".into()));
    }
    Ok(ModelSpec::parse_terms(&terms)?)
}

fn spells_from_panel(args: &PanelArgs, spec: Option<&ModelSpec>) -> Result<SpellSet, CliError> {
    let panel_path =
        args.panel.as_deref().ok_or_else(|| CliError::Argument("either --spells or --panel is required".into()))?;
    let mut required = vec![panel_path];
    required.extend(args.eci_trade.as_deref());
    required.extend(args.eci_research.as_deref());
    check_exists(&required)?;

    let panel = load_panel(open(panel_path)?, &PanelSchema::default())?;
    let cfg = SpellConfig { window: args.window, reentry_gap: args.reentry_gap, covariate_lag: args.covariate_lag };
    let spells = build_spells(&panel, &cfg)?;
    let eci = match (&args.eci_trade, &args.eci_research) {
        (Some(t), Some(r)) => EciTable::from_score_files(open(t)?, open(r)?)?,
        (None, None) => EciTable::default(),
        _ => return Err(CliError::Argument("--eci-trade and --eci-research go together".into())),
    };
    let spec = match spec {
        Some(s) => s.clone(),
        None if eci.entries.is_empty() => ladder::standard_spec("baseline")?,
        None => ladder::union_spec(),
    };
    let attached = attach_covariates(&spells, &panel, &eci, &spec)?;
    info!(
        "{} spells, {} events, {} dropped by listwise deletion",
        attached.spells.len(),
        attached.spells.n_events(),
        attached.dropped
    );
    Ok(attached.spells)
}

fn load_data(args: &DataArgs, spec: Option<&ModelSpec>) -> Result<SurvivalData, CliError> {
    let spells = match &args.spells {
        Some(p) => {
            check_exists(&[p])?;
            SpellSet::read_csv(open(p)?)?
        }
        None => spells_from_panel(&args.panel, spec)?,
    };
    Ok(spells.to_survival_data()?)
}

fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.out.as_deref();
    let format = cfg.format.map(TableFormat::from);
    match &cfg.command {
        Command::Eci(a) => {
            check_exists(&[&a.input])?;
            let m = ActivityMatrix::read_long_csv(open(&a.input)?)?;
            let scores = eci_from_raw(&m, a.threshold)?;
            let mut buf = Vec::new();
            scores.write_csv(&mut buf)?;
            emit(out, &String::from_utf8_lossy(&buf))
        }
        Command::Spells(a) => {
            let spells = spells_from_panel(&a.panel, None)?;
            let mut buf = Vec::new();
            spells.write_csv(&mut buf)?;
            emit(out, &String::from_utf8_lossy(&buf))
        }
        Command::Fit(a) => {
            let spec = resolve_spec(&a.spec)?;
            let level = level(a.model.alpha)?;
            let data = load_data(&a.data, Some(&spec))?;
            let fit = fit_cox(&data, &spec, a.model.ties.into(), &FitConfig::default())?;
            let text = match format.unwrap_or_default() {
                TableFormat::Json => {
                    serde_json::to_string_pretty(&fit).expect("fit serialises") + "\n"
                }
                f => {
                    let col = report::Column { label: "Model", fit: Some(&fit), failure: None };
                    report::render_columns(&[col], f, level)?
                }
            };
            emit(out, &text)
        }
        Command::Ladder(a) => {
            let level = level(a.model.alpha)?;
            let data = load_data(&a.data, None)?;
            let result = ladder::run_ladder(&data, a.model.ties.into(), &FitConfig::default());
            write_ladder(&result, format.unwrap_or_default(), level, out, a.aic_out.as_deref())
        }
        Command::Robustness(a) => {
            let spec = resolve_spec(&a.spec)?;
            let level = level(a.alpha)?;
            let data = load_data(&a.data, Some(&spec))?;
            let result = ladder::run_robustness(&data, &spec, &FitConfig::default());
            let text = match format.unwrap_or_default() {
                TableFormat::Json => serde_json::to_string_pretty(&result).expect("result serialises") + "\n",
                f => report::render_robustness(&result, f, level)?,
            };
            emit(out, &text)?;
            if result.models.iter().all(|m| m.fit.is_none()) {
                return Err(CliError::NoModel("no tie method produced a fit".into()));
            }
            Ok(())
        }
        Command::Simulate(a) => {
            let spells = simgen::simulate_spells(&a.params(cfg.seed))?;
            let mut buf = Vec::new();
            spells.write_csv(&mut buf)?;
            emit(out, &String::from_utf8_lossy(&buf))
        }
        Command::Coverage(a) => {
            let r = simgen::coverage_experiment(&a.sim.params(cfg.seed), a.replicates, a.ties.into())?;
            emit(out, &(serde_json::to_string_pretty(&r).expect("report serialises") + "\n"))
        }
        Command::Report(a) => {
            let level = level(a.alpha)?;
            let format = format.unwrap_or_default();
            match (&a.ladder, &a.robustness) {
                (Some(p), _) => {
                    check_exists(&[p])?;
                    let result: LadderResult = read_json(p)?;
                    write_ladder(&result, format, level, out, a.figure.as_deref())
                }
                (None, Some(p)) => {
                    check_exists(&[p])?;
                    let result: ladder::RobustnessResult = read_json(p)?;
                    emit(out, &report::render_robustness(&result, format, level)?)
                }
                (None, None) => Err(CliError::Argument("report needs --ladder or --robustness".into())),
            }
        }
    }
}

fn write_ladder(
    result: &LadderResult,
    format: TableFormat,
    level: f64,
    out: Option<&Path>,
    figure: Option<&Path>,
) -> Result<(), CliError> {
    let text = match format {
        TableFormat::Json => serde_json::to_string_pretty(result).expect("ladder serialises") + "\n",
        f => report::render_ladder(result, f, level)?,
    };
    emit(out, &text)?;
    if let Some(p) = figure {
        emit(Some(p), &report::emit_aic_figure_data(result))?;
    }
    match result.best() {
        Some(best) => {
            info!("minimum AIC: {}", best.label);
            Ok(())
        }
        None => Err(CliError::NoModel("no ladder model converged".into())),
    }
}

/// Machine-readable error line for standard error.
pub fn error_json(e: &CliError) -> String {
    serde_json::json!({ "error": { "category": e.category().as_str(), "message": e.to_string() } }).to_string()
}

/// Runs the subcommand and returns the process exit status; failures are
/// reported on standard error as a JSON object.
pub fn run(config: RunConfig) -> i32 {
    match execute(&config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(e.category())
        }
    }
}
