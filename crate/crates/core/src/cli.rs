//! Batch front-end: each command reads a flat TOML config and a profile
//! file, computes everything in memory, then writes CSV/JSON tables into the
//! output directory with atomic renames.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    rho_min, success_probability_closed_form, success_probability_quadrature, CoverageInputs, NetworkConfig,
};
use crate::montecarlo::{compare_schemes, CompareOptions, MonteCarloOptions, Scheme};
use crate::policy::{dp_optimal_search, run_policy, DpOptions, Outlook, PurchaseRule};
use crate::scenario::{load_profiles, parse_profiles_csv, run_with_errors, ErrorModel, HorizonProfile};

pub const DEFAULT_CONFIG: &str = include_str!("../data/default_config.toml");
pub const DEFAULT_PROFILES: &str = include_str!("../data/profiles_24h.csv");

#[derive(Debug, Parser)]
#[command(name = "gridcell", version, about = "BS sleeping and energy purchase planning for hybrid-energy cellular networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Analyze,
    Schedule,
    Oracle,
    Errors,
    Compare,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coverage sweep: closed form vs quadrature and thresholds per horizon.
    Analyze(Common),
    /// Active-probability and purchase schedule over the profile.
    Schedule(Common),
    /// DP optimum vs the over-purchase rule for growing horizon counts.
    Oracle(Common),
    /// Cost under renewable forecast errors.
    Errors(Common),
    /// Spatial comparison of the three sleeping schemes.
    Compare(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat TOML config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Profile CSV (or .json); built-in 24-hour profile when omitted.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Config override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Command {
    pub fn split(self) -> (CommandKind, Common) {
        match self {
            Command::Analyze(c) => (CommandKind::Analyze, c),
            Command::Schedule(c) => (CommandKind::Schedule, c),
            Command::Oracle(c) => (CommandKind::Oracle, c),
            Command::Errors(c) => (CommandKind::Errors, c),
            Command::Compare(c) => (CommandKind::Compare, c),
        }
    }
}

/// Resolved inputs of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandKind,
    pub config_path: Option<PathBuf>,
    pub profile_path: Option<PathBuf>,
    pub seed: u64,
    pub output_path: PathBuf,
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub network: NetworkConfig,
    pub lambda_m_all: f64,
    pub rule: PurchaseRule,
    pub grid_step: f64,
    pub dp_budget: usize,
    pub oracle_start: usize,
    pub oracle_max_horizons: usize,
    pub eta: f64,
    pub error_realizations: usize,
    pub error_max_horizons: usize,
    pub window: f64,
    pub mc_realizations: usize,
    pub pair_radius: f64,
    pub compare_start: usize,
    pub compare_horizons: usize,
    pub compare_price: f64,
    pub compare_sweep: Vec<f64>,
    pub compare_budget: usize,
    pub analyze_rho: Vec<f64>,
    pub analyze_lambda_m: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str(DEFAULT_CONFIG).expect("built-in config parses")
    }
}

fn parse_override(raw: &str) -> Result<(String, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::Validation(format!("override '{raw}' is not key=value")))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key, parsed))
}

fn toml_error(err: toml::de::Error, text: &str) -> Error {
    let line = err.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1) as u64).unwrap_or(0);
    Error::Parse { line, message: err.message().to_string() }
}

impl RunConfig {
    /// Parses flat TOML, applies `key=value` overrides and validates. Unknown
    /// keys are rejected in both.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(e, text))?;
        let known = toml::Table::try_from(RunConfig::default()).expect("config serialises");
        for (key, value) in overrides.iter().map(|o| parse_override(o)).collect::<Result<Vec<_>>>()? {
            table.insert(key, value);
        }
        if let Some(unknown) = table.keys().find(|k| !known.contains_key(*k)) {
            return Err(Error::Validation(format!("unknown config key '{unknown}'")));
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Validation(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        let positive = [
            (self.lambda_m_all, "lambda_m_all"),
            (self.grid_step, "grid_step"),
            (self.window, "window"),
            (self.pair_radius, "pair_radius"),
            (self.compare_price, "compare_price"),
        ];
        for (v, name) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        if !(self.eta >= 0.0) {
            return Err(Error::Validation("eta must be >= 0".into()));
        }
        let counts = [
            (self.oracle_start, "oracle_start"),
            (self.oracle_max_horizons, "oracle_max_horizons"),
            (self.error_realizations, "error_realizations"),
            (self.error_max_horizons, "error_max_horizons"),
            (self.mc_realizations, "mc_realizations"),
            (self.compare_start, "compare_start"),
            (self.compare_horizons, "compare_horizons"),
        ];
        for (v, name) in counts {
            if v == 0 {
                return Err(Error::Validation(format!("{name} must be >= 1")));
            }
        }
        if self.compare_sweep.iter().chain(&self.analyze_lambda_m).any(|&x| !(x >= 0.0)) {
            return Err(Error::Validation("density sweeps must be >= 0".into()));
        }
        if self.analyze_rho.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::Validation("analyze_rho values must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Named output file with its contents.
pub type Artifact = (String, String);

/// Process exit code for an error: 2 input, 3 infeasible, 4 budget, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InfeasibleLoad { .. } => 3,
        Error::BudgetExceeded { .. } => 4,
        Error::Parse { .. }
        | Error::Validation(_)
        | Error::Io(_)
        | Error::Domain(_)
        | Error::PreconditionViolation(_)
        | Error::UnsupportedRegime { .. } => 2,
        Error::QuadratureNonConvergence { .. }
        | Error::RootNotBracketed { .. }
        | Error::DemandViolation { .. }
        | Error::NoActiveBs => 1,
    }
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}

fn window_of(profiles: &[HorizonProfile], start: usize, len: usize) -> Result<&[HorizonProfile]> {
    let begin = start - 1;
    profiles.get(begin..begin + len).ok_or_else(|| {
        Error::Validation(format!("horizons {start}..{} outside the {}-horizon profile", start + len - 1, profiles.len()))
    })
}

fn analyze(cfg: &RunConfig, profiles: &[HorizonProfile]) -> Result<Vec<Artifact>> {
    let net = &cfg.network;
    let mut rows = Vec::new();
    for &lambda_m in &cfg.analyze_lambda_m {
        let threshold = match rho_min(net, lambda_m) {
            Ok(r) => Some(r),
            Err(Error::InfeasibleLoad { rho_min, .. }) => Some(rho_min),
            Err(Error::UnsupportedRegime { .. }) => None,
            Err(e) => return Err(e),
        };
        for &rho in &cfg.analyze_rho {
            let inp = CoverageInputs::new(rho, lambda_m)?;
            let closed = match success_probability_closed_form(net, &inp) {
                Ok(p) => Some(p),
                Err(Error::UnsupportedRegime { .. }) => None,
                Err(e) => return Err(e),
            };
            let quad = success_probability_quadrature(net, &inp)?;
            rows.push(vec![
                num(rho),
                num(lambda_m),
                opt(closed),
                num(quad),
                opt(threshold),
                threshold.map(|r| (r <= 1.0).to_string()).unwrap_or_default(),
            ]);
        }
    }
    let coverage = csv_table(&["rho", "lambda_m", "p_suc_closed", "p_suc_quadrature", "rho_min", "feasible"], rows);
    let mut rows = Vec::new();
    for p in profiles {
        let lambda_m = cfg.lambda_m_all * p.theta;
        let r = rho_min(net, lambda_m).map_err(|e| e.at_horizon(p.t))?;
        let closed = success_probability_closed_form(net, &CoverageInputs::new(r, lambda_m)?)?;
        rows.push(vec![p.t.to_string(), num(p.theta), num(lambda_m), num(r), num(closed)]);
    }
    let thresholds = csv_table(&["t", "theta", "lambda_m", "rho_min", "p_suc_at_rho_min"], rows);
    Ok(vec![("coverage.csv".into(), coverage), ("thresholds.csv".into(), thresholds)])
}

#[derive(Serialize)]
struct ScheduleSummary {
    rule: PurchaseRule,
    horizons: usize,
    total_cost: f64,
    myopic_cost: f64,
    final_storage: f64,
}

fn schedule(cfg: &RunConfig, profiles: &[HorizonProfile]) -> Result<Vec<Artifact>> {
    let outlook = Outlook::from_profiles(&cfg.network, profiles, cfg.lambda_m_all)?;
    let sched = run_policy(&cfg.network, &outlook, cfg.rule)?;
    let myopic = run_policy(&cfg.network, &outlook, PurchaseRule::Myopic)?;
    let rows = outlook.horizons.iter().zip(profiles).enumerate().map(|(k, (h, p))| {
        vec![
            h.t.to_string(),
            opt(h.rho),
            num(sched.g[k]),
            num(sched.storage[k]),
            num(h.price),
            num(h.lambda_e),
            num(p.theta),
            num(h.e_min),
        ]
    });
    let table = csv_table(&["t", "rho_star", "G", "B", "price", "lambda_e", "theta", "e_min"], rows);
    let summary = ScheduleSummary {
        rule: cfg.rule,
        horizons: outlook.len(),
        total_cost: sched.total_cost,
        myopic_cost: myopic.total_cost,
        final_storage: *sched.storage.last().expect("storage path is non-empty"),
    };
    Ok(vec![("schedule.csv".into(), table), ("schedule.json".into(), json(&summary))])
}

fn oracle(cfg: &RunConfig, profiles: &[HorizonProfile]) -> Result<Vec<Artifact>> {
    let start = cfg.oracle_start;
    let span = window_of(profiles, start, cfg.oracle_max_horizons)?;
    let full = Outlook::from_profiles(&cfg.network, span, cfg.lambda_m_all)?;
    let opts = DpOptions { grid_step: cfg.grid_step, budget: cfg.dp_budget };
    let mut rows = Vec::new();
    for horizons in 1..=cfg.oracle_max_horizons {
        let outlook = full.window(0, horizons)?;
        let optimal = dp_optimal_search(&cfg.network, &outlook, &opts)?.total_cost();
        let sub = run_policy(&cfg.network, &outlook, PurchaseRule::Suboptimal)?.total_cost;
        let step_cost = cfg.grid_step * outlook.price().iter().sum::<f64>();
        rows.push(vec![horizons.to_string(), num(optimal), num(sub), num(sub - optimal), num(step_cost)]);
    }
    let table = csv_table(&["T", "optimal", "suboptimal", "absolute_gap", "grid_step_cost"], rows);
    Ok(vec![("oracle.csv".into(), table)])
}

fn errors(cfg: &RunConfig, profiles: &[HorizonProfile], seed: u64) -> Result<Vec<Artifact>> {
    let span = window_of(profiles, 1, cfg.error_max_horizons)?;
    let full = Outlook::from_profiles(&cfg.network, span, cfg.lambda_m_all)?;
    let model = ErrorModel::new(cfg.eta, seed)?;
    let mut rows = Vec::new();
    for horizons in 1..=cfg.error_max_horizons {
        let study = run_with_errors(&cfg.network, &full.window(0, horizons)?, &model, cfg.error_realizations)?;
        let rel = if study.error_free_cost > 0.0 { study.mean_cost / study.error_free_cost - 1.0 } else { 0.0 };
        rows.push(vec![
            horizons.to_string(),
            num(study.error_free_cost),
            num(study.mean_cost),
            num(study.std_cost),
            num(study.std_error),
            num(rel),
            study.top_ups.to_string(),
        ]);
    }
    let header = ["T", "error_free_cost", "mean_cost", "std_cost", "std_error", "relative_difference", "top_ups"];
    Ok(vec![("errors.csv".into(), csv_table(&header, rows))])
}

fn compare(cfg: &RunConfig, profiles: &[HorizonProfile], seed: u64) -> Result<Vec<Artifact>> {
    let span: Vec<HorizonProfile> = window_of(profiles, cfg.compare_start, cfg.compare_horizons)?
        .iter()
        .map(|p| HorizonProfile { price: cfg.compare_price, ..*p })
        .collect();
    let opts = CompareOptions {
        mc: MonteCarloOptions { window: cfg.window, n_realizations: cfg.mc_realizations, seed },
        pair_radius: cfg.pair_radius,
        budget: cfg.compare_budget,
    };
    let mut header = vec!["lambda_m_all".to_string()];
    for s in Scheme::ALL {
        for col in ["cost", "ci_low", "ci_high"] {
            header.push(format!("{}_{col}", s.name()));
        }
    }
    header.extend(["realizations".into(), "proposed_p_suc".into(), "discarded".into()]);
    let mut rows = Vec::new();
    for &lambda_m_all in &cfg.compare_sweep {
        let cmp = compare_schemes(&cfg.network, &span, lambda_m_all, &opts)?;
        let mut row = vec![num(lambda_m_all)];
        for s in Scheme::ALL {
            let sum = cmp.get(s);
            row.extend([num(sum.mean_cost), num(sum.ci_low), num(sum.ci_high)]);
        }
        row.push(cfg.mc_realizations.to_string());
        row.push(opt(cmp.get(Scheme::Proposed).empirical_p_suc));
        row.push(cmp.discarded.to_string());
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    Ok(vec![("compare.csv".into(), csv_table(&header, rows))])
}

fn read_inputs(common: &Common) -> Result<(RunConfig, Vec<HorizonProfile>)> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let cfg = RunConfig::from_toml(&text, &common.overrides)?;
    let profiles = match &common.profiles {
        Some(path) => load_profiles(path)?,
        None => parse_profiles_csv(DEFAULT_PROFILES)?,
    };
    Ok((cfg, profiles))
}

/// Runs one command and returns its artifacts without touching the disk.
pub fn execute(kind: CommandKind, common: &Common) -> Result<Vec<Artifact>> {
    let (cfg, profiles) = read_inputs(common)?;
    let mut artifacts = match kind {
        CommandKind::Analyze => analyze(&cfg, &profiles)?,
        CommandKind::Schedule => schedule(&cfg, &profiles)?,
        CommandKind::Oracle => oracle(&cfg, &profiles)?,
        CommandKind::Errors => errors(&cfg, &profiles, common.seed)?,
        CommandKind::Compare => compare(&cfg, &profiles, common.seed)?,
    };
    let manifest = RunManifest {
        command: kind,
        config_path: common.config.clone(),
        profile_path: common.profiles.clone(),
        seed: common.seed,
        output_path: common.out.clone(),
        overrides: common.overrides.clone(),
    };
    #[derive(Serialize)]
    struct Record<'a> {
        manifest: &'a RunManifest,
        config: &'a RunConfig,
    }
    artifacts.push(("run.json".into(), json(&Record { manifest: &manifest, config: &cfg })));
    Ok(artifacts)
}

/// Writes every artifact through a temporary file in `dir` and renames it into place.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(artifacts.len());
    for (name, body) in artifacts {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(body.as_bytes())?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, target) in staged {
        tmp.persist(&target).map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(())
}

/// Parses, executes and writes; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (kind, common) = cli.command.split();
    match execute(kind, &common).and_then(|a| write_artifacts(&common.out, &a).map(|_| a)) {
        Ok(artifacts) => {
            let mut names = String::new();
            for (name, _) in &artifacts {
                let _ = write!(names, " {name}");
            }
            eprintln!("wrote{names} to {}", common.out.display());
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.network, NetworkConfig::default());
        assert_eq!(RunConfig::from_toml(DEFAULT_CONFIG, &[]).unwrap(), cfg);
    }

    #[test]
    fn overrides_apply_and_unknown_keys_fail() {
        let cfg = RunConfig::from_toml(DEFAULT_CONFIG, &["eta=0".into(), "rule=myopic".into(), "compare_sweep=[1e-3]".into()]).unwrap();
        assert_eq!(cfg.eta, 0.0);
        assert_eq!(cfg.rule, PurchaseRule::Myopic);
        assert_eq!(cfg.compare_sweep, vec![1e-3]);
        assert!(matches!(RunConfig::from_toml(DEFAULT_CONFIG, &["etta=1".into()]), Err(Error::Validation(_))));
        assert!(matches!(RunConfig::from_toml(DEFAULT_CONFIG, &["mu=2".into()]), Err(Error::Validation(_))));
        assert!(matches!(RunConfig::from_toml("lambda_b = [", &[]), Err(Error::Parse { .. })));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InfeasibleLoad { horizon: Some(3), rho_min: 1.2 }), 3);
        assert_eq!(exit_code(&Error::BudgetExceeded { required: 10, budget: 1 }), 4);
        assert_eq!(exit_code(&Error::Parse { line: 1, message: String::new() }), 2);
    }
}
