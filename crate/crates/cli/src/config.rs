use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use hdgc_core::montecarlo::McMethod;
use hdgc_core::pipeline::TestMethod;

/// Horizon list written as `1,3,6`, `1:4` or a mix such as `1:3,6`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Horizons(pub Vec<usize>);

impl FromStr for Horizons {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let parse = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("`{x}` is not a horizon"));
            match part.split_once(':') {
                Some((a, b)) => {
                    let (a, b) = (parse(a)?, parse(b)?);
                    if a > b {
                        return Err(format!("empty range `{part}`"));
                    }
                    out.extend(a..=b);
                }
                None => out.push(parse(part)?),
            }
        }
        if out.is_empty() {
            return Err("no horizons given".into());
        }
        if out.contains(&0) {
            return Err("horizons must be >= 1".into());
        }
        Ok(Self(out))
    }
}

impl fmt::Display for Horizons {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Comma-separated Monte Carlo methods, e.g. `de2s-hc,de-ls-hac,oracle`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MethodList(pub Vec<String>);

impl FromStr for MethodList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let items: Vec<String> = s
            .split(',')
            .map(|m| m.trim().to_string())
            .filter(|m| !m.is_empty())
            .collect();
        if items.is_empty() {
            return Err("no methods given".into());
        }
        for m in &items {
            m.parse::<McMethod>().map_err(|e| e.to_string())?;
        }
        Ok(Self(items))
    }
}

fn test_method(s: &str) -> Result<String, String> {
    s.parse::<TestMethod>()
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}

fn lambda(s: &str) -> Result<String, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok("auto".into());
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(s.to_string()),
        _ => Err(format!("`{s}` is neither `auto` nor a non-negative number")),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct PenaltyArgs {
    /// Penalty family [default: adalasso]
    #[arg(long, value_parser = ["lasso", "adalasso", "elnet"])]
    pub penalty: Option<String>,
    /// Penalty level, a number or `auto` [default: auto]
    #[arg(long, value_parser = lambda)]
    pub lambda: Option<String>,
    /// l1 share of the elastic net penalty [default: 0.5]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Exponent of the adaptive penalty loadings [default: 1]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Hard-threshold level applied to the fitted slopes
    #[arg(long)]
    pub thr: Option<f64>,
    /// Information criterion for penalty selection [default: bic]
    #[arg(long, value_parser = ["bic", "aic"])]
    pub ic: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Design: 1 banded, 2 block diagonal, 3 random sparse [default: 1]
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3), conflicts_with = "model")]
    pub dgp: Option<u8>,
    /// VAR model JSON to simulate from instead of a built-in design
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of series [default: 20]
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of observations [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed of the innovations [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the random design draw [default: 0]
    #[arg(long)]
    pub dgp_seed: Option<u64>,
    /// Discarded initial observations [default: 200]
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Output CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the generating model as JSON
    #[arg(long)]
    pub save_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Panel CSV with a header of series names
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// VAR order [default: 4]
    #[arg(long)]
    pub p: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub penalty: PenaltyArgs,
    /// Directory for sigma_u.csv, sigma_w.csv and sigma_uw.csv
    #[arg(long)]
    pub dump_cov: Option<PathBuf>,
    /// Write the fitted model as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct TestArgs {
    /// Panel CSV with a header of series names
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Name of the causing series
    #[arg(long)]
    pub cause: Option<String>,
    /// Name of the affected series
    #[arg(long)]
    pub effect: Option<String>,
    /// Horizons, e.g. 1,3,6 or 1:12 [default: 1]
    #[arg(long)]
    pub horizons: Option<Horizons>,
    /// Estimator, optionally with variance suffix: de-ls, de-2s, pds, de2s-hc, ... [default: de2s-hc]
    #[arg(long, value_parser = test_method)]
    pub method: Option<String>,
    /// Variance estimator, overriding any suffix of --method
    #[arg(long, value_parser = ["hac", "hc", "closed"])]
    pub variance: Option<String>,
    /// HAC bandwidth [default: h]
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// VAR order [default: 4]
    #[arg(long)]
    pub p: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub penalty: PenaltyArgs,
    /// Also write the JSON records to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct McArgs {
    /// Design: 1 banded, 2 block diagonal, 3 random sparse [default: 1]
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub dgp: Option<u8>,
    /// Number of series [default: 20]
    #[arg(long)]
    pub d: Option<usize>,
    /// Observations per replication [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed of the random design draw [default: 0]
    #[arg(long)]
    pub dgp_seed: Option<u64>,
    /// Horizons, e.g. 1,3,6 or 1:12 [default: 1]
    #[arg(long)]
    pub horizons: Option<Horizons>,
    /// Methods, e.g. de2s-hc,de-ls-hac,pds-hac,oracle [default: de2s-hc,de-ls-hac]
    #[arg(long)]
    pub methods: Option<MethodList>,
    /// Replications [default: 100]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed of the replications [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores [default: 0]
    #[arg(long)]
    pub workers: Option<usize>,
    /// VAR order used by the tests [default: 2]
    #[arg(long)]
    pub p: Option<usize>,
    /// Nominal level [default: 0.05]
    #[arg(long)]
    pub level: Option<f64>,
    /// Causing series of the null pair [default: w1]
    #[arg(long)]
    pub cause: Option<String>,
    /// Affected series of the null pair [default: last series]
    #[arg(long)]
    pub effect: Option<String>,
    /// Largest true coefficient accepted for the null pair [default: 1e-6]
    #[arg(long)]
    pub null_tol: Option<f64>,
    /// HAC bandwidth [default: h]
    #[arg(long)]
    pub bandwidth: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub penalty: PenaltyArgs,
    /// Summary CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full results with per-replication p-values as JSON
    #[arg(long)]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct NetworkArgs {
    /// Panel CSV with a header of series names
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// VAR order [default: 4]
    #[arg(long)]
    pub p: Option<usize>,
    /// Horizons, e.g. 1,3,9,12 [default: 1]
    #[arg(long)]
    pub horizons: Option<Horizons>,
    /// Estimator, optionally with variance suffix [default: de2s-hc]
    #[arg(long, value_parser = test_method)]
    pub method: Option<String>,
    /// Variance estimator, overriding any suffix of --method
    #[arg(long, value_parser = ["hac", "hc", "closed"])]
    pub variance: Option<String>,
    /// HAC bandwidth [default: h]
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Worker threads, 0 for all cores [default: 0]
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub penalty: PenaltyArgs,
    /// Output directory for heatmaps and network.json
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Simulate a panel from a built-in design or a model file
    Simulate(SimulateArgs),
    /// Fit a penalised VAR to a panel
    Fit(FitArgs),
    /// Test one causal pair at one or more horizons
    Test(TestArgs),
    /// Size experiment over simulated replications
    Mc(McArgs),
    /// Test every ordered pair and export heatmaps
    Network(NetworkArgs),
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(
    name = "hdgc",
    version,
    about = "Multi-horizon Granger causality tests for high-dimensional VARs"
)]
pub struct RunConfig {
    /// JSON config file; flags given on the command line take precedence
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Log filter for stderr, e.g. warn, info, debug [default: warn]
    #[arg(long, global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_level: Option<String>,
    #[command(subcommand)]
    #[serde(flatten)]
    pub command: Command,
}

impl RunConfig {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn name(&self) -> &'static str {
        match self.command {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Test(_) => "test",
            Command::Mc(_) => "mc",
            Command::Network(_) => "network",
        }
    }

    /// Fills every option not given on the command line from `file`.
    pub fn merge_under(&self, file: &str) -> Result<Self, String> {
        let mut base: Value = serde_json::from_str(file).map_err(|e| format!("config file: {e}"))?;
        let Some(base_obj) = base.as_object_mut() else {
            return Err("config file must hold a JSON object".into());
        };
        match base_obj.get("command").and_then(Value::as_str) {
            Some(c) if c != self.name() => {
                return Err(format!("config file is for `{c}`, not `{}`", self.name()));
            }
            _ => {}
        }
        let flags = serde_json::to_value(self).map_err(|e| e.to_string())?;
        for (key, value) in flags.as_object().into_iter().flatten() {
            if !value.is_null() {
                base_obj.insert(key.clone(), value.clone());
            }
        }
        serde_json::from_value(base).map_err(|e| format!("config file: {e}"))
    }
}
