//! Size experiments: rejection frequencies of the Wald test for a pair with
//! no causal chain, over replications simulated from a known design.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSet;
use crate::debias::{extract_beta1h, SelectionPair, TargetSpec};
use crate::error::{Error, Result};
use crate::inference::{avar_closed_form_ls, wald, VarianceEstimate};
use crate::pipeline::{FittedSystem, TestConfig, TestMethod};
use crate::regularized::PenaltyConfig;
use crate::seed::mix_seed;
use crate::var::{make_dgp, simulate, DgpSpec, VarModel, DEFAULT_BURN_IN};

/// Largest share of failed replications tolerated in any cell.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

/// A tested procedure, or the exact-pivot control that draws the estimate
/// from its true asymptotic distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum McMethod {
    Test(TestMethod),
    Oracle,
}

impl McMethod {
    pub fn label(&self) -> String {
        match self {
            Self::Test(m) => m.label(),
            Self::Oracle => "oracle".to_string(),
        }
    }
}

impl std::str::FromStr for McMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("oracle") {
            Ok(Self::Oracle)
        } else {
            s.parse().map(Self::Test)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dgp: DgpSpec,
    pub n: usize,
    #[serde(default = "default_p")]
    pub p: usize,
    pub horizons: Vec<usize>,
    pub methods: Vec<McMethod>,
    pub reps: usize,
    #[serde(default = "default_level")]
    pub nominal_level: f64,
    pub base_seed: u64,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub workers: usize,
    /// Null pair; defaults to the first series causing the last one.
    #[serde(default)]
    pub cause: Option<usize>,
    #[serde(default)]
    pub effect: Option<usize>,
    /// Largest true `|β_{1,h}|` accepted for the null pair.
    #[serde(default = "default_null_tolerance")]
    pub null_tolerance: f64,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub bandwidth: Option<usize>,
}

fn default_p() -> usize {
    2
}

fn default_level() -> f64 {
    0.05
}

fn default_null_tolerance() -> f64 {
    1e-6
}

impl McConfig {
    pub fn new(
        dgp: DgpSpec,
        n: usize,
        horizons: Vec<usize>,
        methods: Vec<McMethod>,
        reps: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            dgp,
            n,
            p: default_p(),
            horizons,
            methods,
            reps,
            nominal_level: default_level(),
            base_seed,
            workers: 0,
            cause: None,
            effect: None,
            null_tolerance: default_null_tolerance(),
            penalty: PenaltyConfig::default(),
            bandwidth: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be >= 1".into()));
        }
        if !(self.nominal_level > 0.0 && self.nominal_level < 1.0) {
            return Err(Error::InvalidInput(format!(
                "nominal level must lie in (0, 1), got {}",
                self.nominal_level
            )));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidInput("horizons must be non-empty and >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods given".into()));
        }
        if self.dgp.d < 2 {
            return Err(Error::InvalidInput("size experiments need d >= 2".into()));
        }
        self.penalty.validate()
    }

    fn pair(&self) -> (usize, usize) {
        (self.cause.unwrap_or(0), self.effect.unwrap_or(self.dgp.d - 1))
    }
}

/// Rejection frequency of one method at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub method: String,
    pub h: usize,
    pub n: usize,
    pub rejections: usize,
    pub valid: usize,
    pub failures: usize,
    pub rate: f64,
    pub stderr: f64,
    /// p-values in replication order; `None` marks a failed replication.
    pub pvalues: Vec<Option<f64>>,
}

impl McCell {
    /// Rejection rate at another nominal level, from the stored p-values.
    pub fn rate_at(&self, level: f64) -> f64 {
        let valid: Vec<f64> = self.pvalues.iter().flatten().copied().collect();
        if valid.is_empty() {
            return f64::NAN;
        }
        valid.iter().filter(|&&p| p < level).count() as f64 / valid.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub n: usize,
    pub reps: usize,
    pub nominal_level: f64,
    pub cause: usize,
    pub effect: usize,
    /// Largest true `|β_{1,h}|` of the null pair over the horizons.
    pub max_true_beta: f64,
    pub cells: Vec<McCell>,
}

impl McResult {
    pub fn cell(&self, method: &str, h: usize) -> Option<&McCell> {
        self.cells.iter().find(|c| c.method == method && c.h == h)
    }
}

/// Checks that the null pair has no causal chain at any tested horizon and
/// returns the largest true coefficient magnitude.
pub fn verify_null_pair(model: &VarModel, cause: usize, effect: usize, horizons: &[usize], tol: f64) -> Result<f64> {
    let companion = model.companion();
    let sel = SelectionPair::new(model.d(), model.p(), cause);
    let mut largest = 0.0_f64;
    for &h in horizons {
        let target = TargetSpec::new(cause, effect, h, model.p());
        let value = extract_beta1h(companion.matrix(), &target, &sel).amax();
        if value > tol {
            return Err(Error::InvalidNullPair {
                cause,
                effect,
                h,
                value,
            });
        }
        largest = largest.max(value);
    }
    Ok(largest)
}

struct OracleDraw {
    chol: DMatrix<f64>,
    var: VarianceEstimate,
    n_eff: usize,
}

fn oracle_inputs(model: &VarModel, cfg: &McConfig, cause: usize, effect: usize) -> Result<Vec<OracleDraw>> {
    let h_max = cfg.horizons.iter().copied().max().unwrap_or(1);
    let cov = CovarianceSet::from_model(model, h_max)?;
    let sel = SelectionPair::new(model.d(), model.p(), cause);
    cfg.horizons
        .iter()
        .map(|&h| {
            let var = avar_closed_form_ls(&cov, &sel, effect, h)?;
            let chol = var.avar.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.l();
            let n_eff = cfg.n - cfg.p - h + 1;
            Ok(OracleDraw { chol, var, n_eff })
        })
        .collect()
}

/// p-values for every (method, horizon) cell of one replication.
fn replicate(
    model: &VarModel,
    cfg: &McConfig,
    oracle: &[OracleDraw],
    rep: usize,
    cause: usize,
    effect: usize,
) -> Vec<Option<f64>> {
    let seed = mix_seed(cfg.base_seed, rep as u64);
    let h_max = cfg.horizons.iter().copied().max().unwrap_or(1);
    let test_cfg = TestConfig {
        p: cfg.p,
        penalty: cfg.penalty.clone(),
        threshold: None,
        bandwidth: cfg.bandwidth,
    };
    let needs_fit = cfg.methods.iter().any(|m| matches!(m, McMethod::Test(_)));
    let system = if needs_fit {
        simulate(model, cfg.n, DEFAULT_BURN_IN, seed)
            .and_then(|panel| FittedSystem::new(&panel, &test_cfg, h_max))
            .map_err(|e| log::debug!("replication {rep}: {e}"))
            .ok()
    } else {
        None
    };
    let mut out = Vec::with_capacity(cfg.methods.len() * cfg.horizons.len());
    for method in &cfg.methods {
        for (k, &h) in cfg.horizons.iter().enumerate() {
            let pvalue = match method {
                McMethod::Test(m) => system.as_ref().and_then(|s| {
                    s.test(cause, effect, h, *m)
                        .map(|(_, _, w)| w.pvalue)
                        .map_err(|e| log::debug!("replication {rep}, {m} h={h}: {e}"))
                        .ok()
                }),
                McMethod::Oracle => {
                    let draw = &oracle[k];
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, h as u64));
                    let z = DVector::from_fn(cfg.p, |_, _| StandardNormal.sample(&mut rng));
                    let deviation = &draw.chol * z / (draw.n_eff as f64).sqrt();
                    wald(&deviation, &draw.var, draw.n_eff).map(|w| w.pvalue).ok()
                }
            };
            out.push(pvalue);
        }
    }
    out
}

/// Runs the experiment. Replications use seeds derived from
/// `(base_seed, rep)`, so the result does not depend on `workers`.
pub fn run_size_experiment(cfg: &McConfig) -> Result<McResult> {
    cfg.validate()?;
    let model = make_dgp(&cfg.dgp)?;
    let (cause, effect) = cfg.pair();
    if cause >= cfg.dgp.d || effect >= cfg.dgp.d {
        return Err(Error::InvalidInput(format!(
            "null pair {cause}->{effect} outside d = {}",
            cfg.dgp.d
        )));
    }
    let max_true_beta = verify_null_pair(&model, cause, effect, &cfg.horizons, cfg.null_tolerance)?;
    let oracle = if cfg.methods.contains(&McMethod::Oracle) {
        oracle_inputs(&model, cfg, cause, effect)?
    } else {
        Vec::new()
    };
    let run = || -> Vec<Vec<Option<f64>>> {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| replicate(&model, cfg, &oracle, rep, cause, effect))
            .collect()
    };
    let per_rep = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?
            .install(run)
    } else {
        run()
    };

    let mut cells = Vec::new();
    let per_method = cfg.horizons.len();
    for (mi, method) in cfg.methods.iter().enumerate() {
        for (hi, &h) in cfg.horizons.iter().enumerate() {
            let idx = mi * per_method + hi;
            let pvalues: Vec<Option<f64>> = per_rep.iter().map(|r| r[idx]).collect();
            let failures = pvalues.iter().filter(|p| p.is_none()).count();
            if failures as f64 > MAX_FAILURE_SHARE * cfg.reps as f64 {
                return Err(Error::TooManyFailures {
                    failed: failures,
                    reps: cfg.reps,
                });
            }
            let valid = cfg.reps - failures;
            let rejections = pvalues.iter().flatten().filter(|&&p| p < cfg.nominal_level).count();
            let rate = if valid > 0 {
                rejections as f64 / valid as f64
            } else {
                f64::NAN
            };
            let stderr = (rate * (1.0 - rate) / valid.max(1) as f64).sqrt();
            if failures > 0 {
                log::warn!(
                    "{} h={h}: {failures} of {} replications failed",
                    method.label(),
                    cfg.reps
                );
            }
            cells.push(McCell {
                method: method.label(),
                h,
                n: cfg.n,
                rejections,
                valid,
                failures,
                rate,
                stderr,
                pvalues,
            });
        }
    }
    Ok(McResult {
        n: cfg.n,
        reps: cfg.reps,
        nominal_level: cfg.nominal_level,
        cause,
        effect,
        max_true_beta,
        cells,
    })
}

/// CSV `method,h,n,rate,stderr`, rows sorted by `(method, n, h)`.
pub fn summarize(results: &[McResult]) -> Result<String> {
    let mut rows: Vec<&McCell> = results.iter().flat_map(|r| r.cells.iter()).collect();
    rows.sort_by(|a, b| (&a.method, a.n, a.h).cmp(&(&b.method, b.n, b.h)));
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["method", "h", "n", "rate", "stderr"])?;
    for c in rows {
        writer.write_record([
            c.method.clone(),
            c.h.to_string(),
            c.n.to_string(),
            c.rate.to_string(),
            c.stderr.to_string(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var::DgpKind;

    fn small(methods: &str, reps: usize) -> McConfig {
        let methods = methods.split(',').map(|m| m.parse().unwrap()).collect();
        McConfig::new(
            DgpSpec::new(DgpKind::BlockDiagonal, 10, 1),
            150,
            vec![1, 2],
            methods,
            reps,
            3,
        )
    }

    #[test]
    fn single_rep_rate_is_binary() {
        let res = run_size_experiment(&small("de2s-hc", 1)).unwrap();
        for c in &res.cells {
            assert!(c.rate == 0.0 || c.rate == 1.0);
        }
    }

    #[test]
    fn stderr_is_binomial() {
        let res = run_size_experiment(&small("de-ls-hac,oracle", 20)).unwrap();
        for c in &res.cells {
            assert!((c.stderr - (c.rate * (1.0 - c.rate) / c.valid as f64).sqrt()).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&c.rate));
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut a = small("de2s-hac,pds-hac", 6);
        a.workers = 1;
        let mut b = a.clone();
        b.workers = 3;
        assert_eq!(run_size_experiment(&a).unwrap(), run_size_experiment(&b).unwrap());
    }

    #[test]
    fn non_null_pair_is_refused() {
        let mut cfg = small("de2s-hc", 2);
        cfg.cause = Some(0);
        cfg.effect = Some(1);
        cfg.dgp = DgpSpec::new(DgpKind::Tridiagonal, 10, 0);
        assert!(matches!(run_size_experiment(&cfg), Err(Error::InvalidNullPair { .. })));
    }

    #[test]
    fn summary_ordering() {
        assert_eq!(summarize(&[]).unwrap(), "method,h,n,rate,stderr\n");
        let mut a = run_size_experiment(&small("oracle,de-ls-hac", 2)).unwrap();
        let text = summarize(std::slice::from_ref(&a)).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
        a.n = 300;
        for c in &mut a.cells {
            c.n = 300;
        }
        let b = run_size_experiment(&small("oracle,de-ls-hac", 2)).unwrap();
        let text = summarize(&[a, b]).unwrap();
        let keys: Vec<(String, usize, usize)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0].to_string(), f[2].parse().unwrap(), f[1].parse().unwrap())
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(keys[0], ("de-ls-hac".to_string(), 150, 1));
    }
}
