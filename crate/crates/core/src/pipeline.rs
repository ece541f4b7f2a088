//! End-to-end test of one causal pair: demean, fit the VAR once, build the
//! covariances, then estimate and test at each horizon.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSet;
use crate::debias::{estimate_de_2s, estimate_de_ls, estimate_pds, CausalEstimate, Method, SelectionPair, TargetSpec};
use crate::error::{Error, Result};
use crate::inference::{
    avar_closed_form_ls, avar_hac, avar_hc_for, wald, ScoreSeries, VarianceChoice, VarianceEstimate, WaldTest,
};
use crate::regularized::{estimate_var, threshold_fit, Lambda, PenaltyConfig, RegularizedFit};
use crate::var::TimeSeriesPanel;

/// Hard-threshold exponent used when only a threshold level is given.
pub const HARD_THRESHOLD: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub lambda: f64,
    #[serde(default = "hard")]
    pub nu: f64,
}

fn hard() -> f64 {
    HARD_THRESHOLD
}

/// Estimator plus variance estimator, e.g. `de2s-hc`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestMethod {
    pub method: Method,
    pub variance: VarianceChoice,
}

impl TestMethod {
    pub fn new(method: Method, variance: VarianceChoice) -> Result<Self> {
        let ok = matches!(
            (method, variance),
            (_, VarianceChoice::Hac) | (Method::De2s, VarianceChoice::Hc) | (Method::DeLs, VarianceChoice::Closed)
        );
        if !ok {
            return Err(Error::InvalidInput(format!(
                "variance `{}` is not available for method `{}`",
                variance_label(variance),
                method.as_str()
            )));
        }
        Ok(Self { method, variance })
    }

    pub fn label(&self) -> String {
        let m = match self.method {
            Method::DeLs => "de-ls",
            Method::De2s => "de2s",
            Method::Pds => "pds",
        };
        format!("{m}-{}", variance_label(self.variance))
    }
}

fn variance_label(v: VarianceChoice) -> &'static str {
    match v {
        VarianceChoice::Hac => "hac",
        VarianceChoice::Hc => "hc",
        VarianceChoice::Closed => "closed",
    }
}

impl std::str::FromStr for TestMethod {
    type Err = Error;
    /// Accepts `de-ls-hac`, `de2s-hc`, `de-2s-hac`, `pds-hac`, `de-ls-closed`,
    /// or a bare estimator name (HAC variance).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        for (suffix, variance) in [
            ("-hac", VarianceChoice::Hac),
            ("-hc", VarianceChoice::Hc),
            ("-closed", VarianceChoice::Closed),
        ] {
            if let Some(stem) = s.strip_suffix(suffix) {
                return Self::new(stem.parse()?, variance);
            }
        }
        Self::new(s.parse()?, VarianceChoice::Hac)
    }
}

impl std::fmt::Display for TestMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub p: usize,
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub threshold: Option<ThresholdConfig>,
    /// HAC bandwidth; `None` uses `B = h`.
    #[serde(default)]
    pub bandwidth: Option<usize>,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            p: 4,
            penalty: PenaltyConfig::default(),
            threshold: None,
            bandwidth: None,
        }
    }
}

/// One Wald test, in the shape written to result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub cause: String,
    pub effect: String,
    pub h: usize,
    pub method: String,
    pub variance: String,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub wald: f64,
    pub df: usize,
    pub pvalue: f64,
    pub bandwidth: Option<usize>,
}

/// A demeaned panel with its VAR fit and model-implied covariances, shared by
/// every test on that panel.
#[derive(Debug, Clone)]
pub struct FittedSystem {
    pub panel: TimeSeriesPanel,
    pub fit: RegularizedFit,
    pub cov: CovarianceSet,
    pub config: TestConfig,
}

/// Fits the VAR; if the estimate is not stable, refits once with twice the
/// largest selected penalty.
pub fn fit_stable(
    panel: &TimeSeriesPanel,
    p: usize,
    penalty: &PenaltyConfig,
    h_max: usize,
) -> Result<(RegularizedFit, CovarianceSet)> {
    let fit = estimate_var(panel, p, penalty)?;
    match CovarianceSet::from_fit(&fit, h_max) {
        Ok(cov) => Ok((fit, cov)),
        Err(Error::NonStationaryEstimate(rho)) => {
            let top = fit.lambda_used.iter().copied().fold(0.0, f64::max);
            log::warn!(
                "estimated VAR has spectral radius {rho:.4}; refitting with lambda {:.4e}",
                2.0 * top
            );
            let retry = PenaltyConfig {
                lambda: Lambda::Fixed(2.0 * top),
                ..penalty.clone()
            };
            let fit = estimate_var(panel, p, &retry)?;
            let cov = CovarianceSet::from_fit(&fit, h_max)?;
            Ok((fit, cov))
        }
        Err(e) => Err(e),
    }
}

impl FittedSystem {
    pub fn new(panel: &TimeSeriesPanel, config: &TestConfig, h_max: usize) -> Result<Self> {
        config.penalty.validate()?;
        let panel = panel.demeaned();
        let (fit, cov) = fit_stable(&panel, config.p, &config.penalty, h_max)?;
        let (fit, cov) = match config.threshold {
            Some(thr) if thr.lambda > 0.0 => {
                let fit = threshold_fit(&fit, &panel, thr.lambda, thr.nu)?;
                let cov = CovarianceSet::from_fit(&fit, h_max)?;
                (fit, cov)
            }
            _ => (fit, cov),
        };
        Ok(Self {
            panel,
            fit,
            cov,
            config: config.clone(),
        })
    }

    pub fn estimate(&self, target: &TargetSpec, method: Method) -> Result<CausalEstimate> {
        match method {
            Method::DeLs => estimate_de_ls(&self.panel, &self.fit, &self.cov, target),
            Method::De2s => estimate_de_2s(&self.panel, &self.fit, &self.cov, target),
            Method::Pds => estimate_pds(&self.panel, target, &self.config.penalty),
        }
    }

    pub fn variance(&self, est: &CausalEstimate, variance: VarianceChoice) -> Result<VarianceEstimate> {
        let t = est.target;
        match variance {
            VarianceChoice::Hac => {
                let bandwidth = self.config.bandwidth.unwrap_or(t.h);
                avar_hac(est, &ScoreSeries::from_estimate(est), bandwidth)
            }
            VarianceChoice::Hc => avar_hc_for(est, &self.fit.residuals),
            VarianceChoice::Closed => {
                let sel = SelectionPair::new(self.panel.d(), t.p, t.cause);
                avar_closed_form_ls(&self.cov, &sel, t.effect, t.h)
            }
        }
    }

    /// Estimate, variance and Wald test for one pair at one horizon.
    pub fn test(
        &self,
        cause: usize,
        effect: usize,
        h: usize,
        method: TestMethod,
    ) -> Result<(CausalEstimate, VarianceEstimate, WaldTest)> {
        let target = TargetSpec::new(cause, effect, h, self.config.p);
        target.validate(self.panel.d())?;
        let est = self.estimate(&target, method.method)?;
        let var = self.variance(&est, method.variance)?;
        let test = wald(est.beta(), &var, est.n_eff)?;
        Ok((est, var, test))
    }

    pub fn record(&self, cause: usize, effect: usize, h: usize, method: TestMethod) -> Result<TestRecord> {
        let (est, var, test) = self.test(cause, effect, h, method)?;
        let names = self.panel.names();
        let n = est.n_eff as f64;
        let se: DVector<f64> = var.avar.diagonal().map(|v| (v / n).sqrt());
        Ok(TestRecord {
            cause: names[cause].clone(),
            effect: names[effect].clone(),
            h,
            method: est.method.as_str().to_string(),
            variance: var.kind.label().to_string(),
            beta: est.beta().iter().copied().collect(),
            se: se.iter().copied().collect(),
            wald: test.statistic,
            df: test.df,
            pvalue: test.pvalue,
            bandwidth: var.bandwidth,
        })
    }
}

/// Tests `cause → effect` at each horizon on a single shared fit.
pub fn run_test(
    panel: &TimeSeriesPanel,
    cause: usize,
    effect: usize,
    horizons: &[usize],
    method: TestMethod,
    config: &TestConfig,
) -> Result<Vec<TestRecord>> {
    let h_max = horizons
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::InvalidInput("no horizons given".into()))?;
    let system = FittedSystem::new(panel, config, h_max)?;
    horizons
        .iter()
        .map(|&h| system.record(cause, effect, h, method))
        .collect()
}
