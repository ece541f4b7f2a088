//! Long-run variance estimation, sandwich variances for the de-biased
//! estimators, and Wald tests.

pub mod chi2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSet;
use crate::debias::{CausalEstimate, Method, SelectionPair};
use crate::error::{Error, Result};
use crate::linalg::{checked_inverse, clip_psd, sym_pinv, symmetrize};

pub use chi2::{chi2_cdf, chi2_sf, ln_gamma};

/// Relative eigenvalue tolerance for repairing numerically negative variances.
pub const PSD_CLIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarianceKind {
    HacLS,
    Hac2S,
    Hc2S,
    ClosedFormLS,
    HacPds,
}

impl VarianceKind {
    /// Short label used in result records.
    pub fn label(self) -> &'static str {
        match self {
            Self::HacLS | Self::Hac2S | Self::HacPds => "hac",
            Self::Hc2S => "hc",
            Self::ClosedFormLS => "closed",
        }
    }
}

/// Variance estimator requested by a caller, independent of the method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceChoice {
    #[default]
    Hac,
    Hc,
    Closed,
}

impl std::str::FromStr for VarianceChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hac" => Ok(Self::Hac),
            "hc" => Ok(Self::Hc),
            "closed" => Ok(Self::Closed),
            other => Err(Error::InvalidInput(format!("unknown variance estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoreSeries {
    pub scores: DMatrix<f64>,
    pub e_hat: DVector<f64>,
}

impl ScoreSeries {
    pub fn from_estimate(est: &CausalEstimate) -> Self {
        let mut scores = est.score_regressors.clone();
        for (i, mut row) in scores.row_iter_mut().enumerate() {
            row *= est.e_hat[i];
        }
        Self {
            scores,
            e_hat: est.e_hat.clone(),
        }
    }

    pub fn n_eff(&self) -> usize {
        self.scores.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub avar: DMatrix<f64>,
    pub kind: VarianceKind,
    pub bandwidth: Option<usize>,
    /// Set when slightly negative eigenvalues were clipped to zero.
    pub clipped: bool,
}

fn finish(avar: DMatrix<f64>, kind: VarianceKind, bandwidth: Option<usize>) -> Result<VarianceEstimate> {
    if avar.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("variance estimate is not finite".into()));
    }
    let (avar, clipped) = clip_psd(&avar, PSD_CLIP_TOL)?;
    Ok(VarianceEstimate {
        avar,
        kind,
        bandwidth,
        clipped,
    })
}

/// Bartlett-kernel long-run variance `Γ_0 + Σ_{k≤B} (1 - k/(B+1))(Γ_k + Γ_k')`.
pub fn newey_west_lrv(scores: &DMatrix<f64>, bandwidth: usize) -> Result<DMatrix<f64>> {
    let n = scores.nrows();
    if bandwidth >= n {
        return Err(Error::InvalidInput(format!(
            "bandwidth {bandwidth} must be smaller than the {n} score rows"
        )));
    }
    let nf = n as f64;
    let mut omega = scores.transpose() * scores / nf;
    for k in 1..=bandwidth {
        let lead = scores.rows(k, n - k);
        let lag = scores.rows(0, n - k);
        let gamma = lag.transpose() * lead / nf;
        let w = 1.0 - k as f64 / (bandwidth as f64 + 1.0);
        omega += (&gamma + gamma.transpose()) * w;
    }
    Ok(symmetrize(&omega))
}

/// HAC sandwich `bread · Ω̂ · bread'` with the estimator's own bread.
pub fn avar_hac(est: &CausalEstimate, scores: &ScoreSeries, bandwidth: usize) -> Result<VarianceEstimate> {
    if scores.n_eff() != est.n_eff || scores.scores.ncols() != est.bread.ncols() {
        return Err(Error::Dimension("score series does not match the estimate".into()));
    }
    let omega = newey_west_lrv(&scores.scores, bandwidth)?;
    let avar = &est.bread * omega * est.bread.transpose();
    let kind = match est.method {
        Method::DeLs => VarianceKind::HacLS,
        Method::De2s => VarianceKind::Hac2S,
        Method::Pds => VarianceKind::HacPds,
    };
    finish(avar, kind, Some(bandwidth))
}

/// Homoskedastic closed form
/// `R_1Σ_W^{-1} [Σ_{j,l<h} e_y'Ψ_jΣ_uΨ_l'e_y Σ_W(l-j)] Σ_W^{-1}R_1'`.
pub fn avar_closed_form_ls(
    cov: &CovarianceSet,
    sel: &SelectionPair,
    effect: usize,
    h: usize,
) -> Result<VarianceEstimate> {
    if h == 0 {
        return Err(Error::InvalidInput("horizon h must be >= 1".into()));
    }
    let dp = sel.dp;
    let rows: Vec<DVector<f64>> = (0..h).map(|j| cov.psi_h(j).row(effect).transpose()).collect();
    let lags: Vec<DMatrix<f64>> = (0..h).map(|r| cov.sigma_w_lag(r as i64)).collect();
    let mut middle = DMatrix::zeros(dp, dp);
    for (j, vj) in rows.iter().enumerate() {
        let left = cov.sigma_u_hat.transpose() * vj;
        for (l, vl) in rows.iter().enumerate() {
            let c = left.dot(vl);
            if l >= j {
                middle += &lags[l - j] * c;
            } else {
                middle += lags[j - l].transpose() * c;
            }
        }
    }
    let sw_inv = checked_inverse(&cov.sigma_w)?;
    let b = sel.r1_matrix() * sw_inv;
    let avar = &b * middle * b.transpose();
    finish(avar, VarianceKind::ClosedFormLS, None)
}

/// `ŝ_t = (ê_{t,h}, ..., ê_{t+p-1,h})' ⊗ û_t` for `t = p ..= n-1-h-(p-1)`.
///
/// `residuals` row `r` holds `û_{r+p}`; `e_full[i]` holds `ê_{i+p-1,h}`.
pub fn hc_scores(residuals: &DMatrix<f64>, e_full: &DVector<f64>, p: usize, h: usize) -> Result<DMatrix<f64>> {
    let d = residuals.ncols();
    let n = residuals.nrows() + p;
    if e_full.len() + h + p - 1 != n {
        return Err(Error::Dimension("LP residuals do not align with VAR residuals".into()));
    }
    let last = (n - 1 - h).checked_sub(p - 1).filter(|&l| l >= p);
    let Some(last) = last else {
        return Err(Error::SampleTooShort(format!(
            "no HC scores for n = {n}, p = {p}, h = {h}"
        )));
    };
    let n_s = last - p + 1;
    Ok(DMatrix::from_fn(n_s, p * d, |i, k| {
        let t = p + i;
        let (lead, j) = (k / d, k % d);
        e_full[t + lead - (p - 1)] * residuals[(t - p, j)]
    }))
}

/// HC variance `R_1Σ_UW^{-1} V̂ar(ŝ_t) Σ_UW^{-T}R_1'` with `V̂ar = n_s^{-1}Σ ŝŝ'`.
pub fn avar_hc_2s(
    residuals: &DMatrix<f64>,
    e_full: &DVector<f64>,
    r1_sigma_uw_inv: &DMatrix<f64>,
    p: usize,
    h: usize,
) -> Result<VarianceEstimate> {
    let s = hc_scores(residuals, e_full, p, h)?;
    let (n_s, dp) = s.shape();
    if n_s <= dp {
        return Err(Error::SampleTooShort(format!("{n_s} HC scores for dimension {dp}")));
    }
    if r1_sigma_uw_inv.ncols() != dp {
        return Err(Error::Dimension("rotation does not match HC score dimension".into()));
    }
    let var = s.transpose() * &s / n_s as f64;
    let avar = r1_sigma_uw_inv * var * r1_sigma_uw_inv.transpose();
    finish(avar, VarianceKind::Hc2S, None)
}

/// Convenience dispatch of [`avar_hc_2s`] for a de-2S estimate.
pub fn avar_hc_for(est: &CausalEstimate, residuals: &DMatrix<f64>) -> Result<VarianceEstimate> {
    if est.method != Method::De2s {
        return Err(Error::InvalidInput(
            "HC variance is defined for the two-stage estimator only".into(),
        ));
    }
    let b = est
        .rotation
        .as_ref()
        .and_then(|r| r.r1_sigma_inv.clone())
        .ok_or(Error::SingularCovariance { rcond: 0.0 })?;
    avar_hc_2s(residuals, &est.e_full, &b, est.target.p, est.target.h)
}

/// Lag-1 sample autocorrelation of each column.
pub fn lag1_autocorrelation(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    DVector::from_fn(m.ncols(), |j, _| {
        let col = m.column(j);
        let mean = col.mean();
        let denom: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        if denom == 0.0 || n < 2 {
            return 0.0;
        }
        let num: f64 = (1..n).map(|t| (col[t] - mean) * (col[t - 1] - mean)).sum();
        num / denom
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub statistic: f64,
    pub df: usize,
    pub pvalue: f64,
    /// Set when the variance was rank deficient and a pseudo-inverse was used.
    pub reduced_rank: bool,
}

/// `n_eff · β̂' AVar^{-1} β̂` against `χ²(p)`.
pub fn wald(beta: &DVector<f64>, var: &VarianceEstimate, n_eff: usize) -> Result<WaldTest> {
    let p = beta.len();
    if var.avar.shape() != (p, p) {
        return Err(Error::Dimension("variance does not match coefficient length".into()));
    }
    if beta.iter().all(|&b| b == 0.0) {
        return Ok(WaldTest {
            statistic: 0.0,
            df: p,
            pvalue: 1.0,
            reduced_rank: false,
        });
    }
    let (inv, rank) = sym_pinv(&var.avar);
    if rank == 0 {
        return Err(Error::SingularCovariance { rcond: 0.0 });
    }
    let statistic = (n_eff as f64 * beta.dot(&(inv * beta))).max(0.0);
    let pvalue = chi2_sf(statistic, rank as f64)?;
    Ok(WaldTest {
        statistic,
        df: rank,
        pvalue,
        reduced_rank: rank < p,
    })
}
