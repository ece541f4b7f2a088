//! De-biased least-squares and two-stage estimators of the local-projection
//! coefficient `β_{1,h}` on `W_{1,t} = (x_t, ..., x_{t-p+1})'`, plus a
//! post-double-selection LASSO baseline.
//!
//! Time indices are 0-based. The local projection `y_{t+h} = β_h' W_t + e_{t,h}`
//! is formed for `t = p-1 ..= n-1-h`. The two-stage estimator also needs the
//! stacked residuals `Û_t = (û_t', ..., û_{t-p+1}')'`, which exist from
//! `t = 2p-1` on.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSet;
use crate::error::{Error, Result};
use crate::linalg::{checked_inverse, matrix_power};
use crate::regularized::{fit_row, Lambda, PenaltyConfig, PenaltyMethod, RegularizedFit};
use crate::var::TimeSeriesPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub cause: usize,
    pub effect: usize,
    pub h: usize,
    pub p: usize,
}

impl TargetSpec {
    pub fn new(cause: usize, effect: usize, h: usize, p: usize) -> Self {
        Self { cause, effect, h, p }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.cause >= d || self.effect >= d {
            return Err(Error::InvalidInput(format!(
                "series index out of range (cause {}, effect {}, d {d})",
                self.cause, self.effect
            )));
        }
        if self.h == 0 {
            return Err(Error::InvalidInput("horizon h must be >= 1".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidInput("lag order p must be >= 1".into()));
        }
        Ok(())
    }
}

/// Coordinates of `W_{1,t}` (the cause's lags) and of the controls `W_{2,t}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionPair {
    pub r1: Vec<usize>,
    pub r2: Vec<usize>,
    pub dp: usize,
}

impl SelectionPair {
    pub fn new(d: usize, p: usize, cause: usize) -> Self {
        let dp = d * p;
        let r1: Vec<usize> = (0..p).map(|l| l * d + cause).collect();
        let r2 = (0..dp).filter(|k| k % d != cause).collect();
        Self { r1, r2, dp }
    }

    fn selector(rows: &[usize], dp: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows.len(), dp);
        for (i, &k) in rows.iter().enumerate() {
            m[(i, k)] = 1.0;
        }
        m
    }

    pub fn r1_matrix(&self) -> DMatrix<f64> {
        Self::selector(&self.r1, self.dp)
    }

    pub fn r2_matrix(&self) -> DMatrix<f64> {
        Self::selector(&self.r2, self.dp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "de-ls")]
    DeLs,
    #[serde(rename = "de-2s")]
    De2s,
    #[serde(rename = "pds")]
    Pds,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DeLs => "de-ls",
            Self::De2s => "de-2s",
            Self::Pds => "pds",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "de-ls" | "dels" | "ls" => Ok(Self::DeLs),
            "de-2s" | "de2s" | "2s" => Ok(Self::De2s),
            "pds" => Ok(Self::Pds),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

/// `(R_1 Σ^{-1} R_1')^{-1} R_1 Σ^{-1}` together with `R_1 Σ^{-1}`.
#[derive(Debug, Clone)]
pub struct Rotation {
    pub matrix: DMatrix<f64>,
    /// `R_1 Σ^{-1}`; `None` when there are no controls and `Σ` is singular.
    pub r1_sigma_inv: Option<DMatrix<f64>>,
}

/// Rotation that maps a stacked vector onto the component of its `R_1`
/// block orthogonal to the `R_2` block under the second-moment matrix `sigma`.
/// `sigma` need not be symmetric.
pub fn rotation_matrix(sigma: &DMatrix<f64>, sel: &SelectionPair) -> Result<Rotation> {
    if sigma.shape() != (sel.dp, sel.dp) {
        return Err(Error::Dimension(format!(
            "covariance is {}x{}, selection expects {}",
            sigma.nrows(),
            sigma.ncols(),
            sel.dp
        )));
    }
    let p = sel.r1.len();
    let inv = match checked_inverse(sigma) {
        Ok(inv) => inv,
        Err(_) if sel.r2.is_empty() => {
            return Ok(Rotation {
                matrix: DMatrix::identity(p, p),
                r1_sigma_inv: None,
            })
        }
        Err(e) => return Err(e),
    };
    let b = sel.r1_matrix() * &inv;
    if sel.r2.is_empty() {
        return Ok(Rotation {
            matrix: DMatrix::identity(p, p),
            r1_sigma_inv: Some(b),
        });
    }
    let k = DMatrix::from_fn(p, p, |i, j| b[(i, sel.r1[j])]);
    let k_inv = checked_inverse(&k)?;
    Ok(Rotation {
        matrix: &k_inv * &b,
        r1_sigma_inv: Some(b),
    })
}

/// Row `effect` of `J 𝐀^h`: the full local-projection coefficient `β_h`.
pub fn lp_coefficient(companion: &DMatrix<f64>, effect: usize, h: usize) -> DVector<f64> {
    matrix_power(companion, h).row(effect).transpose()
}

/// `β_{2,h}`: the `R_2` coordinates of the effect row of `J 𝐀^h`.
pub fn extract_beta2h(companion: &DMatrix<f64>, target: &TargetSpec, sel: &SelectionPair) -> DVector<f64> {
    let beta = lp_coefficient(companion, target.effect, target.h);
    DVector::from_iterator(sel.r2.len(), sel.r2.iter().map(|&k| beta[k]))
}

/// `β_{1,h}`: the cause-lag coordinates of the effect row of `J 𝐀^h`.
pub fn extract_beta1h(companion: &DMatrix<f64>, target: &TargetSpec, sel: &SelectionPair) -> DVector<f64> {
    let beta = lp_coefficient(companion, target.effect, target.h);
    DVector::from_iterator(sel.r1.len(), sel.r1.iter().map(|&k| beta[k]))
}

#[derive(Debug, Clone)]
pub struct CausalEstimate {
    pub method: Method,
    pub target: TargetSpec,
    pub beta_raw: DVector<f64>,
    pub beta_debiased: DVector<f64>,
    pub bias_term: DVector<f64>,
    pub n_eff: usize,
    /// `Σ_t Ŵ⊥_{1,t} W_{1,t}'` or `Σ_t Û⊥_{1,t} W_{1,t}'`.
    pub rotated_gram: DMatrix<f64>,
    /// First time index of the estimation rows.
    pub first_t: usize,
    /// Regressors whose products with `ê_{t,h}` form the score (`n_eff x k`).
    pub score_regressors: DMatrix<f64>,
    /// Sandwich bread (`p x k`) mapping score variance to the variance of `√n β̂`.
    pub bread: DMatrix<f64>,
    /// `ê_{t,h}` over the estimation rows.
    pub e_hat: DVector<f64>,
    /// `ê_{t,h}` for every `t = p-1 ..= n-1-h`.
    pub e_full: DVector<f64>,
    pub rotation: Option<Rotation>,
}

impl CausalEstimate {
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta_debiased
    }
}

struct Aligned {
    first_t: usize,
    last_t: usize,
}

impl Aligned {
    fn new(first_t: usize, n: usize, h: usize, p: usize) -> Result<Self> {
        if n < first_t + h + p + 2 {
            return Err(Error::SampleTooShort(format!(
                "n = {n} leaves too few rows for p = {p}, h = {h}"
            )));
        }
        Ok(Self {
            first_t,
            last_t: n - 1 - h,
        })
    }

    fn count(&self) -> usize {
        self.last_t - self.first_t + 1
    }
}

/// `ê_{t,h} = y_{t+h} - β_h' W_t` for `t = p-1 ..= n-1-h`.
pub fn lp_residuals(panel: &TimeSeriesPanel, beta_h: &DVector<f64>, effect: usize, h: usize, p: usize) -> DVector<f64> {
    let n = panel.n();
    let data = panel.data();
    DVector::from_fn(n - h - (p - 1), |i, _| {
        let t = i + p - 1;
        data[(t + h, effect)] - beta_h.dot(&panel.stacked_lags(t, p))
    })
}

fn stacked_residuals(residuals: &DMatrix<f64>, t: usize, p: usize) -> DVector<f64> {
    let d = residuals.ncols();
    // residual row r holds û_{r+p}
    DVector::from_fn(d * p, |k, _| residuals[(t - k / d - p, k % d)])
}

fn solve_gram(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let inv = checked_inverse(gram).map_err(|_| Error::DegenerateDesign("rotated Gram matrix is singular".into()))?;
    Ok(inv * rhs)
}

/// Rotated regressors `Ŵ⊥_{1,t}` over `t = p-1 ..= n-1-h`.
pub fn rotated_regressor_ls(
    sigma_w: &DMatrix<f64>,
    sel: &SelectionPair,
    panel: &TimeSeriesPanel,
    p: usize,
    h: usize,
) -> Result<(DMatrix<f64>, Rotation)> {
    let rows = Aligned::new(p - 1, panel.n(), h, p)?;
    let rot = rotation_matrix(sigma_w, sel)?;
    let out = DMatrix::from_fn(rows.count(), sel.r1.len(), |_, _| 0.0);
    let mut out = out;
    for (i, t) in (rows.first_t..=rows.last_t).enumerate() {
        let v = &rot.matrix * panel.stacked_lags(t, p);
        out.row_mut(i).copy_from(&v.transpose());
    }
    Ok((out, rot))
}

/// Rotated instruments `Û⊥_{1,t}` over `t = 2p-1 ..= n-1-h`.
pub fn rotated_instrument_2s(
    sigma_uw: &DMatrix<f64>,
    sel: &SelectionPair,
    residuals: &DMatrix<f64>,
    p: usize,
    h: usize,
) -> Result<(DMatrix<f64>, Rotation)> {
    let n = residuals.nrows() + p;
    let rows = Aligned::new(2 * p - 1, n, h, p)?;
    let rot = rotation_matrix(sigma_uw, sel)?;
    let mut out = DMatrix::zeros(rows.count(), sel.r1.len());
    for (i, t) in (rows.first_t..=rows.last_t).enumerate() {
        let v = &rot.matrix * stacked_residuals(residuals, t, p);
        out.row_mut(i).copy_from(&v.transpose());
    }
    Ok((out, rot))
}

/// Steps 3-4 shared by both estimators, given the rotated series.
#[allow(clippy::too_many_arguments)]
fn debiased_from_rotated(
    method: Method,
    panel: &TimeSeriesPanel,
    target: &TargetSpec,
    sel: &SelectionPair,
    rotated: DMatrix<f64>,
    rot: Rotation,
    first_t: usize,
    beta_h: &DVector<f64>,
) -> Result<CausalEstimate> {
    let (p, h, effect) = (target.p, target.h, target.effect);
    let data = panel.data();
    let beta2 = DVector::from_iterator(sel.r2.len(), sel.r2.iter().map(|&k| beta_h[k]));
    let k = sel.r1.len();
    let mut gram = DMatrix::zeros(k, k);
    let mut gy = DVector::zeros(k);
    let mut g2 = DVector::zeros(k);
    for i in 0..rotated.nrows() {
        let t = first_t + i;
        let w = panel.stacked_lags(t, p);
        let r = rotated.row(i).transpose();
        let w1 = DVector::from_iterator(k, sel.r1.iter().map(|&c| w[c]));
        let control: f64 = sel.r2.iter().zip(beta2.iter()).map(|(&c, b)| w[c] * b).sum();
        gram += &r * w1.transpose();
        gy += &r * data[(t + h, effect)];
        g2 += &r * control;
    }
    let beta_raw = solve_gram(&gram, &gy)?;
    let bias_term = solve_gram(&gram, &g2)?;
    let beta_debiased = &beta_raw - &bias_term;
    let n_eff = rotated.nrows();
    let e_full = lp_residuals(panel, beta_h, effect, h, p);
    let offset = first_t - (p - 1);
    let e_hat = e_full.rows(offset, n_eff).into_owned();
    let bread = checked_inverse(&(&gram / n_eff as f64))
        .map_err(|_| Error::DegenerateDesign("rotated Gram matrix is singular".into()))?;
    Ok(CausalEstimate {
        method,
        target: *target,
        beta_raw,
        beta_debiased,
        bias_term,
        n_eff,
        rotated_gram: gram,
        first_t,
        score_regressors: rotated,
        bread,
        e_hat,
        e_full,
        rotation: Some(rot),
    })
}

/// De-biased LS with an explicit second-moment matrix for the rotation.
/// Passing the model-implied `Σ̂_W` gives the estimator proper; passing the
/// sample second moment reproduces full-regression OLS.
pub fn estimate_de_ls_with_sigma(
    panel: &TimeSeriesPanel,
    sigma_w: &DMatrix<f64>,
    beta_h: &DVector<f64>,
    target: &TargetSpec,
) -> Result<CausalEstimate> {
    target.validate(panel.d())?;
    let sel = SelectionPair::new(panel.d(), target.p, target.cause);
    let (rotated, rot) = rotated_regressor_ls(sigma_w, &sel, panel, target.p, target.h)?;
    debiased_from_rotated(Method::DeLs, panel, target, &sel, rotated, rot, target.p - 1, beta_h)
}

pub fn estimate_de_2s_with_sigma(
    panel: &TimeSeriesPanel,
    residuals: &DMatrix<f64>,
    sigma_uw: &DMatrix<f64>,
    beta_h: &DVector<f64>,
    target: &TargetSpec,
) -> Result<CausalEstimate> {
    target.validate(panel.d())?;
    if residuals.nrows() + target.p != panel.n() || residuals.ncols() != panel.d() {
        return Err(Error::Dimension("residuals do not align with the panel".into()));
    }
    let sel = SelectionPair::new(panel.d(), target.p, target.cause);
    let (rotated, rot) = rotated_instrument_2s(sigma_uw, &sel, residuals, target.p, target.h)?;
    debiased_from_rotated(
        Method::De2s,
        panel,
        target,
        &sel,
        rotated,
        rot,
        2 * target.p - 1,
        beta_h,
    )
}

fn check_fit(fit: &RegularizedFit, cov: &CovarianceSet, target: &TargetSpec) -> Result<()> {
    if fit.p != target.p || cov.p() != target.p {
        return Err(Error::InvalidInput(format!(
            "lag order mismatch: fit p = {}, target p = {}",
            fit.p, target.p
        )));
    }
    Ok(())
}

pub fn estimate_de_ls(
    panel: &TimeSeriesPanel,
    fit: &RegularizedFit,
    cov: &CovarianceSet,
    target: &TargetSpec,
) -> Result<CausalEstimate> {
    check_fit(fit, cov, target)?;
    let beta_h = lp_coefficient(&cov.companion, target.effect, target.h);
    estimate_de_ls_with_sigma(panel, &cov.sigma_w, &beta_h, target)
}

pub fn estimate_de_2s(
    panel: &TimeSeriesPanel,
    fit: &RegularizedFit,
    cov: &CovarianceSet,
    target: &TargetSpec,
) -> Result<CausalEstimate> {
    check_fit(fit, cov, target)?;
    let beta_h = lp_coefficient(&cov.companion, target.effect, target.h);
    estimate_de_2s_with_sigma(panel, &fit.residuals, &cov.sigma_uw, &beta_h, target)
}

/// Post-double-selection LASSO on the horizon-`h` projection: LASSO of
/// `y_{t+h}` on `W_t`, LASSO of each cause lag on the controls, then OLS on
/// the cause lags plus the union of selected controls.
pub fn estimate_pds(panel: &TimeSeriesPanel, target: &TargetSpec, cfg: &PenaltyConfig) -> Result<CausalEstimate> {
    target.validate(panel.d())?;
    let (p, h, effect) = (target.p, target.h, target.effect);
    let sel = SelectionPair::new(panel.d(), p, target.cause);
    let rows = Aligned::new(p - 1, panel.n(), h, p)?;
    let n_eff = rows.count();
    let data = panel.data();
    let w = DMatrix::from_fn(n_eff, sel.dp, |i, k| {
        let t = rows.first_t + i;
        data[(t - k / panel.d(), k % panel.d())]
    });
    let y = DVector::from_fn(n_eff, |i, _| data[(rows.first_t + i + h, effect)]);
    let lasso = PenaltyConfig {
        method: PenaltyMethod::Lasso,
        lambda: Lambda::Auto,
        ..cfg.clone()
    };
    let mut keep = vec![false; sel.dp];
    let full = fit_row(&y, &w, &lasso)?;
    for &k in &sel.r2 {
        keep[k] |= full.coef[k] != 0.0;
    }
    let controls = DMatrix::from_fn(n_eff, sel.r2.len(), |i, j| w[(i, sel.r2[j])]);
    if !sel.r2.is_empty() {
        for &c in &sel.r1 {
            let target_col = w.column(c).into_owned();
            let aux = fit_row(&target_col, &controls, &lasso)?;
            for (j, &k) in sel.r2.iter().enumerate() {
                keep[k] |= aux.coef[j] != 0.0;
            }
        }
    }
    let columns: Vec<usize> = sel
        .r1
        .iter()
        .copied()
        .chain(sel.r2.iter().copied().filter(|&k| keep[k]))
        .collect();
    if columns.len() >= n_eff {
        return Err(Error::DegenerateDesign(format!(
            "{} selected regressors for {n_eff} rows",
            columns.len()
        )));
    }
    let x = DMatrix::from_fn(n_eff, columns.len(), |i, j| w[(i, columns[j])]);
    let gram = x.transpose() * &x;
    let gram_inv =
        checked_inverse(&gram).map_err(|_| Error::DegenerateDesign("post-selection design is singular".into()))?;
    let coef = &gram_inv * (x.transpose() * &y);
    let e_hat = &y - &x * &coef;
    let k = sel.r1.len();
    let beta = coef.rows(0, k).into_owned();
    let bread = (gram_inv * n_eff as f64).rows(0, k).into_owned();
    Ok(CausalEstimate {
        method: Method::Pds,
        target: *target,
        beta_raw: beta.clone(),
        beta_debiased: beta,
        bias_term: DVector::zeros(k),
        n_eff,
        rotated_gram: gram.view((0, 0), (k, k)).into_owned(),
        first_t: rows.first_t,
        score_regressors: x,
        bread,
        e_full: e_hat.clone(),
        e_hat,
        rotation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularized::estimate_var;
    use crate::var::{make_dgp, simulate, DgpKind, DgpSpec, VarModel};

    #[test]
    fn selection_pair_is_a_permutation() {
        let sel = SelectionPair::new(4, 3, 2);
        let r1 = sel.r1_matrix();
        let r2 = sel.r2_matrix();
        assert_eq!(&r1 * r1.transpose(), DMatrix::identity(3, 3));
        assert!((&r1 * r2.transpose()).iter().all(|&v| v == 0.0));
        let mut stacked = DMatrix::zeros(12, 12);
        stacked.view_mut((0, 0), (3, 12)).copy_from(&r1);
        stacked.view_mut((3, 0), (9, 12)).copy_from(&r2);
        assert_eq!(&stacked * stacked.transpose(), DMatrix::identity(12, 12));
        assert_eq!(sel.r1, vec![2, 6, 10]);
    }

    #[test]
    fn scalar_rotation_is_identity() {
        let sel = SelectionPair::new(1, 1, 0);
        let rot = rotation_matrix(&DMatrix::from_element(1, 1, 2.5), &sel).unwrap();
        assert_eq!(rot.matrix[(0, 0)], 1.0);
        let rot0 = rotation_matrix(&DMatrix::zeros(1, 1), &sel).unwrap();
        assert_eq!(rot0.matrix[(0, 0)], 1.0);
    }

    #[test]
    fn block_diagonal_rotation_support() {
        // d = 3, p = 1, cause 0 uncorrelated with the rest
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.4, 0.0, 0.4, 1.0]);
        let rot = rotation_matrix(&s, &SelectionPair::new(3, 1, 0)).unwrap();
        assert!((rot.matrix[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(rot.matrix[(0, 1)], 0.0);
        assert_eq!(rot.matrix[(0, 2)], 0.0);
    }

    #[test]
    fn diagonal_sigma_u_instrument_is_cause_residual() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5]));
        let rot = rotation_matrix(&s, &SelectionPair::new(3, 1, 1)).unwrap();
        assert_eq!(rot.matrix.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn beta2h_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.5, 0.1, 0.2]);
        let model = VarModel::new(vec![a.clone()], DMatrix::identity(2, 2)).unwrap();
        let comp = model.companion();
        let target = TargetSpec::new(1, 0, 1, 1);
        let sel = SelectionPair::new(2, 1, 1);
        assert_eq!(extract_beta2h(comp.matrix(), &target, &sel).as_slice(), &[0.3]);
        assert_eq!(extract_beta1h(comp.matrix(), &target, &sel).as_slice(), &[0.5]);
        let zero = DMatrix::zeros(4, 4);
        let t2 = TargetSpec::new(0, 1, 3, 2);
        assert!(extract_beta2h(&zero, &t2, &SelectionPair::new(2, 2, 0))
            .iter()
            .all(|&v| v == 0.0));
        // y depends only on x: y_t = 0.5 x_{t-1}, x white noise
        let only_x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.0]);
        let m = VarModel::new(vec![only_x], DMatrix::identity(2, 2)).unwrap();
        let b2 = extract_beta2h(
            m.companion().matrix(),
            &TargetSpec::new(0, 1, 1, 1),
            &SelectionPair::new(2, 1, 0),
        );
        assert!(b2.iter().all(|&v| v == 0.0));
    }

    fn noise_free_panel() -> TimeSeriesPanel {
        let data = DMatrix::from_fn(40, 1, |t, _| 0.5_f64.powi(t as i32));
        TimeSeriesPanel::from_matrix(data).unwrap()
    }

    #[test]
    fn noise_free_scalar_de_ls() {
        let panel = noise_free_panel();
        let comp = DMatrix::from_element(1, 1, 0.5);
        let beta_h = lp_coefficient(&comp, 0, 2);
        let est =
            estimate_de_ls_with_sigma(&panel, &DMatrix::zeros(1, 1), &beta_h, &TargetSpec::new(0, 0, 2, 1)).unwrap();
        assert!((est.beta_debiased[0] - 0.25).abs() < 1e-12);
        assert_eq!(est.n_eff, 40 - 1 - 2 + 1);
    }

    #[test]
    fn noise_free_scalar_de_2s() {
        // Any instrument recovers 0.25 since y_{t+2} = 0.25 w_t exactly.
        let panel = noise_free_panel();
        let residuals = DMatrix::from_fn(39, 1, |t, _| ((t * 7919) % 13) as f64 - 6.0);
        let comp = DMatrix::from_element(1, 1, 0.5);
        let beta_h = lp_coefficient(&comp, 0, 2);
        let est = estimate_de_2s_with_sigma(
            &panel,
            &residuals,
            &DMatrix::from_element(1, 1, 1.0),
            &beta_h,
            &TargetSpec::new(0, 0, 2, 1),
        )
        .unwrap();
        assert!((est.beta_debiased[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_beta2_means_no_bias() {
        let m = make_dgp(&DgpSpec::new(DgpKind::Tridiagonal, 4, 0)).unwrap();
        let panel = simulate(&m, 300, 100, 2).unwrap();
        let cov = CovarianceSet::from_model(&m, 3).unwrap();
        let mut beta_h = lp_coefficient(&cov.companion, 1, 3);
        let sel = SelectionPair::new(4, 2, 0);
        for &k in &sel.r2 {
            beta_h[k] = 0.0;
        }
        let target = TargetSpec::new(0, 1, 3, 2);
        let ls = estimate_de_ls_with_sigma(&panel, &cov.sigma_w, &beta_h, &target).unwrap();
        assert_eq!(ls.beta_debiased, ls.beta_raw);
        let fit = RegularizedFit::from_slopes(&panel, m.slopes().to_vec()).unwrap();
        let ts = estimate_de_2s_with_sigma(&panel, &fit.residuals, &cov.sigma_uw, &beta_h, &target).unwrap();
        assert_eq!(ts.beta_debiased, ts.beta_raw);
    }

    #[test]
    fn step_four_identity() {
        let m = make_dgp(&DgpSpec::new(DgpKind::Random, 8, 4)).unwrap();
        let panel = simulate(&m, 400, 100, 9).unwrap();
        let fit = estimate_var(&panel, 2, &PenaltyConfig::default()).unwrap();
        let cov = CovarianceSet::from_fit(&fit, 4).unwrap();
        let target = TargetSpec::new(2, 5, 4, 2);
        for est in [
            estimate_de_ls(&panel, &fit, &cov, &target).unwrap(),
            estimate_de_2s(&panel, &fit, &cov, &target).unwrap(),
        ] {
            assert_eq!(est.beta_debiased, &est.beta_raw - &est.bias_term);
            let back = &est.beta_debiased + &est.bias_term;
            for i in 0..2 {
                assert!((back[i] - est.beta_raw[i]).abs() <= 4.0 * f64::EPSILON * est.beta_raw[i].abs().max(1.0));
            }
        }
        let ls = estimate_de_ls(&panel, &fit, &cov, &target).unwrap();
        assert_eq!(ls.n_eff, 400 - 2 - 4 + 1);
        let ts = estimate_de_2s(&panel, &fit, &cov, &target).unwrap();
        assert_eq!(ts.n_eff, 400 - 4 - 4 + 1);
    }

    #[test]
    fn singular_gram_is_degenerate_design() {
        let panel = TimeSeriesPanel::from_matrix(DMatrix::zeros(30, 1)).unwrap();
        let err = estimate_de_ls_with_sigma(
            &panel,
            &DMatrix::identity(1, 1),
            &DVector::zeros(1),
            &TargetSpec::new(0, 0, 1, 1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateDesign(_)));
    }

    #[test]
    fn pds_recovers_lag_coefficient() {
        // y_t = 0.5 x_{t-1} + noise
        let a = DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 0.0, 0.5, 0.1, 0.0, 0.0, 0.0, 0.3]);
        let m = VarModel::new(vec![a], DMatrix::identity(3, 3)).unwrap();
        let panel = simulate(&m, 2000, 100, 5).unwrap();
        let est = estimate_pds(&panel, &TargetSpec::new(0, 1, 1, 1), &PenaltyConfig::default()).unwrap();
        assert!((est.beta_debiased[0] - 0.5).abs() < 0.1);
    }
}
