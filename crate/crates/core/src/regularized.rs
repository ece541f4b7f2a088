//! Row-wise ℓ1-penalised estimation of VAR slope matrices.
//!
//! Each equation minimises
//! `(1/m) ||y - X b||² + λ Σ_k π_k (α |b_k| + (1-α)/2 b_k²)` by cyclic
//! coordinate descent on the Gram matrix of the lagged design, where
//! `m = n - p`. Columns are rescaled to unit second moment inside the solver
//! as a preconditioner only; the penalty acts on the original coefficients.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::var::{TimeSeriesPanel, VarModel};

pub const IC_GRID_SIZE: usize = 50;
pub const IC_GRID_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyMethod {
    Lasso,
    #[serde(rename = "adalasso")]
    AdaptiveLasso,
    #[serde(rename = "elnet")]
    ElasticNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lambda {
    /// Data-driven: `sqrt(ln d / n)` for a first-step LASSO, information
    /// criterion selection otherwise.
    Auto,
    #[serde(untagged)]
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoCriterion {
    Bic,
    Aic,
}

impl InfoCriterion {
    fn score(self, m: usize, rss: f64, k: usize) -> f64 {
        let mf = m as f64;
        let fit = mf * (rss / mf).max(f64::MIN_POSITIVE).ln();
        match self {
            Self::Bic => fit + k as f64 * mf.ln(),
            Self::Aic => fit + 2.0 * k as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub method: PenaltyMethod,
    pub lambda: Lambda,
    pub alpha: f64,
    pub tau: f64,
    pub ic: InfoCriterion,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            method: PenaltyMethod::AdaptiveLasso,
            lambda: Lambda::Auto,
            alpha: 0.5,
            tau: 1.0,
            ic: InfoCriterion::Bic,
            max_iter: 10_000,
            tol: 1e-7,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if let Lambda::Fixed(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::InvalidInput(format!("lambda must be >= 0, got {l}")));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidInput(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidInput("tol must be > 0 and max_iter >= 1".into()));
        }
        Ok(())
    }

    fn l1_share(&self) -> f64 {
        match self.method {
            PenaltyMethod::ElasticNet => self.alpha,
            _ => 1.0,
        }
    }
}

/// Gram form of a design matrix, shared across every equation regressed on it.
#[derive(Debug, Clone)]
pub struct Design {
    x: DMatrix<f64>,
    /// `X_s' X_s / m` for the rescaled columns.
    gram: DMatrix<f64>,
    scales: Vec<f64>,
    zero_variance: Vec<usize>,
}

impl Design {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let (m, k) = x.shape();
        if m < 2 {
            return Err(Error::SampleTooShort(format!("{m} rows in design")));
        }
        let mf = m as f64;
        let raw_scales: Vec<f64> = x.column_iter().map(|c| (c.norm_squared() / mf).sqrt()).collect();
        let max_scale = raw_scales.iter().copied().fold(0.0, f64::max);
        let mut zero_variance = Vec::new();
        let scales: Vec<f64> = raw_scales
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                if s <= 1e-12 * max_scale || s == 0.0 {
                    zero_variance.push(j);
                    0.0
                } else {
                    s
                }
            })
            .collect();
        let mut gram = x.transpose() * &x / mf;
        for i in 0..k {
            for j in 0..k {
                let (si, sj) = (scales[i], scales[j]);
                gram[(i, j)] = if si > 0.0 && sj > 0.0 {
                    gram[(i, j)] / (si * sj)
                } else {
                    0.0
                };
            }
        }
        Ok(Self {
            x,
            gram,
            scales,
            zero_variance,
        })
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    fn response(&self, y: &DVector<f64>) -> Response {
        let mf = self.rows() as f64;
        let raw = self.x.transpose() * y / mf;
        let c = DVector::from_fn(self.cols(), |k, _| {
            if self.scales[k] > 0.0 {
                raw[k] / self.scales[k]
            } else {
                0.0
            }
        });
        Response {
            c,
            raw_c: raw,
            yy: y.norm_squared() / mf,
        }
    }
}

struct Response {
    /// `X_s' y / m`.
    c: DVector<f64>,
    /// `X' y / m`.
    raw_c: DVector<f64>,
    yy: f64,
}

#[derive(Debug, Clone)]
pub struct RowFit {
    pub coef: DVector<f64>,
    pub lambda: f64,
    /// Columns with zero sample variance, whose coefficients are forced to 0.
    pub zero_variance: Vec<usize>,
    pub sweeps: usize,
}

/// Single-equation penalised regression. `Lambda::Auto` selects λ on a
/// log-spaced grid by the configured information criterion.
pub fn fit_row(y: &DVector<f64>, x: &DMatrix<f64>, cfg: &PenaltyConfig) -> Result<RowFit> {
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!("y has {} rows, X has {}", y.len(), x.nrows())));
    }
    let design = Design::new(x.clone())?;
    let loadings = vec![1.0; design.cols()];
    fit_on_design(&design, y, cfg, &loadings, cfg.lambda)
}

fn fit_on_design(
    design: &Design,
    y: &DVector<f64>,
    cfg: &PenaltyConfig,
    loadings: &[f64],
    lambda: Lambda,
) -> Result<RowFit> {
    cfg.validate()?;
    let resp = design.response(y);
    let mut solver = Solver::new(design, &resp, loadings, cfg);
    let (coef_s, lambda, sweeps) = match lambda {
        Lambda::Fixed(0.0) => return unpenalized(design, y, loadings),
        Lambda::Fixed(l) => {
            let sweeps = solver.solve(l)?;
            (solver.beta.clone(), l, sweeps)
        }
        Lambda::Auto => solver.select_by_ic(cfg.ic)?,
    };
    let coef = DVector::from_fn(design.cols(), |k, _| {
        if design.scales[k] > 0.0 {
            coef_s[k] / design.scales[k]
        } else {
            0.0
        }
    });
    Ok(RowFit {
        coef,
        lambda,
        zero_variance: design.zero_variance.clone(),
        sweeps,
    })
}

/// Least squares on the columns with positive variance and finite loading.
fn unpenalized(design: &Design, y: &DVector<f64>, loadings: &[f64]) -> Result<RowFit> {
    let active: Vec<usize> = (0..design.cols())
        .filter(|&k| design.scales[k] > 0.0 && loadings[k].is_finite())
        .collect();
    let x = design.x();
    let sub = DMatrix::from_fn(x.nrows(), active.len(), |i, j| x[(i, active[j])]);
    let beta = crate::linalg::ols(&sub, y)?;
    let mut coef = DVector::zeros(design.cols());
    for (j, &k) in active.iter().enumerate() {
        coef[k] = beta[j];
    }
    Ok(RowFit {
        coef,
        lambda: 0.0,
        zero_variance: design.zero_variance.clone(),
        sweeps: 0,
    })
}

/// Smallest λ at which every coefficient is zero, for unit-scale loadings `π`.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>, loadings: &[f64], l1_share: f64) -> f64 {
    let m = x.nrows() as f64;
    let c = x.transpose() * y / m;
    c.iter()
        .zip(loadings)
        .filter(|(_, &p)| p > 0.0)
        .map(|(ck, &p)| 2.0 * ck.abs() / (p * l1_share.max(1e-3)))
        .fold(0.0, f64::max)
}

struct Solver<'a> {
    design: &'a Design,
    resp: &'a Response,
    loadings: &'a [f64],
    l1_share: f64,
    max_iter: usize,
    tol: f64,
    beta: DVector<f64>,
    /// `G_s beta`, maintained incrementally.
    g_beta: DVector<f64>,
}

impl<'a> Solver<'a> {
    fn new(design: &'a Design, resp: &'a Response, loadings: &'a [f64], cfg: &PenaltyConfig) -> Self {
        let k = design.cols();
        Self {
            design,
            resp,
            loadings,
            l1_share: cfg.l1_share(),
            max_iter: cfg.max_iter,
            tol: cfg.tol,
            beta: DVector::zeros(k),
            g_beta: DVector::zeros(k),
        }
    }

    /// Objective in rescaled coordinates.
    fn objective(&self, lambda: f64) -> f64 {
        let fit = self.resp.yy - 2.0 * self.resp.c.dot(&self.beta) + self.beta.dot(&self.g_beta);
        let pen: f64 = (0..self.beta.len())
            .filter(|&k| self.design.scales[k] > 0.0)
            .map(|k| {
                let b = self.beta[k] / self.design.scales[k];
                lambda * self.loadings[k] * (self.l1_share * b.abs() + (1.0 - self.l1_share) * 0.5 * b * b)
            })
            .sum();
        fit + pen
    }

    fn rss_over_m(&self) -> f64 {
        (self.resp.yy - 2.0 * self.resp.c.dot(&self.beta) + self.beta.dot(&self.g_beta)).max(0.0)
    }

    fn solve(&mut self, lambda: f64) -> Result<usize> {
        let k = self.beta.len();
        let scales = &self.design.scales;
        let gram = &self.design.gram;
        let mut previous = if cfg!(debug_assertions) {
            self.objective(lambda)
        } else {
            0.0
        };
        for sweep in 1..=self.max_iter {
            let mut max_change = 0.0_f64;
            for j in 0..k {
                let s = scales[j];
                if s == 0.0 {
                    continue;
                }
                let pi = self.loadings[j];
                if !pi.is_finite() {
                    // infinite loading: coefficient excluded
                    if self.beta[j] != 0.0 {
                        let delta = -self.beta[j];
                        self.beta[j] = 0.0;
                        self.g_beta.axpy(delta, &gram.column(j), 1.0);
                    }
                    continue;
                }
                let old = self.beta[j];
                let z = self.resp.c[j] - self.g_beta[j] + gram[(j, j)] * old;
                let l1 = lambda * pi * self.l1_share / (2.0 * s);
                let l2 = lambda * pi * (1.0 - self.l1_share) / (2.0 * s * s);
                let new = soft_threshold(z, l1) / (gram[(j, j)] + l2);
                if new != old {
                    let delta = new - old;
                    self.beta[j] = new;
                    self.g_beta.axpy(delta, &gram.column(j), 1.0);
                    max_change = max_change.max(delta.abs() / s);
                }
            }
            if cfg!(debug_assertions) {
                let current = self.objective(lambda);
                debug_assert!(
                    current <= previous + 1e-10 * (1.0 + previous.abs()),
                    "objective increased: {previous} -> {current}"
                );
                previous = current;
            }
            if max_change < self.tol {
                return Ok(sweep);
            }
        }
        Err(Error::NonConvergence {
            iterations: self.max_iter,
        })
    }

    fn select_by_ic(&mut self, ic: InfoCriterion) -> Result<(DVector<f64>, f64, usize)> {
        let m = self.design.rows();
        let top = lambda_max_from_response(self.resp, self.loadings, self.l1_share, &self.design.scales);
        let mut best: Option<(f64, DVector<f64>, f64)> = None;
        let mut total_sweeps = 0;
        if top == 0.0 {
            return Ok((self.beta.clone(), 0.0, 0));
        }
        for lambda in log_grid(top, IC_GRID_SIZE, IC_GRID_RATIO) {
            total_sweeps += self.solve(lambda)?;
            let nonzero = self.beta.iter().filter(|v| **v != 0.0).count();
            let score = ic.score(m, self.rss_over_m() * m as f64, nonzero);
            if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                best = Some((score, self.beta.clone(), lambda));
            }
        }
        let (_, beta, lambda) = best.expect("non-empty grid");
        Ok((beta, lambda, total_sweeps))
    }
}

fn lambda_max_from_response(resp: &Response, loadings: &[f64], l1_share: f64, scales: &[f64]) -> f64 {
    resp.raw_c
        .iter()
        .enumerate()
        .filter(|(k, _)| scales[*k] > 0.0 && loadings[*k] > 0.0 && loadings[*k].is_finite())
        .map(|(k, ck)| 2.0 * ck.abs() / (loadings[k] * l1_share.max(1e-3)))
        .fold(0.0, f64::max)
}

/// `size` log-spaced values from `top` down to `ratio * top`.
pub fn log_grid(top: f64, size: usize, ratio: f64) -> Vec<f64> {
    if size == 1 {
        return vec![top];
    }
    let step = ratio.ln() / (size - 1) as f64;
    (0..size).map(|i| top * (step * i as f64).exp()).collect()
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalty loadings `π_k = (|b_k| + (n-h)^{-1/2})^{-τ}`.
pub fn adaptive_loadings(first_step: &DVector<f64>, n: usize, h: usize, tau: f64) -> Result<DVector<f64>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be > 0, got {tau}")));
    }
    if n <= h {
        return Err(Error::InvalidInput(format!("need n > h (n = {n}, h = {h})")));
    }
    let offset = ((n - h) as f64).powf(-0.5);
    Ok(first_step.map(|b| (b.abs() + offset).powf(-tau)))
}

#[derive(Debug, Clone)]
pub struct RegularizedFit {
    pub p: usize,
    pub slopes: Vec<DMatrix<f64>>,
    /// `(n-p) x d`, row `r` is `û_{p+r}`.
    pub residuals: DMatrix<f64>,
    pub lambda_used: Vec<f64>,
    /// `d x dp` penalty loadings, one row per equation.
    pub loadings: DMatrix<f64>,
    pub nonzero_count: usize,
    pub zero_variance_columns: Vec<usize>,
}

impl RegularizedFit {
    pub fn d(&self) -> usize {
        self.residuals.ncols()
    }

    /// Rebuilds a fit around given slopes (e.g. a known model) with residuals
    /// computed from the panel.
    pub fn from_slopes(panel: &TimeSeriesPanel, slopes: Vec<DMatrix<f64>>) -> Result<Self> {
        let p = slopes.len();
        let d = panel.d();
        if p == 0 || slopes.iter().any(|a| a.shape() != (d, d)) {
            return Err(Error::Dimension("slopes do not match the panel".into()));
        }
        let residuals = var_residuals(panel, &slopes)?;
        let nonzero_count = count_nonzero(&slopes);
        Ok(Self {
            p,
            slopes,
            residuals,
            lambda_used: vec![0.0; d],
            loadings: DMatrix::from_element(d, d * p, 1.0),
            nonzero_count,
            zero_variance_columns: Vec::new(),
        })
    }

    /// `Σ̂_u = (1/(n-p)) Σ_t û_t û_t'`.
    pub fn sigma_u_hat(&self) -> DMatrix<f64> {
        let m = self.residuals.nrows() as f64;
        let s = self.residuals.transpose() * &self.residuals / m;
        crate::linalg::symmetrize(&s)
    }

    pub fn model_hat(&self) -> Result<VarModel> {
        VarModel::from_estimate(self.slopes.clone(), self.sigma_u_hat())
    }
}

fn count_nonzero(slopes: &[DMatrix<f64>]) -> usize {
    slopes.iter().map(|a| a.iter().filter(|v| v.abs() > 0.0).count()).sum()
}

/// Lagged design: row `t - p` holds `W_{t-1}` for `t = p..n-1`.
pub fn lagged_design(panel: &TimeSeriesPanel, p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, d) = (panel.n(), panel.d());
    if n <= p + 1 {
        return Err(Error::SampleTooShort(format!("n = {n} <= p + 1 = {}", p + 1)));
    }
    let m = n - p;
    let data = panel.data();
    let x = DMatrix::from_fn(m, d * p, |r, k| data[(r + p - 1 - k / d, k % d)]);
    let y = data.rows(p, m).into_owned();
    Ok((x, y))
}

pub fn var_residuals(panel: &TimeSeriesPanel, slopes: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let p = slopes.len();
    let (x, y) = lagged_design(panel, p)?;
    let stacked = stack_slopes(slopes);
    Ok(y - x * stacked.transpose())
}

/// `[A_1 ... A_p]` as a `d x dp` matrix.
pub fn stack_slopes(slopes: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = slopes[0].nrows();
    let mut out = DMatrix::zeros(d, d * slopes.len());
    for (l, a) in slopes.iter().enumerate() {
        out.view_mut((0, l * d), (d, d)).copy_from(a);
    }
    out
}

/// Row-wise penalised VAR(p) fit.
pub fn estimate_var(panel: &TimeSeriesPanel, p: usize, cfg: &PenaltyConfig) -> Result<RegularizedFit> {
    cfg.validate()?;
    if p == 0 {
        return Err(Error::InvalidInput("lag order p must be >= 1".into()));
    }
    let (n, d) = (panel.n(), panel.d());
    let (x, y) = lagged_design(panel, p)?;
    let design = Design::new(x)?;
    let dp = d * p;
    let first_lambda = ((d as f64).ln() / n as f64).sqrt();

    let rows: Vec<(RowFit, DVector<f64>)> = (0..d)
        .into_par_iter()
        .map(|i| {
            let yi = y.column(i).into_owned();
            let unit = vec![1.0; dp];
            let out = match cfg.method {
                PenaltyMethod::Lasso => {
                    let lambda = match cfg.lambda {
                        Lambda::Auto => Lambda::Fixed(first_lambda),
                        fixed => fixed,
                    };
                    (
                        fit_on_design(&design, &yi, cfg, &unit, lambda)?,
                        DVector::from_element(dp, 1.0),
                    )
                }
                PenaltyMethod::AdaptiveLasso => {
                    let first_cfg = PenaltyConfig {
                        method: PenaltyMethod::Lasso,
                        ..cfg.clone()
                    };
                    let first = fit_on_design(&design, &yi, &first_cfg, &unit, Lambda::Fixed(first_lambda))?;
                    let pi = adaptive_loadings(&first.coef, n, p, cfg.tau)?;
                    let fit = fit_on_design(&design, &yi, cfg, pi.as_slice(), cfg.lambda)?;
                    (fit, pi)
                }
                PenaltyMethod::ElasticNet => (
                    fit_on_design(&design, &yi, cfg, &unit, cfg.lambda)?,
                    DVector::from_element(dp, 1.0),
                ),
            };
            Ok(out)
        })
        .enumerate()
        .map(|(i, r): (usize, Result<_>)| r.map_err(|e| e.in_equation(i)))
        .collect::<Result<Vec<_>>>()?;

    let mut slopes = vec![DMatrix::zeros(d, d); p];
    let mut loadings = DMatrix::zeros(d, dp);
    let mut lambda_used = Vec::with_capacity(d);
    for (i, (row, pi)) in rows.iter().enumerate() {
        for k in 0..dp {
            slopes[k / d][(i, k % d)] = row.coef[k];
            loadings[(i, k)] = pi[k];
        }
        lambda_used.push(row.lambda);
    }
    if !design.zero_variance.is_empty() {
        log::warn!("zero-variance regressors forced to 0: {:?}", design.zero_variance);
    }
    let stacked = stack_slopes(&slopes);
    let residuals = y - design.x() * stacked.transpose();
    Ok(RegularizedFit {
        p,
        nonzero_count: count_nonzero(&slopes),
        slopes,
        residuals,
        lambda_used,
        loadings,
        zero_variance_columns: design.zero_variance.clone(),
    })
}

/// Thresholding `z (1 - |λ/z|^ν)_+`; `ν = ∞` is hard thresholding.
pub fn threshold_value(z: f64, lambda: f64, nu: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    if nu.is_infinite() {
        return if z.abs() <= lambda { 0.0 } else { z };
    }
    let factor = 1.0 - (lambda / z).abs().powf(nu);
    if factor > 0.0 {
        z * factor
    } else {
        0.0
    }
}

pub fn threshold_fit(
    fit: &RegularizedFit,
    panel: &TimeSeriesPanel,
    lambda_thr: f64,
    nu: f64,
) -> Result<RegularizedFit> {
    if !(lambda_thr >= 0.0) || !(nu >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold needs lambda >= 0 and nu >= 1 (got {lambda_thr}, {nu})"
        )));
    }
    if lambda_thr == 0.0 {
        return Ok(fit.clone());
    }
    let slopes: Vec<DMatrix<f64>> = fit
        .slopes
        .iter()
        .map(|a| a.map(|z| threshold_value(z, lambda_thr, nu)))
        .collect();
    let residuals = var_residuals(panel, &slopes)?;
    Ok(RegularizedFit {
        p: fit.p,
        nonzero_count: count_nonzero(&slopes),
        slopes,
        residuals,
        lambda_used: fit.lambda_used.clone(),
        loadings: fit.loadings.clone(),
        zero_variance_columns: fit.zero_variance_columns.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ols;
    use crate::var::{make_dgp, simulate, DgpKind, DgpSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(m: usize, k: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(m, k, |_, j| rng.random_range(-1.0..1.0) * (1.0 + j as f64));
        let b = DVector::from_fn(k, |j, _| if j % 3 == 0 { 0.7 } else { 0.0 });
        let noise = DVector::from_fn(m, |_, _| rng.random_range(-0.5..0.5));
        let y = &x * b + noise;
        (x, y)
    }

    fn cfg_lasso(lambda: f64) -> PenaltyConfig {
        PenaltyConfig {
            method: PenaltyMethod::Lasso,
            lambda: Lambda::Fixed(lambda),
            tol: 1e-12,
            max_iter: 100_000,
            ..Default::default()
        }
    }

    #[test]
    fn zero_lambda_is_ols() {
        let (x, y) = random_problem(80, 6, 1);
        let fit = fit_row(&y, &x, &cfg_lasso(0.0)).unwrap();
        let oracle = ols(&x, &y).unwrap();
        assert!((fit.coef - oracle).amax() < 1e-8);
    }

    #[test]
    fn zero_lambda_scale_equivariance() {
        let (x, y) = random_problem(80, 6, 3);
        let base = fit_row(&y, &x, &cfg_lasso(0.0)).unwrap();
        let doubled = fit_row(&(&y * 2.0), &x, &cfg_lasso(0.0)).unwrap();
        assert_eq!(doubled.coef, &base.coef * 2.0);
        let scaled = fit_row(&(&y * 3.7), &x, &cfg_lasso(0.0)).unwrap();
        assert!((scaled.coef - &base.coef * 3.7).amax() < 1e-12 * base.coef.amax());
    }

    #[test]
    fn lambda_max_zeroes_everything() {
        let (x, y) = random_problem(60, 5, 2);
        let top = lambda_max(&x, &y, &[1.0; 5], 1.0);
        let fit = fit_row(&y, &x, &cfg_lasso(top)).unwrap();
        assert!(fit.coef.iter().all(|&v| v == 0.0));
        let below = fit_row(&y, &x, &cfg_lasso(0.99 * top)).unwrap();
        assert!(below.coef.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn scalar_soft_threshold_oracle() {
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 1.5]);
        let y = &x * 2.0;
        let m = 5.0;
        let oracle = soft_threshold(x.dot(&y) / m, 0.05) / (x.dot(&x) / m);
        let xm = DMatrix::from_column_slice(5, 1, x.as_slice());
        let fit = fit_row(&y, &xm, &cfg_lasso(0.1)).unwrap();
        assert!((fit.coef[0] - oracle).abs() < 1e-12);
    }

    #[test]
    fn kkt_conditions_hold() {
        let (x, y) = random_problem(120, 10, 3);
        let lambda = 0.2;
        let fit = fit_row(&y, &x, &cfg_lasso(lambda)).unwrap();
        let m = x.nrows() as f64;
        let grad = x.transpose() * (&y - &x * &fit.coef) * (2.0 / m);
        for k in 0..10 {
            if fit.coef[k] != 0.0 {
                assert!((grad[k] - lambda * fit.coef[k].signum()).abs() < 1e-4);
            } else {
                assert!(grad[k].abs() <= lambda + 1e-4);
            }
        }
    }

    #[test]
    fn zero_variance_column_forced_to_zero() {
        let (mut x, y) = random_problem(40, 3, 4);
        x.column_mut(1).fill(0.0);
        let fit = fit_row(&y, &x, &cfg_lasso(0.0)).unwrap();
        assert_eq!(fit.coef[1], 0.0);
        assert_eq!(fit.zero_variance, vec![1]);
    }

    #[test]
    fn non_convergence_reports_iterations() {
        let (x, y) = random_problem(50, 8, 5);
        let cfg = PenaltyConfig {
            max_iter: 1,
            tol: 1e-15,
            ..cfg_lasso(1e-6)
        };
        assert!(matches!(
            fit_row(&y, &x, &cfg),
            Err(Error::NonConvergence { iterations: 1 })
        ));
    }

    #[test]
    fn adaptive_loading_values() {
        let b = DVector::from_vec(vec![0.0, 0.9, 50.0]);
        let pi = adaptive_loadings(&b, 101, 1, 1.0).unwrap();
        assert!((pi[0] - 10.0).abs() < 1e-12);
        assert!((pi[1] - 1.0).abs() < 1e-12);
        assert!(pi[2] < 0.02);
        assert!(adaptive_loadings(&b, 101, 1, 0.0).is_err());
    }

    #[test]
    fn elastic_net_ridge_limit() {
        // alpha = 0: closed form (G + λ/2 I)^{-1} c in the original scale
        let (x, y) = random_problem(70, 4, 6);
        let cfg = PenaltyConfig {
            method: PenaltyMethod::ElasticNet,
            alpha: 0.0,
            ..cfg_lasso(0.3)
        };
        let fit = fit_row(&y, &x, &cfg).unwrap();
        let m = x.nrows() as f64;
        let g = x.transpose() * &x / m + DMatrix::identity(4, 4) * 0.15;
        let c = x.transpose() * &y / m;
        let oracle = g.lu().solve(&c).unwrap();
        assert!((fit.coef - oracle).amax() < 1e-8);
    }

    #[test]
    fn ic_selection_picks_sparse_model() {
        let (x, y) = random_problem(300, 9, 7);
        let cfg = PenaltyConfig {
            method: PenaltyMethod::Lasso,
            lambda: Lambda::Auto,
            ..Default::default()
        };
        let fit = fit_row(&y, &x, &cfg).unwrap();
        assert!(fit.lambda > 0.0);
        for k in 0..9 {
            if k % 3 == 0 {
                assert!((fit.coef[k] - 0.7).abs() < 0.1);
            }
        }
    }

    #[test]
    fn scalar_ar1_ols() {
        let model = VarModel::new(vec![DMatrix::from_element(1, 1, 0.4)], DMatrix::identity(1, 1)).unwrap();
        let panel = simulate(&model, 300, 50, 11).unwrap();
        let cfg = cfg_lasso(0.0);
        let fit = estimate_var(&panel, 1, &cfg).unwrap();
        let w = panel.data().column(0);
        let num: f64 = (1..300).map(|t| w[t] * w[t - 1]).sum();
        let den: f64 = (1..300).map(|t| w[t - 1] * w[t - 1]).sum();
        assert!((fit.slopes[0][(0, 0)] - num / den).abs() < 1e-8);
    }

    #[test]
    fn residual_identity_and_nonzero_count() {
        let model = make_dgp(&DgpSpec::new(DgpKind::Tridiagonal, 5, 0)).unwrap();
        let panel = simulate(&model, 400, 100, 3).unwrap();
        let fit = estimate_var(&panel, 2, &PenaltyConfig::default()).unwrap();
        let data = panel.data();
        for r in 0..fit.residuals.nrows() {
            let t = r + 2;
            let mut pred = data.row(t).transpose();
            for (l, a) in fit.slopes.iter().enumerate() {
                pred -= a * data.row(t - l - 1).transpose();
            }
            for i in 0..5 {
                assert!((pred[i] - fit.residuals[(r, i)]).abs() < 1e-12);
            }
        }
        let count: usize = fit
            .slopes
            .iter()
            .map(|a| a.iter().filter(|v| v.abs() > 0.0).count())
            .sum();
        assert_eq!(fit.nonzero_count, count);
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(threshold_value(2.0, 0.5, 1.0), 1.5);
        assert_eq!(threshold_value(0.4, 0.5, f64::INFINITY), 0.0);
        assert_eq!(threshold_value(0.6, 0.5, f64::INFINITY), 0.6);
        assert_eq!(threshold_value(-0.6, 0.5, f64::INFINITY), -0.6);
        assert_eq!(threshold_value(0.3, 0.5, 2.0), 0.0);
    }

    #[test]
    fn zero_threshold_is_identity() {
        let model = make_dgp(&DgpSpec::new(DgpKind::Tridiagonal, 3, 0)).unwrap();
        let panel = simulate(&model, 200, 50, 5).unwrap();
        let fit = estimate_var(&panel, 2, &PenaltyConfig::default()).unwrap();
        let same = threshold_fit(&fit, &panel, 0.0, 1.0).unwrap();
        assert_eq!(same.slopes, fit.slopes);
        assert_eq!(same.residuals, fit.residuals);
        let hard = threshold_fit(&fit, &panel, 0.05, f64::INFINITY).unwrap();
        assert!(hard.nonzero_count <= fit.nonzero_count);
        assert_eq!(hard.residuals, var_residuals(&panel, &hard.slopes).unwrap());
    }

    #[test]
    fn equation_errors_are_tagged() {
        let model = make_dgp(&DgpSpec::new(DgpKind::Tridiagonal, 3, 0)).unwrap();
        let panel = simulate(&model, 200, 50, 5).unwrap();
        let cfg = PenaltyConfig {
            max_iter: 1,
            tol: 1e-15,
            ..cfg_lasso(1e-6)
        };
        assert!(matches!(estimate_var(&panel, 2, &cfg), Err(Error::Equation { .. })));
    }
}
