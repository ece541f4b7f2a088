//! Model-implied second moments of the stacked regressor `W_t`.
//!
//! * `Σ_W = E[W_t W_t']` solves the discrete Lyapunov identity
//!   `Σ_W = 𝐀 Σ_W 𝐀' + J'Σ_u J`; it is accumulated by squared doubling.
//! * `Σ_W(r) = E[W_t W_{t-r}'] = 𝐀^r Σ_W` for `r >= 0`.
//! * `Σ_UW = E[U_t W_t']` is block lower triangular and block Toeplitz with
//!   block `(i, j) = Σ_u Ψ_{i-j}'`.
//! * `Ψ_h = J 𝐀^h J'` are the reduced-form impulse responses.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{matrix_power, max_abs, symmetrize};
use crate::regularized::RegularizedFit;
use crate::var::{CompanionMatrix, VarModel};

const DOUBLING_TOL: f64 = 1e-12;
const DOUBLING_MAX_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConditionFlags {
    /// `d >= n - p`: the residual covariance is necessarily singular.
    pub sigma_u_singular: bool,
    pub sigma_u_not_pd: bool,
}

#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub sigma_u_hat: DMatrix<f64>,
    pub sigma_w: DMatrix<f64>,
    pub sigma_uw: DMatrix<f64>,
    /// `Ψ_0, ..., Ψ_{h_max + p - 1}`.
    pub psi: Vec<DMatrix<f64>>,
    pub companion: DMatrix<f64>,
    pub spectral_radius: f64,
    pub flags: ConditionFlags,
}

impl CovarianceSet {
    /// Builds every covariance the estimators need from an estimated model.
    pub fn from_model(model: &VarModel, h_max: usize) -> Result<Self> {
        let companion = model.companion();
        let rho = companion.spectral_radius()?;
        if rho >= 1.0 {
            return Err(Error::NonStationaryEstimate(rho));
        }
        let sigma_w = sigma_w_from_companion(&companion, model.sigma_u())?;
        let psi = psi_sequence(&companion, h_max + model.p());
        let sigma_uw = sigma_uw_from_psi(model.sigma_u(), &psi[..model.p()]);
        Ok(Self {
            sigma_u_hat: model.sigma_u().clone(),
            sigma_w,
            sigma_uw,
            psi,
            companion: companion.matrix().clone(),
            spectral_radius: rho,
            flags: ConditionFlags {
                sigma_u_singular: false,
                sigma_u_not_pd: !model.sigma_u_is_pd(),
            },
        })
    }

    pub fn from_fit(fit: &RegularizedFit, h_max: usize) -> Result<Self> {
        let (sigma_u, singular) = sigma_u_hat(fit);
        let model = VarModel::from_estimate(fit.slopes.clone(), sigma_u)?;
        let mut set = Self::from_model(&model, h_max)?;
        set.flags.sigma_u_singular = singular;
        Ok(set)
    }

    pub fn d(&self) -> usize {
        self.sigma_u_hat.nrows()
    }

    pub fn p(&self) -> usize {
        self.sigma_w.nrows() / self.d()
    }

    /// `Σ_W(r)`; negative lags use `Σ_W(-r) = Σ_W(r)'`.
    pub fn sigma_w_lag(&self, r: i64) -> DMatrix<f64> {
        let lagged = matrix_power(&self.companion, r.unsigned_abs() as usize) * &self.sigma_w;
        if r >= 0 {
            lagged
        } else {
            lagged.transpose()
        }
    }

    /// `Ψ_h`, extending the cached sequence when needed.
    pub fn psi_h(&self, h: usize) -> DMatrix<f64> {
        if let Some(m) = self.psi.get(h) {
            return m.clone();
        }
        let d = self.d();
        matrix_power(&self.companion, h).view((0, 0), (d, d)).into_owned()
    }
}

/// `Σ̂_u` from fit residuals plus a flag for the `d >= n - p` regime.
pub fn sigma_u_hat(fit: &RegularizedFit) -> (DMatrix<f64>, bool) {
    let singular = fit.d() >= fit.residuals.nrows();
    if singular {
        log::warn!(
            "d = {} >= n - p = {}: residual covariance is singular",
            fit.d(),
            fit.residuals.nrows()
        );
    }
    (fit.sigma_u_hat(), singular)
}

pub fn sigma_w(model: &VarModel) -> Result<DMatrix<f64>> {
    let companion = model.companion();
    let rho = companion.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::NonStationaryEstimate(rho));
    }
    sigma_w_from_companion(&companion, model.sigma_u())
}

/// Doubling: `S ← S + M S M'`, `M ← M²`, starting from `S = J'Σ_u J`, `M = 𝐀`.
fn sigma_w_from_companion(companion: &CompanionMatrix, sigma_u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (d, p) = (companion.d(), companion.p());
    let dp = d * p;
    let mut s = DMatrix::zeros(dp, dp);
    s.view_mut((0, 0), (d, d)).copy_from(sigma_u);
    let mut m = companion.matrix().clone();
    for _ in 0..DOUBLING_MAX_STEPS {
        let increment = &m * &s * m.transpose();
        let size = max_abs(&increment);
        s += increment;
        if size < DOUBLING_TOL {
            return Ok(symmetrize(&s));
        }
        if !size.is_finite() {
            break;
        }
        m = &m * &m;
    }
    Err(Error::NonStationaryEstimate(
        companion.spectral_radius().unwrap_or(f64::NAN),
    ))
}

pub fn sigma_w_lag(model: &VarModel, r: i64) -> Result<DMatrix<f64>> {
    let sw = sigma_w(model)?;
    let a = model.companion();
    let lagged = matrix_power(a.matrix(), r.unsigned_abs() as usize) * sw;
    Ok(if r >= 0 { lagged } else { lagged.transpose() })
}

/// `Ψ_0, ..., Ψ_{count-1}` by repeated multiplication of `𝐀^h J'`.
fn psi_sequence(companion: &CompanionMatrix, count: usize) -> Vec<DMatrix<f64>> {
    let d = companion.d();
    let a = companion.matrix();
    let mut block = companion.selection_j().transpose();
    let mut out = Vec::with_capacity(count);
    for h in 0..count {
        if h > 0 {
            block = a * &block;
        }
        out.push(block.rows(0, d).into_owned());
    }
    out
}

pub fn psi_h(model: &VarModel, h: usize) -> DMatrix<f64> {
    psi_sequence(&model.companion(), h + 1).pop().expect("h + 1 >= 1")
}

fn sigma_uw_from_psi(sigma_u: &DMatrix<f64>, psi: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = sigma_u.nrows();
    let p = psi.len();
    let mut out = DMatrix::zeros(d * p, d * p);
    let blocks: Vec<DMatrix<f64>> = psi.iter().map(|ps| sigma_u * ps.transpose()).collect();
    for i in 0..p {
        for j in 0..=i {
            out.view_mut((i * d, j * d), (d, d)).copy_from(&blocks[i - j]);
        }
    }
    out
}

pub fn sigma_uw(model: &VarModel) -> DMatrix<f64> {
    let psi = psi_sequence(&model.companion(), model.p());
    sigma_uw_from_psi(model.sigma_u(), &psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var::{make_dgp, simulate, DgpKind, DgpSpec};

    fn scalar(a: &[f64], s2: f64) -> VarModel {
        VarModel::new(
            a.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            DMatrix::from_element(1, 1, s2),
        )
        .unwrap()
    }

    /// Dense `(I - A⊗A)^{-1} vec(Q)` oracle.
    fn kron_oracle(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let k = a.nrows();
        let kron = a.kronecker(a);
        let lhs = DMatrix::identity(k * k, k * k) - kron;
        let vec_q = nalgebra::DVector::from_column_slice(q.as_slice());
        let sol = lhs.lu().solve(&vec_q).unwrap();
        DMatrix::from_column_slice(k, k, sol.as_slice())
    }

    #[test]
    fn scalar_geometric_series() {
        let sw = sigma_w(&scalar(&[0.5], 1.0)).unwrap();
        assert!((sw[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn white_noise_is_block_diagonal() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let model = VarModel::new(vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)], s.clone()).unwrap();
        let sw = sigma_w(&model).unwrap();
        let expected = DMatrix::identity(2, 2).kronecker(&s);
        assert_eq!(sw, expected);
    }

    #[test]
    fn matches_kronecker_oracle() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4]);
        let model = VarModel::new(vec![a.clone()], DMatrix::identity(2, 2)).unwrap();
        let sw = sigma_w(&model).unwrap();
        let oracle = kron_oracle(&a, &DMatrix::identity(2, 2));
        assert!((sw - oracle).amax() < 1e-10);
    }

    #[test]
    fn lag_relations() {
        let model = scalar(&[0.5], 1.0);
        let sw = sigma_w(&model).unwrap();
        assert_eq!(sigma_w_lag(&model, 0).unwrap(), sw);
        assert!((sigma_w_lag(&model, 2).unwrap()[(0, 0)] - 0.25 * sw[(0, 0)]).abs() < 1e-15);
        let m = make_dgp(&DgpSpec::new(DgpKind::Tridiagonal, 3, 0)).unwrap();
        let set = CovarianceSet::from_model(&m, 4).unwrap();
        assert_eq!(set.sigma_w_lag(-1), set.sigma_w_lag(1).transpose());
    }

    #[test]
    fn sigma_uw_structure() {
        let model = scalar(&[0.5, 0.0], 1.0);
        let suw = sigma_uw(&model);
        assert_eq!(
            suw.as_slice(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]).as_slice()
        );
        let p1 = VarModel::new(
            vec![DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.0, 0.3])],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]),
        )
        .unwrap();
        assert_eq!(&sigma_uw(&p1), p1.sigma_u());
        let m = make_dgp(&DgpSpec::new(DgpKind::Random, 6, 3)).unwrap();
        let s = sigma_uw(&m);
        assert!(s.view((0, 6), (6, 6)).iter().all(|&v| v == 0.0));
        assert_eq!(s.view((0, 0), (6, 6)), s.view((6, 6), (6, 6)));
    }

    #[test]
    fn psi_values_and_recursion() {
        let model = scalar(&[0.5], 1.0);
        assert_eq!(psi_h(&model, 0)[(0, 0)], 1.0);
        assert!((psi_h(&model, 3)[(0, 0)] - 0.125).abs() < 1e-15);
        let m = make_dgp(&DgpSpec::new(DgpKind::Random, 4, 9)).unwrap();
        let set = CovarianceSet::from_model(&m, 13).unwrap();
        assert_eq!(set.psi[0], DMatrix::identity(4, 4));
        // MA recursion oracle
        let mut rec = vec![DMatrix::identity(4, 4)];
        for h in 1..=12 {
            let mut acc = DMatrix::zeros(4, 4);
            for (i, a) in m.slopes().iter().enumerate() {
                if h > i {
                    acc += a * &rec[h - i - 1];
                }
            }
            rec.push(acc);
        }
        for (psi, expected) in set.psi.iter().zip(&rec) {
            assert!((psi - expected).amax() < 1e-10);
        }
    }

    #[test]
    fn lyapunov_residual_small() {
        for kind in [DgpKind::Tridiagonal, DgpKind::BlockDiagonal, DgpKind::Random] {
            let m = make_dgp(&DgpSpec::new(kind, 20, 1)).unwrap();
            let set = CovarianceSet::from_model(&m, 1).unwrap();
            let mut q = DMatrix::zeros(40, 40);
            q.view_mut((0, 0), (20, 20)).copy_from(m.sigma_u());
            let resid = &set.sigma_w - &set.companion * &set.sigma_w * set.companion.transpose() - q;
            assert!(resid.amax() < 1e-8);
            let sv = set.sigma_uw.clone().singular_values();
            assert!(sv.min() > 1e-10 * sv.max());
        }
    }

    #[test]
    fn non_stationary_refused() {
        let model = scalar(&[1.1], 1.0);
        assert!(matches!(sigma_w(&model), Err(Error::NonStationaryEstimate(r)) if (r - 1.1).abs() < 1e-10));
    }

    #[test]
    fn model_vs_sample_sigma_w() {
        let m = make_dgp(&DgpSpec::new(DgpKind::Tridiagonal, 5, 0)).unwrap();
        let panel = simulate(&m, 10_000, 200, 17).unwrap();
        let sw = sigma_w(&m).unwrap();
        let n = panel.n();
        let mut sample = DMatrix::zeros(10, 10);
        for t in 1..n {
            let w = panel.stacked_lags(t, 2);
            sample += &w * w.transpose();
        }
        sample /= (n - 1) as f64;
        assert!((&sample - &sw).amax() < 0.1 * sw.amax());
    }
}
