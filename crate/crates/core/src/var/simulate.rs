use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{model::VarModel, panel::TimeSeriesPanel};
use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 200;

/// Source of innovation vectors `u_t`.
pub trait Innovations {
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut DVector<f64>);
}

/// `u_t ~ N(0, Σ_u)` through the lower Cholesky factor of `Σ_u`.
pub struct GaussianInnovations {
    chol_l: DMatrix<f64>,
}

impl GaussianInnovations {
    pub fn new(sigma_u: &DMatrix<f64>) -> Result<Self> {
        let chol = sigma_u.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { chol_l: chol.l() })
    }
}

impl Innovations for GaussianInnovations {
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut DVector<f64>) {
        let z = DVector::from_fn(self.chol_l.nrows(), |_, _| StandardNormal.sample(rng));
        self.chol_l.mul_to(&z, out);
    }
}

/// Simulates `n` observations after discarding `burn_in` draws from a zero start.
pub fn simulate(model: &VarModel, n: usize, burn_in: usize, seed: u64) -> Result<TimeSeriesPanel> {
    let innov = GaussianInnovations::new(model.sigma_u())?;
    simulate_with(model, n, burn_in, seed, &innov)
}

pub fn simulate_with(
    model: &VarModel,
    n: usize,
    burn_in: usize,
    seed: u64,
    innovations: &dyn Innovations,
) -> Result<TimeSeriesPanel> {
    let (d, p) = (model.d(), model.p());
    if n <= p {
        return Err(Error::InvalidInput(format!("need n > p (n = {n}, p = {p})")));
    }
    let rho = model.companion().spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let total = n + burn_in;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = DMatrix::<f64>::zeros(total, d);
    let mut u = DVector::zeros(d);
    let mut w = DVector::zeros(d);
    for t in 0..total {
        innovations.draw(&mut rng, &mut u);
        w.copy_from(&u);
        for (l, a) in model.slopes().iter().enumerate() {
            if t > l {
                let lagged = path.row(t - l - 1).transpose();
                w.gemv(1.0, a, &lagged, 1.0);
            }
        }
        path.row_mut(t).copy_from(&w.transpose());
    }
    TimeSeriesPanel::from_matrix(path.rows(burn_in, n).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_covariance() {
        let model = VarModel::new(vec![DMatrix::zeros(2, 2)], DMatrix::identity(2, 2)).unwrap();
        let panel = simulate(&model, 20_000, 10, 1).unwrap();
        let x = panel.data();
        let cov = x.transpose() * x / x.nrows() as f64;
        assert!((cov - DMatrix::identity(2, 2)).abs().max() < 0.05);
    }

    #[test]
    fn zero_sigma_rejected() {
        let model = VarModel::from_estimate(vec![DMatrix::zeros(2, 2)], DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(simulate(&model, 10, 0, 0), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn unstable_rejected_with_radius() {
        let model = VarModel::new(vec![DMatrix::from_element(1, 1, 1.2)], DMatrix::identity(1, 1)).unwrap();
        match simulate(&model, 10, 0, 0) {
            Err(Error::Unstable(rho)) => assert!((rho - 1.2).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}
