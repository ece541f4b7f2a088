#![allow(dead_code)]

use hdgc_core::regularized::{lagged_design, RegularizedFit};
use hdgc_core::var::VarModel;
use hdgc_core::TimeSeriesPanel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random VAR(p) with spectral radius `target` and a random PD `Σ_u`.
/// Scaling `A_i` by `c^i` scales every companion eigenvalue by `c`.
pub fn random_stable_model(rng: &mut ChaCha8Rng, d: usize, p: usize, target: f64) -> VarModel {
    let density = if d > 10 { 3.0 / d as f64 } else { 1.0 };
    let slopes: Vec<DMatrix<f64>> = (0..p)
        .map(|_| {
            DMatrix::from_fn(d, d, |_, _| {
                if rng.random::<f64>() < density {
                    StandardNormal.sample(rng)
                } else {
                    0.0
                }
            })
        })
        .collect();
    let b: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let sigma: DMatrix<f64> = (&b * b.transpose()) / d as f64 + DMatrix::identity(d, d);
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let raw = VarModel::new(slopes.clone(), sigma.clone()).unwrap();
    let rho = raw.companion().spectral_radius().unwrap();
    let c = if rho > 0.0 { target / rho } else { 1.0 };
    let scaled = slopes
        .iter()
        .enumerate()
        .map(|(i, a)| a * c.powi(i as i32 + 1))
        .collect();
    VarModel::new(scaled, sigma).unwrap()
}

/// Dense `vec(Σ_W) = (I - 𝐀⊗𝐀)^{-1} vec(J'Σ_uJ)`.
pub fn kronecker_sigma_w(model: &VarModel) -> DMatrix<f64> {
    let comp = model.companion();
    let a = comp.matrix();
    let dp = a.nrows();
    let d = model.d();
    let mut q = DMatrix::zeros(dp, dp);
    q.view_mut((0, 0), (d, d)).copy_from(model.sigma_u());
    let kron = a.kronecker(a);
    let system = DMatrix::identity(dp * dp, dp * dp) - kron;
    let vec_q = DVector::from_column_slice(q.as_slice());
    let sol = system.lu().solve(&vec_q).unwrap();
    DMatrix::from_column_slice(dp, dp, sol.as_slice())
}

/// Unpenalised VAR(p) fit by least squares.
pub fn ols_fit(panel: &TimeSeriesPanel, p: usize) -> RegularizedFit {
    let (x, y) = lagged_design(panel, p).unwrap();
    let d = panel.d();
    let coef = (x.transpose() * &x).lu().solve(&(x.transpose() * &y)).unwrap();
    // coef is dp x d: column i holds equation i
    let slopes = (0..p)
        .map(|l| DMatrix::from_fn(d, d, |i, j| coef[(l * d + j, i)]))
        .collect();
    RegularizedFit::from_slopes(panel, slopes).unwrap()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(rng))
}
