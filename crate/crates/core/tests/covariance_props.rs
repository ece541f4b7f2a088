mod common;

use common::{kronecker_sigma_w, random_stable_model, rng};
use hdgc_core::covariance::{psi_h, sigma_uw, sigma_w, sigma_w_lag, CovarianceSet};
use hdgc_core::linalg::matrix_power;
use hdgc_core::regularized::RegularizedFit;
use hdgc_core::var::{make_dgp, simulate, DgpKind, DgpSpec, VarModel};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn lyapunov_residual(model: &VarModel, s: &DMatrix<f64>) -> f64 {
    let comp = model.companion();
    let a = comp.matrix();
    let d = model.d();
    let mut q = DMatrix::zeros(s.nrows(), s.ncols());
    q.view_mut((0, 0), (d, d)).copy_from(model.sigma_u());
    (s - a * s * a.transpose() - q).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lyapunov_and_kronecker(seed in 0u64..10_000, d in 1usize..4, p in 1usize..3, rho in 0.1f64..0.95) {
        let model = random_stable_model(&mut rng(seed), d, p, rho);
        let s = sigma_w(&model).unwrap();
        prop_assert!(lyapunov_residual(&model, &s) < 1e-8);
        let oracle = kronecker_sigma_w(&model);
        prop_assert!((&s - &oracle).amax() < 1e-9 * oracle.amax().max(1.0));
        prop_assert!((&s - s.transpose()).amax() < 1e-10);
        prop_assert!(s.clone().cholesky().is_some());
    }

    #[test]
    fn sigma_uw_is_block_toeplitz(seed in 0u64..10_000, d in 1usize..5, p in 1usize..4) {
        let model = random_stable_model(&mut rng(seed), d, p, 0.8);
        let s = sigma_uw(&model);
        for i in 0..p {
            for j in 0..p {
                let block = s.view((i * d, j * d), (d, d));
                if j > i {
                    prop_assert!(block.iter().all(|&v| v == 0.0));
                } else if i > 0 && j > 0 {
                    prop_assert_eq!(block.into_owned(), s.view(((i - 1) * d, (j - 1) * d), (d, d)).into_owned());
                }
            }
        }
        let sv = s.singular_values();
        prop_assert!(sv.min() > 1e-10 * sv.max());
    }

    #[test]
    fn psi_recursion(seed in 0u64..10_000, d in 1usize..5, p in 1usize..4) {
        let model = random_stable_model(&mut rng(seed), d, p, 0.8);
        prop_assert_eq!(psi_h(&model, 0), DMatrix::identity(d, d));
        for h in 1..=12usize {
            let mut rec = DMatrix::zeros(d, d);
            for (i, a) in model.slopes().iter().enumerate() {
                if h > i {
                    rec += a * psi_h(&model, h - i - 1);
                }
            }
            prop_assert!((psi_h(&model, h) - rec).amax() < 1e-10);
        }
    }

    #[test]
    fn companion_round_trip(seed in 0u64..10_000, d in 1usize..6, p in 1usize..4) {
        let model = random_stable_model(&mut rng(seed), d, p, 0.7);
        let comp = model.companion();
        prop_assert_eq!(comp.slopes(), model.slopes().to_vec());
        prop_assert_eq!(comp.selection_j() * comp.matrix() * comp.selection_j().transpose(), model.slopes()[0].clone());
    }
}

#[test]
fn lag_transpose_and_scaling() {
    let model = VarModel::new(vec![DMatrix::from_element(1, 1, 0.5)], DMatrix::identity(1, 1)).unwrap();
    let s0 = sigma_w(&model).unwrap();
    assert_eq!(sigma_w_lag(&model, 0).unwrap(), s0);
    assert!((sigma_w_lag(&model, 2).unwrap()[(0, 0)] - 0.25 * s0[(0, 0)]).abs() < 1e-15);
    let m2 = random_stable_model(&mut rng(5), 3, 2, 0.8);
    assert_eq!(sigma_w_lag(&m2, -1).unwrap(), sigma_w_lag(&m2, 1).unwrap().transpose());
    let set = CovarianceSet::from_model(&m2, 4).unwrap();
    assert_eq!(set.sigma_w_lag(3), matrix_power(&set.companion, 3) * &set.sigma_w);
}

#[test]
fn sigma_u_hat_examples() {
    let panel = hdgc_core::TimeSeriesPanel::from_matrix(DMatrix::from_column_slice(3, 1, &[0.0, 1.0, -1.0])).unwrap();
    let fit = RegularizedFit::from_slopes(&panel, vec![DMatrix::zeros(1, 1)]).unwrap();
    assert_eq!(fit.sigma_u_hat()[(0, 0)], 1.0);

    let m = make_dgp(&DgpSpec::new(DgpKind::Tridiagonal, 5, 0)).unwrap();
    let panel = simulate(&m, 5000, 200, 21).unwrap();
    let oracle = RegularizedFit::from_slopes(&panel, m.slopes().to_vec()).unwrap();
    assert!((oracle.sigma_u_hat() - m.sigma_u()).amax() < 0.06);
}

#[test]
fn two_by_two_kronecker_example() {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4]);
    let model = VarModel::new(vec![a], DMatrix::identity(2, 2)).unwrap();
    let s = sigma_w(&model).unwrap();
    assert!((s - kronecker_sigma_w(&model)).amax() < 1e-12);
}
