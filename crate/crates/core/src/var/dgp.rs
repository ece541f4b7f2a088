//! Monte Carlo data generating processes built from VAR(2) root matrices:
//! `(I - Λ_1 L)(I - Λ_2 L) w_t = u_t`, so `A_1 = Λ_1 + Λ_2` and `A_2 = -Λ_1 Λ_2`.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::VarModel;
use crate::error::{Error, Result};
use crate::seed::mix_seed;

pub const DGP_MAX_RETRIES: usize = 100;
const ROOT_DIAGONAL: f64 = 0.3;
const ROOT_OFF_DIAGONAL: f64 = -0.2;
const BLOCK_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    /// `Λ_{ij} = 0.3^{|i-j|+1}`.
    Tridiagonal,
    /// 5x5 diagonal blocks, diagonal 0.3, two off-diagonal entries per column at -0.2.
    BlockDiagonal,
    /// Diagonal 0.3, three off-diagonal entries per column at -0.2.
    Random,
}

impl DgpKind {
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(Self::Tridiagonal),
            2 => Some(Self::BlockDiagonal),
            3 => Some(Self::Random),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::Tridiagonal => 1,
            Self::BlockDiagonal => 2,
            Self::Random => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub d: usize,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, d: usize, seed: u64) -> Self {
        Self { kind, d, seed }
    }
}

/// `Σ_{ij} = 0.5^{|i-j|}`.
pub fn dgp_sigma_u(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| 0.5_f64.powi(i.abs_diff(j) as i32))
}

pub fn tridiagonal_root(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| ROOT_DIAGONAL.powi(i.abs_diff(j) as i32 + 1))
}

fn block_diagonal_root(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::from_diagonal_element(d, d, ROOT_DIAGONAL);
    let mut start = 0;
    while start < d {
        let size = BLOCK_SIZE.min(d - start);
        let picks = 2.min(size - 1);
        for col in 0..size {
            let others: Vec<usize> = (0..size).filter(|&r| r != col).collect();
            for k in sample(rng, others.len(), picks) {
                m[(start + others[k], start + col)] = ROOT_OFF_DIAGONAL;
            }
        }
        start += size;
    }
    m
}

fn random_root(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::from_diagonal_element(d, d, ROOT_DIAGONAL);
    let picks = 3.min(d.saturating_sub(1));
    for col in 0..d {
        let others: Vec<usize> = (0..d).filter(|&r| r != col).collect();
        for k in sample(rng, others.len(), picks) {
            m[(others[k], col)] = ROOT_OFF_DIAGONAL;
        }
    }
    m
}

pub fn model_from_roots(l1: &DMatrix<f64>, l2: &DMatrix<f64>, sigma_u: DMatrix<f64>) -> Result<VarModel> {
    let a1 = l1 + l2;
    let a2 = -(l1 * l2);
    VarModel::new(vec![a1, a2], sigma_u)
}

/// Builds the VAR(2) of the requested design. Random designs are redrawn with
/// a derived sub-seed until the companion matrix is stable.
pub fn make_dgp(spec: &DgpSpec) -> Result<VarModel> {
    let d = spec.d;
    if d == 0 {
        return Err(Error::InvalidInput("DGP dimension must be positive".into()));
    }
    let sigma = dgp_sigma_u(d);
    if spec.kind == DgpKind::Tridiagonal {
        let root = tridiagonal_root(d);
        let model = model_from_roots(&root, &root, sigma)?;
        let rho = model.companion().spectral_radius()?;
        if rho >= 1.0 {
            return Err(Error::Unstable(rho));
        }
        return Ok(model);
    }
    for attempt in 0..DGP_MAX_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, attempt as u64));
        let (l1, l2) = match spec.kind {
            DgpKind::BlockDiagonal => (block_diagonal_root(d, &mut rng), block_diagonal_root(d, &mut rng)),
            _ => (random_root(d, &mut rng), random_root(d, &mut rng)),
        };
        let model = model_from_roots(&l1, &l2, sigma.clone())?;
        if model.companion().spectral_radius()? < 1.0 {
            return Ok(model);
        }
        log::debug!("DGP draw {attempt} unstable, redrawing");
    }
    Err(Error::DgpRetriesExhausted(DGP_MAX_RETRIES))
}
