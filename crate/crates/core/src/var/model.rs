use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-mean VAR(p): `w_t = A_1 w_{t-1} + ... + A_p w_{t-p} + u_t`, `u_t ~ (0, Σ_u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    slopes: Vec<DMatrix<f64>>,
    sigma_u: DMatrix<f64>,
}

impl VarModel {
    /// Validated constructor: square conformable slopes, symmetric positive
    /// definite `sigma_u`.
    pub fn new(slopes: Vec<DMatrix<f64>>, sigma_u: DMatrix<f64>) -> Result<Self> {
        let model = Self::from_estimate(slopes, sigma_u)?;
        let d = model.d();
        for i in 0..d {
            for j in 0..i {
                if (model.sigma_u[(i, j)] - model.sigma_u[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidInput("sigma_u is not symmetric".into()));
                }
            }
        }
        if !model.sigma_u_is_pd() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(model)
    }

    /// Constructor for estimated models, which only checks shapes. An
    /// estimated innovation covariance may be singular when `d >= n - p`.
    pub fn from_estimate(slopes: Vec<DMatrix<f64>>, sigma_u: DMatrix<f64>) -> Result<Self> {
        if slopes.is_empty() {
            return Err(Error::InvalidInput("lag order p must be >= 1".into()));
        }
        let d = sigma_u.nrows();
        if d == 0 || !sigma_u.is_square() {
            return Err(Error::Dimension("sigma_u must be a non-empty square matrix".into()));
        }
        if slopes.iter().any(|a| a.shape() != (d, d)) {
            return Err(Error::Dimension(format!("every slope matrix must be {d}x{d}")));
        }
        if slopes
            .iter()
            .chain(std::iter::once(&sigma_u))
            .any(|m| m.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput("non-finite model entry".into()));
        }
        Ok(Self { slopes, sigma_u })
    }

    pub fn p(&self) -> usize {
        self.slopes.len()
    }

    pub fn d(&self) -> usize {
        self.sigma_u.nrows()
    }

    pub fn slopes(&self) -> &[DMatrix<f64>] {
        &self.slopes
    }

    pub fn sigma_u(&self) -> &DMatrix<f64> {
        &self.sigma_u
    }

    pub fn sigma_u_is_pd(&self) -> bool {
        self.sigma_u.clone().cholesky().is_some()
    }

    pub fn with_sigma_u(&self, sigma_u: DMatrix<f64>) -> Result<Self> {
        Self::from_estimate(self.slopes.clone(), sigma_u)
    }

    pub fn companion(&self) -> CompanionMatrix {
        build_companion(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&VarModelJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: VarModelJson = serde_json::from_str(text)?;
        raw.into_model()
    }
}

#[derive(Serialize, Deserialize)]
struct VarModelJson {
    p: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
    sigma_u: Vec<Vec<f64>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix in model JSON".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl From<&VarModel> for VarModelJson {
    fn from(m: &VarModel) -> Self {
        Self {
            p: m.p(),
            a: m.slopes.iter().map(rows_of).collect(),
            sigma_u: rows_of(&m.sigma_u),
        }
    }
}

impl VarModelJson {
    fn into_model(self) -> Result<VarModel> {
        if self.a.len() != self.p {
            return Err(Error::Dimension(format!(
                "p = {} but {} slope matrices given",
                self.p,
                self.a.len()
            )));
        }
        let slopes = self.a.iter().map(|m| from_rows(m)).collect::<Result<Vec<_>>>()?;
        VarModel::new(slopes, from_rows(&self.sigma_u)?)
    }
}

/// The `dp x dp` companion matrix of a VAR(p).
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionMatrix {
    matrix: DMatrix<f64>,
    d: usize,
    p: usize,
}

impl CompanionMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `J = [I_d, 0, ..., 0]`.
    pub fn selection_j(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d * self.p, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Slope matrices read back from the top block row.
    pub fn slopes(&self) -> Vec<DMatrix<f64>> {
        (0..self.p)
            .map(|l| self.matrix.view((0, l * self.d), (self.d, self.d)).into_owned())
            .collect()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.matrix)
    }
}

pub fn build_companion(model: &VarModel) -> CompanionMatrix {
    let (d, p) = (model.d(), model.p());
    let dp = d * p;
    let mut matrix = DMatrix::zeros(dp, dp);
    for (l, a) in model.slopes().iter().enumerate() {
        matrix.view_mut((0, l * d), (d, d)).copy_from(a);
    }
    for k in d..dp {
        matrix[(k, k - d)] = 1.0;
    }
    CompanionMatrix { matrix, d, p }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension("spectral radius of a non-square matrix".into()));
    }
    if m.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let n = m.nrows();
    let mat = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eigenvalues = mat.eigenvalues().map_err(|_| Error::EigenNonConvergence)?;
    Ok(eigenvalues.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max))
}
