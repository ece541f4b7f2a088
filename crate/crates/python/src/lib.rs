//! Python bindings: `import hdgc`.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

use hdgc_core::inference;
use hdgc_core::montecarlo::{self, McConfig, McMethod};
use hdgc_core::network;
use hdgc_core::pipeline::{self, TestConfig, TestMethod};
use hdgc_core::regularized::{Lambda, PenaltyConfig, PenaltyMethod};
use hdgc_core::var::{self, DgpKind, DgpSpec, DEFAULT_BURN_IN};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_json<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn penalty(method: &str, lambda: Option<f64>) -> PyResult<PenaltyConfig> {
    let method = match method {
        "lasso" => PenaltyMethod::Lasso,
        "adalasso" => PenaltyMethod::AdaptiveLasso,
        "elnet" => PenaltyMethod::ElasticNet,
        other => return Err(err(format!("unknown penalty `{other}`"))),
    };
    Ok(PenaltyConfig {
        method,
        lambda: lambda.map_or(Lambda::Auto, Lambda::Fixed),
        ..PenaltyConfig::default()
    })
}

/// Panel of `n` observations on `d` named series.
#[pyclass(name = "Panel", frozen)]
pub struct PyPanel {
    inner: var::TimeSeriesPanel,
}

#[pymethods]
impl PyPanel {
    #[new]
    #[pyo3(signature = (rows, names=None))]
    fn new(rows: Vec<Vec<f64>>, names: Option<Vec<String>>) -> PyResult<Self> {
        let data = matrix(&rows)?;
        let inner = match names {
            Some(names) => var::TimeSeriesPanel::new(data, names),
            None => var::TimeSeriesPanel::from_matrix(data),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: var::TimeSeriesPanel::from_csv_path(path).map_err(err)?,
        })
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(err)?;
        self.inner.write_csv(file).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        rows(self.inner.data())
    }

    fn __repr__(&self) -> String {
        format!("Panel(n={}, d={})", self.inner.n(), self.inner.d())
    }
}

/// Stable VAR(p) with Gaussian innovations.
#[pyclass(name = "VarModel", frozen)]
pub struct PyVarModel {
    inner: var::VarModel,
}

#[pymethods]
impl PyVarModel {
    #[new]
    fn new(slopes: Vec<Vec<Vec<f64>>>, sigma_u: Vec<Vec<f64>>) -> PyResult<Self> {
        let slopes = slopes.iter().map(|a| matrix(a)).collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: var::VarModel::new(slopes, matrix(&sigma_u)?).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: var::VarModel::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn slopes(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.slopes().iter().map(rows).collect()
    }

    fn sigma_u(&self) -> Vec<Vec<f64>> {
        rows(self.inner.sigma_u())
    }

    fn spectral_radius(&self) -> PyResult<f64> {
        self.inner.companion().spectral_radius().map_err(err)
    }

    #[pyo3(signature = (n, seed=0, burn_in=DEFAULT_BURN_IN))]
    fn simulate(&self, n: usize, seed: u64, burn_in: usize) -> PyResult<PyPanel> {
        Ok(PyPanel {
            inner: var::simulate(&self.inner, n, burn_in, seed).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("VarModel(d={}, p={})", self.inner.d(), self.inner.p())
    }
}

/// Built-in design: 1 banded, 2 block diagonal, 3 random sparse.
#[pyfunction]
#[pyo3(signature = (dgp, d, seed=0))]
fn make_dgp(dgp: u8, d: usize, seed: u64) -> PyResult<PyVarModel> {
    let kind = DgpKind::from_index(dgp).ok_or_else(|| err(format!("unknown design {dgp}")))?;
    Ok(PyVarModel {
        inner: var::make_dgp(&DgpSpec::new(kind, d, seed)).map_err(err)?,
    })
}

/// Penalised VAR fit of a demeaned panel; returns the fitted model and the
/// selected penalty level of each equation.
#[pyfunction]
#[pyo3(signature = (panel, p=4, penalty="adalasso", lam=None))]
fn fit(panel: &PyPanel, p: usize, penalty: &str, lam: Option<f64>) -> PyResult<(PyVarModel, Vec<f64>)> {
    let cfg = self::penalty(penalty, lam)?;
    let (fit, _) = pipeline::fit_stable(&panel.inner.demeaned(), p, &cfg, 1).map_err(err)?;
    let model = fit.model_hat().map_err(err)?;
    Ok((PyVarModel { inner: model }, fit.lambda_used))
}

/// Wald tests of `cause -> effect`; one dict per horizon.
#[pyfunction]
#[pyo3(signature = (panel, cause, effect, horizons, method="de2s-hc", p=4, bandwidth=None, penalty="adalasso", lam=None))]
#[allow(clippy::too_many_arguments)]
fn run_test<'py>(
    py: Python<'py>,
    panel: &PyPanel,
    cause: &str,
    effect: &str,
    horizons: Vec<usize>,
    method: &str,
    p: usize,
    bandwidth: Option<usize>,
    penalty: &str,
    lam: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let index = |name: &str| {
        panel
            .inner
            .index_of(name)
            .ok_or_else(|| err(format!("unknown series `{name}`")))
    };
    let method: TestMethod = method.parse().map_err(err)?;
    let cfg = TestConfig {
        p,
        penalty: self::penalty(penalty, lam)?,
        threshold: None,
        bandwidth,
    };
    let (c, e) = (index(cause)?, index(effect)?);
    let records = py
        .detach(|| pipeline::run_test(&panel.inner, c, e, &horizons, method, &cfg))
        .map_err(err)?;
    from_json(py, &serde_json::to_string(&records).map_err(err)?)
}

/// Size experiment; returns the summary CSV and the full result as a dict.
#[pyfunction]
#[pyo3(signature = (dgp, d, n, horizons, methods, reps, seed=0, p=2, level=0.05, workers=0, null_tolerance=1e-6))]
#[allow(clippy::too_many_arguments)]
fn mc<'py>(
    py: Python<'py>,
    dgp: u8,
    d: usize,
    n: usize,
    horizons: Vec<usize>,
    methods: Vec<String>,
    reps: usize,
    seed: u64,
    p: usize,
    level: f64,
    workers: usize,
    null_tolerance: f64,
) -> PyResult<(String, Bound<'py, PyAny>)> {
    let kind = DgpKind::from_index(dgp).ok_or_else(|| err(format!("unknown design {dgp}")))?;
    let methods = methods
        .iter()
        .map(|m| m.parse::<McMethod>().map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let mut cfg = McConfig::new(DgpSpec::new(kind, d, 0), n, horizons, methods, reps, seed);
    cfg.p = p;
    cfg.nominal_level = level;
    cfg.workers = workers;
    cfg.null_tolerance = null_tolerance;
    let result = py.detach(|| montecarlo::run_size_experiment(&cfg)).map_err(err)?;
    let table = montecarlo::summarize(std::slice::from_ref(&result)).map_err(err)?;
    Ok((table, from_json(py, &serde_json::to_string(&result).map_err(err)?)?))
}

/// All-pairs tests; optionally writes heatmaps into `out_dir`.
#[pyfunction]
#[pyo3(signature = (panel, horizons, method="de2s-hc", p=4, out_dir=None))]
fn run_network<'py>(
    py: Python<'py>,
    panel: &PyPanel,
    horizons: Vec<usize>,
    method: &str,
    p: usize,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let method: TestMethod = method.parse().map_err(err)?;
    let cfg = TestConfig {
        p,
        ..TestConfig::default()
    };
    let net = py
        .detach(|| network::run_network(&panel.inner, &horizons, method, &cfg))
        .map_err(err)?;
    if let Some(dir) = out_dir {
        network::export_heatmap(&net, &dir).map_err(err)?;
    }
    from_json(py, &serde_json::to_string(&net).map_err(err)?)
}

#[pyfunction]
fn chi2_sf(x: f64, df: f64) -> PyResult<f64> {
    inference::chi2_sf(x, df).map_err(err)
}

#[pymodule]
fn hdgc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPanel>()?;
    m.add_class::<PyVarModel>()?;
    m.add_function(wrap_pyfunction!(make_dgp, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_test, m)?)?;
    m.add_function(wrap_pyfunction!(mc, m)?)?;
    m.add_function(wrap_pyfunction!(run_network, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_sf, m)?)?;
    Ok(())
}
