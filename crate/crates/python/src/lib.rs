//! Python bindings. Matrices cross the boundary as lists of rows, vectors as
//! lists of floats.

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use liutype_nb::cli_io::{check_theorems, CountTable, FitReport, Session};
use liutype_nb::mc_sim::{run_cell, run_cell_with_workers, SimDesign, SimEstimator};
use liutype_nb::nb_model;
use liutype_nb::risk_analysis::risk_profile;
use liutype_nb::shrinkage_selectors::{self as sel, KRule, SelectorInputs, DEFAULT_SAFETY};
use liutype_nb::{Error, EstimatorKind, MeanVector, Overdispersion, ShrinkageParams};

create_exception!(liutype_nb_py, NumericalError, PyArithmeticError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        e if e.exit_code() == 3 => NumericalError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for liutype_nb::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize) -> PyResult<DMatrix<f64>> {
    if rows.len() != n {
        return Err(PyValueError::new_err(format!("x has {} rows but y has {n}", rows.len())));
    }
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("x rows have unequal lengths"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn parse_kind(kind: &str) -> PyResult<EstimatorKind> {
    match kind.to_ascii_lowercase().as_str() {
        "mle" => Ok(EstimatorKind::Mle),
        "rr" | "ridge" => Ok(EstimatorKind::Ridge),
        "le" | "liu" => Ok(EstimatorKind::Liu),
        "lt" | "liu_type" | "liu-type" => Ok(EstimatorKind::LiuType),
        other => Err(PyValueError::new_err(format!("unknown estimator '{other}' (mle, rr, le, lt)"))),
    }
}

/// A fitted count regression with its selected shrinkage parameters.
#[pyclass(frozen, module = "liutype_nb_py")]
struct Fit {
    session: Session,
}

impl Fit {
    /// Missing parameters fall back to the selectors: RR uses K5, LE uses
    /// D5, LT uses kAM and the bound rule d.
    fn params(&self, kind: EstimatorKind, k: Option<f64>, d: Option<f64>) -> ShrinkageParams {
        let s = &self.session.selected;
        match kind {
            EstimatorKind::Mle => ShrinkageParams::mle(),
            EstimatorKind::Ridge => ShrinkageParams::ridge(k.unwrap_or(s.k5.value)),
            EstimatorKind::Liu => ShrinkageParams::liu(d.unwrap_or(s.d5)),
            EstimatorKind::LiuType => ShrinkageParams::liu_type(k.unwrap_or(s.k_am.value), d.unwrap_or(s.d)),
        }
    }
}

#[pymethods]
impl Fit {
    #[getter]
    fn theta(&self) -> f64 {
        self.session.theta.theta.value()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.session.mle.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.session.mle.converged
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.session.system.eigen.lambda.as_slice().to_vec()
    }

    #[getter]
    fn alpha_hat(&self) -> Vec<f64> {
        self.session.system.eigen.alpha_hat.as_slice().to_vec()
    }

    /// Selected d, kAM, kMAX, K5 and D5.
    fn selected<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = &self.session.selected;
        let out = PyDict::new(py);
        out.set_item("safety", s.safety)?;
        out.set_item("d", s.d)?;
        out.set_item("k_am", s.k_am.value)?;
        out.set_item("k_max", s.k_max.value)?;
        out.set_item("k5", s.k5.value)?;
        out.set_item("d5", s.d5)?;
        Ok(out)
    }

    #[pyo3(signature = (kind, k=None, d=None))]
    fn coefficients(&self, kind: &str, k: Option<f64>, d: Option<f64>) -> PyResult<Vec<f64>> {
        let kind = parse_kind(kind)?;
        let fit = self.session.reported_fit(kind, self.params(kind, k, d)).py()?;
        Ok(fit.beta.as_slice().to_vec())
    }

    #[pyo3(signature = (kind, k=None, d=None))]
    fn std_errors(&self, kind: &str, k: Option<f64>, d: Option<f64>) -> PyResult<Vec<f64>> {
        let kind = parse_kind(kind)?;
        let fit = self.session.reported_fit(kind, self.params(kind, k, d)).py()?;
        Ok(fit.std_errors.as_slice().to_vec())
    }

    #[pyo3(signature = (kind, k=None, d=None))]
    fn covariance(&self, kind: &str, k: Option<f64>, d: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
        let kind = parse_kind(kind)?;
        let cov = self.session.reported_fit(kind, self.params(kind, k, d)).py()?.covariance;
        Ok(cov.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// Plug-in scalar MSE with alpha_hat standing in for the true alpha.
    #[pyo3(signature = (kind, k=None, d=None))]
    fn mse(&self, kind: &str, k: Option<f64>, d: Option<f64>) -> PyResult<f64> {
        let kind = parse_kind(kind)?;
        let eigen = &self.session.system.eigen;
        Ok(risk_profile(kind, eigen, &eigen.alpha_hat, self.params(kind, k, d)).py()?.mse)
    }

    /// One dict per theorem; `k` defaults to kAM and `d` to the selected d.
    #[pyo3(signature = (k=None, d=None))]
    fn check_theorems<'py>(&self, py: Python<'py>, k: Option<f64>, d: Option<f64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let (_, _, verdicts) = check_theorems(&self.session, k, d).py()?;
        verdicts
            .iter()
            .map(|v| {
                let out = PyDict::new(py);
                out.set_item("theorem", v.theorem.label())?;
                out.set_item("precondition_value", v.precondition_value)?;
                out.set_item("precondition_holds", v.precondition_holds)?;
                out.set_item("quadratic_form", v.quadratic_form)?;
                out.set_item("quadratic_ok", v.quadratic_ok)?;
                out.set_item("difference_eigenvalues", v.difference_eigenvalues.clone())?;
                out.set_item("difference_pd", v.difference_pd)?;
                Ok(out)
            })
            .collect()
    }

    /// The text report printed by the command-line `fit`.
    fn report(&self) -> PyResult<String> {
        Ok(FitReport::build("python".into(), self.session.clone()).py()?.render())
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(n={}, p={}, theta={:.4}, iterations={})",
            self.session.data.n(),
            self.session.data.p(),
            self.theta(),
            self.iterations()
        )
    }
}

/// Fits MLE and the shrinkage estimators. `x` holds predictor rows without
/// the intercept; `theta=None` estimates it from the response moments.
#[pyfunction]
#[pyo3(signature = (x, y, theta=None, standardize=false, safety=DEFAULT_SAFETY))]
fn fit(x: Vec<Vec<f64>>, y: Vec<u64>, theta: Option<f64>, standardize: bool, safety: f64) -> PyResult<Fit> {
    let predictors = rows_to_matrix(&x, y.len())?;
    let table = CountTable {
        response_name: "y".into(),
        predictor_names: (1..=predictors.ncols()).map(|j| format!("x{j}")).collect(),
        predictors,
        counts: y,
    };
    let session = Session::new(table, theta, standardize, safety).py()?;
    Ok(Fit { session })
}

/// Same as `fit`, reading a CSV file with a header row.
#[pyfunction]
#[pyo3(signature = (path, response, theta=None, standardize=false, safety=DEFAULT_SAFETY))]
fn fit_csv(path: std::path::PathBuf, response: &str, theta: Option<f64>, standardize: bool, safety: f64) -> PyResult<Fit> {
    Ok(Fit { session: Session::load(&path, response, theta, standardize, safety).py()? })
}

#[pyfunction]
fn nb_logpmf(y: u64, mu: f64, theta: f64) -> PyResult<f64> {
    nb_model::nb_logpmf(y, mu, Overdispersion::new(theta).py()?).py()
}

#[pyfunction]
fn nb_sample(mu: Vec<f64>, theta: f64, seed: u64) -> PyResult<Vec<u64>> {
    let mu = MeanVector::from_slice(&mu).py()?;
    nb_model::nb_sample(&mu, Overdispersion::new(theta).py()?, seed).py()
}

fn inputs(lambda: &[f64], alpha_hat: &[f64]) -> PyResult<SelectorInputs> {
    SelectorInputs::from_slices(lambda, alpha_hat).py()
}

#[pyfunction]
#[pyo3(signature = (lambda_, alpha_hat, safety=DEFAULT_SAFETY))]
fn select_d(lambda_: Vec<f64>, alpha_hat: Vec<f64>, safety: f64) -> PyResult<f64> {
    sel::select_d_lt(&inputs(&lambda_, &alpha_hat)?, safety).py()
}

/// `rule` is "am" or "max".
#[pyfunction]
fn select_k(rule: &str, lambda_: Vec<f64>, alpha_hat: Vec<f64>, d: f64) -> PyResult<f64> {
    let rule = match rule.to_ascii_lowercase().as_str() {
        "am" => KRule::Am,
        "max" => KRule::Max,
        other => return Err(PyValueError::new_err(format!("unknown rule '{other}' (am, max)"))),
    };
    Ok(sel::select_k(rule, &inputs(&lambda_, &alpha_hat)?, d).py()?.value)
}

#[pyfunction]
fn select_k5(lambda_: Vec<f64>, alpha_hat: Vec<f64>) -> PyResult<f64> {
    Ok(sel::select_k5(&inputs(&lambda_, &alpha_hat)?).value)
}

#[pyfunction]
fn select_d5(lambda_: Vec<f64>, alpha_hat: Vec<f64>) -> PyResult<f64> {
    Ok(sel::select_d5(&inputs(&lambda_, &alpha_hat)?))
}

/// Runs one Monte Carlo cell; returns estimator label -> empirical MSE plus
/// the exclusion count under "excluded".
#[pyfunction]
#[pyo3(signature = (n, p, rho, theta, reps, seed, safety=DEFAULT_SAFETY, workers=None))]
#[allow(clippy::too_many_arguments)]
fn simulate_cell<'py>(
    py: Python<'py>,
    n: usize,
    p: usize,
    rho: f64,
    theta: f64,
    reps: usize,
    seed: u64,
    safety: f64,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let design = SimDesign { n, p, rho, theta: Overdispersion::new(theta).py()?, reps, seed, safety };
    let result = py
        .detach(|| match workers {
            Some(w) => run_cell_with_workers(&design, w),
            None => run_cell(&design),
        })
        .py()?;
    let out = PyDict::new(py);
    for est in SimEstimator::ALL {
        out.set_item(est.label(), result.mse_of(est))?;
    }
    out.set_item("excluded", result.excluded)?;
    Ok(out)
}

#[pymodule]
fn liutype_nb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Fit>()?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_csv, m)?)?;
    m.add_function(wrap_pyfunction!(nb_logpmf, m)?)?;
    m.add_function(wrap_pyfunction!(nb_sample, m)?)?;
    m.add_function(wrap_pyfunction!(select_d, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(select_k5, m)?)?;
    m.add_function(wrap_pyfunction!(select_d5, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_cell, m)?)?;
    Ok(())
}
