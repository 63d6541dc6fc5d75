//! Maximum likelihood for NB2 regression by iteratively re-weighted least
//! squares (Fisher scoring with the log link).
//!
//! Each step solves `(X'WX) beta = X'WZ` with `W` and the working response
//! `Z` evaluated at the previous iterate. The weights and working response
//! that produced the final iterate are kept in [`MleFit`], so the returned
//! coefficients satisfy `beta = (X'WX)^-1 X'WZ` up to rounding.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nb_model::{irls_weights, means, MeanVector};

/// Starting point for the scoring iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitRule {
    /// Least-squares fit of `log(max(y, 0.5))` on `X`.
    #[default]
    LogLeastSquares,
    /// All coefficients zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    tol: f64,
    max_iter: usize,
    init: InitRule,
}

impl FitOptions {
    pub fn new(tol: f64, max_iter: usize, init: InitRule) -> Result<Self> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::InvalidParam(format!("tolerance must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(Error::InvalidParam("max_iter must be at least 1".into()));
        }
        Ok(Self { tol, max_iter, init })
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn init(&self) -> InitRule {
        self.init
    }
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, init: InitRule::LogLeastSquares }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub beta: DVector<f64>,
    /// Diagonal of the weight matrix used in the final step.
    pub weights: DVector<f64>,
    /// Working response used in the final step.
    pub working: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Max absolute coefficient change per iteration.
    pub trace: Vec<f64>,
}

/// `Z_i = log(mu_i) + (y_i - mu_i) / mu_i`.
pub fn working_response(data: &Dataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    let mu = means(data, beta)?;
    Ok(working_from_means(data, &mu))
}

fn working_from_means(data: &Dataset, mu: &MeanVector) -> DVector<f64> {
    let mu = mu.as_vector();
    DVector::from_iterator(
        data.n(),
        data.y().iter().zip(mu.iter()).map(|(y, m)| m.ln() + (y - m) / m),
    )
}

/// `X' diag(w) X`.
pub fn weighted_cross_product(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut wx = x.clone();
    for (mut row, &wi) in wx.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    let mut xwx = x.tr_mul(&wx);
    symmetrize(&mut xwx);
    xwx
}

/// `X' diag(w) z`.
pub fn weighted_moment(x: &DMatrix<f64>, w: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    x.tr_mul(&w.component_mul(z))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn spd_factor(a: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

struct Step {
    beta: DVector<f64>,
    weights: DVector<f64>,
    working: DVector<f64>,
}

fn scoring_step(data: &Dataset, beta_prev: &DVector<f64>) -> Result<Step> {
    let mu = means(data, beta_prev)?;
    let weights = irls_weights(&mu, data.theta());
    let working = working_from_means(data, &mu);
    let xwx = weighted_cross_product(data.x(), &weights);
    let chol = spd_factor(&xwx, "X'WX")?;
    let beta = chol.solve(&weighted_moment(data.x(), &weights, &working));
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Singular("scoring step produced non-finite coefficients".into()));
    }
    Ok(Step { beta, weights, working })
}

/// One Fisher-scoring update `(X'WX)^-1 X'WZ` at `beta_prev`.
pub fn irls_step(data: &Dataset, beta_prev: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(scoring_step(data, beta_prev)?.beta)
}

/// Initial coefficients for the given rule.
pub fn initial_beta(data: &Dataset, rule: InitRule) -> Result<DVector<f64>> {
    match rule {
        InitRule::Zero => Ok(DVector::zeros(data.n_coef())),
        InitRule::LogLeastSquares => {
            let target = data.y().map(|y| y.max(0.5).ln());
            let svd = data.x().clone().svd(true, true);
            svd.solve(&target, 1e-12)
                .map_err(|e| Error::Singular(format!("least-squares initialization: {e}")))
        }
    }
}

/// Iterates [`irls_step`] until the largest coefficient change drops below
/// `opts.tol()` or `opts.max_iter()` steps have run.
pub fn fit_mle(data: &Dataset, opts: &FitOptions) -> Result<MleFit> {
    let mut beta = initial_beta(data, opts.init())?;
    let mut trace = Vec::new();
    let mut last = None;
    for _ in 0..opts.max_iter() {
        let step = scoring_step(data, &beta)?;
        let change = step
            .beta
            .iter()
            .zip(beta.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trace.push(change);
        beta = step.beta.clone();
        last = Some(step);
        if change < opts.tol() {
            break;
        }
    }
    let step = last.expect("max_iter >= 1");
    let converged = trace.last().is_some_and(|&c| c < opts.tol());
    Ok(MleFit {
        beta: step.beta,
        weights: step.weights,
        working: step.working,
        iterations: trace.len(),
        converged,
        trace,
    })
}
