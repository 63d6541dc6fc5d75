//! The estimator family built on the weighted cross-product `X'WX` frozen at
//! the final IRLS step:
//!
//! * MLE: `beta_hat`
//! * RR:  `(X'WX + kI)^-1 X'WZ`
//! * LE:  `(X'WX + I)^-1 (X'WX + dI) beta_hat`
//! * LT:  `(X'WX + kI)^-1 (X'WX - dI) beta_hat`
//!
//! Covariances are assembled in the eigenbasis `X'WX = Q Lambda Q'`.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::irls_fit::{spd_factor, symmetrize, weighted_cross_product, weighted_moment, MleFit};

/// Eigenvalues below this fraction of the largest mark the system rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Orthogonal eigenvectors, one per column, matching `lambda`.
    pub q: DMatrix<f64>,
    /// Eigenvalues in descending order.
    pub lambda: DVector<f64>,
    /// `Q' beta_hat`.
    pub alpha_hat: DVector<f64>,
}

impl EigenSystem {
    /// Decomposes a symmetric positive definite matrix and rotates `beta`
    /// into its eigenbasis.
    pub fn from_cross_product(xwx: &DMatrix<f64>, beta: &DVector<f64>) -> Result<Self> {
        let m = xwx.nrows();
        if xwx.ncols() != m || beta.len() != m {
            return Err(Error::Dimension(format!(
                "cross-product is {}x{}, coefficient vector has length {}",
                xwx.nrows(),
                xwx.ncols(),
                beta.len()
            )));
        }
        let mut sym = xwx.clone();
        symmetrize(&mut sym);
        let eig = SymmetricEigen::new(sym);

        let mut vectors: Vec<(f64, Vec<f64>)> = (0..m)
            .map(|j| {
                let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
                // sign convention: first non-negligible component positive
                if let Some(&lead) = v.iter().find(|c| c.abs() > 1e-10) {
                    if lead < 0.0 {
                        v.iter_mut().for_each(|c| *c = -*c);
                    }
                }
                (eig.eigenvalues[j], v)
            })
            .collect();
        vectors.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| {
                    a.1.iter()
                        .zip(b.1.iter())
                        .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        });

        let lambda = DVector::from_iterator(m, vectors.iter().map(|(l, _)| *l));
        let largest = lambda[0];
        if !(largest > 0.0) || lambda[m - 1] <= RANK_TOLERANCE * largest {
            return Err(Error::Singular(format!(
                "cross-product is effectively rank deficient (eigenvalues {:.3e} .. {:.3e})",
                largest,
                lambda[m - 1]
            )));
        }
        let q = DMatrix::from_fn(m, m, |i, j| vectors[j].1[i]);
        let alpha_hat = q.tr_mul(beta);
        Ok(Self { q, lambda, alpha_hat })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// `Q diag(diag) Q'`.
    pub fn compose(&self, diag: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.q.clone();
        for (mut col, &s) in scaled.column_iter_mut().zip(diag.iter()) {
            col *= s;
        }
        let mut out = scaled * self.q.transpose();
        symmetrize(&mut out);
        out
    }

    /// `Q Lambda Q'`, the decomposed cross-product.
    pub fn reassemble(&self) -> DMatrix<f64> {
        self.compose(&self.lambda)
    }
}

/// Eigen-decomposition of `X'WX` at the MLE's final weights.
pub fn eigen_decompose(
    data: &Dataset,
    weights: &DVector<f64>,
    beta_mle: &DVector<f64>,
) -> Result<EigenSystem> {
    if weights.len() != data.n() {
        return Err(Error::Dimension("weight vector length differs from n".into()));
    }
    EigenSystem::from_cross_product(&weighted_cross_product(data.x(), weights), beta_mle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Mle,
    Ridge,
    Liu,
    LiuType,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Mle => "MLE",
            EstimatorKind::Ridge => "RR",
            EstimatorKind::Liu => "LE",
            EstimatorKind::LiuType => "LT",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Shrinkage parameters. `k` drives the ridge-type shift, `d` the Liu-type one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageParams {
    pub k: f64,
    pub d: f64,
}

impl ShrinkageParams {
    pub fn new(k: f64, d: f64) -> Self {
        Self { k, d }
    }

    pub fn mle() -> Self {
        Self { k: 0.0, d: 0.0 }
    }

    pub fn ridge(k: f64) -> Self {
        Self { k, d: 0.0 }
    }

    pub fn liu(d: f64) -> Self {
        Self { k: 1.0, d }
    }

    pub fn liu_type(k: f64, d: f64) -> Self {
        Self { k, d }
    }

    pub fn validate(&self, kind: EstimatorKind) -> Result<()> {
        let k_ok = self.k.is_finite() && self.k > 0.0;
        match kind {
            EstimatorKind::Mle => Ok(()),
            EstimatorKind::Ridge if !k_ok => {
                Err(Error::InvalidParam(format!("RR needs k > 0, got {}", self.k)))
            }
            EstimatorKind::Liu if !(self.d > 0.0 && self.d < 1.0) => {
                Err(Error::InvalidParam(format!("LE needs 0 < d < 1, got {}", self.d)))
            }
            EstimatorKind::LiuType if !k_ok || !self.d.is_finite() => Err(Error::InvalidParam(
                format!("LT needs k > 0 and finite d, got k = {}, d = {}", self.k, self.d),
            )),
            _ => Ok(()),
        }
    }
}

/// Per-coordinate variance multipliers in the eigenbasis.
pub(crate) fn variance_diag(kind: EstimatorKind, lambda: &DVector<f64>, p: ShrinkageParams) -> DVector<f64> {
    let (k, d) = (p.k, p.d);
    lambda.map(|l| match kind {
        EstimatorKind::Mle => 1.0 / l,
        EstimatorKind::Ridge => l / (l + k).powi(2),
        EstimatorKind::Liu => (l + d).powi(2) / (l * (l + 1.0).powi(2)),
        EstimatorKind::LiuType => (l - d).powi(2) / (l * (l + k).powi(2)),
    })
}

/// Everything the shrinkage estimators need from a converged MLE.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageSystem {
    pub xwx: DMatrix<f64>,
    pub xwz: DVector<f64>,
    pub beta_mle: DVector<f64>,
    pub eigen: EigenSystem,
}

impl ShrinkageSystem {
    pub fn from_fit(data: &Dataset, mle: &MleFit) -> Result<Self> {
        if !mle.converged {
            return Err(Error::NotConverged { iterations: mle.iterations });
        }
        let xwx = weighted_cross_product(data.x(), &mle.weights);
        let xwz = weighted_moment(data.x(), &mle.weights, &mle.working);
        let eigen = EigenSystem::from_cross_product(&xwx, &mle.beta)?;
        Ok(Self { xwx, xwz, beta_mle: mle.beta.clone(), eigen })
    }

    /// Builds a system directly from `X'WX` and `beta_hat`, taking
    /// `X'WZ = X'WX beta_hat`.
    pub fn from_parts(xwx: DMatrix<f64>, beta_mle: DVector<f64>) -> Result<Self> {
        let eigen = EigenSystem::from_cross_product(&xwx, &beta_mle)?;
        let mut xwx = xwx;
        symmetrize(&mut xwx);
        let xwz = &xwx * &beta_mle;
        Ok(Self { xwx, xwz, beta_mle, eigen })
    }

    pub fn dim(&self) -> usize {
        self.beta_mle.len()
    }

    fn shifted(&self, shift: f64) -> DMatrix<f64> {
        let mut m = self.xwx.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        m
    }

    /// Coefficients of the requested estimator.
    pub fn coefficients(&self, kind: EstimatorKind, params: ShrinkageParams) -> Result<DVector<f64>> {
        params.validate(kind)?;
        let beta = match kind {
            EstimatorKind::Mle => self.beta_mle.clone(),
            EstimatorKind::Ridge => spd_factor(&self.shifted(params.k), "X'WX + kI")?.solve(&self.xwz),
            EstimatorKind::Liu => {
                let rhs = self.shifted(params.d) * &self.beta_mle;
                spd_factor(&self.shifted(1.0), "X'WX + I")?.solve(&rhs)
            }
            EstimatorKind::LiuType => {
                let rhs = self.shifted(-params.d) * &self.beta_mle;
                spd_factor(&self.shifted(params.k), "X'WX + kI")?.solve(&rhs)
            }
        };
        Ok(beta)
    }

    /// Covariance matrix `Q diag(v) Q'` of the requested estimator.
    pub fn covariance(&self, kind: EstimatorKind, params: ShrinkageParams) -> Result<DMatrix<f64>> {
        params.validate(kind)?;
        Ok(self.eigen.compose(&variance_diag(kind, &self.eigen.lambda, params)))
    }

    pub fn estimate(&self, kind: EstimatorKind, params: ShrinkageParams) -> Result<EstimatorFit> {
        let beta = self.coefficients(kind, params)?;
        let covariance = self.covariance(kind, params)?;
        let std_errors = std_errors(&covariance)?;
        Ok(EstimatorFit { kind, params, beta, covariance, std_errors })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorFit {
    pub kind: EstimatorKind,
    pub params: ShrinkageParams,
    pub beta: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub std_errors: DVector<f64>,
}

/// Fits one estimator from a converged MLE.
pub fn estimate(
    kind: EstimatorKind,
    data: &Dataset,
    mle: &MleFit,
    params: ShrinkageParams,
) -> Result<EstimatorFit> {
    params.validate(kind)?;
    ShrinkageSystem::from_fit(data, mle)?.estimate(kind, params)
}

/// Square roots of the covariance diagonal. Round-off negatives down to
/// `-1e-12` are clamped to zero.
pub fn std_errors(covariance: &DMatrix<f64>) -> Result<DVector<f64>> {
    let diag = covariance.diagonal();
    if let Some(i) = diag.iter().position(|&v| v < -1e-12 || v.is_nan()) {
        return Err(Error::Domain(format!(
            "covariance diagonal entry {i} is {:.3e}; covariance assembly is inconsistent",
            diag[i]
        )));
    }
    Ok(diag.map(|v| v.max(0.0).sqrt()))
}
