//! Closed-form risk of the estimator family in the eigenbasis of `X'WX`,
//! MMSE superiority checks of LT against MLE, RR and LE, MSE curves over a
//! shrinkage grid, and condition-number diagnostics.
//!
//! Risk is always evaluated at a caller-supplied `alpha` (the true
//! transformed coefficients in simulation, `alpha_hat` as a plug-in on data).

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{variance_diag, EigenSystem, EstimatorKind, ShrinkageParams};
use crate::irls_fit::weighted_cross_product;
use crate::shrinkage_selectors::{select_d_lt, SelectorInputs};

/// Relative tolerance used when deciding positive definiteness.
pub const PD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RiskProfile {
    pub kind: EstimatorKind,
    pub params: ShrinkageParams,
    pub bias: DVector<f64>,
    pub variance: DMatrix<f64>,
    pub mmse: DMatrix<f64>,
    pub mse: f64,
}

/// Bias multiplier per eigen-coordinate: `bias = Q diag(f) alpha`.
fn bias_factor(kind: EstimatorKind, lambda: &DVector<f64>, p: ShrinkageParams) -> DVector<f64> {
    lambda.map(|l| match kind {
        EstimatorKind::Mle => 0.0,
        EstimatorKind::Ridge => -p.k / (l + p.k),
        EstimatorKind::Liu => (p.d - 1.0) / (l + 1.0),
        EstimatorKind::LiuType => -(p.d + p.k) / (l + p.k),
    })
}

fn check_alpha(eigen: &EigenSystem, alpha: &DVector<f64>) -> Result<()> {
    if alpha.len() != eigen.dim() {
        return Err(Error::Dimension(format!(
            "alpha has length {}, eigen system has dimension {}",
            alpha.len(),
            eigen.dim()
        )));
    }
    Ok(())
}

fn profile_unchecked(
    kind: EstimatorKind,
    eigen: &EigenSystem,
    alpha: &DVector<f64>,
    params: ShrinkageParams,
) -> RiskProfile {
    let bias_eig = bias_factor(kind, &eigen.lambda, params).component_mul(alpha);
    let bias = &eigen.q * &bias_eig;
    let variance = eigen.compose(&variance_diag(kind, &eigen.lambda, params));
    let mmse = &variance + &bias * bias.transpose();
    let mse = mmse.trace();
    RiskProfile { kind, params, bias, variance, mmse, mse }
}

/// Bias, variance, MMSE and scalar MSE of an estimator at `alpha`.
pub fn risk_profile(
    kind: EstimatorKind,
    eigen: &EigenSystem,
    alpha: &DVector<f64>,
    params: ShrinkageParams,
) -> Result<RiskProfile> {
    params.validate(kind)?;
    check_alpha(eigen, alpha)?;
    Ok(profile_unchecked(kind, eigen, alpha, params))
}

/// Scalar MSE as an explicit sum over eigen-coordinates.
pub fn scalar_mse(
    kind: EstimatorKind,
    lambda: &DVector<f64>,
    alpha: &DVector<f64>,
    params: ShrinkageParams,
) -> Result<f64> {
    params.validate(kind)?;
    if lambda.len() != alpha.len() {
        return Err(Error::Dimension("lambda and alpha lengths differ".into()));
    }
    let (k, d) = (params.k, params.d);
    Ok(lambda
        .iter()
        .zip(alpha.iter())
        .map(|(&l, &a)| {
            let a2 = a * a;
            match kind {
                EstimatorKind::Mle => 1.0 / l,
                EstimatorKind::Ridge => (l + k * k * a2) / (l + k).powi(2),
                EstimatorKind::Liu => {
                    (l + d).powi(2) / (l * (l + 1.0).powi(2)) + (d - 1.0).powi(2) * a2 / (l + 1.0).powi(2)
                }
                EstimatorKind::LiuType => {
                    (l - d).powi(2) / (l * (l + k).powi(2)) + (d + k).powi(2) * a2 / (l + k).powi(2)
                }
            }
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    /// LT against MLE.
    LtVsMle,
    /// LT against RR at the same `k`.
    LtVsRidge,
    /// LT against LE at the same `d`.
    LtVsLiu,
}

impl Theorem {
    pub const ALL: [Theorem; 3] = [Theorem::LtVsMle, Theorem::LtVsRidge, Theorem::LtVsLiu];

    pub fn label(self) -> &'static str {
        match self {
            Theorem::LtVsMle => "T2.2",
            Theorem::LtVsRidge => "T2.3",
            Theorem::LtVsLiu => "T2.4",
        }
    }

    pub fn competitor(self) -> EstimatorKind {
        match self {
            Theorem::LtVsMle => EstimatorKind::Mle,
            Theorem::LtVsRidge => EstimatorKind::Ridge,
            Theorem::LtVsLiu => EstimatorKind::Liu,
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremVerdict {
    pub theorem: Theorem,
    /// Smallest value of the eigenvalue precondition expression, where one exists.
    pub precondition_value: f64,
    pub precondition_holds: bool,
    /// Whether the diagonal matrix `M` of the quadratic form is positive definite.
    pub form_matrix_pd: bool,
    pub quadratic_form: f64,
    /// `M` positive definite and the quadratic form below one.
    pub quadratic_ok: bool,
    /// Eigenvalues of `MMSE(competitor) - MMSE(LT)`, ascending.
    pub difference_eigenvalues: Vec<f64>,
    pub difference_min_eigenvalue: f64,
    pub difference_pd: bool,
}

impl TheoremVerdict {
    /// The theorem's sufficient conditions hold.
    pub fn conditions_hold(&self) -> bool {
        self.precondition_holds && self.quadratic_ok
    }

    /// Conditions imply a positive definite difference.
    pub fn is_consistent(&self) -> bool {
        !self.conditions_hold() || self.difference_pd
    }
}

/// Positive definiteness with the relative tolerance: the smallest
/// eigenvalue must exceed `-PD_TOLERANCE * sum |eigenvalues|`.
pub fn is_positive_definite(eigenvalues: &[f64]) -> bool {
    let scale: f64 = eigenvalues.iter().map(|e| e.abs()).sum();
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    min > -PD_TOLERANCE * scale
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Evaluates a superiority theorem at `(k, d)`: its eigenvalue
/// precondition, the quadratic-form condition, and independently the
/// spectrum of the MMSE difference.
pub fn theorem_check(
    theorem: Theorem,
    eigen: &EigenSystem,
    alpha: &DVector<f64>,
    k: f64,
    d: f64,
) -> Result<TheoremVerdict> {
    check_alpha(eigen, alpha)?;
    if !(k.is_finite() && k > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParam(format!("need k > 0 and finite d, got k = {k}, d = {d}")));
    }
    let lambda = &eigen.lambda;
    let lt_params = ShrinkageParams::liu_type(k, d);
    let lt_var = variance_diag(EstimatorKind::LiuType, lambda, lt_params);
    let lt_bias = bias_factor(EstimatorKind::LiuType, lambda, lt_params).component_mul(alpha);

    let (precondition_value, precondition_holds, form_diag, form_vec, form_scale, competitor_params) =
        match theorem {
            Theorem::LtVsMle => {
                let pre = lambda
                    .iter()
                    .map(|l| (d + k) * (2.0 * l + k - d))
                    .fold(f64::INFINITY, f64::min);
                let m = variance_diag(EstimatorKind::Mle, lambda, ShrinkageParams::mle()) - &lt_var;
                (pre, pre > 0.0, m, lt_bias.clone(), 1.0, ShrinkageParams::mle())
            }
            Theorem::LtVsRidge => {
                let min_l = lambda.min();
                let rr = ShrinkageParams::ridge(k);
                let m = variance_diag(EstimatorKind::Ridge, lambda, rr) - &lt_var;
                let b = DVector::from_iterator(
                    lambda.len(),
                    lambda.iter().zip(alpha.iter()).map(|(l, a)| a / (l + k)),
                );
                (2.0 * min_l - d, d < 2.0 * min_l, m, b, d * d + 2.0 * d * k, rr)
            }
            Theorem::LtVsLiu => {
                let pre = lambda
                    .iter()
                    .map(|l| l * (k + 2.0 * d - 1.0) + d * (k + 1.0))
                    .fold(f64::INFINITY, f64::min);
                let le = ShrinkageParams::liu(d);
                let m = variance_diag(EstimatorKind::Liu, lambda, le) - &lt_var;
                (pre, pre > 0.0 && d > 0.0 && d < 1.0, m, lt_bias.clone(), 1.0, le)
            }
        };

    let form_matrix_pd = form_diag.iter().all(|&m| m > 0.0);
    let quadratic_form = form_scale
        * form_vec
            .iter()
            .zip(form_diag.iter())
            .map(|(b, m)| if *b == 0.0 { 0.0 } else { b * b / m })
            .sum::<f64>();
    let quadratic_ok = form_matrix_pd && quadratic_form < 1.0;

    let lt = profile_unchecked(EstimatorKind::LiuType, eigen, alpha, lt_params);
    let other = profile_unchecked(theorem.competitor(), eigen, alpha, competitor_params);
    let difference = other.mmse - lt.mmse;
    let difference_eigenvalues = sorted_eigenvalues(&difference);
    let difference_min_eigenvalue = difference_eigenvalues[0];
    let difference_pd = is_positive_definite(&difference_eigenvalues);

    Ok(TheoremVerdict {
        theorem,
        precondition_value,
        precondition_holds,
        form_matrix_pd,
        quadratic_form,
        quadratic_ok,
        difference_eigenvalues,
        difference_min_eigenvalue,
        difference_pd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    K,
    D,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::D => "d",
        }
    }
}

/// Grid for an MSE sweep. Sweeping `k` traces LT (at fixed `lt_d`) and RR;
/// sweeping `d` traces LE.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub lt_d: f64,
}

impl SweepGrid {
    /// Evenly spaced values from `from` to `to` inclusive (within half a step).
    pub fn range(param: SweepParam, from: f64, to: f64, step: f64, lt_d: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && from.is_finite() && to.is_finite()) || to < from {
            return Err(Error::Usage(format!("invalid sweep range {from}..{to} step {step}")));
        }
        let count = ((to - from) / step + 0.5).floor() as usize + 1;
        let values = (0..count).map(|i| from + i as f64 * step).collect();
        Ok(Self { param, values, lt_d })
    }

    /// Open unit interval used for the default curves, `0.01 ..= 0.99`.
    pub fn unit_interval(param: SweepParam, lt_d: f64) -> Self {
        Self { param, values: (1..100).map(|i| i as f64 / 100.0).collect(), lt_d }
    }

    /// LT's `d` from the selector rule at the given safety factor.
    pub fn with_selected_d(param: SweepParam, values: Vec<f64>, eigen: &EigenSystem, safety: f64) -> Result<Self> {
        let lt_d = select_d_lt(&SelectorInputs::from_eigen(eigen)?, safety)?;
        Ok(Self { param, values, lt_d })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub parameter: SweepParam,
    pub value: f64,
    pub estimator: EstimatorKind,
    pub mse: f64,
}

/// Scalar MSE of each curve over the grid, sorted by (estimator, value).
pub fn mse_sweep(eigen: &EigenSystem, alpha: &DVector<f64>, grid: &SweepGrid) -> Result<Vec<CurveRow>> {
    check_alpha(eigen, alpha)?;
    if grid.values.is_empty() {
        return Err(Error::Usage("sweep grid is empty".into()));
    }
    let mut rows = Vec::new();
    for &v in &grid.values {
        let curves: Vec<(EstimatorKind, ShrinkageParams)> = match grid.param {
            SweepParam::K => vec![
                (EstimatorKind::LiuType, ShrinkageParams::liu_type(v, grid.lt_d)),
                (EstimatorKind::Ridge, ShrinkageParams::ridge(v)),
            ],
            SweepParam::D => vec![(EstimatorKind::Liu, ShrinkageParams::liu(v))],
        };
        for (kind, params) in curves {
            let mse = risk_profile(kind, eigen, alpha, params)?.mse;
            rows.push(CurveRow { parameter: grid.param, value: v, estimator: kind, mse });
        }
    }
    rows.sort_by(|a, b| {
        a.estimator
            .label()
            .cmp(b.estimator.label())
            .then(a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(rows)
}

/// Eigenvalue spread of a symmetric matrix in both conventions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionMeasure {
    /// `max eigenvalue / min eigenvalue`.
    pub ratio: f64,
    /// Square root of the ratio.
    pub sqrt_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub xx: ConditionMeasure,
    pub xwx: ConditionMeasure,
}

pub fn condition_measure(m: &DMatrix<f64>) -> Result<ConditionMeasure> {
    let ev = sorted_eigenvalues(m);
    let (min, max) = (ev[0], ev[ev.len() - 1]);
    if !(min > 0.0) || !(min > f64::EPSILON * max) {
        return Err(Error::Singular(format!(
            "matrix is singular for condition measure (eigenvalues {min:.3e} .. {max:.3e})"
        )));
    }
    let ratio = max / min;
    Ok(ConditionMeasure { ratio, sqrt_ratio: ratio.sqrt() })
}

/// Condition measures of `X'X` and `X'WX`.
pub fn condition_report(data: &Dataset, weights: &DVector<f64>) -> Result<ConditionReport> {
    if weights.len() != data.n() {
        return Err(Error::Dimension("weight vector length differs from n".into()));
    }
    let xx = data.x().tr_mul(data.x());
    Ok(ConditionReport {
        xx: condition_measure(&xx)?,
        xwx: condition_measure(&weighted_cross_product(data.x(), weights))?,
    })
}
