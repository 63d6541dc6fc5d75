//! Data-driven choices of the shrinkage parameters.
//!
//! For LT, `d` is taken below the bound that keeps every individual
//! `k_j = (lambda_j - d (1 + lambda_j a_j^2)) / (lambda_j a_j^2)` positive,
//! and `k` aggregates those individual values by their mean or maximum.
//! RR uses `K5 = max_j |a_j| sqrt(lambda_j)` and LE uses
//! `D5 = max(0, min_j a_j^2 / (1/lambda_j + a_j^2))`, where `a = Q' beta_hat`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::estimators::EigenSystem;

/// Floor applied to nonpositive selector outputs.
pub const MIN_SHRINKAGE: f64 = 1e-6;

/// Default fraction of the `d` bound used by [`select_d_lt`].
pub const DEFAULT_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorInputs {
    lambda: DVector<f64>,
    alpha_hat: DVector<f64>,
}

impl SelectorInputs {
    pub fn new(lambda: DVector<f64>, alpha_hat: DVector<f64>) -> Result<Self> {
        if lambda.len() != alpha_hat.len() || lambda.is_empty() {
            return Err(Error::Dimension(format!(
                "selector inputs need equal nonempty lengths, got {} and {}",
                lambda.len(),
                alpha_hat.len()
            )));
        }
        if lambda.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Domain("eigenvalues must be positive and finite".into()));
        }
        if lambda.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("eigenvalues must be in descending order".into()));
        }
        if alpha_hat.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain("transformed coefficients must be finite".into()));
        }
        Ok(Self { lambda, alpha_hat })
    }

    pub fn from_slices(lambda: &[f64], alpha_hat: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(lambda), DVector::from_column_slice(alpha_hat))
    }

    pub fn from_eigen(eigen: &EigenSystem) -> Result<Self> {
        Self::new(eigen.lambda.clone(), eigen.alpha_hat.clone())
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn alpha_hat(&self) -> &DVector<f64> {
        &self.alpha_hat
    }

    /// Asymptotic variance of each transformed MLE coordinate, `1/lambda_j`.
    pub fn sigma2_hat(&self) -> DVector<f64> {
        self.lambda.map(|l| 1.0 / l)
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambda.iter().copied().zip(self.alpha_hat.iter().map(|a| a * a))
    }
}

/// A selected parameter with bookkeeping on how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub value: f64,
    /// The raw value was nonpositive and was raised to [`MIN_SHRINKAGE`].
    pub clamped: bool,
    /// Coordinates left out of the aggregation (zero `a_j` or negative `k_j`).
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KRule {
    /// Arithmetic mean of the individual values.
    Am,
    /// Maximum of the individual values.
    Max,
}

impl KRule {
    pub fn label(self) -> &'static str {
        match self {
            KRule::Am => "kAM",
            KRule::Max => "kMAX",
        }
    }
}

/// Largest `d` keeping every individual `k_j` positive:
/// `min_j lambda_j / (1 + lambda_j a_j^2)`.
pub fn d_bound(inputs: &SelectorInputs) -> f64 {
    inputs.pairs().map(|(l, a2)| l / (1.0 + l * a2)).fold(f64::INFINITY, f64::min)
}

/// `safety * d_bound`.
pub fn select_d_lt(inputs: &SelectorInputs, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidParam(format!("safety factor must be in (0, 1], got {safety}")));
    }
    Ok(safety * d_bound(inputs))
}

/// Individual minimizers `k_j`; `None` where `a_j = 0`.
pub fn k_individual(inputs: &SelectorInputs, d: f64) -> Result<Vec<Option<f64>>> {
    let ks: Vec<Option<f64>> = inputs
        .pairs()
        .map(|(l, a2)| (a2 > 0.0).then(|| (l - d * (1.0 + l * a2)) / (l * a2)))
        .collect();
    if ks.iter().all(Option::is_none) {
        return Err(Error::DegenerateSelector(
            "every transformed coefficient is zero; individual k values are undefined".into(),
        ));
    }
    Ok(ks)
}

/// Aggregates the individual `k_j` at `d`. Undefined and negative entries
/// are excluded and counted.
pub fn select_k(rule: KRule, inputs: &SelectorInputs, d: f64) -> Result<Selection> {
    let ks = k_individual(inputs, d)?;
    let kept: Vec<f64> = ks.iter().flatten().copied().filter(|k| *k >= 0.0).collect();
    let excluded = ks.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::DegenerateSelector(format!(
            "all individual k values are negative at d = {d}"
        )));
    }
    let raw = match rule {
        KRule::Am => kept.iter().sum::<f64>() / kept.len() as f64,
        KRule::Max => kept.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(floor_positive(raw, excluded))
}

/// Ridge parameter `K5 = max_j sqrt(a_j^2 / sigma_j^2)` with `sigma_j^2 = 1/lambda_j`.
pub fn select_k5(inputs: &SelectorInputs) -> Selection {
    let raw = inputs
        .pairs()
        .map(|(l, a2)| (a2 / (1.0 / l)).sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    floor_positive(raw, 0)
}

/// Liu parameter `D5 = max(0, min_j a_j^2 / (1/lambda_j + a_j^2))`.
pub fn select_d5(inputs: &SelectorInputs) -> f64 {
    let m = inputs.pairs().map(|(l, a2)| a2 / (1.0 / l + a2)).fold(f64::INFINITY, f64::min);
    m.max(0.0)
}

fn floor_positive(raw: f64, excluded: usize) -> Selection {
    if raw > 0.0 {
        Selection { value: raw, clamped: false, excluded }
    } else {
        Selection { value: MIN_SHRINKAGE, clamped: true, excluded }
    }
}

/// Derivative in `k` of the scalar LT risk
/// `sum_j (lambda_j - d)^2 / (lambda_j (lambda_j + k)^2) + (d + k)^2 a_j^2 / (lambda_j + k)^2`.
pub fn mse_k_derivative(inputs: &SelectorInputs, k: f64, d: f64) -> f64 {
    inputs
        .pairs()
        .map(|(l, a2)| {
            let s3 = (l + k).powi(3);
            -2.0 * (l - d).powi(2) / (l * s3) + 2.0 * (k + d) * a2 * (l - d) / s3
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inputs(l: &[f64], a: &[f64]) -> SelectorInputs {
        SelectorInputs::from_slices(l, a).unwrap()
    }

    #[test]
    fn bound_hand_value() {
        let s = inputs(&[2.0, 0.5], &[1.0, -1.0]);
        assert_relative_eq!(d_bound(&s), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(select_d_lt(&s, 0.9).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(select_d_lt(&s, 1.0).unwrap(), d_bound(&s));
        assert_eq!(d_bound(&inputs(&[3.0, 0.7], &[0.0, 0.0])), 0.7);
    }

    #[test]
    fn safety_out_of_range() {
        let s = inputs(&[2.0], &[1.0]);
        assert!(select_d_lt(&s, 0.0).is_err());
        assert!(select_d_lt(&s, 1.5).is_err());
    }

    #[test]
    fn individual_k_hand_values() {
        let s = inputs(&[2.0], &[1.0]);
        assert_relative_eq!(k_individual(&s, 0.2).unwrap()[0].unwrap(), 0.7, epsilon = 1e-15);
        let s = inputs(&[3.0, 1.0], &[0.5, 2.0]);
        let k0 = k_individual(&s, 0.0).unwrap();
        assert_relative_eq!(k0[0].unwrap(), 4.0, epsilon = 1e-15);
        assert_relative_eq!(k0[1].unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn at_bound_argmin_coordinate_hits_zero() {
        let s = inputs(&[2.0, 0.5], &[1.0, 1.0]);
        let ks = k_individual(&s, d_bound(&s)).unwrap();
        assert!(ks[1].unwrap().abs() < 1e-15);
        assert!(ks[0].unwrap() > 0.0);
    }

    #[test]
    fn zero_alpha_excluded() {
        let s = inputs(&[2.0, 1.0], &[0.0, 1.0]);
        let ks = k_individual(&s, 0.1).unwrap();
        assert!(ks[0].is_none());
        let sel = select_k(KRule::Am, &s, 0.1).unwrap();
        assert_eq!(sel.excluded, 1);
        assert_relative_eq!(sel.value, (1.0 - 0.2) / 1.0, epsilon = 1e-15);
        assert!(matches!(
            k_individual(&inputs(&[2.0, 1.0], &[0.0, 0.0]), 0.1),
            Err(Error::DegenerateSelector(_))
        ));
    }

    #[test]
    fn aggregation_hand_values() {
        // lambda = 1, a^2 = (1 - d)/(k + d) gives k_j = k
        let d = 0.1;
        let s = inputs(&[1.0, 1.0], &[(0.9f64 / 0.8).sqrt(), (0.9f64 / 0.4).sqrt()]);
        let am = select_k(KRule::Am, &s, d).unwrap();
        let max = select_k(KRule::Max, &s, d).unwrap();
        assert_relative_eq!(am.value, 0.5, epsilon = 1e-12);
        assert_relative_eq!(max.value, 0.7, epsilon = 1e-12);
        let one = inputs(&[1.5], &[0.8]);
        assert_eq!(select_k(KRule::Am, &one, 0.1).unwrap(), select_k(KRule::Max, &one, 0.1).unwrap());
    }

    #[test]
    fn negatives_beyond_bound_are_excluded() {
        let s = inputs(&[2.0, 0.5], &[1.0, 1.0]);
        let sel = select_k(KRule::Am, &s, 0.5).unwrap();
        assert_eq!(sel.excluded, 1);
        assert_relative_eq!(sel.value, (2.0 - 1.5) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn k5_and_d5_hand_values() {
        let s = inputs(&[4.0, 1.0], &[0.5, 2.0]);
        assert_relative_eq!(select_k5(&s).value, 2.0, epsilon = 1e-15);
        assert_relative_eq!(select_d5(&s), 0.5, epsilon = 1e-15);
        assert_relative_eq!(select_k5(&inputs(&[1.0], &[1.0])).value, 1.0, epsilon = 1e-15);
        let zero = inputs(&[4.0, 1.0], &[0.0, 0.0]);
        let k5 = select_k5(&zero);
        assert!(k5.clamped && k5.value == MIN_SHRINKAGE);
        assert_eq!(select_d5(&zero), 0.0);
    }

    #[test]
    fn derivative_vanishes_at_individual_k() {
        let s = inputs(&[2.0], &[1.0]);
        assert!(mse_k_derivative(&s, 0.7, 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SelectorInputs::from_slices(&[1.0, 2.0], &[0.0, 0.0]).is_err());
        assert!(SelectorInputs::from_slices(&[1.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(SelectorInputs::from_slices(&[1.0], &[0.0, 0.0]).is_err());
    }
}
