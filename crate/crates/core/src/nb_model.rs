//! The NB2 count model: a Poisson whose mean is multiplied by a gamma
//! variate with unit mean and shape `1/theta`, giving
//! `E[y] = mu` and `Var[y] = mu (1 + theta mu)`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Linear predictors are clamped to this magnitude before exponentiation.
pub const ETA_LIMIT: f64 = 700.0;

/// Above this count the log-gamma ratio replaces the explicit log sum.
const LOG_SUM_MAX_COUNT: u64 = 10_000;

/// Overdispersion `theta > 0`; `1/theta` is the gamma mixing shape.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Overdispersion(f64);

impl Overdispersion {
    pub fn new(theta: f64) -> Result<Self> {
        if theta.is_finite() && theta > 0.0 {
            Ok(Self(theta))
        } else {
            Err(Error::Domain(format!("overdispersion must be positive and finite, got {theta}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Gamma shape `delta = 1/theta`.
    pub fn shape(self) -> f64 {
        1.0 / self.0
    }
}

/// Conditional means `mu_i = exp(x_i beta)`, all strictly positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector(DVector<f64>);

impl MeanVector {
    pub fn new(mu: DVector<f64>) -> Result<Self> {
        if let Some(i) = mu.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Domain(format!("mean at index {i} is {}, expected positive", mu[i])));
        }
        Ok(Self(mu))
    }

    pub fn from_slice(mu: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(mu))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `log(Gamma(1/theta + y) / Gamma(1/theta))` as the finite sum
/// `sum_{j<y} log(j + 1/theta)`.
pub fn log_gamma_ratio_sum(y: u64, theta: Overdispersion) -> f64 {
    let shape = theta.shape();
    (0..y).map(|j| (j as f64 + shape).ln()).sum()
}

/// The same ratio through the log-gamma function.
pub fn log_gamma_ratio_lgamma(y: u64, theta: Overdispersion) -> f64 {
    let shape = theta.shape();
    ln_gamma(shape + y as f64) - ln_gamma(shape)
}

/// Log probability of `y` under NB2 with mean `mu`.
pub fn nb_logpmf(y: u64, mu: f64, theta: Overdispersion) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Domain(format!("mean must be positive and finite, got {mu}")));
    }
    let t = theta.value();
    let ratio = if y <= LOG_SUM_MAX_COUNT {
        log_gamma_ratio_sum(y, theta)
    } else {
        log_gamma_ratio_lgamma(y, theta)
    };
    let yf = y as f64;
    let lp = ratio - ln_gamma(yf + 1.0) - (yf + 1.0 / t) * (t * mu).ln_1p() + yf * (t * mu).ln();
    if lp.is_finite() {
        Ok(lp)
    } else {
        Err(Error::Domain(format!(
            "log-probability is not finite for y = {y}, mu = {mu}, theta = {t}"
        )))
    }
}

/// `(mean, variance) = (mu, mu (1 + theta mu))`.
pub fn nb_mean_var(mu: f64, theta: Overdispersion) -> (f64, f64) {
    (mu, mu * (1.0 + theta.value() * mu))
}

/// Draws one NB2 count as a gamma-mixed Poisson.
pub fn sample_count<R: Rng + ?Sized>(rng: &mut R, mu: f64, theta: Overdispersion) -> Result<u64> {
    // Gamma(shape 1/theta, scale theta) has mean 1 and variance theta.
    let mixing = Gamma::new(theta.shape(), theta.value())
        .map_err(|e| Error::Domain(format!("gamma mixing distribution: {e}")))?;
    let rate = mixing.sample(rng) * mu;
    if rate <= 0.0 {
        return Ok(0);
    }
    if !(rate < Poisson::<f64>::MAX_LAMBDA) {
        return Err(Error::Domain(format!("poisson rate {rate} is out of range")));
    }
    let poisson =
        Poisson::new(rate).map_err(|e| Error::Domain(format!("poisson rate {rate}: {e}")))?;
    Ok(poisson.sample(rng) as u64)
}

/// Draws one count per mean from a stream seeded by `seed`.
pub fn nb_sample(mu: &MeanVector, theta: Overdispersion, seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    nb_sample_with(&mut rng, mu, theta)
}

pub fn nb_sample_with<R: Rng + ?Sized>(
    rng: &mut R,
    mu: &MeanVector,
    theta: Overdispersion,
) -> Result<Vec<u64>> {
    mu.as_vector().iter().map(|&m| sample_count(rng, m, theta)).collect()
}

/// Linear predictor `X beta`, rejecting entries at or beyond the clamp.
pub fn linear_predictor(data: &Dataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    data.check_coef_len(beta)?;
    let eta = data.x() * beta;
    if let Some(row) = eta.iter().position(|e| !(e.abs() < ETA_LIMIT)) {
        return Err(Error::IllScaled { row, eta: eta[row], limit: ETA_LIMIT });
    }
    Ok(eta)
}

/// Conditional means `exp(X beta)`.
pub fn means(data: &Dataset, beta: &DVector<f64>) -> Result<MeanVector> {
    let eta = linear_predictor(data, beta)?;
    MeanVector::new(eta.map(f64::exp))
}

/// NB2 log-likelihood of `beta` with `theta` held fixed.
pub fn log_likelihood(data: &Dataset, beta: &DVector<f64>) -> Result<f64> {
    let mu = means(data, beta)?;
    let theta = data.theta();
    data.counts()
        .iter()
        .zip(mu.as_vector().iter())
        .map(|(&y, &m)| nb_logpmf(y, m, theta))
        .sum()
}

/// Score vector `sum_i (y_i - mu_i) / (1 + theta mu_i) x_i`.
pub fn score(data: &Dataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    let mu = means(data, beta)?;
    let t = data.theta().value();
    let resid = DVector::from_iterator(
        data.n(),
        data.y().iter().zip(mu.as_vector().iter()).map(|(y, m)| (y - m) / (1.0 + t * m)),
    );
    Ok(data.x().tr_mul(&resid))
}

/// Diagonal of the Fisher-scoring weight matrix, `mu_i / (1 + theta mu_i)`.
pub fn irls_weights(mu: &MeanVector, theta: Overdispersion) -> DVector<f64> {
    let t = theta.value();
    mu.as_vector().map(|m| m / (1.0 + t * m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn th(t: f64) -> Overdispersion {
        Overdispersion::new(t).unwrap()
    }

    #[test]
    fn logpmf_hand_values() {
        assert_relative_eq!(nb_logpmf(0, 1.0, th(1.0)).unwrap(), 0.5f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(nb_logpmf(1, 1.0, th(1.0)).unwrap(), 0.25f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn logpmf_matches_density_formula() {
        // direct evaluation of the gamma-ratio density
        for &(y, mu, t) in &[(0u64, 0.5, 0.5), (3, 2.0, 1.0), (7, 5.0, 2.0), (12, 1.3, 0.2)] {
            let a = 1.0 / t;
            let direct = ln_gamma(a + y as f64) - ln_gamma(a) - ln_gamma(1.0 + y as f64)
                + a * (a / (a + mu)).ln()
                + y as f64 * (mu / (a + mu)).ln();
            assert_relative_eq!(nb_logpmf(y, mu, th(t)).unwrap(), direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn pmf_normalizes() {
        for &mu in &[0.5, 1.0, 2.0, 5.0] {
            for &t in &[0.5, 1.0, 2.0] {
                let total: f64 =
                    (0..=5000).map(|y| nb_logpmf(y, mu, th(t)).unwrap().exp()).sum();
                assert!(total > 1.0 - 1e-6 && total < 1.0 + 1e-9, "mu {mu} theta {t}: {total}");
            }
        }
    }

    #[test]
    fn log_sum_identity() {
        for &t in &[0.1, 0.5, 1.0, 2.0, 7.5] {
            for y in 0..=50 {
                let s = log_gamma_ratio_sum(y, th(t));
                let g = log_gamma_ratio_lgamma(y, th(t));
                assert!((s - g).abs() < 1e-10, "y {y} theta {t}: {s} vs {g}");
            }
        }
    }

    #[test]
    fn large_counts_use_lgamma_branch() {
        let y = 20_000;
        let lp = nb_logpmf(y, 20_000.0, th(0.01)).unwrap();
        assert!(lp.is_finite() && lp < 0.0);
    }

    #[test]
    fn logpmf_rejects_bad_mean() {
        assert!(matches!(nb_logpmf(1, 0.0, th(1.0)), Err(Error::Domain(_))));
        assert!(matches!(nb_logpmf(1, f64::NAN, th(1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn overdispersion_must_be_positive() {
        assert!(Overdispersion::new(0.0).is_err());
        assert!(Overdispersion::new(-1.0).is_err());
        assert!(Overdispersion::new(f64::INFINITY).is_err());
    }

    #[test]
    fn mean_var_formula() {
        assert_eq!(nb_mean_var(2.0, th(1.0)), (2.0, 6.0));
        assert_eq!(nb_mean_var(3.0, th(2.0)), (3.0, 21.0));
        let (m, v) = nb_mean_var(1.0, th(1e-12));
        assert_eq!(m, 1.0);
        assert_relative_eq!(v, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn weights_hand_values_and_bounds() {
        let mu = MeanVector::from_slice(&[1.0, 0.1, 50.0, 1e6]).unwrap();
        let w = irls_weights(&mu, th(1.0));
        assert_relative_eq!(w[0], 0.5, epsilon = 1e-15);
        assert!(w.iter().all(|&wi| wi > 0.0 && wi < 1.0));
        let poisson = irls_weights(&mu, th(1e-14));
        for (a, b) in poisson.iter().zip(mu.as_vector().iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-7);
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let mu = MeanVector::from_slice(&[0.5, 2.0, 9.0]).unwrap();
        let a = nb_sample(&mu, th(1.0), 42).unwrap();
        let b = nb_sample(&mu, th(1.0), 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_observation_likelihood() {
        let data = Dataset::new(DMatrix::from_element(2, 1, 1.0), vec![0, 0], th(1.0)).unwrap();
        let ll = log_likelihood(&data, &DVector::from_element(1, 0.0)).unwrap();
        assert_relative_eq!(ll, 2.0 * -(2f64.ln()), epsilon = 1e-14);
    }

    #[test]
    fn score_vanishes_at_sample_mean() {
        let data =
            Dataset::new(DMatrix::from_element(3, 1, 1.0), vec![1, 2, 3], th(1.7)).unwrap();
        let s = score(&data, &DVector::from_element(1, 2f64.ln())).unwrap();
        assert!(s[0].abs() < 1e-14);
    }

    #[test]
    fn clamp_raises_ill_scaled() {
        let data = Dataset::new(DMatrix::from_element(2, 1, 1.0), vec![0, 1], th(1.0)).unwrap();
        let err = means(&data, &DVector::from_element(1, 701.0)).unwrap_err();
        assert!(matches!(err, Error::IllScaled { row: 0, .. }));
    }
}
