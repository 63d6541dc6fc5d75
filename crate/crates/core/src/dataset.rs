use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::nb_model::Overdispersion;

/// Count-regression data: a design matrix whose first column is the
/// intercept, a vector of nonnegative counts and a known overdispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    counts: Vec<u64>,
    y: DVector<f64>,
    theta: Overdispersion,
}

impl Dataset {
    /// Builds a dataset from a full design matrix that already carries the
    /// intercept column.
    pub fn new(x: DMatrix<f64>, counts: Vec<u64>, theta: Overdispersion) -> Result<Self> {
        let (n, cols) = x.shape();
        if cols == 0 {
            return Err(Error::Dimension("design matrix has no columns".into()));
        }
        if counts.len() != n {
            return Err(Error::Dimension(format!(
                "design has {n} rows but response has {} entries",
                counts.len()
            )));
        }
        if n <= cols {
            return Err(Error::Data(format!(
                "need more observations than coefficients: n = {n}, p + 1 = {cols}"
            )));
        }
        if let Some(row) = (0..n).find(|&i| x[(i, 0)] != 1.0) {
            return Err(Error::Data(format!(
                "first design column must be the intercept (all ones); row {row} holds {}",
                x[(row, 0)]
            )));
        }
        if let Some((i, j)) = (0..n)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .find(|&(i, j)| !x[(i, j)].is_finite())
        {
            return Err(Error::Data(format!("non-finite design entry at row {i}, column {j}")));
        }
        let y = DVector::from_iterator(n, counts.iter().map(|&c| c as f64));
        Ok(Self { x, counts, y, theta })
    }

    /// Prepends the intercept column to an n x p predictor matrix.
    pub fn with_intercept(
        predictors: &DMatrix<f64>,
        counts: Vec<u64>,
        theta: Overdispersion,
    ) -> Result<Self> {
        let n = predictors.nrows();
        let x = predictors.clone().insert_column(0, 1.0);
        debug_assert_eq!(x.nrows(), n);
        Self::new(x, counts, theta)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Counts as floating point.
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn theta(&self) -> Overdispersion {
        self.theta
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of coefficients, p + 1.
    pub fn n_coef(&self) -> usize {
        self.x.ncols()
    }

    /// Number of explanatory variables (excluding the intercept).
    pub fn p(&self) -> usize {
        self.x.ncols() - 1
    }

    /// Returns a copy with the observations reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::Dimension("permutation length differs from n".into()));
        }
        let x = DMatrix::from_fn(self.n(), self.n_coef(), |i, j| self.x[(order[i], j)]);
        let counts = order.iter().map(|&i| self.counts[i]).collect();
        Self::new(x, counts, self.theta)
    }

    /// Same data with a different overdispersion.
    pub fn with_theta(&self, theta: Overdispersion) -> Self {
        Self { theta, ..self.clone() }
    }

    pub(crate) fn check_coef_len(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.n_coef() {
            return Err(Error::Dimension(format!(
                "coefficient vector has length {}, design has {} columns",
                beta.len(),
                self.n_coef()
            )));
        }
        Ok(())
    }
}
