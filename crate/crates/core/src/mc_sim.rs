//! Monte Carlo comparison of the estimators on correlated designs.
//!
//! Each replication draws a fresh design and NB2 response from its own
//! ChaCha stream (root seed, stream = replication index), fits the MLE and
//! the four shrinkage estimators, and records squared coefficient errors.
//! Per-replication results are reduced in index order, so the outcome does
//! not depend on the number of worker threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, ShrinkageParams, ShrinkageSystem};
use crate::irls_fit::{fit_mle, FitOptions, InitRule};
use crate::nb_model::{means, nb_sample_with, Overdispersion};
use crate::shrinkage_selectors::{select_d5, select_d_lt, select_k, select_k5, KRule, SelectorInputs};

/// Largest tolerated share of excluded replications in a cell.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.2;

/// Convergence tolerance of the simulation fits.
pub const SIM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDesign {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub theta: Overdispersion,
    pub reps: usize,
    pub seed: u64,
    pub safety: f64,
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidParam("p must be at least 1".into()));
        }
        if self.n <= self.p + 1 {
            return Err(Error::InvalidParam(format!("need n > p + 1, got n = {}, p = {}", self.n, self.p)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParam("reps must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParam(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidParam(format!("safety must lie in (0, 1], got {}", self.safety)));
        }
        Ok(())
    }
}

/// Estimators reported by the simulation, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimEstimator {
    LtAm,
    LtMax,
    Ridge,
    Liu,
    Mle,
}

impl SimEstimator {
    pub const ALL: [SimEstimator; 5] =
        [SimEstimator::LtAm, SimEstimator::LtMax, SimEstimator::Ridge, SimEstimator::Liu, SimEstimator::Mle];

    pub fn label(self) -> &'static str {
        match self {
            SimEstimator::LtAm => "LT(kAM)",
            SimEstimator::LtMax => "LT(kMAX)",
            SimEstimator::Ridge => "RR",
            SimEstimator::Liu => "LE",
            SimEstimator::Mle => "MLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub design: SimDesign,
    /// Empirical MSE per estimator, in [`SimEstimator::ALL`] order.
    pub mse: [f64; 5],
    /// Replications dropped from every estimator.
    pub excluded: usize,
    /// Of the excluded, those whose MLE did not converge.
    pub nonconverged: usize,
    pub successes: usize,
}

impl SimResult {
    pub fn mse_of(&self, est: SimEstimator) -> f64 {
        let i = SimEstimator::ALL.iter().position(|&e| e == est).expect("listed estimator");
        self.mse[i]
    }
}

/// Correlated predictors: column `j` is `sqrt(1 - rho^2) z_j + rho z_{p+1}`
/// with all `z` independent standard normal, so every pair of columns has
/// correlation `rho^2`.
pub fn gen_design<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize, rho: f64) -> DMatrix<f64> {
    let own = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    let mut z = vec![0.0; p + 1];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        for j in 0..p {
            x[(i, j)] = own * z[j] + rho * z[p];
        }
    }
    x
}

/// Design from a dedicated seed.
pub fn gen_design_seeded(n: usize, p: usize, rho: f64, seed: u64) -> DMatrix<f64> {
    gen_design(&mut ChaCha20Rng::seed_from_u64(seed), n, p, rho)
}

/// True coefficients: intercept 0 and equal slopes `1/sqrt(p)`.
pub fn gen_slopes(p: usize) -> DVector<f64> {
    let slope = 1.0 / (p as f64).sqrt();
    DVector::from_fn(p + 1, |i, _| if i == 0 { 0.0 } else { slope })
}

/// Mean of `(b_r - beta)'(b_r - beta)` over replications.
pub fn empirical_mse(estimates: &[DVector<f64>], truth: &DVector<f64>) -> f64 {
    let total: f64 = estimates.iter().map(|b| (b - truth).norm_squared()).sum();
    total / estimates.len() as f64
}

enum RepOutcome {
    Done([f64; 5]),
    NotConverged,
    Failed,
}

fn replication_rng(seed: u64, rep: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Simulated dataset of replication `rep`.
pub fn replication_data(design: &SimDesign, rep: usize) -> Result<Dataset> {
    let mut rng = replication_rng(design.seed, rep);
    let predictors = gen_design(&mut rng, design.n, design.p, design.rho);
    let beta = gen_slopes(design.p);
    // means() needs a dataset; build it with placeholder counts first
    let provisional = Dataset::with_intercept(&predictors, vec![0; design.n], design.theta)?;
    let mu = means(&provisional, &beta)?;
    let counts = nb_sample_with(&mut rng, &mu, design.theta)?;
    Dataset::with_intercept(&predictors, counts, design.theta)
}

/// Coefficients of the five reported estimators on one dataset.
pub fn fit_all(data: &Dataset, safety: f64, opts: &FitOptions) -> Result<Option<[DVector<f64>; 5]>> {
    let mle = fit_mle(data, opts)?;
    if !mle.converged {
        return Ok(None);
    }
    let sys = ShrinkageSystem::from_fit(data, &mle)?;
    let inputs = SelectorInputs::from_eigen(&sys.eigen)?;
    let d = select_d_lt(&inputs, safety)?;
    let k_am = select_k(KRule::Am, &inputs, d)?.value;
    let k_max = select_k(KRule::Max, &inputs, d)?.value;
    let k5 = select_k5(&inputs).value;
    let d5 = select_d5(&inputs);
    Ok(Some([
        sys.coefficients(EstimatorKind::LiuType, ShrinkageParams::liu_type(k_am, d))?,
        sys.coefficients(EstimatorKind::LiuType, ShrinkageParams::liu_type(k_max, d))?,
        sys.coefficients(EstimatorKind::Ridge, ShrinkageParams::ridge(k5))?,
        sys.coefficients(EstimatorKind::Liu, ShrinkageParams::liu(d5))?,
        mle.beta,
    ]))
}

fn run_replication(design: &SimDesign, truth: &DVector<f64>, opts: &FitOptions, rep: usize) -> RepOutcome {
    let fitted = replication_data(design, rep).and_then(|data| fit_all(&data, design.safety, opts));
    match fitted {
        Ok(Some(betas)) => {
            let mut sq = [0.0; 5];
            for (s, b) in sq.iter_mut().zip(betas.iter()) {
                *s = (b - truth).norm_squared();
            }
            RepOutcome::Done(sq)
        }
        Ok(None) => RepOutcome::NotConverged,
        Err(e) => {
            log::debug!("replication {rep} excluded: {e}");
            RepOutcome::Failed
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot build worker pool: {e}")))
}

/// Runs one cell on the global rayon pool.
pub fn run_cell(design: &SimDesign) -> Result<SimResult> {
    run_cell_on(design, None)
}

/// Runs one cell on a dedicated pool of `workers` threads.
pub fn run_cell_with_workers(design: &SimDesign, workers: usize) -> Result<SimResult> {
    let pool = pool(workers)?;
    run_cell_on(design, Some(&pool))
}

fn run_cell_on(design: &SimDesign, pool: Option<&rayon::ThreadPool>) -> Result<SimResult> {
    design.validate()?;
    let truth = gen_slopes(design.p);
    let opts = FitOptions::new(SIM_TOLERANCE, 100, InitRule::LogLeastSquares)?;
    let work = || -> Vec<RepOutcome> {
        (0..design.reps)
            .into_par_iter()
            .map(|rep| run_replication(design, &truth, &opts, rep))
            .collect()
    };
    let outcomes = match pool {
        Some(p) => p.install(work),
        None => work(),
    };

    let mut sums = [0.0; 5];
    let mut successes = 0;
    let mut nonconverged = 0;
    let mut failed = 0;
    for outcome in &outcomes {
        match outcome {
            RepOutcome::Done(sq) => {
                successes += 1;
                for (s, v) in sums.iter_mut().zip(sq) {
                    *s += v;
                }
            }
            RepOutcome::NotConverged => nonconverged += 1,
            RepOutcome::Failed => failed += 1,
        }
    }
    let excluded = nonconverged + failed;
    if successes == 0 || excluded as f64 > MAX_EXCLUDED_FRACTION * design.reps as f64 {
        return Err(Error::DegenerateCell {
            excluded,
            reps: design.reps,
            reason: format!(
                "{nonconverged} nonconverged, {failed} failed; n = {}, p = {}, rho = {}, theta = {}",
                design.n,
                design.p,
                design.rho,
                design.theta.value()
            ),
        });
    }
    let mse = sums.map(|s| s / successes as f64);
    Ok(SimResult { design: *design, mse, excluded, nonconverged, successes })
}

/// One output row of a simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub p: usize,
    pub n: usize,
    pub rho: f64,
    pub theta: f64,
    pub estimator: SimEstimator,
    pub mse: f64,
    pub excluded: usize,
}

fn cell_order(a: &SimDesign, b: &SimDesign) -> std::cmp::Ordering {
    a.p.cmp(&b.p)
        .then(a.theta.value().total_cmp(&b.theta.value()))
        .then(a.rho.total_cmp(&b.rho))
        .then(a.n.cmp(&b.n))
}

/// Runs every cell and emits rows ordered by `(p, theta, rho, n)`, then
/// estimator. `workers = None` uses the global pool.
pub fn run_grid(cells: &[SimDesign], workers: Option<usize>) -> Result<Vec<GridRow>> {
    if cells.is_empty() {
        return Err(Error::Usage("simulation grid is empty".into()));
    }
    let mut ordered = cells.to_vec();
    ordered.sort_by(cell_order);
    let pool = workers.map(pool).transpose()?;
    let mut rows = Vec::with_capacity(ordered.len() * 5);
    for cell in &ordered {
        let res = run_cell_on(cell, pool.as_ref())?;
        log::info!(
            "cell p={} n={} rho={} theta={}: MLE {:.4}, excluded {}",
            cell.p,
            cell.n,
            cell.rho,
            cell.theta.value(),
            res.mse_of(SimEstimator::Mle),
            res.excluded
        );
        rows.extend(SimEstimator::ALL.iter().zip(res.mse.iter()).map(|(&estimator, &mse)| GridRow {
            p: cell.p,
            n: cell.n,
            rho: cell.rho,
            theta: cell.theta.value(),
            estimator,
            mse,
            excluded: res.excluded,
        }));
    }
    Ok(rows)
}

/// SplitMix64 finalizer, used to give each grid cell its own seed.
fn mix_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The full factor grid: p in {4, 6}, theta in {1, 2}, rho in {0.90, 0.95,
/// 0.99}, n in {50, 100, 200}; 36 cells in row order, each with its own seed.
pub fn paper_grid(reps: usize, seed: u64, safety: f64) -> Result<Vec<SimDesign>> {
    let mut cells = Vec::with_capacity(36);
    for p in [4, 6] {
        for theta in [1.0, 2.0] {
            for rho in [0.90, 0.95, 0.99] {
                for n in [50, 100, 200] {
                    let index = cells.len() as u64;
                    cells.push(SimDesign {
                        n,
                        p,
                        rho,
                        theta: Overdispersion::new(theta)?,
                        reps,
                        seed: mix_seed(seed, index),
                        safety,
                    });
                }
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cell(n: usize, p: usize, rho: f64, reps: usize, seed: u64) -> SimDesign {
        SimDesign { n, p, rho, theta: Overdispersion::new(1.0).unwrap(), reps, seed, safety: 0.9 }
    }

    #[test]
    fn slopes_have_unit_norm() {
        assert_eq!(gen_slopes(4).as_slice(), &[0.0, 0.5, 0.5, 0.5, 0.5]);
        assert_eq!(gen_slopes(1).as_slice(), &[0.0, 1.0]);
        for p in 1..12 {
            let b = gen_slopes(p);
            assert_relative_eq!(b.rows(1, p).norm_squared(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rho_zero_keeps_independent_columns() {
        let x = gen_design_seeded(5, 3, 0.0, 9);
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for i in 0..5 {
            let z: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            for j in 0..3 {
                assert_eq!(x[(i, j)], z[j]);
            }
        }
    }

    #[test]
    fn exact_estimates_give_zero_mse() {
        let truth = gen_slopes(3);
        assert_eq!(empirical_mse(&vec![truth.clone(); 10], &truth), 0.0);
        let off = &truth + DVector::from_element(4, 0.5);
        assert_relative_eq!(empirical_mse(&[off, truth.clone()], &truth), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn design_validation() {
        assert!(cell(5, 4, 0.9, 10, 1).validate().is_err());
        assert!(cell(50, 4, 1.0, 10, 1).validate().is_err());
        assert!(cell(50, 4, 0.9, 0, 1).validate().is_err());
        assert!(cell(50, 4, 0.9, 10, 1).validate().is_ok());
    }

    #[test]
    fn small_cell_accounts_for_every_replication() {
        let res = run_cell(&cell(50, 4, 0.9, 40, 3)).unwrap();
        assert_eq!(res.successes + res.excluded, 40);
        assert!(res.mse.iter().all(|m| *m >= 0.0 && m.is_finite()));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let d = cell(50, 4, 0.95, 30, 11);
        let one = run_cell_with_workers(&d, 1).unwrap();
        let four = run_cell_with_workers(&d, 4).unwrap();
        assert_eq!(one, four);
        for (a, b) in one.mse.iter().zip(four.mse.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn paper_grid_shape() {
        let cells = paper_grid(10, 1, 0.9).unwrap();
        assert_eq!(cells.len(), 36);
        let mut sorted = cells.clone();
        sorted.sort_by(cell_order);
        assert_eq!(sorted, cells);
        let seeds: std::collections::HashSet<u64> = cells.iter().map(|c| c.seed).collect();
        assert_eq!(seeds.len(), 36);
    }

    #[test]
    fn one_cell_grid_matches_run_cell() {
        let d = cell(60, 4, 0.9, 12, 5);
        let rows = run_grid(&[d], Some(2)).unwrap();
        let res = run_cell(&d).unwrap();
        assert_eq!(rows.len(), 5);
        for (row, &m) in rows.iter().zip(res.mse.iter()) {
            assert_eq!(row.mse, m);
            assert_eq!(row.excluded, res.excluded);
        }
    }
}
