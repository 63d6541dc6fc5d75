//! CSV ingestion, command configuration and report rendering for the
//! command-line tool.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorFit, EstimatorKind, ShrinkageParams, ShrinkageSystem};
use crate::irls_fit::{fit_mle, FitOptions, MleFit};
use crate::mc_sim::{paper_grid, run_grid, GridRow, SimDesign};
use crate::nb_model::Overdispersion;
use crate::risk_analysis::{
    condition_report, mse_sweep, risk_profile, theorem_check, ConditionReport, CurveRow, SweepGrid,
    SweepParam, Theorem, TheoremVerdict,
};
use crate::shrinkage_selectors::{
    select_d5, select_d_lt, select_k, select_k5, KRule, SelectorInputs, Selection, DEFAULT_SAFETY,
};

/// Overdispersion used when the moment estimate is unavailable.
pub const FALLBACK_THETA: f64 = 1.0;

/// Floor of the moment estimate of theta.
pub const MIN_MOMENT_THETA: f64 = 1e-6;

/// A count table read from CSV: named predictors plus the response.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub response_name: String,
    pub predictor_names: Vec<String>,
    /// n x p, without the intercept.
    pub predictors: DMatrix<f64>,
    pub counts: Vec<u64>,
}

impl CountTable {
    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn p(&self) -> usize {
        self.predictor_names.len()
    }

    /// Dataset with the intercept column prepended.
    pub fn dataset(&self, theta: Overdispersion) -> Result<Dataset> {
        Dataset::with_intercept(&self.predictors, self.counts.clone(), theta)
    }
}

fn parse_count(raw: &str, row: usize, column: &str) -> Result<u64> {
    let value: f64 = raw.trim().parse().map_err(|_| {
        Error::Data(format!("row {row}, column '{column}': response '{raw}' is not numeric"))
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Data(format!(
            "row {row}, column '{column}': response {raw} is negative or not finite"
        )));
    }
    if value.fract() != 0.0 || value > u64::MAX as f64 {
        return Err(Error::Data(format!(
            "row {row}, column '{column}': response {raw} is not an integer count"
        )));
    }
    Ok(value as u64)
}

/// Reads a comma-separated file with a header row. `response` names the
/// count column; every other column is a numeric predictor. Row numbers in
/// diagnostics are 1-based data rows.
pub fn load_csv(path: &Path, response: &str) -> Result<CountTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let response_col = headers.iter().position(|h| h == response).ok_or_else(|| {
        Error::Data(format!("response column '{response}' not found in header {headers:?}"))
    })?;
    let predictor_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != response_col).collect();

    let mut counts = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        let raw = &record[response_col];
        if raw.is_empty() {
            return Err(Error::Data(format!("row {row}, column '{response}': missing response")));
        }
        counts.push(parse_count(raw, row, response)?);
        for &c in &predictor_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                if cell.is_empty() {
                    Error::Data(format!("row {row}, column '{}': missing value", headers[c]))
                } else {
                    Error::Data(format!("row {row}, column '{}': '{cell}' is not numeric", headers[c]))
                }
            })?;
            values.push(v);
        }
    }
    let n = counts.len();
    let p = predictor_cols.len();
    if n == 0 {
        return Err(Error::Data(format!("{} has a header but no data rows", path.display())));
    }
    if n <= p + 1 {
        return Err(Error::Data(format!(
            "{} has {n} rows but {} coefficients (p + 1) to estimate",
            path.display(),
            p + 1
        )));
    }
    Ok(CountTable {
        response_name: response.to_owned(),
        predictor_names: predictor_cols.iter().map(|&c| headers[c].clone()).collect(),
        predictors: DMatrix::from_row_slice(n, p, &values),
        counts,
    })
}

/// Writes the table as CSV: response first, then predictors, full precision.
pub fn write_csv(table: &CountTable, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![table.response_name.clone()];
    header.extend(table.predictor_names.iter().cloned());
    writer.write_record(&header)?;
    for i in 0..table.n() {
        let mut rec = vec![table.counts[i].to_string()];
        rec.extend((0..table.p()).map(|j| table.predictors[(i, j)].to_string()));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// Where theta came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaOrigin {
    Given,
    MomentEstimate,
    /// Sample variance did not exceed the mean.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedTheta {
    pub theta: Overdispersion,
    pub origin: ThetaOrigin,
}

/// Uses the given theta, or the marginal moment estimate
/// `max((s^2 - ybar) / ybar^2, 1e-6)`, falling back to 1 when `s^2 <= ybar`.
pub fn resolve_theta(given: Option<f64>, counts: &[u64]) -> Result<ResolvedTheta> {
    if let Some(t) = given {
        return Ok(ResolvedTheta { theta: Overdispersion::new(t)?, origin: ThetaOrigin::Given });
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = if counts.len() > 1 {
        counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    if mean > 0.0 && var > mean {
        let theta = ((var - mean) / (mean * mean)).max(MIN_MOMENT_THETA);
        Ok(ResolvedTheta { theta: Overdispersion::new(theta)?, origin: ThetaOrigin::MomentEstimate })
    } else {
        log::warn!(
            "sample variance {var:.4} does not exceed the mean {mean:.4}; using theta = {FALLBACK_THETA}"
        );
        Ok(ResolvedTheta { theta: Overdispersion::new(FALLBACK_THETA)?, origin: ThetaOrigin::Fallback })
    }
}

/// Z-scores the non-intercept columns and maps coefficients back.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(predictors: &DMatrix<f64>) -> Result<Self> {
        let n = predictors.nrows() as f64;
        let mut means = Vec::new();
        let mut scales = Vec::new();
        for (j, col) in predictors.column_iter().enumerate() {
            let m = col.sum() / n;
            let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            if !(s > 0.0) {
                return Err(Error::Data(format!("predictor column {j} is constant; cannot standardize")));
            }
            means.push(m);
            scales.push(s);
        }
        Ok(Self { means, scales })
    }

    pub fn apply(&self, predictors: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(predictors.nrows(), predictors.ncols(), |i, j| {
            (predictors[(i, j)] - self.means[j]) / self.scales[j]
        })
    }

    /// Linear map `T` with `beta_raw = T beta_std`.
    pub fn back_transform(&self) -> DMatrix<f64> {
        let m = self.means.len() + 1;
        let mut t = DMatrix::identity(m, m);
        for j in 0..self.means.len() {
            t[(j + 1, j + 1)] = 1.0 / self.scales[j];
            t[(0, j + 1)] = -self.means[j] / self.scales[j];
        }
        t
    }
}

/// Shrinkage parameters picked by the selector rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectedParams {
    pub safety: f64,
    pub d: f64,
    pub k_am: Selection,
    pub k_max: Selection,
    pub k5: Selection,
    pub d5: f64,
}

/// A fitted dataset with its shrinkage system and selected parameters.
#[derive(Debug, Clone)]
pub struct Session {
    pub table: CountTable,
    pub theta: ResolvedTheta,
    pub standardizer: Option<Standardizer>,
    pub data: Dataset,
    pub mle: MleFit,
    pub system: ShrinkageSystem,
    pub selected: SelectedParams,
}

impl Session {
    pub fn new(table: CountTable, theta: Option<f64>, standardize: bool, safety: f64) -> Result<Self> {
        let theta = resolve_theta(theta, &table.counts)?;
        let standardizer = if standardize { Some(Standardizer::fit(&table.predictors)?) } else { None };
        let predictors = match &standardizer {
            Some(s) => s.apply(&table.predictors),
            None => table.predictors.clone(),
        };
        let data = Dataset::with_intercept(&predictors, table.counts.clone(), theta.theta)?;
        let mle = fit_mle(&data, &FitOptions::default())?;
        if !mle.converged {
            return Err(Error::NotConverged { iterations: mle.iterations });
        }
        let system = ShrinkageSystem::from_fit(&data, &mle)?;
        let inputs = SelectorInputs::from_eigen(&system.eigen)?;
        let d = select_d_lt(&inputs, safety)?;
        let selected = SelectedParams {
            safety,
            d,
            k_am: select_k(KRule::Am, &inputs, d)?,
            k_max: select_k(KRule::Max, &inputs, d)?,
            k5: select_k5(&inputs),
            d5: select_d5(&inputs),
        };
        Ok(Self { table, theta, standardizer, data, mle, system, selected })
    }

    pub fn load(path: &Path, response: &str, theta: Option<f64>, standardize: bool, safety: f64) -> Result<Self> {
        Self::new(load_csv(path, response)?, theta, standardize, safety)
    }

    /// The five report columns: label, kind and parameters.
    pub fn columns(&self) -> Vec<(&'static str, EstimatorKind, ShrinkageParams)> {
        let s = &self.selected;
        vec![
            ("LT(kAM)", EstimatorKind::LiuType, ShrinkageParams::liu_type(s.k_am.value, s.d)),
            ("LT(kMAX)", EstimatorKind::LiuType, ShrinkageParams::liu_type(s.k_max.value, s.d)),
            ("RR", EstimatorKind::Ridge, ShrinkageParams::ridge(s.k5.value)),
            ("LE", EstimatorKind::Liu, ShrinkageParams::liu(s.d5)),
            ("MLE", EstimatorKind::Mle, ShrinkageParams::mle()),
        ]
    }

    /// Fit in reporting coordinates (back-transformed when standardized).
    pub fn reported_fit(&self, kind: EstimatorKind, params: ShrinkageParams) -> Result<EstimatorFit> {
        let mut fit = self.system.estimate(kind, params)?;
        if let Some(s) = &self.standardizer {
            let t = s.back_transform();
            fit.beta = &t * &fit.beta;
            fit.covariance = &t * &fit.covariance * t.transpose();
            fit.std_errors = crate::estimators::std_errors(&fit.covariance)?;
        }
        Ok(fit)
    }

    pub fn condition(&self) -> Result<ConditionReport> {
        condition_report(&self.data, &self.mle.weights)
    }
}

#[derive(Debug, Clone)]
pub struct FitColumn {
    pub label: &'static str,
    pub fit: EstimatorFit,
    /// Plug-in scalar MSE at `alpha_hat`.
    pub plug_in_mse: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub source: String,
    pub session: Session,
    pub condition: ConditionReport,
    pub columns: Vec<FitColumn>,
}

impl FitReport {
    pub fn build(source: String, session: Session) -> Result<Self> {
        let condition = session.condition()?;
        let alpha = &session.system.eigen.alpha_hat;
        let columns = session
            .columns()
            .into_iter()
            .map(|(label, kind, params)| {
                Ok(FitColumn {
                    label,
                    fit: session.reported_fit(kind, params)?,
                    plug_in_mse: risk_profile(kind, &session.system.eigen, alpha, params)?.mse,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { source, session, condition, columns })
    }

    fn row_names(&self) -> Vec<String> {
        let mut names = vec!["(Intercept)".to_owned()];
        names.extend(self.session.table.predictor_names.iter().cloned());
        names
    }

    fn block(&self, out: &mut String, title: &str, value: impl Fn(&FitColumn, usize) -> f64) {
        let names = self.row_names();
        let width = names.iter().map(String::len).max().unwrap_or(0).max(12);
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:width$}", "");
        for c in &self.columns {
            let _ = write!(out, " {:>10}", c.label);
        }
        out.push('\n');
        for (i, name) in names.iter().enumerate() {
            let _ = write!(out, "{name:width$}");
            for c in &self.columns {
                let _ = write!(out, " {:>10.4}", value(c, i));
            }
            out.push('\n');
        }
    }

    /// Plain-text report with four decimals.
    pub fn render(&self) -> String {
        let s = &self.session;
        let sel = &s.selected;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "data: {} (n = {}, p = {}), response '{}'",
            self.source,
            s.table.n(),
            s.table.p(),
            s.table.response_name
        );
        let origin = match s.theta.origin {
            ThetaOrigin::Given => "given",
            ThetaOrigin::MomentEstimate => "moment estimate",
            ThetaOrigin::Fallback => "fallback default; sample variance <= mean",
        };
        let _ = writeln!(out, "theta: {:.4} ({origin})", s.theta.theta.value());
        if s.standardizer.is_some() {
            let _ = writeln!(
                out,
                "predictors standardized; coefficients and standard errors are back-transformed, \
                 MSE is in standardized coordinates"
            );
        }
        let _ = writeln!(out, "MLE: converged in {} iterations", s.mle.iterations);
        let c = &self.condition;
        let _ = writeln!(
            out,
            "condition X'X: ratio {:.4}, sqrt ratio {:.4}",
            c.xx.ratio, c.xx.sqrt_ratio
        );
        let _ = writeln!(
            out,
            "condition X'WX: ratio {:.4}, sqrt ratio {:.4}",
            c.xwx.ratio, c.xwx.sqrt_ratio
        );
        let flag = |sel: &Selection| if sel.clamped { " (clamped)" } else { "" };
        let _ = writeln!(
            out,
            "selected: d = {:.4} (safety {:.2}), kAM = {:.4}{}, kMAX = {:.4}{}, K5 = {:.4}{}, D5 = {:.4}",
            sel.d,
            sel.safety,
            sel.k_am.value,
            flag(&sel.k_am),
            sel.k_max.value,
            flag(&sel.k_max),
            sel.k5.value,
            flag(&sel.k5),
            sel.d5
        );
        out.push('\n');
        self.block(&mut out, "Coefficients", |c, i| c.fit.beta[i]);
        out.push('\n');
        self.block(&mut out, "Standard errors", |c, i| c.fit.std_errors[i]);
        out.push('\n');
        let _ = writeln!(out, "MSE (plug-in at alpha_hat)");
        let width = self.row_names().iter().map(String::len).max().unwrap_or(0).max(12);
        let _ = write!(out, "{:width$}", "");
        for c in &self.columns {
            let _ = write!(out, " {:>10}", c.label);
        }
        out.push('\n');
        let _ = write!(out, "{:width$}", "");
        for c in &self.columns {
            let _ = write!(out, " {:>10.4}", c.plug_in_mse);
        }
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub data: PathBuf,
    pub response: String,
    pub theta: Option<f64>,
    pub standardize: bool,
    pub safety: f64,
    pub out: Option<PathBuf>,
}

/// Grid selection for `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulateGrid {
    Paper,
    Cell { n: usize, p: usize, rho: f64, theta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub grid: SimulateGrid,
    pub reps: usize,
    pub seed: u64,
    pub safety: f64,
    pub workers: Option<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub data: PathBuf,
    pub response: String,
    pub theta: Option<f64>,
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub safety: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    pub data: PathBuf,
    pub response: String,
    pub theta: Option<f64>,
    pub k: Option<f64>,
    pub d: Option<f64>,
    pub safety: f64,
}

/// Configuration of one command-line invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    Fit(FitConfig),
    Simulate(SimulateConfig),
    Sweep(SweepConfig),
    CheckTheorems(CheckConfig),
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let check_safety = |s: f64| {
            if s > 0.0 && s <= 1.0 {
                Ok(())
            } else {
                Err(Error::Usage(format!("--safety must lie in (0, 1], got {s}")))
            }
        };
        let check_theta = |t: Option<f64>| match t {
            Some(t) if !(t > 0.0 && t.is_finite()) => {
                Err(Error::Usage(format!("--theta must be positive, got {t}")))
            }
            _ => Ok(()),
        };
        let check_path = |p: &Path, flag: &str| {
            if p.as_os_str().is_empty() {
                Err(Error::Usage(format!("{flag} must not be empty")))
            } else {
                Ok(())
            }
        };
        match self {
            RunConfig::Fit(c) => {
                check_path(&c.data, "--data")?;
                check_theta(c.theta)?;
                check_safety(c.safety)
            }
            RunConfig::Simulate(c) => {
                check_path(&c.out, "--out")?;
                if c.reps == 0 {
                    return Err(Error::Usage("--reps must be at least 1".into()));
                }
                if c.workers == Some(0) {
                    return Err(Error::Usage("--workers must be at least 1".into()));
                }
                check_safety(c.safety)
            }
            RunConfig::Sweep(c) => {
                check_path(&c.data, "--data")?;
                check_path(&c.out, "--out")?;
                check_theta(c.theta)?;
                check_safety(c.safety)
            }
            RunConfig::CheckTheorems(c) => {
                check_path(&c.data, "--data")?;
                check_theta(c.theta)?;
                check_safety(c.safety)
            }
        }
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            response: String::new(),
            theta: None,
            standardize: false,
            safety: DEFAULT_SAFETY,
            out: None,
        }
    }
}

/// Fits all five estimators and renders the coefficient / standard error /
/// MSE report. Writes it to `out` when given.
pub fn fit_command(config: &FitConfig) -> Result<String> {
    RunConfig::Fit(config.clone()).validate()?;
    let session = Session::load(&config.data, &config.response, config.theta, config.standardize, config.safety)?;
    let report = FitReport::build(config.data.display().to_string(), session)?.render();
    if let Some(out) = &config.out {
        fs::write(out, &report)?;
    }
    Ok(report)
}

pub fn grid_csv(rows: &[GridRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["p", "n", "rho", "theta", "estimator", "mse", "excluded"])?;
    for r in rows {
        writer.write_record([
            r.p.to_string(),
            r.n.to_string(),
            r.rho.to_string(),
            r.theta.to_string(),
            r.estimator.label().to_owned(),
            r.mse.to_string(),
            r.excluded.to_string(),
        ])?;
    }
    csv_string(writer)
}

fn csv_string(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(format!("non-UTF-8 output: {e}")))
}

/// Expands the configured cells.
pub fn simulation_cells(config: &SimulateConfig) -> Result<Vec<SimDesign>> {
    match &config.grid {
        SimulateGrid::Paper => paper_grid(config.reps, config.seed, config.safety),
        SimulateGrid::Cell { n, p, rho, theta } => Ok(vec![SimDesign {
            n: *n,
            p: *p,
            rho: *rho,
            theta: Overdispersion::new(*theta)?,
            reps: config.reps,
            seed: config.seed,
            safety: config.safety,
        }]),
    }
}

/// Runs the simulation grid and writes the results CSV.
pub fn simulate_command(config: &SimulateConfig) -> Result<String> {
    RunConfig::Simulate(config.clone()).validate()?;
    let cells = simulation_cells(config)?;
    let rows = run_grid(&cells, config.workers)?;
    let csv = grid_csv(&rows)?;
    fs::write(&config.out, &csv)?;
    Ok(csv)
}

pub fn curve_csv(rows: &[CurveRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["parameter_name", "parameter_value", "estimator", "mse"])?;
    for r in rows {
        writer.write_record([
            r.parameter.name().to_owned(),
            r.value.to_string(),
            r.estimator.label().to_owned(),
            r.mse.to_string(),
        ])?;
    }
    csv_string(writer)
}

/// Plug-in MSE curves over a parameter grid, written as CSV.
pub fn sweep_command(config: &SweepConfig) -> Result<String> {
    RunConfig::Sweep(config.clone()).validate()?;
    let session = Session::load(&config.data, &config.response, config.theta, false, config.safety)?;
    let grid = SweepGrid::range(config.param, config.from, config.to, config.step, session.selected.d)?;
    let eigen = &session.system.eigen;
    let rows = mse_sweep(eigen, &eigen.alpha_hat, &grid)?;
    let csv = curve_csv(&rows)?;
    fs::write(&config.out, &csv)?;
    Ok(csv)
}

/// Theorem verdicts at `(k, d)`; missing values come from the selectors
/// (`k = kAM`, `d` from the bound rule).
pub fn check_theorems(session: &Session, k: Option<f64>, d: Option<f64>) -> Result<(f64, f64, Vec<TheoremVerdict>)> {
    let k = k.unwrap_or(session.selected.k_am.value);
    let d = d.unwrap_or(session.selected.d);
    let eigen = &session.system.eigen;
    let verdicts = Theorem::ALL
        .iter()
        .map(|&t| theorem_check(t, eigen, &eigen.alpha_hat, k, d))
        .collect::<Result<Vec<_>>>()?;
    Ok((k, d, verdicts))
}

pub fn render_verdicts(k: f64, d: f64, safety: f64, verdicts: &[TheoremVerdict]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "k = {k:.4}, d = {d:.4}, safety = {safety:.2} (risk at alpha_hat)");
    for v in verdicts {
        let what = match v.theorem {
            Theorem::LtVsMle => "MMSE(MLE) - MMSE(LT)",
            Theorem::LtVsRidge => "MMSE(RR) - MMSE(LT)",
            Theorem::LtVsLiu => "MMSE(LE) - MMSE(LT)",
        };
        let pre = match v.theorem {
            Theorem::LtVsMle => "min (d+k)(2 lambda_j + k - d)",
            Theorem::LtVsRidge => "2 min lambda_j - d",
            Theorem::LtVsLiu => "min lambda_j (k + 2d - 1) + d (k + 1), with 0 < d < 1",
        };
        let yes = |b: bool| if b { "yes" } else { "no" };
        let _ = writeln!(out, "\n{} ({what})", v.theorem.label());
        let _ = writeln!(out, "  precondition: {pre} = {:.4e} -> {}", v.precondition_value, yes(v.precondition_holds));
        let _ = writeln!(
            out,
            "  quadratic form: {:.4e} (form matrix positive definite: {}) -> {}",
            v.quadratic_form,
            yes(v.form_matrix_pd),
            yes(v.quadratic_ok)
        );
        let eig: Vec<String> = v.difference_eigenvalues.iter().map(|e| format!("{e:.4}")).collect();
        let _ = writeln!(out, "  difference eigenvalues: {}", eig.join(", "));
        let _ = writeln!(out, "  difference positive definite: {}", yes(v.difference_pd));
        let verdict = if v.conditions_hold() {
            if v.difference_pd { "conditions hold, LT dominates" } else { "conditions hold but difference is not PD" }
        } else {
            "conditions not met"
        };
        let _ = writeln!(out, "  verdict: {verdict}");
    }
    out
}

pub fn check_theorems_command(config: &CheckConfig) -> Result<String> {
    RunConfig::CheckTheorems(config.clone()).validate()?;
    let session = Session::load(&config.data, &config.response, config.theta, false, config.safety)?;
    let (k, d, verdicts) = check_theorems(&session, config.k, config.d)?;
    Ok(render_verdicts(k, d, config.safety, &verdicts))
}

/// Deterministic synthetic count table with two strongly collinear
/// predictors, for demos and tests.
pub fn synthetic_table(n: usize, rho: f64, seed: u64) -> Result<CountTable> {
    use crate::mc_sim::gen_design_seeded;
    use crate::nb_model::{means, nb_sample};
    let predictors = gen_design_seeded(n, 2, rho, seed);
    let theta = Overdispersion::new(1.0)?;
    let beta = DVector::from_column_slice(&[1.0, 0.5, 0.5]);
    let provisional = Dataset::with_intercept(&predictors, vec![0; n], theta)?;
    let counts = nb_sample(&means(&provisional, &beta)?, theta, seed.wrapping_add(1))?;
    Ok(CountTable {
        response_name: "y".into(),
        predictor_names: vec!["x1".into(), "x2".into()],
        predictors,
        counts,
    })
}
