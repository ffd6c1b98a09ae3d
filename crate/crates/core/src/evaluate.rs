//! Position-error statistics, method comparison reports and
//! cross-validation of the regularization parameters.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::baselines::{kde, wknn, BaselineConfig};
use crate::error::{Error, Result};
use crate::localize::{localize, prepare, LocalizeOptions, TrainedModel};
use crate::solver::{estimate, DesignSystem, Method, Tuning};
use crate::survey::OnlineMeasurement;

type Point = (f64, f64);

pub fn position_errors(estimates: &[Point], truths: &[Point]) -> Result<Vec<f64>> {
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: estimates.len(),
            context: "estimates vs truths",
        });
    }
    Ok(estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e.0 - t.0).hypot(e.1 - t.1))
        .collect())
}

/// Mean Euclidean distance between estimates and truths.
pub fn mae(estimates: &[Point], truths: &[Point]) -> Result<f64> {
    let errs = position_errors(estimates, truths)?;
    if errs.is_empty() {
        return Err(Error::Empty("fix set"));
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Sorted errors with nearest-rank percentiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub mae: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p100: f64,
    pub cdf_samples: Vec<f64>,
}

/// Nearest rank: the value at 1-based position `⌈q·N⌉` of the sorted list.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn error_cdf(errors: &[f64]) -> Result<ErrorSummary> {
    if errors.is_empty() {
        return Err(Error::Empty("error list"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ErrorSummary {
        mae: errors.iter().sum::<f64>() / errors.len() as f64,
        p25: percentile(&sorted, 0.25),
        p50: percentile(&sorted, 0.50),
        p75: percentile(&sorted, 0.75),
        p100: sorted[sorted.len() - 1],
        cdf_samples: sorted,
    })
}

/// A sparse formulation or one of the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Estimator {
    Sparse(Method),
    Wknn,
    Kde,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Sparse(m) => m.name(),
            Estimator::Wknn => "wknn",
            Estimator::Kde => "kde",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wknn" => Ok(Estimator::Wknn),
            "kde" => Ok(Estimator::Kde),
            other => other.parse().map(Estimator::Sparse),
        }
    }
}

/// Settings shared by every method in a comparison.
#[derive(Debug, Clone, Default)]
pub struct EvalConfig {
    pub tuning: Tuning,
    pub localize: LocalizeOptions,
    pub baseline: BaselineConfig,
}

pub fn run_estimator(
    est: Estimator,
    y: &OnlineMeasurement,
    model: &TrainedModel,
    cfg: &EvalConfig,
) -> Result<Point> {
    match est {
        Estimator::Sparse(m) => {
            localize(y, model, m, &cfg.tuning, &cfg.localize).map(|e| e.position())
        }
        Estimator::Wknn => wknn(y, &model.averaged, &model.rps, &cfg.baseline).map(|e| e.position()),
        Estimator::Kde => kde(y, &model.averaged, &model.rps, &cfg.baseline).map(|e| e.position()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: String,
    #[serde(flatten)]
    pub errors: ErrorSummary,
    /// Mean wall-clock time per fix in milliseconds.
    pub mean_fix_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<MethodReport>,
}

/// Runs every estimator over the same fix set, in the order given.
pub fn evaluate_methods(
    model: &TrainedModel,
    fixes: &[OnlineMeasurement],
    truths: &[Point],
    methods: &[Estimator],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if fixes.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: fixes.len(),
            context: "fixes vs truths",
        });
    }
    if fixes.is_empty() {
        return Err(Error::Empty("fix set"));
    }
    let mut rows = Vec::with_capacity(methods.len());
    for &m in methods {
        let mut estimates = Vec::with_capacity(fixes.len());
        let mut elapsed = 0.0;
        for y in fixes {
            let start = Instant::now();
            let p = run_estimator(m, y, model, cfg)?;
            elapsed += start.elapsed().as_secs_f64();
            estimates.push(p);
        }
        let errors = position_errors(&estimates, truths)?;
        rows.push(MethodReport {
            method: m.name().to_string(),
            errors: error_cdf(&errors)?,
            mean_fix_time_ms: 1e3 * elapsed / fixes.len() as f64,
        });
    }
    Ok(EvalReport { rows })
}

impl EvalReport {
    pub fn row(&self, method: &str) -> Option<&MethodReport> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// One row per method. Timing is optional because it is the only
    /// column that changes between identical runs.
    pub fn write_csv<W: Write>(&self, w: W, with_timing: bool) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["method", "mae", "p25", "p50", "p75", "p100"];
        if with_timing {
            header.push("time_ms");
        }
        out.write_record(&header)?;
        for r in &self.rows {
            let e = &r.errors;
            let mut rec = vec![r.method.clone()];
            rec.extend([e.mae, e.p25, e.p50, e.p75, e.p100].iter().map(|v| format!("{v:.4}")));
            if with_timing {
                rec.push(format!("{:.4}", r.mean_fix_time_ms));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Long format: `method,error,cumulative_fraction`.
    pub fn write_cdf_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["method", "error", "cumulative_fraction"])?;
        for r in &self.rows {
            let n = r.errors.cdf_samples.len() as f64;
            for (k, e) in r.errors.cdf_samples.iter().enumerate() {
                out.write_record([
                    r.method.clone(),
                    format!("{e:.4}"),
                    format!("{:.4}", (k + 1) as f64 / n),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CvMode {
    /// Held-out measurement residual.
    #[default]
    Residual,
    /// Squared position error against known truths.
    PositionError,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub grid: Vec<Tuning>,
    pub mse_curve: Vec<f64>,
    pub best_index: usize,
    pub best: Tuning,
}

impl CvResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["lambda", "alpha", "mu", "mse", "best"])?;
        for (k, (t, m)) in self.grid.iter().zip(&self.mse_curve).enumerate() {
            out.write_record([
                t.lambda.to_string(),
                t.alpha.to_string(),
                t.mu.to_string(),
                format!("{m:.6}"),
                u8::from(k == self.best_index).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Cartesian product of the three value lists, `λ` varying slowest.
pub fn tuning_grid(lambdas: &[f64], alphas: &[f64], mus: &[f64]) -> Vec<Tuning> {
    let mut grid = Vec::new();
    for &lambda in lambdas {
        for &alpha in alphas {
            for &mu in mus {
                grid.push(Tuning { lambda, alpha, mu });
            }
        }
    }
    grid
}

/// K-fold cross-validation of `method` over `grid`.
///
/// Residual mode refits every fix with the measurement rows split into
/// `folds` interleaved groups: each group is predicted from a fit on the
/// others, and the squared prediction error is averaged over rows, folds
/// and fixes. Position mode splits the fix set instead and averages squared
/// position error per fold; it needs `truths`.
///
/// The best tuple is the first one attaining the minimum.
pub fn cross_validate(
    model: &TrainedModel,
    fixes: &[OnlineMeasurement],
    truths: Option<&[Point]>,
    method: Method,
    grid: &[Tuning],
    folds: usize,
    mode: CvMode,
    opts: &LocalizeOptions,
) -> Result<CvResult> {
    if folds < 2 {
        return Err(Error::InvalidConfig("at least two folds are required".into()));
    }
    if grid.is_empty() {
        return Err(Error::Empty("parameter grid"));
    }
    if fixes.len() < folds {
        return Err(Error::InvalidConfig(format!(
            "{} fixes cannot be split into {folds} folds",
            fixes.len()
        )));
    }
    for t in grid {
        t.validate()?;
    }

    let mse_curve = match mode {
        CvMode::Residual => {
            if opts.num_aps < folds {
                return Err(Error::InvalidConfig(format!(
                    "{} selected APs cannot be split into {folds} folds",
                    opts.num_aps
                )));
            }
            let systems = fixes
                .iter()
                .map(|y| prepare(y, model, opts.num_aps).map(|p| p.system))
                .collect::<Result<Vec<_>>>()?;
            grid.iter()
                .map(|t| residual_cv(&systems, method, t, folds, opts))
                .collect::<Result<Vec<_>>>()?
        }
        CvMode::PositionError => {
            let truths = truths.ok_or_else(|| {
                Error::InvalidConfig("position-error mode needs ground truth".into())
            })?;
            if truths.len() != fixes.len() {
                return Err(Error::DimensionMismatch {
                    expected: fixes.len(),
                    actual: truths.len(),
                    context: "truths vs fixes",
                });
            }
            grid.iter()
                .map(|t| position_cv(model, fixes, truths, method, t, folds, opts))
                .collect::<Result<Vec<_>>>()?
        }
    };

    let mut best_index = 0;
    for (k, &m) in mse_curve.iter().enumerate() {
        if m < mse_curve[best_index] {
            best_index = k;
        }
    }
    Ok(CvResult {
        grid: grid.to_vec(),
        best: grid[best_index],
        best_index,
        mse_curve,
    })
}

/// Mean held-out squared residual for one tuning over all fixes.
pub fn residual_cv(
    systems: &[DesignSystem],
    method: Method,
    tuning: &Tuning,
    folds: usize,
    opts: &LocalizeOptions,
) -> Result<f64> {
    let mut total = 0.0;
    for sys in systems {
        let n = sys.rows();
        let mut fix_total = 0.0;
        for f in 0..folds {
            let train: Vec<usize> = (0..n).filter(|r| r % folds != f).collect();
            let test: Vec<usize> = (0..n).filter(|r| r % folds == f).collect();
            let sub = DesignSystem::new(
                sys.h.select_rows(&train),
                DVector::from_iterator(train.len(), train.iter().map(|&r| sys.y[r])),
            )?;
            let sol = estimate(method, &sub, tuning, &opts.solver)?;
            let theta = DVector::from_column_slice(&sol.theta);
            let h_test: DMatrix<f64> = sys.h.select_rows(&test);
            let pred = h_test * theta;
            let mse: f64 = test
                .iter()
                .zip(pred.iter())
                .map(|(&r, p)| (sys.y[r] - p - sol.intercept).powi(2))
                .sum::<f64>()
                / test.len() as f64;
            fix_total += mse;
        }
        total += fix_total / folds as f64;
    }
    Ok(total / systems.len() as f64)
}

fn position_cv(
    model: &TrainedModel,
    fixes: &[OnlineMeasurement],
    truths: &[Point],
    method: Method,
    tuning: &Tuning,
    folds: usize,
    opts: &LocalizeOptions,
) -> Result<f64> {
    let mut total = 0.0;
    for f in 0..folds {
        let held: Vec<usize> = (0..fixes.len()).filter(|k| k % folds == f).collect();
        let mut fold_total = 0.0;
        for &k in &held {
            let p = localize(&fixes[k], model, method, tuning, opts)?.position();
            fold_total += (p.0 - truths[k].0).powi(2) + (p.1 - truths[k].1).powi(2);
        }
        total += fold_total / held.len() as f64;
    }
    Ok(total / folds as f64)
}
