//! The online pipeline: reliability bits, region of interest, Fisher AP
//! selection, sparse recovery and the thresholded centroid.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::apselect::{fisher_scores_from_stability, select_aps, ApSelection, DEFAULT_SELECTED_APS};
use crate::clustering::{cluster_all, ClusterSet};
use crate::error::{Error, Result};
use crate::roi::{select_roi, ColumnTag, ModifiedRadioMap, RoiTrace};
use crate::solver::{estimate, range_projection, DesignSystem, Method, SolverOptions, SparseSolution, Tuning};
use crate::survey::{
    online_reliability, reliability_indicators, stability, time_average, AveragedRadioMap,
    OnlineMeasurement, RawRadioMap, ReferencePoint, ReliabilityProfile, StabilityProfile,
    SurveyConfig,
};

pub const DEFAULT_RELATIVE_BETA: f64 = 0.2;
pub const DEFAULT_OUTLIER_FLOOR_DB: f64 = 3.0;

/// Everything the online phase needs, derived from one raw radio map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: SurveyConfig,
    pub rps: Vec<ReferencePoint>,
    pub averaged: AveragedRadioMap,
    pub reliability: ReliabilityProfile,
    pub stability: StabilityProfile,
    pub clusters: Vec<ClusterSet>,
}

impl TrainedModel {
    pub fn num_aps(&self) -> usize {
        self.config.num_aps
    }

    pub fn num_rps(&self) -> usize {
        self.config.num_rps
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(f)?)
    }
}

/// Offline phase. Uses the thresholds stored in the map's config.
pub fn train(raw: &RawRadioMap) -> Result<TrainedModel> {
    let config = raw.config().clone();
    config.validate()?;
    let averaged = time_average(raw)?;
    let reliability = reliability_indicators(raw, config.reliability_threshold);
    let stability = stability(raw, &reliability)?;
    let clusters = cluster_all(&reliability, &stability, config.cluster_threshold)?;
    Ok(TrainedModel {
        rps: raw.rps().to_vec(),
        config,
        averaged,
        reliability,
        stability,
        clusters,
    })
}

/// Threshold on the recovered coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Beta {
    /// Fraction of the largest positive coefficient.
    Relative(f64),
    Absolute(f64),
}

impl Default for Beta {
    fn default() -> Self {
        Beta::Relative(DEFAULT_RELATIVE_BETA)
    }
}

impl Beta {
    fn resolve(self, theta: &[f64]) -> f64 {
        match self {
            Beta::Absolute(b) => b,
            Beta::Relative(f) => {
                let top = theta.iter().copied().fold(0.0, f64::max);
                // a zero threshold would let zero coefficients through
                (f * top).max(f64::MIN_POSITIVE)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeOptions {
    pub num_aps: usize,
    pub beta: Beta,
    pub outlier_floor: f64,
    pub solver: SolverOptions,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            num_aps: DEFAULT_SELECTED_APS,
            beta: Beta::default(),
            outlier_floor: DEFAULT_OUTLIER_FLOOR_DB,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportEntry {
    /// 1-based RP id as stored in the radio map.
    pub rp: usize,
    pub orientation: u16,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub objective: f64,
    pub intercept: f64,
    pub roi_columns: usize,
    /// Selected APs, 1-based, in selection order.
    pub selected_aps: Vec<usize>,
    pub low_confidence: bool,
    /// The equality system was infeasible and was solved against the
    /// projection of `y` onto the ROI's range.
    pub projected: bool,
    pub beta: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub roi: Vec<RoiTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionEstimate {
    pub x: f64,
    pub y: f64,
    pub method: String,
    pub support: Vec<SupportEntry>,
    /// Flagged APs, 1-based.
    pub outlier_aps: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl PositionEstimate {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// Flagged APs as 0-based indices.
    pub fn outlier_indices(&self) -> Vec<usize> {
        self.outlier_aps.iter().map(|a| a - 1).collect()
    }
}

/// Centroid result before any pipeline metadata is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    pub position: (f64, f64),
    /// `(column, coefficient)` pairs that passed the threshold.
    pub support: Vec<(usize, f64)>,
    pub beta: f64,
    pub low_confidence: bool,
}

/// Weighted centroid of the columns whose coefficient is at least `β`.
/// An RP tagged at several orientations contributes once per column. If no
/// coefficient passes, the largest one is used alone and the result is
/// flagged low-confidence.
pub fn postprocess(
    theta: &[f64],
    tags: &[ColumnTag],
    rps: &[ReferencePoint],
    beta: Beta,
) -> Result<Centroid> {
    if theta.len() != tags.len() {
        return Err(Error::DimensionMismatch {
            expected: tags.len(),
            actual: theta.len(),
            context: "coefficients vs column tags",
        });
    }
    if theta.is_empty() {
        return Err(Error::Empty("coefficient vector"));
    }
    let b = beta.resolve(theta);
    let support: Vec<(usize, f64)> = theta
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= b && t > 0.0)
        .map(|(v, &t)| (v, t))
        .collect();

    if support.is_empty() {
        let (v, &t) = theta
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        return Ok(Centroid {
            position: rps[tags[v].rp].position(),
            support: vec![(v, t)],
            beta: b,
            low_confidence: true,
        });
    }
    let total: f64 = support.iter().map(|(_, t)| t).sum();
    let (mut x, mut y) = (0.0, 0.0);
    for &(v, t) in &support {
        let (px, py) = rps[tags[v].rp].position();
        x += t * px;
        y += t * py;
    }
    Ok(Centroid {
        position: (x / total, y / total),
        support,
        beta: b,
        low_confidence: false,
    })
}

/// Original AP indices whose outlier estimate reaches `floor` in magnitude.
pub fn outlier_report(sol: &SparseSolution, sel: &ApSelection, floor: f64) -> Vec<usize> {
    let mut aps: Vec<usize> = sol
        .kappa
        .iter()
        .zip(&sel.selected)
        .filter(|(k, _)| k.abs() >= floor)
        .map(|(_, &i)| i)
        .collect();
    aps.sort_unstable();
    aps
}

/// Intermediate products of one online fix, exposed for tracing and for
/// cross-validation.
#[derive(Debug, Clone)]
pub struct PreparedFix {
    pub roi: ModifiedRadioMap,
    pub selection: ApSelection,
    pub system: DesignSystem,
}

/// Everything up to the sparse solve: ROI, AP selection and `(ΦΨ̃, Φy)`.
pub fn prepare(y: &OnlineMeasurement, model: &TrainedModel, num_aps: usize) -> Result<PreparedFix> {
    let l = model.num_aps();
    if y.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            actual: y.len(),
            context: "online measurement length",
        });
    }
    let bits = online_reliability(&y.rss, l, model.config.reliability_threshold)?;
    let roi = select_roi(&bits, &model.clusters, &model.reliability, &model.averaged)?;
    let scores = (0..model.averaged.num_orientations)
        .map(|o| fisher_scores_from_stability(&model.averaged, &model.stability, &roi.roi_rps, o))
        .collect::<Result<Vec<_>>>()?;
    let selection = select_aps(scores, num_aps)?;
    let h: DMatrix<f64> = selection.apply_to_map(&roi)?;
    let yv = DVector::from_vec(selection.apply(&y.rss)?);
    let system = DesignSystem::new(h, yv)?;
    Ok(PreparedFix {
        roi,
        selection,
        system,
    })
}

pub fn localize(
    y: &OnlineMeasurement,
    model: &TrainedModel,
    method: Method,
    tuning: &Tuning,
    opts: &LocalizeOptions,
) -> Result<PositionEstimate> {
    let prep = prepare(y, model, opts.num_aps)?;
    match estimate(method, &prep.system, tuning, &opts.solver) {
        Ok(sol) => finish(method, &prep, &sol, model, opts, false),
        Err(Error::Infeasible { .. }) => {
            // too few independent ROI columns to reproduce y exactly: solve
            // for the part of y the ROI (plus an offset) can explain
            let sys = &prep.system;
            let mut a = DMatrix::from_element(sys.rows(), sys.cols() + 1, 1.0);
            a.columns_mut(0, sys.cols()).copy_from(&sys.h);
            let projected = DesignSystem::new(sys.h.clone(), range_projection(&a, &sys.y))?;
            let sol = estimate(method, &projected, tuning, &opts.solver)?;
            finish(method, &prep, &sol, model, opts, true)
        }
        Err(e) => Err(e),
    }
}

fn finish(
    method: Method,
    prep: &PreparedFix,
    sol: &SparseSolution,
    model: &TrainedModel,
    opts: &LocalizeOptions,
    projected: bool,
) -> Result<PositionEstimate> {
    let tags = &prep.roi.tags;
    let c = postprocess(&sol.theta, tags, &model.rps, opts.beta)?;
    let outliers = if method.is_outlier_aware() {
        outlier_report(sol, &prep.selection, opts.outlier_floor)
    } else {
        Vec::new()
    };
    Ok(PositionEstimate {
        x: c.position.0,
        y: c.position.1,
        method: method.name().to_string(),
        support: c
            .support
            .iter()
            .map(|&(v, t)| SupportEntry {
                rp: model.rps[tags[v].rp].id,
                orientation: model.config.orientations[tags[v].orientation],
                coefficient: t,
            })
            .collect(),
        outlier_aps: outliers.iter().map(|i| i + 1).collect(),
        diagnostics: Diagnostics {
            iterations: sol.iterations,
            converged: sol.converged,
            kkt_residual: sol.kkt_residual,
            objective: sol.objective,
            intercept: sol.intercept,
            roi_columns: tags.len(),
            selected_aps: prep.selection.selected.iter().map(|i| i + 1).collect(),
            low_confidence: c.low_confidence || projected,
            projected,
            beta: c.beta,
            roi: prep.roi.trace.clone(),
        },
    })
}
