//! Sparse position recovery.
//!
//! Two engines do the work:
//!
//! * [`solve_weighted_elastic_net`] minimizes
//!   `(1/n)‖y − Hθ‖² + Σ w₂(ℓ)θ_ℓ² + Σ w₁(ℓ)|θ_ℓ|` by cyclic coordinate descent;
//! * [`solve_basis_pursuit`] minimizes `Σ w₁(ℓ)|θ_ℓ|` subject to `Hθ = y` by
//!   alternating an affine projection with weighted soft thresholding.
//!
//! The six localization formulations are weight choices on top of these,
//! with the outlier-aware ones appending an identity block for `κ`
//! (see [`augment_outliers`]). [`estimate`] is the dispatch facade.

mod augment;
mod basis_pursuit;
mod elastic_net;
mod estimate;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub use augment::augment_outliers;
pub use basis_pursuit::{range_projection, solve_basis_pursuit};
pub use elastic_net::solve_weighted_elastic_net;
pub use estimate::{estimate, Method, Standardization, Tuning};

/// `sign(z) · max(|z| − t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Linear system `y ≈ Hθ` handed to a solver.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    pub h: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl DesignSystem {
    pub fn new(h: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::Empty("design matrix"));
        }
        if h.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                actual: y.len(),
                context: "response vs design rows",
            });
        }
        Ok(Self { h, y })
    }

    pub fn rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn cols(&self) -> usize {
        self.h.ncols()
    }
}

/// Per-coefficient penalty weights plus the scalar tuning values they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyProfile {
    pub lambda: f64,
    pub alpha: f64,
    pub mu: f64,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
}

impl PenaltyProfile {
    pub fn lasso(p: usize, lambda: f64) -> Self {
        Self::elastic_net(p, lambda, 1.0)
    }

    /// `λα` on the L1 part, `λ(1 − α)` on the squared L2 part.
    pub fn elastic_net(p: usize, lambda: f64, alpha: f64) -> Self {
        Self {
            lambda,
            alpha,
            mu: 0.0,
            l1: vec![lambda * alpha; p],
            l2: vec![lambda * (1.0 - alpha); p],
        }
    }

    /// Unit L1 weights, no L2 part (plain basis pursuit).
    pub fn unit_l1(p: usize) -> Self {
        Self {
            lambda: 1.0,
            alpha: 1.0,
            mu: 0.0,
            l1: vec![1.0; p],
            l2: vec![0.0; p],
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.l1.len() != p || self.l2.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: self.l1.len().min(self.l2.len()),
                context: "penalty weights vs design columns",
            });
        }
        if self
            .l1
            .iter()
            .chain(&self.l2)
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::InvalidConfig(
                "penalty weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Coordinate descent stops once the largest coefficient change in a
    /// sweep and the KKT violation are both below this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub admm_rho: f64,
    pub admm_primal_tolerance: f64,
    pub admm_dual_tolerance: f64,
    pub admm_max_iterations: usize,
    /// Center `y` and the columns of `H`, scale columns to unit norm.
    pub standardize: bool,
    /// Record the objective after every full sweep (coordinate descent only).
    pub trace_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iterations: 10_000,
            admm_rho: 1.0,
            admm_primal_tolerance: 1e-8,
            admm_dual_tolerance: 1e-8,
            admm_max_iterations: 100_000,
            standardize: true,
            trace_objective: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "tolerance must be positive and max_iterations at least 1".into(),
            ));
        }
        if !(self.admm_rho > 0.0 && self.admm_primal_tolerance > 0.0 && self.admm_dual_tolerance > 0.0)
        {
            return Err(Error::InvalidConfig("ADMM parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseSolution {
    pub theta: Vec<f64>,
    /// Outlier estimate, one entry per row; all zero without augmentation.
    pub kappa: Vec<f64>,
    /// Unpenalized offset implied by standardization (0 otherwise).
    pub intercept: f64,
    /// Objective of the formulation actually solved (standardized space when
    /// standardization is on).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Columns with zero norm whose coefficient was pinned to zero.
    pub degenerate_columns: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub objective_history: Vec<f64>,
}

/// `(1/n)‖y − Hθ‖² + Σ w₂θ² + Σ w₁|θ|`.
pub fn elastic_net_objective(sys: &DesignSystem, pen: &PenaltyProfile, theta: &[f64]) -> f64 {
    let n = sys.rows() as f64;
    let t = DVector::from_column_slice(theta);
    let r = &sys.y - &sys.h * t;
    let penalty: f64 = theta
        .iter()
        .zip(pen.l1.iter().zip(&pen.l2))
        .map(|(b, (w1, w2))| w1 * b.abs() + w2 * b * b)
        .sum();
    r.norm_squared() / n + penalty
}

/// Largest violation of the elastic-net optimality conditions at `theta`.
pub fn elastic_net_kkt(sys: &DesignSystem, pen: &PenaltyProfile, theta: &[f64]) -> f64 {
    let n = sys.rows() as f64;
    let r = &sys.y - &sys.h * DVector::from_column_slice(theta);
    let grad = sys.h.tr_mul(&r) * (2.0 / n);
    theta
        .iter()
        .enumerate()
        .map(|(l, &b)| {
            let g = grad[l] - 2.0 * pen.l2[l] * b;
            if b == 0.0 {
                (g.abs() - pen.l1[l]).max(0.0)
            } else {
                (g - pen.l1[l] * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}
