use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    augment_outliers, solve_basis_pursuit, solve_weighted_elastic_net, DesignSystem,
    PenaltyProfile, SolverOptions, SparseSolution,
};
use crate::error::{Error, Result};

/// Sparse-recovery formulation used for fine localization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cs,
    Lasso,
    Glmnet,
    MCs,
    MLasso,
    MGlmnet,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Cs,
        Method::Lasso,
        Method::Glmnet,
        Method::MCs,
        Method::MLasso,
        Method::MGlmnet,
    ];

    /// Whether the formulation carries the outlier vector `κ`.
    pub fn is_outlier_aware(self) -> bool {
        matches!(self, Method::MCs | Method::MLasso | Method::MGlmnet)
    }

    pub fn is_equality_constrained(self) -> bool {
        matches!(self, Method::Cs | Method::MCs)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Cs => "cs",
            Method::Lasso => "lasso",
            Method::Glmnet => "glmnet",
            Method::MCs => "m-cs",
            Method::MLasso => "m-lasso",
            Method::MGlmnet => "m-glmnet",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Scalar regularization settings: `λ`, `α`, `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub lambda: f64,
    pub alpha: f64,
    pub mu: f64,
}

impl Default for Tuning {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            alpha: 0.95,
            mu: 0.5,
        }
    }
}

impl Tuning {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig("alpha must lie in [0, 1]".into()));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig("mu must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Penalty on the `θ` block for `method` with `p` columns. The `κ`
    /// weight travels in `mu` and is attached by [`augment_outliers`].
    pub fn penalty(&self, method: Method, p: usize) -> PenaltyProfile {
        let mut pen = match method {
            Method::Cs | Method::MCs => PenaltyProfile::unit_l1(p),
            Method::Lasso | Method::MLasso => PenaltyProfile::lasso(p, self.lambda),
            Method::Glmnet | Method::MGlmnet => {
                PenaltyProfile::elastic_net(p, self.lambda, self.alpha)
            }
        };
        pen.mu = self.mu;
        pen
    }
}

/// Per-column shift/scale and response shift applied before solving.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub column_shift: Vec<f64>,
    pub column_scale: Vec<f64>,
    pub response_shift: f64,
}

impl Standardization {
    /// Centers `y` and every column of `H`, then scales columns to unit norm.
    /// Columns that are constant become all-zero with scale 1.
    pub fn fit(sys: &DesignSystem) -> (DesignSystem, Standardization) {
        let n = sys.rows() as f64;
        let p = sys.cols();
        let mut h = sys.h.clone();
        let mut shift = Vec::with_capacity(p);
        let mut scale = Vec::with_capacity(p);
        for l in 0..p {
            let mut col = h.column_mut(l);
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
            let norm = col.norm();
            let magnitude = sys.h.column(l).amax().max(1.0);
            if norm > 1e-12 * magnitude {
                col /= norm;
                scale.push(norm);
            } else {
                col.fill(0.0);
                scale.push(1.0);
            }
            shift.push(mean);
        }
        let y_mean = sys.y.sum() / n;
        let y = sys.y.add_scalar(-y_mean);
        (
            DesignSystem { h, y },
            Standardization {
                column_shift: shift,
                column_scale: scale,
                response_shift: y_mean,
            },
        )
    }

    /// Maps standardized coefficients back to the original column units.
    pub fn unscale(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.column_scale)
            .map(|(b, s)| b / s)
            .collect()
    }
}

/// Solves `method` on `sys` and returns coefficients in the units of the
/// original columns.
///
/// With standardization on, the outlier columns appended for the `M-`
/// variants are centered as well; together with the centered response this
/// is the same as fitting an unpenalized intercept, which is reported in
/// [`SparseSolution::intercept`].
pub fn estimate(
    method: Method,
    sys: &DesignSystem,
    tuning: &Tuning,
    opt: &SolverOptions,
) -> Result<SparseSolution> {
    tuning.validate()?;
    let p = sys.cols();
    let n = sys.rows();

    let (work, std) = if opt.standardize {
        let (s, rec) = Standardization::fit(sys);
        (s, Some(rec))
    } else {
        (sys.clone(), None)
    };

    let pen = tuning.penalty(method, p);
    let (work, pen) = if method.is_outlier_aware() {
        let (mut aug, apen) = augment_outliers(&work, &pen);
        if std.is_some() {
            aug.h
                .columns_mut(p, n)
                .add_scalar_mut(-1.0 / n as f64);
        }
        (aug, apen)
    } else {
        (work, pen)
    };

    let mut sol = if method.is_equality_constrained() {
        solve_basis_pursuit(&work, &pen.l1, opt)?
    } else {
        solve_weighted_elastic_net(&work, &pen, opt)?
    };

    if method.is_outlier_aware() {
        sol.kappa = sol.theta.split_off(p);
    } else {
        sol.kappa = vec![0.0; n];
    }
    sol.degenerate_columns.retain(|&l| l < p);

    if let Some(rec) = std {
        sol.theta = rec.unscale(&sol.theta);
        let kappa_mean = sol.kappa.iter().sum::<f64>() / n as f64;
        let shift: f64 = sol
            .theta
            .iter()
            .zip(&rec.column_shift)
            .map(|(b, m)| b * m)
            .sum();
        sol.intercept = rec.response_shift - shift - kappa_mean;
    }
    Ok(sol)
}
