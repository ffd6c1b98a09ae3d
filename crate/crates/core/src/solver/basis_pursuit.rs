use nalgebra::{DMatrix, DVector};

use super::{soft_threshold, DesignSystem, SolverOptions, SparseSolution};
use crate::error::{Error, Result};

/// Relative residual above which `y` is declared outside the range of `H`.
const FEASIBILITY_RTOL: f64 = 1e-8;
/// Singular values below this fraction of the largest are treated as zero.
/// Gram eigenvalues carry rounding near `ε·λ_max`, so the squared cutoff
/// must sit well above that.
const PINV_RCOND: f64 = 1e-6;

// residual balancing: rescale rho when one residual dominates by this factor,
// checked every BALANCE_INTERVAL iterations and frozen after BALANCE_UNTIL so
// the fixed-rho convergence guarantee applies to the tail
const BALANCE_RATIO: f64 = 10.0;
const BALANCE_STEP: f64 = 2.0;
const BALANCE_INTERVAL: usize = 25;
const BALANCE_UNTIL: usize = 5_000;
const POLISH_INTERVAL: usize = 25;

/// Weighted basis pursuit, `min Σ w(ℓ)|θ_ℓ|  s.t.  Hθ = y`, by ADMM.
///
/// The split is `θ = z` with `θ` confined to the affine set `{Hθ = y}` and
/// the weighted L1 norm on `z`:
///
/// ```text
/// x ← P(z − u)          projection via the cached pseudo-inverse of H
/// z ← S(x + u, w/ρ)     elementwise weighted soft threshold
/// u ← u + x − z
/// ```
///
/// `ρu` is always a subgradient of the weighted norm at `z`, so `z` is optimal
/// once `Hz = y` and `ρu` lies in the row space of `H`. Those two residuals are
/// the stopping test. `ρ` is adapted by residual balancing; the projection
/// does not depend on it, so adapting is free.
/// Adaptation stops after a fixed number of iterations.
///
/// Every few iterations the current support is polished: the equality system
/// restricted to that support is solved exactly and the result is accepted
/// when a dual vector certifies it (`|h_ℓᵀν| ≤ w_ℓ` off the support, equality
/// with the signs on it) within the same tolerances. ADMM alone reaches
/// `1e-8` residuals slowly on the LP-like problems this solves.
pub fn solve_basis_pursuit(
    sys: &DesignSystem,
    weights: &[f64],
    opt: &SolverOptions,
) -> Result<SparseSolution> {
    opt.validate()?;
    let p = sys.cols();
    if weights.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: weights.len(),
            context: "basis pursuit weights",
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidConfig(
            "basis pursuit weights must be finite and non-negative".into(),
        ));
    }

    let h = &sys.h;
    let y = &sys.y;
    let pinv = pseudo_inverse(h);
    let x0 = &pinv * y;
    let infeasibility = (h * &x0 - y).amax();
    let y_scale = y.amax().max(1.0);
    if infeasibility > FEASIBILITY_RTOL * y_scale * (1.0 + h.amax()) {
        return Err(Error::Infeasible {
            residual: infeasibility,
        });
    }

    let project = |v: &DVector<f64>| -> DVector<f64> { v - &pinv * (h * v - y) };
    // component of v orthogonal to the row space of H
    let off_rowspace = |v: &DVector<f64>| -> DVector<f64> { v - &pinv * (h * v) };

    let mut rho = opt.admm_rho;
    let mut x = x0.clone();
    let mut z = DVector::from_iterator(p, (0..p).map(|l| soft_threshold(x0[l], weights[l] / rho)));
    let mut u = &x - &z;
    let mut iterations = 0;
    let mut converged = false;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;

    while iterations < opt.admm_max_iterations {
        iterations += 1;
        x = project(&(&z - &u));
        let z_prev = z.clone();
        for l in 0..p {
            z[l] = soft_threshold(x[l] + u[l], weights[l] / rho);
        }
        u += &x - &z;

        primal = (h * &z - y).amax();
        dual = rho * off_rowspace(&u).amax();
        if primal <= opt.admm_primal_tolerance && dual <= opt.admm_dual_tolerance {
            converged = true;
            break;
        }
        if iterations % POLISH_INTERVAL == 0 {
            let nu0 = pinv.tr_mul(&(&u * rho));
            if let Some((polished, p_res, d_res)) = polish(h, y, weights, &z, &nu0, opt) {
                z = polished;
                primal = p_res;
                dual = d_res;
                converged = true;
                break;
            }
        }

        if iterations % BALANCE_INTERVAL != 0 || iterations > BALANCE_UNTIL {
            continue;
        }
        let r_norm = (&x - &z).norm();
        let s_norm = rho * (&z - &z_prev).norm();
        if r_norm > BALANCE_RATIO * s_norm {
            rho *= BALANCE_STEP;
            u /= BALANCE_STEP;
        } else if s_norm > BALANCE_RATIO * r_norm {
            rho /= BALANCE_STEP;
            u *= BALANCE_STEP;
        }
    }

    let objective = z.iter().zip(weights).map(|(b, w)| w * b.abs()).sum();
    Ok(SparseSolution {
        theta: z.iter().copied().collect(),
        kappa: vec![0.0; sys.rows()],
        intercept: 0.0,
        objective,
        iterations,
        converged,
        kkt_residual: primal.max(dual),
        degenerate_columns: (0..p).filter(|&l| h.column(l).amax() == 0.0).collect(),
        objective_history: Vec::new(),
    })
}

/// Exact solve on the support of `z`, kept only if it is certified optimal.
/// Returns the point with its primal and dual residuals.
fn polish(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &[f64],
    z: &DVector<f64>,
    nu0: &DVector<f64>,
    opt: &SolverOptions,
) -> Option<(DVector<f64>, f64, f64)> {
    let n = h.nrows();
    let zmax = z.amax();
    for cut in [0.0, 1e-6 * zmax] {
        let support: Vec<usize> = (0..z.len()).filter(|&l| z[l].abs() > cut).collect();
        if support.is_empty() || support.len() > n {
            continue;
        }
        let hs = h.select_columns(&support);
        let eig = hs.tr_mul(&hs).symmetric_eigen();
        if eig.eigenvalues.min() <= eig.eigenvalues.amax() * PINV_RCOND * PINV_RCOND {
            continue;
        }
        let ps = pseudo_inverse(&hs);
        let theta_s = &ps * y;
        if support.iter().zip(theta_s.iter()).any(|(&l, t)| t.signum() != z[l].signum()) {
            continue;
        }
        let primal = (&hs * &theta_s - y).amax();
        if primal > opt.admm_primal_tolerance {
            continue;
        }
        // closest ν to the ADMM estimate satisfying H_Sᵀν = w_S·sign(θ_S)
        let c = DVector::from_iterator(
            support.len(),
            support.iter().zip(theta_s.iter()).map(|(&l, t)| weights[l] * t.signum()),
        );
        let nu = nu0 + ps.tr_mul(&(c - hs.tr_mul(nu0)));
        let corr = h.tr_mul(&nu);
        let mut dual = 0.0f64;
        let mut on = vec![false; z.len()];
        for (&l, t) in support.iter().zip(theta_s.iter()) {
            on[l] = true;
            dual = dual.max((corr[l] - weights[l] * t.signum()).abs());
        }
        for l in (0..z.len()).filter(|&l| !on[l]) {
            dual = dual.max(corr[l].abs() - weights[l]);
        }
        if dual > opt.admm_dual_tolerance {
            continue;
        }
        let mut full = DVector::zeros(z.len());
        for (&l, t) in support.iter().zip(theta_s.iter()) {
            full[l] = *t;
        }
        return Some((full, primal, dual.max(0.0)));
    }
    None
}

/// Orthogonal projection of `y` onto the column space of `h`.
pub fn range_projection(h: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    h * (pseudo_inverse(h) * y)
}

/// Minimum-norm pseudo-inverse through the eigendecomposition of the
/// smaller Gram matrix: `Hᵀ(HHᵀ)⁺` for wide `H`, `(HᵀH)⁺Hᵀ` for tall.
/// Eigenvalues below `PINV_RCOND²` of the largest are treated as zero.
///
/// nalgebra's SVD was not used: on 10×100 inputs from the pipeline it
/// reconstructed `H` with errors near 1e-3.
pub(crate) fn pseudo_inverse(h: &DMatrix<f64>) -> DMatrix<f64> {
    let wide = h.ncols() > h.nrows();
    let gram = if wide { h * h.transpose() } else { h.tr_mul(h) };
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let cutoff = top * PINV_RCOND * PINV_RCOND;
    let inv = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&e| if e > cutoff { 1.0 / e } else { 0.0 }),
    );
    let q = &eig.eigenvectors;
    let gram_pinv = q * DMatrix::from_diagonal(&inv) * q.transpose();
    if wide {
        h.tr_mul(&gram_pinv)
    } else {
        gram_pinv * h.transpose()
    }
}
