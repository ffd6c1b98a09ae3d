//! Reference implementations used to check the production solvers. Kept
//! deliberately naive: dense algebra, no shared code with the library
//! beyond the instance generator.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use wlanloc::simulate::SimRng;

pub fn gaussian_matrix(rng: &mut SimRng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.normal())
}

pub fn gaussian_vector(rng: &mut SimRng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.normal())
}

pub fn en_objective(h: &DMatrix<f64>, y: &DVector<f64>, l1: &[f64], l2: &[f64], t: &[f64]) -> f64 {
    let n = h.nrows() as f64;
    let mut r = y.clone();
    for (l, &b) in t.iter().enumerate() {
        for i in 0..h.nrows() {
            r[i] -= h[(i, l)] * b;
        }
    }
    let mut obj = r.dot(&r) / n;
    for l in 0..t.len() {
        obj += l1[l] * t[l].abs() + l2[l] * t[l] * t[l];
    }
    obj
}

/// Accelerated proximal gradient with function-value restarts.
pub fn fista_elastic_net(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    l1: &[f64],
    l2: &[f64],
    max_iter: usize,
) -> Vec<f64> {
    let n = h.nrows() as f64;
    let p = h.ncols();
    let gram = h.transpose() * h * (2.0 / n);
    let hty = h.transpose() * y * (2.0 / n);
    let sigma = gram.symmetric_eigenvalues().max();
    let lip = sigma + 2.0 * l2.iter().cloned().fold(0.0, f64::max);
    let step = 1.0 / lip;

    let prox = |v: f64, l: usize| {
        let t = l1[l] * step;
        if v > t {
            v - t
        } else if v < -t {
            v + t
        } else {
            0.0
        }
    };
    let mut x = DVector::zeros(p);
    let mut z = x.clone();
    let mut tk = 1.0f64;
    let mut f_prev = f64::INFINITY;
    for _ in 0..max_iter {
        let mut grad = &gram * &z - &hty;
        for l in 0..p {
            grad[l] += 2.0 * l2[l] * z[l];
        }
        let next = DVector::from_fn(p, |l, _| prox(z[l] - step * grad[l], l));
        let f = en_objective(h, y, l1, l2, next.as_slice());
        let t_next = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        if f > f_prev {
            // restart momentum
            tk = 1.0;
            z = x.clone();
            continue;
        }
        let delta = (&next - &x).amax();
        z = &next + (&next - &x) * ((tk - 1.0) / t_next);
        x = next;
        tk = t_next;
        f_prev = f;
        if delta < 1e-15 {
            break;
        }
    }
    x.iter().copied().collect()
}

/// `(HᵀH/n + W₂)θ = Hᵀy/n`, the minimizer when all L1 weights are zero.
pub fn ridge_closed_form(h: &DMatrix<f64>, y: &DVector<f64>, l2: &[f64]) -> Vec<f64> {
    let n = h.nrows() as f64;
    let mut a = h.transpose() * h / n;
    for (l, w) in l2.iter().enumerate() {
        a[(l, l)] += w;
    }
    let b = h.transpose() * y / n;
    a.lu().solve(&b).expect("ridge system is non-singular").iter().copied().collect()
}

/// Weighted basis pursuit by enumeration: an optimum of the LP is attained at
/// a basic feasible point, so it suffices to try every set of `rank`
/// columns. Returns the best objective and its coefficients.
pub fn basis_pursuit_by_enumeration(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &[f64],
) -> (f64, Vec<f64>) {
    let (n, p) = h.shape();
    let mut best = (f64::INFINITY, vec![0.0; p]);
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let sub = h.select_columns(&subset);
        if let Some(sol) = sub.clone().lu().solve(y) {
            if (&sub * &sol - y).amax() < 1e-9 && sol.iter().all(|v| v.is_finite()) {
                let obj: f64 = subset.iter().zip(sol.iter()).map(|(&l, v)| weights[l] * v.abs()).sum();
                if obj < best.0 {
                    let mut full = vec![0.0; p];
                    for (&l, v) in subset.iter().zip(sol.iter()) {
                        full[l] = *v;
                    }
                    best = (obj, full);
                }
            }
        }
        // next combination in lexicographic order
        let mut k = n;
        while k > 0 && subset[k - 1] == p - n + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return best;
        }
        subset[k - 1] += 1;
        for m in k..n {
            subset[m] = subset[m - 1] + 1;
        }
    }
}
