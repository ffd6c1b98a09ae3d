//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Trend criteria tune λ, α and μ by cross-validation on a
//! tuning set disjoint from the fixes they are scored on.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use oracles::*;
use wlanloc::clustering::{build_clusters, build_similarity_graph, ClusterSet};
use wlanloc::evaluate::{cross_validate, error_cdf, evaluate_methods, tuning_grid, CvMode, EvalConfig, Estimator};
use wlanloc::localize::prepare;
use wlanloc::simulate::*;
use wlanloc::solver::*;
use wlanloc::survey::{ReliabilityProfile, StabilityProfile};
use wlanloc::{localize, train, LocalizeOptions, OnlineMeasurement, PositionEstimate, TrainedModel};

const TOL: f64 = 1e-7;
const BIAS_DB: f64 = 30.0;

/// Every converged solution met along the way: (context, kkt residual, bound).
static KKT: Mutex<Vec<(String, f64, f64)>> = Mutex::new(Vec::new());

fn note_kkt(ctx: impl Into<String>, sol: &SparseSolution, bound: f64) {
    if sol.converged {
        KKT.lock().unwrap().push((ctx.into(), sol.kkt_residual, bound));
    }
}

fn note_fix(method: Method, est: &PositionEstimate) {
    let bound = match method {
        Method::Cs | Method::MCs => 10.0 * SolverOptions::default().admm_primal_tolerance,
        _ => 10.0 * TOL,
    };
    let d = &est.diagnostics;
    if d.converged {
        KKT.lock().unwrap().push((format!("pipeline {method}"), d.kkt_residual, bound));
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn main() {
    let criteria: Vec<(usize, &str, fn() -> Verdict)> = vec![
        (1, "elastic net matches proximal-gradient oracle", c1_oracle_equivalence),
        (2, "alpha endpoints match ridge and lasso", c2_endpoints),
        (4, "basis pursuit recovers 1-sparse signals", c4_basis_pursuit),
        (5, "outlier detection", c5_outliers),
        (6, "AP-count trend", c6_ap_count),
        (7, "method ordering", c7_ordering),
        (8, "clustering invariants", c8_clustering),
        (9, "LASSO fix time at pipeline scale", c9_timing),
        (10, "simulate + evaluate determinism", c10_determinism),
        (3, "KKT certificates at every converged solution", c3_kkt),
    ];
    let mut results = BTreeMap::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let line = format!(
            "criterion {id:>2} {}: {name} ({}; {:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        results.insert(id, (v.pass, line));
    }
    println!("\nsummary");
    for (_, line) in results.values() {
        println!("{line}");
    }
    let failed: Vec<usize> = results.iter().filter(|(_, v)| !v.0).map(|(k, _)| *k).collect();
    if failed.is_empty() {
        println!("all criteria passed");
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn c1_oracle_equivalence() -> Verdict {
    let mut worst = 0.0f64;
    let mut solver_time = Duration::ZERO;
    let mut all_converged = true;
    for seed in 0..50 {
        let mut rng = SimRng::new(seed, 0);
        let h = gaussian_matrix(&mut rng, 10, 30);
        let y = gaussian_vector(&mut rng, 10) * 3.0;
        let lambda = 0.05 + 0.5 * rng.uniform();
        let alpha = rng.uniform();
        let mut pen = PenaltyProfile::elastic_net(30, lambda, alpha);
        for l in 0..30 {
            let w = 0.5 + rng.uniform();
            pen.l1[l] *= w;
            pen.l2[l] *= w;
        }
        let sys = DesignSystem::new(h, y).unwrap();
        let t = Instant::now();
        let sol = solve_weighted_elastic_net(&sys, &pen, &SolverOptions::default()).unwrap();
        solver_time += t.elapsed();
        all_converged &= sol.converged;
        note_kkt(format!("oracle instance {seed}"), &sol, 10.0 * TOL);
        let oracle = fista_elastic_net(&sys.h, &sys.y, &pen.l1, &pen.l2, 200_000);
        let f_cd = en_objective(&sys.h, &sys.y, &pen.l1, &pen.l2, &sol.theta);
        let f_or = en_objective(&sys.h, &sys.y, &pen.l1, &pen.l2, &oracle);
        worst = worst.max(relative_gap(f_cd, f_or));
    }
    verdict(
        all_converged && worst <= 1e-6 && solver_time < Duration::from_secs(10),
        format!(
            "50 instances, worst relative gap {worst:.1e} (limit 1e-6), solver time {:.3} s (limit 10 s)",
            solver_time.as_secs_f64()
        ),
    )
}

fn c2_endpoints() -> Verdict {
    let mut ridge_worst = 0.0f64;
    let mut lasso_worst = 0.0f64;
    for seed in 100..120 {
        let mut rng = SimRng::new(seed, 0);
        let h = gaussian_matrix(&mut rng, 10, 30);
        let y = gaussian_vector(&mut rng, 10);
        let lambda = 0.05 + rng.uniform();
        let pen = PenaltyProfile::elastic_net(30, lambda, 0.0);
        let sys = DesignSystem::new(h, y).unwrap();
        let sol = solve_weighted_elastic_net(&sys, &pen, &SolverOptions::default()).unwrap();
        note_kkt(format!("ridge instance {seed}"), &sol, 10.0 * TOL);
        let ridge = ridge_closed_form(&sys.h, &sys.y, &pen.l2);
        for (a, b) in sol.theta.iter().zip(&ridge) {
            ridge_worst = ridge_worst.max((a - b).abs());
        }
    }
    for seed in 200..220 {
        let mut rng = SimRng::new(seed, 0);
        let h = gaussian_matrix(&mut rng, 10, 30);
        let y = gaussian_vector(&mut rng, 10) * 2.0;
        let lambda = 0.05 + 0.5 * rng.uniform();
        let sys = DesignSystem::new(h, y).unwrap();
        let en = PenaltyProfile::elastic_net(30, lambda, 1.0);
        let lasso = PenaltyProfile {
            lambda,
            alpha: 1.0,
            mu: 0.0,
            l1: vec![lambda; 30],
            l2: vec![0.0; 30],
        };
        let opt = SolverOptions::default();
        let a = solve_weighted_elastic_net(&sys, &en, &opt).unwrap();
        let b = solve_weighted_elastic_net(&sys, &lasso, &opt).unwrap();
        note_kkt(format!("lasso instance {seed}"), &a, 10.0 * TOL);
        let oracle = fista_elastic_net(&sys.h, &sys.y, &lasso.l1, &lasso.l2, 200_000);
        let f_a = en_objective(&sys.h, &sys.y, &lasso.l1, &lasso.l2, &a.theta);
        let f_o = en_objective(&sys.h, &sys.y, &lasso.l1, &lasso.l2, &oracle);
        for (x, y) in a.theta.iter().zip(&b.theta) {
            lasso_worst = lasso_worst.max((x - y).abs());
        }
        lasso_worst = lasso_worst.max(relative_gap(f_a, f_o));
    }
    verdict(
        ridge_worst <= 1e-6 && lasso_worst <= 1e-6,
        format!("20+20 instances, ridge max deviation {ridge_worst:.1e}, lasso max deviation {lasso_worst:.1e} (limit 1e-6)"),
    )
}

fn c3_kkt() -> Verdict {
    let kkt = KKT.lock().unwrap();
    let violations: Vec<_> = kkt.iter().filter(|(_, r, b)| !(r <= b)).collect();
    let worst = kkt.iter().map(|(_, r, b)| r / b).fold(0.0, f64::max);
    let mut detail = format!(
        "{} converged solutions checked, {} violations, worst residual/bound {worst:.2}",
        kkt.len(),
        violations.len()
    );
    if let Some((ctx, r, b)) = violations.first() {
        detail += &format!(", first: {ctx} {r:.1e} > {b:.1e}");
    }
    verdict(!kkt.is_empty() && violations.is_empty(), detail)
}

fn c4_basis_pursuit() -> Verdict {
    let opt = SolverOptions::default();
    let mut recovered = 0;
    let mut slowest = Duration::ZERO;
    for seed in 0..100u64 {
        let mut rng = SimRng::new(4000 + seed, 0);
        let h = gaussian_matrix(&mut rng, 20, 60);
        let k = rng.below(60);
        let amp = if rng.uniform() < 0.5 { -1.0 } else { 1.0 } * (0.5 + 2.0 * rng.uniform());
        let y: DVector<f64> = h.column(k) * amp;
        let sys = DesignSystem::new(h, y).unwrap();
        let t = Instant::now();
        let sol = solve_basis_pursuit(&sys, &[1.0; 60], &opt).unwrap();
        slowest = slowest.max(t.elapsed());
        note_kkt(format!("basis pursuit trial {seed}"), &sol, 10.0 * opt.admm_primal_tolerance);
        let top = sol.theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let support: Vec<usize> = (0..60).filter(|&l| sol.theta[l].abs() > 1e-6 * top).collect();
        if support == [k] && (sol.theta[k] - amp).abs() <= 1e-6 * amp.abs() {
            recovered += 1;
        }
    }
    verdict(
        recovered >= 95 && slowest < Duration::from_millis(100),
        format!(
            "{recovered}/100 exact recoveries (need 95), slowest solve {:.1} ms (limit 100 ms)",
            slowest.as_secs_f64() * 1e3
        ),
    )
}

// ---- synthetic testbed shared by the trend criteria ----

type Point = (f64, f64);

struct Testbed {
    env: EnvironmentSpec,
    model: TrainedModel,
}

fn testbed() -> &'static Testbed {
    static BED: std::sync::OnceLock<Testbed> = std::sync::OnceLock::new();
    BED.get_or_init(|| {
        let env = EnvironmentSpec::default();
        let model = train(&generate_survey(&env).unwrap().map).unwrap();
        Testbed { env, model }
    })
}

// disjoint seeds per set: 1xx tuning, 0xx scoring
const SEED_C7: u64 = 1;
const SEED_C6: u64 = 2;
const SEED_C5: u64 = 3;
const SEED_C5_FOUR: u64 = 4;
const TUNING_OFFSET: u64 = 100;

fn clean_set(env: &EnvironmentSpec, n: usize, seed: u64) -> (Vec<OnlineMeasurement>, Vec<Point>) {
    let set = generate_test_set(env, n, &OutlierSpec::none(), seed).unwrap();
    (set.iter().map(|s| s.0.clone()).collect(), set.iter().map(|s| s.1.position).collect())
}

struct Contaminated {
    fixes: Vec<OnlineMeasurement>,
    truths: Vec<Point>,
    injected: Vec<Vec<usize>>,
}

/// Fixes with `count(t)` APs biased by +30 dB. The biased APs are drawn from
/// the APs the pipeline selects for the clean fix and that read above `γ`, so
/// the bias leaves the reliability bits, the ROI and the selection unchanged.
fn contaminated_set(bed: &Testbed, n: usize, count: impl Fn(usize) -> usize, seed: u64) -> Contaminated {
    let gamma = bed.model.config.reliability_threshold;
    let mut out = Contaminated {
        fixes: vec![],
        truths: vec![],
        injected: vec![],
    };
    for (t, pos) in random_positions(&bed.env, n, seed).into_iter().enumerate() {
        let fs = fix_seed(seed, t);
        let (clean, _) = generate_online(&bed.env, pos, &OutlierSpec::none(), fs).unwrap();
        let prep = prepare(&clean, &bed.model, 10).unwrap();
        let mut candidates: Vec<usize> =
            prep.selection.selected.iter().copied().filter(|&i| clean.rss[i] >= gamma).collect();
        let mut rng = SimRng::new(fs, 99);
        let mut bad = vec![];
        for _ in 0..count(t).min(candidates.len()) {
            bad.push(candidates.remove(rng.below(candidates.len())));
        }
        bad.sort_unstable();
        let (y, _) = generate_online(&bed.env, pos, &OutlierSpec::bias(bad.clone(), BIAS_DB), fs).unwrap();
        out.fixes.push(y);
        out.truths.push(pos);
        out.injected.push(bad);
    }
    out
}

fn options(num_aps: usize) -> LocalizeOptions {
    LocalizeOptions {
        num_aps,
        ..Default::default()
    }
}

/// Two-fold position-error cross-validation on a tuning set.
fn tune(bed: &Testbed, fixes: &[OnlineMeasurement], truths: &[Point], method: Method, num_aps: usize) -> Tuning {
    let lambdas = [0.03, 0.1, 0.3, 1.0, 3.0];
    let mus = [0.1, 0.3, 1.0, 3.0];
    let grid = match method {
        Method::Cs => return Tuning::default(),
        Method::Lasso => tuning_grid(&lambdas, &[1.0], &[0.5]),
        Method::Glmnet => tuning_grid(&lambdas, &[0.95, 0.99], &[0.5]),
        Method::MCs => tuning_grid(&[0.1], &[1.0], &mus),
        Method::MLasso => tuning_grid(&lambdas, &[1.0], &mus),
        Method::MGlmnet => tuning_grid(&lambdas, &[0.95, 0.99], &mus),
    };
    cross_validate(&bed.model, fixes, Some(truths), method, &grid, 2, CvMode::PositionError, &options(num_aps))
        .unwrap()
        .best
}

struct Run {
    errors: Vec<f64>,
    flagged: Vec<Vec<usize>>,
}

fn run(bed: &Testbed, fixes: &[OnlineMeasurement], truths: &[Point], method: Method, tuning: Tuning, num_aps: usize) -> Run {
    let opts = options(num_aps);
    let mut r = Run {
        errors: vec![],
        flagged: vec![],
    };
    for (y, p) in fixes.iter().zip(truths) {
        let est = localize(y, &bed.model, method, &tuning, &opts).unwrap();
        note_fix(method, &est);
        r.errors.push((est.x - p.0).hypot(est.y - p.1));
        r.flagged.push(est.outlier_indices());
    }
    r
}

fn median(v: &[f64]) -> f64 {
    error_cdf(v).unwrap().p50
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn show(t: &Tuning) -> String {
    format!("l={} a={} mu={}", t.lambda, t.alpha, t.mu)
}

fn c5_outliers() -> Verdict {
    let bed = testbed();
    let one_or_two = |t: usize| 1 + t % 2;
    let tune_set = contaminated_set(bed, 100, one_or_two, SEED_C5 + TUNING_OFFSET);
    let test = contaminated_set(bed, 100, one_or_two, SEED_C5);
    let t_ml = tune(bed, &tune_set.fixes, &tune_set.truths, Method::MLasso, 10);
    let t_l = tune(bed, &tune_set.fixes, &tune_set.truths, Method::Lasso, 10);
    let ml = run(bed, &test.fixes, &test.truths, Method::MLasso, t_ml, 10);
    let l = run(bed, &test.fixes, &test.truths, Method::Lasso, t_l, 10);
    let hits = test
        .injected
        .iter()
        .zip(&ml.flagged)
        .filter(|(bad, flagged)| !bad.is_empty() && bad.iter().all(|b| flagged.contains(b)))
        .count();

    let four = |_: usize| 4;
    let tune4 = contaminated_set(bed, 100, four, SEED_C5_FOUR + TUNING_OFFSET);
    let test4 = contaminated_set(bed, 100, four, SEED_C5_FOUR);
    let t_mg = tune(bed, &tune4.fixes, &tune4.truths, Method::MGlmnet, 10);
    let t_mc = tune(bed, &tune4.fixes, &tune4.truths, Method::MCs, 10);
    let mg = median(&run(bed, &test4.fixes, &test4.truths, Method::MGlmnet, t_mg, 10).errors);
    let mc = median(&run(bed, &test4.fixes, &test4.truths, Method::MCs, t_mc, 10).errors);

    let (m_ml, m_l) = (median(&ml.errors), median(&l.errors));
    verdict(
        hits >= 90 && m_ml < m_l && mg <= mc,
        format!(
            "M-LASSO flagged every injected AP in {hits}/100 (need 90); median M-LASSO {m_ml:.2} ft vs LASSO {m_l:.2} ft; \
             4 outliers: median M-GLMNET {mg:.2} ft vs M-CS {mc:.2} ft; tuned M-LASSO {}, LASSO {}, M-GLMNET {}, M-CS {}",
            show(&t_ml),
            show(&t_l),
            show(&t_mg),
            show(&t_mc)
        ),
    )
}

fn c6_ap_count() -> Verdict {
    let bed = testbed();
    let (tf, tt) = clean_set(&bed.env, 100, SEED_C6 + TUNING_OFFSET);
    let (f, t) = clean_set(&bed.env, 50, SEED_C6);
    let mut mae = BTreeMap::new();
    for aps in [4usize, 6, 8, 10, 12] {
        for m in [Method::Lasso, Method::Glmnet, Method::Cs] {
            let tuning = tune(bed, &tf, &tt, m, aps);
            mae.insert((m.to_string(), aps), mean(&run(bed, &f, &t, m, tuning, aps).errors));
        }
    }
    let q = |m: &str, a: usize| mae[&(m.to_string(), a)];
    let ratio_l = q("lasso", 12) / q("lasso", 4);
    let ratio_g = q("glmnet", 12) / q("glmnet", 4);
    let mut ok = ratio_l <= 0.6 && ratio_g <= 0.6;
    let mut detail = format!("MAE 12/4 ratio LASSO {ratio_l:.2}, GLMNET {ratio_g:.2} (limit 0.6); LASSO vs CS MAE");
    for aps in [4usize, 6, 8] {
        let (l, c) = (q("lasso", aps), q("cs", aps));
        ok &= l <= c;
        detail += &format!(" {aps} APs {l:.2}/{c:.2}{}", if l <= c { "" } else { " (violated)" });
    }
    verdict(ok, detail)
}

fn c7_ordering() -> Verdict {
    let bed = testbed();
    let (tf, tt) = clean_set(&bed.env, 100, SEED_C7 + TUNING_OFFSET);
    let (f, t) = clean_set(&bed.env, 100, SEED_C7);
    let mut medians = vec![];
    for m in [Method::Lasso, Method::Glmnet, Method::Cs] {
        let tuning = tune(bed, &tf, &tt, m, 10);
        medians.push(median(&run(bed, &f, &t, m, tuning, 10).errors));
    }
    let report = evaluate_methods(&bed.model, &f, &t, &[Estimator::Wknn], &EvalConfig::default()).unwrap();
    medians.push(report.rows[0].errors.p50);
    let ok = medians.windows(2).all(|w| w[0] <= w[1]);
    verdict(
        ok,
        format!(
            "medians LASSO {:.2} <= GLMNET {:.2} <= CS {:.2} <= WKNN {:.2} ft",
            medians[0], medians[1], medians[2], medians[3]
        ),
    )
}

fn check_clusters(rel: &ReliabilityProfile, stab: &StabilityProfile, eta: f64) -> Result<usize, String> {
    let mut total = 0;
    for o in 0..rel.num_orientations {
        let graph = build_similarity_graph(rel, o);
        let a = build_clusters(&graph, stab, eta).map_err(|e| e.to_string())?;
        let b = build_clusters(&build_similarity_graph(rel, o), stab, eta).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("orientation {o}: non-deterministic"));
        }
        check_set(&a, rel, stab, o)?;
        total += a.len();
    }
    Ok(total)
}

fn check_set(set: &ClusterSet, rel: &ReliabilityProfile, stab: &StabilityProfile, o: usize) -> Result<(), String> {
    let n = rel.num_rps;
    let bits = |j: usize| rel.indicators(o, j);
    let hamming = |a: usize, b: usize| bits(a).iter().zip(bits(b)).filter(|(x, y)| x != y).count();
    for j in 0..n {
        let holders: Vec<_> = set.clusters.iter().filter(|c| c.members.contains(&j)).collect();
        if holders.is_empty() {
            return Err(format!("orientation {o}: RP {j} uncovered"));
        }
        for c in &holders {
            if hamming(j, c.seed) > set.max_hamming {
                return Err(format!("orientation {o}: RP {j} too far from cluster seed {}", c.seed));
            }
        }
    }
    for c in &set.clusters {
        let head_var = stab.rp_variance(o, c.head);
        if c.members.iter().any(|&j| stab.rp_variance(o, j) < head_var) {
            return Err(format!("orientation {o}: head {} is not variance-minimal", c.head));
        }
    }
    Ok(())
}

fn c8_clustering() -> Verdict {
    let (orients, aps) = (4, 20);
    let eta = 0.92;
    let mut checked = 0;
    let mut clusters = 0;
    for seed in 0..20u64 {
        let mut rng = SimRng::new(8000 + seed, 0);
        let n = 20 + rng.below(30);
        // a few prototypes with sparse bit flips, so clusters form and overlap
        let protos: Vec<Vec<bool>> = (0..4).map(|_| (0..aps).map(|_| rng.uniform() < 0.5).collect()).collect();
        let mut bits = Vec::with_capacity(orients * n * aps);
        for _ in 0..orients {
            for _ in 0..n {
                let p = &protos[rng.below(protos.len())];
                bits.extend(p.iter().map(|&b| if rng.uniform() < 0.04 { !b } else { b }));
            }
        }
        let rel = ReliabilityProfile::from_indicators(orients, n, aps, bits).unwrap();
        let var: Vec<f64> = (0..orients * n).map(|_| (4.0 * rng.uniform()).round() + 1.0).collect();
        let stab = StabilityProfile::from_rp_variances(orients, n, var).unwrap();
        match check_clusters(&rel, &stab, eta) {
            Ok(k) => clusters += k,
            Err(e) => return verdict(false, format!("random profile {seed}: {e}")),
        }
        checked += 1;
    }

    let n = 15;
    let ones = |o: usize| -> Vec<f64> { (0..o * n).map(|k| 1.0 + (k % 3) as f64).collect() };
    let identical = ReliabilityProfile::from_indicators(1, n, aps, (0..n).flat_map(|_| (0..aps).map(|i| i % 2 == 0)).collect()).unwrap();
    let stab = StabilityProfile::from_rp_variances(1, n, ones(1)).unwrap();
    let set = build_clusters(&build_similarity_graph(&identical, 0), &stab, eta).unwrap();
    if set.len() != 1 || set.clusters[0].members.len() != n {
        return verdict(false, format!("identical profiles gave {} clusters", set.len()));
    }
    if let Err(e) = check_set(&set, &identical, &stab, 0) {
        return verdict(false, format!("identical profiles: {e}"));
    }
    // RP j reliable at APs j and j+1: pairwise distance at least 2 > radius 1
    let distinct = ReliabilityProfile::from_indicators(
        1,
        n,
        aps,
        (0..n).flat_map(|j| (0..aps).map(move |i| i == j || i == j + 1)).collect(),
    )
    .unwrap();
    let set = build_clusters(&build_similarity_graph(&distinct, 0), &stab, eta).unwrap();
    if set.len() != n || set.clusters.iter().any(|c| c.members.len() != 1) {
        return verdict(false, format!("distinct profiles gave {} clusters", set.len()));
    }
    if let Err(e) = check_set(&set, &distinct, &stab, 0) {
        return verdict(false, format!("distinct profiles: {e}"));
    }
    verdict(
        true,
        format!("{checked} random profiles ({clusters} clusters) plus all-identical and all-distinct cases"),
    )
}

fn c9_timing() -> Verdict {
    let bed = testbed();
    let (f, _) = clean_set(&bed.env, 100, 9);
    let opts = options(10);
    let tuning = Tuning::default();
    let mut slowest = Duration::ZERO;
    let mut widest = 0;
    let mut total = Duration::ZERO;
    for y in &f {
        let prep = prepare(y, &bed.model, 10).unwrap();
        widest = widest.max(prep.system.cols());
        let t = Instant::now();
        let est = localize(y, &bed.model, Method::Lasso, &tuning, &opts).unwrap();
        let dt = t.elapsed();
        note_fix(Method::Lasso, &est);
        slowest = slowest.max(dt);
        total += dt;
    }
    verdict(
        slowest < Duration::from_millis(50) && widest <= 200,
        format!(
            "100 fixes, widest ROI {widest} columns, mean {:.2} ms, slowest {:.2} ms per fix (limit 50 ms)",
            total.as_secs_f64() * 10.0,
            slowest.as_secs_f64() * 1e3
        ),
    )
}

fn cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wlanloc"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn pipeline_run(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    cli(
        &["simulate", "--seed", "11", "--out", "map.json", "--fixes", "40", "--fixes-out", "fixes.csv", "--truth-out", "truth.csv"],
        dir,
    )?;
    cli(&["train", "--map", "map.json", "--out", "model.json"], dir)?;
    cli(
        &[
            "evaluate", "--model", "model.json", "--measurements", "fixes.csv", "--truth", "truth.csv",
            "--methods", "lasso,cs,wknn", "--aps", "10", "--out", "report.csv", "--cdf-out", "cdf.csv",
        ],
        dir,
    )?;
    ["map.json", "fixes.csv", "report.csv", "cdf.csv"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| e.to_string()))
        .collect()
}

fn c10_determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = match (pipeline_run(a.path()), pipeline_run(b.path())) {
        (Ok(ra), Ok(rb)) => (ra, rb),
        (Err(e), _) | (_, Err(e)) => return verdict(false, e),
    };
    let report = String::from_utf8_lossy(&ra[2]);
    let rows = report.lines().count() - 1;
    let identical = ra == rb;
    verdict(
        identical && rows == 3,
        format!("map, fixes, report and cdf identical across two runs: {identical}; report rows {rows} (expect 3)"),
    )
}
