//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured quantities at its stated tolerance.
//!
//! Criteria 9 and 10 carry sub-gates that are measured honestly and fail for
//! structural reasons established during development (see the repository
//! README for a summary): the stated response-scaling window mixes the
//! transitional and asymptotic regimes at the required observable width, and
//! the eigen-shift bracket of the decomposition slightly exceeds the spike
//! bracket at every tested depth. Both tests print complete measurement
//! tables, assert the attainable sub-gates, and fail on the unattainable
//! ones rather than loosening them.

use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use srblab::map_family::{transversality_sum, MapFamily};
use srblab::numeric::linear_fit;
use srblab::parameter_select::{
    check_collet_eckmann, find_misiurewicz_thurston, mt_sequence, shadow_periodic_deviation,
    MtParameter, MtSequenceConfig, MtSequenceEntry,
};
use srblab::response_experiment::{
    decomposition_report, fit_holder_exponent, response_curve, spike_displacement,
    BumpObservable, ResponseConfig,
};
use srblab::srb_estimate::{
    birkhoff_average, build_ulam, integrate_observable, lyapunov, stationary_density_from,
    support_hint,
};
use srblab::tower::{build_tower, cutoff_family, shared_tower, verify_distortion, TowerSpec};
use srblab::transfer_op::{
    dual_mass, leading_eigenpair, norm, random_tower_function, Eigenpair, EigenConfig, GridSpec,
    NormKind, TowerOperator,
};

const LAMBDA: f64 = 1.25;

fn logistic() -> MapFamily {
    MapFamily::logistic()
}

fn banner(criterion: usize, ok: bool, detail: &str) {
    println!(
        "criterion {criterion:2}: {} - {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn endpoint_spec() -> TowerSpec {
    TowerSpec {
        delta: 0.05,
        l_const: 4.0,
        beta: 0.0,
        k_max: 40,
        lambda_c: 3.9,
        h0: 1,
        goodness_horizon: 60,
    }
}

fn mixing_spec(k_max: usize) -> TowerSpec {
    TowerSpec {
        delta: 0.05,
        l_const: 4.0,
        beta: 0.0,
        k_max,
        lambda_c: 1.6,
        h0: 1,
        goodness_horizon: 60,
    }
}

/// Period-2 renormalisability: `[1-p, p]` (p the orientation-reversing fixed
/// point) maps off itself in one step and into itself in two.
fn period_two_renormalisable(family: &MapFamily, t: f64) -> bool {
    let mut p = 0.72;
    for _ in 0..60 {
        let g = family.eval(t, p) - p;
        let d = family.dx(t, p) - 1.0;
        if d == 0.0 {
            return false;
        }
        p -= g / d;
    }
    let c = family.critical;
    let (lo, hi) = ((1.0 - p).min(p), p.max(1.0 - p));
    if !(lo < c && c < hi) {
        return false;
    }
    let tol = 1e-9;
    // one step leaves the interval (except the fixed boundary point)
    let n = 400;
    let mut one_step_out = true;
    let mut two_steps_in = true;
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let y = family.eval(t, x);
        if y > lo + tol && y < hi - tol && (y - p).abs() > 1e-6 {
            one_step_out = false;
        }
        let z = family.eval(t, y);
        if z < lo - tol || z > hi + tol {
            two_steps_in = false;
        }
    }
    one_step_out && two_steps_in
}

fn stated_anchor() -> &'static MtParameter {
    static CELL: OnceLock<MtParameter> = OnceLock::new();
    CELL.get_or_init(|| {
        find_misiurewicz_thurston(&logistic(), (3.6, 3.7), 3, 1, 1e-12)
            .expect("stated anchor")
    })
}

fn mixing_anchor() -> &'static MtParameter {
    static CELL: OnceLock<MtParameter> = OnceLock::new();
    CELL.get_or_init(|| {
        find_misiurewicz_thurston(&logistic(), (3.9, 3.95), 4, 1, 1e-12)
            .expect("mixing anchor")
    })
}

/// The headline sequence at the mixing anchor, restricted to the criterion
/// window.
fn headline_sequence() -> &'static Vec<MtSequenceEntry> {
    static CELL: OnceLock<Vec<MtSequenceEntry>> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = MtSequenceConfig {
            roots_per_preperiod: 2,
            max_preperiod: 34,
            ..Default::default()
        };
        let (mut entries, _) =
            mt_sequence(&logistic(), mixing_anchor(), 40, &cfg).expect("sequence");
        entries.retain(|e| e.abs_dt >= 1e-8 && e.abs_dt <= 1e-3);
        entries.sort_by(|a, b| a.abs_dt.partial_cmp(&b.abs_dt).unwrap());
        entries
    })
}

/// Eigenpairs of the mixing-anchor tower, cached by truncation level.
fn anchor_eigenpair(op: &TowerOperator, m: usize) -> Eigenpair {
    static CELL: OnceLock<Mutex<std::collections::BTreeMap<usize, Eigenpair>>> = OnceLock::new();
    let cache = CELL.get_or_init(|| Mutex::new(Default::default()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(m)
        .or_insert_with(|| leading_eigenpair(op, m, &EigenConfig::default()).expect("eigenpair"))
        .clone_pair()
}

trait ClonePair {
    fn clone_pair(&self) -> Eigenpair;
}
impl ClonePair for Eigenpair {
    fn clone_pair(&self) -> Eigenpair {
        Eigenpair {
            m: self.m,
            kappa: self.kappa,
            phi: self.phi.clone(),
            residual: self.residual,
            tau_m: self.tau_m,
            iterations: self.iterations,
        }
    }
}

#[test]
fn criterion_01_endpoint_ground_truth() {
    let start = Instant::now();
    let fam = logistic();
    let birk = birkhoff_average(&fam, 4.0, |x| x, 10_000_000, 10_000, 0.2137).unwrap();
    let p = build_ulam(&fam, 4.0, 1 << 14, None).unwrap();
    let density = stationary_density_from(&p, 1e-12, Some(support_hint(&fam, 4.0))).unwrap();
    let ulam = integrate_observable(&density, |x| x);
    let lyap = lyapunov(&fam, 4.0, 4_000_000, 10_000, 0.2137).unwrap();
    let elapsed = start.elapsed();
    let ok = (birk.mean - 0.5).abs() < 0.005
        && (ulam - 0.5).abs() < 0.005
        && (lyap.value - std::f64::consts::LN_2).abs() < 0.01
        && elapsed.as_secs_f64() < 30.0;
    banner(
        1,
        ok,
        &format!(
            "int x dmu: birkhoff {:.5}, ulam {:.5}; lyapunov {:.5} (ln 2 = {:.5}); {:.1?}",
            birk.mean,
            ulam,
            lyap.value,
            std::f64::consts::LN_2,
            elapsed
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_02_ce_exactness_at_endpoint() {
    let report = check_collet_eckmann(&logistic(), 4.0, 4.0, 1, 50).unwrap();
    let ok = report.ce_ok && report.worst_ce_margin.abs() < 1e-12;
    banner(
        2,
        ok,
        &format!("worst margin {} at k={:?}", report.worst_ce_margin, report.worst_ce_k),
    );
    assert!(ok);
}

#[test]
fn criterion_03_mt_finder() {
    let fam = logistic();
    let start = Instant::now();
    let mt = find_misiurewicz_thurston(&fam, (3.6, 3.7), 3, 1, 1e-12).unwrap();
    let elapsed = start.elapsed();
    let t = mt.t_f64();
    let p = mt.periodic_point.to_f64();
    // independent oracle: plain bisection on the same gap
    let oracle = srblab::numeric::bisect_root(
        |s| fam.iterate(s, 0.5, 3) - (1.0 - 1.0 / s),
        3.6,
        3.7,
        1e-15,
        300,
    )
    .unwrap();
    let shadow = shadow_periodic_deviation(&fam, t, p, 1, 200);
    let ok = mt.residual < 1e-12
        && (2.0 - t).abs() > 1.0
        && (t - oracle).abs() < 1e-10
        && shadow < 1e-12
        && elapsed.as_secs_f64() < 1.0;
    banner(
        3,
        ok,
        &format!(
            "t = {t:.15}, residual {:.2e}, |2 - t| = {:.4}, 200-step shadow deviation {:.2e}, {:.1?}",
            mt.residual,
            (2.0 - t).abs(),
            shadow,
            elapsed
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_04_operator_conservation() {
    let fam = logistic();
    let tower = build_tower(&fam, 4.0, &endpoint_spec()).unwrap();
    let cuts = cutoff_family(&fam, &tower).unwrap();
    let op = TowerOperator::new(&fam, &tower, &cuts, GridSpec::default(), LAMBDA).unwrap();
    let mut worst_drift = 0.0f64;
    for seed in 0..20 {
        let psi = random_tower_function(&tower, &op.grid, LAMBDA, 7_000 + seed);
        let drift = ((dual_mass(&op.apply(&psi)) - dual_mass(&psi)) / dual_mass(&psi)).abs();
        worst_drift = worst_drift.max(drift);
    }
    let mut psi = random_tower_function(&tower, &op.grid, LAMBDA, 4242);
    let start_norm = norm(&psi, NormKind::L1, None).unwrap();
    let mut worst_expansion = 0.0f64;
    for _ in 0..20 {
        psi = op.apply(&psi);
        let now = norm(&psi, NormKind::L1, None).unwrap();
        worst_expansion = worst_expansion.max(now / start_norm);
    }
    let ok = worst_drift < 1e-8 && worst_expansion <= 1.0 + 1e-8;
    banner(
        4,
        ok,
        &format!("worst nu drift {worst_drift:.2e}, worst 20-step weak-norm ratio {worst_expansion:.12}"),
    );
    assert!(ok);
}

#[test]
fn criterion_05_commutation_halves_under_refinement() {
    let fam = logistic();
    let tower = build_tower(&fam, 4.0, &endpoint_spec()).unwrap();
    let cuts = cutoff_family(&fam, &tower).unwrap();
    let mut errors = Vec::new();
    for bins in [1024usize, 2048, 4096, 8192] {
        let grid = GridSpec {
            level0_nodes: bins * 2,
            level_nodes: bins / 8,
        };
        let op = TowerOperator::new(&fam, &tower, &cuts, grid, LAMBDA).unwrap();
        // a fixed smooth tower function with bumps away from the critical
        // point, so both discretizations are in their second-order regime
        let mut psi = op.zeros();
        for (k, l) in psi.levels.iter_mut().enumerate() {
            let span = l.hi - l.lo;
            let (center, width) = if k == 0 {
                (0.31, 0.17)
            } else {
                (l.lo + 0.18 * span, 0.12 * span)
            };
            let n = l.values.len();
            for (i, v) in l.values.iter_mut().enumerate() {
                let x = l.lo + span * i as f64 / (n - 1) as f64;
                let u = 1.0 - ((x - center) / width).abs();
                *v = srblab::numeric::smoothstep7(u.clamp(0.0, 1.0));
            }
        }
        let p = build_ulam(&fam, 4.0, bins, None).unwrap();
        let binned = op.project_binned(&psi, bins);
        let mut lhs = vec![0.0; bins];
        p.apply_left(&binned.masses, &mut lhs);
        let rhs = op.project_binned(&op.apply(&psi), bins).masses;
        let l1: f64 = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).sum();
        errors.push(l1);
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = ratios.iter().all(|r| (0.375..=0.625).contains(r));
    let err_str: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
    banner(
        5,
        ok,
        &format!("commutator L1 errors {err_str:?}, doubling ratios {ratios:.3?}"),
    );
    assert!(ok, "ratios {ratios:?}");
}

#[test]
fn criterion_06_truncated_eigenpairs() {
    let fam = logistic();
    let tower = build_tower(&fam, 4.0, &endpoint_spec()).unwrap();
    let cuts = cutoff_family(&fam, &tower).unwrap();
    let op = TowerOperator::new(&fam, &tower, &cuts, GridSpec::default(), LAMBDA).unwrap();
    let theta0 = (tower.lambda_c.sqrt() / LAMBDA).min(LAMBDA) * 0.96;
    let ms = [10usize, 15, 20, 25, 30];
    let mut kappas = Vec::new();
    for &m in &ms {
        let pair = leading_eigenpair(&op, m, &EigenConfig::default()).unwrap();
        kappas.push(pair.kappa);
    }
    let in_range = kappas
        .iter()
        .all(|&k| k > 1.0 / theta0 && k <= 1.0 + 1e-12);
    let xs: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let ys: Vec<f64> = kappas.iter().map(|&k| (1.0 - k).max(1e-18).ln()).collect();
    let fit = linear_fit(&xs, &ys).unwrap();
    let decay_ok = fit.slope < 0.0 && fit.r2 > 0.9;

    let pair30 = leading_eigenpair(&op, 30, &EigenConfig::default()).unwrap();
    let bins = 1 << 14;
    let projected = op.project_binned(&pair30.phi, bins);
    let p = build_ulam(&fam, 4.0, bins, None).unwrap();
    let ulam = stationary_density_from(&p, 1e-12, Some(support_hint(&fam, 4.0))).unwrap();
    let l1 = projected.l1_distance(&ulam);
    let ok = in_range && decay_ok && l1 < 0.05;
    banner(
        6,
        ok,
        &format!(
            "kappa(M): {kappas:.10?}; |1-kappa| log-fit slope {:.3} r2 {:.3}; |Pi phi_30 - ulam|_1 = {l1:.4}",
            fit.slope, fit.r2
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_key_estimate() {
    let fam = logistic();
    let r5 = srblab::tower::key_estimate_check(&fam, 4.0, 5, 60, 0.0, 10.0).unwrap();
    let exact = (r5.partial_sum + r5.tail_estimate - 1.0 / 3.0).abs() < 1e-12;
    let mut worst = 0.0f64;
    for j in 0..=30 {
        let r = srblab::tower::key_estimate_check(&fam, 4.0, j, 60, 0.0, 10.0).unwrap();
        assert!(!r.diverging, "j={j}");
        worst = worst.max(r.partial_sum + r.tail_estimate);
    }
    let ok = exact && worst.is_finite() && worst <= 10.0;
    banner(
        7,
        ok,
        &format!(
            "sum(j=5) = {:.15} (oracle 1/3), max over j<=30 is {worst:.6} <= C = 10",
            r5.partial_sum + r5.tail_estimate
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_distortion_band() {
    let fam = logistic();
    let tower = build_tower(&fam, 4.0, &endpoint_spec()).unwrap();
    let mut worst = 0.0f64;
    for j in 1..=30 {
        let r = verify_distortion(&fam, &tower, j, 1000, 11).unwrap();
        worst = worst.max(r.max_log_ratio);
    }
    let a = verify_distortion(&fam, &tower, 20, 1000, 11).unwrap();
    let b = verify_distortion(&fam, &tower, 20, 2000, 11).unwrap();
    let stable = (a.max_log_ratio - b.max_log_ratio).abs() <= 0.1 * a.max_log_ratio.max(1e-3);
    let ok = worst < 1.0 && stable;
    banner(
        8,
        ok,
        &format!(
            "max log-distortion over j<=30: {worst:.4}; sample-doubling shift {:.2e}",
            (a.max_log_ratio - b.max_log_ratio).abs()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_holder_scaling() {
    let start = Instant::now();
    let fam = logistic();

    // the criterion anchors t0 to the criterion-3 parameter; that parameter
    // is period-2 renormalisable (two-band merging point), outside the
    // hypotheses of the scaling statement, so the experiment runs at the
    // nearest mixing pre-periodic parameter and both facts are verified here
    let t_star = stated_anchor();
    let j_star = transversality_sum(&fam, t_star.t_f64(), 40).unwrap();
    assert!(j_star.partial_sum != 0.0, "stated anchor transversality");
    assert!(
        period_two_renormalisable(&fam, t_star.t_f64()),
        "the criterion-3 anchor should be detected as renormalisable"
    );
    let t0 = mixing_anchor();
    assert!(!period_two_renormalisable(&fam, t0.t_f64()));
    let j0 = transversality_sum(&fam, t0.t_f64(), 40).unwrap();
    assert!(j0.partial_sum != 0.0);
    println!(
        "criterion  9: stated anchor {:.12} is renormalisable (deepest renormalisation \
         conjugate to the endpoint map); running at mixing anchor {:.12}",
        t_star.t_f64(),
        t0.t_f64()
    );

    let entries = headline_sequence();
    let spanning = entries.len() >= 10
        && entries.first().unwrap().abs_dt < 3.2e-8
        && entries.last().unwrap().abs_dt > 3.2e-4;
    println!(
        "criterion  9: {} parameters in the window, |dt| in [{:.3e}, {:.3e}]",
        entries.len(),
        entries.first().unwrap().abs_dt,
        entries.last().unwrap().abs_dt
    );
    assert!(spanning, "sequence must span the window");

    // stated configuration: the localized bump of width 0.05 at the
    // periodic point, 1e8 orbit iterates per row
    let bump = BumpObservable::new(t0.periodic_point.to_f64(), 0.05).unwrap();
    let rcfg = ResponseConfig {
        n_iters: 100_000_000,
        ..Default::default()
    };
    let curve = response_curve(&fam, t0, entries, &|x: f64| bump.eval(x), &rcfg).unwrap();
    for r in &curve.rows {
        println!(
            "criterion  9:   |dt|={:.3e} M={:2} dR={:+.4e} se={:.1e} ratio={:.4} {}",
            r.abs_dt,
            r.m,
            r.delta_r,
            r.stderr,
            r.ratio_sqrt,
            if r.usable { "usable" } else { "noise" }
        );
    }
    let fit = fit_holder_exponent(&curve);
    let band = curve.ratio_band;
    let elapsed = start.elapsed();

    // deterministic cross-check of the asymptotic regime: operator-route
    // totals over the deepest rows show the square-root band the statement
    // is about (see the README for the full analysis)
    let deep_entries: Vec<MtSequenceEntry> = entries
        .iter()
        .filter(|e| e.abs_dt <= 3e-5)
        .cloned()
        .collect();
    let deep = deep_operator_totals(&fam, t0, &deep_entries);
    let deep_pts: Vec<(f64, f64)> = deep
        .iter()
        .map(|&(dt, total)| (dt.ln(), total.abs().ln()))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = deep_pts.iter().copied().unzip();
    let deep_fit = linear_fit(&xs, &ys).unwrap();
    let deep_ratios: Vec<f64> = deep
        .iter()
        .map(|&(dt, total)| total.abs() / dt.sqrt())
        .collect();
    let deep_band = deep_ratios.iter().cloned().fold(f64::INFINITY, f64::min)
        ..=deep_ratios.iter().cloned().fold(0.0f64, f64::max);
    // estimator cross-validation: where a Birkhoff row is above its noise
    // floor, the operator-route total must agree within tolerance
    for (dt, total) in &deep {
        if let Some(row) = curve
            .rows
            .iter()
            .find(|r| r.usable && (r.abs_dt - dt).abs() < 1e-12 * dt)
        {
            let tol = 5.0 * row.stderr + 0.02 * total.abs();
            assert!(
                (row.delta_r - total).abs() <= tol,
                "operator total {total:+.3e} vs birkhoff {:+.3e} at |dt|={dt:.3e}",
                row.delta_r
            );
            println!(
                "criterion  9: cross-check at |dt|={dt:.3e}: operator {total:+.3e} vs birkhoff {:+.3e}",
                row.delta_r
            );
        }
    }
    println!(
        "criterion  9: asymptotic regime (operator route, |dt| <= 3e-5): slope {:.4}, r2 {:.4}, \
         ratio band [{:.4}, {:.4}] (factor {:.2})",
        deep_fit.slope,
        deep_fit.r2,
        deep_band.start(),
        deep_band.end(),
        deep_band.end() / deep_band.start()
    );
    assert!(
        (0.35..=0.65).contains(&deep_fit.slope)
            && deep_fit.r2 > 0.9
            && deep_band.end() / deep_band.start() <= 20.0,
        "asymptotic square-root band must hold on the deep window"
    );

    let (slope_ok, r2_ok, slope, r2) = match &fit {
        Ok(f) => ((0.35..=0.65).contains(&f.slope), f.r2 > 0.9, f.slope, f.r2),
        Err(_) => (false, false, f64::NAN, f64::NAN),
    };
    let band_ok = band.map(|(lo, hi)| hi / lo <= 20.0).unwrap_or(false);
    let runtime_ok = elapsed.as_secs_f64() < 600.0;
    let ok = slope_ok && r2_ok && band_ok && runtime_ok;
    banner(
        9,
        ok,
        &format!(
            "stated config: slope {slope:.4} (window [0.35, 0.65]), r2 {r2:.4}, band {:?}, {:.1?}; \
             the full-window fit straddles the transitional regime at D = 0.05 \
             (see decisions ledger / README)",
            band, elapsed
        ),
    );
    assert!(
        ok,
        "criterion 9 as stated fails on the slope/r2 gates: measured slope {slope:.4}, \
         r2 {r2:.4}, band {band:?}; the asymptotic sub-window check above passes, \
         demonstrating the square-root mechanism; see the decisions ledger"
    );
}

/// `integral A d(mu_t - mu_t0)` per row by the operator route: towers share
/// the base skeleton and the eigenfunctions at full depth give the totals
/// without statistical noise.
fn deep_operator_totals(
    fam: &MapFamily,
    t0: &MtParameter,
    entries: &[MtSequenceEntry],
) -> Vec<(f64, f64)> {
    let spec = mixing_spec(48);
    let tower0 = build_tower(fam, t0.t_f64(), &spec).unwrap();
    let cuts = cutoff_family(fam, &tower0).unwrap();
    let grid = GridSpec {
        level0_nodes: 1 << 13,
        level_nodes: 384,
    };
    let op0 = TowerOperator::new(fam, &tower0, &cuts, grid, LAMBDA).unwrap();
    let bump = BumpObservable::new(t0.periodic_point.to_f64(), 0.05).unwrap();
    let phi0 = anchor_eigenpair(&op0, tower0.k_max);
    let base = op0.pair_observable(&phi0.phi, |x| bump.eval(x));
    entries
        .iter()
        .map(|e| {
            let tw = shared_tower(&tower0, fam, e.param.t_f64(), tower0.k_max).unwrap();
            let op_t = TowerOperator::new(fam, &tw, &cuts, grid, LAMBDA).unwrap();
            let phit = leading_eigenpair(&op_t, tw.k_max, &EigenConfig::default()).unwrap();
            let val = op_t.pair_observable(&phit.phi, |x| bump.eval(x));
            (e.abs_dt, val - base)
        })
        .collect()
}

#[test]
fn criterion_10_spike_band_and_dominance() {
    let fam = logistic();
    let t0 = mixing_anchor();
    let entries = headline_sequence();
    let spec = mixing_spec(48);
    let tower0 = build_tower(&fam, t0.t_f64(), &spec).unwrap();
    let cuts = cutoff_family(&fam, &tower0).unwrap();
    let grid = GridSpec {
        level0_nodes: 1 << 13,
        level_nodes: 384,
    };
    let op0 = TowerOperator::new(&fam, &tower0, &cuts, grid, LAMBDA).unwrap();
    let bump = BumpObservable::new(t0.periodic_point.to_f64(), 0.05).unwrap();

    // spike displacement along the sequence, eigenpair at 2M per row
    let mut ratios = Vec::new();
    for e in entries.iter() {
        let m2 = (2 * e.admissible.m).min(tower0.k_max);
        let pair = anchor_eigenpair(&op0, m2);
        let rep = spike_displacement(
            &fam,
            &tower0,
            e.param.t_f64(),
            &e.admissible,
            &pair.phi,
            &|x| bump.eval(x),
        )
        .unwrap();
        // sign coherence of the dominant level: a strictly or essentially
        // single-signed integrand (a level whose image straddles the
        // observable's peak carries a small mixed rim, but no substantial
        // cancellation)
        let dominant = rep
            .per_level
            .iter()
            .max_by(|a, b| a.value.abs().partial_cmp(&b.value.abs()).unwrap())
            .unwrap();
        let coherence = dominant.value.abs() / dominant.abs_value.max(1e-300);
        assert!(
            dominant.sign_coherent || coherence > 0.9,
            "dominant spike level k={} cancels internally at |dt|={:.3e} (coherence {:.3})",
            dominant.k,
            e.abs_dt,
            coherence
        );
        println!(
            "criterion 10:   |dt|={:.3e} 2M={m2} spike={:+.4e} ratio={:.4} (dominant level {}, coherence {:.3})",
            e.abs_dt,
            rep.value,
            rep.value.abs() / e.abs_dt.sqrt(),
            dominant.k,
            coherence
        );
        ratios.push(rep.value.abs() / e.abs_dt.sqrt());
    }
    let (rmin, rmax) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let fitted_c = (rmax / rmin).sqrt();
    let band_ok = rmax / rmin <= 20.0;
    println!(
        "criterion 10: spike band [{rmin:.4}, {rmax:.4}] x sqrt|dt|, fitted C = {fitted_c:.3}"
    );
    assert!(band_ok, "spike band factor {:.2}", rmax / rmin);

    // decomposition at the three smallest rows: the criterion asks the
    // spike bracket to exceed the other two
    let mut dominance_ok = true;
    for e in entries.iter().take(3) {
        let m2 = (2 * e.admissible.m).min(tower0.k_max);
        let tw = shared_tower(&tower0, &fam, e.param.t_f64(), tower0.k_max).unwrap();
        let op_t = TowerOperator::new(&fam, &tw, &cuts, grid, LAMBDA).unwrap();
        let ecfg = EigenConfig::default();
        let phi0_full = anchor_eigenpair(&op0, tower0.k_max);
        let phi0_2m = anchor_eigenpair(&op0, m2);
        let phit_full = leading_eigenpair(&op_t, tw.k_max, &ecfg).unwrap();
        let phit_2m = leading_eigenpair(&op_t, m2, &ecfg).unwrap();
        let rep = decomposition_report(
            &op0,
            &op_t,
            &phi0_full.phi,
            &phit_full.phi,
            &phi0_2m.phi,
            &phit_2m.phi,
            &|x| bump.eval(x),
        );
        println!(
            "criterion 10:   |dt|={:.3e}: trunc {:+.3e}, shift {:+.3e}, spike {:+.3e}, \
             telescoping residual {:.1e}",
            e.abs_dt,
            rep.truncation_term,
            rep.eigen_shift_term,
            rep.spike_term,
            rep.telescoping_residual
        );
        assert!(
            rep.telescoping_residual < 1e-8 * rep.spike_term.abs().max(1e-12),
            "telescoping identity"
        );
        if !rep.spike_dominates {
            dominance_ok = false;
        }
    }
    banner(
        10,
        band_ok && dominance_ok,
        &format!(
            "spike band factor {:.2} (<= 20); third-bracket dominance at the 3 smallest rows: {}",
            rmax / rmin,
            dominance_ok
        ),
    );
    assert!(
        dominance_ok,
        "the eigen-shift bracket exceeds the spike bracket at every tested depth \
         (measured ~ +0.38 sqrt|dt| vs ~ -0.33 sqrt|dt|); see the decisions ledger"
    );
}

#[test]
fn criterion_11_property_suites() {
    // the randomized suites live in the standalone `properties` test target;
    // this criterion re-runs the core invariants with a timer
    let start = Instant::now();
    let fam = logistic();
    let tower = build_tower(&fam, 4.0, &endpoint_spec()).unwrap();
    let cuts = cutoff_family(&fam, &tower).unwrap();
    let grid = GridSpec {
        level0_nodes: 1024,
        level_nodes: 96,
    };
    let op = TowerOperator::new(&fam, &tower, &cuts, grid, LAMBDA).unwrap();
    for seed in 0..100 {
        let psi = random_tower_function(&tower, &grid, LAMBDA, 60_000 + seed);
        let m = (seed as usize * 7) % tower.k_max;
        let tr = psi.truncate(m);
        let tr2 = tr.truncate(m);
        for (a, b) in tr.levels.iter().zip(&tr2.levels) {
            assert_eq!(a.values, b.values);
        }
        for kind in [NormKind::W11, NormKind::L1] {
            assert!(
                norm(&tr, kind, None).unwrap() <= norm(&psi, kind, None).unwrap() * (1.0 + 1e-12)
            );
        }
        let out = op.apply(&psi);
        assert!(out.is_nonnegative());
        for k in 1..=tower.k_max {
            assert!(tower.a_minus[k] <= tower.a_minus[k - 1]);
        }
    }
    let elapsed = start.elapsed();
    let ok = elapsed.as_secs_f64() < 60.0;
    banner(
        11,
        ok,
        &format!("100 randomized invariant cases in {elapsed:.1?} (full suites: `cargo test --test properties`)"),
    );
    assert!(ok);
}
