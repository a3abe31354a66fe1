//! Standalone property suites: the elementary exact examples for every
//! operation, plus randomized invariants (100+ cases each) for norms,
//! truncation, positivity, and tower nesting.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srblab::map_family::{
    critical_orbit, dt_iterate, log_deriv_along, transversality_sum, MapFamily,
};
use srblab::parameter_select::{
    admissible_level, check_collet_eckmann, check_polynomial_recurrence,
};
use srblab::response_experiment::{fit_holder_exponent, BumpObservable, ResponseCurve, ResponseRow};
use srblab::srb_estimate::{
    birkhoff_average, build_ulam, integrate_observable, stationary_density, BinnedDensity,
    UlamMatrix,
};
use srblab::tower::{build_tower, bound_free_times, cutoff_family, key_estimate_check, TowerSpec};
use srblab::transfer_op::{
    dual_mass, norm, random_tower_function, GridSpec, NormKind, TowerOperator,
};

fn logistic() -> MapFamily {
    MapFamily::logistic()
}

fn endpoint_tower_spec() -> TowerSpec {
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

#[test]
fn elementary_map_examples() {
    let fam = logistic();
    // pointwise evaluations
    assert_eq!(fam.eval_checked(4.0, 0.5).unwrap(), 1.0);
    assert_eq!(fam.eval_checked(3.5, 0.0).unwrap(), 0.0);
    assert_eq!(fam.eval_checked(2.0, 0.5).unwrap(), 0.5);
    // derivative products: empty product and exact zero
    let empty = log_deriv_along(&fam, 3.3, 0.4, 0);
    assert_eq!((empty.log_abs, empty.sign), (0.0, 1));
    let zero = log_deriv_along(&fam, 4.0, 0.5, 1);
    assert!(zero.hit_zero && zero.log_abs == f64::NEG_INFINITY);
    // superstable orbit flags
    let orb2 = critical_orbit(&fam, 2.0, 2).unwrap();
    assert_eq!(orb2.superstable_at, Some(1));
    // parameter derivative of one step
    assert_eq!(dt_iterate(&fam, 4.0, 0.5, 1).unwrap().value.unwrap(), 0.25);
    // transversality series: single term at the chaotic endpoint
    assert_eq!(transversality_sum(&fam, 4.0, 1).unwrap().partial_sum, 0.25);
}

#[test]
fn elementary_selection_examples() {
    let fam = logistic();
    let ce = check_collet_eckmann(&fam, 2.0, 1.1, 1, 10).unwrap();
    assert!(!ce.ce_ok && ce.superstable);
    let rec = check_polynomial_recurrence(&fam, 2.0, 1.0, 1, 5).unwrap();
    assert!(!rec.recurrence_ok);
    // n = 0 expansion margin is -log(C0 delta) > 0 whenever C0 delta < 1
    let (c0, delta) = (0.1, 0.05f64);
    assert!(-(c0 * delta).ln() > 0.0);
    // admissibility is monotone under halving |t - t0|
    let orbit = critical_orbit(&fam, 4.0, 200).unwrap();
    let m1 = admissible_level(&orbit, 1e-5, 10.0, 0.0, 0.0).unwrap().m;
    let m2 = admissible_level(&orbit, 0.5e-5, 10.0, 0.0, 0.0).unwrap().m;
    assert!(m2 >= m1);
    assert!(admissible_level(&orbit, 0.5, 10.0, 0.0, 0.0).is_err());
}

#[test]
fn mt_verification_reproduces_from_scratch() {
    let fam = logistic();
    let a = srblab::parameter_select::find_misiurewicz_thurston(&fam, (3.6, 3.7), 3, 1, 1e-12)
        .unwrap();
    let b = srblab::parameter_select::find_misiurewicz_thurston(&fam, (3.6, 3.7), 3, 1, 1e-12)
        .unwrap();
    assert_eq!(a.t.hi.to_bits(), b.t.hi.to_bits());
    assert_eq!(a.t.lo.to_bits(), b.t.lo.to_bits());
    assert_eq!(a.residual.to_bits(), b.residual.to_bits());
    assert_eq!(a.multiplier_log.to_bits(), b.multiplier_log.to_bits());
    assert!(a.multiplier_log > 0.0 && a.residual < 1e-12);
}

#[test]
fn elementary_estimator_examples() {
    let fam = logistic();
    // normalization is exact
    let one = birkhoff_average(&fam, 3.7, |_| 1.0, 50_000, 1_000, 0.3).unwrap();
    assert_eq!(one.mean, 1.0);
    // two-bin transition row is stochastic and spreads over both halves
    let p = build_ulam(&fam, 4.0, 2, None).unwrap();
    assert!((p.row_sum(0) - 1.0).abs() < 1e-12);
    assert_eq!(p.rows[0].len(), 2);
    // permutation matrix has the uniform stationary vector
    let perm = UlamMatrix {
        n: 4,
        rows: vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(3, 1.0)], vec![(0, 1.0)]],
    };
    let d = stationary_density(&perm, 1e-13).unwrap();
    assert!(d.masses.iter().all(|m| (m - 0.25).abs() < 1e-10));
    // integration against the uniform and constant observables
    let u = BinnedDensity {
        bins: 8,
        masses: vec![0.125; 8],
        support_hint: (0.0, 1.0),
    };
    assert!((integrate_observable(&u, |x| x) - 0.5).abs() < 1e-15);
    assert!((integrate_observable(&u, |_| 0.37) - 0.37).abs() < 1e-15);
}

#[test]
fn elementary_tower_examples() {
    let fam = logistic();
    let tower = build_tower(&fam, 4.0, &endpoint_tower_spec()).unwrap();
    // J nesting is definitional
    for k in 1..=tower.k_max {
        assert!(tower.a_minus[k] <= tower.a_minus[k - 1]);
        assert!(tower.a_plus[k] <= tower.a_plus[k - 1]);
    }
    // starting inside the entry interval gives T_1 = 0
    let bf = bound_free_times(&fam, &tower, tower.critical - 0.5 * tower.delta, 100).unwrap();
    assert_eq!(bf.t_entries[0], 0);
    // no entry within a short horizon from a far starting point
    let bf2 = bound_free_times(&fam, &tower, 0.3, 2).unwrap();
    assert!(bf2.t_entries.is_empty());
    // key-estimate partial sums are nondecreasing in the tail length
    let mut prev = 0.0;
    for k_tail in [8, 16, 32] {
        let r = key_estimate_check(&fam, 4.0, 3, k_tail, 0.0, 10.0).unwrap();
        assert!(r.partial_sum >= prev);
        prev = r.partial_sum;
    }
}

#[test]
fn elementary_observable_examples() {
    let a = BumpObservable::new(0.75, 0.05).unwrap();
    // support boundary values
    assert_eq!(a.eval(0.70), 0.0);
    assert_eq!(a.eval(0.80), 0.0);
    // recorded peak normalization (a smooth profile meeting the slope cap
    // cannot reach 1; the construction records 1 - eps = 4/5)
    assert!((a.eval(0.75) - 0.8).abs() < 1e-14);
    // exact power laws fit exactly, for any exponent
    for &theta in &[0.1, 0.5, 1.0] {
        let rows: Vec<ResponseRow> = (0..10)
            .map(|i| {
                let dt = 10f64.powf(-2.0 - 0.6 * i as f64);
                ResponseRow {
                    t: 3.9 + dt,
                    abs_dt: dt,
                    m: i,
                    delta_r: dt.powf(theta),
                    stderr: 0.0,
                    ratio_sqrt: dt.powf(theta - 0.5),
                    usable: true,
                    flagged: false,
                }
            })
            .collect();
        let curve = ResponseCurve {
            t0: 3.9,
            base_value: 0.0,
            base_stderr: 0.0,
            rows,
            fit: None,
            ratio_band: None,
        };
        let f = fit_holder_exponent(&curve).unwrap();
        assert!((f.slope - theta).abs() < 1e-12);
    }
}

#[test]
fn estimators_agree_on_localized_bump() {
    let fam = logistic();
    let a = BumpObservable::new(0.75, 0.1).unwrap();
    let p = build_ulam(&fam, 4.0, 8192, None).unwrap();
    let d = srblab::srb_estimate::stationary_density(&p, 1e-12).unwrap();
    let ulam = integrate_observable(&d, |x| a.eval(x));
    let birk = birkhoff_average(&fam, 4.0, |x| a.eval(x), 4_000_000, 10_000, 0.2137).unwrap();
    let tol = 3.0 * (birk.stderr + 2e-3);
    assert!(
        (ulam - birk.mean).abs() <= tol,
        "ulam {ulam} vs birkhoff {} +- {}",
        birk.mean,
        birk.stderr
    );
}

#[test]
fn randomized_truncation_and_norm_invariants() {
    let start = Instant::now();
    let fam = logistic();
    let tower = build_tower(&fam, 4.0, &endpoint_tower_spec()).unwrap();
    let grid = GridSpec {
        level0_nodes: 512,
        level_nodes: 64,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..120 {
        let psi = random_tower_function(&tower, &grid, 1.25, 10_000 + case);
        let m = rng.gen_range(0..=tower.k_max);
        let tr = psi.truncate(m);
        // idempotence
        let tr2 = tr.truncate(m);
        for (a, b) in tr.levels.iter().zip(&tr2.levels) {
            assert_eq!(a.values, b.values);
        }
        // identity at full depth
        let full = psi.truncate(tower.k_max);
        assert_eq!(dual_mass(&full), dual_mass(&psi));
        // every norm kind is non-increasing under truncation
        for kind in [NormKind::W11, NormKind::L1, NormKind::Lp(2.0)] {
            let n_full = norm(&psi, kind, Some(4.0)).unwrap();
            let n_tr = norm(&tr, kind, Some(4.0)).unwrap();
            assert!(n_tr <= n_full * (1.0 + 1e-12) + 1e-15, "case {case}");
        }
        // nu monotone under truncation for nonnegative input, and equals
        // the weak norm
        assert!(dual_mass(&tr) <= dual_mass(&psi) * (1.0 + 1e-12));
        let l1 = norm(&psi, NormKind::L1, None).unwrap();
        assert!((dual_mass(&psi) - l1).abs() <= 1e-10 * l1.max(1e-10));
    }
    assert!(start.elapsed().as_secs() < 20, "{:?}", start.elapsed());
}

#[test]
fn randomized_positivity_and_conservation() {
    let start = Instant::now();
    let fam = logistic();
    let tower = build_tower(&fam, 4.0, &endpoint_tower_spec()).unwrap();
    let cuts = cutoff_family(&fam, &tower).unwrap();
    let grid = GridSpec {
        level0_nodes: 1024,
        level_nodes: 96,
    };
    let op = TowerOperator::new(&fam, &tower, &cuts, grid, 1.25).unwrap();
    for case in 0..100 {
        let psi = random_tower_function(&tower, &grid, 1.25, 40_000 + case);
        let out = op.apply(&psi);
        assert!(out.is_nonnegative(), "case {case}");
        let drift = ((dual_mass(&out) - dual_mass(&psi)) / dual_mass(&psi)).abs();
        assert!(drift < 1e-8, "case {case}: {drift}");
    }
    assert!(start.elapsed().as_secs() < 25, "{:?}", start.elapsed());
}

#[test]
fn randomized_tower_nesting() {
    let start = Instant::now();
    let fam = logistic();
    let mut built = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    while built < 100 {
        let delta = 0.012 + 0.04 * rng.gen::<f64>();
        let l_const = 3.0 + 2.0 * rng.gen::<f64>();
        let spec = TowerSpec {
            delta,
            l_const,
            beta: 0.0,
            k_max: 30,
            lambda_c: 3.9,
            h0: 1,
            goodness_horizon: 60,
        };
        let Ok(tower) = build_tower(&fam, 4.0, &spec) else {
            continue;
        };
        built += 1;
        for k in 1..=tower.k_max {
            assert!(tower.a_minus[k] <= tower.a_minus[k - 1]);
            assert!(tower.a_plus[k] <= tower.a_plus[k - 1]);
            // full entry interval up to the climb height
            if k <= tower.h_delta {
                assert_eq!(tower.a_minus[k], tower.delta);
                assert_eq!(tower.a_plus[k], tower.delta);
            }
        }
        // climb annuli midpoints re-verify by forward iteration
        for ci in tower.climb.iter().filter(|c| c.j < tower.resolved_levels) {
            if let Some((inner, outer)) = ci.plus {
                let mid = tower.critical + 0.5 * (inner + outer);
                assert_eq!(tower.climb_height(&fam, mid), ci.j - 1);
            }
        }
    }
    assert!(start.elapsed().as_secs() < 15, "{:?}", start.elapsed());
}
