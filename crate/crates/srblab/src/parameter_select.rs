//! Finite-horizon goodness verification and constructive parameter finding:
//! Collet-Eckmann and polynomial-recurrence checks, sampled expansion
//! conditions, pre-periodic (Misiurewicz-Thurston) parameters located by
//! bracketed root finding on orbit gaps, admissible truncation levels, and
//! one-sided MT sequences accumulating at a base parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SrbError};
use crate::map_family::{critical_orbit, transversality_sum, CriticalOrbit, MapFamily};
use crate::numeric::{bisect_root, Dd};

/// Finite-horizon report for the expansion and recurrence conditions along
/// the critical orbit.
///
/// Margins are in log space: `ce` is `min_k log|(f^k)'(c_1)| - k log
/// lambda_c`, `rec` is `min_k log|c_k - c| + alpha log k`, both over
/// `H0 <= k <= N`. For `alpha = 0` the recurrence margin holds
/// `log(min distance)` and the flag means the distance stayed positive; the
/// distance itself is in `min_critical_distance`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GoodnessReport {
    pub t: f64,
    pub lambda_c: f64,
    pub h0: usize,
    pub alpha: f64,
    pub horizon: usize,
    pub ce_ok: bool,
    pub recurrence_ok: bool,
    pub worst_ce_margin: f64,
    pub worst_rec_margin: f64,
    pub worst_ce_k: Option<usize>,
    pub worst_rec_k: Option<usize>,
    /// Derivative along the critical orbit vanished exactly.
    pub superstable: bool,
    pub min_critical_distance: f64,
}

/// Collet-Eckmann check: `log|(f^k)'(c_1)| >= k log lambda_c` for all
/// `H0 <= k <= N`. A derivative that vanishes exactly along the orbit is
/// reported as a failure with the superstable flag, not an error.
pub fn check_collet_eckmann(
    family: &MapFamily,
    t: f64,
    lambda_c: f64,
    h0: usize,
    n: usize,
) -> Result<GoodnessReport> {
    if !(lambda_c > 1.0) {
        return Err(SrbError::InvalidArgument("lambda_c must be > 1".into()));
    }
    if h0 < 1 || h0 > n {
        return Err(SrbError::InvalidArgument("need 1 <= H0 <= N".into()));
    }
    let orbit = critical_orbit(family, t, n)?;
    let log_lc = lambda_c.ln();
    let mut worst = f64::INFINITY;
    let mut worst_k = None;
    for k in h0..=n {
        let margin = orbit.log_derivs[k] - k as f64 * log_lc;
        if margin < worst {
            worst = margin;
            worst_k = Some(k);
        }
    }
    let superstable = orbit
        .superstable_at
        .map(|k| k <= n)
        .unwrap_or(false);
    Ok(GoodnessReport {
        t,
        lambda_c,
        h0,
        alpha: f64::NAN,
        horizon: n,
        ce_ok: !superstable && worst >= 0.0,
        recurrence_ok: true,
        worst_ce_margin: worst,
        worst_rec_margin: f64::INFINITY,
        worst_ce_k: worst_k,
        worst_rec_k: None,
        superstable,
        min_critical_distance: min_distance_to_critical(family, &orbit, 1, n),
    })
}

/// Polynomial recurrence check: `|c_k - c| > k^{-alpha}` for all
/// `H0 <= k <= N`. For `alpha = 0` the report carries the worst distance and
/// the flag asserts it stayed positive.
pub fn check_polynomial_recurrence(
    family: &MapFamily,
    t: f64,
    alpha: f64,
    h0: usize,
    n: usize,
) -> Result<GoodnessReport> {
    if alpha < 0.0 {
        return Err(SrbError::InvalidArgument("alpha must be >= 0".into()));
    }
    if h0 < 1 || h0 > n {
        return Err(SrbError::InvalidArgument("need 1 <= H0 <= N".into()));
    }
    let orbit = critical_orbit(family, t, n)?;
    let c = family.critical;
    let mut worst = f64::INFINITY;
    let mut worst_k = None;
    let mut min_dist = f64::INFINITY;
    for k in h0..=n {
        let dist = (orbit.points[k] - c).abs();
        min_dist = min_dist.min(dist);
        let margin = if alpha > 0.0 {
            dist.ln() + alpha * (k as f64).ln()
        } else {
            dist.ln()
        };
        if margin < worst {
            worst = margin;
            worst_k = Some(k);
        }
    }
    let ok = if alpha > 0.0 { worst >= 0.0 } else { min_dist > 0.0 };
    Ok(GoodnessReport {
        t,
        lambda_c: f64::NAN,
        h0,
        alpha,
        horizon: n,
        ce_ok: true,
        recurrence_ok: ok,
        worst_ce_margin: f64::INFINITY,
        worst_rec_margin: worst,
        worst_ce_k: None,
        worst_rec_k: worst_k,
        superstable: false,
        min_critical_distance: min_dist,
    })
}

fn min_distance_to_critical(
    family: &MapFamily,
    orbit: &CriticalOrbit,
    from: usize,
    to: usize,
) -> f64 {
    let c = family.critical;
    (from..=to.min(orbit.points.len() - 1))
        .map(|k| (orbit.points[k] - c).abs())
        .fold(f64::INFINITY, f64::min)
}

/// One sampled orbit segment staying outside the `delta`-neighborhood of the
/// critical point.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ExpansionSample {
    pub x0: f64,
    /// First entry time into the neighborhood (the maximal outside prefix).
    pub n: usize,
    /// `min over 1 <= m <= n of log|(f^m)'(x)| - log(C0 delta) - m log rho`.
    pub outside_margin: f64,
    /// Margin against `C0 rho^n` at the re-entry step, when it happened.
    pub return_margin: Option<f64>,
}

/// Sampled (statistical, not exhaustive) verification of the two expansion
/// conditions for orbit segments avoiding `[c - delta, c + delta]`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExpansionReport {
    pub t: f64,
    pub rho: f64,
    pub c0: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Always true: the report is based on random samples.
    pub sampled: bool,
    pub min_outside_margin: f64,
    pub min_return_margin: f64,
    pub samples: Vec<ExpansionSample>,
}

pub fn check_expansion_conditions(
    family: &MapFamily,
    t: f64,
    rho: f64,
    c0: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<ExpansionReport> {
    if !(rho > 1.0) || !(delta > 0.0) || !(c0 > 0.0) {
        return Err(SrbError::InvalidArgument(
            "need rho > 1, C0 > 0, delta > 0".into(),
        ));
    }
    family.check_param(t)?;
    let c = family.critical;
    let log_rho = rho.ln();
    let cap = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<f64> = (0..trials)
        .map(|_| loop {
            let x: f64 = rng.gen();
            if (x - c).abs() >= delta && x > 0.0 && x < 1.0 {
                break x;
            }
        })
        .collect();
    let samples: Vec<ExpansionSample> = starts
        .par_iter()
        .map(|&x0| {
            let mut x = x0;
            let mut log_d = 0.0f64;
            let mut outside_margin = f64::INFINITY;
            let mut return_margin = None;
            let mut n = 0usize;
            for m in 1..=cap {
                log_d += family.dx(t, x).abs().ln();
                x = family.eval(t, x);
                n = m;
                if (x - c).abs() < delta {
                    return_margin = Some(log_d - c0.ln() - m as f64 * log_rho);
                    break;
                }
                outside_margin =
                    outside_margin.min(log_d - (c0 * delta).ln() - m as f64 * log_rho);
            }
            ExpansionSample {
                x0,
                n,
                outside_margin,
                return_margin,
            }
        })
        .collect();
    let min_outside = samples
        .iter()
        .map(|s| s.outside_margin)
        .fold(f64::INFINITY, f64::min);
    let min_return = samples
        .iter()
        .filter_map(|s| s.return_margin)
        .fold(f64::INFINITY, f64::min);
    Ok(ExpansionReport {
        t,
        rho,
        c0,
        delta,
        trials,
        seed,
        sampled: true,
        min_outside_margin: min_outside,
        min_return_margin: min_return,
        samples,
    })
}

/// A verified pre-periodic parameter: the critical point lands on a repelling
/// periodic orbit after `preperiod` steps without being periodic itself.
///
/// The parameter is stored in double-double form: for preperiods beyond a
/// handful of steps the orbit gap has parameter-derivative of order
/// `Lambda^n`, so no f64 parameter can make the residual small.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MtParameter {
    pub t: Dd,
    pub preperiod: usize,
    pub period: usize,
    pub periodic_point: Dd,
    /// `log |(f^{period})'(p)| > 0` (repelling).
    pub multiplier_log: f64,
    /// `|f_t^n(c) - p_t|` at the returned parameter.
    pub residual: f64,
    /// Per-step postcritical expansion `exp(multiplier_log / period)`.
    pub lambda: f64,
    /// `min_{1 <= k <= n + period} |c_k - c|`; positive means the critical
    /// point is not itself periodic.
    pub min_critical_distance: f64,
}

impl MtParameter {
    pub fn t_f64(&self) -> f64 {
        self.t.to_f64()
    }
}

/// Newton refinement of a period-`l0` point of `f_t`, in double-double
/// arithmetic, from an f64-quality seed.
fn refine_periodic_dd(family: &MapFamily, t: Dd, seed: f64, period: usize) -> Option<Dd> {
    let mut p = Dd::from_f64(seed);
    for _ in 0..60 {
        let fp = family.iterate_dd(t, p, period);
        let g = fp - p;
        let dp = family.deriv_iterate(t.to_f64(), p.to_f64(), period) - 1.0;
        if dp == 0.0 {
            return None;
        }
        let step = g / Dd::from_f64(dp);
        p = p - step;
        if step.to_f64().abs() < 1e-28 {
            return Some(p);
        }
    }
    Some(p)
}

/// Signed orbit gap `f_t^n(c) - p_t` in double-double arithmetic, tracking
/// the periodic point from `p_seed`.
fn gap_dd(family: &MapFamily, t: Dd, n: usize, period: usize, p_seed: f64) -> Option<(Dd, Dd)> {
    let p = refine_periodic_dd(family, t, p_seed, period)?;
    let c = Dd::from_f64(family.critical);
    let cn = family.iterate_dd(t, c, n);
    Some((cn - p, p))
}

fn periodic_candidates(family: &MapFamily, t: f64, period: usize) -> Vec<f64> {
    let cells = 4096;
    let mut roots = Vec::new();
    let h = |x: f64| family.iterate(t, x, period) - x;
    let mut prev_x = 0.0;
    let mut prev_v = h(prev_x);
    if prev_v == 0.0 {
        roots.push(0.0);
    }
    for i in 1..=cells {
        let x = i as f64 / cells as f64;
        let v = h(x);
        if v == 0.0 {
            roots.push(x);
        } else if prev_v != 0.0 && v.signum() != prev_v.signum() {
            if let Some(r) = bisect_root(h, prev_x, x, 1e-14, 200) {
                roots.push(r);
            }
        }
        prev_x = x;
        prev_v = v;
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
    roots
}

fn verify_mt(
    family: &MapFamily,
    t: Dd,
    preperiod: usize,
    period: usize,
    p: Dd,
    tol: f64,
) -> Result<MtParameter> {
    let tf = t.to_f64();
    let mult = family.deriv_iterate(tf, p.to_f64(), period);
    let multiplier_log = mult.abs().ln();
    if !(multiplier_log > 0.0) {
        return Err(SrbError::NotRepelling {
            t: tf,
            multiplier_log,
        });
    }
    let c = Dd::from_f64(family.critical);
    let residual = (family.iterate_dd(t, c, preperiod) - p).abs().to_f64();
    if !(residual <= tol) {
        return Err(SrbError::RootFinding(format!(
            "residual {residual} above tolerance {tol} at t={tf}"
        )));
    }
    let orbit = critical_orbit(family, tf, preperiod + period)?;
    let min_dist = min_distance_to_critical(family, &orbit, 1, preperiod + period);
    if !(min_dist > (100.0 * tol).max(1e-9)) {
        return Err(SrbError::CriticalPeriodic {
            t: tf,
            min_dist,
        });
    }
    Ok(MtParameter {
        t,
        preperiod,
        period,
        periodic_point: p,
        multiplier_log,
        residual,
        lambda: (multiplier_log / period as f64).exp(),
        min_critical_distance: min_dist,
    })
}

/// Locate a Misiurewicz-Thurston parameter on a bracket: the gap
/// `g(t) = f_t^n(c) - p_t` must change sign, where `p_t` is a period-`l0`
/// point continued in `t` from an automatically selected seed (the candidate
/// nearest `f_t^n(c)` at the bracket midpoint).
///
/// Bisection in f64 followed by a double-double secant polish. The returned
/// parameter is re-verified: repelling multiplier, residual below `tol`,
/// critical point not itself periodic.
pub fn find_misiurewicz_thurston(
    family: &MapFamily,
    bracket: (f64, f64),
    preperiod: usize,
    period: usize,
    tol: f64,
) -> Result<MtParameter> {
    let (a, b) = bracket;
    family.check_param(a)?;
    family.check_param(b)?;
    if preperiod < 1 || period < 1 {
        return Err(SrbError::InvalidArgument(
            "preperiod and period must be >= 1".into(),
        ));
    }
    let t_mid = 0.5 * (a + b);
    let target = family.iterate(t_mid, family.critical, preperiod);
    let mut candidates = periodic_candidates(family, t_mid, period);
    candidates.sort_by(|p, q| {
        (p - target)
            .abs()
            .partial_cmp(&(q - target).abs())
            .unwrap()
    });
    if candidates.is_empty() {
        return Err(SrbError::RootFinding(format!(
            "no period-{period} point found at t={t_mid}"
        )));
    }

    for p_seed in candidates {
        // track p along the bracket in f64 first
        let mut track = p_seed;
        let mut gap_f64 = |t: f64| -> f64 {
            for _ in 0..50 {
                let g = family.iterate(t, track, period) - track;
                let d = family.deriv_iterate(t, track, period) - 1.0;
                if d == 0.0 {
                    break;
                }
                let step = g / d;
                track -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            family.iterate(t, family.critical, preperiod) - track
        };
        let ga = gap_f64(a);
        let gb = gap_f64(b);
        if ga != 0.0 && gb != 0.0 && ga.signum() == gb.signum() {
            continue;
        }
        let coarse = match bisect_root(&mut gap_f64, a, b, 1e-13, 200) {
            Some(r) => r,
            None => continue,
        };
        // double-double polish
        let p_here = {
            let mut p = p_seed;
            for _ in 0..50 {
                let g = family.iterate(coarse, p, period) - p;
                let d = family.deriv_iterate(coarse, p, period) - 1.0;
                if d == 0.0 {
                    break;
                }
                p -= g / d;
            }
            p
        };
        if let Some((t_dd, p_dd)) = polish_root_dd(
            family,
            Dd::from_f64(coarse),
            preperiod,
            period,
            p_here,
            1e-13,
        ) {
            match verify_mt(family, t_dd, preperiod, period, p_dd, tol) {
                Ok(mt) => return Ok(mt),
                Err(SrbError::NotRepelling { .. }) | Err(SrbError::CriticalPeriodic { .. }) => {
                    continue
                }
                Err(e) => return Err(e),
            }
        }
    }
    Err(SrbError::NoSignChange { a, b })
}

/// Double-double secant iteration on the orbit gap, starting from an
/// f64-accurate root. Returns the refined parameter and periodic point.
fn polish_root_dd(
    family: &MapFamily,
    t0: Dd,
    preperiod: usize,
    period: usize,
    p_seed: f64,
    h0: f64,
) -> Option<(Dd, Dd)> {
    let (g0, mut p) = gap_dd(family, t0, preperiod, period, p_seed)?;
    if g0.to_f64() == 0.0 {
        return Some((t0, p));
    }
    let mut t1 = t0;
    let mut g1 = g0;
    let mut t2 = t0 + Dd::from_f64(h0);
    let (mut g2, _) = gap_dd(family, t2, preperiod, period, p.to_f64())?;
    for _ in 0..80 {
        let denom = g2 - g1;
        if denom.to_f64() == 0.0 {
            break;
        }
        let step = g2 * (t2 - t1) / denom;
        let t3 = t2 - step;
        let (g3, p3) = gap_dd(family, t3, preperiod, period, p.to_f64())?;
        t1 = t2;
        g1 = g2;
        t2 = t3;
        g2 = g3;
        p = p3;
        if g2.to_f64().abs() < 1e-25 || step.to_f64().abs() < 1e-28 {
            break;
        }
    }
    Some((t2, p))
}

/// Iterate the contracting inverse branch along a periodic itinerary;
/// returns the maximum deviation from the claimed orbit over `steps` steps.
///
/// A forward orbit of a repelling point amplifies float noise exponentially,
/// so re-verification runs backward, where the true orbit is an attractor.
pub fn shadow_periodic_deviation(
    family: &MapFamily,
    t: f64,
    p: f64,
    period: usize,
    steps: usize,
) -> f64 {
    let orbit: Vec<f64> = (0..period)
        .scan(p, |x, _| {
            let cur = *x;
            *x = family.eval(t, *x);
            Some(cur)
        })
        .collect();
    let mut max_dev = 0.0f64;
    let mut y = p;
    for k in 0..steps {
        // target: the orbit point whose image is the current y's slot
        let idx = (period - 1) - (k % period);
        let target_prev = orbit[idx];
        let target_cur = y;
        // solve f(y') = y with Newton from the claimed preimage
        let mut yp = target_prev;
        for _ in 0..60 {
            let g = family.eval(t, yp) - target_cur;
            let d = family.dx(t, yp);
            if d == 0.0 {
                break;
            }
            let step = g / d;
            yp -= step;
            if step.abs() < 1e-17 {
                break;
            }
        }
        y = yp;
        max_dev = max_dev.max((y - target_prev).abs());
    }
    max_dev
}

/// A maximal admissible truncation level for a perturbed parameter.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct AdmissiblePair {
    pub t0: f64,
    pub abs_dt: f64,
    pub m: usize,
    pub ca: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `log|(f^M)'(c_1)| + log|dt| + log Ca + (a+b) log M` at `M` (<= 0).
    pub margin_at_m: f64,
    /// Same expression at `M + 1` (> 0, maximality).
    pub margin_above: f64,
}

/// Maximal `M` with
/// `log|(f_{t0}^M)'(c_1)| + log|t - t0| <= -log Ca - (alpha+beta) log M`,
/// by forward scan of the monotone left-hand side.
pub fn admissible_level(
    orbit_t0: &CriticalOrbit,
    abs_dt: f64,
    ca: f64,
    alpha: f64,
    beta: f64,
) -> Result<AdmissiblePair> {
    if !(abs_dt > 0.0) {
        return Err(SrbError::InvalidArgument("need |t - t0| > 0".into()));
    }
    if !(ca > 0.0) {
        return Err(SrbError::InvalidArgument("need Ca > 0".into()));
    }
    let log_dt = abs_dt.ln();
    let margin = |m: usize| -> f64 {
        orbit_t0.log_derivs[m] + log_dt + ca.ln() + (alpha + beta) * (m as f64).ln()
    };
    let max_m = orbit_t0.log_derivs.len() - 2;
    if margin(1) > 0.0 {
        return Err(SrbError::NotAdmissible(format!(
            "margin at M=1 is {} > 0: |t - t0| = {abs_dt} too large for Ca = {ca}",
            margin(1)
        )));
    }
    let mut m = 1usize;
    while m < max_m && margin(m + 1) <= 0.0 {
        m += 1;
    }
    if m == max_m {
        return Err(SrbError::NotAdmissible(format!(
            "no maximal M within orbit horizon {max_m}; |t - t0| = {abs_dt} too small \
             for the computed orbit"
        )));
    }
    Ok(AdmissiblePair {
        t0: orbit_t0.t,
        abs_dt,
        m,
        ca,
        alpha,
        beta,
        margin_at_m: margin(m),
        margin_above: margin(m + 1),
    })
}

/// Convenience wrapper taking the two parameters.
pub fn admissible_level_for(
    family: &MapFamily,
    t0: f64,
    t: f64,
    ca: f64,
    alpha: f64,
    beta: f64,
    horizon: usize,
) -> Result<AdmissiblePair> {
    let orbit = critical_orbit(family, t0, horizon)?;
    admissible_level(&orbit, (t - t0).abs(), ca, alpha, beta)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MtSequenceConfig {
    /// Admissibility constant; the non-explicit constant of the tail
    /// estimate must stay below it, so it is configuration.
    pub ca: f64,
    /// How many nearest new roots of the orbit gap to accept per preperiod.
    pub roots_per_preperiod: usize,
    pub residual_tol: f64,
    /// Horizon for the postcritical multiplier comparability margins.
    pub horizon: usize,
    pub max_preperiod: usize,
    /// +1 (right of t0) or -1; `None` selects the side from the sign of the
    /// transversality sum.
    pub side: Option<i8>,
    /// Prefer landings on non-orbit preimages of the periodic point whose
    /// paths keep O(1) clearance from the critical point (uniform
    /// constants); fall back to critical-pass roots when no such target
    /// exists for the base parameter's combinatorics.
    pub prefer_clear_landing: bool,
}

impl Default for MtSequenceConfig {
    fn default() -> Self {
        Self {
            ca: 10.0,
            roots_per_preperiod: 2,
            residual_tol: 1e-11,
            horizon: 400,
            max_preperiod: 80,
            side: None,
            prefer_clear_landing: true,
        }
    }
}

/// One member of an MT sequence accumulating at the base parameter.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MtSequenceEntry {
    pub param: MtParameter,
    /// `|t - t0|` from the double-double parameters.
    pub abs_dt: f64,
    pub admissible: AdmissiblePair,
    /// `exp(max_k |log|(f_t^{k-1})'(c_1)| - k log Lambda_t|)` up to the
    /// horizon: the single constant of the postcritical comparability.
    pub comparability_c: f64,
    /// `(Lambda_t / Lambda_{t0})^M`.
    pub multiplier_ratio_pow_m: f64,
}

/// Construct `count` Misiurewicz-Thurston parameters accumulating at `t0`
/// from one side, each pre-periodic onto the continuation of the
/// postcritical orbit of `t0` and paired with its maximal admissible level.
///
/// Root-finding failures skip the preperiod with a warning instead of
/// aborting the sequence.
pub fn mt_sequence(
    family: &MapFamily,
    t0: &MtParameter,
    count: usize,
    cfg: &MtSequenceConfig,
) -> Result<(Vec<MtSequenceEntry>, Vec<String>)> {
    let t0f = t0.t_f64();
    family.check_param(t0f)?;
    let j = transversality_sum(family, t0f, 40)?;
    if j.partial_sum == 0.0 {
        return Err(SrbError::Estimator(
            "transversality sum vanishes at t0; family not transversal there".into(),
        ));
    }
    let orbit_t0 = critical_orbit(family, t0f, cfg.max_preperiod + 8)?;
    let targets = if cfg.prefer_clear_landing {
        landing_targets(family, t0)?
    } else {
        Vec::new()
    };
    let side = match cfg.side {
        Some(s) if s != 0 => s as f64,
        // with clear-landing targets both sides admit sequences; fix the
        // right side for determinism
        _ if !targets.is_empty() => 1.0,
        _ => detect_side(family, t0, &orbit_t0, cfg)?,
    };
    let mut entries: Vec<MtSequenceEntry> = Vec::new();
    let mut warnings = Vec::new();
    if cfg.prefer_clear_landing && targets.is_empty() {
        warnings.push(
            "no clear-landing targets exist for this base parameter; \
             falling back to critical-pass roots"
                .to_string(),
        );
    }
    let mut n = t0.preperiod;
    while entries.len() < count && n + t0.period <= cfg.max_preperiod {
        n += t0.period;
        match roots_for_preperiod(family, t0, &orbit_t0, n, side, cfg, &targets, &entries) {
            Ok(mut found) => {
                if found.is_empty() {
                    warnings.push(format!("preperiod {n}: no new root located, skipped"));
                }
                entries.append(&mut found);
            }
            Err(e) => warnings.push(format!("preperiod {n}: {e}, skipped")),
        }
    }
    entries.truncate(count);
    if entries.is_empty() {
        return Err(SrbError::RootFinding(
            "MT sequence construction found no parameters".into(),
        ));
    }
    Ok((entries, warnings))
}

/// Gap in `t`-offset form: `f_{t0 + side u}^n(c) - p_{t0 + side u}`, with the
/// periodic point tracked across evaluations.
fn offset_gap<'a>(
    family: &'a MapFamily,
    t0f: f64,
    p_seed: f64,
    period: usize,
    n: usize,
    side: f64,
) -> (std::rc::Rc<std::cell::Cell<f64>>, impl Fn(f64) -> f64 + 'a) {
    let p_track = std::rc::Rc::new(std::cell::Cell::new(p_seed));
    let tracker = p_track.clone();
    let gap = move |u: f64| -> f64 {
        let t = t0f + side * u;
        let mut p = tracker.get();
        for _ in 0..40 {
            let g = family.iterate(t, p, period) - p;
            let d = family.deriv_iterate(t, p, period) - 1.0;
            if d == 0.0 {
                break;
            }
            let step = g / d;
            p -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        tracker.set(p);
        family.iterate(t, family.critical, n) - p
    };
    (p_track, gap)
}

/// Log-spaced scan for sign-change brackets of the orbit gap at offsets
/// `u in [0.02, 50] * scale` from `t0`, where `scale = 1/|(f^{n-1})'(c_1)|`
/// is the expected distance of the first new roots.
fn scan_gap_brackets(
    family: &MapFamily,
    t0: &MtParameter,
    orbit_t0: &CriticalOrbit,
    n: usize,
    side: f64,
    want: usize,
) -> (Vec<(f64, f64)>, f64, f64) {
    let t0f = t0.t_f64();
    let scale = (-orbit_t0.log_derivs[n - 1]).exp();
    let u_min = (0.02 * scale).max(1e-15);
    let u_max = 50.0 * scale;
    let (lo, hi) = family.param_range;
    let (p_track, gap) = offset_gap(family, t0f, t0.periodic_point.to_f64(), t0.period, n, side);

    // dense enough to resolve the gap's oscillation in u, which has
    // quasi-period comparable to u itself on a log grid
    let per_decade = 80usize;
    let decades = (u_max / u_min).log10();
    let steps = ((decades * per_decade as f64).ceil() as usize).max(2);
    let mut brackets = Vec::new();
    let mut prev_u = u_min;
    let mut prev_g = gap(prev_u);
    for i in 1..=steps {
        let u = u_min * (u_max / u_min).powf(i as f64 / steps as f64);
        if t0f + side * u < lo || t0f + side * u > hi {
            break;
        }
        let g = gap(u);
        if prev_g != 0.0 && g != 0.0 && g.signum() != prev_g.signum() {
            brackets.push((prev_u, u));
            if brackets.len() >= want {
                break;
            }
        }
        prev_u = u;
        prev_g = g;
    }
    (brackets, scale, p_track.get())
}

/// Decide on which side of `t0` the pre-periodic parameters accumulate, by
/// probing a few preperiods for gap roots at the expected geometric scale.
fn detect_side(
    family: &MapFamily,
    t0: &MtParameter,
    orbit_t0: &CriticalOrbit,
    cfg: &MtSequenceConfig,
) -> Result<f64> {
    let mut score = [0usize; 2];
    for probe in 2..=4 {
        let n = t0.preperiod + probe * t0.period;
        if n + t0.period > cfg.max_preperiod {
            break;
        }
        for (i, side) in [1.0f64, -1.0].into_iter().enumerate() {
            let (brackets, scale, _) = scan_gap_brackets(family, t0, orbit_t0, n, side, 3);
            // only roots at the accumulation scale count
            if brackets.iter().any(|&(_, ub)| ub <= 20.0 * scale) {
                score[i] += 1;
            }
        }
    }
    if score[0] > score[1] {
        Ok(1.0)
    } else if score[1] > score[0] {
        Ok(-1.0)
    } else {
        Err(SrbError::RootFinding(format!(
            "cannot determine accumulation side automatically (scores +:{} -:{}); \
             pass an explicit side",
            score[0], score[1]
        )))
    }
}

/// Root brackets of the orbit gap at preperiod `n`, located through the
/// near-critical pass that every landing path of this depth makes: the pass
/// center solves the smooth transversal equation `f_t^{k*}(c) = c` with
/// `k* = n - preperiod(t0)`, and the gap's two roots straddle it. A direct
/// sign scan misses these pairs once their relative width (shrinking like
/// `Lambda^{-n/2}`) drops below any fixed grid density.
fn dip_brackets(
    family: &MapFamily,
    t0: &MtParameter,
    orbit_t0: &CriticalOrbit,
    n: usize,
    side: f64,
    want_dips: usize,
) -> (Vec<(f64, f64)>, f64, f64) {
    let t0f = t0.t_f64();
    let scale = (-orbit_t0.log_derivs[n - 1]).exp();
    let (lo_p, hi_p) = family.param_range;
    let mut brackets = Vec::new();
    if n <= t0.preperiod {
        return (brackets, scale, t0.periodic_point.to_f64());
    }
    let k_star = n - t0.preperiod;
    let c = family.critical;
    let pass = |u: f64| family.iterate(t0f + side * u, c, k_star) - c;

    let u_min = (0.02 * scale).max(1e-15);
    let u_max = 200.0 * scale;
    let per_decade = 80usize;
    let steps = (((u_max / u_min).log10() * per_decade as f64).ceil() as usize).max(2);
    // inside a dip the f64 gap is noise-limited, so signs there come from
    // the double-double evaluation
    let gap_dd_at = |u: f64| -> f64 {
        let t = t0.t + Dd::from_f64(side * u);
        gap_dd(family, t, n, t0.period, t0.periodic_point.to_f64())
            .map(|(g, _)| g.to_f64())
            .unwrap_or(f64::NAN)
    };
    let mut prev_u = u_min;
    let mut prev_h = pass(prev_u);
    let mut dips = 0usize;
    for i in 1..=steps {
        let u = u_min * (u_max / u_min).powf(i as f64 / steps as f64);
        if t0f + side * u < lo_p || t0f + side * u > hi_p {
            break;
        }
        let h = pass(u);
        if prev_h != 0.0 && h != 0.0 && h.signum() != prev_h.signum() {
            if let Some(u_c) = bisect_root(&pass, prev_u, u, 1e-18 * scale, 200) {
                dips += 1;
                // the dip crosses zero iff the gap at its center has the
                // opposite sign to the baseline just outside
                let g_center = gap_dd_at(u_c);
                let (ul, uh) = (u_c * 0.9, u_c * 1.1);
                let g_left = gap_dd_at(ul);
                let g_right = gap_dd_at(uh);
                if g_center == 0.0 {
                    brackets.push((u_c * (1.0 - 1e-12), u_c * (1.0 + 1e-12)));
                } else if g_center.is_finite() {
                    if g_left.is_finite() && g_left.signum() != g_center.signum() {
                        brackets.push((ul, u_c));
                    }
                    if g_right.is_finite() && g_right.signum() != g_center.signum() {
                        brackets.push((u_c, uh));
                    }
                }
                if dips >= want_dips {
                    break;
                }
            }
        }
        prev_u = u;
        prev_h = h;
    }
    (brackets, scale, t0.periodic_point.to_f64())
}

/// A non-orbit in-core preimage of the periodic point whose landing path
/// keeps O(1) clearance from the critical point: the seed value at the base
/// parameter and its depth (steps to reach the cycle).
#[derive(Debug, Clone, Copy)]
pub struct LandingTarget {
    pub seed: f64,
    pub depth: usize,
}

const TARGET_CLEARANCE: f64 = 0.05;
const TARGET_RANGE: f64 = 0.06;

/// Enumerate clear-landing targets: walk the in-core preimage tree of the
/// periodic point to small depth, discard points on the critical orbit,
/// points near the critical point, and points outside the hover range of
/// the periodic point (unreachable without a large, fold-crossing sweep).
pub fn landing_targets(family: &MapFamily, t0: &MtParameter) -> Result<Vec<LandingTarget>> {
    let t = t0.t_f64();
    let c = family.critical;
    let p = t0.periodic_point.to_f64();
    let c1 = family.eval(t, c);
    let c2 = family.eval(t, c1);
    let orbit = critical_orbit(family, t, t0.preperiod + t0.period)?;
    let on_orbit = |x: f64| orbit.points.iter().any(|&o| (o - x).abs() < 1e-7);
    let in_core = |x: f64| x >= c2 - 1e-12 && x <= c1 + 1e-12;

    let preimages = |y: f64| -> Vec<f64> {
        let mut out = Vec::new();
        for (lo, hi) in [(0.0, c), (c, 1.0)] {
            let f_lo = family.eval(t, lo);
            let f_hi = family.eval(t, hi);
            if (f_lo - y) * (f_hi - y) <= 0.0 {
                if let Some(x) = bisect_root(|x| family.eval(t, x) - y, lo, hi, 1e-15, 200) {
                    // Newton polish
                    let mut xx = x;
                    for _ in 0..3 {
                        let d = family.dx(t, xx);
                        if d == 0.0 {
                            break;
                        }
                        xx -= (family.eval(t, xx) - y) / d;
                    }
                    out.push(xx);
                }
            }
        }
        out
    };

    // cycle points, to keep the (self-preimaging) periodic orbit out of the
    // expanding frontier
    let cycle: Vec<f64> = {
        let mut pts = Vec::with_capacity(t0.period);
        let mut x = p;
        for _ in 0..t0.period {
            pts.push(x);
            x = family.eval(t, x);
        }
        pts
    };

    let mut targets: Vec<LandingTarget> = Vec::new();
    let mut frontier = vec![p];
    for depth in 1..=8usize {
        let mut next = Vec::new();
        for &y in &frontier {
            for x in preimages(y) {
                if !in_core(x)
                    || (x - c).abs() < TARGET_CLEARANCE
                    || cycle.iter().any(|&q| (q - x).abs() < 1e-9)
                {
                    continue;
                }
                next.push(x);
                if !on_orbit(x) && (x - p).abs() <= TARGET_RANGE {
                    targets.push(LandingTarget { seed: x, depth });
                }
            }
        }
        next.sort_by(|a, b| a.partial_cmp(b).unwrap());
        next.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        frontier = next;
    }
    // nearest to the periodic point first: their crossings need the
    // smallest hover sweeps
    targets.sort_by(|a, b| {
        (a.seed - p)
            .abs()
            .partial_cmp(&(b.seed - p).abs())
            .unwrap()
    });
    targets.dedup_by(|a, b| (a.seed - b.seed).abs() < 1e-10);
    targets.truncate(6);
    Ok(targets)
}

/// Track a landing target to a perturbed parameter: re-refine the periodic
/// point, then walk the preimage chain back with Newton from the base-chain
/// seeds.
fn target_at(
    family: &MapFamily,
    t: f64,
    p_seed: f64,
    period: usize,
    chain_seeds: &[f64],
) -> Option<f64> {
    let mut p = p_seed;
    for _ in 0..50 {
        let g = family.iterate(t, p, period) - p;
        let d = family.deriv_iterate(t, p, period) - 1.0;
        if d == 0.0 {
            return None;
        }
        let step = g / d;
        p -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let mut y = p;
    for seed in chain_seeds.iter().rev() {
        let mut x = *seed;
        for _ in 0..60 {
            let d = family.dx(t, x);
            if d == 0.0 {
                return None;
            }
            let step = (family.eval(t, x) - y) / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        y = x;
    }
    Some(y)
}

/// Candidate root offsets for preperiod `n` via clear-landing targets:
/// simple crossings of `c_{k}(t) = x*(t)` with `k = n - depth`.
fn clear_candidates(
    family: &MapFamily,
    t0: &MtParameter,
    n: usize,
    side: f64,
    targets: &[LandingTarget],
    want: usize,
) -> Vec<f64> {
    let t0f = t0.t_f64();
    let c = family.critical;
    let p0 = t0.periodic_point.to_f64();
    let (lo_p, hi_p) = family.param_range;
    let mut out = Vec::new();
    for target in targets {
        if out.len() >= want {
            break;
        }
        if n <= target.depth {
            continue;
        }
        let k = n - target.depth;
        if k <= t0.preperiod {
            continue;
        }
        // the chain from p back to the target at the base parameter
        let mut chain = Vec::with_capacity(target.depth);
        let mut x = target.seed;
        for _ in 0..target.depth {
            chain.push(x);
            x = family.eval(t0f, x);
        }
        let dtc = match crate::map_family::dt_iterate(family, t0f, c, k) {
            Ok(d) => d.log_abs.exp(),
            Err(_) => continue,
        };
        if !(dtc > 0.0) || !dtc.is_finite() {
            continue;
        }
        let u_star = (target.seed - p0).abs() / dtc;
        let u_lo = 0.05 * u_star;
        let u_hi = (20.0 * u_star).min(0.3);
        let chi = |u: f64| -> f64 {
            let t = t0f + side * u;
            match target_at(family, t, p0, t0.period, &chain) {
                Some(xt) => family.iterate(t, c, k) - xt,
                None => f64::NAN,
            }
        };
        let steps = 240usize;
        let mut prev_u = u_lo;
        let mut prev_v = chi(prev_u);
        for i in 1..=steps {
            let u = u_lo * (u_hi / u_lo).powf(i as f64 / steps as f64);
            if t0f + side * u < lo_p || t0f + side * u > hi_p {
                break;
            }
            let v = chi(u);
            if prev_v.is_finite() && v.is_finite() && prev_v != 0.0 && v != 0.0
                && v.signum() != prev_v.signum()
            {
                if let Some(u_c) = bisect_root(&chi, prev_u, u, 1e-17 * u_star, 200) {
                    // deep targets on one preimage ladder alias the same
                    // parameter; keep one representative per root
                    if !out.iter().any(|&q: &f64| (q - u_c).abs() < 1e-4 * u_c) {
                        out.push(u_c);
                    }
                    break;
                }
            }
            prev_u = u;
            prev_v = v;
        }
    }
    out
}

fn roots_for_preperiod(
    family: &MapFamily,
    t0: &MtParameter,
    orbit_t0: &CriticalOrbit,
    n: usize,
    side: f64,
    cfg: &MtSequenceConfig,
    targets: &[LandingTarget],
    already: &[MtSequenceEntry],
) -> Result<Vec<MtSequenceEntry>> {
    let t0f = t0.t_f64();
    let use_targets = cfg.prefer_clear_landing && !targets.is_empty();
    let scale = (-orbit_t0.log_derivs[n - 1]).exp();
    let u_min = (0.02 * scale).max(1e-15);
    let p_track = std::cell::Cell::new(t0.periodic_point.to_f64());
    let gap = |u: f64| -> f64 {
        let t = t0.t + Dd::from_f64(side * u);
        match gap_dd(family, t, n, t0.period, p_track.get()) {
            Some((g, p)) => {
                p_track.set(p.to_f64());
                g.to_f64()
            }
            None => f64::NAN,
        }
    };

    let seeds: Vec<f64> = if use_targets {
        clear_candidates(family, t0, n, side, targets, cfg.roots_per_preperiod)
    } else {
        let dips_wanted = cfg.roots_per_preperiod.div_ceil(2).max(1) + 1;
        let (brackets, _, _) = dip_brackets(family, t0, orbit_t0, n, side, dips_wanted);
        brackets
            .into_iter()
            .filter_map(|(ua, ub)| bisect_root(&gap, ua, ub, 1e-16 * scale.max(1e-10), 200))
            .collect()
    };

    let mut out = Vec::new();
    for u_root in seeds {
        if out.len() >= cfg.roots_per_preperiod {
            break;
        }
        let t_coarse = Dd::from_f64(t0f) + Dd::from_f64(side * u_root);
        let Some((t_dd, p_dd)) = polish_root_dd(
            family,
            t_coarse,
            n,
            t0.period,
            p_track.get(),
            1e-15 * scale.max(1e-12),
        ) else {
            continue;
        };
        // discard rediscoveries of shallower roots and t0 itself
        let abs_dt = (t_dd - t0.t).abs().to_f64();
        if abs_dt < 0.3 * u_min {
            continue;
        }
        if already
            .iter()
            .chain(out.iter())
            .any(|e: &MtSequenceEntry| (e.param.t - t_dd).abs().to_f64() < 1e-13 * abs_dt.max(1.0))
        {
            continue;
        }
        let mt = match verify_mt(family, t_dd, n, t0.period, p_dd, cfg.residual_tol) {
            Ok(m) => m,
            Err(_) => continue,
        };
        // preperiod must be exactly n: the gap at n - period stays away from 0
        let prev_gap = (family.iterate_dd(t_dd, Dd::from_f64(family.critical), n - t0.period)
            - p_dd)
            .abs()
            .to_f64();
        if prev_gap < 1e-6 {
            continue;
        }
        let admissible = match admissible_level(orbit_t0, abs_dt, cfg.ca, 0.0, 0.0) {
            Ok(a) => a,
            Err(_) => continue,
        };
        let comparability_c = postcritical_comparability(family, &mt, cfg.horizon)?;
        let ratio = (mt.lambda / t0.lambda).powi(admissible.m as i32);
        out.push(MtSequenceEntry {
            param: mt,
            abs_dt,
            admissible,
            comparability_c,
            multiplier_ratio_pow_m: ratio,
        });
    }
    Ok(out)
}

/// `exp(max_k |log|(f_t^{k-1})'(c_1)| - k log Lambda_t|)` over the horizon.
///
/// Within the preperiod the log-derivative comes from the computed orbit;
/// past the verified landing step the orbit is the periodic cycle, so the
/// product continues in closed form. Re-simulating there instead would let
/// float noise escape the repelling orbit and fake unbounded deviations.
pub fn postcritical_comparability(
    family: &MapFamily,
    mt: &MtParameter,
    horizon: usize,
) -> Result<f64> {
    let t = mt.t_f64();
    let n = mt.preperiod;
    let orbit = critical_orbit(family, t, n)?;
    let log_lambda = mt.lambda.ln();
    let mut worst = 0.0f64;
    for k in 1..=n.min(horizon) {
        worst = worst.max((orbit.log_derivs[k - 1] - k as f64 * log_lambda).abs());
    }
    if horizon > n {
        let cycle_logs: Vec<f64> = {
            let mut p = mt.periodic_point.to_f64();
            (0..mt.period)
                .map(|_| {
                    let l = family.dx(t, p).abs().ln();
                    p = family.eval(t, p);
                    l
                })
                .collect()
        };
        // log D_m for m >= n: the computed value at the landing step plus
        // periodic factors
        let mut log_d = orbit.log_derivs[n];
        let mut m = n;
        while m + 1 <= horizon {
            // deviation at k = m + 1 uses log D_m
            worst = worst.max((log_d - (m + 1) as f64 * log_lambda).abs());
            log_d += cycle_logs[(m + 1 - n) % mt.period];
            m += 1;
        }
    }
    Ok(worst.exp())
}
