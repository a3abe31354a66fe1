//! Tower extension of the phase space over a good parameter: shrinking
//! neighborhoods `B_k` of the postcritical orbit, the nested pullbacks `J_k`
//! and climb annuli `I_j` around the critical point, smooth cutoff functions
//! routing mass between climbing and falling, and the numerical checks for
//! bounded distortion and the postcritical tail estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SrbError};
use crate::map_family::{critical_orbit, MapFamily};
use crate::numeric::{
    smoothstep7, smoothstep7_d1, smoothstep7_d2, smoothstep7_d3, CompensatedSum,
};

/// Level interval `B_k` (k >= 1), centered at the k-th postcritical point.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Level {
    pub center: f64,
    pub radius: f64,
}

/// One climb annulus `I_j = I_j^- u I_j^+` in offset coordinates from `c`:
/// points with `inner < |x - c| <= outer` on the given side climb exactly
/// `j - 1` levels before falling.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ClimbInterval {
    pub j: usize,
    /// (inner, outer) offsets on the left side; `None` when empty.
    pub minus: Option<(f64, f64)>,
    pub plus: Option<(f64, f64)>,
}

/// Geometry knobs for tower construction.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TowerSpec {
    pub delta: f64,
    /// The comparability constant L >= 2 sizing the levels.
    pub l_const: f64,
    /// Level-decay exponent; 0 for pre-periodic (constant-size) towers.
    pub beta: f64,
    pub k_max: usize,
    /// Goodness gate: the parameter must pass this Collet-Eckmann check
    /// before a tower is built on it.
    pub lambda_c: f64,
    pub h0: usize,
    pub goodness_horizon: usize,
}

impl Default for TowerSpec {
    fn default() -> Self {
        Self {
            delta: 0.05,
            l_const: 4.0,
            beta: 0.0,
            k_max: 60,
            lambda_c: 1.4,
            h0: 1,
            goodness_horizon: 60,
        }
    }
}

/// The tower over one good parameter. `J_k = [c - a_minus[k], c + a_plus[k]]`
/// is the set of entry points climbing at least `k` levels; `levels[k-1]`
/// is `B_k`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Tower {
    pub t: f64,
    pub delta: f64,
    pub l_const: f64,
    pub beta: f64,
    pub k_max: usize,
    pub h_delta: usize,
    pub critical: f64,
    pub levels: Vec<Level>,
    pub a_minus: Vec<f64>,
    pub a_plus: Vec<f64>,
    pub climb: Vec<ClimbInterval>,
    /// Expansion base the goodness gate was checked against.
    pub lambda_c: f64,
    /// Per-step postcritical expansion `Lambda_t` when known (pre-periodic
    /// parameters); enables the `L^p` norm family.
    pub multiplier: Option<f64>,
    /// Deepest level whose image geometry is still resolved in f64: past it
    /// `f^k(J_{k-1})` rounds onto the postcritical orbit exactly (the fold
    /// squares offsets, so resolution ends near `|J| ~ sqrt(eps)`).
    pub resolved_levels: usize,
}

impl Tower {
    /// `J_k` as an x-interval.
    pub fn j_interval(&self, k: usize) -> (f64, f64) {
        (
            self.critical - self.a_minus[k],
            self.critical + self.a_plus[k],
        )
    }

    pub fn j_len(&self, k: usize) -> f64 {
        self.a_minus[k] + self.a_plus[k]
    }

    /// Number of levels a point of `[c - delta, c + delta]` climbs before
    /// falling, capped at `k_max`.
    pub fn climb_height(&self, family: &MapFamily, x: f64) -> usize {
        let mut y = x;
        for k in 1..=self.k_max {
            y = family.eval(self.t, y);
            let b = &self.levels[k - 1];
            if (y - b.center).abs() > b.radius {
                return k - 1;
            }
        }
        self.k_max
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tower serialization")
    }
}

/// Build the tower by the inductive level recipe: each `B_k` is sized from
/// the image length `|f^k(J_{k-1})|` so that at least half of a protruding
/// image lies outside, then `J_k` is recovered by bisecting the climb
/// predicate on each side of the critical point.
pub fn build_tower(family: &MapFamily, t: f64, spec: &TowerSpec) -> Result<Tower> {
    family.check_param(t)?;
    if !(spec.delta > 0.0) || !(spec.l_const >= 2.0) {
        return Err(SrbError::InvalidArgument("need delta > 0 and L >= 2".into()));
    }
    let goodness = crate::parameter_select::check_collet_eckmann(
        family,
        t,
        spec.lambda_c,
        spec.h0,
        spec.goodness_horizon,
    )?;
    if !goodness.ce_ok {
        return Err(SrbError::Estimator(format!(
            "parameter t={t} fails the (lambda_c={}, H0={}) expansion gate at horizon {} \
             (worst margin {})",
            spec.lambda_c, spec.h0, spec.goodness_horizon, goodness.worst_ce_margin
        )));
    }

    let c = family.critical;
    let orbit = critical_orbit(family, t, spec.k_max + 1)?;
    let mut levels = Vec::with_capacity(spec.k_max);
    let mut a_minus = vec![spec.delta];
    let mut a_plus = vec![spec.delta];
    let mut resolved_levels = spec.k_max;

    for k in 1..=spec.k_max {
        let ck = orbit.points[k];
        let kb = (k as f64).powf(-spec.beta);
        let em = (family.iterate(t, c - a_minus[k - 1], k) - ck).abs();
        let ep = (family.iterate(t, c + a_plus[k - 1], k) - ck).abs();
        let img = em.max(ep);
        if img == 0.0 && resolved_levels == spec.k_max {
            resolved_levels = k - 1;
        }
        let l2 = spec.l_const * spec.l_const;
        let radius = if img >= kb / l2 && img <= 2.0 * kb / l2 {
            kb / (2.0 * l2)
        } else {
            kb / l2
        };
        if (ck - c).abs() <= radius {
            return Err(SrbError::GoodnessViolation { level: k });
        }
        levels.push(Level { center: ck, radius });

        // shrink each side until the k-th image stays inside B_k
        let shrink = |sgn: f64, prev_a: f64| -> f64 {
            let dist = |u: f64| (family.iterate(t, c + sgn * u, k) - ck).abs();
            if dist(prev_a) <= radius {
                return prev_a;
            }
            let mut lo = 0.0;
            let mut hi = prev_a;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if dist(mid) <= radius {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 * prev_a.max(1e-300) {
                    break;
                }
            }
            lo
        };
        a_minus.push(shrink(-1.0, a_minus[k - 1]));
        a_plus.push(shrink(1.0, a_plus[k - 1]));
    }

    let climb: Vec<ClimbInterval> = (1..=spec.k_max)
        .map(|j| {
            let minus = (a_minus[j] < a_minus[j - 1]).then_some((a_minus[j], a_minus[j - 1]));
            let plus = (a_plus[j] < a_plus[j - 1]).then_some((a_plus[j], a_plus[j - 1]));
            ClimbInterval { j, minus, plus }
        })
        .collect();
    let j_min = climb
        .iter()
        .find(|ci| ci.minus.is_some() || ci.plus.is_some())
        .map(|ci| ci.j)
        .unwrap_or(spec.k_max + 1);
    let h_delta = j_min.saturating_sub(1);
    let required = 2.max(spec.h0);
    if h_delta < required {
        return Err(SrbError::DeltaTooLarge { h_delta, required });
    }

    Ok(Tower {
        t,
        delta: spec.delta,
        l_const: spec.l_const,
        beta: spec.beta,
        k_max: spec.k_max,
        h_delta,
        critical: c,
        levels,
        a_minus,
        a_plus,
        climb,
        lambda_c: spec.lambda_c,
        multiplier: None,
        resolved_levels,
    })
}

/// Largest `delta <= delta_max` from a halving sweep with
/// `H(delta) >= max(2, H0) + 2`.
pub fn choose_delta(family: &MapFamily, t: f64, spec: &TowerSpec, delta_max: f64) -> Result<f64> {
    let mut delta = delta_max;
    for _ in 0..40 {
        let candidate = TowerSpec { delta, ..*spec };
        if let Ok(tw) = build_tower(family, t, &candidate) {
            if tw.h_delta >= 2.max(spec.h0) + 2 {
                return Ok(delta);
            }
        }
        delta *= 0.5;
    }
    Err(SrbError::InvalidArgument(format!(
        "no delta <= {delta_max} reaches H(delta) >= max(2, H0) + 2 at t={t}"
    )))
}

/// Rebuild the tower for a perturbed parameter on the *same* interval
/// skeleton: the `J_k` are copied verbatim and the levels are recentered on
/// the perturbed postcritical orbit with radii measured from the images.
/// Valid for admissible perturbations, where the towers coincide by
/// construction; the level-size constraint is re-verified.
pub fn shared_tower(
    base: &Tower,
    family: &MapFamily,
    t: f64,
    level_cap: usize,
) -> Result<Tower> {
    family.check_param(t)?;
    let cap = level_cap.min(base.k_max);
    let c = base.critical;
    let orbit = critical_orbit(family, t, cap + 1)?;
    let mut levels = Vec::with_capacity(cap);
    for k in 1..=cap {
        let ck = orbit.points[k];
        let em = (family.iterate(t, c - base.a_minus[k], k) - ck).abs();
        let ep = (family.iterate(t, c + base.a_plus[k], k) - ck).abs();
        let radius = em.max(ep).max(1e-300);
        let kb = (k as f64).powf(-base.beta);
        if radius > kb / base.l_const * (1.0 + 1e-6) {
            return Err(SrbError::NotAdmissible(format!(
            "shared tower level {k}: radius {radius} exceeds the size bound {} \
             (perturbation too large for this skeleton)",
            kb / base.l_const
        )));
        }
        if (ck - c).abs() <= radius {
            return Err(SrbError::GoodnessViolation { level: k });
        }
        levels.push(Level { center: ck, radius });
    }
    Ok(Tower {
        t,
        levels,
        multiplier: None,
        k_max: cap,
        a_minus: base.a_minus[..=cap].to_vec(),
        a_plus: base.a_plus[..=cap].to_vec(),
        climb: base.climb.iter().take(cap).cloned().collect(),
        resolved_levels: base.resolved_levels.min(cap),
        ..base.clone()
    })
}

/// Piecewise-smooth cutoff: 0 outside the support, 1 on the plateau, an
/// order-7 smoothstep on each transition band (C^3 against the constants).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub enum Cutoff {
    /// `xi_k == 1` (no deeper climb interval to route around).
    One,
    /// Forced fall (the roof of a finite tower).
    Zero,
    Bump {
        lo_out: f64,
        lo_in: f64,
        hi_in: f64,
        hi_out: f64,
    },
}

impl Cutoff {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Cutoff::One => 1.0,
            Cutoff::Zero => 0.0,
            Cutoff::Bump {
                lo_out,
                lo_in,
                hi_in,
                hi_out,
            } => {
                if x <= lo_out || x >= hi_out {
                    0.0
                } else if x < lo_in {
                    smoothstep7((x - lo_out) / (lo_in - lo_out))
                } else if x <= hi_in {
                    1.0
                } else {
                    smoothstep7((hi_out - x) / (hi_out - hi_in))
                }
            }
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            Cutoff::One | Cutoff::Zero => 0.0,
            Cutoff::Bump {
                lo_out,
                lo_in,
                hi_in,
                hi_out,
            } => {
                if x <= lo_out || x >= hi_out || (x >= lo_in && x <= hi_in) {
                    0.0
                } else if x < lo_in {
                    smoothstep7_d1((x - lo_out) / (lo_in - lo_out)) / (lo_in - lo_out)
                } else {
                    -smoothstep7_d1((hi_out - x) / (hi_out - hi_in)) / (hi_out - hi_in)
                }
            }
        }
    }

    /// Supremum of the r-th derivative magnitude, r = 1..=3.
    pub fn deriv_sup(&self, r: usize) -> f64 {
        match *self {
            Cutoff::One | Cutoff::Zero => 0.0,
            Cutoff::Bump {
                lo_out,
                lo_in,
                hi_in,
                hi_out,
            } => {
                let smax = match r {
                    1 => max_abs_on_unit(smoothstep7_d1),
                    2 => max_abs_on_unit(smoothstep7_d2),
                    3 => max_abs_on_unit(smoothstep7_d3),
                    _ => panic!("derivative order out of range"),
                };
                let w = (lo_in - lo_out).min(hi_out - hi_in);
                smax / w.powi(r as i32)
            }
        }
    }

    /// Intervals where `0 < xi < 1`.
    pub fn partial_bands(&self) -> Vec<(f64, f64)> {
        match *self {
            Cutoff::One | Cutoff::Zero => vec![],
            Cutoff::Bump {
                lo_out,
                lo_in,
                hi_in,
                hi_out,
            } => vec![(lo_out, lo_in), (hi_in, hi_out)],
        }
    }
}

fn max_abs_on_unit(f: impl Fn(f64) -> f64) -> f64 {
    (0..=1000)
        .map(|i| f(i as f64 / 1000.0).abs())
        .fold(0.0, f64::max)
}

/// The cutoff functions of one tower, indexed by level `k = 0..=k_max`.
/// The roof cutoff is `Zero` so the finite tower conserves mass.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CutoffFamily {
    pub cutoffs: Vec<Cutoff>,
}

impl CutoffFamily {
    pub fn xi(&self, k: usize) -> &Cutoff {
        &self.cutoffs[k]
    }
}

/// Construct the cutoffs: `xi_0` is supported on `[c - delta, c + delta]`
/// with plateau on the inner half; `xi_k` (k >= 1) is supported on `J_{k+1}`
/// with plateau covering both `J_{k+2}` and the pullback of the inner half
/// of `B_{k+1}`, so every partial band sits inside `I_{k+2}`.
pub fn cutoff_family(family: &MapFamily, tower: &Tower) -> Result<CutoffFamily> {
    let c = tower.critical;
    let t = tower.t;
    let mut cutoffs = Vec::with_capacity(tower.k_max + 1);
    cutoffs.push(Cutoff::Bump {
        lo_out: c - tower.delta,
        lo_in: c - 0.5 * tower.delta,
        hi_in: c + 0.5 * tower.delta,
        hi_out: c + tower.delta,
    });
    for k in 1..=tower.k_max {
        if k == tower.k_max {
            cutoffs.push(Cutoff::Zero);
            break;
        }
        // everything at level k keeps climbing only when J_{k+1} = J_k;
        // otherwise the cutoff must vanish on J_k minus J_{k+1}
        let empty_next = tower.a_minus[k + 1] == tower.a_minus[k]
            && tower.a_plus[k + 1] == tower.a_plus[k];
        if empty_next {
            cutoffs.push(Cutoff::One);
            continue;
        }
        // pullback of the inner half of B_{k+1}
        let inner = ((k + 1) as f64).powf(-tower.beta) / (2.0 * tower.l_const.powi(3));
        let b = &tower.levels[k];
        let plateau = |sgn: f64, cap: f64| -> f64 {
            let dist = |u: f64| (family.iterate(t, c + sgn * u, k + 1) - b.center).abs();
            if dist(cap) <= inner {
                return cap;
            }
            let mut lo = 0.0;
            let mut hi = cap;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if dist(mid) <= inner {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let qm = plateau(-1.0, tower.a_minus[k + 1]);
        let qp = plateau(1.0, tower.a_plus[k + 1]);
        // pullback filling the whole support means the level geometry is
        // below float resolution; route everything up
        if qm >= 0.95 * tower.a_minus[k + 1] && qp >= 0.95 * tower.a_plus[k + 1] {
            cutoffs.push(Cutoff::One);
            continue;
        }
        // plateau covers both the pullback and J_{k+2}, but always leaves a
        // transition band: where the deeper climb interval is empty the
        // band sits in the fuzzy rim of J_{k+1} (bounded-overlap freedom)
        let side_edge = |q: f64, a2: f64, a1: f64| -> f64 {
            let deeper = if a2 < a1 { a2 } else { 0.0 };
            q.max(deeper).min(a1 - 0.05 * a1).max(q)
        };
        let am = side_edge(qm, tower.a_minus[k + 2], tower.a_minus[k + 1]);
        let ap = side_edge(qp, tower.a_plus[k + 2], tower.a_plus[k + 1]);
        let lo_in = c - am;
        let hi_in = c + ap;
        let lo_out = c - tower.a_minus[k + 1];
        let hi_out = c + tower.a_plus[k + 1];
        let wl = lo_in - lo_out;
        let wr = hi_out - hi_in;
        let floor = 1e-4 * tower.j_len(k + 1);
        if wl < floor || wr < floor {
            let ratio = (tower.j_len(k + 1) - tower.j_len(k + 2)) / tower.j_len(k + 1).max(1e-300);
            return Err(SrbError::CutoffConstructibility {
                level: k,
                ratio,
                bound: 1e-4,
            });
        }
        cutoffs.push(Cutoff::Bump {
            lo_out,
            lo_in,
            hi_in,
            hi_out,
        });
    }
    Ok(CutoffFamily { cutoffs })
}

/// Alternating bound/free decomposition of one orbit.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundFreeTimes {
    pub x: f64,
    pub horizon: usize,
    /// `T_i`: entry times into `[c - delta, c + delta]`.
    pub t_entries: Vec<usize>,
    /// `S_i`: ends of the bound periods; `None` encodes infinity (the entry
    /// hit `c` exactly, or the climb outlasted the tower/horizon).
    pub s_ends: Vec<Option<usize>>,
    /// Some entry hit the critical point exactly.
    pub hit_critical: bool,
}

/// Compute the bound/free times of `x` by direct orbit iteration.
pub fn bound_free_times(
    family: &MapFamily,
    tower: &Tower,
    x: f64,
    horizon: usize,
) -> Result<BoundFreeTimes> {
    if !(0.0..=1.0).contains(&x) {
        return Err(SrbError::PointRange { x });
    }
    let c = tower.critical;
    let t = tower.t;
    let mut t_entries = Vec::new();
    let mut s_ends = Vec::new();
    let mut hit_critical = false;
    let mut y = x;
    let mut step = 0usize;
    while step < horizon {
        if (y - c).abs() <= tower.delta {
            t_entries.push(step);
            if y == c {
                hit_critical = true;
                s_ends.push(None);
                break;
            }
            let j = tower.climb_height(family, y) + 1;
            if j > tower.k_max || step + j > horizon {
                s_ends.push(None);
                break;
            }
            s_ends.push(Some(step + j));
            y = family.iterate(t, y, j);
            step += j;
        } else {
            y = family.eval(t, y);
            step += 1;
        }
    }
    Ok(BoundFreeTimes {
        x,
        horizon,
        t_entries,
        s_ends,
        hit_critical,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DistortionReport {
    pub j: usize,
    pub n_samples: usize,
    /// `max over sampled x, y in f(J_j), k <= j of |log ((f^k)'(x)/(f^k)'(y))|`.
    pub max_log_ratio: f64,
    /// `sum log(1 + sup|f''| len(f^l(J_j)) / dist(image_l, c))` from the
    /// measured level geometry: an a-priori bound for the same quantity.
    pub predicted_log_bound: f64,
}

/// Sampled two-point distortion along the bound period over `f(J_j)`.
pub fn verify_distortion(
    family: &MapFamily,
    tower: &Tower,
    j: usize,
    n_samples: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if j < 1 || j > tower.k_max {
        return Err(SrbError::InvalidArgument(format!(
            "level j={j} outside 1..={}",
            tower.k_max
        )));
    }
    let t = tower.t;
    let c = tower.critical;
    let ends = [c - tower.a_minus[j], c + tower.a_plus[j]];
    let c1 = family.eval(t, c);
    let lo = ends
        .iter()
        .map(|&e| family.eval(t, e))
        .fold(f64::INFINITY, f64::min);
    let hi = c1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(f64, f64)> = (0..n_samples)
        .map(|_| {
            (
                lo + (hi - lo) * rng.gen::<f64>(),
                lo + (hi - lo) * rng.gen::<f64>(),
            )
        })
        .collect();
    let max_log_ratio = pairs
        .par_iter()
        .map(|&(x, y)| {
            let mut lx = 0.0f64;
            let mut ly = 0.0f64;
            let mut xx = x;
            let mut yy = y;
            let mut worst = 0.0f64;
            for _ in 1..=j {
                let dx = family.dx(t, xx);
                let dy = family.dx(t, yy);
                if dx == 0.0 || dy == 0.0 {
                    break;
                }
                lx += dx.abs().ln();
                ly += dy.abs().ln();
                worst = worst.max((lx - ly).abs());
                xx = family.eval(t, xx);
                yy = family.eval(t, yy);
            }
            worst
        })
        .reduce(|| 0.0, f64::max);

    let sup_f2 = (0..=2000)
        .map(|i| family.dxx(t, i as f64 / 2000.0).abs())
        .fold(0.0, f64::max);
    let mut log_bound = CompensatedSum::new();
    for l in 1..=j {
        let cl = tower.levels[l - 1].center;
        let extent = ends
            .iter()
            .map(|&e| (family.iterate(t, e, l) - cl).abs())
            .fold(0.0, f64::max);
        let dist = (cl - c).abs() - extent;
        if dist <= 0.0 {
            log_bound.add(f64::INFINITY);
            break;
        }
        log_bound.add((1.0 + sup_f2 * extent / dist).ln());
    }
    Ok(DistortionReport {
        j,
        n_samples,
        max_log_ratio,
        predicted_log_bound: log_bound.value(),
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct KeyEstimateReport {
    pub j: usize,
    pub k_tail: usize,
    /// `sum_{m=1..k_tail} 1/|(f^m)'(c_{j+1})|`.
    pub partial_sum: f64,
    /// Geometric extrapolation of the remaining tail.
    pub tail_estimate: f64,
    /// `C max(1, j^alpha)` for the configured constant.
    pub bound: f64,
    pub margin: f64,
    /// Tail terms not shrinking: the expansion hypothesis looks violated.
    pub diverging: bool,
}

/// Partial sum of the reciprocal derivative series along the orbit of
/// `c_{j+1}`, with a geometric tail estimate, against the polynomial bound
/// `C max(1, j^alpha)`.
pub fn key_estimate_check(
    family: &MapFamily,
    t: f64,
    j: usize,
    k_tail: usize,
    alpha: f64,
    c_const: f64,
) -> Result<KeyEstimateReport> {
    if k_tail < 4 {
        return Err(SrbError::InvalidArgument("k_tail must be >= 4".into()));
    }
    family.check_param(t)?;
    let start = family.iterate(t, family.eval(t, family.critical), j);
    let mut log_d = CompensatedSum::new();
    let mut sum = CompensatedSum::new();
    let mut y = start;
    let mut terms = Vec::with_capacity(k_tail);
    for _ in 1..=k_tail {
        let d = family.dx(t, y);
        if d == 0.0 {
            return Err(SrbError::Estimator(
                "derivative vanished along the postcritical tail".into(),
            ));
        }
        log_d.add(d.abs().ln());
        let term = (-log_d.value()).exp();
        terms.push(term);
        sum.add(term);
        y = family.eval(t, y);
    }
    let lag = (k_tail / 4).max(1);
    let r = (terms[k_tail - 1] / terms[k_tail - 1 - lag]).powf(1.0 / lag as f64);
    let (tail_estimate, diverging) = if r < 1.0 && r.is_finite() {
        (terms[k_tail - 1] * r / (1.0 - r), false)
    } else {
        (f64::INFINITY, true)
    };
    let bound = c_const * (j as f64).powf(alpha).max(1.0);
    let total = sum.value() + tail_estimate.min(f64::MAX);
    Ok(KeyEstimateReport {
        j,
        k_tail,
        partial_sum: sum.value(),
        tail_estimate,
        bound,
        margin: bound - total,
        diverging,
    })
}
