//! One-parameter families of nondegenerate unimodal maps of `[0, 1]` and the
//! pointwise/orbitwise evaluations everything else is built from: critical
//! orbits, log-space derivative products, parameter derivatives of iterates,
//! and the transversality series.

use std::sync::Arc;

use crate::error::{Result, SrbError};
use crate::numeric::{CompensatedSum, Dd};

type MapFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type DdMapFn = Arc<dyn Fn(Dd, Dd) -> Dd + Send + Sync>;

/// A family `t -> f_t` on `[0, 1]` with a parameter-independent interior
/// critical point, supplied as four closures `(eval, dx, dxx, dt)`.
///
/// Values are immutable after construction; every method is pure, so a
/// `MapFamily` can be shared freely across threads.
#[derive(Clone)]
pub struct MapFamily {
    pub name: String,
    /// Critical point, in (0, 1).
    pub critical: f64,
    /// Closed parameter interval of admissible t.
    pub param_range: (f64, f64),
    eval: MapFn,
    dx: MapFn,
    dxx: MapFn,
    dt: MapFn,
    /// Optional double-double evaluator for high-precision orbit gaps.
    eval_dd: Option<DdMapFn>,
}

impl std::fmt::Debug for MapFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapFamily")
            .field("name", &self.name)
            .field("critical", &self.critical)
            .field("param_range", &self.param_range)
            .finish()
    }
}

impl MapFamily {
    pub fn new(
        name: impl Into<String>,
        critical: f64,
        param_range: (f64, f64),
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dxx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dt: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            critical,
            param_range,
            eval: Arc::new(eval),
            dx: Arc::new(dx),
            dxx: Arc::new(dxx),
            dt: Arc::new(dt),
            eval_dd: None,
        }
    }

    /// The logistic family `f_t(x) = t x (1 - x)` with `c = 1/2`.
    pub fn logistic() -> Self {
        let mut fam = Self::new(
            "logistic",
            0.5,
            (1.0, 4.0),
            |t, x| t * x * (1.0 - x),
            |t, x| t * (1.0 - 2.0 * x),
            |t, _x| -2.0 * t,
            |_t, x| x * (1.0 - x),
        );
        fam.eval_dd = Some(Arc::new(|t: Dd, x: Dd| {
            t * x * (Dd::ONE - x)
        }));
        fam
    }

    pub fn check_param(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.param_range;
        if !(t >= lo && t <= hi) {
            return Err(SrbError::ParameterRange { t, lo, hi });
        }
        Ok(())
    }

    /// `f_t(x)` with domain validation; the checked public entry point.
    pub fn eval_checked(&self, t: f64, x: f64) -> Result<f64> {
        self.check_param(t)?;
        if !(0.0..=1.0).contains(&x) {
            return Err(SrbError::PointRange { x });
        }
        Ok(self.eval(t, x))
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.eval)(t, x)
    }

    #[inline]
    pub fn dx(&self, t: f64, x: f64) -> f64 {
        (self.dx)(t, x)
    }

    #[inline]
    pub fn dxx(&self, t: f64, x: f64) -> f64 {
        (self.dxx)(t, x)
    }

    #[inline]
    pub fn dt(&self, t: f64, x: f64) -> f64 {
        (self.dt)(t, x)
    }

    pub fn has_dd(&self) -> bool {
        self.eval_dd.is_some()
    }

    /// Double-double map step; falls back to f64 when the family was built
    /// from plain closures.
    pub fn eval_dd(&self, t: Dd, x: Dd) -> Dd {
        match &self.eval_dd {
            Some(f) => f(t, x),
            None => Dd::from_f64(self.eval(t.to_f64(), x.to_f64())),
        }
    }

    #[inline]
    pub fn iterate(&self, t: f64, x: f64, n: usize) -> f64 {
        let mut y = x;
        for _ in 0..n {
            y = self.eval(t, y);
        }
        y
    }

    pub fn iterate_dd(&self, t: Dd, x: Dd, n: usize) -> Dd {
        let mut y = x;
        for _ in 0..n {
            y = self.eval_dd(t, y);
        }
        y
    }

    /// `d/dx f_t^n(x)` as a plain product; use [`log_deriv_along`] when the
    /// product can leave f64 range.
    pub fn deriv_iterate(&self, t: f64, x: f64, n: usize) -> f64 {
        let mut y = x;
        let mut d = 1.0;
        for _ in 0..n {
            d *= self.dx(t, y);
            y = self.eval(t, y);
        }
        d
    }
}

/// Magnitude-and-sign form of a derivative product along an orbit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogDeriv {
    /// `log |(f_t^n)'(x)|`; `-inf` when the product vanished exactly.
    pub log_abs: f64,
    /// -1, 0 (vanished), or +1.
    pub sign: i8,
    /// Set when some factor along the orbit was exactly zero.
    pub hit_zero: bool,
}

impl LogDeriv {
    pub fn identity() -> Self {
        LogDeriv {
            log_abs: 0.0,
            sign: 1,
            hit_zero: false,
        }
    }
}

/// `log |(f_t^n)'(x)|` plus the product sign, accumulated in log space.
///
/// `n = 0` is the empty product `(0, +)`. An exactly-zero factor yields
/// `-inf` magnitude with the `hit_zero` flag instead of an error.
pub fn log_deriv_along(family: &MapFamily, t: f64, x: f64, n: usize) -> LogDeriv {
    let mut sum = CompensatedSum::new();
    let mut sign: i8 = 1;
    let mut hit_zero = false;
    let mut y = x;
    for _ in 0..n {
        let d = family.dx(t, y);
        if d == 0.0 {
            hit_zero = true;
            sign = 0;
        } else {
            sum.add(d.abs().ln());
            if d < 0.0 {
                sign = -sign;
            }
        }
        y = family.eval(t, y);
    }
    LogDeriv {
        log_abs: if hit_zero { f64::NEG_INFINITY } else { sum.value() },
        sign,
        hit_zero,
    }
}

/// Forward orbit of the critical point together with the running
/// log-derivative `log |(f_t^k)'(c_1)|` and its sign, for `k = 0..=N`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CriticalOrbit {
    pub t: f64,
    /// `points[k] = f_t^k(c)`, `points[0] = c`.
    pub points: Vec<f64>,
    /// `log_derivs[k] = log |(f_t^k)'(c_1)|`, `log_derivs[0] = 0`.
    pub log_derivs: Vec<f64>,
    /// `signs[k] = sign of (f_t^k)'(c_1)`; 0 once a zero factor appeared.
    pub signs: Vec<i8>,
    /// First k >= 1 at which `f'(points[k]) = 0` exactly (superstable orbit),
    /// if any.
    pub superstable_at: Option<usize>,
}

pub fn critical_orbit(family: &MapFamily, t: f64, n: usize) -> Result<CriticalOrbit> {
    family.check_param(t)?;
    if n < 1 {
        return Err(SrbError::InvalidArgument("iterate count must be >= 1".into()));
    }
    let c = family.critical;
    let mut points = Vec::with_capacity(n + 1);
    points.push(c);
    let mut x = c;
    for _ in 0..n {
        x = family.eval(t, x);
        points.push(x);
    }

    // (f^k)'(c_1) = prod_{j=1..k} f'(points[j]); accumulate in log space.
    let mut log_derivs = Vec::with_capacity(n + 1);
    let mut signs = Vec::with_capacity(n + 1);
    log_derivs.push(0.0);
    signs.push(1i8);
    let mut sum = CompensatedSum::new();
    let mut sign: i8 = 1;
    let mut superstable_at = None;
    for k in 1..=n {
        let d = family.dx(t, points[k]);
        if d == 0.0 {
            if superstable_at.is_none() {
                superstable_at = Some(k);
            }
            sign = 0;
        } else if sign != 0 {
            sum.add(d.abs().ln());
            if d < 0.0 {
                sign = -sign;
            }
        }
        log_derivs.push(if sign == 0 { f64::NEG_INFINITY } else { sum.value() });
        signs.push(sign);
    }
    Ok(CriticalOrbit {
        t,
        points,
        log_derivs,
        signs,
        superstable_at,
    })
}

/// Value of `\partial_t f_t^k(x)`, in plain or log form.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ParamDeriv {
    /// The value when it fits in f64 range (magnitude below the cap).
    pub value: Option<f64>,
    pub log_abs: f64,
    pub sign: i8,
}

const PARAM_DERIV_CAP: f64 = 1e280;

/// `\partial_t f_t^k(x)` by the forward recursion
/// `v_{j+1} = f_t'(x_j) v_j + (\partial_t f_t)(x_j)`, with a compensation
/// term carried through the multiply-add. Values whose magnitude exceed the
/// cap are reported in (log-magnitude, sign) form only.
pub fn dt_iterate(family: &MapFamily, t: f64, x: f64, k: usize) -> Result<ParamDeriv> {
    family.check_param(t)?;
    if k < 1 {
        return Err(SrbError::InvalidArgument("iterate count must be >= 1".into()));
    }
    let mut v = 0.0f64;
    let mut comp = 0.0f64; // running error of the affine recursion
    let mut log_form: Option<(f64, i8)> = None;
    let mut y = x;
    for _ in 0..k {
        let a = family.dx(t, y);
        let b = family.dt(t, y);
        match log_form {
            None => {
                let p = a * v;
                let p_err = a.mul_add(v, -p);
                let s = p + b;
                let s_err = if p.abs() >= b.abs() {
                    (p - s) + b
                } else {
                    (b - s) + p
                };
                comp = a * comp + p_err + s_err;
                v = s;
                if v.abs() > PARAM_DERIV_CAP {
                    log_form = Some((v.abs().ln(), if v >= 0.0 { 1 } else { -1 }));
                }
            }
            Some((ref mut lg, ref mut sg)) => {
                // past the cap |a v| >= 1e280 |b|, so the additive term is
                // below one ulp of the product
                if a == 0.0 {
                    // derivative annihilates the accumulated term; restart in
                    // plain form from b
                    log_form = None;
                    v = b;
                    comp = 0.0;
                } else {
                    *lg += a.abs().ln();
                    if a < 0.0 {
                        *sg = -*sg;
                    }
                }
            }
        }
        y = family.eval(t, y);
    }
    Ok(match log_form {
        None => {
            let val = v + comp;
            ParamDeriv {
                value: Some(val),
                log_abs: val.abs().ln(),
                sign: if val == 0.0 {
                    0
                } else if val > 0.0 {
                    1
                } else {
                    -1
                },
            }
        }
        Some((lg, sg)) => ParamDeriv {
            value: None,
            log_abs: lg,
            sign: sg,
        },
    })
}

/// Partial transversality series and a finite-horizon tail estimate.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TransversalitySum {
    pub partial_sum: f64,
    /// Geometric tail bound from the observed derivative growth and the
    /// observed size of upcoming numerators; 0 when the numerators vanish
    /// identically past the horizon probed.
    pub tail_bound: f64,
    pub n_terms: usize,
}

/// Partial sum of `J_{t1} = sum_j dt(c_j) / (f^j)'(c_1)` with log-space
/// denominators and a geometric tail bound.
///
/// A vanishing `(f^j)'(c_1)` along the way means the parameter is not
/// Collet-Eckmann; the sum is refused.
pub fn transversality_sum(
    family: &MapFamily,
    t1: f64,
    n_terms: usize,
) -> Result<TransversalitySum> {
    if n_terms < 1 {
        return Err(SrbError::InvalidArgument("n_terms must be >= 1".into()));
    }
    // orbit long enough for both the sum and the tail probe
    let probe = 4 * n_terms;
    let orbit = critical_orbit(family, t1, probe)?;
    if let Some(k) = orbit.superstable_at {
        if k < n_terms {
            return Err(SrbError::Estimator(format!(
                "derivative along critical orbit vanishes at k={k}; not Collet-Eckmann, \
                 transversality sum undefined"
            )));
        }
    }
    let mut sum = CompensatedSum::new();
    for j in 0..n_terms {
        let num = family.dt(t1, orbit.points[j]);
        if num == 0.0 {
            continue;
        }
        let log_den = orbit.log_derivs[j];
        let sign = orbit.signs[j] as f64;
        sum.add(num * sign * (-log_den).exp());
    }

    // Tail: sup of upcoming numerators over [n_terms, probe] times the
    // geometric sum of reciprocal derivatives extrapolated at the observed
    // growth rate.
    let sup_num = (n_terms..=probe)
        .map(|j| family.dt(t1, orbit.points[j]).abs())
        .fold(0.0f64, f64::max);
    let tail_bound = if sup_num == 0.0 {
        0.0
    } else {
        let lo = n_terms / 2;
        let rate = (orbit.log_derivs[n_terms - 1] - orbit.log_derivs[lo])
            / (n_terms - 1 - lo).max(1) as f64;
        if rate <= 0.0 {
            f64::INFINITY
        } else {
            let head = (-orbit.log_derivs[n_terms - 1]).exp();
            sup_num * head / rate.exp_m1()
        }
    };
    Ok(TransversalitySum {
        partial_sum: sum.value(),
        tail_bound,
        n_terms,
    })
}
