//! Shared numerical kernels: compensated summation, double-double arithmetic,
//! polynomial smoothsteps, monotone cubic interpolation, bracketed root
//! finding, quadrature, and least squares.

/// Neumaier-compensated running sum.
///
/// Used everywhere a long sum of mixed-magnitude terms feeds a tight
/// tolerance (orbit log-derivatives, transversality series, quadrature).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_total(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::new();
    for v in values {
        s.add(v);
    }
    s.value()
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    let e = (a - (s - v)) + (b - v);
    (s, e)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Unevaluated double-double value `hi + lo` (~31 significant digits).
///
/// Orbit gaps like `f_t^n(c) - p_t` have derivative-in-`t` of order
/// `Lambda^n`; locating their roots to residuals below 1e-11 is impossible on
/// the f64 grid of parameters once `n` exceeds a handful of steps, so the
/// root finders carry both the parameter and the gap in this type.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, x: f64) -> Dd {
        self * Dd::from_f64(x)
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn lt(self, o: Dd) -> bool {
        self.hi < o.hi || (self.hi == o.hi && self.lo < o.lo)
    }

    pub fn signum(self) -> f64 {
        if self.hi != 0.0 {
            self.hi.signum()
        } else if self.lo != 0.0 {
            self.lo.signum()
        } else {
            0.0
        }
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let lo = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, lo);
        Dd { hi, lo }
    }
}

impl std::ops::Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let lo = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = two_sum(p, lo);
        Dd { hi, lo }
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o.mul_f64(q1);
        let q2 = r.hi / o.hi;
        let r2 = r - o.mul_f64(q2);
        let q3 = r2.hi / o.hi;
        Dd::from_f64(q1) + Dd::from_f64(q2) + Dd::from_f64(q3)
    }
}

/// Order-7 smoothstep: `S(0)=0`, `S(1)=1`, first three derivatives vanish at
/// both ends, so piecewise gluing against constants is C^3.
pub fn smoothstep7(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let u2 = u * u;
    u2 * u2 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))
}

pub fn smoothstep7_d1(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let u2 = u * u;
    u2 * u * (140.0 + u * (-420.0 + u * (420.0 - 140.0 * u)))
}

pub fn smoothstep7_d2(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let u2 = u * u;
    u2 * (420.0 + u * (-1680.0 + u * (2100.0 - 840.0 * u)))
}

pub fn smoothstep7_d3(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    u * (840.0 + u * (-5040.0 + u * (8400.0 - 4200.0 * u)))
}

/// Order-9 smoothstep: first four derivatives vanish at the ends.
pub fn smoothstep9(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let u2 = u * u;
    let u4 = u2 * u2;
    u4 * u * (126.0 + u * (-420.0 + u * (540.0 + u * (-315.0 + 70.0 * u))))
}

pub fn smoothstep9_d1(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let u2 = u * u;
    u2 * u2 * (630.0 + u * (-2520.0 + u * (3780.0 + u * (-2520.0 + 630.0 * u))))
}

/// Steffen's monotone piecewise-cubic interpolant on a uniform grid.
///
/// Shape preserving: no overshoot, so nonnegative samples interpolate to a
/// nonnegative function. Values outside `[lo, hi]` are 0.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct UniformInterp {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
    slopes: Vec<f64>,
}

impl UniformInterp {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 2, "need at least two nodes");
        assert!(hi > lo, "degenerate interval");
        let slopes = steffen_slopes(&values, (hi - lo) / (values.len() - 1) as f64);
        Self {
            lo,
            hi,
            values,
            slopes,
        }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.values.len() - 1) as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        let h = self.step();
        let pos = (x - self.lo) / h;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let u = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        y0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + m0 * (u3 - 2.0 * u2 + u)
            + y1 * (-2.0 * u3 + 3.0 * u2)
            + m1 * (u3 - u2)
    }
}

fn steffen_slopes(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    if n == 2 {
        let s = (values[1] - values[0]) / h;
        return vec![s, s];
    }
    let sec = |i: usize| (values[i + 1] - values[i]) / h;
    d[0] = sec(0);
    d[n - 1] = sec(n - 2);
    for i in 1..n - 1 {
        let s0 = sec(i - 1);
        let s1 = sec(i);
        if s0 * s1 <= 0.0 {
            d[i] = 0.0;
        } else {
            let p = 0.5 * (s0 + s1);
            let bound = 2.0 * s0.abs().min(s1.abs());
            d[i] = p.signum() * p.abs().min(bound);
        }
    }
    d
}

/// Bracketed root of a scalar function, by bisection with a secant shortcut.
/// `f(a)` and `f(b)` must have opposite signs (a zero endpoint is returned
/// as-is).
pub fn bisect_root(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    max_iter: usize,
) -> Option<f64> {
    let mut fa = f(a);
    if fa == 0.0 {
        return Some(a);
    }
    let mut fb = f(b);
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..max_iter {
        if (b - a).abs() <= xtol {
            break;
        }
        // secant candidate, fall back to midpoint if outside the bracket
        let mut m = b - fb * (b - a) / (fb - fa);
        let mid = 0.5 * (a + b);
        if !m.is_finite() || m <= a.min(b) || m >= a.max(b) {
            m = mid;
        } else {
            // keep the bracket shrinking geometrically
            let w = (b - a).abs();
            if (m - mid).abs() > 0.4 * w {
                m = mid;
            }
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    Some(0.5 * (a + b))
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut s = CompensatedSum::new();
    s.add(0.5 * values[0]);
    for v in &values[1..values.len() - 1] {
        s.add(*v);
    }
    s.add(0.5 * values[values.len() - 1]);
    s.value() * h
}

/// Running trapezoid antiderivative; `out[i] = integral over [x0, x_i]`.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut s = CompensatedSum::new();
    out.push(0.0);
    for w in values.windows(2) {
        s.add(0.5 * h * (w[0] + w[1]));
        out.push(s.value());
    }
    out
}

/// Format a float with 17 significant digits, C `%.17g` style: fixed
/// notation for moderate exponents, scientific otherwise, trailing zeros
/// trimmed. Round-trips exactly through `str::parse::<f64>()`.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponential format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        let trimmed = if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.')
        } else {
            &fixed
        };
        trimmed.to_string()
    } else {
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{exp:+03}")
    }
}

/// Ordinary least squares y = slope*x + intercept.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope estimate.
    pub slope_stderr: f64,
    /// Half-width of the 95% confidence interval on the slope (normal approx).
    pub slope_ci95: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = compensated_total(x.iter().copied()) / nf;
    let my = compensated_total(y.iter().copied()) / nf;
    let sxx = compensated_total(x.iter().map(|&v| (v - mx) * (v - mx)));
    let sxy = compensated_total(x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)));
    let syy = compensated_total(y.iter().map(|&v| (v - my) * (v - my)));
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = compensated_total(
        x.iter()
            .zip(y)
            .map(|(&a, &b)| {
                let r = b - (slope * a + intercept);
                r * r
            }),
    );
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let slope_stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        r2,
        slope_stderr,
        slope_ci95: 1.96 * slope_stderr,
        n,
    })
}
