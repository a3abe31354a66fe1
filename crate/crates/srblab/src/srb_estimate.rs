//! Two independent estimators of the invariant density and of observable
//! averages: long-orbit Birkhoff means with batch-based error bars, and an
//! Ulam (bin-transition) discretization of the transfer operator solved by
//! Cesaro-averaged power iteration. A Lyapunov-exponent readout doubles as a
//! chaoticity diagnostic.

use rayon::prelude::*;

use crate::error::{Result, SrbError};
use crate::map_family::MapFamily;
use crate::numeric::{fmt_g17, CompensatedSum};

/// Probability masses on the uniform bin partition of `[0, 1]`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BinnedDensity {
    pub bins: usize,
    pub masses: Vec<f64>,
    /// `[c_2, c_1]`: the interval the invariant measure is supported in.
    pub support_hint: (f64, f64),
}

impl BinnedDensity {
    pub fn bin_width(&self) -> f64 {
        1.0 / self.bins as f64
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.bins as f64
    }

    pub fn total_mass(&self) -> f64 {
        crate::numeric::compensated_total(self.masses.iter().copied())
    }

    /// L1 distance between two densities on the same partition.
    pub fn l1_distance(&self, other: &BinnedDensity) -> f64 {
        assert_eq!(self.bins, other.bins);
        let mut s = CompensatedSum::new();
        for (a, b) in self.masses.iter().zip(&other.masses) {
            s.add((a - b).abs());
        }
        s.value()
    }

    /// CSV with columns `bin_left,bin_right,mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,mass\n");
        let h = self.bin_width();
        for (i, m) in self.masses.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_g17(i as f64 * h),
                fmt_g17((i + 1) as f64 * h),
                fmt_g17(*m)
            ));
        }
        out
    }
}

/// Row-stochastic bin-transition matrix: `rows[i]` holds `(j, fraction of
/// bin i mapped into bin j)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct UlamMatrix {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl UlamMatrix {
    pub fn row_sum(&self, i: usize) -> f64 {
        crate::numeric::compensated_total(self.rows[i].iter().map(|&(_, w)| w))
    }

    /// Left action `rho -> rho P`.
    pub fn apply_left(&self, rho: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let m = rho[i];
            if m == 0.0 {
                continue;
            }
            for &(j, w) in row {
                out[j] += m * w;
            }
        }
    }

    /// Halve the resolution: each pair of fine rows averages into one coarse
    /// row over paired columns.
    pub fn coarsen(&self) -> UlamMatrix {
        assert!(self.n % 2 == 0);
        let n2 = self.n / 2;
        let rows = (0..n2)
            .map(|big_i| {
                let mut acc = vec![0.0f64; n2];
                for sub in 0..2 {
                    for &(j, w) in &self.rows[2 * big_i + sub] {
                        acc[j / 2] += 0.5 * w;
                    }
                }
                acc.iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(j, &w)| (j, w))
                    .collect()
            })
            .collect();
        UlamMatrix { n: n2, rows }
    }
}

/// Build the Ulam matrix. With `samples_per_bin = None`, each row comes from
/// exact interval-image computation on the monotone pieces of the bin
/// (splitting at the critical point where straddled); `Some(s)` uses `s`
/// stratified sample points per bin instead.
pub fn build_ulam(
    family: &MapFamily,
    t: f64,
    n_bins: usize,
    samples_per_bin: Option<usize>,
) -> Result<UlamMatrix> {
    if n_bins < 2 {
        return Err(SrbError::InvalidArgument("need at least 2 bins".into()));
    }
    family.check_param(t)?;
    let h = 1.0 / n_bins as f64;
    let rows: Vec<Vec<(usize, f64)>> = (0..n_bins)
        .into_par_iter()
        .map(|i| {
            let a = i as f64 * h;
            let b = (i + 1) as f64 * h;
            match samples_per_bin {
                Some(s) => sampled_row(family, t, a, b, s, n_bins),
                None => exact_row(family, t, a, b, n_bins),
            }
        })
        .collect();
    Ok(UlamMatrix { n: n_bins, rows })
}

fn sampled_row(
    family: &MapFamily,
    t: f64,
    a: f64,
    b: f64,
    s: usize,
    n_bins: usize,
) -> Vec<(usize, f64)> {
    let mut acc = std::collections::BTreeMap::new();
    let w = 1.0 / s as f64;
    for k in 0..s {
        let x = a + (b - a) * (k as f64 + 0.5) / s as f64;
        let y = family.eval(t, x).clamp(0.0, 1.0);
        let j = ((y * n_bins as f64) as usize).min(n_bins - 1);
        *acc.entry(j).or_insert(0.0) += w;
    }
    acc.into_iter().collect()
}

fn exact_row(family: &MapFamily, t: f64, a: f64, b: f64, n_bins: usize) -> Vec<(usize, f64)> {
    let c = family.critical;
    let mut acc = std::collections::BTreeMap::new();
    let width = b - a;
    let mut add_piece = |lo: f64, hi: f64| {
        if hi <= lo {
            return;
        }
        monotone_piece_masses(family, t, lo, hi, n_bins, &mut |j, mass| {
            *acc.entry(j).or_insert(0.0) += mass / width;
        });
    };
    if a < c && c < b {
        add_piece(a, c);
        add_piece(c, b);
    } else {
        add_piece(a, b);
    }
    acc.into_iter().collect()
}

/// Distribute the Lebesgue measure of `[lo, hi]` (on which `f_t` is
/// monotone) over the bins of its image, by inverting `f_t` at the crossed
/// bin edges.
fn monotone_piece_masses(
    family: &MapFamily,
    t: f64,
    lo: f64,
    hi: f64,
    n_bins: usize,
    sink: &mut impl FnMut(usize, f64),
) {
    let h = 1.0 / n_bins as f64;
    let f_lo = family.eval(t, lo).clamp(0.0, 1.0);
    let f_hi = family.eval(t, hi).clamp(0.0, 1.0);
    let increasing = f_hi >= f_lo;
    let (y0, y1) = if increasing { (f_lo, f_hi) } else { (f_hi, f_lo) };
    let j0 = ((y0 / h) as usize).min(n_bins - 1);
    let j1 = ((y1 / h) as usize).min(n_bins - 1);
    if j0 == j1 {
        sink(j0, hi - lo);
        return;
    }
    let invert = |edge: f64| -> f64 {
        let (mut a, mut b) = if increasing { (lo, hi) } else { (hi, lo) };
        // invariant: f(a) <= edge <= f(b)
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if family.eval(t, m) < edge {
                a = m;
            } else {
                b = m;
            }
        }
        let mut x = 0.5 * (a + b);
        let d = family.dx(t, x);
        if d != 0.0 {
            let xn = x - (family.eval(t, x) - edge) / d;
            if xn >= lo.min(hi) && xn <= lo.max(hi) {
                x = xn;
            }
        }
        x
    };
    let mut edges = Vec::with_capacity(j1 - j0);
    for j in j0..j1 {
        edges.push(invert((j + 1) as f64 * h));
    }
    if increasing {
        let mut x_prev = lo;
        for (k, j) in (j0..j1).enumerate() {
            sink(j, (edges[k] - x_prev).max(0.0));
            x_prev = edges[k];
        }
        sink(j1, (hi - x_prev).max(0.0));
    } else {
        let mut x_prev = hi;
        for (k, j) in (j0..j1).enumerate() {
            sink(j, (x_prev - edges[k]).max(0.0));
            x_prev = edges[k];
        }
        sink(j1, (x_prev - lo).max(0.0));
    }
}

/// Stationary density of a row-stochastic matrix by power iteration with
/// Cesaro averaging (tolerates eigenvalues at roots of unity from
/// renormalisable parameters). Stops when successive Cesaro averages differ
/// by less than `tol` in L1.
pub fn stationary_density(p: &UlamMatrix, tol: f64) -> Result<BinnedDensity> {
    stationary_density_from(p, tol, None)
}

pub fn stationary_density_from(
    p: &UlamMatrix,
    tol: f64,
    support_hint: Option<(f64, f64)>,
) -> Result<BinnedDensity> {
    let n = p.n;
    let max_iter = 100_000usize;
    let window = 16usize;
    let mut rho = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut cesaro = vec![0.0; n];
    let mut cesaro_prev: Option<Vec<f64>> = None;
    let mut count = 0usize;
    let mut last_residual = f64::INFINITY;
    for it in 1..=max_iter {
        p.apply_left(&rho, &mut next);
        std::mem::swap(&mut rho, &mut next);
        let total: f64 = rho.iter().sum();
        if total != 0.0 && (total - 1.0).abs() > 1e-14 {
            rho.iter_mut().for_each(|v| *v /= total);
        }
        for (cv, rv) in cesaro.iter_mut().zip(&rho) {
            *cv += rv;
        }
        count += 1;
        if it % window == 0 {
            let avg: Vec<f64> = cesaro.iter().map(|v| v / count as f64).collect();
            if let Some(prev) = &cesaro_prev {
                last_residual = avg
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>();
                if last_residual < tol {
                    let total: f64 = avg.iter().sum();
                    return Ok(BinnedDensity {
                        bins: n,
                        masses: avg.iter().map(|v| v / total).collect(),
                        support_hint: support_hint.unwrap_or((0.0, 1.0)),
                    });
                }
            }
            cesaro_prev = Some(avg);
            // periodically restart the running average so stale transients
            // do not cap the attainable tolerance
            if it % (window * 64) == 0 {
                cesaro.iter_mut().for_each(|v| *v = 0.0);
                count = 0;
                cesaro_prev = None;
            }
        }
    }
    Err(SrbError::NoConvergence {
        residual: last_residual,
        iterations: max_iter,
        history: vec![last_residual],
    })
}

/// `sum_i masses[i] * A(midpoint_i)`.
pub fn integrate_observable(density: &BinnedDensity, a: impl Fn(f64) -> f64) -> f64 {
    let mut s = CompensatedSum::new();
    for (i, m) in density.masses.iter().enumerate() {
        s.add(m * a(density.midpoint(i)));
    }
    s.value()
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BirkhoffEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_iters: usize,
    pub burn_in: usize,
    pub x0: f64,
    /// Orbit hit the critical point exactly and was restarted perturbed.
    pub restarted: bool,
}

/// Time average of `A` along the orbit of `x0` after burn-in, with a
/// batch-means standard error (100 batches).
pub fn birkhoff_average(
    family: &MapFamily,
    t: f64,
    a: impl Fn(f64) -> f64,
    n_iters: usize,
    burn_in: usize,
    x0: f64,
) -> Result<BirkhoffEstimate> {
    family.check_param(t)?;
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(SrbError::PointRange { x: x0 });
    }
    let c = family.critical;
    let mut restarted = false;
    let mut x = x0;
    for _ in 0..burn_in {
        if x == c {
            restarted = true;
            x = (x0 + 1e-9).min(1.0 - 1e-9);
        }
        x = family.eval(t, x);
    }
    let n_batches = 100usize.min(n_iters);
    let batch = n_iters / n_batches;
    let mut batch_means = Vec::with_capacity(n_batches);
    let mut total = CompensatedSum::new();
    let mut used = 0usize;
    for _ in 0..n_batches {
        let mut bsum = 0.0f64;
        for _ in 0..batch {
            if x == c {
                restarted = true;
                x = (x0 + 1e-9).min(1.0 - 1e-9);
            }
            bsum += a(x);
            x = family.eval(t, x);
        }
        batch_means.push(bsum / batch as f64);
        total.add(bsum);
        used += batch;
    }
    let mean = total.value() / used as f64;
    let var = batch_means
        .iter()
        .map(|m| (m - mean) * (m - mean))
        .sum::<f64>()
        / (n_batches.max(2) - 1) as f64;
    Ok(BirkhoffEstimate {
        mean,
        stderr: (var / n_batches as f64).sqrt(),
        n_iters: used,
        burn_in,
        x0,
        restarted,
    })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub n_iters: usize,
    /// Steps with exactly vanishing derivative, skipped and flagged.
    pub skipped_zero_derivs: usize,
}

/// `(1/n) sum log |f_t'(f^k x)|`, skipping (and counting) exact zeros.
pub fn lyapunov(
    family: &MapFamily,
    t: f64,
    n_iters: usize,
    burn_in: usize,
    x0: f64,
) -> Result<LyapunovEstimate> {
    family.check_param(t)?;
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(SrbError::PointRange { x: x0 });
    }
    let mut x = x0;
    for _ in 0..burn_in {
        x = family.eval(t, x);
    }
    let mut sum = CompensatedSum::new();
    let mut skipped = 0usize;
    for _ in 0..n_iters {
        let d = family.dx(t, x);
        if d == 0.0 {
            skipped += 1;
        } else {
            sum.add(d.abs().ln());
        }
        x = family.eval(t, x);
    }
    Ok(LyapunovEstimate {
        value: sum.value() / (n_iters - skipped).max(1) as f64,
        n_iters,
        skipped_zero_derivs: skipped,
    })
}

/// Support hint `[c_2, c_1]` for the invariant measure of `f_t`.
pub fn support_hint(family: &MapFamily, t: f64) -> (f64, f64) {
    let c1 = family.eval(t, family.critical);
    let c2 = family.eval(t, c1);
    (c2, c1)
}
