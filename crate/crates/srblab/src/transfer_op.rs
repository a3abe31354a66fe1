//! The weighted transfer operator on the tower, its projection back to
//! densities on `[0, 1]`, truncation, the norm family, the dual mass, and
//! truncated leading eigenpairs.
//!
//! Functions on the tower are grid-sampled per level. The operator routes
//! mass with a per-contribution ledger: within each application, the climbed
//! and fallen masses are balanced against the source-level quadrature, so
//! the dual mass is conserved to rounding rather than to interpolation
//! error.

use rayon::prelude::*;

use crate::error::{Result, SrbError};
use crate::map_family::MapFamily;
use crate::numeric::{
    cumulative_trapezoid, fmt_g17, trapezoid, CompensatedSum, UniformInterp,
};
use crate::srb_estimate::BinnedDensity;
use crate::tower::{Cutoff, CutoffFamily, Tower};

/// Grid resolution for tower functions: node counts include both endpoints.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct GridSpec {
    pub level0_nodes: usize,
    pub level_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            level0_nodes: 1 << 14,
            level_nodes: 512,
        }
    }
}

/// One grid-sampled level function on `[lo, hi]`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LevelFn {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl LevelFn {
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.values.len() - 1) as f64
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    pub fn abs_integral(&self) -> f64 {
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        trapezoid(&abs, self.step())
    }

    fn interp(&self) -> UniformInterp {
        UniformInterp::new(self.lo, self.hi, self.values.clone())
    }
}

/// A sequence of level functions `psi_k` with the geometric weight base
/// `lambda` of its tower; the operand of the tower transfer operator.
///
/// Supports are structural: level 0 lives on `(0, 1)`, level `k >= 1` on
/// `J_k`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TowerFunction {
    pub lambda: f64,
    pub levels: Vec<LevelFn>,
}

impl TowerFunction {
    pub fn zeros(tower: &Tower, grid: &GridSpec, lambda: f64) -> Self {
        let mut levels = Vec::with_capacity(tower.k_max + 1);
        levels.push(LevelFn {
            lo: 0.0,
            hi: 1.0,
            values: vec![0.0; grid.level0_nodes + 1],
        });
        for k in 1..=tower.k_max {
            let (lo, hi) = tower.j_interval(k);
            levels.push(LevelFn {
                lo,
                hi,
                values: vec![0.0; grid.level_nodes + 1],
            });
        }
        TowerFunction { lambda, levels }
    }

    pub fn k_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn is_nonnegative(&self) -> bool {
        self.levels
            .iter()
            .all(|l| l.values.iter().all(|&v| v >= 0.0))
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64 + Copy) -> TowerFunction {
        TowerFunction {
            lambda: self.lambda,
            levels: self
                .levels
                .iter()
                .map(|l| LevelFn {
                    lo: l.lo,
                    hi: l.hi,
                    values: l.values.iter().map(|&v| f(v)).collect(),
                })
                .collect(),
        }
    }

    pub fn zip_values(&self, other: &TowerFunction, f: impl Fn(f64, f64) -> f64) -> TowerFunction {
        TowerFunction {
            lambda: self.lambda,
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(a, b)| LevelFn {
                    lo: a.lo,
                    hi: a.hi,
                    values: a
                        .values
                        .iter()
                        .zip(&b.values)
                        .map(|(&x, &y)| f(x, y))
                        .collect(),
                })
                .collect(),
        }
    }

    /// Zero every level above `m` (the truncation operator).
    pub fn truncate(&self, m: usize) -> TowerFunction {
        TowerFunction {
            lambda: self.lambda,
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(k, l)| {
                    if k <= m {
                        l.clone()
                    } else {
                        LevelFn {
                            lo: l.lo,
                            hi: l.hi,
                            values: vec![0.0; l.values.len()],
                        }
                    }
                })
                .collect(),
        }
    }

    /// CSV rows `level,node,x,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,node,x,value\n");
        for (k, l) in self.levels.iter().enumerate() {
            let h = l.step();
            for (i, v) in l.values.iter().enumerate() {
                out.push_str(&format!(
                    "{k},{i},{},{}\n",
                    fmt_g17(l.lo + i as f64 * h),
                    fmt_g17(*v)
                ));
            }
        }
        out
    }
}

/// Norm kinds on tower functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// Sum of level-wise L1 norms of the derivative (the strong norm).
    W11,
    /// `sum lambda^k |psi_k|_{L1}` (the weak norm).
    L1,
    /// `sum lambda^{k r} |psi_k|_{Lp}` with `r` tied to the postcritical
    /// multiplier.
    Lp(f64),
}

/// `nu(psi) = sum_k lambda^k integral psi_k`: the dual fixed point of the
/// operator, evaluated by the same level quadrature the ledger uses.
pub fn dual_mass(psi: &TowerFunction) -> f64 {
    let mut s = CompensatedSum::new();
    for (k, l) in psi.levels.iter().enumerate() {
        s.add(psi.lambda.powi(k as i32) * l.integral());
    }
    s.value()
}

/// Norm of a tower function. `Lp` needs the tower's postcritical multiplier
/// to fix the weight exponent.
pub fn norm(psi: &TowerFunction, kind: NormKind, multiplier: Option<f64>) -> Result<f64> {
    match kind {
        NormKind::L1 => {
            let mut s = CompensatedSum::new();
            for (k, l) in psi.levels.iter().enumerate() {
                s.add(psi.lambda.powi(k as i32) * l.abs_integral());
            }
            Ok(s.value())
        }
        NormKind::W11 => {
            let mut s = CompensatedSum::new();
            for l in &psi.levels {
                let h = l.step();
                let n = l.values.len();
                let mut deriv = Vec::with_capacity(n);
                for i in 0..n {
                    let d = if i == 0 {
                        (l.values[1] - l.values[0]) / h
                    } else if i == n - 1 {
                        (l.values[n - 1] - l.values[n - 2]) / h
                    } else {
                        (l.values[i + 1] - l.values[i - 1]) / (2.0 * h)
                    };
                    deriv.push(d.abs());
                }
                s.add(trapezoid(&deriv, h));
            }
            Ok(s.value())
        }
        NormKind::Lp(p) => {
            if !(p > 1.0) {
                return Err(SrbError::InvalidArgument("Lp norm needs p > 1".into()));
            }
            let big_lambda = multiplier.ok_or(SrbError::MissingMultiplier)?;
            // lambda^{1-r} = Lambda^{(1 - 1/p)/2}
            let r = 1.0 - 0.5 * (1.0 - 1.0 / p) * big_lambda.ln() / psi.lambda.ln();
            let mut s = CompensatedSum::new();
            for (k, l) in psi.levels.iter().enumerate() {
                let powered: Vec<f64> = l.values.iter().map(|v| v.abs().powf(p)).collect();
                let lp = trapezoid(&powered, l.step()).powf(1.0 / p);
                s.add(psi.lambda.powf(k as f64 * r) * lp);
            }
            Ok(s.value())
        }
    }
}

/// Precomputed monotone branch data for one falling level and side: source
/// points, their images under `f^{j+1}`, Jacobians, and cutoff values.
struct BranchTable {
    level: usize,
    /// Source points, ordered so the image is ascending.
    y: Vec<f64>,
    x_img: Vec<f64>,
    jac: Vec<f64>,
    one_minus_xi: Vec<f64>,
}

/// The tower transfer operator bound to one tower, cutoff family, and grid.
pub struct TowerOperator<'a> {
    pub family: &'a MapFamily,
    pub tower: &'a Tower,
    pub cutoffs: &'a CutoffFamily,
    pub grid: GridSpec,
    pub lambda: f64,
    tables: Vec<BranchTable>,
}

impl<'a> TowerOperator<'a> {
    pub fn new(
        family: &'a MapFamily,
        tower: &'a Tower,
        cutoffs: &'a CutoffFamily,
        grid: GridSpec,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 1.0) || !(lambda < tower.lambda_c.sqrt()) {
            return Err(SrbError::InvalidArgument(format!(
                "weight base lambda = {lambda} outside (1, sqrt(lambda_c) = {})",
                tower.lambda_c.sqrt()
            )));
        }
        let mut tables = Vec::new();
        let c = tower.critical;
        let t = tower.t;
        for j in 0..=tower.k_max {
            let xi = cutoffs.xi(j);
            // source intervals of (1 - xi_j) psi_j per side
            let spans: Vec<(f64, f64)> = match (*xi, j) {
                (Cutoff::One, _) => vec![],
                (Cutoff::Zero, _) => {
                    let (lo, hi) = tower.j_interval(j);
                    vec![(lo, c), (c, hi)]
                }
                (Cutoff::Bump { lo_in, hi_in, .. }, 0) => {
                    vec![(0.0, lo_in), (hi_in, 1.0)]
                }
                (Cutoff::Bump { lo_in, hi_in, .. }, _) => {
                    let (lo, hi) = tower.j_interval(j);
                    vec![(lo, lo_in), (hi_in, hi)]
                }
            };
            for (lo, hi) in spans {
                if hi - lo <= 0.0 {
                    continue;
                }
                let nodes = if j == 0 {
                    grid.level0_nodes / 2
                } else {
                    grid.level_nodes
                };
                let mut y: Vec<f64> = (0..=nodes)
                    .map(|i| lo + (hi - lo) * i as f64 / nodes as f64)
                    .collect();
                let mut x_img = Vec::with_capacity(y.len());
                let mut jac = Vec::with_capacity(y.len());
                for &yy in &y {
                    let mut v = yy;
                    let mut dlog = 0.0f64;
                    let mut sign_ok = true;
                    for _ in 0..=j {
                        let d = family.dx(t, v);
                        if d == 0.0 {
                            sign_ok = false;
                            break;
                        }
                        dlog += d.abs().ln();
                        v = family.eval(t, v);
                    }
                    x_img.push(v);
                    jac.push(if sign_ok { dlog.exp() } else { f64::INFINITY });
                }
                if x_img.first().copied() > x_img.last().copied() {
                    y.reverse();
                    x_img.reverse();
                    jac.reverse();
                }
                let one_minus_xi = y.iter().map(|&yy| 1.0 - xi.eval(yy)).collect();
                tables.push(BranchTable {
                    level: j,
                    y,
                    x_img,
                    jac,
                    one_minus_xi,
                });
            }
        }
        Ok(Self {
            family,
            tower,
            cutoffs,
            grid,
            lambda,
            tables,
        })
    }

    pub fn zeros(&self) -> TowerFunction {
        TowerFunction::zeros(self.tower, &self.grid, self.lambda)
    }

    /// One application of the operator. Signed inputs are split into
    /// positive and negative parts so the conservative ledger applies to
    /// each monotone piece.
    pub fn apply(&self, psi: &TowerFunction) -> TowerFunction {
        if psi.is_nonnegative() {
            self.apply_nonneg(psi)
        } else {
            let plus = psi.map_values(|v| v.max(0.0));
            let minus = psi.map_values(|v| (-v).max(0.0));
            self.apply_nonneg(&plus)
                .zip_values(&self.apply_nonneg(&minus), |a, b| a - b)
        }
    }

    /// Truncated operator `T_M L T_M`.
    pub fn apply_truncated(&self, psi: &TowerFunction, m: usize) -> TowerFunction {
        self.apply(&psi.truncate(m)).truncate(m)
    }

    fn apply_nonneg(&self, psi: &TowerFunction) -> TowerFunction {
        let kmax = self.tower.k_max;
        let interps: Vec<UniformInterp> = psi.levels.iter().map(|l| l.interp()).collect();

        // per-level ledger on the source grids: total mass T_j, climbed mass
        // C_j, fallen complement F_j = T_j - C_j; everything downstream is
        // balanced against these, so their telescoping sum conserves nu
        let mut total_m = vec![0.0f64; kmax + 1];
        let mut climb_m = vec![0.0f64; kmax + 1];
        let mut fall_m = vec![0.0f64; kmax + 1];
        for j in 0..=kmax {
            let l = &psi.levels[j];
            let w = self.lambda.powi(j as i32);
            total_m[j] = w * l.integral();
            let xi = self.cutoffs.xi(j);
            let h = l.step();
            let weighted: Vec<f64> = l
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| xi.eval(l.lo + i as f64 * h) * v)
                .collect();
            climb_m[j] = w * trapezoid(&weighted, h);
            fall_m[j] = total_m[j] - climb_m[j];
        }

        // branch-table pushforward values and their side masses, used to
        // apportion F_j between the two sides
        let fall_tables: Vec<(usize, Vec<f64>, f64)> = self
            .tables
            .par_iter()
            .map(|tb| {
                let j = tb.level;
                let w = self.lambda.powi(j as i32);
                let g: Vec<f64> = (0..tb.y.len())
                    .map(|i| {
                        let v = interps[j].eval(tb.y[i]).max(0.0);
                        w * tb.one_minus_xi[i] * v / tb.jac[i]
                    })
                    .collect();
                let gy: Vec<f64> = (0..tb.y.len())
                    .map(|i| {
                        let v = interps[j].eval(tb.y[i]).max(0.0);
                        w * tb.one_minus_xi[i] * v
                    })
                    .collect();
                let hy = ((tb.y[tb.y.len() - 1] - tb.y[0]) / (tb.y.len() - 1) as f64).abs();
                (j, g, trapezoid(&gy, hy))
            })
            .collect();
        let mut side_sum = vec![0.0f64; kmax + 1];
        for (j, _, m) in &fall_tables {
            side_sum[*j] += m;
        }

        // climbed outputs, levels 1..=k_max, balanced to C_{k-1}
        let mut out_levels: Vec<LevelFn> = Vec::with_capacity(kmax + 1);
        out_levels.push(LevelFn {
            lo: 0.0,
            hi: 1.0,
            values: vec![0.0; self.grid.level0_nodes + 1],
        });
        let climbed: Vec<LevelFn> = (1..=kmax)
            .into_par_iter()
            .map(|k| {
                let (lo, hi) = self.tower.j_interval(k);
                let n = self.grid.level_nodes;
                let xi = self.cutoffs.xi(k - 1);
                let mut values: Vec<f64> = (0..=n)
                    .map(|i| {
                        let x = lo + (hi - lo) * i as f64 / n as f64;
                        xi.eval(x) * interps[k - 1].eval(x).max(0.0) / self.lambda
                    })
                    .collect();
                let target = climb_m[k - 1];
                let h = (hi - lo) / n as f64;
                let got = self.lambda.powi(k as i32) * trapezoid(&values, h);
                if got > 0.0 && target > 0.0 {
                    let s = target / got;
                    values.iter_mut().for_each(|v| *v *= s);
                } else if got <= 0.0 && target > 0.0 {
                    // degenerate grid: park the mass uniformly
                    let len = hi - lo;
                    let v = target / (self.lambda.powi(k as i32) * len);
                    values.iter_mut().for_each(|x| *x = v);
                } else if target <= 0.0 {
                    values.iter_mut().for_each(|x| *x = 0.0);
                }
                LevelFn { lo, hi, values }
            })
            .collect();
        out_levels.extend(climbed);

        // level-0 output: branch pushforwards, each balanced to its share of
        // the exact fall mass F_j
        let n0 = self.grid.level0_nodes;
        let h0 = 1.0 / n0 as f64;
        let mut l0 = vec![0.0f64; n0 + 1];
        for (tb, (j, g, side_mass)) in self.tables.iter().zip(&fall_tables) {
            let mass = if side_sum[*j] > 0.0 {
                fall_m[*j] * side_mass / side_sum[*j]
            } else {
                0.0
            };
            if mass == 0.0 && g.iter().all(|&v| v == 0.0) {
                continue;
            }
            let x_lo = tb.x_img[0];
            let x_hi = tb.x_img[tb.x_img.len() - 1];
            let mut i_lo = ((x_lo / h0).ceil() as usize).min(n0);
            let mut i_hi = ((x_hi / h0).floor() as usize).min(n0);
            // at least three nodes so the zeroed rim leaves an interior
            while i_hi - i_lo.min(i_hi) < 2 {
                i_lo = i_lo.saturating_sub(1);
                i_hi = (i_hi + 1).min(n0);
            }
            let mut contrib = vec![0.0f64; i_hi - i_lo + 1];
            let mut seg = 0usize;
            for (idx, slot) in contrib.iter_mut().enumerate() {
                let x = (i_lo + idx) as f64 * h0;
                if x < x_lo || x > x_hi {
                    continue;
                }
                while seg + 2 < tb.x_img.len() && tb.x_img[seg + 1] < x {
                    seg += 1;
                }
                let (xa, xb) = (tb.x_img[seg], tb.x_img[seg + 1]);
                let u = if xb > xa { (x - xa) / (xb - xa) } else { 0.0 };
                let u = u.clamp(0.0, 1.0);
                *slot = g[seg] * (1.0 - u) + g[seg + 1] * u;
            }
            // zero the rim: the sub-range trapezoid then coincides with the
            // full-grid trapezoid of the accumulated sum
            let last = contrib.len() - 1;
            contrib[0] = 0.0;
            contrib[last] = 0.0;
            // balance the pushforward against its exact mass share
            let got = trapezoid(&contrib, h0);
            if got > 0.0 && mass > 0.0 {
                let s = mass / got;
                contrib.iter_mut().for_each(|v| *v *= s);
            } else if mass > 0.0 {
                // image thinner than the output grid: park on the interior
                let v = mass / (h0 * (contrib.len() - 2) as f64);
                contrib.iter_mut().for_each(|x| *x = v);
                contrib[0] = 0.0;
                contrib[last] = 0.0;
            }
            for (idx, v) in contrib.iter().enumerate() {
                l0[i_lo + idx] += v;
            }
        }
        out_levels[0].values = l0;
        TowerFunction {
            lambda: self.lambda,
            levels: out_levels,
        }
    }

    /// Pointwise projection `Pi psi` sampled on a uniform grid of `[0, 1]`.
    pub fn project(&self, psi: &TowerFunction, out_nodes: usize) -> Vec<f64> {
        let t = self.tower.t;
        let c = self.tower.critical;
        let interps: Vec<UniformInterp> = psi.levels.iter().map(|l| l.interp()).collect();
        let h = 1.0 / out_nodes as f64;
        let mut out: Vec<f64> = (0..=out_nodes)
            .map(|i| interps[0].eval(i as f64 * h))
            .collect();
        for k in 1..=self.tower.k_max {
            let (jlo, jhi) = self.tower.j_interval(k);
            for (side_lo, side_hi) in [(jlo, c), (c, jhi)] {
                if side_hi <= side_lo {
                    continue;
                }
                // monotone branch of f^k over this side
                let nodes = self.grid.level_nodes;
                let mut y: Vec<f64> = (0..=nodes)
                    .map(|i| side_lo + (side_hi - side_lo) * i as f64 / nodes as f64)
                    .collect();
                let mut ximg: Vec<f64> = y.iter().map(|&yy| self.family.iterate(t, yy, k)).collect();
                if ximg[0] > ximg[nodes] {
                    y.reverse();
                    ximg.reverse();
                }
                let (xa, xb) = (ximg[0], ximg[nodes]);
                let i_lo = ((xa / h).ceil() as usize).min(out_nodes);
                let i_hi = ((xb / h).floor() as usize).min(out_nodes);
                let w = psi.lambda.powi(k as i32);
                let mut seg = 0usize;
                for i in i_lo..=i_hi {
                    let x = i as f64 * h;
                    while seg + 2 < ximg.len() && ximg[seg + 1] < x {
                        seg += 1;
                    }
                    // seed from the table, one Newton polish
                    let (p, q) = (ximg[seg], ximg[seg + 1]);
                    let u = if q > p { (x - p) / (q - p) } else { 0.0 };
                    let mut yy = y[seg] * (1.0 - u.clamp(0.0, 1.0)) + y[seg + 1] * u.clamp(0.0, 1.0);
                    for _ in 0..2 {
                        let fx = self.family.iterate(t, yy, k);
                        let df = self.family.deriv_iterate(t, yy, k);
                        if df == 0.0 {
                            break;
                        }
                        let step = (fx - x) / df;
                        let cand = yy - step;
                        if cand >= side_lo && cand <= side_hi {
                            yy = cand;
                        } else {
                            break;
                        }
                    }
                    let dj = self.family.deriv_iterate(t, yy, k).abs();
                    if dj > 0.0 {
                        out[i] += w * interps[k].eval(yy) / dj;
                    }
                }
            }
        }
        out
    }

    /// Mass-exact binned projection: per level and side, bin masses come
    /// from the cumulative integral of `psi_k` between bin-edge preimages,
    /// so the fold singularities are integrated rather than sampled.
    pub fn project_binned(&self, psi: &TowerFunction, n_bins: usize) -> BinnedDensity {
        let t = self.tower.t;
        let c = self.tower.critical;
        let hb = 1.0 / n_bins as f64;
        let mut masses = vec![0.0f64; n_bins];
        // level 0: cumulative over the full grid
        {
            let l = &psi.levels[0];
            let cum = cumulative_trapezoid(&l.values, l.step());
            let at = |x: f64| -> f64 {
                let pos = ((x - l.lo) / l.step()).clamp(0.0, (l.values.len() - 1) as f64);
                let i = (pos.floor() as usize).min(l.values.len() - 2);
                let u = pos - i as f64;
                cum[i] * (1.0 - u) + cum[i + 1] * u
            };
            for (b, slot) in masses.iter_mut().enumerate() {
                *slot += at((b + 1) as f64 * hb) - at(b as f64 * hb);
            }
        }
        for k in 1..=self.tower.k_max {
            let l = &psi.levels[k];
            let w = psi.lambda.powi(k as i32);
            let (jlo, jhi) = self.tower.j_interval(k);
            let cum = cumulative_trapezoid(&l.values, l.step());
            let cum_at = |y: f64| -> f64 {
                let pos = ((y - l.lo) / l.step()).clamp(0.0, (l.values.len() - 1) as f64);
                let i = (pos.floor() as usize).min(l.values.len() - 2);
                let u = pos - i as f64;
                cum[i] * (1.0 - u) + cum[i + 1] * u
            };
            for (side_lo, side_hi) in [(jlo, c), (c, jhi)] {
                if side_hi <= side_lo {
                    continue;
                }
                let nodes = self.grid.level_nodes;
                let mut y: Vec<f64> = (0..=nodes)
                    .map(|i| side_lo + (side_hi - side_lo) * i as f64 / nodes as f64)
                    .collect();
                let mut ximg: Vec<f64> =
                    y.iter().map(|&yy| self.family.iterate(t, yy, k)).collect();
                if ximg[0] > ximg[nodes] {
                    y.reverse();
                    ximg.reverse();
                }
                // walk bins covered by the image; invert edges via the table
                let preimage = |x: f64, seg: usize| -> f64 {
                    let (p, q) = (ximg[seg], ximg[seg + 1]);
                    let u = if q > p {
                        ((x - p) / (q - p)).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let mut yy = y[seg] * (1.0 - u) + y[seg + 1] * u;
                    for _ in 0..2 {
                        let fx = self.family.iterate(t, yy, k);
                        let dfx = self.family.deriv_iterate(t, yy, k);
                        if dfx == 0.0 {
                            break;
                        }
                        let cand = yy - (fx - x) / dfx;
                        if cand >= side_lo && cand <= side_hi {
                            yy = cand;
                        } else {
                            break;
                        }
                    }
                    yy
                };
                let (xa, xb) = (ximg[0], ximg[nodes]);
                let b_lo = ((xa / hb).floor() as usize).min(n_bins - 1);
                let b_hi = ((xb / hb).floor() as usize).min(n_bins - 1);
                let sgn_y = if y[nodes] > y[0] { 1.0 } else { -1.0 };
                let mut seg = 0usize;
                let mut prev_y = y[0];
                for b in b_lo..=b_hi {
                    let edge = ((b + 1) as f64 * hb).min(xb);
                    while seg + 2 < ximg.len() && ximg[seg + 1] < edge {
                        seg += 1;
                    }
                    let ye = if edge >= xb { y[nodes] } else { preimage(edge, seg) };
                    let dm = sgn_y * (cum_at(ye) - cum_at(prev_y));
                    masses[b] += w * dm;
                    prev_y = ye;
                }
            }
        }
        BinnedDensity {
            bins: n_bins,
            masses,
            support_hint: crate::srb_estimate::support_hint(self.family, t),
        }
    }

    /// The linear pairing `integral A(x) (Pi psi)(x) dx`, computed per level
    /// by change of variables: `sum_k lambda^k integral_{J_k} A(f^k y)
    /// psi_k(y) dy`.
    pub fn pair_observable(&self, psi: &TowerFunction, a: impl Fn(f64) -> f64) -> f64 {
        let t = self.tower.t;
        let mut acc = CompensatedSum::new();
        for (k, l) in psi.levels.iter().enumerate() {
            let h = l.step();
            let vals: Vec<f64> = l
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let y = l.lo + i as f64 * h;
                    v * a(self.family.iterate(t, y, k))
                })
                .collect();
            acc.add(psi.lambda.powi(k as i32) * trapezoid(&vals, h));
        }
        acc.value()
    }
}

/// Truncated leading eigenpair data.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Eigenpair {
    pub m: usize,
    pub kappa: f64,
    #[serde(skip)]
    pub phi: TowerFunction,
    /// Weak-norm residual of the eigen equation at exit.
    pub residual: f64,
    pub tau_m: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Recurrence exponent entering the truncation scale.
    pub alpha: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 3000,
            alpha: 0.0,
        }
    }
}

/// Leading eigenpair of the truncated operator by power iteration with a
/// running (Cesaro) average fallback, normalized by `nu(phi) = 1`, with the
/// eigenvalue read off through the dual pairing.
pub fn leading_eigenpair(
    op: &TowerOperator,
    m: usize,
    cfg: &EigenConfig,
) -> Result<Eigenpair> {
    if m < 1 || m > op.tower.k_max {
        return Err(SrbError::InvalidArgument(format!(
            "truncation level {m} outside 1..={}",
            op.tower.k_max
        )));
    }
    // start from normalized mass on the ground floor
    let mut phi = op.zeros();
    let n0 = phi.levels[0].values.len();
    for (i, v) in phi.levels[0].values.iter_mut().enumerate() {
        let x = i as f64 / (n0 - 1) as f64;
        *v = x * (1.0 - x);
    }
    let s = dual_mass(&phi);
    phi = phi.map_values(|v| v / s);

    let mut kappa = 1.0;
    let mut residual = f64::INFINITY;
    let mut history = Vec::new();
    let mut avg: Option<TowerFunction> = None;
    for it in 1..=cfg.max_iter {
        let next = op.apply_truncated(&phi, m);
        kappa = dual_mass(&next);
        if !(kappa > 0.0) {
            return Err(SrbError::NoConvergence {
                residual: f64::INFINITY,
                iterations: it,
                history,
            });
        }
        let next = next.map_values(|v| v / kappa);
        let diff = next.zip_values(&phi, |a, b| a - b);
        residual = norm(&diff, NormKind::L1, None)?;
        history.push(residual);
        phi = next;
        if residual < cfg.tol {
            break;
        }
        // rotating subdominant spectrum: fall back to the average of a
        // window of iterates
        if it % 8 == 0 {
            let acc = match avg.take() {
                None => phi.clone(),
                Some(a) => a.zip_values(&phi, |x, y| 0.5 * (x + y)),
            };
            let s = dual_mass(&acc);
            let acc = acc.map_values(|v| v / s);
            let im = op.apply_truncated(&acc, m);
            let k2 = dual_mass(&im);
            let diff = im
                .map_values(|v| v / k2)
                .zip_values(&acc, |a, b| a - b);
            let r2 = norm(&diff, NormKind::L1, None)?;
            if r2 < cfg.tol {
                phi = acc;
                kappa = k2;
                residual = r2;
                break;
            }
            avg = Some(acc);
        }
    }
    if residual >= cfg.tol {
        let n = history.len();
        return Err(SrbError::NoConvergence {
            residual,
            iterations: n,
            history: history.split_off(n.saturating_sub(16)),
        });
    }
    // tau_M = M^{(alpha - beta)/2} lambda^M |(f^M)'(c_1)|^{-1/2}
    let orbit = crate::map_family::critical_orbit(op.family, op.tower.t, m + 1)?;
    let tau_m = (m as f64).powf(0.5 * (cfg.alpha - op.tower.beta))
        * op.lambda.powi(m as i32)
        * (-0.5 * orbit.log_derivs[m]).exp();
    let s = dual_mass(&phi);
    Ok(Eigenpair {
        m,
        kappa,
        phi: phi.map_values(|v| v / s),
        residual,
        tau_m,
        iterations: history.len(),
    })
}

/// Smooth randomized nonnegative tower functions for conservation and
/// contraction experiments: one taper-smooth bump per level.
pub fn random_tower_function(
    tower: &Tower,
    grid: &GridSpec,
    lambda: f64,
    seed: u64,
) -> TowerFunction {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut f = TowerFunction::zeros(tower, grid, lambda);
    for l in f.levels.iter_mut() {
        let span = l.hi - l.lo;
        let center = l.lo + span * (0.2 + 0.6 * rng.gen::<f64>());
        let width = span * (0.15 + 0.3 * rng.gen::<f64>());
        let height = 0.2 + rng.gen::<f64>();
        let n = l.values.len();
        for (i, v) in l.values.iter_mut().enumerate() {
            let x = l.lo + span * i as f64 / (n - 1) as f64;
            let u = 1.0 - ((x - center) / width).abs();
            *v = height * crate::numeric::smoothstep7(u.clamp(0.0, 1.0));
        }
    }
    f
}
