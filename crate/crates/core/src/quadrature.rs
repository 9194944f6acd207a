//! Quadrature for oscillatory integrands.
//!
//! * [`integrate_oscillatory`]: tensor Gauss–Legendre panels on a rectangle,
//!   panel density set by a caller-supplied phase gradient bound, refined by
//!   bisection where two levels disagree.
//! * [`brute_force_oracle`]: composite Simpson on a uniform grid, for checks.
//! * [`integrate_windowed`]: one-dimensional ∫ a(r) e^{−2πiΦ(r)} dr for an
//!   analytic phase. Only the set where |Φ′| is small contributes beyond a
//!   negligible remainder, so the integrand is multiplied by a smooth window
//!   in |Φ′| and integrated over that set alone. Cost is independent of
//!   max |Φ′|.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bumps::zeta;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub panels_used: u64,
    pub oracle: bool,
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

pub(crate) struct Rule {
    pub x: [f64; 16],
    pub w: [f64; 16],
}

pub(crate) fn gl16() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(16);
        Rule { x: x.try_into().unwrap(), w: w.try_into().unwrap() }
    })
}

/// Sum of a slice by recursive halving; fixed association order.
pub fn pairwise_sum(v: &[Complex64]) -> Complex64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub(crate) fn pairwise_sum_f64(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum_f64(a) + pairwise_sum_f64(b)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub r: (f64, f64),
    pub theta: (f64, f64),
}

impl Default for Rect {
    /// [1/2, 2] × [0, π]
    fn default() -> Self {
        Rect { r: (0.5, 2.0), theta: (0.0, PI) }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Quad2dOptions {
    pub domain: Rect,
    pub max_panels: u64,
    pub max_depth: u32,
}

impl Default for Quad2dOptions {
    fn default() -> Self {
        Quad2dOptions { domain: Rect::default(), max_panels: 1 << 22, max_depth: 10 }
    }
}

/// ∫∫ f(r, θ) dr dθ over [1/2, 2] × [0, π].
///
/// `phase_gradient_bound` is a bound on |∇(phase)| in radians per unit
/// length; it fixes the initial panel count per axis at
/// max(8, ⌈bound/2⌉).
pub fn integrate_oscillatory<F>(f: &F, phase_gradient_bound: f64, tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    integrate_oscillatory_with(f, phase_gradient_bound, tol, &Quad2dOptions::default())
}

pub fn integrate_oscillatory_with<F>(f: &F, phase_gradient_bound: f64, tol: f64, opts: &Quad2dOptions) -> Result<QuadratureResult>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    integrate_oscillatory_aniso(f, [phase_gradient_bound; 2], tol, opts)
}

/// As [`integrate_oscillatory_with`] with separate bounds on |∂_r phase| and
/// |∂_θ phase|, so the panel grid can be fine in one direction only.
pub fn integrate_oscillatory_aniso<F>(f: &F, gradient_bounds: [f64; 2], tol: f64, opts: &Quad2dOptions) -> Result<QuadratureResult>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    if !(tol > 0.0) || !gradient_bounds.iter().all(|b| *b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "need tol > 0 and nonnegative gradient bounds, got {tol}, {gradient_bounds:?}"
        )));
    }
    let count = |b: f64| ((b / 2.0).ceil() as u64).max(8);
    let (nr, nt) = (count(gradient_bounds[0]), count(gradient_bounds[1]));
    let initial = nr.saturating_mul(nt);
    if initial > opts.max_panels {
        return Err(Error::BudgetExceeded { requested: initial, cap: opts.max_panels });
    }
    let Rect { r: (r0, r1), theta: (t0, t1) } = opts.domain;
    let (hr, ht) = ((r1 - r0) / nr as f64, (t1 - t0) / nt as f64);
    let used = AtomicU64::new(initial);
    let tol_p = tol / initial as f64;
    let parts: Vec<Result<(Complex64, f64)>> = (0..initial)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = ((idx / nt) as f64, (idx % nt) as f64);
            let p = Panel { r0: r0 + i * hr, r1: r0 + (i + 1.0) * hr, t0: t0 + j * ht, t1: t0 + (j + 1.0) * ht };
            let coarse = p.gl(f);
            refine(f, p, coarse, tol_p, opts.max_depth, &used, opts.max_panels)
        })
        .collect();
    let mut vals = Vec::with_capacity(parts.len());
    let mut errs = Vec::with_capacity(parts.len());
    for p in parts {
        let (v, e) = p?;
        vals.push(v);
        errs.push(e);
    }
    Ok(QuadratureResult {
        value: pairwise_sum(&vals),
        error_estimate: pairwise_sum_f64(&errs),
        panels_used: used.load(Ordering::Relaxed),
        oracle: false,
    })
}

#[derive(Clone, Copy)]
struct Panel {
    r0: f64,
    r1: f64,
    t0: f64,
    t1: f64,
}

impl Panel {
    fn gl<F: Fn(f64, f64) -> Complex64>(&self, f: &F) -> Complex64 {
        self.gl_abs(f).0
    }

    fn gl_abs<F: Fn(f64, f64) -> Complex64>(&self, f: &F) -> (Complex64, f64) {
        let g = gl16();
        let (cr, hr) = (0.5 * (self.r0 + self.r1), 0.5 * (self.r1 - self.r0));
        let (ct, ht) = (0.5 * (self.t0 + self.t1), 0.5 * (self.t1 - self.t0));
        let mut acc = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for a in 0..16 {
            let r = cr + hr * g.x[a];
            let mut row = Complex64::new(0.0, 0.0);
            let mut row_mag = 0.0;
            for b in 0..16 {
                let v = f(r, ct + ht * g.x[b]) * g.w[b];
                row += v;
                row_mag += v.norm();
            }
            acc += row * g.w[a];
            mag += row_mag * g.w[a];
        }
        (acc * (hr * ht), mag * (hr * ht).abs())
    }

    fn quarters(&self) -> [Panel; 4] {
        let rm = 0.5 * (self.r0 + self.r1);
        let tm = 0.5 * (self.t0 + self.t1);
        [
            Panel { r1: rm, t1: tm, ..*self },
            Panel { r1: rm, t0: tm, ..*self },
            Panel { r0: rm, t1: tm, ..*self },
            Panel { r0: rm, t0: tm, ..*self },
        ]
    }
}

fn refine<F: Fn(f64, f64) -> Complex64>(
    f: &F,
    p: Panel,
    coarse: Complex64,
    tol: f64,
    depth: u32,
    used: &AtomicU64,
    cap: u64,
) -> Result<(Complex64, f64)> {
    let q = p.quarters();
    let parts = [q[0].gl_abs(f), q[1].gl_abs(f), q[2].gl_abs(f), q[3].gl_abs(f)];
    let sub = parts.map(|p| p.0);
    let mag: f64 = parts.iter().map(|p| p.1).sum();
    let fine = (sub[0] + sub[1]) + (sub[2] + sub[3]);
    let diff = (fine - coarse).norm();
    if diff <= tol.max(ROUNDOFF * mag) || depth == 0 {
        return Ok((fine, diff));
    }
    let total = used.fetch_add(3, Ordering::Relaxed) + 3;
    if total > cap {
        return Err(Error::BudgetExceeded { requested: total, cap });
    }
    let mut v = Complex64::new(0.0, 0.0);
    let mut e = 0.0;
    for k in 0..4 {
        let (vk, ek) = refine(f, q[k], sub[k], tol / 4.0, depth - 1, used, cap)?;
        v += vk;
        e += ek;
    }
    Ok((v, e))
}

/// Composite Simpson on [1/2, 2] × [0, π] with `n_r` × `n_theta` intervals
/// (each rounded up to even).
pub fn brute_force_oracle<F>(f: &F, n_r: usize, n_theta: usize) -> QuadratureResult
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    brute_force_oracle_on(f, n_r, n_theta, Rect::default())
}

pub fn brute_force_oracle_on<F>(f: &F, n_r: usize, n_theta: usize, rect: Rect) -> QuadratureResult
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let even = |n: usize| (n.max(2) + 1) & !1;
    let (nr, nt) = (even(n_r), even(n_theta));
    let (hr, ht) = ((rect.r.1 - rect.r.0) / nr as f64, (rect.theta.1 - rect.theta.0) / nt as f64);
    let simpson = |i: usize, n: usize| {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let rows: Vec<Complex64> = (0..=nr)
        .into_par_iter()
        .map(|i| {
            let r = rect.r.0 + i as f64 * hr;
            let row: Vec<Complex64> = (0..=nt).map(|j| f(r, rect.theta.0 + j as f64 * ht) * simpson(j, nt)).collect();
            pairwise_sum(&row) * simpson(i, nr)
        })
        .collect();
    QuadratureResult {
        value: pairwise_sum(&rows) * (hr * ht / 9.0),
        error_estimate: 0.0,
        panels_used: ((nr / 2) * (nt / 2)) as u64,
        oracle: true,
    }
}

/// GL16 on [a, b].
#[inline]
pub(crate) fn gl_1d<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Complex64 {
    let g = gl16();
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..16 {
        acc += f(c + h * g.x[k]) * g.w[k];
    }
    acc * h
}

/// GL16 of f and of |f| on [a, b]; the second sizes the roundoff floor.
#[inline]
fn gl_1d_abs<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let g = gl16();
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mag = 0.0;
    for k in 0..16 {
        let v = f(c + h * g.x[k]) * g.w[k];
        acc += v;
        mag += v.norm();
    }
    (acc * h, mag * h.abs())
}

// Differences below this fraction of ∫|f| are rounding, not truncation.
const ROUNDOFF: f64 = 1e-14;

/// Adaptive GL16 on [a, b] starting from `n_init` uniform panels.
/// Returns (value, error estimate, panels).
pub fn adaptive_1d<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, n_init: usize, tol: f64, max_depth: u32) -> (Complex64, f64, u64) {
    let n = n_init.max(1);
    let h = (b - a) / n as f64;
    let mut vals = Vec::with_capacity(n);
    let mut err = 0.0;
    let mut panels = 0;
    for i in 0..n {
        let (u, v) = (a + i as f64 * h, if i + 1 == n { b } else { a + (i + 1) as f64 * h });
        let coarse = gl_1d(f, u, v);
        let (val, e, p) = refine_1d(f, u, v, coarse, tol / n as f64, max_depth);
        vals.push(val);
        err += e;
        panels += p;
    }
    (pairwise_sum(&vals), err, panels)
}

fn refine_1d<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, coarse: Complex64, tol: f64, depth: u32) -> (Complex64, f64, u64) {
    let m = 0.5 * (a + b);
    let ((l, ml), (r, mr)) = (gl_1d_abs(f, a, m), gl_1d_abs(f, m, b));
    let fine = l + r;
    let diff = (fine - coarse).norm();
    if diff <= tol.max(ROUNDOFF * (ml + mr)) || depth == 0 {
        return (fine, diff, 1);
    }
    let (vl, el, pl) = refine_1d(f, a, m, l, tol / 2.0, depth - 1);
    let (vr, er, pr) = refine_1d(f, m, b, r, tol / 2.0, depth - 1);
    (vl + vr, el + er, pl + pr)
}

/// Tuning of [`integrate_windowed`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowOptions {
    /// Lowest window level in cycles per unit length. Above this frequency a
    /// smooth bump on an interval of length ~1 has relative Fourier mass
    /// below ~1e-12.
    pub t_floor: f64,
    /// The window level is at least `c_stat`·sqrt(max |Φ″|) on the kept set,
    /// so the window itself varies slowly on the local wavelength.
    pub c_stat: f64,
    /// Samples used to locate monotone pieces of Φ′.
    pub n_scan: usize,
    pub max_depth: u32,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions { t_floor: 128.0, c_stat: 12.0, n_scan: 257, max_depth: 30 }
    }
}

/// How [`integrate_windowed`] treats a given phase on [a, b].
#[derive(Clone, Debug, PartialEq)]
pub enum WindowPlan {
    /// |Φ′| stays small enough to integrate everything; `max_d1` bounds |Φ′|.
    Direct { max_d1: f64 },
    /// Keep only `intervals`, weighted by ζ((|Φ′| − level)/level).
    Windowed { level: f64, intervals: Vec<(f64, f64)> },
    /// |Φ′| ≥ 2·level everywhere: the integral is below the remainder size.
    Empty { level: f64 },
}

/// Chooses the window level and the kept set for a phase on [a, b].
///
/// `base` is the smallest admissible level and `extra_curv` is added to
/// |Φ″| when sizing the level (callers that reuse one window for a family of
/// nearby phases pass the spread of Φ″ over the family).
pub fn plan_window<P>(phase: &P, a: f64, b: f64, base: f64, extra_curv: f64, opts: &WindowOptions) -> WindowPlan
where
    P: Fn(f64) -> (f64, f64, f64),
{
    let n = opts.n_scan.max(9);
    let xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let d: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| {
            let (_, d1, d2) = phase(x);
            (d1, d2)
        })
        .collect();
    let h = (b - a) / (n - 1) as f64;
    let max_d2 = d.iter().map(|v| v.1.abs()).fold(0.0, f64::max);
    let max_d1 = d.iter().map(|v| v.0.abs()).fold(0.0, f64::max) + 0.5 * h * max_d2;
    if max_d1 <= 2.0 * base {
        return WindowPlan::Direct { max_d1 };
    }

    // Pieces of [a, b] on which Φ′ is monotone.
    let mut cuts = vec![a];
    for i in 0..n - 1 {
        if d[i].1 == 0.0 || d[i].1.signum() != d[i + 1].1.signum() {
            let root = bisect(&|x| phase(x).2, xs[i], xs[i + 1]);
            if root > *cuts.last().unwrap() && root < b {
                cuts.push(root);
            }
        }
    }
    cuts.push(b);

    let mut level = base;
    let mut near = near_set(phase, &cuts, 2.0 * level);
    for _ in 0..4 {
        if near.is_empty() {
            break;
        }
        let curv = near
            .iter()
            .flat_map(|&(u, v)| (0..=32).map(move |k| u + (v - u) * k as f64 / 32.0))
            .map(|x| phase(x).2.abs())
            .fold(0.0, f64::max);
        let next = base.max(opts.c_stat * (curv + extra_curv).sqrt());
        if next <= level * 1.0001 {
            break;
        }
        level = next;
        near = near_set(phase, &cuts, 2.0 * level);
    }
    if max_d1 <= 2.0 * level {
        return WindowPlan::Direct { max_d1 };
    }
    if near.is_empty() {
        return WindowPlan::Empty { level };
    }
    WindowPlan::Windowed { level, intervals: near }
}

/// Window weight at a point where |Φ′| = `abs_d1`.
#[inline]
pub fn window_weight(abs_d1: f64, level: f64) -> f64 {
    zeta(((abs_d1 - level) / level).max(0.0))
}

/// Panels that keep each GL16 panel within ~12 radians of a phase with
/// |Φ′| ≤ `freq` cycles per unit (GL16 integrates e^{iωx} on [−1, 1] to
/// roundoff for ω ≤ 8).
#[inline]
pub fn panel_count(freq: f64, len: f64) -> usize {
    (2.0 * PI * freq * len / 12.0).ceil() as usize
}

/// ∫_a^b amp(r) e^{−2πiΦ(r)} dr, where `phase(r)` returns (Φ, Φ′, Φ″) and the
/// amplitude vanishes smoothly at a and b. `band` bounds the oscillation
/// frequency (cycles per unit) of the amplitude itself.
pub fn integrate_windowed<P, A>(phase: &P, amp: &A, a: f64, b: f64, band: f64, tol: f64, opts: &WindowOptions) -> QuadratureResult
where
    P: Fn(f64) -> (f64, f64, f64),
    A: Fn(f64) -> Complex64,
{
    match plan_window(phase, a, b, opts.t_floor + band, 0.0, opts) {
        WindowPlan::Direct { max_d1 } => {
            let integrand = |r: f64| amp(r) * Complex64::from_polar(1.0, -2.0 * PI * phase(r).0);
            let (v, e, p) = adaptive_1d(&integrand, a, b, panel_count(max_d1 + band, b - a).max(4), tol, opts.max_depth);
            QuadratureResult { value: v, error_estimate: e, panels_used: p, oracle: false }
        }
        WindowPlan::Empty { .. } => {
            QuadratureResult { value: Complex64::new(0.0, 0.0), error_estimate: 0.0, panels_used: 1, oracle: false }
        }
        WindowPlan::Windowed { level, intervals } => {
            let total_len: f64 = intervals.iter().map(|(u, v)| v - u).sum();
            let windowed = |r: f64| {
                let (p, d1, _) = phase(r);
                let w = window_weight(d1.abs(), level);
                if w == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                amp(r) * (w * Complex64::from_polar(1.0, -2.0 * PI * p))
            };
            let mut vals = Vec::with_capacity(intervals.len());
            let mut err = 0.0;
            let mut panels = 0;
            for &(u, v) in &intervals {
                let n_init = panel_count(2.0 * level + band, v - u).max(2);
                let (val, e, p) = adaptive_1d(&windowed, u, v, n_init, tol * (v - u) / total_len, opts.max_depth);
                vals.push(val);
                err += e;
                panels += p;
            }
            QuadratureResult { value: pairwise_sum(&vals), error_estimate: err, panels_used: panels.max(1), oracle: false }
        }
    }
}

/// Leaf panels that [`adaptive_1d`] settles on for `f`, with the summed
/// two-level error. Used to lay out nodes shared by a family of integrands.
pub fn adaptive_leaves<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, n_init: usize, tol: f64, max_depth: u32) -> (Vec<(f64, f64)>, f64) {
    let n = n_init.max(1);
    let h = (b - a) / n as f64;
    let mut leaves = Vec::with_capacity(n);
    let mut err = 0.0;
    for i in 0..n {
        let (u, v) = (a + i as f64 * h, if i + 1 == n { b } else { a + (i + 1) as f64 * h });
        let coarse = gl_1d(f, u, v);
        err += leaves_rec(f, u, v, coarse, tol / n as f64, max_depth, &mut leaves);
    }
    (leaves, err)
}

fn leaves_rec<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, coarse: Complex64, tol: f64, depth: u32, out: &mut Vec<(f64, f64)>) -> f64 {
    let m = 0.5 * (a + b);
    let ((l, ml), (r, mr)) = (gl_1d_abs(f, a, m), gl_1d_abs(f, m, b));
    let diff = (l + r - coarse).norm();
    if diff <= tol.max(ROUNDOFF * (ml + mr)) || depth == 0 {
        out.push((a, m));
        out.push((m, b));
        return diff;
    }
    leaves_rec(f, a, m, l, tol / 2.0, depth - 1, out) + leaves_rec(f, m, b, r, tol / 2.0, depth - 1, out)
}

/// Common refinement of two partitions of the same interval.
pub fn merge_partitions(p: &[(f64, f64)], q: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = p.iter().chain(q).flat_map(|&(u, v)| [u, v]).collect();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// {r : |Φ′(r)| < level} as merged intervals, given cut points between which
/// Φ′ is monotone.
fn near_set<P: Fn(f64) -> (f64, f64, f64)>(phase: &P, cuts: &[f64], level: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let (dp, dq) = (phase(p).1, phase(q).1);
        let (lo_val, hi_val) = (dp.min(dq), dp.max(dq));
        if hi_val <= -level || lo_val >= level {
            continue;
        }
        // Φ′ monotone on [p, q]: the preimage of (−level, level) is one interval.
        let cross = |target: f64| bisect(&|x| phase(x).1 - target, p, q);
        let increasing = dq >= dp;
        let (mut u, mut v) = (p, q);
        if increasing {
            if dp < -level {
                u = cross(-level);
            }
            if dq > level {
                v = cross(level);
            }
        } else {
            if dp > level {
                u = cross(level);
            }
            if dq < -level {
                v = cross(-level);
            }
        }
        if v <= u {
            continue;
        }
        match out.last_mut() {
            Some(last) if u <= last.1 + 1e-14 => last.1 = last.1.max(v),
            _ => out.push((u, v)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        for p in 0..32 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p + 1) as f64 };
            assert!((got - want).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn constant_integrand() {
        let res = integrate_oscillatory(&|_, _| c(1.0, 0.0), 0.0, 1e-10).unwrap();
        assert!((res.value - c(1.5 * PI, 0.0)).norm() < 1e-13);
        assert!(res.error_estimate <= 1e-12);
        assert!(res.panels_used >= 1);
        let o = brute_force_oracle(&|_, _| c(1.0, 0.0), 64, 64);
        assert!((o.value.re - 1.5 * PI).abs() < 1e-13 && o.oracle);
    }

    #[test]
    fn separable_exponential() {
        let w = 50.0;
        let f = |r: f64, _t: f64| Complex64::from_polar(1.0, -2.0 * PI * w * r);
        let res = integrate_oscillatory(&f, 2.0 * PI * w, 1e-8).unwrap();
        let e = |r: f64| Complex64::from_polar(1.0, -2.0 * PI * w * r);
        let want = (e(2.0) - e(0.5)) / c(0.0, -2.0 * PI * w) * PI;
        assert!((res.value - want).norm() < 1e-8);
    }

    #[test]
    fn bessel_type_integrand_matches_closed_form() {
        // ∫₀^π e^{−2πi·40 r cos θ} sin θ dθ = 2 sin(80πr)/(80πr); integrate against r ∈ [1/2, 2].
        let f = |r: f64, t: f64| Complex64::from_polar(t.sin(), -2.0 * PI * 40.0 * r * t.cos());
        let res = integrate_oscillatory(&f, 2.0 * PI * 40.0 * 2.0, 1e-6).unwrap();
        let g = |r: f64| c(2.0 * (80.0 * PI * r).sin() / (80.0 * PI * r), 0.0);
        let (want, _, _) = adaptive_1d(&g, 0.5, 2.0, 64, 1e-14, 30);
        assert!((res.value - want).norm() <= 1e-6 * want.norm().max(1e-3));
    }

    #[test]
    fn simpson_is_fourth_order() {
        let f = |r: f64, t: f64| Complex64::from_polar((r * t).cos(), 3.0 * r + t);
        let v: Vec<Complex64> = [64, 128, 256].iter().map(|&n| brute_force_oracle(&f, n, n).value).collect();
        let ratio = (v[0] - v[1]).norm() / (v[1] - v[2]).norm();
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
        let odd = brute_force_oracle(&|r: f64, t: f64| c(r * t.cos(), 0.0), 100, 100);
        assert!(odd.value.norm() < 1e-13);
    }

    #[test]
    fn budget_cap() {
        let opts = Quad2dOptions { max_panels: 100, ..Default::default() };
        let r = integrate_oscillatory_with(&|_, _| c(1.0, 0.0), 1e4, 1e-6, &opts);
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }

    fn bump(r: f64) -> f64 {
        crate::bumps::eta_unchecked(r)
    }

    fn fixed_gl<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, n: usize) -> Complex64 {
        let h = (b - a) / n as f64;
        let v: Vec<Complex64> = (0..n).map(|i| gl_1d(f, a + i as f64 * h, a + (i + 1) as f64 * h)).collect();
        pairwise_sum(&v)
    }

    #[test]
    fn windowed_equals_direct_on_stationary_phase() {
        // Φ(r) = ω (r − 1)²: stationary at r = 1 with Φ″ = 2ω.
        for &om in &[300.0, 3000.0, 30000.0] {
            let phase = |r: f64| (om * (r - 1.0).powi(2), 2.0 * om * (r - 1.0), 2.0 * om);
            let amp = |r: f64| c(bump(r) * r.powf(-1.25), 0.0);
            let got = integrate_windowed(&phase, &amp, 0.5, 2.0, 0.0, 1e-12, &WindowOptions::default());
            let full = |r: f64| amp(r) * Complex64::from_polar(1.0, -2.0 * PI * phase(r).0);
            // fixed composite GL16 at about one radian per panel
            let n = (2.0 * PI * 2.0 * om * 1.5) as usize + 64;
            let want = fixed_gl(&full, 0.5, 2.0, n);
            assert!((got.value - want).norm() < 1e-9 * want.norm(), "om {om}: {} vs {}", got.value, want);
        }
    }

    #[test]
    fn windowed_with_inflection() {
        // Φ′ changes monotonicity inside the interval.
        let om = 2000.0;
        let phase = |r: f64| {
            let x = r - 1.2;
            (om * (x.powi(3) / 3.0 - 0.04 * x), om * (x * x - 0.04), om * 2.0 * x)
        };
        let amp = |r: f64| c(bump(r), 0.3 * bump(r));
        let got = integrate_windowed(&phase, &amp, 0.5, 2.0, 0.0, 1e-12, &WindowOptions::default());
        let full = |r: f64| amp(r) * Complex64::from_polar(1.0, -2.0 * PI * phase(r).0);
        let want = fixed_gl(&full, 0.5, 2.0, 20_000);
        assert!((got.value - want).norm() < 1e-9 * want.norm().max(1e-6), "{} vs {}", got.value, want);
    }

    #[test]
    fn windowed_nonstationary_is_negligible() {
        let phase = |r: f64| (5000.0 * r, 5000.0, 0.0);
        let amp = |r: f64| c(bump(r), 0.0);
        let got = integrate_windowed(&phase, &amp, 0.5, 2.0, 0.0, 1e-12, &WindowOptions::default());
        assert_eq!(got.value, c(0.0, 0.0));
    }
}
