//! The radial integrals left after the angular integral is done in closed form:
//!
//! R_k(x) = ∫_{1/2}^{2} e^{−2πi(x φ(sr) + b r^{−β})} 2π J_k(2πAr) η(r) r^{−α−1} dr,
//!
//! with s = 2^{−l}, b = 2^{βl}, A = s|ξ′|, for a whole arithmetic progression
//! of x = ξ_last at once. Members of a progression differ in phase by
//! (x − x′)φ(sr), so nearby members share one window and one node layout,
//! and the factor e^{−2πi x φ(sr)} is advanced by a recurrence.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::bumps::eta_unchecked;
use crate::params::OperatorParams;
use crate::profiles::RadialProfile;
use crate::quadrature::{adaptive_leaves, gl16, merge_partitions, panel_count, plan_window, window_weight, WindowOptions, WindowPlan};
use crate::special::{bessel_j_into, hankel_modulation, hankel_threshold};

const R_LO: f64 = 0.5;
const R_HI: f64 = 2.0;

#[derive(Clone, Copy, Debug)]
pub struct Progression {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Progression {
    pub fn single(x: f64) -> Self {
        Progression { start: x, step: 0.0, len: 1 }
    }

    #[inline]
    pub fn at(&self, j: usize) -> f64 {
        self.start + self.step * j as f64
    }
}

pub struct RadialBatch {
    /// Row-major: entry j·K + i is R_{ks[i]}(x_j).
    pub values: Vec<Complex64>,
    pub error: f64,
    pub panels: u64,
}

pub struct RadialProblem<'a> {
    pub profile: &'a RadialProfile,
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
    pub b: f64,
    pub a: f64,
    /// Distinct harmonics, all ≥ 1.
    pub ks: Vec<u32>,
    pub window: WindowOptions,
}

// How the Bessel factor is folded into the phase.
#[derive(Clone, Copy, PartialEq)]
enum Family {
    /// J_k kept in the amplitude.
    Whole,
    /// π M_k(2πAr) with phase B − Ar.
    Outgoing,
    /// π conj(M_k(2πAr)) with phase B + Ar.
    Incoming,
}

impl Family {
    fn linear(self) -> f64 {
        match self {
            Family::Whole => 0.0,
            Family::Outgoing => -1.0,
            Family::Incoming => 1.0,
        }
    }
}

impl<'a> RadialProblem<'a> {
    pub fn new(params: &OperatorParams, profile: &'a RadialProfile, prime_norm: f64, l: i32, ks: Vec<u32>, window: WindowOptions) -> Self {
        let s = 2f64.powi(-l);
        RadialProblem {
            profile,
            alpha: params.alpha,
            beta: params.beta,
            s,
            b: 2f64.powf(params.beta * l as f64),
            a: s * prime_norm,
            ks: ks.into_iter().filter(|&k| k >= 1).collect(),
            window,
        }
    }

    /// (P, P′, P″) with P(r) = φ(sr).
    #[inline]
    fn p(&self, r: f64) -> (f64, f64, f64) {
        let v = self.profile.eval_unchecked(self.s * r);
        (v.phi, self.s * v.d1, self.s * self.s * v.d2)
    }

    /// x-independent part of the phase and its derivatives.
    #[inline]
    fn q(&self, fam: Family, r: f64) -> (f64, f64, f64) {
        let be = self.beta;
        let osc = self.b * r.powf(-be);
        let c = fam.linear() * self.a;
        (osc + c * r, -be * osc / r + c, be * (be + 1.0) * osc / (r * r))
    }

    fn amplitudes(&self, fam: Family, r: f64, jbuf: &mut [f64], out: &mut [Complex64]) {
        let w = eta_unchecked(r) * r.powf(-self.alpha - 1.0);
        let x = 2.0 * PI * self.a * r;
        match fam {
            Family::Whole => {
                bessel_j_into(*self.ks.iter().max().unwrap(), x, jbuf);
                for (o, &k) in out.iter_mut().zip(&self.ks) {
                    *o = Complex64::new(2.0 * PI * w * jbuf[k as usize], 0.0);
                }
            }
            Family::Outgoing | Family::Incoming => {
                for (o, &k) in out.iter_mut().zip(&self.ks) {
                    let m = hankel_modulation(k, x) * (PI * w);
                    *o = if fam == Family::Outgoing { m } else { m.conj() };
                }
            }
        }
    }

    fn scan(&self) -> Vec<f64> {
        let n = self.window.n_scan.max(9);
        (0..n).map(|i| R_LO + (R_HI - R_LO) * i as f64 / (n - 1) as f64).collect()
    }

    /// R_k(x_j) for every member of `xs`, each to absolute accuracy ~`tol`.
    pub fn evaluate(&self, xs: Progression, tol: f64) -> RadialBatch {
        let nk = self.ks.len();
        let mut batch = RadialBatch { values: vec![Complex64::new(0.0, 0.0); xs.len * nk], error: 0.0, panels: 0 };
        if nk == 0 || self.a == 0.0 || xs.len == 0 {
            // J_k(0) = 0 for k ≥ 1
            return batch;
        }
        let kmax = *self.ks.iter().max().unwrap();
        let xmax = xs.at(0).abs().max(xs.at(xs.len - 1).abs());
        let grid = self.scan();
        let max_p1 = grid.iter().map(|&r| self.p(r).1.abs()).fold(0.0, f64::max);
        let max_b1 = xmax * max_p1 + self.beta * self.b * R_LO.powf(-self.beta - 1.0);
        let split = PI * self.a >= hankel_threshold(kmax) && self.a + max_b1 > 2.0 * self.window.t_floor;
        if split {
            self.family(Family::Outgoing, xs, tol / 2.0, &grid, &mut batch);
            self.family(Family::Incoming, xs, tol / 2.0, &grid, &mut batch);
        } else {
            self.family(Family::Whole, xs, tol, &grid, &mut batch);
        }
        batch
    }

    fn family(&self, fam: Family, xs: Progression, tol: f64, grid: &[f64], batch: &mut RadialBatch) {
        let band = if fam == Family::Whole { self.a } else { 0.0 };
        let t0 = self.window.t_floor + band;
        let (mut max_p1, mut max_p2) = (0.0f64, 0.0f64);
        for &r in grid {
            let (_, p1, p2) = self.p(r);
            max_p1 = max_p1.max(p1.abs());
            max_p2 = max_p2.max(p2.abs());
        }
        // Work estimate per member (cycles covered), None when nothing survives the window.
        let work: Vec<Option<(f64, f64)>> = (0..xs.len)
            .map(|j| {
                let x = xs.at(j);
                let phase = |r: f64| {
                    let (p, p1, p2) = self.p(r);
                    let (q, q1, q2) = self.q(fam, r);
                    (x * p + q, x * p1 + q1, x * p2 + q2)
                };
                match plan_window(&phase, R_LO, R_HI, t0, 0.0, &self.window) {
                    WindowPlan::Empty { .. } => None,
                    WindowPlan::Direct { max_d1 } => Some((max_d1 + band, R_HI - R_LO)),
                    WindowPlan::Windowed { level, intervals } => {
                        Some((2.0 * level + band, intervals.iter().map(|(u, v)| v - u).sum()))
                    }
                }
            })
            .collect();
        // Sharing a node costs one amplitude evaluation plus a cheap update per member.
        let node_cost = |m: usize| 1.0 + m as f64 / 40.0;
        let mut j0 = 0;
        while j0 < xs.len {
            let Some(first) = work[j0] else {
                j0 += 1;
                continue;
            };
            let mut j1 = j0;
            let (mut fmax, mut lmax, mut singles) = (first.0, first.1, first.0 * first.1 * node_cost(1));
            while j1 + 1 < xs.len {
                let Some(next) = work[j1 + 1] else { break };
                let m = j1 + 2 - j0;
                let d1 = 0.5 * (xs.at(j1 + 1) - xs.at(j0)).abs() * max_p1;
                let (f, len) = (fmax.max(next.0), lmax.max(next.1));
                let shared = (f + 2.0 * d1) * len * node_cost(m);
                let alone = singles + next.0 * next.1 * node_cost(1);
                if shared > alone {
                    break;
                }
                (fmax, lmax, singles) = (f, len, alone);
                j1 += 1;
            }
            self.sub_batch(fam, xs, j0, j1, band, (max_p1, max_p2), tol * (j1 - j0 + 1) as f64 / xs.len as f64, batch);
            j0 = j1 + 1;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn sub_batch(&self, fam: Family, xs: Progression, j0: usize, j1: usize, band: f64, max_p: (f64, f64), tol: f64, batch: &mut RadialBatch) {
        let nk = self.ks.len();
        let (x0, x1) = (xs.at(j0), xs.at(j1));
        let xr = 0.5 * (x0 + x1);
        let half = 0.5 * (x1 - x0).abs();
        let (d1, d2) = (half * max_p.0, half * max_p.1);
        let reference = |r: f64| {
            let (p, p1, p2) = self.p(r);
            let (q, q1, q2) = self.q(fam, r);
            (xr * p + q, xr * p1 + q1, xr * p2 + q2)
        };
        let t0 = self.window.t_floor + band;
        let (level, regions) = match plan_window(&reference, R_LO, R_HI, t0 + d1, d2, &self.window) {
            WindowPlan::Empty { .. } => return,
            WindowPlan::Direct { max_d1 } => (None, vec![(R_LO, R_HI, panel_count(max_d1 + d1 + band, R_HI - R_LO).max(4))]),
            WindowPlan::Windowed { level, intervals } => {
                let v = intervals.iter().map(|&(u, v)| (u, v, panel_count(2.0 * level + d1 + band, v - u).max(2))).collect();
                (Some(level), v)
            }
        };
        let weight = |r: f64| match level {
            None => 1.0,
            Some(t) => window_weight(reference(r).1.abs(), t),
        };
        let kmax = *self.ks.iter().max().unwrap() as usize;
        let mut jbuf = vec![0.0; kmax + 1];
        let mut amps = vec![Complex64::new(0.0, 0.0); nk];
        // Scalar proxy of member x used to lay out panels.
        let scratch = std::cell::RefCell::new((vec![0.0; kmax + 1], vec![Complex64::new(0.0, 0.0); nk]));
        let member = |x: f64| {
            let scratch = &scratch;
            move |r: f64| {
                let w = weight(r);
                if w == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let mut guard = scratch.borrow_mut();
                let (jb, am) = &mut *guard;
                self.amplitudes(fam, r, jb, am);
                let (p, _, _) = self.p(r);
                let (q, _, _) = self.q(fam, r);
                am.iter().sum::<Complex64>() * Complex64::from_polar(w, -2.0 * PI * (x * p + q))
            }
        };
        let total_len: f64 = regions.iter().map(|&(u, v, _)| v - u).sum();
        let g = gl16();
        for &(u, v, n_init) in &regions {
            let tol_r = tol * (v - u) / total_len;
            let depth = self.window.max_depth;
            let (lay0, e0) = adaptive_leaves(&member(x0), u, v, n_init, tol_r, depth);
            let layout = if j1 > j0 {
                let (lay1, e1) = adaptive_leaves(&member(x1), u, v, n_init, tol_r, depth);
                batch.error += e1;
                merge_partitions(&lay0, &lay1)
            } else {
                lay0
            };
            batch.error += e0;
            batch.panels += layout.len() as u64;
            for &(pu, pv) in &layout {
                let (c, h) = (0.5 * (pu + pv), 0.5 * (pv - pu));
                for i in 0..16 {
                    let r = c + h * g.x[i];
                    let w = weight(r);
                    if w == 0.0 {
                        continue;
                    }
                    self.amplitudes(fam, r, &mut jbuf, &mut amps);
                    let scale = w * h * g.w[i];
                    let (p, _, _) = self.p(r);
                    let (q, _, _) = self.q(fam, r);
                    let mut cur = Complex64::from_polar(scale, -2.0 * PI * (q + x0 * p));
                    let step = Complex64::from_polar(1.0, -2.0 * PI * xs.step * p);
                    for j in j0..=j1 {
                        let row = &mut batch.values[j * nk..(j + 1) * nk];
                        for (o, a) in row.iter_mut().zip(&amps) {
                            *o += a * cur;
                        }
                        cur *= step;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_1d;

    fn reference(pb: &RadialProblem, k: u32, x: f64) -> Complex64 {
        // plain adaptive quadrature of the unsplit integrand
        let f = |r: f64| {
            let j = crate::special::bessel_j_all(k, 2.0 * PI * pb.a * r)[k as usize];
            let (p, _, _) = pb.p(r);
            let (q, _, _) = pb.q(Family::Whole, r);
            Complex64::from_polar(2.0 * PI * j * eta_unchecked(r) * r.powf(-pb.alpha - 1.0), -2.0 * PI * (x * p + q))
        };
        let n = 20_000;
        let (v, _, _) = adaptive_1d(&f, R_LO, R_HI, n, 1e-13, 20);
        v
    }

    fn problem<'a>(profile: &'a RadialProfile, rho: f64, l: i32) -> RadialProblem<'a> {
        RadialProblem::new(&OperatorParams::default(), profile, rho, l, vec![1, 3], WindowOptions::default())
    }

    #[test]
    fn batch_matches_single_evaluations() {
        let prof = RadialProfile::monomial(3.0).unwrap();
        for &(rho, l) in &[(2.0, 0), (40.0, 1), (300.0, 2), (5.0, -1), (2000.0, 0), (900.0, 1)] {
            let pb = problem(&prof, rho, l);
            let xs = Progression { start: -7.0, step: 0.75, len: 21 };
            let batch = pb.evaluate(xs, 1e-12);
            for j in [0, 5, 13, 20] {
                let single = pb.evaluate(Progression::single(xs.at(j)), 1e-12);
                for i in 0..2 {
                    let (a, b) = (batch.values[j * 2 + i], single.values[i]);
                    assert!((a - b).norm() < 1e-9, "rho {rho} l {l} j {j}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn agrees_with_plain_quadrature() {
        let prof = RadialProfile::monomial(3.0).unwrap();
        for &(rho, l, x) in &[(2.0, 0, 3.0), (40.0, 1, -2.0), (300.0, 2, 50.0), (5.0, -1, 0.5), (2000.0, 0, 5.0), (900.0, 1, -300.0), (700.0, 0, -60.0)] {
            let pb = problem(&prof, rho, l);
            let got = pb.evaluate(Progression::single(x), 1e-12);
            for (i, &k) in pb.ks.iter().enumerate() {
                let want = reference(&pb, k, x);
                assert!((got.values[i] - want).norm() < 1e-9, "rho {rho} l {l} k {k}: {} vs {want}", got.values[i]);
            }
        }
    }

    #[test]
    fn zero_prime_frequency_is_zero() {
        let prof = RadialProfile::monomial(3.0).unwrap();
        let pb = problem(&prof, 0.0, 0);
        assert!(pb.evaluate(Progression::single(4.0), 1e-10).values.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }
}
