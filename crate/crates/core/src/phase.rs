//! The rescaled phase on one dyadic piece,
//!
//! g(r, θ) = 2^{−l}|ξ′| r cos θ + ξ_last φ(2^{−l} r) + 2^{βl} r^{−β},
//!
//! its derivatives, the frequency scale λ, a brute-force check of the lower
//! bound max{|g_r|, |g_θ|, |g_rr|, |g_θθ|} ≥ ελ, and patch classification.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bumps::{EpsilonConstants, PatchIndex, PatchSet};
use crate::error::{Error, Result};
use crate::params::OperatorParams;
use crate::profiles::RadialProfile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub xi_prime: Vec<f64>,
    pub xi_last: f64,
}

impl Frequency {
    pub fn new(xi_prime: Vec<f64>, xi_last: f64) -> Self {
        Frequency { xi_prime, xi_last }
    }

    /// A frequency in ℝ³.
    pub fn planar(x1: f64, x2: f64, x3: f64) -> Self {
        Frequency { xi_prime: vec![x1, x2], xi_last: x3 }
    }

    pub fn prime_norm(&self) -> f64 {
        self.xi_prime.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.prime_norm().powi(2) + self.xi_last * self.xi_last).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.xi_last.is_finite() && self.xi_prime.iter().all(|x| x.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDerivatives {
    pub g: f64,
    pub g_r: f64,
    pub g_theta: f64,
    pub g_rr: f64,
    pub g_thetatheta: f64,
    pub g_rrr: f64,
    pub g_rtheta: f64,
    /// Identically zero: g_r depends on θ only through A cos θ, and g_rr not at all.
    pub g_rrtheta: f64,
}

/// Phase of one dyadic piece with the frequency reduced to (A, ξ_last).
#[derive(Clone, Copy, Debug)]
pub(crate) struct ScaledPhase<'a> {
    pub profile: &'a RadialProfile,
    /// 2^{−l}|ξ′|
    pub a: f64,
    pub xi_last: f64,
    /// 2^{−l}
    pub s: f64,
    /// 2^{βl}
    pub b: f64,
    pub beta: f64,
}

impl<'a> ScaledPhase<'a> {
    pub fn new(params: &OperatorParams, profile: &'a RadialProfile, prime_norm: f64, xi_last: f64, l: i32) -> Self {
        let s = 2f64.powi(-l);
        ScaledPhase {
            profile,
            a: s * prime_norm,
            xi_last,
            s,
            b: 2f64.powf(params.beta * l as f64),
            beta: params.beta,
        }
    }

    pub fn derivatives(&self, r: f64, theta: f64) -> PhaseDerivatives {
        let p = self.profile.eval_unchecked(self.s * r);
        let (sn, cs) = theta.sin_cos();
        let be = self.beta;
        let osc = self.b * r.powf(-be);
        let x = self.xi_last;
        let s = self.s;
        PhaseDerivatives {
            g: self.a * r * cs + x * p.phi + osc,
            g_r: self.a * cs + x * s * p.d1 - be * osc / r,
            g_theta: -self.a * r * sn,
            g_rr: x * s * s * p.d2 + be * (be + 1.0) * osc / (r * r),
            g_thetatheta: -self.a * r * cs,
            g_rrr: x * s * s * s * p.d3 - be * (be + 1.0) * (be + 2.0) * osc / (r * r * r),
            g_rtheta: -self.a * sn,
            g_rrtheta: 0.0,
        }
    }

    #[inline]
    pub fn value(&self, r: f64, theta: f64) -> f64 {
        let phi = self.profile.eval_unchecked(self.s * r).phi;
        self.a * r * theta.cos() + self.xi_last * phi + self.b * r.powf(-self.beta)
    }

    /// The θ-independent parts of g_r and g_rr at r.
    #[inline]
    pub fn radial_parts(&self, r: f64) -> (f64, f64) {
        let p = self.profile.eval_unchecked(self.s * r);
        let be = self.beta;
        let osc = self.b * r.powf(-be);
        (
            self.xi_last * self.s * p.d1 - be * osc / r,
            self.xi_last * self.s * self.s * p.d2 + be * (be + 1.0) * osc / (r * r),
        )
    }
}

/// g and its partial derivatives at (r, θ) ∈ [1/2, 2] × [0, π].
pub fn phase_and_derivatives(
    params: &OperatorParams,
    profile: &RadialProfile,
    xi: &Frequency,
    l: i32,
    r: f64,
    theta: f64,
) -> Result<PhaseDerivatives> {
    if !(0.5..=2.0).contains(&r) {
        return Err(Error::DomainError(r));
    }
    Ok(ScaledPhase::new(params, profile, xi.prime_norm(), xi.xi_last, l).derivatives(r, theta))
}

/// sup |φ″| and sup |φ‴| over the annulus [2^{−l−1}, 2^{−l+1}].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileSups {
    pub d2: f64,
    pub d3: f64,
}

pub fn profile_sups(profile: &RadialProfile, l: i32, n_samples: usize) -> ProfileSups {
    let n = n_samples.max(64);
    let lo = 2f64.powi(-l - 1);
    let span = 4f64.ln();
    let xs: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { 4.0 * lo } else { lo * (span * i as f64 / (n - 1) as f64).exp() })
        .collect();
    let sup_of = |f: &dyn Fn(f64) -> f64| {
        let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let (imax, vmax) = vals
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let a = xs[imax.saturating_sub(1)];
        let b = xs[(imax + 1).min(n - 1)];
        vmax.max(golden_max(f, a, b, 60))
    };
    ProfileSups {
        d2: sup_of(&|x| profile.eval_unchecked(x).d2.abs()),
        d3: sup_of(&|x| profile.eval_unchecked(x).d3.abs()),
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

pub fn lambda_from_sups(params: &OperatorParams, prime_norm: f64, xi_last: f64, l: i32, sups: ProfileSups) -> f64 {
    let s = 2f64.powi(-l);
    let x = xi_last.abs();
    2f64.powf(params.beta * l as f64)
        .max(s * prime_norm)
        .max(x * s * s * sups.d2)
        .max(x * s * s * s * sups.d3)
}

/// λ(ξ, l) = max{2^{βl}, 2^{−l}|ξ′|, |ξ_last| 2^{−2l} sup|φ″|, |ξ_last| 2^{−3l} sup|φ‴|}.
pub fn lambda_scale(params: &OperatorParams, profile: &RadialProfile, xi: &Frequency, l: i32, n_sup_samples: usize) -> f64 {
    let sups = profile_sups(profile, l, n_sup_samples);
    lambda_from_sups(params, xi.prime_norm(), xi.xi_last, l, sups)
}

/// Default sample count for the suprema in λ.
pub const SUP_SAMPLES: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub min_ratio: f64,
    pub worst_point: (f64, f64),
    pub lambda: f64,
    pub epsilon: f64,
    pub grid: (usize, usize),
    pub pass: bool,
}

/// Evaluates max{|g_r|, |g_θ|, |g_rr|, |g_θθ|}/(ελ) on a uniform grid over
/// [1/2, 2] × [0, π] and reports the minimum.
pub fn check_lemma_lower_bound(
    params: &OperatorParams,
    profile: &RadialProfile,
    xi: &Frequency,
    l: i32,
    eps: &EpsilonConstants,
    grid: (usize, usize),
) -> LemmaReport {
    let (nr, nt) = (grid.0.max(2), grid.1.max(2));
    let ph = ScaledPhase::new(params, profile, xi.prime_norm(), xi.xi_last, l);
    let lambda = lambda_scale(params, profile, xi, l, SUP_SAMPLES);
    let trig: Vec<(f64, f64)> = (0..nt).map(|j| (PI * j as f64 / (nt - 1) as f64).sin_cos()).collect();
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for i in 0..nr {
        let r = 0.5 + 1.5 * i as f64 / (nr - 1) as f64;
        let (gr0, grr) = ph.radial_parts(r);
        let ar = ph.a * r;
        for (j, &(sn, cs)) in trig.iter().enumerate() {
            let m = (gr0 + ph.a * cs).abs().max((ar * sn).abs()).max(grr.abs()).max((ar * cs).abs());
            if m < best.0 {
                best = (m, (r, PI * j as f64 / (nt - 1) as f64));
            }
        }
    }
    let min_ratio = best.0 / (eps.epsilon * lambda);
    LemmaReport {
        min_ratio,
        worst_point: best.1,
        lambda,
        epsilon: eps.epsilon,
        grid: (nr, nt),
        pass: min_ratio >= 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    CaseR1,
    CaseTheta1,
    CaseR2,
    CaseTheta2,
    TrivialBound,
}

impl CaseTag {
    pub const ALL: [CaseTag; 5] = [CaseTag::CaseR1, CaseTag::CaseTheta1, CaseTag::CaseR2, CaseTag::CaseTheta2, CaseTag::TrivialBound];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// First derivative (in the order g_r, g_θ, g_rr, g_θθ) whose magnitude is at
/// least ελ/2 on an n_check × n_check sample of the patch support, clipped to
/// [1/2, 2] × [0, π].
pub fn classify_patch(
    params: &OperatorParams,
    profile: &RadialProfile,
    xi: &Frequency,
    l: i32,
    j: PatchIndex,
    eps: &EpsilonConstants,
    n_check: usize,
) -> CaseTag {
    let ph = ScaledPhase::new(params, profile, xi.prime_norm(), xi.xi_last, l);
    let lambda = lambda_scale(params, profile, xi, l, SUP_SAMPLES);
    classify_with(&ph, lambda, j, eps, n_check)
}

fn classify_with(ph: &ScaledPhase, lambda: f64, j: PatchIndex, eps: &EpsilonConstants, n_check: usize) -> CaseTag {
    let n = n_check.max(2);
    let ((r0, r1), (t0, t1)) = j.support(eps);
    let (r0, r1) = (r0.max(0.5), r1.min(2.0));
    let (t0, t1) = (t0.max(0.0), t1.min(PI));
    let thresh = 0.5 * eps.epsilon * lambda;
    let mut ok = [true; 4];
    for a in 0..n {
        let r = r0 + (r1 - r0) * a as f64 / (n - 1) as f64;
        for b in 0..n {
            let t = t0 + (t1 - t0) * b as f64 / (n - 1) as f64;
            let d = ph.derivatives(r, t);
            for (k, v) in [d.g_r, d.g_theta, d.g_rr, d.g_thetatheta].into_iter().enumerate() {
                ok[k] &= v.abs() >= thresh;
            }
        }
    }
    match ok.iter().position(|&x| x) {
        Some(0) => CaseTag::CaseR1,
        Some(1) => CaseTag::CaseTheta1,
        Some(2) => CaseTag::CaseR2,
        Some(3) => CaseTag::CaseTheta2,
        _ => CaseTag::TrivialBound,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseHistogram {
    /// counts for CaseR1, CaseTheta1, CaseR2, CaseTheta2, TrivialBound
    pub counts: [u64; 5],
    pub patches: u64,
}

/// Classifies the patches nearest to an n_grid × n_grid lattice of points in
/// [1/2, 2] × [0, π], plus the patch at the point where the lemma bound is
/// tightest. The full patch set has ~10⁹ members, so it is sampled.
pub fn classify_sweep(
    params: &OperatorParams,
    profile: &RadialProfile,
    xi: &Frequency,
    l: i32,
    eps: &EpsilonConstants,
    n_grid: usize,
    n_check: usize,
) -> CaseHistogram {
    let ph = ScaledPhase::new(params, profile, xi.prime_norm(), xi.xi_last, l);
    let lambda = lambda_scale(params, profile, xi, l, SUP_SAMPLES);
    let set = PatchSet::new(eps);
    let n = n_grid.max(2);
    let mut js: Vec<PatchIndex> = Vec::with_capacity(n * n + 1);
    for a in 0..n {
        for b in 0..n {
            let r = 0.5 + 1.5 * a as f64 / (n - 1) as f64;
            let t = PI * b as f64 / (n - 1) as f64;
            js.push(set.nearest(eps, r, t));
        }
    }
    let worst = check_lemma_lower_bound(params, profile, xi, l, eps, (101, 101)).worst_point;
    js.push(set.nearest(eps, worst.0, worst.1));
    js.sort();
    js.dedup();
    let mut counts = [0u64; 5];
    for j in &js {
        counts[classify_with(&ph, lambda, *j, eps, n_check).index()] += 1;
    }
    CaseHistogram { counts, patches: js.len() as u64 }
}
