//! Smooth cutoffs: the dyadic bump η = ζ∘log₂, the shift bump κ, the patch
//! functions χ_j, and the constants ε, ε₁, ε₂ that size the patches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transition function: 1 at 0, 0 for |x| ≥ 1, with ζ(x) + ζ(x − 1) = 1 on [0, 1].
#[inline]
pub fn zeta(x: f64) -> f64 {
    let y = x.abs();
    if y >= 1.0 {
        return 0.0;
    }
    if y == 0.0 {
        return 1.0;
    }
    // e^{1/(y−1)} / (e^{1/(y−1)} + e^{−1/y}), rewritten to avoid 0/0 at the ends.
    let e = 1.0 / (1.0 - y) - 1.0 / y;
    1.0 / (1.0 + e.exp())
}

/// η(r) = ζ(log₂ r), supported on [1/2, 2].
pub fn eta(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveRadius(r));
    }
    Ok(eta_unchecked(r))
}

#[inline]
pub fn eta_unchecked(r: f64) -> f64 {
    if r <= 0.5 || r >= 2.0 {
        return 0.0;
    }
    zeta(r.log2())
}

/// Bump supported on (−1, 1).
#[inline]
fn psi(x: f64) -> f64 {
    let q = 1.0 - x * x;
    if q <= 0.0 {
        return 0.0;
    }
    (-1.0 / q).exp()
}

pub const KAPPA_PERIOD: f64 = 4.0 / 3.0;

/// κ(x) = ψ(x) / Σ_z ψ(x + 4z/3): supported in [−1, 1], and its 4/3-shifts sum to 1.
pub fn kappa(x: f64) -> f64 {
    let num = psi(x);
    if num == 0.0 {
        return 0.0;
    }
    let z_lo = ((-1.0 - x) / KAPPA_PERIOD).ceil() as i64;
    let z_hi = ((1.0 - x) / KAPPA_PERIOD).floor() as i64;
    let den: f64 = (z_lo..=z_hi).map(|z| psi(x + z as f64 * KAPPA_PERIOD)).sum();
    num / den
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonConstants {
    pub epsilon: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub k2: f64,
    pub k3: f64,
    pub beta: f64,
}

/// The admissible upper limit for ε given k₂, k₃, β (ε must be strictly below it).
pub fn epsilon_bound(k2: f64, k3: f64, beta: f64) -> f64 {
    let t1 = 1.0 / (2.0 * 2f64.sqrt());
    let t2 = 1.0 / (4.0 * k2 * (3.0 * beta + 7.0));
    let t3 = beta / ((4.0 + 3.0 * k2) * 2f64.powf(beta));
    let t4 = 1.0 / (8.0 * k2 * k3 * (3.0 * beta + 7.0));
    t1.min(t2).min(t3).min(t4)
}

/// ε = safety × [`epsilon_bound`], with ε₁, ε₂ derived from it.
pub fn compute_epsilons(k2: f64, k3: f64, beta: f64, safety: f64) -> Result<EpsilonConstants> {
    for (name, v) in [("k2", k2), ("k3", k3), ("beta", beta)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
        }
    }
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::InvalidParams(format!("safety must lie in (0, 1), got {safety}")));
    }
    Ok(EpsilonConstants::with_epsilon(safety * epsilon_bound(k2, k3, beta), k2, k3, beta))
}

impl EpsilonConstants {
    /// Builds the constants from an arbitrary ε without checking it against
    /// the bound. Used to probe what happens when ε is too large.
    pub fn with_epsilon(epsilon: f64, k2: f64, k3: f64, beta: f64) -> Self {
        let b1 = beta * (beta + 1.0);
        let epsilon1 = (epsilon / (6.0 * b1 * 2f64.powf(beta + 2.0)))
            .min(epsilon / (4.0 * b1 * (beta + 2.0) * 2f64.powf(beta + 3.0)))
            .min(epsilon / 8.0);
        EpsilonConstants { epsilon, epsilon1, epsilon2: epsilon / 8.0, k2, k3, beta }
    }
}

/// Integer patch centre (ε₁ j₁, ε₂ j₂).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatchIndex {
    pub j1: i64,
    pub j2: i64,
}

impl PatchIndex {
    pub fn center(&self, eps: &EpsilonConstants) -> (f64, f64) {
        (self.j1 as f64 * eps.epsilon1, self.j2 as f64 * eps.epsilon2)
    }

    /// Closed rectangle containing supp χ_j.
    pub fn support(&self, eps: &EpsilonConstants) -> ((f64, f64), (f64, f64)) {
        let (c1, c2) = self.center(eps);
        let (h1, h2) = (0.75 * eps.epsilon1, 0.75 * eps.epsilon2);
        ((c1 - h1, c1 + h1), (c2 - h2, c2 + h2))
    }
}

/// χ_j(r, θ) = κ(4(r − ε₁j₁)/(3ε₁)) κ(4(θ − ε₂j₂)/(3ε₂)).
pub fn chi(j: PatchIndex, eps: &EpsilonConstants, r: f64, theta: f64) -> f64 {
    // r/ε₁ − j₁ rather than (r − ε₁j₁)/ε₁: neighbouring patches then see
    // arguments exactly 4/3 apart, which keeps the partition exact to rounding.
    let a = kappa(4.0 * (r / eps.epsilon1 - j.j1 as f64) / 3.0);
    if a == 0.0 {
        return 0.0;
    }
    a * kappa(4.0 * (theta / eps.epsilon2 - j.j2 as f64) / 3.0)
}

/// The index set J of patches meeting [1/2, 2] × [0, π]. It depends on ε₁, ε₂
/// only, never on the dyadic scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchSet {
    pub j1: (i64, i64),
    pub j2: (i64, i64),
}

impl PatchSet {
    pub fn new(eps: &EpsilonConstants) -> Self {
        let range = |lo: f64, hi: f64, step: f64| (((lo - step) / step).ceil() as i64, ((hi + step) / step).floor() as i64);
        PatchSet {
            j1: range(0.5, 2.0, eps.epsilon1),
            j2: range(0.0, std::f64::consts::PI, eps.epsilon2),
        }
    }

    pub fn len(&self) -> u64 {
        ((self.j1.1 - self.j1.0 + 1) * (self.j2.1 - self.j2.0 + 1)) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, j: PatchIndex) -> bool {
        (self.j1.0..=self.j1.1).contains(&j.j1) && (self.j2.0..=self.j2.1).contains(&j.j2)
    }

    /// Patches in J whose support contains (r, θ); at most four.
    pub fn patches_at(&self, eps: &EpsilonConstants, r: f64, theta: f64) -> Vec<PatchIndex> {
        let near = |x: f64, step: f64, (lo, hi): (i64, i64)| {
            let c = (x / step).round() as i64;
            (c - 1..=c + 1).filter(move |j| *j >= lo && *j <= hi && (x - *j as f64 * step).abs() <= 0.75 * step)
        };
        let mut out = Vec::with_capacity(4);
        for j1 in near(r, eps.epsilon1, self.j1) {
            for j2 in near(theta, eps.epsilon2, self.j2) {
                out.push(PatchIndex { j1, j2 });
            }
        }
        out
    }

    /// The patch whose centre is nearest to (r, θ), clamped into J.
    pub fn nearest(&self, eps: &EpsilonConstants, r: f64, theta: f64) -> PatchIndex {
        PatchIndex {
            j1: ((r / eps.epsilon1).round() as i64).clamp(self.j1.0, self.j1.1),
            j2: ((theta / eps.epsilon2).round() as i64).clamp(self.j2.0, self.j2.1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta(0.0), 1.0);
        assert_eq!(zeta(1.0), 0.0);
        assert_eq!(zeta(-1.5), 0.0);
        assert!((zeta(0.3) + zeta(0.3 - 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(1.0).unwrap(), 1.0);
        assert_eq!(eta(2.0).unwrap(), 0.0);
        assert_eq!(eta(0.5).unwrap(), 0.0);
        let s: f64 = (-3..=3).map(|l| eta(2f64.powi(l) * 3.7).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(eta(0.0).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(5.0), 0.0);
        assert_eq!(kappa(0.0), 1.0);
        // two overlapping copies of equal height
        assert!((kappa(2.0 / 3.0) - 0.5).abs() < 1e-15);
        let s = kappa(0.2) + kappa(0.2 + KAPPA_PERIOD) + kappa(0.2 - KAPPA_PERIOD);
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(kappa(1.0), 0.0);
        assert_eq!(kappa(-1.0), 0.0);
    }

    #[test]
    fn epsilon_arithmetic() {
        let e = compute_epsilons(2.0, 1.0, 1.0, 0.5).unwrap();
        assert!((epsilon_bound(2.0, 1.0, 1.0) - 1.0 / 160.0).abs() < 1e-17);
        assert!((e.epsilon - 1.0 / 320.0).abs() < 1e-17);
        assert!((e.epsilon2 - 1.0 / 2560.0).abs() < 1e-17);
        assert!((e.epsilon1 - e.epsilon / 384.0).abs() < 1e-19);
        let e4 = compute_epsilons(2.0, 1.0, 4.0, 0.5).unwrap();
        assert!((e4.epsilon - 0.5 / 304.0).abs() < 1e-17);
        assert!(compute_epsilons(2.0, 1.0, 1.0, 1.0).is_err());
        assert!(compute_epsilons(0.0, 1.0, 1.0, 0.5).is_err());
        assert!(compute_epsilons(2.0, -1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn chi_examples() {
        let eps = compute_epsilons(2.0, 1.0, 1.0, 0.5).unwrap();
        let j = PatchIndex { j1: 100_000, j2: 1000 };
        let (c1, c2) = j.center(&eps);
        assert_eq!(chi(j, &eps, c1, c2), kappa(0.0).powi(2));
        assert_eq!(chi(j, &eps, c1 + eps.epsilon1, c2), 0.0);
    }

    #[test]
    fn chi_partition_at_domain_corners() {
        let eps = compute_epsilons(2.0, 1.0, 1.0, 0.5).unwrap();
        let set = PatchSet::new(&eps);
        for (r, t) in [(0.5, 0.0), (2.0, std::f64::consts::PI), (1.0, 1.0), (0.5, std::f64::consts::PI)] {
            let s: f64 = set.patches_at(&eps, r, t).iter().map(|j| chi(*j, &eps, r, t)).sum();
            assert!((s - 1.0).abs() < 1e-12, "{r} {t} {s}");
        }
    }
}
