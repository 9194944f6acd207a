use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bumps::eta_unchecked;
use crate::error::{Error, Result};
use crate::kernel::KernelOmega;
use crate::params::OperatorParams;
use crate::profiles::RadialProfile;
use crate::quadrature::{gl16, pairwise_sum};

/// Which part of t-space the direct quadrature keeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialTruncation {
    /// Indicator of r_inner ≤ |t| ≤ r_outer.
    Sharp { r_inner: f64, r_outer: f64 },
    /// Σ_{l_min ≤ l ≤ l_max} η(2^l |t|), the cutoff matching a table built
    /// from the same dyadic pieces.
    Dyadic { l_min: i32, l_max: i32 },
}

impl RadialTruncation {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            RadialTruncation::Sharp { r_inner, r_outer } => (r_inner, r_outer),
            RadialTruncation::Dyadic { l_min, l_max } => (2f64.powi(-l_max - 1), 2f64.powi(1 - l_min)),
        }
    }

    fn weight(&self, r: f64) -> f64 {
        match *self {
            RadialTruncation::Sharp { .. } => 1.0,
            RadialTruncation::Dyadic { l_min, l_max } => (l_min..=l_max).map(|l| eta_unchecked(2f64.powi(l) * r)).sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RadialTruncation::Sharp { r_inner, r_outer } if !(0.0 < r_inner && r_inner < r_outer && r_outer.is_finite()) => Err(
                Error::InvalidParams(format!("need 0 < r_inner < r_outer, got [{r_inner}, {r_outer}]")),
            ),
            RadialTruncation::Dyadic { l_min, l_max } if l_min > l_max || l_min.abs().max(l_max.abs()) > 60 => {
                Err(Error::InvalidParams(format!("bad dyadic range [{l_min}, {l_max}]")))
            }
            _ => Ok(()),
        }
    }
}

/// Largest number of integrand evaluations a single call may request.
pub const DEFAULT_EVALUATION_CAP: u64 = 4_000_000_000;

/// Radial panel edges: `density` uniform panels in r merged with panels
/// uniform in r^{−β}, density/2 of them per cycle of e^{−2πi r^{−β}},
/// so the oscillation near the inner radius is resolved.
fn radial_edges(a: f64, b: f64, beta: f64, density: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..=density).map(|i| a + (b - a) * i as f64 / density as f64).collect();
    let (ua, ub) = (a.powf(-beta), b.powf(-beta));
    let cycles = ua - ub;
    let m = ((cycles * density as f64 / 2.0).ceil() as usize).max(density);
    e.extend((1..m).map(|i| (ua + (ub - ua) * i as f64 / m as f64).powf(-1.0 / beta)));
    e.sort_by(f64::total_cmp);
    e.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * b);
    e
}

/// ℛf at `x_points` by quadrature over t ∈ ℝ² in polar coordinates:
///
/// Σ f(x − (r cos u, r sin u, φ(r))) e^{−2πi r^{−β}} Ω(u) r^{−α−1} W(r) dr du
///
/// with GL16 on the radial panels of [`radial_edges`] and the periodic
/// trapezoid rule with max(64, 4·density) nodes in u.
#[allow(clippy::too_many_arguments)]
pub fn apply_direct<F>(
    f: &F,
    x_points: &[[f64; 3]],
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &KernelOmega,
    truncation: RadialTruncation,
    quad_density: usize,
    evaluation_cap: u64,
) -> Result<Vec<Complex64>>
where
    F: Fn([f64; 3]) -> Complex64 + Sync,
{
    params.validate()?;
    profile.validate()?;
    truncation.validate()?;
    if params.n != 2 {
        return Err(Error::InvalidParams("direct application is implemented on three-dimensional grids (n = 2)".into()));
    }
    if quad_density < 2 {
        return Err(Error::InvalidParams(format!("quad_density must be at least 2, got {quad_density}")));
    }
    let (a, b) = truncation.support();
    let edges = radial_edges(a, b, params.beta, quad_density);
    let rule = gl16();
    let n_u = (4 * quad_density).max(64);
    let requested = ((edges.len() - 1) * rule.x.len()) as u64 * n_u as u64 * x_points.len() as u64;
    if requested > evaluation_cap {
        return Err(Error::BudgetExceeded { requested, cap: evaluation_cap });
    }

    // Radial nodes with everything but f folded into the weight.
    let mut radial: Vec<(f64, f64, Complex64)> = Vec::new();
    for w in edges.windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in rule.x.iter().zip(&rule.w) {
            let r = c + h * x;
            let weight = truncation.weight(r);
            if weight == 0.0 {
                continue;
            }
            let amp = h * wt * weight * r.powf(-params.alpha - 1.0);
            let k = Complex64::from_polar(amp, -2.0 * PI * r.powf(-params.beta));
            radial.push((r, profile.eval_unchecked(r).phi, k));
        }
    }
    let du = 2.0 * PI / n_u as f64;
    let angular: Vec<(f64, f64, f64)> = (0..n_u)
        .map(|j| {
            let u = j as f64 * du;
            (u.cos(), u.sin(), omega.eval(u) * du)
        })
        .collect();

    Ok(x_points
        .par_iter()
        .map(|x| {
            let terms: Vec<Complex64> = radial
                .iter()
                .map(|&(r, phi, k)| {
                    let s: Vec<Complex64> = angular
                        .iter()
                        .map(|&(c, s, w)| f([x[0] - r * c, x[1] - r * s, x[2] - phi]) * w)
                        .collect();
                    pairwise_sum(&s) * k
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect())
}

/// Σ_{z ∈ ℤ³} e^{−π|x − zL|²/w²} e^{2πi c·x}, with c a multiple of 1/L so the
/// product is L-periodic. Each axis is reduced to [−L/2, L/2) and summed over
/// three images, which is exact to double precision when w ≤ L/4.
pub fn periodized_gaussian(x: [f64; 3], box_length: f64, width: f64, carrier: [f64; 3]) -> Complex64 {
    let g: f64 = x.iter().map(|&xa| periodic_gaussian_1d(xa, box_length, width)).product();
    let ph = 2.0 * PI * (carrier[0] * x[0] + carrier[1] * x[1] + carrier[2] * x[2]);
    Complex64::from_polar(g, ph)
}

/// Σ_z e^{−π(y − zL)²/w²} over the three images nearest to y.
pub fn periodic_gaussian_1d(y: f64, box_length: f64, width: f64) -> f64 {
    let y = y - box_length * (y / box_length).round();
    (-1..=1)
        .map(|z| {
            let d = y - z as f64 * box_length;
            (-PI * d * d / (width * width)).exp()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (OperatorParams, RadialProfile, KernelOmega) {
        (OperatorParams::default(), RadialProfile::monomial(3.0).unwrap(), KernelOmega::cosine(1))
    }

    #[test]
    fn constants_are_annihilated() {
        let (p, pr, om) = setup();
        let f = |_: [f64; 3]| Complex64::new(2.5, -1.0);
        let v = apply_direct(&f, &[[0.0; 3], [1.0, -2.0, 0.5]], &p, &pr, &om, RadialTruncation::Sharp { r_inner: 0.25, r_outer: 4.0 }, 16, u64::MAX)
            .unwrap();
        for z in v {
            assert!(z.norm() < 1e-12, "{z}");
        }
    }

    #[test]
    fn shift_equivariance() {
        let (p, pr, om) = setup();
        let a = [0.3, -0.7, 1.1];
        let f = |x: [f64; 3]| Complex64::new((-PI * (x[0] * x[0] + x[1] * x[1] + 0.2 * x[2] * x[2])).exp(), x[0].sin() * 0.1);
        let g = |x: [f64; 3]| f([x[0] - a[0], x[1] - a[1], x[2] - a[2]]);
        let t = RadialTruncation::Dyadic { l_min: -1, l_max: 1 };
        let x = [0.2, 0.1, -0.4];
        let lhs = apply_direct(&g, &[x], &p, &pr, &om, t, 24, u64::MAX).unwrap()[0];
        let rhs = apply_direct(&f, &[[x[0] - a[0], x[1] - a[1], x[2] - a[2]]], &p, &pr, &om, t, 24, u64::MAX).unwrap()[0];
        assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(1e-3), "{lhs} {rhs}");
    }

    #[test]
    fn budget_is_enforced() {
        let (p, pr, om) = setup();
        let f = |_: [f64; 3]| Complex64::new(1.0, 0.0);
        let e = apply_direct(&f, &[[0.0; 3]], &p, &pr, &om, RadialTruncation::Sharp { r_inner: 0.25, r_outer: 4.0 }, 64, 1000);
        assert!(matches!(e, Err(Error::BudgetExceeded { .. })));
        let e = apply_direct(&f, &[[0.0; 3]], &p, &pr, &om, RadialTruncation::Sharp { r_inner: 4.0, r_outer: 1.0 }, 64, u64::MAX);
        assert!(matches!(e, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn dyadic_weight_is_one_inside() {
        let t = RadialTruncation::Dyadic { l_min: -1, l_max: 1 };
        for r in [0.5, 0.7, 1.0, 1.5, 1.99] {
            assert!((t.weight(r) - 1.0).abs() < 1e-14);
        }
        assert_eq!(t.support(), (0.25, 4.0));
    }

    #[test]
    fn periodized_gaussian_is_periodic() {
        let x = [0.3, -1.2, 7.9];
        let a = periodized_gaussian(x, 16.0, 1.0, [0.0625, 0.0, -0.125]);
        let b = periodized_gaussian([x[0] + 16.0, x[1] - 32.0, x[2] + 48.0], 16.0, 1.0, [0.0625, 0.0, -0.125]);
        assert!((a - b).norm() < 1e-12);
    }
}
