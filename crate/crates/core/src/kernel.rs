//! The angular factor Ω of the kernel.
//!
//! In the plane Ω is a trigonometric polynomial in the polar angle, so the
//! mean-zero condition and the sup bound hold by construction. For n ≥ 3 only
//! kernels that depend on the polar angle from the ξ′ pole are supported
//! ([`ZonalKernel`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub k: u32,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

/// Σ a_k cos(ku) + b_k sin(ku), with no restriction on k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPolynomial {
    pub harmonics: Vec<Harmonic>,
}

impl TrigPolynomial {
    pub fn eval(&self, u: f64) -> f64 {
        self.harmonics
            .iter()
            .map(|h| {
                let (s, c) = (h.k as f64 * u).sin_cos();
                h.a * c + h.b * s
            })
            .sum()
    }

    /// Σ |a_k| + |b_k|, an upper bound for sup |Ω|.
    pub fn sup_bound(&self) -> f64 {
        self.harmonics.iter().map(|h| h.a.abs() + h.b.abs()).sum()
    }
}

/// A valid planar kernel: a trigonometric polynomial without constant term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrigPolynomial", into = "TrigPolynomial")]
pub struct KernelOmega {
    poly: TrigPolynomial,
}

impl TryFrom<TrigPolynomial> for KernelOmega {
    type Error = Error;

    fn try_from(poly: TrigPolynomial) -> Result<Self> {
        if poly.harmonics.is_empty() {
            return Err(Error::InvalidParams("kernel needs at least one harmonic".into()));
        }
        for h in &poly.harmonics {
            if !(h.a.is_finite() && h.b.is_finite()) {
                return Err(Error::InvalidParams(format!("non-finite kernel coefficient {h:?}")));
            }
            if h.k == 0 && (h.a != 0.0 || h.b != 0.0) {
                return Err(Error::InvalidParams(
                    "kernel has a constant term, so its mean over the circle is not zero".into(),
                ));
            }
        }
        Ok(KernelOmega { poly })
    }
}

impl From<KernelOmega> for TrigPolynomial {
    fn from(k: KernelOmega) -> Self {
        k.poly
    }
}

impl KernelOmega {
    pub fn new(harmonics: Vec<Harmonic>) -> Result<Self> {
        TrigPolynomial { harmonics }.try_into()
    }

    /// Ω(u) = cos(ku)
    pub fn cosine(k: u32) -> Self {
        Self::new(vec![Harmonic { k, a: 1.0, b: 0.0 }]).expect("k >= 1")
    }

    pub fn poly(&self) -> &TrigPolynomial {
        &self.poly
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.poly.harmonics
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.poly.eval(u)
    }

    pub fn sup_bound(&self) -> f64 {
        self.poly.sup_bound()
    }

    pub fn max_harmonic(&self) -> u32 {
        self.poly.harmonics.iter().map(|h| h.k).max().unwrap_or(0)
    }

    /// The kernel u ↦ Ω(u − angle), i.e. Ω carried along by a rotation.
    pub fn rotated(&self, angle: f64) -> Self {
        let harmonics = self
            .poly
            .harmonics
            .iter()
            .map(|h| {
                let (s, c) = (h.k as f64 * angle).sin_cos();
                Harmonic { k: h.k, a: h.a * c - h.b * s, b: h.a * s + h.b * c }
            })
            .collect();
        KernelOmega { poly: TrigPolynomial { harmonics } }
    }

    /// Coefficient of the k-th harmonic along a direction:
    /// Σ over entries with this k of a cos(kφ₀) + b sin(kφ₀).
    pub(crate) fn harmonic_at(&self, k: u32, phi0: f64) -> f64 {
        self.poly
            .harmonics
            .iter()
            .filter(|h| h.k == k)
            .map(|h| {
                let (s, c) = (k as f64 * phi0).sin_cos();
                h.a * c + h.b * s
            })
            .sum()
    }
}

/// Trapezoid rule for ∫_{S¹} Ω dσ.
pub fn omega_mean(omega: &TrigPolynomial, n_quad: usize) -> f64 {
    let n = n_quad.max(16);
    let h = 2.0 * PI / n as f64;
    // Pairwise accumulation in a fixed order keeps this reproducible.
    let vals: Vec<f64> = (0..n).map(|i| omega.eval(i as f64 * h)).collect();
    pairwise_sum(&vals) * h
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sigma {
    Plus,
    Minus,
}

impl Sigma {
    pub fn sign(self) -> f64 {
        match self {
            Sigma::Plus => 1.0,
            Sigma::Minus => -1.0,
        }
    }
}

/// Ω at the point whose coordinates in the frame with pole ξ′/|ξ′| are
/// (σ sin θ, cos θ); in the plane that is Ω(angle(ξ′) + σθ).
pub fn omega_in_rotated_frame(omega: &KernelOmega, xi_prime: [f64; 2], theta: f64, sigma: Sigma) -> Result<f64> {
    if xi_prime[0] == 0.0 && xi_prime[1] == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let phi0 = xi_prime[1].atan2(xi_prime[0]);
    Ok(omega.eval(phi0 + sigma.sign() * theta))
}

/// Surface area of the unit sphere S^m ⊂ ℝ^{m+1}.
pub fn sphere_area(m: u32) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m - 1) as f64 * sphere_area(m - 2),
    }
}

/// A kernel on S^{n−1}, n ≥ 3, given in the frame with pole ξ′/|ξ′| as a
/// cosine series in the polar angle θ: Ω(θ) = Σ c_k cos(kθ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZonalKernel {
    pub n: u32,
    pub coeffs: Vec<f64>,
}

impl ZonalKernel {
    /// Checks ∫₀^π Ω(θ) sin^{n−2}θ dθ = 0 numerically.
    pub fn new(n: u32, coeffs: Vec<f64>) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParams("zonal kernels are for n >= 3".into()));
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("zonal kernel needs finite coefficients".into()));
        }
        let z = ZonalKernel { n, coeffs };
        let scale: f64 = z.coeffs.iter().map(|c| c.abs()).sum();
        if z.weighted_mean().abs() > 1e-12 * scale.max(1e-300) {
            return Err(Error::InvalidParams(format!(
                "zonal kernel mean is {} instead of 0",
                z.weighted_mean()
            )));
        }
        Ok(z)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * theta).cos()).sum()
    }

    /// ∫₀^π Ω(θ) sin^{n−2}θ dθ (composite Gauss–Legendre; the integrand is entire).
    pub fn weighted_mean(&self) -> f64 {
        let (x, w) = crate::quadrature::gauss_legendre(16);
        let panels = 8 + self.coeffs.len();
        let h = PI / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let c = (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                let t = c + 0.5 * h * xi;
                acc += wi * self.eval(t) * t.sin().powi(self.n as i32 - 2);
            }
        }
        acc * 0.5 * h
    }
}
