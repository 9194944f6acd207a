//! Radial profiles φ with closed-form derivatives up to third order, and
//! sampled certification of the growth constants k₁, k₂, k₃.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term `a · r^(1+γ)` of a [`RadialProfile::MonomialSum`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumTerm {
    pub a: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialProfile {
    /// r^γ
    Monomial { gamma: f64 },
    /// r^γ₁ (1 − e^{−r})^γ₂
    MonomialSaturating { gamma1: f64, gamma2: f64 },
    /// r² e^{−r} sinh r
    ExpSinh,
    /// Σ a_j r^{1+γ_j}
    MonomialSum { terms: Vec<SumTerm> },
}

/// φ and its first three derivatives at one radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileValues {
    pub phi: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl RadialProfile {
    /// Exponents are only required to be positive and finite here; whether the
    /// profile is admissible is decided by [`certify_admissibility`], so that
    /// e.g. `r^0.5` can be built and then rejected with a diagnostic.
    pub fn monomial(gamma: f64) -> Result<Self> {
        let p = RadialProfile::Monomial { gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn monomial_saturating(gamma1: f64, gamma2: f64) -> Result<Self> {
        let p = RadialProfile::MonomialSaturating { gamma1, gamma2 };
        p.validate()?;
        Ok(p)
    }

    pub fn monomial_sum(terms: Vec<SumTerm>) -> Result<Self> {
        let p = RadialProfile::MonomialSum { terms };
        p.validate()?;
        Ok(p)
    }

    /// Structural checks on the parameters (deserialized profiles should be
    /// passed through this before use).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        match self {
            RadialProfile::Monomial { gamma } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return bad(format!("monomial exponent must be positive, got {gamma}"));
                }
            }
            RadialProfile::MonomialSaturating { gamma1, gamma2 } => {
                if !(gamma1.is_finite() && *gamma1 > 1.0) {
                    return bad(format!("gamma1 must exceed 1, got {gamma1}"));
                }
                if !(gamma2.is_finite() && *gamma2 >= 0.0) {
                    return bad(format!("gamma2 must be nonnegative, got {gamma2}"));
                }
            }
            RadialProfile::ExpSinh => {}
            RadialProfile::MonomialSum { terms } => {
                if terms.is_empty() {
                    return bad("monomial sum needs at least one term".into());
                }
                for t in terms {
                    if !(t.a.is_finite() && t.a > 0.0 && t.gamma.is_finite() && t.gamma > 0.0) {
                        return bad(format!("monomial sum term needs a > 0, gamma > 0, got {t:?}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Closed-form (φ, φ′, φ″, φ‴) at `r > 0`.
    pub fn eval(&self, r: f64) -> Result<ProfileValues> {
        if !(r > 0.0) {
            return Err(Error::NonPositiveRadius(r));
        }
        Ok(self.eval_unchecked(r))
    }

    /// As [`eval`](Self::eval) without the radius check; for inner loops
    /// whose radii are positive by construction.
    #[inline]
    pub fn eval_unchecked(&self, r: f64) -> ProfileValues {
        match self {
            RadialProfile::Monomial { gamma } => power(1.0, *gamma, r),
            RadialProfile::MonomialSaturating { gamma1, gamma2 } => saturating(*gamma1, *gamma2, r),
            RadialProfile::ExpSinh => exp_sinh(r),
            RadialProfile::MonomialSum { terms } => {
                let mut acc = ProfileValues { phi: 0.0, d1: 0.0, d2: 0.0, d3: 0.0 };
                for t in terms {
                    let v = power(t.a, 1.0 + t.gamma, r);
                    acc.phi += v.phi;
                    acc.d1 += v.d1;
                    acc.d2 += v.d2;
                    acc.d3 += v.d3;
                }
                acc
            }
        }
    }

    /// Short label used in file names and reports.
    pub fn label(&self) -> String {
        match self {
            RadialProfile::Monomial { gamma } => format!("monomial({gamma})"),
            RadialProfile::MonomialSaturating { gamma1, gamma2 } => {
                format!("monomial_saturating({gamma1},{gamma2})")
            }
            RadialProfile::ExpSinh => "exp_sinh".into(),
            RadialProfile::MonomialSum { terms } => {
                let parts: Vec<String> = terms.iter().map(|t| format!("{}r^{}", t.a, 1.0 + t.gamma)).collect();
                format!("sum({})", parts.join("+"))
            }
        }
    }
}

#[inline]
fn power(a: f64, g: f64, r: f64) -> ProfileValues {
    let p = a * r.powf(g - 3.0);
    let r2 = r * r;
    ProfileValues {
        phi: p * r2 * r,
        d1: p * g * r2,
        d2: p * g * (g - 1.0) * r,
        d3: p * g * (g - 1.0) * (g - 2.0),
    }
}

fn saturating(g1: f64, g2: f64, r: f64) -> ProfileValues {
    let u = power(1.0, g1, r);
    // q = 1 − e^{−r}, computed without cancellation for small r.
    let e = (-r).exp();
    let q = -(-r).exp_m1();
    let (q1, q2, q3) = (e, -e, e);
    let v0 = q.powf(g2);
    let v1 = g2 * q.powf(g2 - 1.0) * q1;
    let v2 = if g2 == 0.0 {
        0.0
    } else {
        g2 * (g2 - 1.0) * q.powf(g2 - 2.0) * q1 * q1 + g2 * q.powf(g2 - 1.0) * q2
    };
    let v3 = if g2 == 0.0 {
        0.0
    } else {
        g2 * (g2 - 1.0) * (g2 - 2.0) * q.powf(g2 - 3.0) * q1 * q1 * q1
            + 3.0 * g2 * (g2 - 1.0) * q.powf(g2 - 2.0) * q1 * q2
            + g2 * q.powf(g2 - 1.0) * q3
    };
    ProfileValues {
        phi: u.phi * v0,
        d1: u.d1 * v0 + u.phi * v1,
        d2: u.d2 * v0 + 2.0 * u.d1 * v1 + u.phi * v2,
        d3: u.d3 * v0 + 3.0 * u.d2 * v1 + 3.0 * u.d1 * v2 + u.phi * v3,
    }
}

// r² e^{−r} sinh r = (r²/2)(1 − e^{−2r})
fn exp_sinh(r: f64) -> ProfileValues {
    let e = (-2.0 * r).exp();
    let w = -(-2.0 * r).exp_m1();
    let (w1, w2, w3) = (2.0 * e, -4.0 * e, 8.0 * e);
    let u = 0.5 * r * r;
    ProfileValues {
        phi: u * w,
        d1: r * w + u * w1,
        d2: w + 2.0 * r * w1 + u * w2,
        d3: 3.0 * w1 + 3.0 * r * w2 + u * w3,
    }
}

/// Observed growth constants of a profile over a sampled radius range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityCertificate {
    /// inf of rφ″/φ′ over the samples
    pub k1_hat: f64,
    /// sup of rφ″/φ′
    pub k2_hat: f64,
    /// sup of |rφ‴/φ″| over samples with |φ″| ≥ 1e-30
    pub k3_hat: f64,
    pub r_range: (f64, f64),
    pub n_samples: usize,
    pub sign_ok: bool,
    /// samples skipped in the k₃ sup because φ″ was numerically zero
    pub k3_skipped: usize,
    /// |φ(1e-8)| < 1e-6
    pub vanishes_at_origin: bool,
}

impl AdmissibilityCertificate {
    /// All conditions hold on the sampled range.
    pub fn admissible(&self) -> bool {
        self.sign_ok && self.k1_hat > 0.0 && self.k2_hat >= self.k1_hat && self.vanishes_at_origin
    }
}

/// Log-uniform sampling of rφ″/φ′ and |rφ‴/φ″| on `[r_min, r_max]`.
pub fn certify_admissibility(
    profile: &RadialProfile,
    r_min: f64,
    r_max: f64,
    n_samples: usize,
) -> Result<AdmissibilityCertificate> {
    if !(r_min > 0.0) {
        return Err(Error::NonPositiveRadius(r_min));
    }
    if !(r_max > r_min) || n_samples < 2 {
        return Err(Error::InvalidParams(format!(
            "need 0 < r_min < r_max and n_samples >= 2, got [{r_min}, {r_max}], {n_samples}"
        )));
    }
    profile.validate()?;
    let log_span = (r_max / r_min).ln();
    let mut k1 = f64::INFINITY;
    let mut k2 = f64::NEG_INFINITY;
    let mut k3: f64 = 0.0;
    let mut skipped = 0;
    let mut first_bad: Option<f64> = None;
    for i in 0..n_samples {
        let r = if i + 1 == n_samples {
            r_max
        } else {
            r_min * (log_span * i as f64 / (n_samples - 1) as f64).exp()
        };
        let v = profile.eval_unchecked(r);
        if v.d1 == 0.0 || v.d2 == 0.0 {
            return Err(Error::DegenerateDerivative(r));
        }
        if v.d1 * v.d2 <= 0.0 && first_bad.is_none() {
            first_bad = Some(r);
        }
        let q = r * v.d2 / v.d1;
        k1 = k1.min(q);
        k2 = k2.max(q);
        if v.d2.abs() < 1e-30 {
            skipped += 1;
        } else {
            k3 = k3.max((r * v.d3 / v.d2).abs());
        }
    }
    let cert = AdmissibilityCertificate {
        k1_hat: k1,
        k2_hat: k2,
        k3_hat: k3,
        r_range: (r_min, r_max),
        n_samples,
        sign_ok: first_bad.is_none(),
        k3_skipped: skipped,
        vanishes_at_origin: profile.eval_unchecked(1e-8).phi.abs() < 1e-6,
    };
    match first_bad {
        Some(r) => Err(Error::SignViolation { r, certificate: Box::new(cert) }),
        None => Ok(cert),
    }
}

/// Gaussian curvature of the surface of revolution z = φ(ρ) in ℝ³.
pub fn gaussian_curvature(profile: &RadialProfile, r: f64) -> Result<f64> {
    let v = profile.eval(r)?;
    let s = 1.0 + v.d1 * v.d1;
    Ok(v.d1 * v.d2 / (r * s * s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn monomial_power_rule() {
        let v = RadialProfile::monomial(3.0).unwrap().eval(2.0).unwrap();
        assert_eq!((v.phi, v.d1, v.d2, v.d3), (8.0, 12.0, 12.0, 6.0));
        let v = RadialProfile::monomial(1.5).unwrap().eval(1.0).unwrap();
        assert!(close(v.phi, 1.0, 1e-15) && close(v.d1, 1.5, 1e-15));
        assert!(close(v.d2, 0.75, 1e-15) && close(v.d3, -0.375, 1e-15));
    }

    #[test]
    fn exp_sinh_matches_taylor_series() {
        // r² e^{−r} sinh r = r³ − r⁴ + 2/3 r⁵ − 1/3 r⁶ + 2/15 r⁷ − 2/45 r⁸ + …
        let c = [1.0, -1.0, 2.0 / 3.0, -1.0 / 3.0, 2.0 / 15.0, -2.0 / 45.0];
        let r: f64 = 0.01;
        let mut s = [0.0; 4];
        for (i, ci) in c.iter().enumerate() {
            let p = (i + 3) as f64;
            s[0] += ci * r.powf(p);
            s[1] += ci * p * r.powf(p - 1.0);
            s[2] += ci * p * (p - 1.0) * r.powf(p - 2.0);
            s[3] += ci * p * (p - 1.0) * (p - 2.0) * r.powf(p - 3.0);
        }
        let v = RadialProfile::ExpSinh.eval(r).unwrap();
        for (got, want) in [v.phi, v.d1, v.d2, v.d3].iter().zip(s) {
            assert!(close(*got, want, 1e-10), "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_nonpositive_radius() {
        let p = RadialProfile::ExpSinh;
        assert!(matches!(p.eval(0.0), Err(Error::NonPositiveRadius(_))));
        assert!(matches!(p.eval(-1.0), Err(Error::NonPositiveRadius(_))));
        assert!(matches!(gaussian_curvature(&p, 0.0), Err(Error::NonPositiveRadius(_))));
    }

    #[test]
    fn monomial_certificate_is_exact() {
        for g in [1.5, 2.0, 3.0, 5.0] {
            let c = certify_admissibility(&RadialProfile::monomial(g).unwrap(), 1e-3, 1e3, 10_000).unwrap();
            assert!((c.k1_hat - (g - 1.0)).abs() < 1e-10);
            assert!((c.k2_hat - (g - 1.0)).abs() < 1e-10);
            assert!((c.k3_hat - (g - 2.0).abs()).abs() < 1e-10);
            assert!(c.admissible());
        }
    }

    #[test]
    fn sqrt_profile_is_a_sign_violation() {
        let p = RadialProfile::monomial(0.5).unwrap();
        match certify_admissibility(&p, 1e-3, 1e3, 100) {
            Err(Error::SignViolation { r, certificate }) => {
                assert_eq!(r, 1e-3);
                assert!(!certificate.sign_ok && certificate.k1_hat < 0.0);
            }
            other => panic!("expected SignViolation, got {other:?}"),
        }
    }

    #[test]
    fn linear_profile_is_degenerate() {
        let p = RadialProfile::monomial(1.0).unwrap();
        assert!(matches!(certify_admissibility(&p, 1e-3, 1e3, 10), Err(Error::DegenerateDerivative(_))));
    }

    #[test]
    fn monomial_sum_matches_dense_oracle() {
        let p = RadialProfile::monomial_sum(vec![SumTerm { a: 1.0, gamma: 1.0 }, SumTerm { a: 1.0, gamma: 2.0 }]).unwrap();
        let c = certify_admissibility(&p, 1e-3, 1e3, 10_000).unwrap();
        // dense oracle from the closed form rφ″/φ′ = (2r + 6r²)/(2r + 3r²)
        let n = 1_000_000;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let r: f64 = 1e-3 * (1e6f64.ln() * i as f64 / (n - 1) as f64).exp();
            let q = (2.0 * r + 6.0 * r * r) / (2.0 * r + 3.0 * r * r);
            lo = lo.min(q);
            hi = hi.max(q);
        }
        assert!((c.k1_hat - lo).abs() < 1e-3 && (c.k2_hat - hi).abs() < 1e-3);
        assert!(c.k1_hat >= 1.0 && c.k2_hat <= 2.0);
        assert!(c.k3_hat.is_finite());
    }

    #[test]
    fn saturating_and_expsinh_certify() {
        for p in [RadialProfile::ExpSinh, RadialProfile::monomial_saturating(2.0, 1.0).unwrap()] {
            let c = certify_admissibility(&p, 1e-3, 1e3, 10_000).unwrap();
            assert!(c.admissible(), "{c:?}");
            assert!(c.k1_hat.is_finite() && c.k2_hat.is_finite() && c.k3_hat.is_finite());
        }
    }

    #[test]
    fn curvature_examples() {
        let k = gaussian_curvature(&RadialProfile::monomial(2.0).unwrap(), 1.0).unwrap();
        assert!(close(k, 0.16, 1e-14));
        let p3 = RadialProfile::monomial(3.0).unwrap();
        let small = gaussian_curvature(&p3, 1e-4).unwrap();
        assert!(small > 0.0 && small < 1e-6);

        // finite-difference curvature for ExpSinh at r = 1
        let p = RadialProfile::ExpSinh;
        let h = 1e-4;
        let f = |r: f64| p.eval(r).unwrap().phi;
        let d1 = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        let d2 = (f(1.0 + h) - 2.0 * f(1.0) + f(1.0 - h)) / (h * h);
        let fd = d1 * d2 / (1.0 + d1 * d1).powi(2);
        assert!(close(gaussian_curvature(&p, 1.0).unwrap(), fd, 1e-6));
    }

    #[test]
    fn vanishing_at_origin() {
        for p in [RadialProfile::ExpSinh, RadialProfile::monomial(1.5).unwrap()] {
            let c = certify_admissibility(&p, 1e-2, 1e2, 64).unwrap();
            assert!(c.vanishes_at_origin);
        }
    }

    #[test]
    fn json_shape() {
        let p: RadialProfile = serde_json::from_str(r#"{"kind": "monomial", "gamma": 3.0}"#).unwrap();
        assert_eq!(p, RadialProfile::Monomial { gamma: 3.0 });
        let p: RadialProfile = serde_json::from_str(r#"{"kind": "monomial_sum", "terms": [{"a": 1, "gamma": 2}]}"#).unwrap();
        assert!(p.validate().is_ok());
        assert!(serde_json::from_str::<RadialProfile>(r#"{"kind": "monomial", "gama": 3.0}"#).is_err());
    }
}
