//! Dyadic pieces of the Fourier multiplier,
//!
//! m_l(ξ) = 2^{αl} ∫_{1/2}^{2} ∫_{S^{n−1}} e^{−2πi g(r, ω)} Ω(ω) η(r) r^{−α−1} dω dr,
//!
//! their sum over a window of l with a tail bound, and empirical decay fits.
//!
//! Two routes compute m_l for planar kernels. The default ([`Route::Bessel`])
//! does the angular integral in closed form, ∫ Ω(φ₀ + θ) e^{−ix cos θ} dθ =
//! 2π Σ_k (−i)^k Ω_k(φ₀) J_k(x), and integrates the remaining radial factor
//! with the windowed 1D engine. [`Route::Polar`] integrates over (r, θ)
//! directly and is kept as an independent check.

pub mod radial;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bumps::eta_unchecked;
use crate::error::{Error, Result};
use crate::kernel::{sphere_area, KernelOmega, ZonalKernel};
pub use crate::params::OperatorParams;
use crate::phase::{lambda_scale, Frequency, ScaledPhase, SUP_SAMPLES};
use crate::profiles::RadialProfile;
use crate::quadrature::{integrate_oscillatory_aniso, pairwise_sum, Quad2dOptions, WindowOptions};

pub use radial::{Progression, RadialProblem};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    #[default]
    Bessel,
    Polar,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MlOptions {
    pub route: Route,
    pub window: WindowOptions,
    pub quad2d: Quad2dOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlEvaluation {
    pub value: Complex64,
    pub error_estimate: f64,
    pub panels: u64,
    pub lambda: f64,
}

fn check_inputs(params: &OperatorParams, profile: &RadialProfile, xi: &Frequency, tol: f64) -> Result<()> {
    params.validate()?;
    profile.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParams(format!("tol must be positive, got {tol}")));
    }
    if !xi.is_finite() {
        return Err(Error::InvalidParams("frequency has non-finite entries".into()));
    }
    if xi.xi_prime.len() != params.n as usize {
        return Err(Error::InvalidParams(format!(
            "frequency has {} primed components but n = {}",
            xi.xi_prime.len(),
            params.n
        )));
    }
    Ok(())
}

fn planar_angle(xi: &Frequency) -> f64 {
    // With ξ′ = 0 the standard frame is used; the angle then only enters
    // through harmonics multiplied by J_k(0) = 0 or a θ-independent phase.
    if xi.prime_norm() == 0.0 {
        0.0
    } else {
        xi.xi_prime[1].atan2(xi.xi_prime[0])
    }
}

/// Distinct harmonics of Ω and their coefficients (−i)^k Ω_k(φ₀) along φ₀.
pub(crate) fn harmonic_weights(omega: &KernelOmega, phi0: f64) -> (Vec<u32>, Vec<Complex64>) {
    let mut ks: Vec<u32> = omega.harmonics().iter().map(|h| h.k).filter(|&k| k >= 1).collect();
    ks.sort_unstable();
    ks.dedup();
    let cs = ks
        .iter()
        .map(|&k| {
            let mi = match k % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, -1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, 1.0),
            };
            mi * omega.harmonic_at(k, phi0)
        })
        .collect();
    (ks, cs)
}

/// m_l(ξ) with default options.
pub fn m_l(
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &KernelOmega,
    xi: &Frequency,
    l: i32,
    tol: f64,
) -> Result<Complex64> {
    Ok(m_l_with(params, profile, omega, xi, l, tol, &MlOptions::default())?.value)
}

/// m_l(ξ) for a planar kernel (n = 2).
pub fn m_l_with(
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &KernelOmega,
    xi: &Frequency,
    l: i32,
    tol: f64,
    opts: &MlOptions,
) -> Result<MlEvaluation> {
    check_inputs(params, profile, xi, tol)?;
    if params.n != 2 {
        return Err(Error::InvalidParams("trigonometric kernels are planar; use m_l_zonal for n >= 3".into()));
    }
    let lambda = lambda_scale(params, profile, xi, l, SUP_SAMPLES);
    let mut ev = match opts.route {
        Route::Bessel => bessel_route(params, profile, omega, xi, l, tol, &opts.window),
        Route::Polar => {
            let phi0 = planar_angle(xi);
            let ang = |theta: f64| omega.eval(phi0 + theta) + omega.eval(phi0 - theta);
            polar_route(params, profile, xi, l, tol, &ang, &opts.quad2d)?
        }
    };
    ev.lambda = lambda;
    Ok(ev)
}

fn bessel_route(
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &KernelOmega,
    xi: &Frequency,
    l: i32,
    tol: f64,
    window: &WindowOptions,
) -> MlEvaluation {
    let scale = 2f64.powf(params.alpha * l as f64);
    let (ks, cs) = harmonic_weights(omega, planar_angle(xi));
    let pb = RadialProblem::new(params, profile, xi.prime_norm(), l, ks, *window);
    let weight: f64 = cs.iter().map(|c| c.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    let batch = pb.evaluate(Progression::single(xi.xi_last), tol / (scale * weight));
    let terms: Vec<Complex64> = batch.values.iter().zip(&cs).map(|(r, c)| r * c).collect();
    MlEvaluation {
        value: pairwise_sum(&terms) * scale,
        error_estimate: batch.error * weight * scale,
        panels: batch.panels,
        lambda: f64::NAN,
    }
}

/// 2D quadrature over (r, θ) ∈ [1/2, 2] × [0, π] of
/// e^{−2πi g} · ang(θ) · η(r) r^{−α−1}, scaled by 2^{αl}.
fn polar_route<F: Fn(f64) -> f64 + Sync>(
    params: &OperatorParams,
    profile: &RadialProfile,
    xi: &Frequency,
    l: i32,
    tol: f64,
    ang: &F,
    quad: &Quad2dOptions,
) -> Result<MlEvaluation> {
    let scale = 2f64.powf(params.alpha * l as f64);
    let ph = ScaledPhase::new(params, profile, xi.prime_norm(), xi.xi_last, l);
    // Sampled gradient, padded: the adaptive refinement absorbs the rest.
    let (mut gr, mut gt) = (0.0f64, 0.0f64);
    for i in 0..=64 {
        let r = 0.5 + 1.5 * i as f64 / 64.0;
        for j in 0..=32 {
            let d = ph.derivatives(r, PI * j as f64 / 32.0);
            gr = gr.max(d.g_r.abs());
            gt = gt.max(d.g_theta.abs());
        }
    }
    let bounds = [2.0 * PI * 1.1 * gr, 2.0 * PI * 1.1 * gt];
    let alpha = params.alpha;
    let f = |r: f64, theta: f64| {
        let w = eta_unchecked(r) * r.powf(-alpha - 1.0) * ang(theta);
        Complex64::from_polar(w, -2.0 * PI * ph.value(r, theta))
    };
    let res = integrate_oscillatory_aniso(&f, bounds, tol / scale, quad)?;
    Ok(MlEvaluation {
        value: res.value * scale,
        error_estimate: res.error_estimate * scale,
        panels: res.panels_used,
        lambda: f64::NAN,
    })
}

/// m_l(ξ) for n ≥ 3 and a kernel depending only on the angle to ξ′
/// (by the polar route; the σ-sum becomes the factor |S^{n−2}|).
pub fn m_l_zonal(
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &ZonalKernel,
    xi: &Frequency,
    l: i32,
    tol: f64,
    quad: &Quad2dOptions,
) -> Result<MlEvaluation> {
    check_inputs(params, profile, xi, tol)?;
    if omega.n != params.n {
        return Err(Error::InvalidParams(format!("zonal kernel is for n = {}, params have n = {}", omega.n, params.n)));
    }
    let area = sphere_area(params.n - 2);
    let pw = params.n as i32 - 2;
    let ang = |theta: f64| omega.eval(theta) * theta.sin().powi(pw) * area;
    let mut ev = polar_route(params, profile, xi, l, tol, &ang, quad)?;
    ev.lambda = lambda_scale(params, profile, xi, l, SUP_SAMPLES);
    Ok(ev)
}

/// m_l(ξ) straight from the definition in Cartesian form,
/// ∫_{ℝ²} e^{−2πi(ξ′·t + ξ_last φ(|t|) + |t|^{−β})} η(2^l|t|) Ω(t/|t|) |t|^{−α−2} dt,
/// on an `n_rho` × `n_u` polar grid with the unrotated kernel. The trapezoid
/// rule is used in both directions: the integrand is periodic in u and
/// vanishes to all orders at the ends of the ρ-interval.
pub fn m_l_cartesian_oracle(
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &KernelOmega,
    xi: &Frequency,
    l: i32,
    n_rho: usize,
    n_u: usize,
) -> Result<Complex64> {
    check_inputs(params, profile, xi, 1.0)?;
    if params.n != 2 {
        return Err(Error::InvalidParams("the Cartesian oracle is planar".into()));
    }
    if n_rho < 2 || n_u < 2 {
        return Err(Error::InvalidParams("oracle grid too small".into()));
    }
    let (lo, hi) = (2f64.powi(-l - 1), 2f64.powi(-l + 1));
    let hr = (hi - lo) / n_rho as f64;
    let hu = 2.0 * PI / n_u as f64;
    let (x1, x2, x3) = (xi.xi_prime[0], xi.xi_prime[1], xi.xi_last);
    let dil = 2f64.powi(l);
    let (alpha, beta) = (params.alpha, params.beta);
    let trig: Vec<(f64, f64, f64)> = (0..n_u)
        .map(|j| {
            let u = j as f64 * hu;
            let (s, c) = u.sin_cos();
            (c, s, omega.eval(u))
        })
        .collect();
    let rows: Vec<Complex64> = (1..n_rho)
        .into_par_iter()
        .map(|i| {
            let rho = lo + i as f64 * hr;
            let w = eta_unchecked(dil * rho) * rho.powf(-alpha - 1.0);
            if w == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let radial = x3 * profile.eval_unchecked(rho).phi + rho.powf(-beta);
            let row: Vec<Complex64> = trig
                .iter()
                .map(|&(c, s, om)| Complex64::from_polar(w * om, -2.0 * PI * (rho * (x1 * c + x2 * s) + radial)))
                .collect();
            pairwise_sum(&row)
        })
        .collect();
    Ok(pairwise_sum(&rows) * (hr * hu))
}

/// The frequencies origin + (n₁h₁, n₂h₂, n₃h₃), 0 ≤ n_i < dims_i, in
/// row-major order (last index fastest).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyLattice {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
}

impl FrequencyLattice {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, idx: [usize; 3]) -> Frequency {
        let c = |a: usize| self.origin[a] + idx[a] as f64 * self.spacing[a];
        Frequency::planar(c(0), c(1), c(2))
    }
}

/// Σ_{l ∈ window} m_l(ξ) at every point of a planar lattice.
///
/// Points sharing |ξ′| share their radial integrals, and the ξ_last column
/// of each is done as one progression, so this is far cheaper than calling
/// [`m_total`] per point. `tol` applies to each m_l.
pub fn multiplier_lattice(
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &KernelOmega,
    lattice: &FrequencyLattice,
    l_window: (i32, i32),
    tol: f64,
    window: &WindowOptions,
) -> Result<Vec<Complex64>> {
    params.validate()?;
    profile.validate()?;
    if params.n != 2 {
        return Err(Error::InvalidParams("lattice evaluation is planar".into()));
    }
    if !(tol > 0.0) || l_window.0 > l_window.1 {
        return Err(Error::InvalidParams(format!("bad tol {tol} or window {l_window:?}")));
    }
    if !lattice.origin.iter().chain(&lattice.spacing).all(|v| v.is_finite()) {
        return Err(Error::InvalidParams("lattice has non-finite entries".into()));
    }
    let [n1, n2, n3] = lattice.dims;
    // Group (i, j) columns by the bit pattern of |ξ′|.
    let mut groups: std::collections::BTreeMap<u64, Vec<(usize, usize)>> = Default::default();
    for i in 0..n1 {
        for j in 0..n2 {
            let x = lattice.at([i, j, 0]);
            groups.entry(x.prime_norm().to_bits()).or_default().push((i, j));
        }
    }
    let groups: Vec<(f64, Vec<(usize, usize)>)> = groups.into_iter().map(|(k, v)| (f64::from_bits(k), v)).collect();
    let xs = Progression { start: lattice.origin[2], step: lattice.spacing[2], len: n3 };
    let sup = omega.sup_bound().max(f64::MIN_POSITIVE);
    let columns: Vec<Vec<((usize, usize), Vec<Complex64>)>> = groups
        .par_iter()
        .map(|(rho, members)| {
            let mut out: Vec<((usize, usize), Vec<Complex64>)> =
                members.iter().map(|&ij| (ij, vec![Complex64::new(0.0, 0.0); n3])).collect();
            let weights: Vec<Vec<Complex64>> = members
                .iter()
                .map(|&(i, j)| harmonic_weights(omega, planar_angle(&lattice.at([i, j, 0]))).1)
                .collect();
            let ks = harmonic_weights(omega, 0.0).0;
            let nk = ks.len();
            for l in l_window.0..=l_window.1 {
                let scale = 2f64.powf(params.alpha * l as f64);
                let pb = RadialProblem::new(params, profile, *rho, l, ks.clone(), *window);
                let batch = pb.evaluate(xs, tol / (scale * sup));
                for ((_, col), cs) in out.iter_mut().zip(&weights) {
                    for (k, v) in col.iter_mut().enumerate() {
                        let row = &batch.values[k * nk..(k + 1) * nk];
                        let t: Complex64 = row.iter().zip(cs).map(|(r, c)| r * c).sum();
                        *v += t * scale;
                    }
                }
            }
            out
        })
        .collect();
    let mut table = vec![Complex64::new(0.0, 0.0); lattice.len()];
    for group in columns {
        for ((i, j), col) in group {
            let base = (i * n2 + j) * n3;
            table[base..base + n3].copy_from_slice(&col);
        }
    }
    Ok(table)
}

/// The bound shape 2^{(α−β/2)l} for l ≥ 0 and 2^{αl} for l < 0.
pub fn decay_bound(params: &OperatorParams, l: i32) -> f64 {
    if l >= 0 {
        2f64.powf(params.positive_scale_rate() * l as f64)
    } else {
        2f64.powf(params.alpha * l as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MTotal {
    pub value: Complex64,
    pub tail_bound: f64,
    /// (l, m_l) over the window.
    pub pieces: Vec<(i32, Complex64)>,
    /// max |m_l| / decay_bound(l) over the window.
    pub constant: f64,
}

/// Σ_{l_min ≤ l ≤ l_max} m_l(ξ) and a bound for the omitted pieces.
#[allow(clippy::too_many_arguments)]
pub fn m_total(
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &KernelOmega,
    xi: &Frequency,
    l_min: i32,
    l_max: i32,
    tol: f64,
) -> Result<MTotal> {
    m_total_with(params, profile, omega, xi, l_min, l_max, tol, &MlOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn m_total_with(
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &KernelOmega,
    xi: &Frequency,
    l_min: i32,
    l_max: i32,
    tol: f64,
    opts: &MlOptions,
) -> Result<MTotal> {
    if !(params.beta > 2.0 * params.alpha) {
        return Err(Error::NonconvergentTail);
    }
    if !(l_min < 0 && 0 < l_max) {
        return Err(Error::InvalidParams(format!("need l_min < 0 < l_max, got [{l_min}, {l_max}]")));
    }
    check_inputs(params, profile, xi, tol)?;
    if params.n != 2 {
        return Err(Error::InvalidParams("trigonometric kernels are planar".into()));
    }
    let pieces: Vec<(i32, Complex64)> = (l_min..=l_max)
        .into_par_iter()
        .map(|l| {
            let v = match opts.route {
                Route::Bessel => bessel_route(params, profile, omega, xi, l, tol, &opts.window).value,
                Route::Polar => m_l_with(params, profile, omega, xi, l, tol, opts)?.value,
            };
            Ok((l, v))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(params, l_min, l_max, pieces))
}

pub(crate) fn assemble(params: &OperatorParams, l_min: i32, l_max: i32, pieces: Vec<(i32, Complex64)>) -> MTotal {
    let vals: Vec<Complex64> = pieces.iter().map(|p| p.1).collect();
    let constant = pieces.iter().map(|&(l, v)| v.norm() / decay_bound(params, l)).fold(0.0, f64::max);
    MTotal { value: pairwise_sum(&vals), tail_bound: constant * tail_factor(params, l_min, l_max), pieces, constant }
}

/// Σ_{l > l_max} 2^{(α−β/2)l} + Σ_{l < l_min} 2^{αl}.
pub fn tail_factor(params: &OperatorParams, l_min: i32, l_max: i32) -> f64 {
    let q = params.positive_scale_rate();
    let a = params.alpha;
    2f64.powf(q * (l_max + 1) as f64) / (1.0 - 2f64.powf(q)) + 2f64.powf(a * (l_min - 1) as f64) / (1.0 - 2f64.powf(-a))
}

/// Below this |m_l| is treated as zero and left out of the log fit.
pub const UNDERFLOW: f64 = 1e-30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub l_values: Vec<i32>,
    pub abs_ml: Vec<f64>,
    /// log₂|m_l|, absent where |m_l| < [`UNDERFLOW`].
    pub log2_abs_ml: Vec<Option<f64>>,
    /// Least-squares line through the present points (absent with fewer than two).
    pub fitted_slope: Option<f64>,
    pub fitted_intercept: Option<f64>,
    pub predicted_slope: f64,
    /// max_l (|m_l| / 2^{predicted·l}) divided by the same ratio at `normalization_l`.
    pub max_ratio_excess: f64,
    /// The end of the window nearest l = 0.
    pub normalization_l: i32,
    pub excluded: Vec<i32>,
}

/// Fits log₂|m_l| against l on a window lying entirely in l ≥ 0 or l < 0.
pub fn decay_fit(
    params: &OperatorParams,
    profile: &RadialProfile,
    omega: &KernelOmega,
    xi: &Frequency,
    l_range: (i32, i32),
    tol: f64,
) -> Result<DecayFit> {
    let (l0, l1) = l_range;
    if l1 - l0 < 4 {
        return Err(Error::InvalidParams(format!("decay window [{l0}, {l1}] needs at least 5 scales")));
    }
    if l0 < 0 && l1 >= 0 {
        return Err(Error::InvalidParams("decay window must not straddle l = 0".into()));
    }
    check_inputs(params, profile, xi, tol)?;
    let values: Vec<Complex64> =
        (l0..=l1).into_par_iter().map(|l| m_l(params, profile, omega, xi, l, tol)).collect::<Result<_>>()?;
    fit_values(params, l0, &values)
}

pub(crate) fn fit_values(params: &OperatorParams, l0: i32, values: &[Complex64]) -> Result<DecayFit> {
    let l1 = l0 + values.len() as i32 - 1;
    let predicted_slope = if l0 >= 0 { params.positive_scale_rate() } else { params.alpha };
    let normalization_l = if l0 >= 0 { l0 } else { l1 };
    let l_values: Vec<i32> = (l0..=l1).collect();
    let abs_ml: Vec<f64> = values.iter().map(|v| v.norm()).collect();
    let log2_abs_ml: Vec<Option<f64>> = abs_ml.iter().map(|&a| (a >= UNDERFLOW).then(|| a.log2())).collect();
    let excluded: Vec<i32> = l_values.iter().zip(&log2_abs_ml).filter(|(_, v)| v.is_none()).map(|(l, _)| *l).collect();
    let norm_abs = abs_ml[(normalization_l - l0) as usize];
    if norm_abs < UNDERFLOW {
        return Err(Error::DegenerateData(format!("|m_l| at the normalization scale l = {normalization_l} is below {UNDERFLOW:e}")));
    }
    let ratio = |l: i32, a: f64| a / 2f64.powf(predicted_slope * l as f64);
    let norm_ratio = ratio(normalization_l, norm_abs);
    let max_ratio_excess = l_values.iter().zip(&abs_ml).map(|(&l, &a)| ratio(l, a) / norm_ratio).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = l_values.iter().zip(&log2_abs_ml).filter_map(|(&l, v)| v.map(|y| (l as f64, y))).collect();
    let (fitted_slope, fitted_intercept) = match least_squares(&pts) {
        Some((m, c)) => (Some(m), Some(c)),
        None => (None, None),
    };
    Ok(DecayFit {
        l_values,
        abs_ml,
        log2_abs_ml,
        fitted_slope,
        fitted_intercept,
        predicted_slope,
        max_ratio_excess,
        normalization_l,
        excluded,
    })
}

/// Slope and intercept of the least-squares line, if at least two distinct x.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let m = sxy / sxx;
    Some((m, my - m * mx))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeGroupKind {
    /// |ξ′| ≥ |ξ_last|
    PrimeDominant,
    LastDominant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeGroup {
    pub kind: EnvelopeGroupKind,
    pub xi_norms: Vec<f64>,
    pub abs_m: Vec<f64>,
    pub fitted_exponent: Option<f64>,
    pub predicted_exponent: f64,
    /// |m(ξ)| / |ξ|^{predicted} at the smallest |ξ| of the group.
    pub constant: f64,
    /// |m(ξ)| / (constant·|ξ|^{predicted}) per sample.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub groups: Vec<EnvelopeGroup>,
}

/// |m(ξ)| against the envelope |ξ|^{e} with e = (α−β/2)/(1+β) for
/// |ξ′| ≥ |ξ_last| and e = (α−β/2)/(β+k₃+2) otherwise. Samples are
/// summed over the dyadic window `l_window`.
#[allow(clippy::too_many_arguments)]
pub fn sobolev_envelope(
    params: &OperatorParams,
    profile: &RadialProfile,
    k3: f64,
    omega: &KernelOmega,
    xi_samples: &[Frequency],
    l_window: (i32, i32),
    tol: f64,
) -> Result<EnvelopeReport> {
    if xi_samples.is_empty() {
        return Err(Error::InvalidParams("no frequency samples".into()));
    }
    let totals: Vec<f64> = xi_samples
        .iter()
        .map(|xi| Ok(m_total(params, profile, omega, xi, l_window.0, l_window.1, tol)?.value.norm()))
        .collect::<Result<_>>()?;
    let mut groups = Vec::new();
    for kind in [EnvelopeGroupKind::PrimeDominant, EnvelopeGroupKind::LastDominant] {
        let mut members: Vec<(f64, f64)> = xi_samples
            .iter()
            .zip(&totals)
            .filter(|(xi, _)| (xi.prime_norm() >= xi.xi_last.abs()) == (kind == EnvelopeGroupKind::PrimeDominant))
            .map(|(xi, &m)| (xi.norm(), m))
            .collect();
        if members.is_empty() {
            continue;
        }
        members.sort_by(|a, b| a.0.total_cmp(&b.0));
        let predicted_exponent = match kind {
            EnvelopeGroupKind::PrimeDominant => params.envelope_exponent_prime(),
            EnvelopeGroupKind::LastDominant => params.envelope_exponent_last(k3),
        };
        groups.push(envelope_group(kind, predicted_exponent, &members));
    }
    Ok(EnvelopeReport { groups })
}

pub(crate) fn envelope_group(kind: EnvelopeGroupKind, predicted_exponent: f64, members: &[(f64, f64)]) -> EnvelopeGroup {
    let (x0, m0) = members[0];
    let constant = m0 / x0.powf(predicted_exponent);
    let ratios: Vec<f64> = members.iter().map(|&(x, m)| m / (constant * x.powf(predicted_exponent))).collect();
    let pts: Vec<(f64, f64)> = members.iter().filter(|p| p.1 > 0.0).map(|&(x, m)| (x.ln(), m.ln())).collect();
    EnvelopeGroup {
        kind,
        xi_norms: members.iter().map(|p| p.0).collect(),
        abs_m: members.iter().map(|p| p.1).collect(),
        fitted_exponent: least_squares(&pts).map(|p| p.0),
        predicted_exponent,
        constant,
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Harmonic;

    fn setup() -> (OperatorParams, RadialProfile) {
        (OperatorParams::default(), RadialProfile::monomial(3.0).unwrap())
    }

    #[test]
    fn zero_frequency_gives_zero() {
        let (p, prof) = setup();
        let om = KernelOmega::new(vec![Harmonic { k: 1, a: 1.0, b: 0.3 }, Harmonic { k: 2, a: -0.5, b: 0.0 }]).unwrap();
        let xi = Frequency::planar(0.0, 0.0, 0.0);
        for l in [-3, 0, 2] {
            assert_eq!(m_l(&p, &prof, &om, &xi, l, 1e-8).unwrap(), Complex64::new(0.0, 0.0));
            let opts = MlOptions { route: Route::Polar, ..Default::default() };
            let v = m_l_with(&p, &prof, &om, &xi, l, 1e-8, &opts).unwrap().value;
            assert!(v.norm() <= 1e-7, "l {l}: {v}");
        }
    }

    #[test]
    fn bessel_and_polar_routes_agree() {
        let (p, prof) = setup();
        let om = KernelOmega::new(vec![Harmonic { k: 1, a: 1.0, b: 0.0 }, Harmonic { k: 3, a: 0.2, b: -0.7 }]).unwrap();
        let polar = MlOptions { route: Route::Polar, ..Default::default() };
        for (xi, l) in [
            (Frequency::planar(2.0, 1.0, 3.0), 0),
            (Frequency::planar(-4.0, 6.0, -1.0), 1),
            (Frequency::planar(0.5, 0.0, 0.0), -1),
            (Frequency::planar(30.0, -10.0, 2.0), 2),
        ] {
            let a = m_l(&p, &prof, &om, &xi, l, 1e-11).unwrap();
            let b = m_l_with(&p, &prof, &om, &xi, l, 1e-11, &polar).unwrap().value;
            assert!((a - b).norm() <= 1e-8 * a.norm().max(1e-3), "{xi:?} l {l}: {a} vs {b}");
        }
    }

    #[test]
    fn rotation_invariance() {
        let (p, prof) = setup();
        let om = KernelOmega::new(vec![Harmonic { k: 1, a: 1.0, b: 0.0 }, Harmonic { k: 2, a: 0.4, b: 0.1 }]).unwrap();
        let rho = 7.0;
        let a = m_l(&p, &prof, &om, &Frequency::planar(rho, 0.0, 2.0), 1, 1e-11).unwrap();
        let q = PI / 4.0;
        let rot = om.rotated(q);
        let b = m_l(&p, &prof, &rot, &Frequency::planar(rho * q.cos(), rho * q.sin(), 2.0), 1, 1e-11).unwrap();
        assert!((a - b).norm() < 1e-8 * a.norm().max(1.0));
    }

    #[test]
    fn cartesian_oracle_small_case() {
        let (p, prof) = setup();
        let om = KernelOmega::cosine(1);
        let xi = Frequency::planar(3.0, 0.0, 0.0);
        let want = m_l(&p, &prof, &om, &xi, 0, 1e-12).unwrap();
        let got = m_l_cartesian_oracle(&p, &prof, &om, &xi, 0, 512, 256).unwrap();
        assert!((want - got).norm() < 1e-8 * want.norm(), "{want} vs {got}");
    }

    #[test]
    fn zonal_matches_planar_structure() {
        // n = 3 with Ω = cos θ: only checks finiteness and ξ = 0 vanishing.
        let p = OperatorParams::new(3, 0.25, 1.0).unwrap();
        let prof = RadialProfile::monomial(3.0).unwrap();
        let om = ZonalKernel::new(3, vec![0.0, 1.0]).unwrap();
        let z = m_l_zonal(&p, &prof, &om, &Frequency::new(vec![0.0; 3], 0.0), 0, 1e-9, &Quad2dOptions::default()).unwrap();
        assert!(z.value.norm() < 1e-8);
        let v = m_l_zonal(&p, &prof, &om, &Frequency::new(vec![1.0, 2.0, 0.0], 1.0), 0, 1e-9, &Quad2dOptions::default()).unwrap();
        assert!(v.value.norm() > 1e-3 && v.value.norm().is_finite());
    }

    #[test]
    fn lattice_matches_pointwise_sums() {
        let (p, prof) = setup();
        let om = KernelOmega::new(vec![Harmonic { k: 1, a: 1.0, b: 0.5 }, Harmonic { k: 2, a: 0.0, b: 0.8 }]).unwrap();
        let lat = FrequencyLattice { origin: [-3.0, -3.0, -6.0], spacing: [3.0, 3.0, 1.5], dims: [3, 3, 9] };
        let table = multiplier_lattice(&p, &prof, &om, &lat, (-3, 6), 1e-10, &WindowOptions::default()).unwrap();
        for (i, j, k) in [(0, 0, 0), (2, 1, 4), (1, 1, 8), (0, 2, 3), (1, 0, 0)] {
            let xi = lat.at([i, j, k]);
            let want: Complex64 = (-3..=6).map(|l| m_l(&p, &prof, &om, &xi, l, 1e-10).unwrap()).sum();
            let got = table[(i * 3 + j) * 9 + k];
            assert!((got - want).norm() < 1e-8, "{xi:?}: {got} vs {want}");
        }
    }

    #[test]
    fn tail_arithmetic() {
        let p = OperatorParams::default();
        let f = tail_factor(&p, -20, 20);
        let q = 2f64.powf(-0.25);
        let want = q.powi(21) / (1.0 - q) + 2f64.powf(-5.25) / (1.0 - 2f64.powf(-0.25));
        assert!((f - want).abs() < 1e-15);
        assert!(matches!(
            m_total(&p, &RadialProfile::monomial(3.0).unwrap(), &KernelOmega::cosine(1), &Frequency::planar(1.0, 0.0, 0.0), 0, 3, 1e-8),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn fit_on_synthetic_values() {
        let p = OperatorParams::default();
        let vals: Vec<Complex64> = (2..=10).map(|l| Complex64::new(3.0 * 2f64.powf(-0.4 * l as f64), 0.0)).collect();
        let fit = fit_values(&p, 2, &vals).unwrap();
        assert!((fit.fitted_slope.unwrap() + 0.4).abs() < 1e-12);
        assert!((fit.max_ratio_excess - 1.0).abs() < 1e-12);
        let mut vals2 = vals.clone();
        vals2[3] = Complex64::new(0.0, 0.0);
        let fit2 = fit_values(&p, 2, &vals2).unwrap();
        assert_eq!(fit2.excluded, vec![5]);
        vals2[0] = Complex64::new(0.0, 0.0);
        assert!(matches!(fit_values(&p, 2, &vals2), Err(Error::DegenerateData(_))));
    }
}
