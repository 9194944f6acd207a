//! ℛ on grid functions: spectrally through a multiplier table, directly by
//! quadrature over the truncated kernel, and the norm studies built on both.

mod direct;
mod grid;
mod studies;
mod table;

pub use direct::{apply_direct, periodic_gaussian_1d, periodized_gaussian, RadialTruncation, DEFAULT_EVALUATION_CAP};
pub use grid::{
    lp_norm, modulated_gaussian, norm_report, pairing, sobolev_norm, spectral_tail_fraction, GridFunction, GridGeometry,
    NormKind, NormReport,
};
pub use studies::*;
pub use table::{MultiplierSpec, MultiplierTable};

use crate::error::Result;

/// Spectral energy share above which [`apply_spectral`] warns of leakage.
pub const LEAKAGE_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralApplication {
    pub output: GridFunction,
    /// Share of the input's spectral energy in the outer quarter of the band.
    pub tail_fraction: f64,
    pub leakage: bool,
}

fn multiply(f: &GridFunction, table: &MultiplierTable, conjugate: bool) -> Result<SpectralApplication> {
    table.check_grid(f)?;
    let g = *f.geometry();
    let mut spec = f.spectrum();
    let tail_fraction = grid::tail_of_spectrum(&g, &spec);
    let leakage = tail_fraction > LEAKAGE_THRESHOLD;
    if leakage {
        log::warn!("spectral leakage: {tail_fraction:.3e} of the energy lies in the outer quarter of the band");
    }
    for (v, m) in spec.iter_mut().zip(table.values()) {
        *v *= if conjugate { m.conj() } else { *m };
    }
    Ok(SpectralApplication { output: GridFunction::from_spectrum(g, spec)?, tail_fraction, leakage })
}

/// (m·f̂)^∨ on the grid, with the leakage diagnostic.
pub fn apply_spectral_report(f: &GridFunction, table: &MultiplierTable) -> Result<SpectralApplication> {
    multiply(f, table, false)
}

/// (m·f̂)^∨ on the grid.
pub fn apply_spectral(f: &GridFunction, table: &MultiplierTable) -> Result<GridFunction> {
    Ok(multiply(f, table, false)?.output)
}

/// (m̄·ĝ)^∨, the adjoint of [`apply_spectral`] for [`pairing`].
pub fn adjoint_apply_spectral(g: &GridFunction, table: &MultiplierTable) -> Result<GridFunction> {
    Ok(multiply(g, table, true)?.output)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use num_complex::Complex64;

    use super::*;
    use crate::kernel::KernelOmega;
    use crate::params::OperatorParams;
    use crate::profiles::RadialProfile;
    use crate::quadrature::WindowOptions;

    fn spec() -> MultiplierSpec {
        MultiplierSpec {
            params: OperatorParams::default(),
            profile: RadialProfile::monomial(3.0).unwrap(),
            omega: KernelOmega::cosine(1),
            l_window: (-2, 3),
            tol: 1e-8,
            window: WindowOptions::default(),
        }
    }

    fn pseudo_random(g: GridGeometry, seed: u64) -> GridFunction {
        // A few low lattice modes with fixed pseudo-random coefficients.
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let modes: Vec<([f64; 3], Complex64)> = (0..6)
            .map(|_| {
                let m = [(next() * 4.0).round(), (next() * 4.0).round(), (next() * 4.0).round()];
                (m, Complex64::new(next(), next()))
            })
            .collect();
        GridFunction::from_fn(g, |x| {
            modes
                .iter()
                .map(|(m, c)| c * Complex64::from_polar(1.0, 2.0 * PI * (m[0] * x[0] + m[1] * x[1] + m[2] * x[2]) / g.box_length))
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn spectral_identities() {
        let g = GridGeometry::with_carrier([8, 8, 8], 4.0, [0.25, -0.5, 1.0]).unwrap();
        let t = MultiplierTable::build(&spec(), &g).unwrap();
        let zero = GridFunction::zeros(g).unwrap();
        assert!(apply_spectral(&zero, &t).unwrap().samples().iter().all(|v| v.norm() == 0.0));
        let mmax = t.max_abs();
        for seed in 0..10 {
            let f = pseudo_random(g, seed);
            let h = pseudo_random(g, seed + 100);
            let rf = apply_spectral(&f, &t).unwrap();
            assert!(lp_norm(&rf, 2.0).unwrap() <= mmax * lp_norm(&f, 2.0).unwrap() * (1.0 + 1e-12));
            let lhs = pairing(&rf, &h).unwrap();
            let rhs = pairing(&f, &adjoint_apply_spectral(&h, &t).unwrap()).unwrap();
            // Relative to the Cauchy–Schwarz scale, since ⟨ℛf, h⟩ can nearly vanish.
            let cs = lp_norm(&rf, 2.0).unwrap() * lp_norm(&h, 2.0).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10 * cs, "{lhs} {rhs}");
            let rsrf = adjoint_apply_spectral(&rf, &t).unwrap();
            let q = pairing(&rsrf, &f).unwrap();
            assert!(q.re >= 0.0 && q.im.abs() <= 1e-10 * q.re.max(1e-300));
            // linearity
            let c = Complex64::new(0.3, -1.7);
            let lin = apply_spectral(&f.scale(c).add(&h).unwrap(), &t).unwrap();
            let want = rf.scale(c).add(&apply_spectral(&h, &t).unwrap()).unwrap();
            let err = lin.samples().iter().zip(want.samples()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let scale = want.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * scale);
        }
    }

    #[test]
    fn single_mode_is_diagonal() {
        let g = GridGeometry::with_carrier([8, 8, 8], 4.0, [0.25, -0.5, 1.0]).unwrap();
        let s = spec();
        let t = MultiplierTable::build(&s, &g).unwrap();
        let m = [1.0, -2.0, 3.0];
        let f = GridFunction::from_fn(g, |x| Complex64::from_polar(1.0, 2.0 * PI * (m[0] * x[0] + m[1] * x[1] + m[2] * x[2]) / 4.0)).unwrap();
        let out = apply_spectral(&f, &t).unwrap();
        let xi: Vec<f64> = (0..3).map(|a| g.carrier[a] + m[a] / 4.0).collect();
        let pieces: Vec<Complex64> = (s.l_window.0..=s.l_window.1)
            .map(|l| crate::multiplier::m_l(&s.params, &s.profile, &s.omega, &crate::Frequency::planar(xi[0], xi[1], xi[2]), l, 1e-10).unwrap())
            .collect();
        let want: Complex64 = pieces.iter().sum();
        for (o, v) in out.samples().iter().zip(f.samples()) {
            assert!((o - want * v).norm() <= 1e-6 * want.norm(), "{o} vs {}", want * v);
        }
    }

    #[test]
    fn lattice_shifts_preserve_norms() {
        let g = GridGeometry::new([8, 8, 8], 4.0).unwrap();
        let t = MultiplierTable::build(&spec(), &g).unwrap();
        let f = pseudo_random(g, 7);
        let a = apply_spectral(&f, &t).unwrap();
        let b = apply_spectral(&f.roll([2, -3, 5]), &t).unwrap();
        for p in [1.0, 2.0, 3.5] {
            let (x, y) = (lp_norm(&a, p).unwrap(), lp_norm(&b, p).unwrap());
            assert!((x - y).abs() <= 1e-8 * x);
        }
    }
}
