use std::sync::OnceLock;

use hyperosc::bumps::{chi, compute_epsilons, eta_unchecked, kappa, PatchSet, KAPPA_PERIOD};
use hyperosc::kernel::{Harmonic, KernelOmega};
use hyperosc::multiplier::{m_l, m_l_with, MlOptions, Route};
use hyperosc::operator::{
    adjoint_apply_spectral, apply_spectral, lp_norm, modulated_gaussian, pairing, sobolev_norm, GridFunction, GridGeometry,
    MultiplierSpec, MultiplierTable,
};
use hyperosc::phase::check_lemma_lower_bound;
use hyperosc::profiles::certify_admissibility;
use hyperosc::quadrature::WindowOptions;
use hyperosc::{Frequency, OperatorParams, RadialProfile};
use num_complex::Complex64;
use proptest::prelude::*;

fn table() -> &'static MultiplierTable {
    static T: OnceLock<MultiplierTable> = OnceLock::new();
    T.get_or_init(|| {
        let spec = MultiplierSpec {
            params: OperatorParams::default(),
            profile: RadialProfile::monomial(3.0).unwrap(),
            omega: KernelOmega::cosine(1),
            l_window: (-1, 1),
            tol: 1e-6,
            window: WindowOptions::default(),
        };
        MultiplierTable::build(&spec, &GridGeometry::new([8, 8, 8], 4.0).unwrap()).unwrap()
    })
}

fn gaussian(center: [f64; 3], width: f64, modulation: [f64; 3]) -> GridFunction {
    modulated_gaussian(*table().geometry(), center, width, modulation).unwrap()
}

fn coord() -> impl Strategy<Value = [f64; 3]> {
    [-1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eta_partition(log_r in -40.0..40.0f64) {
        let r = log_r.exp2();
        let s: f64 = (-60..=60).map(|l| eta_unchecked(2f64.powi(l) * r)).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12, "sum {s} at r = {r}");
    }

    #[test]
    fn kappa_partition(x in -10.0..10.0f64) {
        let s: f64 = (-12..=12).map(|z| kappa(x + KAPPA_PERIOD * z as f64)).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn chi_partition(r in 0.5..=2.0f64, theta in 0.0..=std::f64::consts::PI, k2 in 0.5..4.0f64, k3 in 0.1..3.0f64) {
        let eps = compute_epsilons(k2, k3, 1.0, 0.5).unwrap();
        let set = PatchSet::new(&eps);
        let s: f64 = set.patches_at(&eps, r, theta).into_iter().map(|j| chi(j, &eps, r, theta)).sum();
        prop_assert!((s - 1.0).abs() <= 1e-10, "sum {s}");
    }

    #[test]
    fn monomial_constants(gamma in 1.05..8.0f64) {
        let c = certify_admissibility(&RadialProfile::monomial(gamma).unwrap(), 1e-3, 1e3, 257).unwrap();
        prop_assert!(c.admissible());
        prop_assert!((c.k1_hat - (gamma - 1.0)).abs() < 1e-10);
        prop_assert!((c.k2_hat - (gamma - 1.0)).abs() < 1e-10);
        prop_assert!((c.k3_hat - (gamma - 2.0).abs()).abs() < 1e-10);
    }

    #[test]
    fn lp_norm_is_homogeneous(c in coord(), w in 0.3..1.0f64, a in -3.0..3.0f64, b in -3.0..3.0f64, p in 1.0..16.0f64) {
        let f = gaussian(c, w, [0.0; 3]);
        let z = Complex64::new(a, b);
        let lhs = lp_norm(&f.scale(z), p).unwrap();
        let rhs = z.norm() * lp_norm(&f, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn sobolev_norm_is_monotone_in_s(c in coord(), w in 0.3..1.0f64, s in 0.0..2.0f64, ds in 0.01..1.0f64) {
        let f = gaussian(c, w, [0.0; 3]);
        prop_assert!(sobolev_norm(&f, s).unwrap() <= sobolev_norm(&f, s + ds).unwrap() * (1.0 + 1e-12));
        let l2 = lp_norm(&f, 2.0).unwrap();
        prop_assert!((sobolev_norm(&f, 0.0).unwrap() - l2).abs() <= 1e-12 * l2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_application_is_linear(c1 in coord(), c2 in coord(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let f = gaussian(c1, 0.6, [0.25, 0.0, -0.5]);
        let g = gaussian(c2, 0.8, [0.0, 0.5, 0.25]);
        let z = Complex64::new(a, b);
        let lhs = apply_spectral(&f.scale(z).add(&g).unwrap(), table()).unwrap();
        let rhs = apply_spectral(&f, table()).unwrap().scale(z).add(&apply_spectral(&g, table()).unwrap()).unwrap();
        let scale = lp_norm(&lhs, 2.0).unwrap().max(1e-300);
        let diff = lhs.add(&rhs.scale(Complex64::new(-1.0, 0.0))).unwrap();
        prop_assert!(lp_norm(&diff, 2.0).unwrap() <= 1e-12 * scale);
    }

    #[test]
    fn adjoint_pairing(c1 in coord(), c2 in coord(), w1 in 0.4..1.0f64, w2 in 0.4..1.0f64) {
        let f = gaussian(c1, w1, [0.5, 0.0, 0.0]);
        let h = gaussian(c2, w2, [0.0, 0.0, 0.75]);
        let left = pairing(&apply_spectral(&f, table()).unwrap(), &h).unwrap();
        let right = pairing(&f, &adjoint_apply_spectral(&h, table()).unwrap()).unwrap();
        let scale = lp_norm(&f, 2.0).unwrap() * lp_norm(&h, 2.0).unwrap();
        prop_assert!((left - right).norm() <= 1e-10 * scale);
    }

    #[test]
    fn spectral_bound_by_sup_of_table(c in coord(), w in 0.3..1.0f64, m in [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]) {
        let f = gaussian(c, w, m);
        let out = apply_spectral(&f, table()).unwrap();
        prop_assert!(lp_norm(&out, 2.0).unwrap() <= table().max_abs() * lp_norm(&f, 2.0).unwrap() * (1.0 + 1e-10));
    }

    #[test]
    fn shifts_commute_with_spectral_application(c in coord(), s in [-4i64..4, -4i64..4, -4i64..4]) {
        let f = gaussian(c, 0.7, [0.0; 3]);
        let a = apply_spectral(&f.roll(s), table()).unwrap();
        let b = apply_spectral(&f, table()).unwrap().roll(s);
        let diff = a.add(&b.scale(Complex64::new(-1.0, 0.0))).unwrap();
        prop_assert!(lp_norm(&diff, 2.0).unwrap() <= 1e-10 * lp_norm(&a, 2.0).unwrap().max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lemma_bound_holds_at_the_safe_epsilon(
        log_norm in -3.0..6.0f64,
        dir in [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64],
        l in -10i32..=10,
    ) {
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        prop_assume!(n > 1e-3);
        let s = 10f64.powf(log_norm) / n;
        let xi = Frequency::planar(dir[0] * s, dir[1] * s, dir[2] * s);
        let params = OperatorParams::default();
        let eps = compute_epsilons(2.0, 1.0, 1.0, 0.5).unwrap();
        let rep = check_lemma_lower_bound(&params, &RadialProfile::monomial(3.0).unwrap(), &xi, l, &eps, (41, 41));
        prop_assert!(rep.pass, "min ratio {} at {:?}", rep.min_ratio, rep.worst_point);
    }

    #[test]
    fn routes_agree(x in [-4.0..4.0f64, -4.0..4.0f64, -2.0..2.0f64], l in -1i32..=2) {
        let params = OperatorParams::default();
        let prof = RadialProfile::monomial(3.0).unwrap();
        let om = KernelOmega::new(vec![Harmonic { k: 1, a: 1.0, b: -0.4 }, Harmonic { k: 2, a: 0.3, b: 0.0 }]).unwrap();
        let xi = Frequency::planar(x[0], x[1], x[2]);
        let bessel = m_l(&params, &prof, &om, &xi, l, 1e-10).unwrap();
        let polar = m_l_with(&params, &prof, &om, &xi, l, 1e-10, &MlOptions { route: Route::Polar, ..Default::default() }).unwrap().value;
        prop_assert!((bessel - polar).norm() <= 1e-7 * (1.0 + bessel.norm()), "{bessel} vs {polar}");
    }

    #[test]
    fn multiplier_is_rotation_covariant(x in [-3.0..3.0f64, -3.0..3.0f64, -2.0..2.0f64], angle in 0.0..6.28f64, l in -1i32..=1) {
        // m_l for Ω(· − a) at R_a ξ′ equals m_l for Ω at ξ′.
        let params = OperatorParams::default();
        let prof = RadialProfile::monomial(3.0).unwrap();
        let om = KernelOmega::new(vec![Harmonic { k: 1, a: 0.7, b: 0.2 }, Harmonic { k: 3, a: 0.0, b: 1.0 }]).unwrap();
        let (s, c) = angle.sin_cos();
        let xi = Frequency::planar(x[0], x[1], x[2]);
        let rot = Frequency::planar(c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]);
        let a = m_l(&params, &prof, &om, &xi, l, 1e-10).unwrap();
        let b = m_l(&params, &prof, &om.rotated(angle), &rot, l, 1e-10).unwrap();
        prop_assert!((a - b).norm() <= 1e-7 * (1.0 + a.norm()), "{a} vs {b}");
    }
}
