use std::f64::consts::PI;

use hyperosc::kernel::{Harmonic, KernelOmega};
use hyperosc::multiplier::{decay_fit, m_l, m_total};
use hyperosc::{Frequency, OperatorParams, RadialProfile};
use proptest::prelude::*;

fn cubic() -> RadialProfile {
    RadialProfile::monomial(3.0).unwrap()
}

#[test]
fn decay_examples() {
    let om = KernelOmega::cosine(1);
    let xi = Frequency::planar(1.0, 0.0, 1.0);
    for alpha in [0.25, 0.4] {
        let p = OperatorParams::new(2, alpha, 1.0).unwrap();
        let pos = decay_fit(&p, &cubic(), &om, &xi, (2, 10), 1e-9).unwrap();
        assert!(pos.max_ratio_excess <= 3.0, "alpha {alpha}: {}", pos.max_ratio_excess);
        assert!((pos.predicted_slope - (alpha - 0.5)).abs() < 1e-15);
        let neg = decay_fit(&p, &cubic(), &om, &xi, (-10, -2), 1e-9).unwrap();
        assert!(neg.max_ratio_excess <= 3.0, "alpha {alpha}: {}", neg.max_ratio_excess);
        assert_eq!(neg.predicted_slope, alpha);
    }
}

#[test]
fn widening_the_window_stays_within_the_tail_bound() {
    let p = OperatorParams::default();
    let om = KernelOmega::new(vec![Harmonic { k: 1, a: 1.0, b: 0.0 }, Harmonic { k: 2, a: 0.3, b: -0.2 }]).unwrap();
    for x in [[1.0, 0.5, 0.3], [3.0, -2.0, 7.0], [0.2, 0.1, -1.0]] {
        let xi = Frequency::planar(x[0], x[1], x[2]);
        let narrow = m_total(&p, &cubic(), &om, &xi, -20, 20, 1e-9).unwrap();
        let wide = m_total(&p, &cubic(), &om, &xi, -24, 24, 1e-9).unwrap();
        assert!((wide.value - narrow.value).norm() <= narrow.tail_bound, "{x:?}");
    }
}

#[test]
fn zero_frequency_total() {
    let p = OperatorParams::default();
    let t = m_total(&p, &cubic(), &KernelOmega::cosine(2), &Frequency::planar(0.0, 0.0, 0.0), -20, 20, 1e-8).unwrap();
    assert!(t.value.norm() <= 41.0 * 10.0 * 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trivial_bound(x in [-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64], l in -12i32..=12, alpha in 0.05..0.45f64) {
        let p = OperatorParams::new(2, alpha, 1.0).unwrap();
        let om = KernelOmega::new(vec![Harmonic { k: 1, a: 0.8, b: 0.6 }, Harmonic { k: 3, a: -0.5, b: 0.0 }]).unwrap();
        let v = m_l(&p, &cubic(), &om, &Frequency::planar(x[0], x[1], x[2]), l, 1e-8).unwrap();
        let c = 4.0 * PI * om.sup_bound() * 2f64.powf(alpha + 1.0) * 1.5;
        prop_assert!(v.norm() <= c * 2f64.powf(alpha * l as f64), "|m_l| = {} at l = {l}", v.norm());
    }
}
