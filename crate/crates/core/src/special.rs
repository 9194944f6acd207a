//! Integer-order Bessel functions of real argument.
//!
//! Small arguments use Miller's backward recurrence normalised by
//! J₀ + 2ΣJ₂ₖ = 1; large arguments use the Hankel expansion. The expansion
//! is also exposed through the modulation factor M_k(x) = H⁽¹⁾_k(x) e^{−ix},
//! which carries no oscillation and lets callers fold e^{±ix} into a phase.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Arguments at or above this use the asymptotic expansion.
pub fn hankel_threshold(kmax: u32) -> f64 {
    40f64.max(2.0 * (kmax as f64).powi(2))
}

/// J₀(x), …, J_kmax(x) for x ≥ 0.
pub fn bessel_j_all(kmax: u32, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; kmax as usize + 1];
    bessel_j_into(kmax, x, &mut out);
    out
}

pub fn bessel_j_into(kmax: u32, x: f64, out: &mut [f64]) {
    let x = x.abs();
    if x == 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[0] = 1.0;
        return;
    }
    if x >= hankel_threshold(kmax) {
        let (s, c) = x.sin_cos();
        let e = Complex64::new(c, s);
        for (k, v) in out.iter_mut().enumerate() {
            *v = (hankel_modulation(k as u32, x) * e).re;
        }
        return;
    }
    miller(kmax, x, out);
}

fn miller(kmax: u32, x: f64, out: &mut [f64]) {
    let m = (kmax as f64).max(x);
    let mut start = (m + 20.0 + (40.0 * m).sqrt()) as usize;
    start += start % 2;
    let mut jp1 = 0.0;
    let mut j = 1e-300;
    let mut norm = 0.0;
    out.iter_mut().for_each(|v| *v = 0.0);
    for n in (1..=start).rev() {
        let jm1 = 2.0 * n as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        // j now holds the unnormalised J_{n−1}
        let idx = n - 1;
        if idx <= kmax as usize {
            out[idx] = j;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            let sc = 1e-250;
            j *= sc;
            jp1 *= sc;
            norm *= sc;
            out.iter_mut().for_each(|v| *v *= sc);
        }
    }
    norm += j;
    out.iter_mut().for_each(|v| *v /= norm);
}

/// M_k(x) = H⁽¹⁾_k(x) e^{−ix} from the Hankel expansion; valid for
/// x ≥ [`hankel_threshold`]. J_k(x) = Re(M_k(x) e^{ix}).
pub fn hankel_modulation(k: u32, x: f64) -> Complex64 {
    let mu = 4.0 * (k as f64).powi(2);
    let mut term = 1.0;
    let mut sum = Complex64::new(1.0, 0.0);
    let mut ipow = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for j in 1..200 {
        let odd = (2 * j - 1) as f64;
        term *= (mu - odd * odd) / (j as f64 * 8.0 * x);
        ipow *= Complex64::new(0.0, 1.0);
        let t = term.abs();
        if t == 0.0 || t < 1e-17 {
            break;
        }
        if t > last {
            break;
        }
        sum += ipow * term;
        last = t;
    }
    let phase = -(k as f64) * PI / 2.0 - PI / 4.0;
    (2.0 / (PI * x)).sqrt() * Complex64::from_polar(1.0, phase) * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    // Power series Σ (−1)^m (x/2)^{2m+k} / (m!(m+k)!); cancellation keeps
    // it accurate only for moderate x.
    fn series(k: u32, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
        let mut s = term;
        for m in 1..300 {
            term *= -(x * x / 4.0) / (m as f64 * (m + k) as f64);
            s += term;
            if term.abs() < 1e-30 {
                break;
            }
        }
        s
    }

    #[test]
    fn miller_matches_series() {
        for &x in &[0.1, 1.0, 2.5, 7.0] {
            let v = bessel_j_all(6, x);
            for k in 0..=6 {
                assert!((v[k] - series(k as u32, x)).abs() < 1e-13, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn known_values() {
        // J0(1), J1(1), J0 first zero
        let v = bessel_j_all(1, 1.0);
        assert!((v[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((v[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!(bessel_j_all(0, 2.404_825_557_695_773)[0].abs() < 1e-15);
        // J0(100), J3(60)
        assert!((bessel_j_all(0, 100.0)[0] - 0.019_985_850_304_223_122).abs() < 1e-15);
        assert!((bessel_j_all(3, 60.0)[3] + 0.040_396_711_521_655_165).abs() < 1e-14);
    }

    #[test]
    fn branches_agree_at_threshold() {
        for k in 0..=4u32 {
            let x = hankel_threshold(4);
            let mut mil = vec![0.0; 5];
            miller(4, x, &mut mil);
            let asy = (hankel_modulation(k, x) * Complex64::from_polar(1.0, x)).re;
            assert!((mil[k as usize] - asy).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn wronskian_at_large_argument() {
        // J_{k+1} Y_k − J_k Y_{k+1} = 2/(πx)
        for &x in &[50.0, 400.0, 1e5] {
            for k in 0..3 {
                let h0 = hankel_modulation(k, x) * Complex64::from_polar(1.0, x);
                let h1 = hankel_modulation(k + 1, x) * Complex64::from_polar(1.0, x);
                let w = h1.re * h0.im - h0.re * h1.im;
                assert!((w - 2.0 / (PI * x)).abs() < 1e-14 / x);
            }
        }
    }
}
