use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::pairwise_sum_f64;

/// Sample counts, box and carrier of a grid.
///
/// A grid function stands for f(x) = e^{2πi c·x} g(x) on the periodic box
/// [−L/2, L/2)³, with g sampled at x_n = −L/2 + n·L/N. Its discrete
/// frequencies are c + m/L with m ∈ [−N/2, N/2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub dims: [usize; 3],
    pub box_length: f64,
    #[serde(default)]
    pub carrier: [f64; 3],
}

impl GridGeometry {
    pub fn new(dims: [usize; 3], box_length: f64) -> Result<Self> {
        Self::with_carrier(dims, box_length, [0.0; 3])
    }

    pub fn with_carrier(dims: [usize; 3], box_length: f64, carrier: [f64; 3]) -> Result<Self> {
        let g = GridGeometry { dims, box_length, carrier };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for &n in &self.dims {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("sample counts must be even and at least 8, got {:?}", self.dims)));
            }
        }
        if !(self.box_length > 0.0 && self.box_length.is_finite()) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {}", self.box_length)));
        }
        if !self.carrier.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidGrid("carrier must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.box_length / self.dims[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..3).map(|a| self.spacing(a)).product()
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let [_, n1, n2] = self.dims;
        [idx / (n1 * n2), (idx / n2) % n1, idx % n2]
    }

    #[inline]
    pub fn point(&self, n: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|a| -0.5 * self.box_length + n[a] as f64 * self.spacing(a))
    }

    /// Signed index m of FFT slot i along an axis of length n.
    #[inline]
    pub fn signed(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Frequency c + m/L of FFT slot `n`.
    #[inline]
    pub fn frequency(&self, n: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.carrier[a] + Self::signed(n[a], self.dims[a]) as f64 / self.box_length)
    }
}

/// Samples of a function on a [`GridGeometry`]. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    geometry: GridGeometry,
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(geometry: GridGeometry, samples: Vec<Complex64>) -> Result<Self> {
        geometry.validate()?;
        if samples.len() != geometry.len() {
            return Err(Error::InvalidGrid(format!("{} samples for a grid of {}", samples.len(), geometry.len())));
        }
        if !samples.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::InvalidGrid("samples must be finite".into()));
        }
        Ok(GridFunction { geometry, samples })
    }

    /// Samples the envelope g at the grid points.
    pub fn from_fn<F: Fn([f64; 3]) -> Complex64>(geometry: GridGeometry, g: F) -> Result<Self> {
        geometry.validate()?;
        let samples = (0..geometry.len()).map(|i| g(geometry.point(geometry.unravel(i)))).collect();
        Self::new(geometry, samples)
    }

    pub fn zeros(geometry: GridGeometry) -> Result<Self> {
        Self::new(geometry, vec![Complex64::new(0.0, 0.0); geometry.len()])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// f(x_n) = e^{2πi c·x_n} g(x_n).
    pub fn value_at(&self, n: [usize; 3]) -> Complex64 {
        let x = self.geometry.point(n);
        let c = self.geometry.carrier;
        let idx = (n[0] * self.geometry.dims[1] + n[1]) * self.geometry.dims[2] + n[2];
        self.samples[idx] * Complex64::from_polar(1.0, 2.0 * PI * (c[0] * x[0] + c[1] * x[1] + c[2] * x[2]))
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        GridFunction { geometry: self.geometry, samples: self.samples.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.geometry != other.geometry {
            return Err(Error::InvalidGrid("adding functions on different grids".into()));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Ok(GridFunction { geometry: self.geometry, samples })
    }

    /// Periodic shift by whole cells: the result at n is f at n − shift.
    pub fn roll(&self, shift: [i64; 3]) -> GridFunction {
        let g = self.geometry;
        let d = g.dims;
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let n = g.unravel(i);
            let src: [usize; 3] = std::array::from_fn(|a| (n[a] as i64 - shift[a]).rem_euclid(d[a] as i64) as usize);
            *o = self.samples[(src[0] * d[1] + src[1]) * d[2] + src[2]];
        }
        GridFunction { geometry: g, samples: out }
    }

    /// Unnormalised forward DFT of the envelope samples, in FFT slot order.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.samples.clone();
        fft3(&mut data, self.geometry.dims, FftDirection::Forward);
        data
    }

    /// Inverse of [`spectrum`](Self::spectrum) (including the 1/N³).
    pub fn from_spectrum(geometry: GridGeometry, mut spec: Vec<Complex64>) -> Result<Self> {
        fft3(&mut spec, geometry.dims, FftDirection::Inverse);
        let k = 1.0 / geometry.len() as f64;
        spec.iter_mut().for_each(|v| *v *= k);
        Self::new(geometry, spec)
    }
}

/// In-place 3D FFT along all axes (row-major, last axis contiguous).
pub(crate) fn fft3(data: &mut [Complex64], dims: [usize; 3], dir: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let [n0, n1, n2] = dims;
    planner.plan_fft(n2, dir).process(data);
    let f1 = planner.plan_fft(n1, dir);
    let mut buf = vec![Complex64::new(0.0, 0.0); n1];
    for i in 0..n0 {
        for k in 0..n2 {
            for j in 0..n1 {
                buf[j] = data[(i * n1 + j) * n2 + k];
            }
            f1.process(&mut buf);
            for j in 0..n1 {
                data[(i * n1 + j) * n2 + k] = buf[j];
            }
        }
    }
    let f0 = planner.plan_fft(n0, dir);
    let mut buf = vec![Complex64::new(0.0, 0.0); n0];
    for j in 0..n1 {
        for k in 0..n2 {
            for i in 0..n0 {
                buf[i] = data[(i * n1 + j) * n2 + k];
            }
            f0.process(&mut buf);
            for i in 0..n0 {
                data[(i * n1 + j) * n2 + k] = buf[i];
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    Lp { p: f64 },
    Sobolev { s: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub kind: NormKind,
    pub value: f64,
}

/// Riemann sum (Σ|f|^p · cell volume)^{1/p}, p ∈ [1, 16].
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if !(1.0..=16.0).contains(&p) {
        return Err(Error::InvalidParams(format!("p must lie in [1, 16], got {p}")));
    }
    // The carrier has modulus one, so |f| = |g| at the grid points.
    let terms: Vec<f64> = f.samples.iter().map(|v| v.norm().powf(p)).collect();
    Ok((pairwise_sum_f64(&terms) * f.geometry.cell_volume()).powf(1.0 / p))
}

/// L² norm of ((1 + |ξ|²)^{s/2} f̂)^∨ on the lattice, |s| ≤ 4.
pub fn sobolev_norm(f: &GridFunction, s: f64) -> Result<f64> {
    if !(s.abs() <= 4.0) {
        return Err(Error::InvalidParams(format!("|s| must be at most 4, got {s}")));
    }
    if s == 0.0 {
        return lp_norm(f, 2.0);
    }
    let g = f.geometry;
    let spec = f.spectrum();
    let terms: Vec<f64> = spec
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let xi = g.frequency(g.unravel(i));
            let w = (1.0 + xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).powf(s);
            w * v.norm_sqr()
        })
        .collect();
    // Parseval: Σ|g_n|² = Σ|ĝ_k|² / N³
    Ok((pairwise_sum_f64(&terms) * g.cell_volume() / g.len() as f64).sqrt())
}

pub fn norm_report(f: &GridFunction, kind: NormKind) -> Result<NormReport> {
    let value = match kind {
        NormKind::Lp { p } => lp_norm(f, p)?,
        NormKind::Sobolev { s } => sobolev_norm(f, s)?,
    };
    Ok(NormReport { kind, value })
}

/// ⟨f, g⟩ = Σ f·ḡ · cell volume (carriers must agree, so they cancel).
pub fn pairing(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    if f.geometry != g.geometry {
        return Err(Error::InvalidGrid("pairing functions on different grids".into()));
    }
    let re: Vec<f64> = f.samples.iter().zip(&g.samples).map(|(a, b)| (a * b.conj()).re).collect();
    let im: Vec<f64> = f.samples.iter().zip(&g.samples).map(|(a, b)| (a * b.conj()).im).collect();
    Ok(Complex64::new(pairwise_sum_f64(&re), pairwise_sum_f64(&im)) * f.geometry.cell_volume())
}

/// Share of spectral energy with some |m_i| > 3N_i/8, i.e. in the outer
/// quarter of the band.
pub fn spectral_tail_fraction(f: &GridFunction) -> f64 {
    tail_of_spectrum(&f.geometry, &f.spectrum())
}

pub(crate) fn tail_of_spectrum(g: &GridGeometry, spec: &[Complex64]) -> f64 {
    let mut tail = Vec::new();
    let energy: Vec<f64> = spec.iter().map(|v| v.norm_sqr()).collect();
    for (i, &e) in energy.iter().enumerate() {
        let n = g.unravel(i);
        if (0..3).any(|a| GridGeometry::signed(n[a], g.dims[a]).unsigned_abs() as usize * 8 > 3 * g.dims[a]) {
            tail.push(e);
        }
    }
    let t = pairwise_sum_f64(&energy);
    if t == 0.0 {
        0.0
    } else {
        pairwise_sum_f64(&tail) / t
    }
}

/// Envelope e^{−π|x − center|²/w²} e^{2πi q·x} on the grid. The modulation
/// q is sampled into the envelope; the grid carrier is applied on top.
pub fn modulated_gaussian(geometry: GridGeometry, center: [f64; 3], width: f64, modulation: [f64; 3]) -> Result<GridFunction> {
    if !(width > 0.0) {
        return Err(Error::InvalidParams(format!("width must be positive, got {width}")));
    }
    GridFunction::from_fn(geometry, |x| {
        let r2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
        let ph = 2.0 * PI * (0..3).map(|a| modulation[a] * x[a]).sum::<f64>();
        Complex64::from_polar((-PI * r2 / (width * width)).exp(), ph)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_l2_norm() {
        let g = GridGeometry::new([64, 64, 64], 16.0).unwrap();
        let f = modulated_gaussian(g, [0.0; 3], 1.0, [0.0; 3]).unwrap();
        let n = lp_norm(&f, 2.0).unwrap();
        assert!((n - 2f64.powf(-0.75)).abs() < 1e-6 * n);
        assert_eq!(sobolev_norm(&f, 0.0).unwrap(), n);
    }

    #[test]
    fn parseval() {
        let g = GridGeometry::with_carrier([8, 10, 12], 5.0, [0.3, 0.0, -1.0]).unwrap();
        let f = GridFunction::from_fn(g, |x| Complex64::new((x[0] * 1.3).sin() + x[2], x[1].cos())).unwrap();
        let spec = f.spectrum();
        let lhs: f64 = f.samples().iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_volume();
        let rhs: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_volume() / g.len() as f64;
        assert!((lhs - rhs).abs() < 1e-10 * lhs);
        let back = GridFunction::from_spectrum(g, spec).unwrap();
        for (a, b) in back.samples().iter().zip(f.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_in_one_slot() {
        let g = GridGeometry::new([8, 8, 8], 4.0).unwrap();
        let m = [1i64, -2, 3];
        let f = GridFunction::from_fn(g, |x| {
            Complex64::from_polar(1.0, 2.0 * PI * (m[0] as f64 * x[0] + m[1] as f64 * x[1] + m[2] as f64 * x[2]) / 4.0)
        })
        .unwrap();
        let spec = f.spectrum();
        let (imax, _) = spec.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
        let n = g.unravel(imax);
        let freq = g.frequency(n);
        for a in 0..3 {
            assert!((freq[a] - m[a] as f64 / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridGeometry::new([7, 8, 8], 1.0).is_err());
        assert!(GridGeometry::new([8, 8, 6], 1.0).is_err());
        assert!(GridGeometry::new([8, 8, 8], 0.0).is_err());
        assert!(lp_norm(&GridFunction::zeros(GridGeometry::new([8, 8, 8], 1.0).unwrap()).unwrap(), 0.5).is_err());
    }

    #[test]
    fn roll_moves_samples() {
        let g = GridGeometry::new([8, 8, 8], 1.0).unwrap();
        let f = GridFunction::from_fn(g, |x| Complex64::new(x[0] + 10.0 * x[1] + 100.0 * x[2], 0.0)).unwrap();
        let r = f.roll([1, 0, -2]);
        let d = g.dims;
        let at = |h: &GridFunction, n: [usize; 3]| h.samples()[(n[0] * d[1] + n[1]) * d[2] + n[2]];
        assert_eq!(at(&r, [3, 4, 5]), at(&f, [2, 4, 7]));
    }
}
