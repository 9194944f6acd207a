use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::direct::{apply_direct, periodic_gaussian_1d, periodized_gaussian, RadialTruncation};
use super::grid::{lp_norm, modulated_gaussian, sobolev_norm, GridFunction, GridGeometry};
use super::table::{MultiplierSpec, MultiplierTable};
use super::apply_spectral;
use crate::error::{Error, Result};
use crate::params::OperatorParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub function: usize,
    pub p: f64,
    pub norm_in: f64,
    pub norm_out: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSweep {
    pub rows: Vec<LpRow>,
    /// (p, max ratio over the family).
    pub max_ratio: Vec<(f64, f64)>,
    pub max_multiplier: f64,
    /// Functions with ‖ℛf‖₂ > max|m|·‖f‖₂ (beyond rounding).
    pub plancherel_violations: usize,
    pub p_window: (f64, f64),
}

impl LpSweep {
    pub fn max_ratio_at(&self, p: f64) -> Option<f64> {
        self.max_ratio.iter().find(|(q, _)| *q == p).map(|r| r.1)
    }
}

/// ‖ℛf‖_p / ‖f‖_p through `table` for every f and p.
pub fn lp_sweep(params: &OperatorParams, table: &MultiplierTable, family: &[GridFunction], p_list: &[f64]) -> Result<LpSweep> {
    params.validate()?;
    if let Some(p) = p_list.iter().find(|p| !(1.05..=16.0).contains(*p)) {
        return Err(Error::InvalidParams(format!("p = {p} outside [1.05, 16]")));
    }
    if family.is_empty() || p_list.is_empty() {
        return Err(Error::InvalidParams("empty function family or p list".into()));
    }
    let max_multiplier = table.max_abs();
    let mut rows = Vec::new();
    let mut plancherel_violations = 0;
    for (i, f) in family.iter().enumerate() {
        let rf = apply_spectral(f, table)?;
        let (n2in, n2out) = (lp_norm(f, 2.0)?, lp_norm(&rf, 2.0)?);
        if n2out > max_multiplier * n2in * (1.0 + 1e-10) {
            plancherel_violations += 1;
        }
        for &p in p_list {
            let (a, b) = (lp_norm(f, p)?, lp_norm(&rf, p)?);
            if a == 0.0 {
                return Err(Error::DegenerateData(format!("function {i} vanishes on the grid")));
            }
            rows.push(LpRow { function: i, p, norm_in: a, norm_out: b, ratio: b / a });
        }
    }
    let max_ratio = p_list
        .iter()
        .map(|&p| (p, rows.iter().filter(|r| r.p == p).map(|r| r.ratio).fold(0.0, f64::max)))
        .collect();
    Ok(LpSweep { rows, max_ratio, max_multiplier, plancherel_violations, p_window: params.p_window() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicL1Row {
    pub l: i32,
    /// max over the family of ‖ℛ_l f‖₁ / ‖f‖₁.
    pub max_ratio: f64,
    /// max_ratio / 2^{αl}.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicL1Check {
    pub rows: Vec<DyadicL1Row>,
    /// The normalized ratio at the smallest l, used as the constant.
    pub constant: f64,
    pub slack: f64,
    pub pass: bool,
}

/// ‖ℛ_l f‖₁ ≤ C·2^{αl}‖f‖₁ with C taken from the first table and `slack`
/// allowed on top. `tables` holds (l, table of m_l alone).
pub fn dyadic_l1_check(
    params: &OperatorParams,
    tables: &[(i32, MultiplierTable)],
    family: &[GridFunction],
    slack: f64,
) -> Result<DyadicL1Check> {
    if tables.is_empty() || family.is_empty() {
        return Err(Error::InvalidParams("need at least one table and one function".into()));
    }
    let mut rows = Vec::with_capacity(tables.len());
    for (l, t) in tables {
        let mut max_ratio: f64 = 0.0;
        for f in family {
            let n = lp_norm(f, 1.0)?;
            if n == 0.0 {
                return Err(Error::DegenerateData("function vanishes on the grid".into()));
            }
            max_ratio = max_ratio.max(lp_norm(&apply_spectral(f, t)?, 1.0)? / n);
        }
        rows.push(DyadicL1Row { l: *l, max_ratio, normalized: max_ratio / 2f64.powf(params.alpha * *l as f64) });
    }
    let constant = rows[0].normalized;
    let pass = rows.iter().all(|r| r.normalized <= slack * constant);
    Ok(DyadicL1Check { rows, constant, slack, pass })
}

/// Envelope grid and carriers of a smoothing ladder: rung k has carrier
/// 2^k·direction (direction normalized) and a Gaussian envelope of `width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub dims: [usize; 3],
    pub box_length: f64,
    pub width: f64,
    pub direction: [f64; 3],
    pub k_min: u32,
    pub k_max: u32,
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec { dims: [8, 8, 8], box_length: 8.0, width: 4.0, direction: [0.3, 0.1, 1.0], k_min: 0, k_max: 8 }
    }
}

impl LadderSpec {
    pub fn rung(&self, k: u32) -> Result<GridFunction> {
        let d = self.direction;
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParams("ladder direction must be a nonzero vector".into()));
        }
        let scale = 2f64.powi(k as i32) / norm;
        let g = GridGeometry::with_carrier(self.dims, self.box_length, [d[0] * scale, d[1] * scale, d[2] * scale])?;
        modulated_gaussian(g, [0.0; 3], self.width, [0.0; 3])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub k: u32,
    pub carrier_norm: f64,
    pub norm_in: f64,
    pub norm_out: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevSmoothing {
    pub s: f64,
    pub s0: f64,
    pub rungs: Vec<LadderRung>,
    pub max_ratio: f64,
    pub first_ratio: f64,
    pub slack: f64,
    /// Asserted only for s ≤ s₀; beyond it the ladder is descriptive.
    pub pass: Option<bool>,
}

/// ‖ℛf_k‖_{L²_s} / ‖f_k‖_{L²} along a ladder of (k, f_k, table on f_k's grid).
pub fn sobolev_smoothing_check(
    rungs: &[(u32, GridFunction, MultiplierTable)],
    s: f64,
    s0: f64,
    slack: f64,
) -> Result<SobolevSmoothing> {
    if rungs.is_empty() {
        return Err(Error::InvalidParams("empty ladder".into()));
    }
    let mut out = Vec::with_capacity(rungs.len());
    for (k, f, t) in rungs {
        let rf = apply_spectral(f, t)?;
        let (a, b) = (lp_norm(f, 2.0)?, sobolev_norm(&rf, s)?);
        let c = f.geometry().carrier;
        out.push(LadderRung {
            k: *k,
            carrier_norm: (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt(),
            norm_in: a,
            norm_out: b,
            ratio: b / a,
        });
    }
    let max_ratio = out.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let first_ratio = out[0].ratio;
    let pass = (s <= s0).then_some(max_ratio <= slack * first_ratio);
    Ok(SobolevSmoothing { s, s0, rungs: out, max_ratio, first_ratio, slack, pass })
}

/// Closed-form periodic test functions shared by both application paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeFunction {
    /// Periodized e^{−π|x|²/w²}.
    Gaussian { width: f64 },
    /// Periodized e^{−π(x₁² + x₃²)/w²}, constant in x₂.
    Slab { width: f64 },
}

impl ProbeFunction {
    pub fn eval(&self, x: [f64; 3], box_length: f64) -> Complex64 {
        match *self {
            ProbeFunction::Gaussian { width } => periodized_gaussian(x, box_length, width, [0.0; 3]),
            ProbeFunction::Slab { width } => Complex64::new(
                periodic_gaussian_1d(x[0], box_length, width) * periodic_gaussian_1d(x[2], box_length, width),
                0.0,
            ),
        }
    }

    fn width(&self) -> f64 {
        match *self {
            ProbeFunction::Gaussian { width } | ProbeFunction::Slab { width } => width,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeComparison {
    pub x: [f64; 3],
    pub spectral: Complex64,
    pub direct: Complex64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub dims: [usize; 3],
    pub box_length: f64,
    pub quad_density: usize,
    pub probes: Vec<ProbeComparison>,
    pub max_rel_err: f64,
}

/// Applies the dyadically truncated operator to a probe function both ways
/// and compares at `n_probes` grid points where |ℛf| ≥ max|ℛf|/10.
///
/// `table` must have been built from `spec` on a carrier-free grid; the
/// direct path uses the matching cutoff Σ_{l ∈ window} η(2^l r).
pub fn cross_validate(
    spec: &MultiplierSpec,
    table: &MultiplierTable,
    function: ProbeFunction,
    n_probes: usize,
    quad_density: usize,
    evaluation_cap: u64,
) -> Result<CrossValidation> {
    let g = *table.geometry();
    if *table.hash() != MultiplierTable::content_hash(spec, &g) {
        return Err(Error::InvalidParams("table was not built from this spec".into()));
    }
    if g.carrier != [0.0; 3] {
        return Err(Error::InvalidGrid("cross-validation runs on a carrier-free grid".into()));
    }
    if !(function.width() > 0.0 && function.width() <= g.box_length / 4.0) {
        return Err(Error::InvalidParams(format!("probe width must lie in (0, L/4], got {}", function.width())));
    }
    if n_probes == 0 {
        return Err(Error::InvalidParams("need at least one probe".into()));
    }
    let f = GridFunction::from_fn(g, |x| function.eval(x, g.box_length))?;
    let rf = apply_spectral(&f, table)?;
    let peak = rf.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let candidates: Vec<usize> = (0..g.len()).filter(|&i| rf.samples()[i].norm() >= 0.1 * peak).collect();
    if candidates.is_empty() || peak == 0.0 {
        return Err(Error::DegenerateData("spectral output vanishes".into()));
    }
    let picks: Vec<usize> = (0..n_probes.min(candidates.len()))
        .map(|j| candidates[(2 * j + 1) * candidates.len() / (2 * n_probes.min(candidates.len()))])
        .collect();
    let xs: Vec<[f64; 3]> = picks.iter().map(|&i| g.point(g.unravel(i))).collect();
    let (l_min, l_max) = spec.l_window;
    let eval = |x: [f64; 3]| function.eval(x, g.box_length);
    let direct = apply_direct(
        &eval,
        &xs,
        &spec.params,
        &spec.profile,
        &spec.omega,
        RadialTruncation::Dyadic { l_min, l_max },
        quad_density,
        evaluation_cap,
    )?;
    let probes: Vec<ProbeComparison> = picks
        .iter()
        .zip(&xs)
        .zip(&direct)
        .map(|((&i, &x), &d)| {
            let s = rf.samples()[i];
            ProbeComparison { x, spectral: s, direct: d, rel_err: (s - d).norm() / d.norm() }
        })
        .collect();
    let max_rel_err = probes.iter().map(|p| p.rel_err).fold(0.0, f64::max);
    Ok(CrossValidation { dims: g.dims, box_length: g.box_length, quad_density, probes, max_rel_err })
}

/// A reproducible family of modulated Gaussians: modulation |q| ≤ `max_carrier`,
/// widths in [`min_width`, 2·`min_width`], centres within L/8 of the origin.
/// Draws come from `unit`, a stream of numbers in [0, 1).
pub fn gaussian_family<U: FnMut() -> f64>(
    geometry: GridGeometry,
    count: usize,
    max_carrier: f64,
    min_width: f64,
    mut unit: U,
) -> Result<Vec<GridFunction>> {
    (0..count)
        .map(|_| {
            let mut dir = [0.0; 3];
            loop {
                dir.iter_mut().for_each(|d| *d = 2.0 * unit() - 1.0);
                let n2: f64 = dir.iter().map(|d| d * d).sum();
                if n2 > 1e-4 && n2 <= 1.0 {
                    break;
                }
            }
            let q = dir.map(|d| d * max_carrier);
            let width = min_width * (1.0 + unit());
            let c: [f64; 3] = std::array::from_fn(|_| (unit() - 0.5) * geometry.box_length / 4.0);
            modulated_gaussian(geometry, c, width, q)
        })
        .collect()
}

/// Predicted L^p window as a (p, s) polygon for reporting: the segment
/// s ∈ [0, s₀] at p = 2 and the open p-window at s = 0.
pub fn admissible_region(params: &OperatorParams, k3: f64) -> Vec<(f64, f64)> {
    let (lo, hi) = params.p_window();
    vec![(lo, 0.0), (2.0, params.s0(k3)), (hi, 0.0)]
}
