use std::path::PathBuf;

use hyperosc::bumps::{compute_epsilons, EpsilonConstants};
use hyperosc::multiplier::{decay_fit, multiplier_lattice, sobolev_envelope, DecayFit, EnvelopeReport, FrequencyLattice};
use hyperosc::operator::{
    admissible_region, cross_validate, dyadic_l1_check, gaussian_family, lp_sweep, sobolev_smoothing_check, CrossValidation,
    GridGeometry, MultiplierSpec, MultiplierTable,
};
use hyperosc::phase::{check_lemma_lower_bound, classify_sweep, CaseTag};
use hyperosc::profiles::{certify_admissibility, AdmissibilityCertificate};
use hyperosc::{Frequency, OperatorParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{num, opt, to_value, Stamp, Writer};
use crate::{CliError, Command};

/// Result of a command: pass/fail, a one-line message and the files written.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub pass: bool,
    pub message: String,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// k₃ below this is replaced by it when sizing ε (the bound divides by k₃).
pub const K3_FLOOR: f64 = 1e-12;

/// Certified constants and ε for a config.
pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub params: OperatorParams,
    pub certificate: AdmissibilityCertificate,
    pub eps: EpsilonConstants,
    pub hash: String,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let pc = &cfg.profile_check;
        let certificate = certify_admissibility(&cfg.profile, pc.r_min, pc.r_max, pc.n_samples)?;
        if !certificate.admissible() {
            return Err(CliError::Inadmissible(format!("{} fails the admissibility conditions", cfg.profile.label())));
        }
        let params = cfg.params();
        let k3 = certificate.k3_hat.max(K3_FLOOR);
        let base = compute_epsilons(certificate.k2_hat, k3, params.beta, cfg.epsilon.safety)?;
        if !(cfg.epsilon.factor > 0.0 && cfg.epsilon.factor.is_finite()) {
            return Err(CliError::Usage(format!("epsilon.factor must be positive, got {}", cfg.epsilon.factor)));
        }
        let eps = EpsilonConstants::with_epsilon(base.epsilon * cfg.epsilon.factor, certificate.k2_hat, k3, params.beta);
        Ok(Context { cfg, params, certificate, eps, hash: cfg.hash() })
    }

    pub fn k3(&self) -> f64 {
        self.cfg.sobolev_envelope.k3.unwrap_or(self.certificate.k3_hat)
    }

    pub fn writer(&self, sub: &str) -> Result<Writer, CliError> {
        Writer::new(
            &self.cfg.output_dir.join(sub),
            Stamp {
                config_sha256: self.hash.clone(),
                seed: self.cfg.seed,
                epsilon: self.eps.epsilon,
                k1: self.certificate.k1_hat,
                k2: self.certificate.k2_hat,
                k3: self.certificate.k3_hat,
            },
        )
    }

    /// A table from the cache directory, built and stored on a miss.
    pub fn table(&self, spec: &MultiplierSpec, geometry: &GridGeometry) -> Result<MultiplierTable, CliError> {
        let hash = MultiplierTable::content_hash(spec, geometry);
        let path = self.cfg.cache_dir().join(format!("{}.oscm", hex::encode(hash)));
        Ok(MultiplierTable::load_or_build(spec, geometry, &path)?.0)
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        r.set_stream(stream);
        r
    }
}

pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::ProfileCheck => profile_check(cfg),
        Command::LemmaCheck { .. } => lemma_check(cfg),
        Command::Multiplier => multiplier(cfg),
        Command::Decay => decay(cfg),
        Command::SobolevEnvelope => {
            let ctx = Context::new(cfg)?;
            let mut env = envelope_study(&ctx)?;
            if cfg.sobolev_envelope.ladder.is_some() {
                let lad = ladder_study(&ctx)?;
                env.pass &= lad.pass;
                env.message = format!("{}; {}", env.message, lad.message);
                env.files.extend(lad.files);
                env.summary = json!({ "envelope": env.summary, "ladder": lad.summary });
            }
            Ok(env)
        }
        Command::Apply => apply(cfg),
        Command::Sweep => sweep(cfg),
    }
}

pub fn profile_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let pc = &cfg.profile_check;
    let (certificate, failure) = match certify_admissibility(&cfg.profile, pc.r_min, pc.r_max, pc.n_samples) {
        Ok(c) => (Some(c), None),
        Err(hyperosc::Error::SignViolation { r, certificate }) => {
            (Some(*certificate), Some(format!("phi'(r) phi''(r) <= 0 at r = {r}")))
        }
        Err(hyperosc::Error::DegenerateDerivative(r)) => (None, Some(format!("phi' or phi'' vanishes at r = {r}"))),
        Err(e) => return Err(e.into()),
    };
    let admissible = failure.is_none() && certificate.as_ref().is_some_and(|c| c.admissible());
    let eps = certificate
        .as_ref()
        .filter(|_| admissible)
        .map(|c| compute_epsilons(c.k2_hat, c.k3_hat.max(K3_FLOOR), cfg.beta, cfg.epsilon.safety))
        .transpose()?;
    let stamp = Stamp {
        config_sha256: cfg.hash(),
        seed: cfg.seed,
        epsilon: eps.map_or(f64::NAN, |e| e.epsilon),
        k1: certificate.as_ref().map_or(f64::NAN, |c| c.k1_hat),
        k2: certificate.as_ref().map_or(f64::NAN, |c| c.k2_hat),
        k3: certificate.as_ref().map_or(f64::NAN, |c| c.k3_hat),
    };
    let mut w = Writer::new(&cfg.output_dir.join("profile-check"), stamp)?;
    let summary = json!({
        "profile": cfg.profile,
        "label": cfg.profile.label(),
        "admissible": admissible,
        "failure": failure,
        "certificate": certificate,
        "epsilon": eps,
    });
    w.json("certificate.json", &summary)?;
    let message = match (&certificate, admissible) {
        (Some(c), true) => format!("{} admissible: k1={} k2={} k3={}", cfg.profile.label(), c.k1_hat, c.k2_hat, c.k3_hat),
        _ => format!("{} inadmissible: {}", cfg.profile.label(), failure.clone().unwrap_or_else(|| "conditions fail".into())),
    };
    Ok(Outcome { pass: admissible, message, files: w.files, summary })
}

/// A random (ξ, l): l uniform, |ξ| log-uniform, direction uniform on S².
pub fn sample_lemma_config(rng: &mut ChaCha8Rng, l_range: (i32, i32), norm_range: (f64, f64)) -> (Frequency, i32) {
    let l = rng.gen_range(l_range.0..=l_range.1);
    let (a, b) = (norm_range.0.ln(), norm_range.1.ln());
    let norm = (a + (b - a) * rng.gen::<f64>()).exp();
    let d = loop {
        let v: [f64; 3] = std::array::from_fn(|_| 2.0 * rng.gen::<f64>() - 1.0);
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if n2 > 1e-6 && n2 <= 1.0 {
            let s = norm / n2.sqrt();
            break v.map(|x| x * s);
        }
    };
    (Frequency::planar(d[0], d[1], d[2]), l)
}

pub fn lemma_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let lc = &cfg.lemma_check;
    if lc.n_configs == 0 {
        return Err(CliError::Usage("n_configs must be at least 1".into()));
    }
    let (lo, hi) = lc.xi_norm_range;
    if !(0.0 < lo && lo < hi && hi.is_finite()) || lc.l_range.0 > lc.l_range.1 {
        return Err(CliError::Usage("lemma_check ranges are empty or invalid".into()));
    }
    let ctx = Context::new(cfg)?;
    if cfg.n != 2 {
        return Err(CliError::Usage("lemma-check is planar (n = 2)".into()));
    }
    let mut rng = ctx.rng(1);
    let draws: Vec<(Frequency, i32)> = (0..lc.n_configs).map(|_| sample_lemma_config(&mut rng, lc.l_range, lc.xi_norm_range)).collect();
    let results: Vec<_> = draws
        .par_iter()
        .map(|(xi, l)| {
            let rep = check_lemma_lower_bound(&ctx.params, &cfg.profile, xi, *l, &ctx.eps, lc.grid);
            let hist = lc.classify.then(|| classify_sweep(&ctx.params, &cfg.profile, xi, *l, &ctx.eps, lc.classify_grid, lc.classify_check));
            (rep, hist)
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for (i, ((xi, l), (rep, hist))) in draws.iter().zip(&results).enumerate() {
        rows.push(vec![
            i.to_string(),
            l.to_string(),
            num(xi.xi_prime[0]),
            num(xi.xi_prime[1]),
            num(xi.xi_last),
            num(rep.lambda),
            num(rep.min_ratio),
            num(rep.worst_point.0),
            num(rep.worst_point.1),
            rep.pass.to_string(),
            hist.as_ref().map_or(String::new(), |h| h.patches.to_string()),
            hist.as_ref().map_or(String::new(), |h| h.counts[CaseTag::TrivialBound.index()].to_string()),
        ]);
    }
    let failures = results.iter().filter(|(r, _)| !r.pass).count();
    let trivial: u64 = results.iter().filter_map(|(_, h)| h.as_ref()).map(|h| h.counts[CaseTag::TrivialBound.index()]).sum();
    let min_ratio = results.iter().map(|(r, _)| r.min_ratio).fold(f64::INFINITY, f64::min);
    let mut w = ctx.writer("lemma-check")?;
    w.csv(
        "lemma.csv",
        &["index", "l", "xi1", "xi2", "xi3", "lambda", "min_ratio", "worst_r", "worst_theta", "pass", "patches", "trivial_patches"],
        &rows,
    )?;
    let pass = failures == 0 && trivial == 0;
    let summary = json!({
        "n_configs": lc.n_configs,
        "failures": failures,
        "min_ratio": min_ratio,
        "epsilon": ctx.eps,
        "classified": lc.classify,
        "trivial_patches": trivial,
        "pass": pass,
    });
    w.json("summary.json", &summary)?;
    let message = format!("lemma-check: {failures}/{} configurations fail, min ratio {min_ratio:.4}, trivial patches {trivial}", lc.n_configs);
    Ok(Outcome { pass, message, files: w.files, summary })
}

pub fn multiplier(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    let mc = &cfg.multiplier;
    let lat = FrequencyLattice { origin: mc.lattice.origin, spacing: mc.lattice.spacing, dims: mc.lattice.dims };
    if lat.is_empty() {
        return Err(CliError::Usage("multiplier lattice is empty".into()));
    }
    let tol = cfg.tolerances.table;
    let base = multiplier_lattice(&ctx.params, &cfg.profile, &cfg.kernel, &lat, cfg.l_window, tol, &cfg.window)?;
    let refined = match mc.refine_tol {
        Some(t) => Some(multiplier_lattice(&ctx.params, &cfg.profile, &cfg.kernel, &lat, cfg.l_window, t, &cfg.window)?),
        None => None,
    };
    let max_of = |v: &[num_complex::Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let max_abs = max_of(&base);
    let max_refined = refined.as_deref().map(max_of);
    let change = max_refined.map(|m| (m - max_abs).abs() / m.max(f64::MIN_POSITIVE));
    let finite = base.iter().chain(refined.iter().flatten()).all(|z| z.re.is_finite() && z.im.is_finite());
    let pass = finite && change.is_none_or(|c| c <= mc.max_relative_change);
    let [_, n1, n2] = lat.dims;
    let rows: Vec<Vec<String>> = base
        .iter()
        .enumerate()
        .map(|(s, z)| {
            let xi = lat.at([s / (n1 * n2), (s / n2) % n1, s % n2]);
            let mut r = vec![num(xi.xi_prime[0]), num(xi.xi_prime[1]), num(xi.xi_last), num(z.re), num(z.im), num(z.norm())];
            if let Some(rf) = &refined {
                r.extend([num(rf[s].re), num(rf[s].im), num(rf[s].norm())]);
            }
            r
        })
        .collect();
    let mut header = vec!["xi1", "xi2", "xi3", "re", "im", "abs"];
    if refined.is_some() {
        header.extend(["re_refined", "im_refined", "abs_refined"]);
    }
    let mut w = ctx.writer("multiplier")?;
    w.csv("multiplier.csv", &header, &rows)?;
    let summary = json!({
        "l_window": cfg.l_window,
        "tol": tol,
        "refine_tol": mc.refine_tol,
        "max_abs": max_abs,
        "max_abs_refined": max_refined,
        "relative_change": change,
        "finite": finite,
        "pass": pass,
    });
    w.json("summary.json", &summary)?;
    let message = format!("multiplier: max |m| = {max_abs:.6}, change under refinement {}", opt(change));
    Ok(Outcome { pass, message, files: w.files, summary })
}

pub fn decay(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    let dc = &cfg.decay;
    if dc.frequencies.is_empty() || dc.windows.is_empty() {
        return Err(CliError::Usage("decay needs frequencies and windows".into()));
    }
    let mut fits: Vec<(usize, (i32, i32), DecayFit)> = Vec::new();
    for (i, f) in dc.frequencies.iter().enumerate() {
        let xi = Frequency::planar(f[0], f[1], f[2]);
        for &wnd in &dc.windows {
            fits.push((i, wnd, decay_fit(&ctx.params, &cfg.profile, &cfg.kernel, &xi, wnd, cfg.tolerances.m_l)?));
        }
    }
    let mut rows = Vec::new();
    for (i, wnd, fit) in &fits {
        let f = dc.frequencies[*i];
        let norm_abs = fit.abs_ml[(fit.normalization_l - wnd.0) as usize];
        let norm_ratio = norm_abs / 2f64.powf(fit.predicted_slope * fit.normalization_l as f64);
        for (l, a) in fit.l_values.iter().zip(&fit.abs_ml) {
            let ratio = a / 2f64.powf(fit.predicted_slope * *l as f64) / norm_ratio;
            rows.push(vec![i.to_string(), num(f[0]), num(f[1]), num(f[2]), l.to_string(), num(*a), num(ratio)]);
        }
    }
    let worst = fits.iter().map(|f| f.2.max_ratio_excess).fold(0.0, f64::max);
    let pass = worst <= dc.slack;
    let mut w = ctx.writer("decay")?;
    w.csv("decay.csv", &["frequency", "xi1", "xi2", "xi3", "l", "abs_m_l", "normalized_ratio"], &rows)?;
    let fit_json: Vec<Value> = fits
        .iter()
        .map(|(i, wnd, fit)| json!({ "frequency": dc.frequencies[*i], "window": wnd, "fit": to_value(fit) }))
        .collect();
    let summary = json!({ "alpha": cfg.alpha, "beta": cfg.beta, "fits": fit_json, "worst_ratio_excess": worst, "slack": dc.slack, "pass": pass });
    w.json("decay_fit.json", &summary)?;
    let message = format!("decay: worst normalized ratio {worst:.4} (slack {})", dc.slack);
    Ok(Outcome { pass, message, files: w.files, summary })
}

/// Sample points of the envelope study: each ray at log-spaced norms.
pub fn envelope_samples(cfg: &RunConfig) -> Result<Vec<Frequency>, CliError> {
    let ec = &cfg.sobolev_envelope;
    let (a, b) = ec.norm_range;
    if !(0.0 < a && a < b && b.is_finite()) || ec.samples_per_ray < 2 || ec.rays.is_empty() {
        return Err(CliError::Usage("sobolev_envelope needs rays, a valid norm range and two samples per ray".into()));
    }
    let mut out = Vec::new();
    for r in &ec.rays {
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(CliError::Usage(format!("ray {r:?} has no direction")));
        }
        for j in 0..ec.samples_per_ray {
            let t = (a.ln() + (b.ln() - a.ln()) * j as f64 / (ec.samples_per_ray - 1) as f64).exp() / n;
            out.push(Frequency::planar(r[0] * t, r[1] * t, r[2] * t));
        }
    }
    Ok(out)
}

pub fn envelope_study(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let ec = &cfg.sobolev_envelope;
    let samples = envelope_samples(cfg)?;
    let report: EnvelopeReport =
        sobolev_envelope(&ctx.params, &cfg.profile, ctx.k3(), &cfg.kernel, &samples, cfg.l_window, cfg.tolerances.m_l)?;
    let mut rows = Vec::new();
    for g in &report.groups {
        for ((x, m), r) in g.xi_norms.iter().zip(&g.abs_m).zip(&g.ratios) {
            rows.push(vec![format!("{:?}", g.kind), num(*x), num(*m), num(g.predicted_exponent), num(*r)]);
        }
    }
    let worst = report.groups.iter().map(|g| g.max_ratio).fold(0.0, f64::max);
    let pass = worst <= ec.slack && report.groups.iter().all(|g| g.abs_m.iter().all(|m| m.is_finite()));
    let mut w = ctx.writer("sobolev-envelope")?;
    w.csv("envelope.csv", &["group", "xi_norm", "abs_m", "predicted_exponent", "ratio"], &rows)?;
    let summary = json!({ "k3": ctx.k3(), "report": to_value(&report), "worst_ratio": worst, "slack": ec.slack, "pass": pass });
    w.json("envelope.json", &summary)?;
    let message = format!("envelope: worst ratio {worst:.4} (slack {})", ec.slack);
    Ok(Outcome { pass, message, files: w.files, summary })
}

pub fn ladder_study(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let lr = cfg
        .sobolev_envelope
        .ladder
        .as_ref()
        .ok_or_else(|| CliError::Usage("sobolev_envelope.ladder is not configured".into()))?;
    let lad = &lr.ladder;
    if lad.k_min > lad.k_max {
        return Err(CliError::Usage("ladder k range is empty".into()));
    }
    let spec = cfg.multiplier_spec(cfg.l_window);
    let mut rungs = Vec::new();
    for k in lad.k_min..=lad.k_max {
        let f = lad.rung(k)?;
        let t = ctx.table(&spec, f.geometry())?;
        rungs.push((k, f, t));
    }
    let s0 = ctx.params.s0(ctx.k3());
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut pass = true;
    for s in &lr.s_values {
        let s = s.unwrap_or(s0);
        let chk = sobolev_smoothing_check(&rungs, s, s0, lr.slack)?;
        for r in &chk.rungs {
            rows.push(vec![num(s), r.k.to_string(), num(r.carrier_norm), num(r.norm_in), num(r.norm_out), num(r.ratio)]);
        }
        pass &= chk.pass != Some(false);
        checks.push(chk);
    }
    let mut w = ctx.writer("sobolev-envelope")?;
    w.csv("ladder.csv", &["s", "k", "carrier_norm", "norm_in", "norm_out_s", "ratio"], &rows)?;
    let summary = json!({ "s0": s0, "checks": to_value(&checks), "pass": pass });
    w.json("ladder.json", &summary)?;
    let at_s0 = checks.iter().find(|c| c.s == s0).map(|c| c.max_ratio / c.first_ratio);
    let message = format!("ladder: max/first ratio at s0 = {}", opt(at_s0));
    Ok(Outcome { pass, message, files: w.files, summary })
}

fn cross_rows(tag: &str, cv: &CrossValidation) -> Vec<Vec<String>> {
    cv.probes
        .iter()
        .map(|p| {
            vec![
                tag.to_string(),
                num(p.x[0]),
                num(p.x[1]),
                num(p.x[2]),
                num(p.spectral.re),
                num(p.spectral.im),
                num(p.direct.re),
                num(p.direct.im),
                num(p.rel_err),
            ]
        })
        .collect()
}

pub fn apply(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    let ac = &cfg.apply;
    let spec = cfg.multiplier_spec(ac.l_window);
    let geometry = GridGeometry::new(cfg.grid.dims, cfg.grid.box_length)?;
    let table = ctx.table(&spec, &geometry)?;
    let main = cross_validate(&spec, &table, ac.function, ac.n_probes, ac.quad_density, ac.evaluation_cap)?;
    let mut rows = cross_rows("main", &main);
    let mut pass = main.max_rel_err <= ac.max_rel_err;
    let mut smoke_json = Value::Null;
    let mut smoke_msg = String::new();
    if let Some(sm) = &ac.smoke {
        let mut errs = Vec::new();
        for (tag, dims) in [("coarse", sm.coarse), ("fine", sm.fine)] {
            let g = GridGeometry::new(dims, cfg.grid.box_length)?;
            let t = ctx.table(&spec, &g)?;
            let cv = cross_validate(&spec, &t, sm.function, ac.n_probes, ac.quad_density, ac.evaluation_cap)?;
            rows.extend(cross_rows(tag, &cv));
            errs.push(cv.max_rel_err);
        }
        let decreases = errs[1] < errs[0];
        pass &= decreases;
        smoke_msg = format!(", smoke {:.3e} -> {:.3e}", errs[0], errs[1]);
        smoke_json = json!({ "coarse": sm.coarse, "fine": sm.fine, "coarse_max_rel_err": errs[0], "fine_max_rel_err": errs[1], "decreases": decreases });
    }
    let mut w = ctx.writer("apply")?;
    w.csv("probes.csv", &["grid", "x1", "x2", "x3", "spectral_re", "spectral_im", "direct_re", "direct_im", "rel_err"], &rows)?;
    let summary = json!({
        "l_window": ac.l_window,
        "dims": cfg.grid.dims,
        "box_length": cfg.grid.box_length,
        "max_rel_err": main.max_rel_err,
        "threshold": ac.max_rel_err,
        "smoke": smoke_json,
        "pass": pass,
    });
    w.json("summary.json", &summary)?;
    let message = format!("apply: max relative disagreement {:.3e}{smoke_msg}", main.max_rel_err);
    Ok(Outcome { pass, message, files: w.files, summary })
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sc = &cfg.sweep;
    if let Some(p) = sc.p_list.iter().chain(&sc.check_p).find(|p| !(1.05..=16.0).contains(*p)) {
        return Err(CliError::Usage(format!("p = {p} lies outside [1.05, 16]")));
    }
    if sc.p_list.is_empty() || sc.family_size == 0 {
        return Err(CliError::Usage("sweep needs a p list and a non-empty family".into()));
    }
    let ctx = Context::new(cfg)?;
    let geometry = GridGeometry::new(cfg.grid.dims, cfg.grid.box_length)?;

    // The full table is the sum of single-piece tables, which the L¹ check reuses.
    let (lw0, lw1) = cfg.l_window;
    let l1 = sc.l1_range;
    let mut pieces = Vec::new();
    let mut full: Option<MultiplierTable> = None;
    let l_lo = l1.map_or(lw0, |r| r.0.min(lw0));
    let l_hi = l1.map_or(lw1, |r| r.1.max(lw1));
    for l in l_lo..=l_hi {
        let t = ctx.table(&cfg.multiplier_spec((l, l)), &geometry)?;
        if (lw0..=lw1).contains(&l) {
            full = Some(match full {
                None => t.clone(),
                Some(acc) => MultiplierTable::sum(&[acc, t.clone()])?,
            });
        }
        if l1.is_some_and(|(a, b)| (a..=b).contains(&l)) {
            pieces.push((l, t));
        }
    }
    let full = full.expect("window is non-empty");
    let mut rng = ctx.rng(2);
    let family = gaussian_family(geometry, sc.family_size, sc.max_carrier, sc.min_width, || rng.gen::<f64>())?;
    let mut p_list = sc.p_list.clone();
    for p in sc.check_p.iter().chain(&[2.0]) {
        if !p_list.contains(p) {
            p_list.push(*p);
        }
    }
    let lp = lp_sweep(&ctx.params, &full, &family, &p_list)?;
    let at2 = lp.max_ratio_at(2.0).expect("p = 2 is included");
    let window_ok = sc.check_p.iter().all(|&p| lp.max_ratio_at(p).is_some_and(|r| r <= sc.slack * at2));
    let l1_check = if pieces.is_empty() { None } else { Some(dyadic_l1_check(&ctx.params, &pieces, &family, sc.slack)?) };
    let pass = lp.plancherel_violations == 0 && window_ok && l1_check.as_ref().is_none_or(|c| c.pass);

    let mut w = ctx.writer("sweep")?;
    let rows: Vec<Vec<String>> = lp
        .rows
        .iter()
        .map(|r| vec![r.function.to_string(), num(r.p), num(r.norm_in), num(r.norm_out), num(r.ratio)])
        .collect();
    w.csv("lp_sweep.csv", &["function", "p", "norm_in", "norm_out", "ratio"], &rows)?;
    if let Some(c) = &l1_check {
        let rows: Vec<Vec<String>> = c.rows.iter().map(|r| vec![r.l.to_string(), num(r.max_ratio), num(r.normalized)]).collect();
        w.csv("dyadic_l1.csv", &["l", "max_ratio", "normalized"], &rows)?;
    }
    let summary = json!({
        "p_window": lp.p_window,
        "max_ratio": lp.max_ratio,
        "max_multiplier": lp.max_multiplier,
        "plancherel_violations": lp.plancherel_violations,
        "window_check": window_ok,
        "dyadic_l1": l1_check,
        "admissible_region": admissible_region(&ctx.params, ctx.certificate.k3_hat),
        "pass": pass,
    });
    w.json("summary.json", &summary)?;
    let message = format!(
        "sweep: Plancherel violations {}, max ratio at p=2 {at2:.4}, L1 check {}",
        lp.plancherel_violations,
        l1_check.as_ref().map_or("skipped".into(), |c| c.pass.to_string())
    );
    Ok(Outcome { pass, message, files: w.files, summary })
}
