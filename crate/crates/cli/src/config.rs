//! Run configuration: JSON with every field defaulted, dotted-key overrides,
//! and a content hash used to stamp every output.

use std::path::{Path, PathBuf};

use hyperosc::kernel::KernelOmega;
use hyperosc::operator::{LadderSpec, MultiplierSpec, ProbeFunction};
use hyperosc::quadrature::WindowOptions;
use hyperosc::{OperatorParams, RadialProfile};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub box_length: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { dims: [64, 64, 64], box_length: 16.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Per-piece tolerance for single m_l evaluations.
    pub m_l: f64,
    /// Per-piece tolerance for lattice tables.
    pub table: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { m_l: 1e-8, table: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSpec {
    /// ε = safety × the admissible bound.
    pub safety: f64,
    /// Multiplies ε after the fact; values above 1/safety break the lemma.
    pub factor: f64,
}

impl Default for EpsilonSpec {
    fn default() -> Self {
        EpsilonSpec { safety: 0.5, factor: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileCheckSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_samples: usize,
}

impl Default for ProfileCheckSpec {
    fn default() -> Self {
        ProfileCheckSpec { r_min: 1e-3, r_max: 1e3, n_samples: 4001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaCheckSpec {
    pub n_configs: usize,
    pub grid: (usize, usize),
    /// Also classify a sample of patches for each configuration.
    pub classify: bool,
    pub classify_grid: usize,
    pub classify_check: usize,
    pub l_range: (i32, i32),
    pub xi_norm_range: (f64, f64),
}

impl Default for LemmaCheckSpec {
    fn default() -> Self {
        LemmaCheckSpec {
            n_configs: 200,
            grid: (101, 101),
            classify: false,
            classify_grid: 24,
            classify_check: 5,
            l_range: (-10, 10),
            xi_norm_range: (1e-3, 1e6),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSpec {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
}

impl Default for LatticeSpec {
    fn default() -> Self {
        LatticeSpec { origin: [-45.0; 3], spacing: [10.0; 3], dims: [10, 10, 10] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplierCmdSpec {
    pub lattice: LatticeSpec,
    /// Recompute at this tolerance and report the change of max |m|.
    pub refine_tol: Option<f64>,
    pub max_relative_change: f64,
}

impl Default for MultiplierCmdSpec {
    fn default() -> Self {
        MultiplierCmdSpec { lattice: LatticeSpec::default(), refine_tol: Some(1e-7), max_relative_change: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySpec {
    pub frequencies: Vec<[f64; 3]>,
    pub windows: Vec<(i32, i32)>,
    pub slack: f64,
}

impl Default for DecaySpec {
    fn default() -> Self {
        DecaySpec {
            frequencies: vec![[1.0, 0.0, 1.0], [0.5, 0.5, 0.5], [2.0, 1.0, 0.3], [0.3, 0.2, 5.0], [3.0, 4.0, -20.0]],
            windows: vec![(1, 10), (-10, -1)],
            slack: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeSpec {
    /// Ray directions; each is sampled at |ξ| = norms.
    pub rays: Vec<[f64; 3]>,
    pub norm_range: (f64, f64),
    pub samples_per_ray: usize,
    pub slack: f64,
    /// Overrides the certified k₃ when set.
    pub k3: Option<f64>,
    pub ladder: Option<LadderRunSpec>,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        EnvelopeSpec {
            rays: vec![[1.0, 0.5, 0.3], [0.6, -0.8, 0.5], [0.3, 0.1, 1.0], [-0.2, 0.4, -1.0]],
            norm_range: (10.0, 1e4),
            samples_per_ray: 13,
            slack: 10.0,
            k3: None,
            ladder: Some(LadderRunSpec::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderRunSpec {
    pub ladder: LadderSpec,
    /// Sobolev orders to report; `None` entries mean s₀.
    pub s_values: Vec<Option<f64>>,
    pub slack: f64,
}

impl Default for LadderRunSpec {
    fn default() -> Self {
        LadderRunSpec { ladder: LadderSpec::default(), s_values: vec![None, Some(0.0)], slack: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApplySpec {
    /// Dyadic window of the truncated operator on both paths.
    pub l_window: (i32, i32),
    pub function: ProbeFunction,
    pub n_probes: usize,
    pub quad_density: usize,
    pub evaluation_cap: u64,
    pub max_rel_err: f64,
    /// Grid-refinement smoke test: coarse and fine grids for `smoke_function`.
    pub smoke: Option<SmokeSpec>,
}

impl Default for ApplySpec {
    fn default() -> Self {
        ApplySpec {
            l_window: (-1, 1),
            function: ProbeFunction::Gaussian { width: 1.0 },
            n_probes: 8,
            quad_density: 128,
            evaluation_cap: hyperosc::operator::DEFAULT_EVALUATION_CAP,
            max_rel_err: 5e-2,
            smoke: Some(SmokeSpec::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmokeSpec {
    pub coarse: [usize; 3],
    pub fine: [usize; 3],
    pub function: ProbeFunction,
}

impl Default for SmokeSpec {
    fn default() -> Self {
        SmokeSpec { coarse: [32, 8, 32], fine: [64, 8, 64], function: ProbeFunction::Slab { width: 0.7 } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub p_list: Vec<f64>,
    pub family_size: usize,
    pub max_carrier: f64,
    pub min_width: f64,
    /// Ratios at these p must stay within `slack` × the p = 2 ratio.
    pub check_p: Vec<f64>,
    pub slack: f64,
    /// Dyadic pieces for the L¹ check.
    pub l1_range: Option<(i32, i32)>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            p_list: vec![1.5, 2.0, 3.0, 6.0, 16.0],
            family_size: 20,
            max_carrier: 0.5,
            min_width: 1.25,
            check_p: vec![1.5, 2.0, 3.0],
            slack: 10.0,
            l1_range: Some((0, 8)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub profile: RadialProfile,
    pub kernel: KernelOmega,
    pub alpha: f64,
    pub beta: f64,
    pub n: u32,
    pub grid: GridSpec,
    /// Dyadic window for full multipliers.
    pub l_window: (i32, i32),
    pub tolerances: Tolerances,
    pub epsilon: EpsilonSpec,
    pub window: WindowOptions,
    pub output_dir: PathBuf,
    /// Multiplier tables are cached here; defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
    pub profile_check: ProfileCheckSpec,
    pub lemma_check: LemmaCheckSpec,
    pub multiplier: MultiplierCmdSpec,
    pub decay: DecaySpec,
    pub sobolev_envelope: EnvelopeSpec,
    pub apply: ApplySpec,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: RadialProfile::Monomial { gamma: 3.0 },
            kernel: KernelOmega::cosine(1),
            alpha: 0.25,
            beta: 1.0,
            n: 2,
            grid: GridSpec::default(),
            l_window: (-20, 20),
            tolerances: Tolerances::default(),
            epsilon: EpsilonSpec::default(),
            window: WindowOptions::default(),
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            seed: 20_240_601,
            profile_check: ProfileCheckSpec::default(),
            lemma_check: LemmaCheckSpec::default(),
            multiplier: MultiplierCmdSpec::default(),
            decay: DecaySpec::default(),
            sobolev_envelope: EnvelopeSpec::default(),
            apply: ApplySpec::default(),
            sweep: SweepSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> OperatorParams {
        OperatorParams { n: self.n, alpha: self.alpha, beta: self.beta }
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.profile.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.l_window.0 > self.l_window.1 {
            return Err(CliError::Usage(format!("l_window {:?} is empty", self.l_window)));
        }
        for (name, t) in [("tolerances.m_l", self.tolerances.m_l), ("tolerances.table", self.tolerances.table)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Usage(format!("{name} must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn multiplier_spec(&self, l_window: (i32, i32)) -> MultiplierSpec {
        MultiplierSpec {
            params: self.params(),
            profile: self.profile.clone(),
            omega: self.kernel.clone(),
            l_window,
            tol: self.tolerances.table,
            window: self.window,
        }
    }

    /// SHA-256 of the canonical JSON form, without the fields that only say
    /// where output goes.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
            m.remove("cache_dir");
        }
        hex::encode(Sha256::digest(serde_json::to_vec(&v).expect("value serializes")))
    }
}

/// Sets `path` (dotted keys) in a JSON tree. The value is parsed as JSON and
/// taken as a string when that fails.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{assignment}' is not key=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("override key '{key}' has an empty segment")));
    }
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Default::default());
            } else {
                return Err(CliError::Usage(format!("override key '{key}': '{}' is not an object", parts[..i].join("."))));
            }
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("loop returns on the last segment")
}

/// Parses a config with overrides applied, naming the offending key on error.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?;
    // Start from the defaults so overrides can reach nested fields that the
    // file leaves out.
    let mut full = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    merge(&mut full, std::mem::take(&mut value));
    for o in overrides {
        apply_override(&mut full, o)?;
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(full).map_err(|e| {
        let path = e.path().to_string();
        CliError::Usage(format!("invalid config at '{path}': {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Deep merge of `patch` into `base`: objects merge key by key, anything
/// else replaces. Tagged enums (objects with a "kind") replace wholesale, so
/// a profile of a different kind does not inherit stale fields.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && v.get("kind").is_none() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?,
        None => "{}".to_string(),
    };
    parse_config(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = parse_config("{}", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = parse_config("{}", &["epsilon.factor=10".into(), "sweep.p_list=[2.0]".into(), "profile.gamma=5".into()]).unwrap();
        assert_eq!(c.epsilon.factor, 10.0);
        assert_eq!(c.sweep.p_list, vec![2.0]);
        assert_eq!(c.profile, RadialProfile::Monomial { gamma: 5.0 });
    }

    #[test]
    fn bad_key_is_named() {
        let e = parse_config(r#"{"alpha": "x"}"#, &[]).unwrap_err();
        assert!(e.to_string().contains("alpha"), "{e}");
        let e = parse_config(r#"{"sweep": {"p_lsit": [2]}}"#, &[]).unwrap_err();
        assert!(e.to_string().contains("sweep"), "{e}");
        let e = parse_config(r#"{"alpha": 0.6, "beta": 1.0}"#, &[]).unwrap_err();
        assert!(matches!(e, CliError::Usage(_)));
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = parse_config("{}", &[]).unwrap();
        let b = parse_config(r#"{"output_dir": "elsewhere"}"#, &[]).unwrap();
        let c = parse_config(r#"{"seed": 7}"#, &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn profile_kind_replaces() {
        let c = parse_config(r#"{"profile": {"kind": "exp_sinh"}}"#, &[]).unwrap();
        assert_eq!(c.profile, RadialProfile::ExpSinh);
    }
}
