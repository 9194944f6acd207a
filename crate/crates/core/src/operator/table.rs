use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::grid::{GridFunction, GridGeometry};
use crate::error::{Error, Result};
use crate::kernel::KernelOmega;
use crate::multiplier::{multiplier_lattice, FrequencyLattice};
use crate::params::OperatorParams;
use crate::profiles::RadialProfile;
use crate::quadrature::WindowOptions;

const MAGIC: &[u8; 4] = b"OSCM";
const VERSION: u32 = 1;

/// Everything that determines a multiplier table apart from the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierSpec {
    pub params: OperatorParams,
    pub profile: RadialProfile,
    pub omega: KernelOmega,
    /// Inclusive range of dyadic pieces summed into the table.
    pub l_window: (i32, i32),
    pub tol: f64,
    #[serde(default)]
    pub window: WindowOptions,
}

/// Σ_{l ∈ window} m_l at every lattice frequency of a grid, stored in FFT
/// slot order and rounded to single precision (the cache format).
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierTable {
    geometry: GridGeometry,
    values: Vec<Complex64>,
    hash: [u8; 32],
}

#[derive(Serialize)]
struct HashInput<'a> {
    version: u32,
    spec: &'a MultiplierSpec,
    geometry: &'a GridGeometry,
}

fn round_f32(v: Complex64) -> Complex64 {
    Complex64::new(v.re as f32 as f64, v.im as f32 as f64)
}

impl MultiplierTable {
    pub fn content_hash(spec: &MultiplierSpec, geometry: &GridGeometry) -> [u8; 32] {
        let json = serde_json::to_vec(&HashInput { version: VERSION, spec, geometry }).expect("spec serializes");
        Sha256::digest(&json).into()
    }

    pub fn build(spec: &MultiplierSpec, geometry: &GridGeometry) -> Result<Self> {
        geometry.validate()?;
        let l = geometry.box_length;
        let lattice = FrequencyLattice {
            origin: std::array::from_fn(|a| geometry.carrier[a] - (geometry.dims[a] / 2) as f64 / l),
            spacing: [1.0 / l; 3],
            dims: geometry.dims,
        };
        let sorted = multiplier_lattice(
            &spec.params,
            &spec.profile,
            &spec.omega,
            &lattice,
            spec.l_window,
            spec.tol,
            &spec.window,
        )?;
        // Sorted index s holds m = s − N/2, which lives in FFT slot m mod N.
        let [n0, n1, n2] = geometry.dims;
        let mut values = vec![Complex64::new(0.0, 0.0); geometry.len()];
        for (s, v) in sorted.into_iter().enumerate() {
            let idx = [s / (n1 * n2), (s / n2) % n1, s % n2];
            let slot: [usize; 3] = std::array::from_fn(|a| (idx[a] + geometry.dims[a] / 2) % geometry.dims[a]);
            values[(slot[0] * n1 + slot[1]) * n2 + slot[2]] = round_f32(v);
        }
        debug_assert_eq!(values.len(), n0 * n1 * n2);
        Ok(MultiplierTable { geometry: *geometry, values, hash: Self::content_hash(spec, geometry) })
    }

    /// Reads the table at `path` if its header matches, otherwise builds it
    /// and writes it there. Returns the table and whether it came from disk.
    pub fn load_or_build(spec: &MultiplierSpec, geometry: &GridGeometry, path: &Path) -> Result<(Self, bool)> {
        let hash = Self::content_hash(spec, geometry);
        if path.exists() {
            match Self::load(path, geometry, &hash) {
                Ok(t) => return Ok((t, true)),
                Err(e) => log::info!("rebuilding multiplier table {}: {e}", path.display()),
            }
        }
        let t = Self::build(spec, geometry)?;
        t.save(path)?;
        Ok((t, false))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(60 + 8 * self.values.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        for &n in &self.geometry.dims {
            buf.extend_from_slice(&(n as u32).to_le_bytes());
        }
        buf.extend_from_slice(&self.geometry.box_length.to_le_bytes());
        buf.extend_from_slice(&self.hash);
        // The file is in row-major lattice order, lowest frequency first.
        for s in 0..self.values.len() {
            let v = self.values[self.slot_of_sorted(s)];
            buf.extend_from_slice(&(v.re as f32).to_le_bytes());
            buf.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let tmp = path.with_extension("oscm.tmp");
        std::fs::File::create(&tmp)?.write_all(&buf)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads a cache file, rejecting it unless dims, box and hash match.
    pub fn load(path: &Path, geometry: &GridGeometry, expected_hash: &[u8; 32]) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 60 || &bytes[0..4] != MAGIC {
            return Err(Error::Cache("not a multiplier table".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        if u32_at(4) != VERSION {
            return Err(Error::Cache(format!("version {} != {VERSION}", u32_at(4))));
        }
        let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
        let box_length = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        if dims != geometry.dims || box_length != geometry.box_length {
            return Err(Error::Cache(format!("grid {dims:?}/{box_length} does not match")));
        }
        if &bytes[28..60] != expected_hash {
            return Err(Error::Cache("content hash does not match".into()));
        }
        let n = geometry.len();
        if bytes.len() != 60 + 8 * n {
            return Err(Error::Cache(format!("expected {} bytes, found {}", 60 + 8 * n, bytes.len())));
        }
        let mut t = MultiplierTable { geometry: *geometry, values: vec![Complex64::new(0.0, 0.0); n], hash: *expected_hash };
        for s in 0..n {
            let o = 60 + 8 * s;
            let re = f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
            let im = f32::from_le_bytes(bytes[o + 4..o + 8].try_into().unwrap());
            let slot = t.slot_of_sorted(s);
            t.values[slot] = Complex64::new(re as f64, im as f64);
        }
        Ok(t)
    }

    fn slot_of_sorted(&self, s: usize) -> usize {
        let [_, n1, n2] = self.geometry.dims;
        let idx = [s / (n1 * n2), (s / n2) % n1, s % n2];
        let slot: [usize; 3] = std::array::from_fn(|a| (idx[a] + self.geometry.dims[a] / 2) % self.geometry.dims[a]);
        (slot[0] * n1 + slot[1]) * n2 + slot[2]
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    /// Values in FFT slot order.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn hash(&self) -> &[u8; 32] {
        &self.hash
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// The table entry at FFT slot `n`.
    pub fn at(&self, n: [usize; 3]) -> Complex64 {
        let [_, n1, n2] = self.geometry.dims;
        self.values[(n[0] * n1 + n[1]) * n2 + n[2]]
    }

    /// Entrywise sum of tables on the same grid (e.g. dyadic pieces).
    pub fn sum(tables: &[MultiplierTable]) -> Result<MultiplierTable> {
        let first = tables.first().ok_or_else(|| Error::InvalidParams("no tables to sum".into()))?;
        let mut values = first.values.clone();
        let mut hasher = Sha256::new();
        for t in tables {
            if t.geometry != first.geometry {
                return Err(Error::InvalidGrid("summing tables on different grids".into()));
            }
            hasher.update(t.hash);
            if !std::ptr::eq(t, first) {
                values.iter_mut().zip(&t.values).for_each(|(a, b)| *a += b);
            }
        }
        Ok(MultiplierTable { geometry: first.geometry, values, hash: hasher.finalize().into() })
    }

    pub(crate) fn check_grid(&self, f: &GridFunction) -> Result<()> {
        if *f.geometry() != self.geometry {
            return Err(Error::InvalidGrid(format!(
                "function grid {:?} does not match table grid {:?}",
                f.geometry(),
                self.geometry
            )));
        }
        Ok(())
    }
}
