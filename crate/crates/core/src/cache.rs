//! On-disk cache of spectral bands.
//!
//! Each entry is a raw little-endian f64 file (`<key>.bin`) holding every
//! floating-point number of the band, plus a JSON sidecar (`<key>.json`)
//! with the metadata needed to rebuild it. Reloads are bit-identical.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;

use crate::bundle::BundleData;
use crate::error::{Error, Result};
use crate::grid::SectionGrid;
use crate::spectral::{BandBasis, Backend, Gap, HolomorphicBasis, SpectralBand};

const FORMAT: u32 = 1;

/// Cache key: sha256 over model, twist, k, backend and grid.
pub fn cache_key(b: &BundleData, backend: Backend, grid: Option<&SectionGrid>) -> String {
    let meta = serde_json::json!({
        "format": FORMAT,
        "model": b.model,
        "twist": b.twist,
        "k": b.k,
        "backend": backend,
        "grid": grid,
    });
    hex::encode(Sha256::digest(meta.to_string().as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: u32,
    key: String,
    bundle: BundleData,
    backend: Backend,
    dim: usize,
    gap_top: f64,
    gap_next: Option<f64>,
    grid: Option<SectionGrid>,
    /// Number of f64 values in the binary file.
    values: usize,
    has_coeffs: bool,
}

#[derive(Clone, Debug)]
pub struct BandCache {
    dir: PathBuf,
}

fn push_c(out: &mut Vec<f64>, v: &[C64]) {
    for c in v {
        out.push(c.re);
        out.push(c.im);
    }
}

impl BandCache {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(BandCache { dir: dir.as_ref().to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.bin")), self.dir.join(format!("{key}.json")))
    }

    pub fn store(&self, key: &str, band: &SpectralBand) -> Result<()> {
        let mut data: Vec<f64> = band.eigenvalues.clone();
        let (grid, has_coeffs) = match &band.basis {
            BandBasis::Holomorphic(h) => {
                data.extend_from_slice(&h.log_norms);
                if let Some(c) = &h.coeffs {
                    push_c(&mut data, c);
                }
                (None, h.coeffs.is_some())
            }
            BandBasis::Grid { grid, vectors } => {
                for v in vectors {
                    push_c(&mut data, v);
                }
                (Some(grid.clone()), false)
            }
        };
        let side = Sidecar {
            format: FORMAT,
            key: key.to_string(),
            bundle: band.bundle.clone(),
            backend: band.backend(),
            dim: band.dim(),
            gap_top: band.gap.top,
            gap_next: band.gap.next,
            grid,
            values: data.len(),
            has_coeffs,
        };
        let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_le_bytes()).collect();
        let (bin, json) = self.paths(key);
        fs::write(&bin, bytes)?;
        let text = serde_json::to_string_pretty(&side).map_err(|e| Error::Cache(e.to_string()))?;
        fs::write(&json, text)?;
        Ok(())
    }

    /// The cached band, or None when absent.
    pub fn load(&self, key: &str) -> Result<Option<SpectralBand>> {
        let (bin, json) = self.paths(key);
        if !bin.exists() || !json.exists() {
            return Ok(None);
        }
        let side: Sidecar =
            serde_json::from_str(&fs::read_to_string(&json)?).map_err(|e| Error::Cache(format!("bad sidecar: {e}")))?;
        if side.format != FORMAT || side.key != key {
            return Err(Error::Cache("sidecar does not match key".into()));
        }
        let bytes = fs::read(&bin)?;
        if bytes.len() != 8 * side.values {
            return Err(Error::Cache(format!("expected {} values, found {} bytes", side.values, bytes.len())));
        }
        let data: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let mut it = data.into_iter();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        let take_c = |v: Vec<f64>| -> Vec<C64> { v.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect() };
        let dim = side.dim;
        let eigenvalues = take(dim);
        let basis = match side.backend {
            Backend::Exact => {
                let log_norms = take(dim);
                let coeffs = if side.has_coeffs { Some(take_c(take(2 * dim * dim))) } else { None };
                BandBasis::Holomorphic(HolomorphicBasis { k: side.bundle.k, log_norms, coeffs })
            }
            Backend::Fd => {
                let grid = side.grid.clone().ok_or_else(|| Error::Cache("fd entry without grid".into()))?;
                let n = grid.len();
                let vectors = (0..dim).map(|_| take_c(take(2 * n))).collect();
                BandBasis::Grid { grid, vectors }
            }
        };
        Ok(Some(SpectralBand { bundle: side.bundle, eigenvalues, gap: Gap { top: side.gap_top, next: side.gap_next }, basis }))
    }

    /// Load the band for `key`, or compute and store it.
    pub fn get_or_compute(&self, key: &str, compute: impl FnOnce() -> Result<SpectralBand>) -> Result<(SpectralBand, bool)> {
        if let Some(b) = self.load(key)? {
            return Ok((b, true));
        }
        let b = compute()?;
        self.store(key, &b)?;
        Ok((b, false))
    }
}
