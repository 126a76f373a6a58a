//! Experiment driver for quantlab: configuration, (model, k) sweeps over a
//! worker pool, the band cache, per-command summaries and the consolidated
//! acceptance report.

pub mod config;
pub mod dynamics;
pub mod embed;
pub mod hyperplane;
pub mod output;
pub mod report;
pub mod spectrum;

use std::fmt;

use quantlab::bundle::build_bundle;
use quantlab::cache::{cache_key, BandCache};
use quantlab::geometry::ManifoldModel;
use quantlab::spectral::{compute_band, SpectralBand};
use rayon::prelude::*;

use config::{ExperimentConfig, ModelSpec};
use output::{CommandOutput, ModelRecord, RunDir};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad configuration or arguments, or missing run artifacts.
    Usage(String),
    /// Filesystem or cache failure.
    Io(String),
    /// NoGapFound, eigensolver or integrator failure.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage: {s}"),
            CliError::Io(s) => write!(f, "io: {s}"),
            CliError::Numerical(s) => write!(f, "numerical failure: {s}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<quantlab::Error> for CliError {
    fn from(e: quantlab::Error) -> Self {
        use quantlab::Error as E;
        match e {
            E::Io(_) | E::Cache(_) => CliError::Io(e.to_string()),
            E::InvalidModel(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Exit code of a finished command: 0 when every criterion passed, 1 otherwise.
pub fn verdict_code(all_pass: bool) -> i32 {
    if all_pass {
        0
    } else {
        1
    }
}

/// Seed for one purpose (sample set, pair set, hyperplanes) derived from the run seed.
pub fn sub_seed(seed: u64, purpose: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(purpose.wrapping_mul(0xbf58_476d_1ce4_e5b9))
}

/// Shared state of one command run.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub dir: RunDir,
    pub cache: BandCache,
    pub models: Vec<(ModelSpec, ManifoldModel)>,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(cfg: ExperimentConfig) -> CliResult<Self> {
        cfg.validate()?;
        let dir = RunDir::new(&cfg.run.out)?;
        let cache = BandCache::new(dir.cache_dir())?;
        let models = cfg.models()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.workers)
            .build()
            .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
        Ok(Context { cfg, dir, cache, models, pool })
    }

    pub fn records(&self) -> Vec<ModelRecord> {
        self.models.iter().map(|(s, m)| ModelRecord::new(s, m)).collect()
    }

    pub fn output(&self, command: &str) -> CommandOutput {
        CommandOutput::new(command, &self.cfg, self.records())
    }

    pub fn seed(&self, purpose: u64) -> u64 {
        sub_seed(self.cfg.run.seed, purpose)
    }

    pub fn band_key(&self, spec: &ModelSpec, m: &ManifoldModel, k: u32) -> CliResult<String> {
        let b = build_bundle(m, k as i64)?;
        Ok(cache_key(&b, spec.backend, spec.grid_at(m, k).as_ref()))
    }

    /// Band of a model at k without touching the cache.
    pub fn fresh_band(&self, spec: &ModelSpec, m: &ManifoldModel, k: u32) -> CliResult<SpectralBand> {
        let b = build_bundle(m, k as i64)?;
        Ok(compute_band(&b, spec.backend, spec.resolution_at(k))?)
    }

    /// Band of a model at k, from the cache or computed and stored.
    pub fn band(&self, spec: &ModelSpec, m: &ManifoldModel, k: u32) -> CliResult<SpectralBand> {
        let key = self.band_key(spec, m, k)?;
        let (band, _) = self.cache.get_or_compute(&key, || {
            let b = build_bundle(m, k as i64)?;
            compute_band(&b, spec.backend, spec.resolution_at(k))
        })?;
        Ok(band)
    }

    /// Run `f` over `jobs` on the worker pool; results keep the job order.
    pub fn run_jobs<J: Sync, T: Send>(&self, jobs: &[J], f: impl Fn(&J) -> CliResult<T> + Sync + Send) -> CliResult<Vec<T>> {
        self.pool.install(|| jobs.par_iter().map(f).collect())
    }

    /// (model index, k) jobs over the models selected by `keep`, restricted to `ks` when given.
    pub fn jobs(&self, keep: impl Fn(&ModelSpec, &ManifoldModel) -> bool, ks: Option<&[u32]>) -> Vec<(usize, u32)> {
        let mut out = Vec::new();
        for (i, (s, m)) in self.models.iter().enumerate() {
            if !keep(s, m) {
                continue;
            }
            for &k in &s.ks {
                if ks.is_none_or(|l| l.contains(&k)) {
                    out.push((i, k));
                }
            }
        }
        out
    }
}

/// Bitwise equality of two bands (serialization keeps every f64 exactly).
pub fn bands_identical(a: &SpectralBand, b: &SpectralBand) -> bool {
    match (serde_json::to_vec(a), serde_json::to_vec(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Load, override and validate a config, then open the run directory.
pub fn context_from(path: &std::path::Path, overrides: &config::Overrides) -> CliResult<Context> {
    let mut cfg = config::load(path)?;
    cfg.apply(overrides);
    Context::new(cfg)
}
