//! Experiment configuration: a TOML file of flat tables plus a `[[models]]`
//! array. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use quantlab::geometry::{Harmonic, ManifoldModel};
use quantlab::grid::{sweep_resolution, SectionGrid, DEFAULT_RESOLUTION};
use quantlab::spectral::Backend;

use crate::CliError;

/// Largest admissible spacing constant c in h ≤ c/√k. The torus bands are
/// resolved at 0.25; the sphere needs 0.1 for the oracle tolerances.
pub const RESOLUTION_LIMIT: f64 = 0.25;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub experiments: ExperimentFlags,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub embed: EmbedSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub hyperplane: HyperplaneSection,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { out: PathBuf::from("out"), seed: 1, workers: 1 }
    }
}

/// Sub-experiments, one per acceptance criterion. A disabled one is skipped
/// and `report` lists its criterion as missing.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentFlags {
    pub gap: bool,
    pub dimension: bool,
    pub rates: bool,
    pub holomorphy: bool,
    pub nu: bool,
    pub profile: bool,
    pub reproducing: bool,
    pub injectivity: bool,
    pub wick: bool,
    pub tangential: bool,
    pub variance: bool,
    pub hyperplane: bool,
    pub oracle: bool,
    pub determinism: bool,
}

impl Default for ExperimentFlags {
    fn default() -> Self {
        ExperimentFlags {
            gap: true,
            dimension: true,
            rates: true,
            holomorphy: true,
            nu: true,
            profile: true,
            reproducing: true,
            injectivity: true,
            wick: true,
            tangential: true,
            variance: true,
            hyperplane: true,
            oracle: true,
            determinism: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Slope bound for O(1/k) rate claims.
    pub rate_slope: f64,
    /// Slope bound for the off-diagonal profile and the tangential residual.
    pub soft_slope: f64,
    /// Largest |ℬ_k| on the band (the O(1) window of the gap law).
    pub band_window: f64,
    /// Smallest admissible (next cluster)/k.
    pub gap_constant: f64,
    /// Relative spread of (next cluster)/k across k.
    pub gap_stability: f64,
    pub nu_ratio: f64,
    pub nu_ratio_k: u32,
    pub nu_constancy: f64,
    pub trace: f64,
    pub kahler_residual: f64,
    pub reproducing_exact: f64,
    pub reproducing_fd: f64,
    pub oracle_kernel: f64,
    pub oracle_angle: f64,
    pub cos_theta: f64,
    /// Largest admissible log-log slope of max |A⁻|² (no growth trend).
    pub a_minus_growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rate_slope: -0.8,
            soft_slope: -0.3,
            band_window: 1.0,
            gap_constant: 1.0,
            gap_stability: 0.2,
            nu_ratio: 0.05,
            nu_ratio_k: 64,
            nu_constancy: 1e-6,
            trace: 1e-4,
            kahler_residual: 1e-6,
            reproducing_exact: 1e-8,
            reproducing_fd: 1e-6,
            oracle_kernel: 1e-3,
            oracle_angle: 1e-3,
            cos_theta: 1e-6,
            a_minus_growth: 0.2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedSection {
    /// Sample points for sup errors.
    pub samples: usize,
    pub pairs: usize,
    pub delta: f64,
    pub injectivity_ks: Vec<u32>,
    pub profile_ks: Vec<u32>,
    pub profile_points: usize,
    pub profile_radii: usize,
    pub oracle_ks: Vec<u32>,
    pub oracle_points: usize,
}

impl Default for EmbedSection {
    fn default() -> Self {
        EmbedSection {
            samples: 60,
            pairs: 500,
            delta: 0.3,
            injectivity_ks: vec![32, 64],
            profile_ks: vec![16, 32, 64, 128],
            profile_points: 4,
            profile_radii: 24,
            oracle_ks: vec![4, 8, 16],
            oracle_points: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub ks: Vec<u32>,
    pub samples: usize,
    pub times: Vec<f64>,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        DynamicsSection { ks: vec![8, 16, 32, 64], samples: 40, times: vec![0.25, 0.5, 1.0] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperplaneSection {
    pub ks: Vec<u32>,
    pub points: usize,
    pub trials: usize,
    pub floor: f64,
    pub strict_floor: f64,
    pub strict_min_k: u32,
}

impl Default for HyperplaneSection {
    fn default() -> Self {
        HyperplaneSection { ks: vec![16, 32, 64], points: 20, trials: 10, floor: 0.5, strict_floor: 0.9, strict_min_k: 32 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindSpec {
    RoundSphere,
    PerturbedSphere,
    FlatTorus,
}

/// One spacing constant for every k, or one per k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Uniform(f64),
    PerK(Vec<f64>),
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution::Uniform(DEFAULT_RESOLUTION)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKindSpec,
    #[serde(default)]
    pub perturbation: Vec<(Harmonic, f64)>,
    #[serde(default)]
    pub periods: Option<[f64; 2]>,
    pub ks: Vec<u32>,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default)]
    pub resolution: Resolution,
    /// With a uniform resolution c, use c·√(refine_above/k) beyond this k so
    /// the spacing falls like 1/k in rate sweeps.
    #[serde(default)]
    pub refine_above: Option<u32>,
    /// Criteria evaluated on this model; empty means all that apply.
    #[serde(default)]
    pub criteria: Vec<u8>,
}

fn default_backend() -> Backend {
    Backend::Exact
}

impl ModelSpec {
    pub fn model(&self) -> Result<ManifoldModel, CliError> {
        let m = match self.kind {
            ModelKindSpec::RoundSphere => {
                if !self.perturbation.is_empty() {
                    return Err(CliError::Usage(format!("model {}: round_sphere takes no perturbation", self.name)));
                }
                Ok(ManifoldModel::round_sphere())
            }
            ModelKindSpec::PerturbedSphere => ManifoldModel::perturbed_sphere(self.perturbation.clone()),
            ModelKindSpec::FlatTorus => {
                let [a, b] = self.periods.unwrap_or([1.0, 1.0]);
                ManifoldModel::flat_torus(a, b)
            }
        };
        m.map_err(|e| CliError::Usage(format!("model {}: {e}", self.name)))
    }

    /// Spacing constant used at k.
    pub fn resolution_at(&self, k: u32) -> f64 {
        match &self.resolution {
            Resolution::Uniform(c) => match self.refine_above {
                Some(r) => sweep_resolution(*c, k, r),
                None => *c,
            },
            Resolution::PerK(v) => {
                let i = self.ks.iter().position(|&x| x == k).unwrap_or(0);
                v[i]
            }
        }
    }

    /// Whether criterion `id` is evaluated on this model.
    pub fn runs(&self, id: u8) -> bool {
        self.criteria.is_empty() || self.criteria.contains(&id)
    }

    /// FD grid at k; None for the exact backend.
    pub fn grid_at(&self, m: &ManifoldModel, k: u32) -> Option<SectionGrid> {
        (self.backend == Backend::Fd).then(|| SectionGrid::for_resolution(m, k, self.resolution_at(k)))
    }
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    /// Applies to every sphere model; the torus has only the fd backend.
    pub backend: Option<Backend>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.out {
            self.run.out = d.clone();
        }
        if let Some(w) = o.workers {
            self.run.workers = w;
        }
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(b) = o.backend {
            for m in &mut self.models {
                if m.kind != ModelKindSpec::FlatTorus {
                    m.backend = b;
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |s: String| Err(CliError::Usage(s));
        if self.models.is_empty() {
            return usage("config defines no models".into());
        }
        if self.run.workers == 0 {
            return usage("workers must be at least 1".into());
        }
        let mut names = BTreeSet::new();
        for s in &self.models {
            if !names.insert(s.name.as_str()) {
                return usage(format!("duplicate model name {}", s.name));
            }
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return usage(format!("model name {:?} must be non-empty [A-Za-z0-9_-]", s.name));
            }
            if s.ks.is_empty() {
                return usage(format!("model {}: empty k list", s.name));
            }
            if s.ks[0] == 0 || s.ks.windows(2).any(|w| w[0] >= w[1]) {
                return usage(format!("model {}: k list must be positive and strictly increasing", s.name));
            }
            if s.kind == ModelKindSpec::FlatTorus && s.backend == Backend::Exact {
                return usage(format!("model {}: the torus has no exact backend", s.name));
            }
            if s.kind != ModelKindSpec::FlatTorus && s.periods.is_some() {
                return usage(format!("model {}: periods apply to the torus only", s.name));
            }
            if let Some(c) = s.criteria.iter().find(|&&c| !(1..=14).contains(&c)) {
                return usage(format!("model {}: no criterion {c}", s.name));
            }
            if let Resolution::PerK(v) = &s.resolution {
                if v.len() != s.ks.len() {
                    return usage(format!("model {}: {} resolutions for {} values of k", s.name, v.len(), s.ks.len()));
                }
                if s.refine_above.is_some() {
                    return usage(format!("model {}: refine_above needs a uniform resolution", s.name));
                }
            }
            let m = s.model()?;
            for &k in &s.ks {
                let c = s.resolution_at(k);
                if !(c > 0.0 && c <= RESOLUTION_LIMIT) {
                    return usage(format!("model {}: resolution {c} at k = {k} outside (0, {RESOLUTION_LIMIT}]", s.name));
                }
                if let Some(g) = s.grid_at(&m, k) {
                    let h = g.spacing(&m);
                    if h > c / (k as f64).sqrt() * (1.0 + 1e-12) {
                        return usage(format!("model {}: grid spacing {h} exceeds c/√k at k = {k}", s.name));
                    }
                }
            }
        }
        let t = &self.tolerances;
        let e = &self.embed;
        let h = &self.hyperplane;
        if !(e.delta > 0.0) || e.samples == 0 || e.pairs == 0 || e.oracle_points < 2 || e.profile_points == 0 || e.profile_radii < 2 {
            return usage("embed: samples, pairs, profile sizes and δ must be positive".into());
        }
        if self.dynamics.samples == 0 || self.dynamics.times.iter().any(|t| !t.is_finite()) {
            return usage("dynamics: samples must be positive and times finite".into());
        }
        if !(0.0..1.0).contains(&h.floor) || !(0.0..1.0).contains(&h.strict_floor) || h.points == 0 || h.trials == 0 {
            return usage("hyperplane: floors must lie in [0, 1) and counts be positive".into());
        }
        if t.nu_ratio_k == 0 {
            return usage("tolerances: nu_ratio_k must be positive".into());
        }
        Ok(())
    }

    /// Models with their parsed geometry, in config order.
    pub fn models(&self) -> Result<Vec<(ModelSpec, ManifoldModel)>, CliError> {
        self.models.iter().map(|s| Ok((s.clone(), s.model()?))).collect()
    }
}
