//! Run configuration files.
//!
//! Paths inside a configuration are resolved against the directory of the
//! configuration file itself.

use std::fs;
use std::path::{Path, PathBuf};

use bqc_core::certification::CertifyOptions;
use bqc_core::linalg::CVector;
use bqc_core::models::{DiscreteSpectrumSystem, ModelSpec, SystemDocument};
use bqc_core::simulation::{DensityMatrix, QuantumState};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::Value;

use crate::Failure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Inline system document or model recipe.
    #[serde(default)]
    pub system: Option<Value>,
    #[serde(default)]
    pub system_file: Option<PathBuf>,
    #[serde(default)]
    pub certify: Option<CertifySection>,
    #[serde(default)]
    pub synthesize: Option<SynthesizeSection>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub bound: Option<BoundSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub n: Option<usize>,
    #[serde(rename = "Q")]
    pub q: Option<u64>,
    pub tol: Option<f64>,
    pub max_depth: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeSection {
    pub from: StateSpec,
    pub to: StateSpec,
    /// Order the search runs at.
    pub n: Option<usize>,
    pub delta: Option<f64>,
    pub tol: Option<f64>,
    pub budget: Option<usize>,
    /// Defaults to `2n`, capped at the stored levels.
    pub verify_order: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub control: PathBuf,
    #[serde(default, alias = "from")]
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub density: Option<DensitySpec>,
    #[serde(default, alias = "to")]
    pub target: Option<StateSpec>,
    /// Defaults to every stored level.
    pub order: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub weights: Vec<f64>,
    pub states: Vec<StateSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    pub from: StateSpec,
    pub to: StateSpec,
    pub eps: f64,
    pub delta: f64,
}

/// A basis index or explicit `[re, im]` amplitudes.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Index(usize),
    Amplitudes(Vec<[f64; 2]>),
}

impl StateSpec {
    /// The state in dimension `dim`; explicit amplitudes are zero-padded and
    /// must already have unit norm.
    pub fn resolve(&self, dim: usize) -> Result<QuantumState, Failure> {
        let state = match self {
            StateSpec::Index(k) => QuantumState::basis(dim, *k),
            StateSpec::Amplitudes(a) => {
                let v = CVector::from_iterator(
                    a.len(),
                    a.iter().map(|[re, im]| Complex64::new(*re, *im)),
                );
                QuantumState::new(v).and_then(|s| s.resized(dim))
            }
        };
        state.map_err(|e| Failure::Config(e.to_string()))
    }
}

impl DensitySpec {
    pub fn resolve(&self, dim: usize) -> Result<DensityMatrix, Failure> {
        let states = self
            .states
            .iter()
            .map(|s| s.resolve(dim))
            .collect::<Result<Vec<_>, _>>()?;
        DensityMatrix::mixture(&self.weights, &states).map_err(|e| Failure::Config(e.to_string()))
    }
}

pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base })
    }

    pub fn resolve_path(&self, p: &Path) -> Result<PathBuf, Failure> {
        let full = if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        };
        if !full.exists() {
            return Err(Failure::Config(format!(
                "referenced file {} does not exist",
                full.display()
            )));
        }
        Ok(full)
    }

    pub fn system(&self) -> Result<DiscreteSpectrumSystem, Failure> {
        let value = match (&self.config.system, &self.config.system_file) {
            (Some(v), None) => v.clone(),
            (None, Some(p)) => {
                let path = self.resolve_path(p)?;
                let text = fs::read_to_string(&path)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
            }
            (None, None) => {
                return Err(Failure::Config(
                    "config needs `system` or `system_file`".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Failure::Config(
                    "config has both `system` and `system_file`; give exactly one".into(),
                ))
            }
        };
        let built = if value.get("model").is_some() {
            let spec: ModelSpec = serde_json::from_value(value)
                .map_err(|e| Failure::Config(format!("system model: {e}")))?;
            spec.build()
        } else {
            let doc: SystemDocument = serde_json::from_value(value)
                .map_err(|e| Failure::Config(format!("system: {e}")))?;
            DiscreteSpectrumSystem::from_document(doc)
        };
        built.map_err(|e| Failure::Config(format!("system: {e}")))
    }

    pub fn certify_options(&self) -> (Option<usize>, CertifyOptions) {
        let section = self.config.certify.as_ref();
        let mut opts = CertifyOptions::default();
        if let Some(s) = section {
            if let Some(q) = s.q {
                opts.q = q;
            }
            if let Some(t) = s.tol {
                opts.tol = t;
            }
            opts.max_depth = s.max_depth;
        }
        (section.and_then(|s| s.n), opts)
    }
}

pub fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    s.as_ref()
        .ok_or_else(|| Failure::Config(format!("config has no `{name}` section")))
}
