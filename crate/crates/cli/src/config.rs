use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wahtor_core::integrals::SymmetryGroups;
use wahtor_core::vqe::VqeOptions;
use wahtor_core::wahtor::TrustRegionOptions;

use crate::error::CliError;

/// Either the default CNOT ladder or an explicit list of (control, target) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entangler {
    Named(String),
    Pairs(Vec<(usize, usize)>),
}

impl Default for Entangler {
    fn default() -> Self {
        Entangler::Named("ladder".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterLoop {
    /// Stop once successive VQE energies differ by less than this (Hartree).
    pub outer_tol: f64,
    pub max_outer: usize,
    pub trust_region: TrustRegionOptions,
}

impl Default for OuterLoop {
    fn default() -> Self {
        Self {
            outer_tol: 1e-6,
            max_outer: 50,
            trust_region: TrustRegionOptions::default(),
        }
    }
}

/// Contents of a run configuration file. Relative paths resolve against the
/// directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub fcidump_path: PathBuf,
    #[serde(default)]
    pub metadata_path: Option<PathBuf>,
    /// Falls back to the metadata value, then to 2.
    #[serde(default)]
    pub ansatz_depth: Option<usize>,
    #[serde(default)]
    pub entangler: Entangler,
    #[serde(default = "default_starts")]
    pub n_starts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the groups from the metadata file. An empty list disables
    /// orbital rotation entirely.
    #[serde(default)]
    pub symmetry_groups: Option<SymmetryGroups>,
    #[serde(default)]
    pub include_core_energy: bool,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    #[serde(default)]
    pub vqe: VqeOptions,
    #[serde(default)]
    pub wahtor: OuterLoop,
}

fn default_starts() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.fcidump_path = base.join(&cfg.fcidump_path);
        cfg.metadata_path = cfg.metadata_path.map(|p| base.join(p));
        cfg.output_path = base.join(&cfg.output_path);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.ansatz_depth == Some(0) {
            return Err(CliError::Input("ansatz_depth must be at least 1".into()));
        }
        if self.n_starts == 0 {
            return Err(CliError::Input("n_starts must be at least 1".into()));
        }
        if let Entangler::Named(name) = &self.entangler {
            if name != "ladder" {
                return Err(CliError::Input(format!(
                    "entangler must be \"ladder\" or a list of pairs, got \"{name}\""
                )));
            }
        }
        let files = std::iter::once(&self.fcidump_path).chain(self.metadata_path.as_ref());
        for f in files {
            if !f.is_file() {
                return Err(CliError::Input(format!("missing file: {}", f.display())));
            }
        }
        Ok(())
    }
}
