//! Run manifests: everything needed to regenerate a run's outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::commands::CliError;
use crate::{EprSweep, Fit, SingleSweep, Tomography};

/// A subcommand with its full parameter set. The output directory is not
/// part of the recipe, so a manifest can be replayed anywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "params", rename_all = "kebab-case")]
pub enum Recipe {
    SingleSweep(SingleSweep),
    EprSweep(EprSweep),
    Tomography(Tomography),
    Fit(Fit),
}

impl Recipe {
    /// File-name prefix of every artifact the recipe writes.
    pub fn stem(&self) -> &'static str {
        match self {
            Recipe::SingleSweep(_) => "single",
            Recipe::EprSweep(_) => "epr",
            Recipe::Tomography(_) => "tomography",
            Recipe::Fit(_) => "fit",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Recipe::SingleSweep(p) => Some(p.seed),
            Recipe::EprSweep(p) => Some(p.seed),
            Recipe::Tomography(_) | Recipe::Fit(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    #[serde(flatten)]
    pub recipe: Recipe,
    pub seed: Option<u64>,
    /// Artifact file names, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(recipe: Recipe, outputs: Vec<String>) -> Self {
        Self {
            version: format!("eprsim {}", env!("CARGO_PKG_VERSION")),
            seed: recipe.seed(),
            recipe,
            outputs,
        }
    }

    pub fn file_name(recipe: &Recipe) -> String {
        format!("{}_manifest.json", recipe.stem())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Core(e.into()))
    }
}
