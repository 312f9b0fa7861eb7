use std::path::{Path, PathBuf};

use jtm_core::datagen::SynthConfig;
use jtm_core::eval::LinkPredConfig;
use jtm_core::model::{ModelConfig, SemanticSpec, TrainConfig};
use jtm_core::poincare::PoincareConfig;
use jtm_core::semantic::ProviderSpec;
use jtm_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Input files. Which ones a subcommand needs depends on the subcommand.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub taxonomy: Option<PathBuf>,
    pub resumes: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    /// Node vectors: a Poincaré table or a semantic embedding file.
    pub vectors: Option<PathBuf>,
    /// One title per line.
    pub titles: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

impl DataPaths {
    fn fields_mut(&mut self) -> [&mut Option<PathBuf>; 9] {
        [
            &mut self.taxonomy,
            &mut self.resumes,
            &mut self.labels,
            &mut self.test_labels,
            &mut self.pairs,
            &mut self.graph,
            &mut self.vectors,
            &mut self.titles,
            &mut self.model,
        ]
    }
}

/// Everything a run depends on. The resolved form, with defaults filled and
/// paths made absolute, is echoed next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub data: DataPaths,
    pub synth: SynthConfig,
    pub poincare: PoincareConfig,
    /// Also fit a two-dimensional embedding for plotting.
    pub poincare_plot: bool,
    pub semantic: SemanticSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub linkpred: LinkPredConfig,
    pub map_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        // Desk-scale dimensions: a full synthetic run trains in minutes on
        // one core.
        Self {
            output_dir: PathBuf::from("out"),
            data: DataPaths::default(),
            synth: SynthConfig::default(),
            poincare: PoincareConfig {
                dim: 10,
                epochs: 50,
                ..PoincareConfig::default()
            },
            poincare_plot: false,
            semantic: SemanticSpec {
                dim: 64,
                ..SemanticSpec::default()
            },
            model: ModelConfig {
                d_r: 16,
                ..ModelConfig::default()
            },
            train: TrainConfig::default(),
            linkpred: LinkPredConfig::default(),
            map_k: 10,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Makes every path absolute and checks the numeric sections.
    pub fn resolve(mut self) -> Result<Self> {
        self.output_dir = absolute(&self.output_dir)?;
        for p in self.data.fields_mut().into_iter().flatten() {
            *p = absolute(p)?;
        }
        if let ProviderSpec::Precomputed(p) = &mut self.semantic.provider {
            *p = absolute(p)?;
        }
        self.synth.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.map_k == 0 {
            return Err(Error::Config("map_k must be at least 1".into()));
        }
        Ok(self)
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| Error::Config(format!("bad path {}: {e}", p.display())))
}

/// The path of a required input, or a config error naming the key.
pub fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| {
        Error::Config(format!(
            "missing data.{key} (pass --{} or set it in the config)",
            key.replace('_', "-")
        ))
    })
}
