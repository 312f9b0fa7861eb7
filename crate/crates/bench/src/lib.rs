//! Fixtures shared by the benchmarks.

use jtm_core::datagen::{gen_resumes, gen_taxonomy, SynthConfig};
use jtm_core::model::{MapperModel, ModelConfig, SemanticSpec};
use jtm_core::pipeline::build_feature_space;
use jtm_core::poincare::PoincareConfig;
use jtm_core::Result;

/// An untrained mapper over a synthetic taxonomy, plus its noisy titles.
pub struct Fixture {
    pub model: MapperModel,
    pub queries: Vec<String>,
}

pub fn fixture(groups: usize, config: ModelConfig) -> Result<Fixture> {
    let sc = SynthConfig {
        groups,
        persons: groups * 5,
        ..SynthConfig::default()
    };
    let synth = gen_taxonomy(&sc)?;
    let (records, _) = gen_resumes(&sc, &synth)?;
    let poincare = PoincareConfig {
        dim: 10,
        epochs: 5,
        ..PoincareConfig::default()
    };
    let semantic = SemanticSpec {
        dim: 64,
        ..SemanticSpec::default()
    };
    let features = build_feature_space(&records, synth.taxonomy.clone(), &poincare, semantic)?;
    let queries = synth.variants.iter().flatten().cloned().collect();
    Ok(Fixture {
        model: MapperModel::new(config, features)?,
        queries,
    })
}
