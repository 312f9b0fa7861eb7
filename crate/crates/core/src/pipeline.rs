//! End-to-end helper: resumes and labeled titles in, trained mapper out.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{extract_parent_child_pairs, JobRecord};
use crate::model::{
    evaluate_split, split_dataset, train_with, DataSplit, EpochStats, FeatureSpace, LabeledTitle, ModelConfig,
    SemanticSpec, SplitMetrics, TrainConfig, TrainOutcome,
};
use crate::poincare::{train_poincare, PoincareConfig};
use crate::syntactic::Taxonomy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub poincare: PoincareConfig,
    pub semantic: SemanticSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub outcome: TrainOutcome,
    pub split: DataSplit,
    pub test: SplitMetrics,
}

/// Embeds the transition graph of `records` and assembles the feature space.
pub fn build_feature_space(
    records: &[JobRecord],
    taxonomy: Taxonomy,
    poincare: &PoincareConfig,
    semantic: SemanticSpec,
) -> Result<FeatureSpace> {
    let pairs = extract_parent_child_pairs(records)?;
    let table = train_poincare(&pairs, poincare)?;
    FeatureSpace::new(taxonomy, table, semantic)
}

/// Splits `labels`, trains with early stopping and scores the test split.
pub fn run_pipeline<F>(
    records: &[JobRecord],
    labels: &[LabeledTitle],
    taxonomy: Taxonomy,
    config: &PipelineConfig,
    on_epoch: F,
) -> Result<PipelineOutput>
where
    F: FnMut(&EpochStats),
{
    config.train.validate()?;
    config.model.validate()?;
    let split = split_dataset(labels, config.train.split, config.train.split_seed)?;
    let features = build_feature_space(records, taxonomy, &config.poincare, config.semantic.clone())?;
    let outcome = train_with(features, &config.model, &config.train, &split, on_epoch)?;
    let test = evaluate_split(&outcome.model, &split.test)?;
    Ok(PipelineOutput { outcome, split, test })
}
