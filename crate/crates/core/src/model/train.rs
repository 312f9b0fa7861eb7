use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{label_indices, DataSplit, LabeledTitle, SplitFractions};
use super::features::{FeatureSpace, Features};
use super::{forward, rank_indices, sample_reg_candidates, MapperModel, ModelConfig, Supervision};
use crate::error::{Error, Result};
use crate::eval::{hit_rate_at_n, ndcg_at_n, precision_at_n, RankingResult};
use crate::numerics::{AdamConfig, AdamState, Tape, Tensor};
use crate::reasoning::fold_order;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub split: SplitFractions,
    pub split_seed: u64,
    /// Seeds batch order, fold order and regularizer sampling.
    pub shuffle_seed: u64,
    /// Adds every standard title, labeled with itself, to the training set.
    pub train_on_standards: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 20,
            split: SplitFractions::default(),
            split_seed: 0,
            shuffle_seed: 0,
            train_on_standards: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_cross_entropy: f64,
    pub val_cross_entropy: f64,
    pub val_p1: f64,
    pub val_p10: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: MapperModel,
    pub curve: Vec<EpochStats>,
    /// 1-based epoch of the returned checkpoint.
    pub best_epoch: usize,
}

/// Precision@1/5/10, hit rate at 10, NDCG@10 and mean cross-entropy of `model` on labeled
/// titles.
pub fn evaluate_split(model: &MapperModel, labels: &[LabeledTitle]) -> Result<SplitMetrics> {
    let targets = label_indices(labels, model.taxonomy())?;
    let titles: Vec<&str> = labels.iter().map(|l| l.title.as_str()).collect();
    let feats = model.features.featurize(&titles)?;
    metrics_for(model, &feats, &targets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub count: usize,
    pub p1: f64,
    pub p5: f64,
    pub p10: f64,
    /// Share of titles whose standard title is in the top 10.
    pub hit10: f64,
    pub ndcg10: f64,
    pub cross_entropy: f64,
}

fn metrics_for(model: &MapperModel, feats: &Features, targets: &[usize]) -> Result<SplitMetrics> {
    let probs = model.predict_features(feats)?;
    let mut ce = 0.0;
    let mut result = RankingResult::default();
    for (i, &t) in targets.iter().enumerate() {
        let row = probs.row(i);
        ce -= row[t].max(f64::MIN_POSITIVE).ln();
        result.push(rank_indices(row), [t])?;
    }
    let n = targets.len().max(1) as f64;
    Ok(SplitMetrics {
        count: targets.len(),
        p1: precision_at_n(&result, 1)?,
        p5: precision_at_n(&result, 5)?,
        p10: precision_at_n(&result, 10)?,
        hit10: hit_rate_at_n(&result, 10)?,
        ndcg10: ndcg_at_n(&result, 10)?,
        cross_entropy: ce / n,
    })
}

/// Trains on `split.train` with early stopping on validation Precision@10
/// and returns the best-validation checkpoint. Ties on Precision@10 go to
/// the higher Precision@1, then to the lower cross-entropy.
pub fn train(
    features: FeatureSpace,
    model_config: &ModelConfig,
    config: &TrainConfig,
    split: &DataSplit,
) -> Result<TrainOutcome> {
    train_with(features, model_config, config, split, |_| {})
}

pub fn train_with<F>(
    features: FeatureSpace,
    model_config: &ModelConfig,
    config: &TrainConfig,
    split: &DataSplit,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochStats),
{
    config.validate()?;
    let mut model = MapperModel::new(model_config.clone(), features)?;
    let y = model.taxonomy().len();

    let mut train_set = split.train.clone();
    if config.train_on_standards {
        train_set.extend(model.taxonomy().titles().iter().map(|t| LabeledTitle {
            title: t.clone(),
            standard: t.clone(),
        }));
    }
    if train_set.is_empty() || split.val.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    if split.train.len() < y {
        log::warn!(
            "only {} labeled training titles for {y} standard titles",
            split.train.len()
        );
    }
    let train_targets = label_indices(&train_set, model.taxonomy())?;
    let val_targets = label_indices(&split.val, model.taxonomy())?;
    let titles: Vec<&str> = train_set.iter().map(|l| l.title.as_str()).collect();
    let train_feats = model.features.featurize(&titles)?;
    let titles: Vec<&str> = split.val.iter().map(|l| l.title.as_str()).collect();
    let val_feats = model.features.featurize(&titles)?;

    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut state = {
        let named = model.params.named();
        let refs: Vec<&Tensor> = named.iter().map(|(_, t)| *t).collect();
        AdamState::new(adam, &refs)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curve = Vec::new();
    // Validation (P@10, P@1, -CE), compared lexicographically.
    let mut best: Option<((f64, f64, f64), usize, super::MapperParams)> = None;
    let mut stale = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut ce_sum) = (0.0, 0.0);
        for batch in order.chunks(config.batch_size) {
            let feats = train_feats.gather(batch)?;
            let labels: Vec<usize> = batch.iter().map(|&i| train_targets[i]).collect();
            let order_b = fold_order(y, Some(rng.random()));
            let order_s = fold_order(y, Some(rng.random()));
            let reg = sample_reg_candidates(batch.len(), y, model.config.regularizer_events, &mut rng);
            let sup = Supervision {
                labels: &labels,
                order_b: &order_b,
                order_s: &order_s,
                reg_candidates: &reg,
            };
            let mut tape = Tape::new();
            let vars = model.params.register(&mut tape, true);
            let out = forward(
                &mut tape,
                &model.config,
                &vars,
                &feats,
                (model.features.candidates_b(), model.features.candidates_s()),
                Some(&sup),
            )?;
            let terms = out.loss.expect("supervised forward");
            let loss = tape.value(terms.total).item()?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss became {loss} in epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            ce_sum += tape.value(terms.cross_entropy).item()? * batch.len() as f64;
            let mut grads = tape.backward(terms.total)?;
            let g: Vec<Tensor> = vars
                .all()
                .into_iter()
                .map(|v| grads.take(v).expect("parameter gradient"))
                .collect();
            let mut params = model.params.tensors_mut();
            state.step(&mut params, &g.iter().collect::<Vec<_>>())?;
            model.params.renormalize_truth();
        }
        let val = metrics_for(&model, &val_feats, &val_targets)?;
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_cross_entropy: ce_sum / train_set.len() as f64,
            val_cross_entropy: val.cross_entropy,
            val_p1: val.p1,
            val_p10: val.p10,
        };
        on_epoch(&stats);
        log::debug!("{stats:?}");
        curve.push(stats);

        let key = (val.p10, val.p1, -val.cross_entropy);
        let improved = match &best {
            None => true,
            Some((k, _, _)) => key.partial_cmp(k) == Some(std::cmp::Ordering::Greater),
        };
        if improved {
            best = Some((key, epoch, model.params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                break;
            }
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.params = params;
    Ok(TrainOutcome {
        model,
        curve,
        best_epoch,
    })
}
