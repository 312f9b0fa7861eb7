//! The fused mapper: co-attended view vectors and clause vectors are
//! concatenated, projected onto the taxonomy and normalized with a softmax.

mod artifact;
mod data;
mod features;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coattention::{co_attend, init_weight, CoAttentionParams, CoAttentionVars, ViewDims};
use crate::error::{Error, Result};
use crate::numerics::{softmax, Tape, Tensor, Var};
use crate::reasoning::{ReasoningParams, ReasoningVars};

pub use artifact::{read_model, write_model, FORMAT_VERSION};
pub use data::{label_indices, read_labels, split_dataset, write_labels, DataSplit, LabeledTitle, SplitFractions};
pub use features::{FeatureSpace, Features, SemanticSpec};
pub use train::{evaluate_split, train, train_with, EpochStats, SplitMetrics, TrainConfig, TrainOutcome};

/// Which parts of the architecture are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Co-attention and reasoning over all three views.
    #[default]
    Full,
    /// Raw view vectors plus clause vectors.
    NoCoAttention,
    /// Co-attended view vectors, no clause vectors.
    NoReasoning,
    /// Raw view vectors concatenated, nothing else.
    Concat,
    /// The semantic vector alone.
    SemanticOnly,
}

impl Variant {
    pub fn co_attention(self) -> bool {
        matches!(self, Variant::Full | Variant::NoReasoning)
    }

    pub fn reasoning(self) -> bool {
        matches!(self, Variant::Full | Variant::NoCoAttention)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub d_r: usize,
    /// Weight of the summed logical regularizers in the loss.
    pub regularizer_weight: f64,
    /// Weight of the clause truth loss.
    pub clause_weight: f64,
    /// Random events per title added to the regularizer inputs.
    pub regularizer_events: usize,
    /// Initial fusion bias. Positive and well clear of zero: with a small
    /// bias Adam drives many class logits below zero for every input before
    /// they learn anything, and the ReLU never lets them back.
    pub fusion_bias_init: f64,
    /// Added to the diagonal of the fusion weights over the syntactic block.
    /// That block is indexed by the taxonomy, so a scaled identity starts the
    /// classifier at the nearest-standard-title rule.
    pub syntactic_prior: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            d_r: 64,
            regularizer_weight: 1.0,
            clause_weight: 0.1,
            regularizer_events: 2,
            fusion_bias_init: 1.0,
            syntactic_prior: 10.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_r == 0 {
            return Err(Error::Config("d_r must be at least 1".into()));
        }
        for (name, w) in [
            ("regularizer_weight", self.regularizer_weight),
            ("clause_weight", self.clause_weight),
        ] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Config(format!("{name} must be a non-negative number")));
            }
        }
        Ok(())
    }
}

/// Learnable parameters of the mapper.
#[derive(Debug, Clone, PartialEq)]
pub struct MapperParams {
    pub coattention: Option<CoAttentionParams>,
    pub reasoning_b: Option<ReasoningParams>,
    pub reasoning_s: Option<ReasoningParams>,
    /// `[Y, fusion input width]`.
    pub fusion_w: Tensor,
    pub fusion_b: Tensor,
}

/// Column blocks of the fusion input: `(name, width, gain)`.
///
/// Co-attended vectors are `softmax(K) * x`, whose entries average `x / d`.
/// Their blocks carry a fixed gain of `d`, a reparameterization of the
/// fusion weights that keeps Adam's step size comparable across blocks.
pub fn fusion_blocks(variant: Variant, dims: ViewDims, d_r: usize) -> Vec<(&'static str, usize, f64)> {
    let ViewDims { d_h, d_b, d_s } = dims;
    let g = |d: usize| if variant.co_attention() { d as f64 } else { 1.0 };
    let mut blocks = match variant {
        Variant::SemanticOnly => vec![("x_b", d_b, 1.0)],
        _ => vec![("x_h", d_h, g(d_h)), ("x_b", d_b, g(d_b)), ("x_s", d_s, g(d_s))],
    };
    if variant.reasoning() {
        blocks.push(("clause_b", d_r, 1.0));
        blocks.push(("clause_s", d_r, 1.0));
    }
    blocks
}

impl MapperParams {
    pub fn init(config: &ModelConfig, dims: ViewDims) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let v = config.variant;
        let coattention = v
            .co_attention()
            .then(|| CoAttentionParams::init(dims, &mut rng))
            .transpose()?;
        let (reasoning_b, reasoning_s) = if v.reasoning() {
            (
                Some(ReasoningParams::init(dims.d_b, dims.d_b, config.d_r, &mut rng)?),
                Some(ReasoningParams::init(dims.d_s, dims.d_s, config.d_r, &mut rng)?),
            )
        } else {
            (None, None)
        };
        let blocks = fusion_blocks(v, dims, config.d_r);
        let width: usize = blocks.iter().map(|b| b.1).sum();
        let mut fusion_w = init_weight(&[dims.d_s, width], width, &mut rng)?;
        let mut offset = 0;
        for (name, w, _) in &blocks {
            if *name == "x_s" {
                for k in 0..dims.d_s {
                    fusion_w.data_mut()[k * width + offset + k] += config.syntactic_prior;
                }
            }
            offset += w;
        }
        let fusion_b = Tensor::full(&[dims.d_s], config.fusion_bias_init)?;
        Ok(Self {
            coattention,
            reasoning_b,
            reasoning_s,
            fusion_w,
            fusion_b,
        })
    }

    /// Every tensor with a stable dotted name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        if let Some(c) = &self.coattention {
            for (n, t) in crate::coattention::PARAM_NAMES.iter().zip(c.tensors()) {
                out.push((format!("coattention.{n}"), t));
            }
        }
        for (prefix, r) in [("reasoning_b", &self.reasoning_b), ("reasoning_s", &self.reasoning_s)] {
            if let Some(r) = r {
                for (n, t) in crate::reasoning::PARAM_NAMES.iter().zip(r.tensors()) {
                    out.push((format!("{prefix}.{n}"), t));
                }
            }
        }
        out.push(("fusion.w".into(), &self.fusion_w));
        out.push(("fusion.b".into(), &self.fusion_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        if let Some(c) = &mut self.coattention {
            out.extend(c.tensors_mut());
        }
        if let Some(r) = &mut self.reasoning_b {
            out.extend(r.tensors_mut());
        }
        if let Some(r) = &mut self.reasoning_s {
            out.extend(r.tensors_mut());
        }
        out.push(&mut self.fusion_w);
        out.push(&mut self.fusion_b);
        out
    }

    /// Rebuilds from `named()`-ordered tensors for the given variant.
    pub fn from_named(variant: Variant, mut tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut take = |prefix: &str, names: &[&str]| -> Result<Vec<Tensor>> {
            names
                .iter()
                .map(|n| {
                    let key = format!("{prefix}.{n}");
                    let pos = tensors
                        .iter()
                        .position(|(k, _)| *k == key)
                        .ok_or_else(|| Error::Data(format!("model is missing tensor {key}")))?;
                    Ok(tensors.remove(pos).1)
                })
                .collect()
        };
        let coattention = if variant.co_attention() {
            Some(CoAttentionParams::from_tensors(take(
                "coattention",
                &crate::coattention::PARAM_NAMES,
            )?)?)
        } else {
            None
        };
        let (reasoning_b, reasoning_s) = if variant.reasoning() {
            (
                Some(ReasoningParams::from_tensors(take("reasoning_b", &crate::reasoning::PARAM_NAMES)?)?),
                Some(ReasoningParams::from_tensors(take("reasoning_s", &crate::reasoning::PARAM_NAMES)?)?),
            )
        } else {
            (None, None)
        };
        let mut f = take("fusion", &["w", "b"])?;
        let fusion_b = f.pop().expect("two tensors");
        let fusion_w = f.pop().expect("two tensors");
        if let Some((k, _)) = tensors.first() {
            return Err(Error::Data(format!("unexpected tensor {k} for this variant")));
        }
        if fusion_w.ndim() != 2 || fusion_b.shape() != [fusion_w.shape()[0]] {
            return Err(Error::dim("fusion weight and bias shapes disagree"));
        }
        Ok(Self {
            coattention,
            reasoning_b,
            reasoning_s,
            fusion_w,
            fusion_b,
        })
    }

    pub fn renormalize_truth(&mut self) {
        for r in [&mut self.reasoning_b, &mut self.reasoning_s].into_iter().flatten() {
            r.renormalize_truth();
        }
    }

    fn register(&self, tape: &mut Tape, trainable: bool) -> ParamVars {
        let mut reg = |t: &Tensor| {
            if trainable {
                tape.param(t)
            } else {
                tape.constant(t.clone())
            }
        };
        let coattention = self
            .coattention
            .as_ref()
            .map(|c| CoAttentionVars(c.tensors().map(&mut reg)));
        let reasoning_b = self
            .reasoning_b
            .as_ref()
            .map(|r| ReasoningVars(r.tensors().map(&mut reg)));
        let reasoning_s = self
            .reasoning_s
            .as_ref()
            .map(|r| ReasoningVars(r.tensors().map(&mut reg)));
        let fusion_w = reg(&self.fusion_w);
        let fusion_b = reg(&self.fusion_b);
        ParamVars {
            coattention,
            reasoning_b,
            reasoning_s,
            fusion_w,
            fusion_b,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ParamVars {
    coattention: Option<CoAttentionVars>,
    reasoning_b: Option<ReasoningVars>,
    reasoning_s: Option<ReasoningVars>,
    fusion_w: Var,
    fusion_b: Var,
}

impl ParamVars {
    /// Inverse of [`ParamVars::all`] for parameters shaped like `params`.
    fn from_slice(params: &MapperParams, v: &[Var]) -> Result<Self> {
        let mut it = v.iter().copied();
        let mut take = |n: usize| -> Result<Vec<Var>> {
            let out: Vec<Var> = it.by_ref().take(n).collect();
            if out.len() == n {
                Ok(out)
            } else {
                Err(Error::Contract("too few parameter variables".into()))
            }
        };
        let arr = |v: Vec<Var>| -> [Var; 12] { v.try_into().expect("length checked") };
        let arr11 = |v: Vec<Var>| -> [Var; 11] { v.try_into().expect("length checked") };
        let coattention = match params.coattention {
            Some(_) => Some(CoAttentionVars(arr(take(12)?))),
            None => None,
        };
        let reasoning_b = match params.reasoning_b {
            Some(_) => Some(ReasoningVars(arr11(take(11)?))),
            None => None,
        };
        let reasoning_s = match params.reasoning_s {
            Some(_) => Some(ReasoningVars(arr11(take(11)?))),
            None => None,
        };
        let f = take(2)?;
        Ok(Self {
            coattention,
            reasoning_b,
            reasoning_s,
            fusion_w: f[0],
            fusion_b: f[1],
        })
    }

    /// Same order as [`MapperParams::tensors_mut`].
    fn all(&self) -> Vec<Var> {
        let mut out = Vec::new();
        if let Some(c) = self.coattention {
            out.extend(c.0);
        }
        if let Some(r) = self.reasoning_b {
            out.extend(r.0);
        }
        if let Some(r) = self.reasoning_s {
            out.extend(r.0);
        }
        out.push(self.fusion_w);
        out.push(self.fusion_b);
        out
    }
}

/// Training-only inputs to [`forward`].
pub(crate) struct Supervision<'a> {
    pub labels: &'a [usize],
    pub order_b: &'a [usize],
    pub order_s: &'a [usize],
    /// Candidate indices whose events join the regularizer inputs, per title.
    pub reg_candidates: &'a [Vec<usize>],
}

pub(crate) struct LossTerms {
    pub total: Var,
    pub cross_entropy: Var,
}

struct ForwardOut {
    /// Post-ReLU fusion scores; probabilities are their softmax.
    scores: Var,
    loss: Option<LossTerms>,
}

fn forward(
    tape: &mut Tape,
    config: &ModelConfig,
    p: &ParamVars,
    feats: &Features,
    candidates: (&Tensor, &Tensor),
    sup: Option<&Supervision<'_>>,
) -> Result<ForwardOut> {
    let batch = feats.len();
    let y = candidates.1.rows();
    let x_h = tape.constant(feats.h.clone());
    let x_b = tape.constant(feats.b.clone());
    let x_s = tape.constant(feats.s.clone());
    let dims = ViewDims {
        d_h: feats.h.cols(),
        d_b: feats.b.cols(),
        d_s: feats.s.cols(),
    };
    if dims.d_s != y {
        return Err(Error::dim(format!(
            "syntactic vectors have {} entries for {y} standard titles",
            dims.d_s
        )));
    }
    let views = match p.coattention {
        Some(c) => {
            let o = co_attend(tape, &c, x_h, x_b, x_s)?;
            [o.x_h, o.x_b, o.x_s]
        }
        None => [x_h, x_b, x_s],
    };
    let blocks = fusion_blocks(config.variant, dims, config.d_r);
    let mut parts = Vec::with_capacity(blocks.len());
    let mut reg_total: Option<Var> = None;
    let mut clause_total: Option<Var> = None;
    let taxonomy_order: Vec<usize> = (0..y).collect();

    for (name, _, gain) in &blocks {
        let v = match *name {
            "x_h" => views[0],
            "x_b" => views[1],
            "x_s" => views[2],
            _ => continue,
        };
        let v = if *name == "x_s" {
            let c = tape.constant(centering(dims.d_s)?);
            tape.matmul(v, c)?
        } else {
            v
        };
        parts.push(if *gain == 1.0 { v } else { tape.affine(v, *gain, 0.0)? });
    }
    for (rv, j, cand, order) in [
        (p.reasoning_b, x_b, candidates.0, sup.map(|s| s.order_b)),
        (p.reasoning_s, x_s, candidates.1, sup.map(|s| s.order_s)),
    ] {
        let Some(rv) = rv else { continue };
        let c = tape.constant(cand.clone());
        let events = rv.events(tape, j, c)?;
        let negated = rv.not(tape, events)?;
        let clause = rv.fold(tape, negated, batch, order.unwrap_or(&taxonomy_order))?;
        parts.push(clause);
        if let Some(s) = sup {
            let correct_rows: Vec<usize> = s.labels.iter().enumerate().map(|(i, &l)| i * y + l).collect();
            let correct = tape.gather_rows(events, &correct_rows)?;
            let ct = rv.clause_truth_loss(tape, clause, correct)?;
            clause_total = Some(match clause_total {
                Some(a) => tape.add(a, ct)?,
                None => ct,
            });
            let extra: Vec<usize> = s
                .reg_candidates
                .iter()
                .enumerate()
                .flat_map(|(i, ks)| ks.iter().map(move |&k| i * y + k))
                .collect();
            let reg_in = if extra.is_empty() {
                clause
            } else {
                let ev = tape.gather_rows(events, &extra)?;
                tape.concat(&[clause, ev], 0)?
            };
            let r = rv.regularizers(tape, reg_in, batch)?;
            reg_total = Some(match reg_total {
                Some(a) => tape.add(a, r.total)?,
                None => r.total,
            });
        }
    }
    let input = if parts.len() == 1 { parts[0] } else { tape.concat(&parts, 1)? };
    let z = tape.matmul_nt(input, p.fusion_w)?;
    let z = tape.add_row(z, p.fusion_b)?;
    let scores = tape.relu(z)?;

    let loss = match sup {
        None => None,
        Some(s) => {
            let ce = tape.softmax_cross_entropy(scores, s.labels)?;
            let mut total = ce;
            if let Some(r) = reg_total {
                let r = tape.affine(r, config.regularizer_weight, 0.0)?;
                total = tape.add(total, r)?;
            }
            if let Some(c) = clause_total {
                let c = tape.affine(c, config.clause_weight, 0.0)?;
                total = tape.add(total, c)?;
            }
            Some(LossTerms {
                total,
                cross_entropy: ce,
            })
        }
    };
    Ok(ForwardOut { scores, loss })
}

/// `I - 11ᵀ/d`: right-multiplying subtracts each row's mean.
fn centering(d: usize) -> Result<Tensor> {
    let mut c = vec![-1.0 / d as f64; d * d];
    for i in 0..d {
        c[i * d + i] += 1.0;
    }
    Tensor::matrix(d, d, c)
}

/// Ranked standard titles with probabilities, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMapping {
    pub title: String,
    pub entries: Vec<(String, f64)>,
}

/// Indices sorted by descending probability, lower index first on ties.
pub fn rank_indices(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    idx
}

/// A trained mapper bundled with its feature space.
#[derive(Debug)]
pub struct MapperModel {
    pub config: ModelConfig,
    pub features: FeatureSpace,
    pub params: MapperParams,
}

/// Titles per forward pass at inference.
const INFER_CHUNK: usize = 256;

impl MapperModel {
    pub fn new(config: ModelConfig, features: FeatureSpace) -> Result<Self> {
        let dims = ViewDims {
            d_h: features.d_h(),
            d_b: features.d_b(),
            d_s: features.d_s(),
        };
        let params = MapperParams::init(&config, dims)?;
        Ok(Self {
            config,
            features,
            params,
        })
    }

    pub fn taxonomy(&self) -> &crate::syntactic::Taxonomy {
        self.features.taxonomy()
    }

    /// Probability rows `[n, Y]` for precomputed features.
    pub fn predict_features(&self, feats: &Features) -> Result<Tensor> {
        let n = feats.len();
        let y = self.features.d_s();
        let mut out = Vec::with_capacity(n * y);
        let mut start = 0;
        while start < n {
            let end = (start + INFER_CHUNK).min(n);
            let idx: Vec<usize> = (start..end).collect();
            let chunk = feats.gather(&idx)?;
            let mut tape = Tape::new();
            let vars = self.params.register(&mut tape, false);
            let f = forward(
                &mut tape,
                &self.config,
                &vars,
                &chunk,
                (self.features.candidates_b(), self.features.candidates_s()),
                None,
            )?;
            let probs = softmax(tape.value(f.scores))?;
            if !probs.is_finite() {
                return Err(Error::Numeric("non-finite probabilities".into()));
            }
            out.extend_from_slice(probs.data());
            start = end;
        }
        Tensor::matrix(n, y, out)
    }

    pub fn predict<S: AsRef<str>>(&self, titles: &[S]) -> Result<Tensor> {
        let feats = self.features.featurize(titles)?;
        self.predict_features(&feats)
    }

    /// Top `k` standard titles for each input title. `k` is clamped to the
    /// taxonomy size.
    pub fn map_topk<S: AsRef<str>>(&self, titles: &[S], k: usize) -> Result<Vec<RankedMapping>> {
        let y = self.taxonomy().len();
        if k > y {
            log::warn!("k = {k} exceeds the taxonomy size {y}; clamping");
        }
        let k = k.clamp(1, y);
        let probs = self.predict(titles)?;
        Ok(titles
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let row = probs.row(i);
                RankedMapping {
                    title: t.as_ref().to_string(),
                    entries: rank_indices(row)
                        .into_iter()
                        .take(k)
                        .map(|j| (self.taxonomy().title(j).to_string(), row[j]))
                        .collect(),
                }
            })
            .collect())
    }
}

/// Largest relative error between reverse-mode gradients of the training
/// loss and central differences with step `h`, over every parameter tensor.
///
/// Fold orders and regularizer candidates are drawn once from `seed` and
/// held fixed so the loss is a deterministic function of the parameters.
pub fn loss_gradient_error(model: &MapperModel, labeled: &[LabeledTitle], seed: u64, h: f64) -> Result<f64> {
    let y = model.taxonomy().len();
    let labels = label_indices(labeled, model.taxonomy())?;
    let titles: Vec<&str> = labeled.iter().map(|l| l.title.as_str()).collect();
    let feats = model.features.featurize(&titles)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order_b = crate::reasoning::fold_order(y, Some(rng.random()));
    let order_s = crate::reasoning::fold_order(y, Some(rng.random()));
    let reg = sample_reg_candidates(labels.len(), y, model.config.regularizer_events, &mut rng);
    let inputs: Vec<Tensor> = model.params.named().into_iter().map(|(_, t)| t.clone()).collect();
    let cand = (model.features.candidates_b(), model.features.candidates_s());
    let f = |tape: &mut Tape, v: &[Var]| -> Result<Var> {
        let pv = ParamVars::from_slice(&model.params, v)?;
        let sup = Supervision {
            labels: &labels,
            order_b: &order_b,
            order_s: &order_s,
            reg_candidates: &reg,
        };
        let out = forward(tape, &model.config, &pv, &feats, cand, Some(&sup))?;
        Ok(out.loss.expect("supervised forward").total)
    };
    crate::numerics::gradcheck::max_relative_error(&f, &inputs, h)
}

/// Draws `per_title` candidate indices in `0..y` for each of `n` titles.
pub(crate) fn sample_reg_candidates<R: Rng>(n: usize, y: usize, per_title: usize, rng: &mut R) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| (0..per_title).map(|_| rng.random_range(0..y)).collect())
        .collect()
}
