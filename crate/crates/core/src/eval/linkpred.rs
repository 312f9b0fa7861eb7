use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::auc;
use crate::error::{Error, Result};
use crate::graph::TransitionGraph;
use crate::numerics::{sigmoid, AdamConfig, AdamState, Tape, Tensor};

pub type Edge = (String, String);

/// Fraction of positives held out at each stage.
pub const HOLDOUT_FRACTION: f64 = 0.2;

/// Train graph plus balanced dev and test edge sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSplit {
    pub nodes: Vec<String>,
    pub train: Vec<Edge>,
    pub dev_pos: Vec<Edge>,
    pub dev_neg: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub test_neg: Vec<Edge>,
}

impl LinkSplit {
    pub fn train_graph_pairs(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.train.iter()
    }
}

/// Holds out 20% of the edges as test positives, then 20% of the rest as
/// dev positives, each matched by as many sampled non-edges. Self-loops are
/// not links and are left out.
pub fn make_link_split(graph: &TransitionGraph, seed: u64) -> Result<LinkSplit> {
    let mut edges: Vec<Edge> = graph
        .edges()
        .filter(|(a, b, _, _)| a != b)
        .map(|(a, b, _, _)| (a.to_string(), b.to_string()))
        .collect();
    if edges.len() < 10 {
        return Err(Error::Data(format!(
            "link prediction needs at least 10 edges, graph has {}",
            edges.len()
        )));
    }
    let all: BTreeSet<Edge> = edges.iter().cloned().collect();
    let nodes: Vec<String> = graph.nodes().iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);

    let n_test = (HOLDOUT_FRACTION * edges.len() as f64).round() as usize;
    let rest = edges.len() - n_test;
    let n_dev = (HOLDOUT_FRACTION * rest as f64).round() as usize;
    let test_pos: Vec<Edge> = edges.drain(..n_test).collect();
    let dev_pos: Vec<Edge> = edges.drain(..n_dev).collect();
    let train = edges;

    let n = nodes.len() as u128;
    let capacity = n * n.saturating_sub(1) - all.len() as u128;
    if capacity < (n_test + n_dev) as u128 {
        return Err(Error::Data(format!(
            "only {capacity} non-edges available for {} negatives",
            n_test + n_dev
        )));
    }
    let mut used = BTreeSet::new();
    let mut draw = |k: usize, rng: &mut ChaCha8Rng| -> Vec<Edge> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let a = rng.random_range(0..nodes.len());
            let b = rng.random_range(0..nodes.len());
            if a == b {
                continue;
            }
            let e = (nodes[a].clone(), nodes[b].clone());
            if all.contains(&e) || !used.insert(e.clone()) {
                continue;
            }
            out.push(e);
        }
        out
    };
    let test_neg = draw(n_test, &mut rng);
    let dev_neg = draw(n_dev, &mut rng);
    Ok(LinkSplit {
        nodes,
        train,
        dev_pos,
        dev_neg,
        test_pos,
        test_neg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeOperator {
    Average,
    Hadamard,
    WeightedL1,
    WeightedL2,
}

impl EdgeOperator {
    pub const ALL: [EdgeOperator; 4] = [
        EdgeOperator::Average,
        EdgeOperator::Hadamard,
        EdgeOperator::WeightedL1,
        EdgeOperator::WeightedL2,
    ];
}

impl fmt::Display for EdgeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeOperator::Average => "average",
            EdgeOperator::Hadamard => "hadamard",
            EdgeOperator::WeightedL1 => "weighted-l1",
            EdgeOperator::WeightedL2 => "weighted-l2",
        })
    }
}

impl FromStr for EdgeOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown edge operator {s:?}")))
    }
}

pub fn edge_embed(u: &[f64], v: &[f64], op: EdgeOperator) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::dim(format!(
            "edge endpoints have dimensions {} and {}",
            u.len(),
            v.len()
        )));
    }
    let f: fn(f64, f64) -> f64 = match op {
        EdgeOperator::Average => |a, b| (a + b) / 2.0,
        EdgeOperator::Hadamard => |a, b| a * b,
        EdgeOperator::WeightedL1 => |a, b| (a - b).abs(),
        EdgeOperator::WeightedL2 => |a, b| (a - b) * (a - b),
    };
    Ok(u.iter().zip(v).map(|(a, b)| f(*a, *b)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkPredConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for LinkPredConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorResult {
    pub operator: EdgeOperator,
    pub dev_auc: f64,
    pub test_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPredReport {
    pub operators: Vec<OperatorResult>,
    /// Operator with the highest dev AUC (earlier in [`EdgeOperator::ALL`] on ties).
    pub best_operator: EdgeOperator,
    pub best_test_auc: f64,
    pub train_edges: usize,
    pub dev_edges: usize,
    pub test_edges: usize,
}

struct Embedder<'a> {
    vectors: &'a BTreeMap<String, Vec<f64>>,
    op: EdgeOperator,
}

impl Embedder<'_> {
    fn embed(&self, e: &Edge) -> Result<Vec<f64>> {
        let get = |n: &str| {
            self.vectors
                .get(n)
                .ok_or_else(|| Error::Lookup(format!("no vector for node {n:?}")))
        };
        edge_embed(get(&e.0)?, get(&e.1)?, self.op)
    }

    fn matrix(&self, edges: &[Edge]) -> Result<Tensor> {
        let rows = edges.iter().map(|e| self.embed(e)).collect::<Result<Vec<_>>>()?;
        Tensor::from_rows(&rows)
    }
}

/// Logistic regression on edge features with fresh 1:1 negatives each
/// epoch. Returns `(weights, bias)`.
fn fit_logistic(
    emb: &Embedder<'_>,
    split: &LinkSplit,
    config: &LinkPredConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let train_set: BTreeSet<&Edge> = split.train.iter().collect();
    let nodes = &split.nodes;
    let pos = emb.matrix(&split.train)?;
    let d = pos.cols();
    let mut w = Tensor::zeros(&[1, d])?;
    let mut b = Tensor::zeros(&[1])?;
    let mut adam = AdamState::new(
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
        &[&w, &b],
    );
    for _ in 0..config.epochs {
        let mut negs = Vec::with_capacity(split.train.len());
        while negs.len() < split.train.len() {
            let a = rng.random_range(0..nodes.len());
            let c = rng.random_range(0..nodes.len());
            let e = (nodes[a].clone(), nodes[c].clone());
            if a != c && !train_set.contains(&e) {
                negs.push(e);
            }
        }
        let neg = emb.matrix(&negs)?;
        let mut tape = Tape::new();
        let wv = tape.param(&w);
        let bv = tape.param(&b);
        let xp = tape.constant(pos.clone());
        let xn = tape.constant(neg);
        let x = tape.concat(&[xp, xn], 0)?;
        let z = tape.matmul_nt(x, wv)?;
        let z = tape.add_row(z, bv)?;
        let targets: Vec<f64> = std::iter::repeat_n(1.0, split.train.len())
            .chain(std::iter::repeat_n(0.0, split.train.len()))
            .collect();
        let loss = tape.bce_with_logits(z, &targets)?;
        let mut g = tape.backward(loss)?;
        let (gw, gb) = (g.take(wv).expect("grad"), g.take(bv).expect("grad"));
        adam.step(&mut [&mut w, &mut b], &[&gw, &gb])?;
    }
    Ok((w.into_data(), b.item()?))
}

fn scores(emb: &Embedder<'_>, edges: &[Edge], w: &[f64], b: f64) -> Result<Vec<f64>> {
    edges
        .iter()
        .map(|e| {
            let x = emb.embed(e)?;
            Ok(sigmoid(crate::numerics::dot(&x, w) + b))
        })
        .collect()
}

/// Fits one classifier per edge operator, reports dev and test AUC and
/// picks the operator with the best dev AUC.
pub fn link_prediction_auc(
    split: &LinkSplit,
    vectors: &BTreeMap<String, Vec<f64>>,
    config: &LinkPredConfig,
) -> Result<LinkPredReport> {
    if split.train.is_empty() {
        return Err(Error::Evaluation("no training edges".into()));
    }
    let mut operators = Vec::new();
    for op in EdgeOperator::ALL {
        let emb = Embedder { vectors, op };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (w, b) = fit_logistic(&emb, split, config, &mut rng)?;
        let dev_auc = auc(
            &scores(&emb, &split.dev_pos, &w, b)?,
            &scores(&emb, &split.dev_neg, &w, b)?,
        )?;
        let test_auc = auc(
            &scores(&emb, &split.test_pos, &w, b)?,
            &scores(&emb, &split.test_neg, &w, b)?,
        )?;
        operators.push(OperatorResult {
            operator: op,
            dev_auc,
            test_auc,
        });
    }
    let best = operators
        .iter()
        .fold(None::<&OperatorResult>, |acc, r| match acc {
            Some(a) if a.dev_auc >= r.dev_auc => Some(a),
            _ => Some(r),
        })
        .expect("four operators");
    Ok(LinkPredReport {
        best_operator: best.operator,
        best_test_auc: best.test_auc,
        operators: operators.clone(),
        train_edges: split.train.len(),
        dev_edges: split.dev_pos.len(),
        test_edges: split.test_pos.len(),
    })
}
