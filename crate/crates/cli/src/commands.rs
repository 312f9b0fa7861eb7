use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use jtm_core::datagen::{gen_resumes, gen_taxonomy};
use jtm_core::eval::{link_prediction_auc, make_link_split, map_at_10_mobility};
use jtm_core::graph::{
    build_transition_graph, extract_parent_child_pairs, read_pairs, read_records, trajectories, write_pairs,
    write_records, JobRecord, ParentChildPair, TransitionGraph,
};
use jtm_core::model::{
    evaluate_split, read_labels, read_model, split_dataset, train_with, write_labels, write_model, FeatureSpace,
    LabeledTitle, MapperModel,
};
use jtm_core::poincare::{mean_parent_rank, train_poincare, HyperbolicEmbeddingTable, PoincareConfig};
use jtm_core::semantic::{embed_titles, EmbeddingCache};
use jtm_core::syntactic::Taxonomy;
use jtm_core::tsv::{fmt_f64, fmt_vector};
use jtm_core::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::{require, RunConfig};
use crate::output::OutDir;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

fn load_taxonomy(cfg: &RunConfig) -> Result<Taxonomy> {
    Taxonomy::read_tsv(open(require(&cfg.data.taxonomy, "taxonomy")?)?)
}

fn load_records(cfg: &RunConfig) -> Result<Vec<JobRecord>> {
    read_records(open(require(&cfg.data.resumes, "resumes")?)?)
}

fn load_model(cfg: &RunConfig) -> Result<MapperModel> {
    read_model(open(require(&cfg.data.model, "model")?)?)
}

fn load_titles(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push(t.to_string());
        }
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{} lists no titles", path.display())));
    }
    Ok(out)
}

/// Node vectors from either a Poincaré table or a semantic embedding file,
/// told apart by the header line.
fn load_vectors(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut first = String::new();
    open(path)?.read_line(&mut first)?;
    if first.starts_with("#poincare") {
        let (table, _) = HyperbolicEmbeddingTable::read_tsv(open(path)?)?;
        Ok(table.iter().map(|(t, v)| (t.to_string(), v.to_vec())).collect())
    } else {
        let cache = EmbeddingCache::read_tsv(open(path)?, &path.display().to_string())?;
        Ok(cache.iter().map(|(t, e)| (t.to_string(), e.vector.clone())).collect())
    }
}

/// Pairs for the hyperbolic embedding: an explicit pair file if given,
/// else derived from the resumes.
fn load_pairs(cfg: &RunConfig) -> Result<Vec<ParentChildPair>> {
    match &cfg.data.pairs {
        Some(p) => read_pairs(open(p)?),
        None => extract_parent_child_pairs(&load_records(cfg)?),
    }
}

fn echo(out: &OutDir, command: &str, cfg: &RunConfig) -> Result<()> {
    out.write_json(&format!("{command}.config.json"), cfg)?;
    Ok(())
}

pub fn gen_data(cfg: &RunConfig) -> Result<()> {
    let out = OutDir::create(&cfg.output_dir)?;
    let synth = gen_taxonomy(&cfg.synth)?;
    let (records, matrix) = gen_resumes(&cfg.synth, &synth)?;
    out.write("taxonomy.tsv", |w| synth.taxonomy.write_tsv(w))?;
    out.write("labels.tsv", |w| write_labels(w, &synth.labels()))?;
    out.write("resumes.jsonl", |w| write_records(w, &records))?;
    out.write("transitions.tsv", |w| {
        writeln!(w, "#transitions groups={}", matrix.len())?;
        for i in 0..matrix.len() {
            writeln!(w, "{}\t{}", synth.taxonomy.title(i), fmt_vector(matrix.row(i)))?;
        }
        Ok(())
    })?;
    echo(&out, "gen-data", cfg)
}

pub fn build_graph(cfg: &RunConfig) -> Result<()> {
    let records = load_records(cfg)?;
    let graph = build_transition_graph(&records)?;
    let pairs = extract_parent_child_pairs(&records)?;
    let out = OutDir::create(&cfg.output_dir)?;
    out.write("graph.tsv", |w| graph.write_tsv(w))?;
    out.write("pairs.tsv", |w| write_pairs(w, &pairs))?;
    out.write_json(
        "graph_summary.json",
        &json!({
            "records": records.len(),
            "persons": trajectories(&records)?.len(),
            "nodes": graph.nodes().len(),
            "edges": graph.edge_count(),
            "transitions": graph.total_transitions(),
            "pairs": pairs.len(),
        }),
    )?;
    echo(&out, "build-graph", cfg)
}

pub fn train_poincare_cmd(cfg: &RunConfig) -> Result<()> {
    let pairs = load_pairs(cfg)?;
    let table = train_poincare(&pairs, &cfg.poincare)?;
    let out = OutDir::create(&cfg.output_dir)?;
    out.write("poincare.tsv", |w| table.write_tsv(w, cfg.poincare.seed))?;
    let mut report = json!({
        "titles": table.len(),
        "pairs": pairs.len(),
        "dim": table.dim(),
        "mean_parent_rank": mean_parent_rank(&table, &pairs)?,
    });
    if cfg.poincare_plot {
        let plot_cfg = PoincareConfig {
            dim: 2,
            ..cfg.poincare.clone()
        };
        let flat = train_poincare(&pairs, &plot_cfg)?;
        out.write("poincare_2d.tsv", |w| flat.write_tsv(w, plot_cfg.seed))?;
        report["mean_parent_rank_2d"] = json!(mean_parent_rank(&flat, &pairs)?);
    }
    out.write_json("poincare_report.json", &report)?;
    echo(&out, "train-poincare", cfg)
}

pub fn encode_semantic(cfg: &RunConfig) -> Result<()> {
    let titles = match (&cfg.data.titles, &cfg.data.taxonomy) {
        (Some(p), _) => load_titles(p)?,
        (None, Some(_)) => load_taxonomy(cfg)?.titles().to_vec(),
        (None, None) => {
            return Err(Error::Config(
                "missing data.titles or data.taxonomy (pass --titles or --taxonomy)".into(),
            ))
        }
    };
    let s = &cfg.semantic;
    let provider = s.provider.build(s.dim, s.seed, s.fallback)?;
    let cache = embed_titles(provider.as_ref(), &titles)?;
    let out = OutDir::create(&cfg.output_dir)?;
    out.write("semantic.tsv", |w| cache.write_tsv(w, true))?;
    echo(&out, "encode-semantic", cfg)
}

#[derive(Serialize)]
struct TrainReport<'a> {
    best_epoch: usize,
    epochs_run: usize,
    train_examples: usize,
    val: jtm_core::model::SplitMetrics,
    test: jtm_core::model::SplitMetrics,
    config: &'a RunConfig,
}

pub fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let taxonomy = load_taxonomy(cfg)?;
    let labels = read_labels(open(require(&cfg.data.labels, "labels")?)?)?;
    let table = match &cfg.data.vectors {
        Some(p) => HyperbolicEmbeddingTable::read_tsv(open(p)?)?.0,
        None => train_poincare(&load_pairs(cfg)?, &cfg.poincare)?,
    };
    let features = FeatureSpace::new(taxonomy, table, cfg.semantic.clone())?;
    let split = split_dataset(&labels, cfg.train.split, cfg.train.split_seed)?;
    let outcome = train_with(features, &cfg.model, &cfg.train, &split, |s| {
        log::info!(
            "epoch {} loss {:.4} val_p1 {:.4} val_p10 {:.4}",
            s.epoch,
            s.train_loss,
            s.val_p1,
            s.val_p10
        )
    })?;
    let val = evaluate_split(&outcome.model, &split.val)?;
    let test = evaluate_split(&outcome.model, &split.test)?;

    let out = OutDir::create(&cfg.output_dir)?;
    out.write("model.jtm", |w| write_model(w, &outcome.model))?;
    out.write("curve.csv", |w| {
        writeln!(w, "epoch,train_loss,train_cross_entropy,val_cross_entropy,val_p1,val_p10")?;
        for e in &outcome.curve {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.epoch,
                fmt_f64(e.train_loss),
                fmt_f64(e.train_cross_entropy),
                fmt_f64(e.val_cross_entropy),
                fmt_f64(e.val_p1),
                fmt_f64(e.val_p10)
            )?;
        }
        Ok(())
    })?;
    for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        out.write(&format!("split_{name}.tsv"), |w| write_labels(w, part))?;
    }
    out.write_json(
        "train_report.json",
        &TrainReport {
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.curve.len(),
            train_examples: split.train.len(),
            val,
            test,
            config: cfg,
        },
    )?;
    echo(&out, "train", cfg)
}

pub fn map_cmd(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let titles = load_titles(require(&cfg.data.titles, "titles")?)?;
    let mappings = model.map_topk(&titles, cfg.map_k)?;
    let out = OutDir::create(&cfg.output_dir)?;
    out.write("mappings.tsv", |w| {
        writeln!(w, "title\trank\tstandard_title\tprobability")?;
        for m in &mappings {
            for (rank, (standard, p)) in m.entries.iter().enumerate() {
                writeln!(w, "{}\t{}\t{standard}\t{}", m.title, rank + 1, fmt_f64(*p))?;
            }
        }
        Ok(())
    })?;
    echo(&out, "map", cfg)
}

pub fn eval_cmd(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let path = match &cfg.data.test_labels {
        Some(p) => p.as_path(),
        None => require(&cfg.data.labels, "test_labels")?,
    };
    let labels: Vec<LabeledTitle> = read_labels(open(path)?)?;
    let m = evaluate_split(&model, &labels)?;
    let out = OutDir::create(&cfg.output_dir)?;
    out.write_json(
        "eval.json",
        &json!({
            "count": m.count,
            "precision_at_1": m.p1,
            "precision_at_5": m.p5,
            "precision_at_10": m.p10,
            "hit_rate_at_10": m.hit10,
            "ndcg_at_10": m.ndcg10,
            "cross_entropy": m.cross_entropy,
            "model_seed": model.config.seed,
            "config": cfg,
        }),
    )?;
    echo(&out, "eval", cfg)
}

pub fn linkpred_cmd(cfg: &RunConfig) -> Result<()> {
    let graph = match &cfg.data.graph {
        Some(p) => TransitionGraph::read_tsv(open(p)?)?,
        None => build_transition_graph(&load_records(cfg)?)?,
    };
    let vectors = load_vectors(require(&cfg.data.vectors, "vectors")?)?;
    let split = make_link_split(&graph, cfg.linkpred.seed)?;
    let report = link_prediction_auc(&split, &vectors, &cfg.linkpred)?;
    let out = OutDir::create(&cfg.output_dir)?;
    out.write_json(
        "linkpred.json",
        &json!({
            "report": report,
            "split_seed": cfg.linkpred.seed,
            "config": cfg,
        }),
    )?;
    echo(&out, "linkpred", cfg)
}

pub fn mobility_cmd(cfg: &RunConfig) -> Result<()> {
    let trajs = trajectories(&load_records(cfg)?)?;
    let model = load_model(cfg)?;
    let raw = map_at_10_mobility(&trajs, None)?;
    let mapped = map_at_10_mobility(&trajs, Some(&model))?;
    let out = OutDir::create(&cfg.output_dir)?;
    out.write_json(
        "mobility.json",
        &json!({
            "queries": raw.queries,
            "map_at_10_unmapped": raw.map_at_10,
            "map_at_10_mapped": mapped.map_at_10,
            "config": cfg,
        }),
    )?;
    echo(&out, "mobility", cfg)
}
