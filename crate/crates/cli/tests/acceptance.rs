//! Acceptance run: one pass/fail line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use jtm_core::datagen::{balanced_tree_pairs, gen_resumes, gen_taxonomy, SynthConfig};
use jtm_core::eval::{auc, make_link_split, map_at_10_mobility, ndcg_at_n, RankingResult};
use jtm_core::graph::{trajectories, TransitionGraph};
use jtm_core::model::{
    loss_gradient_error, FeatureSpace, LabeledTitle, MapperModel, ModelConfig, SemanticSpec, Variant,
};
use jtm_core::numerics::gradcheck::max_relative_error;
use jtm_core::numerics::{AdamConfig, Tape, Tensor, Var};
use jtm_core::pipeline::{run_pipeline, PipelineConfig, PipelineOutput};
use jtm_core::poincare::{
    distance_gradient, mean_parent_rank, poincare_distance, project_to_ball, train_poincare,
    HyperbolicEmbeddingTable, PoincareConfig,
};
use jtm_core::reasoning::{fit_logic_modules, ReasoningParams};
use jtm_core::syntactic::{build_syntactic_vector, Taxonomy};
use jtm_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn within(t: Instant, limit: Duration) -> bool {
    t.elapsed() <= limit
}

// ---- 1: gradients ---------------------------------------------------------

type OpFn = fn(&mut Tape, &[Var]) -> Result<Var>;

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Every tape operation, each reduced to a scalar through a random
/// projection so all gradient entries differ.
fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, OpFn, Vec<Tensor>)> {
    let mut u = |r, c| uniform(rng, r, c);
    vec![
        ("matmul", (|t: &mut Tape, v: &[Var]| {
            let m = t.matmul(v[0], v[1])?;
            let p = t.mul(m, v[2])?;
            t.sum(p)
        }) as OpFn, vec![u(3, 4), u(4, 2), u(3, 2)]),
        ("matmul_nt", |t, v| {
            let m = t.matmul_nt(v[0], v[1])?;
            let p = t.mul(m, v[2])?;
            t.sum(p)
        }, vec![u(3, 4), u(2, 4), u(3, 2)]),
        ("add", |t, v| {
            let m = t.add(v[0], v[1])?;
            let p = t.mul(m, v[2])?;
            t.sum(p)
        }, vec![u(2, 3), u(2, 3), u(2, 3)]),
        ("add_row", |t, v| {
            let m = t.add_row(v[0], v[1])?;
            let p = t.mul(m, v[2])?;
            t.sum(p)
        }, vec![u(3, 4), u(1, 4), u(3, 4)]),
        ("mul_col", |t, v| {
            let m = t.mul_col(v[0], v[1])?;
            let p = t.mul(m, v[2])?;
            t.sum(p)
        }, vec![u(3, 4), u(3, 1), u(3, 4)]),
        ("affine", |t, v| {
            let m = t.affine(v[0], -1.5, 0.25)?;
            let p = t.mul(m, v[1])?;
            t.sum(p)
        }, vec![u(2, 3), u(2, 3)]),
        ("tanh", |t, v| {
            let m = t.tanh(v[0])?;
            let p = t.mul(m, v[1])?;
            t.sum(p)
        }, vec![u(3, 3), u(3, 3)]),
        ("relu", |t, v| {
            let m = t.relu(v[0])?;
            let p = t.mul(m, v[1])?;
            t.sum(p)
        }, vec![u(3, 3), u(3, 3)]),
        ("softmax", |t, v| {
            let m = t.softmax(v[0])?;
            let p = t.mul(m, v[1])?;
            t.sum(p)
        }, vec![u(3, 5), u(3, 5)]),
        ("concat", |t, v| {
            let m = t.concat(&[v[0], v[1]], 1)?;
            let p = t.mul(m, v[2])?;
            t.mean(p)
        }, vec![u(2, 3), u(2, 2), u(2, 5)]),
        ("row_sums", |t, v| {
            let m = t.row_sums(v[0])?;
            let p = t.mul(m, v[1])?;
            t.sum(p)
        }, vec![u(4, 3), u(4, 1)]),
        ("gather_rows", |t, v| {
            let m = t.gather_rows(v[0], &[2, 0, 2, 1])?;
            let p = t.mul(m, v[1])?;
            t.sum(p)
        }, vec![u(3, 3), u(4, 3)]),
        ("pairwise_add", |t, v| {
            let m = t.pairwise_add(v[0], v[1])?;
            let s = t.tanh(m)?;
            t.sum(s)
        }, vec![u(2, 3), u(4, 3)]),
        ("cosine_rows", |t, v| {
            let m = t.cosine_rows(v[0], v[1])?;
            let p = t.mul(m, v[2])?;
            t.sum(p)
        }, vec![u(3, 4), u(3, 4), u(3, 1)]),
        ("softmax_cross_entropy", |t, v| t.softmax_cross_entropy(v[0], &[1, 0, 3]), vec![u(3, 4)]),
        ("bce_with_logits", |t, v| t.bce_with_logits(v[0], &[1.0, 0.0, 1.0, 0.0]), vec![u(4, 1)]),
    ]
}

fn toy_space() -> FeatureSpace {
    let titles = ["data analyst", "senior data analyst", "nurse"];
    let taxonomy = Taxonomy::new(&titles).unwrap();
    let mut table = HyperbolicEmbeddingTable::new(8);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in titles.iter().chain(&["data analyst jr"]) {
        let v: Vec<f64> = (0..8).map(|_| rng.random_range(-0.3..0.3)).collect();
        table.insert(t.to_string(), project_to_ball(v).unwrap()).unwrap();
    }
    let spec = SemanticSpec {
        dim: 8,
        ..SemanticSpec::default()
    };
    FeatureSpace::new(taxonomy, table, spec).unwrap()
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_op: (f64, &str) = (0.0, "");
    for (name, f, inputs) in op_cases(&mut rng) {
        let e = max_relative_error(&f, &inputs, 1e-6)?;
        if e > worst_op.0 {
            worst_op = (e, name);
        }
    }
    // Hyperbolic distance gradient against differences of the distance.
    for _ in 0..20 {
        let u: Vec<f64> = (0..5).map(|_| rng.random_range(-0.4..0.4)).collect();
        let v: Vec<f64> = (0..5).map(|_| rng.random_range(-0.4..0.4)).collect();
        let g = distance_gradient(&u, &v)?;
        let mut fd = Vec::new();
        for i in 0..u.len() {
            let (mut up, mut down) = (u.clone(), u.clone());
            up[i] += 1e-6;
            down[i] -= 1e-6;
            fd.push((poincare_distance(&up, &v)? - poincare_distance(&down, &v)?) / 2e-6);
        }
        let e = jtm_core::numerics::gradcheck::relative_error(&g, &fd);
        if e > worst_op.0 {
            worst_op = (e, "poincare_distance");
        }
    }

    let cfg = ModelConfig {
        variant: Variant::Full,
        d_r: 8,
        seed: 11,
        ..ModelConfig::default()
    };
    let mut model = MapperModel::new(cfg, toy_space())?;
    // Away from the ReLU kink so differences do not straddle it.
    model.params.fusion_b.data_mut().fill(2.0);
    let labeled: Vec<LabeledTitle> = [
        ("data analyst", "data analyst"),
        ("senior data anlyst", "senior data analyst"),
        ("nurse", "nurse"),
    ]
    .iter()
    .map(|(t, s)| LabeledTitle {
        title: t.to_string(),
        standard: s.to_string(),
    })
    .collect();
    let full = loss_gradient_error(&model, &labeled, 5, 1e-5)?;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_op.0 <= 1e-4 && full <= 1e-3 && secs < 10.0,
        format!(
            "worst op {} rel err {:.2e}; full model {full:.2e}; {secs:.1}s",
            worst_op.1, worst_op.0
        ),
    )
}

// ---- 2-6: oracles ---------------------------------------------------------

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/poincare_distance_oracle.tsv");
    let text = std::fs::read_to_string(path)?;
    let parse = |s: &str| -> Vec<f64> { s.split(',').map(|x| x.parse().unwrap()).collect() };
    let (mut n, mut worst) = (0, 0.0f64);
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split('\t').collect();
        let got = poincare_distance(&parse(f[0]), &parse(f[1]))?;
        worst = worst.max((got - f[2].parse::<f64>().unwrap()).abs());
        n += 1;
    }
    let example = poincare_distance(&[0.5, 0.0], &[0.0, 0.5])?;
    let ex_err = (example - 1.680_699_772_428_003_6).abs();
    outcome(
        n == 1000 && worst <= 1e-10 && ex_err <= 1e-6 && within(start, Duration::from_secs(5)),
        format!("{n} pairs, max abs err {worst:.1e}; worked example {example:.12} (err {ex_err:.1e})"),
    )
}

fn criterion_3() -> Result<Outcome> {
    let start = Instant::now();
    let pairs = balanced_tree_pairs(3, 2);
    let cfg = PoincareConfig {
        dim: 10,
        epochs: 200,
        seed: 7,
        ..PoincareConfig::default()
    };
    let table = train_poincare(&pairs, &cfg)?;
    let rank = mean_parent_rank(&table, &pairs)?;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        table.len() == 13 && rank <= 2.0 && secs < 30.0,
        format!("{} nodes, mean parent rank {rank:.3}; {secs:.2}s", table.len()),
    )
}

fn trigrams(s: &str) -> std::collections::HashSet<String> {
    let padded: Vec<char> = format!("^^{s}$$").chars().collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

fn random_title(rng: &mut ChaCha8Rng) -> String {
    let words = rng.random_range(1..=3);
    (0..words)
        .map(|_| {
            (0..rng.random_range(1..=7))
                .map(|_| b"abcdeilmnorst"[rng.random_range(0..13)] as char)
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_4() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..200 {
        let mut titles: Vec<String> = (0..rng.random_range(1..8)).map(|_| random_title(&mut rng)).collect();
        titles.sort();
        titles.dedup();
        let tax = Taxonomy::new(&titles)?;
        let title = random_title(&mut rng);
        let got = build_syntactic_vector(&title, &tax)?;
        let a = trigrams(&title);
        let want: Vec<f64> = titles
            .iter()
            .map(|t| {
                let b = trigrams(t);
                a.intersection(&b).count() as f64 / ((a.len() * b.len()) as f64).sqrt()
            })
            .collect();
        if got.values != want {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/200 mismatches"))
}

fn criterion_5() -> Result<Outcome> {
    let mut r = RankingResult::new();
    r.push(vec![4, 8, 2, 6], [2])?;
    let ndcg = ndcg_at_n(&r, 10)?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut auc_bad = 0;
    for _ in 0..50 {
        let np = rng.random_range(1..100);
        let mut draw = |k| (0..k).map(|_| f64::from(rng.random_range(0..10u8))).collect::<Vec<_>>();
        let (pos, neg) = (draw(np), draw(100 - np));
        let mut wins = 0.0;
        for p in &pos {
            for q in &neg {
                wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
            }
        }
        if auc(&pos, &neg)? != wins / (pos.len() * neg.len()) as f64 {
            auc_bad += 1;
        }
    }

    let mut split_bad = Vec::new();
    for edges in [10usize, 57, 100, 250] {
        let trajs: BTreeMap<String, Vec<String>> = (0..edges)
            .map(|i| (format!("p{i}"), vec![format!("t{i}"), format!("t{}", (i + 1) % edges)]))
            .collect();
        let s = make_link_split(&TransitionGraph::from_trajectories(&trajs), 1)?;
        let test = (0.2 * edges as f64).round() as usize;
        let dev = (0.2 * (edges - test) as f64).round() as usize;
        let ok = s.test_pos.len() == test
            && s.test_neg.len() == test
            && s.dev_pos.len() == dev
            && s.dev_neg.len() == dev
            && s.train.len() == edges - test - dev;
        if !ok {
            split_bad.push(edges);
        }
    }
    outcome(
        ndcg == 0.5 && auc_bad == 0 && split_bad.is_empty(),
        format!("ndcg {ndcg}; auc mismatches {auc_bad}/50; bad link splits {split_bad:?}"),
    )
}

fn criterion_6() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (n, d) = (64, 16);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(v.iter().map(|x| x / norm));
    }
    let vectors = Tensor::matrix(n, d, data)?;
    let mut p = ReasoningParams::init(d, d, d, &mut rng)?;
    let adam = AdamConfig {
        lr: 1e-2,
        ..AdamConfig::default()
    };
    let totals = fit_logic_modules(&mut p, &vectors, 500, adam)?;
    let (first, last) = (totals[0], totals[totals.len() - 1]);
    let drop = 1.0 - last / first;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        drop >= 0.5 && secs < 60.0,
        format!("regularizer sum {first:.4} -> {last:.4} ({:.1}% drop); {secs:.1}s", 100.0 * drop),
    )
}

// ---- 7 and 10: through the binary ----------------------------------------

fn jtm(args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_jtm"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("jtm {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn criterion_7(work: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let d = work.join("c7");
    let o = d.display().to_string();
    let steps: [Vec<String>; 3] = [
        vec!["gen-data".into(), "--out".into(), o.clone()],
        vec![
            "train".into(),
            "--out".into(),
            o.clone(),
            "--taxonomy".into(),
            p(&d, "taxonomy.tsv"),
            "--labels".into(),
            p(&d, "labels.tsv"),
            "--resumes".into(),
            p(&d, "resumes.jsonl"),
        ],
        vec![
            "eval".into(),
            "--out".into(),
            o.clone(),
            "--model".into(),
            p(&d, "model.jtm"),
            "--test-labels".into(),
            p(&d, "split_test.tsv"),
        ],
    ];
    for s in &steps {
        let args: Vec<&str> = s.iter().map(String::as_str).collect();
        if let Err(e) = jtm(&args) {
            return outcome(false, e);
        }
    }
    let eval: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("eval.json"))?)?;
    let p1 = eval["precision_at_1"].as_f64().unwrap_or(f64::NAN);
    let hit10 = eval["hit_rate_at_10"].as_f64().unwrap_or(f64::NAN);
    let p10 = eval["precision_at_10"].as_f64().unwrap_or(f64::NAN);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        p1 >= 0.85 && hit10 >= 0.95 && secs < 600.0,
        format!(
            "test P@1 {p1:.4}, top-10 hit rate {hit10:.4} (|rel∩top10|/10 = {p10:.4}), n={}; {secs:.0}s",
            eval["count"]
        ),
    )
}

fn snapshot(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir)? {
        let path = e?.path();
        out.insert(path.clone(), std::fs::read(&path)?);
    }
    Ok(out)
}

fn criterion_10(work: &Path) -> Result<Outcome> {
    let d = work.join("c10");
    std::fs::create_dir_all(&d)?;
    let base = work.join("c10.json");
    std::fs::write(
        &base,
        serde_json::json!({
            "synth": { "groups": 20, "synonyms": 3, "persons": 300, "jobs_per_person": 4, "seed": 9 },
            "poincare": { "dim": 6, "epochs": 15 },
            "semantic": { "dim": 16 },
            "model": { "d_r": 8 },
            "train": { "max_epochs": 8, "batch_size": 32 }
        })
        .to_string(),
    )?;
    let titles = work.join("c10_titles.txt");
    std::fs::write(&titles, "senior data analyst\nnurse\nfoo bar\n")?;
    let (b, o) = (base.display().to_string(), d.display().to_string());
    let t = titles.display().to_string();
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("gen-data", vec![]),
        ("build-graph", vec!["--resumes".into(), p(&d, "resumes.jsonl")]),
        ("train-poincare", vec!["--pairs".into(), p(&d, "pairs.tsv"), "--plot".into()]),
        ("encode-semantic", vec!["--taxonomy".into(), p(&d, "taxonomy.tsv")]),
        (
            "train",
            vec![
                "--taxonomy".into(),
                p(&d, "taxonomy.tsv"),
                "--labels".into(),
                p(&d, "labels.tsv"),
                "--pairs".into(),
                p(&d, "pairs.tsv"),
            ],
        ),
        ("map", vec!["--model".into(), p(&d, "model.jtm"), "--titles".into(), t, "--k".into(), "3".into()]),
        ("eval", vec!["--model".into(), p(&d, "model.jtm"), "--test-labels".into(), p(&d, "split_test.tsv")]),
        ("linkpred", vec!["--graph".into(), p(&d, "graph.tsv"), "--vectors".into(), p(&d, "poincare.tsv")]),
        ("mobility", vec!["--resumes".into(), p(&d, "resumes.jsonl"), "--model".into(), p(&d, "model.jtm")]),
    ];
    for (cmd, extra) in &runs {
        let mut args = vec![*cmd, "--config", &b, "--out", &o];
        args.extend(extra.iter().map(String::as_str));
        if let Err(e) = jtm(&args) {
            return outcome(false, e);
        }
    }
    let first = snapshot(&d)?;
    for (cmd, _) in &runs {
        let echo = p(&d, &format!("{cmd}.config.json"));
        if let Err(e) = jtm(&[cmd, "--config", &echo]) {
            return outcome(false, e);
        }
    }
    let second = snapshot(&d)?;
    let differing: Vec<String> = first
        .keys()
        .chain(second.keys())
        .filter(|k| first.get(*k) != second.get(*k))
        .map(|k| k.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    outcome(
        differing.is_empty() && first.contains_key(&d.join("model.jtm")),
        format!("{} commands, {} files compared; differing {differing:?}", runs.len(), first.len()),
    )
}

// ---- 8 and 9: variants over seeds ----------------------------------------

fn pipeline(seed: u64, variant: Variant) -> Result<(PipelineOutput, BTreeMap<String, Vec<String>>)> {
    let sc = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let synth = gen_taxonomy(&sc)?;
    let (records, _) = gen_resumes(&sc, &synth)?;
    let mut cfg = PipelineConfig::default();
    cfg.poincare.dim = 10;
    cfg.poincare.epochs = 50;
    cfg.poincare.seed = seed;
    cfg.semantic.dim = 64;
    cfg.model.d_r = 16;
    cfg.model.variant = variant;
    cfg.model.seed = seed;
    cfg.train.split_seed = seed;
    cfg.train.shuffle_seed = seed;
    let out = run_pipeline(&records, &synth.labels(), synth.taxonomy.clone(), &cfg, |_| {})?;
    Ok((out, trajectories(&records)?))
}

struct VariantRuns {
    /// Mean top-10 hit rate, mean |rel∩top10|/10, mean P@1.
    full: [f64; 3],
    semantic: [f64; 3],
    concat: [f64; 3],
    mobility: Vec<(f64, f64)>,
    secs: f64,
}

fn variant_runs(seeds: &[u64]) -> Result<VariantRuns> {
    let start = Instant::now();
    let mut acc = [[0.0; 3]; 3];
    let mut mobility = Vec::new();
    let k = seeds.len() as f64;
    for &seed in seeds {
        for (slot, variant) in [Variant::Full, Variant::SemanticOnly, Variant::Concat].into_iter().enumerate() {
            let (out, trajs) = pipeline(seed, variant)?;
            acc[slot][0] += out.test.hit10 / k;
            acc[slot][1] += out.test.p10 / k;
            acc[slot][2] += out.test.p1 / k;
            if variant == Variant::Full {
                let raw = map_at_10_mobility(&trajs, None)?.map_at_10;
                let mapped = map_at_10_mobility(&trajs, Some(&out.outcome.model))?.map_at_10;
                mobility.push((raw, mapped));
            }
        }
    }
    Ok(VariantRuns {
        full: acc[0],
        semantic: acc[1],
        concat: acc[2],
        mobility,
        secs: start.elapsed().as_secs_f64(),
    })
}

fn criterion_8(r: &VariantRuns) -> Result<Outcome> {
    let ok = r.full[0] >= r.semantic[0] && r.full[0] >= r.concat[0] && r.full[1] >= r.semantic[1] && r.full[1] >= r.concat[1];
    let f = |m: &[f64; 3]| format!("hit@10 {:.4} P@10 {:.4} P@1 {:.4}", m[0], m[1], m[2]);
    outcome(
        ok,
        format!(
            "means over 3 seeds: full [{}] semantic-only [{}] concat [{}]; {:.0}s",
            f(&r.full),
            f(&r.semantic),
            f(&r.concat),
            r.secs
        ),
    )
}

fn criterion_9(r: &VariantRuns) -> Result<Outcome> {
    let k = r.mobility.len() as f64;
    let raw = r.mobility.iter().map(|m| m.0).sum::<f64>() / k;
    let mapped = r.mobility.iter().map(|m| m.1).sum::<f64>() / k;
    outcome(
        mapped >= raw,
        format!("mean MAP@10 mapped {mapped:.4} vs unmapped {raw:.4} over {} seeds", r.mobility.len()),
    )
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(usize, Result<Outcome>)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7(work.path())),
    ];
    match variant_runs(&[0, 1, 2]) {
        Ok(r) => {
            results.push((8, criterion_8(&r)));
            results.push((9, criterion_9(&r)));
        }
        Err(e) => {
            let msg = e.to_string();
            results.push((8, Err(e)));
            results.push((9, outcome(false, format!("not run: {msg}"))));
        }
    }
    results.push((10, criterion_10(work.path())));

    let mut failed = 0;
    for (n, r) in &results {
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {n:>2}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
