//! `jtm`: batch pipeline for job title mapping.
//!
//! Every subcommand reads an optional JSON run config, applies command-line
//! overrides, writes its outputs atomically into the output directory and
//! echoes the fully resolved config next to them as `<command>.config.json`.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jtm_core::{Error, ErrorKind};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "jtm", version, about = "Map noisy job titles onto a standard taxonomy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run config; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,
    #[arg(long, global = true)]
    resumes: Option<PathBuf>,
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
    #[arg(long, global = true)]
    test_labels: Option<PathBuf>,
    #[arg(long, global = true)]
    pairs: Option<PathBuf>,
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    #[arg(long, global = true)]
    vectors: Option<PathBuf>,
    #[arg(long, global = true)]
    titles: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Synthetic taxonomy, labeled variants and resumes.
    GenData,
    /// Transition graph, summary and parent-child pairs from resumes.
    BuildGraph,
    /// Poincaré embedding of the parent-child pairs.
    TrainPoincare {
        /// Also fit a 2-D embedding for plotting.
        #[arg(long)]
        plot: bool,
    },
    /// Semantic vectors for a title list (or the taxonomy).
    EncodeSemantic,
    /// Train the mapper; writes the model, training curve and splits.
    Train,
    /// Top-k standard titles for each line of a titles file.
    Map {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Ranking metrics of a model on labeled titles.
    Eval,
    /// Link-prediction AUC of node vectors on the transition graph.
    Linkpred,
    /// Next-title MAP@10 with and without mapping titles first.
    Mobility,
}

fn resolve(cli: &Cli) -> jtm_core::Result<RunConfig> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let c = &cli.common;
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    let d = &mut cfg.data;
    for (slot, flag) in [
        (&mut d.taxonomy, &c.taxonomy),
        (&mut d.resumes, &c.resumes),
        (&mut d.labels, &c.labels),
        (&mut d.test_labels, &c.test_labels),
        (&mut d.pairs, &c.pairs),
        (&mut d.graph, &c.graph),
        (&mut d.vectors, &c.vectors),
        (&mut d.titles, &c.titles),
        (&mut d.model, &c.model),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    match cli.command {
        Command::TrainPoincare { plot: true } => cfg.poincare_plot = true,
        Command::Map { k: Some(k) } => cfg.map_k = k,
        _ => {}
    }
    cfg.resolve()
}

fn run(cli: &Cli) -> jtm_core::Result<()> {
    let cfg = resolve(cli)?;
    match cli.command {
        Command::GenData => commands::gen_data(&cfg),
        Command::BuildGraph => commands::build_graph(&cfg),
        Command::TrainPoincare { .. } => commands::train_poincare_cmd(&cfg),
        Command::EncodeSemantic => commands::encode_semantic(&cfg),
        Command::Train => commands::train_cmd(&cfg),
        Command::Map { .. } => commands::map_cmd(&cfg),
        Command::Eval => commands::eval_cmd(&cfg),
        Command::Linkpred => commands::linkpred_cmd(&cfg),
        Command::Mobility => commands::mobility_cmd(&cfg),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let kind = match e.kind() {
                ErrorKind::Config => "config",
                ErrorKind::Data => "data",
                ErrorKind::Numeric => "numeric",
            };
            // One JSON object on one line.
            let line = serde_json::json!({ "error": kind, "code": code, "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}
