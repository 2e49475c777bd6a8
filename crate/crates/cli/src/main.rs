use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcc_cli::commands::{cmd_build_graph, cmd_cluster, cmd_evaluate, cmd_export_plotdata, cmd_pretrain};
use dcc_cli::RunConfig;
use dcc_core::Result;

#[derive(Parser)]
#[command(name = "dcc", version, about = "Deep continuous clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the mutual-kNN graph (with spanning-tree augmentation).
    BuildGraph(RunArgs),
    /// Initialize the autoencoder by stacked denoising pretraining.
    Pretrain(RunArgs),
    /// Run the clustering optimization and write labels and logs.
    Cluster(RunArgs),
    /// Score predicted labels against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write CSV series for plotting a finished clustering run.
    ExportPlotdata {
        /// Run directory written by `cluster`.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags shared by the pipeline commands. Each overrides the config file.
#[derive(Args)]
struct RunArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    /// csv or bin; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Ground-truth labels, one integer per line.
    #[arg(long)]
    labels: Option<String>,
    /// Embedding dimension.
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    edges_per_batch: Option<String>,
    /// dcc or rcc.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    epoch_cap: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Existing graph file to reuse.
    #[arg(long)]
    graph: Option<String>,
    /// Existing pretrained autoencoder to reuse.
    #[arg(long)]
    checkpoint: Option<String>,
    /// Pretraining epochs per layer pair.
    #[arg(long)]
    pretrain_epochs: Option<String>,
    #[arg(long)]
    finetune_epochs: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("data", &self.data),
            ("format", &self.format),
            ("labels", &self.labels),
            ("d", &self.d),
            ("k", &self.k),
            ("edges_per_batch", &self.edges_per_batch),
            ("mode", &self.mode),
            ("seed", &self.seed),
            ("epoch_cap", &self.epoch_cap),
            ("out", &self.out),
            ("graph", &self.graph),
            ("checkpoint", &self.checkpoint),
            ("pretrain_epochs", &self.pretrain_epochs),
            ("finetune_epochs", &self.finetune_epochs),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::BuildGraph(args) => cmd_build_graph(&args.resolve()?),
        Command::Pretrain(args) => cmd_pretrain(&args.resolve()?),
        Command::Cluster(args) => cmd_cluster(&args.resolve()?),
        Command::Evaluate { pred, labels, out } => cmd_evaluate(&pred, &labels, out.as_deref()),
        Command::ExportPlotdata { out } => cmd_export_plotdata(&out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dcc-error: {}: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
