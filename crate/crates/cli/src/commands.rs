//! The five pipeline commands. Each returns the human-readable summary that
//! the binary prints; every file it writes depends only on the inputs and
//! the configuration, never on timing.

use std::fs;
use std::path::{Path, PathBuf};

use dcc_core::dataio::{
    load_checkpoint, load_labels, load_matrix, normalize_features, save_checkpoint, save_labels, save_matrix,
    Checkpoint, DataMatrix, MatrixFormat,
};
use dcc_core::dccopt::{init_state, optimize, ClusterResult, TrainState, EPOCH_LOG_HEADER};
use dcc_core::graph::{build_graph, load_graph, save_graph, GraphHeader, NeighborhoodGraph};
use dcc_core::metrics::{score_all, Scores};
use dcc_core::nncore::Autoencoder;
use dcc_core::sdae::{initialize, reconstruction_mse, render_loss_log};
use dcc_core::{Error, Result};

use crate::config::{Mode, RunConfig};

pub const GRAPH_FILE: &str = "graph.txt";
pub const CHECKPOINT_FILE: &str = "sdae.ckpt";
pub const PRETRAIN_LOG_FILE: &str = "pretrain_log.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const EMBEDDING_FILE: &str = "embedding.bin";
pub const RUN_LOG_FILE: &str = "run_log.txt";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const METRICS_FILE: &str = "metrics.txt";
pub const STATE_FILE: &str = "final_state.ckpt";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Loads the configured data matrix, rescaled to `[0, 1]` per feature
/// unless normalization is disabled.
pub fn load_data(cfg: &RunConfig) -> Result<DataMatrix> {
    let path = cfg.data_path()?;
    let format = cfg.format.unwrap_or_else(|| MatrixFormat::infer(path));
    let data = load_matrix(path, format)?;
    Ok(if cfg.normalize { normalize_features(&data) } else { data })
}

fn graph_summary(graph: &NeighborhoodGraph) -> String {
    let degrees = graph.degrees();
    let min = degrees.iter().min().copied().unwrap_or(0);
    let max = degrees.iter().max().copied().unwrap_or(0);
    let mean = degrees.iter().sum::<usize>() as f64 / degrees.len().max(1) as f64;
    format!(
        "nodes {}\nedges {}\ncomponents {}\ndegree min {min} mean {mean:.3} max {max}\n",
        graph.n_nodes(),
        graph.n_edges(),
        graph.component_count()
    )
}

fn obtain_graph(cfg: &RunConfig, x: &DataMatrix) -> Result<(NeighborhoodGraph, String)> {
    if let Some(path) = &cfg.graph {
        let (graph, _) = load_graph(path)?;
        if graph.n_nodes() != x.n_points() {
            return Err(Error::LengthMismatch {
                expected: x.n_points(),
                found: graph.n_nodes(),
            });
        }
        return Ok((graph, format!("graph loaded from {}\n", path.display())));
    }
    let build = build_graph(x.values(), cfg.k, cfg.metric)?;
    let path = cfg.out.join(GRAPH_FILE);
    save_graph(
        &path,
        &build.graph,
        GraphHeader {
            k: build.k,
            metric: build.metric,
        },
    )?;
    let summary = format!(
        "graph written to {}\nmutual edges {}\nmutual components {}\n{}",
        path.display(),
        build.mutual_edges,
        build.mutual_components,
        graph_summary(&build.graph)
    );
    Ok((build.graph, summary))
}

pub fn cmd_build_graph(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let x = load_data(cfg)?;
    prepare_out(&cfg.out)?;
    let (_, summary) = obtain_graph(&RunConfig { graph: None, ..cfg.clone() }, &x)?;
    Ok(summary)
}

fn pretrain_into(cfg: &RunConfig, x: &DataMatrix) -> Result<(Autoencoder, String)> {
    let arch = cfg.architecture(x.n_dims())?;
    let (ae, log) = initialize(x.values().view(), &arch, &cfg.pretrain_config())?;
    let ckpt_path = cfg.out.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt_path, &Checkpoint::new(ae.clone()))?;
    write_text(&cfg.out.join(PRETRAIN_LOG_FILE), &render_loss_log(&log))?;
    let mse = reconstruction_mse(&ae, x.values().view())?;
    Ok((
        ae,
        format!(
            "checkpoint written to {}\nreconstruction mse {mse:.6e}\n",
            ckpt_path.display()
        ),
    ))
}

pub fn cmd_pretrain(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let x = load_data(cfg)?;
    prepare_out(&cfg.out)?;
    Ok(pretrain_into(cfg, &x)?.1)
}

fn obtain_autoencoder(cfg: &RunConfig, x: &DataMatrix) -> Result<(Autoencoder, String)> {
    let Some(path) = &cfg.checkpoint else {
        return pretrain_into(cfg, x);
    };
    let ae = load_checkpoint(path)?.autoencoder;
    if ae.input_dim() != x.n_dims() {
        return Err(Error::LengthMismatch {
            expected: x.n_dims(),
            found: ae.input_dim(),
        });
    }
    if ae.embed_dim() != cfg.embed_dim {
        return Err(Error::InvalidConfig(format!(
            "checkpoint embeds into {} dimensions but d = {}",
            ae.embed_dim(),
            cfg.embed_dim
        )));
    }
    Ok((ae, format!("autoencoder loaded from {}\n", path.display())))
}

fn render_run_log(result: &ClusterResult) -> String {
    let mut out = String::from(EPOCH_LOG_HEADER);
    out.push('\n');
    for record in &result.log {
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

fn render_summary(cfg: &RunConfig, state: &TrainState, result: &ClusterResult) -> String {
    format!(
        "mode {}\nclusters {}\ntermination {}\nepochs {}\nlambda {}\ndelta1 {}\ndelta2 {}\nmu1 {}\nmu2 {}\n",
        cfg.mode,
        result.num_clusters,
        result.termination.name(),
        result.epochs_run,
        state.params.lambda,
        state.delta1,
        state.delta2,
        state.params.mu1,
        state.params.mu2,
    )
}

fn render_scores(s: &Scores) -> String {
    format!("ami {:.6}\nnmi {:.6}\nacc {:.6}\n", s.ami, s.nmi, s.acc)
}

pub fn cmd_cluster(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let x = load_data(cfg)?;
    let truth = cfg.labels.as_deref().map(load_labels).transpose()?;
    if let Some(t) = &truth {
        if t.len() != x.n_points() {
            return Err(Error::LengthMismatch {
                expected: x.n_points(),
                found: t.len(),
            });
        }
    }
    prepare_out(&cfg.out)?;
    let (graph, mut report) = obtain_graph(cfg, &x)?;
    let network = match cfg.mode {
        Mode::Dcc => {
            let (ae, msg) = obtain_autoencoder(cfg, &x)?;
            report.push_str(&msg);
            Some(ae)
        }
        Mode::Rcc => None,
    };
    let dcc_cfg = cfg.dcc_config();
    let xv = x.values().view();
    let mut state = init_state(network, xv, &graph, &dcc_cfg)?;
    let result = optimize(&mut state, xv, &graph, &dcc_cfg, |_, record| {
        log::info!("{record}");
    })?;

    save_labels(cfg.out.join(LABELS_FILE), &result.labels)?;
    // Stored one embedding dimension per row.
    save_matrix(
        cfg.out.join(EMBEDDING_FILE),
        &result.final_z.t().to_owned(),
        MatrixFormat::Binary,
    )?;
    write_text(&cfg.out.join(RUN_LOG_FILE), &render_run_log(&result))?;
    let summary = render_summary(cfg, &state, &result);
    write_text(&cfg.out.join(SUMMARY_FILE), &summary)?;
    if let Some(ae) = state.network.clone() {
        save_checkpoint(
            cfg.out.join(STATE_FILE),
            &Checkpoint {
                autoencoder: ae,
                state: Some(state),
            },
        )?;
    }
    report.push_str(&summary);
    if let Some(t) = truth {
        let scores = score_all(&t, &result.labels)?;
        let text = render_scores(&scores);
        write_text(&cfg.out.join(METRICS_FILE), &text)?;
        report.push_str(&text);
    }
    Ok(report)
}

/// Scores predicted labels against ground truth; writes `metrics.txt` into
/// `out` when given.
pub fn cmd_evaluate(pred: &Path, truth: &Path, out: Option<&Path>) -> Result<String> {
    let pred = load_labels(pred)?;
    let truth = load_labels(truth)?;
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let text = render_scores(&score_all(&truth, &pred)?);
    if let Some(dir) = out {
        prepare_out(dir)?;
        write_text(&dir.join(METRICS_FILE), &text)?;
    }
    Ok(text)
}

/// Directory the plot CSVs are written to.
pub fn plot_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("plots")
}

pub fn cmd_export_plotdata(run_dir: &Path) -> Result<String> {
    let written = crate::plot::export(run_dir, &plot_dir(run_dir))?;
    let mut out = String::new();
    for path in written {
        out.push_str(&format!("wrote {}\n", path.display()));
    }
    Ok(out)
}
