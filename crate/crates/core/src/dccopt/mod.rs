//! The clustering driver: joint optimization of the representatives and
//! the autoencoder over edge minibatches, with graduated non-convexity and
//! an edge-stability stopping rule.
//!
//! One epoch visits a fresh random permutation of the graph's edges in
//! fixed-size batches. Every `M` epochs both robust scales are halved, down
//! to floors of half their thresholds. Once both scales sit at their floors
//! the clusters are extracted after every epoch, and training stops when
//! fewer than 0.1% of the edges switch between intra- and inter-cluster.

mod extract;

pub use extract::{cluster_count, extract_clusters};

use std::fmt;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::graph::{compute_delta1, compute_delta2, compute_lambda, edge_lengths, NeighborhoodGraph};
use crate::nncore::{AdamConfig, AdamMomentum, AdamState, Autoencoder, RowAdamState};
use crate::robust::{
    batch_loss, forward_batch, grad_y_and_params, grad_z, Embedding, LossTerms, Minibatch, Objective, RobustParams,
};
use crate::{DccRng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DccConfig {
    /// Epochs between halvings of the robust scales.
    pub continuation_period: usize,
    pub edges_per_batch: usize,
    pub adam: AdamConfig,
    /// Safety net; training never runs more epochs than this in total.
    pub epoch_cap: usize,
    /// Initial scales are this factor times the squared largest residual.
    pub mu_init_factor: f64,
    /// Stop once the fraction of edges changing status is below this.
    pub stop_fraction: f64,
    pub objective: Objective,
    /// Update the autoencoder (when one is attached).
    pub train_network: bool,
    pub seed: u64,
}

impl Default for DccConfig {
    fn default() -> Self {
        Self {
            continuation_period: 20,
            edges_per_batch: 128,
            adam: AdamConfig::with_momentum(1e-3, 0.99, AdamMomentum::Beta1),
            epoch_cap: 300,
            mu_init_factor: 3.0,
            stop_fraction: 1e-3,
            objective: Objective::Dcc,
            train_network: true,
            seed: 0,
        }
    }
}

impl DccConfig {
    pub fn validate(&self) -> Result<()> {
        if self.continuation_period == 0 || self.edges_per_batch == 0 {
            return Err(Error::InvalidConfig(
                "continuation period and edges per batch must be positive".into(),
            ));
        }
        if !(self.mu_init_factor > 0.0) || !(self.adam.lr >= 0.0) {
            return Err(Error::InvalidConfig("mu factor and learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Everything needed to continue an optimization run exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// `None` means the input itself is the (fixed) embedding.
    pub network: Option<Autoencoder>,
    /// Representatives, one row per point.
    pub z: Array2<f64>,
    pub params: RobustParams,
    pub delta1: f64,
    pub delta2: f64,
    /// Completed epochs.
    pub epoch: usize,
    pub continuation_period: usize,
    pub z_optimizer: RowAdamState,
    pub network_optimizer: Option<AdamState>,
    pub seed: u64,
    pub continuation_complete: bool,
    /// Intra-cluster flag per edge from the last extraction.
    pub edge_status: Option<Vec<bool>>,
}

impl TrainState {
    /// The current embedding `Y`.
    pub fn embedding(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match &self.network {
            Some(ae) => ae.embed(x),
            None => Ok(x.to_owned()),
        }
    }

    fn embedding_source<'a>(&'a self, x: ArrayView2<'a, f64>) -> Embedding<'a> {
        match &self.network {
            Some(ae) => Embedding::Network(ae),
            None => Embedding::Fixed(x),
        }
    }
}

/// Robust scales that keep every observed residual in the convex range.
fn initial_mu(y: ArrayView2<f64>, graph: &NeighborhoodGraph, factor: f64, delta1: f64, delta2: f64) -> (f64, f64) {
    let centroid = y.mean_axis(Axis(0)).expect("non-empty embedding");
    let max_spread = y
        .rows()
        .into_iter()
        .map(|r| (&r - &centroid).mapv(|v| v * v).sum())
        .fold(0.0, f64::max);
    let max_edge = edge_lengths(y, graph).into_iter().fold(0.0, f64::max);
    (
        (factor * max_spread).max(delta1 / 2.0),
        (factor * max_edge * max_edge).max(delta2 / 2.0),
    )
}

/// Sets `Z = Y` and derives `λ`, `δ1`, `δ2` and the initial scales.
pub fn init_state(
    network: Option<Autoencoder>,
    x: ArrayView2<f64>,
    graph: &NeighborhoodGraph,
    cfg: &DccConfig,
) -> Result<TrainState> {
    cfg.validate()?;
    if x.nrows() != graph.n_nodes() {
        return Err(Error::shape("data rows vs graph nodes", graph.n_nodes(), x.nrows()));
    }
    let y = match &network {
        Some(ae) => ae.embed(x)?,
        None => x.to_owned(),
    };
    if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: bad / y.ncols(),
            col: bad % y.ncols(),
        });
    }
    let delta1 = compute_delta1(y.view());
    let delta2 = compute_delta2(y.view(), graph);
    if !(delta1 > 0.0 && delta2 > 0.0) {
        return Err(Error::Degenerate(format!(
            "embedding has zero spread (delta1 {delta1}, delta2 {delta2})"
        )));
    }
    let lambda = compute_lambda(y.view(), graph)?;
    let (mu1, mu2) = initial_mu(y.view(), graph, cfg.mu_init_factor, delta1, delta2);
    let params = RobustParams::new(mu1, mu2, lambda)?;
    log::info!("init: lambda {lambda:.6}, delta1 {delta1:.6}, delta2 {delta2:.6}, mu1 {mu1:.6}, mu2 {mu2:.6}");
    let network_optimizer = match &network {
        Some(ae) if cfg.train_network => Some(AdamState::new(cfg.adam, &ae.tensor_sizes())),
        _ => None,
    };
    let (n, d) = y.dim();
    let mut state = TrainState {
        network,
        z: y,
        params,
        delta1,
        delta2,
        epoch: 0,
        continuation_period: cfg.continuation_period,
        z_optimizer: RowAdamState::new(cfg.adam, n, d),
        network_optimizer,
        seed: cfg.seed,
        continuation_complete: false,
        edge_status: None,
    };
    state.continuation_complete = at_floor(&state);
    Ok(state)
}

fn at_floor(state: &TrainState) -> bool {
    state.params.mu1 == state.delta1 / 2.0 && state.params.mu2 == state.delta2 / 2.0
}

/// Halves both scales, never going below `δ_i / 2`.
pub fn continuation_step(state: &mut TrainState) {
    let p = &mut state.params;
    p.mu1 = (p.mu1 / 2.0).max(state.delta1 / 2.0);
    p.mu2 = (p.mu2 / 2.0).max(state.delta2 / 2.0);
    state.continuation_complete = at_floor(state);
}

/// Independent, reproducible generator for the edge order of one epoch.
fn epoch_rng(seed: u64, epoch: usize) -> DccRng {
    let mut rng = DccRng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// A random permutation of all edge indices split into `m`-edge batches
/// (the last may be smaller).
pub fn epoch_partition(n_edges: usize, m: usize, rng: &mut DccRng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n_edges).collect();
    order.shuffle(rng);
    order.chunks(m.max(1)).map(<[usize]>::to_vec).collect()
}

/// Draws `m` distinct edges uniformly.
pub fn sample_edge_minibatch(graph: &NeighborhoodGraph, m: usize, rng: &mut DccRng) -> Result<Minibatch> {
    let ids = rand::seq::index::sample(rng, graph.n_edges(), m.min(graph.n_edges())).into_vec();
    Minibatch::new(graph, ids)
}

/// Mean losses over the batches of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub loss: LossTerms,
    pub batches: usize,
}

/// Runs one epoch of joint updates. Only the rows of `Z` belonging to each
/// batch are touched.
pub fn train_epoch(
    state: &mut TrainState,
    x: ArrayView2<f64>,
    graph: &NeighborhoodGraph,
    cfg: &DccConfig,
) -> Result<EpochStats> {
    let batches = epoch_partition(graph.n_edges(), cfg.edges_per_batch, &mut epoch_rng(state.seed, state.epoch));
    let limit = batches.len();
    train_batches(state, x, graph, cfg, batches, limit)
}

/// Like [`train_epoch`] but stops after `limit` batches.
pub fn train_partial_epoch(
    state: &mut TrainState,
    x: ArrayView2<f64>,
    graph: &NeighborhoodGraph,
    cfg: &DccConfig,
    limit: usize,
) -> Result<EpochStats> {
    let batches = epoch_partition(graph.n_edges(), cfg.edges_per_batch, &mut epoch_rng(state.seed, state.epoch));
    train_batches(state, x, graph, cfg, batches, limit)
}

fn train_batches(
    state: &mut TrainState,
    x: ArrayView2<f64>,
    graph: &NeighborhoodGraph,
    cfg: &DccConfig,
    batches: Vec<Vec<usize>>,
    limit: usize,
) -> Result<EpochStats> {
    let mut sum = LossTerms::default();
    let mut count = 0usize;
    let mut touched = vec![false; state.z.nrows()];
    for ids in batches.into_iter().take(limit) {
        let batch = Minibatch::new(graph, ids)?;
        for &node in batch.nodes() {
            touched[node] = true;
        }
        let params = state.params;
        let (loss, gz, net_grads) = {
            let source = state.embedding_source(x);
            let fwd = forward_batch(source, x, &batch)?;
            let loss = batch_loss(&batch, graph, &fwd, state.z.view(), &params, cfg.objective)?;
            if !loss.total.is_finite() {
                return Err(Error::Divergence {
                    stage: format!("clustering batch {count}"),
                    epoch: state.epoch,
                });
            }
            let gz = grad_z(&batch, graph, state.z.view(), fwd.y.view(), &params, cfg.objective)?;
            let net_grads = match (&state.network, &state.network_optimizer) {
                (Some(ae), Some(_)) => Some(grad_y_and_params(&batch, ae, &fwd, state.z.view(), &params, cfg.objective)?),
                _ => None,
            };
            (loss, gz, net_grads)
        };
        if let (Some(grads), Some(ae), Some(opt)) = (net_grads, state.network.as_mut(), state.network_optimizer.as_mut()) {
            opt.step(ae.tensors_mut(), grads.tensors())?;
        }
        state.z_optimizer.update_rows(&mut state.z, batch.nodes(), gz.view())?;
        sum.reconstruction += loss.reconstruction;
        sum.data += loss.data;
        sum.pairwise += loss.pairwise;
        sum.total += loss.total;
        count += 1;
    }
    let touched: Vec<usize> = (0..touched.len()).filter(|&i| touched[i]).collect();
    state.z_optimizer.sync_rows(&mut state.z, &touched);
    let scale = 1.0 / count.max(1) as f64;
    Ok(EpochStats {
        loss: LossTerms {
            reconstruction: sum.reconstruction * scale,
            data: sum.data * scale,
            pairwise: sum.pairwise * scale,
            total: sum.total * scale,
        },
        batches: count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Continue,
    Stop,
}

/// Fraction of edges whose intra/inter status differs between two
/// extractions.
pub fn changed_edge_fraction(previous: &[bool], current: &[bool]) -> f64 {
    let changed = previous.iter().zip(current).filter(|(a, b)| a != b).count();
    changed as f64 / current.len().max(1) as f64
}

/// Intra-cluster flag for every edge under `labels`.
pub fn edge_status(graph: &NeighborhoodGraph, labels: &[usize]) -> Vec<bool> {
    graph.edges().iter().map(|&(i, j)| labels[i] == labels[j]).collect()
}

/// Compares the current clustering with the previous one and records it.
/// Returns the decision and the changed fraction (if there was a previous
/// clustering to compare with).
pub fn check_convergence(
    state: &mut TrainState,
    labels: &[usize],
    graph: &NeighborhoodGraph,
    stop_fraction: f64,
) -> (Convergence, Option<f64>) {
    let current = edge_status(graph, labels);
    let fraction = state.edge_status.as_deref().map(|prev| changed_edge_fraction(prev, &current));
    state.edge_status = Some(current);
    match fraction {
        Some(f) if f < stop_fraction => (Convergence::Stop, Some(f)),
        _ => (Convergence::Continue, fraction),
    }
}

/// One line of the per-epoch log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossTerms,
    pub mu1: f64,
    pub mu2: f64,
    pub changed_fraction: Option<f64>,
    pub clusters: Option<usize>,
}

pub const EPOCH_LOG_HEADER: &str = "epoch total reconstruction data pairwise mu1 mu2 changed clusters";

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let changed = self.changed_fraction.map_or("-".to_string(), |v| v.to_string());
        let clusters = self.clusters.map_or("-".to_string(), |v| v.to_string());
        write!(
            f,
            "{} {} {} {} {} {} {} {} {}",
            self.epoch,
            self.loss.total,
            self.loss.reconstruction,
            self.loss.data,
            self.loss.pairwise,
            self.mu1,
            self.mu2,
            changed,
            clusters
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    EdgeStability,
    EpochCap,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::EdgeStability => "edge-stability",
            Termination::EpochCap => "epoch-cap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub num_clusters: usize,
    pub final_z: Array2<f64>,
    pub final_y: Array2<f64>,
    pub epochs_run: usize,
    pub termination: Termination,
    pub log: Vec<EpochRecord>,
}

/// Runs epochs until the stopping rule fires or the cap is reached, then
/// extracts the final clusters. `observer` sees the state after each epoch.
pub fn optimize(
    state: &mut TrainState,
    x: ArrayView2<f64>,
    graph: &NeighborhoodGraph,
    cfg: &DccConfig,
    mut observer: impl FnMut(&TrainState, &EpochRecord),
) -> Result<ClusterResult> {
    cfg.validate()?;
    let mut log = Vec::new();
    let mut termination = Termination::EpochCap;
    let mut last_labels = None;
    while state.epoch < cfg.epoch_cap {
        let stats = train_epoch(state, x, graph, cfg)?;
        state.epoch += 1;
        // Monitoring covers epochs that start with continuation complete.
        let monitoring = state.continuation_complete;
        if state.epoch % state.continuation_period == 0 {
            continuation_step(state);
        }
        let mut record = EpochRecord {
            epoch: state.epoch,
            loss: stats.loss,
            mu1: state.params.mu1,
            mu2: state.params.mu2,
            changed_fraction: None,
            clusters: None,
        };
        let mut stop = false;
        if monitoring || state.continuation_complete {
            let labels = extract_clusters(state.z.view(), state.delta2);
            let (decision, fraction) = check_convergence(state, &labels, graph, cfg.stop_fraction);
            record.changed_fraction = fraction;
            record.clusters = Some(cluster_count(&labels));
            stop = decision == Convergence::Stop;
            last_labels = Some(labels);
        }
        log::debug!("{record}");
        observer(state, &record);
        log.push(record);
        if stop {
            termination = Termination::EdgeStability;
            break;
        }
    }
    let labels = match last_labels {
        Some(l) if termination == Termination::EdgeStability => l,
        _ => extract_clusters(state.z.view(), state.delta2),
    };
    Ok(ClusterResult {
        num_clusters: cluster_count(&labels),
        labels,
        final_z: state.z.clone(),
        final_y: state.embedding(x)?,
        epochs_run: log.len(),
        termination,
        log,
    })
}

/// Clusters with a given (pretrained) autoencoder.
pub fn run_dcc(
    network: Autoencoder,
    x: ArrayView2<f64>,
    graph: &NeighborhoodGraph,
    cfg: &DccConfig,
) -> Result<ClusterResult> {
    let mut state = init_state(Some(network), x, graph, cfg)?;
    optimize(&mut state, x, graph, cfg, |_, _| {})
}

/// Optimizes the single-embedding objective over `Z` with `Y` fixed to the
/// input.
pub fn run_rcc(y: ArrayView2<f64>, graph: &NeighborhoodGraph, cfg: &DccConfig) -> Result<ClusterResult> {
    let cfg = DccConfig {
        objective: Objective::Rcc,
        ..*cfg
    };
    let mut state = init_state(None, y, graph, &cfg)?;
    optimize(&mut state, y, graph, &cfg, |_, _| {})
}

/// Epochs needed for a scale to fall from `mu` to its floor `delta / 2`.
pub fn halvings_to_floor(mu: f64, delta: f64) -> usize {
    let ratio = mu / (delta / 2.0);
    if ratio <= 1.0 {
        0
    } else {
        ratio.log2().ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Edge, Metric};
    use ndarray::array;
    use rand::Rng;

    fn blobs(per: usize, centers: &[[f64; 2]], spread: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = DccRng::seed_from_u64(seed);
        let mut x = Array2::zeros((per * centers.len(), 2));
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for p in 0..per {
                let row = c * per + p;
                x[[row, 0]] = center[0] + rng.random_range(-spread..spread);
                x[[row, 1]] = center[1] + rng.random_range(-spread..spread);
                labels.push(c);
            }
        }
        (x, labels)
    }

    fn state_with(mu1: f64, delta1: f64) -> TrainState {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let g = NeighborhoodGraph::from_edges(3, &[Edge::new(0, 1, 0.0), Edge::new(1, 2, 0.0)]).unwrap();
        let mut s = init_state(None, x.view(), &g, &DccConfig::default()).unwrap();
        s.params.mu1 = mu1;
        s.delta1 = delta1;
        s
    }

    #[test]
    fn continuation_schedule() {
        let mut s = state_with(8.0, 2.0);
        let mut seen = Vec::new();
        for _ in 0..4 {
            continuation_step(&mut s);
            seen.push(s.params.mu1);
        }
        assert_eq!(seen, vec![4.0, 2.0, 1.0, 1.0]);
        assert_eq!(halvings_to_floor(8.0, 2.0), 3);
        assert_eq!(halvings_to_floor(1.0, 2.0), 0);
    }

    #[test]
    fn init_sets_z_to_embedding_and_floors() {
        let (x, _) = blobs(10, &[[0.0, 0.0], [5.0, 5.0]], 0.5, 1);
        let g = build_graph(&x, 3, Metric::Euclidean).unwrap().graph;
        let s = init_state(None, x.view(), &g, &DccConfig::default()).unwrap();
        assert_eq!(s.z, x);
        assert!(s.params.mu1 >= s.delta1 / 2.0 && s.params.mu2 >= s.delta2 / 2.0);
        let full = crate::robust::full_objective(
            Embedding::Fixed(x.view()),
            x.view(),
            s.z.view(),
            &g,
            &s.params,
            Objective::Dcc,
        )
        .unwrap();
        assert_eq!(full.data, 0.0);
    }

    #[test]
    fn degenerate_embedding_is_rejected() {
        let x = Array2::from_elem((4, 2), 1.0);
        let g = NeighborhoodGraph::from_edges(4, &[Edge::new(0, 1, 0.0), Edge::new(1, 2, 0.0), Edge::new(2, 3, 0.0)])
            .unwrap();
        assert!(matches!(init_state(None, x.view(), &g, &DccConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn partition_covers_every_edge_once() {
        let mut rng = DccRng::seed_from_u64(3);
        let parts = epoch_partition(1000, 128, &mut rng);
        assert_eq!(parts.len(), 8);
        assert_eq!(parts.last().unwrap().len(), 1000 - 7 * 128);
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn convergence_rule() {
        let g = NeighborhoodGraph::from_edges(3, &[Edge::new(0, 1, 0.0), Edge::new(1, 2, 0.0)]).unwrap();
        let mut s = state_with(1.0, 1.0);
        assert_eq!(check_convergence(&mut s, &[0, 0, 1], &g, 1e-3), (Convergence::Continue, None));
        assert_eq!(check_convergence(&mut s, &[0, 0, 1], &g, 1e-3), (Convergence::Stop, Some(0.0)));
        assert_eq!(check_convergence(&mut s, &[0, 0, 0], &g, 1e-3).0, Convergence::Continue);
        // Strict inequality at the boundary.
        let prev = vec![true; 1000];
        let mut cur = prev.clone();
        cur[0] = false;
        assert_eq!(changed_edge_fraction(&prev, &cur), 1e-3);
        assert!(!(changed_edge_fraction(&prev, &cur) < 1e-3));
    }

    #[test]
    fn zero_learning_rate_only_advances_epoch() {
        let (x, _) = blobs(8, &[[0.0, 0.0], [4.0, 0.0]], 0.5, 2);
        let g = build_graph(&x, 3, Metric::Euclidean).unwrap().graph;
        let cfg = DccConfig {
            adam: AdamConfig { lr: 0.0, ..DccConfig::default().adam },
            ..DccConfig::default()
        };
        let mut s = init_state(None, x.view(), &g, &cfg).unwrap();
        let z0 = s.z.clone();
        train_epoch(&mut s, x.view(), &g, &cfg).unwrap();
        assert_eq!(s.z, z0);
    }

    #[test]
    fn partial_epoch_leaves_unsampled_rows() {
        let (x, _) = blobs(20, &[[0.0, 0.0], [4.0, 0.0]], 0.5, 3);
        let g = build_graph(&x, 4, Metric::Euclidean).unwrap().graph;
        let cfg = DccConfig {
            edges_per_batch: 3,
            ..DccConfig::default()
        };
        let mut s = init_state(None, x.view(), &g, &cfg).unwrap();
        let z0 = s.z.clone();
        let batches = epoch_partition(g.n_edges(), 3, &mut epoch_rng(s.seed, 0));
        let touched: std::collections::BTreeSet<usize> =
            batches[..2].iter().flatten().flat_map(|&e| [g.edges()[e].0, g.edges()[e].1]).collect();
        train_partial_epoch(&mut s, x.view(), &g, &cfg, 2).unwrap();
        for i in 0..x.nrows() {
            if !touched.contains(&i) {
                assert_eq!(s.z.row(i), z0.row(i));
            }
        }
    }

    #[test]
    fn two_point_descent() {
        let x = array![[0.0, 0.0], [1.0, 0.0]];
        let g = NeighborhoodGraph::from_edges(2, &[Edge::new(0, 1, 1.0)]).unwrap();
        let cfg = DccConfig::default();
        let mut s = init_state(None, x.view(), &g, &cfg).unwrap();
        let batch = Minibatch::new(&g, vec![0]).unwrap();
        let loss = |s: &TrainState| {
            crate::robust::minibatch_loss(&batch, &g, Embedding::Fixed(x.view()), x.view(), s.z.view(), &s.params, cfg.objective)
                .unwrap()
                .total
        };
        let before = loss(&s);
        train_epoch(&mut s, x.view(), &g, &cfg).unwrap();
        assert!(loss(&s) < before);
    }

    /// Jittered 6x5 lattices: nearest-neighbor spacing is nearly uniform,
    /// so the shortest edges are representative of within-blob spacing.
    fn lattice_blobs(centers: &[[f64; 2]], seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = DccRng::seed_from_u64(seed);
        let per = 30;
        let mut x = Array2::zeros((per * centers.len(), 2));
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for p in 0..per {
                let row = c * per + p;
                x[[row, 0]] = center[0] + 0.3 * (p % 6) as f64 + rng.random_range(-0.02..0.02);
                x[[row, 1]] = center[1] + 0.3 * (p / 6) as f64 + rng.random_range(-0.02..0.02);
                labels.push(c);
            }
        }
        (x, labels)
    }

    #[test]
    fn rcc_recovers_separated_blobs() {
        let (x, labels) = lattice_blobs(&[[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]], 4);
        let g = build_graph(&x, 10, Metric::Euclidean).unwrap().graph;
        let cfg = DccConfig {
            adam: AdamConfig { lr: 0.01, ..DccConfig::default().adam },
            continuation_period: 10,
            ..DccConfig::default()
        };
        let result = run_rcc(x.view(), &g, &cfg).unwrap();
        assert_eq!(result.num_clusters, 3);
        assert_eq!(crate::metrics::ami(&labels, &result.labels).unwrap(), 1.0);
        assert_eq!(result.termination, Termination::EdgeStability);
    }

    #[test]
    fn rcc_without_pairwise_term_keeps_points_apart() {
        let (x, _) = lattice_blobs(&[[0.0, 0.0]], 8);
        let g = build_graph(&x, 5, Metric::Euclidean).unwrap().graph;
        let cfg = DccConfig {
            adam: AdamConfig { lr: 0.01, ..DccConfig::default().adam },
            continuation_period: 2,
            epoch_cap: 40,
            ..DccConfig::default()
        };
        let mut state = init_state(None, x.view(), &g, &DccConfig { objective: Objective::Rcc, ..cfg }).unwrap();
        state.params.lambda = 0.0;
        let r = optimize(&mut state, x.view(), &g, &DccConfig { objective: Objective::Rcc, ..cfg }, |_, _| {}).unwrap();
        assert_eq!(r.final_z, x);
        assert_eq!(r.labels, extract_clusters(x.view(), state.delta2));
    }

    #[test]
    fn epoch_cap_zero_extracts_from_initial_embedding() {
        let (x, _) = blobs(5, &[[0.0, 0.0], [9.0, 0.0]], 0.1, 5);
        let g = build_graph(&x, 2, Metric::Euclidean).unwrap().graph;
        let cfg = DccConfig {
            epoch_cap: 0,
            ..DccConfig::default()
        };
        let r = run_rcc(x.view(), &g, &cfg).unwrap();
        assert_eq!(r.epochs_run, 0);
        assert_eq!(r.termination, Termination::EpochCap);
        assert_eq!(r.labels, extract_clusters(x.view(), compute_delta2(x.view(), &g)));
    }

    #[test]
    fn mu_is_monotone_and_reaches_floor() {
        let (x, _) = blobs(15, &[[0.0, 0.0], [6.0, 0.0]], 0.8, 6);
        let g = build_graph(&x, 4, Metric::Euclidean).unwrap().graph;
        let cfg = DccConfig {
            continuation_period: 2,
            epoch_cap: 60,
            stop_fraction: 0.0,
            ..DccConfig::default()
        };
        let r = run_rcc(x.view(), &g, &cfg).unwrap();
        for w in r.log.windows(2) {
            assert!(w[1].mu1 <= w[0].mu1 && w[1].mu2 <= w[0].mu2);
        }
        let delta1 = compute_delta1(x.view());
        assert_eq!(r.log.last().unwrap().mu1, delta1 / 2.0);
    }
}
