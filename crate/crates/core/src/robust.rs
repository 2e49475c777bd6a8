//! Robust estimators, the clustering objectives, and their gradients.
//!
//! The minibatch objective over a sample of edges `E_B` with incident node
//! set `B` is
//!
//! ```text
//! L_B = 1/|B| Σ_{i∈B} w_i (‖x_i − g(y_i)‖²/D + ρ1(‖z_i − y_i‖)/d)
//!     + λ/|B| Σ_{(i,j)∈E_B} w_ij ρ2(‖z_i − z_j‖),       y_i = f(x_i)
//! ```
//!
//! with per-node rebalancing `w_i = n_i^B / n_i`. Gradients differentiate
//! this expression exactly, so the robust terms carry the factor 2 from
//! `d/dx ρ(x) = 2μ²x / (μ + x²)²`.
//!
//! The same machinery evaluates the single-embedding objective
//! `½‖Z − Y‖² + λ/2 Σ w_ij ρ2(‖z_i − z_j‖)` ([`Objective::Rcc`]).

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::graph::NeighborhoodGraph;
use crate::nncore::{Autoencoder, AutoencoderGrads, Mode, Tape};
use crate::{Error, Result};

/// Scaled Geman-McClure estimator `μx² / (μ + x²)`.
pub fn rho(x: f64, mu: f64) -> f64 {
    rho_sq(x * x, mu)
}

/// `ρ` as a function of the squared residual.
#[inline]
pub fn rho_sq(r2: f64, mu: f64) -> f64 {
    mu * r2 / (mu + r2)
}

/// `dρ/d(r²) = μ² / (μ + r²)²`.
#[inline]
pub fn rho_sq_slope(r2: f64, mu: f64) -> f64 {
    let s = mu + r2;
    mu * mu / (s * s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustParams {
    pub mu1: f64,
    pub mu2: f64,
    pub lambda: f64,
}

impl RobustParams {
    pub fn new(mu1: f64, mu2: f64, lambda: f64) -> Result<Self> {
        if !(mu1 > 0.0 && mu2 > 0.0 && lambda >= 0.0) || !(mu1.is_finite() && mu2.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "robust parameters must be positive and finite (mu1 {mu1}, mu2 {mu2}, lambda {lambda})"
            )));
        }
        Ok(Self { mu1, mu2, lambda })
    }
}

/// Which clustering objective is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Robust data term `ρ1(‖z_i − y_i‖)/d` and pairwise `λ w_ij ρ2`.
    Dcc,
    /// Quadratic data term `½‖z_i − y_i‖²` and pairwise `(λ/2) w_ij ρ2`.
    Rcc,
}

impl Objective {
    fn pairwise_scale(self) -> f64 {
        match self {
            Objective::Dcc => 1.0,
            Objective::Rcc => 0.5,
        }
    }

    /// Data term value for a squared residual `r2`.
    fn data_value(self, r2: f64, mu1: f64, d: usize) -> f64 {
        match self {
            Objective::Dcc => rho_sq(r2, mu1) / d as f64,
            Objective::Rcc => 0.5 * r2,
        }
    }

    /// Coefficient `c` such that ∂(data term)/∂z_i = c (z_i − y_i).
    fn data_slope(self, r2: f64, mu1: f64, d: usize) -> f64 {
        match self {
            Objective::Dcc => 2.0 * rho_sq_slope(r2, mu1) / d as f64,
            Objective::Rcc => 1.0,
        }
    }
}

/// Edge-sampled minibatch with per-node rebalancing weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    edges: Vec<usize>,
    nodes: Vec<usize>,
    local_edges: Vec<(usize, usize)>,
    batch_degrees: Vec<usize>,
    node_weights: Vec<f64>,
}

impl Minibatch {
    /// `edge_ids` index into `graph.edges()`.
    pub fn new(graph: &NeighborhoodGraph, edge_ids: Vec<usize>) -> Result<Self> {
        if edge_ids.is_empty() {
            return Err(Error::EmptyMinibatch);
        }
        let mut nodes = Vec::with_capacity(2 * edge_ids.len());
        for &e in &edge_ids {
            let (i, j) = *graph.edges().get(e).ok_or_else(|| {
                Error::Degenerate(format!("edge index {e} outside graph with {} edges", graph.n_edges()))
            })?;
            nodes.push(i);
            nodes.push(j);
        }
        nodes.sort_unstable();
        nodes.dedup();
        let local = |node: usize| nodes.binary_search(&node).expect("incident node");
        let local_edges: Vec<(usize, usize)> = edge_ids
            .iter()
            .map(|&e| {
                let (i, j) = graph.edges()[e];
                (local(i), local(j))
            })
            .collect();
        let mut batch_degrees = vec![0usize; nodes.len()];
        for &(a, b) in &local_edges {
            batch_degrees[a] += 1;
            batch_degrees[b] += 1;
        }
        let node_weights = nodes
            .iter()
            .zip(&batch_degrees)
            .map(|(&n, &bd)| bd as f64 / graph.degrees()[n] as f64)
            .collect();
        Ok(Self {
            edges: edge_ids,
            nodes,
            local_edges,
            batch_degrees,
            node_weights,
        })
    }

    pub fn sampled_edges(&self) -> &[usize] {
        &self.edges
    }

    /// Sorted node indices incident to the sampled edges (`B`).
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn batch_degrees(&self) -> &[usize] {
        &self.batch_degrees
    }

    /// `w_i = n_i^B / n_i`, aligned with [`Minibatch::nodes`].
    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    /// Sampled edges as pairs of positions into [`Minibatch::nodes`].
    pub fn local_edges(&self) -> &[(usize, usize)] {
        &self.local_edges
    }
}

/// How `Y` is obtained from `X`.
#[derive(Clone, Copy)]
pub enum Embedding<'a> {
    /// `Y = F_θ(X)` through an autoencoder (reconstruction term included).
    Network(&'a Autoencoder),
    /// A fixed embedding; `X` is ignored.
    Fixed(ArrayView2<'a, f64>),
}

/// Weighted contributions of each term; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub reconstruction: f64,
    pub data: f64,
    pub pairwise: f64,
    pub total: f64,
}

impl LossTerms {
    fn new(reconstruction: f64, data: f64, pairwise: f64) -> Self {
        Self {
            reconstruction,
            data,
            pairwise,
            total: reconstruction + data + pairwise,
        }
    }
}

/// Forward pass over the nodes of one minibatch.
pub struct BatchForward {
    /// `y_i` for `i ∈ B`, in batch order.
    pub y: Array2<f64>,
    /// `x_i` and `g(y_i)` when an autoencoder is attached.
    pub x: Option<Array2<f64>>,
    pub reconstruction: Option<Array2<f64>>,
    tapes: Option<(Tape, Tape)>,
}

pub fn forward_batch(embedding: Embedding<'_>, x: ArrayView2<f64>, batch: &Minibatch) -> Result<BatchForward> {
    match embedding {
        Embedding::Fixed(y) => Ok(BatchForward {
            y: y.select(Axis(0), batch.nodes()),
            x: None,
            reconstruction: None,
            tapes: None,
        }),
        Embedding::Network(ae) => {
            let xb = x.select(Axis(0), batch.nodes());
            let (y, enc_tape) = ae.encode(xb.view(), Mode::Eval)?;
            let (recon, dec_tape) = ae.decode(y.view(), Mode::Eval)?;
            Ok(BatchForward {
                y,
                x: Some(xb),
                reconstruction: Some(recon),
                tapes: Some((enc_tape, dec_tape)),
            })
        }
    }
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn check_z(z: ArrayView2<f64>, n: usize, d: usize) -> Result<()> {
    if z.dim() != (n, d) {
        return Err(Error::shape("representatives", format!("{:?}", (n, d)), format!("{:?}", z.dim())));
    }
    Ok(())
}

/// Minibatch loss from a completed forward pass.
pub fn batch_loss(
    batch: &Minibatch,
    graph: &NeighborhoodGraph,
    fwd: &BatchForward,
    z: ArrayView2<f64>,
    rp: &RobustParams,
    objective: Objective,
) -> Result<LossTerms> {
    let d = fwd.y.ncols();
    check_z(z, graph.n_nodes(), d)?;
    let inv_b = 1.0 / batch.len() as f64;
    let mut recon = 0.0;
    if let (Some(x), Some(xh)) = (&fwd.x, &fwd.reconstruction) {
        let dim = x.ncols() as f64;
        for (k, w) in batch.node_weights().iter().enumerate() {
            recon += w * sq_dist(x.row(k), xh.row(k)) / dim;
        }
    }
    let mut data = 0.0;
    for (k, (&node, w)) in batch.nodes().iter().zip(batch.node_weights()).enumerate() {
        let r2 = sq_dist(z.row(node), fwd.y.row(k));
        data += w * objective.data_value(r2, rp.mu1, d);
    }
    let mut pair = 0.0;
    for (&e, &(a, b)) in batch.sampled_edges().iter().zip(batch.local_edges()) {
        let r2 = sq_dist(z.row(batch.nodes()[a]), z.row(batch.nodes()[b]));
        pair += graph.weights()[e] * rho_sq(r2, rp.mu2);
    }
    let pair = rp.lambda * objective.pairwise_scale() * pair;
    Ok(LossTerms::new(recon * inv_b, data * inv_b, pair * inv_b))
}

/// Evaluates `L_B` (forward pass included).
pub fn minibatch_loss(
    batch: &Minibatch,
    graph: &NeighborhoodGraph,
    embedding: Embedding<'_>,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    rp: &RobustParams,
    objective: Objective,
) -> Result<LossTerms> {
    let fwd = forward_batch(embedding, x, batch)?;
    batch_loss(batch, graph, &fwd, z, rp, objective)
}

/// `∂L_B/∂z_i` for `i ∈ B`, rows aligned with [`Minibatch::nodes`].
pub fn grad_z(
    batch: &Minibatch,
    graph: &NeighborhoodGraph,
    z: ArrayView2<f64>,
    y_batch: ArrayView2<f64>,
    rp: &RobustParams,
    objective: Objective,
) -> Result<Array2<f64>> {
    let d = y_batch.ncols();
    check_z(z, graph.n_nodes(), d)?;
    if y_batch.nrows() != batch.len() {
        return Err(Error::shape("batch embedding rows", batch.len(), y_batch.nrows()));
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut grad = Array2::zeros((batch.len(), d));
    for (k, (&node, w)) in batch.nodes().iter().zip(batch.node_weights()).enumerate() {
        let zi = z.row(node);
        let yi = y_batch.row(k);
        let coef = w * objective.data_slope(sq_dist(zi, yi), rp.mu1, d) * inv_b;
        let mut g = grad.row_mut(k);
        for c in 0..d {
            g[c] += coef * (zi[c] - yi[c]);
        }
    }
    let pair_scale = rp.lambda * objective.pairwise_scale() * inv_b;
    for (&e, &(a, b)) in batch.sampled_edges().iter().zip(batch.local_edges()) {
        let za = z.row(batch.nodes()[a]);
        let zb = z.row(batch.nodes()[b]);
        let coef = pair_scale * graph.weights()[e] * 2.0 * rho_sq_slope(sq_dist(za, zb), rp.mu2);
        for c in 0..d {
            let diff = coef * (za[c] - zb[c]);
            grad[[a, c]] += diff;
            grad[[b, c]] -= diff;
        }
    }
    Ok(grad)
}

/// Gradients of `L_B` with respect to every autoencoder parameter.
///
/// The upstream gradient at each code `y_i` combines the data term with the
/// reconstruction term backpropagated through the decoder; it is then pushed
/// through the encoder.
pub fn grad_y_and_params(
    batch: &Minibatch,
    ae: &Autoencoder,
    fwd: &BatchForward,
    z: ArrayView2<f64>,
    rp: &RobustParams,
    objective: Objective,
) -> Result<AutoencoderGrads> {
    let (enc_tape, dec_tape) = fwd
        .tapes
        .as_ref()
        .ok_or_else(|| Error::TapeMismatch("forward pass has no autoencoder tapes".into()))?;
    let (x, xh) = match (&fwd.x, &fwd.reconstruction) {
        (Some(x), Some(xh)) => (x, xh),
        _ => return Err(Error::TapeMismatch("forward pass has no reconstruction".into())),
    };
    if enc_tape.batch_size() != batch.len() {
        return Err(Error::TapeMismatch(format!(
            "tape covers {} rows, minibatch has {} nodes",
            enc_tape.batch_size(),
            batch.len()
        )));
    }
    let d = fwd.y.ncols();
    check_z(z, z.nrows(), d)?;
    let inv_b = 1.0 / batch.len() as f64;
    let dim = x.ncols() as f64;

    let weights = Array1::from(batch.node_weights().to_vec()).insert_axis(Axis(1));
    let recon_upstream = (xh - x) * &weights * (2.0 * inv_b / dim);
    let (decoder, mut dy) = ae.decoder.backward(dec_tape, recon_upstream.view())?;

    for (k, (&node, w)) in batch.nodes().iter().zip(batch.node_weights()).enumerate() {
        let zi = z.row(node);
        let yi = fwd.y.row(k);
        let coef = w * objective.data_slope(sq_dist(zi, yi), rp.mu1, d) * inv_b;
        let mut g = dy.row_mut(k);
        for c in 0..d {
            g[c] += coef * (yi[c] - zi[c]);
        }
    }
    let encoder = ae.encoder.backward_params(enc_tape, dy.view())?;
    Ok(AutoencoderGrads { encoder, decoder })
}

/// The full objective over all points and edges, without dropout.
///
/// For [`Objective::Dcc`]:
/// `(1/D)‖X − G(F(X))‖²_F + (1/d) Σ_i ρ1(‖z_i − y_i‖) + λ Σ_E w_ij ρ2(‖z_i − z_j‖)`.
pub fn full_objective(
    embedding: Embedding<'_>,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    graph: &NeighborhoodGraph,
    rp: &RobustParams,
    objective: Objective,
) -> Result<LossTerms> {
    let (y, recon) = match embedding {
        Embedding::Fixed(y) => (y.to_owned(), 0.0),
        Embedding::Network(ae) => {
            let y = ae.embed(x)?;
            let xh = ae.decoder.infer(y.view())?;
            let dim = x.ncols() as f64;
            let err: f64 = x.iter().zip(xh.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            (y, err / dim)
        }
    };
    let d = y.ncols();
    check_z(z, graph.n_nodes(), d)?;
    let data: f64 = z
        .rows()
        .into_iter()
        .zip(y.rows())
        .map(|(zi, yi)| objective.data_value(sq_dist(zi, yi), rp.mu1, d))
        .sum();
    let pair: f64 = graph
        .edges()
        .iter()
        .zip(graph.weights())
        .map(|(&(i, j), w)| w * rho_sq(sq_dist(z.row(i), z.row(j)), rp.mu2))
        .sum();
    Ok(LossTerms::new(recon, data, rp.lambda * objective.pairwise_scale() * pair))
}
