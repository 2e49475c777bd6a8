//! Connectivity graph over the datapoints and the constants derived from it.
//!
//! The graph is the mutual-kNN graph augmented with a minimum spanning tree
//! of the (symmetrized) kNN graph, so that every point is reachable. Edge
//! weights balance each node's total pull in the pairwise loss:
//! `w_ij = mean_degree / sqrt(n_i n_j)`.

mod knn;
mod persist;
mod spectral;

pub use knn::{cosine_knn, euclidean_knn, knn, KnnLists, Metric, Neighbor};
pub use persist::{load_graph, parse_graph, render_graph, save_graph, GraphHeader};
pub use spectral::{
    spectral_norm, DenseOperator, GramOperator, LaplacianOperator, SpectralNorm, SymmetricOperator,
};

use ndarray::{Array2, ArrayView2};

use crate::unionfind::UnionFind;
use crate::{Error, Result};

/// An undirected edge `i < j` with its construction distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, distance: f64) -> Self {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        Self { i, j, distance }
    }
}

/// The fixed edge set `E` with weights and degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    distances: Vec<f64>,
    weights: Vec<f64>,
    degrees: Vec<usize>,
}

impl NeighborhoodGraph {
    /// Builds a graph from undirected edges; duplicates and self-loops are rejected.
    pub fn from_edges(n_nodes: usize, edges: &[Edge]) -> Result<Self> {
        let mut sorted: Vec<Edge> = edges.to_vec();
        sorted.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        for pair in sorted.windows(2) {
            if (pair[0].i, pair[0].j) == (pair[1].i, pair[1].j) {
                return Err(Error::Degenerate(format!("duplicate edge ({}, {})", pair[0].i, pair[0].j)));
            }
        }
        for e in &sorted {
            if e.i == e.j {
                return Err(Error::Degenerate(format!("self-loop at node {}", e.i)));
            }
            if e.j >= n_nodes {
                return Err(Error::Degenerate(format!("edge ({}, {}) outside {n_nodes} nodes", e.i, e.j)));
            }
        }
        let edge_pairs: Vec<(usize, usize)> = sorted.iter().map(|e| (e.i, e.j)).collect();
        let (weights, degrees) = compute_weights(n_nodes, &edge_pairs);
        Ok(Self {
            n_nodes,
            edges: edge_pairs,
            distances: sorted.iter().map(|e| e.distance).collect(),
            weights,
            degrees,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Distances recorded at construction (cosine distance by default).
    pub fn edge_distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.n_nodes);
        for &(i, j) in &self.edges {
            uf.union(i, j);
        }
        uf.component_count()
    }
}

/// Degrees `n_i` and weights `w_ij = (Σ_k n_k / N) / sqrt(n_i n_j)`.
pub fn compute_weights(n_nodes: usize, edges: &[(usize, usize)]) -> (Vec<f64>, Vec<usize>) {
    let mut degrees = vec![0usize; n_nodes];
    for &(i, j) in edges {
        degrees[i] += 1;
        degrees[j] += 1;
    }
    let mean_degree = if n_nodes == 0 {
        0.0
    } else {
        degrees.iter().sum::<usize>() as f64 / n_nodes as f64
    };
    let weights = edges
        .iter()
        .map(|&(i, j)| mean_degree / ((degrees[i] * degrees[j]) as f64).sqrt())
        .collect();
    (weights, degrees)
}

/// Edges `(i, j)` such that each endpoint is among the other's k nearest neighbors.
pub fn mutual_knn_edges(knn: &KnnLists) -> Vec<Edge> {
    let n = knn.n_points();
    let mut member = vec![Vec::<usize>::new(); n];
    for (i, list) in knn.lists().iter().enumerate() {
        let mut ids: Vec<usize> = list.iter().map(|nb| nb.index).collect();
        ids.sort_unstable();
        member[i] = ids;
    }
    let mut edges = Vec::new();
    for (i, list) in knn.lists().iter().enumerate() {
        for nb in list {
            let j = nb.index;
            if i < j && member[j].binary_search(&i).is_ok() {
                let back = knn.lists()[j].iter().find(|b| b.index == i).expect("mutual").distance;
                edges.push(Edge::new(i, j, nb.distance.min(back)));
            }
        }
    }
    edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    edges
}

/// Union of directed kNN edges as undirected edges, keeping the smaller
/// of the two directional distances.
pub fn symmetrized_knn_edges(knn: &KnnLists) -> Vec<Edge> {
    let mut edges: Vec<Edge> = knn
        .lists()
        .iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().map(move |nb| Edge::new(i, nb.index, nb.distance)))
        .collect();
    edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)).then(a.distance.total_cmp(&b.distance)));
    edges.dedup_by(|later, first| (later.i, later.j) == (first.i, first.j));
    edges
}

/// Minimum spanning forest by Kruskal, ties broken by lower node indices.
pub fn minimum_spanning_edges(n_nodes: usize, edges: &[Edge]) -> (Vec<Edge>, UnionFind) {
    let mut order: Vec<&Edge> = edges.iter().collect();
    order.sort_by(|a, b| a.distance.total_cmp(&b.distance).then((a.i, a.j).cmp(&(b.i, b.j))));
    let mut uf = UnionFind::new(n_nodes);
    let mut tree = Vec::with_capacity(n_nodes.saturating_sub(1));
    for e in order {
        if uf.union(e.i, e.j) {
            tree.push(*e);
        }
    }
    (tree, uf)
}

/// Adds the MST of the symmetrized kNN graph to the mutual edges.
///
/// If the kNN graph itself is disconnected, the remaining components are
/// joined greedily by the globally shortest pair of points lying in
/// different components, measured under `metric` on `points`.
pub fn mst_augment(
    mutual: &[Edge],
    knn: &KnnLists,
    points: ArrayView2<f64>,
    metric: Metric,
) -> Result<NeighborhoodGraph> {
    let n = knn.n_points();
    let (mut tree, mut uf) = minimum_spanning_edges(n, &symmetrized_knn_edges(knn));
    while uf.component_count() > 1 {
        let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        let mut best: Option<Edge> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                if roots[i] == roots[j] {
                    continue;
                }
                let d = metric.distance(points.row(i), points.row(j));
                if best.is_none_or(|b| d < b.distance) {
                    best = Some(Edge::new(i, j, d));
                }
            }
        }
        let bridge = best.expect("more than one component implies a candidate pair");
        uf.union(bridge.i, bridge.j);
        tree.push(bridge);
    }

    let mut all: Vec<Edge> = mutual.to_vec();
    all.extend(tree);
    all.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)).then(a.distance.total_cmp(&b.distance)));
    all.dedup_by(|later, first| (later.i, later.j) == (first.i, first.j));
    NeighborhoodGraph::from_edges(n, &all)
}

/// Result of the full graph construction, with summary statistics.
#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: NeighborhoodGraph,
    pub k: usize,
    pub metric: Metric,
    pub mutual_edges: usize,
    /// Connected components of the mutual-kNN graph before augmentation.
    pub mutual_components: usize,
}

/// kNN → mutual kNN → MST augmentation. `k` is clamped to `N − 1`.
pub fn build_graph(points: &Array2<f64>, k: usize, metric: Metric) -> Result<GraphBuild> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 points to build a graph, got {n}")));
    }
    if k == 0 {
        return Err(Error::InvalidK { k, n });
    }
    let k = k.min(n - 1);
    let lists = knn(points.view(), k, metric)?;
    let mutual = mutual_knn_edges(&lists);
    let mut uf = UnionFind::new(n);
    for e in &mutual {
        uf.union(e.i, e.j);
    }
    let graph = mst_augment(&mutual, &lists, points.view(), metric)?;
    Ok(GraphBuild {
        graph,
        k,
        metric,
        mutual_edges: mutual.len(),
        mutual_components: uf.component_count(),
    })
}

/// `‖y_i − y_j‖₂` for every edge, in edge order.
pub fn edge_lengths(y: ArrayView2<f64>, graph: &NeighborhoodGraph) -> Vec<f64> {
    graph
        .edges()
        .iter()
        .map(|&(i, j)| euclidean(y.row(i), y.row(j)))
        .collect()
}

pub(crate) fn euclidean(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `λ = ‖Y‖₂ / ‖A‖₂` with `A` the weighted graph Laplacian.
pub fn compute_lambda(y: ArrayView2<f64>, graph: &NeighborhoodGraph) -> Result<f64> {
    if y.nrows() != graph.n_nodes() {
        return Err(Error::shape("embedding rows vs graph nodes", graph.n_nodes(), y.nrows()));
    }
    let y_norm = spectral_norm(&GramOperator::new(y)).value.sqrt();
    let a_norm = spectral_norm(&LaplacianOperator::new(graph)).value;
    if !(y_norm > 0.0) || !(a_norm > 0.0) {
        return Err(Error::Degenerate(format!(
            "cannot balance terms: ‖Y‖ = {y_norm}, ‖A‖ = {a_norm}"
        )));
    }
    Ok(y_norm / a_norm)
}

/// Mean distance of each embedded point to the embedding centroid.
pub fn compute_delta1(y: ArrayView2<f64>) -> f64 {
    let n = y.nrows();
    if n == 0 {
        return 0.0;
    }
    let centroid = y.mean_axis(ndarray::Axis(0)).expect("non-empty");
    y.rows()
        .into_iter()
        .map(|r| euclidean(r, centroid.view()))
        .sum::<f64>()
        / n as f64
}

/// Mean of the smallest `max(1, ⌊0.01·|E|⌋)` edge lengths in the embedding.
pub fn compute_delta2(y: ArrayView2<f64>, graph: &NeighborhoodGraph) -> f64 {
    delta2_from_lengths(edge_lengths(y, graph))
}

pub fn delta2_from_lengths(mut lengths: Vec<f64>) -> f64 {
    if lengths.is_empty() {
        return 0.0;
    }
    lengths.sort_by(f64::total_cmp);
    let count = (lengths.len() / 100).max(1);
    lengths[..count].iter().sum::<f64>() / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn line(points: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((points.len(), 1), points.to_vec()).unwrap()
    }

    #[test]
    fn mutual_edges_on_a_line() {
        let x = line(&[0.0, 1.0, 3.0]);
        let lists = euclidean_knn(x.view(), 1).unwrap();
        let mutual = mutual_knn_edges(&lists);
        assert_eq!(mutual, vec![Edge::new(0, 1, 1.0)]);
        let g = mst_augment(&mutual, &lists, x.view(), Metric::Euclidean).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.component_count(), 1);
    }

    #[test]
    fn full_k_gives_complete_graph() {
        let x = array![[1.0, 0.1], [0.3, 1.0], [0.5, 0.5], [0.9, 0.2]];
        let lists = cosine_knn(x.view(), 3).unwrap();
        assert_eq!(mutual_knn_edges(&lists).len(), 6);
    }

    #[test]
    fn two_points_one_edge() {
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let b = build_graph(&x, 10, Metric::Cosine).unwrap();
        assert_eq!(b.graph.edges(), &[(0, 1)]);
        assert_eq!(b.k, 1);
    }

    #[test]
    fn disconnected_knn_graph_is_bridged() {
        // Two tight pairs far apart: the 1-NN graph has two components.
        let x = line(&[0.0, 0.1, 10.0, 10.3]);
        let lists = euclidean_knn(x.view(), 1).unwrap();
        let mutual = mutual_knn_edges(&lists);
        let g = mst_augment(&mutual, &lists, x.view(), Metric::Euclidean).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3)]);
        let bridge = g.edges().iter().position(|&e| e == (1, 2)).unwrap();
        assert!((g.edge_distances()[bridge] - 9.9).abs() < 1e-12);
    }

    #[test]
    fn weights_on_path_and_star() {
        let (w, deg) = compute_weights(3, &[(0, 1), (1, 2)]);
        assert_eq!(deg, vec![1, 2, 1]);
        for v in w {
            assert!((v - (4.0 / 3.0) / 2f64.sqrt()).abs() < 1e-12);
        }
        let (w, deg) = compute_weights(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(deg, vec![3, 1, 1, 1]);
        for v in w {
            assert!((v - 1.5 / 3f64.sqrt()).abs() < 1e-12);
            assert!((v - 0.866025).abs() < 1e-6);
        }
        // A 4-cycle is regular: every weight is one.
        let (w, _) = compute_weights(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        assert!(w.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn graph_rejects_duplicates_and_loops() {
        assert!(NeighborhoodGraph::from_edges(3, &[Edge::new(0, 1, 0.0), Edge::new(1, 0, 0.0)]).is_err());
        assert!(NeighborhoodGraph::from_edges(3, &[Edge::new(2, 2, 0.0)]).is_err());
    }

    #[test]
    fn lambda_two_node_example() {
        let g = NeighborhoodGraph::from_edges(2, &[Edge::new(0, 1, 0.0)]).unwrap();
        assert_eq!(g.weights(), &[1.0]);
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let lambda = compute_lambda(y.view(), &g).unwrap();
        assert!((lambda - 0.5).abs() < 1e-9, "{lambda}");
        let scaled = compute_lambda((&y * 3.0).view(), &g).unwrap();
        assert!((scaled - 1.5).abs() < 1e-9);
        assert!(compute_lambda(Array2::zeros((2, 2)).view(), &g).is_err());
    }

    #[test]
    fn delta1_examples() {
        assert_eq!(compute_delta1(Array2::from_elem((4, 3), 2.5).view()), 0.0);
        assert_eq!(compute_delta1(line(&[0.0, 2.0]).view()), 1.0);
    }

    #[test]
    fn delta2_examples() {
        let fifty: Vec<f64> = (1..=50).map(f64::from).collect();
        assert_eq!(delta2_from_lengths(fifty), 1.0);
        let three_hundred: Vec<f64> = (1..=300).rev().map(f64::from).collect();
        assert_eq!(delta2_from_lengths(three_hundred), 2.0);
        let g = NeighborhoodGraph::from_edges(3, &[Edge::new(0, 1, 0.0), Edge::new(1, 2, 0.0)]).unwrap();
        assert_eq!(compute_delta2(Array2::from_elem((3, 2), 1.0).view(), &g), 0.0);
    }
}
