//! Plain-text graph files.
//!
//! ```text
//! # dcc neighborhood graph v1
//! nodes 1000
//! k 10
//! metric cosine
//! edges 4210
//! 0 17 0.0123 0.9428
//! ...
//! ```
//!
//! Edge lines are `i j distance weight`. Floats are written in shortest
//! round-trip form, so a saved graph reloads bit-identically.

use std::fs;
use std::path::Path;

use super::{Edge, Metric, NeighborhoodGraph};
use crate::{Error, Result};

const GRAPH_MAGIC: &str = "# dcc neighborhood graph v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphHeader {
    pub k: usize,
    pub metric: Metric,
}

pub fn render_graph(graph: &NeighborhoodGraph, header: GraphHeader) -> String {
    let mut out = String::new();
    out.push_str(GRAPH_MAGIC);
    out.push('\n');
    out.push_str(&format!("nodes {}\n", graph.n_nodes()));
    out.push_str(&format!("k {}\n", header.k));
    out.push_str(&format!("metric {}\n", header.metric.name()));
    out.push_str(&format!("edges {}\n", graph.n_edges()));
    for ((&(i, j), d), w) in graph.edges().iter().zip(graph.edge_distances()).zip(graph.weights()) {
        out.push_str(&format!("{i} {j} {d} {w}\n"));
    }
    out
}

pub fn save_graph(path: impl AsRef<Path>, graph: &NeighborhoodGraph, header: GraphHeader) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_graph(graph, header)).map_err(|e| Error::io(path, e))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<(NeighborhoodGraph, GraphHeader)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph(&text, &path.display().to_string())
}

pub fn parse_graph(text: &str, location: &str) -> Result<(NeighborhoodGraph, GraphHeader)> {
    let err = |line: usize, message: String| Error::Parse {
        location: format!("{location}:{line}"),
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, GRAPH_MAGIC)) => {}
        _ => return Err(err(1, "missing graph header".into())),
    }
    let mut field = |name: &str| -> Result<String> {
        let (no, line) = lines.next().ok_or_else(|| err(0, format!("missing '{name}' line")))?;
        line.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| err(no + 1, format!("expected '{name} <value>'")))
    };
    let nodes: usize = field("nodes")?.parse().map_err(|_| err(2, "invalid node count".into()))?;
    let k: usize = field("k")?.parse().map_err(|_| err(3, "invalid k".into()))?;
    let metric: Metric = field("metric")?.parse()?;
    let n_edges: usize = field("edges")?.parse().map_err(|_| err(5, "invalid edge count".into()))?;

    let mut edges = Vec::with_capacity(n_edges);
    let mut weights = Vec::with_capacity(n_edges);
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(err(no + 1, "edge line needs 'i j distance weight'".into()));
        }
        let bad = |_| err(no + 1, format!("invalid edge line '{line}'"));
        let i: usize = parts[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        let j: usize = parts[1].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        let d: f64 = parts[2].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
        let w: f64 = parts[3].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
        edges.push(Edge::new(i, j, d));
        weights.push(w);
    }
    if edges.len() != n_edges {
        return Err(err(0, format!("header declares {n_edges} edges, found {}", edges.len())));
    }
    let graph = NeighborhoodGraph::from_edges(nodes, &edges)?;
    for (stored, computed) in weights.iter().zip(graph.weights()) {
        if stored.to_bits() != computed.to_bits() {
            return Err(err(0, "stored edge weights do not match the edge set".into()));
        }
    }
    Ok((graph, GraphHeader { k, metric }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let g = NeighborhoodGraph::from_edges(
            4,
            &[Edge::new(0, 1, 0.1), Edge::new(1, 2, 1.0 / 3.0), Edge::new(0, 3, 2e-17)],
        )
        .unwrap();
        let header = GraphHeader { k: 10, metric: Metric::Cosine };
        let text = render_graph(&g, header);
        let (back, h) = parse_graph(&text, "t").unwrap();
        assert_eq!(back, g);
        assert_eq!(h, header);
        assert_eq!(render_graph(&back, h), text);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_graph("nodes 3\n", "t").is_err());
        let g = NeighborhoodGraph::from_edges(2, &[Edge::new(0, 1, 0.5)]).unwrap();
        let text = render_graph(&g, GraphHeader { k: 1, metric: Metric::Euclidean });
        let truncated = text.replace("edges 1", "edges 2");
        assert!(parse_graph(&truncated, "t").is_err());
    }
}
