//! Connected components of the threshold graph `‖z_i − z_j‖ < δ`.
//!
//! Candidate pairs come from a uniform grid with cell side `δ` over the (up
//! to) three highest-variance coordinates: two points closer than `δ` in
//! the full space are also closer than `δ` in any coordinate subset, so they
//! lie in the same or adjacent cells. Each candidate is confirmed with the
//! full distance, which makes the result exact.

use std::collections::HashMap;

use ndarray::{ArrayView2, Axis};

use crate::unionfind::UnionFind;

const GRID_DIMS: usize = 3;

/// Component labels in discovery order (the first point gets label 0).
pub fn extract_clusters(z: ArrayView2<f64>, delta: f64) -> Vec<usize> {
    let (n, d) = z.dim();
    let mut uf = UnionFind::new(n);
    if n == 0 {
        return Vec::new();
    }
    let axes = grid_axes(z);
    let cell_of = |i: usize| -> [i64; GRID_DIMS] {
        let mut key = [0i64; GRID_DIMS];
        for (slot, &axis) in key.iter_mut().zip(&axes) {
            *slot = (z[[i, axis]] / delta).floor() as i64;
        }
        key
    };
    let mut cells: HashMap<[i64; GRID_DIMS], Vec<usize>> = HashMap::new();
    for i in 0..n {
        cells.entry(cell_of(i)).or_default().push(i);
    }
    // Deterministic traversal order regardless of hash seeds.
    let mut keys: Vec<[i64; GRID_DIMS]> = cells.keys().copied().collect();
    keys.sort_unstable();
    let threshold = delta * delta;
    let close = |i: usize, j: usize| -> bool {
        let mut acc = 0.0;
        for c in 0..d {
            let diff = z[[i, c]] - z[[j, c]];
            acc += diff * diff;
            if acc >= threshold {
                return false;
            }
        }
        true
    };
    let offsets = neighbor_offsets(axes.len());
    for key in &keys {
        let members = &cells[key];
        for off in &offsets {
            let mut other = *key;
            for (slot, o) in other.iter_mut().zip(off) {
                *slot += o;
            }
            // Visit each unordered cell pair once.
            if other < *key {
                continue;
            }
            let Some(neighbors) = cells.get(&other) else {
                continue;
            };
            let same = other == *key;
            for (a, &i) in members.iter().enumerate() {
                let start = if same { a + 1 } else { 0 };
                for &j in &neighbors[start..] {
                    if !uf.connected(i, j) && close(i, j) {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    uf.labels()
}

/// Coordinates with the largest variance, in decreasing order.
fn grid_axes(z: ArrayView2<f64>) -> Vec<usize> {
    let var = z.var_axis(Axis(0), 0.0);
    let mut axes: Vec<usize> = (0..z.ncols()).collect();
    axes.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    axes.truncate(GRID_DIMS);
    axes
}

/// All offsets in `{-1, 0, 1}^dims`, padded with zeros to the key width.
fn neighbor_offsets(dims: usize) -> Vec<[i64; GRID_DIMS]> {
    let mut out = vec![[0i64; GRID_DIMS]];
    for axis in 0..dims {
        out = out
            .into_iter()
            .flat_map(|base| {
                [-1i64, 0, 1].map(|o| {
                    let mut k = base;
                    k[axis] = o;
                    k
                })
            })
            .collect();
    }
    out
}

/// Number of distinct labels in a discovery-ordered labelling.
pub fn cluster_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}
