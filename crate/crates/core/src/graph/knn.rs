//! Exact brute-force k-nearest-neighbor search.

use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// `1 − x·y / (‖x‖‖y‖)`
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }

    pub fn distance(self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            Metric::Euclidean => super::euclidean(a, b),
            Metric::Cosine => {
                let na = a.dot(&a).sqrt();
                let nb = b.dot(&b).sqrt();
                (1.0 - a.dot(&b) / (na * nb)).max(0.0)
            }
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidConfig(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Directed neighbor lists, each sorted by `(distance, index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnLists {
    k: usize,
    lists: Vec<Vec<Neighbor>>,
}

impl KnnLists {
    pub fn from_lists(k: usize, lists: Vec<Vec<Neighbor>>) -> Self {
        Self { k, lists }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.lists.len()
    }

    pub fn lists(&self) -> &[Vec<Neighbor>] {
        &self.lists
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.lists[i]
    }
}

pub fn knn(points: ArrayView2<f64>, k: usize, metric: Metric) -> Result<KnnLists> {
    match metric {
        Metric::Cosine => cosine_knn(points, k),
        Metric::Euclidean => euclidean_knn(points, k),
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    Ok(())
}

/// Keeps the k smallest `(distance, index)` candidates, sorted.
fn select_k(candidates: &mut Vec<Neighbor>, k: usize) -> Vec<Neighbor> {
    let cmp = |a: &Neighbor, b: &Neighbor| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index));
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, cmp);
        candidates.truncate(k);
    }
    candidates.sort_by(cmp);
    candidates.clone()
}

const BLOCK: usize = 256;

/// Cosine-distance kNN. Rows must be nonzero.
pub fn cosine_knn(points: ArrayView2<f64>, k: usize) -> Result<KnnLists> {
    let n = points.nrows();
    check_k(k, n)?;
    let mut unit = points.to_owned();
    for (row, mut r) in unit.axis_iter_mut(Axis(0)).enumerate() {
        let norm = r.dot(&r).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector { row });
        }
        r /= norm;
    }
    let mut lists = Vec::with_capacity(n);
    let mut candidates = Vec::with_capacity(n);
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        let sims: Array2<f64> = unit.slice(ndarray::s![start..end, ..]).dot(&unit.t());
        for (offset, row) in sims.rows().into_iter().enumerate() {
            let i = start + offset;
            candidates.clear();
            candidates.extend(row.iter().enumerate().filter(|&(j, _)| j != i).map(|(j, &s)| Neighbor {
                index: j,
                distance: (1.0 - s).max(0.0),
            }));
            lists.push(select_k(&mut candidates, k));
        }
    }
    Ok(KnnLists { k, lists })
}

/// Euclidean kNN, computed from explicit differences.
pub fn euclidean_knn(points: ArrayView2<f64>, k: usize) -> Result<KnnLists> {
    let n = points.nrows();
    check_k(k, n)?;
    let mut lists = Vec::with_capacity(n);
    let mut candidates = Vec::with_capacity(n);
    for i in 0..n {
        candidates.clear();
        let pi = points.row(i);
        candidates.extend((0..n).filter(|&j| j != i).map(|j| Neighbor {
            index: j,
            distance: super::euclidean(pi, points.row(j)),
        }));
        lists.push(select_k(&mut candidates, k));
    }
    Ok(KnnLists { k, lists })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cosine_ties_break_to_lower_index() {
        let x = array![[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        let lists = cosine_knn(x.view(), 1).unwrap();
        let first: Vec<usize> = (0..3).map(|i| lists.neighbors(i)[0].index).collect();
        assert_eq!(first, vec![1, 0, 0]);
        assert_eq!(lists.neighbors(0)[0].distance, 0.0);
        assert_eq!(lists.neighbors(2)[0].distance, 1.0);
    }

    #[test]
    fn duplicates_still_give_distinct_indices() {
        let x = array![[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]];
        let lists = cosine_knn(x.view(), 2).unwrap();
        for i in 0..3 {
            let ids: Vec<usize> = lists.neighbors(i).iter().map(|n| n.index).collect();
            assert!(!ids.contains(&i));
            assert_eq!(ids.len(), 2);
            assert!(lists.neighbors(i).iter().all(|n| n.distance < 1e-12));
        }
    }

    #[test]
    fn k_equal_n_minus_one_lists_everyone() {
        let x = array![[1.0, 0.2], [0.1, 1.0], [0.7, 0.7], [0.3, 0.1]];
        let lists = cosine_knn(x.view(), 3).unwrap();
        for i in 0..4 {
            let mut ids: Vec<usize> = lists.neighbors(i).iter().map(|n| n.index).collect();
            ids.sort_unstable();
            let expected: Vec<usize> = (0..4).filter(|&j| j != i).collect();
            assert_eq!(ids, expected);
        }
    }

    #[test]
    fn errors() {
        let x = array![[1.0, 0.0], [0.0, 0.0], [0.5, 0.5]];
        assert!(matches!(cosine_knn(x.view(), 1), Err(Error::ZeroVector { row: 1 })));
        assert!(matches!(euclidean_knn(x.view(), 3), Err(Error::InvalidK { k: 3, n: 3 })));
        assert!(matches!(euclidean_knn(x.view(), 0), Err(Error::InvalidK { .. })));
    }
}
