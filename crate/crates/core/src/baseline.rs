//! k-means with k-means++ seeding, used as a reference clustering.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::{DccRng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop when no assignment changes or the inertia improves by less than
    /// this relative amount.
    pub tolerance: f64,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            restarts: 10,
            max_iters: 300,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Array2<f64>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Best of `restarts` Lloyd runs by inertia.
pub fn kmeans(points: ArrayView2<f64>, config: &KMeansConfig, rng: &mut DccRng) -> Result<KMeansResult> {
    let n = points.nrows();
    if config.k == 0 || config.k > n {
        return Err(Error::InvalidK { k: config.k, n });
    }
    let points = points.as_standard_layout();
    let mut best: Option<KMeansResult> = None;
    for _ in 0..config.restarts.max(1) {
        let run = lloyd(points.view(), seed_plus_plus(points.view(), config.k, rng), config);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn seed_plus_plus(points: ArrayView2<f64>, k: usize, rng: &mut DccRng) -> Array2<f64> {
    let n = points.nrows();
    let row = |i: usize| points.row(i).to_slice().expect("standard layout");
    let mut centers = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), row(pick)));
        }
    }
    centers
}

fn lloyd(points: ArrayView2<f64>, mut centers: Array2<f64>, config: &KMeansConfig) -> KMeansResult {
    let (n, dim) = points.dim();
    let k = centers.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..config.max_iters {
        let mut changed = false;
        let mut new_inertia = 0.0;
        for i in 0..n {
            let p = points.row(i);
            let p = p.to_slice().expect("standard layout");
            let (best, dist) = (0..k)
                .map(|c| (c, sq_dist(p, centers.row(c).to_slice().expect("owned"))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("k > 0");
            changed |= labels[i] != best;
            labels[i] = best;
            new_inertia += dist;
        }
        let improvement = inertia - new_inertia;
        inertia = new_inertia;

        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            sums.row_mut(l).scaled_add(1.0, &points.row(i));
            counts[l] += 1;
        }
        for c in 0..k {
            // Empty clusters keep their previous center.
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centers.row_mut(c).assign(&mean);
            }
        }
        if !changed || improvement <= config.tolerance * inertia {
            break;
        }
    }
    KMeansResult {
        labels,
        centers,
        inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn separates_obvious_blobs() {
        let x = array![[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0], [5.1, 5.0], [5.0, 5.1]];
        let mut rng = DccRng::seed_from_u64(1);
        let r = kmeans(x.view(), &KMeansConfig::new(2), &mut rng).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[1], r.labels[2]);
        assert_eq!(r.labels[3], r.labels[4]);
        assert_ne!(r.labels[0], r.labels[3]);
        assert!(r.inertia < 0.1);
    }

    #[test]
    fn rejects_bad_k() {
        let x = array![[0.0], [1.0]];
        let mut rng = DccRng::seed_from_u64(1);
        assert!(kmeans(x.view(), &KMeansConfig::new(3), &mut rng).is_err());
    }
}
