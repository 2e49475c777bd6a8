//! Partition-comparison scores: mutual information (plain, normalized and
//! adjusted for chance) and clustering accuracy under the best one-to-one
//! label matching.
//!
//! Entropies use natural logarithms. Label values are arbitrary codes; only
//! the induced partitions matter.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::{Error, Result};

/// Counts `n_ij` of points with true class `i` and predicted cluster `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    table: Array2<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl Contingency {
    pub fn new(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::LengthMismatch {
                expected: truth.len(),
                found: pred.len(),
            });
        }
        if truth.is_empty() {
            return Err(Error::Degenerate("cannot compare empty labelings".into()));
        }
        let rows = dense_codes(truth);
        let cols = dense_codes(pred);
        let r = rows.iter().max().map_or(0, |m| m + 1);
        let c = cols.iter().max().map_or(0, |m| m + 1);
        let mut table = Array2::zeros((r, c));
        for (&a, &b) in rows.iter().zip(&cols) {
            table[[a, b]] += 1;
        }
        let row_sums = table.rows().into_iter().map(|row| row.sum()).collect();
        let col_sums = table.columns().into_iter().map(|col| col.sum()).collect();
        Ok(Self {
            table,
            row_sums,
            col_sums,
            total: truth.len() as u64,
        })
    }

    pub fn table(&self) -> &Array2<u64> {
        &self.table
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn identical_partitions(&self) -> bool {
        // Same partition iff every nonzero row and column has exactly one
        // nonzero cell.
        let nonzero = self.table.iter().filter(|&&v| v > 0).count();
        nonzero == self.row_sums.len() && nonzero == self.col_sums.len()
    }
}

fn dense_codes(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    labels.iter().map(|l| map[l]).collect()
}

fn entropy_of_counts(counts: &[u64], total: u64) -> f64 {
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn entropy(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let counts: Vec<u64> = counts.into_values().collect();
    entropy_of_counts(&counts, labels.len() as u64)
}

pub fn mutual_information(table: &Contingency) -> f64 {
    let n = table.total as f64;
    let mut mi = 0.0;
    for ((i, j), &nij) in table.table.indexed_iter() {
        if nij == 0 {
            continue;
        }
        let nij = nij as f64;
        let ai = table.row_sums[i] as f64;
        let bj = table.col_sums[j] as f64;
        mi += nij / n * (n * nij / (ai * bj)).ln();
    }
    mi.max(0.0)
}

/// `E[MI]` under the permutation (hypergeometric) model with the observed
/// marginals held fixed.
pub fn expected_mutual_information(table: &Contingency) -> f64 {
    let n = table.total as usize;
    let log_fact = log_factorials(n);
    let nf = n as f64;
    let lf = |k: usize| log_fact[k];
    let mut emi = 0.0;
    for &a in &table.row_sums {
        let a = a as usize;
        for &b in &table.col_sums {
            let b = b as usize;
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            for nij in lo..=hi {
                let x = nij as f64;
                let term = x / nf * (nf * x / (a as f64 * b as f64)).ln();
                let log_p = lf(a) + lf(b) + lf(n - a) + lf(n - b)
                    - lf(n)
                    - lf(nij)
                    - lf(a - nij)
                    - lf(b - nij)
                    - lf(n + nij - a - b);
                emi += term * log_p.exp();
            }
        }
    }
    emi
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

const DEGENERATE: f64 = 1e-12;

fn degenerate_score(table: &Contingency) -> f64 {
    if table.identical_partitions() {
        1.0
    } else {
        0.0
    }
}

/// `(MI − E[MI]) / (√(H(U) H(V)) − E[MI])`.
pub fn ami(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = Contingency::new(truth, pred)?;
    let hu = entropy_of_counts(&table.row_sums, table.total);
    let hv = entropy_of_counts(&table.col_sums, table.total);
    let emi = expected_mutual_information(&table);
    let denom = (hu * hv).sqrt() - emi;
    if denom.abs() <= DEGENERATE {
        return Ok(degenerate_score(&table));
    }
    Ok((mutual_information(&table) - emi) / denom)
}

/// `MI / √(H(U) H(V))`.
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = Contingency::new(truth, pred)?;
    let hu = entropy_of_counts(&table.row_sums, table.total);
    let hv = entropy_of_counts(&table.col_sums, table.total);
    let denom = (hu * hv).sqrt();
    if denom <= DEGENERATE {
        return Ok(degenerate_score(&table));
    }
    Ok((mutual_information(&table) / denom).min(1.0))
}

/// Fraction of points correctly labelled under the best one-to-one mapping
/// of clusters to classes. Unmatched clusters count as wrong.
pub fn acc(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = Contingency::new(truth, pred)?;
    let (r, c) = table.table.dim();
    let size = r.max(c);
    let mut cost = Array2::<i64>::zeros((size, size));
    for ((i, j), &v) in table.table.indexed_iter() {
        cost[[j, i]] = -(v as i64);
    }
    let assignment = hungarian(&cost);
    let matched: i64 = assignment.iter().enumerate().map(|(row, &col)| -cost[[row, col]]).sum();
    Ok(matched as f64 / table.total as f64)
}

/// Minimum-cost perfect assignment on a square integer matrix; returns the
/// column chosen for each row.
pub fn hungarian(cost: &Array2<i64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    // Shortest augmenting path with potentials, 1-based internally.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub ami: f64,
    pub nmi: f64,
    pub acc: f64,
}

pub fn score_all(truth: &[usize], pred: &[usize]) -> Result<Scores> {
    Ok(Scores {
        ami: ami(truth, pred)?,
        nmi: nmi(truth, pred)?,
        acc: acc(truth, pred)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_and_relabelled() {
        let t = [0, 0, 1, 1, 2, 2];
        let p = [5, 5, 3, 3, 9, 9];
        assert!((ami(&t, &p).unwrap() - 1.0).abs() < 1e-12);
        assert!((nmi(&t, &p).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(acc(&t, &p).unwrap(), 1.0);
    }

    #[test]
    fn single_cluster_cases() {
        let t = [0, 0, 1, 1];
        let one = [0, 0, 0, 0];
        assert_eq!(nmi(&t, &one).unwrap(), 0.0);
        assert_eq!(ami(&t, &one).unwrap(), 0.0);
        assert_eq!(acc(&t, &one).unwrap(), 0.5);
        assert_eq!(ami(&one, &one).unwrap(), 1.0);
        assert_eq!(nmi(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn acc_with_more_clusters_than_classes() {
        let t = [0, 0, 0, 1, 1, 1];
        let p = [0, 0, 1, 2, 2, 3];
        assert!((acc(&t, &p).unwrap() - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_uniform() {
        assert!((entropy(&[0, 1, 2, 3]) - 4f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&[7, 7, 7]), 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(ami(&[0, 1], &[0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn hungarian_small() {
        let cost = ndarray::array![[4, 1, 3], [2, 0, 5], [3, 2, 2]];
        let a = hungarian(&cost);
        let total: i64 = a.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum();
        assert_eq!(total, 5);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_acc(truth: &[usize], pred: &[usize]) -> f64 {
        let k = truth.iter().chain(pred).max().unwrap() + 1;
        permutations(k)
            .iter()
            .map(|perm| truth.iter().zip(pred).filter(|(&t, &p)| perm[p] == t).count())
            .max()
            .unwrap() as f64
            / truth.len() as f64
    }

    proptest! {
        #[test]
        fn acc_matches_brute_force(pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..40)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            prop_assert!((acc(&t, &p).unwrap() - brute_acc(&t, &p)).abs() < 1e-12);
        }

        #[test]
        fn scores_are_symmetric_and_bounded(pairs in proptest::collection::vec((0usize..4, 0usize..6), 2..60)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let a = ami(&t, &p).unwrap();
            let b = ami(&p, &t).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!(a <= 1.0 + 1e-12);
            let n = nmi(&t, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&n));
            prop_assert!((n - nmi(&p, &t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn mutual_information_bounded_by_entropy(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..50)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let mi = mutual_information(&Contingency::new(&t, &p).unwrap());
            prop_assert!(mi <= entropy(&t).min(entropy(&p)) + 1e-12);
        }
    }

    #[test]
    fn expected_mi_matches_monte_carlo() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let truth: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let pred: Vec<usize> = (0..60).map(|i| (i * 7 / 11) % 4).collect();
        let exact = expected_mutual_information(&Contingency::new(&truth, &pred).unwrap());
        let mut rng = crate::DccRng::seed_from_u64(3);
        let mut shuffled = pred.clone();
        let draws = 4000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                shuffled.shuffle(&mut rng);
                mutual_information(&Contingency::new(&truth, &shuffled).unwrap())
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        assert!((mean - exact).abs() < 4.0 * (var / draws as f64).sqrt(), "exact {exact} mc {mean}");
    }

    #[test]
    fn random_labelings_have_near_zero_ami() {
        use rand::{Rng, SeedableRng};
        let mut rng = crate::DccRng::seed_from_u64(9);
        let t: Vec<usize> = (0..2000).map(|_| rng.random_range(0..10)).collect();
        let p: Vec<usize> = (0..2000).map(|_| rng.random_range(0..10)).collect();
        assert!(ami(&t, &p).unwrap().abs() < 0.01);
        assert!(nmi(&t, &p).unwrap() > 0.0);
    }
}
