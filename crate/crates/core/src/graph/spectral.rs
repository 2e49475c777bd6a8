//! Matrix-free spectral norms by Krylov-accelerated power iteration.

use ndarray::{Array1, Array2, ArrayView2};

use super::NeighborhoodGraph;

/// A symmetric linear operator on `R^dim`.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64], out: &mut [f64]);
}

pub struct DenseOperator<'a>(pub ArrayView2<'a, f64>);

impl SymmetricOperator for DenseOperator<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.0.rows()) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

/// `v ↦ Y Yᵀ v` for a row-major `N x d` embedding, i.e. the Gram action
/// whose top eigenvalue is `‖Y‖₂²`. Only `d`-dimensional intermediates are
/// stored.
pub struct GramOperator<'a> {
    y: ArrayView2<'a, f64>,
}

impl<'a> GramOperator<'a> {
    pub fn new(y: ArrayView2<'a, f64>) -> Self {
        Self { y }
    }
}

impl SymmetricOperator for GramOperator<'_> {
    fn dim(&self) -> usize {
        self.y.nrows()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let v = ndarray::ArrayView1::from(v);
        let code: Array1<f64> = self.y.t().dot(&v);
        for (o, row) in out.iter_mut().zip(self.y.rows()) {
            *o = row.dot(&code);
        }
    }
}

/// The weighted Laplacian `A = Σ w_ij (e_i − e_j)(e_i − e_j)ᵀ`, applied
/// edge by edge.
pub struct LaplacianOperator<'a> {
    graph: &'a NeighborhoodGraph,
}

impl<'a> LaplacianOperator<'a> {
    pub fn new(graph: &'a NeighborhoodGraph) -> Self {
        Self { graph }
    }

    /// Dense copy, for tests and small graphs only.
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.graph.n_nodes();
        let mut a = Array2::zeros((n, n));
        for (&(i, j), &w) in self.graph.edges().iter().zip(self.graph.weights()) {
            a[[i, i]] += w;
            a[[j, j]] += w;
            a[[i, j]] -= w;
            a[[j, i]] -= w;
        }
        a
    }
}

impl SymmetricOperator for LaplacianOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.n_nodes()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&(i, j), &w) in self.graph.edges().iter().zip(self.graph.weights()) {
            let diff = w * (v[i] - v[j]);
            out[i] += diff;
            out[j] -= diff;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    /// Operator applications used.
    pub iterations: usize,
    pub converged: bool,
}

/// Relative Ritz residual `‖Au − θu‖ / |θ|` at which the estimate is accepted.
pub const POWER_TOLERANCE: f64 = 1e-9;

/// Krylov subspace size per restart.
const KRYLOV_DIM: usize = 48;

/// Largest absolute eigenvalue of a symmetric operator.
///
/// Power iteration accelerated by restarted Lanczos: each cycle builds a
/// fully reorthogonalized Krylov basis from the current vector, and restarts
/// from the dominant Ritz vector. Stops once the Ritz residual falls below
/// `1e-9·|θ|`, or after `10·dim` operator applications (then `converged` is
/// false). Plain power iteration stalls when the two largest magnitudes are
/// close; the Krylov cycle does not.
pub fn spectral_norm(op: &dyn SymmetricOperator) -> SpectralNorm {
    let n = op.dim();
    if n == 0 {
        return SpectralNorm {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    // Fixed, non-constant start vector: constants lie in the Laplacian's kernel.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract())
        .collect();
    normalize(&mut v);
    let cap = (10 * n).max(KRYLOV_DIM);
    let m = KRYLOV_DIM.min(n);
    let mut applied = 0;
    let mut theta = 0.0;
    while applied < cap {
        let cycle = lanczos_cycle(op, &v, m.min(cap - applied));
        applied += cycle.applied;
        theta = cycle.theta;
        if cycle.residual <= POWER_TOLERANCE * theta.abs() || theta == 0.0 {
            return SpectralNorm {
                value: theta.abs(),
                iterations: applied,
                converged: true,
            };
        }
        v = cycle.ritz_vector;
    }
    log::warn!("spectral norm hit its cap of {cap} operator applications (estimate {})", theta.abs());
    SpectralNorm {
        value: theta.abs(),
        iterations: applied,
        converged: false,
    }
}

struct LanczosCycle {
    theta: f64,
    residual: f64,
    ritz_vector: Vec<f64>,
    applied: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lanczos_cycle(op: &dyn SymmetricOperator, start: &[f64], m: usize) -> LanczosCycle {
    let n = start.len();
    let mut basis: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![0.0; n];
    let mut last_beta = 0.0;
    for j in 0..m {
        op.apply(&basis[j], &mut w);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        // Two passes of Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = dot(&w, &w).sqrt();
        let scale = alpha.iter().chain(&beta).fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if b <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            last_beta = 0.0;
            break;
        }
        last_beta = b;
        if j + 1 < m {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
    }
    let k = alpha.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    let top = (0..k)
        .max_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()))
        .unwrap_or(0);
    let s = eig.eigenvectors.column(top);
    let mut ritz_vector = vec![0.0; n];
    for (q, &c) in basis.iter().zip(s.iter()) {
        ritz_vector.iter_mut().zip(q).for_each(|(r, qi)| *r += c * qi);
    }
    normalize(&mut ritz_vector);
    LanczosCycle {
        theta: eig.eigenvalues[top],
        residual: (last_beta * s[k - 1]).abs(),
        ritz_vector,
        applied: k,
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}
