//! First-order optimizers over lists of flat parameter tensors.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::{Error, Result};

/// How a single "momentum" hyperparameter maps onto Adam's two betas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdamMomentum {
    /// momentum = β1, β2 = 0.999
    Beta1,
    /// β1 = 0.9, momentum = β2
    Beta2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_momentum(lr: f64, momentum: f64, interpretation: AdamMomentum) -> Self {
        let base = Self {
            lr,
            ..Self::default()
        };
        match interpretation {
            AdamMomentum::Beta1 => Self { beta1: momentum, ..base },
            AdamMomentum::Beta2 => Self { beta2: momentum, ..base },
        }
    }
}

fn check_lists(expected: &[usize], params: &[&mut [f64]], grads: &[&[f64]]) -> Result<()> {
    if params.len() != expected.len() || grads.len() != expected.len() {
        return Err(Error::shape(
            "optimizer tensor count",
            expected.len(),
            format!("{} params / {} grads", params.len(), grads.len()),
        ));
    }
    for ((&n, p), g) in expected.iter().zip(params).zip(grads) {
        if p.len() != n || g.len() != n {
            return Err(Error::shape("optimizer tensor size", n, format!("{} / {}", p.len(), g.len())));
        }
    }
    Ok(())
}

/// Adam with bias correction over a fixed list of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub(crate) first: Vec<Vec<f64>>,
    pub(crate) second: Vec<Vec<f64>>,
    pub(crate) step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn sizes(&self) -> Vec<usize> {
        self.first.iter().map(Vec::len).collect()
    }

    pub fn step(&mut self, mut params: Vec<&mut [f64]>, grads: Vec<&[f64]>) -> Result<()> {
        check_lists(&self.sizes(), &params, &grads)?;
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powf(self.step as f64);
        let c2 = 1.0 - beta2.powf(self.step as f64);
        for (t, (p, g)) in params.iter_mut().zip(&grads).enumerate() {
            let m = &mut self.first[t];
            let v = &mut self.second[t];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Row-sparse Adam for the representative matrix.
///
/// Equivalent to dense Adam in which rows outside the batch receive a zero
/// gradient, evaluated lazily: a row is brought up to date only when it is
/// next passed to [`RowAdamState::update_rows`] or [`RowAdamState::sync_rows`],
/// replaying the zero-gradient steps it missed (decayed moments, momentum
/// still moving it). Rows never passed in are never modified.
#[derive(Debug, Clone, PartialEq)]
pub struct RowAdamState {
    pub config: AdamConfig,
    pub(crate) first: Array2<f64>,
    pub(crate) second: Array2<f64>,
    pub(crate) step: u64,
    /// Step up to which each row has been brought.
    pub(crate) synced: Vec<u64>,
}

/// Remaining momentum below which replaying skipped steps stops moving a row.
const REPLAY_CUTOFF: f64 = 1e-14;

impl RowAdamState {
    pub fn new(config: AdamConfig, rows: usize, cols: usize) -> Self {
        Self {
            config,
            first: Array2::zeros((rows, cols)),
            second: Array2::zeros((rows, cols)),
            step: 0,
            synced: vec![0; rows],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn apply(&mut self, values: &mut Array2<f64>, r: usize, t: u64, grad: Option<ArrayView1<f64>>) {
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powf(t as f64);
        let c2 = 1.0 - beta2.powf(t as f64);
        for c in 0..values.ncols() {
            let g = grad.map_or(0.0, |g| g[c]);
            let m = beta1 * self.first[[r, c]] + (1.0 - beta1) * g;
            let v = beta2 * self.second[[r, c]] + (1.0 - beta2) * g * g;
            self.first[[r, c]] = m;
            self.second[[r, c]] = v;
            values[[r, c]] -= lr * (m / c1) / ((v / c2).sqrt() + eps);
        }
    }

    /// Replays the zero-gradient steps row `r` missed before step `t`.
    fn catch_up(&mut self, values: &mut Array2<f64>, r: usize, t: u64) {
        let AdamConfig { beta1, beta2, .. } = self.config;
        let mut s = self.synced[r] + 1;
        let mut momentum = 1.0;
        while s < t && momentum > REPLAY_CUTOFF {
            self.apply(values, r, s, None);
            momentum *= beta1;
            s += 1;
        }
        if s < t {
            let skipped = (t - s) as f64;
            let (d1, d2) = (beta1.powf(skipped), beta2.powf(skipped));
            self.first.row_mut(r).mapv_inplace(|m| m * d1);
            self.second.row_mut(r).mapv_inplace(|v| v * d2);
        }
    }

    /// Brings `rows` up to the current step without taking a new one.
    pub fn sync_rows(&mut self, values: &mut Array2<f64>, rows: &[usize]) {
        let t = self.step;
        for &r in rows {
            if self.synced[r] < t {
                self.catch_up(values, r, t + 1);
                self.synced[r] = t;
            }
        }
    }

    /// One Adam step. `grads` row `k` is the gradient for `values` row
    /// `rows[k]`; `rows` must not repeat.
    pub fn update_rows(&mut self, values: &mut Array2<f64>, rows: &[usize], grads: ArrayView2<f64>) -> Result<()> {
        if values.dim() != self.first.dim() {
            return Err(Error::shape("row adam values", format!("{:?}", self.first.dim()), format!("{:?}", values.dim())));
        }
        if grads.dim() != (rows.len(), values.ncols()) {
            return Err(Error::shape(
                "row adam gradient",
                format!("{:?}", (rows.len(), values.ncols())),
                format!("{:?}", grads.dim()),
            ));
        }
        self.step += 1;
        let t = self.step;
        for (k, &r) in rows.iter().enumerate() {
            self.catch_up(values, r, t);
            self.apply(values, r, t, Some(grads.row(k)));
            self.synced[r] = t;
        }
        Ok(())
    }
}

/// SGD with momentum and a step learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub decay_factor: f64,
    pub decay_period: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            base_lr: 0.1,
            momentum: 0.9,
            decay_factor: 0.1,
            decay_period: 80,
        }
    }
}

impl SgdConfig {
    /// `base_lr * decay_factor^floor(epoch / decay_period)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = epoch / self.decay_period.max(1);
        self.base_lr * self.decay_factor.powi(drops as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentumState {
    pub config: SgdConfig,
    velocity: Vec<Vec<f64>>,
}

impl SgdMomentumState {
    pub fn new(config: SgdConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            velocity: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// `v ← momentum·v + g`, `p ← p − lr(epoch)·v`.
    pub fn step(&mut self, mut params: Vec<&mut [f64]>, grads: Vec<&[f64]>, epoch: usize) -> Result<()> {
        let sizes: Vec<usize> = self.velocity.iter().map(Vec::len).collect();
        check_lists(&sizes, &params, &grads)?;
        let lr = self.config.lr_at(epoch);
        let mu = self.config.momentum;
        for (t, (p, g)) in params.iter_mut().zip(&grads).enumerate() {
            let vel = &mut self.velocity[t];
            for i in 0..p.len() {
                vel[i] = mu * vel[i] + g[i];
                p[i] -= lr * vel[i];
            }
        }
        Ok(())
    }
}

/// Central-difference gradient `(f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn numeric_gradient(mut loss: impl FnMut(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let plus = loss(&x);
            x[i] = orig - h;
            let minus = loss(&x);
            x[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn adam_zero_gradient_is_a_fixed_point() {
        let mut p = vec![1.0, -2.0];
        let mut adam = AdamState::new(AdamConfig::default(), &[2]);
        for _ in 0..50 {
            adam.step(vec![&mut p], vec![&[0.0, 0.0]]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(adam.steps(), 50);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let cfg = AdamConfig::with_momentum(0.01, 0.99, AdamMomentum::Beta1);
        let mut p = vec![0.0, 0.0, 0.0];
        let mut adam = AdamState::new(cfg, &[3]);
        adam.step(vec![&mut p], vec![&[3.0, -0.002, 50.0]]).unwrap();
        for (v, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((v - s * 0.01).abs() < 1e-7, "{v}");
        }
    }

    #[test]
    fn adam_descends_scalar_quadratic() {
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut w = vec![1.0];
        let mut adam = AdamState::new(cfg, &[1]);
        for _ in 0..100 {
            let g = [2.0 * w[0]];
            adam.step(vec![&mut w], vec![&g]).unwrap();
        }
        assert!(w[0].abs() < 0.05, "w = {}", w[0]);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut p = vec![0.0; 3];
        let mut adam = AdamState::new(AdamConfig::default(), &[2]);
        assert!(adam.step(vec![&mut p], vec![&[0.0; 3]]).is_err());
    }

    #[test]
    fn momentum_interpretations() {
        let a = AdamConfig::with_momentum(1e-3, 0.99, AdamMomentum::Beta1);
        assert_eq!((a.beta1, a.beta2), (0.99, 0.999));
        let b = AdamConfig::with_momentum(1e-3, 0.99, AdamMomentum::Beta2);
        assert_eq!((b.beta1, b.beta2), (0.9, 0.99));
    }

    #[test]
    fn row_adam_touches_only_listed_rows() {
        let mut z = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let mut adam = RowAdamState::new(AdamConfig::default(), 3, 2);
        adam.update_rows(&mut z, &[2, 0], array![[1.0, -1.0], [0.5, 0.0]].view()).unwrap();
        assert_eq!(z.row(1), array![2.0, 2.0]);
        assert!((z[[2, 0]] - (3.0 - 1e-3)).abs() < 1e-9);
        assert!((z[[0, 0]] - (1.0 - 1e-3)).abs() < 1e-9);
        assert_eq!(z[[0, 1]], 1.0);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn row_adam_matches_dense_adam_when_rows_are_revisited() {
        let cfg = AdamConfig {
            beta1: 0.99,
            ..AdamConfig::default()
        };
        let mut sparse_z = array![[1.0, -1.0], [0.5, 2.0], [0.0, 0.0]];
        let mut dense_z = sparse_z.clone();
        let mut sparse = RowAdamState::new(cfg, 3, 2);
        let mut dense = AdamState::new(cfg, &[6]);
        let schedule: [&[usize]; 5] = [&[0, 1], &[1], &[2], &[1], &[0, 2]];
        for rows in schedule {
            let grads = Array2::from_shape_fn((rows.len(), 2), |(k, c)| (rows[k] + 1) as f64 * (c as f64 - 0.5));
            sparse.update_rows(&mut sparse_z, rows, grads.view()).unwrap();
            let mut full = Array2::zeros((3, 2));
            for (k, &r) in rows.iter().enumerate() {
                full.row_mut(r).assign(&grads.row(k));
            }
            dense
                .step(vec![dense_z.as_slice_mut().unwrap()], vec![full.as_slice().unwrap()])
                .unwrap();
        }
        // Rows 0 and 2 were just updated, so they are fully caught up.
        for r in [0, 2] {
            for c in 0..2 {
                assert!((sparse_z[[r, c]] - dense_z[[r, c]]).abs() < 1e-12);
            }
        }
        assert_ne!(sparse_z.row(1), dense_z.row(1));
        sparse.sync_rows(&mut sparse_z, &[1]);
        for (a, b) in sparse_z.iter().zip(&dense_z) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sgd_without_momentum_is_plain_sgd() {
        let cfg = SgdConfig {
            base_lr: 0.1,
            momentum: 0.0,
            ..SgdConfig::default()
        };
        let mut p = vec![1.0, 2.0];
        let mut sgd = SgdMomentumState::new(cfg, &[2]);
        sgd.step(vec![&mut p], vec![&[1.0, -2.0]], 0).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15 && (p[1] - 2.2).abs() < 1e-15);
    }

    #[test]
    fn sgd_step_schedule() {
        let cfg = SgdConfig::default();
        assert_eq!(cfg.lr_at(0), 0.1);
        assert_eq!(cfg.lr_at(79), 0.1);
        assert!((cfg.lr_at(80) - 0.01).abs() < 1e-15);
        assert!((cfg.lr_at(159) - 0.01).abs() < 1e-15);
        assert!((cfg.lr_at(160) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn sgd_momentum_accumulates_velocity() {
        let mut p = vec![0.0];
        let mut sgd = SgdMomentumState::new(SgdConfig::default(), &[1]);
        sgd.step(vec![&mut p], vec![&[1.0]], 0).unwrap();
        sgd.step(vec![&mut p], vec![&[1.0]], 0).unwrap();
        // v1 = 1, v2 = 1.9; p = -0.1 - 0.19
        assert!((p[0] + 0.29).abs() < 1e-12);
    }

    #[test]
    fn numeric_gradient_examples() {
        let g = numeric_gradient(|x| x[0] * x[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-8);
        let g = numeric_gradient(|_| 4.2, &[1.0, 2.0, 3.0], 1e-5);
        assert_eq!(g, vec![0.0; 3]);
        let g = numeric_gradient(|x| x[0] * x[1], &[2.0, 5.0], 1e-5);
        assert!((g[0] - 5.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
    }
}
