//! Stacked denoising autoencoder initialization.
//!
//! Encoder/decoder layer pairs are trained greedily from the outermost pair
//! inward, each reconstructing the clean activations of the layer below from
//! a dropout-corrupted copy while earlier layers stay frozen. The whole
//! network is then fine-tuned end to end on the reconstruction loss without
//! corruption. Every stage minimizes the mean squared error per minibatch
//! with SGD and momentum.

use std::fmt;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::nncore::{Architecture, Autoencoder, Mlp, Mode, SgdConfig, SgdMomentumState};
use crate::{DccRng, Error, Result};

/// Input dimension at which the base learning rate applies unscaled.
pub const REFERENCE_INPUT_DIM: usize = 784;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub per_layer_epochs: usize,
    pub finetune_epochs: usize,
    pub minibatch_size: usize,
    pub dropout: f64,
    pub sgd: SgdConfig,
    /// Scale the base rate by `784 / D`, clamped to `[0.01, 0.1]`.
    pub scale_lr_by_dim: bool,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            per_layer_epochs: 200,
            finetune_epochs: 400,
            minibatch_size: 256,
            dropout: 0.2,
            sgd: SgdConfig::default(),
            scale_lr_by_dim: true,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.minibatch_size == 0 {
            return Err(Error::InvalidConfig("minibatch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if !(self.sgd.base_lr >= 0.0 && self.sgd.base_lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} is invalid", self.sgd.base_lr)));
        }
        Ok(())
    }

    /// SGD settings with the learning rate adjusted for the input dimension.
    pub fn sgd_for_dim(&self, input_dim: usize) -> SgdConfig {
        let mut sgd = self.sgd;
        if self.scale_lr_by_dim && input_dim > 0 {
            sgd.base_lr = (sgd.base_lr * REFERENCE_INPUT_DIM as f64 / input_dim as f64).clamp(0.01, 0.1);
        }
        sgd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Greedy training of encoder layer `i` with its mirrored decoder layer.
    Layer(usize),
    Finetune,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Layer(i) => write!(f, "layer{i}"),
            Stage::Finetune => f.write_str("finetune"),
        }
    }
}

/// Mean minibatch loss over one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub stage: Stage,
    pub epoch: usize,
    pub loss: f64,
}

/// Renders records as `stage epoch loss` lines.
pub fn render_loss_log(records: &[LossRecord]) -> String {
    let mut out = String::from("stage epoch loss\n");
    for r in records {
        out.push_str(&format!("{} {} {}\n", r.stage, r.epoch, r.loss));
    }
    out
}

/// Mean squared error averaged over rows and columns.
pub fn reconstruction_mse(ae: &Autoencoder, x: ArrayView2<f64>) -> Result<f64> {
    let recon = ae.reconstruct(x)?;
    Ok(mse(recon.view(), x))
}

fn mse(out: ArrayView2<f64>, target: ArrayView2<f64>) -> f64 {
    let sum: f64 = out.iter().zip(target.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    sum / out.len().max(1) as f64
}

fn stage_rng(seed: u64, stage: Stage) -> DccRng {
    let mut rng = DccRng::seed_from_u64(seed);
    let stream = match stage {
        Stage::Layer(i) => i as u64 + 1,
        Stage::Finetune => 0,
    };
    rng.set_stream(stream);
    rng
}

/// Trains `net` to map (corrupted) `input` rows onto `target` rows.
fn train_reconstruction(
    net: &mut Mlp,
    input: ArrayView2<f64>,
    target: ArrayView2<f64>,
    epochs: usize,
    dropout: f64,
    sgd: SgdConfig,
    batch_size: usize,
    stage: Stage,
    rng: &mut DccRng,
    log: &mut Vec<LossRecord>,
) -> Result<()> {
    let n = input.nrows();
    let mut state = SgdMomentumState::new(sgd, &net.tensor_sizes());
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let xb = input.select(Axis(0), chunk);
            let tb = target.select(Axis(0), chunk);
            let mode = if dropout > 0.0 {
                Mode::Train { dropout, rng: &mut *rng }
            } else {
                Mode::Eval
            };
            let (out, tape) = net.forward(xb.view(), mode)?;
            let loss = mse(out.view(), tb.view());
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    stage: stage.to_string(),
                    epoch,
                });
            }
            let upstream = (out - &tb) * (2.0 / tb.len() as f64);
            let grads = net.backward_params(&tape, upstream.view())?;
            state.step(net.tensors_mut(), grads.tensors(), epoch)?;
            total += loss;
            batches += 1;
        }
        log.push(LossRecord {
            stage,
            epoch,
            loss: total / batches.max(1) as f64,
        });
    }
    Ok(())
}

/// Greedy layer-pair pretraining from a fresh random initialization.
pub fn pretrain_layerwise(
    x: ArrayView2<f64>,
    arch: &Architecture,
    cfg: &PretrainConfig,
) -> Result<(Autoencoder, Vec<LossRecord>)> {
    cfg.validate()?;
    if x.ncols() != arch.input_dim() {
        return Err(Error::shape("pretraining input width", arch.input_dim(), x.ncols()));
    }
    let mut init_rng = DccRng::seed_from_u64(cfg.seed);
    let mut ae = Autoencoder::new_random(arch, &mut init_rng);
    let sgd = cfg.sgd_for_dim(arch.input_dim());
    let depth = arch.depth();
    let mut log = Vec::new();
    let mut activations = x.to_owned();
    for pair in 0..depth {
        let stage = Stage::Layer(pair);
        let dec_index = depth - 1 - pair;
        let mut net = Mlp::new(vec![
            ae.encoder.layers()[pair].clone(),
            ae.decoder.layers()[dec_index].clone(),
        ])?;
        let mut rng = stage_rng(cfg.seed, stage);
        train_reconstruction(
            &mut net,
            activations.view(),
            activations.view(),
            cfg.per_layer_epochs,
            cfg.dropout,
            sgd,
            cfg.minibatch_size,
            stage,
            &mut rng,
            &mut log,
        )?;
        let trained = net.layers();
        ae.encoder.layers_mut()[pair] = trained[0].clone();
        ae.decoder.layers_mut()[dec_index] = trained[1].clone();
        log::info!(
            "pretrained layer pair {pair}: loss {:.6}",
            log.last().map_or(f64::NAN, |r| r.loss)
        );
        if pair + 1 < depth {
            let single = Mlp::new(vec![trained[0].clone()])?;
            activations = single.infer(activations.view())?;
        }
    }
    Ok((ae, log))
}

/// End-to-end reconstruction training without corruption.
pub fn finetune(ae: &mut Autoencoder, x: ArrayView2<f64>, cfg: &PretrainConfig) -> Result<Vec<LossRecord>> {
    cfg.validate()?;
    if x.ncols() != ae.input_dim() {
        return Err(Error::shape("finetuning input width", ae.input_dim(), x.ncols()));
    }
    let mut layers = ae.encoder.layers().to_vec();
    layers.extend(ae.decoder.layers().iter().cloned());
    let split = ae.encoder.layers().len();
    let mut net = Mlp::new(layers)?;
    let mut rng = stage_rng(cfg.seed, Stage::Finetune);
    let mut log = Vec::new();
    train_reconstruction(
        &mut net,
        x,
        x,
        cfg.finetune_epochs,
        0.0,
        cfg.sgd_for_dim(ae.input_dim()),
        cfg.minibatch_size,
        Stage::Finetune,
        &mut rng,
        &mut log,
    )?;
    let (enc, dec) = net.layers().split_at(split);
    *ae = Autoencoder::from_parts(Mlp::new(enc.to_vec())?, Mlp::new(dec.to_vec())?)?;
    Ok(log)
}

/// Layer-wise pretraining followed by fine-tuning.
pub fn initialize(
    x: ArrayView2<f64>,
    arch: &Architecture,
    cfg: &PretrainConfig,
) -> Result<(Autoencoder, Vec<LossRecord>)> {
    let (mut ae, mut log) = pretrain_layerwise(x, arch, cfg)?;
    log.extend(finetune(&mut ae, x, cfg)?);
    if let Some(bad) = ae.embed(x)?.iter().position(|v| !v.is_finite()) {
        let d = ae.embed_dim();
        return Err(Error::NonFinite { row: bad / d, col: bad % d });
    }
    Ok((ae, log))
}
