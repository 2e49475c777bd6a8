//! Binary checkpoints: an autoencoder and, optionally, a full optimizer
//! state so that clustering can resume exactly where it stopped.
//!
//! ```text
//! b"DCCCKPT\0" | version: u32 | autoencoder | has_state: u8 | state?
//! ```
//!
//! All numbers are little-endian; floats are stored bit-exactly.

use std::fs;
use std::path::Path;

use super::codec::{ByteReader, ByteWriter};
use crate::dccopt::TrainState;
use crate::nncore::{Activation, AdamConfig, AdamState, Autoencoder, Layer, Mlp, RowAdamState};
use crate::robust::RobustParams;
use crate::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 8] = b"DCCCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub autoencoder: Autoencoder,
    pub state: Option<TrainState>,
}

impl Checkpoint {
    pub fn new(autoencoder: Autoencoder) -> Self {
        Self {
            autoencoder,
            state: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.raw(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        write_autoencoder(&mut w, &self.autoencoder);
        w.bool(self.state.is_some());
        if let Some(state) = &self.state {
            write_state(&mut w, state);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8], location: &str) -> Result<Self> {
        let mut r = ByteReader::new(bytes, location);
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(r.error("not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let autoencoder = read_autoencoder(&mut r)?;
        let state = if r.bool()? { Some(read_state(&mut r)?) } else { None };
        r.finish()?;
        if let Some(s) = &state {
            if s.z.ncols() != autoencoder.embed_dim() {
                return Err(Error::shape("checkpoint representatives width", autoencoder.embed_dim(), s.z.ncols()));
            }
        }
        Ok(Self { autoencoder, state })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes, &path.display().to_string())
}

fn write_mlp(w: &mut ByteWriter, mlp: &Mlp) {
    w.usize(mlp.layers().len());
    for layer in mlp.layers() {
        w.u8(layer.activation.tag());
        w.matrix(&layer.weight);
        w.vector(&layer.bias);
    }
}

fn read_mlp(r: &mut ByteReader<'_>) -> Result<Mlp> {
    let count = r.usize()?;
    if count == 0 || count > 1024 {
        return Err(r.error(format!("implausible layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let tag = r.u8()?;
        let activation = Activation::from_tag(tag).ok_or_else(|| r.error(format!("unknown activation tag {tag}")))?;
        let weight = r.matrix()?;
        let bias = r.vector()?;
        layers.push(Layer::new(weight, bias, activation)?);
    }
    Mlp::new(layers)
}

fn write_autoencoder(w: &mut ByteWriter, ae: &Autoencoder) {
    write_mlp(w, &ae.encoder);
    write_mlp(w, &ae.decoder);
}

fn read_autoencoder(r: &mut ByteReader<'_>) -> Result<Autoencoder> {
    let encoder = read_mlp(r)?;
    let decoder = read_mlp(r)?;
    Autoencoder::from_parts(encoder, decoder)
}

fn write_adam_config(w: &mut ByteWriter, c: &AdamConfig) {
    w.f64(c.lr);
    w.f64(c.beta1);
    w.f64(c.beta2);
    w.f64(c.eps);
}

fn read_adam_config(r: &mut ByteReader<'_>) -> Result<AdamConfig> {
    Ok(AdamConfig {
        lr: r.f64()?,
        beta1: r.f64()?,
        beta2: r.f64()?,
        eps: r.f64()?,
    })
}

fn write_state(w: &mut ByteWriter, s: &TrainState) {
    w.bool(s.network.is_some());
    if let Some(ae) = &s.network {
        write_autoencoder(w, ae);
    }
    w.matrix(&s.z);
    w.f64(s.params.mu1);
    w.f64(s.params.mu2);
    w.f64(s.params.lambda);
    w.f64(s.delta1);
    w.f64(s.delta2);
    w.usize(s.epoch);
    w.usize(s.continuation_period);
    write_adam_config(w, &s.z_optimizer.config);
    w.matrix(&s.z_optimizer.first);
    w.matrix(&s.z_optimizer.second);
    w.u64(s.z_optimizer.step);
    w.u64s(&s.z_optimizer.synced);
    w.bool(s.network_optimizer.is_some());
    if let Some(opt) = &s.network_optimizer {
        write_adam_config(w, &opt.config);
        w.u64(opt.step);
        w.usize(opt.first.len());
        for (m, v) in opt.first.iter().zip(&opt.second) {
            w.f64s(m);
            w.f64s(v);
        }
    }
    w.u64(s.seed);
    w.bool(s.continuation_complete);
    w.bool(s.edge_status.is_some());
    if let Some(status) = &s.edge_status {
        w.usize(status.len());
        for &b in status {
            w.bool(b);
        }
    }
}

fn read_state(r: &mut ByteReader<'_>) -> Result<TrainState> {
    let network = if r.bool()? { Some(read_autoencoder(r)?) } else { None };
    let z = r.matrix()?;
    let params = RobustParams {
        mu1: r.f64()?,
        mu2: r.f64()?,
        lambda: r.f64()?,
    };
    let delta1 = r.f64()?;
    let delta2 = r.f64()?;
    let epoch = r.usize()?;
    let continuation_period = r.usize()?;
    let z_config = read_adam_config(r)?;
    let first = r.matrix()?;
    let second = r.matrix()?;
    let step = r.u64()?;
    let synced = r.u64s()?;
    if first.dim() != z.dim() || second.dim() != z.dim() || synced.len() != z.nrows() {
        return Err(r.error("representative optimizer does not match representatives"));
    }
    let z_optimizer = RowAdamState {
        config: z_config,
        first,
        second,
        step,
        synced,
    };
    let network_optimizer = if r.bool()? {
        let config = read_adam_config(r)?;
        let step = r.u64()?;
        let tensors = r.usize()?;
        let mut first = Vec::new();
        let mut second = Vec::new();
        for _ in 0..tensors {
            first.push(r.f64s()?);
            second.push(r.f64s()?);
        }
        let opt = AdamState {
            config,
            first,
            second,
            step,
        };
        let expected = network.as_ref().map(Autoencoder::tensor_sizes);
        let found: Vec<usize> = opt.first.iter().map(Vec::len).collect();
        if expected.as_ref() != Some(&found) || opt.second.iter().map(Vec::len).ne(found.iter().copied()) {
            return Err(r.error("network optimizer does not match the network"));
        }
        Some(opt)
    } else {
        None
    };
    let seed = r.u64()?;
    let continuation_complete = r.bool()?;
    let edge_status = if r.bool()? {
        let len = r.usize()?;
        let bytes = r.take(len)?;
        let mut out = Vec::with_capacity(len);
        for &b in bytes {
            match b {
                0 => out.push(false),
                1 => out.push(true),
                other => return Err(r.error(format!("invalid flag byte {other}"))),
            }
        }
        Some(out)
    } else {
        None
    };
    if let Some(ae) = &network {
        if ae.embed_dim() != z.ncols() {
            return Err(Error::shape("state representatives width", ae.embed_dim(), z.ncols()));
        }
    }
    Ok(TrainState {
        network,
        z,
        params,
        delta1,
        delta2,
        epoch,
        continuation_period,
        z_optimizer,
        network_optimizer,
        seed,
        continuation_complete,
        edge_status,
    })
}
