//! Dense feed-forward networks with hand-written reverse-mode gradients.
//!
//! Batches are row-major: one datapoint per row. A layer computes
//! `act(input · Wᵀ + b)` with `W` stored as `outputs x inputs`.

mod optim;

pub use optim::{
    numeric_gradient, AdamConfig, AdamMomentum, AdamState, RowAdamState, SgdConfig,
    SgdMomentumState,
};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::{DccRng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }
}

/// One affine projection followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(Error::shape("layer bias", weight.nrows(), bias.len()));
        }
        Ok(Self {
            weight: weight.as_standard_layout().into_owned(),
            bias,
            activation,
        })
    }

    /// Uniform initialization on `±1/sqrt(fan_in)` for weights and bias.
    pub fn init_uniform(inputs: usize, outputs: usize, activation: Activation, rng: &mut DccRng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-bound..bound));
        let bias = Array1::from_shape_simple_fn(outputs, || rng.random_range(-bound..bound));
        Self {
            weight,
            bias,
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn project(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let mut pre = input.dot(&self.weight.t());
        pre += &self.bias;
        pre
    }

    fn activate(&self, pre: &Array2<f64>) -> Array2<f64> {
        match self.activation {
            Activation::Relu => pre.mapv(|v| v.max(0.0)),
            Activation::Linear => pre.clone(),
        }
    }
}

/// Forward-pass mode. Training mode applies inverted dropout to the input
/// of every affine projection.
pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut DccRng },
}

/// Cached activations of one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    widths: Vec<usize>,
    /// Layer inputs after dropout.
    inputs: Vec<Array2<f64>>,
    /// Scaled dropout masks (entries 0 or 1/(1-p)); `None` when no dropout.
    masks: Vec<Option<Array2<f64>>>,
    pre: Vec<Array2<f64>>,
}

impl Tape {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn dropout_masks(&self) -> &[Option<Array2<f64>>] {
        &self.masks
    }
}

/// Gradients for one layer, shaped like the layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for g in &self.layers {
            out.push(g.weight.as_slice().expect("standard layout"));
            out.push(g.bias.as_slice().expect("contiguous"));
        }
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::shape("layer chain", pair[0].outputs(), pair[1].inputs()));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    fn check_input(&self, input: &ArrayView2<f64>) -> Result<()> {
        if input.ncols() != self.input_width() {
            return Err(Error::shape("network input width", self.input_width(), input.ncols()));
        }
        Ok(())
    }

    /// Forward pass recording a tape for backprop.
    pub fn forward(&self, input: ArrayView2<f64>, mut mode: Mode<'_>) -> Result<(Array2<f64>, Tape)> {
        self.check_input(&input)?;
        let dropout = match &mode {
            Mode::Eval => 0.0,
            Mode::Train { dropout, .. } => *dropout,
        };
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidConfig(format!("dropout probability {dropout} not in [0, 1)")));
        }
        let n = self.layers.len();
        let mut tape = Tape {
            batch: input.nrows(),
            widths: std::iter::once(self.input_width())
                .chain(self.layers.iter().map(Layer::outputs))
                .collect(),
            inputs: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
        };
        let mut current = input.to_owned();
        for layer in &self.layers {
            let mask = match &mut mode {
                Mode::Train { dropout, rng } if *dropout > 0.0 => {
                    let p = *dropout;
                    let keep = 1.0 / (1.0 - p);
                    let mask = Array2::from_shape_simple_fn(current.raw_dim(), || {
                        if rng.random::<f64>() < p {
                            0.0
                        } else {
                            keep
                        }
                    });
                    current *= &mask;
                    Some(mask)
                }
                _ => None,
            };
            let pre = layer.project(current.view());
            let out = layer.activate(&pre);
            tape.inputs.push(current);
            tape.masks.push(mask);
            tape.pre.push(pre);
            current = out;
        }
        Ok((current, tape))
    }

    /// Deterministic forward pass without recording.
    pub fn infer(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&input)?;
        let mut current = input.to_owned();
        for layer in &self.layers {
            let mut pre = layer.project(current.view());
            if layer.activation == Activation::Relu {
                pre.mapv_inplace(|v| v.max(0.0));
            }
            current = pre;
        }
        Ok(current)
    }

    /// Backpropagates `upstream` (gradient w.r.t. the forward output).
    /// Returns parameter gradients and the gradient w.r.t. the forward input.
    pub fn backward(&self, tape: &Tape, upstream: ArrayView2<f64>) -> Result<(MlpGrads, Array2<f64>)> {
        let (grads, input_grad) = self.backprop(tape, upstream, true)?;
        Ok((grads, input_grad.expect("input gradient requested")))
    }

    /// Like [`Mlp::backward`] but skips the gradient w.r.t. the input batch.
    pub fn backward_params(&self, tape: &Tape, upstream: ArrayView2<f64>) -> Result<MlpGrads> {
        Ok(self.backprop(tape, upstream, false)?.0)
    }

    fn backprop(
        &self,
        tape: &Tape,
        upstream: ArrayView2<f64>,
        want_input_grad: bool,
    ) -> Result<(MlpGrads, Option<Array2<f64>>)> {
        self.check_tape(tape)?;
        if upstream.dim() != (tape.batch, self.output_width()) {
            return Err(Error::TapeMismatch(format!(
                "upstream gradient is {:?}, forward output was {:?}",
                upstream.dim(),
                (tape.batch, self.output_width())
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        let mut input_grad = None;
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                delta.zip_mut_with(&tape.pre[idx], |g, &p| {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            let weight = delta.t().dot(&tape.inputs[idx]).as_standard_layout().into_owned();
            let bias = delta.sum_axis(Axis(0));
            grads.push(LayerGrads { weight, bias });
            if idx > 0 || want_input_grad {
                let mut next = delta.dot(&layer.weight);
                if let Some(mask) = &tape.masks[idx] {
                    next *= mask;
                }
                if idx == 0 {
                    input_grad = Some(next);
                    break;
                }
                delta = next;
            }
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, input_grad))
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        let widths: Vec<usize> = std::iter::once(self.input_width())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect();
        if tape.widths != widths {
            return Err(Error::TapeMismatch(format!(
                "tape widths {:?} do not match network widths {:?}",
                tape.widths, widths
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn tensor_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.weight.len(), l.bias.len()]).collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                found: flat.len(),
            });
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }
}

/// Encoder layer widths `D, h1, ..., hk, d`; the decoder mirrors them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidConfig(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self { widths })
    }

    /// The fully-connected `D-500-500-2000-d` encoder (mirrored decoder).
    pub fn standard(input_dim: usize, embed_dim: usize) -> Self {
        Self {
            widths: vec![input_dim, 500, 500, 2000, embed_dim],
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn embed_dim(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    /// Number of encoder/decoder layer pairs.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }
}

/// Encoder `f_θ` and decoder `g_ω`.
///
/// Every projection is followed by a ReLU except the encoder's code layer
/// and the decoder's reconstruction layer, which are linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
}

impl Autoencoder {
    pub fn new_random(arch: &Architecture, rng: &mut DccRng) -> Self {
        let w = arch.widths();
        let depth = arch.depth();
        let encoder = (0..depth)
            .map(|i| {
                let act = if i + 1 == depth { Activation::Linear } else { Activation::Relu };
                Layer::init_uniform(w[i], w[i + 1], act, rng)
            })
            .collect();
        let decoder = (0..depth)
            .rev()
            .map(|i| {
                let act = if i == 0 { Activation::Linear } else { Activation::Relu };
                Layer::init_uniform(w[i + 1], w[i], act, rng)
            })
            .collect();
        Self {
            encoder: Mlp::new(encoder).expect("widths chain"),
            decoder: Mlp::new(decoder).expect("widths chain"),
        }
    }

    pub fn from_parts(encoder: Mlp, decoder: Mlp) -> Result<Self> {
        let enc: Vec<usize> = std::iter::once(encoder.input_width())
            .chain(encoder.layers().iter().map(Layer::outputs))
            .collect();
        let mut dec: Vec<usize> = std::iter::once(decoder.input_width())
            .chain(decoder.layers().iter().map(Layer::outputs))
            .collect();
        dec.reverse();
        if enc != dec {
            return Err(Error::shape("decoder mirror", format!("{enc:?}"), format!("{dec:?}")));
        }
        Ok(Self { encoder, decoder })
    }

    /// One linear identity layer on each side: `f(x) = x`, `g(y) = y`.
    pub fn identity(dim: usize) -> Self {
        let layer = || {
            Layer::new(Array2::eye(dim), Array1::zeros(dim), Activation::Linear).expect("square")
        };
        Self {
            encoder: Mlp::new(vec![layer()]).expect("single layer"),
            decoder: Mlp::new(vec![layer()]).expect("single layer"),
        }
    }

    pub fn architecture(&self) -> Architecture {
        let widths = std::iter::once(self.encoder.input_width())
            .chain(self.encoder.layers().iter().map(Layer::outputs))
            .collect();
        Architecture { widths }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_width()
    }

    pub fn embed_dim(&self) -> usize {
        self.encoder.output_width()
    }

    pub fn encode(&self, batch: ArrayView2<f64>, mode: Mode<'_>) -> Result<(Array2<f64>, Tape)> {
        self.encoder.forward(batch, mode)
    }

    pub fn decode(&self, codes: ArrayView2<f64>, mode: Mode<'_>) -> Result<(Array2<f64>, Tape)> {
        if codes.ncols() != self.embed_dim() {
            return Err(Error::shape("decoder input width", self.embed_dim(), codes.ncols()));
        }
        self.decoder.forward(codes, mode)
    }

    /// `Y = F_θ(X)` in eval mode.
    pub fn embed(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.encoder.infer(x)
    }

    /// `G_ω(F_θ(X))` in eval mode.
    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.decoder.infer(self.encoder.infer(x)?.view())
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    /// Encoder tensors followed by decoder tensors, weight then bias per layer.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.decoder.tensors_mut());
        out
    }

    pub fn tensor_sizes(&self) -> Vec<usize> {
        let mut out = self.encoder.tensor_sizes();
        out.extend(self.decoder.tensor_sizes());
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.encoder.flatten();
        out.extend(self.decoder.flatten());
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                found: flat.len(),
            });
        }
        let split = self.encoder.param_count();
        self.encoder.set_flat(&flat[..split])?;
        self.decoder.set_flat(&flat[split..])
    }
}

/// Gradients for a whole autoencoder, in [`Autoencoder::tensors_mut`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderGrads {
    pub encoder: MlpGrads,
    pub decoder: MlpGrads,
}

impl AutoencoderGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.encoder.tensors();
        out.extend(self.decoder.tensors());
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}
