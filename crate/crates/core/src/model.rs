//! Feed-forward feature adapter with a linear classification head.
//!
//! Inputs are z-scored with frozen statistics, passed through the hidden
//! layers (tanh), then a linear embedding layer. The head maps embeddings to
//! class logits. Parameters flatten in the order: adapter layers first to
//! last (weight row-major, then bias), then head weight and bias.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::ecf::{FeatureMatrix, Standardizer};
use crate::error::{Error, Result};

/// Affine map `x -> x W^T + b` with `W` stored as `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    /// Glorot-uniform weights, zero bias.
    fn glorot(input: usize, output: usize, rng: &mut ChaCha20Rng) -> Self {
        let a = (6.0 / (input + output) as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((output, input), || rng.random_range(-a..a)),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

/// Layer sizes of an [`AdapterModel`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub embed: usize,
    pub classes: usize,
}

impl ModelDims {
    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.embed == 0 || self.classes == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid(format!(
                "all layer sizes must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    fn chain(&self) -> Vec<usize> {
        let mut sizes = vec![self.input];
        sizes.extend(&self.hidden);
        sizes.push(self.embed);
        sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterModel {
    /// Frozen input normalisation; not trained.
    pub input: Standardizer,
    /// Hidden layers followed by the embedding layer.
    pub layers: Vec<Layer>,
    pub head: Layer,
}

impl AdapterModel {
    pub fn from_parts(input: Standardizer, layers: Vec<Layer>, head: Layer) -> Result<Self> {
        let model = Self {
            input,
            layers,
            head,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn zeros(dims: &ModelDims) -> Result<Self> {
        dims.validate()?;
        let chain = dims.chain();
        let layers = chain.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(Self {
            input: Standardizer::identity(dims.input),
            layers,
            head: Layer::zeros(dims.embed, dims.classes),
        })
    }

    /// Glorot-initialised model; weights drawn from
    /// `ChaCha20Rng::seed_from_u64(seed)` layer by layer.
    pub fn init(dims: &ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let chain = dims.chain();
        let layers = chain
            .windows(2)
            .map(|w| Layer::glorot(w[0], w[1], &mut rng))
            .collect();
        let head = Layer::glorot(dims.embed, dims.classes, &mut rng);
        Ok(Self {
            input: Standardizer::identity(dims.input),
            layers,
            head,
        })
    }

    fn validate(&self) -> Result<()> {
        let mut width = self.input.dim();
        for (i, l) in self.layers.iter().enumerate() {
            if l.input_dim() != width || l.bias.len() != l.output_dim() {
                return Err(Error::invalid(format!(
                    "layer {i} does not chain from width {width}"
                )));
            }
            width = l.output_dim();
        }
        if self.head.input_dim() != width || self.head.bias.len() != self.head.output_dim() {
            return Err(Error::invalid("head does not match the embedding width"));
        }
        if self.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(())
    }

    pub fn dims(&self) -> ModelDims {
        let n = self.layers.len();
        ModelDims {
            input: self.input.dim(),
            hidden: self.layers[..n.saturating_sub(1)]
                .iter()
                .map(Layer::output_dim)
                .collect(),
            embed: self.embed_dim(),
            classes: self.head.output_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input.dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.layers
            .last()
            .map_or(self.input.dim(), Layer::output_dim)
    }

    pub fn classes(&self) -> usize {
        self.head.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum::<usize>() + self.head.param_count()
    }

    fn all_layers(&self) -> impl Iterator<Item = &Layer> {
        self.layers.iter().chain(std::iter::once(&self.head))
    }

    fn all_layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.layers
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
    }

    /// Trainable parameters in flat order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.all_layers() {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter();
        for l in self.all_layers_mut() {
            for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// `params -= lr * grad`.
    pub fn sgd_step(&mut self, grad: &[f64], lr: f64) -> Result<()> {
        if grad.len() != self.param_count() {
            return Err(Error::invalid("gradient length does not match the model"));
        }
        let mut it = grad.iter();
        for l in self.all_layers_mut() {
            for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *w -= lr * it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, batch: &FeatureMatrix) -> Result<ForwardCache> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "batch dimension {} does not match model input {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        let x = self.input.apply(batch)?.into_values();
        let mut activations = vec![x];
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            let mut h = layer.apply(activations[i].view());
            if i < last {
                h.mapv_inplace(f64::tanh);
            }
            activations.push(h);
        }
        let logits = self
            .head
            .apply(activations.last().expect("input present").view());
        Ok(ForwardCache {
            activations,
            logits,
        })
    }

    /// Backpropagates `d_embed` (loss gradient w.r.t. embeddings) and
    /// `d_logits` through the network, accumulating into flat `grad`.
    pub(crate) fn backward(
        &self,
        cache: &ForwardCache,
        d_logits: Option<&Array2<f64>>,
        d_embed: Option<&Array2<f64>>,
        grad: &mut [f64],
    ) {
        let offsets = self.offsets();
        let embed = cache.embeddings();
        let mut upstream = match d_embed {
            Some(d) => d.clone(),
            None => Array2::zeros(embed.raw_dim()),
        };
        if let Some(dl) = d_logits {
            let head_off = offsets[self.layers.len()];
            accumulate_layer(&self.head, embed.view(), dl, &mut grad[head_off..]);
            upstream += &dl.dot(&self.head.weight);
        }
        let last = self.layers.len().saturating_sub(1);
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if i < last {
                let a = &cache.activations[i + 1];
                upstream.zip_mut_with(a, |g, &y| *g *= 1.0 - y * y);
            }
            accumulate_layer(
                layer,
                cache.activations[i].view(),
                &upstream,
                &mut grad[offsets[i]..],
            );
            if i > 0 {
                upstream = upstream.dot(&layer.weight);
            }
        }
    }

    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        let mut acc = 0;
        for l in self.all_layers() {
            out.push(acc);
            acc += l.param_count();
        }
        out
    }
}

fn accumulate_layer(
    layer: &Layer,
    input: ArrayView2<'_, f64>,
    d_out: &Array2<f64>,
    grad: &mut [f64],
) {
    let dw = d_out.t().dot(&input);
    let db = d_out.sum_axis(Axis(0));
    let nw = layer.weight.len();
    for (g, v) in grad[..nw].iter_mut().zip(dw.iter()) {
        *g += v;
    }
    for (g, v) in grad[nw..nw + db.len()].iter_mut().zip(db.iter()) {
        *g += v;
    }
}

pub(crate) struct ForwardCache {
    /// Standardised input, each hidden activation, then the embeddings.
    pub activations: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
}

impl ForwardCache {
    pub fn embeddings(&self) -> &Array2<f64> {
        self.activations.last().expect("input present")
    }
}

/// Runs the model on a batch, returning `(embeddings, logits)`. The
/// embeddings keep the batch's domain tag.
pub fn forward(
    model: &AdapterModel,
    batch: &FeatureMatrix,
) -> Result<(FeatureMatrix, Array2<f64>)> {
    let cache = model.forward_cached(batch)?;
    let ForwardCache {
        mut activations,
        logits,
    } = cache;
    let embed = activations.pop().expect("input present");
    Ok((FeatureMatrix::new(embed, batch.domain_id())?, logits))
}

const MAGIC: &[u8; 8] = b"CFSHIFT1";
const CHECKPOINT_VERSION: u32 = 1;

/// Binary checkpoint, all integers `u32` and all reals `f64`, little-endian:
///
/// ```text
/// "CFSHIFT1" version input n_hidden hidden[n_hidden] embed classes
/// input_mean[input] input_std[input]
/// per layer (hidden..., embedding, head): weight[out*in] row-major, bias[out]
/// ```
pub fn write_checkpoint<W: Write>(model: &AdapterModel, mut w: W) -> Result<()> {
    let dims = model.dims();
    w.write_all(MAGIC)?;
    let mut header = vec![
        CHECKPOINT_VERSION,
        dims.input as u32,
        dims.hidden.len() as u32,
    ];
    header.extend(dims.hidden.iter().map(|&h| h as u32));
    header.extend([dims.embed as u32, dims.classes as u32]);
    for v in header {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in model
        .input
        .mean
        .iter()
        .chain(&model.input.std)
        .chain(&model.params())
    {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<AdapterModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take(8)? != MAGIC {
        return Err(Error::Checkpoint("missing CFSHIFT1 header".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input = cur.u32()? as usize;
    let n_hidden = cur.u32()? as usize;
    if n_hidden > 1024 {
        return Err(Error::Checkpoint(format!(
            "implausible hidden layer count {n_hidden}"
        )));
    }
    let hidden = (0..n_hidden)
        .map(|_| cur.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let embed = cur.u32()? as usize;
    let classes = cur.u32()? as usize;
    let dims = ModelDims {
        input,
        hidden,
        embed,
        classes,
    };
    let mut model = AdapterModel::zeros(&dims).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mean = cur.f64s(input)?;
    let std = cur.f64s(input)?;
    let params = cur.f64s(model.param_count())?;
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    model.input = Standardizer { mean, std };
    model.set_params(&params)?;
    model
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if model.input.std.iter().any(|s| *s <= 0.0) {
        return Err(Error::Checkpoint("input scale must be positive".into()));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &AdapterModel, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(model, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<AdapterModel> {
    read_checkpoint(std::fs::File::open(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}
