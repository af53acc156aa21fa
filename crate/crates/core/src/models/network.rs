//! Layer stack with analytic forward/backward passes.
//!
//! Convolutions treat the feature vector as a single-channel 1-D sequence and
//! are lowered to matrix multiplies through im2col. All arithmetic is f64 and
//! strictly sequential, so training is bit-reproducible for a fixed seed.

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Activations flowing between layers: channeled sequences for the conv
/// trunk, flat matrices after pooling.
#[derive(Debug, Clone)]
pub(crate) enum Value {
    /// (batch, channels, length), standard layout.
    Seq(Array3<f64>),
    /// (batch, features).
    Flat(Array2<f64>),
}

impl Value {
    fn batch(&self) -> usize {
        match self {
            Value::Seq(a) => a.dim().0,
            Value::Flat(a) => a.dim().0,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Layer {
    Conv1d {
        /// (in_ch * kernel, out_ch)
        w: Array2<f64>,
        b: Array1<f64>,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
    },
    Dense {
        /// (in, out)
        w: Array2<f64>,
        b: Array1<f64>,
    },
    Relu,
    GlobalAvgPool,
}

/// Per-layer parameter gradients; parameter-free layers carry `None`.
#[derive(Debug, Clone)]
pub enum LayerGrad {
    Params { dw: Array2<f64>, db: Array1<f64> },
    None,
}

/// Gradients of the mean batch loss with respect to every parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) layers: Vec<LayerGrad>,
}

impl Gradients {
    /// Flattened in the same order as [`Network::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            if let LayerGrad::Params { dw, db } = g {
                out.extend(dw.iter());
                out.extend(db.iter());
            }
        }
        out
    }
}

fn conv_out_len(len: usize, kernel: usize, stride: usize) -> Result<usize> {
    if len < kernel {
        return Err(Error::ShapeMismatch(format!(
            "sequence length {len} shorter than kernel {kernel}"
        )));
    }
    Ok((len - kernel) / stride + 1)
}

/// im2col: (batch, in_ch, len) -> (batch*out_len, in_ch*kernel).
fn im2col(x: &Array3<f64>, kernel: usize, stride: usize, out_len: usize) -> Array2<f64> {
    let (batch, in_ch, len) = x.dim();
    let xs = x.as_slice().expect("standard layout");
    let mut cols = Array2::zeros((batch * out_len, in_ch * kernel));
    let cs = cols.as_slice_mut().expect("standard layout");
    let row_w = in_ch * kernel;
    for b in 0..batch {
        for t in 0..out_len {
            let row = (b * out_len + t) * row_w;
            let start = t * stride;
            for c in 0..in_ch {
                let src = b * in_ch * len + c * len + start;
                let dst = row + c * kernel;
                cs[dst..dst + kernel].copy_from_slice(&xs[src..src + kernel]);
            }
        }
    }
    cols
}

/// Transposed im2col: scatter-adds column gradients back onto the input.
fn col2im(
    dcols: &Array2<f64>,
    batch: usize,
    in_ch: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    out_len: usize,
) -> Array3<f64> {
    let mut dx = Array3::zeros((batch, in_ch, len));
    let dxs = dx.as_slice_mut().expect("standard layout");
    let ds = dcols.as_slice().expect("standard layout");
    let row_w = in_ch * kernel;
    for b in 0..batch {
        for t in 0..out_len {
            let row = (b * out_len + t) * row_w;
            let start = t * stride;
            for c in 0..in_ch {
                let dst = b * in_ch * len + c * len + start;
                let src = row + c * kernel;
                for j in 0..kernel {
                    dxs[dst + j] += ds[src + j];
                }
            }
        }
    }
    dx
}

impl Layer {
    fn forward(&self, x: &Value) -> Result<Value> {
        match (self, x) {
            (
                Layer::Conv1d {
                    w,
                    b,
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                },
                Value::Seq(x),
            ) => {
                let (batch, ch, len) = x.dim();
                if ch != *in_ch {
                    return Err(Error::ShapeMismatch(format!(
                        "conv expects {in_ch} channels, got {ch}"
                    )));
                }
                let out_len = conv_out_len(len, *kernel, *stride)?;
                let cols = im2col(x, *kernel, *stride, out_len);
                let mut y2 = cols.dot(w);
                for mut row in y2.rows_mut() {
                    row += b;
                }
                // (batch*out_len, out_ch) -> (batch, out_ch, out_len)
                let mut y = Array3::zeros((batch, *out_ch, out_len));
                {
                    let ys = y.as_slice_mut().unwrap();
                    let y2s = y2.as_slice().unwrap();
                    for bi in 0..batch {
                        for t in 0..out_len {
                            let src = (bi * out_len + t) * *out_ch;
                            for o in 0..*out_ch {
                                ys[bi * *out_ch * out_len + o * out_len + t] = y2s[src + o];
                            }
                        }
                    }
                }
                Ok(Value::Seq(y))
            }
            (Layer::Dense { w, b }, Value::Flat(x)) => {
                if x.dim().1 != w.dim().0 {
                    return Err(Error::ShapeMismatch(format!(
                        "dense expects {} inputs, got {}",
                        w.dim().0,
                        x.dim().1
                    )));
                }
                let mut y = x.dot(w);
                for mut row in y.rows_mut() {
                    row += b;
                }
                Ok(Value::Flat(y))
            }
            (Layer::Relu, Value::Seq(x)) => Ok(Value::Seq(x.mapv(|v| v.max(0.0)))),
            (Layer::Relu, Value::Flat(x)) => Ok(Value::Flat(x.mapv(|v| v.max(0.0)))),
            (Layer::GlobalAvgPool, Value::Seq(x)) => {
                Ok(Value::Flat(x.mean_axis(Axis(2)).unwrap()))
            }
            _ => Err(Error::ShapeMismatch(
                "layer applied to incompatible activation kind".into(),
            )),
        }
    }

    /// Returns (input gradient, parameter gradient). `x` is the cached input.
    fn backward(&self, x: &Value, dy: &Value) -> Result<(Value, LayerGrad)> {
        match (self, x, dy) {
            (
                Layer::Conv1d {
                    w,
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    ..
                },
                Value::Seq(x),
                Value::Seq(dy),
            ) => {
                let (batch, _, len) = x.dim();
                let out_len = dy.dim().2;
                // Rebuilding cols costs memory-bound time but avoids caching
                // a large matrix per layer.
                let cols = im2col(x, *kernel, *stride, out_len);
                let mut dy2 = Array2::zeros((batch * out_len, *out_ch));
                {
                    let ds = dy2.as_slice_mut().unwrap();
                    let dys = dy.as_slice().unwrap();
                    for bi in 0..batch {
                        for t in 0..out_len {
                            let dst = (bi * out_len + t) * *out_ch;
                            for o in 0..*out_ch {
                                ds[dst + o] = dys[bi * *out_ch * out_len + o * out_len + t];
                            }
                        }
                    }
                }
                let dw = cols.t().dot(&dy2);
                let db = dy2.sum_axis(Axis(0));
                let dcols = dy2.dot(&w.t());
                let dx = col2im(&dcols, batch, *in_ch, len, *kernel, *stride, out_len);
                Ok((Value::Seq(dx), LayerGrad::Params { dw, db }))
            }
            (Layer::Dense { w, .. }, Value::Flat(x), Value::Flat(dy)) => {
                let dw = x.t().dot(dy);
                let db = dy.sum_axis(Axis(0));
                let dx = dy.dot(&w.t());
                Ok((Value::Flat(dx), LayerGrad::Params { dw, db }))
            }
            (Layer::Relu, Value::Seq(x), Value::Seq(dy)) => {
                let mut dx = dy.clone();
                dx.zip_mut_with(x, |d, &v| {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                });
                Ok((Value::Seq(dx), LayerGrad::None))
            }
            (Layer::Relu, Value::Flat(x), Value::Flat(dy)) => {
                let mut dx = dy.clone();
                dx.zip_mut_with(x, |d, &v| {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                });
                Ok((Value::Flat(dx), LayerGrad::None))
            }
            (Layer::GlobalAvgPool, Value::Seq(x), Value::Flat(dy)) => {
                let (batch, ch, len) = x.dim();
                let mut dx = Array3::zeros((batch, ch, len));
                let scale = 1.0 / len as f64;
                for bi in 0..batch {
                    for c in 0..ch {
                        let g = dy[[bi, c]] * scale;
                        for t in 0..len {
                            dx[[bi, c, t]] = g;
                        }
                    }
                }
                Ok((Value::Seq(dx), LayerGrad::None))
            }
            _ => Err(Error::ShapeMismatch(
                "backward applied to incompatible activation kind".into(),
            )),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Layer::Conv1d { w, b, .. } | Layer::Dense { w, b } => w.len() + b.len(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Network {
    pub(crate) layers: Vec<Layer>,
    pub(crate) seq_input: bool,
}

impl Network {
    /// Wraps a flat feature batch in the activation kind the first layer
    /// expects (single-channel sequence for conv trunks).
    pub(crate) fn input_value(&self, x: &Array2<f64>) -> Value {
        if self.seq_input {
            let (batch, len) = x.dim();
            let mut seq = Array3::zeros((batch, 1, len));
            seq.index_axis_mut(Axis(1), 0).assign(x);
            Value::Seq(seq)
        } else {
            Value::Flat(x.clone())
        }
    }

    pub(crate) fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut value = self.input_value(x);
        for layer in &self.layers {
            value = layer.forward(&value)?;
        }
        match value {
            Value::Flat(y) => Ok(y),
            Value::Seq(_) => Err(Error::ShapeMismatch(
                "network ended on a sequence activation".into(),
            )),
        }
    }

    /// Forward pass retaining each layer's input for the backward pass.
    pub(crate) fn forward_cached(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Vec<Value>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut value = self.input_value(x);
        for layer in &self.layers {
            caches.push(value.clone());
            value = layer.forward(&value)?;
        }
        match value {
            Value::Flat(y) => Ok((y, caches)),
            Value::Seq(_) => Err(Error::ShapeMismatch(
                "network ended on a sequence activation".into(),
            )),
        }
    }

    /// Backpropagates `dy` (gradient at the network output) through the
    /// cached activations.
    pub(crate) fn backward(&self, caches: &[Value], dy: Array2<f64>) -> Result<Gradients> {
        debug_assert_eq!(caches.len(), self.layers.len());
        debug_assert!(caches
            .first()
            .map(|c| c.batch() == dy.dim().0)
            .unwrap_or(true));
        let mut grads = vec![LayerGrad::None; self.layers.len()];
        let mut dvalue = Value::Flat(dy);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (dx, grad) = layer.backward(&caches[i], &dvalue)?;
            grads[i] = grad;
            dvalue = dx;
        }
        Ok(Gradients { layers: grads })
    }

    pub(crate) fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Uniform fan-in init: U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
    pub(crate) fn init_weights(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            match layer {
                Layer::Conv1d { w, b, .. } | Layer::Dense { w, b } => {
                    let limit = 1.0 / (w.dim().0 as f64).sqrt();
                    for v in w.iter_mut() {
                        *v = rng.gen_range(-limit..limit);
                    }
                    b.fill(0.0);
                }
                _ => {}
            }
        }
    }

    pub(crate) fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            if let Layer::Conv1d { w, b, .. } | Layer::Dense { w, b } = layer {
                out.extend(w.iter());
                out.extend(b.iter());
            }
        }
        out
    }

    pub(crate) fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            if let Layer::Conv1d { w, b, .. } | Layer::Dense { w, b } = layer {
                for v in w.iter_mut() {
                    *v = flat[offset];
                    offset += 1;
                }
                for v in b.iter_mut() {
                    *v = flat[offset];
                    offset += 1;
                }
            }
        }
        Ok(())
    }

    /// In-place SGD/Adam-style update over (param, grad) pairs.
    pub(crate) fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut index = 0;
        for layer in &mut self.layers {
            if let Layer::Conv1d { w, b, .. } | Layer::Dense { w, b } = layer {
                for v in w.iter_mut() {
                    f(index, v);
                    index += 1;
                }
                for v in b.iter_mut() {
                    f(index, v);
                    index += 1;
                }
            }
        }
    }
}
