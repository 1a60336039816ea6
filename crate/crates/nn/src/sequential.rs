use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::activation::{dropout, dropout_grad, relu, relu_grad, sigmoid, sigmoid_grad, Mode};
use crate::conv::{conv1d, conv1d_grad, transposed_conv1d, transposed_conv1d_grad, Conv1d, TransposedConv1d};
use crate::error::{NnError, Result};
use crate::param::Param;
use crate::pool::{maxpool1d, maxpool1d_grad};
use crate::tensor::Tensor;

/// Architecture description of one layer, enough to rebuild it.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// Stride-1, same-padded convolution.
    Conv { in_ch: usize, out_ch: usize, kernel: usize },
    TransposedConv { in_ch: usize, out_ch: usize, kernel: usize, stride: usize },
    Relu,
    Sigmoid,
    Dropout(f64),
    MaxPool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv(Conv1d),
    TransposedConv(TransposedConv1d),
    Relu,
    Sigmoid,
    Dropout(f64),
    MaxPool,
}

impl Layer {
    pub fn build(spec: &LayerSpec, rng: &mut impl Rng) -> Result<Self> {
        Ok(match *spec {
            LayerSpec::Conv { in_ch, out_ch, kernel } => {
                Layer::Conv(Conv1d::same(in_ch, out_ch, kernel, rng)?)
            }
            LayerSpec::TransposedConv { in_ch, out_ch, kernel, stride } => {
                Layer::TransposedConv(TransposedConv1d::new(in_ch, out_ch, kernel, stride, rng)?)
            }
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::Sigmoid => Layer::Sigmoid,
            LayerSpec::Dropout(p) => {
                if !(0.0..1.0).contains(&p) {
                    return Err(NnError::InvalidLayer(format!("dropout probability {p}")));
                }
                Layer::Dropout(p)
            }
            LayerSpec::MaxPool => Layer::MaxPool,
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv(c) => LayerSpec::Conv {
                in_ch: c.in_ch,
                out_ch: c.out_ch,
                kernel: c.kernel,
            },
            Layer::TransposedConv(c) => LayerSpec::TransposedConv {
                in_ch: c.in_ch,
                out_ch: c.out_ch,
                kernel: c.kernel,
                stride: c.stride,
            },
            Layer::Relu => LayerSpec::Relu,
            Layer::Sigmoid => LayerSpec::Sigmoid,
            Layer::Dropout(p) => LayerSpec::Dropout(*p),
            Layer::MaxPool => LayerSpec::MaxPool,
        }
    }
}

/// What each layer keeps from the forward pass for its backward pass.
#[derive(Clone, Debug)]
enum Cache {
    Input(Tensor),
    Output(Tensor),
    Mask(Option<Vec<f64>>),
    Pool { dims: [usize; 3], argmax: Vec<usize> },
}

/// A chain of layers with cached activations.
#[derive(Clone, Debug)]
pub struct Sequential {
    layers: Vec<Layer>,
    cache: Vec<Cache>,
}

impl PartialEq for Sequential {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Sequential {
    pub fn new(specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        let layers = specs
            .iter()
            .map(|s| Layer::build(s, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            cache: Vec::new(),
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// Forward pass that records everything `backward` needs.
    pub fn forward(&mut self, x: &Tensor, mode: Mode, rng: &mut impl Rng) -> Result<Tensor> {
        self.cache.clear();
        let mut h = x.clone();
        for layer in &self.layers {
            let (next, cache) = match layer {
                Layer::Conv(c) => (conv1d(&h, c)?, Cache::Input(h)),
                Layer::TransposedConv(c) => (transposed_conv1d(&h, c)?, Cache::Input(h)),
                Layer::Relu => (relu(&h), Cache::Input(h)),
                Layer::Sigmoid => {
                    let y = sigmoid(&h);
                    (y.clone(), Cache::Output(y))
                }
                Layer::Dropout(p) => {
                    let (y, mask) = dropout(&h, *p, mode, rng);
                    (y, Cache::Mask(mask))
                }
                Layer::MaxPool => {
                    let out = maxpool1d(&h)?;
                    (
                        out.output,
                        Cache::Pool {
                            dims: h.dims(),
                            argmax: out.argmax,
                        },
                    )
                }
            };
            self.cache.push(cache);
            h = next;
        }
        Ok(h)
    }

    /// Evaluation-mode forward pass without caching.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Conv(c) => conv1d(&h, c)?,
                Layer::TransposedConv(c) => transposed_conv1d(&h, c)?,
                Layer::Relu => relu(&h),
                Layer::Sigmoid => sigmoid(&h),
                Layer::Dropout(_) => h,
                Layer::MaxPool => maxpool1d(&h)?.output,
            };
        }
        Ok(h)
    }

    /// Backpropagates `dy` through the cached forward pass, accumulating
    /// parameter gradients, and returns the gradient with respect to the input.
    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        if self.cache.len() != self.layers.len() {
            return Err(NnError::MissingCache);
        }
        let mut g = dy.clone();
        for (layer, cache) in self.layers.iter_mut().zip(&self.cache).rev() {
            g = match (layer, cache) {
                (Layer::Conv(c), Cache::Input(x)) => {
                    let grads = conv1d_grad(x, c, &g)?;
                    accumulate(&mut c.weight, &grads.dw);
                    accumulate(&mut c.bias, &grads.db);
                    grads.dx
                }
                (Layer::TransposedConv(c), Cache::Input(x)) => {
                    let grads = transposed_conv1d_grad(x, c, &g)?;
                    accumulate(&mut c.weight, &grads.dw);
                    accumulate(&mut c.bias, &grads.db);
                    grads.dx
                }
                (Layer::Relu, Cache::Input(x)) => relu_grad(x, &g)?,
                (Layer::Sigmoid, Cache::Output(y)) => sigmoid_grad(y, &g)?,
                (Layer::Dropout(_), Cache::Mask(mask)) => dropout_grad(mask.as_deref(), &g),
                (Layer::MaxPool, Cache::Pool { dims, argmax }) => maxpool1d_grad(*dims, argmax, &g)?,
                _ => return Err(NnError::MissingCache),
            };
        }
        Ok(g)
    }

    /// Hash of the piecewise-linear regime of the last forward pass: which
    /// ReLU inputs were positive and which max-pool inputs won. Finite
    /// differences are only meaningful when this is unchanged.
    pub fn kink_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (layer, cache) in self.layers.iter().zip(&self.cache) {
            match (layer, cache) {
                (Layer::MaxPool, Cache::Pool { argmax, .. }) => argmax.hash(&mut h),
                (Layer::Relu, Cache::Input(x)) => {
                    for chunk in x.data().chunks(64) {
                        let bits = chunk
                            .iter()
                            .enumerate()
                            .fold(0u64, |acc, (i, &v)| acc | (u64::from(v > 0.0) << i));
                        bits.hash(&mut h);
                    }
                }
                _ => {}
            }
        }
        h.finish()
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&c.weight, &c.bias]),
                Layer::TransposedConv(c) => out.extend([&c.weight, &c.bias]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&mut c.weight, &mut c.bias]),
                Layer::TransposedConv(c) => out.extend([&mut c.weight, &mut c.bias]),
                _ => {}
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    /// Order-sensitive digest of every parameter bit pattern.
    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in self.params() {
            p.shape.hash(&mut h);
            for v in &p.value {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Copies flat parameter values in `params()` order.
    pub fn load_params(&mut self, blocks: &[Vec<f64>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != blocks.len() {
            return Err(NnError::ParamMismatch {
                expected: params.len(),
                found: blocks.len(),
            });
        }
        for (p, b) in params.iter_mut().zip(blocks) {
            if p.len() != b.len() {
                return Err(NnError::ParamMismatch {
                    expected: p.len(),
                    found: b.len(),
                });
            }
            p.value.copy_from_slice(b);
        }
        Ok(())
    }
}

fn accumulate(p: &mut Param, g: &[f64]) {
    for (a, b) in p.grad.iter_mut().zip(g) {
        *a += b;
    }
}
