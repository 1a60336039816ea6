use rand::Rng;

use crate::error::Result;
use crate::tensor::Tensor;

/// Training mode enables dropout; evaluation mode makes it the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Gradient of ReLU given its input. The derivative at exactly 0 is taken as 0.
pub fn relu_grad(x: &Tensor, dy: &Tensor) -> Result<Tensor> {
    x.expect_dims(dy.dims())?;
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
    Ok(dx)
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

#[inline]
fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Gradient of the sigmoid given its output `y`.
pub fn sigmoid_grad(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    y.expect_dims(dy.dims())?;
    let mut dx = dy.clone();
    for (d, &s) in dx.data_mut().iter_mut().zip(y.data()) {
        *d *= s * (1.0 - s);
    }
    Ok(dx)
}

/// Inverted dropout. Returns the output and the per-element scale that was
/// applied (0 or `1/(1-p)`), which is all the backward pass needs.
pub fn dropout(x: &Tensor, p: f64, mode: Mode, rng: &mut impl Rng) -> (Tensor, Option<Vec<f64>>) {
    if mode == Mode::Eval || p <= 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect();
    let mut y = x.clone();
    for (v, m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    (y, Some(mask))
}

pub fn dropout_grad(mask: Option<&[f64]>, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    if let Some(mask) = mask {
        for (d, m) in dx.data_mut().iter_mut().zip(mask) {
            *d *= m;
        }
    }
    dx
}
