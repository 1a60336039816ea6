//! 1-D convolution and transposed convolution lowered to GEMM via im2col.

use rand::Rng;

use crate::error::{NnError, Result};
use crate::linalg::gemm;
use crate::param::Param;
use crate::tensor::Tensor;

/// Cross-correlation layer with weights laid out `(out_ch, in_ch, kernel)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub weight: Param,
    pub bias: Param,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Transposed convolution with weights laid out `(in_ch, out_ch, kernel)`.
///
/// With `padding = (kernel - stride) / 2` the output is exactly
/// `stride × input` frames long.
#[derive(Clone, Debug, PartialEq)]
pub struct TransposedConv1d {
    pub weight: Param,
    pub bias: Param,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Gradients of a convolution with respect to its input, weights and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub dx: Tensor,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
}

impl Conv1d {
    /// Stride-1 convolution with zero "same" padding; `kernel` must be odd.
    pub fn same(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut impl Rng) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(NnError::InvalidLayer(format!(
                "same-padded conv needs an odd kernel, got {kernel}"
            )));
        }
        Self::new(in_ch, out_ch, kernel, 1, (kernel - 1) / 2, rng)
    }

    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0 {
            return Err(NnError::InvalidLayer(format!(
                "conv1d({in_ch}->{out_ch}, k={kernel}, s={stride}) has a zero dimension"
            )));
        }
        Ok(Self {
            weight: Param::uniform_fan(
                &[out_ch, in_ch, kernel],
                in_ch * kernel,
                out_ch * kernel,
                rng,
            ),
            bias: Param::zeros(&[out_ch], false),
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
        })
    }

    pub fn output_len(&self, time: usize) -> Result<usize> {
        let padded = time + 2 * self.padding;
        if padded < self.kernel {
            return Err(NnError::TooShort(time));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }
}

impl TransposedConv1d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || stride == 0 || kernel < stride {
            return Err(NnError::InvalidLayer(format!(
                "transposed conv1d({in_ch}->{out_ch}, k={kernel}, s={stride}) is degenerate"
            )));
        }
        if !(kernel - stride).is_multiple_of(2) {
            return Err(NnError::InvalidLayer(format!(
                "kernel - stride must be even to scale length exactly, got k={kernel} s={stride}"
            )));
        }
        Ok(Self {
            weight: Param::uniform_fan(
                &[in_ch, out_ch, kernel],
                in_ch * kernel,
                out_ch * kernel,
                rng,
            ),
            bias: Param::zeros(&[out_ch], false),
            in_ch,
            out_ch,
            kernel,
            stride,
            padding: (kernel - stride) / 2,
        })
    }

    pub fn output_len(&self, time: usize) -> usize {
        (time - 1) * self.stride + self.kernel - 2 * self.padding
    }
}

fn check_channels(x: &Tensor, expected: usize) -> Result<()> {
    if x.channels() != expected {
        return Err(NnError::ChannelMismatch {
            expected,
            found: x.channels(),
        });
    }
    Ok(())
}

/// Source frame for output `t`, kernel tap `k`; `None` when it falls in padding.
#[inline]
fn tap(t: usize, k: usize, stride: usize, padding: usize, len: usize) -> Option<usize> {
    let pos = (t * stride + k) as isize - padding as isize;
    (pos >= 0 && (pos as usize) < len).then_some(pos as usize)
}

/// Unfolds `x` into a `(in_ch·kernel) × (batch·t_out)` matrix.
fn im2col(x: &Tensor, kernel: usize, stride: usize, padding: usize, t_out: usize) -> Vec<f64> {
    let [batch, in_ch, t_in] = x.dims();
    let n = batch * t_out;
    let mut cols = vec![0.0; in_ch * kernel * n];
    for i in 0..in_ch {
        for k in 0..kernel {
            let row = &mut cols[(i * kernel + k) * n..(i * kernel + k + 1) * n];
            for b in 0..batch {
                let src = x.row(b, i);
                let dst = &mut row[b * t_out..(b + 1) * t_out];
                for (t, d) in dst.iter_mut().enumerate() {
                    if let Some(s) = tap(t, k, stride, padding, t_in) {
                        *d = src[s];
                    }
                }
            }
        }
    }
    cols
}

/// Folds a column matrix back, summing overlapping taps into `dx`.
fn col2im(cols: &[f64], dx: &mut Tensor, kernel: usize, stride: usize, padding: usize, t_out: usize) {
    let [batch, in_ch, t_in] = dx.dims();
    let n = batch * t_out;
    for i in 0..in_ch {
        for k in 0..kernel {
            let row = &cols[(i * kernel + k) * n..(i * kernel + k + 1) * n];
            for b in 0..batch {
                let src = &row[b * t_out..(b + 1) * t_out];
                let dst = dx.row_mut(b, i);
                for (t, &v) in src.iter().enumerate() {
                    if let Some(s) = tap(t, k, stride, padding, t_in) {
                        dst[s] += v;
                    }
                }
            }
        }
    }
}

/// `(B, C, T)` tensor to a `C × (B·T)` matrix.
fn to_channel_major(x: &Tensor) -> Vec<f64> {
    let [batch, ch, time] = x.dims();
    let n = batch * time;
    let mut out = vec![0.0; ch * n];
    for b in 0..batch {
        for c in 0..ch {
            out[c * n + b * time..c * n + (b + 1) * time].copy_from_slice(x.row(b, c));
        }
    }
    out
}

fn from_channel_major(m: &[f64], batch: usize, ch: usize, time: usize, bias: &[f64]) -> Result<Tensor> {
    let n = batch * time;
    let mut out = Tensor::zeros(batch, ch, time)?;
    for b in 0..batch {
        for c in 0..ch {
            let src = &m[c * n + b * time..c * n + (b + 1) * time];
            for (d, &s) in out.row_mut(b, c).iter_mut().zip(src) {
                *d = s + bias[c];
            }
        }
    }
    Ok(out)
}

pub fn conv1d(x: &Tensor, layer: &Conv1d) -> Result<Tensor> {
    check_channels(x, layer.in_ch)?;
    let batch = x.batch();
    let t_out = layer.output_len(x.time())?;
    let cols = im2col(x, layer.kernel, layer.stride, layer.padding, t_out);
    let n = batch * t_out;
    let mut y = vec![0.0; layer.out_ch * n];
    gemm(
        layer.out_ch,
        layer.in_ch * layer.kernel,
        n,
        &layer.weight.value,
        false,
        &cols,
        false,
        0.0,
        &mut y,
    );
    let out = from_channel_major(&y, batch, layer.out_ch, t_out, &layer.bias.value)?;
    out.debug_check_finite("conv1d");
    Ok(out)
}

pub fn conv1d_grad(x: &Tensor, layer: &Conv1d, dy: &Tensor) -> Result<ConvGrads> {
    check_channels(x, layer.in_ch)?;
    let batch = x.batch();
    let t_out = layer.output_len(x.time())?;
    dy.expect_dims([batch, layer.out_ch, t_out])?;
    let n = batch * t_out;
    let ik = layer.in_ch * layer.kernel;
    let cols = im2col(x, layer.kernel, layer.stride, layer.padding, t_out);
    let dy_m = to_channel_major(dy);

    let mut dw = vec![0.0; layer.out_ch * ik];
    gemm(layer.out_ch, n, ik, &dy_m, false, &cols, true, 0.0, &mut dw);

    let mut dcols = vec![0.0; ik * n];
    gemm(ik, layer.out_ch, n, &layer.weight.value, true, &dy_m, false, 0.0, &mut dcols);
    let mut dx = Tensor::zeros(batch, layer.in_ch, x.time())?;
    col2im(&dcols, &mut dx, layer.kernel, layer.stride, layer.padding, t_out);

    let db = (0..layer.out_ch)
        .map(|o| dy_m[o * n..(o + 1) * n].iter().sum())
        .collect();
    Ok(ConvGrads { dx, dw, db })
}

pub fn transposed_conv1d(x: &Tensor, layer: &TransposedConv1d) -> Result<Tensor> {
    check_channels(x, layer.in_ch)?;
    let [batch, _, t_in] = x.dims();
    let t_out = layer.output_len(t_in);
    let n = batch * t_in;
    let ok = layer.out_ch * layer.kernel;
    let x_m = to_channel_major(x);
    let mut cols = vec![0.0; ok * n];
    gemm(ok, layer.in_ch, n, &layer.weight.value, true, &x_m, false, 0.0, &mut cols);

    let mut out = Tensor::zeros(batch, layer.out_ch, t_out)?;
    for o in 0..layer.out_ch {
        for b in 0..batch {
            out.row_mut(b, o).iter_mut().for_each(|v| *v = layer.bias.value[o]);
        }
        for k in 0..layer.kernel {
            let row = &cols[(o * layer.kernel + k) * n..(o * layer.kernel + k + 1) * n];
            for b in 0..batch {
                let dst = out.row_mut(b, o);
                for (t, &v) in row[b * t_in..(b + 1) * t_in].iter().enumerate() {
                    if let Some(s) = tap(t, k, layer.stride, layer.padding, t_out) {
                        dst[s] += v;
                    }
                }
            }
        }
    }
    out.debug_check_finite("transposed_conv1d");
    Ok(out)
}

pub fn transposed_conv1d_grad(x: &Tensor, layer: &TransposedConv1d, dy: &Tensor) -> Result<ConvGrads> {
    check_channels(x, layer.in_ch)?;
    let [batch, _, t_in] = x.dims();
    let t_out = layer.output_len(t_in);
    dy.expect_dims([batch, layer.out_ch, t_out])?;
    let n = batch * t_in;
    let ok = layer.out_ch * layer.kernel;

    // dcols is exactly the strided im2col of dy.
    let dcols = im2col(dy, layer.kernel, layer.stride, layer.padding, t_in);
    let x_m = to_channel_major(x);

    let mut dx_m = vec![0.0; layer.in_ch * n];
    gemm(layer.in_ch, ok, n, &layer.weight.value, false, &dcols, false, 0.0, &mut dx_m);
    let dx = from_channel_major(&dx_m, batch, layer.in_ch, t_in, &vec![0.0; layer.in_ch])?;

    let mut dw = vec![0.0; layer.in_ch * ok];
    gemm(layer.in_ch, n, ok, &x_m, false, &dcols, true, 0.0, &mut dw);

    let db = (0..layer.out_ch)
        .map(|o| (0..batch).map(|b| dy.row(b, o).iter().sum::<f64>()).sum())
        .collect();
    Ok(ConvGrads { dx, dw, db })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut layer = Conv1d::same(1, 1, 1, &mut rng()).unwrap();
        layer.weight.value = vec![1.0];
        let x = Tensor::from_vec(1, 1, 4, vec![1.0, -2.0, 3.5, 0.25]).unwrap();
        assert_eq!(conv1d(&x, &layer).unwrap(), x);
    }

    #[test]
    fn same_padding_preserves_length() {
        let layer = Conv1d::same(3, 5, 5, &mut rng()).unwrap();
        let x = Tensor::zeros(2, 3, 9).unwrap();
        assert_eq!(conv1d(&x, &layer).unwrap().dims(), [2, 5, 9]);
    }

    #[test]
    fn even_kernel_rejected_for_same_padding() {
        assert!(Conv1d::same(1, 1, 4, &mut rng()).is_err());
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let layer = Conv1d::same(3, 2, 3, &mut rng()).unwrap();
        let x = Tensor::zeros(1, 4, 5).unwrap();
        assert_eq!(
            conv1d(&x, &layer),
            Err(NnError::ChannelMismatch {
                expected: 3,
                found: 4
            })
        );
        let t = TransposedConv1d::new(3, 2, 4, 2, &mut rng()).unwrap();
        assert!(transposed_conv1d(&x, &t).is_err());
    }

    #[test]
    fn transposed_stride2_k2_duplicates_inputs() {
        let mut layer = TransposedConv1d::new(1, 1, 2, 2, &mut rng()).unwrap();
        layer.weight.value = vec![1.0, 1.0];
        let x = Tensor::from_vec(1, 1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let y = transposed_conv1d(&x, &layer).unwrap();
        assert_eq!(y.data(), &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn transposed_k4_doubles_length() {
        let layer = TransposedConv1d::new(4, 3, 4, 2, &mut rng()).unwrap();
        let x = Tensor::zeros(2, 4, 7).unwrap();
        assert_eq!(transposed_conv1d(&x, &layer).unwrap().dims(), [2, 3, 14]);
    }

    #[test]
    fn odd_kernel_minus_stride_rejected() {
        assert!(TransposedConv1d::new(1, 1, 3, 2, &mut rng()).is_err());
    }
}
