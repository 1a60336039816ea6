use crate::error::{NnError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct MaxPoolOutput {
    pub output: Tensor,
    /// Flat input index of the winner for every output element.
    pub argmax: Vec<usize>,
}

/// Max pooling with window 2 and stride 2. An odd trailing frame is dropped.
pub fn maxpool1d(x: &Tensor) -> Result<MaxPoolOutput> {
    let [batch, ch, time] = x.dims();
    let t_out = time / 2;
    if t_out == 0 {
        return Err(NnError::TooShort(time));
    }
    let mut output = Tensor::zeros(batch, ch, t_out)?;
    let mut argmax = Vec::with_capacity(batch * ch * t_out);
    for b in 0..batch {
        for c in 0..ch {
            let base = x.index(b, c, 0);
            let src = x.row(b, c);
            let dst = output.row_mut(b, c);
            for (t, d) in dst.iter_mut().enumerate() {
                // ties go to the earlier frame
                let (i, v) = if src[2 * t + 1] > src[2 * t] {
                    (2 * t + 1, src[2 * t + 1])
                } else {
                    (2 * t, src[2 * t])
                };
                *d = v;
                argmax.push(base + i);
            }
        }
    }
    Ok(MaxPoolOutput { output, argmax })
}

pub fn maxpool1d_grad(input_dims: [usize; 3], argmax: &[usize], dy: &Tensor) -> Result<Tensor> {
    if argmax.len() != dy.len() {
        return Err(NnError::StorageLength {
            dims: dy.dims(),
            len: argmax.len(),
        });
    }
    let [b, c, t] = input_dims;
    let mut dx = Tensor::zeros(b, c, t)?;
    let dxd = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(dy.data()) {
        dxd[i] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_pairwise_maxima() {
        let x = Tensor::from_vec(1, 1, 4, vec![1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(maxpool1d(&x).unwrap().output.data(), &[3.0, 5.0]);
    }

    #[test]
    fn odd_length_drops_last_frame() {
        let x = Tensor::from_vec(1, 1, 3, vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(maxpool1d(&x).unwrap().output.data(), &[3.0]);
    }

    #[test]
    fn single_frame_is_too_short() {
        let x = Tensor::zeros(1, 1, 1).unwrap();
        assert_eq!(maxpool1d(&x), Err(NnError::TooShort(1)));
    }

    #[test]
    fn gradient_routes_to_winner() {
        let x = Tensor::from_vec(1, 2, 4, vec![1.0, 3.0, 2.0, 5.0, 9.0, 0.0, -1.0, -2.0]).unwrap();
        let p = maxpool1d(&x).unwrap();
        let dy = Tensor::from_vec(1, 2, 2, vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        let dx = maxpool1d_grad(x.dims(), &p.argmax, &dy).unwrap();
        assert_eq!(dx.data(), &[0.0, 10.0, 0.0, 20.0, 30.0, 0.0, 40.0, 0.0]);
    }
}
