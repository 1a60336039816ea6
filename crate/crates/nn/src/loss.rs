use crate::error::Result;
use crate::param::Param;
use crate::tensor::Tensor;

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

/// A scalar loss and its gradient with respect to the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Loss {
    pub value: f64,
    pub grad: Tensor,
}

/// Binary cross entropy averaged over every element.
pub fn bce_loss(p: &Tensor, s: &Tensor) -> Result<Loss> {
    p.expect_dims(s.dims())?;
    let n = p.len() as f64;
    let mut value = 0.0;
    let mut grad = p.clone();
    for ((g, &pv), &sv) in grad.data_mut().iter_mut().zip(p.data()).zip(s.data()) {
        let q = pv.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        value -= sv * q.ln() + (1.0 - sv) * (1.0 - q).ln();
        *g = if pv == q {
            (q - sv) / (q * (1.0 - q)) / n
        } else {
            0.0
        };
    }
    Ok(Loss {
        value: value / n,
        grad,
    })
}

/// Mean squared error averaged over every element.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<Loss> {
    pred.expect_dims(target.dims())?;
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = pred.clone();
    for ((g, &a), &b) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = a - b;
        value += d * d;
        *g = 2.0 * d / n;
    }
    Ok(Loss {
        value: value / n,
        grad,
    })
}

/// `λ · Σ|w|` over the regularized parameters.
pub fn l1_penalty<'a>(params: impl IntoIterator<Item = &'a Param>, lambda: f64) -> f64 {
    lambda
        * params
            .into_iter()
            .filter(|p| p.regularized)
            .flat_map(|p| p.value.iter())
            .map(|v| v.abs())
            .sum::<f64>()
}

/// Adds `λ · sign(w)` to the gradients of the regularized parameters.
pub fn l1_penalty_grad<'a>(params: impl IntoIterator<Item = &'a mut Param>, lambda: f64) {
    for p in params.into_iter().filter(|p| p.regularized) {
        for (g, &v) in p.grad.iter_mut().zip(&p.value) {
            if v != 0.0 {
                *g += lambda * v.signum();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(1, 1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn bce_of_confident_correct_prediction_is_near_zero() {
        let l = bce_loss(&t(&[1.0 - 1e-7]), &t(&[1.0])).unwrap();
        assert!(l.value.abs() < 1e-6);
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let l = bce_loss(&t(&[0.5, 0.5]), &t(&[1.0, 0.0])).unwrap();
        assert!((l.value - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_clamps_exact_zero_and_one() {
        let l = bce_loss(&t(&[0.0, 1.0]), &t(&[1.0, 0.0])).unwrap();
        assert!(l.value.is_finite());
        assert!(l.grad.is_finite());
    }

    #[test]
    fn mse_of_identical_is_zero() {
        let y = t(&[1.0, -2.0, 3.0]);
        let l = mse_loss(&y, &y).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn l1_penalty_example() {
        let mut w = Param::zeros(&[2], true);
        w.value = vec![-2.0, 3.0];
        let mut b = Param::zeros(&[1], false);
        b.value = vec![100.0];
        assert!((l1_penalty([&w, &b], 0.1) - 0.5).abs() < 1e-15);
        l1_penalty_grad([&mut w, &mut b], 0.1);
        assert_eq!(w.grad, vec![-0.1, 0.1]);
        assert_eq!(b.grad, vec![0.0]);
    }
}
