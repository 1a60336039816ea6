use rand::Rng;

/// A trainable parameter block with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub shape: Vec<usize>,
    /// Whether the l1 penalty applies (weights yes, biases no).
    pub regularized: bool,
}

impl Param {
    pub fn zeros(shape: &[usize], regularized: bool) -> Self {
        let n = shape.iter().product();
        Self {
            value: vec![0.0; n],
            grad: vec![0.0; n],
            shape: shape.to_vec(),
            regularized,
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn uniform_fan(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(shape, true);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut p.value {
            *v = rng.random_range(-bound..bound);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}
