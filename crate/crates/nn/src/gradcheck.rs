//! Central-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::Mode;
use crate::error::Result;
use crate::loss::{bce_loss, l1_penalty, l1_penalty_grad, mse_loss};
use crate::sequential::{LayerSpec, Sequential};
use crate::tensor::Tensor;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Lower bound on the number of coordinates probed (all, if fewer exist).
pub const MIN_COORDS: usize = 200;
/// Gradients smaller than this are compared in absolute rather than relative terms.
const REL_FLOOR: f64 = 1e-6;

/// Loss value at the current parameters plus the piecewise-linear regime it was
/// evaluated in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub loss: f64,
    pub signature: u64,
}

/// A scalar function of a flat parameter vector with an analytic gradient.
pub trait Objective {
    fn num_params(&self) -> usize;
    fn param(&self, index: usize) -> f64;
    fn set_param(&mut self, index: usize, value: f64);
    fn probe(&mut self) -> Result<Probe>;
    fn gradient(&mut self) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Coordinates skipped because the perturbation crossed a ReLU kink or
    /// changed a max-pool winner.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks at least [`MIN_COORDS`] random coordinates with step [`FD_STEP`].
pub fn grad_check(obj: &mut dyn Objective, tolerance: f64, seed: u64) -> Result<GradCheckReport> {
    grad_check_with(obj, tolerance, MIN_COORDS, FD_STEP, seed)
}

pub fn grad_check_with(
    obj: &mut dyn Objective,
    tolerance: f64,
    coords: usize,
    step: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let n = obj.num_params();
    let analytic = obj.gradient()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = sample(&mut rng, n, coords.min(n)).into_vec();
    indices.sort_unstable();

    let mut report = GradCheckReport {
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
        worst_index: None,
        tolerance,
        passed: false,
    };
    let base = obj.probe()?;
    for i in indices {
        let w = obj.param(i);
        obj.set_param(i, w + step);
        let plus = obj.probe()?;
        obj.set_param(i, w - step);
        let minus = obj.probe()?;
        obj.set_param(i, w);
        if plus.signature != base.signature || minus.signature != base.signature {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        report.checked += 1;
        if rel > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst_index = Some(i);
        }
    }
    report.passed = report.checked > 0 && report.max_rel_error < tolerance;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Bce,
    Mse,
}

/// A [`Sequential`] evaluated on a fixed batch, optionally in training mode
/// with a dropout mask that is re-drawn from the same seed on every call.
pub struct SequentialObjective<'a> {
    pub net: &'a mut Sequential,
    pub input: Tensor,
    pub target: Tensor,
    pub loss: LossKind,
    pub lambda_l1: f64,
    pub mode: Mode,
    pub dropout_seed: u64,
}

impl SequentialObjective<'_> {
    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (b, p) in self.net.params().iter().enumerate() {
            if index < p.len() {
                return (b, index);
            }
            index -= p.len();
        }
        panic!("parameter index out of range");
    }

    fn forward_loss(&mut self) -> Result<(f64, Tensor)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.dropout_seed);
        let y = self.net.forward(&self.input, self.mode, &mut rng)?;
        let l = match self.loss {
            LossKind::Bce => bce_loss(&y, &self.target)?,
            LossKind::Mse => mse_loss(&y, &self.target)?,
        };
        Ok((l.value + l1_penalty(self.net.params(), self.lambda_l1), l.grad))
    }
}

impl Objective for SequentialObjective<'_> {
    fn num_params(&self) -> usize {
        self.net.num_params()
    }

    fn param(&self, index: usize) -> f64 {
        let (b, i) = self.locate(index);
        self.net.params()[b].value[i]
    }

    fn set_param(&mut self, index: usize, value: f64) {
        let (b, i) = self.locate(index);
        self.net.params_mut()[b].value[i] = value;
    }

    fn probe(&mut self) -> Result<Probe> {
        let (loss, _) = self.forward_loss()?;
        Ok(Probe {
            loss,
            signature: self.net.kink_signature(),
        })
    }

    fn gradient(&mut self) -> Result<Vec<f64>> {
        self.net.zero_grad();
        let (_, dy) = self.forward_loss()?;
        self.net.backward(&dy)?;
        l1_penalty_grad(self.net.params_mut(), self.lambda_l1);
        Ok(self.net.params().iter().flat_map(|p| p.grad.iter().copied()).collect())
    }
}


/// Gradient checks of every layer type, each behind a convolution so the
/// parameter-free layers are exercised through their input gradient.
pub fn layer_suite(tolerance: f64, seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    use crate::sequential::LayerSpec::*;
    let conv = |out_ch| Conv { in_ch: 3, out_ch, kernel: 3 };
    let cases: [(&'static str, Vec<LayerSpec>, LossKind, f64, Mode); 7] = [
        ("conv1d", vec![conv(4)], LossKind::Mse, 0.0, Mode::Eval),
        (
            "transposed_conv1d",
            vec![TransposedConv { in_ch: 3, out_ch: 2, kernel: 4, stride: 2 }],
            LossKind::Mse,
            0.0,
            Mode::Eval,
        ),
        ("relu", vec![conv(4), Relu], LossKind::Mse, 0.0, Mode::Eval),
        ("sigmoid_bce", vec![conv(1), Sigmoid], LossKind::Bce, 0.0, Mode::Eval),
        ("dropout", vec![conv(4), Dropout(0.25)], LossKind::Mse, 0.0, Mode::Train),
        ("maxpool", vec![conv(4), MaxPool], LossKind::Mse, 0.0, Mode::Eval),
        ("l1_penalty", vec![conv(4)], LossKind::Mse, 0.1, Mode::Eval),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cases.len());
    for (k, (name, specs, loss, lambda_l1, mode)) in cases.into_iter().enumerate() {
        let mut net = Sequential::new(&specs, &mut rng)?;
        let input = Tensor::from_fn(2, 3, 8, |_, _, _| rng.random_range(-1.0..1.0))?;
        let [b, c, t] = net.infer(&input)?.dims();
        let target = Tensor::from_fn(b, c, t, |_, _, _| match loss {
            LossKind::Bce => f64::from(rng.random::<bool>()),
            LossKind::Mse => rng.random_range(-1.0..1.0),
        })?;
        let mut obj = SequentialObjective {
            net: &mut net,
            input,
            target,
            loss,
            lambda_l1,
            mode,
            dropout_seed: seed.wrapping_add(k as u64),
        };
        out.push((name, grad_check(&mut obj, tolerance, seed.wrapping_add(k as u64))?));
    }
    Ok(out)
}
