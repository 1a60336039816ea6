use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssp_nn::{grad_check, l1_penalty_grad, GradCheckReport, LossKind, Mode, Tensor};

use super::chain::{chain_loss, ChainObjective};
use super::checkpoint::Checkpoint;
use crate::error::{CoreError, Result};

/// Standardized, masked network input and its target.
#[derive(Clone, Debug)]
pub struct Batch {
    pub x: Tensor,
    pub y: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SHUFFLE: u64 = 2;
pub(crate) const STREAM_DROPOUT: u64 = 3;
pub(crate) const STREAM_SOURCES: u64 = 4;

pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Minibatch AmsGrad on the chain's trainable stages.
///
/// `make_batch` receives sample indices in `0..n_samples`. The loss history
/// of the checkpoint receives the first batch's loss before training, then
/// each epoch's mean data loss.
pub fn train_chain(
    ckpt: &mut Checkpoint,
    n_samples: usize,
    mut make_batch: impl FnMut(&[usize]) -> Result<Batch>,
    loss: LossKind,
) -> Result<TrainReport> {
    let cfg = ckpt.config.clone();
    cfg.validate()?;
    if n_samples == 0 {
        return Err(CoreError::invalid("training set", "no clips"));
    }
    let lambda = cfg.lambda();
    let mut shuffle = rng(cfg.seed, STREAM_SHUFFLE);
    let mut drop_rng = rng(cfg.seed, STREAM_DROPOUT);
    let mut order: Vec<usize> = (0..n_samples).collect();

    let first: Vec<usize> = order.iter().copied().take(cfg.batch).collect();
    let b0 = make_batch(&first)?;
    let out = ckpt.chain.infer(&b0.x)?;
    let initial = match loss {
        LossKind::Bce => ssp_nn::bce_loss(&out, &b0.y)?.value,
        LossKind::Mse => ssp_nn::mse_loss(&out, &b0.y)?.value,
    };
    ckpt.history = vec![initial];

    let max_steps = cfg.max_steps.unwrap_or(usize::MAX);
    let planned = (cfg.epochs.saturating_mul(n_samples.div_ceil(cfg.batch))).min(max_steps).max(1);
    let mut steps = 0;
    let mut last = initial;
    'outer: for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let (mut sum, mut count) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch) {
            if steps >= max_steps {
                break;
            }
            if let Some(f) = cfg.lr_final {
                let w = 0.5 * (1.0 + (std::f64::consts::PI * steps as f64 / planned as f64).cos());
                ckpt.optimizer.config.lr = f + (cfg.lr - f) * w;
            }
            let b = make_batch(idx)?;
            ckpt.chain.zero_grad();
            let (data, _, dy) = chain_loss(&mut ckpt.chain, &b.x, &b.y, loss, lambda, Mode::Train, &mut drop_rng)?;
            if !data.is_finite() {
                return Err(CoreError::invalid("training", format!("loss became {data} at step {steps}")));
            }
            ckpt.chain.backward(&dy)?;
            l1_penalty_grad(ckpt.chain.trainable_params_mut(), lambda);
            ckpt.optimizer.step(ckpt.chain.trainable_params_mut())?;
            sum += data;
            count += 1;
            steps += 1;
        }
        if count > 0 {
            last = sum / count as f64;
            ckpt.history.push(last);
        }
        if steps >= max_steps {
            break 'outer;
        }
    }
    Ok(TrainReport {
        steps,
        initial_loss: initial,
        final_loss: last,
    })
}

/// Finite-difference check of a checkpoint's trainable parameters on one
/// batch, in training mode with a fixed dropout mask.
pub fn grad_check_task(
    ckpt: &mut Checkpoint,
    batch: &Batch,
    loss: LossKind,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let lambda = ckpt.config.lambda();
    let mut obj = ChainObjective {
        chain: &mut ckpt.chain,
        input: batch.x.clone(),
        target: batch.y.clone(),
        loss,
        lambda_l1: lambda,
        mode: Mode::Train,
        dropout_seed: seed,
    };
    Ok(grad_check(&mut obj, tolerance, seed)?)
}
