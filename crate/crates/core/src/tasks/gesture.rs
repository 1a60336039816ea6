//! Body gestures: a motion autoencoder and two regressors into its latent
//! space whose decoder is reused frozen.

use ssp_nn::{AmsGrad, AmsGradConfig, LossKind, Sequential, Tensor};

use super::chain::{Chain, Stage};
use super::checkpoint::Checkpoint;
use super::features::{covered_rows, person_tensor, stack_batch};
use super::formation;
use super::train::{rng, train_chain, Batch, TrainReport, STREAM_INIT};
use super::{decoder_specs, encoder_specs, regressor_specs, Task, TrainConfig};
use crate::dataio::Standardizer;
use crate::error::{CoreError, Result};
use crate::geometry::{global_to_deltas, heading};
use crate::model::{BodyMotion, BodyPart, Clip, FormationState, Joint, PersonTrack, Role, BODY_DIM};

pub const TRAJ_DIM: usize = 3;
pub const PAIR_DIM: usize = 2 * BODY_DIM;

fn optimizer(cfg: &TrainConfig, chain: &Chain) -> AmsGrad {
    AmsGrad::new(
        AmsGradConfig {
            lr: cfg.lr,
            ..AmsGradConfig::default()
        },
        chain.trainable_params(),
    )
}

fn body_rows(track: &PersonTrack) -> Vec<Vec<f64>> {
    track.body().iter().map(|b| b.values().to_vec()).collect()
}

fn standardized(st: &Standardizer, rows: &[Vec<f64>]) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| st.apply_row(r)).collect();
    person_tensor(&rows)
}

/// Restricts a standardizer to a channel range.
fn sub_standardizer(st: &Standardizer, range: std::ops::Range<usize>) -> Standardizer {
    Standardizer {
        mean: st.mean[range.clone()].to_vec(),
        std: st.std[range].to_vec(),
        epsilon: st.epsilon,
    }
}

fn concat_standardizer(a: &Standardizer, b: &Standardizer) -> Standardizer {
    Standardizer {
        mean: [a.mean.as_slice(), b.mean.as_slice()].concat(),
        std: [a.std.as_slice(), b.std.as_slice()].concat(),
        epsilon: a.epsilon,
    }
}

fn body_st(ckpt: &Checkpoint) -> Result<&Standardizer> {
    ckpt.output_st
        .as_ref()
        .ok_or_else(|| CoreError::Missing("body standardizer".into()))
}

/// Builds a valid body from raw network output, clamping foot contacts.
pub fn body_from_values(mut v: [f64; BODY_DIM]) -> Result<BodyMotion> {
    for c in &mut v[BodyPart::FootContacts.range()] {
        *c = c.clamp(0.0, 1.0);
    }
    BodyMotion::new(v)
}

/// Unstandardizes a `(1, 73, T')` output and pads it to `n` frames by
/// repeating the last frame.
fn decode_rows(st: &Standardizer, y: &Tensor, n: usize) -> Vec<[f64; BODY_DIM]> {
    let mut out: Vec<[f64; BODY_DIM]> = (0..y.time())
        .map(|t| std::array::from_fn(|c| st.invert_value(c, y.get(0, c, t))))
        .collect();
    while out.len() < n {
        out.push(*out.last().expect("non-empty output"));
    }
    out.truncate(n);
    out
}

fn check_even(clips: &[Clip], what: &str) -> Result<()> {
    if clips.is_empty() {
        return Err(CoreError::invalid("training set", format!("{what}: no clips")));
    }
    if clips.iter().any(|c| c.length % 2 != 0) {
        return Err(CoreError::invalid("training set", format!("{what}: clip length must be even")));
    }
    Ok(())
}

pub fn fit_body_standardizer(clips: &[Clip]) -> Result<Standardizer> {
    let rows = covered_rows(clips, &[Role::LeftSeller], |tr, t| tr[0].body()[t].values().to_vec())?;
    Standardizer::fit(BODY_DIM, rows.iter().map(Vec::as_slice))
}

pub fn init_motion_ae(cfg: &TrainConfig, st: Standardizer) -> Result<Checkpoint> {
    let mut r = rng(cfg.seed, STREAM_INIT);
    let chain = Chain {
        stages: vec![
            Stage {
                name: "encoder".into(),
                net: Sequential::new(&encoder_specs(), &mut r)?,
                frozen: false,
            },
            Stage {
                name: "decoder".into(),
                net: Sequential::new(&decoder_specs(), &mut r)?,
                frozen: false,
            },
        ],
    };
    Ok(Checkpoint {
        config: TrainConfig {
            task: Task::MotionAe,
            ..cfg.clone()
        },
        optimizer: optimizer(cfg, &chain),
        chain,
        input_st: st.clone(),
        output_st: Some(st),
        mask: Default::default(),
        history: Vec::new(),
    })
}

pub fn motion_ae_batch(ckpt: &Checkpoint, clips: &[Clip], idx: &[usize]) -> Result<Batch> {
    let st = body_st(ckpt)?;
    let xs = idx
        .iter()
        .map(|&i| standardized(st, &body_rows(&clips[i].target())))
        .collect::<Result<Vec<_>>>()?;
    let x = stack_batch(&xs)?;
    Ok(Batch { y: x.clone(), x })
}

pub fn train_motion_ae(clips: &[Clip], cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    check_even(clips, "motion autoencoder")?;
    let mut ckpt = init_motion_ae(cfg, fit_body_standardizer(clips)?)?;
    let snap = ckpt.clone();
    let report = train_chain(&mut ckpt, clips.len(), |idx| motion_ae_batch(&snap, clips, idx), LossKind::Mse)?;
    Ok((ckpt, report))
}

/// Latent code `(1, 256, T/2)` of a body sequence.
pub fn encode(ae: &Checkpoint, body: &[BodyMotion]) -> Result<Tensor> {
    ae.expect_task(Task::MotionAe)?;
    let rows: Vec<Vec<f64>> = body.iter().map(|b| b.values().to_vec()).collect();
    let x = standardized(body_st(ae)?, &rows)?;
    Ok(ae.chain.stage("encoder")?.net.infer(&x)?)
}

/// Decoded bodies, `2 · latent length` frames.
pub fn decode(ae: &Checkpoint, latent: &Tensor) -> Result<Vec<BodyMotion>> {
    ae.expect_task(Task::MotionAe)?;
    let y = ae.chain.stage("decoder")?.net.infer(latent)?;
    decode_rows(body_st(ae)?, &y, y.time())
        .into_iter()
        .map(body_from_values)
        .collect()
}

fn regressor_checkpoint(cfg: &TrainConfig, task: Task, ae: &Checkpoint, in_st: Standardizer) -> Result<Checkpoint> {
    ae.expect_task(Task::MotionAe)?;
    let mut decoder = ae.chain.stage("decoder")?.clone();
    decoder.frozen = true;
    let regressor = Stage {
        name: "regressor".into(),
        net: Sequential::new(&regressor_specs(in_st.dim()), &mut rng(cfg.seed, STREAM_INIT))?,
        frozen: false,
    };
    let chain = Chain {
        stages: vec![regressor, decoder],
    };
    Ok(Checkpoint {
        config: TrainConfig { task, ..cfg.clone() },
        optimizer: optimizer(cfg, &chain),
        chain,
        input_st: in_st,
        output_st: Some(body_st(ae)?.clone()),
        mask: Default::default(),
        history: Vec::new(),
    })
}

pub fn init_traj2body(cfg: &TrainConfig, ae: &Checkpoint) -> Result<Checkpoint> {
    let st = sub_standardizer(body_st(ae)?, BodyPart::RootVelocity.range());
    regressor_checkpoint(cfg, Task::Traj2body, ae, st)
}

pub fn init_body2body(cfg: &TrainConfig, ae: &Checkpoint) -> Result<Checkpoint> {
    let st = body_st(ae)?;
    regressor_checkpoint(cfg, Task::Body2body, ae, concat_standardizer(st, st))
}

/// Root-velocity rows of a body sequence: the regressor's training input.
pub fn trajectory_rows(body: &[BodyMotion]) -> Vec<Vec<f64>> {
    body.iter()
        .map(|b| b.slice(BodyPart::RootVelocity).to_vec())
        .collect()
}

fn target_tensor(ckpt: &Checkpoint, clip: &Clip) -> Result<Tensor> {
    standardized(body_st(ckpt)?, &body_rows(&clip.target()))
}

fn pair_rows(a: &PersonTrack, b: &PersonTrack) -> Vec<Vec<f64>> {
    (0..a.len())
        .map(|t| [a.body()[t].values().as_slice(), b.body()[t].values().as_slice()].concat())
        .collect()
}

pub fn traj2body_batch(ckpt: &Checkpoint, clips: &[Clip], idx: &[usize]) -> Result<Batch> {
    let mut xs = Vec::with_capacity(idx.len());
    let mut ys = Vec::with_capacity(idx.len());
    for &i in idx {
        xs.push(standardized(&ckpt.input_st, &trajectory_rows(clips[i].target().body()))?);
        ys.push(target_tensor(ckpt, &clips[i])?);
    }
    Ok(Batch {
        x: stack_batch(&xs)?,
        y: stack_batch(&ys)?,
    })
}

pub fn body2body_batch(ckpt: &Checkpoint, clips: &[Clip], idx: &[usize]) -> Result<Batch> {
    let mut xs = Vec::with_capacity(idx.len());
    let mut ys = Vec::with_capacity(idx.len());
    for &i in idx {
        let c = &clips[i];
        xs.push(standardized(&ckpt.input_st, &pair_rows(&c.partner1(), &c.partner2()))?);
        ys.push(target_tensor(ckpt, c)?);
    }
    Ok(Batch {
        x: stack_batch(&xs)?,
        y: stack_batch(&ys)?,
    })
}

pub fn train_traj2body(clips: &[Clip], ae: &Checkpoint, cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    check_even(clips, "traj2body")?;
    let mut ckpt = init_traj2body(cfg, ae)?;
    let snap = ckpt.clone();
    let report = train_chain(&mut ckpt, clips.len(), |idx| traj2body_batch(&snap, clips, idx), LossKind::Mse)?;
    Ok((ckpt, report))
}

pub fn train_body2body(clips: &[Clip], ae: &Checkpoint, cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    check_even(clips, "body2body")?;
    let mut ckpt = init_body2body(cfg, ae)?;
    let snap = ckpt.clone();
    let report = train_chain(&mut ckpt, clips.len(), |idx| body2body_batch(&snap, clips, idx), LossKind::Mse)?;
    Ok((ckpt, report))
}

pub fn decoder_checksum(ckpt: &Checkpoint) -> Result<u64> {
    Ok(ckpt.chain.stage("decoder")?.net.checksum())
}

fn run_regressor(ckpt: &Checkpoint, rows: &[Vec<f64>]) -> Result<Vec<[f64; BODY_DIM]>> {
    if rows.len() < 2 {
        return Err(CoreError::invalid("body prediction", "need at least 2 frames"));
    }
    let y = ckpt.chain.infer(&standardized(&ckpt.input_st, rows)?)?;
    Ok(decode_rows(body_st(ckpt)?, &y, rows.len()))
}

/// Bodies following a global trajectory. The root channels of the output
/// are replaced by the trajectory itself.
pub fn infer_body_from_trajectory(
    traj: &Checkpoint,
    positions: &[[f64; 2]],
    headings: &[f64],
) -> Result<Vec<BodyMotion>> {
    traj.expect_task(Task::Traj2body)?;
    let deltas = global_to_deltas(positions, headings);
    let rows: Vec<Vec<f64>> = deltas.iter().map(|d| d.to_vec()).collect();
    let raw = run_regressor(traj, &rows)?;
    raw.into_iter()
        .enumerate()
        .map(|(t, mut v)| {
            let rp = BodyPart::RootProjection.range().start;
            v[rp..rp + 3].copy_from_slice(&[positions[t][0], 0.0, positions[t][1]]);
            let rv = BodyPart::RootVelocity.range().start;
            v[rv..rv + 3].copy_from_slice(&deltas[t]);
            body_from_values(v)
        })
        .collect()
}

/// Target bodies from the partners' formation alone: formation prediction,
/// conversion to per-frame deltas anchored at the first predicted frame,
/// then latent regression and decoding.
pub fn infer_body_from_formation(form: &Checkpoint, traj: &Checkpoint, clip: &Clip) -> Result<Vec<BodyMotion>> {
    let states = formation::predict_clip(form, clip)?;
    let positions: Vec<[f64; 2]> = states.iter().map(FormationState::position).collect();
    let headings: Vec<f64> = states.iter().map(|s| heading(s.body_orient())).collect();
    infer_body_from_trajectory(traj, &positions, &headings)
}

/// Target bodies from both partners' bodies.
pub fn infer_body_from_partners(b2b: &Checkpoint, clip: &Clip) -> Result<Vec<BodyMotion>> {
    b2b.expect_task(Task::Body2body)?;
    run_regressor(b2b, &pair_rows(&clip.partner1(), &clip.partner2()))?
        .into_iter()
        .map(body_from_values)
        .collect()
}

/// Root, foot contacts and lower-body joints from `path`; upper-body joints
/// from `body`.
pub fn hybrid_merge(path: &[BodyMotion], body: &[BodyMotion]) -> Result<Vec<BodyMotion>> {
    if path.len() != body.len() {
        return Err(CoreError::invalid(
            "hybrid_merge",
            format!("lengths differ: {} vs {}", path.len(), body.len()),
        ));
    }
    path.iter()
        .zip(body)
        .map(|(p, b)| {
            let mut v = *p.values();
            for j in Joint::ALL.into_iter().filter(|j| !j.is_lower_body()) {
                v[j.channels()].copy_from_slice(&b.values()[j.channels()]);
            }
            BodyMotion::new(v)
        })
        .collect()
}
