//! The left seller's position and orientations from the buyer's and the
//! right seller's.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ssp_nn::{AmsGrad, AmsGradConfig, LossKind, Tensor};

use super::chain::Chain;
use super::checkpoint::Checkpoint;
use super::features::{covered_rows, person_tensor, stack_batch};
use super::train::{rng, train_chain, Batch, TrainReport, STREAM_INIT};
use super::{formation_specs, Task, TrainConfig};
use crate::dataio::{mask_channels, Standardizer};
use crate::error::{CoreError, Result};
use crate::model::{Clip, FormationState, PersonTrack, Role, FORMATION_DIM};

pub const INPUT_DIM: usize = 2 * FORMATION_DIM;
pub const POSITION_CHANNELS: [usize; 4] = [0, 1, 6, 7];
pub const BODY_ORIENT_CHANNELS: [usize; 4] = [2, 3, 8, 9];
pub const FACE_ORIENT_CHANNELS: [usize; 4] = [4, 5, 10, 11];
/// Predicted orientations shorter than this hold the previous frame's.
pub const NORM_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FormationInput {
    PosOnly,
    PosFace,
    PosBody,
    Full,
}

impl FormationInput {
    pub const ALL: [FormationInput; 4] = [
        FormationInput::PosOnly,
        FormationInput::PosFace,
        FormationInput::PosBody,
        FormationInput::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormationInput::PosOnly => "pos-only",
            FormationInput::PosFace => "pos-face",
            FormationInput::PosBody => "pos-body",
            FormationInput::Full => "full",
        }
    }

    pub fn mask(self) -> BTreeSet<usize> {
        let groups: &[[usize; 4]] = match self {
            FormationInput::PosOnly => &[BODY_ORIENT_CHANNELS, FACE_ORIENT_CHANNELS],
            FormationInput::PosFace => &[BODY_ORIENT_CHANNELS],
            FormationInput::PosBody => &[FACE_ORIENT_CHANNELS],
            FormationInput::Full => &[],
        };
        groups.iter().flatten().copied().collect()
    }
}

impl fmt::Display for FormationInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormationInput {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        FormationInput::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| CoreError::Config(format!("unknown formation input {s:?}")))
    }
}

fn input_rows(buyer: &PersonTrack, other: &PersonTrack) -> Result<Vec<Vec<f64>>> {
    if buyer.len() != other.len() {
        return Err(CoreError::invalid("formation input", "partner tracks differ in length"));
    }
    Ok((0..buyer.len())
        .map(|t| {
            let mut r = buyer.formation()[t].to_vec6().to_vec();
            r.extend_from_slice(&other.formation()[t].to_vec6());
            r
        })
        .collect())
}

/// Standardized, masked `(1, 12, T)` input: buyer then right seller.
pub fn input_tensor(ckpt: &Checkpoint, buyer: &PersonTrack, other: &PersonTrack) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = input_rows(buyer, other)?
        .iter()
        .map(|r| ckpt.input_st.apply_row(r))
        .collect();
    mask_channels(&person_tensor(&rows)?, &ckpt.mask, &ckpt.input_st)
}

fn output_st(ckpt: &Checkpoint) -> Result<&Standardizer> {
    ckpt.output_st
        .as_ref()
        .ok_or_else(|| CoreError::Missing("formation output standardizer".into()))
}

pub fn init(cfg: &TrainConfig, input_st: Standardizer, output_st: Standardizer) -> Result<Checkpoint> {
    let input: FormationInput = cfg.input_spec.parse()?;
    let chain = Chain::single("formation", &formation_specs(cfg.dropout()), &mut rng(cfg.seed, STREAM_INIT))?;
    let optimizer = AmsGrad::new(
        AmsGradConfig {
            lr: cfg.lr,
            ..AmsGradConfig::default()
        },
        chain.trainable_params(),
    );
    Ok(Checkpoint {
        config: TrainConfig {
            task: Task::Formation,
            ..cfg.clone()
        },
        chain,
        optimizer,
        input_st,
        output_st: Some(output_st),
        mask: input.mask(),
        history: Vec::new(),
    })
}

pub fn fit_standardizers(clips: &[Clip]) -> Result<(Standardizer, Standardizer)> {
    let inp = covered_rows(clips, &[Role::Buyer, Role::RightSeller], |tr, t| {
        let mut r = tr[0].formation()[t].to_vec6().to_vec();
        r.extend_from_slice(&tr[1].formation()[t].to_vec6());
        r
    })?;
    let out = covered_rows(clips, &[Role::LeftSeller], |tr, t| tr[0].formation()[t].to_vec6().to_vec())?;
    Ok((
        Standardizer::fit(INPUT_DIM, inp.iter().map(Vec::as_slice))?,
        Standardizer::fit(FORMATION_DIM, out.iter().map(Vec::as_slice))?,
    ))
}

pub fn batch(ckpt: &Checkpoint, clips: &[Clip], idx: &[usize]) -> Result<Batch> {
    let out_st = output_st(ckpt)?;
    let mut xs = Vec::with_capacity(idx.len());
    let mut ys = Vec::with_capacity(idx.len());
    for &i in idx {
        let c = &clips[i];
        xs.push(input_tensor(ckpt, &c.partner1(), &c.partner2())?);
        let rows: Vec<Vec<f64>> = c
            .target()
            .formation()
            .iter()
            .map(|s| out_st.apply_row(&s.to_vec6()))
            .collect();
        ys.push(person_tensor(&rows)?);
    }
    Ok(Batch {
        x: stack_batch(&xs)?,
        y: stack_batch(&ys)?,
    })
}

pub fn train(clips: &[Clip], cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    if clips.is_empty() {
        return Err(CoreError::invalid("train_formation", "no training clips"));
    }
    if clips.iter().any(|c| c.length % 2 != 0) {
        return Err(CoreError::invalid("train_formation", "clip length must be even"));
    }
    let (ist, ost) = fit_standardizers(clips)?;
    let mut ckpt = init(cfg, ist, ost)?;
    let snapshot = ckpt.clone();
    let report = train_chain(&mut ckpt, clips.len(), |idx| batch(&snapshot, clips, idx), LossKind::Mse)?;
    Ok((ckpt, report))
}

/// Raw 6-d predictions in cm and unnormalized orientation units. An odd
/// final frame, dropped by pooling, repeats the previous prediction.
pub fn predict_raw(ckpt: &Checkpoint, buyer: &PersonTrack, other: &PersonTrack) -> Result<Vec<[f64; 6]>> {
    ckpt.expect_task(Task::Formation)?;
    let n = buyer.len();
    if n < 2 {
        return Err(CoreError::invalid("predict_formation", "need at least 2 frames"));
    }
    let y = ckpt.chain.infer(&input_tensor(ckpt, buyer, other)?)?;
    let st = output_st(ckpt)?;
    let mut out: Vec<[f64; 6]> = (0..y.time())
        .map(|t| std::array::from_fn(|c| st.invert_value(c, y.get(0, c, t))))
        .collect();
    while out.len() < n {
        out.push(*out.last().expect("non-empty"));
    }
    Ok(out)
}

/// Renormalizes orientation columns; vectors below the norm floor hold the
/// previous frame's orientation (or +z on the first frame).
pub fn to_states(raw: &[[f64; 6]]) -> Result<Vec<FormationState>> {
    let mut prev = ([0.0, 1.0], [0.0, 1.0]);
    raw.iter()
        .map(|v| {
            let fix = |o: [f64; 2], last: [f64; 2]| {
                let n = o[0].hypot(o[1]);
                if n.is_finite() && n >= NORM_FLOOR {
                    [o[0] / n, o[1] / n]
                } else {
                    last
                }
            };
            let b = fix([v[2], v[3]], prev.0);
            let f = fix([v[4], v[5]], prev.1);
            prev = (b, f);
            FormationState::new_normalized([v[0], v[1]], b, f)
        })
        .collect()
}

pub fn predict(ckpt: &Checkpoint, buyer: &PersonTrack, other: &PersonTrack) -> Result<Vec<FormationState>> {
    to_states(&predict_raw(ckpt, buyer, other)?)
}

pub fn predict_clip(ckpt: &Checkpoint, clip: &Clip) -> Result<Vec<FormationState>> {
    predict(ckpt, &clip.partner1(), &clip.partner2())
}
