//! Per-frame speaking status from one person's body and face.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use ssp_nn::{AmsGrad, AmsGradConfig, LossKind, Tensor};

use super::chain::Chain;
use super::checkpoint::Checkpoint;
use super::features::{covered_rows, person_tensor, stack_batch};
use super::train::{rng, train_chain, Batch, TrainReport, STREAM_INIT, STREAM_SOURCES};
use super::{speaking_specs, Task, TrainConfig};
use crate::dataio::{mask_channels, person_rows, Standardizer};
use crate::error::{CoreError, Result};
use crate::model::{Clip, PersonTrack, Role, BODY_DIM, FACE_DIM};

pub const INPUT_DIM: usize = BODY_DIM + FACE_DIM;
pub const BODY_CHANNELS: Range<usize> = 0..BODY_DIM;
pub const FACE_CHANNELS: Range<usize> = BODY_DIM..BODY_DIM + FACE_DIM;
pub const THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpeakingInput {
    SelfFace,
    SelfBody,
    SelfFaceBody,
    OtherFace,
    OtherBody,
    OtherFaceBody,
    /// Face and body of the other seller of an unrelated scene.
    RandomPerson,
}

/// Whose signals feed the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Target,
    OtherSeller,
    Unrelated,
}

impl SpeakingInput {
    pub const ALL: [SpeakingInput; 7] = [
        SpeakingInput::SelfFace,
        SpeakingInput::SelfBody,
        SpeakingInput::SelfFaceBody,
        SpeakingInput::OtherFace,
        SpeakingInput::OtherBody,
        SpeakingInput::OtherFaceBody,
        SpeakingInput::RandomPerson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpeakingInput::SelfFace => "self-face",
            SpeakingInput::SelfBody => "self-body",
            SpeakingInput::SelfFaceBody => "self-face-body",
            SpeakingInput::OtherFace => "other-face",
            SpeakingInput::OtherBody => "other-body",
            SpeakingInput::OtherFaceBody => "other-face-body",
            SpeakingInput::RandomPerson => "random-person",
        }
    }

    pub fn source(self) -> Source {
        match self {
            SpeakingInput::SelfFace | SpeakingInput::SelfBody | SpeakingInput::SelfFaceBody => Source::Target,
            SpeakingInput::OtherFace | SpeakingInput::OtherBody | SpeakingInput::OtherFaceBody => Source::OtherSeller,
            SpeakingInput::RandomPerson => Source::Unrelated,
        }
    }

    /// Channels masked at train and test time.
    pub fn mask(self) -> BTreeSet<usize> {
        match self {
            SpeakingInput::SelfFace | SpeakingInput::OtherFace => BODY_CHANNELS.collect(),
            SpeakingInput::SelfBody | SpeakingInput::OtherBody => FACE_CHANNELS.collect(),
            _ => BTreeSet::new(),
        }
    }
}

impl fmt::Display for SpeakingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpeakingInput {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        SpeakingInput::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| CoreError::Config(format!("unknown speaking input {s:?}")))
    }
}

/// For every clip, the index of a clip from a different scene whose other
/// seller serves as the unrelated person.
pub fn unrelated_sources(clips: &[Clip], seed: u64) -> Result<Vec<usize>> {
    let mut r = rng(seed, STREAM_SOURCES);
    let first = clips.first().map(Clip::scene_id);
    if clips.iter().all(|c| Some(c.scene_id()) == first) {
        return Err(CoreError::invalid("random-person input", "needs clips from at least two scenes"));
    }
    Ok(clips
        .iter()
        .map(|c| loop {
            let j = r.random_range(0..clips.len());
            if clips[j].scene_id() != c.scene_id() {
                break j;
            }
        })
        .collect())
}

/// The person whose signals are fed for clip `i`.
pub fn source_track(input: SpeakingInput, clips: &[Clip], i: usize, unrelated: &[usize]) -> PersonTrack {
    match input.source() {
        Source::Target => clips[i].target(),
        Source::OtherSeller => clips[i].partner2(),
        Source::Unrelated => clips[unrelated[i]].partner2(),
    }
}

/// Standardized, masked `(1, 78, T)` input for one person.
pub fn input_tensor(st: &Standardizer, mask: &BTreeSet<usize>, person: &PersonTrack) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = person_rows(person, true).iter().map(|r| st.apply_row(r)).collect();
    mask_channels(&person_tensor(&rows)?, mask, st)
}

fn target_tensor(person: &PersonTrack) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = person
        .speaking()
        .iter()
        .map(|s| vec![f64::from(s.value())])
        .collect();
    person_tensor(&rows)
}

/// Seller face/body statistics over the frames covered by `clips`.
pub fn fit_standardizer(clips: &[Clip]) -> Result<Standardizer> {
    let rows = covered_rows(clips, &[Role::LeftSeller, Role::RightSeller], |tracks, t| {
        let mut v = Vec::with_capacity(2 * INPUT_DIM);
        for tr in tracks {
            v.extend_from_slice(tr.body()[t].values());
            v.extend_from_slice(tr.face()[t].coeffs());
        }
        v
    })?;
    let split: Vec<&[f64]> = rows.iter().flat_map(|r| r.chunks(INPUT_DIM)).collect();
    Standardizer::fit(INPUT_DIM, split)
}

pub fn init(cfg: &TrainConfig, st: Standardizer) -> Result<Checkpoint> {
    let input: SpeakingInput = cfg.input_spec.parse()?;
    let chain = Chain::single("speaking", &speaking_specs(cfg.dropout()), &mut rng(cfg.seed, STREAM_INIT))?;
    let optimizer = AmsGrad::new(
        AmsGradConfig {
            lr: cfg.lr,
            ..AmsGradConfig::default()
        },
        chain.trainable_params(),
    );
    Ok(Checkpoint {
        config: TrainConfig {
            task: Task::Speaking,
            ..cfg.clone()
        },
        chain,
        optimizer,
        input_st: st,
        output_st: None,
        mask: input.mask(),
        history: Vec::new(),
    })
}

/// Training batch for the given clip indices.
pub fn batch(ckpt: &Checkpoint, clips: &[Clip], unrelated: &[usize], idx: &[usize]) -> Result<Batch> {
    let input: SpeakingInput = ckpt.config.input_spec.parse()?;
    let mut xs = Vec::with_capacity(idx.len());
    let mut ys = Vec::with_capacity(idx.len());
    for &i in idx {
        xs.push(input_tensor(&ckpt.input_st, &ckpt.mask, &source_track(input, clips, i, unrelated))?);
        ys.push(target_tensor(&clips[i].target())?);
    }
    Ok(Batch {
        x: stack_batch(&xs)?,
        y: stack_batch(&ys)?,
    })
}

pub fn train(clips: &[Clip], cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    if clips.is_empty() {
        return Err(CoreError::invalid("train_speaking", "no training clips"));
    }
    let input: SpeakingInput = cfg.input_spec.parse()?;
    let unrelated = if input == SpeakingInput::RandomPerson {
        unrelated_sources(clips, cfg.seed)?
    } else {
        Vec::new()
    };
    let mut ckpt = init(cfg, fit_standardizer(clips)?)?;
    let snapshot = ckpt.clone();
    let report = train_chain(
        &mut ckpt,
        clips.len(),
        |idx| batch(&snapshot, clips, &unrelated, idx),
        LossKind::Bce,
    )?;
    Ok((ckpt, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakingPrediction {
    pub prob: Vec<f64>,
    pub label: Vec<bool>,
}

/// Predicts from `person`'s signals with the checkpoint's mask plus `extra`
/// channels masked. Any length is accepted.
pub fn predict_masked(ckpt: &Checkpoint, person: &PersonTrack, extra: &BTreeSet<usize>) -> Result<SpeakingPrediction> {
    ckpt.expect_task(Task::Speaking)?;
    let mask: BTreeSet<usize> = ckpt.mask.union(extra).copied().collect();
    let x = input_tensor(&ckpt.input_st, &mask, person)?;
    let prob = ckpt.chain.infer(&x)?.into_data();
    let label = prob.iter().map(|&p| p >= THRESHOLD).collect();
    Ok(SpeakingPrediction { prob, label })
}

pub fn predict(ckpt: &Checkpoint, person: &PersonTrack) -> Result<SpeakingPrediction> {
    predict_masked(ckpt, person, &BTreeSet::new())
}

/// Prediction for a clip using the source named by the checkpoint's input
/// spec. The unrelated-person input needs an explicit source; use [`predict`].
pub fn predict_clip(ckpt: &Checkpoint, clip: &Clip) -> Result<SpeakingPrediction> {
    let input: SpeakingInput = ckpt.config.input_spec.parse()?;
    match input.source() {
        Source::Target => predict(ckpt, &clip.target()),
        Source::OtherSeller => predict(ckpt, &clip.partner2()),
        Source::Unrelated => Err(CoreError::Config(
            "random-person checkpoints need an explicit source track".into(),
        )),
    }
}
