//! Metrics, test-time ablations and proxemic analyses. Every metric pools
//! over frames.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::geometry::{distance, heading, Frame2};
use crate::model::{
    BodyMotion, BodyPart, Clip, FormationState, Joint, Role, Scene, SpeakingLabel, BODY_DIM, FORMATION_DIM,
};
use crate::tasks::covered_rows;
use crate::tasks::formation;
use crate::tasks::speaking::{self, SpeakingInput};
use crate::tasks::{Checkpoint, Task};

/// Orientation vectors shorter than this score the worst-case 180°.
pub const ORIENT_FLOOR: f64 = 1e-6;
pub const HEATMAP_BIN: f64 = 10.0;
pub const HEATMAP_EXTENT: f64 = 300.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Population mean and standard deviation. An empty input gives zeros.
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

fn same_len(what: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(CoreError::invalid(what, format!("lengths differ: {a} vs {b}")));
    }
    if a == 0 {
        return Err(CoreError::invalid(what, "empty sequences"));
    }
    Ok(())
}

pub fn speaking_accuracy(pred: &[bool], truth: &[SpeakingLabel]) -> Result<f64> {
    same_len("speaking_accuracy", pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| **p == t.is_speaking()).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Percentage of frames in which at most one of the two people speaks.
pub fn turn_taking_measure(s0: &[SpeakingLabel], s1: &[SpeakingLabel]) -> Result<f64> {
    same_len("turn_taking_measure", s0.len(), s1.len())?;
    let ok = s0
        .iter()
        .zip(s1)
        .filter(|(a, b)| a.value() + b.value() < 2)
        .count();
    Ok(ok as f64 / s0.len() as f64 * 100.0)
}

/// Angle in degrees between a predicted and a true orientation, both
/// renormalized first. Computed as `atan2(|cross|, dot)`, which equals the
/// arccos of the normalized dot product but keeps full precision near 0°
/// and 180°.
pub fn orientation_error_deg(pred: [f64; 2], truth: [f64; 2]) -> f64 {
    let np = pred[0].hypot(pred[1]);
    let nt = truth[0].hypot(truth[1]);
    if !(np >= ORIENT_FLOOR && nt >= ORIENT_FLOOR && np.is_finite()) {
        return 180.0;
    }
    let (p, g) = ([pred[0] / np, pred[1] / np], [truth[0] / nt, truth[1] / nt]);
    let dot = p[0] * g[0] + p[1] * g[1];
    let cross = p[0] * g[1] - p[1] * g[0];
    cross.abs().atan2(dot).to_degrees()
}

/// Per-frame formation errors: position in cm, orientations in degrees.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameErrors {
    pub position: Vec<f64>,
    pub body: Vec<f64>,
    pub face: Vec<f64>,
}

impl FrameErrors {
    pub fn extend(&mut self, other: &FrameErrors) {
        self.position.extend_from_slice(&other.position);
        self.body.extend_from_slice(&other.body);
        self.face.extend_from_slice(&other.face);
    }

    pub fn summary(&self) -> FormationErrors {
        FormationErrors {
            position: Stat::of(&self.position),
            body: Stat::of(&self.body),
            face: Stat::of(&self.face),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FormationErrors {
    pub position: Stat,
    pub body: Stat,
    pub face: Stat,
}

pub fn formation_frame_errors(pred: &[[f64; FORMATION_DIM]], truth: &[[f64; FORMATION_DIM]]) -> Result<FrameErrors> {
    same_len("formation_errors", pred.len(), truth.len())?;
    let mut e = FrameErrors::default();
    for (p, g) in pred.iter().zip(truth) {
        e.position.push(distance([p[0], p[1]], [g[0], g[1]]));
        e.body.push(orientation_error_deg([p[2], p[3]], [g[2], g[3]]));
        e.face.push(orientation_error_deg([p[4], p[5]], [g[4], g[5]]));
    }
    Ok(e)
}

pub fn formation_errors(pred: &[[f64; FORMATION_DIM]], truth: &[[f64; FORMATION_DIM]]) -> Result<FormationErrors> {
    Ok(formation_frame_errors(pred, truth)?.summary())
}

/// Mean and std of per-frame 3-D joint distances over all joints and frames.
pub fn joint_distances(pred: &[BodyMotion], truth: &[BodyMotion]) -> Result<Vec<f64>> {
    same_len("joint_error", pred.len(), truth.len())?;
    let mut d = Vec::with_capacity(pred.len() * Joint::ALL.len());
    for (p, g) in pred.iter().zip(truth) {
        for j in Joint::ALL {
            let (a, b) = (p.joint(j), g.joint(j));
            d.push(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt());
        }
    }
    Ok(d)
}

pub fn joint_error(pred: &[BodyMotion], truth: &[BodyMotion]) -> Result<Stat> {
    Ok(Stat::of(&joint_distances(pred, truth)?))
}

/// Per-coordinate mean of the target body over every covered training frame.
pub fn mean_pose_baseline(train: &[Clip]) -> Result<BodyMotion> {
    let rows = covered_rows(train, &[Role::LeftSeller], |tr, t| tr[0].body()[t].values().to_vec())?;
    if rows.is_empty() {
        return Err(CoreError::invalid("mean_pose_baseline", "no training frames"));
    }
    let mut mean = [0.0; BODY_DIM];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    for c in &mut mean[BodyPart::FootContacts.range()] {
        *c = c.clamp(0.0, 1.0);
    }
    BodyMotion::new(mean)
}

/// Joint error of a constant pose against every frame of the clips' targets.
pub fn baseline_error(pose: &BodyMotion, clips: &[Clip]) -> Result<Stat> {
    let mut d = Vec::new();
    for c in clips {
        let truth = c.target();
        let pred = vec![*pose; truth.len()];
        d.extend(joint_distances(&pred, truth.body())?);
    }
    Ok(Stat::of(&d))
}

/// Pooled speaking accuracy of a checkpoint on clips with `extra` channels
/// masked. `seed` picks unrelated partners for the random-person input.
pub fn speaking_eval(ckpt: &Checkpoint, clips: &[Clip], extra: &BTreeSet<usize>, seed: u64) -> Result<f64> {
    ckpt.expect_task(Task::Speaking)?;
    let input: SpeakingInput = ckpt.config.input_spec.parse()?;
    let unrelated = if input == SpeakingInput::RandomPerson {
        speaking::unrelated_sources(clips, seed)?
    } else {
        Vec::new()
    };
    let (mut hits, mut total) = (0usize, 0usize);
    for i in 0..clips.len() {
        let p = speaking::predict_masked(ckpt, &speaking::source_track(input, clips, i, &unrelated), extra)?;
        let truth = clips[i].target();
        let acc = speaking_accuracy(&p.label, truth.speaking())?;
        hits += (acc * truth.len() as f64).round() as usize;
        total += truth.len();
    }
    if total == 0 {
        return Err(CoreError::invalid("speaking_eval", "no test clips"));
    }
    Ok(hits as f64 / total as f64)
}

/// Formation errors pooled over frames plus the std of per-clip means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormationReport {
    pub pooled: FormationErrors,
    pub per_sequence: FormationErrors,
}

pub fn formation_eval(ckpt: &Checkpoint, clips: &[Clip]) -> Result<FormationReport> {
    let mut all = FrameErrors::default();
    let mut means = FrameErrors::default();
    for c in clips {
        let pred: Vec<[f64; 6]> = formation::predict_clip(ckpt, c)?.iter().map(FormationState::to_vec6).collect();
        let truth: Vec<[f64; 6]> = c.target().formation().iter().map(FormationState::to_vec6).collect();
        let e = formation_frame_errors(&pred, &truth)?;
        let s = e.summary();
        means.position.push(s.position.mean);
        means.body.push(s.body.mean);
        means.face.push(s.face.mean);
        all.extend(&e);
    }
    if clips.is_empty() {
        return Err(CoreError::invalid("formation_eval", "no test clips"));
    }
    Ok(FormationReport {
        pooled: all.summary(),
        per_sequence: means.summary(),
    })
}

/// Named set of input channels masked together at test time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelGroup {
    pub name: String,
    pub channels: BTreeSet<usize>,
}

/// Groups of the 78-channel speaking input: every face coefficient, every
/// joint, root projection, root velocity and foot contacts.
pub fn speaking_groups() -> Vec<ChannelGroup> {
    let mut g: Vec<ChannelGroup> = (0..crate::model::FACE_DIM)
        .map(|k| ChannelGroup {
            name: format!("face{k}"),
            channels: [speaking::FACE_CHANNELS.start + k].into(),
        })
        .collect();
    g.extend(Joint::ALL.into_iter().map(|j| ChannelGroup {
        name: j.name().to_string(),
        channels: j.channels().collect(),
    }));
    for (name, part) in [
        ("root_projection", BodyPart::RootProjection),
        ("root_velocity", BodyPart::RootVelocity),
        ("foot_contacts", BodyPart::FootContacts),
    ] {
        g.push(ChannelGroup {
            name: name.into(),
            channels: part.range().collect(),
        });
    }
    g
}

/// The whole face and the whole body as two groups.
pub fn modality_groups() -> Vec<ChannelGroup> {
    vec![
        ChannelGroup {
            name: "face".into(),
            channels: speaking::FACE_CHANNELS.collect(),
        },
        ChannelGroup {
            name: "body".into(),
            channels: speaking::BODY_CHANNELS.collect(),
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub group: String,
    pub accuracy: f64,
    /// Original minus masked accuracy, in accuracy units (not points).
    pub drop: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ablation {
    pub baseline: f64,
    pub rows: Vec<AblationRow>,
}

/// Test-time masking of each group in turn. No retraining.
pub fn ablation_sweep(ckpt: &Checkpoint, clips: &[Clip], groups: &[ChannelGroup], seed: u64) -> Result<Ablation> {
    let baseline = speaking_eval(ckpt, clips, &BTreeSet::new(), seed)?;
    let rows = groups
        .iter()
        .map(|g| {
            let accuracy = speaking_eval(ckpt, clips, &g.channels, seed)?;
            Ok(AblationRow {
                group: g.name.clone(),
                accuracy,
                drop: baseline - accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ablation { baseline, rows })
}

pub const PAIRS: [(&str, Role, Role); 3] = [
    ("B-RS", Role::Buyer, Role::RightSeller),
    ("B-LS", Role::Buyer, Role::LeftSeller),
    ("LS-RS", Role::LeftSeller, Role::RightSeller),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProxemicsRow {
    pub pair: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub frames: usize,
    /// Standard error of the mean from per-scene means, which are closer to
    /// independent than frames.
    pub se: f64,
}

pub fn proxemics_stats(scenes: &[Scene]) -> Result<Vec<ProxemicsRow>> {
    if scenes.iter().all(Scene::is_empty) {
        return Err(CoreError::invalid("proxemics_stats", "no frames"));
    }
    PAIRS
        .iter()
        .map(|&(name, a, b)| {
            let mut all = Vec::new();
            let mut scene_means = Vec::new();
            for s in scenes.iter().filter(|s| !s.is_empty()) {
                let (ta, tb) = (s.track(a), s.track(b));
                let d: Vec<f64> = (0..s.len())
                    .map(|t| distance(ta.formation()[t].position(), tb.formation()[t].position()))
                    .collect();
                scene_means.push(d.iter().sum::<f64>() / d.len() as f64);
                all.extend(d);
            }
            let st = Stat::of(&all);
            let k = scene_means.len();
            let se = if k > 1 {
                let m = scene_means.iter().sum::<f64>() / k as f64;
                let var = scene_means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1) as f64;
                (var / k as f64).sqrt()
            } else {
                f64::NAN
            };
            Ok(ProxemicsRow {
                pair: name.into(),
                mean: st.mean,
                std: st.std,
                min: all.iter().copied().fold(f64::INFINITY, f64::min),
                max: all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                frames: all.len(),
                se,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SceneTriangle {
    pub scene: String,
    /// Mean buyer-centric positions of buyer, left seller, right seller.
    pub points: [[f64; 2]; 3],
}

/// Seller positions in buyer-centric coordinates. `counts[row][col]` with
/// rows along z and columns along x, both from `-extent`. Positions beyond
/// the extent land in the border bins so the grid mass is conserved.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Heatmap {
    pub bin: f64,
    pub extent: f64,
    pub counts: Vec<Vec<u64>>,
    pub triangles: Vec<SceneTriangle>,
}

impl Heatmap {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn mass(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("z\\x");
        let n = self.bins();
        for c in 0..n {
            let _ = write!(s, ",{}", -self.extent + (c as f64 + 0.5) * self.bin);
        }
        s.push('\n');
        for (r, row) in self.counts.iter().enumerate() {
            let _ = write!(s, "{}", -self.extent + (r as f64 + 0.5) * self.bin);
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Buyer-centric frame of one frame: buyer at the origin facing +z.
pub fn buyer_frame(buyer: &FormationState) -> Frame2 {
    Frame2 {
        origin: buyer.position(),
        heading: heading(buyer.body_orient()),
    }
}

pub fn buyer_centric_heatmap(scenes: &[Scene], bin: f64, extent: f64) -> Result<Heatmap> {
    if !(bin > 0.0 && extent > 0.0 && bin.is_finite() && extent.is_finite()) {
        return Err(CoreError::invalid("heatmap", format!("bin {bin} and extent {extent} must be positive")));
    }
    let n = (2.0 * extent / bin).ceil() as usize;
    let cell = |v: f64| (((v + extent) / bin).floor().max(0.0) as usize).min(n - 1);
    let mut counts = vec![vec![0u64; n]; n];
    let mut triangles = Vec::with_capacity(scenes.len());
    for s in scenes.iter().filter(|s| !s.is_empty()) {
        let mut sum = [[0.0; 2]; 3];
        for t in 0..s.len() {
            let frame = buyer_frame(&s.track(Role::Buyer).formation()[t]);
            for role in Role::ALL {
                let p = frame.apply(s.track(role).formation()[t].position());
                sum[role.index()][0] += p[0];
                sum[role.index()][1] += p[1];
                if role != Role::Buyer {
                    counts[cell(p[1])][cell(p[0])] += 1;
                }
            }
        }
        let k = s.len() as f64;
        triangles.push(SceneTriangle {
            scene: s.id.clone(),
            points: sum.map(|p| [p[0] / k, p[1] / k]),
        });
    }
    Ok(Heatmap {
        bin,
        extent,
        counts,
        triangles,
    })
}

/// Rows of named numeric columns, written as CSV or JSON with shortest
/// round-trip number formatting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl MetricTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, condition: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(CoreError::invalid(
                "metric row",
                format!("{} values for {} columns", values.len(), self.columns.len()),
            ));
        }
        self.rows.push((condition.into(), values));
        Ok(())
    }

    pub fn get(&self, condition: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.0 == condition).map(|r| r.1[c])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("condition");
        for c in &self.columns {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for (name, vals) in &self.rows {
            s.push_str(name);
            for v in vals {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|(name, vals)| {
                let mut m = serde_json::Map::new();
                m.insert("condition".into(), name.clone().into());
                for (c, v) in self.columns.iter().zip(vals) {
                    m.insert(c.clone(), serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, Into::into));
                }
                serde_json::Value::Object(m)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&serde_json::json!({ "rows": rows })).expect("serializable");
        s.push('\n');
        s
    }
}

/// Non-overlapping evaluation windows covering each scene.
pub fn eval_clips(scenes: &[Arc<Scene>], window: usize) -> Result<Vec<Clip>> {
    let mut out = Vec::new();
    for s in scenes {
        out.extend(crate::dataio::window_clips(s, window, window)?);
    }
    Ok(out)
}
