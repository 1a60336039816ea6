//! Deterministic haggling-like triadic scenes with planted correlations.
//!
//! Every random stream is derived from `SynthConfig::seed`, so a scene is a
//! pure function of its config.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{global_to_deltas, heading, normalize, orient_from_heading};
use crate::model::{
    BodyMotion, BodyPart, FaceMotion, FormationState, Joint, PersonTrack, Role, Scene, SpeakingLabel, BODY_DIM,
    DEFAULT_FPS, FACE_DIM, NUM_JOINTS,
};

/// Rate of the mean-reverting walks, per frame.
pub const OU_RATE: f64 = 0.05;
pub const TURN_MIN: usize = 45;
pub const TURN_MAX: usize = 135;
pub const OVERLAP_MEAN: f64 = 30.0;
pub const GAP_PROB: f64 = 0.4;
pub const GAP_MEAN: f64 = 15.0;
/// Frames over which sellers walk to a new formation.
pub const REFORM_RAMP: usize = 30;
/// Smoothed root speed (cm/frame) above which the gait cycle runs.
pub const GAIT_SPEED_THRESHOLD: f64 = 0.5;
pub const GAIT_PERIOD: f64 = 30.0;
pub const GESTURE_PERIOD: f64 = 20.0;
const MAX_TRIANGLE_TRIES: usize = 100;

const MEAN_POSE_TEXT: &str = include_str!("../data/mean_pose.txt");

/// Truncated-normal description of one pairwise distance (cm). `mean` and
/// `std` are the moments of the truncated distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceParams {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl DistanceParams {
    pub const BUYER_RIGHT: DistanceParams = DistanceParams {
        mean: 148.11,
        std: 27.26,
        min: 99.03,
        max: 265.52,
    };
    pub const BUYER_LEFT: DistanceParams = DistanceParams {
        mean: 151.45,
        std: 29.62,
        min: 104.24,
        max: 284.85,
    };
    pub const LEFT_RIGHT: DistanceParams = DistanceParams {
        mean: 124.13,
        std: 24.05,
        min: 77.70,
        max: 206.26,
    };

    fn validate(&self, name: &str) -> Result<()> {
        let ok = [self.mean, self.std, self.min, self.max].iter().all(|v| v.is_finite())
            && self.std >= 0.0
            && self.min > 0.0
            && self.min <= self.mean
            && self.mean <= self.max;
        if ok {
            Ok(())
        } else {
            Err(CoreError::Config(format!(
                "distance {name}: need 0 < min <= mean <= max and std >= 0, got {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub duration_frames: usize,
    pub fps: u32,
    /// Probability that a seller turn boundary has no overlap.
    pub turn_taking: f64,
    /// Probability that the buyer fills an inter-turn gap.
    pub buyer_gap_prob: f64,
    pub mouth_gain: f64,
    pub face_noise_sigma: f64,
    pub noise_pos_sigma: f64,
    pub noise_orient_sigma: f64,
    pub gesture_amp: f64,
    /// Probability that a speaking segment is accompanied by gestures.
    pub gesture_speaking_prob: f64,
    /// Per-frame probability of starting a gesture bout while silent.
    pub gesture_silent_rate: f64,
    /// Frames between formation redraws; 0 keeps one formation per scene.
    pub reform_every: usize,
    pub buyer_right: DistanceParams,
    pub buyer_left: DistanceParams,
    pub left_right: DistanceParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_frames: 1800,
            fps: DEFAULT_FPS,
            turn_taking: 0.8,
            buyer_gap_prob: 0.8,
            mouth_gain: 1.0,
            face_noise_sigma: 0.3,
            noise_pos_sigma: 2.0,
            noise_orient_sigma: 0.05,
            gesture_amp: 12.0,
            gesture_speaking_prob: 0.7,
            gesture_silent_rate: 1.0 / 200.0,
            reform_every: 300,
            buyer_right: DistanceParams::BUYER_RIGHT,
            buyer_left: DistanceParams::BUYER_LEFT,
            left_right: DistanceParams::LEFT_RIGHT,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("turn_taking", self.turn_taking),
            ("buyer_gap_prob", self.buyer_gap_prob),
            ("gesture_speaking_prob", self.gesture_speaking_prob),
            ("gesture_silent_rate", self.gesture_silent_rate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(CoreError::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        let nonneg = [
            ("mouth_gain", self.mouth_gain),
            ("face_noise_sigma", self.face_noise_sigma),
            ("noise_pos_sigma", self.noise_pos_sigma),
            ("noise_orient_sigma", self.noise_orient_sigma),
            ("gesture_amp", self.gesture_amp),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CoreError::Config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.fps == 0 {
            return Err(CoreError::Config("fps must be positive".into()));
        }
        self.buyer_right.validate("buyer_right")?;
        self.buyer_left.validate("buyer_left")?;
        self.left_right.validate("left_right")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CoreError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Config of the `index`-th scene of a batch.
    pub fn for_scene(&self, index: usize) -> Self {
        Self {
            seed: self.seed.wrapping_add(index as u64),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy)]
enum Stream {
    Speaking = 1,
    Formation = 2,
    Face = 3,
    Gesture = 4,
}

fn rng_for(cfg: &SynthConfig, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream as u64);
    rng
}

/// Neutral standing pose, 21 joints × (x, y, z).
pub fn mean_pose() -> [[f64; 3]; NUM_JOINTS] {
    let mut pose = [[0.0; 3]; NUM_JOINTS];
    let mut seen = [false; NUM_JOINTS];
    for line in MEAN_POSE_TEXT.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let j = Joint::ALL
            .iter()
            .find(|j| j.name() == toks[0])
            .unwrap_or_else(|| panic!("unknown joint {} in mean pose", toks[0]));
        for (k, t) in toks[1..4].iter().enumerate() {
            pose[j.index()][k] = t.parse().expect("numeric mean pose");
        }
        seen[j.index()] = true;
    }
    assert!(seen.iter().all(|&s| s), "mean pose must list every joint");
    pose
}

/// Moments of N(mu, sigma) truncated to [a, b], by Simpson quadrature.
fn truncated_moments(mu: f64, sigma: f64, a: f64, b: f64) -> (f64, f64) {
    const N: usize = 2000;
    let h = (b - a) / N as f64;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..=N {
        let x = a + h * i as f64;
        let w = if i == 0 || i == N {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let p = w * (-0.5 * ((x - mu) / sigma).powi(2)).exp();
        z += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    let mean = m1 / z;
    (mean, (m2 / z - mean * mean).max(0.0).sqrt())
}

/// Sampler whose truncated distribution has the requested mean and std.
#[derive(Clone, Copy, Debug)]
struct TruncNormal {
    loc: f64,
    scale: f64,
    min: f64,
    max: f64,
}

impl TruncNormal {
    fn fit(p: &DistanceParams) -> Result<Self> {
        if p.std == 0.0 || p.min == p.max {
            return Ok(Self {
                loc: p.mean,
                scale: 0.0,
                min: p.min,
                max: p.max,
            });
        }
        let (mut loc, mut scale) = (p.mean, p.std);
        for _ in 0..500 {
            let (m, s) = truncated_moments(loc, scale, p.min, p.max);
            let (dm, ratio) = (p.mean - m, p.std / s);
            loc += dm;
            scale *= ratio;
            if !(loc.is_finite() && scale.is_finite()) || scale > 1e6 {
                break;
            }
            if dm.abs() < 1e-10 && (ratio - 1.0).abs() < 1e-12 {
                return Ok(Self {
                    loc,
                    scale,
                    min: p.min,
                    max: p.max,
                });
            }
        }
        Err(CoreError::Config(format!(
            "no truncated normal on [{}, {}] has mean {} and std {}",
            p.min, p.max, p.mean, p.std
        )))
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.scale == 0.0 {
            return self.loc;
        }
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let x = self.loc + self.scale * z;
            if (self.min..=self.max).contains(&x) {
                return x;
            }
        }
    }
}

/// Buyer at the origin; sellers placed so the triad centroid lies on +z and
/// the left seller is on the buyer's left (+x).
pub fn place_triangle(d_bl: f64, d_br: f64, d_lr: f64) -> Option<[[f64; 2]; 3]> {
    let cos_g = (d_bl * d_bl + d_br * d_br - d_lr * d_lr) / (2.0 * d_bl * d_br);
    if cos_g.is_nan() || cos_g.abs() >= 1.0 {
        return None;
    }
    let g = cos_g.acos();
    let a = (d_br * g.sin()).atan2(d_bl + d_br * g.cos());
    let left = [d_bl * a.sin(), d_bl * a.cos()];
    let right = [d_br * (a - g).sin(), d_br * (a - g).cos()];
    Some([[0.0, 0.0], left, right])
}

fn draw_triangle(samplers: &[TruncNormal; 3], rng: &mut impl Rng) -> Result<[[f64; 2]; 3]> {
    for _ in 0..MAX_TRIANGLE_TRIES {
        let d_br = samplers[0].sample(rng);
        let d_bl = samplers[1].sample(rng);
        let d_lr = samplers[2].sample(rng);
        if let Some(t) = place_triangle(d_bl, d_br, d_lr) {
            return Ok(t);
        }
    }
    Err(CoreError::Config(format!(
        "no feasible triangle after {MAX_TRIANGLE_TRIES} draws"
    )))
}

fn geometric(mean: f64, rng: &mut impl Rng) -> usize {
    let g = Geometric::new(1.0 / mean).expect("mean >= 1");
    g.sample(rng) as usize + 1
}

/// Speaking labels in role order (buyer, left seller, right seller).
///
/// Sellers alternate turns of uniform length. At each boundary the next
/// turn overlaps the current one with probability `1 - turn_taking`;
/// otherwise a gap may open, which the buyer fills with probability
/// `buyer_gap_prob`.
pub fn gen_speaking(cfg: &SynthConfig) -> [Vec<SpeakingLabel>; 3] {
    let n = cfg.duration_frames;
    let mut rng = rng_for(cfg, Stream::Speaking);
    let mut s = [vec![false; n], vec![false; n], vec![false; n]];
    let mut speaker = if rng.random_bool(0.5) { 1 } else { 2 };
    let mut start = 0usize;
    while start < n {
        let len = rng.random_range(TURN_MIN..=TURN_MAX);
        let end = (start + len).min(n);
        s[speaker][start..end].fill(true);
        let next = if rng.random_bool(1.0 - cfg.turn_taking) {
            end.saturating_sub(geometric(OVERLAP_MEAN, &mut rng).min(len - 1))
        } else if rng.random_bool(GAP_PROB) {
            let gap = geometric(GAP_MEAN, &mut rng);
            if rng.random_bool(cfg.buyer_gap_prob) {
                s[0][end..(end + gap).min(n)].fill(true);
            }
            end + gap
        } else {
            end
        };
        start = next.max(start + 1);
        speaker = 3 - speaker;
    }
    s.map(|v| v.into_iter().map(SpeakingLabel::from).collect())
}

/// Index of the other person to look at: the speaking other, the most
/// recent starter when both speak, or `None` when neither does.
fn attention_target(me: usize, t: usize, speaking: &[Vec<bool>; 3], onset: &[Vec<usize>; 3]) -> Option<usize> {
    let others: Vec<usize> = (0..3).filter(|&o| o != me && speaking[o][t]).collect();
    match others[..] {
        [] => None,
        [o] => Some(o),
        [a, b] => Some(if onset[b][t] > onset[a][t] { b } else { a }),
        _ => unreachable!(),
    }
}

/// Formation tracks in role order.
pub fn gen_formation_track(cfg: &SynthConfig) -> Result<[Vec<FormationState>; 3]> {
    cfg.validate()?;
    let n = cfg.duration_frames;
    let speaking = gen_speaking(cfg).map(|v| v.iter().map(|s| s.is_speaking()).collect::<Vec<_>>());
    let onset = speaking.clone().map(|v| {
        let mut last = 0;
        v.iter()
            .enumerate()
            .map(|(t, &on)| {
                if on && (t == 0 || !v[t - 1]) {
                    last = t;
                }
                last
            })
            .collect::<Vec<_>>()
    });
    let mut rng = rng_for(cfg, Stream::Formation);
    let samplers = [
        TruncNormal::fit(&cfg.buyer_right)?,
        TruncNormal::fit(&cfg.buyer_left)?,
        TruncNormal::fit(&cfg.left_right)?,
    ];

    let mut anchors = vec![draw_triangle(&samplers, &mut rng)?];
    let segments = if cfg.reform_every == 0 {
        1
    } else {
        n.div_ceil(cfg.reform_every).max(1)
    };
    for _ in 1..segments {
        anchors.push(draw_triangle(&samplers, &mut rng)?);
    }

    let keep = 1.0 - OU_RATE;
    let innov = (1.0 - keep * keep).sqrt();
    let pos_step = Normal::new(0.0, cfg.noise_pos_sigma * innov).expect("sigma >= 0");
    let ang_step = Normal::new(0.0, cfg.noise_orient_sigma * innov).expect("sigma >= 0");
    let stationary_pos = Normal::new(0.0, cfg.noise_pos_sigma).expect("sigma >= 0");
    let stationary_ang = Normal::new(0.0, cfg.noise_orient_sigma).expect("sigma >= 0");
    let mut pos_dev = [[0.0; 2]; 3];
    let mut body_dev = [0.0; 3];
    let mut face_dev = [0.0; 3];
    for p in 0..3 {
        pos_dev[p] = [stationary_pos.sample(&mut rng), stationary_pos.sample(&mut rng)];
        body_dev[p] = stationary_ang.sample(&mut rng);
        face_dev[p] = stationary_ang.sample(&mut rng);
    }

    let mut out: [Vec<FormationState>; 3] = Default::default();
    for t in 0..n {
        if t > 0 {
            for p in 0..3 {
                for d in &mut pos_dev[p] {
                    *d = keep * *d + pos_step.sample(&mut rng);
                }
                body_dev[p] = keep * body_dev[p] + ang_step.sample(&mut rng);
                face_dev[p] = keep * face_dev[p] + ang_step.sample(&mut rng);
            }
        }
        let anchor = anchor_at(&anchors, cfg.reform_every, t);
        let pos: [[f64; 2]; 3] =
            std::array::from_fn(|p| [anchor[p][0] + pos_dev[p][0], anchor[p][1] + pos_dev[p][1]]);
        let centroid = [
            (pos[0][0] + pos[1][0] + pos[2][0]) / 3.0,
            (pos[0][1] + pos[1][1] + pos[2][1]) / 3.0,
        ];
        for p in 0..3 {
            let toward = |q: [f64; 2]| {
                normalize([q[0] - pos[p][0], q[1] - pos[p][1]]).unwrap_or([0.0, 1.0])
            };
            let body_h = heading(toward(centroid)) + body_dev[p];
            let look = attention_target(p, t, &speaking, &onset).map_or(centroid, |o| pos[o]);
            let face_h = heading(toward(look)) + face_dev[p];
            out[p].push(FormationState::new(
                pos[p],
                orient_from_heading(body_h),
                orient_from_heading(face_h),
            )?);
        }
    }
    Ok(out)
}

/// Formation anchor at frame `t`: the segment's triangle, blended from the
/// previous one with a cosine ramp over the segment's first frames.
fn anchor_at(anchors: &[[[f64; 2]; 3]], every: usize, t: usize) -> [[f64; 2]; 3] {
    if every == 0 {
        return anchors[0];
    }
    let seg = (t / every).min(anchors.len() - 1);
    let into = t - seg * every;
    if seg == 0 || into >= REFORM_RAMP {
        return anchors[seg];
    }
    let w = 0.5 - 0.5 * (PI * into as f64 / REFORM_RAMP as f64).cos();
    std::array::from_fn(|p| {
        std::array::from_fn(|k| (1.0 - w) * anchors[seg - 1][p][k] + w * anchors[seg][p][k])
    })
}

/// Gesture envelope in [0, 1]: gated by speaking segments and occasional
/// silent bouts, then exponentially smoothed.
fn gesture_envelope(cfg: &SynthConfig, speaking: &[SpeakingLabel], rng: &mut impl Rng) -> Vec<f64> {
    let n = speaking.len();
    let mut gate = vec![false; n];
    let mut t = 0;
    while t < n {
        if speaking[t].is_speaking() {
            let end = (t..n).find(|&k| !speaking[k].is_speaking()).unwrap_or(n);
            if rng.random_bool(cfg.gesture_speaking_prob) {
                gate[t..end].fill(true);
            }
            t = end;
        } else {
            if rng.random_bool(cfg.gesture_silent_rate) {
                let len = rng.random_range(15..=45);
                let end = (t + len).min(n);
                let end = (t..end).find(|&k| speaking[k].is_speaking()).unwrap_or(end);
                gate[t..end].fill(true);
                t = end.max(t + 1);
                continue;
            }
            t += 1;
        }
    }
    let mut env = Vec::with_capacity(n);
    let mut e = 0.0;
    for g in gate {
        e += 0.15 * (f64::from(u8::from(g)) - e);
        env.push(e);
    }
    env
}

/// AR(1) noise with stationary standard deviation `sigma`.
fn ar_noise(n: usize, rho: f64, sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    let innov = sigma * (1.0 - rho * rho).sqrt();
    let z0: f64 = StandardNormal.sample(rng);
    let mut x = sigma * z0;
    (0..n)
        .map(|t| {
            if t > 0 {
                let z: f64 = StandardNormal.sample(rng);
                x = rho * x + innov * z;
            }
            x
        })
        .collect()
}

fn gen_face(cfg: &SynthConfig, speaking: &[SpeakingLabel], rng: &mut impl Rng) -> Result<Vec<FaceMotion>> {
    let n = speaking.len();
    let noise: Vec<Vec<f64>> = (0..FACE_DIM)
        .map(|_| ar_noise(n, 0.8, cfg.face_noise_sigma, rng))
        .collect();
    (0..n)
        .map(|t| {
            let mut c: [f64; FACE_DIM] = std::array::from_fn(|k| noise[k][t]);
            c[0] += cfg.mouth_gain * f64::from(speaking[t].value());
            FaceMotion::new(c)
        })
        .collect()
}

/// Foot contacts from a gait cycle that runs while the smoothed root velocity
/// exceeds the threshold; standing frames have all four contacts at 1.
pub fn gait_contacts(positions: &[[f64; 2]]) -> Vec<[f64; 4]> {
    let mut vel = [0.0; 2];
    let mut phase: f64 = 0.0;
    let mut out = Vec::with_capacity(positions.len());
    for t in 0..positions.len() {
        if t > 0 {
            for k in 0..2 {
                vel[k] += 0.1 * (positions[t][k] - positions[t - 1][k] - vel[k]);
            }
        }
        if vel[0].hypot(vel[1]) < GAIT_SPEED_THRESHOLD {
            phase = 0.0;
            out.push([1.0; 4]);
            continue;
        }
        phase = (phase + 1.0 / GAIT_PERIOD).fract();
        let c = |p: f64| (0.5 + 0.5 * (2.0 * PI * p).cos()).clamp(0.0, 1.0);
        out.push([c(phase), c(phase - 0.1), c(phase + 0.5), c(phase + 0.4)]);
    }
    out
}

fn gen_body(
    cfg: &SynthConfig,
    formation: &[FormationState],
    envelope: &[f64],
) -> Result<Vec<BodyMotion>> {
    let pose = mean_pose();
    let positions: Vec<[f64; 2]> = formation.iter().map(FormationState::position).collect();
    let headings: Vec<f64> = formation.iter().map(|s| heading(s.body_orient())).collect();
    let deltas = global_to_deltas(&positions, &headings);
    let contacts = gait_contacts(&positions);
    let arm = |j: Joint, scale: f64, side: f64, e: f64, t: usize, v: &mut [f64; BODY_DIM]| {
        let a = cfg.gesture_amp * scale * e;
        let w = 2.0 * PI * t as f64 / GESTURE_PERIOD;
        let r = j.channels();
        v[r.start] += side * 0.15 * a;
        v[r.start + 1] += a * (0.6 + 0.25 * w.sin());
        v[r.start + 2] += a * (0.5 + 0.25 * w.cos());
    };
    (0..formation.len())
        .map(|t| {
            let mut v = [0.0; BODY_DIM];
            for j in Joint::ALL {
                v[j.channels()].copy_from_slice(&pose[j.index()]);
            }
            let e = envelope[t];
            arm(Joint::RightWrist, 1.0, -1.0, e, t, &mut v);
            arm(Joint::RightElbow, 0.5, -1.0, e, t, &mut v);
            arm(Joint::LeftWrist, 0.5, 1.0, e, t, &mut v);
            arm(Joint::LeftElbow, 0.25, 1.0, e, t, &mut v);
            let rp = BodyPart::RootProjection.range().start;
            v[rp] = positions[t][0];
            v[rp + 2] = positions[t][1];
            let rv = BodyPart::RootVelocity.range().start;
            v[rv..rv + 3].copy_from_slice(&deltas[t]);
            let fc = BodyPart::FootContacts.range().start;
            v[fc..fc + 4].copy_from_slice(&contacts[t]);
            BodyMotion::new(v)
        })
        .collect()
}

pub fn gen_scene_with_id(cfg: &SynthConfig, id: impl Into<String>) -> Result<Scene> {
    cfg.validate()?;
    let n = cfg.duration_frames;
    if n == 0 {
        return Err(CoreError::Config("duration_frames must be positive to build a scene".into()));
    }
    let speaking = gen_speaking(cfg);
    let formation = gen_formation_track(cfg)?;
    let mut face_rng = rng_for(cfg, Stream::Face);
    let mut gesture_rng = rng_for(cfg, Stream::Gesture);
    let mut tracks = Vec::with_capacity(3);
    for (p, role) in Role::ALL.into_iter().enumerate() {
        let face = gen_face(cfg, &speaking[p], &mut face_rng)?;
        let env = gesture_envelope(cfg, &speaking[p], &mut gesture_rng);
        let body = gen_body(cfg, &formation[p], &env)?;
        tracks.push(PersonTrack::new(
            role,
            body,
            face,
            formation[p].clone(),
            speaking[p].clone(),
        )?);
    }
    Scene::new(id, cfg.fps, tracks, 0, n)
}

pub fn gen_scene(cfg: &SynthConfig) -> Result<Scene> {
    gen_scene_with_id(cfg, format!("seed{}", cfg.seed))
}

/// `count` scenes with consecutive seeds and ids `scene0000`, `scene0001`, ...
pub fn gen_scenes(cfg: &SynthConfig, count: usize) -> Result<Vec<Scene>> {
    (0..count)
        .map(|i| gen_scene_with_id(&cfg.for_scene(i), format!("scene{i:04}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;

    #[test]
    fn truncated_fit_matches_requested_moments() {
        for p in [DistanceParams::BUYER_RIGHT, DistanceParams::BUYER_LEFT, DistanceParams::LEFT_RIGHT] {
            let tn = TruncNormal::fit(&p).unwrap();
            let (m, s) = truncated_moments(tn.loc, tn.scale, p.min, p.max);
            assert!((m - p.mean).abs() < 1e-8 && (s - p.std).abs() < 1e-8, "{p:?}");
        }
    }

    #[test]
    fn impossible_moments_are_rejected() {
        let p = DistanceParams {
            mean: 100.0,
            std: 80.0,
            min: 90.0,
            max: 110.0,
        };
        assert!(TruncNormal::fit(&p).is_err());
    }

    #[test]
    fn triangle_has_requested_sides_and_centroid_on_z() {
        let [b, l, r] = place_triangle(150.0, 140.0, 120.0).unwrap();
        assert!((distance(b, l) - 150.0).abs() < 1e-9);
        assert!((distance(b, r) - 140.0).abs() < 1e-9);
        assert!((distance(l, r) - 120.0).abs() < 1e-9);
        assert!((b[0] + l[0] + r[0]).abs() < 1e-9);
        assert!(l[0] > 0.0 && r[0] < 0.0);
        assert!(place_triangle(10.0, 10.0, 30.0).is_none());
    }

    #[test]
    fn mean_pose_is_symmetric() {
        let pose = mean_pose();
        for j in Joint::ALL {
            let m = pose[j.mirror().index()];
            let p = pose[j.index()];
            assert_eq!([p[0], p[1], p[2]], [-m[0], m[1], m[2]], "{}", j.name());
        }
        assert_eq!(pose[0], [0.0; 3]);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = SynthConfig {
            seed: 9,
            turn_taking: 0.5,
            ..SynthConfig::default()
        };
        assert_eq!(SynthConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(SynthConfig::from_toml("turn_taking = 1.5").is_err());
        assert!(SynthConfig::from_toml("bogus = 1").is_err());
    }
}
