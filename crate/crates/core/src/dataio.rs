//! Scene files, game cropping, windowing, flip augmentation, standardization,
//! channel masking and dataset splitting.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssp_nn::Tensor;

use crate::container::{parse_numbers, write_numbers, Container};
use crate::error::{CoreError, Result};
use crate::model::{
    BodyMotion, BodyPart, Clip, FaceMotion, FormationState, Joint, PersonTrack, Role, Scene, SpeakingLabel,
    BODY_DIM, FACE_DIM, FOOT_LEFT_HEEL, FOOT_LEFT_TOE, FOOT_RIGHT_HEEL, FOOT_RIGHT_TOE, FORMATION_DIM, FRAME_DIM,
};

pub const SCENE_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_WINDOW: usize = 120;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.78;
pub const STD_EPSILON: f64 = 1e-8;

pub fn scene_to_text(scene: &Scene) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ssp-scene {SCENE_FORMAT_VERSION}");
    let _ = writeln!(s, "id {}", scene.id);
    let _ = writeln!(s, "fps {}", scene.fps);
    let _ = writeln!(s, "frames {}", scene.len());
    let _ = writeln!(s, "game_start {}", scene.game_start);
    let _ = writeln!(s, "game_end {}", scene.game_end);
    let _ = writeln!(s, "verified {}", scene.verified);
    for track in scene.tracks() {
        let _ = writeln!(s, "role {}", track.role.name());
        for t in 0..track.len() {
            write_numbers(&mut s, &track.frame_values(t));
            s.push('\n');
        }
    }
    s
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    fs::write(path, scene_to_text(scene)).map_err(|e| CoreError::io(path, e))
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    parse_scene(&text)
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let lines: Vec<&str> = text.lines().collect();
    let perr = |line: usize, field: &str, frame: Option<usize>, reason: String| CoreError::Parse {
        line,
        field: field.to_string(),
        frame,
        reason,
    };
    let header = lines.first().copied().unwrap_or_default();
    match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["ssp-scene", v] if v.parse::<u32>() == Ok(SCENE_FORMAT_VERSION) => {}
        ["ssp-scene", v] => return Err(perr(1, "format_version", None, format!("unsupported version {v:?}"))),
        _ => return Err(perr(1, "format_version", None, "missing 'ssp-scene <version>' header".into())),
    }
    let keys = ["id", "fps", "frames", "game_start", "game_end", "verified"];
    let mut values = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        let line = lines.get(i + 1).copied().unwrap_or_default();
        let v = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| perr(i + 2, key, None, format!("expected '{key} <value>'")))?;
        values.push(v.trim().to_string());
    }
    let num = |i: usize| -> Result<usize> {
        values[i]
            .parse()
            .map_err(|_| perr(i + 2, keys[i], None, format!("invalid value {:?}", values[i])))
    };
    let id = values[0].clone();
    let fps = num(1)? as u32;
    let frames = num(2)?;
    let game_start = num(3)?;
    let game_end = num(4)?;
    let verified: bool = values[5]
        .parse()
        .map_err(|_| perr(7, "verified", None, format!("invalid value {:?}", values[5])))?;

    let mut tracks = Vec::new();
    let mut i = keys.len() + 1;
    for role in Role::ALL {
        let field = format!("track {}", role.name());
        let Some(line) = lines.get(i) else {
            return Err(CoreError::Missing(field));
        };
        let found = line.strip_prefix("role ").and_then(Role::parse);
        if found != Some(role) {
            return Err(perr(i + 1, &field, None, format!("expected 'role {}', found {line:?}", role.name())));
        }
        i += 1;
        let (mut body, mut face, mut form, mut speak) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for t in 0..frames {
            let Some(line) = lines.get(i) else {
                return Err(CoreError::Missing(format!("{field}: frame {t} of {frames}")));
            };
            let lineno = i + 1;
            let v = parse_numbers(line, lineno, &field, Some(t))?;
            if v.len() != FRAME_DIM {
                return Err(perr(lineno, &field, Some(t), format!("expected {FRAME_DIM} values, found {}", v.len())));
            }
            let at = |e: CoreError| match e {
                CoreError::Invalid { what, reason } => perr(lineno, &field, Some(t), format!("{what}: {reason}")),
                other => other,
            };
            body.push(BodyMotion::from_slice(&v[..BODY_DIM]).map_err(at)?);
            let mut fc = [0.0; FACE_DIM];
            fc.copy_from_slice(&v[BODY_DIM..BODY_DIM + FACE_DIM]);
            face.push(FaceMotion::new(fc).map_err(at)?);
            form.push(FormationState::from_vec6(&v[BODY_DIM + FACE_DIM..FRAME_DIM - 1]).map_err(at)?);
            speak.push(SpeakingLabel::from_value(v[FRAME_DIM - 1]).map_err(at)?);
            i += 1;
        }
        tracks.push(PersonTrack::new(role, body, face, form, speak)?);
    }
    if let Some(extra) = lines[i.min(lines.len())..].iter().position(|l| !l.trim().is_empty()) {
        return Err(perr(i + extra + 1, "trailer", None, "unexpected content after last track".into()));
    }
    let mut scene = Scene::new(id, fps, tracks, game_start, game_end)?;
    scene.verified = verified;
    Ok(scene)
}

/// Keeps only scenes flagged as verified.
pub fn filter_verified(scenes: Vec<Scene>) -> Vec<Scene> {
    scenes.into_iter().filter(|s| s.verified).collect()
}

/// Truncates every track to the game span. The first kept frame's root
/// velocity is zeroed because its reference frame was discarded.
pub fn crop_to_game(scene: &Scene) -> Result<Scene> {
    let range = scene.game_start..scene.game_end;
    let mut tracks = Vec::with_capacity(3);
    for track in scene.tracks() {
        let w = track.window(range.clone())?;
        let mut body = w.body().to_vec();
        body[0] = body[0].with_slice(BodyPart::RootVelocity, &[0.0; 3])?;
        tracks.push(w.with_body(body)?);
    }
    let n = range.len();
    let mut out = Scene::new(scene.id.clone(), scene.fps, tracks, 0, n)?;
    out.verified = scene.verified;
    Ok(out)
}

/// Number of windows `window_clips` produces.
pub fn clip_count(frames: usize, window: usize, stride: usize) -> usize {
    if frames < window {
        0
    } else {
        (frames - window) / stride + 1
    }
}

pub fn window_clips(scene: &Arc<Scene>, window: usize, stride: usize) -> Result<Vec<Clip>> {
    if window == 0 || stride == 0 {
        return Err(CoreError::invalid("window_clips", "window and stride must be positive"));
    }
    (0..clip_count(scene.len(), window, stride))
        .map(|k| Clip::new(Arc::clone(scene), k * stride, window))
        .collect()
}

/// Mirror augmentation: the right seller becomes the target and all
/// geometry is reflected across x = 0.
pub fn flip_clip(c: &Clip) -> Clip {
    Clip {
        flipped: !c.flipped,
        ..c.clone()
    }
}

/// Reflects one track across x = 0, swapping left and right body sides.
pub fn mirror_track(track: &PersonTrack) -> PersonTrack {
    let body = track.body().iter().map(mirror_body).collect();
    let formation = track
        .formation()
        .iter()
        .map(|s| {
            let v = s.to_vec6();
            FormationState::new([-v[0], v[1]], [-v[2], v[3]], [-v[4], v[5]]).expect("mirroring preserves unit norm")
        })
        .collect();
    PersonTrack::new(
        track.role,
        body,
        track.face().to_vec(),
        formation,
        track.speaking().to_vec(),
    )
    .expect("mirroring preserves lengths")
}

pub fn mirror_body(b: &BodyMotion) -> BodyMotion {
    let src = b.values();
    let mut v = *src;
    for j in Joint::ALL {
        let from = j.mirror().channels();
        let to = j.channels();
        v[to.start] = -src[from.start];
        v[to.start + 1] = src[from.start + 1];
        v[to.start + 2] = src[from.start + 2];
    }
    let rp = BodyPart::RootProjection.range().start;
    v[rp] = -src[rp];
    // Δx and Δheading both change sign under reflection; Δz does not.
    let rv = BodyPart::RootVelocity.range().start;
    v[rv] = -src[rv];
    v[rv + 2] = -src[rv + 2];
    let fc = BodyPart::FootContacts.range().start;
    for (a, b) in [(FOOT_LEFT_HEEL, FOOT_RIGHT_HEEL), (FOOT_LEFT_TOE, FOOT_RIGHT_TOE)] {
        v[fc + a] = src[fc + b];
        v[fc + b] = src[fc + a];
    }
    BodyMotion::new(v).expect("mirroring preserves validity")
}

/// Crops, windows and (optionally) adds the flipped copy of every clip.
/// Output order is scene order, then window order, unflipped before flipped.
pub fn preprocess(scenes: &[Scene], window: usize, stride: usize, flip: bool) -> Result<Vec<Clip>> {
    let mut out = Vec::new();
    for scene in scenes.iter().filter(|s| s.verified) {
        let cropped = Arc::new(crop_to_game(scene)?);
        for c in window_clips(&cropped, window, stride)? {
            if flip {
                let f = flip_clip(&c);
                out.push(c);
                out.push(f);
            } else {
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// Per-channel affine normalization fitted on training frames only.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub epsilon: f64,
}

impl Standardizer {
    /// Fits population mean and standard deviation over `rows`.
    pub fn fit<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        for r in &rows {
            if r.len() != dim {
                return Err(CoreError::invalid("Standardizer", format!("row of {} values, expected {dim}", r.len())));
            }
            for (c, &v) in r.iter().enumerate() {
                sum[c] += v;
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
            n += 1;
        }
        if n == 0 {
            return Err(CoreError::invalid("Standardizer", "no training frames"));
        }
        let mut mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; dim];
        for r in &rows {
            for (c, &v) in r.iter().enumerate() {
                var[c] += (v - mean[c]).powi(2);
            }
        }
        let std = (0..dim)
            .map(|c| {
                if lo[c] == hi[c] {
                    mean[c] = lo[c];
                    STD_EPSILON
                } else {
                    (var[c] / n as f64).sqrt().max(STD_EPSILON)
                }
            })
            .collect();
        Ok(Self {
            mean,
            std,
            epsilon: STD_EPSILON,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_value(&self, c: usize, v: f64) -> f64 {
        (v - self.mean[c]) / self.std[c]
    }

    pub fn invert_value(&self, c: usize, v: f64) -> f64 {
        v * self.std[c] + self.mean[c]
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(c, &v)| self.apply_value(c, v)).collect()
    }

    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(c, &v)| self.invert_value(c, v)).collect()
    }

    /// Standardizes a `(batch, dim, time)` tensor in place of a copy.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.map_tensor(x, |c, v| self.apply_value(c, v))
    }

    pub fn invert(&self, x: &Tensor) -> Result<Tensor> {
        self.map_tensor(x, |c, v| self.invert_value(c, v))
    }

    fn map_tensor(&self, x: &Tensor, f: impl Fn(usize, f64) -> f64) -> Result<Tensor> {
        let [b, ch, t] = x.dims();
        if ch != self.dim() {
            return Err(CoreError::invalid(
                "Standardizer",
                format!("tensor has {ch} channels, standardizer {}", self.dim()),
            ));
        }
        Ok(Tensor::from_fn(b, ch, t, |i, c, k| f(c, x.get(i, c, k)))?)
    }

    pub fn write(&self, c: &mut Container, prefix: &str) {
        c.push_array(format!("{prefix}.mean"), vec![self.dim()], self.mean.clone());
        c.push_array(format!("{prefix}.std"), vec![self.dim()], self.std.clone());
        c.set_meta(&format!("{prefix}.epsilon"), self.epsilon);
    }

    pub fn read(c: &Container, prefix: &str) -> Result<Self> {
        let mean = c.array(&format!("{prefix}.mean"))?.data.clone();
        let std = c.array(&format!("{prefix}.std"))?.data.clone();
        if mean.len() != std.len() || std.iter().any(|s| *s < 0.0) {
            return Err(CoreError::invalid("Standardizer", "inconsistent statistics"));
        }
        Ok(Self {
            mean,
            std,
            epsilon: c.meta_parse(&format!("{prefix}.epsilon"))?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut c = Container::new("standardizer");
        self.write(&mut c, "st");
        c.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(&Container::load_kind(path, "standardizer")?, "st")
    }
}

/// Replaces `unused` channels of a standardized tensor by their training
/// mean, which is zero in standardized units.
pub fn mask_channels(x: &Tensor, unused: &BTreeSet<usize>, st: &Standardizer) -> Result<Tensor> {
    let [_, ch, _] = x.dims();
    if ch != st.dim() {
        return Err(CoreError::invalid("mask_channels", format!("{ch} channels vs standardizer {}", st.dim())));
    }
    if let Some(&bad) = unused.iter().find(|&&c| c >= ch) {
        return Err(CoreError::invalid("mask_channels", format!("channel {bad} out of range 0..{ch}")));
    }
    let mut y = x.clone();
    let [b, _, t] = y.dims();
    for i in 0..b {
        for &c in unused {
            for k in 0..t {
                y.set(i, c, k, 0.0);
            }
        }
    }
    Ok(y)
}

/// Scene-level split. Ids are sorted before shuffling so the result depends
/// only on the id set and the seed.
pub fn split_ids(ids: &[String], train_fraction: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != ids.len() {
        return Err(CoreError::invalid("split_dataset", "duplicate scene ids"));
    }
    let n = sorted.len();
    if n < 2 {
        return Err(CoreError::invalid("split_dataset", format!("need at least 2 scenes, got {n}")));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(CoreError::invalid("split_dataset", "train fraction outside [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let test = sorted.split_off(n_train);
    Ok((sorted, test))
}

pub fn split_dataset(scenes: Vec<Scene>, train_fraction: f64, seed: u64) -> Result<(Vec<Scene>, Vec<Scene>)> {
    let ids: Vec<String> = scenes.iter().map(|s| s.id.clone()).collect();
    let (train_ids, _) = split_ids(&ids, train_fraction, seed)?;
    let train_set: BTreeSet<&String> = train_ids.iter().collect();
    let (mut train, mut test): (Vec<Scene>, Vec<Scene>) = scenes.into_iter().partition(|s| train_set.contains(&s.id));
    train.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((train, test))
}

/// Loads every `.scene` file of a directory in sorted file-name order.
pub fn load_scene_dir(dir: &Path) -> Result<Vec<Scene>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CoreError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scene"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_scene(p)).collect()
}

/// Clip index over a set of scenes; clips are stored as (scene, start,
/// length, flipped) references.
pub fn clips_to_container(clips: &[Clip]) -> Container {
    let mut ids: Vec<&str> = Vec::new();
    let mut scene_idx = Vec::with_capacity(clips.len());
    for c in clips {
        let pos = match ids.iter().position(|id| *id == c.scene_id()) {
            Some(p) => p,
            None => {
                ids.push(c.scene_id());
                ids.len() - 1
            }
        };
        scene_idx.push(pos as f64);
    }
    let mut out = Container::new("clips");
    out.set_meta("scenes", ids.join(","));
    let n = clips.len();
    out.push_array("scene", vec![n], scene_idx);
    out.push_array("start", vec![n], clips.iter().map(|c| c.start as f64).collect());
    out.push_array("length", vec![n], clips.iter().map(|c| c.length as f64).collect());
    out.push_array("flipped", vec![n], clips.iter().map(|c| f64::from(u8::from(c.flipped))).collect());
    out
}

pub fn clips_from_container(c: &Container, scenes: &[Arc<Scene>]) -> Result<Vec<Clip>> {
    let ids: Vec<&str> = c.require_meta("scenes")?.split(',').filter(|s| !s.is_empty()).collect();
    let lookup = ids
        .iter()
        .map(|id| {
            scenes
                .iter()
                .find(|s| s.id == *id)
                .cloned()
                .ok_or_else(|| CoreError::Missing(format!("scene '{id}' referenced by clip index")))
        })
        .collect::<Result<Vec<_>>>()?;
    let idx = &c.array("scene")?.data;
    let start = &c.array("start")?.data;
    let len = &c.array("length")?.data;
    let flipped = &c.array("flipped")?.data;
    let mut out = Vec::with_capacity(idx.len());
    for i in 0..idx.len() {
        let scene = lookup
            .get(idx[i] as usize)
            .ok_or_else(|| CoreError::invalid("clip index", "scene index out of range"))?;
        let mut clip = Clip::new(Arc::clone(scene), start[i] as usize, len[i] as usize)?;
        clip.flipped = flipped[i] != 0.0;
        out.push(clip);
    }
    Ok(out)
}

/// Per-frame rows of one person's signals for fitting standardizers.
pub fn person_rows(track: &PersonTrack, with_face: bool) -> Vec<Vec<f64>> {
    (0..track.len())
        .map(|t| {
            let mut r = track.body()[t].values().to_vec();
            if with_face {
                r.extend_from_slice(track.face()[t].coeffs());
            }
            r
        })
        .collect()
}

pub fn formation_rows(track: &PersonTrack) -> Vec<[f64; FORMATION_DIM]> {
    track.formation().iter().map(FormationState::to_vec6).collect()
}
