use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};
use ssp_core::container::Container;
use ssp_core::dataio::{
    clips_from_container, clips_to_container, crop_to_game, filter_verified, load_scene_dir, preprocess, save_scene,
    split_dataset,
};
use ssp_core::eval::*;
use ssp_core::geometry::heading;
use ssp_core::model::{Clip, FormationState, Scene};
use ssp_core::synth::{gen_scenes, SynthConfig};
use ssp_core::tasks::gesture::*;
use ssp_core::tasks::{formation, speaking, task_suite, Checkpoint, Task, TrainConfig};

use crate::args::*;
use crate::error::{user, CliError, Result};
use crate::output::{Manifest, Staging};

const SCENES_DIR: &str = "scenes";
const TRAIN_CLIPS: &str = "train.clips";
const TEST_CLIPS: &str = "test.clips";
const CLIPS_KIND: &str = "clips";
pub const CHECKPOINT: &str = "model.ckpt";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";

/// Resolves relative paths against the output root.
pub struct Paths {
    pub root: Option<PathBuf>,
}

impl Paths {
    pub fn get(&self, p: &Path) -> PathBuf {
        match &self.root {
            Some(r) if p.is_relative() => r.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn existing(&self, p: &Path) -> Result<PathBuf> {
        let full = self.get(p);
        if !full.exists() {
            return Err(user(format!("{} does not exist", full.display())));
        }
        Ok(full)
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config serializes")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn write_table(stage: &mut Staging, table: &MetricTable, stem: &str) -> Result<()> {
    stage.write(&format!("{stem}.csv"), table.to_csv())?;
    stage.write(&format!("{stem}.json"), table.to_json())
}

fn load_scenes(dir: &Path) -> Result<Vec<Scene>> {
    let scenes = load_scene_dir(dir)?;
    if scenes.is_empty() {
        return Err(user(format!("no .scene files in {}", dir.display())));
    }
    Ok(scenes)
}

pub fn synth(a: &SynthArgs, paths: &Paths) -> Result<PathBuf> {
    let mut cfg = match &a.config {
        Some(p) => SynthConfig::from_toml(&read_text(p)?)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.duration {
        cfg.duration_frames = v;
    }
    if let Some(v) = a.gesture_amp {
        cfg.gesture_amp = v;
    }
    if let Some(v) = a.turn_taking {
        cfg.turn_taking = v;
    }
    if let Some(v) = a.noise_pos {
        cfg.noise_pos_sigma = v;
    }
    if let Some(v) = a.noise_orient {
        cfg.noise_orient_sigma = v;
    }
    if let Some(v) = a.reform_every {
        cfg.reform_every = v;
    }
    cfg.validate()?;
    if a.count == 0 {
        return Err(user("--count must be positive"));
    }
    let scenes = gen_scenes(&cfg, a.count)?;
    let mut stage = Staging::new(&paths.get(&a.out))?;
    for s in &scenes {
        let name = format!("{}.scene", s.id);
        save_scene(s, &stage.path(&name))?;
        stage.record(&name)?;
    }
    stage.write("synth.toml", cfg.to_toml())?;
    let mut config = to_value(&cfg);
    config["count"] = a.count.into();
    stage.commit(&Manifest::new("synth", config, cfg.seed))
}

pub fn preprocess_cmd(a: &PreprocessArgs, paths: &Paths) -> Result<PathBuf> {
    let input = paths.existing(&a.input)?;
    let scenes = filter_verified(load_scenes(&input)?);
    let (train, test) = split_dataset(scenes, a.train_fraction, a.seed)?;
    let crop = |v: Vec<Scene>| v.iter().map(crop_to_game).collect::<ssp_core::Result<Vec<_>>>();
    let (train, test) = (crop(train)?, crop(test)?);
    let train_clips = preprocess(&train, a.window, a.stride, a.flip)?;
    let test_arcs: Vec<Arc<Scene>> = test.iter().cloned().map(Arc::new).collect();
    let test_clips = eval_clips(&test_arcs, a.window)?;
    if train_clips.is_empty() || test_clips.is_empty() {
        return Err(user(format!(
            "window {} leaves {} train and {} test clips; scenes are too short",
            a.window,
            train_clips.len(),
            test_clips.len()
        )));
    }
    let mut stage = Staging::new(&paths.get(&a.out))?;
    fs::create_dir(stage.path(SCENES_DIR)).map_err(|e| user(e.to_string()))?;
    for s in train.iter().chain(&test) {
        save_scene(s, &stage.path(SCENES_DIR).join(format!("{}.scene", s.id)))?;
    }
    stage.write(TRAIN_CLIPS, clips_to_container(&train_clips).to_text())?;
    stage.write(TEST_CLIPS, clips_to_container(&test_clips).to_text())?;
    let config = json!({
        "window": a.window,
        "stride": a.stride,
        "flip": a.flip,
        "train_fraction": a.train_fraction,
        "train_scenes": train.len(),
        "test_scenes": test.len(),
        "train_clips": train_clips.len(),
        "test_clips": test_clips.len(),
    });
    stage.commit(&Manifest::new("preprocess", config, a.seed).input(&input))
}

/// Train and test clips of a `preprocess` output directory.
pub struct Dataset {
    pub train: Vec<Clip>,
    pub test: Vec<Clip>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let scenes: Vec<Arc<Scene>> = load_scenes(&dir.join(SCENES_DIR))?.into_iter().map(Arc::new).collect();
        let clips = |name: &str| -> Result<Vec<Clip>> {
            let c = Container::load_kind(&dir.join(name), CLIPS_KIND)?;
            Ok(clips_from_container(&c, &scenes)?)
        };
        Ok(Self {
            train: clips(TRAIN_CLIPS)?,
            test: clips(TEST_CLIPS)?,
        })
    }
}

fn load_ckpt(path: &Path, task: Option<Task>) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path)?;
    if let Some(t) = task {
        ck.expect_task(t)?;
    }
    Ok(ck)
}

/// Resolves a checkpoint flag that may name either the file or the
/// directory `train` wrote.
fn ckpt_path(paths: &Paths, p: &Path) -> Result<PathBuf> {
    let full = paths.existing(p)?;
    Ok(if full.is_dir() { full.join(CHECKPOINT) } else { full })
}

pub fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_toml(&read_text(p)?)?,
        None => TrainConfig::for_task(a.task),
    };
    cfg.task = a.task;
    if let Some(s) = &a.input_spec {
        cfg.input_spec = s.clone();
    }
    if cfg.input_spec.is_empty() {
        cfg.input_spec = TrainConfig::for_task(a.task).input_spec;
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(
            if let Some(v) = a.$flag {
                cfg.$field = v.into();
            }
        )*};
    }
    set!(seed => seed, epochs => epochs, batch => batch, lr => lr);
    set!(lr_final => lr_final, max_steps => max_steps, lambda_l1 => lambda_l1, dropout => dropout);
    cfg.validate()?;
    match a.task {
        Task::Speaking => {
            cfg.input_spec.parse::<speaking::SpeakingInput>()?;
        }
        Task::Formation => {
            cfg.input_spec.parse::<formation::FormationInput>()?;
        }
        _ => {
            if !cfg.input_spec.is_empty() {
                return Err(user(format!("task {} takes no input spec", a.task)));
            }
        }
    }
    Ok(cfg)
}

pub fn train(a: &TrainArgs, paths: &Paths) -> Result<PathBuf> {
    let cfg = train_config(a)?;
    let data_dir = paths.existing(&a.data)?;
    let data = Dataset::load(&data_dir)?;
    let mut manifest = Manifest::new("train", to_value(&cfg), cfg.seed).input(&data_dir);
    let ae = match (a.task, &a.ae) {
        (Task::Traj2body | Task::Body2body, Some(p)) => {
            let p = ckpt_path(paths, p)?;
            manifest = manifest.input(&p);
            Some(load_ckpt(&p, Some(Task::MotionAe))?)
        }
        (Task::Traj2body | Task::Body2body, None) => return Err(user(format!("task {} needs --ae", a.task))),
        (_, Some(_)) => return Err(user(format!("task {} takes no --ae", a.task))),
        (_, None) => None,
    };
    let clips = &data.train;
    let (ck, report) = match a.task {
        Task::Speaking => speaking::train(clips, &cfg)?,
        Task::Formation => formation::train(clips, &cfg)?,
        Task::MotionAe => train_motion_ae(clips, &cfg)?,
        Task::Traj2body => train_traj2body(clips, ae.as_ref().expect("checked above"), &cfg)?,
        Task::Body2body => train_body2body(clips, ae.as_ref().expect("checked above"), &cfg)?,
    };
    if !report.final_loss.is_finite() {
        return Err(CliError::Internal(format!("training diverged: final loss {}", report.final_loss)));
    }
    let mut stage = Staging::new(&paths.get(&a.out))?;
    ck.save(&stage.path(CHECKPOINT))?;
    stage.record(CHECKPOINT)?;
    stage.write("train.toml", cfg.to_toml())?;
    let log = json!({
        "steps": report.steps,
        "initial_loss": report.initial_loss,
        "final_loss": report.final_loss,
        "history": ck.history,
    });
    stage.write("train_log.json", serde_json::to_string_pretty(&log).expect("log serializes") + "\n")?;
    stage.commit(&manifest)
}

fn gesture_table() -> MetricTable {
    MetricTable::new(&["joint_mean", "joint_std"])
}

fn push_stat(t: &mut MetricTable, name: &str, s: Stat) -> Result<()> {
    Ok(t.push(name, vec![s.mean, s.std])?)
}

fn truth_error(clips: &[Clip], mut predict: impl FnMut(&Clip) -> Result<Vec<ssp_core::model::BodyMotion>>) -> Result<Stat> {
    let mut d = Vec::new();
    for c in clips {
        d.extend(joint_distances(&predict(c)?, c.target().body())?);
    }
    Ok(Stat::of(&d))
}

fn target_path(c: &Clip) -> (Vec<[f64; 2]>, Vec<f64>) {
    let t = c.target();
    let pos = t.formation().iter().map(FormationState::position).collect();
    let head = t.formation().iter().map(|f| heading(f.body_orient())).collect();
    (pos, head)
}

pub fn eval(a: &EvalArgs, paths: &Paths) -> Result<PathBuf> {
    let ck_path = ckpt_path(paths, &a.ckpt)?;
    let ck = load_ckpt(&ck_path, None)?;
    let data_dir = paths.existing(&a.test)?;
    let data = Dataset::load(&data_dir)?;
    let mut manifest = Manifest::new(
        "eval",
        json!({ "task": ck.task().name(), "input_spec": ck.config.input_spec }),
        a.seed,
    )
    .input(&ck_path)
    .input(&data_dir);
    let mut opt = |p: &Option<PathBuf>, task| -> Result<Option<Checkpoint>> {
        match p {
            Some(p) => {
                let p = ckpt_path(paths, p)?;
                manifest.inputs.push(p.clone());
                Ok(Some(load_ckpt(&p, Some(task))?))
            }
            None => Ok(None),
        }
    };
    let form = opt(&a.formation_ckpt, Task::Formation)?;
    let traj = opt(&a.traj_ckpt, Task::Traj2body)?;
    let test = &data.test;
    let frames: usize = test.iter().map(|c| c.length).sum();
    let table = match ck.task() {
        Task::Speaking => {
            let mut t = MetricTable::new(&["accuracy", "frames", "clips"]);
            let acc = speaking_eval(&ck, test, &Default::default(), a.seed)?;
            t.push(ck.config.input_spec.clone(), vec![acc, frames as f64, test.len() as f64])?;
            t
        }
        Task::Formation => {
            let r = formation_eval(&ck, test)?;
            let mut t = MetricTable::new(&[
                "position_mean",
                "position_std",
                "body_mean",
                "body_std",
                "face_mean",
                "face_std",
            ]);
            for (name, e) in [("pooled", r.pooled), ("per-sequence", r.per_sequence)] {
                let row = vec![e.position.mean, e.position.std, e.body.mean, e.body.std, e.face.mean, e.face.std];
                t.push(format!("{}:{name}", ck.config.input_spec), row)?;
            }
            t
        }
        Task::MotionAe => {
            let mut t = gesture_table();
            let e = truth_error(test, |c| Ok(decode(&ck, &encode(&ck, c.target().body())?)?))?;
            push_stat(&mut t, "reconstruction", e)?;
            t
        }
        Task::Traj2body => {
            let mut t = gesture_table();
            let e = truth_error(test, |c| {
                let (p, h) = target_path(c);
                Ok(infer_body_from_trajectory(&ck, &p, &h)?)
            })?;
            push_stat(&mut t, "trajectory", e)?;
            if let Some(f) = &form {
                let e = truth_error(test, |c| Ok(infer_body_from_formation(f, &ck, c)?))?;
                push_stat(&mut t, "formation", e)?;
            }
            t
        }
        Task::Body2body => {
            let mut t = gesture_table();
            let e = truth_error(test, |c| Ok(infer_body_from_partners(&ck, c)?))?;
            push_stat(&mut t, "partners", e)?;
            match (&form, &traj) {
                (Some(f), Some(tr)) => {
                    let e = truth_error(test, |c| {
                        let path = infer_body_from_formation(f, tr, c)?;
                        Ok(hybrid_merge(&path, &infer_body_from_partners(&ck, c)?)?)
                    })?;
                    push_stat(&mut t, "hybrid", e)?;
                }
                (None, None) => {}
                _ => return Err(user("the hybrid row needs both --formation-ckpt and --traj-ckpt")),
            }
            t
        }
    };
    let mut table = table;
    if matches!(ck.task(), Task::MotionAe | Task::Traj2body | Task::Body2body) {
        let pose = mean_pose_baseline(&data.train)?;
        push_stat(&mut table, "mean-pose", baseline_error(&pose, test)?)?;
    }
    let mut stage = Staging::new(&paths.get(&a.out))?;
    write_table(&mut stage, &table, "metrics")?;
    stage.commit(&manifest)
}

pub fn ablate(a: &AblateArgs, paths: &Paths) -> Result<PathBuf> {
    let ck_path = ckpt_path(paths, &a.ckpt)?;
    let ck = load_ckpt(&ck_path, Some(Task::Speaking))?;
    let data_dir = paths.existing(&a.test)?;
    let data = Dataset::load(&data_dir)?;
    let mut groups = modality_groups();
    groups.extend(speaking_groups());
    let r = ablation_sweep(&ck, &data.test, &groups, a.seed)?;
    let mut t = MetricTable::new(&["accuracy", "drop"]);
    t.push("none", vec![r.baseline, 0.0])?;
    for row in &r.rows {
        t.push(row.group.clone(), vec![row.accuracy, row.drop])?;
    }
    let mut stage = Staging::new(&paths.get(&a.out))?;
    write_table(&mut stage, &t, "ablation")?;
    let config = json!({ "input_spec": ck.config.input_spec, "groups": groups.len() });
    stage.commit(&Manifest::new("ablate", config, a.seed).input(&ck_path).input(&data_dir))
}

pub fn proxemics(a: &ProxemicsArgs, paths: &Paths) -> Result<PathBuf> {
    let input = paths.existing(&a.input)?;
    let rows = proxemics_stats(&load_scenes(&input)?)?;
    let mut t = MetricTable::new(&["mean", "std", "min", "max", "frames", "se"]);
    for r in rows {
        t.push(r.pair, vec![r.mean, r.std, r.min, r.max, r.frames as f64, r.se])?;
    }
    let mut stage = Staging::new(&paths.get(&a.out))?;
    write_table(&mut stage, &t, "proxemics")?;
    stage.commit(&Manifest::new("proxemics", json!({}), 0).input(&input))
}

pub fn heatmap(a: &HeatmapArgs, paths: &Paths) -> Result<PathBuf> {
    let input = paths.existing(&a.input)?;
    let h = buyer_centric_heatmap(&load_scenes(&input)?, a.bin, a.extent)?;
    let mut tri = String::from("scene,buyer_x,buyer_z,left_x,left_z,right_x,right_z\n");
    for t in &h.triangles {
        let [b, l, r] = t.points;
        tri.push_str(&format!("{},{},{},{},{},{},{}\n", t.scene, b[0], b[1], l[0], l[1], r[0], r[1]));
    }
    let mut stage = Staging::new(&paths.get(&a.out))?;
    stage.write("heatmap.csv", h.to_csv())?;
    stage.write("triangles.csv", tri)?;
    let config = json!({ "bin": a.bin, "extent": a.extent });
    stage.commit(&Manifest::new("heatmap", config, 0).input(&input))
}

/// Writes the report, then fails with an internal error if any check failed.
pub fn gradcheck(a: &GradcheckArgs, paths: &Paths) -> Result<PathBuf> {
    let mut t = MetricTable::new(&["checked", "skipped", "max_rel_error", "passed"]);
    let mut failed = Vec::new();
    let mut add = |name: String, r: ssp_nn::GradCheckReport| -> Result<()> {
        if !r.passed {
            failed.push(name.clone());
        }
        let row = vec![r.checked as f64, r.skipped as f64, r.max_rel_error, f64::from(u8::from(r.passed))];
        Ok(t.push(name, row)?)
    };
    for (name, r) in ssp_nn::layer_suite(a.tolerance, a.seed)? {
        add(format!("layer:{name}"), r)?;
    }
    for c in task_suite(a.tolerance, a.seed)? {
        add(format!("task:{}", c.name), c.report)?;
    }
    let mut stage = Staging::new(&paths.get(&a.out))?;
    write_table(&mut stage, &t, "gradcheck")?;
    let out = stage.commit(&Manifest::new("gradcheck", json!({ "tolerance": a.tolerance }), a.seed))?;
    if failed.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Internal(format!("gradient check failed for {}", failed.join(", "))))
    }
}
