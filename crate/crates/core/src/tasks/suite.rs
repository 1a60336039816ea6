use ssp_nn::{GradCheckReport, LossKind};

use super::gesture::*;
use super::{formation, grad_check_task, speaking, Batch, Checkpoint, Task, TrainConfig};
use crate::dataio::preprocess;
use crate::error::Result;
use crate::synth::{gen_scenes, SynthConfig};

/// One named gradient check of an assembled task model.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskCheck {
    pub name: String,
    pub report: GradCheckReport,
}

/// Gradient checks of all five task models on a small synthetic batch, once
/// freshly initialized and once after a single optimizer step.
pub fn task_suite(tolerance: f64, seed: u64) -> Result<Vec<TaskCheck>> {
    let synth = SynthConfig {
        seed,
        duration_frames: 80,
        ..SynthConfig::default()
    };
    let clips = preprocess(&gen_scenes(&synth, 4)?, 8, 8, true)?;
    let cfg = |task, steps| TrainConfig {
        batch: 4,
        seed,
        max_steps: Some(steps),
        ..TrainConfig::for_task(task)
    };
    let idx = [0, 1];
    let (ae, _) = train_motion_ae(&clips, &cfg(Task::MotionAe, 1))?;
    let mut out = Vec::new();
    for steps in [0, 1] {
        let mut models: Vec<(Checkpoint, Batch, LossKind)> = Vec::new();
        let (ck, _) = speaking::train(&clips, &cfg(Task::Speaking, steps))?;
        let b = speaking::batch(&ck, &clips, &[], &idx)?;
        models.push((ck, b, LossKind::Bce));
        let (ck, _) = formation::train(&clips, &cfg(Task::Formation, steps))?;
        let b = formation::batch(&ck, &clips, &idx)?;
        models.push((ck, b, LossKind::Mse));
        let (ck, _) = train_motion_ae(&clips, &cfg(Task::MotionAe, steps))?;
        let b = motion_ae_batch(&ck, &clips, &idx)?;
        models.push((ck, b, LossKind::Mse));
        let (ck, _) = train_traj2body(&clips, &ae, &cfg(Task::Traj2body, steps))?;
        let b = traj2body_batch(&ck, &clips, &idx)?;
        models.push((ck, b, LossKind::Mse));
        let (ck, _) = train_body2body(&clips, &ae, &cfg(Task::Body2body, steps))?;
        let b = body2body_batch(&ck, &clips, &idx)?;
        models.push((ck, b, LossKind::Mse));
        for (mut ck, b, loss) in models {
            let report = grad_check_task(&mut ck, &b, loss, tolerance, seed)?;
            out.push(TaskCheck {
                name: format!("{}@{steps}", ck.task()),
                report,
            });
        }
    }
    Ok(out)
}
