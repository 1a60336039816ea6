use std::collections::BTreeSet;
use std::sync::Arc;

use ssp_core::dataio::{preprocess, window_clips};
use ssp_core::geometry::global_to_deltas;
use ssp_core::model::*;
use ssp_core::synth::{gen_scenes, SynthConfig};
use ssp_core::tasks::gesture::*;
use ssp_core::tasks::speaking::{self, SpeakingInput};
use ssp_core::tasks::*;

const GRAD_TOL: f64 = 1e-4;

fn scenes(n: usize, frames: usize) -> Vec<Scene> {
    let cfg = SynthConfig {
        duration_frames: frames,
        ..SynthConfig::default()
    };
    gen_scenes(&cfg, n).unwrap()
}

fn clips(window: usize) -> Vec<Clip> {
    preprocess(&scenes(4, 80), window, window, true).unwrap()
}

fn cfg(task: Task, steps: usize) -> TrainConfig {
    TrainConfig {
        batch: 4,
        max_steps: Some(steps),
        ..TrainConfig::for_task(task)
    }
}

fn speaking_cfg(input: &str, steps: usize) -> TrainConfig {
    TrainConfig {
        input_spec: input.into(),
        ..cfg(Task::Speaking, steps)
    }
}

fn long_track(frames: usize) -> PersonTrack {
    scenes(1, frames)[0].track(Role::LeftSeller).clone()
}

#[test]
fn untrained_speaking_net_predicts_near_half() {
    let c = clips(20);
    let (ck, rep) = speaking::train(&c, &speaking_cfg("self-face-body", 0)).unwrap();
    assert_eq!(rep.steps, 0);
    let p = speaking::predict(&ck, &c[0].target()).unwrap();
    let mean = p.prob.iter().sum::<f64>() / p.prob.len() as f64;
    assert!((mean - 0.5).abs() < 0.1, "mean {mean}");
    assert!(p.prob.iter().all(|&q| (q - 0.5).abs() < 0.3), "{:?}", p.prob);
}

#[test]
fn speaking_accepts_arbitrary_lengths_deterministically() {
    let (ck, _) = speaking::train(&clips(20), &speaking_cfg("self-face", 2)).unwrap();
    for n in [2, 3, 7, 300] {
        let tr = long_track(n);
        let a = speaking::predict(&ck, &tr).unwrap();
        assert_eq!(a.prob.len(), n);
        assert!(a.prob.iter().all(|&p| p > 0.0 && p < 1.0));
        assert_eq!(a, speaking::predict(&ck, &tr).unwrap());
        assert_eq!(a.label, a.prob.iter().map(|&p| p >= 0.5).collect::<Vec<_>>());
    }
}

#[test]
fn masked_and_full_inputs_share_one_architecture() {
    let c = clips(20);
    let shapes: Vec<_> = SpeakingInput::ALL
        .into_iter()
        .map(|i| {
            let (ck, _) = speaking::train(&c, &speaking_cfg(i.name(), 0)).unwrap();
            ck.chain.param_shapes()
        })
        .collect();
    assert!(shapes.windows(2).all(|w| w[0] == w[1]));
    let f: Vec<_> = formation::FormationInput::ALL
        .into_iter()
        .map(|i| {
            let cf = TrainConfig {
                input_spec: i.name().into(),
                ..cfg(Task::Formation, 0)
            };
            formation::train(&c, &cf).unwrap().0.chain.param_shapes()
        })
        .collect();
    assert!(f.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn input_masks_follow_condition_names() {
    let face: BTreeSet<usize> = speaking::FACE_CHANNELS.collect();
    let body: BTreeSet<usize> = speaking::BODY_CHANNELS.collect();
    assert_eq!(SpeakingInput::SelfFace.mask(), body);
    assert_eq!(SpeakingInput::OtherBody.mask(), face);
    assert!(SpeakingInput::SelfFaceBody.mask().is_empty());
    assert!(formation::FormationInput::Full.mask().is_empty());
    assert_eq!(formation::FormationInput::PosOnly.mask().len(), 8);
}

#[test]
fn empty_training_sets_are_rejected() {
    assert!(speaking::train(&[], &speaking_cfg("self-face", 1)).is_err());
    assert!(formation::train(&[], &cfg(Task::Formation, 1)).is_err());
    assert!(train_motion_ae(&[], &cfg(Task::MotionAe, 1)).is_err());
}

#[test]
fn random_person_needs_two_scenes() {
    let one = preprocess(&scenes(1, 80), 20, 20, false).unwrap();
    assert!(speaking::train(&one, &speaking_cfg("random-person", 1)).is_err());
    let many = clips(20);
    let src = speaking::unrelated_sources(&many, 3).unwrap();
    for (i, &j) in src.iter().enumerate() {
        assert_ne!(many[i].scene_id(), many[j].scene_id());
    }
}

#[test]
fn formation_output_is_renormalized_and_full_length() {
    let c = clips(20);
    let (ck, _) = formation::train(&c, &cfg(Task::Formation, 3)).unwrap();
    let tr = scenes(1, 31).remove(0);
    let clip = Clip::new(Arc::new(tr), 0, 31).unwrap();
    let states = formation::predict_clip(&ck, &clip).unwrap();
    assert_eq!(states.len(), 31);
    for s in &states {
        let n = |o: [f64; 2]| o[0].hypot(o[1]);
        assert!((n(s.body_orient()) - 1.0).abs() < UNIT_TOLERANCE);
        assert!((n(s.face_orient()) - 1.0).abs() < UNIT_TOLERANCE);
    }
}

#[test]
fn degenerate_orientation_holds_previous_frame() {
    let raw = [
        [0.0, 0.0, 3.0, 4.0, 0.0, 2.0],
        [1.0, 1.0, 0.0, 0.0, 1e-9, 0.0],
    ];
    let s = formation::to_states(&raw).unwrap();
    assert_eq!(s[0].body_orient(), [0.6, 0.8]);
    assert_eq!(s[1].body_orient(), [0.6, 0.8]);
    assert_eq!(s[1].face_orient(), [0.0, 1.0]);
}

#[test]
fn checkpoint_task_mismatch_is_an_error() {
    let c = clips(20);
    let (sp, _) = speaking::train(&c, &speaking_cfg("self-face", 0)).unwrap();
    assert!(formation::predict_clip(&sp, &c[0]).is_err());
    assert!(train_traj2body(&c, &sp, &cfg(Task::Traj2body, 1)).is_err());
    assert!(train_body2body(&c, &sp, &cfg(Task::Body2body, 1)).is_err());
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let c = clips(20);
    let (ae, _) = train_motion_ae(&c, &cfg(Task::MotionAe, 2)).unwrap();
    let (tb, _) = train_traj2body(&c, &ae, &cfg(Task::Traj2body, 2)).unwrap();
    for ck in [ae, tb] {
        let p = dir.path().join(format!("{}.ckpt", ck.task()));
        ck.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap();
        assert_eq!(back.to_container().to_text(), ck.to_container().to_text());
        assert_eq!(back.config, ck.config);
    }
}

#[test]
fn training_is_reproducible() {
    let c = clips(20);
    let a = speaking::train(&c, &speaking_cfg("self-face-body", 3)).unwrap();
    let b = speaking::train(&c, &speaking_cfg("self-face-body", 3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn autoencoder_shapes_and_loss_decrease() {
    let c = clips(20);
    let mut tc = cfg(Task::MotionAe, 40);
    tc.lr = 3e-3;
    let (ae, rep) = train_motion_ae(&c, &tc).unwrap();
    assert!(rep.final_loss < rep.initial_loss, "{rep:?}");
    let body = c[0].target().body().to_vec();
    let z = encode(&ae, &body).unwrap();
    assert_eq!(z.dims(), [1, AE_LATENT, body.len() / 2]);
    assert_eq!(decode(&ae, &z).unwrap().len(), body.len());
}

#[test]
fn decoder_stays_frozen_through_regressor_training() {
    let c = clips(20);
    let (ae, _) = train_motion_ae(&c, &cfg(Task::MotionAe, 2)).unwrap();
    let before = decoder_checksum(&ae).unwrap();
    let (tb, _) = train_traj2body(&c, &ae, &cfg(Task::Traj2body, 5)).unwrap();
    let (bb, _) = train_body2body(&c, &ae, &cfg(Task::Body2body, 5)).unwrap();
    assert_eq!(decoder_checksum(&tb).unwrap(), before);
    assert_eq!(decoder_checksum(&bb).unwrap(), before);
    let values = |ck: &Checkpoint, stage: &str| -> Vec<Vec<f64>> {
        ck.chain.stage(stage).unwrap().net.params().iter().map(|p| p.value.clone()).collect()
    };
    assert_eq!(values(&tb, "decoder"), values(&ae, "decoder"));
    let fresh = init_traj2body(&cfg(Task::Traj2body, 0), &ae).unwrap();
    assert_ne!(values(&tb, "regressor"), values(&fresh, "regressor"));
}

#[test]
fn traj2body_trains_on_root_velocity_slice() {
    let c = clips(20);
    let (ae, _) = train_motion_ae(&c, &cfg(Task::MotionAe, 1)).unwrap();
    let tb = init_traj2body(&cfg(Task::Traj2body, 0), &ae).unwrap();
    let b = traj2body_batch(&tb, &c, &[0]).unwrap();
    let st = &tb.input_st;
    let target = c[0].target();
    for t in 0..target.len() {
        let rv = body_slice(&target.body()[t], BodyPart::RootVelocity);
        for (k, v) in rv.iter().enumerate() {
            assert_eq!(b.x.get(0, k, t), st.apply_value(k, *v));
        }
    }
}

#[test]
fn static_formation_gives_zero_deltas_and_inferred_body_keeps_length() {
    let positions = vec![[10.0, -4.0]; 12];
    let headings = vec![0.3; 12];
    assert!(global_to_deltas(&positions, &headings).iter().all(|d| *d == [0.0; 3]));

    let c = clips(20);
    let (ae, _) = train_motion_ae(&c, &cfg(Task::MotionAe, 1)).unwrap();
    let (tb, _) = train_traj2body(&c, &ae, &cfg(Task::Traj2body, 1)).unwrap();
    let (fk, _) = formation::train(&c, &cfg(Task::Formation, 1)).unwrap();
    let s = Arc::new(scenes(1, 25).remove(0));
    let clip = window_clips(&s, 25, 25).unwrap().remove(0);
    let body = infer_body_from_formation(&fk, &tb, &clip).unwrap();
    assert_eq!(body.len(), 25);
    let still = infer_body_from_trajectory(&tb, &positions, &headings).unwrap();
    assert!(still.iter().all(|b| body_slice(b, BodyPart::RootVelocity) == [0.0; 3]));
    assert!(still
        .iter()
        .flat_map(|b| body_slice(b, BodyPart::FootContacts).to_vec())
        .all(|v| (0.0..=1.0).contains(&v)));
}

#[test]
fn body2body_inference_is_deterministic() {
    let c = clips(20);
    let (ae, _) = train_motion_ae(&c, &cfg(Task::MotionAe, 1)).unwrap();
    let (bb, _) = train_body2body(&c, &ae, &cfg(Task::Body2body, 2)).unwrap();
    let a = infer_body_from_partners(&bb, &c[1]).unwrap();
    assert_eq!(a.len(), c[1].length);
    assert_eq!(a, infer_body_from_partners(&bb, &c[1]).unwrap());
}

#[test]
fn hybrid_merge_routes_rows() {
    let c = clips(20);
    let x = c[0].target().body().to_vec();
    let y = c[3].target().body().to_vec();
    assert_eq!(hybrid_merge(&x, &x).unwrap(), x);
    let h = hybrid_merge(&x, &y).unwrap();
    for t in 0..x.len() {
        for part in [BodyPart::RootProjection, BodyPart::RootVelocity, BodyPart::FootContacts] {
            assert_eq!(h[t].slice(part), x[t].slice(part));
        }
        for j in Joint::ALL {
            let want = if j.is_lower_body() { x[t].joint(j) } else { y[t].joint(j) };
            assert_eq!(h[t].joint(j), want, "{}", j.name());
        }
        assert_eq!(h[t].joint(Joint::LeftWrist), y[t].joint(Joint::LeftWrist));
        assert_eq!(h[t].joint(Joint::RightWrist), y[t].joint(Joint::RightWrist));
    }
    assert!(hybrid_merge(&x, &y[1..]).is_err());
}

/// Grad check at initialization and after one optimizer step.
#[test]
fn all_task_models_pass_gradient_checks() {
    let suite = task_suite(GRAD_TOL, 17).unwrap();
    assert_eq!(suite.len(), 10);
    for c in suite {
        assert!(c.report.passed && c.report.checked > 0, "{}: {:?}", c.name, c.report);
    }
}

#[test]
fn train_config_round_trips_and_validates() {
    let c = TrainConfig {
        lambda_l1: Some(0.5),
        lr_final: Some(1e-5),
        dropout: Some(0.0),
        ..cfg(Task::Formation, 9)
    };
    assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
    assert!(TrainConfig::from_toml("batch = 0").is_err());
    assert!(TrainConfig::from_toml("dropout = 1.0").is_err());
    assert!(TrainConfig::from_toml("nonsense = 1").is_err());
    assert_eq!(TrainConfig::for_task(Task::Formation).lambda(), 0.1);
    assert_eq!(TrainConfig::for_task(Task::Speaking).lambda(), 0.001);
}
