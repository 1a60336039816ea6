use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use ssp_core::dataio::*;
use ssp_core::geometry::distance;
use ssp_core::model::*;
use ssp_core::synth::{gen_scene_with_id, SynthConfig};
use ssp_core::CoreError;
use ssp_nn::Tensor;

fn scene(seed: u64, frames: usize) -> Scene {
    let cfg = SynthConfig {
        seed,
        duration_frames: frames,
        ..SynthConfig::default()
    };
    gen_scene_with_id(&cfg, format!("s{seed}")).unwrap()
}

#[test]
fn scene_file_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene(3, 90);
    let path = dir.path().join("a.scene");
    save_scene(&s, &path).unwrap();
    let back = load_scene(&path).unwrap();
    assert_eq!(back, s);
    for role in Role::ALL {
        for t in 0..s.len() {
            let a = s.track(role).frame_values(t);
            let b = back.track(role).frame_values(t);
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn truncated_scene_names_missing_track() {
    let text = scene_to_text(&scene(1, 20));
    let cut: Vec<&str> = text.lines().collect();
    let keep = cut.iter().position(|l| l.starts_with("role RightSeller")).unwrap();
    let err = parse_scene(&cut[..keep].join("\n")).unwrap_err();
    match err {
        CoreError::Missing(what) => assert!(what.contains("RightSeller"), "{what}"),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn malformed_number_reports_line_and_frame() {
    let text = scene_to_text(&scene(1, 5));
    let broken = text.replacen("role Buyer\n", "role Buyer\nnot-a-number\n", 1);
    assert!(matches!(parse_scene(&broken), Err(CoreError::Parse { .. })));
}

#[test]
fn single_frame_scene_loads() {
    let s = scene(2, 1);
    let back = parse_scene(&scene_to_text(&s)).unwrap();
    assert_eq!(back.len(), 1);
    for role in Role::ALL {
        assert_eq!(back.track(role).body().len(), 1);
        assert_eq!(back.track(role).speaking().len(), 1);
    }
}

#[test]
fn crop_examples() {
    let s = scene(4, 30);
    let full = crop_to_game(&s).unwrap();
    assert_eq!(full.len(), 30);
    for role in Role::ALL {
        assert_eq!(full.track(role).body()[1..], s.track(role).body()[1..]);
        assert_eq!(full.track(role).face(), s.track(role).face());
    }

    let mut part = s.clone();
    part.game_start = 10;
    part.game_end = 20;
    let c = crop_to_game(&part).unwrap();
    assert_eq!(c.len(), 10);
    for role in Role::ALL {
        let tr = c.track(role);
        assert_eq!(tr.len(), 10);
        assert_eq!(tr.body()[0].slice(BodyPart::RootVelocity), &[0.0, 0.0, 0.0]);
        assert_eq!(tr.formation()[0], s.track(role).formation()[10]);
    }
}

#[test]
fn window_count_examples() {
    for (t, expect) in [(120, 1), (240, 13), (119, 0)] {
        let s = Arc::new(scene(5, t));
        assert_eq!(window_clips(&s, 120, 10).unwrap().len(), expect, "T={t}");
    }
}

#[test]
fn flip_examples() {
    let s = Arc::new(scene(6, 40));
    let c = Clip::new(Arc::clone(&s), 5, 20).unwrap();
    assert_eq!(flip_clip(&flip_clip(&c)), c);

    // The flipped clip's other seller is the original target, mirrored.
    let f = flip_clip(&c);
    for t in 0..c.length {
        let x = c.target().formation()[t].position();
        let y = f.partner2().formation()[t].position();
        assert_eq!(y, [-x[0], x[1]]);
    }
}

#[test]
fn flipped_target_at_plus_fifty_is_minus_fifty() {
    let st = FormationState::new([50.0, 0.0], [0.0, 1.0], [0.0, 1.0]).unwrap();
    let other = FormationState::new([-50.0, 0.0], [0.0, 1.0], [0.0, 1.0]).unwrap();
    let buyer = FormationState::new([0.0, 80.0], [0.0, -1.0], [0.0, -1.0]).unwrap();
    let track = |role, f: FormationState| {
        PersonTrack::new(
            role,
            vec![BodyMotion::new([0.0; BODY_DIM]).unwrap()],
            vec![FaceMotion::new([0.0; FACE_DIM]).unwrap()],
            vec![f],
            vec![SpeakingLabel::SILENT],
        )
        .unwrap()
    };
    let s = Scene::new(
        "x",
        30,
        vec![
            track(Role::Buyer, buyer),
            track(Role::LeftSeller, st),
            track(Role::RightSeller, other),
        ],
        0,
        1,
    )
    .unwrap();
    let f = flip_clip(&Clip::new(Arc::new(s), 0, 1).unwrap());
    assert_eq!(f.partner2().formation()[0].position(), [-50.0, 0.0]);
}

#[test]
fn standardizer_examples() {
    let rows = [[1.0, 5.0], [3.0, 5.0]];
    let st = Standardizer::fit(2, rows.iter().map(|r| r.as_slice())).unwrap();
    assert_eq!(st.mean, vec![2.0, 5.0]);
    assert_eq!(st.std[0], 1.0);
    assert_eq!(st.apply_row(&[1.0, 5.0]), vec![-1.0, 0.0]);
    assert_eq!(st.apply_row(&[3.0, 5.0]), vec![1.0, 0.0]);
    assert!(st.apply_row(&[3.0, 5.0]).iter().all(|v| v.is_finite()));
}

#[test]
fn standardizer_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rows = [[1.5, -2.0, 0.1], [0.25, 7.0, 0.1], [3.0, 1.0, 0.1]];
    let st = Standardizer::fit(3, rows.iter().map(|r| r.as_slice())).unwrap();
    let p = dir.path().join("st.txt");
    st.save(&p).unwrap();
    assert_eq!(Standardizer::load(&p).unwrap(), st);
}

#[test]
fn mask_examples() {
    let rows = [[1.0, 2.0, 3.0], [3.0, 0.0, -1.0]];
    let st = Standardizer::fit(3, rows.iter().map(|r| r.as_slice())).unwrap();
    let x = Tensor::from_fn(2, 3, 4, |b, c, t| (b * 12 + c * 4 + t) as f64 - 5.0).unwrap();
    assert_eq!(mask_channels(&x, &BTreeSet::new(), &st).unwrap(), x);
    let all: BTreeSet<usize> = (0..3).collect();
    assert!(mask_channels(&x, &all, &st).unwrap().data().iter().all(|&v| v == 0.0));
    let one = mask_channels(&x, &[1].into(), &st).unwrap();
    for b in 0..2 {
        for t in 0..4 {
            assert_eq!(one.get(b, 1, t), 0.0);
            assert_eq!(one.get(b, 0, t), x.get(b, 0, t));
        }
    }
    assert!(mask_channels(&x, &[3].into(), &st).is_err());
}

#[test]
fn split_examples() {
    let ids: Vec<String> = (0..10).map(|i| format!("scene{i:02}")).collect();
    let (a, b) = split_ids(&ids, 0.8, 7).unwrap();
    assert_eq!((a.len(), b.len()), (8, 2));
    assert_eq!(split_ids(&ids, 0.8, 7).unwrap(), (a.clone(), b.clone()));
    let mut rev = ids.clone();
    rev.reverse();
    let (ra, rb) = split_ids(&rev, 0.8, 7).unwrap();
    assert_eq!(ra.iter().collect::<BTreeSet<_>>(), a.iter().collect::<BTreeSet<_>>());
    assert_eq!(rb.iter().collect::<BTreeSet<_>>(), b.iter().collect::<BTreeSet<_>>());

    let many: Vec<String> = (0..180).map(|i| format!("s{i}")).collect();
    let (tr, te) = split_ids(&many, DEFAULT_TRAIN_FRACTION, 0).unwrap();
    assert_eq!((tr.len(), te.len()), (140, 40));
}

#[test]
fn preprocess_skips_unverified_and_doubles_with_flip() {
    let a = scene(1, 140);
    let mut b = scene(2, 140);
    b.verified = false;
    let plain = preprocess(&[a.clone(), b.clone()], 120, 10, false).unwrap();
    let flipped = preprocess(&[a, b], 120, 10, true).unwrap();
    assert_eq!(plain.len(), 3);
    assert_eq!(flipped.len(), 6);
    assert!(!flipped[0].flipped && flipped[1].flipped);
}

#[test]
fn clip_index_round_trips_through_container() {
    let scenes: Vec<Arc<Scene>> = [scene(1, 50), scene(2, 50)].map(Arc::new).into();
    let mut clips = window_clips(&scenes[0], 20, 15).unwrap();
    clips.extend(window_clips(&scenes[1], 20, 15).unwrap().iter().map(flip_clip));
    let text = clips_to_container(&clips).to_text();
    let back = clips_from_container(&ssp_core::container::Container::parse(&text).unwrap(), &scenes).unwrap();
    assert_eq!(back, clips);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_clips_cover_predicted_count(t in 1usize..300, f in 1usize..150, stride in 1usize..40) {
        let s = Arc::new(scene(9, t));
        let clips = window_clips(&s, f, stride).unwrap();
        prop_assert_eq!(clips.len(), clip_count(t, f, stride));
        for (k, c) in clips.iter().enumerate() {
            prop_assert_eq!(c.start, k * stride);
            prop_assert!(c.start + c.length <= t);
        }
        if let Some(last) = clips.last() {
            prop_assert!(last.start + stride + f > t);
        }
    }

    #[test]
    fn flip_is_an_involution_and_preserves_distances(seed in 0u64..1000, start in 0usize..40, len in 1usize..20) {
        let s = Arc::new(scene(seed, 60));
        let c = Clip::new(s, start, len).unwrap();
        let f = flip_clip(&c);
        prop_assert_eq!(&flip_clip(&f), &c);
        for t in 0..len {
            let d = |cl: &Clip, a: Role, b: Role| distance(
                cl.person(a).formation()[t].position(),
                cl.person(b).formation()[t].position(),
            );
            let orig = [
                d(&c, Role::Buyer, Role::LeftSeller),
                d(&c, Role::Buyer, Role::RightSeller),
                d(&c, Role::LeftSeller, Role::RightSeller),
            ];
            // Flipping swaps which seller is the target.
            let flip = [
                d(&f, Role::Buyer, Role::RightSeller),
                d(&f, Role::Buyer, Role::LeftSeller),
                d(&f, Role::LeftSeller, Role::RightSeller),
            ];
            for k in 0..3 {
                prop_assert!((orig[k] - flip[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mirror_body_is_an_involution(vals in prop::collection::vec(-100.0f64..100.0, BODY_DIM), contacts in prop::array::uniform4(0.0f64..=1.0)) {
        let mut v = [0.0; BODY_DIM];
        v.copy_from_slice(&vals);
        v[BodyPart::FootContacts.range()].copy_from_slice(&contacts);
        let b = BodyMotion::new(v).unwrap();
        prop_assert_eq!(mirror_body(&mirror_body(&b)), b);
    }

    #[test]
    fn standardizer_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 1..30)) {
        let st = Standardizer::fit(4, rows.iter().map(Vec::as_slice)).unwrap();
        for r in &rows {
            let back = st.invert_row(&st.apply_row(r));
            for (a, b) in r.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn split_membership_ignores_input_order(n in 2usize..60, seed in 0u64..50, frac in 0.05f64..0.95) {
        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        let mut shuffled = ids.clone();
        shuffled.rotate_left(n / 2);
        let (a, b) = split_ids(&ids, frac, seed).unwrap();
        let (c, d) = split_ids(&shuffled, frac, seed).unwrap();
        prop_assert_eq!(a.len() + b.len(), n);
        prop_assert_eq!(a.iter().collect::<BTreeSet<_>>(), c.iter().collect::<BTreeSet<_>>());
        prop_assert_eq!(b.iter().collect::<BTreeSet<_>>(), d.iter().collect::<BTreeSet<_>>());
    }
}
