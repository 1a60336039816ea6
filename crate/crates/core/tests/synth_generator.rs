use proptest::prelude::*;
use ssp_core::eval::turn_taking_measure;
use ssp_core::geometry::{distance, heading, integrate_deltas};
use ssp_core::model::*;
use ssp_core::synth::*;

fn cfg(seed: u64, frames: usize) -> SynthConfig {
    SynthConfig {
        seed,
        duration_frames: frames,
        ..SynthConfig::default()
    }
}

fn static_cfg(seed: u64, frames: usize) -> SynthConfig {
    SynthConfig {
        noise_pos_sigma: 0.0,
        noise_orient_sigma: 0.0,
        reform_every: 0,
        ..cfg(seed, frames)
    }
}

#[test]
fn same_seed_gives_identical_scenes() {
    assert_eq!(gen_scene(&cfg(11, 300)).unwrap(), gen_scene(&cfg(11, 300)).unwrap());
    assert_ne!(gen_scene(&cfg(11, 300)).unwrap(), gen_scene(&cfg(12, 300)).unwrap());
}

#[test]
fn zero_noise_triangle_is_static_and_within_bounds() {
    let c = static_cfg(5, 200);
    let s = gen_scene(&c).unwrap();
    let pairs = [
        (Role::Buyer, Role::RightSeller, c.buyer_right),
        (Role::Buyer, Role::LeftSeller, c.buyer_left),
        (Role::LeftSeller, Role::RightSeller, c.left_right),
    ];
    for (a, b, p) in pairs {
        let d0 = distance(s.track(a).formation()[0].position(), s.track(b).formation()[0].position());
        assert!(d0 >= p.min && d0 <= p.max, "{d0} outside [{}, {}]", p.min, p.max);
        for t in 0..s.len() {
            let d = distance(s.track(a).formation()[t].position(), s.track(b).formation()[t].position());
            assert_eq!(d, d0);
        }
    }
}

#[test]
fn default_buyer_left_distance_matches_reference_mean() {
    let c = cfg(21, 10_200);
    let s = gen_scene(&c).unwrap();
    let (b, l) = (s.track(Role::Buyer), s.track(Role::LeftSeller));
    // Formation segments are redrawn every `reform_every` frames; their
    // means are the independent units.
    let means: Vec<f64> = (0..s.len())
        .collect::<Vec<_>>()
        .chunks(c.reform_every)
        .map(|ts| {
            ts.iter()
                .map(|&t| distance(b.formation()[t].position(), l.formation()[t].position()))
                .sum::<f64>()
                / ts.len() as f64
        })
        .collect();
    let k = means.len() as f64;
    let m = means.iter().sum::<f64>() / k;
    let se = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
    assert!((m - DistanceParams::BUYER_LEFT.mean).abs() <= 2.0 * se, "mean {m} se {se}");
}

#[test]
fn turn_taking_one_never_overlaps() {
    let c = SynthConfig {
        turn_taking: 1.0,
        ..cfg(3, 6000)
    };
    let [_, l, r] = gen_speaking(&c);
    assert_eq!(turn_taking_measure(&l, &r).unwrap(), 100.0);
}

#[test]
fn turn_taking_half_overlaps_sometimes() {
    let c = SynthConfig {
        turn_taking: 0.5,
        ..cfg(4, 30_000)
    };
    let [_, l, r] = gen_speaking(&c);
    let m = turn_taking_measure(&l, &r).unwrap();
    assert!(m > 60.0 && m < 100.0, "{m}");
}

#[test]
fn zero_duration_gives_empty_sequences() {
    let c = cfg(1, 0);
    assert!(gen_speaking(&c).iter().all(Vec::is_empty));
    assert!(gen_formation_track(&c).unwrap().iter().all(Vec::is_empty));
    assert!(gen_scene(&c).is_err());
}

#[test]
fn no_planted_signal_leaves_face_uninformative() {
    let c = SynthConfig {
        mouth_gain: 0.0,
        gesture_amp: 0.0,
        ..cfg(8, 20_000)
    };
    let s = gen_scene(&c).unwrap();
    let l = s.track(Role::LeftSeller);
    let n = l.len() as f64;
    let p = l.speaking().iter().filter(|x| x.is_speaking()).count() as f64 / n;
    let chance = p.max(1.0 - p);
    // Frames are autocorrelated; allow a generous interval.
    let ci = 6.0 * (chance * (1.0 - chance) / n).sqrt() + 0.01;
    for thr in [-0.5, -0.25, 0.0, 0.25, 0.5] {
        for above in [true, false] {
            let acc = l
                .face()
                .iter()
                .zip(l.speaking())
                .filter(|(f, s)| (f.coeffs()[0] > thr) == above && s.is_speaking()
                    || (f.coeffs()[0] > thr) != above && !s.is_speaking())
                .count() as f64
                / n;
            assert!(acc <= chance + ci, "threshold {thr}: {acc} vs chance {chance}");
        }
    }
    let wrist = Joint::RightWrist;
    let w0 = l.body()[0].joint(wrist);
    assert!(l.body().iter().all(|b| b.joint(wrist) == w0));
}

#[test]
fn walking_contacts_alternate_between_feet() {
    // A track that stands, then walks steadily along +z.
    let mut pos = vec![[0.0, 0.0]; 30];
    pos.extend((1..=200).map(|k| [0.0, 2.0 * k as f64]));
    let c = gait_contacts(&pos);
    assert!(c[..30].iter().all(|f| *f == [1.0; 4]));
    assert!(c.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    let walking = &c[80..];
    let left_peaks = walking.iter().filter(|f| f[FOOT_LEFT_HEEL] > 0.95).count();
    let right_peaks = walking.iter().filter(|f| f[FOOT_RIGHT_HEEL] > 0.95).count();
    let both = walking
        .iter()
        .filter(|f| f[FOOT_LEFT_HEEL] > 0.95 && f[FOOT_RIGHT_HEEL] > 0.95)
        .count();
    assert!(left_peaks > 0 && right_peaks > 0);
    assert_eq!(both, 0);
}

#[test]
fn stationary_body_has_zero_root_velocity() {
    let s = gen_scene(&static_cfg(9, 50)).unwrap();
    for b in s.track(Role::LeftSeller).body() {
        assert_eq!(body_slice(b, BodyPart::RootVelocity), &[0.0, 0.0, 0.0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn orientations_are_unit_everywhere(seed in 0u64..10_000) {
        let s = gen_scene(&cfg(seed, 400)).unwrap();
        for tr in s.tracks() {
            for f in tr.formation() {
                prop_assert!((f.body_orient()[0].hypot(f.body_orient()[1]) - 1.0).abs() < UNIT_TOLERANCE);
                prop_assert!((f.face_orient()[0].hypot(f.face_orient()[1]) - 1.0).abs() < UNIT_TOLERANCE);
            }
        }
    }

    #[test]
    fn root_velocity_integrates_to_positions(seed in 0u64..10_000) {
        let s = gen_scene(&cfg(seed, 600)).unwrap();
        for tr in s.tracks() {
            let deltas: Vec<[f64; 3]> = tr
                .body()
                .iter()
                .map(|b| {
                    let v = b.slice(BodyPart::RootVelocity);
                    [v[0], v[1], v[2]]
                })
                .collect();
            let f0 = tr.formation()[0];
            let (pos, _) = integrate_deltas(f0.position(), heading(f0.body_orient()), &deltas);
            for (p, f) in pos.iter().zip(tr.formation()) {
                prop_assert!(distance(*p, f.position()) < 1e-6);
            }
            for (b, f) in tr.body().iter().zip(tr.formation()) {
                let rp = b.slice(BodyPart::RootProjection);
                prop_assert_eq!([rp[0], rp[2]], f.position());
            }
        }
    }
}
