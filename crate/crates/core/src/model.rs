//! Domain types for triadic interaction data and the canonical channel layout.
//!
//! Body layout (73 values per frame):
//!
//! | range    | content                                                         |
//! |----------|-----------------------------------------------------------------|
//! | 0..63    | 21 joints × (x, y, z), cm, person-centric (root at origin, +z forward) |
//! | 63..66   | root projected on the floor: global (x, 0, z), cm               |
//! | 66..69   | root velocity: Δx, Δz (cm, previous frame's local axes), Δheading (rad) |
//! | 69..73   | foot contacts: left heel, left toe, right heel, right toe        |

use std::ops::Range;
use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::geometry::{is_unit, normalize};

pub const BODY_DIM: usize = 73;
pub const FACE_DIM: usize = 5;
pub const FORMATION_DIM: usize = 6;
pub const NUM_JOINTS: usize = 21;
/// Values per frame in the scene file: body, face, formation, speaking.
pub const FRAME_DIM: usize = BODY_DIM + FACE_DIM + FORMATION_DIM + 1;
pub const DEFAULT_FPS: u32 = 30;
/// Tolerance on the Euclidean norm of orientation vectors.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BodyPart {
    Joints,
    RootProjection,
    RootVelocity,
    FootContacts,
}

impl BodyPart {
    pub const ALL: [BodyPart; 4] = [
        BodyPart::Joints,
        BodyPart::RootProjection,
        BodyPart::RootVelocity,
        BodyPart::FootContacts,
    ];

    pub fn range(self) -> Range<usize> {
        match self {
            BodyPart::Joints => 0..63,
            BodyPart::RootProjection => 63..66,
            BodyPart::RootVelocity => 66..69,
            BodyPart::FootContacts => 69..73,
        }
    }
}

/// The fixed 21-joint skeleton. Discriminants are row indices into the
/// joint block of [`BodyMotion`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Joint {
    Root = 0,
    Spine,
    Chest,
    Neck,
    Head,
    LeftClavicle,
    LeftShoulder,
    LeftElbow,
    LeftWrist,
    RightClavicle,
    RightShoulder,
    RightElbow,
    RightWrist,
    LeftHip,
    LeftKnee,
    LeftAnkle,
    LeftToe,
    RightHip,
    RightKnee,
    RightAnkle,
    RightToe,
}

impl Joint {
    pub const ALL: [Joint; NUM_JOINTS] = [
        Joint::Root,
        Joint::Spine,
        Joint::Chest,
        Joint::Neck,
        Joint::Head,
        Joint::LeftClavicle,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::LeftWrist,
        Joint::RightClavicle,
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::RightWrist,
        Joint::LeftHip,
        Joint::LeftKnee,
        Joint::LeftAnkle,
        Joint::LeftToe,
        Joint::RightHip,
        Joint::RightKnee,
        Joint::RightAnkle,
        Joint::RightToe,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Root => "root",
            Joint::Spine => "spine",
            Joint::Chest => "chest",
            Joint::Neck => "neck",
            Joint::Head => "head",
            Joint::LeftClavicle => "l_clavicle",
            Joint::LeftShoulder => "l_shoulder",
            Joint::LeftElbow => "l_elbow",
            Joint::LeftWrist => "l_wrist",
            Joint::RightClavicle => "r_clavicle",
            Joint::RightShoulder => "r_shoulder",
            Joint::RightElbow => "r_elbow",
            Joint::RightWrist => "r_wrist",
            Joint::LeftHip => "l_hip",
            Joint::LeftKnee => "l_knee",
            Joint::LeftAnkle => "l_ankle",
            Joint::LeftToe => "l_toe",
            Joint::RightHip => "r_hip",
            Joint::RightKnee => "r_knee",
            Joint::RightAnkle => "r_ankle",
            Joint::RightToe => "r_toe",
        }
    }

    /// Left/right counterpart; midline joints map to themselves.
    pub fn mirror(self) -> Joint {
        use Joint::*;
        match self {
            LeftClavicle => RightClavicle,
            LeftShoulder => RightShoulder,
            LeftElbow => RightElbow,
            LeftWrist => RightWrist,
            LeftHip => RightHip,
            LeftKnee => RightKnee,
            LeftAnkle => RightAnkle,
            LeftToe => RightToe,
            RightClavicle => LeftClavicle,
            RightShoulder => LeftShoulder,
            RightElbow => LeftElbow,
            RightWrist => LeftWrist,
            RightHip => LeftHip,
            RightKnee => LeftKnee,
            RightAnkle => LeftAnkle,
            RightToe => LeftToe,
            other => other,
        }
    }

    /// Root and both leg chains.
    pub fn is_lower_body(self) -> bool {
        use Joint::*;
        matches!(
            self,
            Root | LeftHip | LeftKnee | LeftAnkle | LeftToe | RightHip | RightKnee | RightAnkle | RightToe
        )
    }

    pub fn channels(self) -> Range<usize> {
        3 * self.index()..3 * self.index() + 3
    }
}

/// Foot-contact channels in order, as offsets into [`BodyPart::FootContacts`].
pub const FOOT_LEFT_HEEL: usize = 0;
pub const FOOT_LEFT_TOE: usize = 1;
pub const FOOT_RIGHT_HEEL: usize = 2;
pub const FOOT_RIGHT_TOE: usize = 3;

/// One frame of body motion. Always 73 finite values with contacts in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyMotion([f64; BODY_DIM]);

impl BodyMotion {
    pub fn new(values: [f64; BODY_DIM]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::invalid("BodyMotion", format!("value {i} is not finite")));
        }
        for (i, c) in values[BodyPart::FootContacts.range()].iter().enumerate() {
            if !(0.0..=1.0).contains(c) {
                return Err(CoreError::invalid(
                    "BodyMotion",
                    format!("foot contact {i} = {c} outside [0, 1]"),
                ));
            }
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; BODY_DIM] = values.try_into().map_err(|_| {
            CoreError::invalid("BodyMotion", format!("expected {BODY_DIM} values, got {}", values.len()))
        })?;
        Self::new(arr)
    }

    pub fn values(&self) -> &[f64; BODY_DIM] {
        &self.0
    }

    pub fn slice(&self, part: BodyPart) -> &[f64] {
        &self.0[part.range()]
    }

    pub fn joint(&self, j: Joint) -> [f64; 3] {
        let r = j.channels();
        [self.0[r.start], self.0[r.start + 1], self.0[r.start + 2]]
    }

    /// Returns a copy with `part` replaced; fails if the result is invalid.
    pub fn with_slice(&self, part: BodyPart, values: &[f64]) -> Result<Self> {
        let mut v = self.0;
        let r = part.range();
        if values.len() != r.len() {
            return Err(CoreError::invalid("BodyMotion", "slice length mismatch"));
        }
        v[r].copy_from_slice(values);
        Self::new(v)
    }
}

/// Equivalent to [`body_slice`] as a free function.
pub fn body_slice(b: &BodyMotion, part: BodyPart) -> &[f64] {
    b.slice(part)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceMotion([f64; FACE_DIM]);

impl FaceMotion {
    pub fn new(coeffs: [f64; FACE_DIM]) -> Result<Self> {
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("FaceMotion", "non-finite coefficient"));
        }
        Ok(Self(coeffs))
    }

    pub fn coeffs(&self) -> &[f64; FACE_DIM] {
        &self.0
    }
}

/// Ground-plane position and unit body/face orientations, global frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormationState {
    position: [f64; 2],
    body_orient: [f64; 2],
    face_orient: [f64; 2],
}

impl FormationState {
    /// Strict constructor: orientations must already be unit length.
    pub fn new(position: [f64; 2], body_orient: [f64; 2], face_orient: [f64; 2]) -> Result<Self> {
        let all = [position, body_orient, face_orient];
        if all.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("FormationState", "non-finite component"));
        }
        for (name, o) in [("body_orient", body_orient), ("face_orient", face_orient)] {
            if !is_unit(o, UNIT_TOLERANCE) {
                return Err(CoreError::invalid(
                    "FormationState",
                    format!("{name} {o:?} is not unit length"),
                ));
            }
        }
        Ok(Self {
            position,
            body_orient,
            face_orient,
        })
    }

    /// Renormalizing constructor; fails only for (near-)zero or non-finite vectors.
    pub fn new_normalized(position: [f64; 2], body_orient: [f64; 2], face_orient: [f64; 2]) -> Result<Self> {
        let b = normalize(body_orient)
            .ok_or_else(|| CoreError::invalid("FormationState", "zero body orientation"))?;
        let f = normalize(face_orient)
            .ok_or_else(|| CoreError::invalid("FormationState", "zero face orientation"))?;
        Self::new(position, b, f)
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }

    pub fn body_orient(&self) -> [f64; 2] {
        self.body_orient
    }

    pub fn face_orient(&self) -> [f64; 2] {
        self.face_orient
    }

    /// `[x, z, θx, θz, φx, φz]`
    pub fn to_vec6(&self) -> [f64; FORMATION_DIM] {
        formation_vec(self)
    }

    pub fn from_vec6(v: &[f64]) -> Result<Self> {
        if v.len() != FORMATION_DIM {
            return Err(CoreError::invalid("FormationState", "expected 6 values"));
        }
        Self::new([v[0], v[1]], [v[2], v[3]], [v[4], v[5]])
    }
}

pub fn formation_vec(s: &FormationState) -> [f64; FORMATION_DIM] {
    let [x, z] = s.position;
    let [bx, bz] = s.body_orient;
    let [fx, fz] = s.face_orient;
    [x, z, bx, bz, fx, fz]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpeakingLabel(bool);

impl SpeakingLabel {
    pub const SILENT: SpeakingLabel = SpeakingLabel(false);
    pub const SPEAKING: SpeakingLabel = SpeakingLabel(true);

    pub fn from_value(v: f64) -> Result<Self> {
        if v == 0.0 {
            Ok(Self(false))
        } else if v == 1.0 {
            Ok(Self(true))
        } else {
            Err(CoreError::invalid("SpeakingLabel", format!("{v} is not 0 or 1")))
        }
    }

    pub fn is_speaking(self) -> bool {
        self.0
    }

    pub fn value(self) -> u8 {
        u8::from(self.0)
    }
}

impl From<bool> for SpeakingLabel {
    fn from(b: bool) -> Self {
        Self(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Buyer,
    LeftSeller,
    RightSeller,
}

impl Role {
    /// Storage order inside a [`Scene`].
    pub const ALL: [Role; 3] = [Role::Buyer, Role::LeftSeller, Role::RightSeller];

    pub fn index(self) -> usize {
        match self {
            Role::Buyer => 0,
            Role::LeftSeller => 1,
            Role::RightSeller => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Buyer => "Buyer",
            Role::LeftSeller => "LeftSeller",
            Role::RightSeller => "RightSeller",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.name() == s)
    }
}

/// Every signal of one subject over time; all sequences share one length.
#[derive(Clone, Debug, PartialEq)]
pub struct PersonTrack {
    pub role: Role,
    body: Vec<BodyMotion>,
    face: Vec<FaceMotion>,
    formation: Vec<FormationState>,
    speaking: Vec<SpeakingLabel>,
}

impl PersonTrack {
    pub fn new(
        role: Role,
        body: Vec<BodyMotion>,
        face: Vec<FaceMotion>,
        formation: Vec<FormationState>,
        speaking: Vec<SpeakingLabel>,
    ) -> Result<Self> {
        let n = body.len();
        if n == 0 {
            return Err(CoreError::invalid("PersonTrack", "empty track"));
        }
        if face.len() != n || formation.len() != n || speaking.len() != n {
            return Err(CoreError::invalid(
                "PersonTrack",
                format!(
                    "length mismatch: body {n}, face {}, formation {}, speaking {}",
                    face.len(),
                    formation.len(),
                    speaking.len()
                ),
            ));
        }
        Ok(Self {
            role,
            body,
            face,
            formation,
            speaking,
        })
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    pub fn body(&self) -> &[BodyMotion] {
        &self.body
    }

    pub fn face(&self) -> &[FaceMotion] {
        &self.face
    }

    pub fn formation(&self) -> &[FormationState] {
        &self.formation
    }

    pub fn speaking(&self) -> &[SpeakingLabel] {
        &self.speaking
    }

    /// Frames `range`, keeping the role.
    pub fn window(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(CoreError::invalid(
                "PersonTrack",
                format!("window {range:?} outside 0..{}", self.len()),
            ));
        }
        Ok(Self {
            role: self.role,
            body: self.body[range.clone()].to_vec(),
            face: self.face[range.clone()].to_vec(),
            formation: self.formation[range.clone()].to_vec(),
            speaking: self.speaking[range].to_vec(),
        })
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn with_body(mut self, body: Vec<BodyMotion>) -> Result<Self> {
        if body.len() != self.len() {
            return Err(CoreError::invalid("PersonTrack", "body length mismatch"));
        }
        self.body = body;
        Ok(self)
    }

    /// Packed frame `t`: body, face, formation, speaking.
    pub fn frame_values(&self, t: usize) -> [f64; FRAME_DIM] {
        let mut out = [0.0; FRAME_DIM];
        out[..BODY_DIM].copy_from_slice(self.body[t].values());
        out[BODY_DIM..BODY_DIM + FACE_DIM].copy_from_slice(self.face[t].coeffs());
        out[BODY_DIM + FACE_DIM..FRAME_DIM - 1].copy_from_slice(&self.formation[t].to_vec6());
        out[FRAME_DIM - 1] = f64::from(self.speaking[t].value());
        out
    }
}

/// A game: three role-labelled tracks plus game annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub id: String,
    pub fps: u32,
    tracks: [PersonTrack; 3],
    pub game_start: usize,
    pub game_end: usize,
    /// Whether the capture was verified error-free; unverified scenes are
    /// skipped by preprocessing.
    pub verified: bool,
}

impl Scene {
    /// Accepts the tracks in any order; exactly one per role is required.
    pub fn new(
        id: impl Into<String>,
        fps: u32,
        tracks: Vec<PersonTrack>,
        game_start: usize,
        game_end: usize,
    ) -> Result<Self> {
        if tracks.len() != 3 {
            return Err(CoreError::invalid("Scene", format!("expected 3 tracks, got {}", tracks.len())));
        }
        let mut slots: [Option<PersonTrack>; 3] = [None, None, None];
        for t in tracks {
            let i = t.role.index();
            if slots[i].is_some() {
                return Err(CoreError::invalid("Scene", format!("duplicate role {}", t.role.name())));
            }
            slots[i] = Some(t);
        }
        let [Some(b), Some(l), Some(r)] = slots else {
            unreachable!("three distinct roles fill all slots")
        };
        let n = b.len();
        if l.len() != n || r.len() != n {
            return Err(CoreError::invalid(
                "Scene",
                format!("track lengths differ: {n}, {}, {}", l.len(), r.len()),
            ));
        }
        if game_start >= game_end || game_end > n {
            return Err(CoreError::invalid(
                "Scene",
                format!("game span {game_start}..{game_end} invalid for {n} frames"),
            ));
        }
        if fps == 0 {
            return Err(CoreError::invalid("Scene", "fps must be positive"));
        }
        Ok(Self {
            id: id.into(),
            fps,
            tracks: [b, l, r],
            game_start,
            game_end,
            verified: true,
        })
    }

    pub fn len(&self) -> usize {
        self.tracks[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn track(&self, role: Role) -> &PersonTrack {
        &self.tracks[role.index()]
    }

    pub fn tracks(&self) -> &[PersonTrack; 3] {
        &self.tracks
    }

    pub fn into_tracks(self) -> [PersonTrack; 3] {
        self.tracks
    }
}

/// A fixed-length window of a scene seen from the target's perspective.
///
/// The clip is a view: frames are read from the shared scene on demand and
/// mirrored when `flipped` is set, in which case the right seller plays the
/// target and the left seller becomes the second partner.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub scene: Arc<Scene>,
    pub start: usize,
    pub length: usize,
    pub flipped: bool,
}

impl Clip {
    pub fn new(scene: Arc<Scene>, start: usize, length: usize) -> Result<Self> {
        if length == 0 || start + length > scene.len() {
            return Err(CoreError::invalid(
                "Clip",
                format!("window {start}+{length} outside scene of {} frames", scene.len()),
            ));
        }
        Ok(Self {
            scene,
            start,
            length,
            flipped: false,
        })
    }

    pub fn scene_id(&self) -> &str {
        &self.scene.id
    }

    fn window(&self, source: Role, as_role: Role) -> PersonTrack {
        let w = self
            .scene
            .track(source)
            .window(self.start..self.start + self.length)
            .expect("clip window validated at construction");
        let w = if self.flipped {
            crate::dataio::mirror_track(&w)
        } else {
            w
        };
        w.with_role(as_role)
    }

    /// Target person Y (left seller, or the mirrored right seller).
    pub fn target(&self) -> PersonTrack {
        let src = if self.flipped { Role::RightSeller } else { Role::LeftSeller };
        self.window(src, Role::LeftSeller)
    }

    /// First partner X¹: the buyer.
    pub fn partner1(&self) -> PersonTrack {
        self.window(Role::Buyer, Role::Buyer)
    }

    /// Second partner X²: the other seller.
    pub fn partner2(&self) -> PersonTrack {
        let src = if self.flipped { Role::LeftSeller } else { Role::RightSeller };
        self.window(src, Role::RightSeller)
    }

    pub fn person(&self, role: Role) -> PersonTrack {
        match role {
            Role::Buyer => self.partner1(),
            Role::LeftSeller => self.target(),
            Role::RightSeller => self.partner2(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body() -> BodyMotion {
        BodyMotion::new([0.0; BODY_DIM]).unwrap()
    }

    fn unit_state() -> FormationState {
        FormationState::new([0.0, 0.0], [0.0, 1.0], [0.0, 1.0]).unwrap()
    }

    fn track(role: Role, n: usize) -> PersonTrack {
        PersonTrack::new(
            role,
            vec![body(); n],
            vec![FaceMotion::new([0.0; 5]).unwrap(); n],
            vec![unit_state(); n],
            vec![SpeakingLabel::SILENT; n],
        )
        .unwrap()
    }

    #[test]
    fn body_slices_partition_all_channels() {
        let mut covered = [0u8; BODY_DIM];
        for part in BodyPart::ALL {
            for i in part.range() {
                covered[i] += 1;
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
        let lens: Vec<usize> = BodyPart::ALL.iter().map(|p| p.range().len()).collect();
        assert_eq!(lens, vec![63, 3, 3, 4]);
        assert_eq!(BodyPart::Joints.range(), 0..63);
    }

    #[test]
    fn joint_table_is_consistent() {
        for (i, j) in Joint::ALL.iter().enumerate() {
            assert_eq!(j.index(), i);
            assert_eq!(j.mirror().mirror(), *j);
        }
        let lower = Joint::ALL.iter().filter(|j| j.is_lower_body()).count();
        assert_eq!(lower, 9);
    }

    #[test]
    fn body_rejects_bad_values() {
        let mut v = [0.0; BODY_DIM];
        v[70] = 1.5;
        assert!(BodyMotion::new(v).is_err());
        v[70] = 0.5;
        v[3] = f64::NAN;
        assert!(BodyMotion::new(v).is_err());
        assert!(BodyMotion::from_slice(&[0.0; 72]).is_err());
    }

    #[test]
    fn formation_vec_packs_in_order() {
        assert_eq!(unit_state().to_vec6(), [0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let s = FormationState::new([3.0, -4.0], [0.6, 0.8], [-1.0, 0.0]).unwrap();
        assert_eq!(FormationState::from_vec6(&s.to_vec6()).unwrap(), s);
    }

    #[test]
    fn formation_strict_rejects_non_unit_and_normalized_repairs() {
        assert!(FormationState::new([0.0, 0.0], [1.0, 1.0], [0.0, 1.0]).is_err());
        let s = FormationState::new_normalized([0.0, 0.0], [1.0, 1.0], [0.0, 2.0]).unwrap();
        let [bx, bz] = s.body_orient();
        assert!(((bx * bx + bz * bz).sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(s.face_orient(), [0.0, 1.0]);
        assert!(FormationState::new_normalized([0.0, 0.0], [0.0, 0.0], [0.0, 1.0]).is_err());
    }

    #[test]
    fn speaking_label_accepts_only_binary() {
        assert!(SpeakingLabel::from_value(1.0).unwrap().is_speaking());
        assert!(SpeakingLabel::from_value(0.5).is_err());
    }

    #[test]
    fn scene_rejects_duplicate_roles_and_length_mismatch() {
        let ok = Scene::new(
            "s",
            30,
            vec![track(Role::RightSeller, 4), track(Role::Buyer, 4), track(Role::LeftSeller, 4)],
            0,
            4,
        )
        .unwrap();
        assert_eq!(ok.track(Role::Buyer).role, Role::Buyer);
        assert!(Scene::new(
            "s",
            30,
            vec![track(Role::Buyer, 4), track(Role::Buyer, 4), track(Role::LeftSeller, 4)],
            0,
            4
        )
        .is_err());
        assert!(Scene::new(
            "s",
            30,
            vec![track(Role::Buyer, 4), track(Role::RightSeller, 5), track(Role::LeftSeller, 4)],
            0,
            4
        )
        .is_err());
        assert!(Scene::new(
            "s",
            30,
            vec![track(Role::Buyer, 4), track(Role::RightSeller, 4), track(Role::LeftSeller, 4)],
            2,
            2
        )
        .is_err());
    }

    #[test]
    fn track_rejects_mismatched_sequences() {
        assert!(PersonTrack::new(Role::Buyer, vec![body(); 2], vec![], vec![], vec![]).is_err());
        assert!(PersonTrack::new(Role::Buyer, vec![], vec![], vec![], vec![]).is_err());
    }
}
