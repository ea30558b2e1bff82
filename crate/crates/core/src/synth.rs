//! Deterministic synthetic episodes and fixture corpora.
//!
//! States are quantized to multiples of 1/1024 so that differences, negation
//! and the fixture descriptors' affine maps are exact in f64.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataqa::{GripperState, QaConfig};
use crate::episode::{ActionSemantics, CameraStream, Episode, FilterConfig, StructuralReason};
use crate::frame::GrayFrame;
use crate::matrix::Matrix;
use crate::sampler::{RampShape, SamplerSchedule};
use crate::unify::{
    BaseType, ControlType, DimMap, EmbodimentDescriptor, EndEffector, PromptFields,
};

pub const FRAME_SIZE: usize = 64;
pub const QUANTUM: f64 = 1.0 / 1024.0;

pub fn quantize(v: f64) -> f64 {
    (v / QUANTUM).round() * QUANTUM
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Pixel noise in [-1, 1) attached to integer texture coordinates.
fn lattice_noise(x: i64, y: i64, seed: u64) -> f64 {
    let h = splitmix(seed ^ splitmix((x as u64) ^ splitmix(y as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Smooth texture intensity at continuous coordinates.
pub fn texture_value(x: f64, y: f64, seed: u64) -> f64 {
    let p = (seed % 997) as f64 * 0.37;
    128.0
        + 45.0 * (0.31 * x + 0.17 * y + p).sin()
        + 30.0 * (0.071 * x - 0.23 * y + 1.3 * p).sin()
        + 20.0 * (0.53 * x + 0.41 * y - p).sin()
}

/// Frames whose content moves by `(vx, vy)` pixels per frame. With `sharp`,
/// lattice noise is added at the integer part of the texture coordinate, so
/// integer velocities give exact translations.
pub fn translating_frames(
    w: usize,
    h: usize,
    n: usize,
    vx: f64,
    vy: f64,
    seed: u64,
    sharp: bool,
) -> Vec<GrayFrame> {
    (0..n)
        .map(|t| {
            let (ox, oy) = (vx * t as f64, vy * t as f64);
            GrayFrame::from_fn(w, h, |x, y| {
                let (tx, ty) = (x as f64 - ox, y as f64 - oy);
                let mut v = texture_value(tx, ty, seed);
                if sharp {
                    v += 35.0 * lattice_noise(tx.floor() as i64, ty.floor() as i64, seed);
                }
                v.round().clamp(0.0, 255.0) as u8
            })
        })
        .collect()
}

/// Slowly varying frames with almost no high-frequency content.
pub fn blurry_frames(w: usize, h: usize, n: usize, vx: f64, seed: u64) -> Vec<GrayFrame> {
    let p = (seed % 101) as f64 * 0.1;
    (0..n)
        .map(|t| {
            GrayFrame::from_fn(w, h, |x, y| {
                let xs = x as f64 - vx * t as f64;
                (90.0 + 0.6 * x as f64 + 0.4 * y as f64 + 12.0 * (0.05 * xs + p).sin())
                    .round()
                    .clamp(0.0, 255.0) as u8
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureEmbodiment {
    /// One 7-joint arm and a parallel gripper.
    ArmGripper,
    /// Two arms, two 6-joint hands, a pan/tilt head.
    HumanoidDex,
    /// Two arms, two grippers, a mobile base.
    MobileBimanual,
}

impl FixtureEmbodiment {
    pub const ALL: [FixtureEmbodiment; 3] = [
        FixtureEmbodiment::ArmGripper,
        FixtureEmbodiment::HumanoidDex,
        FixtureEmbodiment::MobileBimanual,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FixtureEmbodiment::ArmGripper => "arm_gripper",
            FixtureEmbodiment::HumanoidDex => "humanoid_dex",
            FixtureEmbodiment::MobileBimanual => "mobile_bimanual",
        }
    }

    /// Native dims in order as (slot, scale, offset). Gripper widths are
    /// stored open = 1, closed = 0 and placed as closure `1 - width`.
    fn placement(self) -> Vec<(usize, f64, f64)> {
        let ident = |r: std::ops::Range<usize>| r.map(|s| (s, 1.0, 0.0)).collect::<Vec<_>>();
        let mut v = Vec::new();
        match self {
            FixtureEmbodiment::ArmGripper => {
                v.extend(ident(0..7));
                v.push((14, -1.0, 1.0));
            }
            FixtureEmbodiment::HumanoidDex => {
                v.extend(ident(0..14));
                v.extend(ident(16..22));
                v.extend(ident(28..34));
                v.extend(ident(56..58));
            }
            FixtureEmbodiment::MobileBimanual => {
                v.extend(ident(0..14));
                v.push((14, -1.0, 1.0));
                v.push((15, -1.0, 1.0));
                v.extend(ident(58..61));
            }
        }
        v
    }

    pub fn descriptor(self) -> EmbodimentDescriptor {
        let dims = self
            .placement()
            .into_iter()
            .enumerate()
            .map(|(i, (slot, scale, offset))| DimMap {
                native_index: i,
                slot_index: slot,
                scale,
                offset,
            })
            .collect();
        let prompt = match self {
            FixtureEmbodiment::ArmGripper => PromptFields {
                arms: 1,
                hands: 0,
                end_effector: EndEffector::Gripper,
                ctrl: ControlType::Joint,
                base: BaseType::Static,
            },
            FixtureEmbodiment::HumanoidDex => PromptFields {
                arms: 2,
                hands: 2,
                end_effector: EndEffector::DexHand,
                ctrl: ControlType::Joint,
                base: BaseType::Static,
            },
            FixtureEmbodiment::MobileBimanual => PromptFields {
                arms: 2,
                hands: 0,
                end_effector: EndEffector::Gripper,
                ctrl: ControlType::Joint,
                base: BaseType::Mobile,
            },
        };
        EmbodimentDescriptor::new(self.id(), dims, prompt, None)
            .expect("fixture descriptor is valid")
    }

    /// Native columns holding gripper widths.
    pub fn gripper_columns(self) -> Vec<usize> {
        match self {
            FixtureEmbodiment::ArmGripper => vec![7],
            FixtureEmbodiment::HumanoidDex => vec![],
            FixtureEmbodiment::MobileBimanual => vec![14, 15],
        }
    }

    pub fn cameras(self) -> &'static [&'static str] {
        match self {
            FixtureEmbodiment::ArmGripper => &["head", "left_wrist"],
            _ => &["head", "left_wrist", "right_wrist"],
        }
    }

    /// Apparent image motion in pixels per frame.
    pub fn pixel_speed(self) -> f64 {
        match self {
            FixtureEmbodiment::ArmGripper => 2.0,
            FixtureEmbodiment::HumanoidDex => 1.0,
            FixtureEmbodiment::MobileBimanual => 3.0,
        }
    }

    pub fn fps(self) -> f64 {
        match self {
            FixtureEmbodiment::ArmGripper => 10.0,
            FixtureEmbodiment::HumanoidDex => 30.0,
            FixtureEmbodiment::MobileBimanual => 15.0,
        }
    }

    pub fn action_semantics(self) -> ActionSemantics {
        match self {
            FixtureEmbodiment::HumanoidDex => ActionSemantics::Delta,
            _ => ActionSemantics::AbsoluteTarget,
        }
    }
}

/// The single filter an episode is built to fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    MissingCamera,
    MissingFrames,
    TooShort,
    TooLong,
    LowMotion,
    BadStreamShape,
    Tremble,
    Sharpness,
    GripperPattern,
}

impl Violation {
    pub const ALL: [Violation; 9] = [
        Violation::MissingCamera,
        Violation::MissingFrames,
        Violation::TooShort,
        Violation::TooLong,
        Violation::LowMotion,
        Violation::BadStreamShape,
        Violation::Tremble,
        Violation::Sharpness,
        Violation::GripperPattern,
    ];

    /// QA reason name (snake case) this violation produces.
    pub fn reason_name(self) -> &'static str {
        match self {
            Violation::MissingCamera => "missing_camera",
            Violation::MissingFrames => "missing_frames",
            Violation::TooShort => "too_short",
            Violation::TooLong => "too_long",
            Violation::LowMotion => "low_motion",
            Violation::BadStreamShape => "bad_stream_shape",
            Violation::Tremble => "tremble",
            Violation::Sharpness => "sharpness",
            Violation::GripperPattern => "gripper_pattern",
        }
    }

    pub fn structural(self) -> Option<StructuralReason> {
        Some(match self {
            Violation::MissingCamera => StructuralReason::MissingCamera,
            Violation::MissingFrames => StructuralReason::MissingFrames,
            Violation::TooShort => StructuralReason::TooShort,
            Violation::TooLong => StructuralReason::TooLong,
            Violation::LowMotion => StructuralReason::LowMotion,
            Violation::BadStreamShape => StructuralReason::BadStreamShape,
            _ => return None,
        })
    }

    fn embodiment(self) -> FixtureEmbodiment {
        use FixtureEmbodiment::*;
        match self {
            Violation::MissingCamera | Violation::TooLong | Violation::Tremble => ArmGripper,
            Violation::MissingFrames | Violation::LowMotion | Violation::Sharpness => HumanoidDex,
            Violation::TooShort | Violation::BadStreamShape | Violation::GripperPattern => {
                MobileBimanual
            }
        }
    }
}

pub fn fixture_filter_config() -> FilterConfig {
    FilterConfig {
        min_length: 12,
        max_length: 60,
        required_cameras: vec!["head".into()],
        motion_threshold: 0.01,
    }
}

pub fn fixture_qa_config() -> QaConfig {
    let mut qa = QaConfig {
        gripper_pattern: vec![GripperState::Open, GripperState::Closed, GripperState::Open],
        ..QaConfig::default()
    };
    for e in FixtureEmbodiment::ALL {
        if let Some(&c) = e.gripper_columns().first() {
            qa.gripper_channels.insert(e.id().to_string(), c);
        }
    }
    qa
}

pub fn fixture_sampler(seed: u64) -> SamplerSchedule {
    SamplerSchedule {
        dataset_ids: FixtureEmbodiment::ALL
            .iter()
            .map(|e| e.id().to_string())
            .collect(),
        weights: vec![0.5, 0.3, 0.2],
        ramp_steps: 1000,
        seed,
        ramp_shape: RampShape::Linear,
    }
}

/// Camera motion every fixture dataset is aligned to.
pub const FIXTURE_REFERENCE_FLOW: f64 = 2.0;

const OBJECTS: [&str; 6] = [
    "red cup",
    "sponge",
    "banana",
    "blue block",
    "marker",
    "apple",
];

fn instruction(e: FixtureEmbodiment, rng: &mut ChaCha8Rng) -> (String, bool) {
    let obj = OBJECTS[rng.random_range(0..OBJECTS.len())];
    let roll = rng.random::<f64>();
    match e {
        FixtureEmbodiment::ArmGripper if roll < 0.7 => {
            (format!("pick the {obj} from the table"), true)
        }
        FixtureEmbodiment::ArmGripper => (format!("place the {obj} on the table"), false),
        FixtureEmbodiment::HumanoidDex if roll < 0.5 => (
            format!("hand over the {obj} from the left hand to the right hand"),
            true,
        ),
        FixtureEmbodiment::HumanoidDex => (format!("pick the {obj} with the left hand"), false),
        FixtureEmbodiment::MobileBimanual if roll < 0.5 => (format!("pick up the {obj}"), true),
        FixtureEmbodiment::MobileBimanual => (format!("move the {obj} to the right bin"), false),
    }
}

/// Smooth joint trajectories plus open-closed-open gripper widths
/// (`cycles` closures over the episode).
fn smooth_states(e: FixtureEmbodiment, t: usize, cycles: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let d = e.placement().len();
    let grip = e.gripper_columns();
    let params: Vec<(f64, f64, f64, f64)> = (0..d)
        .map(|_| {
            (
                rng.random_range(0.2..0.6),
                rng.random_range(0.4..0.9),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(-0.5..0.5),
            )
        })
        .collect();
    let mut m = Matrix::zeros(t, d);
    let span = (t.max(2) - 1) as f64;
    for r in 0..t {
        let x = r as f64 / span;
        for (c, &(amp, freq, phase, off)) in params.iter().enumerate() {
            let v = if grip.contains(&c) {
                0.5 + 0.5 * (std::f64::consts::TAU * cycles * x).cos()
            } else {
                off + amp * (std::f64::consts::TAU * freq * x + phase).sin()
            };
            m.set(r, c, quantize(v));
        }
    }
    m
}

fn actions_for(states: &Matrix, sem: ActionSemantics) -> Matrix {
    let (t, d) = (states.rows(), states.cols());
    let mut a = Matrix::zeros(t, d);
    for r in 0..t {
        let next = states.row((r + 1).min(t - 1));
        let cur = states.row(r);
        for c in 0..d {
            a.set(
                r,
                c,
                match sem {
                    ActionSemantics::AbsoluteTarget => next[c],
                    ActionSemantics::Delta if r + 1 < t => next[c] - cur[c],
                    ActionSemantics::Delta => 0.0,
                },
            );
        }
    }
    a
}

/// One fixture episode; `violation` selects the defect it carries.
pub fn fixture_episode(
    e: FixtureEmbodiment,
    index: usize,
    violation: Option<Violation>,
    seed: u64,
) -> Episode {
    let mut rng =
        ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(index as u64 ^ ((e as u64) << 32))));
    let t = match violation {
        Some(Violation::TooShort) => 10,
        Some(Violation::TooLong) => 80,
        _ => rng.random_range(20..=40),
    };
    let cycles = if violation == Some(Violation::GripperPattern) {
        2.0
    } else {
        1.0
    };
    let mut states = smooth_states(e, t, cycles, &mut rng);
    match violation {
        Some(Violation::LowMotion) => {
            let first = states.row(0).to_vec();
            for r in 0..t {
                states.row_mut(r).copy_from_slice(&first);
            }
        }
        Some(Violation::Tremble) => {
            let grip = e.gripper_columns();
            for r in 0..t {
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                for c in (0..states.cols()).filter(|c| !grip.contains(c)) {
                    states.set(r, c, states.get(r, c) + sign * 0.0625);
                }
            }
        }
        _ => {}
    }
    let actions = actions_for(&states, e.action_semantics());

    let speed = e.pixel_speed();
    let mut cameras = BTreeMap::new();
    for (k, name) in e.cameras().iter().enumerate() {
        let cam_seed = splitmix(seed ^ splitmix((index as u64) << 8 | k as u64)) ^ e as u64;
        let dir = if k % 2 == 0 { 1.0 } else { -1.0 };
        let frames = if violation == Some(Violation::Sharpness) {
            blurry_frames(FRAME_SIZE, FRAME_SIZE, t, dir * speed, cam_seed)
        } else {
            translating_frames(FRAME_SIZE, FRAME_SIZE, t, dir * speed, 0.0, cam_seed, true)
        };
        cameras.insert(
            name.to_string(),
            CameraStream::new(FRAME_SIZE, FRAME_SIZE, frames),
        );
    }
    match violation {
        Some(Violation::MissingCamera) => {
            cameras.remove("head");
        }
        Some(Violation::MissingFrames) => {
            let s = cameras.get_mut("left_wrist").unwrap();
            s.frames.truncate(t - 3);
        }
        Some(Violation::BadStreamShape) => {
            let s = cameras.get_mut("head").unwrap();
            s.frames[t / 2] = translating_frames(FRAME_SIZE + 8, FRAME_SIZE, 1, 0.0, 0.0, 7, true)
                .pop()
                .unwrap();
        }
        _ => {}
    }

    let (instruction, reversible) = instruction(e, &mut rng);
    let mut metadata = BTreeMap::new();
    if let Some(v) = violation {
        metadata.insert("fixture_violation".into(), serde_json::to_value(v).unwrap());
    }
    Episode {
        id: format!("{}-{index:03}", e.id()),
        embodiment_id: e.id().into(),
        fps: e.fps(),
        instruction,
        states,
        actions,
        cameras,
        reversible,
        action_semantics: e.action_semantics(),
        provenance: None,
        metadata,
    }
}

/// A fixture episode and the violation it was built with.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub episode: Episode,
    pub violation: Option<Violation>,
}

/// `n` fixtures cycling over the three embodiments. When `with_violations`,
/// the first nine are the one-defect episodes; `n` must then be at least 9.
pub fn corpus(n: usize, seed: u64, with_violations: bool) -> Vec<Fixture> {
    let mut out = Vec::with_capacity(n);
    let mut counters = [0usize; 3];
    let mut next = |e: FixtureEmbodiment, v: Option<Violation>| {
        let i = counters[e as usize];
        counters[e as usize] += 1;
        Fixture {
            episode: fixture_episode(e, i, v, seed),
            violation: v,
        }
    };
    if with_violations {
        for v in Violation::ALL {
            if out.len() < n {
                out.push(next(v.embodiment(), Some(v)));
            }
        }
    }
    let mut k = 0;
    while out.len() < n {
        out.push(next(FixtureEmbodiment::ALL[k % 3], None));
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataqa::qa_episode;

    #[test]
    fn quantized_deltas_are_exact() {
        let e = fixture_episode(FixtureEmbodiment::HumanoidDex, 0, None, 1);
        for r in 0..e.len() - 1 {
            for c in 0..e.states.cols() {
                assert_eq!(
                    e.states.get(r, c) + e.actions.get(r, c),
                    e.states.get(r + 1, c)
                );
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = corpus(12, 5, true);
        let b = corpus(12, 5, true);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.episode, y.episode);
        }
    }

    #[test]
    fn clean_fixtures_pass_and_violators_fail_once() {
        let (qa, filt) = (fixture_qa_config(), fixture_filter_config());
        for f in corpus(15, 3, true) {
            let r = qa_episode(&f.episode, &qa, &filt);
            match f.violation {
                None => assert!(
                    r.accepted,
                    "{} {:?} {}",
                    f.episode.id, r.reject_reasons, r.tremble
                ),
                Some(v) => {
                    let names: Vec<String> = r
                        .reject_reasons
                        .iter()
                        .map(|x| {
                            serde_json::to_value(x)
                                .unwrap()
                                .as_str()
                                .unwrap()
                                .to_string()
                        })
                        .collect();
                    assert_eq!(names, [v.reason_name()], "{}", f.episode.id);
                }
            }
        }
    }
}
