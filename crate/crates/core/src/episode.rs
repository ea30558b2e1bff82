//! Episode data model, the on-disk EpisodePack format and structural filters.
//!
//! An EpisodePack is a directory:
//!
//! ```text
//! manifest.json            id, embodiment, fps, instruction, T, dims, cameras, ...
//! states.f32               little-endian f32, row-major T x state_dim
//! actions.f32              little-endian f32, row-major T x action_dim
//! cameras/<name>/%06d.pgm  binary PGM (P5), maxval 255, zero-based
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSemantics {
    AbsoluteTarget,
    Delta,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CameraStream {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<GrayFrame>,
}

impl CameraStream {
    pub fn new(width: usize, height: usize, frames: Vec<GrayFrame>) -> Self {
        CameraStream {
            width,
            height,
            frames,
        }
    }

    pub fn map_frames(&self, f: impl Fn(&GrayFrame) -> GrayFrame) -> CameraStream {
        CameraStream {
            width: self.width,
            height: self.height,
            frames: self.frames.iter().map(f).collect(),
        }
    }
}

/// Where an augmented episode came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub augmentation: String,
    pub source_id: String,
}

/// One demonstration.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub id: String,
    pub embodiment_id: String,
    pub fps: f64,
    pub instruction: String,
    pub states: Matrix,
    pub actions: Matrix,
    pub cameras: BTreeMap<String, CameraStream>,
    pub reversible: bool,
    pub action_semantics: ActionSemantics,
    pub provenance: Option<Provenance>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Episode {
    /// Number of synchronized steps.
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub embodiment_id: String,
    pub fps: f64,
    pub instruction: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub cameras: Vec<CameraSpec>,
    pub reversible: bool,
    pub action_semantics: ActionSemantics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn of(ep: &Episode) -> Manifest {
        Manifest {
            id: ep.id.clone(),
            embodiment_id: ep.embodiment_id.clone(),
            fps: ep.fps,
            instruction: ep.instruction.clone(),
            t: ep.len(),
            state_dim: ep.states.cols(),
            action_dim: ep.actions.cols(),
            cameras: ep
                .cameras
                .iter()
                .map(|(name, s)| CameraSpec {
                    name: name.clone(),
                    width: s.width,
                    height: s.height,
                })
                .collect(),
            reversible: ep.reversible,
            action_semantics: ep.action_semantics,
            augmentation: ep.provenance.as_ref().map(|p| p.augmentation.clone()),
            source_id: ep.provenance.as_ref().map(|p| p.source_id.clone()),
            metadata: ep.metadata.clone(),
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn frame_file_name(index: usize) -> String {
    format!("{index:06}.pgm")
}

fn read_f32_matrix(path: &Path, rows: usize, cols: usize) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = rows * cols * 4;
    if bytes.len() != expected {
        return Err(Error::format(
            path.display().to_string(),
            format!(
                "payload has {} bytes, manifest implies {rows}x{cols} f32 = {expected}",
                bytes.len()
            ),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data)
}

fn encode_f32_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.as_slice().len() * 4);
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Reads an EpisodePack directory.
///
/// Camera frames are read as the consecutive run `000000.pgm, 000001.pgm, ...`;
/// a short run is not an error here, it surfaces later as `missing_frames`.
pub fn load_episode(dir: &Path) -> Result<Episode> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(manifest_path.display().to_string(), e.to_string()))?;
    if !(manifest.fps.is_finite() && manifest.fps > 0.0) {
        return Err(Error::format(
            manifest_path.display().to_string(),
            format!("fps must be positive, got {}", manifest.fps),
        ));
    }
    let states = read_f32_matrix(&dir.join("states.f32"), manifest.t, manifest.state_dim)?;
    let actions = read_f32_matrix(&dir.join("actions.f32"), manifest.t, manifest.action_dim)?;

    let mut cameras = BTreeMap::new();
    for cam in &manifest.cameras {
        let cam_dir = dir.join("cameras").join(&cam.name);
        let mut frames = Vec::new();
        loop {
            let path = cam_dir.join(frame_file_name(frames.len()));
            if !path.is_file() {
                break;
            }
            frames.push(GrayFrame::read_pgm(&path)?);
        }
        cameras.insert(
            cam.name.clone(),
            CameraStream::new(cam.width, cam.height, frames),
        );
    }

    let provenance = match (manifest.augmentation, manifest.source_id) {
        (Some(augmentation), Some(source_id)) => Some(Provenance {
            augmentation,
            source_id,
        }),
        _ => None,
    };

    Ok(Episode {
        id: manifest.id,
        embodiment_id: manifest.embodiment_id,
        fps: manifest.fps,
        instruction: manifest.instruction,
        states,
        actions,
        cameras,
        reversible: manifest.reversible,
        action_semantics: manifest.action_semantics,
        provenance,
        metadata: manifest.metadata,
    })
}

/// Writes an EpisodePack. The pack is assembled in a sibling temporary
/// directory and renamed into place, replacing any previous pack at `dir`.
pub fn save_episode(ep: &Episode, dir: &Path) -> Result<()> {
    if ep.actions.rows() != ep.states.rows() {
        return Err(Error::Dim {
            expected: ep.states.rows(),
            actual: ep.actions.rows(),
        });
    }
    let parent = dir.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pack".into());
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;

    let write =
        |path: PathBuf, bytes: &[u8]| fs::write(&path, bytes).map_err(|e| Error::io(path, e));
    let manifest = serde_json::to_vec_pretty(&Manifest::of(ep))
        .map_err(|e| Error::format("manifest", e.to_string()))?;
    write(tmp.join(MANIFEST_FILE), &manifest)?;
    write(tmp.join("states.f32"), &encode_f32_matrix(&ep.states))?;
    write(tmp.join("actions.f32"), &encode_f32_matrix(&ep.actions))?;
    for (cam_name, stream) in &ep.cameras {
        let cam_dir = tmp.join("cameras").join(cam_name);
        fs::create_dir_all(&cam_dir).map_err(|e| Error::io(&cam_dir, e))?;
        for (i, frame) in stream.frames.iter().enumerate() {
            write(cam_dir.join(frame_file_name(i)), &frame.encode_pgm())?;
        }
    }

    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))
}

/// Lists pack directories under `root`: `root` itself if it is a pack,
/// otherwise every immediate subdirectory holding a manifest, sorted by path.
pub fn discover_packs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(MANIFEST_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut packs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(MANIFEST_FILE).is_file() {
            packs.push(path);
        }
    }
    packs.sort();
    Ok(packs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralReason {
    MissingCamera,
    MissingFrames,
    TooShort,
    TooLong,
    LowMotion,
    BadStreamShape,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub passed: bool,
    pub reasons: Vec<StructuralReason>,
}

impl ValidationResult {
    fn from_reasons(mut reasons: Vec<StructuralReason>) -> Self {
        reasons.sort();
        reasons.dedup();
        ValidationResult {
            passed: reasons.is_empty(),
            reasons,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_length: usize,
    pub max_length: usize,
    #[serde(default)]
    pub required_cameras: Vec<String>,
    /// Minimum mean per-step state change, in state units per second.
    pub motion_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_length: 10,
            max_length: 2000,
            required_cameras: Vec::new(),
            motion_threshold: 0.01,
        }
    }
}

impl FilterConfig {
    pub fn check(&self) -> Result<()> {
        if self.min_length == 0 || self.min_length > self.max_length {
            return Err(Error::Domain(format!(
                "need 0 < min_length <= max_length, got {}..{}",
                self.min_length, self.max_length
            )));
        }
        if !self.motion_threshold.is_finite() {
            return Err(Error::Domain("motion_threshold must be finite".into()));
        }
        Ok(())
    }
}

/// Mean over steps and dimensions of |s[t+1] - s[t]|, scaled by `fps`.
/// Zero for fewer than two steps or zero-width states.
pub fn motion_activity(states: &Matrix, fps: f64) -> f64 {
    let (t, d) = (states.rows(), states.cols());
    if t < 2 || d == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for r in 0..t - 1 {
        let (a, b) = (states.row(r), states.row(r + 1));
        for c in 0..d {
            total += (b[c] - a[c]).abs();
        }
    }
    total / ((t - 1) * d) as f64 * fps
}

pub fn validate_episode(ep: &Episode, cfg: &FilterConfig) -> ValidationResult {
    let t = ep.len();
    let mut reasons = Vec::new();

    for name in &cfg.required_cameras {
        if !ep.cameras.contains_key(name) {
            reasons.push(StructuralReason::MissingCamera);
        }
    }
    for stream in ep.cameras.values() {
        if stream.frames.len() < t {
            reasons.push(StructuralReason::MissingFrames);
        } else if stream.frames.len() > t {
            reasons.push(StructuralReason::BadStreamShape);
        }
        if stream
            .frames
            .iter()
            .any(|f| f.width() != stream.width || f.height() != stream.height)
        {
            reasons.push(StructuralReason::BadStreamShape);
        }
    }
    if ep.actions.rows() != t {
        reasons.push(StructuralReason::BadStreamShape);
    }
    if t < cfg.min_length {
        reasons.push(StructuralReason::TooShort);
    }
    if t > cfg.max_length {
        reasons.push(StructuralReason::TooLong);
    }
    if motion_activity(&ep.states, ep.fps) < cfg.motion_threshold {
        reasons.push(StructuralReason::LowMotion);
    }
    ValidationResult::from_reasons(reasons)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(t: usize, states: impl Fn(usize) -> Vec<f64>) -> Episode {
        let rows: Vec<Vec<f64>> = (0..t).map(&states).collect();
        let frames = (0..t)
            .map(|i| GrayFrame::from_fn(8, 6, |x, y| (x * 13 + y * 5 + i) as u8))
            .collect();
        let mut cameras = BTreeMap::new();
        cameras.insert("head".to_string(), CameraStream::new(8, 6, frames));
        Episode {
            id: "ep".into(),
            embodiment_id: "arm".into(),
            fps: 10.0,
            instruction: "pick the cup".into(),
            states: Matrix::from_rows(&rows).unwrap(),
            actions: Matrix::from_rows(&rows).unwrap(),
            cameras,
            reversible: false,
            action_semantics: ActionSemantics::AbsoluteTarget,
            provenance: None,
            metadata: BTreeMap::new(),
        }
    }

    fn cfg() -> FilterConfig {
        FilterConfig {
            min_length: 5,
            max_length: 100,
            required_cameras: vec!["head".into()],
            motion_threshold: 0.5,
        }
    }

    #[test]
    fn too_short() {
        let ep = episode(3, |t| vec![t as f64, 0.0]);
        let r = validate_episode(&ep, &cfg());
        assert_eq!(r.reasons, vec![StructuralReason::TooShort]);
        assert!(!r.passed);
    }

    #[test]
    fn passes_when_all_checks_hold() {
        let ep = episode(12, |t| vec![t as f64 * 0.1, 1.0]);
        // motion = mean(|0.1|, 0) * 10 = 0.5
        let r = validate_episode(&ep, &cfg());
        assert!(r.passed, "{r:?}");
        assert!(r.reasons.is_empty());
    }

    #[test]
    fn constant_states_are_low_motion() {
        let ep = episode(12, |_| vec![0.3, 0.3]);
        assert_eq!(
            validate_episode(&ep, &cfg()).reasons,
            vec![StructuralReason::LowMotion]
        );
    }

    #[test]
    fn camera_problems() {
        let mut ep = episode(12, |t| vec![t as f64, 0.0]);
        ep.cameras.get_mut("head").unwrap().frames.pop();
        let mut c = cfg();
        c.required_cameras.push("left_wrist".into());
        assert_eq!(
            validate_episode(&ep, &c).reasons,
            vec![
                StructuralReason::MissingCamera,
                StructuralReason::MissingFrames
            ]
        );

        let mut ep = episode(12, |t| vec![t as f64, 0.0]);
        ep.cameras.get_mut("head").unwrap().frames[4] = GrayFrame::filled(4, 4, 0);
        assert_eq!(
            validate_episode(&ep, &cfg()).reasons,
            vec![StructuralReason::BadStreamShape]
        );
    }

    #[test]
    fn pack_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut ep = episode(10, |t| vec![t as f64 * 0.25, -1.5, 3.0, 0.125]);
        ep.provenance = Some(Provenance {
            augmentation: "mirror".into(),
            source_id: "src".into(),
        });
        let path = dir.path().join("ep");
        save_episode(&ep, &path).unwrap();
        let back = load_episode(&path).unwrap();
        assert_eq!(back, ep);
        assert_eq!(back.states.rows(), 10);
        assert_eq!(back.cameras["head"].frames.len(), 10);
    }

    #[test]
    fn missing_states_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ep");
        save_episode(&episode(10, |t| vec![t as f64]), &path).unwrap();
        fs::remove_file(path.join("states.f32")).unwrap();
        assert!(matches!(load_episode(&path), Err(Error::Io { .. })));
    }

    #[test]
    fn short_states_payload_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ep");
        save_episode(&episode(10, |t| vec![t as f64, 1.0]), &path).unwrap();
        let bytes = fs::read(path.join("states.f32")).unwrap();
        fs::write(path.join("states.f32"), &bytes[..9 * 2 * 4]).unwrap();
        assert!(matches!(load_episode(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn discover_sorts_packs() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b", "a", "c"] {
            save_episode(&episode(5, |t| vec![t as f64]), &dir.path().join(name)).unwrap();
        }
        fs::create_dir(dir.path().join("not_a_pack")).unwrap();
        let packs = discover_packs(dir.path()).unwrap();
        let names: Vec<_> = packs
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(discover_packs(&packs[0]).unwrap(), vec![packs[0].clone()]);
    }

    #[test]
    fn validation_is_pure() {
        let ep = episode(7, |t| vec![(t as f64).sin()]);
        assert_eq!(validate_episode(&ep, &cfg()), validate_episode(&ep, &cfg()));
    }
}
