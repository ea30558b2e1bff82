//! Episode quality scores, dataset diversity metrics and the accept/reject verdict.

mod diversity;
mod gripper;
mod sharpness;
mod tremble;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use diversity::{
    state_diversity, visual_diversity, visual_diversity_frames, FeatureExtractor,
    GridStatsExtractor,
};
pub use gripper::{
    binarize_hysteresis, gripper_pattern_check, parse_pattern, run_length_labels, GripperState,
};
pub use sharpness::{frame_sharpness, median, sample_indices, sharpness_score, MIN_FRAME};
pub use tremble::{gaussian_kernel, gaussian_smooth, tremble_score};

use crate::episode::{motion_activity, validate_episode, Episode, FilterConfig, StructuralReason};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn default_sigma() -> f64 {
    2.0
}

fn default_budget() -> usize {
    16
}

fn default_grid() -> usize {
    8
}

fn default_lo() -> f64 {
    0.3
}

fn default_hi() -> f64 {
    0.7
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaConfig {
    pub tremble_max: f64,
    pub sharpness_min: f64,
    #[serde(default = "default_sigma")]
    pub smoothing_sigma: f64,
    #[serde(default = "default_budget")]
    pub frame_sample_budget: usize,
    /// Expected run-length pattern of the gripper channel; empty disables the check.
    #[serde(default)]
    pub gripper_pattern: Vec<GripperState>,
    #[serde(default = "default_lo")]
    pub gripper_lo: f64,
    #[serde(default = "default_hi")]
    pub gripper_hi: f64,
    /// Action column holding the gripper signal, per embodiment id. Episodes
    /// of unlisted embodiments skip the gripper check.
    #[serde(default)]
    pub gripper_channels: BTreeMap<String, usize>,
    #[serde(default = "default_grid")]
    pub visual_grid: usize,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            tremble_max: 0.35,
            sharpness_min: 10.0,
            smoothing_sigma: default_sigma(),
            frame_sample_budget: default_budget(),
            gripper_pattern: Vec::new(),
            gripper_lo: default_lo(),
            gripper_hi: default_hi(),
            gripper_channels: BTreeMap::new(),
            visual_grid: default_grid(),
        }
    }
}

impl QaConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.gripper_lo < self.gripper_hi) {
            return Err(Error::Domain("gripper_lo must be below gripper_hi".into()));
        }
        if !(self.smoothing_sigma > 0.0 && self.smoothing_sigma.is_finite()) {
            return Err(Error::Domain("smoothing_sigma must be positive".into()));
        }
        if self.frame_sample_budget == 0 {
            return Err(Error::Domain(
                "frame_sample_budget must be at least 1".into(),
            ));
        }
        if self.visual_grid == 0 {
            return Err(Error::Domain("visual_grid must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    MissingCamera,
    MissingFrames,
    TooShort,
    TooLong,
    LowMotion,
    BadStreamShape,
    Tremble,
    Sharpness,
    GripperPattern,
    TrembleUnavailable,
    SharpnessUnavailable,
    DiversityUnavailable,
    GripperUndecidable,
}

impl From<StructuralReason> for RejectReason {
    fn from(r: StructuralReason) -> Self {
        match r {
            StructuralReason::MissingCamera => RejectReason::MissingCamera,
            StructuralReason::MissingFrames => RejectReason::MissingFrames,
            StructuralReason::TooShort => RejectReason::TooShort,
            StructuralReason::TooLong => RejectReason::TooLong,
            StructuralReason::LowMotion => RejectReason::LowMotion,
            StructuralReason::BadStreamShape => RejectReason::BadStreamShape,
        }
    }
}

/// Contents of `qa_report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub episode_id: String,
    pub tremble: f64,
    pub sharpness: f64,
    pub visual_diversity: f64,
    pub state_diversity: f64,
    pub motion: f64,
    pub gripper_pattern_ok: bool,
    pub accepted: bool,
    pub reject_reasons: Vec<RejectReason>,
}

/// Sharpness of an episode: the weakest of its camera streams.
pub fn episode_sharpness(ep: &Episode, frame_sample_budget: usize) -> Result<f64> {
    if ep.cameras.is_empty() {
        return Err(Error::InsufficientData("episode has no cameras".into()));
    }
    let mut worst = f64::INFINITY;
    for stream in ep.cameras.values() {
        worst = worst.min(sharpness_score(&stream.frames, frame_sample_budget)?);
    }
    Ok(worst)
}

/// Runs the structural filters and every score. Score failures become
/// reject reasons with the score reported as 0.
pub fn qa_episode(ep: &Episode, qa: &QaConfig, filt: &FilterConfig) -> QualityReport {
    let mut reasons: Vec<RejectReason> = validate_episode(ep, filt)
        .reasons
        .into_iter()
        .map(RejectReason::from)
        .collect();

    let tremble = match tremble_score(&ep.states, qa.smoothing_sigma) {
        Ok(v) => {
            if v > qa.tremble_max {
                reasons.push(RejectReason::Tremble);
            }
            v
        }
        Err(_) => {
            reasons.push(RejectReason::TrembleUnavailable);
            0.0
        }
    };

    let sharpness = match episode_sharpness(ep, qa.frame_sample_budget) {
        Ok(v) => {
            if v < qa.sharpness_min {
                reasons.push(RejectReason::Sharpness);
            }
            v
        }
        Err(_) => {
            reasons.push(RejectReason::SharpnessUnavailable);
            0.0
        }
    };

    let extractor = GridStatsExtractor {
        grid: qa.visual_grid,
    };
    let visual_diversity = visual_diversity(ep, &extractor).unwrap_or_else(|_| {
        reasons.push(RejectReason::DiversityUnavailable);
        0.0
    });
    let state_diversity = state_diversity(&ep.states).unwrap_or_else(|_| {
        reasons.push(RejectReason::DiversityUnavailable);
        0.0
    });

    let mut gripper_pattern_ok = true;
    if let (false, Some(&column)) = (
        qa.gripper_pattern.is_empty(),
        qa.gripper_channels.get(&ep.embodiment_id),
    ) {
        if column >= ep.actions.cols() {
            gripper_pattern_ok = false;
            reasons.push(RejectReason::GripperUndecidable);
        } else {
            match gripper_pattern_check(
                &ep.actions.column(column),
                qa.gripper_lo,
                qa.gripper_hi,
                &qa.gripper_pattern,
            ) {
                Ok(true) => {}
                Ok(false) => {
                    gripper_pattern_ok = false;
                    reasons.push(RejectReason::GripperPattern);
                }
                Err(_) => {
                    gripper_pattern_ok = false;
                    reasons.push(RejectReason::GripperUndecidable);
                }
            }
        }
    }

    reasons.sort();
    reasons.dedup();
    QualityReport {
        episode_id: ep.id.clone(),
        tremble,
        sharpness,
        visual_diversity,
        state_diversity,
        motion: motion_activity(&ep.states, ep.fps),
        gripper_pattern_ok,
        accepted: reasons.is_empty(),
        reject_reasons: reasons,
    }
}

/// One row of `dataset_summary.json`; the four score columns are computed
/// over accepted episodes only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub dataset_id: String,
    pub episodes: usize,
    pub accepted: usize,
    pub visual_diversity: f64,
    pub state_diversity: f64,
    pub sharpness: f64,
    pub tremble: f64,
    pub motion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub datasets: Vec<DatasetRow>,
}

/// Groups episodes by embodiment id. `D_state` is recomputed over the
/// concatenated accepted states when their widths agree, otherwise it falls
/// back to the mean of per-episode values. Groups and members are reduced in
/// sorted id order so the result does not depend on input order.
pub fn dataset_summary(items: &[(&Episode, &QualityReport)]) -> DatasetSummary {
    let mut groups: BTreeMap<&str, Vec<(&Episode, &QualityReport)>> = BTreeMap::new();
    for &(ep, rep) in items {
        groups
            .entry(ep.embodiment_id.as_str())
            .or_default()
            .push((ep, rep));
    }
    let datasets = groups
        .into_iter()
        .map(|(id, mut members)| {
            members.sort_by(|a, b| a.0.id.cmp(&b.0.id));
            let accepted: Vec<_> = members.iter().filter(|(_, r)| r.accepted).collect();
            let n = accepted.len();
            let mean = |f: fn(&QualityReport) -> f64| {
                if n == 0 {
                    0.0
                } else {
                    accepted.iter().map(|(_, r)| f(r)).sum::<f64>() / n as f64
                }
            };
            let widths_agree = accepted
                .windows(2)
                .all(|w| w[0].0.states.cols() == w[1].0.states.cols());
            let state_div = if n > 0 && widths_agree {
                let parts: Vec<&Matrix> = accepted.iter().map(|(e, _)| &e.states).collect();
                Matrix::vstack(&parts)
                    .ok()
                    .and_then(|m| state_diversity(&m).ok())
                    .unwrap_or(0.0)
            } else {
                mean(|r| r.state_diversity)
            };
            DatasetRow {
                dataset_id: id.to_string(),
                episodes: members.len(),
                accepted: n,
                visual_diversity: mean(|r| r.visual_diversity),
                state_diversity: state_div,
                sharpness: mean(|r| r.sharpness),
                tremble: mean(|r| r.tremble),
                motion: mean(|r| r.motion),
            }
        })
        .collect();
    DatasetSummary { datasets }
}
