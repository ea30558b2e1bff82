//! Corpus-level steps shared by the single-purpose subcommands and `pipeline`.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use roboprep::align::{alignment_factor, episode_flow, quaternion_columns, resample_episode};
use roboprep::align::{AlignPlan, MAX_STRIDE, MIN_STRIDE};
use roboprep::augment::{mirror_episode, reverse_episode, AugmentConfig};
use roboprep::dataqa::{qa_episode, QaConfig, QualityReport};
use roboprep::episode::{validate_episode, FilterConfig, StructuralReason};
use roboprep::sampler::{mixture_weights, sample_plan, SamplerSchedule};
use roboprep::unify::{
    control_prompt, map_state_to_unified, map_to_unified, EmbodimentDescriptor, UnifiedLayout,
};
use roboprep::{Episode, Error, Result};
use serde::{Deserialize, Serialize};

use crate::io::{descriptor_for, f32_bytes, write_atomic, write_json};

pub type Descriptors = BTreeMap<String, EmbodimentDescriptor>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub episode_id: String,
    pub passed: bool,
    pub reasons: Vec<StructuralReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: usize,
    pub failed: usize,
    pub episodes: Vec<ValidationRow>,
}

pub fn validate_all(eps: &[Episode], cfg: &FilterConfig) -> ValidationReport {
    let episodes: Vec<ValidationRow> = eps
        .par_iter()
        .map(|ep| {
            let r = validate_episode(ep, cfg);
            ValidationRow {
                episode_id: ep.id.clone(),
                passed: r.passed,
                reasons: r.reasons,
            }
        })
        .collect();
    let passed = episodes.iter().filter(|r| r.passed).count();
    ValidationReport {
        passed,
        failed: episodes.len() - passed,
        episodes,
    }
}

pub fn qa_all(eps: &[Episode], qa: &QaConfig, filt: &FilterConfig) -> Vec<QualityReport> {
    eps.par_iter().map(|ep| qa_episode(ep, qa, filt)).collect()
}

/// Contents of `align.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub reference_flow: f64,
    #[serde(default = "default_pair_budget")]
    pub pair_budget: usize,
}

pub fn default_pair_budget() -> usize {
    8
}

/// Measures each embodiment's mean flow, derives its stride (or uses
/// `factor` for every dataset) and retimes every episode.
pub fn align_all(
    eps: &[Episode],
    cfg: &AlignConfig,
    factor: Option<f64>,
    descs: Option<&Descriptors>,
) -> Result<(Vec<AlignPlan>, Vec<Episode>)> {
    if let Some(f) = factor {
        if !(MIN_STRIDE..=MAX_STRIDE).contains(&f) {
            return Err(Error::Domain(format!(
                "factor {f} outside [{MIN_STRIDE}, {MAX_STRIDE}]"
            )));
        }
    }
    let flows: Vec<f64> = eps
        .par_iter()
        .map(|ep| episode_flow(ep, cfg.pair_budget))
        .collect::<Result<_>>()?;
    let mut by_dataset: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (ep, f) in eps.iter().zip(&flows) {
        by_dataset.entry(&ep.embodiment_id).or_default().push(*f);
    }
    let mut plans = Vec::new();
    let mut strides = BTreeMap::new();
    for (id, fl) in by_dataset {
        let mean_flow = fl.iter().sum::<f64>() / fl.len() as f64;
        let stride = match factor {
            Some(f) => f,
            None => alignment_factor(mean_flow, cfg.reference_flow)?.stride,
        };
        strides.insert(id.to_string(), stride);
        plans.push(AlignPlan {
            dataset_id: id.to_string(),
            mean_flow,
            reference_flow: cfg.reference_flow,
            stride_f: stride,
        });
    }
    let aligned = eps
        .par_iter()
        .map(|ep| {
            let quats = match descs {
                Some(d) => quaternion_columns(descriptor_for(d, ep)?),
                None => Vec::new(),
            };
            resample_episode(ep, strides[&ep.embodiment_id], &quats)
        })
        .collect::<Result<_>>()?;
    Ok((plans, aligned))
}

/// Contents of `unified.json`; the matching `unified.f32` holds the actions
/// as T x 64 little-endian floats, and `unified_states.f32` the states when
/// the descriptor places them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnifiedRecord {
    pub episode_id: String,
    pub embodiment_id: String,
    #[serde(rename = "T")]
    pub steps: usize,
    pub layout_version: String,
    pub control_prompt: String,
    pub mask: Vec<usize>,
    pub states: bool,
}

pub fn unify_all(
    eps: &[Episode],
    descs: &Descriptors,
    layout: &UnifiedLayout,
    out: &Path,
) -> Result<Vec<UnifiedRecord>> {
    eps.par_iter()
        .map(|ep| {
            let desc = descriptor_for(descs, ep)?;
            let actions = ep
                .actions
                .iter_rows()
                .map(|a| map_to_unified(a, desc).map(|u| u.values))
                .collect::<Result<Vec<_>>>()?;
            let states = match desc.state_map(ep.states.cols()) {
                Some(_) => Some(
                    ep.states
                        .iter_rows()
                        .map(|s| map_state_to_unified(s, desc).map(|u| u.values))
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            let dir = out.join(&ep.id);
            write_atomic(
                &dir.join("unified.f32"),
                &f32_bytes(actions.iter().flatten().copied()),
            )?;
            if let Some(s) = &states {
                write_atomic(
                    &dir.join("unified_states.f32"),
                    &f32_bytes(s.iter().flatten().copied()),
                )?;
            }
            let rec = UnifiedRecord {
                episode_id: ep.id.clone(),
                embodiment_id: ep.embodiment_id.clone(),
                steps: ep.len(),
                layout_version: layout.version().to_string(),
                control_prompt: control_prompt(desc),
                mask: desc.mask().iter().collect(),
                states: states.is_some(),
            };
            write_json(&dir.join("unified.json"), &rec)?;
            Ok(rec)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedAugmentation {
    pub episode_id: String,
    pub augmentation: String,
    pub reason: String,
}

/// Contents of `augment_report.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub mirrored: Vec<String>,
    pub reversed: Vec<String>,
    pub skipped: Vec<SkippedAugmentation>,
}

#[derive(Clone, Copy, Debug)]
pub struct AugmentOps {
    pub mirror: bool,
    pub reverse: bool,
}

/// Applies the requested augmentations to every episode. Episodes that are
/// ineligible (unmirrorable layout, irreversible task, incompatible action
/// widths) are listed as skipped; a missing descriptor is an error.
pub fn augment_all(
    eps: &[Episode],
    descs: &Descriptors,
    layout: &UnifiedLayout,
    cfg: &AugmentConfig,
    ops: AugmentOps,
) -> Result<(Vec<Episode>, AugmentReport)> {
    cfg.check()?;
    type Outcome = (Option<Episode>, Option<Episode>, Vec<SkippedAugmentation>);
    let results: Vec<Outcome> = eps
        .par_iter()
        .map(|ep| {
            let mut skipped = Vec::new();
            let mut skip = |what: &str, e: Error| {
                skipped.push(SkippedAugmentation {
                    episode_id: ep.id.clone(),
                    augmentation: what.into(),
                    reason: e.to_string(),
                })
            };
            let mut mirrored = None;
            if ops.mirror {
                let desc = descriptor_for(descs, ep)?;
                match mirror_episode(ep, layout, desc, cfg) {
                    Ok(m) => mirrored = Some(m),
                    Err(e @ (Error::Layout(_) | Error::Mask(_))) => skip("mirror", e),
                    Err(e) => return Err(e),
                }
            }
            let mut reversed = None;
            if ops.reverse {
                match reverse_episode(ep, cfg) {
                    Ok(r) => reversed = Some(r),
                    Err(e @ (Error::NotReversible(_) | Error::Dim { .. })) => skip("reverse", e),
                    Err(e) => return Err(e),
                }
            }
            Ok((mirrored, reversed, skipped))
        })
        .collect::<Result<_>>()?;
    let mut report = AugmentReport::default();
    let mut out = Vec::new();
    for (m, r, s) in results {
        if let Some(m) = m {
            report.mirrored.push(m.id.clone());
            out.push(m);
        }
        if let Some(r) = r {
            report.reversed.push(r.id.clone());
            out.push(r);
        }
        report.skipped.extend(s);
    }
    Ok((out, report))
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn mixture_csv(sched: &SamplerSchedule, alpha: f64) -> Result<String> {
    let w = mixture_weights(&sched.weights, alpha)?;
    let mut s = String::from("dataset_id,probability\n");
    for (id, p) in sched.dataset_ids.iter().zip(w) {
        s.push_str(&format!("{id},{}\n", fmt_f64(p)));
    }
    Ok(s)
}

pub fn plan_csv(sched: &SamplerSchedule, step: u64, n: usize) -> Result<String> {
    let plan = sample_plan(sched, step, n)?;
    let mut s = String::from("draw,dataset_index,dataset_id\n");
    for (i, d) in plan.into_iter().enumerate() {
        s.push_str(&format!("{i},{d},{}\n", sched.dataset_ids[d]));
    }
    Ok(s)
}
