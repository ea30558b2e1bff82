//! The batch run: validate, qa, align, unify, augment, sample-plan.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use roboprep::augment::AugmentConfig;
use roboprep::dataqa::{dataset_summary, QaConfig, RejectReason};
use roboprep::episode::FilterConfig;
use roboprep::sampler::SamplerSchedule;
use roboprep::unify::UnifiedLayout;
use roboprep::{Episode, Error, Result};
use serde::{Deserialize, Serialize};

use crate::commands::load_config;
use crate::io::{
    guard_output, load_corpus, load_descriptors, read_json, relative_to, save_all, write_atomic,
    write_json,
};
use crate::stages::{
    align_all, augment_all, default_pair_budget, mixture_csv, plan_csv, qa_all, unify_all,
    validate_all, AlignConfig, AugmentOps, Descriptors,
};

/// Contents of `pipeline.json`. Relative paths resolve against the file's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineFile {
    /// Episode pack root.
    pub episodes: PathBuf,
    /// Slot table; the built-in layout when absent.
    #[serde(default)]
    pub layout: Option<PathBuf>,
    /// Directory of embodiment descriptors.
    pub descriptors: PathBuf,
    pub qa: PathBuf,
    pub filter: PathBuf,
    pub sampler: PathBuf,
    /// Augmentation settings; built-in defaults when absent.
    #[serde(default)]
    pub augment: Option<PathBuf>,
    pub reference_flow: f64,
    #[serde(default = "default_pair_budget")]
    pub pair_budget: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Training step the sample plan is drawn for.
    #[serde(default)]
    pub sample_step: u64,
    #[serde(default = "default_draws")]
    pub sample_draws: usize,
}

fn default_draws() -> usize {
    1000
}

/// A validated pipeline configuration with every referenced file loaded.
pub struct PipelineConfig {
    pub episodes: PathBuf,
    pub layout: UnifiedLayout,
    pub descriptors: Descriptors,
    pub qa: QaConfig,
    pub filter: FilterConfig,
    pub sampler: SamplerSchedule,
    pub augment: AugmentConfig,
    pub align: AlignConfig,
    pub output: Option<PathBuf>,
    pub sample_step: u64,
    pub sample_draws: usize,
}

impl PipelineConfig {
    /// Parses `path` and loads everything it references, failing on the
    /// first problem with the config file and field in the message.
    pub fn load(path: &Path) -> Result<Self> {
        let file: PipelineFile = read_json(path)?;
        let field_err = |field: &str, e: Error| Error::Config {
            file: path.display().to_string(),
            message: format!("field `{field}`: {e}"),
        };
        let at = |p: &Path| relative_to(path, p);
        let episodes = at(&file.episodes);
        if !episodes.is_dir() {
            return Err(field_err(
                "episodes",
                Error::Domain(format!("{} is not a directory", episodes.display())),
            ));
        }
        let layout = match &file.layout {
            Some(p) => UnifiedLayout::load(&at(p)).map_err(|e| field_err("layout", e))?,
            None => UnifiedLayout::default_layout(),
        };
        let descriptors =
            load_descriptors(&at(&file.descriptors)).map_err(|e| field_err("descriptors", e))?;
        let qa = load_config(&at(&file.qa), QaConfig::check).map_err(|e| field_err("qa", e))?;
        let filter = load_config(&at(&file.filter), FilterConfig::check)
            .map_err(|e| field_err("filter", e))?;
        let sampler =
            SamplerSchedule::load(&at(&file.sampler)).map_err(|e| field_err("sampler", e))?;
        if let Some(id) = sampler
            .dataset_ids
            .iter()
            .find(|id| !descriptors.contains_key(*id))
        {
            return Err(field_err(
                "sampler",
                Error::Descriptor(format!("dataset {id:?} has no descriptor")),
            ));
        }
        let augment = match &file.augment {
            Some(p) => {
                load_config(&at(p), AugmentConfig::check).map_err(|e| field_err("augment", e))?
            }
            None => AugmentConfig::default(),
        };
        if !(file.reference_flow > 0.0 && file.reference_flow.is_finite()) {
            return Err(field_err(
                "reference_flow",
                Error::Domain(format!("{} is not a positive number", file.reference_flow)),
            ));
        }
        if file.pair_budget == 0 {
            return Err(field_err(
                "pair_budget",
                Error::Domain("must be at least 1".into()),
            ));
        }
        if file.sample_draws == 0 {
            return Err(field_err(
                "sample_draws",
                Error::Domain("must be at least 1".into()),
            ));
        }
        Ok(PipelineConfig {
            episodes,
            layout,
            descriptors,
            qa,
            filter,
            sampler,
            augment,
            align: AlignConfig {
                reference_flow: file.reference_flow,
                pair_budget: file.pair_budget,
            },
            output: file.output.as_deref().map(at),
            sample_step: file.sample_step,
            sample_draws: file.sample_draws,
        })
    }
}

/// Command-line overrides for a pipeline run.
#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub factor: Option<f64>,
    pub step: Option<u64>,
    pub draws: Option<usize>,
}

/// Contents of `pipeline_report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub episodes: usize,
    pub accepted: usize,
    /// Rejected episode ids with their reasons.
    pub rejected: BTreeMap<String, Vec<RejectReason>>,
    pub aligned: usize,
    pub unified: usize,
    pub mirrored: usize,
    pub reversed: usize,
    pub sample_step: u64,
    pub sample_alpha: f64,
    pub sample_draws: usize,
}

/// Runs every stage and writes under the output directory:
/// `validation.json`, `qa/`, `align/`, `unified/`, `augmented/`,
/// `mixture.csv`, `sample_plan.csv` and `pipeline_report.json`.
pub fn run_pipeline(opts: &PipelineOptions) -> Result<PipelineReport> {
    let mut cfg = PipelineConfig::load(&opts.config)?;
    if let Some(s) = opts.seed {
        cfg.sampler.seed = s;
    }
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config {
            file: opts.config.display().to_string(),
            message: "field `output`: no output directory (set it or pass --out)".into(),
        })?;
    guard_output(&cfg.episodes, &out)?;
    let step = opts.step.unwrap_or(cfg.sample_step);
    let draws = opts.draws.unwrap_or(cfg.sample_draws);

    let eps = load_corpus(&cfg.episodes)?;

    let validation = validate_all(&eps, &cfg.filter);
    write_json(&out.join("validation.json"), &validation)?;

    let reports = qa_all(&eps, &cfg.qa, &cfg.filter);
    let pairs: Vec<_> = eps.iter().zip(&reports).collect();
    write_json(&out.join("qa").join("qa_report.json"), &reports)?;
    write_json(
        &out.join("qa").join("dataset_summary.json"),
        &dataset_summary(&pairs),
    )?;
    let accepted: Vec<Episode> = eps
        .iter()
        .zip(&reports)
        .filter(|(_, r)| r.accepted)
        .map(|(e, _)| e.clone())
        .collect();
    let rejected = reports
        .iter()
        .filter(|r| !r.accepted)
        .map(|r| (r.episode_id.clone(), r.reject_reasons.clone()))
        .collect();

    let (plans, aligned) = if accepted.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        align_all(&accepted, &cfg.align, opts.factor, Some(&cfg.descriptors))?
    };
    write_json(&out.join("align").join("align_plan.json"), &plans)?;
    save_all(&aligned, &out.join("align").join("episodes"))?;

    let unified = unify_all(
        &aligned,
        &cfg.descriptors,
        &cfg.layout,
        &out.join("unified"),
    )?;

    let ops = AugmentOps {
        mirror: true,
        reverse: true,
    };
    let (augmented, aug_report) =
        augment_all(&aligned, &cfg.descriptors, &cfg.layout, &cfg.augment, ops)?;
    save_all(&augmented, &out.join("augmented"))?;
    write_json(
        &out.join("augmented").join("augment_report.json"),
        &aug_report,
    )?;

    let alpha = cfg.sampler.alpha_at(step);
    write_atomic(
        &out.join("mixture.csv"),
        mixture_csv(&cfg.sampler, alpha)?.as_bytes(),
    )?;
    write_atomic(
        &out.join("sample_plan.csv"),
        plan_csv(&cfg.sampler, step, draws)?.as_bytes(),
    )?;

    let report = PipelineReport {
        episodes: eps.len(),
        accepted: accepted.len(),
        rejected,
        aligned: aligned.len(),
        unified: unified.len(),
        mirrored: aug_report.mirrored.len(),
        reversed: aug_report.reversed.len(),
        sample_step: step,
        sample_alpha: alpha,
        sample_draws: draws,
    };
    write_json(&out.join("pipeline_report.json"), &report)?;
    eprintln!(
        "pipeline: {} episodes, {} accepted, {} augmented",
        report.episodes,
        report.accepted,
        augmented.len()
    );
    Ok(report)
}
