use std::path::{Path, PathBuf};

use rayon::prelude::*;
use roboprep::augment::AugmentConfig;
use roboprep::dataqa::{dataset_summary, QaConfig};
use roboprep::episode::FilterConfig;
use roboprep::guards::{
    episode_end, fit_gmm_with, ood_correct_iterate, progress_labels, GmmDensityModel, GmmFitConfig,
};
use roboprep::rl_align::{
    refine_trajectory, Critic, GmmLogDensityCritic, QuadraticCritic, RefineConfig,
};
use roboprep::sampler::SamplerSchedule;
use roboprep::unify::{retarget_with_rules, RetargetRules};
use roboprep::{save_episode, Episode, Error, Matrix, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::io::{
    descriptor_for, emit, guard_output, load_corpus, load_descriptors, load_layout, read_json,
    relative_to, save_all, to_json, write_json,
};
use crate::stages::{
    align_all, augment_all, mixture_csv, plan_csv, qa_all, unify_all, validate_all, AlignConfig,
    AugmentOps,
};
use crate::{fixtures, pipeline, Command};

/// Reads a config and runs its own consistency check, reporting either
/// failure against the file.
pub fn load_config<T: DeserializeOwned>(
    path: &Path,
    check: impl Fn(&T) -> Result<()>,
) -> Result<T> {
    let v: T = read_json(path)?;
    check(&v).map_err(|e| Error::Config {
        file: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(v)
}

fn optional_config<T: DeserializeOwned + Default>(
    path: Option<&PathBuf>,
    check: impl Fn(&T) -> Result<()>,
) -> Result<T> {
    match path {
        Some(p) => load_config(p, check),
        None => Ok(T::default()),
    }
}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate(a) => {
            let cfg: FilterConfig = optional_config(a.config.as_ref(), FilterConfig::check)?;
            let eps = load_corpus(&a.input)?;
            let report = validate_all(&eps, &cfg);
            eprintln!(
                "validate: {} passed, {} failed",
                report.passed, report.failed
            );
            emit(a.out.as_deref(), &to_json(&report)?)
        }
        Command::Qa(a) => {
            let qa: QaConfig = optional_config(a.config.as_ref(), QaConfig::check)?;
            let filt: FilterConfig = optional_config(a.filter.as_ref(), FilterConfig::check)?;
            guard_output(&a.input, &a.out)?;
            let eps = load_corpus(&a.input)?;
            let reports = qa_all(&eps, &qa, &filt);
            let pairs: Vec<_> = eps.iter().zip(&reports).collect();
            let summary = dataset_summary(&pairs);
            if reports.len() == 1 {
                write_json(&a.out.join("qa_report.json"), &reports[0])?;
            } else {
                write_json(&a.out.join("qa_report.json"), &reports)?;
            }
            write_json(&a.out.join("dataset_summary.json"), &summary)?;
            let accepted = reports.iter().filter(|r| r.accepted).count();
            eprintln!("qa: {accepted} of {} episodes accepted", reports.len());
            Ok(())
        }
        Command::Summary(a) => {
            let qa: QaConfig = optional_config(a.config.as_ref(), QaConfig::check)?;
            let filt: FilterConfig = optional_config(a.filter.as_ref(), FilterConfig::check)?;
            let eps = load_corpus(&a.input)?;
            let reports = qa_all(&eps, &qa, &filt);
            let pairs: Vec<_> = eps.iter().zip(&reports).collect();
            emit(a.out.as_deref(), &to_json(&dataset_summary(&pairs))?)
        }
        Command::Align(a) => {
            let mut cfg = match &a.config {
                Some(p) => load_config(p, |c: &AlignConfig| check_align(c))?,
                None => AlignConfig {
                    reference_flow: f64::NAN,
                    pair_budget: crate::stages::default_pair_budget(),
                },
            };
            if let Some(r) = a.reference_flow {
                cfg.reference_flow = r;
            }
            check_align(&cfg)?;
            let descs = a.descriptors.as_deref().map(load_descriptors).transpose()?;
            guard_output(&a.input, &a.out)?;
            let eps = load_corpus(&a.input)?;
            let (plans, aligned) = align_all(&eps, &cfg, a.factor, descs.as_ref())?;
            write_json(&a.out.join("align_plan.json"), &plans)?;
            save_all(&aligned, &a.out.join("episodes"))?;
            for p in &plans {
                eprintln!(
                    "align: {} flow {:.3} px/frame, stride {:.4}",
                    p.dataset_id, p.mean_flow, p.stride_f
                );
            }
            Ok(())
        }
        Command::Unify(a) => {
            let descs = load_descriptors(&a.descriptors)?;
            let layout = load_layout(a.layout.as_deref())?;
            guard_output(&a.input, &a.out)?;
            let eps = load_corpus(&a.input)?;
            let recs = unify_all(&eps, &descs, &layout, &a.out)?;
            eprintln!("unify: {} episodes written", recs.len());
            Ok(())
        }
        Command::Retarget(a) => {
            let descs = load_descriptors(&a.descriptors)?;
            let layout = load_layout(a.layout.as_deref())?;
            let rules: RetargetRules = optional_config(a.config.as_ref(), |_| Ok(()))?;
            let dst = descs.get(&a.target).ok_or_else(|| {
                Error::Descriptor(format!("no descriptor for target {:?}", a.target))
            })?;
            guard_output(&a.input, &a.out)?;
            let eps = load_corpus(&a.input)?;
            let out: Vec<Episode> = eps
                .par_iter()
                .map(|ep| {
                    retarget_with_rules(ep, descriptor_for(&descs, ep)?, dst, &layout, &rules)
                })
                .collect::<Result<_>>()?;
            save_all(&out, &a.out)?;
            eprintln!("retarget: {} episodes written for {}", out.len(), a.target);
            Ok(())
        }
        Command::Augment(a) => {
            let cfg: AugmentConfig = optional_config(a.config.as_ref(), AugmentConfig::check)?;
            let descs = load_descriptors(&a.descriptors)?;
            let layout = load_layout(a.layout.as_deref())?;
            guard_output(&a.input, &a.out)?;
            let eps = load_corpus(&a.input)?;
            let ops = AugmentOps {
                mirror: !a.reverse_only,
                reverse: !a.mirror_only,
            };
            let (out, report) = augment_all(&eps, &descs, &layout, &cfg, ops)?;
            save_all(&out, &a.out)?;
            write_json(&a.out.join("augment_report.json"), &report)?;
            eprintln!(
                "augment: {} mirrored, {} reversed, {} skipped",
                report.mirrored.len(),
                report.reversed.len(),
                report.skipped.len()
            );
            Ok(())
        }
        Command::SamplePlan(a) => {
            let mut sched = SamplerSchedule::load(&a.config)?;
            if let Some(s) = a.seed {
                sched.seed = s;
            }
            let csv = match a.alpha {
                Some(alpha) => mixture_csv(&sched, alpha)?,
                None => plan_csv(&sched, a.step, a.n)?,
            };
            emit(a.out.as_deref(), &csv)
        }
        Command::FitOod(a) => {
            let eps = load_corpus(&a.input)?;
            let chosen: Vec<&Matrix> = eps
                .iter()
                .filter(|e| {
                    a.embodiment
                        .as_ref()
                        .is_none_or(|id| &e.embodiment_id == id)
                })
                .map(|e| &e.states)
                .collect();
            if chosen.is_empty() {
                return Err(Error::InsufficientData("no episodes selected".into()));
            }
            let states = Matrix::vstack(&chosen)?;
            let mut cfg = GmmFitConfig::new(a.k, a.seed);
            cfg.standardize = !a.raw;
            if let Some(q) = a.quantile {
                cfg.quantile = q;
            }
            if let Some(al) = a.alpha {
                cfg.alpha_step = al;
            }
            let fit = fit_gmm_with(&states, &cfg)?;
            write_json(&a.out, fit.model.to_file_struct())?;
            eprintln!(
                "fit-ood: {} states, {} iterations, converged {}, tau {:e}",
                states.rows(),
                fit.log_likelihood.len() - 1,
                fit.converged,
                fit.model.tau_ood()
            );
            Ok(())
        }
        Command::OodCheck(a) => {
            let mut model = GmmDensityModel::load(&a.config)?;
            if let Some(al) = a.alpha {
                if !(al > 0.0 && al.is_finite()) {
                    return Err(Error::Domain(format!("alpha {al} must be positive")));
                }
                model.set_alpha_step(al);
            }
            if a.iterate == 0 {
                return Err(Error::Domain("--iterate must be at least 1".into()));
            }
            let eps = load_corpus(&a.input)?;
            let report: Vec<OodEpisode> = eps
                .par_iter()
                .map(|ep| ood_episode(&model, ep, a.iterate))
                .collect::<Result<_>>()?;
            emit(a.out.as_deref(), &to_json(&report)?)
        }
        Command::Progress(a) => {
            let eps = load_corpus(&a.input)?;
            let mut csv = String::from("episode_id,t,progress,end\n");
            for ep in &eps {
                for (t, rho) in progress_labels(ep.len())?.into_iter().enumerate() {
                    let end = episode_end(rho, a.threshold);
                    csv.push_str(&format!("{},{t},{rho},{end}\n", ep.id));
                }
            }
            emit(a.out.as_deref(), &csv)
        }
        Command::Refine(a) => {
            let file: RefineFile = load_config(&a.config, |f: &RefineFile| f.settings.check())?;
            let critic = file.critic.build(&a.config)?;
            guard_output(&a.input, &a.out)?;
            let eps = load_corpus(&a.input)?;
            let done: Vec<(RefineEpisode, Episode)> = eps
                .par_iter()
                .map(|ep| refine_episode(critic.as_ref(), ep, &file.settings))
                .collect::<Result<_>>()?;
            let (report, refined): (Vec<_>, Vec<_>) = done.into_iter().unzip();
            write_json(&a.out.join("refine_report.json"), &report)?;
            for ep in &refined {
                save_episode(ep, &a.out.join("episodes").join(&ep.id))?;
            }
            Ok(())
        }
        Command::Pipeline(a) => pipeline::run_pipeline(&pipeline::PipelineOptions {
            config: a.config,
            out: a.out,
            seed: a.seed,
            factor: a.factor,
            step: a.step,
            draws: a.n,
        })
        .map(|_| ()),
        Command::GenFixtures(a) => fixtures::generate(&a.out, a.seed, a.n),
    }
}

fn check_align(c: &AlignConfig) -> Result<()> {
    if !(c.reference_flow > 0.0 && c.reference_flow.is_finite()) {
        return Err(Error::Domain(
            "reference_flow must be a positive number (config or --reference-flow)".into(),
        ));
    }
    if c.pair_budget == 0 {
        return Err(Error::Domain("pair_budget must be at least 1".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
struct OodCorrection {
    t: usize,
    density: f64,
    corrected_density: f64,
    correction_steps: usize,
}

#[derive(Clone, Debug, Serialize)]
struct OodEpisode {
    episode_id: String,
    steps: usize,
    flagged: usize,
    min_density: f64,
    corrections: Vec<OodCorrection>,
}

fn ood_episode(model: &GmmDensityModel, ep: &Episode, max_steps: usize) -> Result<OodEpisode> {
    let mut corrections = Vec::new();
    let mut min_density = f64::INFINITY;
    for (t, s) in ep.states.iter_rows().enumerate() {
        let p = model.density(s)?;
        min_density = min_density.min(p);
        if p < model.tau_ood() {
            let (fixed, steps) = ood_correct_iterate(model, s, max_steps)?;
            corrections.push(OodCorrection {
                t,
                density: p,
                corrected_density: model.density(&fixed)?,
                correction_steps: steps,
            });
        }
    }
    Ok(OodEpisode {
        episode_id: ep.id.clone(),
        steps: ep.len(),
        flagged: corrections.len(),
        min_density,
        corrections,
    })
}

fn one() -> f64 {
    1.0
}

/// Critic named in a refine config.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CriticSpec {
    /// `Q = -scale * |a - target|^2`.
    Quadratic {
        target: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `Q = ln p(a)` under a density model file, resolved against the config.
    GmmLogDensity { model: PathBuf },
}

impl CriticSpec {
    fn build(&self, config_path: &Path) -> Result<Box<dyn Critic + Sync>> {
        Ok(match self {
            CriticSpec::Quadratic { target, scale } => Box::new(QuadraticCritic {
                target: target.clone(),
                scale: *scale,
            }),
            CriticSpec::GmmLogDensity { model } => Box::new(GmmLogDensityCritic {
                model: GmmDensityModel::load(&relative_to(config_path, model))?,
            }),
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
struct RefineFile {
    #[serde(flatten)]
    settings: RefineConfig,
    critic: CriticSpec,
}

#[derive(Clone, Debug, Serialize)]
struct RefineStep {
    t: usize,
    q_before: f64,
    q_after: f64,
    grad_norm: f64,
    steps_taken: usize,
}

#[derive(Clone, Debug, Serialize)]
struct RefineEpisode {
    episode_id: String,
    steps: Vec<RefineStep>,
}

fn refine_episode(
    critic: &(dyn Critic + Sync),
    ep: &Episode,
    cfg: &RefineConfig,
) -> Result<(RefineEpisode, Episode)> {
    let traj: Vec<(Vec<f64>, Vec<f64>)> = ep
        .states
        .iter_rows()
        .zip(ep.actions.iter_rows())
        .map(|(s, a)| (s.to_vec(), a.to_vec()))
        .collect();
    let outcomes = refine_trajectory(critic, &traj, cfg)?;
    let mut refined = ep.clone();
    for (t, o) in outcomes.iter().enumerate() {
        refined.actions.row_mut(t).copy_from_slice(&o.action);
    }
    refined.metadata.insert(
        "refine".into(),
        serde_json::json!({"eta": cfg.eta, "n_steps": cfg.n_steps}),
    );
    let steps = outcomes
        .into_iter()
        .enumerate()
        .map(|(t, o)| RefineStep {
            t,
            q_before: o.q_before,
            q_after: o.q_after,
            grad_norm: o.grad_norm,
            steps_taken: o.steps_taken,
        })
        .collect();
    Ok((
        RefineEpisode {
            episode_id: ep.id.clone(),
            steps,
        },
        refined,
    ))
}
