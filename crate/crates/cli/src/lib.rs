//! `roboprep` command-line front end. [`run`] parses arguments, dispatches a
//! subcommand and maps the outcome to an exit code: 0 on success, 1 on data
//! errors, 2 on usage errors.

mod commands;
mod fixtures;
pub mod io;
pub mod pipeline;
pub mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "roboprep",
    version,
    about = "Screen, unify, align and augment robot demonstration episodes"
)]
struct Cli {
    /// Worker threads for episode-level parallelism.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structural checks: cameras, frame counts, length, motion.
    Validate(ValidateArgs),
    /// Quality scores and accept/reject verdicts, plus per-dataset summary.
    Qa(QaArgs),
    /// Per-dataset flow measurement and temporal resampling.
    Align(AlignArgs),
    /// Export actions (and states) in the 64-slot unified layout.
    Unify(UnifyArgs),
    /// Re-express episodes in another embodiment's native spaces.
    Retarget(RetargetArgs),
    /// Mirrored and time-reversed variants.
    Augment(AugmentArgs),
    /// Mixture probabilities or a seeded draw plan, as CSV.
    SamplePlan(SamplePlanArgs),
    /// Fit the state-density model used for out-of-distribution checks.
    FitOod(FitOodArgs),
    /// Density check and gradient correction of every state.
    OodCheck(OodCheckArgs),
    /// Progress labels and end-of-episode flags, as CSV.
    Progress(ProgressArgs),
    /// Critic-guided action refinement.
    Refine(RefineArgs),
    /// Per-dataset quality summary only.
    Summary(SummaryArgs),
    /// validate, qa, align, unify, augment and sample-plan in one run.
    Pipeline(PipelineArgs),
    /// Write a synthetic mixed-embodiment corpus with configs.
    GenFixtures(GenFixturesArgs),
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Filter config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct QaArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// QA config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Filter config folded into the verdict.
    #[arg(long)]
    filter: Option<PathBuf>,
    /// Output directory for qa_report.json and dataset_summary.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SummaryArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    filter: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Align config with reference_flow and pair_budget.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reference flow in px/frame; overrides the config.
    #[arg(long)]
    reference_flow: Option<f64>,
    /// Fixed stride for every dataset instead of the measured one.
    #[arg(long)]
    factor: Option<f64>,
    /// Descriptor directory, used to renormalize quaternion columns.
    #[arg(long)]
    descriptors: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct UnifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    descriptors: PathBuf,
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RetargetArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    descriptors: PathBuf,
    /// Target embodiment id.
    #[arg(long)]
    target: String,
    /// Substitution rules.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    descriptors: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Only mirror.
    #[arg(long, conflicts_with = "reverse_only")]
    mirror_only: bool,
    /// Only reverse.
    #[arg(long)]
    reverse_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SamplePlanArgs {
    /// Sampler schedule.
    #[arg(long)]
    config: PathBuf,
    /// Print mixture probabilities at this exponent instead of a plan.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    step: u64,
    /// Number of draws.
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Overrides the schedule seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitOodArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Mixture components.
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training-density quantile used as the threshold.
    #[arg(long)]
    quantile: Option<f64>,
    /// Correction step size stored in the model.
    #[arg(long)]
    alpha: Option<f64>,
    /// Fit on raw states instead of z-scores.
    #[arg(long)]
    raw: bool,
    /// Only use episodes of this embodiment.
    #[arg(long)]
    embodiment: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OodCheckArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Density model file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the model's correction step size.
    #[arg(long)]
    alpha: Option<f64>,
    /// Correction steps per flagged state.
    #[arg(long, default_value_t = 1)]
    iterate: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProgressArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = roboprep::guards::DEFAULT_END_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RefineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Refinement config with the critic description.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for refine_report.json and refined packs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the sampler seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed alignment stride for every dataset.
    #[arg(long)]
    factor: Option<f64>,
    /// Training step the sample plan is drawn for.
    #[arg(long)]
    step: Option<u64>,
    /// Draws in the sample plan.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct GenFixturesArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Corpus size, at least 9.
    #[arg(long, default_value_t = 50)]
    n: usize,
}

/// Runs one command line (without the program name) and returns its exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("roboprep")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                _ => {
                    eprint!("{}", e.render());
                    if e.kind() == ErrorKind::InvalidSubcommand {
                        use clap::CommandFactory;
                        eprint!("\n{}", Cli::command().render_help());
                    }
                    EXIT_USAGE
                }
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs as usize)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_DATA;
        }
    };
    match pool.install(|| commands::dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}
