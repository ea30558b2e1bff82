//! Inference-time guards: state-density OOD correction, progress labels and
//! pixel-to-world lifting.

mod gmm;
mod lift;
mod progress;

pub use gmm::{
    fit_gmm, fit_gmm_with, fit_ood_model, gmm_density_grad, ood_correct, ood_correct_iterate,
    GmmDensityModel, GmmFit, GmmFitConfig, GmmModelFile, Standardization, DEFAULT_ALPHA_STEP,
    DEFAULT_OOD_QUANTILE, MAX_CORRECTION_STEPS, RIDGE,
};
pub use lift::{lift_point, CameraModel, IDENTITY_POSE};
pub use progress::{episode_end, progress_labels, DEFAULT_END_THRESHOLD};
