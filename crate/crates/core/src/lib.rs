//! Data preparation for cross-embodiment robot policy training: episode
//! storage, quality screening, a unified action space, motion-based speed
//! alignment, mixture scheduling, augmentation, inference-time guards and
//! critic-guided action refinement.

pub mod align;
pub mod augment;
pub mod dataqa;
pub mod episode;
pub mod error;
pub mod frame;
pub mod guards;
pub mod matrix;
pub mod rl_align;
pub mod sampler;
pub mod synth;
pub mod unify;

pub use episode::{load_episode, save_episode, Episode};
pub use error::{Error, Result};
pub use frame::GrayFrame;
pub use matrix::Matrix;
