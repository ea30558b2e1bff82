//! Apparent-motion estimation and monotone trajectory resampling.

mod flow;
mod pchip;
mod resample;
mod retime;

use serde::{Deserialize, Serialize};

pub use flow::{
    mean_flow_magnitude, mean_flow_magnitude_sampled, pair_flow_magnitude, FlowEstimate,
    MIN_FLOW_FRAME,
};
pub use pchip::{pchip_eval, Pchip};
pub use resample::{
    alignment_factor, resample_trajectory, resample_with_quaternions, speed_warp, AlignmentFactor,
    ResamplePlan, SpeedDistribution, MAX_STRIDE, MIN_STRIDE,
};
pub use retime::{episode_flow, quaternion_columns, resample_episode};

/// Contents of `align_plan.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignPlan {
    pub dataset_id: String,
    pub mean_flow: f64,
    pub reference_flow: f64,
    pub stride_f: f64,
}
