use serde_json::json;

use super::flow::mean_flow_magnitude_sampled;
use super::resample::{resample_with_quaternions, ResamplePlan};
use crate::episode::{ActionSemantics, Episode};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::unify::EmbodimentDescriptor;

/// Mean apparent motion of an episode: per-camera sampled flow, averaged
/// over cameras in name order.
pub fn episode_flow(ep: &Episode, pair_budget: usize) -> Result<f64> {
    if ep.cameras.is_empty() {
        return Err(Error::InsufficientData(format!("{} has no cameras", ep.id)));
    }
    let mut total = 0.0;
    for stream in ep.cameras.values() {
        total += mean_flow_magnitude_sampled(&stream.frames, pair_budget)?.mean_magnitude;
    }
    Ok(total / ep.cameras.len() as f64)
}

/// Native action columns holding end-effector quaternions `(qx, qy, qz, qw)`,
/// for groups the descriptor maps completely.
pub fn quaternion_columns(desc: &EmbodimentDescriptor) -> Vec<[usize; 4]> {
    const GROUPS: [[usize; 4]; 2] = [[43, 44, 45, 46], [50, 51, 52, 53]];
    GROUPS
        .iter()
        .filter_map(|g| {
            let mut cols = [0; 4];
            for (c, slot) in cols.iter_mut().zip(g) {
                *c = desc
                    .dims()
                    .iter()
                    .find(|d| d.slot_index == *slot)?
                    .native_index;
            }
            Some(cols)
        })
        .collect()
}

/// Retimes a whole episode with `stride` source steps per output step.
/// States and absolute-target actions are interpolated; delta actions are
/// recomputed from the resampled states; frames take the nearest source
/// frame; `fps` becomes `fps / stride`.
pub fn resample_episode(
    ep: &Episode,
    stride: f64,
    action_quaternions: &[[usize; 4]],
) -> Result<Episode> {
    let plan = ResamplePlan::new(ep.len(), stride)?;
    let state_quats: &[[usize; 4]] = if ep.states.cols() == ep.actions.cols() {
        action_quaternions
    } else {
        &[]
    };
    let states = resample_with_quaternions(&ep.states, stride, state_quats)?;
    let actions = match ep.action_semantics {
        ActionSemantics::AbsoluteTarget => {
            resample_with_quaternions(&ep.actions, stride, action_quaternions)?
        }
        ActionSemantics::Delta => {
            if ep.actions.cols() != ep.states.cols() {
                return Err(Error::Dim {
                    expected: ep.states.cols(),
                    actual: ep.actions.cols(),
                });
            }
            let m = states.rows();
            let mut a = Matrix::zeros(m, states.cols());
            for r in 0..m.saturating_sub(1) {
                for c in 0..states.cols() {
                    a.set(r, c, states.get(r + 1, c) - states.get(r, c));
                }
            }
            a
        }
    };
    let last = ep.len() - 1;
    let mut out = ep.clone();
    for (name, stream) in out.cameras.iter_mut() {
        let src = &ep.cameras[name].frames;
        if src.is_empty() {
            continue;
        }
        stream.frames = plan
            .query_times
            .iter()
            .map(|q| src[(q.round() as usize).min(last).min(src.len() - 1)].clone())
            .collect();
    }
    out.states = states;
    out.actions = actions;
    out.fps = ep.fps / stride;
    out.metadata.insert(
        "alignment".into(),
        json!({ "stride": stride, "source_length": ep.len(), "source_fps": ep.fps }),
    );
    Ok(out)
}
