use serde::{Deserialize, Serialize};
use serde_json::json;

use super::descriptor::{DimMap, EmbodimentDescriptor, SlotMask};
use super::layout::{UnifiedLayout, UNIFIED_DIM};
use super::place;
use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Routes a source slot the target lacks onto target slots:
/// `target[to] = scale * source[from] + offset` for every `to` the target uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSubstitution {
    pub from_slot: usize,
    pub to_slots: Vec<usize>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RetargetRules {
    #[serde(default)]
    pub substitutions: Vec<SlotSubstitution>,
}

/// How each source slot reaches the target.
enum Route<'a> {
    Direct(usize),
    Substituted(usize, &'a SlotSubstitution),
}

fn plan<'a>(
    src: &[DimMap],
    dst_mask: SlotMask,
    rules: &'a RetargetRules,
    layout: &UnifiedLayout,
) -> Result<Vec<Route<'a>>> {
    let mut routes = Vec::new();
    let mut unmappable = Vec::new();
    let mut src_slots: Vec<usize> = src.iter().map(|d| d.slot_index).collect();
    src_slots.sort_unstable();
    for slot in src_slots {
        if dst_mask.contains(slot) {
            routes.push(Route::Direct(slot));
        } else if let Some(sub) = rules
            .substitutions
            .iter()
            .find(|s| s.from_slot == slot && s.to_slots.iter().any(|&t| dst_mask.contains(t)))
        {
            routes.push(Route::Substituted(slot, sub));
        } else {
            unmappable.push(layout.slot(slot).semantic_id.clone());
        }
    }
    if unmappable.is_empty() {
        Ok(routes)
    } else {
        Err(Error::Retarget(unmappable))
    }
}

fn remap_matrix(
    m: &Matrix,
    src: &[DimMap],
    dst: &[DimMap],
    routes: &[Route<'_>],
) -> Result<(Matrix, SlotMask)> {
    let dst_mask = SlotMask::from_slots(dst.iter().map(|d| d.slot_index))?;
    let mut filled = SlotMask::EMPTY;
    let mut out = Matrix::zeros(m.rows(), dst.len());
    for r in 0..m.rows() {
        let u = place(m.row(r), src)?;
        let mut v = [0.0; UNIFIED_DIM];
        for route in routes {
            match *route {
                Route::Direct(s) => {
                    v[s] = u.values[s];
                    filled.insert(s);
                }
                Route::Substituted(s, sub) => {
                    for &t in sub.to_slots.iter().filter(|&&t| dst_mask.contains(t)) {
                        v[t] = sub.scale * u.values[s] + sub.offset;
                        filled.insert(t);
                    }
                }
            }
        }
        let row = out.row_mut(r);
        for d in dst {
            if filled.contains(d.slot_index) {
                row[d.native_index] = (v[d.slot_index] - d.offset) / d.scale;
            }
        }
    }
    Ok((out, filled))
}

/// [`retarget_with_rules`] without group substitutions.
pub fn retarget(
    ep: &Episode,
    src: &EmbodimentDescriptor,
    dst: &EmbodimentDescriptor,
    layout: &UnifiedLayout,
) -> Result<Episode> {
    retarget_with_rules(ep, src, dst, layout, &RetargetRules::default())
}

/// Re-expresses an episode in another embodiment's native spaces by going
/// through the unified layout. Target dims with no source are written as 0
/// and listed in the `retarget` metadata entry. States are remapped when the
/// source descriptor has a placement for them, and kept otherwise.
pub fn retarget_with_rules(
    ep: &Episode,
    src: &EmbodimentDescriptor,
    dst: &EmbodimentDescriptor,
    layout: &UnifiedLayout,
    rules: &RetargetRules,
) -> Result<Episode> {
    if ep.actions.cols() != src.native_dim() {
        return Err(Error::Dim {
            expected: src.native_dim(),
            actual: ep.actions.cols(),
        });
    }
    let routes = plan(src.dims(), dst.mask(), rules, layout)?;
    let (actions, filled) = remap_matrix(&ep.actions, src.dims(), dst.dims(), &routes)?;

    let states = match src.state_map(ep.states.cols()) {
        Some(src_state) => {
            let dst_state = dst.state_map_or_dims();
            let dst_state_mask = SlotMask::from_slots(dst_state.iter().map(|d| d.slot_index))?;
            let state_routes = plan(src_state, dst_state_mask, rules, layout)?;
            remap_matrix(&ep.states, src_state, dst_state, &state_routes)?.0
        }
        None => ep.states.clone(),
    };

    let unfilled: Vec<String> = dst
        .mask()
        .iter()
        .filter(|&s| !filled.contains(s))
        .map(|s| layout.slot(s).semantic_id.clone())
        .collect();
    let coverage = if dst.mask().is_empty() {
        1.0
    } else {
        filled.count() as f64 / dst.mask().count() as f64
    };

    let mut out = ep.clone();
    out.embodiment_id = dst.embodiment_id().to_string();
    out.actions = actions;
    out.states = states;
    out.metadata.insert(
        "retarget".into(),
        json!({
            "source_embodiment": src.embodiment_id(),
            "target_mask": dst.mask(),
            "coverage": coverage,
            "unfilled_slots": unfilled,
        }),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::episode::ActionSemantics;
    use crate::unify::{BaseType, ControlType, EndEffector, PromptFields};

    fn prompt(base: BaseType) -> PromptFields {
        PromptFields {
            arms: 1,
            hands: 0,
            end_effector: EndEffector::Gripper,
            ctrl: ControlType::Joint,
            base,
        }
    }

    fn dm(n: usize, s: usize, scale: f64, offset: f64) -> DimMap {
        DimMap {
            native_index: n,
            slot_index: s,
            scale,
            offset,
        }
    }

    fn episode(actions: Vec<Vec<f64>>) -> Episode {
        let m = Matrix::from_rows(&actions).unwrap();
        Episode {
            id: "e".into(),
            embodiment_id: "src".into(),
            fps: 10.0,
            instruction: "x".into(),
            states: m.clone(),
            actions: m,
            cameras: BTreeMap::new(),
            reversible: false,
            action_semantics: ActionSemantics::AbsoluteTarget,
            provenance: None,
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn identity_retarget() {
        let layout = UnifiedLayout::default_layout();
        let d = EmbodimentDescriptor::new(
            "src",
            vec![
                dm(0, 0, 2.0, 0.1),
                dm(1, 1, -0.5, 3.0),
                dm(2, 14, 12.5, 0.0),
            ],
            prompt(BaseType::Static),
            None,
        )
        .unwrap();
        let ep = episode(vec![vec![0.3, -1.2, 0.04], vec![0.31, -1.1, 0.02]]);
        let out = retarget(&ep, &d, &d, &layout).unwrap();
        for (a, b) in out.actions.as_slice().iter().zip(ep.actions.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(out.metadata["retarget"]["coverage"], 1.0);
    }

    #[test]
    fn gripper_width_to_grasp_scalar() {
        let layout = UnifiedLayout::default_layout();
        // width in metres -> closure-normalized slot 14
        let src = EmbodimentDescriptor::new(
            "src",
            vec![dm(0, 0, 1.0, 0.0), dm(1, 14, 1.0 / 0.08, 0.0)],
            prompt(BaseType::Static),
            None,
        )
        .unwrap();
        // target stores grasp as percent closed: slot = 1 - native/100
        let dst = EmbodimentDescriptor::new(
            "dst",
            vec![dm(0, 14, -0.01, 1.0), dm(1, 0, 1.0, 0.0)],
            prompt(BaseType::Static),
            None,
        )
        .unwrap();
        let ep = episode(vec![vec![0.5, 0.02], vec![0.6, 0.06]]);
        let out = retarget(&ep, &src, &dst, &layout).unwrap();
        // 0.02 m -> 0.25 -> 75 %, 0.06 m -> 0.75 -> 25 %
        assert!((out.actions.get(0, 0) - 75.0).abs() < 1e-9);
        assert!((out.actions.get(1, 0) - 25.0).abs() < 1e-9);
        assert_eq!(out.actions.get(1, 1), 0.6);
        assert_eq!(out.embodiment_id, "dst");
    }

    #[test]
    fn substitution_routes_grasp_to_hand() {
        let layout = UnifiedLayout::default_layout();
        let src = EmbodimentDescriptor::new(
            "src",
            vec![dm(0, 14, 1.0, 0.0)],
            prompt(BaseType::Static),
            None,
        )
        .unwrap();
        let dst = EmbodimentDescriptor::new(
            "dst",
            vec![dm(0, 16, 1.0, 0.0), dm(1, 17, 1.0, 0.0)],
            prompt(BaseType::Static),
            None,
        )
        .unwrap();
        let rules = RetargetRules {
            substitutions: vec![SlotSubstitution {
                from_slot: 14,
                to_slots: vec![16, 17, 18],
                scale: 1.5,
                offset: 0.0,
            }],
        };
        let ep = episode(vec![vec![0.4]]);
        assert!(retarget(&ep, &src, &dst, &layout).is_err());
        let out = retarget_with_rules(&ep, &src, &dst, &layout, &rules).unwrap();
        assert!((out.actions.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((out.actions.get(0, 1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn base_to_static_fails_naming_slots() {
        let layout = UnifiedLayout::default_layout();
        let src = EmbodimentDescriptor::new(
            "src",
            vec![dm(0, 0, 1.0, 0.0), dm(1, 58, 1.0, 0.0), dm(2, 60, 1.0, 0.0)],
            prompt(BaseType::Mobile),
            None,
        )
        .unwrap();
        let dst = EmbodimentDescriptor::new(
            "dst",
            vec![dm(0, 0, 1.0, 0.0)],
            prompt(BaseType::Static),
            None,
        )
        .unwrap();
        match retarget(&episode(vec![vec![0.0, 0.1, 0.2]]), &src, &dst, &layout) {
            Err(Error::Retarget(ids)) => assert_eq!(ids, ["base.vx", "base.wz"]),
            other => panic!("{other:?}"),
        }
    }
}
