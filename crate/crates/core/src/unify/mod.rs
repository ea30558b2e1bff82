//! Unified 64-slot action space: placement, masked losses, control prompts,
//! localized noise and cross-embodiment retargeting.

mod descriptor;
mod layout;
mod retarget;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use descriptor::{
    BaseType, ControlType, DescriptorFile, DimMap, EmbodimentDescriptor, EndEffector, PromptFields,
    SlotMask,
};
pub use layout::{LayoutFile, Slot, SlotGroup, UnifiedLayout, UNIFIED_DIM};
pub use retarget::{retarget, retarget_with_rules, RetargetRules, SlotSubstitution};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnifiedAction {
    pub values: [f64; UNIFIED_DIM],
    pub mask: SlotMask,
}

pub(crate) fn place(native: &[f64], dims: &[DimMap]) -> Result<UnifiedAction> {
    if native.len() != dims.len() {
        return Err(Error::Dim {
            expected: dims.len(),
            actual: native.len(),
        });
    }
    let mut values = [0.0; UNIFIED_DIM];
    let mut mask = SlotMask::EMPTY;
    for d in dims {
        values[d.slot_index] = d.scale * native[d.native_index] + d.offset;
        mask.insert(d.slot_index);
    }
    Ok(UnifiedAction { values, mask })
}

pub(crate) fn unplace(u: &UnifiedAction, dims: &[DimMap]) -> Result<Vec<f64>> {
    let missing: Vec<usize> = dims
        .iter()
        .map(|d| d.slot_index)
        .filter(|&s| !u.mask.contains(s))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Mask(format!(
            "required slots {missing:?} are unmasked"
        )));
    }
    let mut out = vec![0.0; dims.len()];
    for d in dims {
        out[d.native_index] = (u.values[d.slot_index] - d.offset) / d.scale;
    }
    Ok(out)
}

/// Places a native action vector into its unified slots; other slots are 0
/// and unmasked.
pub fn map_to_unified(a: &[f64], desc: &EmbodimentDescriptor) -> Result<UnifiedAction> {
    place(a, desc.dims())
}

/// Places a native state vector using the descriptor's state placement.
pub fn map_state_to_unified(s: &[f64], desc: &EmbodimentDescriptor) -> Result<UnifiedAction> {
    let dims = desc.state_map(s.len()).ok_or_else(|| {
        Error::Descriptor(format!(
            "{} has no placement for {}-dim states",
            desc.embodiment_id(),
            s.len()
        ))
    })?;
    place(s, dims)
}

/// Inverse affine map on the descriptor's slots, ordered by native index.
/// Slots outside the descriptor's mask are ignored.
pub fn map_from_unified(u: &UnifiedAction, desc: &EmbodimentDescriptor) -> Result<Vec<f64>> {
    unplace(u, desc.dims())
}

fn check_len(v: &[f64]) -> Result<()> {
    if v.len() != UNIFIED_DIM {
        return Err(Error::Dim {
            expected: UNIFIED_DIM,
            actual: v.len(),
        });
    }
    Ok(())
}

fn mean_sq_diff(pred: &[f64], target: &[f64], slots: impl Iterator<Item = usize>) -> (f64, usize) {
    let mut total = 0.0;
    let mut n = 0;
    for i in slots {
        total += (pred[i] - target[i]).powi(2);
        n += 1;
    }
    if n == 0 {
        (0.0, 0)
    } else {
        (total / n as f64, n)
    }
}

/// Mean squared error over masked slots only.
pub fn masked_bc_loss(pred: &[f64], target: &[f64], mask: SlotMask) -> Result<f64> {
    check_len(pred)?;
    check_len(target)?;
    if mask.is_empty() {
        return Err(Error::Mask("mask has no slots set".into()));
    }
    Ok(mean_sq_diff(pred, target, mask.iter()).0)
}

/// Splits naive padded regression loss into the masked (valid) part and the
/// part that only exists because of zero padding.
pub fn padding_loss_decomposition(
    pred: &[f64],
    padded_target: &[f64],
    mask: SlotMask,
) -> Result<(f64, f64)> {
    check_len(pred)?;
    check_len(padded_target)?;
    let valid = mean_sq_diff(pred, padded_target, mask.iter()).0;
    let spurious = mean_sq_diff(
        pred,
        padded_target,
        (0..UNIFIED_DIM).filter(|&i| !mask.contains(i)),
    )
    .0;
    Ok((valid, spurious))
}

/// Parsed control prompt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlPrompt {
    pub fields: PromptFields,
    pub mask: SlotMask,
}

fn slot_ranges(mask: SlotMask) -> String {
    let mut parts = Vec::new();
    let mut iter = mask.iter().peekable();
    while let Some(start) = iter.next() {
        let mut end = start;
        while iter.peek() == Some(&(end + 1)) {
            end = iter.next().unwrap();
        }
        parts.push(if start == end {
            start.to_string()
        } else {
            format!("{start}-{end}")
        });
    }
    parts.join(",")
}

pub fn format_control_prompt(fields: PromptFields, mask: SlotMask) -> String {
    format!(
        "arms={};hands={};ee={};ctrl={};base={};slots={}",
        fields.arms,
        fields.hands,
        match fields.end_effector {
            EndEffector::Gripper => "gripper",
            EndEffector::DexHand => "dex",
        },
        match fields.ctrl {
            ControlType::Joint => "joint",
            ControlType::Cartesian => "cartesian",
        },
        match fields.base {
            BaseType::Mobile => "mobile",
            BaseType::Static => "static",
        },
        slot_ranges(mask)
    )
}

/// Canonical `arms=..;hands=..;ee=..;ctrl=..;base=..;slots=a-b,c` string.
pub fn control_prompt(desc: &EmbodimentDescriptor) -> String {
    format_control_prompt(desc.prompt(), desc.mask())
}

pub fn parse_control_prompt(s: &str) -> Result<ControlPrompt> {
    let bad = |m: String| Error::Format {
        context: "control prompt".into(),
        message: m,
    };
    let parts: Vec<&str> = s.split(';').collect();
    let keys = ["arms", "hands", "ee", "ctrl", "base", "slots"];
    if parts.len() != keys.len() {
        return Err(bad(format!(
            "expected {} fields, got {}",
            keys.len(),
            parts.len()
        )));
    }
    let mut values = Vec::with_capacity(keys.len());
    for (part, key) in parts.iter().zip(keys) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("field {part:?} has no '='")))?;
        if k != key {
            return Err(bad(format!("expected key {key:?}, got {k:?}")));
        }
        values.push(v);
    }
    let count = |v: &str| {
        v.parse::<u32>()
            .map_err(|_| bad(format!("bad count {v:?}")))
    };
    let end_effector = match values[2] {
        "gripper" => EndEffector::Gripper,
        "dex" => EndEffector::DexHand,
        v => return Err(bad(format!("bad ee {v:?}"))),
    };
    let ctrl = match values[3] {
        "joint" => ControlType::Joint,
        "cartesian" => ControlType::Cartesian,
        v => return Err(bad(format!("bad ctrl {v:?}"))),
    };
    let base = match values[4] {
        "mobile" => BaseType::Mobile,
        "static" => BaseType::Static,
        v => return Err(bad(format!("bad base {v:?}"))),
    };
    let mut mask = SlotMask::EMPTY;
    for range in values[5].split(',').filter(|r| !r.is_empty()) {
        let (a, b) = range.split_once('-').unwrap_or((range, range));
        let parse = |x: &str| {
            x.parse::<usize>()
                .map_err(|_| bad(format!("bad slot {x:?}")))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if a > b || b >= UNIFIED_DIM {
            return Err(bad(format!("bad slot range {range:?}")));
        }
        (a..=b).for_each(|i| mask.insert(i));
    }
    Ok(ControlPrompt {
        fields: PromptFields {
            arms: count(values[0])?,
            hands: count(values[1])?,
            end_effector,
            ctrl,
            base,
        },
        mask,
    })
}

/// Draws `k` standard normals and embeds them into the descriptor's masked
/// slots in ascending slot order; every other slot is exactly zero.
pub fn localize_noise(
    k: usize,
    desc: &EmbodimentDescriptor,
    seed: u64,
) -> Result<[f64; UNIFIED_DIM]> {
    let mask = desc.mask();
    if k != mask.count() {
        return Err(Error::Dim {
            expected: mask.count(),
            actual: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [0.0; UNIFIED_DIM];
    for slot in mask.iter() {
        out[slot] = StandardNormal.sample(&mut rng);
    }
    Ok(out)
}
