use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNIFIED_DIM: usize = 64;

const DEFAULT_LAYOUT: &str = include_str!("../../assets/layout_v1.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotGroup {
    LeftArm,
    RightArm,
    LeftGrasp,
    RightGrasp,
    LeftHand,
    RightHand,
    LeftEe,
    RightEe,
    Torso,
    Head,
    Base,
    Reserved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub index: usize,
    pub semantic_id: String,
    pub unit: String,
    pub mirror_partner: usize,
    pub mirror_sign: i8,
    pub group: SlotGroup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    pub version: String,
    pub slots: Vec<Slot>,
}

/// The 64-slot semantic table. Slots are stored by index.
#[derive(Clone, Debug, PartialEq)]
pub struct UnifiedLayout {
    version: String,
    slots: Vec<Slot>,
}

impl UnifiedLayout {
    pub fn from_file_struct(file: LayoutFile, context: &str) -> Result<Self> {
        let bad = |msg: String| Error::Layout(format!("{context}: {msg}"));
        if file.slots.len() != UNIFIED_DIM {
            return Err(bad(format!(
                "expected {UNIFIED_DIM} slots, found {}",
                file.slots.len()
            )));
        }
        let mut by_index: Vec<Option<Slot>> = vec![None; UNIFIED_DIM];
        let mut ids = HashSet::new();
        for (pos, slot) in file.slots.into_iter().enumerate() {
            if slot.index >= UNIFIED_DIM {
                return Err(bad(format!(
                    "slots[{pos}].index = {} out of range",
                    slot.index
                )));
            }
            if slot.mirror_partner >= UNIFIED_DIM {
                return Err(bad(format!(
                    "slots[{pos}].mirror_partner = {} out of range",
                    slot.mirror_partner
                )));
            }
            if slot.mirror_sign != 1 && slot.mirror_sign != -1 {
                return Err(bad(format!(
                    "slots[{pos}].mirror_sign = {} must be +1 or -1",
                    slot.mirror_sign
                )));
            }
            if !ids.insert(slot.semantic_id.clone()) {
                return Err(bad(format!(
                    "slots[{pos}].semantic_id {:?} is duplicated",
                    slot.semantic_id
                )));
            }
            let idx = slot.index;
            if by_index[idx].replace(slot).is_some() {
                return Err(bad(format!("slots[{pos}].index = {idx} is duplicated")));
            }
        }
        let slots: Vec<Slot> = by_index.into_iter().map(Option::unwrap).collect();
        for s in &slots {
            let p = &slots[s.mirror_partner];
            if p.mirror_partner != s.index {
                return Err(bad(format!(
                    "slot {} -> {} -> {} is not an involution",
                    s.index, s.mirror_partner, p.mirror_partner
                )));
            }
            if p.mirror_sign != s.mirror_sign {
                return Err(bad(format!(
                    "slot {} and partner {} disagree on mirror_sign",
                    s.index, p.index
                )));
            }
        }
        Ok(UnifiedLayout {
            version: file.version,
            slots,
        })
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let file: LayoutFile = serde_json::from_str(text)
            .map_err(|e| Error::Layout(format!("{context}:{}:{}: {e}", e.line(), e.column())))?;
        Self::from_file_struct(file, context)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// The layout shipped with the crate (`assets/layout_v1.json`).
    pub fn default_layout() -> Self {
        Self::from_json(DEFAULT_LAYOUT, "layout_v1.json").expect("shipped layout is valid")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, index: usize) -> &Slot {
        &self.slots[index]
    }

    pub fn to_file_struct(&self) -> LayoutFile {
        LayoutFile {
            version: self.version.clone(),
            slots: self.slots.clone(),
        }
    }

    /// Applies the left/right mirror: `out[partner(i)] = sign(i) * values[i]`.
    pub fn mirror_values(&self, values: &[f64; UNIFIED_DIM]) -> [f64; UNIFIED_DIM] {
        let mut out = [0.0; UNIFIED_DIM];
        for s in &self.slots {
            out[s.mirror_partner] = s.mirror_sign as f64 * values[s.index];
        }
        out
    }

    pub fn slots_in_group(&self, group: SlotGroup) -> Vec<usize> {
        self.slots
            .iter()
            .filter(|s| s.group == group)
            .map(|s| s.index)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_matches_documented_ranges() {
        let l = UnifiedLayout::default_layout();
        assert_eq!(
            l.slots_in_group(SlotGroup::LeftArm),
            (0..7).collect::<Vec<_>>()
        );
        assert_eq!(
            l.slots_in_group(SlotGroup::RightArm),
            (7..14).collect::<Vec<_>>()
        );
        assert_eq!(l.slots_in_group(SlotGroup::LeftGrasp), vec![14]);
        assert_eq!(l.slots_in_group(SlotGroup::RightGrasp), vec![15]);
        assert_eq!(
            l.slots_in_group(SlotGroup::LeftHand),
            (16..28).collect::<Vec<_>>()
        );
        assert_eq!(
            l.slots_in_group(SlotGroup::RightHand),
            (28..40).collect::<Vec<_>>()
        );
        assert_eq!(
            l.slots_in_group(SlotGroup::LeftEe),
            (40..47).collect::<Vec<_>>()
        );
        assert_eq!(
            l.slots_in_group(SlotGroup::RightEe),
            (47..54).collect::<Vec<_>>()
        );
        assert_eq!(l.slots_in_group(SlotGroup::Torso), vec![54, 55]);
        assert_eq!(l.slots_in_group(SlotGroup::Head), vec![56, 57]);
        assert_eq!(l.slots_in_group(SlotGroup::Base), vec![58, 59, 60]);
        assert_eq!(l.slots_in_group(SlotGroup::Reserved), vec![61, 62, 63]);
    }

    #[test]
    fn mirror_is_involution() {
        let l = UnifiedLayout::default_layout();
        let mut v = [0.0; UNIFIED_DIM];
        for (i, x) in v.iter_mut().enumerate() {
            *x = i as f64 * 0.37 - 5.0;
        }
        assert_eq!(l.mirror_values(&l.mirror_values(&v)), v);
    }

    #[test]
    fn broken_involution_is_reported() {
        let mut file = UnifiedLayout::default_layout().to_file_struct();
        file.slots[0].mirror_partner = 8;
        let err = UnifiedLayout::from_file_struct(file, "t").unwrap_err();
        assert!(err.to_string().contains("involution"), "{err}");
    }

    #[test]
    fn duplicate_semantic_id_is_reported() {
        let mut file = UnifiedLayout::default_layout().to_file_struct();
        file.slots[3].semantic_id = file.slots[2].semantic_id.clone();
        let err = UnifiedLayout::from_file_struct(file, "t").unwrap_err();
        assert!(err.to_string().contains("slots[3]"), "{err}");
    }

    #[test]
    fn json_errors_carry_position() {
        let err = UnifiedLayout::from_json("{\n \"version\": 3 }", "bad.json").unwrap_err();
        assert!(err.to_string().contains("bad.json:2:"), "{err}");
    }
}
