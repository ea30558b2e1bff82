use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::layout::UNIFIED_DIM;
use crate::error::{Error, Result};

/// Set of unified slots, one bit per slot.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct SlotMask(u64);

impl SlotMask {
    pub const EMPTY: SlotMask = SlotMask(0);
    pub const FULL: SlotMask = SlotMask(u64::MAX);

    pub fn from_slots(slots: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut m = SlotMask::EMPTY;
        for s in slots {
            if s >= UNIFIED_DIM {
                return Err(Error::Mask(format!("slot {s} out of range")));
            }
            m.insert(s);
        }
        Ok(m)
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        if bits.len() != UNIFIED_DIM {
            return Err(Error::Dim {
                expected: UNIFIED_DIM,
                actual: bits.len(),
            });
        }
        Ok(SlotMask(
            bits.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .fold(0u64, |acc, (i, _)| acc | (1 << i)),
        ))
    }

    pub fn insert(&mut self, slot: usize) {
        self.0 |= 1 << slot;
    }

    pub fn contains(&self, slot: usize) -> bool {
        slot < UNIFIED_DIM && self.0 & (1 << slot) != 0
    }

    pub fn count(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn is_superset_of(&self, other: &SlotMask) -> bool {
        other.0 & !self.0 == 0
    }

    /// Set slots in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..UNIFIED_DIM).filter(move |&i| self.contains(i))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..UNIFIED_DIM).map(|i| self.contains(i)).collect()
    }
}

impl fmt::Debug for SlotMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for SlotMask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for SlotMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let slots = Vec::<usize>::deserialize(d)?;
        SlotMask::from_slots(slots).map_err(serde::de::Error::custom)
    }
}

/// Affine placement of one native dimension: `unified = scale * native + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimMap {
    pub native_index: usize,
    pub slot_index: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndEffector {
    Gripper,
    DexHand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlType {
    Joint,
    Cartesian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseType {
    Mobile,
    Static,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptFields {
    pub arms: u32,
    pub hands: u32,
    pub end_effector: EndEffector,
    pub ctrl: ControlType,
    pub base: BaseType,
}

/// On-disk form of `embodiments/<id>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorFile {
    pub embodiment_id: String,
    pub dims: Vec<DimMap>,
    pub prompt: PromptFields,
    /// Placement of state channels; when absent, states are assumed to share
    /// the action placement if their width matches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_dims: Option<Vec<DimMap>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbodimentDescriptor {
    embodiment_id: String,
    dims: Vec<DimMap>,
    state_dims: Option<Vec<DimMap>>,
    mask: SlotMask,
    prompt: PromptFields,
}

/// Checks a dim list and returns it sorted by native index with its mask.
fn check_dims(dims: &[DimMap], what: &str) -> Result<(Vec<DimMap>, SlotMask)> {
    let mut sorted = dims.to_vec();
    sorted.sort_by_key(|d| d.native_index);
    let mut mask = SlotMask::EMPTY;
    for (pos, d) in sorted.iter().enumerate() {
        if d.native_index != pos {
            return Err(Error::Descriptor(format!(
                "{what}: native indices must be exactly 0..{}, found {} at position {pos}",
                sorted.len(),
                d.native_index
            )));
        }
        if d.slot_index >= UNIFIED_DIM {
            return Err(Error::Descriptor(format!(
                "{what}[native {}]: slot_index {} out of range 0..{UNIFIED_DIM}",
                d.native_index, d.slot_index
            )));
        }
        if mask.contains(d.slot_index) {
            return Err(Error::Descriptor(format!(
                "{what}[native {}]: slot {} already mapped",
                d.native_index, d.slot_index
            )));
        }
        if !(d.scale.is_finite() && d.scale != 0.0 && d.offset.is_finite()) {
            return Err(Error::Descriptor(format!(
                "{what}[native {}]: scale must be finite and non-zero, offset finite",
                d.native_index
            )));
        }
        mask.insert(d.slot_index);
    }
    Ok((sorted, mask))
}

impl EmbodimentDescriptor {
    pub fn new(
        embodiment_id: impl Into<String>,
        dims: Vec<DimMap>,
        prompt: PromptFields,
        state_dims: Option<Vec<DimMap>>,
    ) -> Result<Self> {
        let (dims, mask) = check_dims(&dims, "dims")?;
        let state_dims = match state_dims {
            Some(s) => Some(check_dims(&s, "state_dims")?.0),
            None => None,
        };
        Ok(EmbodimentDescriptor {
            embodiment_id: embodiment_id.into(),
            dims,
            state_dims,
            mask,
            prompt,
        })
    }

    pub fn from_file_struct(f: DescriptorFile) -> Result<Self> {
        Self::new(f.embodiment_id, f.dims, f.prompt, f.state_dims)
    }

    pub fn to_file_struct(&self) -> DescriptorFile {
        DescriptorFile {
            embodiment_id: self.embodiment_id.clone(),
            dims: self.dims.clone(),
            prompt: self.prompt,
            state_dims: self.state_dims.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: DescriptorFile = serde_json::from_str(&text).map_err(|e| {
            Error::Descriptor(format!(
                "{}:{}:{}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        Self::from_file_struct(file)
            .map_err(|e| Error::Descriptor(format!("{}: {e}", path.display())))
    }

    /// Identity placement of `n` consecutive native dims starting at `first_slot`.
    pub fn contiguous(
        embodiment_id: impl Into<String>,
        first_slot: usize,
        n: usize,
        prompt: PromptFields,
    ) -> Result<Self> {
        let dims = (0..n)
            .map(|i| DimMap {
                native_index: i,
                slot_index: first_slot + i,
                scale: 1.0,
                offset: 0.0,
            })
            .collect();
        Self::new(embodiment_id, dims, prompt, None)
    }

    pub fn embodiment_id(&self) -> &str {
        &self.embodiment_id
    }

    /// Dims sorted by native index.
    pub fn dims(&self) -> &[DimMap] {
        &self.dims
    }

    pub fn native_dim(&self) -> usize {
        self.dims.len()
    }

    pub fn mask(&self) -> SlotMask {
        self.mask
    }

    pub fn prompt(&self) -> PromptFields {
        self.prompt
    }

    /// Explicit state placement if given, otherwise the action placement.
    pub fn state_map_or_dims(&self) -> &[DimMap] {
        self.state_dims.as_deref().unwrap_or(&self.dims)
    }

    /// State placement for states of width `state_dim`, if one is known.
    pub fn state_map(&self, state_dim: usize) -> Option<&[DimMap]> {
        match &self.state_dims {
            Some(s) if s.len() == state_dim => Some(s),
            Some(_) => None,
            None if self.dims.len() == state_dim => Some(&self.dims),
            None => None,
        }
    }
}
