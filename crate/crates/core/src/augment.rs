//! Mirrored and time-reversed episode variants.

use std::collections::{BTreeMap, HashSet};

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::episode::{ActionSemantics, Episode, Provenance};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::unify::{place, unplace, DimMap, EmbodimentDescriptor, SlotMask, UnifiedLayout};

/// Rewrites an instruction matching `from` into `to`. `{name}` placeholders
/// in `from` capture free text that is substituted into `to`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillTemplate {
    pub from: String,
    pub to: String,
}

impl SkillTemplate {
    pub fn new(from: &str, to: &str) -> Self {
        SkillTemplate {
            from: from.into(),
            to: to.into(),
        }
    }

    pub fn inverse(&self) -> Self {
        SkillTemplate::new(&self.to, &self.from)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Word pairs exchanged when mirroring an instruction.
    pub swap_lexicon: Vec<[String; 2]>,
    /// Camera streams that trade places under mirroring.
    pub camera_pairs: Vec<[String; 2]>,
    pub reversible_skills: Vec<SkillTemplate>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let pair = |a: &str, b: &str| [a.to_string(), b.to_string()];
        AugmentConfig {
            swap_lexicon: vec![pair("left", "right")],
            camera_pairs: vec![pair("left_wrist", "right_wrist")],
            reversible_skills: vec![
                SkillTemplate::new(
                    "pick {object} from the table",
                    "place {object} on the table",
                ),
                SkillTemplate::new("pick up {object}", "put down {object}"),
                SkillTemplate::new(
                    "hand over {object} from the left hand to the right hand",
                    "hand over {object} from the right hand to the left hand",
                ),
                SkillTemplate::new(
                    "hand over {object} from the right hand to the left hand",
                    "hand over {object} from the left hand to the right hand",
                ),
                SkillTemplate::new(
                    "move {object} from the left hand to the right hand",
                    "move {object} from the right hand to the left hand",
                ),
                SkillTemplate::new(
                    "move {object} from the right hand to the left hand",
                    "move {object} from the left hand to the right hand",
                ),
                SkillTemplate::new("take {object} from the hand", "put {object} into the hand"),
            ],
        }
    }
}

impl AugmentConfig {
    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for [a, b] in &self.swap_lexicon {
            for w in [a, b] {
                if w.trim().is_empty() || !seen.insert(w.to_lowercase()) {
                    return Err(Error::Domain(format!(
                        "swap lexicon token {w:?} is empty or appears in more than one pair"
                    )));
                }
            }
        }
        let mut cams = HashSet::new();
        for [a, b] in &self.camera_pairs {
            if !cams.insert(a) || !cams.insert(b) {
                return Err(Error::Domain(format!(
                    "camera pair {a:?}/{b:?} overlaps another"
                )));
            }
        }
        for t in &self.reversible_skills {
            compile_template(t)?;
        }
        Ok(())
    }

    /// Adds the inverse of every template, making reversal an involution on
    /// instructions as well as streams.
    pub fn with_inverse_templates(mut self) -> Self {
        let inv: Vec<SkillTemplate> = self
            .reversible_skills
            .iter()
            .map(SkillTemplate::inverse)
            .collect();
        for t in inv {
            if !self.reversible_skills.contains(&t) {
                self.reversible_skills.push(t);
            }
        }
        self
    }
}

fn placeholder_re() -> Regex {
    Regex::new(r"\{(\w+)\}").unwrap()
}

fn compile_template(t: &SkillTemplate) -> Result<Regex> {
    let ph = placeholder_re();
    let mut pattern = String::from(r"(?i)^\s*");
    let mut names = HashSet::new();
    let mut last = 0;
    for c in ph.captures_iter(&t.from) {
        let m = c.get(0).unwrap();
        pattern.push_str(&literal(&t.from[last..m.start()]));
        let name = &c[1];
        if !names.insert(name.to_string()) {
            return Err(Error::Domain(format!(
                "template {:?} repeats {{{name}}}",
                t.from
            )));
        }
        pattern.push_str(&format!("(?P<{name}>.+?)"));
        last = m.end();
    }
    pattern.push_str(&literal(&t.from[last..]));
    pattern.push_str(r"\s*$");
    for c in ph.captures_iter(&t.to) {
        if !names.contains(&c[1]) {
            return Err(Error::Domain(format!(
                "template target {:?} uses {{{}}} which the source does not capture",
                t.to, &c[1]
            )));
        }
    }
    Regex::new(&pattern).map_err(|e| Error::Domain(format!("template {:?}: {e}", t.from)))
}

/// Escaped literal text where any whitespace run matches any whitespace run.
fn literal(text: &str) -> String {
    let mut out = String::new();
    let mut in_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !in_space {
                out.push_str(r"\s+");
            }
            in_space = true;
        } else {
            in_space = false;
            out.push_str(&regex::escape(ch.encode_utf8(&mut [0; 4])));
        }
    }
    out
}

fn match_case(model: &str, word: &str) -> String {
    if model.chars().all(|c| !c.is_lowercase()) && model.chars().any(|c| c.is_uppercase()) {
        word.to_uppercase()
    } else if model.starts_with(char::is_uppercase) {
        let mut cs = word.chars();
        cs.next()
            .map(|f| f.to_uppercase().chain(cs).collect())
            .unwrap_or_default()
    } else {
        word.to_string()
    }
}

/// Exchanges lexicon words in one pass, so `left` and `right` swap rather
/// than collapse; case of each occurrence is kept.
pub fn swap_instruction(text: &str, cfg: &AugmentConfig) -> String {
    if cfg.swap_lexicon.is_empty() {
        return text.to_string();
    }
    let mut partner = BTreeMap::new();
    for [a, b] in &cfg.swap_lexicon {
        partner.insert(a.to_lowercase(), b.to_lowercase());
        partner.insert(b.to_lowercase(), a.to_lowercase());
    }
    let mut words: Vec<&String> = partner.keys().collect();
    words.sort_by_key(|w| std::cmp::Reverse(w.len()));
    let alt = words
        .iter()
        .map(|w| regex::escape(w))
        .collect::<Vec<_>>()
        .join("|");
    let re = Regex::new(&format!(r"(?i)\b(?:{alt})\b")).unwrap();
    re.replace_all(text, |c: &Captures| {
        let m = &c[0];
        match_case(m, &partner[&m.to_lowercase()])
    })
    .into_owned()
}

/// The reversed instruction, or `None` when no template matches.
pub fn reverse_instruction(text: &str, cfg: &AugmentConfig) -> Result<Option<String>> {
    let ph = placeholder_re();
    for t in &cfg.reversible_skills {
        let re = compile_template(t)?;
        if let Some(c) = re.captures(text) {
            let out = ph.replace_all(&t.to, |p: &Captures| c[&p[1]].to_string());
            return Ok(Some(out.into_owned()));
        }
    }
    Ok(None)
}

fn check_mirror_closed(dims: &[DimMap], layout: &UnifiedLayout, what: &str) -> Result<()> {
    let mask = SlotMask::from_slots(dims.iter().map(|d| d.slot_index))?;
    for s in mask.iter() {
        let p = layout.slot(s).mirror_partner;
        if !mask.contains(p) {
            return Err(Error::Layout(format!(
                "{what}: slot {} mirrors to {} which the embodiment does not use",
                layout.slot(s).semantic_id,
                layout.slot(p).semantic_id
            )));
        }
    }
    Ok(())
}

fn mirror_matrix(m: &Matrix, dims: &[DimMap], layout: &UnifiedLayout) -> Result<Matrix> {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        let mut u = place(m.row(r), dims)?;
        u.values = layout.mirror_values(&u.values);
        out.row_mut(r).copy_from_slice(&unplace(&u, dims)?);
    }
    Ok(out)
}

/// Left/right mirror: unified slots are permuted to their mirror partners and
/// sign-flipped, every camera frame is flipped horizontally, paired cameras
/// trade names, and the instruction has its lexicon words exchanged.
pub fn mirror_episode(
    ep: &Episode,
    layout: &UnifiedLayout,
    desc: &EmbodimentDescriptor,
    cfg: &AugmentConfig,
) -> Result<Episode> {
    cfg.check()?;
    check_mirror_closed(desc.dims(), layout, "actions")?;
    let state_dims = desc.state_map(ep.states.cols()).ok_or_else(|| {
        Error::Layout(format!(
            "{} has no placement for {}-wide states",
            desc.embodiment_id(),
            ep.states.cols()
        ))
    })?;
    check_mirror_closed(state_dims, layout, "states")?;

    let mut partner = BTreeMap::new();
    for [a, b] in &cfg.camera_pairs {
        partner.insert(a.as_str(), b.as_str());
        partner.insert(b.as_str(), a.as_str());
    }
    let cameras = ep
        .cameras
        .iter()
        .map(|(name, stream)| {
            let to = partner.get(name.as_str()).copied().unwrap_or(name.as_str());
            (to.to_string(), stream.map_frames(|f| f.flip_horizontal()))
        })
        .collect();

    let mut out = ep.clone();
    out.id = format!("{}__mirror", ep.id);
    out.instruction = swap_instruction(&ep.instruction, cfg);
    out.states = mirror_matrix(&ep.states, state_dims, layout)?;
    out.actions = mirror_matrix(&ep.actions, desc.dims(), layout)?;
    out.cameras = cameras;
    out.provenance = Some(Provenance {
        augmentation: "mirror".into(),
        source_id: ep.id.clone(),
    });
    Ok(out)
}

fn reversed_rows(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        out.row_mut(r).copy_from_slice(m.row(m.rows() - 1 - r));
    }
    out
}

/// Time reversal `I'_t = I_{T-1-t}`, `s'_t = s_{T-1-t}`, with actions
/// reassigned so that `a'_t` drives `s'_t` to `s'_{t+1}`:
/// absolute targets become `a'_t = s'_{t+1}` (the last holds `s'_{T-1}`),
/// deltas become `a'_t = -a_{T-2-t}` with `a'_{T-1} = 0`.
pub fn reverse_episode(ep: &Episode, cfg: &AugmentConfig) -> Result<Episode> {
    cfg.check()?;
    let instruction = match reverse_instruction(&ep.instruction, cfg)? {
        Some(i) if ep.reversible => i,
        _ => return Err(Error::NotReversible(ep.instruction.clone())),
    };
    let t = ep.len();
    let states = reversed_rows(&ep.states);
    let (actions, rule) = match ep.action_semantics {
        ActionSemantics::AbsoluteTarget => {
            if ep.actions.cols() != ep.states.cols() {
                return Err(Error::Dim {
                    expected: ep.states.cols(),
                    actual: ep.actions.cols(),
                });
            }
            let mut a = Matrix::zeros(t, ep.actions.cols());
            for r in 0..t {
                a.row_mut(r)
                    .copy_from_slice(states.row((r + 1).min(t.saturating_sub(1))));
            }
            (a, "next_state_target")
        }
        ActionSemantics::Delta => {
            let mut a = Matrix::zeros(t, ep.actions.cols());
            for r in 0..t.saturating_sub(1) {
                for (o, v) in a.row_mut(r).iter_mut().zip(ep.actions.row(t - 2 - r)) {
                    *o = -v;
                }
            }
            (a, "negated_delta")
        }
    };
    let mut out = ep.clone();
    out.id = format!("{}__reverse", ep.id);
    out.instruction = instruction;
    out.states = states;
    out.actions = actions;
    for stream in out.cameras.values_mut() {
        stream.frames.reverse();
    }
    out.provenance = Some(Provenance {
        augmentation: "reverse".into(),
        source_id: ep.id.clone(),
    });
    out.metadata
        .insert("reverse_action_rule".into(), serde_json::Value::from(rule));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::CameraStream;
    use crate::frame::GrayFrame;

    fn delta_episode() -> Episode {
        Episode {
            id: "d".into(),
            embodiment_id: "e".into(),
            fps: 10.0,
            instruction: "pick the cup from the table".into(),
            states: Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap(),
            actions: Matrix::from_rows(&[[1.0], [2.0], [0.5]]).unwrap(),
            cameras: BTreeMap::from([(
                "head".to_string(),
                CameraStream::new(2, 1, (0..3).map(|i| GrayFrame::filled(2, 1, i)).collect()),
            )]),
            reversible: true,
            action_semantics: ActionSemantics::Delta,
            provenance: None,
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn lexicon_swap_is_single_pass() {
        let cfg = AugmentConfig::default();
        assert_eq!(
            swap_instruction("pick the cup with left hand", &cfg),
            "pick the cup with right hand"
        );
        assert_eq!(
            swap_instruction("Left arm holds, right arm pours; LEFT again", &cfg),
            "Right arm holds, left arm pours; RIGHT again"
        );
        assert_eq!(
            swap_instruction("leftover brightness", &cfg),
            "leftover brightness"
        );
    }

    #[test]
    fn template_rewrites() {
        let cfg = AugmentConfig::default();
        assert_eq!(
            reverse_instruction("pick the red cup from the table", &cfg)
                .unwrap()
                .as_deref(),
            Some("place the red cup on the table")
        );
        assert_eq!(
            reverse_instruction("place cup on the table", &cfg).unwrap(),
            None
        );
    }

    #[test]
    fn delta_reversal_example() {
        let r = reverse_episode(&delta_episode(), &AugmentConfig::default()).unwrap();
        assert_eq!(r.states.as_slice(), &[3.0, 1.0, 0.0]);
        assert_eq!(r.actions.as_slice(), &[-2.0, -1.0, 0.0]);
        for t in 0..2 {
            assert_eq!(
                r.states.get(t, 0) + r.actions.get(t, 0),
                r.states.get(t + 1, 0)
            );
        }
        assert_eq!(r.cameras["head"].frames[0].at(0, 0), 2);
        assert_eq!(r.instruction, "place the cup on the table");
        assert_eq!(r.provenance.as_ref().unwrap().source_id, "d");
    }

    #[test]
    fn absolute_reversal_targets_next_state() {
        let mut ep = delta_episode();
        ep.action_semantics = ActionSemantics::AbsoluteTarget;
        let r = reverse_episode(&ep, &AugmentConfig::default()).unwrap();
        assert_eq!(r.actions.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn irreversible_instruction_fails() {
        let mut ep = delta_episode();
        ep.instruction = "place cup on the table".into();
        assert!(matches!(
            reverse_episode(&ep, &AugmentConfig::default()),
            Err(Error::NotReversible(_))
        ));
        let mut ep = delta_episode();
        ep.reversible = false;
        assert!(reverse_episode(&ep, &AugmentConfig::default()).is_err());
    }

    #[test]
    fn overlapping_lexicon_is_rejected() {
        let mut cfg = AugmentConfig::default();
        cfg.swap_lexicon.push(["left".into(), "up".into()]);
        assert!(cfg.check().is_err());
    }
}
