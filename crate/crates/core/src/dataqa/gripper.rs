use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperState {
    Open,
    Closed,
}

impl fmt::Display for GripperState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GripperState::Open => "open",
            GripperState::Closed => "closed",
        })
    }
}

impl FromStr for GripperState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "open" => Ok(GripperState::Open),
            "closed" => Ok(GripperState::Closed),
            other => Err(Error::Domain(format!("unknown gripper token {other:?}"))),
        }
    }
}

/// Parses a token list such as `open-closed-open` or `open,closed,open`.
pub fn parse_pattern(s: &str) -> Result<Vec<GripperState>> {
    s.split([',', '-'])
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Labels each sample with hysteresis: above `hi` is open, below `lo` is
/// closed, anything in between keeps the previous label. Samples before the
/// first decided one take that first label.
pub fn binarize_hysteresis(channel: &[f64], lo: f64, hi: f64) -> Result<Vec<GripperState>> {
    if !(lo < hi) {
        return Err(Error::Domain(format!("need lo < hi, got {lo} >= {hi}")));
    }
    let decide = |v: f64| {
        if v > hi {
            Some(GripperState::Open)
        } else if v < lo {
            Some(GripperState::Closed)
        } else {
            None
        }
    };
    let mut current = channel
        .iter()
        .find_map(|&v| decide(v))
        .ok_or(Error::Undecidable)?;
    Ok(channel
        .iter()
        .map(|&v| {
            if let Some(s) = decide(v) {
                current = s;
            }
            current
        })
        .collect())
}

pub fn run_length_labels(labels: &[GripperState]) -> Vec<GripperState> {
    let mut runs: Vec<GripperState> = Vec::new();
    for &l in labels {
        if runs.last() != Some(&l) {
            runs.push(l);
        }
    }
    runs
}

pub fn gripper_pattern_check(
    channel: &[f64],
    lo: f64,
    hi: f64,
    pattern: &[GripperState],
) -> Result<bool> {
    let labels = binarize_hysteresis(channel, lo, hi)?;
    Ok(run_length_labels(&labels) == pattern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use GripperState::*;

    #[test]
    fn open_closed_open() {
        let pattern = parse_pattern("open-closed-open").unwrap();
        assert!(gripper_pattern_check(&[1.0, 1.0, 0.0, 0.0, 1.0], 0.3, 0.7, &pattern).unwrap());
        assert!(!gripper_pattern_check(&[1.0; 6], 0.3, 0.7, &pattern).unwrap());
    }

    #[test]
    fn chatter_stays_one_run() {
        let labels = binarize_hysteresis(&[0.68, 0.72, 0.69, 0.71], 0.3, 0.7).unwrap();
        assert_eq!(labels, vec![Open; 4]);
        assert_eq!(run_length_labels(&labels), vec![Open]);
    }

    #[test]
    fn never_crossing_is_undecidable() {
        assert!(matches!(
            binarize_hysteresis(&[0.5, 0.4, 0.6], 0.3, 0.7),
            Err(Error::Undecidable)
        ));
    }

    #[test]
    fn thresholds_must_be_ordered() {
        assert!(matches!(
            binarize_hysteresis(&[0.5], 0.7, 0.3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pattern_parsing() {
        assert_eq!(parse_pattern("open,closed").unwrap(), vec![Open, Closed]);
        assert!(parse_pattern("open-ajar").is_err());
    }
}
