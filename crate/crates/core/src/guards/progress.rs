use crate::error::{Error, Result};

/// Progress level above which a subtask is treated as finished.
pub const DEFAULT_END_THRESHOLD: f64 = 0.98;

/// `rho_t = t / T` for `t = 1..=T`; the last step is labelled exactly 1.
pub fn progress_labels(t: usize) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(Error::Domain("episode length must be at least 1".into()));
    }
    Ok((1..=t).map(|i| i as f64 / t as f64).collect())
}

pub fn episode_end(rho_hat: f64, threshold: f64) -> bool {
    rho_hat > threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(progress_labels(4).unwrap(), [0.25, 0.5, 0.75, 1.0]);
        assert_eq!(progress_labels(1).unwrap(), [1.0]);
        assert!(progress_labels(0).is_err());
        let l = progress_labels(977).unwrap();
        assert_eq!(*l.last().unwrap(), 1.0);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn end_trigger() {
        assert!(episode_end(0.99, DEFAULT_END_THRESHOLD));
        assert!(!episode_end(0.98, DEFAULT_END_THRESHOLD));
    }
}
