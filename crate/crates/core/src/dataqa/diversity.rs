use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::matrix::Matrix;

/// Maps a frame to an `S x D` grid of features (S spatial locations, D dims).
pub trait FeatureExtractor {
    fn feature_dim(&self) -> usize;
    fn extract(&self, frame: &GrayFrame) -> Result<Vec<Vec<f64>>>;
}

/// Splits the frame into a `grid x grid` lattice of cells and reports each
/// cell's mean and population std of intensity, scaled to [0, 1].
#[derive(Clone, Copy, Debug)]
pub struct GridStatsExtractor {
    pub grid: usize,
}

impl Default for GridStatsExtractor {
    fn default() -> Self {
        GridStatsExtractor { grid: 8 }
    }
}

impl FeatureExtractor for GridStatsExtractor {
    fn feature_dim(&self) -> usize {
        2
    }

    fn extract(&self, frame: &GrayFrame) -> Result<Vec<Vec<f64>>> {
        let (w, h, g) = (frame.width(), frame.height(), self.grid);
        if g == 0 || w < g || h < g {
            return Err(Error::FrameTooSmall {
                width: w,
                height: h,
                min: g.max(1),
            });
        }
        let mut cells = Vec::with_capacity(g * g);
        for cy in 0..g {
            let (y0, y1) = (cy * h / g, (cy + 1) * h / g);
            for cx in 0..g {
                let (x0, x1) = (cx * w / g, (cx + 1) * w / g);
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                let mut sum = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sum += frame.at(x, y) as f64 / 255.0;
                    }
                }
                let mean = sum / n;
                let mut sq = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sq += (frame.at(x, y) as f64 / 255.0 - mean).powi(2);
                    }
                }
                cells.push(vec![mean, (sq / n).sqrt()]);
            }
        }
        Ok(cells)
    }
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Mean over feature dims of the temporal std of spatially averaged features.
pub fn visual_diversity_frames(
    frames: &[GrayFrame],
    extractor: &dyn FeatureExtractor,
) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "visual diversity needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let d = extractor.feature_dim();
    // pooled[dim][t]
    let mut pooled = vec![Vec::with_capacity(frames.len()); d];
    for frame in frames {
        let grid = extractor.extract(frame)?;
        if grid.is_empty() {
            return Err(Error::InsufficientData(
                "extractor returned no locations".into(),
            ));
        }
        for (dim, series) in pooled.iter_mut().enumerate() {
            let mean = grid.iter().map(|f| f[dim]).sum::<f64>() / grid.len() as f64;
            series.push(mean);
        }
    }
    Ok(pooled.iter().map(|s| population_std(s)).sum::<f64>() / d as f64)
}

/// Visual diversity of an episode: mean of [`visual_diversity_frames`] over
/// its camera streams in name order.
pub fn visual_diversity(ep: &Episode, extractor: &dyn FeatureExtractor) -> Result<f64> {
    if ep.cameras.is_empty() {
        return Err(Error::InsufficientData("episode has no cameras".into()));
    }
    let mut total = 0.0;
    for stream in ep.cameras.values() {
        total += visual_diversity_frames(&stream.frames, extractor)?;
    }
    Ok(total / ep.cameras.len() as f64)
}

/// `sqrt(tr(Cov(s)))` with the population covariance over rows.
pub fn state_diversity(states: &Matrix) -> Result<f64> {
    if states.rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "state diversity needs at least 2 rows, got {}",
            states.rows()
        )));
    }
    let trace: f64 = (0..states.cols())
        .map(|c| population_std(&states.column(c)).powi(2))
        .sum();
    Ok(trace.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frames_have_zero_diversity() {
        let f = GrayFrame::from_fn(32, 32, |x, y| (x * 7 + y) as u8);
        let frames = vec![f.clone(), f.clone(), f];
        let d = visual_diversity_frames(&frames, &GridStatsExtractor::default()).unwrap();
        assert!(d.abs() < 1e-15, "{d}");
    }

    #[test]
    fn alternating_frames_are_diverse() {
        let a = GrayFrame::filled(16, 16, 10);
        let b = GrayFrame::from_fn(16, 16, |x, _| if x % 2 == 0 { 200 } else { 0 });
        let frames = vec![a.clone(), b.clone(), a, b];
        assert!(visual_diversity_frames(&frames, &GridStatsExtractor::default()).unwrap() > 0.0);
    }

    #[test]
    fn brightness_ramp() {
        // mean-intensity feature follows the ramp, the std feature stays 0
        let levels = [0u8, 64, 128, 191, 255];
        let frames: Vec<_> = levels
            .iter()
            .map(|&v| GrayFrame::filled(16, 16, v))
            .collect();
        let got = visual_diversity_frames(&frames, &GridStatsExtractor::default()).unwrap();
        let means: Vec<f64> = levels.iter().map(|&v| v as f64 / 255.0).collect();
        assert!((got - population_std(&means) / 2.0).abs() < 1e-15);
        assert!((got - 0.1768).abs() < 2e-3, "{got}");
    }

    #[test]
    fn single_frame_is_insufficient() {
        let frames = vec![GrayFrame::filled(16, 16, 1)];
        assert!(visual_diversity_frames(&frames, &GridStatsExtractor::default()).is_err());
    }

    #[test]
    fn state_diversity_examples() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(state_diversity(&m).unwrap(), 1.0);
        let same = Matrix::from_rows(&[[1.5, -2.0], [1.5, -2.0], [1.5, -2.0]]).unwrap();
        assert_eq!(state_diversity(&same).unwrap(), 0.0);
        let scaled = m.map(|v| v * -3.0);
        assert!((state_diversity(&scaled).unwrap() - 3.0).abs() < 1e-12);
        assert!(state_diversity(&Matrix::zeros(1, 2)).is_err());
    }
}
