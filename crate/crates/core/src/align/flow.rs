//! Coarse-to-fine block matching used as a proxy for apparent motion speed.

use serde::{Deserialize, Serialize};

use crate::dataqa::sample_indices;
use crate::error::{Error, Result};
use crate::frame::GrayFrame;

pub const BLOCK: usize = 16;
pub const SEARCH: i32 = 8;
pub const LEVELS: usize = 3;
pub const MIN_FLOW_FRAME: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEstimate {
    /// Pixels per frame.
    pub mean_magnitude: f64,
    pub per_pair_magnitudes: Vec<f64>,
}

struct Plane {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Plane {
    fn from_frame(f: &GrayFrame) -> Plane {
        Plane {
            w: f.width(),
            h: f.height(),
            data: f.pixels().iter().map(|&p| p as f32).collect(),
        }
    }

    fn downsample(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.w + 2 * x;
                data.push(
                    0.25 * (self.data[i]
                        + self.data[i + 1]
                        + self.data[i + self.w]
                        + self.data[i + self.w + 1]),
                );
            }
        }
        Plane { w, h, data }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }
}

fn pyramid(f: &GrayFrame) -> Vec<Plane> {
    let mut levels = vec![Plane::from_frame(f)];
    while levels.len() < LEVELS {
        let next = levels.last().unwrap().downsample();
        levels.push(next);
    }
    levels
}

/// Mean absolute difference between the block at `(x0, y0)` in `cur` and the
/// block displaced by `-d` in `prev`, over pixels that stay in bounds.
/// `None` when fewer than half the block's pixels overlap.
fn block_cost(prev: &Plane, cur: &Plane, x0: usize, y0: usize, dx: i32, dy: i32) -> Option<f64> {
    let xs = (x0 as i32).max(dx);
    let xe = ((x0 + BLOCK) as i32).min(prev.w as i32 + dx);
    let ys = (y0 as i32).max(dy);
    let ye = ((y0 + BLOCK) as i32).min(prev.h as i32 + dy);
    if xe <= xs || ye <= ys {
        return None;
    }
    let count = ((xe - xs) * (ye - ys)) as usize;
    if 2 * count < BLOCK * BLOCK {
        return None;
    }
    let mut sum = 0.0f64;
    for y in ys..ye {
        let py = (y - dy) as usize;
        for x in xs..xe {
            sum += (cur.at(x as usize, y as usize) - prev.at((x - dx) as usize, py)).abs() as f64;
        }
    }
    Some(sum / count as f64)
}

/// Per-block integer displacements at one level, row-major over the block grid.
fn match_level(
    prev: &Plane,
    cur: &Plane,
    predict: impl Fn(usize, usize) -> (i32, i32),
) -> (usize, usize, Vec<(i32, i32)>) {
    let (bw, bh) = (cur.w / BLOCK, cur.h / BLOCK);
    let mut out = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            let (px, py) = predict(bx, by);
            let mut best: Option<(f64, i32, (i32, i32))> = None;
            // window around the coarse prediction, plus one around zero so an
            // aliased coarse match cannot hide small true motion
            let candidates = (-SEARCH..=SEARCH)
                .flat_map(|sy| (-SEARCH..=SEARCH).map(move |sx| (px + sx, py + sy)))
                .chain(
                    (-SEARCH..=SEARCH)
                        .flat_map(|sy| (-SEARCH..=SEARCH).map(move |sx| (sx, sy)))
                        .filter(move |&(dx, dy)| {
                            !((dx - px).abs() <= SEARCH && (dy - py).abs() <= SEARCH)
                        }),
                );
            for (dx, dy) in candidates {
                let Some(cost) = block_cost(prev, cur, bx * BLOCK, by * BLOCK, dx, dy) else {
                    continue;
                };
                let norm = dx * dx + dy * dy;
                let better = match best {
                    None => true,
                    Some((c, n, _)) => cost < c || (cost == c && norm < n),
                };
                if better {
                    best = Some((cost, norm, (dx, dy)));
                }
            }
            out.push(best.map(|b| b.2).unwrap_or((px, py)));
        }
    }
    (bw, bh, out)
}

/// Mean displacement magnitude between two frames, in pixels.
pub fn pair_flow_magnitude(prev: &GrayFrame, cur: &GrayFrame) -> Result<f64> {
    check_pair(prev, cur)?;
    let (pp, cp) = (pyramid(prev), pyramid(cur));
    let mut coarse: Option<(usize, usize, Vec<(i32, i32)>)> = None;
    for level in (0..LEVELS).rev() {
        let (prev_l, cur_l) = (&pp[level], &cp[level]);
        if cur_l.w < BLOCK || cur_l.h < BLOCK {
            continue;
        }
        let result = match_level(prev_l, cur_l, |bx, by| match &coarse {
            None => (0, 0),
            Some((cw, ch, d)) => {
                let cx = ((bx * BLOCK + BLOCK / 2) / 2 / BLOCK).min(cw - 1);
                let cy = ((by * BLOCK + BLOCK / 2) / 2 / BLOCK).min(ch - 1);
                let (dx, dy) = d[cy * cw + cx];
                (2 * dx, 2 * dy)
            }
        });
        coarse = Some(result);
    }
    let (_, _, d) = coarse.expect("level 0 always has a block");
    Ok(d.iter()
        .map(|&(dx, dy)| ((dx * dx + dy * dy) as f64).sqrt())
        .sum::<f64>()
        / d.len() as f64)
}

fn check_pair(a: &GrayFrame, b: &GrayFrame) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::format(
            "flow frames",
            format!(
                "dimension mismatch {}x{} vs {}x{}",
                a.width(),
                a.height(),
                b.width(),
                b.height()
            ),
        ));
    }
    if a.width() < MIN_FLOW_FRAME || a.height() < MIN_FLOW_FRAME {
        return Err(Error::FrameTooSmall {
            width: a.width(),
            height: a.height(),
            min: MIN_FLOW_FRAME,
        });
    }
    Ok(())
}

/// Flow over every consecutive frame pair.
pub fn mean_flow_magnitude(frames: &[GrayFrame]) -> Result<FlowEstimate> {
    mean_flow_magnitude_sampled(frames, usize::MAX)
}

/// Flow over at most `pair_budget` evenly spaced consecutive pairs.
pub fn mean_flow_magnitude_sampled(
    frames: &[GrayFrame],
    pair_budget: usize,
) -> Result<FlowEstimate> {
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "flow needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    for f in &frames[1..] {
        check_pair(&frames[0], f)?;
    }
    let per_pair_magnitudes = sample_indices(frames.len() - 1, pair_budget.max(1))
        .into_iter()
        .map(|i| pair_flow_magnitude(&frames[i], &frames[i + 1]))
        .collect::<Result<Vec<_>>>()?;
    let mean_magnitude = per_pair_magnitudes.iter().sum::<f64>() / per_pair_magnitudes.len() as f64;
    Ok(FlowEstimate {
        mean_magnitude,
        per_pair_magnitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_video_is_zero() {
        let f = GrayFrame::from_fn(64, 64, |x, y| ((x * 7 + y * 13) % 256) as u8);
        let est = mean_flow_magnitude(&[f.clone(), f.clone(), f]).unwrap();
        assert_eq!(est.mean_magnitude, 0.0);
        assert_eq!(est.per_pair_magnitudes, vec![0.0, 0.0]);
    }

    #[test]
    fn mismatched_frames() {
        let a = GrayFrame::filled(64, 64, 0);
        let b = GrayFrame::filled(64, 48, 0);
        assert!(matches!(
            mean_flow_magnitude(&[a, b]),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            mean_flow_magnitude(&[GrayFrame::filled(16, 16, 0), GrayFrame::filled(16, 16, 0)]),
            Err(Error::FrameTooSmall { .. })
        ));
    }

    #[test]
    fn single_frame_is_insufficient() {
        assert!(mean_flow_magnitude(&[GrayFrame::filled(64, 64, 0)]).is_err());
    }
}
