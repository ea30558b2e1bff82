use crate::error::{Error, Result};
use crate::frame::GrayFrame;

/// Side of a Laplacian-std block, in pixels.
pub const BLOCK: usize = 4;
/// Side of a max-pool window, in blocks (16 blocks = 64 pixels).
pub const POOL: usize = 16;
pub const MIN_FRAME: usize = BLOCK * POOL;

/// Median with the mean-of-middle-pair convention for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Population std of the 4-neighbour Laplacian over the interior pixels of
/// each 4x4 block. Returns a `blocks_y x blocks_x` grid, row-major.
fn block_laplacian_std(frame: &GrayFrame) -> (usize, usize, Vec<f64>) {
    let (w, h) = (frame.width(), frame.height());
    let (bw, bh) = (w / BLOCK, h / BLOCK);
    let mut out = Vec::with_capacity(bw * bh);
    let mut vals = Vec::with_capacity(BLOCK * BLOCK);
    for by in 0..bh {
        for bx in 0..bw {
            vals.clear();
            for y in by * BLOCK..(by + 1) * BLOCK {
                if y == 0 || y + 1 >= h {
                    continue;
                }
                for x in bx * BLOCK..(bx + 1) * BLOCK {
                    if x == 0 || x + 1 >= w {
                        continue;
                    }
                    let lap = frame.at(x - 1, y) as i32
                        + frame.at(x + 1, y) as i32
                        + frame.at(x, y - 1) as i32
                        + frame.at(x, y + 1) as i32
                        - 4 * frame.at(x, y) as i32;
                    vals.push(lap as f64);
                }
            }
            let n = vals.len() as f64;
            let std = if vals.is_empty() {
                0.0
            } else {
                let mean = vals.iter().sum::<f64>() / n;
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
            };
            out.push(std);
        }
    }
    (bw, bh, out)
}

/// Sharpness of one frame: median over 64x64 regions of the max block
/// Laplacian std inside each region. Pixels beyond the last whole region are
/// ignored.
pub fn frame_sharpness(frame: &GrayFrame) -> Result<f64> {
    if frame.width() < MIN_FRAME || frame.height() < MIN_FRAME {
        return Err(Error::FrameTooSmall {
            width: frame.width(),
            height: frame.height(),
            min: MIN_FRAME,
        });
    }
    let (bw, bh, blocks) = block_laplacian_std(frame);
    let (rw, rh) = (bw / POOL, bh / POOL);
    let mut regions = Vec::with_capacity(rw * rh);
    for ry in 0..rh {
        for rx in 0..rw {
            let mut best = 0.0f64;
            for by in ry * POOL..(ry + 1) * POOL {
                for bx in rx * POOL..(rx + 1) * POOL {
                    best = best.max(blocks[by * bw + bx]);
                }
            }
            regions.push(best);
        }
    }
    Ok(median(&mut regions).unwrap_or(0.0))
}

/// At most `budget` evenly spaced indices into `0..len`, endpoints included.
pub fn sample_indices(len: usize, budget: usize) -> Vec<usize> {
    let n = budget.min(len);
    match n {
        0 => Vec::new(),
        1 => vec![0],
        _ => (0..n)
            .map(|i| (i * (len - 1) + (n - 1) / 2) / (n - 1))
            .collect(),
    }
}

/// Episode sharpness: median of [`frame_sharpness`] over evenly sampled frames.
pub fn sharpness_score(frames: &[GrayFrame], frame_sample_budget: usize) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("no frames to score".into()));
    }
    let mut scores = sample_indices(frames.len(), frame_sample_budget.max(1))
        .into_iter()
        .map(|i| frame_sharpness(&frames[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&mut scores).unwrap_or(0.0))
}
