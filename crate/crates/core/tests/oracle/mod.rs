//! Direct, unoptimized evaluations of the scoring formulas, written without
//! reference to the library code. Inputs are plain rows and pixel buffers.
#![allow(dead_code)]

/// Folds an index into `0..n` by repeated mirroring about the edges, the
/// edge sample being repeated (`c b a | a b c | c b a`).
fn mirror_index(mut i: i64, n: i64) -> usize {
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_weights(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).round() as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// Jitter score over `rows` (T x D).
pub fn tremble(rows: &[Vec<f64>], sigma: f64) -> f64 {
    let t = rows.len();
    let d = rows[0].len();
    let w = gaussian_weights(sigma);
    let r = (w.len() / 2) as i64;
    let mut terms = Vec::new();
    for dim in 0..d {
        let vel: Vec<f64> = (1..t).map(|i| rows[i][dim] - rows[i - 1][dim]).collect();
        let n = vel.len() as i64;
        let padded: Vec<f64> = (-r..n + r).map(|i| vel[mirror_index(i, n)]).collect();
        for i in 0..vel.len() {
            let smooth: f64 = (0..w.len()).map(|k| w[k] * padded[i + k]).sum();
            let den = smooth.abs() + vel[i].abs();
            terms.push(if den == 0.0 {
                0.0
            } else {
                (smooth - vel[i]).abs() / den
            });
        }
    }
    terms.iter().sum::<f64>() / terms.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Sharpness of a `w x h` frame given as row-major bytes.
pub fn frame_sharpness(px: &[u8], w: usize, h: usize) -> f64 {
    let at = |x: usize, y: usize| px[y * w + x] as i64;
    // Laplacian image; None on the border.
    let lap: Vec<Option<i64>> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                None
            } else {
                Some(at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1) - 4 * at(x, y))
            }
        })
        .collect();
    let (bw, bh) = (w / 4, h / 4);
    let mut block_std = vec![0.0; bw * bh];
    for by in 0..bh {
        for bx in 0..bw {
            let (mut n, mut s1, mut s2) = (0i64, 0i64, 0i64);
            for y in 4 * by..4 * by + 4 {
                for x in 4 * bx..4 * bx + 4 {
                    if let Some(v) = lap[y * w + x] {
                        n += 1;
                        s1 += v;
                        s2 += v * v;
                    }
                }
            }
            if n > 0 {
                let nf = n as f64;
                let var = (s2 as f64 - (s1 as f64) * (s1 as f64) / nf) / nf;
                block_std[by * bw + bx] = var.max(0.0).sqrt();
            }
        }
    }
    let mut regions = Vec::new();
    for ry in 0..bh / 16 {
        for rx in 0..bw / 16 {
            let m = (0..16 * 16)
                .map(|k| block_std[(16 * ry + k / 16) * bw + 16 * rx + k % 16])
                .fold(0.0, f64::max);
            regions.push(m);
        }
    }
    median(regions)
}

/// Median frame sharpness over up to `budget` frames at rounded, evenly
/// spaced positions.
pub fn stream_sharpness(frames: &[(Vec<u8>, usize, usize)], budget: usize) -> f64 {
    let len = frames.len();
    let n = budget.min(len);
    let picks: Vec<usize> = if n == 1 {
        vec![0]
    } else {
        (0..n)
            .map(|i| (i as f64 * (len - 1) as f64 / (n - 1) as f64 + 0.5).floor() as usize)
            .collect()
    };
    median(
        picks
            .into_iter()
            .map(|i| frame_sharpness(&frames[i].0, frames[i].1, frames[i].2))
            .collect(),
    )
}

/// Per-frame spatial averages of the 8x8 cell (mean, std) features, pixel
/// values scaled to [0, 1].
fn grid_features(px: &[u8], w: usize, h: usize) -> [f64; 2] {
    let mut acc = [0.0; 2];
    for cy in 0..8 {
        for cx in 0..8 {
            let (x0, x1) = (cx * w / 8, (cx + 1) * w / 8);
            let (y0, y1) = (cy * h / 8, (cy + 1) * h / 8);
            let (mut s1, mut s2, mut n) = (0u64, 0u64, 0u64);
            for y in y0..y1 {
                for x in x0..x1 {
                    let v = px[y * w + x] as u64;
                    s1 += v;
                    s2 += v * v;
                    n += 1;
                }
            }
            let mean = s1 as f64 / n as f64;
            let var = (s2 as f64 / n as f64 - mean * mean).max(0.0);
            acc[0] += mean / 255.0;
            acc[1] += var.sqrt() / 255.0;
        }
    }
    [acc[0] / 64.0, acc[1] / 64.0]
}

fn pop_std(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Visual diversity of one camera stream.
pub fn stream_visual_diversity(frames: &[(Vec<u8>, usize, usize)]) -> f64 {
    let feats: Vec<[f64; 2]> = frames
        .iter()
        .map(|(p, w, h)| grid_features(p, *w, *h))
        .collect();
    let a: Vec<f64> = feats.iter().map(|f| f[0]).collect();
    let b: Vec<f64> = feats.iter().map(|f| f[1]).collect();
    (pop_std(&a) + pop_std(&b)) / 2.0
}

/// `sqrt(tr(Cov))` as the root mean squared distance to the centroid.
pub fn state_diversity(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let centroid: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let msd = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&centroid)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n;
    msd.sqrt()
}

/// Relative deviation `|a - b| / max(|a|, |b|, tiny)`.
pub fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Smooth random texture on a `w x h` canvas: seeded uniform noise averaged
/// over 3x3 neighbourhoods. Uses a local xorshift so it is independent of the
/// library's generators.
pub fn texture(w: usize, h: usize, seed: u64) -> Vec<u8> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let noise: Vec<u32> = (0..w * h)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 56) as u32
        })
        .collect();
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0;
            let mut n = 0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                    if xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h {
                        s += noise[yy as usize * w + xx as usize];
                        n += 1;
                    }
                }
            }
            out[y * w + x] = (s / n) as u8;
        }
    }
    out
}

/// `n` frames of size `w x h` cut from a wide texture, shifted right by
/// `speed` pixels per frame.
pub fn panning(w: usize, h: usize, n: usize, speed: usize, seed: u64) -> Vec<Vec<u8>> {
    let cw = w + speed * n + 1;
    let tex = texture(cw, h, seed);
    (0..n)
        .map(|t| {
            let off = speed * t;
            (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .map(|(x, y)| tex[y * cw + x + off])
                .collect()
        })
        .collect()
}
