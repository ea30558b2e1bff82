//! Monotone piecewise cubic Hermite interpolation (Fritsch-Carlson slopes).

use crate::error::{Error, Result};

/// A fitted monotone cubic interpolant.
#[derive(Clone, Debug)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    // non-centered three-point estimate, clipped to keep shape
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dim {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 knots, got {}",
                x.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::Domain("knots must be finite".into()));
        }
        let n = x.len();
        let mut h = Vec::with_capacity(n - 1);
        let mut delta = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let hi = x[i + 1] - x[i];
            if hi <= 0.0 {
                return Err(Error::Domain(format!(
                    "knot x must be strictly increasing, x[{}]={} >= x[{}]={}",
                    i,
                    x[i],
                    i + 1,
                    x[i + 1]
                )));
            }
            h.push(hi);
            delta.push((y[i + 1] - y[i]) / hi);
        }

        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                let (d0, d1) = (delta[k - 1], delta[k]);
                if d0 == 0.0 || d1 == 0.0 || d0.signum() != d1.signum() {
                    slopes[k] = 0.0;
                } else if d0 == d1 {
                    slopes[k] = d0;
                } else {
                    // weighted harmonic mean
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slopes[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Pchip {
            x: x.to_vec(),
            y: y.to_vec(),
            slopes,
        })
    }

    pub fn eval(&self, q: f64) -> Result<f64> {
        let (lo, hi) = (self.x[0], *self.x.last().unwrap());
        if !(q >= lo && q <= hi) {
            return Err(Error::Range { query: q, lo, hi });
        }
        // last knot with x[k] <= q
        let k = self.x.partition_point(|&xk| xk <= q) - 1;
        if self.x[k] == q {
            return Ok(self.y[k]);
        }
        let h = self.x[k + 1] - self.x[k];
        let t = (q - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h10 = t3 - 2.0 * t2 + t;
        let h11 = t3 - t2;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        // increment form keeps flat segments exact; the clamp absorbs rounding
        // since slopes never disagree with the secant in sign
        let v = y0 + (y1 - y0) * h01 + h * (h10 * self.slopes[k] + h11 * self.slopes[k + 1]);
        Ok(v.clamp(y0.min(y1), y0.max(y1)))
    }
}

/// Evaluates the monotone cubic interpolant of `(knot_x, knot_y)` at each query.
pub fn pchip_eval(knot_x: &[f64], knot_y: &[f64], query: &[f64]) -> Result<Vec<f64>> {
    let p = Pchip::new(knot_x, knot_y)?;
    query.iter().map(|&q| p.eval(q)).collect()
}
