use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole camera with zero skew and a camera-to-world rigid transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major 4x4 camera-to-world transform.
    pub t_cw: [[f64; 4]; 4],
}

pub const IDENTITY_POSE: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, t_cw: [[f64; 4]; 4]) -> Result<Self> {
        let cam = CameraModel {
            fx,
            fy,
            cx,
            cy,
            t_cw,
        };
        cam.check()?;
        Ok(cam)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::Domain("focal lengths must be positive".into()));
        }
        let r = &self.t_cw;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return Err(Error::Domain("rotation block is not orthonormal".into()));
                }
            }
        }
        if r[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Domain(
                "last row of t_cw must be [0, 0, 0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Back-projects pixel `(u, v)` at metric `depth` into world coordinates.
pub fn lift_point(u: f64, v: f64, depth: f64, cam: &CameraModel) -> Result<[f64; 3]> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(Error::Domain(format!("depth {depth} must be positive")));
    }
    let pc = [
        depth * (u - cam.cx) / cam.fx,
        depth * (v - cam.cy) / cam.fy,
        depth,
    ];
    let t = &cam.t_cw;
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = t[i][0] * pc[0] + t[i][1] * pc[1] + t[i][2] * pc[2] + t[i][3];
    }
    Ok(out)
}
