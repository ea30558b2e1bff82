//! WebAssembly bindings behind `www/index.html`: PCHIP resampling of a 1-D
//! trajectory, mixture probabilities over a temperature exponent, and a 2-D
//! state-density field with gradient correction paths.
//!
//! The numerics live in [`ops`] so they can be tested natively; the exported
//! functions only convert errors.

use wasm_bindgen::prelude::*;

pub mod ops;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Resamples `values` (one sample per frame) with the given stride.
#[wasm_bindgen]
pub fn resample(values: Vec<f64>, stride: f64) -> Result<Vec<f64>, JsError> {
    ops::resample(&values, stride).map_err(js)
}

/// Sampling probabilities `w^alpha / sum(w^alpha)`.
#[wasm_bindgen]
pub fn mixture(weights: Vec<f64>, alpha: f64) -> Result<Vec<f64>, JsError> {
    ops::mixture(&weights, alpha).map_err(js)
}

/// Per-table weights used as the page's default mixture.
#[wasm_bindgen]
pub fn default_weights() -> Vec<f64> {
    ops::DEFAULT_WEIGHTS.to_vec()
}

#[wasm_bindgen]
pub struct DensityField {
    inner: ops::Field,
}

#[wasm_bindgen]
impl DensityField {
    /// Fits a `k`-component mixture to a seeded synthetic 2-D state cloud.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, k: usize, alpha: f64) -> Result<DensityField, JsError> {
        ops::Field::fit(seed as u64, k, alpha)
            .map(|inner| DensityField { inner })
            .map_err(js)
    }

    /// Training states as `[x0, y0, x1, y1, ...]`.
    pub fn points(&self) -> Vec<f64> {
        self.inner.points.clone()
    }

    pub fn threshold(&self) -> f64 {
        self.inner.model.tau_ood()
    }

    /// Densities on an `nx x ny` grid over the given box, row-major from `y0`.
    pub fn grid(
        &self,
        nx: usize,
        ny: usize,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    ) -> Result<Vec<f64>, JsError> {
        self.inner.grid(nx, ny, [x0, x1], [y0, y1]).map_err(js)
    }

    /// Correction path from `(x, y)` as `[x, y, density]` triples, ending
    /// when the state is in distribution or after `max_steps` steps.
    pub fn path(&self, x: f64, y: f64, max_steps: usize) -> Result<Vec<f64>, JsError> {
        self.inner.path([x, y], max_steps).map_err(js)
    }
}
