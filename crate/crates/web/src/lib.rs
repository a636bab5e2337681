//! Browser demo for `sparx`: a small network trained on a bundled dataset,
//! sparsified at a chosen ratio and shown as an argumentation graph.

use wasm_bindgen::prelude::*;

pub mod demo;
pub mod svg;

use demo::Demo;

fn js(e: sparx::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct SparxDemo {
    inner: Demo,
}

#[wasm_bindgen]
impl SparxDemo {
    /// Trains the bundled model; takes a moment on first load.
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<SparxDemo, JsError> {
        Ok(SparxDemo {
            inner: Demo::bundled().map_err(js)?,
        })
    }

    pub fn summary(&self) -> Result<String, JsError> {
        to_json(&self.inner.summary())
    }

    /// Global explanation at `ratio` as JSON with an `svg` field.
    pub fn global_view(&self, ratio: f64) -> Result<String, JsError> {
        to_json(&self.inner.global_view(ratio).map_err(js)?)
    }

    /// Unfaithfulness and cognitive complexity across `ratios`.
    pub fn faithfulness_curve(&self, ratios: Vec<f64>) -> Result<String, JsError> {
        to_json(&self.inner.faithfulness_curve(&ratios).map_err(js)?)
    }

    /// Local explanation of data row `row` at `ratio`.
    pub fn local_view(&self, row: usize, ratio: f64) -> Result<String, JsError> {
        to_json(&self.inner.local_view(row, ratio).map_err(js)?)
    }
}
