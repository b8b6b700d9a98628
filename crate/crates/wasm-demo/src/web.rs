use wasm_bindgen::prelude::*;

use crate::Playground;

fn js<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("view types serialize")
}

#[wasm_bindgen]
pub struct WebPlayground {
    inner: Playground,
}

#[wasm_bindgen]
impl WebPlayground {
    #[wasm_bindgen(constructor)]
    pub fn new(relation: &str, seed: u64) -> Result<WebPlayground, JsError> {
        Playground::new(relation, seed).map(|inner| Self { inner }).map_err(|e| JsError::new(&e))
    }

    /// JSON array of relation ids.
    pub fn relations() -> String {
        js(&Playground::relation_ids())
    }

    /// JSON `{min: [x, y, z], max: [x, y, z]}` of the table.
    pub fn bounds(&self) -> String {
        js(&self.inner.bounds())
    }

    /// JSON array of objects with role, position, yaw and size.
    pub fn objects(&self) -> String {
        js(&self.inner.objects())
    }

    pub fn demo_count(&self) -> u32 {
        self.inner.demo_count() as u32
    }

    /// Returns the new demonstration count.
    pub fn add_demo(&mut self, x: f64, y: f64) -> Result<u32, JsError> {
        self.inner.add_demo(x, y).map(|n| n as u32).map_err(|e| JsError::new(&e))
    }

    pub fn heatmap(&self, width: usize, height: usize) -> Vec<f64> {
        self.inner.heatmap(width, height)
    }

    /// JSON plan with candidates and the fixed-rule placement.
    pub fn plan(&mut self) -> Result<String, JsError> {
        self.inner.plan().map(|p| js(&p)).map_err(|e| JsError::new(&e))
    }

    pub fn reset(&mut self) {
        self.inner.reset()
    }
}
