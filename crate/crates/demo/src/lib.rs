//! WebAssembly bindings for the static page in `www/`.

use wasm_bindgen::prelude::*;

pub mod ops;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Interleaved I/Q of the received data cells.
#[wasm_bindgen]
pub fn constellation(scenario: &str, snr_db: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    ops::constellation(scenario, snr_db, u64::from(seed)).map_err(js)
}

/// `[errors, bits, ber]`.
#[wasm_bindgen]
pub fn sum_ber(scenario: &str, snr_db: f64, decoder: &str, trials: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    ops::sum_ber(scenario, snr_db, decoder, trials, u64::from(seed)).map_err(js)
}

/// `[misaligned, aligned, digital]` sum MSE.
#[wasm_bindgen]
pub fn aggregation_mse(scenario: &str, snr_db: f64, num_params: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    ops::aggregation_mse(scenario, snr_db, num_params as usize, u64::from(seed)).map_err(js)
}
