//! Browser bindings: sample a benchmark, train, predict and certify from
//! JSON and CSV text. Each export wraps a plain function returning
//! `Result<String, String>` so the logic is testable off the browser.

use wadiro::data::Dataset;
use wadiro::guarantees::{certify_stability, CertifyDomain, CertifyMode, CertifyOptions};
use wadiro::model::{self, fit_scnn};
use wadiro::robustness::{sample_benchmark, BenchmarkSpec};
use wadiro::train::{PhysicsConstraints, Program, TrainConfig};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn csv_text(ds: &Dataset) -> Result<String, String> {
    let mut buf = Vec::new();
    ds.to_csv_writer(&mut buf).map_err(err)?;
    String::from_utf8(buf).map_err(err)
}

/// Benchmark samples as CSV text from a spec like
/// `{"function":"mccormick","dim":2,"n_samples":100,"seed":1}`.
pub fn benchmark_csv(spec_json: &str) -> Result<String, String> {
    let spec: BenchmarkSpec = serde_json::from_str(spec_json).map_err(err)?;
    csv_text(&sample_benchmark(&spec).map_err(err)?)
}

/// Model JSON trained on CSV text whose last column is the label.
pub fn train_json(csv: &str, config_json: &str, nonnegative: bool) -> Result<String, String> {
    let ds = Dataset::from_csv_reader(csv.as_bytes()).map_err(err)?;
    let mut cfg: TrainConfig = serde_json::from_str(config_json).map_err(err)?;
    if matches!(cfg.program, Program::WadiroLinreg { .. }) {
        return Err("the demo trains SCNN programs only".into());
    }
    if nonnegative {
        cfg.physics = Some(PhysicsConstraints::nonnegative(ds.n()));
    }
    let m = fit_scnn(&ds, &cfg, 1e-6).map_err(err)?;
    Ok(model::to_json(&m))
}

/// JSON array of predictions for CSV text with a label column.
pub fn predict_json(model_json: &str, csv: &str) -> Result<String, String> {
    let m = model::from_json(model_json).map_err(err)?;
    let ds = Dataset::from_csv_reader(csv.as_bytes()).map_err(err)?;
    let preds = ds.rows().map(|x| model::predict(&m, x)).collect::<Result<Vec<f64>, _>>().map_err(err)?;
    serde_json::to_string(&preds).map_err(err)
}

/// Certificate JSON for a domain `{"lo":[..],"hi":[..],"eps":e}` in
/// standardized units; `mode` is `"bnb"` or `"exhaustive"`.
pub fn certify_json(model_json: &str, domain_json: &str, mode: &str) -> Result<String, String> {
    let m = model::from_json(model_json).map_err(err)?;
    let dom: CertifyDomain = serde_json::from_str(domain_json).map_err(err)?;
    let mode = match mode {
        "bnb" => CertifyMode::BranchAndBound,
        "exhaustive" => CertifyMode::Exhaustive,
        other => return Err(format!("unknown mode {other:?}")),
    };
    let cert = certify_stability(&m, &dom, &CertifyOptions { mode, ..Default::default() }).map_err(err)?;
    serde_json::to_string(&cert).map_err(err)
}

#[wasm_bindgen(js_name = benchmarkCsv)]
pub fn benchmark_csv_js(spec_json: &str) -> std::result::Result<String, JsError> {
    benchmark_csv(spec_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = trainModel)]
pub fn train_js(csv: &str, config_json: &str, nonnegative: bool) -> std::result::Result<String, JsError> {
    train_json(csv, config_json, nonnegative).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = predict)]
pub fn predict_js(model_json: &str, csv: &str) -> std::result::Result<String, JsError> {
    predict_json(model_json, csv).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = certify)]
pub fn certify_js(model_json: &str, domain_json: &str, mode: &str) -> std::result::Result<String, JsError> {
    certify_json(model_json, domain_json, mode).map_err(|e| JsError::new(&e))
}
