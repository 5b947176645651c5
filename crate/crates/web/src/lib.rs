//! Browser bindings for three sampler operations. Every export takes plain
//! numbers or JSON strings and returns a JSON string; errors surface as
//! thrown JS strings.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use miex_core::au::{AuTriplet, AuVector, EmotionClass, Provenance, SourceTag, AU_NUMBERS};
use miex_core::composer::interpolate_sequence;
use miex_core::rng::RngStream;
use miex_core::samplers::{mae_apex_window, sample_expert_triplet, select_mae_apex_index, ExpertTable, SamplerConfig};

fn table_or_default(table_json: &str) -> Result<ExpertTable, String> {
    if table_json.trim().is_empty() {
        Ok(ExpertTable::default_table())
    } else {
        ExpertTable::from_json(table_json).map_err(|e| e.to_string())
    }
}

/// Empirical activation frequency and mean active intensity per AU.
pub fn expert_stats(table_json: &str, class: &str, draws: u32, seed: u32, mu: f64, nu: f64) -> Result<String, String> {
    let table = table_or_default(table_json)?;
    let class: EmotionClass = class.parse().map_err(|e: miex_core::Error| e.to_string())?;
    let cfg = SamplerConfig {
        mu,
        nu,
        ..Default::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let mut active = [0u32; 17];
    let mut sum = [0.0f64; 17];
    for k in 0..draws {
        let mut rng = RngStream::new(seed.into(), "demo/expert", k.into());
        let t = sample_expert_triplet(class, &table, &cfg, &mut rng);
        for (i, v) in t.apex.values().iter().enumerate() {
            if *v > 0.0 {
                active[i] += 1;
                sum[i] += v;
            }
        }
    }
    let rows: Vec<Value> = AU_NUMBERS
        .iter()
        .enumerate()
        .map(|(i, au)| {
            json!({
                "au": au,
                "p": table.probability(class, *au),
                "frequency": if draws == 0 { 0.0 } else { f64::from(active[i]) / f64::from(draws) },
                "mean_intensity": if active[i] == 0 { 0.0 } else { sum[i] / f64::from(active[i]) },
            })
        })
        .collect();
    Ok(json!({ "class": class, "draws": draws, "aus": rows }).to_string())
}

/// Histogram of MaE apex draws over the clamped window.
pub fn window_histogram(n: u32, alpha: f64, beta: f64, draws: u32, seed: u32) -> Result<String, String> {
    let cfg = SamplerConfig {
        alpha,
        beta,
        ..Default::default()
    };
    let n = n as usize;
    let (lo, hi) = mae_apex_window(n, &cfg).map_err(|e| e.to_string())?;
    let mut counts = vec![0u32; n];
    let mut rng = RngStream::new(seed.into(), "demo/window", n as u64);
    for _ in 0..draws {
        counts[select_mae_apex_index(n, &cfg, &mut rng).map_err(|e| e.to_string())?] += 1;
    }
    Ok(json!({ "n": n, "lo": lo, "hi": hi, "draws": draws, "counts": counts }).to_string())
}

fn parse_vector(text: &str) -> Result<AuVector, String> {
    let values: Vec<f64> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    AuVector::from_slice(&values).map_err(|e| e.to_string())
}

/// Onset-to-apex frames as a JSON matrix (`frames` rows of 17 values).
pub fn interpolate(onset_json: &str, apex_json: &str, frames: u32) -> Result<String, String> {
    let t = AuTriplet::new(
        parse_vector(onset_json)?,
        parse_vector(apex_json)?,
        EmotionClass::Positive,
        SourceTag::MaE,
        Provenance::synthetic("demo", "demo"),
    )
    .map_err(|e| e.to_string())?;
    let seq = interpolate_sequence(&t, frames as usize).map_err(|e| e.to_string())?;
    let rows: Vec<&[f64; 17]> = seq.iter().map(AuVector::values).collect();
    Ok(json!({ "aus": AU_NUMBERS, "frames": rows }).to_string())
}

#[wasm_bindgen]
pub fn expert_sampling_stats(table_json: &str, class: &str, draws: u32, seed: u32, mu: f64, nu: f64) -> Result<String, JsValue> {
    expert_stats(table_json, class, draws, seed, mu, nu).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn mae_window_histogram(n: u32, alpha: f64, beta: f64, draws: u32, seed: u32) -> Result<String, JsValue> {
    window_histogram(n, alpha, beta, draws, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn interpolate_frames(onset_json: &str, apex_json: &str, frames: u32) -> Result<String, JsValue> {
    interpolate(onset_json, apex_json, frames).map_err(|e| JsValue::from_str(&e))
}
