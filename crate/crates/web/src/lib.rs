//! WebAssembly bindings for the interactive demo page in `www/`.
//!
//! The `ops` functions are plain Rust and return JSON strings; the exported
//! wrappers only convert errors into JavaScript exceptions.

use wasm_bindgen::prelude::*;

pub mod ops {
    use highlights::audio::{stft_magnitudes, BandSpec};
    use highlights::clipper::{clips_from_groups, link_apexes, select_apexes, HighlightClip};
    use highlights::ingest::WINDOW_SECONDS;
    use serde::Serialize;

    pub const DEMO_SAMPLE_RATE: u32 = 16_000;

    #[derive(Debug, Serialize)]
    pub struct Detection {
        pub threshold: f64,
        pub apexes: Vec<f64>,
        pub clips: Vec<HighlightClip>,
    }

    /// Top-fraction apexes of an error series sampled at `rate` Hz, linked into clips.
    pub fn detect(errors: &[f64], rate: f64, fraction: f64, pre_s: f64, post_s: f64) -> Result<Detection, String> {
        if !(rate > 0.0) {
            return Err(format!("rate {rate} must be positive"));
        }
        let set = select_apexes(errors, fraction).map_err(|e| e.to_string())?;
        let apexes: Vec<f64> = set.indices.iter().map(|&i| i as f64 / rate).collect();
        let duration = errors.len() as f64 / rate;
        let clips = clips_from_groups(&link_apexes(&apexes, pre_s, post_s), duration, pre_s, post_s).map_err(|e| e.to_string())?;
        Ok(Detection {
            threshold: set.threshold_value,
            apexes,
            clips,
        })
    }

    /// Clips for a free-form list of apex times (commas or whitespace).
    pub fn link(apex_text: &str, duration: f64, pre_s: f64, post_s: f64) -> Result<Vec<HighlightClip>, String> {
        let mut times = apex_text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        times.sort_by(f64::total_cmp);
        clips_from_groups(&link_apexes(&times, pre_s, post_s), duration, pre_s, post_s).map_err(|e| e.to_string())
    }

    /// Share of a pure tone's energy that lands in `[low_hz, high_hz]`,
    /// measured on one tapered 400 ms window.
    pub fn band_fraction(tone_hz: f64, low_hz: f64, high_hz: f64) -> Result<f64, String> {
        let n = (WINDOW_SECONDS * DEMO_SAMPLE_RATE as f64).round() as usize;
        let step = std::f64::consts::TAU * tone_hz / DEMO_SAMPLE_RATE as f64;
        let window: Vec<f32> = (0..n).map(|i| (step * i as f64).sin() as f32).collect();
        let spectrum = stft_magnitudes(&window, DEMO_SAMPLE_RATE).map_err(|e| e.to_string())?;
        spectrum
            .band_energy_fraction(&BandSpec { low_hz, high_hz })
            .map_err(|e| e.to_string())
    }
}

fn js<T: serde::Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// JSON `{threshold, apexes, clips}` for an error series.
#[wasm_bindgen]
pub fn detect_highlights(errors: Vec<f64>, rate: f64, fraction: f64, pre_s: f64, post_s: f64) -> Result<String, JsValue> {
    js(ops::detect(&errors, rate, fraction, pre_s, post_s))
}

/// JSON list of clips for typed-in apex times.
#[wasm_bindgen]
pub fn link_apex_times(apex_text: &str, duration: f64, pre_s: f64, post_s: f64) -> Result<String, JsValue> {
    js(ops::link(apex_text, duration, pre_s, post_s))
}

#[wasm_bindgen]
pub fn tone_band_fraction(tone_hz: f64, low_hz: f64, high_hz: f64) -> Result<f64, JsValue> {
    ops::band_fraction(tone_hz, low_hz, high_hz).map_err(|e| JsValue::from_str(&e))
}
