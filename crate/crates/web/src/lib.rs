//! Browser demo for `dt4ecg`: synthetic ECG with its preprocessing, the
//! preprocessing filter's frequency response, and GradNorm task weights.
//!
//! The plain functions are usable from Rust; the `#[wasm_bindgen]` exports
//! wrap them for the page in `www/`.

use dt4ecg::dsp::{filtfilt, normalize_01, Activity, DspConfig};
use dt4ecg::synthecg::{add_interference, make_profiles, synthesize, ActivityModel, DatasetSpec};
use dt4ecg::train::TaskWeights;
use dt4ecg::{Error, Result};
use wasm_bindgen::prelude::*;

pub const PREVIEW_SECONDS: f64 = 10.0;
pub const FS: f64 = 100.0;

/// A raw synthetic recording and the same samples after preprocessing.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct EcgPreview {
    raw: Vec<f64>,
    clean: Vec<f64>,
}

#[wasm_bindgen]
impl EcgPreview {
    /// Millivolts, including baseline wander and mains pickup.
    pub fn raw(&self) -> Vec<f64> {
        self.raw.clone()
    }

    /// High-passed, notched and scaled to [0, 1].
    pub fn clean(&self) -> Vec<f64> {
        self.clean.clone()
    }
}

/// Ten seconds of one subject doing one activity. `activity` is 0 rest,
/// 1 exercise, 2 deep breathing.
pub fn ecg_preview(subject: u16, activity: usize, seed: u64, notch: bool) -> Result<EcgPreview> {
    let spec = DatasetSpec {
        seed,
        ..DatasetSpec::default()
    };
    let profiles = make_profiles(&spec);
    let profile = profiles.get(usize::from(subject)).ok_or(Error::Label {
        label: usize::from(subject),
        classes: profiles.len(),
    })?;
    let act = Activity::from_index(activity).ok_or(Error::Label {
        label: activity,
        classes: 3,
    })?;
    let mut rec = synthesize(
        profile,
        &ActivityModel::standard(act),
        PREVIEW_SECONDS,
        FS,
        seed,
    )?;
    add_interference(&mut rec, spec.interference_mv, 60.0, seed);
    let cfg = DspConfig {
        notch_enabled: notch,
        ..DspConfig::default()
    };
    let filtered = filtfilt(&cfg.filter(FS)?, &rec.samples)?;
    Ok(EcgPreview {
        clean: normalize_01(&filtered),
        raw: rec.samples,
    })
}

/// Zero-phase magnitude in dB of the high-pass plus notch cascade (the
/// cascade applied forward and backward, so twice its single-pass dB) at
/// `points` evenly spaced frequencies from 0 to just below Nyquist.
pub fn filter_response(highpass_hz: f64, notch_hz: f64, q: f64, points: usize) -> Result<Vec<f64>> {
    let cfg = DspConfig {
        highpass_hz,
        notch_hz,
        notch_q: q,
        ..DspConfig::default()
    };
    let filter = cfg.filter(FS)?;
    let nyquist = FS / 2.0;
    Ok((0..points)
        .map(|i| (2.0 * filter.magnitude_db(nyquist * i as f64 / points as f64, FS)).max(-120.0))
        .collect())
}

/// Task weights after each of `steps` updates when the identity task's
/// gradient norm is `ratio` times the activity task's. Returned flat as
/// `[w_id, w_act, w_id, w_act, ...]`, starting from `(1, 1)`.
pub fn gradnorm_trajectory(
    ratio: f64,
    alpha: f64,
    renormalize: bool,
    steps: usize,
) -> Result<Vec<f64>> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Config(format!(
            "gradient ratio must be positive, got {ratio}"
        )));
    }
    let mut w = TaskWeights::new(2, alpha, renormalize);
    let mut out = Vec::with_capacity(2 * (steps + 1));
    out.extend_from_slice(&w.w);
    for _ in 0..steps {
        w.update(&[ratio, 1.0])?;
        out.extend_from_slice(&w.w);
    }
    Ok(out)
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = ecgPreview)]
pub fn ecg_preview_js(
    subject: u16,
    activity: usize,
    seed: u64,
    notch: bool,
) -> std::result::Result<EcgPreview, JsError> {
    ecg_preview(subject, activity, seed, notch).map_err(js)
}

#[wasm_bindgen(js_name = filterResponse)]
pub fn filter_response_js(
    highpass_hz: f64,
    notch_hz: f64,
    q: f64,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    filter_response(highpass_hz, notch_hz, q, points).map_err(js)
}

#[wasm_bindgen(js_name = gradnormTrajectory)]
pub fn gradnorm_trajectory_js(
    ratio: f64,
    alpha: f64,
    renormalize: bool,
    steps: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    gradnorm_trajectory(ratio, alpha, renormalize, steps).map_err(js)
}
