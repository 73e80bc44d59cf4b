//! ECG preprocessing: high-pass and notch biquads applied forward-backward,
//! min-max normalisation over the whole recording, then fixed windows.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Rest = 0,
    Exercise = 1,
    DeepBreathing = 2,
}

impl Activity {
    pub const ALL: [Activity; 3] = [Activity::Rest, Activity::Exercise, Activity::DeepBreathing];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::Rest => "rest",
            Activity::Exercise => "exercise",
            Activity::DeepBreathing => "deep_breathing",
        }
    }
}

/// One subject's single-lead trace under one activity.
#[derive(Debug, Clone)]
pub struct EcgRecording {
    pub subject_id: u16,
    pub activity: Activity,
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Millivolt-scale samples.
    pub samples: Vec<f64>,
}

/// Normalised second-order section: `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Poles strictly inside the unit circle (Jury conditions for a quadratic).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    /// Complex response at normalised angular frequency `w` (rad/sample).
    fn response(&self, w: f64) -> (f64, f64) {
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b0 + self.b1 * c1 + self.b2 * c2,
            self.b1 * s1 + self.b2 * s2,
        );
        let den = (
            1.0 + self.a1 * c1 + self.a2 * c2,
            self.a1 * s1 + self.a2 * s2,
        );
        let d = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d,
            (num.1 * den.0 - num.0 * den.1) / d,
        )
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Transposed direct-form-II state reached after a unit step settles.
    fn step_state(&self) -> [f64; 2] {
        let y = self.dc_gain();
        [y - self.b0, self.b2 - self.a2 * y]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
}

impl BiquadCascade {
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// `|H(e^{j 2 pi f / fs})|`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        self.sections
            .iter()
            .map(|s| {
                let (re, im) = s.response(w);
                (re * re + im * im).sqrt()
            })
            .product()
    }

    pub fn magnitude_db(&self, f: f64, fs: f64) -> f64 {
        20.0 * self.magnitude(f, fs).log10()
    }

    pub fn then(mut self, other: BiquadCascade) -> Self {
        self.sections.extend(other.sections);
        self
    }

    /// Causal filtering. `init` scales each section's settled step state
    /// (pass `x[0]` to start as if the input had been constant forever).
    fn run(&self, x: &mut [f64], init: f64) {
        let mut gain_in = 1.0;
        for s in &self.sections {
            let st = s.step_state();
            let (mut z1, mut z2) = (st[0] * init * gain_in, st[1] * init * gain_in);
            gain_in *= s.dc_gain();
            for v in x.iter_mut() {
                let xin = *v;
                let y = s.b0 * xin + z1;
                z1 = s.b1 * xin - s.a1 * y + z2;
                z2 = s.b2 * xin - s.a2 * y;
                *v = y;
            }
        }
    }
}

fn check_band(kind: &str, f: f64, fs: f64) -> Result<()> {
    if !(fs > 0.0) || !f.is_finite() {
        return Err(Error::Design(format!(
            "{kind}: sampling rate must be positive"
        )));
    }
    let nyquist = fs / 2.0;
    if !(f > 0.0) || f >= nyquist {
        return Err(Error::Design(format!(
            "{kind}: frequency {f} Hz must lie in (0, {nyquist}) Hz, the Nyquist limit at fs = {fs} Hz"
        )));
    }
    Ok(())
}

/// Second-order Butterworth high-pass, bilinear transform with the cutoff pre-warped
/// so the response is exactly -3 dB at `fc`.
pub fn design_highpass(fc: f64, fs: f64) -> Result<BiquadCascade> {
    check_band("high-pass", fc, fs)?;
    let k = (PI * fc / fs).tan();
    let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
    let section = Biquad {
        b0: norm,
        b1: -2.0 * norm,
        b2: norm,
        a1: 2.0 * (k * k - 1.0) * norm,
        a2: (1.0 - SQRT_2 * k + k * k) * norm,
    };
    Ok(BiquadCascade {
        sections: vec![section],
    })
}

/// Biquad band-reject centred on `f0` whose digital -3 dB bandwidth is `f0 / q`.
pub fn design_notch(f0: f64, fs: f64, q: f64) -> Result<BiquadCascade> {
    check_band("notch", f0, fs)?;
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Design(format!(
            "notch: quality factor {q} must be positive"
        )));
    }
    let w0 = 2.0 * PI * f0 / fs;
    let bw = w0 / q;
    let gain = 1.0 / (1.0 + (bw / 2.0).tan());
    let section = Biquad {
        b0: gain,
        b1: -2.0 * gain * w0.cos(),
        b2: gain,
        a1: -2.0 * gain * w0.cos(),
        a2: 2.0 * gain - 1.0,
    };
    Ok(BiquadCascade {
        sections: vec![section],
    })
}

/// Zero-phase filtering: odd-reflection padding of `3 * order` samples at each
/// end, a forward pass, a backward pass, then the padding is cut away. Each
/// pass starts from the settled state for its first sample.
pub fn filtfilt(filter: &BiquadCascade, x: &[f64]) -> Result<Vec<f64>> {
    let pad = 3 * filter.order();
    if filter.sections.is_empty() {
        return Ok(x.to_vec());
    }
    if x.len() <= pad {
        return Err(Error::invalid(
            "filtfilt",
            format!(
                "input of {} samples is too short; need more than {pad}",
                x.len()
            ),
        ));
    }
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let first = ext[0];
    filter.run(&mut ext, first);
    ext.reverse();
    let first = ext[0];
    filter.run(&mut ext, first);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

/// `(x - min) / (max - min)`; a constant input maps to all 0.5.
pub fn normalize_01(x: &[f64]) -> Vec<f64> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.5; x.len()];
    }
    x.iter().map(|&v| (v - lo) / span).collect()
}

/// Consecutive non-overlapping windows; the tail shorter than `window` is dropped.
pub fn segment(x: &[f64], window: usize) -> Result<Vec<Vec<f64>>> {
    if window == 0 {
        return Err(Error::invalid("segment", "window must be positive"));
    }
    Ok(x.chunks_exact(window).map(<[f64]>::to_vec).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DspConfig {
    pub highpass_hz: f64,
    /// Power-line notch centre. 40 Hz is where 60 Hz mains folds to at 100 Hz sampling.
    pub notch_hz: f64,
    pub notch_q: f64,
    pub notch_enabled: bool,
    pub window_samples: usize,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            highpass_hz: 0.5,
            notch_hz: 40.0,
            notch_q: 30.0,
            notch_enabled: true,
            window_samples: 300,
        }
    }
}

impl DspConfig {
    /// The filter chain this configuration applies at sampling rate `fs`.
    pub fn filter(&self, fs: f64) -> Result<BiquadCascade> {
        let hp = design_highpass(self.highpass_hz, fs)?;
        Ok(if self.notch_enabled {
            hp.then(design_notch(self.notch_hz, fs, self.notch_q)?)
        } else {
            hp
        })
    }
}

/// One labelled window cut from a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub subject_id: u16,
    pub activity: Activity,
    /// Position of the window inside its recording.
    pub index: usize,
    pub samples: Vec<f32>,
}

/// High-pass, optional notch, normalise the whole recording to [0, 1], then cut windows.
pub fn preprocess(rec: &EcgRecording, cfg: &DspConfig) -> Result<Vec<Segment>> {
    if rec.samples.is_empty() || !(rec.fs > 0.0) {
        return Err(Error::invalid(
            "preprocess",
            "recording needs samples and a positive sampling rate",
        ));
    }
    let filtered = filtfilt(&cfg.filter(rec.fs)?, &rec.samples)?;
    let normalized = normalize_01(&filtered);
    Ok(segment(&normalized, cfg.window_samples)?
        .into_iter()
        .enumerate()
        .map(|(index, w)| Segment {
            subject_id: rec.subject_id,
            activity: rec.activity,
            index,
            samples: w.into_iter().map(|v| v as f32).collect(),
        })
        .collect())
}
