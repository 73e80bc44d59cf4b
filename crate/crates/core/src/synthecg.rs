//! Synthetic single-lead ECG: Gaussian PQRST beats on a jittered RR train,
//! per-subject morphology, per-activity rhythm and noise, then the standard
//! preprocessing and a seeded 7:3 split.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dsp::{preprocess, Activity, DspConfig, EcgRecording};
use crate::error::{Error, Result};
use crate::model::Reader;
use crate::rng::seeded;

pub const DATASET_MAGIC: &[u8; 4] = b"DTDS";
pub const DATASET_VERSION: u32 = 1;
/// Samples per stored segment.
pub const SEGMENT_LEN: usize = 300;

/// One Gaussian wave of a beat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    /// Peak amplitude in mV.
    pub amplitude: f64,
    /// Standard deviation in seconds.
    pub width: f64,
    /// Position within the cardiac cycle in radians; the wave centre sits
    /// `angle / 2pi` of an RR interval away from the R peak.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: u16,
    /// P, Q, R, S, T.
    pub waves: [Wave; 5],
    pub heart_rate_bpm: f64,
    /// Standard deviation of the relative RR jitter.
    pub hrv: f64,
}

const R: usize = 2;

impl SubjectProfile {
    /// Feature vector used for the separation check; every entry is O(1).
    pub fn feature_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(16);
        for w in &self.waves {
            v.push(w.amplitude);
            v.push(w.width * 20.0);
            v.push(w.angle);
        }
        v.push(self.heart_rate_bpm / 30.0);
        v
    }

    fn check(&self) -> Result<()> {
        let r = self.waves[R].amplitude;
        let ok = self.waves.iter().all(|w| w.width > 0.0)
            && self
                .waves
                .iter()
                .enumerate()
                .all(|(i, w)| i == R || w.amplitude.abs() < r)
            && self.heart_rate_bpm > 0.0
            && self.hrv >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "subject {} has an invalid PQRST profile",
                self.subject_id
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityModel {
    pub activity: Activity,
    pub hr_multiplier: f64,
    /// Relative depth of the respiratory RR and amplitude modulation, in [0, 1).
    pub resp_depth: f64,
    pub resp_period_s: f64,
    /// White-noise standard deviation in mV.
    pub noise_mv: f64,
    /// Amplitude of sub-0.5 Hz baseline wander in mV.
    pub wander_mv: f64,
}

impl ActivityModel {
    pub fn standard(activity: Activity) -> Self {
        match activity {
            Activity::Rest => ActivityModel {
                activity,
                hr_multiplier: 1.0,
                resp_depth: 0.0,
                resp_period_s: 4.0,
                noise_mv: 0.02,
                wander_mv: 0.1,
            },
            Activity::Exercise => ActivityModel {
                activity,
                hr_multiplier: 1.7,
                resp_depth: 0.0,
                resp_period_s: 2.5,
                noise_mv: 0.05,
                wander_mv: 0.2,
            },
            Activity::DeepBreathing => ActivityModel {
                activity,
                hr_multiplier: 0.95,
                resp_depth: 0.10,
                resp_period_s: 10.0,
                noise_mv: 0.02,
                wander_mv: 0.3,
            },
        }
    }

    fn check(&self) -> Result<()> {
        if self.hr_multiplier > 0.0
            && (0.0..1.0).contains(&self.resp_depth)
            && self.resp_period_s > 0.0
        {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid activity model for {}",
                self.activity.name()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Shuffle the windows of each (subject, activity) class and split them.
    #[default]
    Segment,
    /// Record each class as several sessions and split whole sessions.
    Recording,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub n_subjects: usize,
    /// Length of each (subject, activity) recording.
    pub seconds: f64,
    pub fs: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub split: SplitMode,
    /// Sessions per (subject, activity) in recording split mode.
    pub sessions_per_condition: usize,
    /// Amplitude of 60 Hz mains pickup, which aliases to 40 Hz at 100 Hz sampling.
    pub interference_mv: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n_subjects: 15,
            seconds: 180.0,
            fs: 100.0,
            seed: 0,
            train_fraction: 0.7,
            split: SplitMode::Segment,
            sessions_per_condition: 10,
            interference_mv: 0.05,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("dataset: {m}")));
        if self.n_subjects == 0 || self.n_subjects > usize::from(u16::MAX) {
            return bad("n_subjects must be in 1..=65535");
        }
        if !(self.seconds > 0.0) || !(self.fs > 0.0) {
            return bad("seconds and fs must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie strictly between 0 and 1");
        }
        if self.split == SplitMode::Recording && self.sessions_per_condition < 2 {
            return bad("recording split needs at least 2 sessions per condition");
        }
        if !(self.interference_mv >= 0.0) {
            return bad("interference_mv must be non-negative");
        }
        Ok(())
    }

    pub fn samples_per_recording(&self) -> usize {
        (self.seconds * self.fs).round() as usize
    }
}

/// Reference morphology: P, Q, R, S, T.
const BASE_WAVES: [Wave; 5] = [
    Wave {
        amplitude: 0.15,
        width: 0.025,
        angle: -PI / 3.0,
    },
    Wave {
        amplitude: -0.12,
        width: 0.010,
        angle: -PI / 12.0,
    },
    Wave {
        amplitude: 1.0,
        width: 0.012,
        angle: 0.0,
    },
    Wave {
        amplitude: -0.25,
        width: 0.012,
        angle: PI / 12.0,
    },
    Wave {
        amplitude: 0.30,
        width: 0.050,
        angle: 2.0 * PI / 3.0,
    },
];

/// Minimum feature-space distance enforced between any two subjects.
pub const MIN_PROFILE_DISTANCE: f64 = 0.35;

fn draw_profile(id: u16, rng: &mut impl Rng) -> SubjectProfile {
    let mut waves = BASE_WAVES;
    for (i, w) in waves.iter_mut().enumerate() {
        let scale = if i == R {
            rng.random_range(0.7..1.5)
        } else {
            rng.random_range(0.4..1.6)
        };
        w.amplitude *= scale;
        w.width *= rng.random_range(0.7..1.4);
        w.angle += rng.random_range(-0.12..0.12);
    }
    SubjectProfile {
        subject_id: id,
        waves,
        heart_rate_bpm: rng.random_range(55.0..85.0),
        hrv: rng.random_range(0.01..0.04),
    }
}

fn distance(a: &SubjectProfile, b: &SubjectProfile) -> f64 {
    a.feature_vector()
        .iter()
        .zip(b.feature_vector())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Seeded subject profiles, redrawn until every pair is at least
/// [`MIN_PROFILE_DISTANCE`] apart (the closest draw is kept if that fails).
pub fn make_profiles(spec: &DatasetSpec) -> Vec<SubjectProfile> {
    let mut rng = seeded(spec.seed, &[1]);
    let mut out: Vec<SubjectProfile> = Vec::with_capacity(spec.n_subjects);
    for id in 0..spec.n_subjects {
        let mut best: Option<(f64, SubjectProfile)> = None;
        for _ in 0..200 {
            let p = draw_profile(id as u16, &mut rng);
            let d = out
                .iter()
                .map(|q| distance(&p, q))
                .fold(f64::INFINITY, f64::min);
            if d >= MIN_PROFILE_DISTANCE {
                best = Some((d, p));
                break;
            }
            if best.as_ref().is_none_or(|(bd, _)| d > *bd) {
                best = Some((d, p));
            }
        }
        out.push(best.expect("at least one draw").1);
    }
    out
}

/// Synthesise `seconds * fs` samples for one subject and activity.
pub fn synthesize(
    profile: &SubjectProfile,
    activity: &ActivityModel,
    seconds: f64,
    fs: f64,
    seed: u64,
) -> Result<EcgRecording> {
    if !(seconds > 0.0) || !(fs > 0.0) {
        return Err(Error::Config(
            "synthesize: duration and sampling rate must be positive".into(),
        ));
    }
    profile.check()?;
    activity.check()?;
    let n = (seconds * fs).round() as usize;
    let mut rng = seeded(
        seed,
        &[u64::from(profile.subject_id), activity.activity as u64],
    );
    let jitter = Normal::new(0.0, profile.hrv).expect("hrv is finite and non-negative");
    let base_rr = 60.0 / (profile.heart_rate_bpm * activity.hr_multiplier);
    let resp_phase = rng.random_range(0.0..2.0 * PI);
    let resp = |t: f64| (2.0 * PI * t / activity.resp_period_s + resp_phase).sin();

    let mut x = vec![0.0; n];
    let mut t_r = -rng.random_range(0.0..base_rr);
    let end = n as f64 / fs + 1.0;
    while t_r < end {
        let rr =
            (base_rr * (1.0 + activity.resp_depth * resp(t_r)) * (1.0 + jitter.sample(&mut rng)))
                .max(0.2);
        let amp_mod = 1.0 + 0.5 * activity.resp_depth * resp(t_r);
        for w in &profile.waves {
            let centre = t_r + w.angle / (2.0 * PI) * rr;
            let lo = ((centre - 6.0 * w.width) * fs).floor().max(0.0) as usize;
            let hi = (((centre + 6.0 * w.width) * fs).ceil().max(0.0) as usize).min(n);
            for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                let d = i as f64 / fs - centre;
                *v += amp_mod * w.amplitude * (-d * d / (2.0 * w.width * w.width)).exp();
            }
        }
        t_r += rr;
    }

    if activity.wander_mv > 0.0 {
        let freqs = [rng.random_range(0.05..0.2), rng.random_range(0.2..0.45)];
        let phases = [
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
        ];
        for (i, v) in x.iter_mut().enumerate() {
            let t = i as f64 / fs;
            *v += activity.wander_mv
                * (0.7 * (2.0 * PI * freqs[0] * t + phases[0]).sin()
                    + 0.3 * (2.0 * PI * freqs[1] * t + phases[1]).sin());
        }
    }
    if activity.noise_mv > 0.0 {
        let noise = Normal::new(0.0, activity.noise_mv).expect("noise level is finite");
        x.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    Ok(EcgRecording {
        subject_id: profile.subject_id,
        activity: activity.activity,
        fs,
        samples: x,
    })
}

/// Add mains pickup at `hz` with a random phase.
pub fn add_interference(rec: &mut EcgRecording, amplitude_mv: f64, hz: f64, seed: u64) {
    if amplitude_mv == 0.0 {
        return;
    }
    let phase = Uniform::new(0.0, 2.0 * PI)
        .expect("valid range")
        .sample(&mut seeded(seed, &[7]));
    for (i, v) in rec.samples.iter_mut().enumerate() {
        *v += amplitude_mv * (2.0 * PI * hz * i as f64 / rec.fs + phase).sin();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train = 0,
    Test = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub subject_id: u16,
    pub activity: Activity,
    pub split: Split,
    pub samples: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentDataset {
    pub segments: Vec<LabeledSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub subject_id: u16,
    pub activity: Activity,
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub total: usize,
    pub train: usize,
    pub test: usize,
    pub n_subjects: usize,
    pub classes: Vec<ClassCount>,
    pub spec: DatasetSpec,
    pub dsp: DspConfig,
}

impl SegmentDataset {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn split(&self, which: Split) -> Vec<&LabeledSegment> {
        self.segments.iter().filter(|s| s.split == which).collect()
    }

    /// One more than the largest subject id present.
    pub fn n_subjects(&self) -> usize {
        self.segments
            .iter()
            .map(|s| usize::from(s.subject_id) + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn class_counts(&self) -> Vec<ClassCount> {
        let mut map: BTreeMap<(u16, Activity), (usize, usize)> = BTreeMap::new();
        for s in &self.segments {
            let e = map.entry((s.subject_id, s.activity)).or_default();
            match s.split {
                Split::Train => e.0 += 1,
                Split::Test => e.1 += 1,
            }
        }
        map.into_iter()
            .map(|((subject_id, activity), (train, test))| ClassCount {
                subject_id,
                activity,
                train,
                test,
            })
            .collect()
    }

    pub fn manifest(&self, spec: &DatasetSpec, dsp: &DspConfig) -> Manifest {
        Manifest {
            format_version: DATASET_VERSION,
            seed: spec.seed,
            total: self.len(),
            train: self.split(Split::Train).len(),
            test: self.split(Split::Test).len(),
            n_subjects: self.n_subjects(),
            classes: self.class_counts(),
            spec: spec.clone(),
            dsp: dsp.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let count =
            u32::try_from(self.len()).map_err(|_| Error::Dataset("too many segments".into()))?;
        let mut buf = Vec::with_capacity(12 + self.len() * (4 + 4 * SEGMENT_LEN));
        buf.extend_from_slice(DATASET_MAGIC);
        buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        buf.extend_from_slice(&count.to_le_bytes());
        for (i, s) in self.segments.iter().enumerate() {
            if s.samples.len() != SEGMENT_LEN {
                return Err(Error::Dataset(format!(
                    "segment {i} has {} samples; the file format stores exactly {SEGMENT_LEN}",
                    s.samples.len()
                )));
            }
            buf.extend_from_slice(&s.subject_id.to_le_bytes());
            buf.push(s.activity as u8);
            for v in &s.samples {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf.push(s.split as u8);
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(DATASET_MAGIC)?;
        let at = r.offset();
        let version = r.u32("version")?;
        if version != DATASET_VERSION {
            return Err(Error::Format {
                offset: at,
                msg: format!("unsupported dataset version {version}"),
            });
        }
        let count = r.u32("segment count")? as usize;
        let mut segments = Vec::with_capacity(count.min(1 << 20));
        for i in 0..count {
            let subject_id = r.u16("subject id")?;
            let at = r.offset();
            let activity =
                Activity::from_index(usize::from(r.u8("activity")?)).ok_or_else(|| {
                    Error::Format {
                        offset: at,
                        msg: format!("segment {i}: unknown activity code"),
                    }
                })?;
            let samples = r.f32s(SEGMENT_LEN, "samples")?;
            let at = r.offset();
            let split = match r.u8("split flag")? {
                0 => Split::Train,
                1 => Split::Test,
                f => {
                    return Err(Error::Format {
                        offset: at,
                        msg: format!("segment {i}: split flag {f}"),
                    })
                }
            };
            segments.push(LabeledSegment {
                subject_id,
                activity,
                split,
                samples,
            });
        }
        r.finish()?;
        Ok(SegmentDataset { segments })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn train_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1.min(n), n.saturating_sub(1).max(1.min(n)))
}

/// Synthesise, preprocess and split the whole dataset. Ordering is fixed by
/// (subject, activity, window position).
pub fn build_dataset(spec: &DatasetSpec, dsp: &DspConfig) -> Result<SegmentDataset> {
    spec.validate()?;
    if dsp.window_samples != SEGMENT_LEN {
        return Err(Error::Config(format!(
            "dsp.window_samples must be {SEGMENT_LEN} for the dataset file format, got {}",
            dsp.window_samples
        )));
    }
    let profiles = make_profiles(spec);
    let mut segments = Vec::new();
    for p in &profiles {
        for activity in Activity::ALL {
            let model = ActivityModel::standard(activity);
            let class_tags = [u64::from(p.subject_id), activity as u64];
            let sessions = match spec.split {
                SplitMode::Segment => 1,
                SplitMode::Recording => spec.sessions_per_condition,
            };
            let mut windows: Vec<Vec<Vec<f32>>> = Vec::with_capacity(sessions);
            for s in 0..sessions {
                let seed = crate::rng::derive_seed(
                    spec.seed,
                    &[2, class_tags[0], class_tags[1], s as u64],
                );
                let mut rec = synthesize(p, &model, spec.seconds / sessions as f64, spec.fs, seed)?;
                add_interference(&mut rec, spec.interference_mv, 60.0, seed);
                windows.push(
                    preprocess(&rec, dsp)?
                        .into_iter()
                        .map(|s| s.samples)
                        .collect(),
                );
            }
            let mut rng = seeded(spec.seed, &[3, class_tags[0], class_tags[1]]);
            let mut flags: Vec<Split> = match spec.split {
                SplitMode::Segment => {
                    let n = windows[0].len();
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut rng);
                    let mut f = vec![Split::Test; n];
                    order
                        .iter()
                        .take(train_count(n, spec.train_fraction))
                        .for_each(|&i| f[i] = Split::Train);
                    f
                }
                SplitMode::Recording => {
                    let mut order: Vec<usize> = (0..sessions).collect();
                    order.shuffle(&mut rng);
                    let mut per_session = vec![Split::Test; sessions];
                    order
                        .iter()
                        .take(train_count(sessions, spec.train_fraction))
                        .for_each(|&i| per_session[i] = Split::Train);
                    windows
                        .iter()
                        .zip(per_session)
                        .flat_map(|(w, f)| std::iter::repeat_n(f, w.len()))
                        .collect()
                }
            };
            for (samples, split) in windows.into_iter().flatten().zip(flags.drain(..)) {
                segments.push(LabeledSegment {
                    subject_id: p.subject_id,
                    activity,
                    split,
                    samples,
                });
            }
        }
    }
    Ok(SegmentDataset { segments })
}
