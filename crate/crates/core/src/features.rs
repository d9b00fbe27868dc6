//! Per-cycle electrical features from raw current and voltage.
//!
//! One feature vector is produced per electrical cycle (160 samples at
//! 8 kHz on a 50 Hz network). The row order of every series produced here is
//! [`FEATURE_NAMES`].

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::signals::{FeatureSeries, Waveform};

pub const NOMINAL_LINE_HZ: f64 = 50.0;
pub const INTERNAL_SAMPLE_RATE_HZ: f64 = 8000.0;
/// Highest harmonic order included in THD.
pub const THD_MAX_HARMONIC: usize = 13;
pub const N_FEATURES: usize = 19;

/// Fixed row order of every extracted feature series.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "peak_voltage",
    "i_rms",
    "v_rms",
    "crest_factor_i",
    "I",
    "V",
    "P",
    "f",
    "Q",
    "S",
    "phi",
    "iTHD",
    "vTHD",
    "iHD3",
    "iHD5",
    "iHD7",
    "vHD3",
    "vHD5",
    "vHD7",
];

/// Number of leading entries of [`FEATURE_NAMES`] that are statistical
/// features; the rest are electrical.
pub const N_STATISTICAL: usize = 4;

pub fn is_electrical(name: &str) -> bool {
    FEATURE_NAMES
        .iter()
        .position(|n| *n == name)
        .is_some_and(|i| i >= N_STATISTICAL)
}

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// The 19 features of one electrical cycle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CycleFeatures {
    pub peak_voltage: f64,
    pub i_rms: f64,
    pub v_rms: f64,
    pub crest_factor_i: f64,
    pub current: f64,
    pub voltage: f64,
    pub active_power: f64,
    pub frequency: f64,
    pub reactive_power: f64,
    pub apparent_power: f64,
    pub load_angle: f64,
    pub i_thd: f64,
    pub v_thd: f64,
    pub i_hd3: f64,
    pub i_hd5: f64,
    pub i_hd7: f64,
    pub v_hd3: f64,
    pub v_hd5: f64,
    pub v_hd7: f64,
    /// Set when a zero RMS or zero fundamental forced ratio features to 0.
    pub degenerate: bool,
}

impl CycleFeatures {
    /// Features in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.peak_voltage,
            self.i_rms,
            self.v_rms,
            self.crest_factor_i,
            self.current,
            self.voltage,
            self.active_power,
            self.frequency,
            self.reactive_power,
            self.apparent_power,
            self.load_angle,
            self.i_thd,
            self.v_thd,
            self.i_hd3,
            self.i_hd5,
            self.i_hd7,
            self.v_hd3,
            self.v_hd5,
            self.v_hd7,
        ]
    }
}

/// Samples per cycle at `sample_rate_hz` on a nominal-frequency network.
pub fn samples_per_cycle(sample_rate_hz: f64) -> usize {
    (sample_rate_hz / NOMINAL_LINE_HZ).round() as usize
}

/// cos/sin of 2*pi*m/n for m in 0..n.
struct Twiddles {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Twiddles {
    fn new(n: usize) -> Self {
        let angle = |m: usize| 2.0 * PI * m as f64 / n as f64;
        Self {
            cos: (0..n).map(|m| angle(m).cos()).collect(),
            sin: (0..n).map(|m| angle(m).sin()).collect(),
        }
    }
}

struct Spectrum {
    /// |X_k| for k = 0..=max_harmonic
    magnitude: Vec<f64>,
    fundamental_phase: f64,
}

fn spectrum(x: &[f64], max_harmonic: usize, tw: &Twiddles) -> Spectrum {
    let n = x.len();
    let mut magnitude = Vec::with_capacity(max_harmonic + 1);
    let mut fundamental_phase = 0.0;
    for k in 0..=max_harmonic {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &s) in x.iter().enumerate() {
            let m = (k * j) % n;
            re += s * tw.cos[m];
            im -= s * tw.sin[m];
        }
        if k == 1 {
            fundamental_phase = im.atan2(re);
        }
        magnitude.push((re * re + im * im).sqrt());
    }
    Spectrum {
        magnitude,
        fundamental_phase,
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64).sqrt()
}

/// Line frequency from the spacing of voltage zero crossings within the cycle.
fn zero_crossing_frequency(v: &[f64], sample_rate_hz: f64) -> Option<f64> {
    let mut crossings = Vec::new();
    for (n, pair) in v.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let rising = a <= 0.0 && b > 0.0;
        let falling = a >= 0.0 && b < 0.0;
        if rising || falling {
            crossings.push(n as f64 + a / (a - b));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    if span <= 0.0 {
        return None;
    }
    // consecutive crossings are half a period apart
    let half_period = span / (crossings.len() - 1) as f64 / sample_rate_hz;
    Some(1.0 / (2.0 * half_period))
}

fn harmonic_ratios(spec: &Spectrum, max_harmonic: usize) -> Option<(f64, [f64; 3])> {
    let fundamental = spec.magnitude[1];
    if fundamental <= 0.0 || !fundamental.is_finite() {
        return None;
    }
    let thd = (2..=max_harmonic)
        .map(|h| spec.magnitude[h].powi(2))
        .sum::<f64>()
        .sqrt()
        / fundamental;
    let hd = |h: usize| spec.magnitude.get(h).map_or(0.0, |m| m / fundamental);
    Some((thd, [hd(3), hd(5), hd(7)]))
}

/// Features of a single electrical cycle of current `i` and voltage `v`.
pub fn extract_cycle(i: &[f64], v: &[f64], sample_rate_hz: f64) -> Result<CycleFeatures> {
    extract_cycle_with(i, v, sample_rate_hz, &Twiddles::new(i.len()))
}

fn extract_cycle_with(
    i: &[f64],
    v: &[f64],
    sample_rate_hz: f64,
    tw: &Twiddles,
) -> Result<CycleFeatures> {
    if i.len() != v.len() {
        return Err(Error::arg(format!(
            "current has {} samples, voltage {}",
            i.len(),
            v.len()
        )));
    }
    let c = i.len();
    if c < 4 {
        return Err(Error::EmptyInput(format!("cycle of {c} samples is too short")));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::arg("sample rate must be positive"));
    }
    if i.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::arg("cycle contains non-finite samples"));
    }
    let max_harmonic = THD_MAX_HARMONIC.min((c - 1) / 2);

    let peak_voltage = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let peak_current = i.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let i_rms = rms(i);
    let v_rms = rms(v);
    let p = i.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / c as f64;
    let s = i_rms * v_rms;

    let i_spec = spectrum(i, max_harmonic, tw);
    let v_spec = spectrum(v, max_harmonic, tw);

    let mut degenerate = false;
    let crest = if i_rms > 0.0 {
        peak_current / i_rms
    } else {
        degenerate = true;
        0.0
    };
    let (i_thd, i_hd) = harmonic_ratios(&i_spec, max_harmonic).unwrap_or_else(|| {
        degenerate = true;
        (0.0, [0.0; 3])
    });
    let (v_thd, v_hd) = harmonic_ratios(&v_spec, max_harmonic).unwrap_or_else(|| {
        degenerate = true;
        (0.0, [0.0; 3])
    });

    let (q, phi) = if i_rms > 0.0 && v_rms > 0.0 {
        let q_mag = (s * s - p * p).max(0.0).sqrt();
        // positive when the current fundamental lags the voltage fundamental
        let mut lag = v_spec.fundamental_phase - i_spec.fundamental_phase;
        while lag > PI {
            lag -= 2.0 * PI;
        }
        while lag <= -PI {
            lag += 2.0 * PI;
        }
        let q = if lag < 0.0 { -q_mag } else { q_mag };
        (q, q.atan2(p))
    } else {
        degenerate = true;
        (0.0, 0.0)
    };

    let frequency = match zero_crossing_frequency(v, sample_rate_hz) {
        Some(f) if v_rms > 0.0 => f,
        _ => {
            degenerate = true;
            NOMINAL_LINE_HZ
        }
    };

    Ok(CycleFeatures {
        peak_voltage,
        i_rms,
        v_rms,
        crest_factor_i: crest,
        current: i_rms,
        voltage: v_rms,
        active_power: p,
        frequency,
        reactive_power: q,
        apparent_power: s,
        load_angle: phi,
        i_thd,
        v_thd,
        i_hd3: i_hd[0],
        i_hd5: i_hd[1],
        i_hd7: i_hd[2],
        v_hd3: v_hd[0],
        v_hd5: v_hd[1],
        v_hd7: v_hd[2],
        degenerate,
    })
}

/// Per-cycle features of every complete cycle in `i`/`v`, as a 19-row
/// series at the nominal line frequency.
pub fn extract_series(i: &Waveform, v: &Waveform) -> Result<FeatureSeries> {
    extract_series_with(i, v, Exec::default())
}

pub fn extract_series_with(i: &Waveform, v: &Waveform, exec: Exec) -> Result<FeatureSeries> {
    let cycles = extract_cycles_with(i, v, exec)?;
    Ok(cycles_to_series(&cycles))
}

/// Every complete cycle of `i`/`v` mapped through [`extract_cycle`].
pub fn extract_cycles_with(i: &Waveform, v: &Waveform, exec: Exec) -> Result<Vec<CycleFeatures>> {
    if i.len() != v.len() {
        return Err(Error::arg(format!(
            "current has {} samples, voltage {}",
            i.len(),
            v.len()
        )));
    }
    if i.sample_rate_hz() != v.sample_rate_hz() {
        return Err(Error::arg(format!(
            "current sampled at {} Hz, voltage at {} Hz",
            i.sample_rate_hz(),
            v.sample_rate_hz()
        )));
    }
    let rate = i.sample_rate_hz();
    let c = samples_per_cycle(rate);
    if c < 4 || i.len() < c {
        return Err(Error::EmptyInput(format!(
            "{} samples at {rate} Hz do not cover one cycle",
            i.len()
        )));
    }
    let n_cycles = i.len() / c;
    let tw = Twiddles::new(c);
    par::map_range(exec, n_cycles, |k| {
        let range = k * c..(k + 1) * c;
        extract_cycle_with(&i.samples()[range.clone()], &v.samples()[range], rate, &tw)
    })
    .into_iter()
    .collect()
}

pub fn cycles_to_series(cycles: &[CycleFeatures]) -> FeatureSeries {
    let mut rows = vec![Vec::with_capacity(cycles.len()); N_FEATURES];
    for cyc in cycles {
        for (row, x) in rows.iter_mut().zip(cyc.to_array()) {
            row.push(x);
        }
    }
    FeatureSeries::new(rows, feature_names(), NOMINAL_LINE_HZ)
        .expect("fixed feature layout is always valid")
}
