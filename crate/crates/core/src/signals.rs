//! Raw-signal containers, frame blocking, DC-offset removal and resampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical quantity carried by a [`Waveform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Current,
    Voltage,
    Power,
}

/// Raw samples of a single quantity at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    kind: WaveformKind,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, kind: WaveformKind) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::arg(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(pos) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::arg(format!("non-finite sample at index {pos}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            kind,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn kind(&self) -> WaveformKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// An F×T matrix of named feature rows sampled at `rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    values: Vec<Vec<f64>>,
    names: Vec<String>,
    rate_hz: f64,
}

impl FeatureSeries {
    pub fn new(values: Vec<Vec<f64>>, names: Vec<String>, rate_hz: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("feature series needs at least one row".into()));
        }
        if values.len() != names.len() {
            return Err(Error::arg(format!(
                "{} rows but {} feature names",
                values.len(),
                names.len()
            )));
        }
        let t = values[0].len();
        if let Some(i) = values.iter().position(|r| r.len() != t) {
            return Err(Error::arg(format!(
                "row {} ({}) has length {}, expected {t}",
                i,
                names[i],
                values[i].len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::arg(format!("duplicate feature name {n:?}")));
            }
        }
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::arg(format!("rate must be positive, got {rate_hz}")));
        }
        Ok(Self {
            values,
            names,
            rate_hz,
        })
    }

    /// Single-row series, e.g. an active-power trace.
    pub fn single(name: &str, row: Vec<f64>, rate_hz: f64) -> Result<Self> {
        Self::new(vec![row], vec![name.to_string()], rate_hz)
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn n_features(&self) -> usize {
        self.values.len()
    }

    /// Number of time steps T.
    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.values[i].as_slice())
    }

    /// Keep only the named rows, in the order given.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureSeries> {
        let mut rows = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            let i = self
                .index_of(n)
                .ok_or_else(|| Error::arg(format!("feature {n:?} not present in series")))?;
            rows.push(self.values[i].clone());
        }
        FeatureSeries::new(
            rows,
            names.iter().map(|n| n.as_ref().to_string()).collect(),
            self.rate_hz,
        )
    }

    /// Columns `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<FeatureSeries> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.len())
            .ok_or_else(|| {
                Error::arg(format!(
                    "slice {start}..{} exceeds series length {}",
                    start.saturating_add(len),
                    self.len()
                ))
            })?;
        Ok(FeatureSeries {
            values: self.values.iter().map(|r| r[start..end].to_vec()).collect(),
            names: self.names.clone(),
            rate_hz: self.rate_hz,
        })
    }

    /// Same shape, every entry zero.
    pub fn zeros_like(&self) -> FeatureSeries {
        FeatureSeries {
            values: vec![vec![0.0; self.len()]; self.n_features()],
            names: self.names.clone(),
            rate_hz: self.rate_hz,
        }
    }
}

/// An F×W window cut from a [`FeatureSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    values: Vec<Vec<f64>>,
    start_index: usize,
    dc_removed: bool,
}

impl Frame {
    pub fn new(values: Vec<Vec<f64>>, start_index: usize, dc_removed: bool) -> Result<Self> {
        if values.is_empty() || values[0].is_empty() {
            return Err(Error::EmptyInput("frame must have at least one row and column".into()));
        }
        let w = values[0].len();
        if values.iter().any(|r| r.len() != w) {
            return Err(Error::arg("frame rows differ in length"));
        }
        Ok(Self {
            values,
            start_index,
            dc_removed,
        })
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn dc_removed(&self) -> bool {
        self.dc_removed
    }

    /// Window length W.
    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn n_features(&self) -> usize {
        self.values.len()
    }
}

/// Cut `series` into frames of `window_w` samples every `hop` samples.
/// A trailing partial window is dropped.
pub fn frame_block(series: &FeatureSeries, window_w: usize, hop: usize) -> Result<Vec<Frame>> {
    if hop == 0 {
        return Err(Error::arg("hop must be at least 1"));
    }
    if window_w == 0 {
        return Err(Error::arg("window must be at least 1"));
    }
    let t = series.len();
    if window_w > t {
        return Err(Error::EmptyInput(format!(
            "window of {window_w} samples exceeds series length {t}"
        )));
    }
    Ok((0..=t - window_w)
        .step_by(hop)
        .map(|start| Frame {
            values: series
                .values()
                .iter()
                .map(|r| r[start..start + window_w].to_vec())
                .collect(),
            start_index: start,
            dc_removed: false,
        })
        .collect())
}

/// Compensated (Neumaier) sum in fixed left-to-right order.
pub(crate) fn stable_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    stable_sum(xs) / xs.len() as f64
}

/// Subtract each row's mean from that row in place.
pub fn remove_dc_rows(rows: &mut [Vec<f64>]) {
    for row in rows.iter_mut() {
        let m = mean(row);
        row.iter_mut().for_each(|x| *x -= m);
    }
}

/// Subtract the per-row arithmetic mean.
pub fn remove_dc(frame: &Frame) -> Frame {
    let mut values = frame.values.clone();
    remove_dc_rows(&mut values);
    Frame {
        values,
        start_index: frame.start_index,
        dc_removed: true,
    }
}

/// Lower the sample rate of `series` to `target_rate_hz`.
///
/// Integer decimation factors use block means over each decimation window;
/// other ratios fall back to linear interpolation at the target instants.
pub fn downsample(series: &FeatureSeries, target_rate_hz: f64) -> Result<FeatureSeries> {
    if !(target_rate_hz > 0.0 && target_rate_hz.is_finite()) {
        return Err(Error::arg(format!(
            "target rate must be positive, got {target_rate_hz}"
        )));
    }
    let rate = series.rate_hz();
    if target_rate_hz > rate * (1.0 + 1e-12) {
        return Err(Error::arg(format!(
            "cannot upsample from {rate} Hz to {target_rate_hz} Hz"
        )));
    }
    let ratio = rate / target_rate_hz;
    let factor = ratio.round();
    let values: Vec<Vec<f64>> = if (ratio - factor).abs() <= 1e-9 * ratio {
        let factor = factor as usize;
        series
            .values()
            .iter()
            .map(|row| row.chunks_exact(factor).map(mean).collect())
            .collect()
    } else {
        let t = series.len();
        let n_out = if t == 0 {
            0
        } else {
            ((t - 1) as f64 / ratio).floor() as usize + 1
        };
        series
            .values()
            .iter()
            .map(|row| {
                (0..n_out)
                    .map(|k| {
                        let pos = k as f64 * ratio;
                        let i = pos.floor() as usize;
                        if i + 1 >= t {
                            row[t - 1]
                        } else {
                            let frac = pos - i as f64;
                            row[i] + (row[i + 1] - row[i]) * frac
                        }
                    })
                    .collect()
            })
            .collect()
    };
    if values[0].is_empty() {
        return Err(Error::EmptyInput(format!(
            "series of {} samples is shorter than one output sample",
            series.len()
        )));
    }
    FeatureSeries::new(values, series.names().to_vec(), target_rate_hz)
}
