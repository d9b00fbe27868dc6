//! On-disk formats.
//!
//! Feature series and waveforms are CSV with a `t` column in seconds
//! followed by one column per feature (`i`, `v` for waveforms). Floats use
//! the shortest representation that round-trips. Reference sets and corpora
//! are directories of such files plus a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{ChannelId, NoTvPolicy, NormStats, ReferenceSet};
use crate::signals::{FeatureSeries, Waveform, WaveformKind};
use crate::synth::{CorpusConfig, SynthCorpus};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const NOISE_FILE: &str = "noise.csv";
pub const CHANNELS_DIR: &str = "channels";
pub const SECOND_MONITOR_DIR: &str = "refs_b";

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(path, format!("{other:?}")),
        }
    } else {
        parse_err(path, e.to_string())
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Serialize `series` as CSV text.
pub fn series_to_csv(series: &FeatureSeries) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(series.names().iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(Path::new("<memory>"), e))?;
    let mut record = Vec::with_capacity(header.len());
    for k in 0..series.len() {
        record.clear();
        record.push((k as f64 / series.rate_hz()).to_string());
        record.extend(series.values().iter().map(|row| row[k].to_string()));
        w.write_record(&record).map_err(|e| csv_err(Path::new("<memory>"), e))?;
    }
    w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))
}

pub fn write_series_csv(path: &Path, series: &FeatureSeries) -> Result<()> {
    let bytes = series_to_csv(series)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(parse_err(path, "first column must be `t`"));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != header.len() {
            return Err(parse_err(path, format!("row {} has {} fields, expected {}", line + 2, rec.len(), header.len())));
        }
        for (c, field) in rec.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| parse_err(path, format!("row {}: {field:?} is not a number", line + 2)))?;
            cols[c].push(x);
        }
    }
    if cols[0].is_empty() {
        return Err(parse_err(path, "no data rows"));
    }
    Ok((header, cols))
}

fn infer_rate(path: &Path, t: &[f64], rate_hz: Option<f64>) -> Result<f64> {
    if let Some(r) = rate_hz {
        return Ok(r);
    }
    if t.len() < 2 {
        return Err(parse_err(path, "cannot infer sample rate from a single row"));
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(parse_err(path, "time column is not increasing"));
    }
    let rate = (t.len() - 1) as f64 / span;
    // snap to the nearest integer rate when the timestamps are rounded
    Ok(if (rate - rate.round()).abs() < 1e-6 * rate { rate.round() } else { rate })
}

/// Read a feature CSV. The rate is taken from `rate_hz` or inferred from `t`.
pub fn read_series_csv(path: &Path, rate_hz: Option<f64>) -> Result<FeatureSeries> {
    let (header, mut cols) = read_columns(path)?;
    let rate = infer_rate(path, &cols[0], rate_hz)?;
    let values = cols.split_off(1);
    FeatureSeries::new(values, header[1..].to_vec(), rate).map_err(|e| parse_err(path, e.to_string()))
}

/// Write aligned current and voltage as `t,i,v`.
pub fn write_waveforms_csv(path: &Path, i: &Waveform, v: &Waveform) -> Result<()> {
    if i.len() != v.len() || i.sample_rate_hz() != v.sample_rate_hz() {
        return Err(Error::arg("current and voltage differ in length or rate"));
    }
    let series = FeatureSeries::new(
        vec![i.samples().to_vec(), v.samples().to_vec()],
        vec!["i".into(), "v".into()],
        i.sample_rate_hz(),
    )?;
    write_series_csv(path, &series)
}

/// Read a `t,i,v` waveform CSV.
pub fn read_waveforms_csv(path: &Path, rate_hz: Option<f64>) -> Result<(Waveform, Waveform)> {
    let s = read_series_csv(path, rate_hz)?;
    let col = |name: &str| {
        s.row(name)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| parse_err(path, format!("missing column `{name}`")))
    };
    let wrap = |e: Error| parse_err(path, e.to_string());
    Ok((
        Waveform::new(col("i")?, s.rate_hz(), WaveformKind::Current).map_err(wrap)?,
        Waveform::new(col("v")?, s.rate_hz(), WaveformKind::Voltage).map_err(wrap)?,
    ))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| parse_err(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

/// Index of a reference directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceManifest {
    pub channel_ids: Vec<ChannelId>,
    pub files: Vec<String>,
    pub feature_names: Vec<String>,
    pub rate_hz: f64,
    #[serde(default)]
    pub normalization: Option<NormStats>,
    #[serde(default)]
    pub monitor: Option<String>,
}

pub fn channel_file(id: ChannelId) -> String {
    format!("ch{id:02}.csv")
}

/// Write one CSV per channel and a manifest into `dir`.
pub fn save_reference_dir(
    dir: &Path,
    channels: &[(ChannelId, FeatureSeries)],
    normalization: Option<&NormStats>,
    monitor: Option<&str>,
) -> Result<ReferenceManifest> {
    let first = channels
        .first()
        .ok_or_else(|| Error::arg("no channels to save"))?;
    ensure_dir(dir)?;
    let mut files = Vec::with_capacity(channels.len());
    for (id, series) in channels {
        let name = channel_file(*id);
        write_series_csv(&dir.join(&name), series)?;
        files.push(name);
    }
    let manifest = ReferenceManifest {
        channel_ids: channels.iter().map(|(id, _)| *id).collect(),
        files,
        feature_names: first.1.names().to_vec(),
        rate_hz: first.1.rate_hz(),
        normalization: normalization.cloned(),
        monitor: monitor.map(str::to_string),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Read every channel listed in the manifest of `dir`.
pub fn load_channels(dir: &Path) -> Result<(ReferenceManifest, Vec<(ChannelId, FeatureSeries)>)> {
    let path = dir.join(MANIFEST_FILE);
    let manifest: ReferenceManifest = read_json(&path)?;
    if manifest.channel_ids.len() != manifest.files.len() {
        return Err(parse_err(&path, "channel_ids and files differ in length"));
    }
    let mut out = Vec::with_capacity(manifest.files.len());
    for (id, file) in manifest.channel_ids.iter().zip(&manifest.files) {
        let p = dir.join(file);
        let s = read_series_csv(&p, Some(manifest.rate_hz))?;
        if s.names() != manifest.feature_names.as_slice() {
            return Err(parse_err(&p, "feature columns differ from the manifest"));
        }
        out.push((*id, s));
    }
    Ok((manifest, out))
}

pub fn load_reference_dir(dir: &Path, policy: NoTvPolicy) -> Result<ReferenceSet> {
    let (_, channels) = load_channels(dir)?;
    ReferenceSet::new(channels, policy)
}

/// Top-level index of a corpus directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config: CorpusConfig,
    pub channels_dir: String,
    pub noise_file: String,
    pub second_monitor_dir: Option<String>,
}

/// A corpus read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub root: PathBuf,
    pub manifest: Option<CorpusManifest>,
    pub channels: Vec<(ChannelId, FeatureSeries)>,
    pub second_monitor: Option<Vec<(ChannelId, FeatureSeries)>>,
    pub noise: Option<FeatureSeries>,
}

pub fn write_corpus(dir: &Path, corpus: &SynthCorpus, cfg: &CorpusConfig) -> Result<CorpusManifest> {
    ensure_dir(dir)?;
    let pair = |series: &[FeatureSeries]| -> Vec<(ChannelId, FeatureSeries)> {
        corpus.channel_ids.iter().copied().zip(series.iter().cloned()).collect()
    };
    save_reference_dir(&dir.join(CHANNELS_DIR), &pair(&corpus.monitor_a), None, Some(&cfg.profile_a.name))?;
    let second = match &corpus.monitor_b {
        Some(b) => {
            save_reference_dir(&dir.join(SECOND_MONITOR_DIR), &pair(b), None, Some(&cfg.profile_b.name))?;
            Some(SECOND_MONITOR_DIR.to_string())
        }
        None => None,
    };
    write_series_csv(&dir.join(NOISE_FILE), &corpus.noise)?;
    let manifest = CorpusManifest {
        config: cfg.clone(),
        channels_dir: CHANNELS_DIR.into(),
        noise_file: NOISE_FILE.into(),
        second_monitor_dir: second,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Load a corpus written by [`write_corpus`], or any directory laid out
/// the same way (the top-level manifest is optional).
pub fn load_corpus(dir: &Path) -> Result<LoadedCorpus> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found")));
    }
    let mpath = dir.join(MANIFEST_FILE);
    let manifest: Option<CorpusManifest> = if mpath.exists() { Some(read_json(&mpath)?) } else { None };
    let channels_dir = manifest.as_ref().map_or(CHANNELS_DIR, |m| m.channels_dir.as_str());
    let (_, channels) = load_channels(&dir.join(channels_dir))?;
    let second_dir = match &manifest {
        Some(m) => m.second_monitor_dir.clone(),
        None => dir.join(SECOND_MONITOR_DIR).is_dir().then(|| SECOND_MONITOR_DIR.to_string()),
    };
    let second_monitor = match second_dir {
        Some(d) => Some(load_channels(&dir.join(d))?.1),
        None => None,
    };
    let noise_path = dir.join(manifest.as_ref().map_or(NOISE_FILE, |m| m.noise_file.as_str()));
    let noise = if noise_path.exists() {
        Some(read_series_csv(&noise_path, None)?)
    } else {
        None
    };
    Ok(LoadedCorpus {
        root: dir.to_path_buf(),
        manifest,
        channels,
        second_monitor,
        noise,
    })
}
