//! Channel identification against a reference set.
//!
//! A test frame is DC-removed and compared with the window of every
//! reference at the same offset, cut and DC-removed the same way. The
//! decision is the argmin of the distances; the no-TV outcome is either an
//! extra all-zero reference or a threshold on the best distance.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{self, Algorithm, MatchParams, Sequence};
use crate::par::{self, Exec};
use crate::signals::{remove_dc_rows, FeatureSeries, Frame};

pub type ChannelId = u32;

/// Decision outcome. Orders channels by id with the no-TV class last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Channel(ChannelId),
    NoTv,
}

impl Class {
    pub fn label(&self) -> String {
        match self {
            Class::Channel(id) => format!("ch{id:02}"),
            Class::NoTv => "no_tv".to_string(),
        }
    }
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// How the "nothing playing" outcome is decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoTvPolicy {
    /// A flat reference competes in the argmin.
    #[default]
    ExtraClass,
    /// No-TV whenever the best channel distance exceeds `theta`.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub id: ChannelId,
    pub series: FeatureSeries,
}

/// Reference recordings of every channel, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    references: Vec<Reference>,
    policy: NoTvPolicy,
}

impl ReferenceSet {
    pub fn new(references: Vec<(ChannelId, FeatureSeries)>, policy: NoTvPolicy) -> Result<Self> {
        if references.is_empty() {
            return Err(Error::arg("reference set is empty"));
        }
        let mut references: Vec<Reference> = references
            .into_iter()
            .map(|(id, series)| Reference { id, series })
            .collect();
        references.sort_by_key(|r| r.id);
        if let Some(w) = references.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::arg(format!("duplicate reference channel {}", w[0].id)));
        }
        let first = &references[0].series;
        for r in &references[1..] {
            if r.series.names() != first.names() {
                return Err(Error::arg(format!(
                    "reference {} has feature order {:?}, expected {:?}",
                    r.id,
                    r.series.names(),
                    first.names()
                )));
            }
            if r.series.rate_hz() != first.rate_hz() {
                return Err(Error::arg(format!(
                    "reference {} sampled at {} Hz, expected {}",
                    r.id,
                    r.series.rate_hz(),
                    first.rate_hz()
                )));
            }
        }
        if let NoTvPolicy::Threshold(theta) = policy {
            if !(theta >= 0.0) {
                return Err(Error::arg(format!("no-TV threshold must be >= 0, got {theta}")));
            }
        }
        Ok(Self { references, policy })
    }

    pub fn references(&self) -> &[Reference] {
        &self.references
    }

    pub fn policy(&self) -> NoTvPolicy {
        self.policy
    }

    pub fn with_policy(&self, policy: NoTvPolicy) -> Result<Self> {
        let refs = self.references.iter().map(|r| (r.id, r.series.clone())).collect();
        Self::new(refs, policy)
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    pub fn ids(&self) -> Vec<ChannelId> {
        self.references.iter().map(|r| r.id).collect()
    }

    pub fn get(&self, id: ChannelId) -> Option<&FeatureSeries> {
        self.references.iter().find(|r| r.id == id).map(|r| &r.series)
    }

    pub fn feature_names(&self) -> &[String] {
        self.references[0].series.names()
    }

    pub fn rate_hz(&self) -> f64 {
        self.references[0].series.rate_hz()
    }

    /// Shortest reference, in samples.
    pub fn min_len(&self) -> usize {
        self.references.iter().map(|r| r.series.len()).min().unwrap_or(0)
    }

    /// Decision classes in score order: channels by id, then no-TV when it
    /// competes as an extra class.
    pub fn classes(&self) -> Vec<Class> {
        let mut out: Vec<Class> = self.references.iter().map(|r| Class::Channel(r.id)).collect();
        if self.policy == NoTvPolicy::ExtraClass {
            out.push(Class::NoTv);
        }
        out
    }

    /// Every class a decision can produce, including no-TV under both policies.
    pub fn outcomes(&self) -> Vec<Class> {
        let mut out: Vec<Class> = self.references.iter().map(|r| Class::Channel(r.id)).collect();
        out.push(Class::NoTv);
        out
    }

    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        self.map_series(|s| s.select(names))
    }

    pub fn normalize(&self, stats: &NormStats) -> Result<Self> {
        self.map_series(|s| normalize_features(s, stats))
    }

    fn map_series(&self, f: impl Fn(&FeatureSeries) -> Result<FeatureSeries>) -> Result<Self> {
        let refs = self
            .references
            .iter()
            .map(|r| Ok((r.id, f(&r.series)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(refs, self.policy)
    }
}

/// Outcome of matching one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub channel: Class,
    /// Distance to each class of [`ReferenceSet::classes`], in that order.
    pub scores: Vec<f64>,
    pub frame_offset: usize,
}

/// Index of the smallest score; ties go to the earliest entry and NaN never wins.
pub fn argmin(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        match best {
            Some(b) if scores[b].partial_cmp(&s) != Some(Ordering::Greater) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Reference windows cut at one offset, ready to be matched.
#[derive(Debug, Clone)]
pub struct PreparedWindows {
    classes: Vec<Class>,
    windows: Vec<Sequence>,
    policy: NoTvPolicy,
    offset: usize,
    width: usize,
}

impl PreparedWindows {
    pub fn new(refs: &ReferenceSet, offset: usize, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::arg("window width must be positive"));
        }
        let mut windows = Vec::with_capacity(refs.len() + 1);
        for r in refs.references() {
            if offset + width > r.series.len() {
                return Err(Error::arg(format!(
                    "reference {} has {} samples, window needs {}..{}",
                    r.id,
                    r.series.len(),
                    offset,
                    offset + width
                )));
            }
            let mut rows: Vec<Vec<f64>> = r
                .series
                .values()
                .iter()
                .map(|row| row[offset..offset + width].to_vec())
                .collect();
            remove_dc_rows(&mut rows);
            windows.push(Sequence::from_rows(&rows)?);
        }
        if refs.policy() == NoTvPolicy::ExtraClass {
            let zeros = vec![vec![0.0; width]; refs.feature_names().len()];
            windows.push(Sequence::from_rows(&zeros)?);
        }
        Ok(Self {
            classes: refs.classes(),
            windows,
            policy: refs.policy(),
            offset,
            width,
        })
    }

    pub fn classes(&self) -> &[Class] {
        &self.classes
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Match a DC-removed frame laid out as a [`Sequence`].
    pub fn identify(&self, frame: &Sequence, algorithm: Algorithm, params: &MatchParams, exec: Exec) -> Result<Identification> {
        if frame.len() != self.width {
            return Err(Error::arg(format!(
                "frame has {} samples, references prepared for {}",
                frame.len(),
                self.width
            )));
        }
        let scores = par::try_map(exec, &self.windows, |w| {
            Ok::<_, Error>(matching::score(algorithm, frame, w, params)?.as_distance())
        })?;
        let channel = decide(&self.classes, &scores, self.policy)
            .ok_or_else(|| Error::Domain("every match score is NaN".into()))?;
        Ok(Identification {
            channel,
            scores,
            frame_offset: self.offset,
        })
    }
}

fn decide(classes: &[Class], scores: &[f64], policy: NoTvPolicy) -> Option<Class> {
    let best = argmin(scores)?;
    match policy {
        NoTvPolicy::ExtraClass => Some(classes[best]),
        NoTvPolicy::Threshold(theta) if scores[best] > theta => Some(Class::NoTv),
        NoTvPolicy::Threshold(_) => Some(classes[best]),
    }
}

/// Identify the channel playing during `frame`.
pub fn identify(frame: &Frame, refs: &ReferenceSet, algorithm: Algorithm, params: &MatchParams) -> Result<Identification> {
    identify_with(frame, refs, algorithm, params, Exec::default())
}

pub fn identify_with(
    frame: &Frame,
    refs: &ReferenceSet,
    algorithm: Algorithm,
    params: &MatchParams,
    exec: Exec,
) -> Result<Identification> {
    if refs.is_empty() {
        return Err(Error::arg("reference set is empty"));
    }
    if !frame.dc_removed() {
        return Err(Error::arg("frame must be DC-removed before identification"));
    }
    if frame.n_features() != refs.feature_names().len() {
        return Err(Error::arg(format!(
            "frame has {} features, references {}",
            frame.n_features(),
            refs.feature_names().len()
        )));
    }
    params.validate()?;
    let prepared = PreparedWindows::new(refs, frame.start_index(), frame.width())?;
    prepared.identify(&Sequence::from_rows(frame.values())?, algorithm, params, exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Additive,
    Mains,
    PhaseAngle,
    Weighted,
}

fn rule_for(name: &str) -> Rule {
    match name {
        "P" | "Q" | "S" | "I" | "i_rms" => Rule::Additive,
        "V" | "v_rms" | "peak_voltage" | "f" => Rule::Mains,
        "phi" => Rule::PhaseAngle,
        _ => Rule::Weighted,
    }
}

/// Combine the TV feature series with the other household loads.
///
/// Powers and currents add; voltage and frequency come from `tv`, the first
/// source; the phase angle is recomputed from the summed P and Q; the
/// remaining ratios are averaged with apparent-power weights (active power
/// when S is absent). Sources drawing nothing have no weight.
pub fn aggregate(tv: &FeatureSeries, others: &[FeatureSeries]) -> Result<FeatureSeries> {
    for (k, o) in others.iter().enumerate() {
        if o.names() != tv.names() || o.len() != tv.len() || o.rate_hz() != tv.rate_hz() {
            return Err(Error::arg(format!(
                "source {} has shape {}x{} @ {} Hz, expected {}x{} @ {} Hz with the same feature order",
                k + 1,
                o.n_features(),
                o.len(),
                o.rate_hz(),
                tv.n_features(),
                tv.len(),
                tv.rate_hz()
            )));
        }
    }
    if others.is_empty() {
        return Ok(tv.clone());
    }
    let n = tv.len();
    let weight_row = tv.index_of("S").or_else(|| tv.index_of("P"));
    let weight = |s: &FeatureSeries, k: usize| weight_row.map_or(1.0, |w| s.values()[w][k].abs());

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(tv.n_features());
    for (f, name) in tv.names().iter().enumerate() {
        let base = &tv.values()[f];
        let row = match rule_for(name) {
            Rule::Additive => (0..n)
                .map(|k| others.iter().fold(base[k], |acc, o| acc + o.values()[f][k]))
                .collect(),
            Rule::Mains => base.clone(),
            Rule::PhaseAngle | Rule::Weighted => (0..n)
                .map(|k| {
                    let w0 = weight(tv, k);
                    let total = others.iter().fold(w0, |acc, o| acc + weight(o, k));
                    if total == 0.0 {
                        return base[k];
                    }
                    // written as a correction to the TV value so zero-weight
                    // sources leave it bit-identical
                    others.iter().fold(base[k], |acc, o| {
                        let w = weight(o, k);
                        if w == 0.0 {
                            acc
                        } else {
                            acc + w * (o.values()[f][k] - base[k]) / total
                        }
                    })
                })
                .collect(),
        };
        rows.push(row);
    }
    if let (Some(phi), Some(p), Some(q)) = (tv.index_of("phi"), tv.index_of("P"), tv.index_of("Q")) {
        let recomputed: Vec<f64> = (0..n).map(|k| rows[q][k].atan2(rows[p][k])).collect();
        rows[phi] = recomputed;
    }
    FeatureSeries::new(rows, tv.names().to_vec(), tv.rate_hz())
}

/// Per-feature location and scale for z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub names: Vec<String>,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
    /// Features whose scale was zero or invalid and replaced by 1.
    pub flagged: Vec<String>,
}

impl NormStats {
    pub fn new(names: Vec<String>, location: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if names.len() != location.len() || names.len() != scale.len() {
            return Err(Error::arg("normalisation stats have mismatched lengths"));
        }
        let mut flagged = Vec::new();
        let scale = names
            .iter()
            .zip(scale)
            .map(|(n, s)| {
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    log::warn!("feature {n}: scale {s} replaced by 1");
                    flagged.push(n.clone());
                    1.0
                }
            })
            .collect();
        Ok(Self {
            names,
            location,
            scale,
            flagged,
        })
    }

    pub fn identity(names: &[String]) -> Self {
        Self {
            names: names.to_vec(),
            location: vec![0.0; names.len()],
            scale: vec![1.0; names.len()],
            flagged: Vec::new(),
        }
    }

    /// Mean and population standard deviation of each feature pooled over
    /// every sample of every reference.
    pub fn from_references(refs: &ReferenceSet) -> Result<Self> {
        let names = refs.feature_names().to_vec();
        let mut location = Vec::with_capacity(names.len());
        let mut scale = Vec::with_capacity(names.len());
        for f in 0..names.len() {
            let pooled: Vec<f64> = refs
                .references()
                .iter()
                .flat_map(|r| r.series.values()[f].iter().copied())
                .collect();
            let m = crate::signals::mean(&pooled);
            let var = crate::signals::stable_sum(&pooled.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>())
                / pooled.len() as f64;
            location.push(m);
            scale.push(var.sqrt());
        }
        Self::new(names, location, scale)
    }
}

/// Apply `(x - location) / scale` row by row.
pub fn normalize_features(series: &FeatureSeries, stats: &NormStats) -> Result<FeatureSeries> {
    if series.names() != stats.names.as_slice() {
        return Err(Error::arg(format!(
            "series features {:?} do not match normalisation stats {:?}",
            series.names(),
            stats.names
        )));
    }
    let rows = series
        .values()
        .iter()
        .enumerate()
        .map(|(f, row)| {
            let (loc, sc) = (stats.location[f], stats.scale[f]);
            if loc == 0.0 && sc == 1.0 {
                row.clone()
            } else {
                row.iter().map(|x| (x - loc) / sc).collect()
            }
        })
        .collect();
    FeatureSeries::new(rows, series.names().to_vec(), series.rate_hz())
}

/// Linear-interpolated quantile of `distances`, for threshold calibration.
pub fn calibrate_threshold(distances: &[f64], quantile: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::EmptyInput("no distances to calibrate on".into()));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::arg(format!("quantile must be in [0, 1], got {quantile}")));
    }
    let mut xs = distances.to_vec();
    xs.sort_by(f64::total_cmp);
    let pos = quantile * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo]))
}
