use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::matching::{Algorithm, MatchParams, Sequence};
use crate::par::{self, Exec};
use crate::pipeline::{self, ChannelId, Class, NormStats, PreparedWindows, ReferenceSet};
use crate::signals::{frame_block, remove_dc, FeatureSeries};
use crate::synth::derive_seed;

pub const DEFAULT_WINDOW: usize = 300;
pub const FULL_SCALE_WINDOW: usize = 3000;
pub const DEFAULT_SCENARIOS: usize = 59;

/// Evaluation regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// Noiseless, references from the same monitor.
    A,
    /// Household noise added, same monitor.
    B,
    /// Household noise added, references from a different monitor.
    C,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Protocol::A),
            "B" => Ok(Protocol::B),
            "C" => Ok(Protocol::C),
            other => Err(Error::arg(format!("unknown protocol {other:?}"))),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::A => "A",
            Protocol::B => "B",
            Protocol::C => "C",
        })
    }
}

/// A window of the household noise recording added to every test signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseScenario {
    pub scenario_id: usize,
    pub offset: usize,
    pub duration: usize,
}

/// Noise windows of `duration` samples: back to back when `count` of them
/// fit in the recording, seeded uniform offsets otherwise.
pub fn plan_scenarios(corpus_len: usize, duration: usize, count: usize, seed: u64) -> Result<Vec<NoiseScenario>> {
    if duration == 0 || count == 0 {
        return Err(Error::arg("scenario duration and count must be positive"));
    }
    if duration > corpus_len {
        return Err(Error::arg(format!(
            "noise recording has {corpus_len} samples, scenarios need {duration}"
        )));
    }
    let fits = count.checked_mul(duration).is_some_and(|n| n <= corpus_len);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "scenarios", count as u64));
    Ok((0..count)
        .map(|i| NoiseScenario {
            scenario_id: i,
            offset: if fits { i * duration } else { rng.random_range(0..=corpus_len - duration) },
            duration,
        })
        .collect())
}

/// Multiply the load magnitudes (powers and currents) of `noise` by `gain`.
pub fn scale_load(noise: &FeatureSeries, gain: f64) -> Result<FeatureSeries> {
    if !(gain >= 0.0 && gain.is_finite()) {
        return Err(Error::arg(format!("noise gain must be finite and >= 0, got {gain}")));
    }
    let rows = noise
        .names()
        .iter()
        .zip(noise.values())
        .map(|(name, row)| match name.as_str() {
            "P" | "Q" | "S" | "I" | "i_rms" => row.iter().map(|x| x * gain).collect(),
            _ => row.clone(),
        })
        .collect();
    FeatureSeries::new(rows, noise.names().to_vec(), noise.rate_hz())
}

/// Add the noise window of `scenario` to `tv`.
pub fn mix_noise(tv: &FeatureSeries, corpus: &FeatureSeries, scenario: &NoiseScenario) -> Result<FeatureSeries> {
    if tv.rate_hz() != corpus.rate_hz() {
        return Err(Error::arg(format!(
            "noise sampled at {} Hz, signal at {} Hz; downsample first",
            corpus.rate_hz(),
            tv.rate_hz()
        )));
    }
    if scenario.duration < tv.len() || scenario.offset + scenario.duration > corpus.len() {
        return Err(Error::arg(format!(
            "scenario {} window {}..{} does not cover a {}-sample signal inside {} noise samples",
            scenario.scenario_id,
            scenario.offset,
            scenario.offset + scenario.duration,
            tv.len(),
            corpus.len()
        )));
    }
    let slice = corpus.select(tv.names())?.slice(scenario.offset, tv.len())?;
    pipeline::aggregate(tv, &[slice])
}

/// Test signals and household noise.
#[derive(Debug, Clone)]
pub struct EvalCorpus {
    pub signals: Vec<(ChannelId, FeatureSeries)>,
    pub noise: Option<FeatureSeries>,
}

/// Run settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub window_w: usize,
    /// Frame hop; `None` means non-overlapping frames.
    pub hop: Option<usize>,
    pub scenarios: usize,
    pub noise_gain: f64,
    pub features: Vec<String>,
    pub seed: u64,
    /// Add an all-zero test signal labelled no-TV.
    pub include_no_tv: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            window_w: DEFAULT_WINDOW,
            hop: None,
            scenarios: DEFAULT_SCENARIOS,
            noise_gain: 1.0,
            features: vec!["P".into()],
            seed: crate::synth::DEFAULT_SEED,
            include_no_tv: true,
            exec: Exec::default(),
        }
    }
}

impl EvalConfig {
    pub fn hop(&self) -> usize {
        self.hop.unwrap_or(self.window_w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_w == 0 || self.hop() == 0 {
            return Err(Error::Config("window and hop must be positive".into()));
        }
        if self.scenarios == 0 {
            return Err(Error::Config("scenario count must be positive".into()));
        }
        if !(self.noise_gain >= 0.0 && self.noise_gain.is_finite()) {
            return Err(Error::Config(format!("noise gain must be >= 0, got {}", self.noise_gain)));
        }
        if self.features.is_empty() {
            return Err(Error::Config("feature subset is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario_id: usize,
    pub offset: usize,
    pub acc: f64,
    pub f1: f64,
    pub plain_accuracy: f64,
}

/// Outcome of one protocol run. Contains no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub algorithm: Algorithm,
    pub params: MatchParams,
    pub config: EvalConfig,
    pub confusion: ConfusionMatrix,
    /// Macro one-vs-rest accuracy.
    pub acc: f64,
    /// Macro one-vs-rest F1.
    pub f1: f64,
    /// Share of frames assigned to their true class.
    pub plain_accuracy: f64,
    pub n_frames: u64,
    pub per_scenario: Vec<ScenarioResult>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Domain(e.to_string()))
    }
}

/// One frame's decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FrameDecision {
    pub truth: usize,
    pub predicted: usize,
    /// Distance to the true reference, when the truth is a channel.
    pub true_score: Option<f64>,
}

pub(crate) struct Prepared<'a> {
    refs: ReferenceSet,
    stats: NormStats,
    items: Vec<(Class, FeatureSeries)>,
    noise: Option<FeatureSeries>,
    windows: BTreeMap<usize, PreparedWindows>,
    outcomes: Vec<Class>,
    pub scenarios: Vec<NoiseScenario>,
    noisy: bool,
    algorithm: Algorithm,
    params: &'a MatchParams,
    window: usize,
    hop: usize,
}

pub(crate) fn prepare<'a>(
    protocol: Protocol,
    corpus: &EvalCorpus,
    refs_same: &ReferenceSet,
    refs_other: Option<&ReferenceSet>,
    algorithm: Algorithm,
    params: &'a MatchParams,
    cfg: &EvalConfig,
) -> Result<Prepared<'a>> {
    cfg.validate()?;
    params.validate()?;
    let refs = match protocol {
        Protocol::C => refs_other.ok_or_else(|| {
            Error::Config("protocol C needs reference recordings from a second monitor".into())
        })?,
        _ => refs_same,
    };
    if corpus.signals.is_empty() {
        return Err(Error::EmptyInput("no test signals".into()));
    }
    let selected = refs.select(&cfg.features)?;
    // one affine map from the same-monitor references, applied everywhere
    let stats = if cfg.features.len() > 1 {
        NormStats::from_references(&refs_same.select(&cfg.features)?)?
    } else {
        NormStats::identity(selected.feature_names())
    };
    let refs = selected.normalize(&stats)?;

    let mut items: Vec<(Class, FeatureSeries)> = Vec::with_capacity(corpus.signals.len() + 1);
    for (id, s) in &corpus.signals {
        if refs.get(*id).is_none() {
            return Err(Error::arg(format!("test channel {id} has no reference")));
        }
        items.push((Class::Channel(*id), s.clone()));
    }
    if cfg.include_no_tv {
        items.push((Class::NoTv, corpus.signals[0].1.zeros_like()));
    }
    let outcomes = refs.outcomes();

    let noisy = protocol != Protocol::A && cfg.noise_gain > 0.0;
    let longest = items.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let (noise, scenarios) = if noisy {
        let raw = corpus
            .noise
            .as_ref()
            .ok_or_else(|| Error::Config(format!("protocol {protocol} needs a household noise recording")))?;
        let noise = scale_load(raw, cfg.noise_gain)?;
        let scenarios = plan_scenarios(noise.len(), longest, cfg.scenarios, cfg.seed)?;
        (Some(noise), scenarios)
    } else {
        let scenarios = (0..cfg.scenarios)
            .map(|i| NoiseScenario {
                scenario_id: i,
                offset: 0,
                duration: 0,
            })
            .collect();
        (None, scenarios)
    };

    let (window, hop) = (cfg.window_w, cfg.hop());
    if longest < window {
        return Err(Error::arg(format!("test signals have {longest} samples, window needs {window}")));
    }
    let mut windows = BTreeMap::new();
    let mut offset = 0;
    while offset + window <= longest {
        windows.insert(offset, PreparedWindows::new(&refs, offset, window)?);
        offset += hop;
    }
    Ok(Prepared {
        refs,
        stats,
        items,
        noise,
        windows,
        outcomes,
        scenarios,
        noisy,
        algorithm,
        params,
        window,
        hop,
    })
}

impl Prepared<'_> {
    fn outcome_index(&self, c: Class) -> usize {
        self.outcomes.iter().position(|&o| o == c).expect("outcome listed")
    }

    pub fn labels(&self) -> Vec<String> {
        self.outcomes.iter().map(Class::label).collect()
    }

    /// Decisions for every frame of test item `item` under `scenario`.
    fn run_unit(&self, scenario: Option<&NoiseScenario>, item: usize) -> Result<Vec<FrameDecision>> {
        let (truth, tv) = &self.items[item];
        let mixed = match (scenario, &self.noise) {
            (Some(s), Some(noise)) => mix_noise(tv, noise, s)?,
            _ => tv.clone(),
        };
        let series = pipeline::normalize_features(&mixed.select(self.refs.feature_names())?, &self.stats)?;
        let truth_idx = self.outcome_index(*truth);
        let true_slot = self.refs.classes().iter().position(|c| c == truth).filter(|_| *truth != Class::NoTv);
        let frames = frame_block(&series, self.window, self.hop)?;
        let mut out = Vec::with_capacity(frames.len());
        for frame in &frames {
            let frame = remove_dc(frame);
            let prepared = self
                .windows
                .get(&frame.start_index())
                .ok_or_else(|| Error::arg(format!("no reference window at offset {}", frame.start_index())))?;
            let seq = Sequence::from_rows(frame.values())?;
            let id = prepared.identify(&seq, self.algorithm, self.params, Exec::Sequential)?;
            out.push(FrameDecision {
                truth: truth_idx,
                predicted: self.outcome_index(id.channel),
                true_score: true_slot.map(|s| id.scores[s]),
            });
        }
        Ok(out)
    }

    /// Decisions of every scenario in `subset` (all when `None`), one
    /// vector per scenario in scenario order.
    pub fn run(&self, subset: Option<&[usize]>, exec: Exec) -> Result<Vec<(NoiseScenario, Vec<FrameDecision>)>> {
        let chosen: Vec<NoiseScenario> = match subset {
            Some(ids) => ids.iter().map(|&i| self.scenarios[i]).collect(),
            None => self.scenarios.clone(),
        };
        let n_items = self.items.len();
        if !self.noisy {
            // without noise every scenario sees the same aggregate
            let units = par::try_map(exec, &(0..n_items).collect::<Vec<_>>(), |&j| self.run_unit(None, j))?;
            let decisions: Vec<FrameDecision> = units.into_iter().flatten().collect();
            return Ok(chosen.into_iter().map(|s| (s, decisions.clone())).collect());
        }
        let units: Vec<(usize, usize)> = (0..chosen.len())
            .flat_map(|s| (0..n_items).map(move |j| (s, j)))
            .collect();
        let results = par::try_map(exec, &units, |&(s, j)| self.run_unit(Some(&chosen[s]), j))?;
        let mut per: Vec<Vec<FrameDecision>> = vec![Vec::new(); chosen.len()];
        for ((s, _), r) in units.iter().zip(results) {
            per[*s].extend(r);
        }
        Ok(chosen.into_iter().zip(per).collect())
    }
}

pub(crate) fn build_report(
    protocol: Protocol,
    algorithm: Algorithm,
    params: &MatchParams,
    cfg: &EvalConfig,
    labels: Vec<String>,
    runs: &[(NoiseScenario, Vec<FrameDecision>)],
) -> Result<EvalReport> {
    let mut total = ConfusionMatrix::zeros(labels.clone());
    let mut per_scenario = Vec::with_capacity(runs.len());
    for (s, decisions) in runs {
        let mut m = ConfusionMatrix::zeros(labels.clone());
        for d in decisions {
            m.record(d.truth, d.predicted);
        }
        per_scenario.push(ScenarioResult {
            scenario_id: s.scenario_id,
            offset: s.offset,
            acc: m.accuracy()?,
            f1: m.f1()?,
            plain_accuracy: m.plain_accuracy()?,
        });
        total.merge(&m)?;
    }
    Ok(EvalReport {
        protocol,
        algorithm,
        params: *params,
        config: cfg.clone(),
        acc: total.accuracy()?,
        f1: total.f1()?,
        plain_accuracy: total.plain_accuracy()?,
        n_frames: total.total(),
        confusion: total,
        per_scenario,
    })
}

/// Identify every frame of every test signal under every noise scenario
/// and tabulate the decisions.
pub fn run_protocol(
    protocol: Protocol,
    corpus: &EvalCorpus,
    refs_same: &ReferenceSet,
    refs_other: Option<&ReferenceSet>,
    algorithm: Algorithm,
    params: &MatchParams,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let prepared = prepare(protocol, corpus, refs_same, refs_other, algorithm, params, cfg)?;
    let runs = prepared.run(None, cfg.exec)?;
    build_report(protocol, algorithm, params, cfg, prepared.labels(), &runs)
}

/// Seeded subset of `fraction` of the scenario ids, sorted.
pub fn bootstrap_subset(scenarios: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(format!("bootstrap fraction must be in (0, 1), got {fraction}")));
    }
    let n = ((scenarios as f64 * fraction).round() as usize).clamp(1, scenarios);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "bootstrap", scenarios as u64));
    let mut ids = rand::seq::index::sample(&mut rng, scenarios, n).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// No-TV threshold: the `quantile` of true-class distances over a bootstrap
/// subset of the scenarios.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_no_tv_threshold(
    protocol: Protocol,
    corpus: &EvalCorpus,
    refs_same: &ReferenceSet,
    refs_other: Option<&ReferenceSet>,
    algorithm: Algorithm,
    params: &MatchParams,
    cfg: &EvalConfig,
    fraction: f64,
    quantile: f64,
) -> Result<f64> {
    let prepared = prepare(protocol, corpus, refs_same, refs_other, algorithm, params, cfg)?;
    let subset = bootstrap_subset(prepared.scenarios.len(), fraction, cfg.seed)?;
    let runs = prepared.run(Some(&subset), cfg.exec)?;
    let distances: Vec<f64> = runs
        .iter()
        .flat_map(|(_, d)| d.iter().filter_map(|x| x.true_score))
        .collect();
    pipeline::calibrate_threshold(&distances, quantile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::NoTvPolicy;

    #[test]
    fn scenario_planning() {
        let s = plan_scenarios(59 * 3000, 3000, 59, 1).unwrap();
        assert_eq!(s.len(), 59);
        for (i, x) in s.iter().enumerate() {
            assert_eq!(x.offset, i * 3000);
        }
        let r = plan_scenarios(59 * 3000, 3000, 60, 1).unwrap();
        assert!(r.iter().all(|x| x.offset + 3000 <= 59 * 3000));
        assert_eq!(r, plan_scenarios(59 * 3000, 3000, 60, 1).unwrap());
        assert!(plan_scenarios(10, 11, 1, 0).is_err());
    }

    #[test]
    fn mixing_adds_power_and_refuses_overrun() {
        let tv = FeatureSeries::single("P", vec![30.0; 4], 50.0).unwrap();
        let noise = FeatureSeries::single("P", (0..10).map(f64::from).collect(), 50.0).unwrap();
        let s = NoiseScenario { scenario_id: 0, offset: 0, duration: 4 };
        assert_eq!(mix_noise(&tv, &noise, &s).unwrap().row("P").unwrap(), &[30.0, 31.0, 32.0, 33.0]);
        let late = NoiseScenario { scenario_id: 1, offset: 8, duration: 4 };
        assert!(mix_noise(&tv, &noise, &late).is_err());
        let fast = FeatureSeries::single("P", vec![0.0; 10], 100.0).unwrap();
        assert!(mix_noise(&tv, &fast, &s).is_err());
    }

    fn toy() -> (EvalCorpus, ReferenceSet) {
        let signals: Vec<(ChannelId, FeatureSeries)> = (1..=3u32)
            .map(|id| {
                let row = (0..40).map(|k| 30.0 + 8.0 * ((k as f64) * 0.3 * f64::from(id)).sin()).collect();
                (id, FeatureSeries::single("P", row, 50.0).unwrap())
            })
            .collect();
        let noise = FeatureSeries::single("P", (0..400).map(|k| 100.0 + (k % 7) as f64).collect(), 50.0).unwrap();
        let refs = ReferenceSet::new(signals.clone(), NoTvPolicy::ExtraClass).unwrap();
        (EvalCorpus { signals, noise: Some(noise) }, refs)
    }

    #[test]
    fn noiseless_is_perfect_and_gain_zero_matches_it() {
        let (corpus, refs) = toy();
        let cfg = EvalConfig { window_w: 20, scenarios: 3, ..Default::default() };
        let p = MatchParams::default();
        let a = run_protocol(Protocol::A, &corpus, &refs, None, Algorithm::Dtw, &p, &cfg).unwrap();
        assert_eq!(a.acc, 1.0);
        assert_eq!(a.n_frames, 3 * 4 * 2);
        let cfg0 = EvalConfig { noise_gain: 0.0, ..cfg.clone() };
        let b = run_protocol(Protocol::B, &corpus, &refs, None, Algorithm::Dtw, &p, &cfg0).unwrap();
        assert_eq!(a.confusion, b.confusion);
        assert_eq!(a.per_scenario, b.per_scenario);
    }

    #[test]
    fn protocol_c_requires_second_references() {
        let (corpus, refs) = toy();
        let cfg = EvalConfig { window_w: 20, scenarios: 1, ..Default::default() };
        let err = run_protocol(Protocol::C, &corpus, &refs, None, Algorithm::Dtw, &MatchParams::default(), &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn bootstrap_subset_is_half() {
        let s = bootstrap_subset(59, 0.5, 3).unwrap();
        assert_eq!(s.len(), 30);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(bootstrap_subset(10, 1.0, 0).is_err());
    }

    #[test]
    fn threshold_calibration_runs() {
        let (corpus, refs) = toy();
        let cfg = EvalConfig { window_w: 20, scenarios: 4, ..Default::default() };
        let theta = calibrate_no_tv_threshold(
            Protocol::B, &corpus, &refs, None, Algorithm::Dtw, &MatchParams::default(), &cfg, 0.5, 0.99,
        )
        .unwrap();
        assert!(theta >= 0.0);
    }
}
