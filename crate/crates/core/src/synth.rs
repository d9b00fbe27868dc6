//! Deterministic synthetic recordings.
//!
//! Stand-ins for measured data: per-channel picture-brightness traces, a
//! monitor model that turns brightness into 8 kHz current and voltage, and a
//! household appliance mix emitted directly as a 50 Hz feature series.
//! Everything is a pure function of its seed.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::{self, FEATURE_NAMES, N_FEATURES, NOMINAL_LINE_HZ};
use crate::par::{self, Exec};
use crate::signals::{FeatureSeries, Waveform, WaveformKind};

pub const DEFAULT_SEED: u64 = 2014;
pub const DEFAULT_CHANNELS: usize = 20;
pub const DEFAULT_CLIP_S: f64 = 60.0;
/// One hour of household data, slightly short so that only 59 one-minute
/// scenarios fit without padding.
pub const DEFAULT_NOISE_S: f64 = 3595.0;
pub const DEFAULT_MAX_APPLIANCES: usize = 26;

const CONTENT_RATE_HZ: f64 = 50.0;
const MEAN_SCENE_S: f64 = 4.0;
const MAX_CONTENT_CORRELATION: f64 = 0.5;

/// Derive an independent seed for a named stream.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    // FNV-1a over the tag, then a splitmix64 finaliser
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = base ^ h.rotate_left(17) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn rng_for(base: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag, index))
}

/// Electrical behaviour of one monitor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorProfile {
    pub name: String,
    /// Power at mid-grey picture, W.
    pub mean_power: f64,
    /// Extra power per unit of picture brightness, W.
    pub brightness_gain: f64,
    /// 3rd/5th/7th harmonic current relative to the fundamental.
    pub ripple: [f64; 3],
    /// Input-stage low-pass time constant, s.
    pub smoothing_tau: f64,
    /// Fundamental current phase lag behind voltage, rad (negative leads).
    pub displacement_angle: f64,
    /// Phase offsets of the injected harmonics, rad.
    pub harmonic_phase: [f64; 3],
}

impl MonitorProfile {
    /// 23" LCD test screen, 31.7 W.
    pub fn acer_p235h() -> Self {
        Self {
            name: "Acer P235H".into(),
            mean_power: 31.7,
            brightness_gain: 30.0,
            ripple: [0.62, 0.34, 0.16],
            smoothing_tau: 0.04,
            displacement_angle: -0.18,
            harmonic_phase: [PI, 0.0, PI],
        }
    }

    /// 24" LED reference screen, 24.9 W.
    pub fn iiyama_b2483hs() -> Self {
        Self {
            name: "Iiyama B2483HS".into(),
            mean_power: 24.9,
            brightness_gain: 24.0,
            ripple: [0.55, 0.29, 0.21],
            smoothing_tau: 0.07,
            displacement_angle: -0.12,
            harmonic_phase: [PI, 0.0, PI],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_power > 0.0) {
            return Err(crate::Error::arg("monitor mean power must be positive"));
        }
        if self.ripple.iter().any(|r| !(*r >= 0.0)) || !(self.smoothing_tau >= 0.0) {
            return Err(crate::Error::arg("monitor ripple and smoothing must be non-negative"));
        }
        Ok(())
    }
}

/// Brightness trace standing in for the video played on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelContent {
    pub channel_id: u32,
    /// Picture brightness in [0, 1] at 50 Hz.
    pub luma: Vec<f64>,
    pub duration_s: f64,
}

/// Measurement chain constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sample_rate_hz: f64,
    pub mains_vrms: f64,
    /// Peak deviation of the slow line-frequency wander, Hz.
    pub frequency_wander_hz: f64,
    /// Current measurement noise, dB below the signal RMS.
    pub snr_db: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: features::INTERNAL_SAMPLE_RATE_HZ,
            mains_vrms: 230.0,
            frequency_wander_hz: 0.05,
            snr_db: 60.0,
        }
    }
}

pub fn gen_channel_content(channel_id: u32, seed: u64) -> ChannelContent {
    gen_channel_content_with(channel_id, seed, DEFAULT_CLIP_S, 0)
}

/// Scene-cut brightness model: Poisson cuts with a 4 s mean gap, a random
/// level and linear drift per scene, and a small AR(1) motion term.
pub fn gen_channel_content_with(
    channel_id: u32,
    seed: u64,
    duration_s: f64,
    attempt: u32,
) -> ChannelContent {
    let mut rng = rng_for(seed, "content", (u64::from(channel_id) << 16) | u64::from(attempt));
    let n = (duration_s * CONTENT_RATE_HZ).round() as usize;
    let dt = 1.0 / CONTENT_RATE_HZ;
    let gap = Exp::new(1.0 / MEAN_SCENE_S).expect("positive rate");
    let drift = Normal::new(0.0, 0.02).expect("valid sd");
    let unit = Normal::new(0.0, 1.0).expect("valid sd");
    let ar = (-dt / 0.4f64).exp();
    let motion_sd = 0.04;

    let mut luma = Vec::with_capacity(n);
    let mut next_cut = 0usize;
    let mut scene_start = 0usize;
    let (mut level, mut slope) = (0.5, 0.0);
    let mut motion = 0.0;
    for k in 0..n {
        if k >= next_cut {
            scene_start = k;
            level = rng.random_range(0.1..0.9);
            slope = drift.sample(&mut rng);
            let len = (gap.sample(&mut rng) * CONTENT_RATE_HZ).round().max(5.0) as usize;
            next_cut = k + len;
        }
        motion = ar * motion + motion_sd * (1.0 - ar * ar).sqrt() * unit.sample(&mut rng);
        let t = (k - scene_start) as f64 * dt;
        luma.push((level + slope * t + motion).clamp(0.0, 1.0));
    }
    ChannelContent {
        channel_id,
        luma,
        duration_s,
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Channels `1..=count`, each regenerated until its correlation with every
/// earlier channel is below 0.5.
pub fn gen_channel_contents(count: usize, seed: u64, duration_s: f64) -> Vec<ChannelContent> {
    let mut out: Vec<ChannelContent> = Vec::with_capacity(count);
    for id in 1..=count as u32 {
        let mut attempt = 0;
        let content = loop {
            let c = gen_channel_content_with(id, seed, duration_s, attempt);
            let ok = out
                .iter()
                .all(|o| pearson(&o.luma, &c.luma) < MAX_CONTENT_CORRELATION);
            if ok || attempt >= 64 {
                if !ok {
                    log::warn!("channel {id}: no decorrelated content after {attempt} attempts");
                }
                break c;
            }
            attempt += 1;
        };
        out.push(content);
    }
    out
}

/// Render `content` as played on `profile`: mains voltage and the current
/// drawn, both at the configured sample rate.
pub fn render_monitor(content: &ChannelContent, profile: &MonitorProfile, seed: u64) -> (Waveform, Waveform) {
    render_monitor_with(content, profile, seed, &SynthConfig::default())
}

pub fn render_monitor_with(
    content: &ChannelContent,
    profile: &MonitorProfile,
    seed: u64,
    cfg: &SynthConfig,
) -> (Waveform, Waveform) {
    render_monitor_take(content, profile, seed, 0, cfg)
}

/// One metering of a playback. The mains trajectory depends on `seed` only;
/// `take` selects an independent realisation of the current-sensor noise, so
/// two takes are repeat measurements of the same playback.
pub fn render_monitor_take(
    content: &ChannelContent,
    profile: &MonitorProfile,
    seed: u64,
    take: u64,
    cfg: &SynthConfig,
) -> (Waveform, Waveform) {
    let mut rng = rng_for(seed, "render", u64::from(content.channel_id));
    let mut meter = rng_for(derive_seed(seed, "meter", take), "meter", u64::from(content.channel_id));
    let fs = cfg.sample_rate_hz;
    let dt = 1.0 / fs;
    let n = (content.duration_s * fs).round() as usize;
    let v_peak = cfg.mains_vrms * SQRT_2;

    let (p1, p2) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
    let (t1, t2) = (rng.random_range(20.0..60.0), rng.random_range(5.0..15.0));
    let mut theta: f64 = rng.random_range(0.0..2.0 * PI);

    let alpha = if profile.smoothing_tau > 0.0 {
        1.0 - (-dt / profile.smoothing_tau).exp()
    } else {
        1.0
    };
    let cos_d = profile.displacement_angle.cos();
    let luma_at = |k: usize| {
        let idx = ((k as f64 * dt) * CONTENT_RATE_HZ) as usize;
        content.luma[idx.min(content.luma.len().saturating_sub(1))]
    };
    let mut filtered = content.luma.first().copied().unwrap_or(0.5);

    let mut i = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        filtered += alpha * (luma_at(k) - filtered);
        let power = (profile.mean_power + profile.brightness_gain * (filtered - 0.5)).max(0.0);
        let amp = 2.0 * power / (v_peak * cos_d);
        let phase = theta - profile.displacement_angle;
        let modulation = 0.8 + 0.4 * filtered;
        let mut current = amp * phase.sin();
        for (h, (r, psi)) in [3.0, 5.0, 7.0]
            .iter()
            .zip(profile.ripple.iter().zip(profile.harmonic_phase))
        {
            current += amp * r * modulation * (h * phase + psi).sin();
        }
        i.push(current);
        v.push(v_peak * theta.sin());

        let wander = 0.6 * (2.0 * PI * t / t1 + p1).sin() + 0.4 * (2.0 * PI * t / t2 + p2).sin();
        theta += 2.0 * PI * (NOMINAL_LINE_HZ + cfg.frequency_wander_hz * wander) * dt;
        if theta > 2.0 * PI {
            theta -= 2.0 * PI;
        }
    }

    let rms = (i.iter().map(|x| x * x).sum::<f64>() / n.max(1) as f64).sqrt();
    let sd = rms * 10f64.powf(-cfg.snr_db / 20.0);
    if sd > 0.0 {
        let noise = Normal::new(0.0, sd).expect("positive sd");
        for x in &mut i {
            *x += noise.sample(&mut meter);
        }
    }
    (
        Waveform::new(i, fs, WaveformKind::Current).expect("finite synthetic samples"),
        Waveform::new(v, fs, WaveformKind::Voltage).expect("finite synthetic samples"),
    )
}

#[derive(Debug, Clone, Copy)]
struct Signature {
    power_factor: f64,
    crest: f64,
    thd: f64,
    hd: [f64; 3],
}

const RESISTIVE: Signature = Signature {
    power_factor: 1.0,
    crest: SQRT_2,
    thd: 0.02,
    hd: [0.015, 0.01, 0.005],
};
const MOTOR: Signature = Signature {
    power_factor: 0.8,
    crest: 1.5,
    thd: 0.12,
    hd: [0.09, 0.06, 0.03],
};
const ELECTRONIC: Signature = Signature {
    power_factor: 0.95,
    crest: 2.6,
    thd: 0.85,
    hd: [0.65, 0.4, 0.2],
};

#[derive(Debug, Clone, Copy)]
enum Behaviour {
    /// Two-level thermostatic cycling with fixed on/off durations.
    Cycler { on_s: f64, off_s: f64, standby: f64 },
    /// Random on/off with exponential holding times.
    Switched { mean_on_s: f64, mean_off_s: f64 },
    /// Always on with white jitter.
    Base { jitter: f64 },
    /// Switched, with a slowly wandering draw while on.
    Wandering { mean_on_s: f64, mean_off_s: f64, spread: f64 },
}

#[derive(Debug, Clone, Copy)]
struct ApplianceKind {
    power: (f64, f64),
    behaviour: Behaviour,
    signature: Signature,
}

fn catalogue(slot: usize) -> ApplianceKind {
    use Behaviour::*;
    let fridge = ApplianceKind {
        power: (90.0, 130.0),
        behaviour: Cycler { on_s: 1100.0, off_s: 1600.0, standby: 2.0 },
        signature: MOTOR,
    };
    let base = ApplianceKind {
        power: (60.0, 110.0),
        behaviour: Base { jitter: 0.1 },
        signature: ELECTRONIC,
    };
    let rotation = [
        ApplianceKind { power: (1800.0, 2200.0), behaviour: Switched { mean_on_s: 180.0, mean_off_s: 1500.0 }, signature: RESISTIVE },
        ApplianceKind { power: (10.0, 60.0), behaviour: Switched { mean_on_s: 900.0, mean_off_s: 900.0 }, signature: ELECTRONIC },
        ApplianceKind { power: (40.0, 150.0), behaviour: Wandering { mean_on_s: 1800.0, mean_off_s: 900.0, spread: 0.25 }, signature: ELECTRONIC },
        ApplianceKind { power: (800.0, 2000.0), behaviour: Cycler { on_s: 200.0, off_s: 420.0, standby: 0.0 }, signature: RESISTIVE },
        ApplianceKind { power: (900.0, 1300.0), behaviour: Switched { mean_on_s: 120.0, mean_off_s: 2400.0 }, signature: ELECTRONIC },
        ApplianceKind { power: (200.0, 500.0), behaviour: Wandering { mean_on_s: 1500.0, mean_off_s: 2400.0, spread: 1.25 }, signature: MOTOR },
        ApplianceKind { power: (70.0, 100.0), behaviour: Cycler { on_s: 900.0, off_s: 1800.0, standby: 1.0 }, signature: MOTOR },
        ApplianceKind { power: (5.0, 25.0), behaviour: Switched { mean_on_s: 600.0, mean_off_s: 600.0 }, signature: ELECTRONIC },
        ApplianceKind { power: (30.0, 60.0), behaviour: Switched { mean_on_s: 1200.0, mean_off_s: 1200.0 }, signature: MOTOR },
    ];
    match slot {
        0 => fridge,
        1 => base,
        s => rotation[(s - 2) % rotation.len()],
    }
}

fn appliance_power(kind: &ApplianceKind, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dt = 1.0 / NOMINAL_LINE_HZ;
    let rated = rng.random_range(kind.power.0..kind.power.1);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    match kind.behaviour {
        Behaviour::Base { jitter: sd } => (0..n).map(|_| rated + sd * jitter.sample(rng)).collect(),
        Behaviour::Cycler { on_s, off_s, standby } => {
            let on = rng.random_range(0.8..1.2) * on_s;
            let off = rng.random_range(0.8..1.2) * off_s;
            let offset = rng.random_range(0.0..on + off);
            (0..n)
                .map(|k| {
                    let t = (k as f64 * dt + offset) % (on + off);
                    if t < on { rated } else { standby }
                })
                .collect()
        }
        Behaviour::Switched { mean_on_s, mean_off_s } | Behaviour::Wandering { mean_on_s, mean_off_s, .. } => {
            let spread = match kind.behaviour {
                Behaviour::Wandering { spread, .. } => spread,
                _ => 0.0,
            };
            let on_d = Exp::new(1.0 / mean_on_s).expect("positive rate");
            let off_d = Exp::new(1.0 / mean_off_s).expect("positive rate");
            let mut on = rng.random_bool(mean_on_s / (mean_on_s + mean_off_s));
            let mut remaining = (if on { on_d.sample(rng) } else { off_d.sample(rng) } / dt) as usize;
            let ar = (-dt / 2.0f64).exp();
            let mut wander = 0.0;
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                while remaining == 0 {
                    on = !on;
                    remaining = (if on { on_d.sample(rng) } else { off_d.sample(rng) } / dt).max(1.0) as usize;
                }
                remaining -= 1;
                wander = ar * wander + spread * (1.0 - ar * ar).sqrt() * jitter.sample(rng);
                out.push(if on { (rated + wander).max(0.0) } else { 0.0 });
            }
            out
        }
    }
}

/// Household appliance mix as a 19-row feature series at 50 Hz.
///
/// Slot 0 is a thermostatic cycler and slot 1 an always-on base load; later
/// slots rotate through kettles, lights, computers, heaters and motors.
pub fn gen_household_noise(seed: u64, duration_s: f64, max_appliances: usize) -> FeatureSeries {
    let n = (duration_s * NOMINAL_LINE_HZ).round() as usize;
    let slots = max_appliances.max(1);
    let powers: Vec<(Vec<f64>, Signature)> = (0..slots)
        .map(|slot| {
            let mut rng = rng_for(seed, "appliance", slot as u64);
            let kind = catalogue(slot);
            (appliance_power(&kind, n, &mut rng), kind.signature)
        })
        .collect();

    let v_rms = SynthConfig::default().mains_vrms;
    let mut rows = vec![vec![0.0; n]; N_FEATURES];
    let idx = |name: &str| FEATURE_NAMES.iter().position(|f| *f == name).expect("known feature");
    let (ip, iq, is, ii, irms) = (idx("P"), idx("Q"), idx("S"), idx("I"), idx("i_rms"));
    let (icf, ithd, ih3, ih5, ih7) = (idx("crest_factor_i"), idx("iTHD"), idx("iHD3"), idx("iHD5"), idx("iHD7"));
    for k in 0..n {
        let (mut p, mut q, mut s) = (0.0, 0.0, 0.0);
        let mut weighted = [0.0; 5];
        for (trace, sig) in &powers {
            let pk = trace[k];
            if pk <= 0.0 {
                continue;
            }
            let sk = pk / sig.power_factor;
            p += pk;
            q += (sk * sk - pk * pk).max(0.0).sqrt();
            s += sk;
            for (w, x) in weighted.iter_mut().zip([sig.crest, sig.thd, sig.hd[0], sig.hd[1], sig.hd[2]]) {
                *w += sk * x;
            }
        }
        rows[ip][k] = p;
        rows[iq][k] = q;
        rows[is][k] = s;
        rows[ii][k] = s / v_rms;
        rows[irms][k] = s / v_rms;
        for (row, w) in [icf, ithd, ih3, ih5, ih7].into_iter().zip(weighted) {
            rows[row][k] = if s > 0.0 { w / s } else { 0.0 };
        }
    }
    rows[idx("peak_voltage")] = vec![v_rms * SQRT_2; n];
    rows[idx("v_rms")] = vec![v_rms; n];
    rows[idx("V")] = vec![v_rms; n];
    rows[idx("f")] = vec![NOMINAL_LINE_HZ; n];
    rows[idx("phi")] = (0..n).map(|k| rows[iq][k].atan2(rows[ip][k])).collect();
    FeatureSeries::new(rows, features::feature_names(), NOMINAL_LINE_HZ).expect("fixed layout")
}

/// Settings for a complete synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub channels: usize,
    pub seed: u64,
    pub clip_s: f64,
    pub noise_s: f64,
    pub max_appliances: usize,
    pub second_monitor: bool,
    pub profile_a: MonitorProfile,
    pub profile_b: MonitorProfile,
    pub synth: SynthConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            channels: DEFAULT_CHANNELS,
            seed: DEFAULT_SEED,
            clip_s: DEFAULT_CLIP_S,
            noise_s: DEFAULT_NOISE_S,
            max_appliances: DEFAULT_MAX_APPLIANCES,
            second_monitor: true,
            profile_a: MonitorProfile::acer_p235h(),
            profile_b: MonitorProfile::iiyama_b2483hs(),
            synth: SynthConfig::default(),
        }
    }
}

/// Feature series of every channel on both monitors plus the household mix.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub channel_ids: Vec<u32>,
    pub monitor_a: Vec<FeatureSeries>,
    pub monitor_b: Option<Vec<FeatureSeries>>,
    pub noise: FeatureSeries,
}

pub fn build_corpus(cfg: &CorpusConfig, exec: Exec) -> Result<SynthCorpus> {
    cfg.profile_a.validate()?;
    cfg.profile_b.validate()?;
    let contents = gen_channel_contents(cfg.channels, cfg.seed, cfg.clip_s);
    let render = |content: &ChannelContent, profile: &MonitorProfile, tag: &str| {
        let seed = derive_seed(cfg.seed, tag, u64::from(content.channel_id));
        let (i, v) = render_monitor_with(content, profile, seed, &cfg.synth);
        features::extract_series_with(&i, &v, Exec::Sequential)
    };
    let monitor_a = par::try_map(exec, &contents, |c| render(c, &cfg.profile_a, "monitor-a"))?;
    let monitor_b = if cfg.second_monitor {
        Some(par::try_map(exec, &contents, |c| render(c, &cfg.profile_b, "monitor-b"))?)
    } else {
        None
    };
    let noise = gen_household_noise(derive_seed(cfg.seed, "noise", 0), cfg.noise_s, cfg.max_appliances);
    Ok(SynthCorpus {
        channel_ids: contents.iter().map(|c| c.channel_id).collect(),
        monitor_a,
        monitor_b,
        noise,
    })
}
