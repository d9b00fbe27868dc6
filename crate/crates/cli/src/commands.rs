use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use wattmatch_core::evaluation::{
    self, bootstrap_grid_search, calibrate_no_tv_threshold, default_grid, EvalConfig, EvalCorpus, EvalReport,
    Protocol, DEFAULT_SCENARIOS, DEFAULT_WINDOW, FULL_SCALE_WINDOW,
};
use wattmatch_core::features::{self, FEATURE_NAMES};
use wattmatch_core::io;
use wattmatch_core::pipeline::{self, ChannelId, NoTvPolicy, NormStats, PreparedWindows, ReferenceSet};
use wattmatch_core::ranking::{self, Instance, ReliefConfig};
use wattmatch_core::signals::{downsample, frame_block, remove_dc, FeatureSeries};
use wattmatch_core::synth::{self, CorpusConfig};
use wattmatch_core::{Algorithm, Error, Exec, MatchParams, Metric, Result, Sequence};

use crate::config::FileConfig;
use crate::{EvaluateArgs, ExtractArgs, MatchArgs, MatchOpts, RankArgs, ReportArgs, SynthArgs};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn synth(a: &SynthArgs, file: &FileConfig) -> Result<()> {
    let d = CorpusConfig::default();
    let second = file.pick(None, "second-monitor", true)? && !a.no_second_monitor;
    let cfg = CorpusConfig {
        channels: file.pick(a.channels, "channels", d.channels)?,
        seed: file.pick(a.seed, "seed", d.seed)?,
        clip_s: file.pick(a.clip_seconds, "clip-seconds", d.clip_s)?,
        noise_s: file.pick(a.noise_seconds, "noise-seconds", d.noise_s)?,
        max_appliances: file.pick(a.max_appliances, "max-appliances", d.max_appliances)?,
        second_monitor: second,
        ..d
    };
    if cfg.channels == 0 || cfg.max_appliances == 0 {
        return Err(Error::Config("--channels and --max-appliances must be at least 1".into()));
    }
    if !(cfg.clip_s > 0.0 && cfg.noise_s >= cfg.clip_s) {
        return Err(Error::Config("clip length must be positive and no longer than the noise recording".into()));
    }
    log::info!("generating {} channels with seed {}", cfg.channels, cfg.seed);
    let corpus = synth::build_corpus(&cfg, Exec::Parallel)?;
    io::write_corpus(&a.out, &corpus, &cfg)?;
    println!(
        "wrote {} channels{} and {:.0} s of household noise to {}",
        cfg.channels,
        if second { " on two monitors" } else { "" },
        cfg.noise_s,
        a.out.display()
    );
    Ok(())
}

pub fn extract(a: &ExtractArgs) -> Result<()> {
    let (i, v) = io::read_waveforms_csv(&a.input, a.rate)?;
    let series = features::extract_series(&i, &v)?;
    io::write_series_csv(&a.output, &series)?;
    println!("{} cycles, {} features -> {}", series.len(), series.n_features(), a.output.display());
    Ok(())
}

pub fn rank(a: &RankArgs, file: &FileConfig) -> Result<()> {
    let k = file.pick(a.k, "k", ranking::DEFAULT_K_NEIGHBORS)?;
    let stride = file.pick(a.stride, "stride", 10usize)?;
    let seed = file.pick(a.seed, "seed", synth::DEFAULT_SEED)?;
    if stride == 0 {
        return Err(Error::Config("--stride must be at least 1".into()));
    }
    let corpus = io::load_corpus(&a.corpus)?;
    let mut instances = Vec::new();
    for (id, s) in &corpus.channels {
        let s = s.select(&FEATURE_NAMES)?;
        for col in (0..s.len()).step_by(stride) {
            instances.push(Instance::new(s.values().iter().map(|r| r[col]).collect(), *id));
        }
    }
    let cfg = ReliefConfig {
        k_neighbors: k,
        sample_count: None,
        seed: synth::derive_seed(seed, "rank", 0),
    };
    let per_signal = ranking::relieff_per_class(&instances, &cfg, Exec::Parallel)?;
    let weights: Vec<Vec<f64>> = per_signal.iter().map(|(_, w)| w.clone()).collect();
    let ranked = ranking::average_rankings(&weights)?;

    ensure_dir(&a.out)?;
    let ranks = ranked.ranks();
    let mut table = String::from("feature,weight,rank\n");
    let mut plot = String::from("rank,feature,weight,group\n");
    for (pos, &f) in ranked.order.iter().enumerate() {
        let name = FEATURE_NAMES[f];
        writeln!(table, "{name},{},{}", ranked.weights[f], ranks[f]).ok();
        let group = if features::is_electrical(name) { "electrical" } else { "statistical" };
        writeln!(plot, "{},{name},{},{group}", pos + 1, ranked.weights[f]).ok();
    }
    let mut per = String::from("channel");
    for name in FEATURE_NAMES {
        per.push(',');
        per.push_str(name);
    }
    per.push('\n');
    for (id, w) in &per_signal {
        per.push_str(&id.to_string());
        for x in w {
            write!(per, ",{x}").ok();
        }
        per.push('\n');
    }
    write_text(&a.out.join("ranking.csv"), &table)?;
    write_text(&a.out.join("ranking_plot.csv"), &plot)?;
    write_text(&a.out.join("ranking_per_signal.csv"), &per)?;
    let top: Vec<&str> = ranked.top(3).iter().map(|&f| FEATURE_NAMES[f]).collect();
    println!("{} instances, {} classes; top features: {}", instances.len(), per_signal.len(), top.join(", "));
    Ok(())
}

struct Matching {
    algorithms: Vec<Algorithm>,
    params: MatchParams,
    window: Option<usize>,
    hop: Option<usize>,
    features: Vec<String>,
    threshold: Option<f64>,
}

fn resolve_matching(o: &MatchOpts, file: &FileConfig, allow_all: bool) -> Result<Matching> {
    let d = MatchParams::default();
    let alg: String = file.pick(o.algorithm.clone(), "algorithm", "mvm".to_string())?;
    let algorithms = if alg.eq_ignore_ascii_case("all") {
        if !allow_all {
            return Err(Error::Config("`all` is only accepted by evaluate".into()));
        }
        Algorithm::ALL.to_vec()
    } else {
        vec![alg.parse::<Algorithm>().map_err(|e| Error::Config(e.to_string()))?]
    };
    let metric: Metric = file
        .pick(o.metric.clone(), "metric", d.metric.to_string())?
        .parse()
        .map_err(|e: Error| Error::Config(e.to_string()))?;
    let params = MatchParams {
        gamma: file.pick(o.gamma, "gamma", d.gamma)?,
        elasticity_v: file.pick(o.v, "v", d.elasticity_v)?,
        metric,
    };
    params.validate().map_err(|e| Error::Config(e.to_string()))?;
    let features: Vec<String> = file
        .pick(o.features.clone(), "features", "P".to_string())?
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if features.is_empty() {
        return Err(Error::Config("--features is empty".into()));
    }
    Ok(Matching {
        algorithms,
        params,
        window: file.pick_opt(o.window, "window")?,
        hop: file.pick_opt(o.hop, "hop")?,
        features,
        threshold: file.pick_opt(o.threshold, "threshold")?,
    })
}

fn policy(threshold: Option<f64>) -> NoTvPolicy {
    threshold.map_or(NoTvPolicy::ExtraClass, NoTvPolicy::Threshold)
}

pub fn match_frames(a: &MatchArgs, file: &FileConfig) -> Result<()> {
    let m = resolve_matching(&a.opts, file, false)?;
    let algorithm = m.algorithms[0];
    let (manifest, channels) = io::load_channels(&a.refs)?;
    let refs = ReferenceSet::new(channels, policy(m.threshold))?.select(&m.features)?;
    let stats = match manifest.normalization {
        Some(s) if s.names == m.features => s,
        _ if m.features.len() > 1 => NormStats::from_references(&refs)?,
        _ => NormStats::identity(refs.feature_names()),
    };
    let refs = refs.normalize(&stats)?;
    let input = io::read_series_csv(&a.input, None)?;
    let input = if input.rate_hz() > refs.rate_hz() { downsample(&input, refs.rate_hz())? } else { input };
    let series = pipeline::normalize_features(&input.select(&m.features)?, &stats)?;
    let window = m.window.unwrap_or(DEFAULT_WINDOW);
    let hop = m.hop.unwrap_or(window);
    let frames = frame_block(&series, window, hop)?;
    let mut out = String::from("offset,channel,score\n");
    for frame in &frames {
        let frame = remove_dc(frame);
        let prepared = PreparedWindows::new(&refs, frame.start_index(), window)?;
        let id = prepared.identify(&Sequence::from_rows(frame.values())?, algorithm, &m.params, Exec::Parallel)?;
        let best = pipeline::argmin(&id.scores).map_or(f64::NAN, |i| id.scores[i]);
        writeln!(out, "{},{},{best}", id.frame_offset, id.channel).ok();
    }
    match &a.out {
        Some(p) => write_text(p, &out)?,
        None => print!("{out}"),
    }
    Ok(())
}

fn report_stem(protocol: Protocol, algorithm: Algorithm) -> String {
    format!("{protocol}_{algorithm}")
}

pub fn evaluate(a: &EvaluateArgs, file: &FileConfig) -> Result<()> {
    let m = resolve_matching(&a.opts, file, true)?;
    let protocol: Protocol = file
        .pick(a.protocol.clone(), "protocol", "A".to_string())?
        .parse()
        .map_err(|e: Error| Error::Config(e.to_string()))?;
    let window = if a.full_scale {
        log::warn!("full-scale frames of {FULL_SCALE_WINDOW} samples make every match about 100 times slower");
        FULL_SCALE_WINDOW
    } else {
        m.window.unwrap_or(DEFAULT_WINDOW)
    };
    let cfg = EvalConfig {
        window_w: window,
        hop: m.hop,
        scenarios: file.pick(a.scenarios, "scenarios", DEFAULT_SCENARIOS)?,
        noise_gain: file.pick(a.noise_gain, "noise-gain", 1.0)?,
        features: m.features.clone(),
        seed: file.pick(a.seed, "seed", synth::DEFAULT_SEED)?,
        include_no_tv: true,
        exec: Exec::Parallel,
    };
    cfg.validate()?;
    let fraction = file.pick(a.bootstrap_fraction, "bootstrap-fraction", 0.5)?;

    let corpus = io::load_corpus(&a.corpus)?;
    let refs_same = ReferenceSet::new(corpus.channels.clone(), policy(m.threshold))?;
    let refs_other: Option<ReferenceSet> = match &corpus.second_monitor {
        Some(b) => Some(ReferenceSet::new(b.clone(), policy(m.threshold))?),
        None => None,
    };
    if protocol == Protocol::C && refs_other.is_none() {
        return Err(Error::Config(format!(
            "protocol C needs second-monitor references in {}",
            corpus.root.join(io::SECOND_MONITOR_DIR).display()
        )));
    }
    let noise = match corpus.noise {
        Some(n) if n.rate_hz() > refs_same.rate_hz() => Some(downsample(&n, refs_same.rate_hz())?),
        other => other,
    };
    let signals: Vec<(ChannelId, FeatureSeries)> = corpus.channels;
    let eval_corpus = EvalCorpus { signals, noise };

    ensure_dir(&a.out)?;
    for algorithm in &m.algorithms {
        let algorithm = *algorithm;
        let stem = report_stem(protocol, algorithm);
        let mut params = m.params;
        if a.grid {
            let grid = default_grid(algorithm, params);
            let table = bootstrap_grid_search(
                protocol,
                &eval_corpus,
                &refs_same,
                refs_other.as_ref(),
                algorithm,
                &grid,
                fraction,
                &cfg,
            )?;
            write_text(&a.out.join(format!("grid_{stem}.csv")), &table.to_csv())?;
            io::write_json(&a.out.join(format!("grid_{stem}.json")), &table)?;
            println!(
                "grid {algorithm}: best {} = {} (bootstrap acc {:.4})",
                table.parameter,
                evaluation::tuned_parameter(algorithm, &table.best).1,
                table.best_accuracy
            );
            params = table.best;
        }
        let (same, other) = if a.calibrate_threshold {
            let theta = calibrate_no_tv_threshold(
                protocol,
                &eval_corpus,
                &refs_same,
                refs_other.as_ref(),
                algorithm,
                &params,
                &cfg,
                fraction,
                0.99,
            )?;
            log::info!("{algorithm}: calibrated no-TV threshold {theta}");
            let pol = NoTvPolicy::Threshold(theta);
            (refs_same.with_policy(pol)?, refs_other.as_ref().map(|r| r.with_policy(pol)).transpose()?)
        } else {
            (refs_same.clone(), refs_other.clone())
        };
        let report = evaluation::run_protocol(protocol, &eval_corpus, &same, other.as_ref(), algorithm, &params, &cfg)?;
        io::write_json(&a.out.join(format!("report_{stem}.json")), &report)?;
        write_text(&a.out.join(format!("confusion_{stem}.csv")), &report.confusion.to_csv())?;
        write_text(&a.out.join(format!("heatmap_{stem}.csv")), &report.confusion.heatmap_csv())?;
        println!("{}", summary_line(&report));
    }
    Ok(())
}

fn summary_line(r: &EvalReport) -> String {
    let (name, value) = evaluation::tuned_parameter(r.algorithm, &r.params);
    let param = if name == "none" { "-".to_string() } else { format!("{name}={value}") };
    format!(
        "protocol {} {:<4} {:<10} acc {:.4} f1 {:.4} correct {:.4} frames {}",
        r.protocol, r.algorithm, param, r.acc, r.f1, r.plain_accuracy, r.n_frames
    )
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let paths: Vec<PathBuf> = if a.input.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(&a.input)
            .map_err(|e| Error::Io {
                path: a.input.clone(),
                source: e,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("report_") && n.ends_with(".json"))
            })
            .collect();
        v.sort();
        v
    } else {
        vec![a.input.clone()]
    };
    if paths.is_empty() {
        return Err(Error::EmptyInput(format!("no report_*.json in {}", a.input.display())));
    }
    let mut csv = String::from("protocol,algorithm,gamma,v,acc,f1,correct,frames\n");
    for p in &paths {
        let r: EvalReport = io::read_json(p)?;
        println!("{}", summary_line(&r));
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.protocol, r.algorithm, r.params.gamma, r.params.elasticity_v, r.acc, r.f1, r.plain_accuracy, r.n_frames
        )
        .ok();
    }
    if let Some(out) = &a.csv {
        write_text(out, &csv)?;
    }
    Ok(())
}
