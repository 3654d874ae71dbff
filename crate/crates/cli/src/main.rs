//! `phonograde`: synthesize corpora, compute features, evaluate, select and
//! report.
//!
//! Exit status is 0 on success, 1 on usage or configuration errors and 2 on
//! data errors.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use phonograde::corpus::FeatureSet;
use phonograde::eval::{read_means_csv, read_pairs_csv, write_means_csv, write_pairs_csv};
use phonograde::features::{read_features_csv, write_features_csv};
use phonograde::par;
use phonograde::pipeline::{evaluate_all, load_features, EvalRun};
use phonograde::report::{build_report, canonical_json, chart_json, report_json, report_markdown, SelectionSet};
use phonograde::scales::{load_ratings, load_scale_registry};
use phonograde::synth::{generate_corpus, write_corpus, PlantedEffect, SynthConfig};
use phonograde::Error;

use config::{CommonArgs, RunConfig};

#[derive(Parser)]
#[command(name = "phonograde", version, about = "Phoneme-level acoustic prediction of psychiatric symptom ratings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted effects
    Synth(SynthArgs),
    /// Compute per-segment features into features.csv
    Features(CommonArgs),
    /// Leave-one-speaker-out evaluation of every (symptom, phoneme) pair
    Evaluate(CommonArgs),
    /// Threshold selection over evaluate output
    Select(CommonArgs),
    /// Write report.json, report.md and chart.json
    Report(CommonArgs),
    /// evaluate, select and report in one go
    Run(CommonArgs),
}

#[derive(Debug, Clone, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 16)]
    speakers: usize,
    /// Segments per phoneme per speaker
    #[arg(long, default_value_t = 40)]
    segments: usize,
    /// SYMPTOM:PH1,PH2:STRENGTH, repeatable
    #[arg(long)]
    plant: Vec<String>,
    /// Comma-separated phonemes to synthesize besides planted ones
    #[arg(long, value_delimiter = ',')]
    phonemes: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = phonograde::signal::DEFAULT_RATE)]
    rate: u32,
    /// Resonance shift per rating step, Hz
    #[arg(long = "shift-hz", default_value_t = phonograde::synth::DEFAULT_SHIFT_HZ_PER_STEP)]
    shift_hz: f64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(m) => Failure::Usage(m),
            other => Failure::Data(other),
        }
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn usage<T>(r: Result<T, String>) -> CmdResult<T> {
    r.map_err(Failure::Usage)
}

const PAIRS_FILE: &str = "pairs.csv";
const MEANS_FILE: &str = "speaker_means.csv";
const RUN_FILE: &str = "run.json";
const SELECTION_FILE: &str = "selection.json";

/// Written next to the evaluate output so later steps can echo it.
#[derive(Serialize, Deserialize)]
struct RunInfo {
    run_id: String,
    seed: u64,
    config: serde_json::Value,
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::Data(Error::io(path, e)))
}

fn read_text(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Data(Error::io(path, e)))
}

fn create_out(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Data(Error::io(dir, e)))
}

fn open(path: &Path) -> CmdResult<fs::File> {
    fs::File::open(path).map_err(|e| Failure::Data(Error::io(path, e)))
}

fn create(path: &Path) -> CmdResult<fs::File> {
    fs::File::create(path).map_err(|e| Failure::Data(Error::io(path, e)))
}

fn synth(args: &SynthArgs) -> CmdResult {
    let planted = args
        .plant
        .iter()
        .map(|p| PlantedEffect::parse(p))
        .collect::<Result<Vec<_>, _>>()?;
    let defaults = SynthConfig::default();
    let config = SynthConfig {
        n_speakers: args.speakers,
        segments_per_phoneme_per_speaker: args.segments,
        planted_effects: planted,
        seed: args.seed,
        sample_rate: args.rate,
        phonemes: args.phonemes.clone().unwrap_or(defaults.phonemes),
        shift_hz_per_step: args.shift_hz,
    };
    config.validate(&load_scale_registry())?;
    let jobs = args.jobs.or_else(|| std::env::var(config::JOBS_ENV).ok()?.parse().ok()).unwrap_or(0);
    let corpus = par::with_jobs(jobs, || generate_corpus(&config))?;
    let paths = write_corpus(&corpus, &args.out)?;
    log::info!(
        "wrote {} recordings and {} segments under {}",
        corpus.recordings.len(),
        corpus.segments.len(),
        args.out.display()
    );
    println!("{}", paths.manifest.display());
    Ok(())
}

fn features(cfg: &RunConfig) -> CmdResult {
    let audio = usage(cfg.input(&cfg.audio, "audio"))?;
    let seg = usage(cfg.input(&cfg.seg, "seg"))?;
    let out = usage(cfg.out_dir())?;
    create_out(&out)?;
    let set = par::with_jobs(cfg.jobs, || load_features(&seg, &audio, &cfg.eval, &cfg.phonemes))?;
    log_skips(&set, cfg.eval.features.order);
    let path = out.join("features.csv");
    write_features_csv(create(&path)?, &set.vectors)?;
    log::info!("wrote {} feature vectors to {}", set.vectors.len(), path.display());
    Ok(())
}

fn log_skips(set: &FeatureSet, order: usize) {
    for (p, n) in &set.too_short {
        log::warn!("{p}: {n} segments too short for order-{order} analysis");
    }
    for (p, n) in &set.degenerate {
        log::warn!("{p}: {n} silent or non-finite segments skipped");
    }
}

fn evaluate_step(cfg: &RunConfig) -> CmdResult<EvalRun> {
    let ratings_path = usage(cfg.input(&cfg.ratings, "ratings"))?;
    let features = match &cfg.features {
        Some(_) => {
            let path = usage(cfg.input(&cfg.features, "features"))?;
            FeatureSet::from_vectors(read_features_csv(open(&path)?, &path)?)
        }
        None => {
            let audio = usage(cfg.input(&cfg.audio, "audio"))?;
            let seg = usage(cfg.input(&cfg.seg, "seg"))?;
            let set = par::with_jobs(cfg.jobs, || load_features(&seg, &audio, &cfg.eval, &cfg.phonemes))?;
            log_skips(&set, cfg.eval.features.order);
            set
        }
    };
    let ratings = load_ratings(&ratings_path, &load_scale_registry())?;
    let registry = load_scale_registry();
    let symptoms: Vec<&str> = registry.symptoms().iter().map(|s| s.code).collect();
    log::info!(
        "evaluating {} symptoms × {} phonemes over {} feature vectors",
        symptoms.len(),
        cfg.phonemes.len(),
        features.vectors.len()
    );
    let run = par::with_jobs(cfg.jobs, || {
        evaluate_all(&features, &ratings, &symptoms, &cfg.phonemes, &cfg.eval)
    })?;
    Ok(run)
}

fn write_run(run: &EvalRun, cfg: &RunConfig, out: &Path) -> CmdResult {
    write_pairs_csv(create(&out.join(PAIRS_FILE))?, &run.pairs)?;
    write_means_csv(create(&out.join(MEANS_FILE))?, &run.speaker_means)?;
    let info = RunInfo {
        run_id: run.run_id.clone(),
        seed: cfg.seed,
        config: cfg.echoed(),
    };
    write_text(&out.join(RUN_FILE), &canonical_json(&info)?)
}

fn read_run(dir: &Path) -> CmdResult<(EvalRun, RunInfo)> {
    let pairs_path = dir.join(PAIRS_FILE);
    let means_path = dir.join(MEANS_FILE);
    let pairs = read_pairs_csv(open(&pairs_path)?, &pairs_path)?;
    let means = read_means_csv(open(&means_path)?, &means_path)?;
    let run = EvalRun::new(pairs, means);
    let info: RunInfo = serde_json::from_str(&read_text(&dir.join(RUN_FILE))?).map_err(Error::from)?;
    if info.run_id != run.run_id {
        return Err(Error::InconsistentRun(info.run_id, run.run_id).into());
    }
    Ok((run, info))
}

fn summary(selections: &SelectionSet) {
    let registry = load_scale_registry();
    for spec in registry.symptoms() {
        let Some(r) = selections.reports.iter().find(|r| r.symptom == spec.code) else {
            continue;
        };
        let desc = spec.description;
        let picked = if r.selected.is_empty() {
            "-".to_string()
        } else {
            r.selected
                .iter()
                .map(|s| format!("{}({:.3})", s.phoneme, s.r))
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!("{}\t{}\t{}", r.symptom, desc, picked);
    }
}

fn write_reports(run: &EvalRun, selections: &SelectionSet, info: &RunInfo, out: &Path) -> CmdResult {
    let report = build_report(run, selections, info.seed, info.config.clone())?;
    write_text(&out.join("report.json"), &report_json(&report)?)?;
    write_text(&out.join("report.md"), &report_markdown(&report))?;
    write_text(&out.join("chart.json"), &chart_json(&report)?)?;
    Ok(())
}

fn execute(command: Command) -> CmdResult {
    let resolve = |args: &CommonArgs| usage(RunConfig::resolve(args));
    match command {
        Command::Synth(args) => synth(&args),
        Command::Features(args) => features(&resolve(&args)?),
        Command::Evaluate(args) => {
            let cfg = resolve(&args)?;
            let out = usage(cfg.out_dir())?;
            let run = evaluate_step(&cfg)?;
            create_out(&out)?;
            write_run(&run, &cfg, &out)
        }
        Command::Select(args) => {
            let cfg = resolve(&args)?;
            let out = usage(cfg.out_dir())?;
            let (run, _) = read_run(&out)?;
            let selections = SelectionSet::from_run(&run, &cfg.thresholds)?;
            write_text(&out.join(SELECTION_FILE), &selections.to_json()?)?;
            summary(&selections);
            Ok(())
        }
        Command::Report(args) => {
            let cfg = resolve(&args)?;
            let out = usage(cfg.out_dir())?;
            let (run, info) = read_run(&out)?;
            let selections: SelectionSet =
                serde_json::from_str(&read_text(&out.join(SELECTION_FILE))?).map_err(Error::from)?;
            write_reports(&run, &selections, &info, &out)
        }
        Command::Run(args) => {
            let cfg = resolve(&args)?;
            let out = usage(cfg.out_dir())?;
            let run = evaluate_step(&cfg)?;
            create_out(&out)?;
            write_run(&run, &cfg, &out)?;
            let selections = SelectionSet::from_run(&run, &cfg.thresholds)?;
            write_text(&out.join(SELECTION_FILE), &selections.to_json()?)?;
            let info = RunInfo {
                run_id: run.run_id.clone(),
                seed: cfg.seed,
                config: cfg.echoed(),
            };
            write_reports(&run, &selections, &info, &out)?;
            summary(&selections);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
