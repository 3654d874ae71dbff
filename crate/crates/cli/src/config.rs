//! Effective configuration: command-line flags over a JSON config file over
//! built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use phonograde::features::FeatureConfig;
use phonograde::model::RfConfig;
use phonograde::phonetics::{classify_phoneme, default_analysis_set, labels_of, Kind};
use phonograde::pipeline::EvalConfig;
use phonograde::select::Thresholds;

pub const JOBS_ENV: &str = "PHONOGRADE_JOBS";

/// Flags shared by the analysis subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Directory of `<recording_id>.wav` files
    #[arg(long)]
    pub audio: Option<PathBuf>,
    /// Segmentation TSV
    #[arg(long)]
    pub seg: Option<PathBuf>,
    /// Ratings CSV
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Precomputed features CSV (evaluate only)
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Analysis sample rate in Hz
    #[arg(long)]
    pub rate: Option<u32>,
    /// AR model order
    #[arg(long)]
    pub order: Option<usize>,
    /// Trees per forest
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long = "r-threshold")]
    pub r_threshold: Option<f64>,
    /// P-value gate for phoneme selection
    #[arg(long = "p-select")]
    pub p_select: Option<f64>,
    /// P-value gate for category members
    #[arg(long = "p-category")]
    pub p_category: Option<f64>,
    /// Fewest instances for a pair to be evaluated
    #[arg(long = "min-instances")]
    pub min_instances: Option<usize>,
    /// Worker threads; 0 uses every core
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated phoneme labels
    #[arg(long, value_delimiter = ',')]
    pub phonemes: Option<Vec<String>>,
    /// Add vowels to the analysed phonemes
    #[arg(long = "include-vowels")]
    pub include_vowels: bool,
    /// JSON config file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` file; every key is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub audio: Option<PathBuf>,
    pub seg: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub rate: Option<u32>,
    pub order: Option<usize>,
    pub trees: Option<usize>,
    pub r_threshold: Option<f64>,
    pub p_select: Option<f64>,
    pub p_category: Option<f64>,
    pub min_instances: Option<usize>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub phonemes: Option<Vec<String>>,
    pub include_vowels: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub audio: Option<PathBuf>,
    pub seg: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub eval: EvalConfig,
    pub thresholds: Thresholds,
    pub jobs: usize,
    pub seed: u64,
    pub phonemes: Vec<&'static str>,
}

/// The part of the configuration that determines results, echoed into
/// reports. Paths and the worker count are left out.
#[derive(Debug, Clone, Serialize)]
pub struct EchoedConfig<'a> {
    pub rate: u32,
    pub features: &'a FeatureConfig,
    pub rf: &'a RfConfig,
    pub min_instances: usize,
    pub seed: u64,
    pub phonemes: &'a [&'static str],
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self, String> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let env_jobs = match std::env::var(JOBS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| format!("{JOBS_ENV}={v} is not a count"))?),
            Err(_) => None,
        };
        let defaults = EvalConfig::default();
        let thresholds_default = Thresholds::default();
        let seed = args.seed.or(file.seed).unwrap_or(0);
        let include_vowels = args.include_vowels || file.include_vowels.unwrap_or(false);
        let phonemes = resolve_phonemes(args.phonemes.as_ref().or(file.phonemes.as_ref()), include_vowels)?;
        let order = args.order.or(file.order).unwrap_or(defaults.features.order);
        let rf = RfConfig {
            n_trees: args.trees.or(file.trees).unwrap_or(defaults.rf.n_trees),
            seed,
            ..defaults.rf.clone()
        };
        let eval = EvalConfig {
            sample_rate: args.rate.or(file.rate).unwrap_or(defaults.sample_rate),
            features: FeatureConfig::with_order(order),
            rf,
            min_instances: args.min_instances.or(file.min_instances).unwrap_or(defaults.min_instances),
        };
        let thresholds = Thresholds {
            r: args.r_threshold.or(file.r_threshold).unwrap_or(thresholds_default.r),
            p_select: args.p_select.or(file.p_select).unwrap_or(thresholds_default.p_select),
            p_category: args.p_category.or(file.p_category).unwrap_or(thresholds_default.p_category),
        };
        let cfg = Self {
            audio: args.audio.clone().or(file.audio),
            seg: args.seg.clone().or(file.seg),
            ratings: args.ratings.clone().or(file.ratings),
            out: args.out.clone().or(file.out),
            features: args.features.clone().or(file.features),
            eval,
            thresholds,
            jobs: args.jobs.or(file.jobs).or(env_jobs).unwrap_or(0),
            seed,
            phonemes,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        self.thresholds.validate().map_err(|e| e.to_string())?;
        self.eval
            .rf
            .validate(self.eval.features.grid_points)
            .map_err(|e| e.to_string())?;
        if self.eval.features.order == 0 {
            return Err("order must be ≥ 1".into());
        }
        let nyquist = self.eval.sample_rate as f64 / 2.0;
        if self.eval.features.grid_hi_hz >= nyquist {
            return Err(format!(
                "rate {} Hz puts the {} Hz grid edge at or above Nyquist",
                self.eval.sample_rate, self.eval.features.grid_hi_hz
            ));
        }
        if self.eval.min_instances == 0 {
            return Err("min-instances must be ≥ 1".into());
        }
        Ok(())
    }

    pub fn echoed(&self) -> serde_json::Value {
        serde_json::to_value(EchoedConfig {
            rate: self.eval.sample_rate,
            features: &self.eval.features,
            rf: &self.eval.rf,
            min_instances: self.eval.min_instances,
            seed: self.seed,
            phonemes: &self.phonemes,
        })
        .expect("serializable config")
    }

    /// A path that must be given and must exist.
    pub fn input(&self, path: &Option<PathBuf>, flag: &str) -> Result<PathBuf, String> {
        let p = path.clone().ok_or_else(|| format!("missing --{flag}"))?;
        if !p.exists() {
            return Err(format!("--{flag} {}: no such file or directory", p.display()));
        }
        Ok(p)
    }

    pub fn out_dir(&self) -> Result<PathBuf, String> {
        self.out.clone().ok_or_else(|| "missing --out".to_string())
    }
}

fn resolve_phonemes(list: Option<&Vec<String>>, include_vowels: bool) -> Result<Vec<&'static str>, String> {
    let mut labels: Vec<&'static str> = match list {
        Some(l) => l
            .iter()
            .map(|p| classify_phoneme(p).map(|c| c.label).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?,
        None => default_analysis_set(),
    };
    if include_vowels {
        labels.extend(labels_of(Kind::Vowel));
    }
    let mut seen = std::collections::HashSet::new();
    labels.retain(|l| seen.insert(*l));
    if labels.is_empty() {
        return Err("empty phoneme filter".into());
    }
    Ok(labels)
}
