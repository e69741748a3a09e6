use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use lsc_core::{FeatureSet, FreqSign, MissingWordPolicy, SgnsConfig};

/// Command-line overrides shared by every subcommand. Values resolve in
/// layers: built-in defaults, then the config file, then these flags.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// Flat `key = value` configuration file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// First (earlier) corpus: one sentence per line, .gz accepted.
    #[arg(long)]
    pub corpus1: Option<PathBuf>,
    /// Second (later) corpus.
    #[arg(long)]
    pub corpus2: Option<PathBuf>,
    /// Target word list (one word per line) restricting the answer files.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Binary gold labels, `word<TAB>0|1`.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Graded gold scores, `word<TAB>float`.
    #[arg(long)]
    pub gold_graded: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma list of change features: cos,map,freq.
    #[arg(long)]
    pub features: Option<String>,
    /// Ensemble decision threshold in [0, 1].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Landmark selection: all | top:<n> | file:<path>.
    #[arg(long)]
    pub landmarks: Option<String>,
    /// Neighborhood size for the MAP feature.
    #[arg(long)]
    pub map_k: Option<usize>,
    /// Frequency-differential orientation: prose | paper.
    #[arg(long)]
    pub freq_sign: Option<String>,
    /// Missing target handling: change | unchanged | error.
    #[arg(long)]
    pub missing_word_policy: Option<String>,
    /// Base RNG seed (corpus 2 trains with seed + 1).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 1 (the default) is fully deterministic.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Comma list of landmark counts; default: 20 log-spaced points up to
    /// the intersection size.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Probability that a donor occurrence is rewritten, in (0, 1].
    #[arg(long)]
    pub shift_rate: Option<f64>,
    /// Number of unchanged control words in the gold set.
    #[arg(long)]
    pub controls: Option<usize>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus1: Option<PathBuf>,
    pub corpus2: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub gold_graded: Option<PathBuf>,
    pub out: PathBuf,
    pub features: FeatureSet,
    pub threshold: f64,
    /// Raw selection spec (`all`, `top:<n>`, or `file:<path>`); resolved at
    /// alignment time so `file:` lists are read when actually needed.
    pub landmarks: String,
    pub map_k: usize,
    pub freq_sign: FreqSign,
    pub policy: MissingWordPolicy,
    pub seed: u64,
    pub threads: usize,
    pub sgns: SgnsConfig,
    /// Sweep grid; empty means the default log-spaced grid.
    pub grid: Vec<usize>,
    pub shift_rate: f64,
    pub controls: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus1: None,
            corpus2: None,
            targets: None,
            gold: None,
            gold_graded: None,
            out: PathBuf::from("out"),
            features: FeatureSet::all(),
            threshold: 0.75,
            landmarks: "all".to_owned(),
            map_k: 100,
            freq_sign: FreqSign::Prose,
            policy: MissingWordPolicy::Change,
            seed: 42,
            threads: 1,
            sgns: SgnsConfig::default(),
            grid: Vec::new(),
            shift_rate: 0.9,
            controls: 20,
        }
    }
}

impl RunConfig {
    /// Applies one configuration entry; keys match the long flag names.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "corpus1" => self.corpus1 = Some(value.into()),
            "corpus2" => self.corpus2 = Some(value.into()),
            "targets" => self.targets = Some(value.into()),
            "gold" => self.gold = Some(value.into()),
            "gold-graded" => self.gold_graded = Some(value.into()),
            "out" => self.out = value.into(),
            "features" => self.features = parse_with(key, value)?,
            "threshold" => self.threshold = parse_num(key, value)?,
            "landmarks" => self.landmarks = value.to_owned(),
            "map-k" => self.map_k = parse_num(key, value)?,
            "freq-sign" => self.freq_sign = parse_with(key, value)?,
            "missing-word-policy" => self.policy = parse_with(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "dim" => self.sgns.dim = parse_num(key, value)?,
            "window" => self.sgns.window = parse_num(key, value)?,
            "negatives" => self.sgns.negatives = parse_num(key, value)?,
            "min-count" => self.sgns.min_count = parse_num(key, value)?,
            "epochs" => self.sgns.epochs = parse_num(key, value)?,
            "learning-rate" => self.sgns.initial_lr = parse_num(key, value)?,
            "subsample-threshold" => self.sgns.subsample_threshold = parse_num(key, value)?,
            "unigram-power" => self.sgns.unigram_power = parse_num(key, value)?,
            "grid" => {
                self.grid = value
                    .split(',')
                    .map(|p| parse_num::<usize>(key, p.trim()))
                    .collect::<Result<_>>()?
            }
            "shift-rate" => self.shift_rate = parse_num(key, value)?,
            "controls" => self.controls = parse_num(key, value)?,
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.threshold.is_finite() && (0.0..=1.0).contains(&self.threshold),
            "threshold {} outside [0, 1]",
            self.threshold
        );
        ensure!(self.threads >= 1, "threads must be at least 1");
        ensure!(self.map_k >= 1, "map-k must be at least 1");
        Ok(())
    }

    /// The effective configuration, one sorted `key = value` line per
    /// setting, loadable back through `--config`.
    pub fn render_resolved(&self) -> String {
        let mut rows: Vec<(&'static str, String)> = vec![
            ("controls", self.controls.to_string()),
            ("dim", self.sgns.dim.to_string()),
            ("epochs", self.sgns.epochs.to_string()),
            ("features", self.features.to_string()),
            ("freq-sign", self.freq_sign.to_string()),
            ("landmarks", self.landmarks.clone()),
            ("learning-rate", self.sgns.initial_lr.to_string()),
            ("map-k", self.map_k.to_string()),
            ("min-count", self.sgns.min_count.to_string()),
            ("missing-word-policy", self.policy.to_string()),
            ("negatives", self.sgns.negatives.to_string()),
            ("out", self.out.display().to_string()),
            ("seed", self.seed.to_string()),
            ("shift-rate", self.shift_rate.to_string()),
            ("subsample-threshold", self.sgns.subsample_threshold.to_string()),
            ("threads", self.threads.to_string()),
            ("threshold", self.threshold.to_string()),
            ("unigram-power", self.sgns.unigram_power.to_string()),
            ("window", self.sgns.window.to_string()),
        ];
        for (key, path) in [
            ("corpus1", &self.corpus1),
            ("corpus2", &self.corpus2),
            ("targets", &self.targets),
            ("gold", &self.gold),
            ("gold-graded", &self.gold_graded),
        ] {
            if let Some(p) = path {
                rows.push((key, p.display().to_string()));
            }
        }
        if !self.grid.is_empty() {
            let joined: Vec<String> = self.grid.iter().map(ToString::to_string).collect();
            rows.push(("grid", joined.join(",")));
        }
        rows.sort_unstable_by_key(|(k, _)| *k);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').with_context(|| {
                    format!("{}:{}: expected key = value", path.display(), lineno + 1)
                })?;
                cfg.apply(key.trim(), value.trim())
                    .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
            }
        }
        for (key, flag) in [
            ("corpus1", &self.corpus1),
            ("corpus2", &self.corpus2),
            ("targets", &self.targets),
            ("gold", &self.gold),
            ("gold-graded", &self.gold_graded),
            ("out", &self.out),
        ] {
            if let Some(path) = flag {
                cfg.apply(key, &path.display().to_string())?;
            }
        }
        for (key, flag) in [
            ("features", &self.features),
            ("landmarks", &self.landmarks),
            ("freq-sign", &self.freq_sign),
            ("missing-word-policy", &self.missing_word_policy),
        ] {
            if let Some(value) = flag {
                cfg.apply(key, value)?;
            }
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.map_k {
            cfg.map_k = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SweepArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.common.resolve()?;
        if let Some(grid) = &self.grid {
            cfg.apply("grid", grid)?;
        }
        Ok(cfg)
    }
}

impl SynthArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.common.resolve()?;
        if let Some(rate) = self.shift_rate {
            cfg.shift_rate = rate;
        }
        if let Some(controls) = self.controls {
            cfg.controls = controls;
        }
        Ok(cfg)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("key {key}: invalid value {value:?}: {e}"))
}

fn parse_with<T: std::str::FromStr<Err = lsc_core::Error>>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("key {key}: {e}"))
}
