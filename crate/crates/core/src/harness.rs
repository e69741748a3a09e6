//! Evaluation harness: gold data, metrics, landmark sweeps, and a
//! synthetic-shift corpus generator for end-to-end validation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::align::{align, LandmarkSelection};
use crate::corpus::CorpusStream;
use crate::ensemble::{score_pipeline, MissingWordPolicy};
use crate::error::{Error, Result};
use crate::features::{build_feature_table, FeatureParams, FeatureSet};
use crate::fileio::{open_reader, OutFile};
use crate::vectors::EmbeddingMatrix;

/// Reads `word<TAB>label` with label 0 or 1.
pub fn read_binary_gold(path: &Path) -> Result<BTreeMap<String, bool>> {
    let mut gold = BTreeMap::new();
    for (lineno, line) in open_reader(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let (word, value) = split_gold_line(path, lineno, &line)?;
        let label = match value.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("binary label must be 0 or 1, found {other:?}"),
                ))
            }
        };
        if gold.insert(word.to_owned(), label).is_some() {
            return Err(Error::parse(path, lineno, format!("duplicate word {word:?}")));
        }
    }
    if gold.is_empty() {
        return Err(Error::parse(path, 0, "gold file has no entries"));
    }
    Ok(gold)
}

/// Reads `word<TAB>score` with a finite score.
pub fn read_graded_gold(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut gold = BTreeMap::new();
    for (lineno, line) in open_reader(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let (word, value) = split_gold_line(path, lineno, &line)?;
        let score: f64 = value.trim().parse().map_err(|_| {
            Error::parse(path, lineno, format!("bad score {value:?} for word {word:?}"))
        })?;
        if !score.is_finite() {
            return Err(Error::parse(path, lineno, format!("non-finite score for {word:?}")));
        }
        if gold.insert(word.to_owned(), score).is_some() {
            return Err(Error::parse(path, lineno, format!("duplicate word {word:?}")));
        }
    }
    if gold.is_empty() {
        return Err(Error::parse(path, 0, "gold file has no entries"));
    }
    Ok(gold)
}

fn split_gold_line<'a>(path: &Path, lineno: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    line.split_once('\t')
        .or_else(|| line.split_once(' '))
        .ok_or_else(|| Error::parse(path, lineno, "expected word<TAB>value"))
}

/// Gold annotations: binary labels, graded scores, or both.
#[derive(Debug, Clone, Default)]
pub struct GoldLabels {
    pub binary: Option<BTreeMap<String, bool>>,
    pub graded: Option<BTreeMap<String, f64>>,
}

impl GoldLabels {
    /// Loads whichever files are given; at least one is required.
    pub fn load(binary: Option<&Path>, graded: Option<&Path>) -> Result<Self> {
        if binary.is_none() && graded.is_none() {
            return Err(Error::invalid("gold labels need a binary or graded file"));
        }
        Ok(GoldLabels {
            binary: binary.map(read_binary_gold).transpose()?,
            graded: graded.map(read_graded_gold).transpose()?,
        })
    }

    /// Union of annotated words.
    pub fn words(&self) -> BTreeSet<String> {
        let mut words = BTreeSet::new();
        if let Some(b) = &self.binary {
            words.extend(b.keys().cloned());
        }
        if let Some(g) = &self.graded {
            words.extend(g.keys().cloned());
        }
        words
    }
}

fn check_same_words<A, B>(
    pred: &BTreeMap<String, A>,
    gold: &BTreeMap<String, B>,
    what: &str,
) -> Result<()> {
    if pred.len() != gold.len() || !pred.keys().eq(gold.keys()) {
        let missing = gold.keys().find(|w| !pred.contains_key(*w));
        let extra = pred.keys().find(|w| !gold.contains_key(*w));
        return Err(Error::Mismatch(format!(
            "{what}: prediction and gold word sets differ \
             (first missing: {missing:?}, first extra: {extra:?})"
        )));
    }
    Ok(())
}

/// Fraction of exact label matches. Prediction and gold must cover the same
/// words.
pub fn accuracy(pred: &BTreeMap<String, bool>, gold: &BTreeMap<String, bool>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::invalid("accuracy over an empty gold set"));
    }
    check_same_words(pred, gold, "accuracy")?;
    let hits = gold.iter().filter(|(w, l)| pred[*w] == **l).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// The constant classifier that answers the most common gold class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorityBaseline {
    /// Most common class; ties resolve to `false` (class 0).
    pub class: bool,
    pub accuracy: f64,
}

impl MajorityBaseline {
    /// The constant predictions over the gold words.
    pub fn predictions(&self, gold: &BTreeMap<String, bool>) -> BTreeMap<String, bool> {
        gold.keys().map(|w| (w.clone(), self.class)).collect()
    }
}

pub fn majority_class_baseline(gold: &BTreeMap<String, bool>) -> Result<MajorityBaseline> {
    if gold.is_empty() {
        return Err(Error::invalid("majority baseline over an empty gold set"));
    }
    let ones = gold.values().filter(|l| **l).count();
    let zeros = gold.len() - ones;
    let class = ones > zeros;
    Ok(MajorityBaseline {
        class,
        accuracy: ones.max(zeros) as f64 / gold.len() as f64,
    })
}

/// Average ranks with ties sharing their mid-rank (1-based).
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation on paired observations: Pearson correlation of
/// mid-ranks. Errors if either side is constant (correlation undefined).
pub fn spearman_pairs(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Mismatch(format!(
            "{} xs vs {} ys",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("rank correlation needs at least 2 pairs"));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value {bad} in rank correlation")));
    }
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(xs) {
        return Err(Error::ConstantInput("first score vector"));
    }
    if constant(ys) {
        return Err(Error::ConstantInput("second score vector"));
    }
    let rx = midranks(xs);
    let ry = midranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}

/// Spearman correlation of two word-keyed score maps over the same words.
pub fn spearman(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<f64> {
    check_same_words(a, b, "rank correlation")?;
    let xs: Vec<f64> = a.values().copied().collect();
    let ys: Vec<f64> = b.values().copied().collect();
    spearman_pairs(&xs, &ys)
}

/// Mean relative shortfall from the per-language best:
/// mean over languages of (best - score) / best. `best` values must be
/// positive and cover the same languages.
pub fn decay(scores: &BTreeMap<String, f64>, best: &BTreeMap<String, f64>) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid("decay over no languages"));
    }
    check_same_words(scores, best, "decay")?;
    let mut total = 0.0;
    for (lang, &b) in best {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::invalid(format!(
                "best score for {lang:?} must be positive, got {b}"
            )));
        }
        let s = scores[lang];
        if !s.is_finite() {
            return Err(Error::invalid(format!("score for {lang:?} is not finite")));
        }
        total += (b - s) / b;
    }
    Ok(total / scores.len() as f64)
}

/// One landmark-count evaluation in a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// Landmark count requested (clamped to the intersection size).
    pub n: usize,
    pub threshold: f64,
    pub features: FeatureSet,
    /// Accuracy against binary gold, when provided.
    pub accuracy: Option<f64>,
    /// Spearman against graded gold, when provided.
    pub spearman: Option<f64>,
}

/// Settings for [`landmark_sweep`].
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: Vec<usize>,
    pub threshold: f64,
    pub params: FeatureParams,
    pub policy: MissingWordPolicy,
}

/// Default sweep grid: up to 20 log-spaced landmark counts from
/// min(300, n_max) (but at least 2) to n_max inclusive.
pub fn default_sweep_grid(n_max: usize) -> Vec<usize> {
    let hi = n_max.max(2);
    let lo = 300.min(hi).max(2);
    if lo == hi {
        return vec![hi];
    }
    let (lnl, lnh) = ((lo as f64).ln(), (hi as f64).ln());
    let mut grid: Vec<usize> = (0..20)
        .map(|i| {
            let t = i as f64 / 19.0;
            (lnl + t * (lnh - lnl)).exp().round() as usize
        })
        .map(|n| n.clamp(lo, hi))
        .collect();
    grid.dedup();
    grid
}

/// Re-aligns per landmark count and re-runs features + scoring, evaluating
/// against whatever gold is present. Embeddings are trained once by the
/// caller; only the alignment varies. Points come back in grid order.
pub fn landmark_sweep(
    source: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
    gold: &GoldLabels,
    cfg: &SweepConfig,
) -> Result<Vec<SweepPoint>> {
    if cfg.grid.is_empty() {
        return Err(Error::invalid("sweep grid must not be empty"));
    }
    if gold.binary.is_none() && gold.graded.is_none() {
        return Err(Error::invalid("sweep needs binary or graded gold"));
    }
    if let Some(&bad) = cfg.grid.iter().find(|&&n| n < 2) {
        return Err(Error::invalid(format!(
            "sweep grid entry {bad} below the 2-landmark minimum"
        )));
    }
    cfg.grid
        .par_iter()
        .map(|&n| {
            let result = align(source, target, &LandmarkSelection::TopFrequency { n })?;
            let mut table = build_feature_table(&result.aligned, target, &cfg.params)?;
            table.set_landmark_note(format!("top:{n}"));
            let scored = score_pipeline(&table, cfg.threshold)?;
            let accuracy_val = match &gold.binary {
                Some(bin) => {
                    let words: Vec<String> = bin.keys().cloned().collect();
                    let selected = scored.select_targets(&words, cfg.policy)?;
                    Some(accuracy(&selected.labels(), bin)?)
                }
                None => None,
            };
            let spearman_val = match &gold.graded {
                Some(graded) => {
                    let words: Vec<String> = graded.keys().cloned().collect();
                    let selected = scored.select_targets(&words, cfg.policy)?;
                    Some(spearman(&selected.scores(), graded)?)
                }
                None => None,
            };
            Ok(SweepPoint {
                n,
                threshold: cfg.threshold,
                features: cfg.params.features.clone(),
                accuracy: accuracy_val,
                spearman: spearman_val,
            })
        })
        .collect()
}

/// Writes `n,t,features,accuracy,spearman` rows; absent metrics stay empty.
/// Feature names are joined with `+` to keep the cell comma-free.
pub fn write_sweep_csv(points: &[SweepPoint], path: &Path) -> Result<()> {
    let mut out = OutFile::create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "n,t,features,accuracy,spearman").map_err(io)?;
    for p in points {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let features: Vec<&str> = p.features.iter().map(|f| f.name()).collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            p.n,
            p.threshold,
            features.join("+"),
            fmt(p.accuracy),
            fmt(p.spearman)
        )
        .map_err(io)?;
    }
    out.finish()
}

/// Settings for the synthetic-shift generator.
#[derive(Debug, Clone)]
pub struct SyntheticShiftConfig {
    /// Probability that a donor occurrence is rewritten to its target.
    pub shift_rate: f64,
    /// Number of unchanged control words to sample into the gold set.
    pub controls: usize,
    /// Eligibility floor for donors and controls (and the warn threshold
    /// for targets): words below this count are never picked.
    pub min_count: u64,
    pub seed: u64,
}

impl Default for SyntheticShiftConfig {
    fn default() -> Self {
        SyntheticShiftConfig {
            shift_rate: 0.9,
            controls: 20,
            min_count: 10,
            seed: 42,
        }
    }
}

/// Artifacts of one synthetic-shift generation.
#[derive(Debug, Clone)]
pub struct SyntheticShift {
    pub corpus1: PathBuf,
    pub corpus2: PathBuf,
    pub targets_file: PathBuf,
    pub gold_binary: PathBuf,
    pub gold_graded: PathBuf,
    pub gold: GoldLabels,
    pub targets: Vec<String>,
    /// target word -> donor word whose occurrences feed it.
    pub donors: BTreeMap<String, String>,
    pub controls: Vec<String>,
}

/// Builds a corpus pair with a known planted change. Corpus 1 is a verbatim
/// copy of the base corpus. In corpus 2, each occurrence of a donor word
/// (the most frequent eligible words, one per target) is rewritten to its
/// target with probability `shift_rate`, so each target acquires the
/// donor's contexts on top of its own. Gold marks targets as changed and
/// sampled untouched controls as unchanged. Fixed seeds give byte-identical
/// outputs.
pub fn generate_synthetic_shift(
    base: &CorpusStream,
    targets: &[String],
    cfg: &SyntheticShiftConfig,
    out_dir: &Path,
) -> Result<SyntheticShift> {
    if !(cfg.shift_rate.is_finite() && cfg.shift_rate > 0.0 && cfg.shift_rate <= 1.0) {
        return Err(Error::invalid(format!(
            "shift_rate {} outside (0, 1]",
            cfg.shift_rate
        )));
    }
    if targets.is_empty() {
        return Err(Error::invalid("at least one target word is required"));
    }
    if cfg.controls == 0 {
        return Err(Error::invalid("at least one control word is required"));
    }
    {
        let mut seen = HashSet::new();
        if let Some(dup) = targets.iter().find(|w| !seen.insert(w.as_str())) {
            return Err(Error::invalid(format!("duplicate target word {dup:?}")));
        }
    }

    // Raw counts (no filtering) so presence checks see every word.
    let mut counts: HashMap<String, u64> = HashMap::new();
    for sentence in base.sentences()? {
        for token in sentence? {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    for t in targets {
        match counts.get(t) {
            None => return Err(Error::UnknownWord(t.clone())),
            Some(&c) if c < cfg.min_count => log::warn!(
                "target {t:?} occurs only {c} times (min_count {}); it may not survive vocabulary filtering",
                cfg.min_count
            ),
            _ => {}
        }
    }

    let target_set: HashSet<&str> = targets.iter().map(String::as_str).collect();
    // Donors: most frequent eligible non-target words, deterministic order.
    let mut eligible: Vec<(&String, u64)> = counts
        .iter()
        .filter(|(w, &c)| c >= cfg.min_count && !target_set.contains(w.as_str()))
        .map(|(w, &c)| (w, c))
        .collect();
    eligible.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if eligible.len() < targets.len() + cfg.controls {
        return Err(Error::invalid(format!(
            "need {} eligible words (donors + controls), corpus has {}",
            targets.len() + cfg.controls,
            eligible.len()
        )));
    }
    let donors: BTreeMap<String, String> = targets
        .iter()
        .zip(&eligible)
        .map(|(t, (d, _))| (t.clone(), (*d).clone()))
        .collect();
    let donor_to_target: HashMap<&str, &str> = donors
        .iter()
        .map(|(t, d)| (d.as_str(), t.as_str()))
        .collect();

    // Controls: sampled from the remaining eligible words, reported sorted.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pool: Vec<&String> = eligible[targets.len()..].iter().map(|(w, _)| *w).collect();
    let mut controls: Vec<String> = pool
        .choose_multiple(&mut rng, cfg.controls)
        .map(|w| (*w).clone())
        .collect();
    controls.sort_unstable();

    // Corpus 1: verbatim copy, preserving compression.
    let gz = crate::fileio::is_gz(base.path());
    let name = |stem: &str| if gz { format!("{stem}.txt.gz") } else { format!("{stem}.txt") };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let corpus1 = out_dir.join(name("corpus1"));
    std::fs::copy(base.path(), &corpus1).map_err(|e| Error::io(&corpus1, e))?;

    // Corpus 2: rewrite donor occurrences with probability shift_rate.
    let corpus2 = out_dir.join(name("corpus2"));
    let mut out = OutFile::create(&corpus2)?;
    let io2 = |e| Error::io(&corpus2, e);
    for sentence in base.sentences()? {
        let mut sentence = sentence?;
        for token in &mut sentence {
            if let Some(&t) = donor_to_target.get(token.as_str()) {
                if rng.gen::<f64>() < cfg.shift_rate {
                    *token = t.to_owned();
                }
            }
        }
        writeln!(out, "{}", sentence.join(" ")).map_err(io2)?;
    }
    out.finish()?;

    // Gold and the target list.
    let mut binary = BTreeMap::new();
    let mut graded = BTreeMap::new();
    for t in targets {
        binary.insert(t.clone(), true);
        graded.insert(t.clone(), cfg.shift_rate);
    }
    for c in &controls {
        binary.insert(c.clone(), false);
        graded.insert(c.clone(), 0.0);
    }
    let gold_binary = out_dir.join("gold").join("task1.txt");
    let gold_graded = out_dir.join("gold").join("task2.txt");
    write_tabbed(&gold_binary, binary.iter().map(|(w, l)| (w.clone(), u8::from(*l).to_string())))?;
    write_tabbed(&gold_graded, graded.iter().map(|(w, s)| (w.clone(), format!("{s:.6}"))))?;
    let targets_file = out_dir.join("targets.txt");
    let mut all_words: Vec<&String> = binary.keys().collect();
    all_words.sort_unstable();
    let mut out = OutFile::create(&targets_file)?;
    for w in all_words {
        writeln!(out, "{w}").map_err(|e| Error::io(&targets_file, e))?;
    }
    out.finish()?;

    Ok(SyntheticShift {
        corpus1,
        corpus2,
        targets_file,
        gold_binary,
        gold_graded,
        gold: GoldLabels {
            binary: Some(binary),
            graded: Some(graded),
        },
        targets: targets.to_vec(),
        donors,
        controls,
    })
}

fn write_tabbed(path: &Path, rows: impl Iterator<Item = (String, String)>) -> Result<()> {
    let mut out = OutFile::create(path)?;
    let io = |e| Error::io(path, e);
    for (w, v) in rows {
        writeln!(out, "{w}\t{v}").map_err(io)?;
    }
    out.finish()
}
