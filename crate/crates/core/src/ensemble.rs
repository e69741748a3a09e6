//! ECDF soft-voting ensemble over change features.
//!
//! Each feature column gets an empirical CDF fit on the full vocabulary
//! intersection; a word's per-feature vote is P(X <= x), its ensemble score
//! the arithmetic mean of the votes, and its label score > threshold.
//! Ranking is by score descending, ties broken lexicographically.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{FeatureSet, FeatureTable};
use crate::fileio::OutFile;

/// Empirical CDF with inclusive semantics: evaluate(x) = #{v : v <= x} / N.
/// Every observed value therefore gets probability at least 1/N.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

/// Fits an ECDF. Values must be non-empty and finite.
pub fn fit_ecdf(values: &[f64]) -> Result<Ecdf> {
    if values.is_empty() {
        return Err(Error::invalid("cannot fit an ECDF on no values"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value {bad} in ECDF input")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(Ecdf { sorted })
}

impl Ecdf {
    /// P(X <= x) under the fitted sample. `x` must be finite.
    pub fn evaluate(&self, x: f64) -> f64 {
        debug_assert!(x.is_finite());
        let below_or_eq = self.sorted.partition_point(|v| *v <= x);
        below_or_eq as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Arithmetic mean of per-feature votes. Votes must be non-empty and lie in
/// [0, 1].
pub fn soft_vote(votes: &[f64]) -> Result<f64> {
    if votes.is_empty() {
        return Err(Error::invalid("soft vote needs at least one vote"));
    }
    for &v in votes {
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            return Err(Error::invalid(format!("vote {v} outside [0, 1]")));
        }
    }
    Ok(votes.iter().sum::<f64>() / votes.len() as f64)
}

/// Binary decision: changed iff the score strictly exceeds the threshold.
pub fn classify(score: f64, threshold: f64) -> bool {
    score > threshold
}

/// Ranks words 1..=n by score descending, ties by word ascending. Returns
/// ranks parallel to the input. Words must be distinct.
pub fn rank(words: &[String], scores: &[f64]) -> Result<Vec<usize>> {
    if words.len() != scores.len() {
        return Err(Error::Mismatch(format!(
            "{} words vs {} scores",
            words.len(),
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| words[a].cmp(&words[b]))
    });
    let mut ranks = vec![0; words.len()];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    Ok(ranks)
}

/// What to do when a requested target word is absent from the scored
/// intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingWordPolicy {
    /// Assume the word changed: label 1, score 1.0 (a word that vanished or
    /// appeared is a strong change signal). The default.
    #[default]
    Change,
    /// Assume the word did not change: label 0, score 0.0.
    Unchanged,
    /// Refuse to answer: fail naming the word.
    Error,
}

impl FromStr for MissingWordPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "change" => Ok(MissingWordPolicy::Change),
            "unchanged" => Ok(MissingWordPolicy::Unchanged),
            "error" => Ok(MissingWordPolicy::Error),
            _ => Err(Error::invalid(format!(
                "unknown missing-word policy {s:?}; expected change, unchanged, or error"
            ))),
        }
    }
}

impl fmt::Display for MissingWordPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissingWordPolicy::Change => "change",
            MissingWordPolicy::Unchanged => "unchanged",
            MissingWordPolicy::Error => "error",
        })
    }
}

/// One scored word.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub word: String,
    /// Per-feature votes, parallel to the table's feature set order.
    pub votes: Vec<f64>,
    pub score: f64,
    pub label: bool,
    pub rank: usize,
    /// True when the word was absent and a missing-word policy filled it.
    pub missing: bool,
}

/// Scored words in rank order plus the settings that produced them.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    features: FeatureSet,
    threshold: f64,
    rows: Vec<ScoreRow>,
}

/// Fits per-feature ECDFs on the full table and scores every word in it.
pub fn score_pipeline(table: &FeatureTable, threshold: f64) -> Result<ScoreTable> {
    if !(threshold.is_finite() && (0.0..=1.0).contains(&threshold)) {
        return Err(Error::invalid(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    if table.is_empty() {
        return Err(Error::invalid("cannot score an empty feature table"));
    }
    let features = table.features().clone();
    let ecdfs: Vec<Ecdf> = features
        .iter()
        .map(|f| fit_ecdf(table.column(f).expect("enabled feature has a column")))
        .collect::<Result<_>>()?;
    let n = table.len();
    let mut rows = Vec::with_capacity(n);
    for (i, word) in table.words().iter().enumerate() {
        let votes: Vec<f64> = features
            .iter()
            .zip(&ecdfs)
            .map(|(f, e)| e.evaluate(table.column(f).expect("enabled column")[i]))
            .collect();
        let score = soft_vote(&votes)?;
        rows.push(ScoreRow {
            word: word.clone(),
            votes,
            score,
            label: classify(score, threshold),
            rank: 0,
            missing: false,
        });
    }
    finalize_ranks(&mut rows)?;
    Ok(ScoreTable {
        features,
        threshold,
        rows,
    })
}

/// Assigns ranks and sorts rows into rank order.
fn finalize_ranks(rows: &mut [ScoreRow]) -> Result<()> {
    let words: Vec<String> = rows.iter().map(|r| r.word.clone()).collect();
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let ranks = rank(&words, &scores)?;
    for (row, r) in rows.iter_mut().zip(ranks) {
        row.rank = r;
    }
    rows.sort_unstable_by_key(|r| r.rank);
    Ok(())
}

impl ScoreTable {
    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Rows in rank order.
    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn get(&self, word: &str) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.word == word)
    }

    /// Restricts the table to `targets` (duplicates collapse to the first
    /// mention), applying `policy` to words absent from the scored set, and
    /// re-ranks within the selection.
    pub fn select_targets(
        &self,
        targets: &[String],
        policy: MissingWordPolicy,
    ) -> Result<ScoreTable> {
        if targets.is_empty() {
            return Err(Error::invalid("target selection must not be empty"));
        }
        let mut seen = std::collections::HashSet::new();
        let mut rows = Vec::new();
        for word in targets {
            if !seen.insert(word.clone()) {
                continue;
            }
            match self.get(word) {
                Some(row) => rows.push(row.clone()),
                None => match policy {
                    MissingWordPolicy::Error => {
                        return Err(Error::MissingTarget(word.clone()));
                    }
                    MissingWordPolicy::Change | MissingWordPolicy::Unchanged => {
                        let fill = if policy == MissingWordPolicy::Change { 1.0 } else { 0.0 };
                        log::warn!(
                            "target {word:?} not in the scored intersection; policy assigns score {fill}"
                        );
                        rows.push(ScoreRow {
                            word: word.clone(),
                            votes: vec![fill; self.features.len()],
                            score: fill,
                            label: classify(fill, self.threshold),
                            rank: 0,
                            missing: true,
                        });
                    }
                },
            }
        }
        finalize_ranks(&mut rows)?;
        Ok(ScoreTable {
            features: self.features.clone(),
            threshold: self.threshold,
            rows,
        })
    }

    pub fn labels(&self) -> BTreeMap<String, bool> {
        self.rows
            .iter()
            .map(|r| (r.word.clone(), r.label))
            .collect()
    }

    pub fn scores(&self) -> BTreeMap<String, f64> {
        self.rows
            .iter()
            .map(|r| (r.word.clone(), r.score))
            .collect()
    }

    /// Writes `word,p_<feature>..,score,label,rank` CSV in rank order,
    /// probabilities and scores with 6 decimal places.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = OutFile::create(path)?;
        let io = |e| Error::io(path, e);
        let vote_cols: Vec<String> = self.features.iter().map(|f| format!("p_{f}")).collect();
        writeln!(out, "word,{},score,label,rank", vote_cols.join(",")).map_err(io)?;
        for row in &self.rows {
            let mut line = row.word.clone();
            for v in &row.votes {
                line.push_str(&format!(",{v:.6}"));
            }
            line.push_str(&format!(
                ",{:.6},{},{}",
                row.score,
                u8::from(row.label),
                row.rank
            ));
            writeln!(out, "{line}").map_err(io)?;
        }
        out.finish()
    }

    /// Binary answer file: `word<TAB>label` with label 0 or 1, rank order.
    pub fn write_answer_labels(&self, path: &Path) -> Result<()> {
        let mut out = OutFile::create(path)?;
        let io = |e| Error::io(path, e);
        for row in &self.rows {
            writeln!(out, "{}\t{}", row.word, u8::from(row.label)).map_err(io)?;
        }
        out.finish()
    }

    /// Graded answer file: `word<TAB>score` with 6 decimal places, rank
    /// order.
    pub fn write_answer_scores(&self, path: &Path) -> Result<()> {
        let mut out = OutFile::create(path)?;
        let io = |e| Error::io(path, e);
        for row in &self.rows {
            writeln!(out, "{}\t{:.6}", row.word, row.score).map_err(io)?;
        }
        out.finish()
    }
}
