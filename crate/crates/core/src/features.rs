//! Change features over an aligned pair of embedding spaces.
//!
//! All features are computed on the vocabulary intersection. COS is the
//! cosine distance between a word's aligned vector and its target-space
//! vector. MAP compares two second-order distance vectors anchored at the
//! word's aligned vector: one against its k nearest intersection neighbors
//! in the aligned space, one against those same neighbors' target-space
//! vectors. FREQ is the normalized relative-frequency differential.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fileio::OutFile;
use crate::vectors::{cosine_similarity, EmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Cos,
    Map,
    Freq,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Cos => "cos",
            Feature::Map => "map",
            Feature::Freq => "freq",
        }
    }

    /// Inclusive value range the feature must stay in.
    fn range(self) -> (f64, f64) {
        match self {
            Feature::Cos | Feature::Map => (0.0, 2.0),
            Feature::Freq => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cos" => Ok(Feature::Cos),
            "map" => Ok(Feature::Map),
            "freq" => Ok(Feature::Freq),
            _ => Err(Error::invalid(format!(
                "unknown feature {s:?}; expected cos, map, or freq"
            ))),
        }
    }
}

/// Non-empty set of enabled features, held in canonical cos, map, freq
/// order regardless of construction order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    enabled: Vec<Feature>,
}

impl FeatureSet {
    pub fn new(features: impl IntoIterator<Item = Feature>) -> Result<Self> {
        let mut enabled: Vec<Feature> = features.into_iter().collect();
        enabled.sort_unstable();
        enabled.dedup();
        if enabled.is_empty() {
            return Err(Error::invalid("feature set must not be empty"));
        }
        Ok(FeatureSet { enabled })
    }

    pub fn all() -> Self {
        FeatureSet {
            enabled: vec![Feature::Cos, Feature::Map, Feature::Freq],
        }
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.enabled.contains(&f)
    }

    pub fn iter(&self) -> impl Iterator<Item = Feature> + '_ {
        self.enabled.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.enabled.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.enabled.iter().map(|x| x.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    /// Parses a comma-separated list like `cos,map,freq`.
    fn from_str(s: &str) -> Result<Self> {
        let parsed: Vec<Feature> = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(Feature::from_str)
            .collect::<Result<_>>()?;
        FeatureSet::new(parsed)
    }
}

/// Orientation of the frequency differential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FreqSign {
    /// Positive means the word became MORE frequent: (f2 - f1) / (f1 + f2).
    #[default]
    Prose,
    /// The mirrored orientation (f1 - f2) / (f1 + f2).
    Paper,
}

impl FromStr for FreqSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prose" => Ok(FreqSign::Prose),
            "paper" => Ok(FreqSign::Paper),
            _ => Err(Error::invalid(format!(
                "unknown freq-sign {s:?}; expected prose or paper"
            ))),
        }
    }
}

impl fmt::Display for FreqSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreqSign::Prose => "prose",
            FreqSign::Paper => "paper",
        })
    }
}

/// Cosine distance 1 - cos(a, b), in [0, 2]. A zero vector has similarity 0
/// to everything by convention, hence distance 1.
///
/// Panics if the slices differ in length or are empty.
pub fn cos_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cos_distance inputs must share a length");
    assert!(!a.is_empty(), "cos_distance inputs must be non-empty");
    1.0 - cosine_similarity(a, b)
}

/// Normalized frequency differential of relative frequencies f1, f2 in
/// [0, 1], not both zero. Result is in [-1, 1].
pub fn freq_differential(f1: f64, f2: f64, sign: FreqSign) -> Result<f64> {
    for (name, f) in [("f1", f1), ("f2", f2)] {
        if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
            return Err(Error::invalid(format!(
                "{name} = {f} is not a relative frequency in [0, 1]"
            )));
        }
    }
    if f1 + f2 == 0.0 {
        return Err(Error::invalid(
            "frequency differential undefined when both frequencies are zero",
        ));
    }
    let d = (f2 - f1) / (f1 + f2);
    Ok(match sign {
        FreqSign::Prose => d,
        FreqSign::Paper => -d,
    })
}

/// Shared state for MAP computations over one aligned/target pair.
struct MapContext<'a> {
    aligned: &'a EmbeddingMatrix,
    target: &'a EmbeddingMatrix,
    /// Intersection word ids in the aligned vocabulary, lex word order.
    ids_a: Vec<usize>,
    /// Aligned-vocabulary id -> target-vocabulary id.
    to_target: HashMap<usize, usize>,
    k: usize,
}

impl<'a> MapContext<'a> {
    fn new(
        aligned: &'a EmbeddingMatrix,
        target: &'a EmbeddingMatrix,
        common: &[String],
        k: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("map_k must be at least 1"));
        }
        if common.len() < 2 {
            return Err(Error::invalid(
                "MAP needs at least 2 intersection words to have a neighborhood",
            ));
        }
        let mut ids_a = Vec::with_capacity(common.len());
        let mut to_target = HashMap::with_capacity(common.len());
        for w in common {
            let ia = aligned.vocab().id(w).expect("intersection word in aligned vocab");
            let it = target.vocab().id(w).expect("intersection word in target vocab");
            ids_a.push(ia);
            to_target.insert(ia, it);
        }
        let k_eff = k.min(common.len() - 1);
        if k_eff < k {
            log::warn!(
                "map_k = {k} clamped to {k_eff}: intersection has only {} words",
                common.len()
            );
        }
        Ok(MapContext {
            aligned,
            target,
            ids_a,
            to_target,
            k: k_eff,
        })
    }

    /// MAP distance for the word at `idx` within the intersection list.
    /// Both second-order vectors are anchored at the word's aligned vector;
    /// only the neighbor side switches space.
    fn distance(&self, idx: usize) -> Result<f64> {
        let qa = self.ids_a[idx];
        let neighbors = self
            .aligned
            .nearest_neighbors(qa, self.k, Some(&self.ids_a))?;
        let va = self.aligned.row(qa);
        let mut s1 = Vec::with_capacity(neighbors.len());
        let mut s2 = Vec::with_capacity(neighbors.len());
        for &(nid, sim) in &neighbors {
            s1.push(1.0 - sim);
            let nt = self.to_target[&nid];
            s2.push(1.0 - cosine_similarity(va, self.target.row(nt)));
        }
        Ok(cos_distance(&s1, &s2))
    }
}

/// MAP distance for a single word: the cosine distance between second-order
/// vectors s1 (word vs its k nearest intersection neighbors, aligned space)
/// and s2 (word's aligned vector vs those neighbors in the target space).
/// k is clamped to intersection size - 1.
pub fn map_distance(
    word: &str,
    aligned: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
    k: usize,
) -> Result<f64> {
    check_dims(aligned, target)?;
    let common = aligned.vocab().intersect(target.vocab());
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let idx = common
        .binary_search_by(|w| w.as_str().cmp(word))
        .map_err(|_| Error::UnknownWord(word.to_owned()))?;
    let ctx = MapContext::new(aligned, target, &common, k)?;
    ctx.distance(idx)
}

fn check_dims(aligned: &EmbeddingMatrix, target: &EmbeddingMatrix) -> Result<()> {
    if aligned.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: aligned.dim(),
            right: target.dim(),
            context: "aligned and target embeddings must share a dimension",
        });
    }
    Ok(())
}

/// Settings for feature extraction.
#[derive(Debug, Clone)]
pub struct FeatureParams {
    pub features: FeatureSet,
    /// Neighborhood size for MAP.
    pub map_k: usize,
    pub freq_sign: FreqSign,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            features: FeatureSet::all(),
            map_k: 100,
            freq_sign: FreqSign::default(),
        }
    }
}

/// Per-word feature values over the vocabulary intersection, words in
/// lexicographic order, one column per enabled feature.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    words: Vec<String>,
    features: FeatureSet,
    columns: Vec<Vec<f64>>,
    map_k: Option<usize>,
    landmark_note: Option<String>,
}

impl FeatureTable {
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Column for a feature, parallel to [`FeatureTable::words`]; None if
    /// the feature was not enabled.
    pub fn column(&self, f: Feature) -> Option<&[f64]> {
        self.features
            .iter()
            .position(|x| x == f)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn value(&self, word: &str, f: Feature) -> Option<f64> {
        let row = self.words.binary_search_by(|w| w.as_str().cmp(word)).ok()?;
        self.column(f).map(|c| c[row])
    }

    /// Effective MAP neighborhood size (after clamping), when MAP ran.
    pub fn map_k(&self) -> Option<usize> {
        self.map_k
    }

    /// Free-form note recording the landmark configuration this table was
    /// built under; set by the pipeline driver.
    pub fn landmark_note(&self) -> Option<&str> {
        self.landmark_note.as_deref()
    }

    pub fn set_landmark_note(&mut self, note: impl Into<String>) {
        self.landmark_note = Some(note.into());
    }

    /// Writes `word,<features>` CSV with 6 decimal places per value.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = OutFile::create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(out, "word,{}", self.features).map_err(io)?;
        for (row, word) in self.words.iter().enumerate() {
            let mut line = word.clone();
            for col in &self.columns {
                line.push_str(&format!(",{:.6}", col[row]));
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        out.finish()
    }
}

/// Computes every enabled feature for every intersection word.
pub fn build_feature_table(
    aligned: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
    params: &FeatureParams,
) -> Result<FeatureTable> {
    check_dims(aligned, target)?;
    let common = aligned.vocab().intersect(target.vocab());
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let ids: Vec<(usize, usize)> = common
        .iter()
        .map(|w| {
            (
                aligned.vocab().id(w).expect("intersection word"),
                target.vocab().id(w).expect("intersection word"),
            )
        })
        .collect();

    let mut columns = Vec::with_capacity(params.features.len());
    let mut effective_k = None;
    for feature in params.features.iter() {
        let column: Vec<f64> = match feature {
            Feature::Cos => ids
                .par_iter()
                .map(|&(ia, it)| cos_distance(aligned.row(ia), target.row(it)))
                .collect(),
            Feature::Map => {
                let ctx = MapContext::new(aligned, target, &common, params.map_k)?;
                effective_k = Some(ctx.k);
                (0..common.len())
                    .into_par_iter()
                    .map(|i| ctx.distance(i))
                    .collect::<Result<_>>()?
            }
            Feature::Freq => common
                .iter()
                .map(|w| {
                    let f1 = aligned.vocab().relative_frequency(w)?;
                    let f2 = target.vocab().relative_frequency(w)?;
                    freq_differential(f1, f2, params.freq_sign)
                })
                .collect::<Result<_>>()?,
        };
        let (lo, hi) = feature.range();
        for (row, &v) in column.iter().enumerate() {
            if !v.is_finite() || v < lo - 1e-9 || v > hi + 1e-9 {
                return Err(Error::FeatureRange {
                    feature: feature.name(),
                    word: common[row].clone(),
                    value: v,
                });
            }
        }
        columns.push(column);
    }
    Ok(FeatureTable {
        words: common,
        features: params.features.clone(),
        columns,
        map_k: effective_k,
        landmark_note: None,
    })
}
