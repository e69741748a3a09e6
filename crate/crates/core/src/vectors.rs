//! Embedding storage, cosine geometry, exact nearest neighbors, and the
//! word2vec-style text persistence format.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::fileio::{open_reader, OutFile};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine from precomputed parts. Any zero norm yields similarity 0, the
/// convention used everywhere in this crate.
pub(crate) fn cosine_from_parts(dot_ab: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        0.0
    } else {
        dot_ab / (norm_a * norm_b)
    }
}

/// Cosine similarity in [-1, 1] up to rounding; 0 if either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    cosine_from_parts(dot(a, b), norm(a), norm(b))
}

/// Dense word embeddings over a fixed vocabulary; row id = word id.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    vocab: Arc<Vocabulary>,
    matrix: Array2<f64>,
}

impl EmbeddingMatrix {
    /// Validates shape (rows = vocabulary size, dim >= 1) and finiteness.
    pub fn new(vocab: Arc<Vocabulary>, matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() != vocab.len() {
            return Err(Error::DimensionMismatch {
                left: matrix.nrows(),
                right: vocab.len(),
                context: "embedding rows vs vocabulary size",
            });
        }
        if matrix.ncols() == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if let Some(bad) = matrix.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "embedding matrix contains non-finite value {bad}"
            )));
        }
        Ok(EmbeddingMatrix { vocab, matrix })
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Row for a word id. Panics on out-of-range ids; ids come from the
    /// attached vocabulary.
    pub fn row(&self, id: usize) -> &[f64] {
        self.matrix
            .row(id)
            .to_slice()
            .expect("embedding matrix is standard layout")
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vocab.id(word).map(|id| self.row(id))
    }

    /// Replaces the attached vocabulary with one over the same word set,
    /// reordering rows to the new id assignment.
    pub fn with_vocabulary(self, vocab: Arc<Vocabulary>) -> Result<Self> {
        if vocab.len() != self.vocab.len() {
            return Err(Error::Mismatch(format!(
                "vocabulary sizes differ: {} vs {}",
                vocab.len(),
                self.vocab.len()
            )));
        }
        let dim = self.dim();
        let mut data = Vec::with_capacity(vocab.len() * dim);
        for word in vocab.words() {
            let old = self.vocab.id(word).ok_or_else(|| {
                Error::Mismatch(format!("word {word:?} absent from the embedding vocabulary"))
            })?;
            data.extend_from_slice(self.row(old));
        }
        let matrix = Array2::from_shape_vec((vocab.len(), dim), data)
            .expect("row collection matches shape");
        Ok(EmbeddingMatrix { vocab, matrix })
    }

    /// Exact k nearest neighbors of `query` by cosine similarity, excluding
    /// the query itself. `restrict` limits candidates to the given id set
    /// (the query may or may not be a member). Requires 1 <= k < candidate
    /// set size. Sorted by similarity descending, ties by id ascending.
    pub fn nearest_neighbors(
        &self,
        query: usize,
        k: usize,
        restrict: Option<&[usize]>,
    ) -> Result<Vec<(usize, f64)>> {
        let n = self.len();
        if query >= n {
            return Err(Error::invalid(format!(
                "query id {query} out of range for vocabulary of {n}"
            )));
        }
        let set_size = restrict.map_or(n, <[usize]>::len);
        if k == 0 || k >= set_size {
            return Err(Error::invalid(format!(
                "k = {k} outside valid range [1, {}) for candidate set of {set_size}",
                set_size
            )));
        }
        let qrow = self.row(query);
        let qnorm = norm(qrow);
        let score = |id: usize| {
            let row = self.row(id);
            cosine_from_parts(dot(qrow, row), qnorm, norm(row))
        };
        let mut scored: Vec<(usize, f64)> = match restrict {
            Some(ids) => {
                if let Some(&bad) = ids.iter().find(|&&id| id >= n) {
                    return Err(Error::invalid(format!(
                        "restriction id {bad} out of range for vocabulary of {n}"
                    )));
                }
                ids.iter()
                    .copied()
                    .filter(|&id| id != query)
                    .map(|id| (id, score(id)))
                    .collect()
            }
            None => (0..n).filter(|&id| id != query).map(|id| (id, score(id))).collect(),
        };
        let by_rank = |a: &(usize, f64), b: &(usize, f64)| {
            b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
        };
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_rank);
        Ok(scored)
    }

    /// Writes the word2vec text format: `<n> <dim>` header, then one
    /// `word v1 .. vd` line per word in id order, values with 6 decimal
    /// places. Gzip-compressed when the path ends in `.gz`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = OutFile::create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(out, "{} {}", self.len(), self.dim()).map_err(io)?;
        let mut line = String::new();
        for id in 0..self.len() {
            line.clear();
            line.push_str(self.vocab.word(id));
            for v in self.row(id) {
                line.push(' ');
                line.push_str(&format!("{v:.6}"));
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        out.finish()
    }

    /// Reads the format written by [`EmbeddingMatrix::save`]. The resulting
    /// vocabulary preserves file order but carries no token counts, so
    /// frequency-dependent operations on it fail with `MissingCounts`.
    pub fn load(path: &Path) -> Result<Self> {
        let reader = open_reader(path)?;
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let mut parts = header.split_whitespace();
        let (n, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(d), None) => {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::parse(path, 1, format!("bad row count {n:?}")))?;
                let d: usize = d
                    .parse()
                    .map_err(|_| Error::parse(path, 1, format!("bad dimension {d:?}")))?;
                (n, d)
            }
            _ => return Err(Error::parse(path, 1, "expected `<n> <dim>` header")),
        };
        if n == 0 || dim == 0 {
            return Err(Error::parse(path, 1, "row count and dimension must be positive"));
        }
        let mut words = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * dim);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if words.len() == n {
                return Err(Error::parse(path, lineno, "more rows than the header declares"));
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-empty line has a first field");
            let before = data.len();
            for f in fields {
                let v: f64 = f.parse().map_err(|_| {
                    Error::parse(path, lineno, format!("bad float {f:?}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(path, lineno, format!("non-finite value {f:?}")));
                }
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {dim} values, found {}", data.len() - before),
                ));
            }
            words.push(word.to_owned());
        }
        if words.len() != n {
            return Err(Error::parse(
                path,
                0,
                format!("header declares {n} rows, file has {}", words.len()),
            ));
        }
        let counts = vec![0; n];
        let vocab = Vocabulary::from_parts(words, counts, 0, 1)
            .map_err(|e| match e {
                Error::InvalidArgument(m) => Error::parse(path, 0, m),
                other => other,
            })?;
        let matrix =
            Array2::from_shape_vec((n, dim), data).expect("row collection matches shape");
        EmbeddingMatrix::new(Arc::new(vocab), matrix)
    }
}
