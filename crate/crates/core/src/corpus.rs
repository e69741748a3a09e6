//! Corpus access and vocabulary construction.
//!
//! A corpus is a plain-text (optionally gzip-compressed) file with one
//! sentence per line, tokens separated by whitespace. No normalization is
//! applied here; corpora are expected to arrive pre-tokenized.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fileio::{open_reader, OutFile};

/// Splits a line into tokens at whitespace runs. Case and punctuation are
/// preserved as-is.
pub fn tokenize(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

/// Handle to a corpus file. Opening validates the path; each call to
/// [`CorpusStream::sentences`] starts a fresh pass over the file, so one
/// stream supports the multiple passes training needs.
#[derive(Debug, Clone)]
pub struct CorpusStream {
    path: PathBuf,
}

impl CorpusStream {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        // Fail now, not on first read, so config errors surface early.
        open_reader(&path)?;
        Ok(CorpusStream { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// One tokenized sentence per line, in file order. Blank lines yield
    /// empty sentences so line indices stay aligned with the file.
    pub fn sentences(&self) -> Result<Sentences> {
        Ok(Sentences {
            reader: open_reader(&self.path)?,
            path: self.path.clone(),
        })
    }
}

pub struct Sentences {
    reader: Box<dyn BufRead>,
    path: PathBuf,
}

impl Iterator for Sentences {
    type Item = Result<Vec<String>>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => None,
            Ok(_) => Some(Ok(tokenize(&line).into_iter().map(str::to_owned).collect())),
            Err(e) => Some(Err(Error::io(&self.path, e))),
        }
    }
}

/// Fixed word inventory with counts. Ids are dense and ordered by count
/// descending, ties broken lexicographically ascending, so equal corpora
/// always produce identical id assignments.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    total_tokens: u64,
    min_count: u64,
}

impl Vocabulary {
    /// Builds from raw occurrence counts. `total_tokens` is the corpus size
    /// before any filtering; words below `min_count` are dropped.
    pub fn from_counts(
        counts: HashMap<String, u64>,
        total_tokens: u64,
        min_count: u64,
    ) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        let mut kept: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (words, counts): (Vec<_>, Vec<_>) = kept.into_iter().unzip();
        Self::from_parts(words, counts, total_tokens, min_count)
    }

    /// Assembles a vocabulary preserving the given order. Internal: used by
    /// `from_counts` and by file importers where order is already canonical.
    pub(crate) fn from_parts(
        words: Vec<String>,
        counts: Vec<u64>,
        total_tokens: u64,
        min_count: u64,
    ) -> Result<Self> {
        debug_assert_eq!(words.len(), counts.len());
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate word {w:?}")));
            }
        }
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_tokens,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Panics if `id` is out of range; ids come from this vocabulary.
    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Corpus size in tokens before min_count filtering.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Sum of stored counts: the number of corpus tokens that map to an id.
    pub fn retained_tokens(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// count(word) / total_tokens. The denominator is the unfiltered corpus
    /// size, so frequencies from differently filtered vocabularies over the
    /// same corpus agree.
    pub fn relative_frequency(&self, word: &str) -> Result<f64> {
        let id = self
            .id(word)
            .ok_or_else(|| Error::UnknownWord(word.to_owned()))?;
        if self.total_tokens == 0 {
            return Err(Error::MissingCounts);
        }
        Ok(self.counts[id] as f64 / self.total_tokens as f64)
    }

    /// Words present in both vocabularies, lexicographically sorted.
    pub fn intersect(&self, other: &Vocabulary) -> Vec<String> {
        let mut common: Vec<String> = self
            .words
            .iter()
            .filter(|w| other.contains(w))
            .cloned()
            .collect();
        common.sort_unstable();
        common
    }

    /// Writes `#total_tokens=<N>` followed by `word<TAB>count` lines in id
    /// order.
    pub fn export(&self, path: &Path) -> Result<()> {
        let mut out = OutFile::create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(out, "#total_tokens={}", self.total_tokens).map_err(io)?;
        for (w, c) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{w}\t{c}").map_err(io)?;
        }
        out.finish()
    }

    /// Reads a file produced by [`Vocabulary::export`]. File order becomes id
    /// order. The original min_count is not stored in the file; the imported
    /// vocabulary reports min_count 1, which every stored word satisfies.
    pub fn import(path: &Path) -> Result<Self> {
        let reader = open_reader(path)?;
        let mut total_tokens: Option<u64> = None;
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix("#total_tokens=") {
                if total_tokens.is_some() || lineno != 1 {
                    return Err(Error::parse(path, lineno, "misplaced #total_tokens header"));
                }
                total_tokens = Some(rest.trim().parse().map_err(|_| {
                    Error::parse(path, lineno, format!("bad total_tokens value {rest:?}"))
                })?);
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (word, count) = line.split_once('\t').ok_or_else(|| {
                Error::parse(path, lineno, "expected word<TAB>count")
            })?;
            let count: u64 = count.trim().parse().map_err(|_| {
                Error::parse(path, lineno, format!("bad count {count:?} for word {word:?}"))
            })?;
            words.push(word.to_owned());
            counts.push(count);
        }
        let total_tokens =
            total_tokens.ok_or_else(|| Error::parse(path, 1, "missing #total_tokens header"))?;
        if words.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Self::from_parts(words, counts, total_tokens, 1)
            .map_err(|e| match e {
                Error::InvalidArgument(m) => Error::parse(path, 0, m),
                other => other,
            })
    }
}

/// Reads a one-word-per-line list (e.g. target words), preserving order and
/// skipping blank lines. Only the first whitespace-delimited field of each
/// line is taken, so `word<TAB>anything` files work too.
pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let reader = open_reader(path)?;
    let mut words = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(first) = line.split_whitespace().next() {
            words.push(first.to_owned());
        }
    }
    if words.is_empty() {
        return Err(Error::parse(path, 0, "word list is empty"));
    }
    Ok(words)
}

/// Counts tokens over one pass of the corpus and builds the vocabulary.
pub fn build_vocabulary(stream: &CorpusStream, min_count: u64) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total: u64 = 0;
    for sentence in stream.sentences()? {
        for token in sentence? {
            total += 1;
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    Vocabulary::from_counts(counts, total, min_count)
}
