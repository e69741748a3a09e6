//! Skip-gram with negative sampling, trained from scratch.
//!
//! The objective maximized for a (target, context) pair with negatives N is
//! `log sigma(u_c . v_t) + sum_{n in N} log sigma(-u_n . v_t)` where `v` rows
//! live in the input matrix and `u` rows in the output matrix. Training
//! follows the classic word2vec recipe: dynamic window, frequent-word
//! subsampling, unigram^power negative sampling, linearly decaying learning
//! rate. With one thread the run is bit-reproducible for a fixed seed; with
//! more threads updates are hogwild (racy by design) and not reproducible.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusStream, Vocabulary};
use crate::error::{Error, Result};
use crate::vectors::EmbeddingMatrix;

/// Hyperparameters. Defaults follow the common SGNS configuration for
/// diachronic studies: 300 dimensions, window 10, 5 negatives, min_count 10,
/// 5 epochs, initial learning rate 0.025, subsample threshold 1e-3,
/// unigram exponent 0.75.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub initial_lr: f64,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample_threshold: f64,
    /// Exponent applied to unigram counts in the negative-sampling
    /// distribution.
    pub unigram_power: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 300,
            window: 10,
            negatives: 5,
            min_count: 10,
            epochs: 5,
            initial_lr: 0.025,
            subsample_threshold: 1e-3,
            unigram_power: 0.75,
            seed: 42,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be at least 1"));
        }
        if self.window == 0 {
            return Err(Error::invalid("window must be at least 1"));
        }
        if self.negatives == 0 {
            return Err(Error::invalid("negatives must be at least 1"));
        }
        if self.min_count == 0 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return Err(Error::invalid("initial_lr must be finite and positive"));
        }
        if !(self.subsample_threshold.is_finite() && self.subsample_threshold >= 0.0) {
            return Err(Error::invalid("subsample_threshold must be finite and non-negative"));
        }
        if !(self.unigram_power.is_finite() && self.unigram_power >= 0.0) {
            return Err(Error::invalid("unigram_power must be finite and non-negative"));
        }
        Ok(())
    }
}

/// f64 cell with relaxed atomic access. Concurrent read-modify-write is
/// intentionally lossy (hogwild); single-threaded use is exact.
pub(crate) struct AtomicF64(AtomicU64);

impl AtomicF64 {
    fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn set(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed);
    }

    fn add(&self, d: f64) {
        self.set(self.get() + d);
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Normalized negative-sampling distribution: count^power over the
/// vocabulary, in id order.
pub fn negative_sampling_distribution(vocab: &Vocabulary, power: f64) -> Result<Vec<f64>> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::invalid("unigram_power must be finite and non-negative"));
    }
    let weights: Vec<f64> = (0..vocab.len())
        .map(|id| (vocab.count(id) as f64).powf(power))
        .collect();
    let sum: f64 = weights.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(Error::MissingCounts);
    }
    Ok(weights.into_iter().map(|w| w / sum).collect())
}

/// Shared mutable training state: input (target) and output (context)
/// matrices plus progress counters. Input rows are initialized uniformly in
/// (-0.5/dim, 0.5/dim); output rows start at zero.
pub struct TrainingState {
    input: Vec<AtomicF64>,
    output: Vec<AtomicF64>,
    vocab_size: usize,
    dim: usize,
    processed_tokens: AtomicU64,
    current_lr: AtomicF64,
}

/// Reusable buffers for the SGD hot path.
struct StepScratch {
    v: Vec<f64>,
    v_delta: Vec<f64>,
    rows: Vec<(usize, f64)>,
}

impl StepScratch {
    fn new(dim: usize, negatives: usize) -> Self {
        StepScratch {
            v: vec![0.0; dim],
            v_delta: vec![0.0; dim],
            rows: Vec::with_capacity(negatives + 1),
        }
    }
}

impl TrainingState {
    pub fn new(vocab_size: usize, dim: usize, seed: u64) -> Result<Self> {
        if vocab_size == 0 || dim == 0 {
            return Err(Error::invalid("vocab_size and dim must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let half = 0.5 / dim as f64;
        let input = (0..vocab_size * dim)
            .map(|_| AtomicF64::new(rng.gen_range(-half..half)))
            .collect();
        let output = (0..vocab_size * dim).map(|_| AtomicF64::new(0.0)).collect();
        Ok(TrainingState {
            input,
            output,
            vocab_size,
            dim,
            processed_tokens: AtomicU64::new(0),
            current_lr: AtomicF64::new(0.0),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// In-vocabulary tokens consumed so far (before subsampling), summed
    /// over epochs. Drives the learning-rate schedule.
    pub fn processed_tokens(&self) -> u64 {
        self.processed_tokens.load(Ordering::Relaxed)
    }

    /// Learning rate used by the most recent update batch.
    pub fn learning_rate(&self) -> f64 {
        self.current_lr.get()
    }

    pub fn input_row(&self, id: usize) -> Vec<f64> {
        self.read_row(&self.input, id)
    }

    pub fn output_row(&self, id: usize) -> Vec<f64> {
        self.read_row(&self.output, id)
    }

    pub fn set_input_row(&self, id: usize, values: &[f64]) {
        self.write_row(&self.input, id, values);
    }

    pub fn set_output_row(&self, id: usize, values: &[f64]) {
        self.write_row(&self.output, id, values);
    }

    fn read_row(&self, m: &[AtomicF64], id: usize) -> Vec<f64> {
        assert!(id < self.vocab_size, "row id out of range");
        m[id * self.dim..(id + 1) * self.dim]
            .iter()
            .map(AtomicF64::get)
            .collect()
    }

    fn write_row(&self, m: &[AtomicF64], id: usize, values: &[f64]) {
        assert!(id < self.vocab_size, "row id out of range");
        assert_eq!(values.len(), self.dim, "row length mismatch");
        for (cell, &v) in m[id * self.dim..(id + 1) * self.dim].iter().zip(values) {
            cell.set(v);
        }
    }

    /// Objective value for one (target, context, negatives) triple:
    /// `log sigma(u_c . v_t) + sum_n log sigma(-u_n . v_t)`.
    pub fn pair_objective(&self, target: usize, context: usize, negatives: &[usize]) -> f64 {
        let v = self.input_row(target);
        let mut total = sigmoid(self.row_dot(&self.output, context, &v)).ln();
        for &n in negatives {
            total += sigmoid(-self.row_dot(&self.output, n, &v)).ln();
        }
        total
    }

    fn row_dot(&self, m: &[AtomicF64], id: usize, v: &[f64]) -> f64 {
        m[id * self.dim..(id + 1) * self.dim]
            .iter()
            .zip(v)
            .map(|(cell, x)| cell.get() * x)
            .sum()
    }

    fn row_axpy(&self, m: &[AtomicF64], id: usize, coeff: f64, v: &[f64]) {
        for (cell, &x) in m[id * self.dim..(id + 1) * self.dim].iter().zip(v) {
            cell.add(coeff * x);
        }
    }

    /// One gradient-ascent step on the pair objective. All gradients are
    /// computed from pre-step values, then applied, so
    /// `(row_after - row_before) / lr` is the exact analytic gradient even
    /// when a negative id repeats. Errors if any dot product is non-finite.
    pub fn sgd_step(
        &self,
        target: usize,
        context: usize,
        negatives: &[usize],
        lr: f64,
    ) -> Result<()> {
        let mut scratch = StepScratch::new(self.dim, negatives.len());
        self.sgd_step_with(target, context, negatives, lr, &mut scratch)
    }

    fn sgd_step_with(
        &self,
        target: usize,
        context: usize,
        negatives: &[usize],
        lr: f64,
        scratch: &mut StepScratch,
    ) -> Result<()> {
        debug_assert!(target < self.vocab_size && context < self.vocab_size);
        let dim = self.dim;
        let v = &mut scratch.v;
        for (slot, cell) in v.iter_mut().zip(&self.input[target * dim..(target + 1) * dim]) {
            *slot = cell.get();
        }
        scratch.rows.clear();
        scratch.v_delta.iter_mut().for_each(|x| *x = 0.0);

        // Pass 1: read every output row involved and derive its coefficient
        // from pre-step values.
        let pos_dot = self.row_dot(&self.output, context, v);
        if !pos_dot.is_finite() {
            return Err(Error::Diverged { parameter: "learning_rate", value: lr });
        }
        scratch.rows.push((context, 1.0 - sigmoid(pos_dot)));
        for &n in negatives {
            debug_assert!(n < self.vocab_size);
            let d = self.row_dot(&self.output, n, v);
            if !d.is_finite() {
                return Err(Error::Diverged { parameter: "learning_rate", value: lr });
            }
            scratch.rows.push((n, -sigmoid(d)));
        }
        for &(id, coeff) in &scratch.rows {
            for (acc, cell) in scratch
                .v_delta
                .iter_mut()
                .zip(&self.output[id * dim..(id + 1) * dim])
            {
                *acc += coeff * cell.get();
            }
        }

        // Pass 2: apply.
        for &(id, coeff) in &scratch.rows {
            self.row_axpy(&self.output, id, lr * coeff, v);
        }
        for (cell, &d) in self.input[target * dim..(target + 1) * dim]
            .iter()
            .zip(scratch.v_delta.iter())
        {
            cell.add(lr * d);
        }
        Ok(())
    }

    /// Consumes the state and returns the input matrix as embeddings over
    /// `vocab` (which must be the vocabulary training ran with).
    pub fn into_embeddings(self, vocab: Arc<Vocabulary>) -> Result<EmbeddingMatrix> {
        if vocab.len() != self.vocab_size {
            return Err(Error::DimensionMismatch {
                left: vocab.len(),
                right: self.vocab_size,
                context: "vocabulary size vs training state rows",
            });
        }
        let data: Vec<f64> = self.input.iter().map(AtomicF64::get).collect();
        let matrix = Array2::from_shape_vec((self.vocab_size, self.dim), data)
            .expect("state dimensions are consistent");
        EmbeddingMatrix::new(vocab, matrix)
    }
}

/// Keep-probability for frequent-word subsampling, word2vec convention:
/// `(sqrt(f/K) + 1) * K/f` with `f` the word count and
/// `K = threshold * total_tokens`. May exceed 1 for rare words (always
/// kept). Callers must not invoke this with threshold 0 (subsampling off).
pub fn subsample_keep_probability(count: u64, total_tokens: u64, threshold: f64) -> f64 {
    debug_assert!(threshold > 0.0 && count > 0 && total_tokens > 0);
    let k = threshold * total_tokens as f64;
    let f = count as f64;
    ((f / k).sqrt() + 1.0) * k / f
}

/// Learning rate after `done` of `total_scheduled` tokens: linear decay from
/// `initial_lr`, floored at `initial_lr * 1e-4`.
fn schedule_lr(initial_lr: f64, done: u64, total_scheduled: u64) -> f64 {
    let frac = done as f64 / (total_scheduled + 1) as f64;
    (initial_lr * (1.0 - frac)).max(initial_lr * 1e-4)
}

/// Trains single-threaded (bit-reproducible for a fixed seed).
pub fn train(
    stream: &CorpusStream,
    vocab: Arc<Vocabulary>,
    config: &SgnsConfig,
) -> Result<EmbeddingMatrix> {
    train_parallel(stream, vocab, config, 1)
}

/// Trains with `threads` hogwild workers sharing one state. Sentences are
/// dealt round-robin by line index. `threads == 1` is deterministic;
/// `threads > 1` trades reproducibility for speed.
pub fn train_parallel(
    stream: &CorpusStream,
    vocab: Arc<Vocabulary>,
    config: &SgnsConfig,
    threads: usize,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    if threads == 0 {
        return Err(Error::invalid("threads must be at least 1"));
    }
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let table = WeightedIndex::new(
        negative_sampling_distribution(&vocab, config.unigram_power)?,
    )
    .map_err(|e| Error::invalid(format!("negative-sampling weights rejected: {e}")))?;
    let train_words = vocab.retained_tokens();
    if train_words == 0 {
        return Err(Error::MissingCounts);
    }
    let total_scheduled = train_words.saturating_mul(config.epochs as u64);
    let state = TrainingState::new(vocab.len(), config.dim, config.seed)?;

    for epoch in 0..config.epochs {
        if threads == 1 {
            run_worker(
                stream, &vocab, config, &state, &table, epoch, 1, 0, total_scheduled,
            )?;
        } else {
            let first_error: Mutex<Option<Error>> = Mutex::new(None);
            std::thread::scope(|scope| {
                for tid in 0..threads {
                    let state = &state;
                    let table = &table;
                    let vocab = &vocab;
                    let first_error = &first_error;
                    scope.spawn(move || {
                        if let Err(e) = run_worker(
                            stream, vocab, config, state, table, epoch, threads, tid,
                            total_scheduled,
                        ) {
                            first_error.lock().unwrap().get_or_insert(e);
                        }
                    });
                }
            });
            if let Some(e) = first_error.into_inner().unwrap() {
                return Err(e);
            }
        }
    }
    state.into_embeddings(vocab)
}

#[allow(clippy::too_many_arguments)]
fn run_worker(
    stream: &CorpusStream,
    vocab: &Vocabulary,
    config: &SgnsConfig,
    state: &TrainingState,
    table: &WeightedIndex<f64>,
    epoch: usize,
    threads: usize,
    tid: usize,
    total_scheduled: u64,
) -> Result<()> {
    // Stream 0 seeds the matrices; worker streams are distinct per
    // (epoch, thread) so reruns with one thread replay exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1 + (epoch * threads + tid) as u64);
    let mut scratch = StepScratch::new(config.dim, config.negatives);
    let mut ids: Vec<usize> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    let mut negatives: Vec<usize> = Vec::with_capacity(config.negatives);
    let total_tokens = vocab.total_tokens();

    for (line_idx, sentence) in stream.sentences()?.enumerate() {
        let sentence = sentence?;
        if line_idx % threads != tid {
            continue;
        }
        ids.clear();
        ids.extend(sentence.iter().filter_map(|t| vocab.id(t)));
        if ids.is_empty() {
            continue;
        }
        let done = state
            .processed_tokens
            .fetch_add(ids.len() as u64, Ordering::Relaxed)
            + ids.len() as u64;
        let lr = schedule_lr(config.initial_lr, done, total_scheduled);
        state.current_lr.set(lr);

        kept.clear();
        if config.subsample_threshold > 0.0 {
            for &id in &ids {
                let p = subsample_keep_probability(
                    vocab.count(id),
                    total_tokens,
                    config.subsample_threshold,
                );
                if rng.gen::<f64>() < p {
                    kept.push(id);
                }
            }
        } else {
            kept.extend_from_slice(&ids);
        }

        for pos in 0..kept.len() {
            let target = kept[pos];
            let span = rng.gen_range(1..=config.window);
            let lo = pos.saturating_sub(span);
            let hi = (pos + span).min(kept.len() - 1);
            for (ctx_pos, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                if ctx_pos == pos {
                    continue;
                }
                negatives.clear();
                for _ in 0..config.negatives {
                    let n = table.sample(&mut rng);
                    // A draw that hits the positive context carries no
                    // signal; skip it rather than redraw.
                    if n != context {
                        negatives.push(n);
                    }
                }
                state.sgd_step_with(target, context, &negatives, lr, &mut scratch)?;
            }
        }
    }
    Ok(())
}
