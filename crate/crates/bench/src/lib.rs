//! Shared fixtures for the criterion benchmarks: deterministic random
//! matrices, vocabularies, and corpora sized for kernel timing.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lsc_core::{EmbeddingMatrix, Vocabulary};

/// Uniform [-1, 1) matrix, deterministic per seed.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Vocabulary `w0000..` with strictly decreasing counts.
pub fn counted_vocab(n: usize) -> Arc<Vocabulary> {
    let counts: HashMap<String, u64> = (0..n)
        .map(|i| (format!("w{i:04}"), (2 * n - i) as u64))
        .collect();
    let total: u64 = counts.values().sum();
    Arc::new(Vocabulary::from_counts(counts, total, 1).unwrap())
}

pub fn random_embedding(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    EmbeddingMatrix::new(counted_vocab(n), random_matrix(n, dim, seed)).unwrap()
}

/// Deterministic line corpus cycling over `vocab` words with enough
/// co-occurrence structure to keep the trainer honest. Returns the token
/// count.
pub fn write_cycling_corpus(path: &Path, sentences: usize, len: usize, vocab: usize) -> u64 {
    let strides = [1usize, 3, 7, 11, 13, 17, 19, 23];
    let mut text = String::new();
    for i in 0..sentences {
        let words: Vec<String> = (0..len)
            .map(|j| format!("w{:04}", (i * strides[j % strides.len()] + j) % vocab))
            .collect();
        text.push_str(&words.join(" "));
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
    (sentences * len) as u64
}
