//! Corpus builders shared by the integration suites.
#![allow(dead_code)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use lsc_core::SgnsConfig;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Layout of a generated topic-mixture corpus. Every sentence draws one
/// topic; each token is either a shared function word or a word from the
/// sentence's topic, both Zipf-weighted within their group. Topic words
/// therefore acquire topic-coherent contexts while function words appear
/// in every context, which gives embeddings a recoverable structure.
pub struct TopicCorpus {
    pub topics: usize,
    pub words_per_topic: usize,
    pub function_words: usize,
    /// Probability that a token is a function word.
    pub function_ratio: f64,
    pub sentences: usize,
    pub sentence_len: RangeInclusive<usize>,
    pub seed: u64,
}

impl Default for TopicCorpus {
    fn default() -> Self {
        TopicCorpus {
            topics: 10,
            words_per_topic: 60,
            function_words: 200,
            function_ratio: 0.4,
            sentences: 8_000,
            sentence_len: 10..=20,
            seed: 7,
        }
    }
}

impl TopicCorpus {
    pub fn topic_word(topic: usize, i: usize) -> String {
        format!("t{topic}w{i:03}")
    }

    pub fn function_word(i: usize) -> String {
        format!("f{i:03}")
    }

    pub fn vocab_size(&self) -> usize {
        self.topics * self.words_per_topic + self.function_words
    }

    /// Writes the corpus as plain text and returns the token count.
    pub fn write(&self, path: &Path) -> u64 {
        let topic_words: Vec<Vec<String>> = (0..self.topics)
            .map(|t| (0..self.words_per_topic).map(|i| Self::topic_word(t, i)).collect())
            .collect();
        let function_words: Vec<String> =
            (0..self.function_words).map(Self::function_word).collect();
        let zipf = |n: usize| {
            WeightedIndex::new((1..=n).map(|r| 1.0 / r as f64)).expect("nonzero weights")
        };
        let word_dist = zipf(self.words_per_topic);
        let func_dist = zipf(self.function_words);

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = BufWriter::new(File::create(path).expect("create corpus file"));
        let mut line = String::new();
        let mut tokens = 0u64;
        for _ in 0..self.sentences {
            let topic = rng.gen_range(0..self.topics);
            let len = rng.gen_range(self.sentence_len.clone());
            line.clear();
            for i in 0..len {
                if i > 0 {
                    line.push(' ');
                }
                let word = if rng.gen_bool(self.function_ratio) {
                    &function_words[func_dist.sample(&mut rng)]
                } else {
                    &topic_words[topic][word_dist.sample(&mut rng)]
                };
                line.push_str(word);
                tokens += 1;
            }
            writeln!(out, "{line}").expect("write corpus line");
        }
        out.flush().expect("flush corpus file");
        tokens
    }
}

/// Training settings sized for tests: smaller dimension and fewer epochs
/// than the production defaults, subsampling left on.
pub fn test_sgns(dim: usize, epochs: usize, min_count: u64, seed: u64) -> SgnsConfig {
    SgnsConfig {
        dim,
        window: 5,
        negatives: 5,
        min_count,
        epochs,
        initial_lr: 0.025,
        subsample_threshold: 1e-3,
        unigram_power: 0.75,
        seed,
    }
}
