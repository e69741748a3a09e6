//! Unsupervised lexical semantic change detection between two corpora.
//!
//! Pipeline: train skip-gram embeddings per corpus ([`sgns`]), align the
//! first space onto the second with an orthogonal Procrustes map over
//! selectable landmarks ([`align`]), extract per-word change features
//! ([`features`]), and combine them into binary labels and a ranking with an
//! ECDF soft-voting ensemble ([`ensemble`]). The [`harness`] module adds
//! evaluation metrics, landmark sweeps, and a synthetic-shift corpus
//! generator for end-to-end validation.

pub mod align;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod harness;
pub mod sgns;
pub mod vectors;

mod fileio;

pub use align::{
    align, orthogonality_error, procrustes, resolve_landmarks, AlignmentResult, LandmarkSelection,
};
pub use corpus::{build_vocabulary, read_word_list, tokenize, CorpusStream, Vocabulary};
pub use ensemble::{
    classify, fit_ecdf, rank, score_pipeline, soft_vote, Ecdf, MissingWordPolicy, ScoreRow,
    ScoreTable,
};
pub use error::{Error, Result};
pub use features::{
    build_feature_table, cos_distance, freq_differential, map_distance, Feature, FeatureParams,
    FeatureSet, FeatureTable, FreqSign,
};
pub use harness::{
    accuracy, decay, default_sweep_grid, generate_synthetic_shift, landmark_sweep,
    majority_class_baseline, read_binary_gold, read_graded_gold, spearman, spearman_pairs,
    write_sweep_csv, GoldLabels, MajorityBaseline, SweepConfig, SweepPoint, SyntheticShift,
    SyntheticShiftConfig,
};
pub use sgns::{
    negative_sampling_distribution, subsample_keep_probability, train, train_parallel, SgnsConfig,
    TrainingState,
};
pub use vectors::{cosine_similarity, EmbeddingMatrix};
