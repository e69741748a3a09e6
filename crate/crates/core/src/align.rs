//! Orthogonal Procrustes alignment of one embedding space onto another.
//!
//! Given landmark rows A (source) and B (target), the map is Q = U V^T from
//! the SVD of A^T B. Q is orthogonal but not constrained to det +1;
//! reflections are legitimate alignments. No centering or scaling is
//! applied.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::fileio::OutFile;
use crate::vectors::{cosine_similarity, EmbeddingMatrix};

/// How the landmark word set is chosen from the vocabulary intersection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LandmarkSelection {
    /// Every word in the intersection.
    AllIntersection,
    /// The n most frequent intersection words by combined relative
    /// frequency (clamped to the intersection size).
    TopFrequency { n: usize },
    /// A user-supplied list, filtered to the intersection, first occurrence
    /// wins on duplicates.
    Explicit { words: Vec<String> },
}

impl FromStr for LandmarkSelection {
    type Err = Error;

    /// Parses `all` or `top:<n>`. Explicit lists come from files and are
    /// constructed directly by the caller.
    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(LandmarkSelection::AllIntersection);
        }
        if let Some(n) = s.strip_prefix("top:") {
            let n: usize = n
                .parse()
                .map_err(|_| Error::invalid(format!("bad landmark count in {s:?}")))?;
            return Ok(LandmarkSelection::TopFrequency { n });
        }
        Err(Error::invalid(format!(
            "unrecognized landmark selection {s:?}; expected `all` or `top:<n>`"
        )))
    }
}

impl fmt::Display for LandmarkSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LandmarkSelection::AllIntersection => write!(f, "all"),
            LandmarkSelection::TopFrequency { n } => write!(f, "top:{n}"),
            LandmarkSelection::Explicit { words } => write!(f, "explicit:{}", words.len()),
        }
    }
}

/// Intersection words in canonical landmark order: combined relative
/// frequency descending, ties lexicographic ascending. Frequency-based
/// selections therefore nest (top-n is a prefix of top-m for n <= m) and
/// top-N equals the full intersection. When either vocabulary lacks counts
/// the canonical order degrades to lexicographic; `TopFrequency` then fails
/// with `MissingCounts` instead of guessing.
pub fn resolve_landmarks(
    v1: &Vocabulary,
    v2: &Vocabulary,
    selection: &LandmarkSelection,
) -> Result<Vec<String>> {
    let common = v1.intersect(v2);
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let have_counts = v1.total_tokens() > 0 && v2.total_tokens() > 0;
    let canonical = || -> Result<Vec<String>> {
        if !have_counts {
            return Ok(common.clone());
        }
        let mut scored: Vec<(f64, &String)> = common
            .iter()
            .map(|w| {
                let f = v1.relative_frequency(w)? + v2.relative_frequency(w)?;
                Ok((f, w))
            })
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(scored.into_iter().map(|(_, w)| w.clone()).collect())
    };
    let resolved = match selection {
        LandmarkSelection::AllIntersection => canonical()?,
        LandmarkSelection::TopFrequency { n } => {
            if !have_counts {
                return Err(Error::MissingCounts);
            }
            let mut ordered = canonical()?;
            ordered.truncate(*n);
            ordered
        }
        LandmarkSelection::Explicit { words } => {
            let mut seen = std::collections::HashSet::new();
            let picked: Vec<String> = words
                .iter()
                .filter(|w| v1.contains(w) && v2.contains(w))
                .filter(|w| seen.insert(w.as_str().to_owned()))
                .cloned()
                .collect();
            let dropped = words.len() - picked.len();
            if dropped > 0 {
                log::debug!("{dropped} explicit landmark entries dropped (duplicate or outside the intersection)");
            }
            picked
        }
    };
    if resolved.len() < 2 {
        return Err(Error::TooFewLandmarks {
            got: resolved.len(),
            need: 2,
        });
    }
    Ok(resolved)
}

/// Orthogonal matrix Q minimizing ||A Q - B||_F, via SVD of A^T B.
/// A and B must have equal shape with at least one row and column.
pub fn procrustes(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            left: a.nrows().max(a.ncols()),
            right: b.nrows().max(b.ncols()),
            context: "procrustes inputs must share a shape",
        });
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid("procrustes inputs must be non-empty"));
    }
    let d = a.ncols();
    let m = a.t().dot(&b);
    let m_na = nalgebra::DMatrix::from_row_iterator(d, d, m.iter().copied());
    let svd = m_na
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or(Error::SvdFailure { rows: d, cols: d })?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let q_na = u * v_t;
    let mut q = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            q[(i, j)] = q_na[(i, j)];
        }
    }
    // An SVD that converged yields orthogonal factors; verify anyway so a
    // numerically broken Q can never propagate into features.
    let eye_err = orthogonality_error(&q);
    if !eye_err.is_finite() || eye_err >= 1e-6 {
        return Err(Error::SvdFailure { rows: d, cols: d });
    }
    Ok(q)
}

/// max |Q^T Q - I|, the orthogonality defect.
pub fn orthogonality_error(q: &Array2<f64>) -> f64 {
    let d = q.ncols();
    let qtq = q.t().dot(q);
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((qtq[(i, j)] - want).abs());
        }
    }
    worst
}

/// Outcome of aligning a source space onto a target space.
pub struct AlignmentResult {
    /// The orthogonal map applied to every source row.
    pub rotation: Array2<f64>,
    /// Landmark words actually used, in canonical (or explicit) order.
    pub landmarks: Vec<String>,
    /// ||A Q - B||_F over the landmark rows.
    pub residual: f64,
    /// The whole source space mapped by `rotation`, same vocabulary.
    pub aligned: EmbeddingMatrix,
    /// Post-alignment cosine distance per landmark, in `landmarks` order.
    pub landmark_distances: Vec<f64>,
}

impl AlignmentResult {
    /// Writes `word,distance` rows preceded by `# landmarks=` and
    /// `# residual=` comment lines.
    pub fn write_diagnostics(&self, path: &Path) -> Result<()> {
        let mut out = OutFile::create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(out, "# landmarks={}", self.landmarks.len()).map_err(io)?;
        writeln!(out, "# residual={:.6}", self.residual).map_err(io)?;
        writeln!(out, "word,distance").map_err(io)?;
        for (w, d) in self.landmarks.iter().zip(&self.landmark_distances) {
            writeln!(out, "{w},{d:.6}").map_err(io)?;
        }
        out.finish()
    }
}

/// Aligns `source` onto `target` over the selected landmarks.
pub fn align(
    source: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
    selection: &LandmarkSelection,
) -> Result<AlignmentResult> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: source.dim(),
            right: target.dim(),
            context: "embedding dimensions must match for alignment",
        });
    }
    let landmarks = resolve_landmarks(source.vocab(), target.vocab(), selection)?;
    if landmarks.len() < source.dim() {
        log::warn!(
            "only {} landmarks for dimension {}; the map may be under-determined",
            landmarks.len(),
            source.dim()
        );
    }
    let d = source.dim();
    let gather = |emb: &EmbeddingMatrix| -> Array2<f64> {
        let mut rows = Array2::zeros((landmarks.len(), d));
        for (i, w) in landmarks.iter().enumerate() {
            let v = emb.vector(w).expect("landmarks lie in both vocabularies");
            rows.row_mut(i).iter_mut().zip(v).for_each(|(slot, &x)| *slot = x);
        }
        rows
    };
    let a = gather(source);
    let b = gather(target);
    let rotation = procrustes(a.view(), b.view())?;
    let mapped = a.dot(&rotation);
    let residual = (&mapped - &b).iter().map(|x| x * x).sum::<f64>().sqrt();
    let aligned = EmbeddingMatrix::new(source.vocab().clone(), source.matrix().dot(&rotation))?;
    let landmark_distances = landmarks
        .iter()
        .map(|w| {
            let va = aligned.vector(w).expect("landmark in source");
            let vb = target.vector(w).expect("landmark in target");
            1.0 - cosine_similarity(va, vb)
        })
        .collect();
    Ok(AlignmentResult {
        rotation,
        landmarks,
        residual,
        aligned,
        landmark_distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;
    use std::sync::Arc;

    fn vocab_with(counts: &[(&str, u64)], total: u64) -> Arc<Vocabulary> {
        let map: HashMap<String, u64> =
            counts.iter().map(|&(w, c)| (w.to_owned(), c)).collect();
        Arc::new(Vocabulary::from_counts(map, total, 1).unwrap())
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    fn rotation_2d(theta: f64) -> Array2<f64> {
        Array2::from_shape_vec(
            (2, 2),
            vec![theta.cos(), theta.sin(), -theta.sin(), theta.cos()],
        )
        .unwrap()
    }

    #[test]
    fn recovers_a_planted_rotation() {
        let a = random_matrix(40, 2, 1);
        let q0 = rotation_2d(0.7);
        let b = a.dot(&q0);
        let q = procrustes(a.view(), b.view()).unwrap();
        for (x, y) in q.iter().zip(q0.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
        let residual = (&a.dot(&q) - &b).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(residual < 1e-10);
    }

    #[test]
    fn recovers_a_planted_reflection() {
        // Reflection across the x axis: det = -1, still admissible.
        let a = random_matrix(30, 2, 2);
        let q0 = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        let b = a.dot(&q0);
        let q = procrustes(a.view(), b.view()).unwrap();
        for (x, y) in q.iter().zip(q0.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
        let det = q[(0, 0)] * q[(1, 1)] - q[(0, 1)] * q[(1, 0)];
        assert_abs_diff_eq!(det, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn q_is_orthogonal_even_for_noisy_inputs() {
        let a = random_matrix(50, 8, 3);
        let b = random_matrix(50, 8, 4);
        let q = procrustes(a.view(), b.view()).unwrap();
        assert!(orthogonality_error(&q) < 1e-10);
    }

    #[test]
    fn procrustes_rejects_bad_shapes() {
        let a = random_matrix(5, 3, 5);
        let b = random_matrix(5, 4, 6);
        assert!(procrustes(a.view(), b.view()).is_err());
        let empty = Array2::<f64>::zeros((0, 3));
        assert!(procrustes(empty.view(), empty.view()).is_err());
    }

    #[test]
    fn selection_parses_and_displays() {
        assert_eq!(
            "all".parse::<LandmarkSelection>().unwrap(),
            LandmarkSelection::AllIntersection
        );
        assert_eq!(
            "top:500".parse::<LandmarkSelection>().unwrap(),
            LandmarkSelection::TopFrequency { n: 500 }
        );
        assert!("top:x".parse::<LandmarkSelection>().is_err());
        assert!("bottom:3".parse::<LandmarkSelection>().is_err());
        assert_eq!(LandmarkSelection::TopFrequency { n: 7 }.to_string(), "top:7");
    }

    #[test]
    fn canonical_order_is_combined_frequency_then_word() {
        // v1: a=50 b=30 c=10 (T=100), v2: a=10 b=30 c=40 x=20 (T=100).
        // Combined: a=0.6 b=0.6 c=0.5 -> tie a/b broken lexicographically.
        let v1 = vocab_with(&[("a", 50), ("b", 30), ("c", 10)], 100);
        let v2 = vocab_with(&[("a", 10), ("b", 30), ("c", 40), ("x", 20)], 100);
        let all = resolve_landmarks(&v1, &v2, &LandmarkSelection::AllIntersection).unwrap();
        assert_eq!(all, ["a", "b", "c"]);
        let top2 = resolve_landmarks(&v1, &v2, &LandmarkSelection::TopFrequency { n: 2 }).unwrap();
        assert_eq!(top2, all[..2].to_vec());
        // n beyond the intersection clamps.
        let top9 = resolve_landmarks(&v1, &v2, &LandmarkSelection::TopFrequency { n: 9 }).unwrap();
        assert_eq!(top9, all);
    }

    #[test]
    fn explicit_selection_filters_and_dedups() {
        let v1 = vocab_with(&[("a", 5), ("b", 5), ("c", 5)], 15);
        let v2 = vocab_with(&[("a", 5), ("b", 5), ("z", 5)], 15);
        let sel = LandmarkSelection::Explicit {
            words: vec!["b".into(), "q".into(), "a".into(), "b".into()],
        };
        assert_eq!(resolve_landmarks(&v1, &v2, &sel).unwrap(), ["b", "a"]);
        let sel = LandmarkSelection::Explicit { words: vec!["a".into()] };
        assert!(matches!(
            resolve_landmarks(&v1, &v2, &sel),
            Err(Error::TooFewLandmarks { got: 1, need: 2 })
        ));
    }

    #[test]
    fn disjoint_vocabularies_are_an_error() {
        let v1 = vocab_with(&[("a", 5)], 5);
        let v2 = vocab_with(&[("z", 5)], 5);
        assert!(matches!(
            resolve_landmarks(&v1, &v2, &LandmarkSelection::AllIntersection),
            Err(Error::EmptyIntersection)
        ));
    }

    #[test]
    fn top_frequency_needs_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        std::fs::write(&path, "2 2\na 1.0 0.0\nb 0.0 1.0\n").unwrap();
        let loaded = EmbeddingMatrix::load(&path).unwrap();
        let v2 = vocab_with(&[("a", 5), ("b", 5)], 10);
        assert!(matches!(
            resolve_landmarks(loaded.vocab(), &v2, &LandmarkSelection::TopFrequency { n: 2 }),
            Err(Error::MissingCounts)
        ));
        // `all` still works, in lexicographic fallback order.
        let all = resolve_landmarks(loaded.vocab(), &v2, &LandmarkSelection::AllIntersection)
            .unwrap();
        assert_eq!(all, ["a", "b"]);
    }

    fn embeddings_from(vocab: Arc<Vocabulary>, rows: &Array2<f64>) -> EmbeddingMatrix {
        EmbeddingMatrix::new(vocab, rows.clone()).unwrap()
    }

    #[test]
    fn align_maps_whole_space_and_reports_residual() {
        let words: Vec<String> = (0..20).map(|i| format!("w{i:02}")).collect();
        let counts: Vec<(&str, u64)> = words.iter().map(|w| (w.as_str(), 10)).collect();
        let vocab = vocab_with(&counts, 200);
        let src_rows = random_matrix(20, 4, 9);
        // Planted orthogonal map from two random matrices.
        let q0 = procrustes(
            random_matrix(6, 4, 10).view(),
            random_matrix(6, 4, 11).view(),
        )
        .unwrap();
        let tgt_rows = src_rows.dot(&q0);
        let source = embeddings_from(vocab.clone(), &src_rows);
        let target = embeddings_from(vocab.clone(), &tgt_rows);
        let result = align(&source, &target, &LandmarkSelection::AllIntersection).unwrap();
        assert_eq!(result.landmarks.len(), 20);
        assert!(result.residual < 1e-9, "residual {}", result.residual);
        for w in vocab.words() {
            let got = result.aligned.vector(w).unwrap();
            let want = target.vector(w).unwrap();
            for (x, y) in got.iter().zip(want) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-9);
            }
        }
        for d in &result.landmark_distances {
            assert!(d.abs() < 1e-9);
        }
    }

    #[test]
    fn diagnostics_file_round_trips() {
        let vocab = vocab_with(&[("aa", 9), ("bb", 8), ("cc", 7)], 24);
        let rows = random_matrix(3, 3, 21);
        let source = embeddings_from(vocab.clone(), &rows);
        let target = embeddings_from(vocab, &random_matrix(3, 3, 22));
        let result = align(&source, &target, &LandmarkSelection::AllIntersection).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alignment.csv");
        result.write_diagnostics(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# landmarks=3"));
        assert!(lines.next().unwrap().starts_with("# residual="));
        assert_eq!(lines.next(), Some("word,distance"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn align_rejects_dimension_mismatch() {
        let vocab = vocab_with(&[("a", 5), ("b", 5)], 10);
        let e2 = embeddings_from(vocab.clone(), &random_matrix(2, 2, 30));
        let e3 = embeddings_from(vocab, &random_matrix(2, 3, 31));
        assert!(matches!(
            align(&e2, &e3, &LandmarkSelection::AllIntersection),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
