use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, ensure, Result};
use lsc_core::{
    accuracy, align, build_feature_table, build_vocabulary, default_sweep_grid,
    generate_synthetic_shift, landmark_sweep, majority_class_baseline, read_binary_gold,
    read_graded_gold, read_word_list, score_pipeline, spearman, train_parallel, write_sweep_csv,
    CorpusStream, EmbeddingMatrix, FeatureParams, GoldLabels, LandmarkSelection, SgnsConfig,
    SweepConfig, SyntheticShiftConfig, Vocabulary,
};

use crate::config::RunConfig;

/// Tags an error with the pipeline stage it aborted in.
trait Stage<T> {
    fn stage(self, name: &'static str) -> Result<T>;
}

impl<T, E> Stage<T> for std::result::Result<T, E>
where
    E: std::error::Error + Send + Sync + 'static,
{
    fn stage(self, name: &'static str) -> Result<T> {
        self.map_err(|e| anyhow::Error::new(e).context(format!("stage {name}")))
    }
}

/// Caps the shared worker pool; training additionally takes the thread
/// count explicitly. Later calls are no-ops by design.
pub fn setup_threads(threads: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
}

fn require_input<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let p = path
        .as_deref()
        .ok_or_else(|| anyhow!("stage config: {key} is required for this command"))?;
    ensure!(
        p.exists(),
        "stage config: {key} path {} does not exist",
        p.display()
    );
    Ok(p)
}

fn optional_input<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<Option<&'a Path>> {
    path.as_ref().map(|_| require_input(path, key)).transpose()
}

/// Creates the output directory and persists the effective configuration.
fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).stage("write")?;
    fs::write(cfg.out.join("config.resolved"), cfg.render_resolved()).stage("write")?;
    Ok(())
}

struct SidePaths {
    vectors: PathBuf,
    vocab: PathBuf,
}

fn side_paths(out: &Path, side: usize) -> SidePaths {
    let dir = out.join("embeddings");
    SidePaths {
        vectors: dir.join(format!("corpus{side}.vec")),
        vocab: dir.join(format!("corpus{side}.vocab")),
    }
}

fn train_side(cfg: &RunConfig, corpus: &Path, side: usize) -> Result<EmbeddingMatrix> {
    let stream = CorpusStream::open(corpus).stage("corpus")?;
    let vocab = build_vocabulary(&stream, cfg.sgns.min_count).stage("vocab")?;
    let sgns = SgnsConfig {
        seed: cfg.seed + side as u64 - 1,
        ..cfg.sgns.clone()
    };
    let t = Instant::now();
    let emb = train_parallel(&stream, Arc::new(vocab), &sgns, cfg.threads).stage("train")?;
    println!(
        "corpus{side}: trained {} words x {} dims in {:.1}s ({} tokens)",
        emb.len(),
        emb.dim(),
        t.elapsed().as_secs_f64(),
        emb.vocab().total_tokens()
    );
    Ok(emb)
}

fn save_side(emb: &EmbeddingMatrix, paths: &SidePaths) -> Result<()> {
    emb.save(&paths.vectors).stage("write")?;
    emb.vocab().export(&paths.vocab).stage("write")?;
    println!("wrote {}", paths.vectors.display());
    Ok(())
}

fn load_side(paths: &SidePaths) -> Result<EmbeddingMatrix> {
    let vocab = Vocabulary::import(&paths.vocab).stage("load")?;
    EmbeddingMatrix::load(&paths.vectors)
        .stage("load")?
        .with_vocabulary(Arc::new(vocab))
        .stage("load")
}

/// Loads cached embeddings from the output directory, training and saving
/// them first when absent. Scoring always reads the persisted files so
/// fresh and cached runs produce identical downstream artifacts.
fn ensure_embeddings(cfg: &RunConfig) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let p1 = side_paths(&cfg.out, 1);
    let p2 = side_paths(&cfg.out, 2);
    if !(p1.vectors.exists() && p1.vocab.exists() && p2.vectors.exists() && p2.vocab.exists()) {
        let c1 = require_input(&cfg.corpus1, "corpus1")?;
        let c2 = require_input(&cfg.corpus2, "corpus2")?;
        fs::create_dir_all(cfg.out.join("embeddings")).stage("write")?;
        save_side(&train_side(cfg, c1, 1)?, &p1)?;
        save_side(&train_side(cfg, c2, 2)?, &p2)?;
    } else {
        println!(
            "loading cached embeddings from {}",
            cfg.out.join("embeddings").display()
        );
    }
    Ok((load_side(&p1)?, load_side(&p2)?))
}

fn parse_landmarks(spec: &str) -> Result<LandmarkSelection> {
    if let Some(path) = spec.strip_prefix("file:") {
        let words = read_word_list(Path::new(path)).stage("landmarks")?;
        Ok(LandmarkSelection::Explicit { words })
    } else {
        spec.parse::<LandmarkSelection>().stage("landmarks")
    }
}

fn feature_params(cfg: &RunConfig) -> FeatureParams {
    FeatureParams {
        features: cfg.features.clone(),
        map_k: cfg.map_k,
        freq_sign: cfg.freq_sign,
    }
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let c1 = require_input(&cfg.corpus1, "corpus1")?;
    let c2 = require_input(&cfg.corpus2, "corpus2")?;
    prepare_out(cfg)?;
    fs::create_dir_all(cfg.out.join("embeddings")).stage("write")?;
    save_side(&train_side(cfg, c1, 1)?, &side_paths(&cfg.out, 1))?;
    save_side(&train_side(cfg, c2, 2)?, &side_paths(&cfg.out, 2))?;
    Ok(())
}

pub fn score(cfg: &RunConfig) -> Result<()> {
    prepare_out(cfg)?;
    let (e1, e2) = ensure_embeddings(cfg)?;
    let intersection = e1.vocab().intersect(e2.vocab()).len();
    let selection = parse_landmarks(&cfg.landmarks)?;
    let result = align(&e1, &e2, &selection).stage("align")?;
    println!(
        "vocabularies {} / {} words, intersection {}; {} landmarks, alignment residual {:.6}",
        e1.len(),
        e2.len(),
        intersection,
        result.landmarks.len(),
        result.residual
    );
    result
        .write_diagnostics(&cfg.out.join("alignment.csv"))
        .stage("write")?;

    let mut table =
        build_feature_table(&result.aligned, &e2, &feature_params(cfg)).stage("features")?;
    table.set_landmark_note(cfg.landmarks.clone());
    table.write_csv(&cfg.out.join("features.csv")).stage("write")?;

    let scored = score_pipeline(&table, cfg.threshold).stage("score")?;
    scored.write_csv(&cfg.out.join("scores.csv")).stage("write")?;

    let selected;
    let answers = match optional_input(&cfg.targets, "targets")? {
        Some(path) => {
            let words = read_word_list(path).stage("targets")?;
            selected = scored.select_targets(&words, cfg.policy).stage("targets")?;
            &selected
        }
        None => &scored,
    };
    let task1 = cfg.out.join("answer").join("task1");
    let task2 = cfg.out.join("answer").join("task2");
    fs::create_dir_all(&task1).stage("write")?;
    fs::create_dir_all(&task2).stage("write")?;
    answers
        .write_answer_labels(&task1.join("answer.txt"))
        .stage("write")?;
    answers
        .write_answer_scores(&task2.join("answer.txt"))
        .stage("write")?;

    let changed = answers.rows().iter().filter(|r| r.label).count();
    println!(
        "scored {} words at t = {}: {} labeled changed",
        answers.rows().len(),
        cfg.threshold,
        changed
    );
    println!(
        "wrote features.csv, scores.csv, alignment.csv, answer/task1, answer/task2 under {}",
        cfg.out.display()
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    ensure!(
        cfg.gold.is_some() || cfg.gold_graded.is_some(),
        "stage config: eval needs --gold and/or --gold-graded"
    );
    prepare_out(cfg)?;
    let mut metrics: Vec<(&str, String)> = Vec::new();
    if let Some(path) = optional_input(&cfg.gold, "gold")? {
        let gold = read_binary_gold(path).stage("gold")?;
        let pred_path = cfg.out.join("answer").join("task1").join("answer.txt");
        let pred = read_binary_gold(&pred_path).stage("eval")?;
        let acc = accuracy(&pred, &gold).stage("eval")?;
        let maj = majority_class_baseline(&gold).stage("eval")?;
        println!("binary task: accuracy {:.6} over {} words", acc, gold.len());
        println!(
            "majority-class baseline: always predict {} -> accuracy {:.6}",
            u8::from(maj.class),
            maj.accuracy
        );
        metrics.push(("accuracy", format!("{acc:.6}")));
        metrics.push(("majority-class", u8::from(maj.class).to_string()));
        metrics.push(("majority-accuracy", format!("{:.6}", maj.accuracy)));
    }
    if let Some(path) = optional_input(&cfg.gold_graded, "gold-graded")? {
        let gold = read_graded_gold(path).stage("gold")?;
        let pred_path = cfg.out.join("answer").join("task2").join("answer.txt");
        let pred = read_graded_gold(&pred_path).stage("eval")?;
        let rho = spearman(&pred, &gold).stage("eval")?;
        println!("graded task: spearman rho {:.6} over {} words", rho, gold.len());
        metrics.push(("spearman", format!("{rho:.6}")));
    }
    let mut csv = String::from("metric,value\n");
    for (name, value) in &metrics {
        csv.push_str(&format!("{name},{value}\n"));
    }
    let path = cfg.out.join("metrics.csv");
    fs::write(&path, csv).stage("write")?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    ensure!(
        cfg.gold.is_some() || cfg.gold_graded.is_some(),
        "stage config: sweep needs --gold and/or --gold-graded"
    );
    prepare_out(cfg)?;
    let (e1, e2) = ensure_embeddings(cfg)?;
    let binary = optional_input(&cfg.gold, "gold")?;
    let graded = optional_input(&cfg.gold_graded, "gold-graded")?;
    let gold = GoldLabels::load(binary, graded).stage("gold")?;
    let n = e1.vocab().intersect(e2.vocab()).len();
    let grid = if cfg.grid.is_empty() {
        default_sweep_grid(n)
    } else {
        cfg.grid.clone()
    };
    println!("sweeping {} landmark counts (intersection {})", grid.len(), n);
    let sweep_cfg = SweepConfig {
        grid,
        threshold: cfg.threshold,
        params: feature_params(cfg),
        policy: cfg.policy,
    };
    let points = landmark_sweep(&e1, &e2, &gold, &sweep_cfg).stage("sweep")?;
    for p in &points {
        let fmt = |v: Option<f64>| v.map_or("-".to_owned(), |x| format!("{x:.6}"));
        println!(
            "n {:>6}: accuracy {}, spearman {}",
            p.n,
            fmt(p.accuracy),
            fmt(p.spearman)
        );
    }
    let path = cfg.out.join("sweep.csv");
    write_sweep_csv(&points, &path).stage("write")?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let base = require_input(&cfg.corpus1, "corpus1")?;
    let targets_path = require_input(&cfg.targets, "targets")?;
    prepare_out(cfg)?;
    let stream = CorpusStream::open(base).stage("corpus")?;
    let targets = read_word_list(targets_path).stage("targets")?;
    let synth_cfg = SyntheticShiftConfig {
        shift_rate: cfg.shift_rate,
        controls: cfg.controls,
        min_count: cfg.sgns.min_count,
        seed: cfg.seed,
    };
    let out_dir = cfg.out.join("synth");
    let outcome = generate_synthetic_shift(&stream, &targets, &synth_cfg, &out_dir).stage("synth")?;
    println!("synthetic corpus pair under {}:", out_dir.display());
    for (target, donor) in &outcome.donors {
        println!("  {target} absorbs contexts of {donor} (rate {})", cfg.shift_rate);
    }
    println!(
        "{} targets, {} controls; gold at {} and {}",
        outcome.targets.len(),
        outcome.controls.len(),
        outcome.gold_binary.display(),
        outcome.gold_graded.display()
    );
    Ok(())
}
