use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use tapkit_core::consistency::{agreement, consistency_bins, fleiss_kappa, rating_matrix};
use tapkit_core::dataset::{generate_synthetic, SyntheticConfig};
use tapkit_core::evaluation::{baseline_clickable, cross_validate};
use tapkit_core::model::{encode_examples, train, EncodedExamples};
use tapkit_core::signifiers::{
    accuracy_by_type, corpus_documents, dominant_colors, location_heatmap, size_stats, tfidf_keywords,
    word_count_stats, ElementClass,
};
use tapkit_core::{Corpus, EmbeddingTable, ModelCheckpoint, ModelConfig, Predictor, ScreenRecord, TypeVocab};

use crate::cli::{AgreementArgs, AnalyzeArgs, CorpusArgs, EvalArgs, HyperArgs, PredictArgs, ServeArgs, SynthArgs, TrainArgs};
use crate::UsageError;

/// Name of the embedding table `synth` writes next to the corpus.
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";

fn require_exists(path: &Path, flag: &str) -> Result<()> {
    if !path.exists() {
        return Err(UsageError(format!("{flag} {} does not exist", path.display())).into());
    }
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn resolve_embeddings(explicit: Option<&Path>, corpus: Option<&Path>) -> Result<PathBuf> {
    let path = match (explicit, corpus) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(c)) => c.join(EMBEDDINGS_FILE),
        (None, None) => return Err(UsageError("--embeddings is required".into()).into()),
    };
    require_exists(&path, "--embeddings")?;
    Ok(path)
}

fn load_embeddings(path: &Path) -> Result<Arc<EmbeddingTable>> {
    Ok(Arc::new(EmbeddingTable::load(path).with_context(|| format!("loading embeddings {}", path.display()))?))
}

fn load_vocab(path: Option<&Path>) -> Result<TypeVocab> {
    match path {
        Some(p) => {
            require_exists(p, "--vocab")?;
            Ok(TypeVocab::load(p).with_context(|| format!("loading vocabulary {}", p.display()))?)
        }
        None => Ok(TypeVocab::default()),
    }
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    require_exists(path, "--corpus")?;
    let corpus = Corpus::load(path).with_context(|| format!("loading corpus {}", path.display()))?;
    log::info!(
        "corpus {}: {} screens, {} examples, {} ratings",
        path.display(),
        corpus.screens.len(),
        corpus.examples.len(),
        corpus.ratings.len()
    );
    Ok(corpus)
}

fn model_config(hyper: &HyperArgs, embeddings: &EmbeddingTable, vocab: &TypeVocab) -> Result<ModelConfig> {
    let config = ModelConfig {
        seed: hyper.seed,
        steps: hyper.steps,
        batch_size: hyper.batch,
        learning_rate: hyper.lr,
        dropout: hyper.dropout,
        semantic_dim: embeddings.dim(),
        type_vocab_size: vocab.len(),
        ..ModelConfig::default()
    };
    config.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(config)
}

struct Training {
    config: ModelConfig,
    data: EncodedExamples,
    encoder: tapkit_core::FeatureEncoder,
    corpus: Corpus,
}

fn prepare(input: &CorpusArgs, hyper: &HyperArgs) -> Result<Training> {
    let corpus = load_corpus(&input.corpus)?;
    let embeddings = load_embeddings(&resolve_embeddings(input.embeddings.as_deref(), Some(&input.corpus))?)?;
    let vocab = load_vocab(input.vocab.as_deref())?;
    let config = model_config(hyper, &embeddings, &vocab)?;
    let encoder = config.encoder(embeddings, vocab);
    let data = encode_examples(&corpus, &encoder).context("encoding examples")?;
    if data.is_empty() {
        bail!("corpus {} has no labeled examples", input.corpus.display());
    }
    Ok(Training {
        config,
        data,
        encoder,
        corpus,
    })
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        raters: args.raters,
        disagreement: args.disagreement,
        margin: args.margin,
        max_examples: args.max_examples,
        ..SyntheticConfig::new(args.seed, args.screens)
    };
    let synth = generate_synthetic(&config).map_err(|e| UsageError(e.to_string()))?;
    synth.corpus.save(&args.out).with_context(|| format!("writing corpus {}", args.out.display()))?;
    let emb = args.out.join(EMBEDDINGS_FILE);
    fs::write(&emb, synth.embeddings.to_text()).with_context(|| format!("writing {}", emb.display()))?;
    println!(
        "wrote {} screens, {} examples, {} ratings to {}",
        synth.corpus.screens.len(),
        synth.corpus.examples.len(),
        synth.corpus.ratings.len(),
        args.out.display()
    );
    Ok(())
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let mut t = prepare(&args.input, &args.hyper)?;
    t.config.holdout_fraction = args.holdout;
    t.config.validate().map_err(|e| UsageError(e.to_string()))?;
    let outcome = train(&t.config, &t.data)?;
    let report = json!({
        "kind": "train_report",
        "examples": t.data.len(),
        "train_examples": outcome.train_indices.len(),
        "holdout_examples": outcome.holdout_indices.len(),
        "threshold": outcome.threshold,
        "calibration": outcome.calibration,
        "epochs": outcome.report.epochs,
        "final_loss": outcome.report.losses.last(),
        "losses": outcome.report.losses,
        "config": t.config,
    });
    let (threshold, calibration) = (outcome.threshold, outcome.calibration);
    let checkpoint = outcome.into_checkpoint(&t.encoder)?;
    if let Some(dir) = args.checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    checkpoint.save(&args.checkpoint)?;
    if let Some(out) = &args.out {
        write_json(out, "train_report.json", &report)?;
    }
    println!(
        "wrote {} ({}), threshold {threshold:.4} ({calibration:?})",
        args.checkpoint.display(),
        checkpoint.model_version()
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    if args.k_folds < 2 {
        return Err(UsageError("--k-folds must be at least 2".into()).into());
    }
    let t = prepare(&args.input, &args.hyper)?;
    let cv = cross_validate(&t.data, &t.config, args.k_folds)?;
    let baseline = baseline_clickable(&t.corpus.examples)?;
    let s = &cv.summary;
    println!(
        "{}-fold cv: precision {:.4} ± {:.4}, recall {:.4} ± {:.4}, accuracy {:.4} ± {:.4}, auc {:.4}",
        cv.k, s.precision.mean, s.precision.sd, s.recall.mean, s.recall.sd, s.accuracy.mean, s.accuracy.sd, s.auc.mean
    );
    println!(
        "baseline (clickable attribute): precision {:.4}, recall {:.4}, accuracy {:.4}",
        baseline.precision, baseline.recall, baseline.accuracy
    );
    if let Some(out) = &args.out {
        write_json(out, "eval.json", &json!({ "cross_validation": cv, "baseline": baseline }))?;
    }
    Ok(())
}

fn load_predictor(checkpoint: &Path, embeddings: &Path) -> Result<Predictor> {
    require_exists(checkpoint, "--checkpoint")?;
    let ckpt = ModelCheckpoint::load(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    Ok(Predictor::new(ckpt, load_embeddings(embeddings)?)?)
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    if let Some(t) = args.threshold {
        if !(t > 0.0 && t < 1.0) {
            return Err(UsageError(format!("--threshold {t} is outside (0, 1)")).into());
        }
    }
    let embeddings = resolve_embeddings(args.embeddings.as_deref(), args.corpus.as_deref())?;
    let predictor = load_predictor(&args.checkpoint, &embeddings)?;
    let screen = match (&args.screenshot, &args.hierarchy, &args.corpus, &args.screen) {
        (Some(png), Some(doc), _, _) => {
            require_exists(png, "--screenshot")?;
            require_exists(doc, "--hierarchy")?;
            ScreenRecord::from_files("screen", png, doc)?
        }
        (_, _, Some(corpus), Some(id)) => {
            let corpus = load_corpus(corpus)?;
            corpus
                .screens
                .get(id)
                .cloned()
                .ok_or_else(|| UsageError(format!("--screen {id} is not in the corpus")))?
        }
        _ => return Err(UsageError("give --screenshot and --hierarchy, or --corpus and --screen".into()).into()),
    };
    let threshold = args.threshold.unwrap_or(predictor.threshold());
    let predictions = predictor.analyze(&screen, Some(threshold))?;
    println!(
        "{:<32} {:>22} {:>9} {:>11} {:>9} {:>8}",
        "element", "bounds", "clickable", "probability", "perceived", "mismatch"
    );
    for p in &predictions {
        let b = <[i32; 4]>::from(p.bounds);
        println!(
            "{:<32} {:>22} {:>9} {:>11.4} {:>9} {:>8}",
            p.element_id,
            format!("{},{},{},{}", b[0], b[1], b[2], b[3]),
            p.clickable,
            p.probability,
            p.perceived_tappable,
            if p.mismatch { "MISMATCH" } else { "" }
        );
    }
    println!("{} elements, threshold {threshold:.4}, model {}", predictions.len(), predictor.model_version());
    if let Some(out) = &args.out {
        write_json(
            out,
            "predictions.json",
            &json!({
                "screen_id": screen.screen_id,
                "elements": predictions,
                "model_version": predictor.model_version(),
                "threshold_used": threshold,
            }),
        )?;
    }
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    if args.colors == 0 {
        return Err(UsageError("--colors must be positive".into()).into());
    }
    let corpus = load_corpus(&args.corpus)?;
    let vocab = load_vocab(args.vocab.as_deref())?;
    let out = &args.out;
    let mut written = vec![
        write_json(out, "heatmap_tappable.json", &location_heatmap(&corpus, ElementClass::Tappable))?,
        write_json(out, "heatmap_not_tappable.json", &location_heatmap(&corpus, ElementClass::NotTappable))?,
        write_json(out, "accuracy_by_type.json", &accuracy_by_type(&corpus, &vocab))?,
        write_json(out, "size_stats.json", &size_stats(&corpus, &vocab))?,
        write_json(out, "word_counts.json", &word_count_stats(&corpus))?,
    ];
    for (label, name) in [(1u8, "palette_tappable.json"), (0, "palette_not_tappable.json")] {
        let palette = dominant_colors(&corpus, label, args.colors, args.seed, args.samples);
        for w in &palette.warnings {
            log::warn!("{name}: {w}");
        }
        written.push(write_json(out, name, &palette)?);
    }
    let (tappable, not_tappable) = corpus_documents(&corpus);
    written.push(write_json(out, "tfidf.json", &tfidf_keywords(&tappable, &not_tappable, args.top_n))?);
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn agreement_cmd(args: &AgreementArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    if corpus.ratings.is_empty() {
        bail!("corpus {} has no ratings", args.corpus.display());
    }
    let vocab = load_vocab(args.vocab.as_deref())?;
    let result = agreement(&corpus, &vocab)?;
    let sets = corpus.rating_sets()?;
    let kappa = fleiss_kappa(&rating_matrix(&sets))?;
    println!(
        "{} elements: overall agreement {:.2}%, Fleiss' kappa {:.4}",
        result.per_element.len(),
        result.overall_percent,
        kappa.kappa
    );
    let bins = match &args.checkpoint {
        Some(ckpt) => {
            let embeddings = resolve_embeddings(args.embeddings.as_deref(), Some(&args.corpus))?;
            let predictor = load_predictor(ckpt, &embeddings)?;
            let bins = consistency_bins(&corpus, &predictor)?;
            for b in &bins.bins {
                match b.mean {
                    Some(m) => println!("  {:<28} n={:<5} mean probability {m:.4}", b.label, b.probabilities.len()),
                    None => println!("  {:<28} empty", b.label),
                }
            }
            Some(bins)
        }
        None => None,
    };
    if let Some(out) = &args.out {
        write_json(out, "agreement.json", &result)?;
        write_json(out, "kappa.json", &kappa)?;
        if let Some(bins) = &bins {
            write_json(out, "consistency_bins.json", bins)?;
        }
    }
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    require_exists(&args.checkpoint, "--checkpoint")?;
    require_exists(&args.embeddings, "--embeddings")?;
    let runtime = tokio::runtime::Runtime::new()?;
    let addr = std::net::SocketAddr::new(args.host, args.port);
    runtime.block_on(tapkit_server::serve(addr, args.checkpoint.clone(), args.embeddings.clone()))?;
    Ok(())
}
