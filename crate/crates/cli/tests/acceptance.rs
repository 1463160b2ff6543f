//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. Pass a
//! substring as the first argument to run only matching criteria.

use std::collections::BTreeSet;
use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use image::ImageFormat;
use tapkit_core::consistency::{agreement_score, consistency_bins, fleiss_kappa};
use tapkit_core::dataset::{generate_synthetic, SyntheticConfig, SyntheticCorpus};
use tapkit_core::evaluation::{baseline_clickable, cross_validate, pr_curve};
use tapkit_core::model::{encode_examples, fit, predict_scores, train, EncodedExamples};
use tapkit_core::nn::toy::{ConvToy, DenseToy, DropoutToy, EmbeddingToy};
use tapkit_core::nn::{conv_forward, dense_forward, gradient_check, maxpool_forward, LayerParams, Tensor};
use tapkit_core::signifiers::{dominant_colors, kmeans, tfidf_keywords};
use tapkit_core::{Corpus, EmbeddingTable, ModelCheckpoint, ModelConfig, Network, Predictor, RngStream, ScreenRecord, TypeVocab};
use tapkit_server::{router, AnalysisResponse, ServerState};
use tower::ServiceExt;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Learning-capacity corpus: planted rule, 20% clickable/label disagreement.
struct Planted {
    synth: SyntheticCorpus,
    embeddings: Arc<EmbeddingTable>,
}

impl Planted {
    fn new(seed: u64, examples: usize) -> Self {
        let mut cfg = SyntheticConfig::new(seed, 10_000);
        cfg.max_examples = Some(examples);
        assert_eq!(cfg.disagreement, 0.2);
        let synth = generate_synthetic(&cfg).expect("synthetic corpus");
        let embeddings = Arc::new(synth.embeddings.clone());
        Self { synth, embeddings }
    }

    fn encode(&self, config: &ModelConfig) -> EncodedExamples {
        let encoder = config.encoder(self.embeddings.clone(), TypeVocab::default());
        encode_examples(&self.synth.corpus, &encoder).expect("encodable corpus")
    }
}

/// Full-size architecture with the step budget used for the capacity runs.
fn capacity_config() -> ModelConfig {
    ModelConfig {
        steps: 1000,
        batch_size: 16,
        learning_rate: 0.03,
        dropout: 0.2,
        ..ModelConfig::default()
    }
}

fn gradient_suite() -> Check {
    let start = Instant::now();
    let x: Vec<f64> = Tensor::<f64>::uniform(&[6], 1.0, &mut RngStream::new(2)).into_data();
    let mut results = vec![
        ("dense", gradient_check(&mut DenseToy::new(6, 5, 1), &x, 1).max_relative_error),
        (
            "conv+pool",
            gradient_check(&mut ConvToy::new([8, 6, 2], 3, 3), &Tensor::uniform(&[8, 6, 2], 1.0, &mut RngStream::new(4)), 0)
                .max_relative_error,
        ),
        ("embedding", gradient_check(&mut EmbeddingToy::new(5, 4, 5), &3, 1).max_relative_error),
        ("dropout mask", gradient_check(&mut DropoutToy::new(6, 8, Some(0.4), 6), &x, 0).max_relative_error),
        ("dropout off", gradient_check(&mut DropoutToy::new(6, 8, None, 6), &x, 0).max_relative_error),
    ];

    let config = ModelConfig::miniature();
    let mut net: Network = Network::build(&config).map_err(|e| e.to_string())?;
    // Redraw the zero-initialized output layer with the Glorot bound; with
    // zero output weights every upstream gradient vanishes.
    let fan_in = *config.fc_widths.last().unwrap();
    let out = net.layers_mut().last_mut().unwrap();
    out.weights = Tensor::uniform(out.weights.shape(), (6.0 / (fan_in + 1) as f64).sqrt(), &mut RngStream::new(100));
    let mut net = net.cast::<f64>();
    let data = Planted::new(1, 24).encode(&config);
    let r = gradient_check(&mut net, &data.bundles[0].cast::<f64>(), data.labels[0]);
    results.push(("miniature network", r.max_relative_error));

    let elapsed = start.elapsed();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail = results.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    ensure(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!("{detail}; {:.1}s (limit 1e-4, 60s)", elapsed.as_secs_f64()),
    )
}

fn oracle_equivalence() -> Check {
    let mut failures = Vec::new();
    let mut check = |name: &str, err: f64, tol: f64| {
        if !(err <= tol) {
            failures.push(format!("{name} off by {err:e} (tol {tol:e})"));
        }
    };

    // conv: direct zero-padded summation.
    let (h, w, cin, cout) = (6, 5, 3, 4);
    let mut rng = RngStream::new(7);
    let input = Tensor::<f64>::uniform(&[h, w, cin], 1.0, &mut rng);
    let mut conv = LayerParams::<f64>::conv3x3(cin, cout, &mut rng);
    conv.bias = Some(Tensor::uniform(&[cout], 1.0, &mut rng));
    let got = conv_forward(&input, &conv).map_err(|e| e.to_string())?;
    let (x, k, b) = (input.data(), conv.weights.data(), conv.bias.as_ref().unwrap().data());
    let mut err: f64 = 0.0;
    for i in 0..h as i64 {
        for j in 0..w as i64 {
            for f in 0..cout {
                let mut s = b[f];
                for di in -1..=1i64 {
                    for dj in -1..=1i64 {
                        let (y, xx) = (i + di, j + dj);
                        if y < 0 || xx < 0 || y >= h as i64 || xx >= w as i64 {
                            continue;
                        }
                        for c in 0..cin {
                            let kw = k[(((di + 1) as usize * 3 + (dj + 1) as usize) * cin + c) * cout + f];
                            s += x[(y as usize * w + xx as usize) * cin + c] * kw;
                        }
                    }
                }
                err = err.max((got.data()[(i as usize * w + j as usize) * cout + f] - s).abs());
            }
        }
    }
    check("conv", err, 1e-12);

    // pool: max over each 2x2 block, trailing row/column dropped.
    let (pooled, _) = maxpool_forward(&input).map_err(|e| e.to_string())?;
    let mut err: f64 = 0.0;
    for i in 0..h / 2 {
        for j in 0..w / 2 {
            for c in 0..cin {
                let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|(a, bb)| x[((2 * i + a) * w + 2 * j + bb) * cin + c])
                    .fold(f64::NEG_INFINITY, f64::max);
                err = err.max((pooled.data()[(i * (w / 2) + j) * cin + c] - m).abs());
            }
        }
    }
    check("pool", err, 0.0);

    // dense: row-vector times matrix plus bias.
    let mut dense = LayerParams::<f64>::dense(5, 3, &mut rng);
    dense.bias = Some(Tensor::uniform(&[3], 1.0, &mut rng));
    let v: Vec<f64> = (0..5).map(|i| f64::from(i) * 0.3 - 0.5).collect();
    let got = dense_forward(&v, &dense).map_err(|e| e.to_string())?;
    let err = (0..3)
        .map(|o| {
            let s: f64 = dense.bias.as_ref().unwrap().data()[o] + (0..5).map(|i| v[i] * dense.weights.data()[i * 3 + o]).sum::<f64>();
            (got[o] - s).abs()
        })
        .fold(0.0, f64::max);
    check("dense", err, 1e-12);

    // PR AUC: every threshold counted from scratch, trapezoids over recall.
    let mut r = RngStream::new(9);
    let scores: Vec<f64> = (0..20).map(|_| (r.uniform() * 6.0).floor() / 6.0).collect();
    let mut labels: Vec<u8> = (0..20).map(|_| u8::from(r.bernoulli(0.5))).collect();
    labels[0] = 1;
    let mut ts = scores.clone();
    ts.sort_by(|a, b| b.total_cmp(a));
    ts.dedup();
    let npos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| {
            let idx: Vec<usize> = (0..20).filter(|&i| scores[i] >= t).collect();
            let tp = idx.iter().filter(|&&i| labels[i] == 1).count() as f64;
            (tp / npos, tp / idx.len() as f64)
        })
        .collect();
    let mut auc = 0.0;
    let (mut r0, mut p0) = (0.0, pts[0].1);
    for &(rc, p) in &pts {
        auc += (rc - r0) * (p + p0) / 2.0;
        (r0, p0) = (rc, p);
    }
    check("pr_curve AUC", (pr_curve(&scores, &labels).map_err(|e| e.to_string())?.auc - auc).abs(), 1e-9);

    // k-means: three separable pure-color groups.
    let pure = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let points: Vec<[f64; 3]> = pure.iter().flat_map(|c| std::iter::repeat_n(*c, 30)).collect();
    let km = kmeans(&points, 3, &mut RngStream::new(3));
    let err = pure
        .iter()
        .map(|c| {
            km.centroids
                .iter()
                .map(|m| (0..3).map(|i| (m[i] - c[i]).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    check("k-means centroids", err, 1e-6);
    check("k-means proportions", km.counts.iter().map(|&n| (n as f64 / 90.0 - 1.0 / 3.0).abs()).fold(0.0, f64::max), 1e-12);

    // TF-IDF: tf = count / length, idf = ln(2 / df).
    let kw = tfidf_keywords("save save open share", "open photo", 10);
    let save = kw.tappable.iter().find(|k| k.term == "save").map_or(f64::NAN, |k| k.score);
    check("tf-idf", (save - 0.5 * 2f64.ln()).abs(), 1e-12);
    check("tf-idf shared term", f64::from(u8::from(kw.tappable.iter().any(|k| k.term == "open"))), 0.0);

    // Agreement scores and Fleiss' kappa.
    for (votes, want) in [([1u8, 1, 1, 1, 1], 1.0), ([1, 1, 1, 1, 0], 0.68), ([1, 1, 1, 0, 0], 0.52)] {
        check(&format!("agreement {want}"), (agreement_score(&votes).map_err(|e| e.to_string())? - want).abs(), 1e-12);
    }
    // (5,0),(0,5),(4,1),(1,4): P-bar 0.8, Pe 0.5, kappa 0.6.
    let kappa = fleiss_kappa(&[vec![5, 0], vec![0, 5], vec![4, 1], vec![1, 4]]).map_err(|e| e.to_string())?;
    check("Fleiss' kappa", (kappa.kappa - 0.6).abs(), 1e-12);

    ensure(failures.is_empty(), if failures.is_empty() { "conv, pool, dense, AUC, k-means, tf-idf, agreement, kappa".into() } else { failures.join("; ") })
}

fn train_accuracy(net: &Network, data: &EncodedExamples) -> Result<f64, String> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let scores = predict_scores(net, data, &idx).map_err(|e| e.to_string())?;
    let hits = scores.iter().zip(&data.labels).filter(|(s, &l)| (**s >= 0.5) == (l == 1)).count();
    Ok(hits as f64 / data.len() as f64)
}

fn overfit() -> Check {
    let config = ModelConfig {
        steps: 2000,
        ..ModelConfig::default()
    };
    let data = Planted::new(7, 32).encode(&config);
    let start = Instant::now();
    let mut net = Network::build(&config).map_err(|e| e.to_string())?;
    let idx: Vec<usize> = (0..data.len()).collect();
    fit(&mut net, &data, &idx).map_err(|e| e.to_string())?;
    let acc = train_accuracy(&net, &data)?;
    ensure(
        data.len() == 32 && acc >= 0.95,
        format!("{} examples, train accuracy {:.3} after {} steps (need >= 0.95); {:.0}s", data.len(), acc, config.steps, start.elapsed().as_secs_f64()),
    )
}

fn cross_validation(planted: &Planted) -> Check {
    let config = capacity_config();
    let data = planted.encode(&config);
    let start = Instant::now();
    let cv = cross_validate(&data, &config, 5).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let base = baseline_clickable(&planted.synth.corpus.examples).map_err(|e| e.to_string())?;
    let (p, r) = (cv.summary.precision.mean, cv.summary.recall.mean);
    ensure(
        data.len() == 600 && p >= 0.9 && r >= 0.9 && p > base.precision && r > base.recall && elapsed < Duration::from_secs(15 * 60),
        format!(
            "5-fold on {}: precision {p:.3} recall {r:.3} vs baseline {:.3}/{:.3}; {:.0}s (limit 900s)",
            data.len(),
            base.precision,
            base.recall,
            elapsed.as_secs_f64()
        ),
    )
}

fn trained_predictor(planted: &Planted) -> Result<Predictor, String> {
    let config = capacity_config();
    let encoder = config.encoder(planted.embeddings.clone(), TypeVocab::default());
    let data = encode_examples(&planted.synth.corpus, &encoder).map_err(|e| e.to_string())?;
    let checkpoint = train(&config, &data).and_then(|o| o.into_checkpoint(&encoder)).map_err(|e| e.to_string())?;
    Predictor::new(checkpoint, planted.embeddings.clone()).map_err(|e| e.to_string())
}

fn calibration(predictor: &Predictor) -> Check {
    let mut cfg = SyntheticConfig::new(21, 300);
    cfg.raters = 5;
    cfg.margin = 0.0;
    let raters = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
    let bins = consistency_bins(&raters.corpus, predictor).map_err(|e| e.to_string())?;
    let means: Vec<Option<f64>> = bins.bins.iter().map(|b| b.mean).collect();
    let all_present = means.iter().all(Option::is_some);
    let m: Vec<f64> = means.iter().flatten().copied().collect();
    let increasing = m.windows(2).all(|w| w[0] < w[1]);
    let detail = bins
        .bins
        .iter()
        .map(|b| format!("{}: {} (n={})", b.tappable_votes, b.mean.map_or("empty".into(), |v| format!("{v:.3}")), b.probabilities.len()))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(all_present && increasing, format!("bin means by tappable votes {detail}"))
}

fn tapkit(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tapkit"))
        .args(args)
        .env("TAPKIT_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("tapkit {args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn determinism(predictor: &Predictor, embeddings: &Arc<EmbeddingTable>, rt: &tokio::runtime::Runtime) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |path: &Path| path.to_str().unwrap().to_string();
    let mut runs = Vec::new();
    for run in 0..2 {
        let root = dir.path().join(format!("run{run}"));
        let corpus = root.join("corpus");
        let ckpt = root.join("model.tapk");
        let analysis = root.join("analysis");
        tapkit(&["synth", "--seed", "3", "--screens", "12", "--out", &p(&corpus)])?;
        tapkit(&["train", "--corpus", &p(&corpus), "--steps", "40", "--batch", "8", "--checkpoint", &p(&ckpt)])?;
        tapkit(&["eval", "--corpus", &p(&corpus), "--steps", "20", "--batch", "8", "--k-folds", "3", "--out", &p(&root)])?;
        tapkit(&["analyze", "--corpus", &p(&corpus), "--seed", "5", "--out", &p(&analysis)])?;
        let read = |f: &Path| std::fs::read(f).map_err(|e| format!("{}: {e}", f.display()));
        runs.push([
            read(&ckpt)?,
            read(&root.join("eval.json"))?,
            read(&analysis.join("palette_tappable.json"))?,
            read(&analysis.join("palette_not_tappable.json"))?,
        ]);
    }
    let names = ["checkpoint bytes", "eval summary", "tappable palette", "not-tappable palette"];
    let mut differing: Vec<&str> = (0..4).filter(|&i| runs[0][i] != runs[1][i]).map(|i| names[i]).collect();

    // In-process: palettes and API bodies from independently loaded models.
    let planted = Planted::new(4, 80);
    let palette = || serde_json::to_vec(&dominant_colors(&planted.synth.corpus, 1, 10, 9, 64)).unwrap();
    if palette() != palette() {
        differing.push("in-process palette");
    }
    let bytes = predictor.checkpoint().to_bytes();
    let screen = heldout_screen();
    let bodies: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let ckpt = ModelCheckpoint::from_bytes(&bytes).unwrap();
            let app = router(ServerState::ready(Predictor::new(ckpt, embeddings.clone()).unwrap()));
            rt.block_on(post(app, "/analyze?threshold=0.3", analyze_body(&screen))).1
        })
        .collect();
    if bodies[0] != bodies[1] {
        differing.push("API response");
    }
    ensure(
        differing.is_empty(),
        if differing.is_empty() {
            "two runs: checkpoint bytes, eval summary, palettes and API responses identical".into()
        } else {
            format!("differs between runs: {}", differing.join(", "))
        },
    )
}

fn serialization(predictor: &Predictor) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("m.tapk");
    let ckpt = predictor.checkpoint();
    ckpt.save(&path).map_err(|e| e.to_string())?;
    let loaded = ModelCheckpoint::load(&path).map_err(|e| e.to_string())?;
    let same_bytes = loaded.to_bytes() == ckpt.to_bytes();

    let planted = Planted::new(8, 120);
    let data = planted.encode(ckpt.network.config());
    let idx: Vec<usize> = (0..data.len()).collect();
    let before = predict_scores(&ckpt.network, &data, &idx).map_err(|e| e.to_string())?;
    let after = predict_scores(&loaded.network, &data, &idx).map_err(|e| e.to_string())?;
    let same_predictions = before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits());

    let mut rated = SyntheticConfig::new(6, 10);
    rated.raters = 5;
    let mut corpora_ok = true;
    for corpus in [planted.synth.corpus.clone(), generate_synthetic(&rated).map_err(|e| e.to_string())?.corpus] {
        let d = dir.path().join(format!("c{}", corpus.examples.len()));
        corpus.save(&d).map_err(|e| e.to_string())?;
        corpora_ok &= Corpus::load(&d).map_err(|e| e.to_string())? == corpus;
    }
    ensure(
        same_bytes && same_predictions && corpora_ok,
        format!(
            "checkpoint bytes {}, {} predictions bit-identical {}, corpus round trips {}",
            same_bytes, data.len(), same_predictions, corpora_ok
        ),
    )
}

const BOUNDARY: &str = "tapkit-acceptance";

fn heldout_screen() -> ScreenRecord {
    let mut cfg = SyntheticConfig::new(99, 1);
    cfg.disagreement = 0.5;
    generate_synthetic(&cfg).unwrap().corpus.screens.into_values().next().unwrap()
}

fn multipart(parts: &[(&str, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, bytes) in parts {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\n\r\n").as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

fn screen_parts(screen: &ScreenRecord) -> (Vec<u8>, Vec<u8>) {
    let mut png = Cursor::new(Vec::new());
    screen.screenshot.write_to(&mut png, ImageFormat::Png).unwrap();
    (png.into_inner(), serde_json::to_vec(&screen.root).unwrap())
}

fn analyze_body(screen: &ScreenRecord) -> Vec<u8> {
    let (png, json) = screen_parts(screen);
    multipart(&[("screenshot", &png), ("hierarchy", &json)])
}

async fn post(app: Router, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn api_contract(predictor: &Predictor, rt: &tokio::runtime::Runtime) -> Check {
    let app = router(ServerState::ready(predictor.clone()));
    let screen = heldout_screen();
    let body = analyze_body(&screen);
    let mut problems = Vec::new();
    let mut previous: Option<BTreeSet<String>> = None;
    let mut counts = Vec::new();
    for i in 1..=20 {
        let t = f64::from(i) / 21.0;
        let (status, bytes) = rt.block_on(post(app.clone(), &format!("/analyze?threshold={t}"), body.clone()));
        if status != StatusCode::OK {
            problems.push(format!("threshold {t}: status {status}"));
            continue;
        }
        let resp: AnalysisResponse = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
        let set: BTreeSet<String> = resp.elements.iter().filter(|e| e.perceived_tappable).map(|e| e.element_id.clone()).collect();
        if resp.threshold_used != t || resp.elements.iter().any(|e| e.perceived_tappable != (e.probability >= t)) {
            problems.push(format!("threshold {t}: flags disagree with probabilities"));
        }
        if previous.as_ref().is_some_and(|p| !set.is_subset(p)) {
            problems.push(format!("threshold {t} added perceived-tappable elements"));
        }
        counts.push(set.len());
        previous = Some(set);
    }

    let (png, json) = screen_parts(&screen);
    let malformed: Vec<(&str, String, Vec<u8>)> = vec![
        ("missing screenshot", "/analyze".into(), multipart(&[("hierarchy", &json)])),
        ("missing hierarchy", "/analyze".into(), multipart(&[("screenshot", &png)])),
        ("invalid JSON", "/analyze".into(), multipart(&[("screenshot", &png), ("hierarchy", b"{\"class\": ")])),
        ("non-image screenshot", "/analyze".into(), multipart(&[("screenshot", b"not a png"), ("hierarchy", &json)])),
        ("node without bounds", "/analyze".into(), multipart(&[("screenshot", &png), ("hierarchy", br#"{"class": "View"}"#)])),
        ("threshold 0", "/analyze?threshold=0".into(), body.clone()),
        ("threshold 1.5", "/analyze?threshold=1.5".into(), body.clone()),
        ("threshold NaN", "/analyze?threshold=NaN".into(), body.clone()),
        ("truncated multipart", "/analyze".into(), format!("--{BOUNDARY}\r\nContent-Dis").into_bytes()),
    ];
    let n_malformed = malformed.len();
    for (what, uri, payload) in malformed {
        let (status, bytes) = rt.block_on(post(app.clone(), &uri, payload));
        let reason = serde_json::from_slice::<serde_json::Value>(&bytes)
            .ok()
            .and_then(|v| v["error"].as_str().map(String::from))
            .unwrap_or_default();
        if status != StatusCode::BAD_REQUEST || reason.is_empty() {
            problems.push(format!("{what}: status {status}, reason {reason:?}"));
        }
    }
    ensure(
        problems.is_empty(),
        if problems.is_empty() {
            format!("20 thresholds monotone (perceived tappable {:?}); {n_malformed} malformed payloads -> 400 with reasons", counts)
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |name: &str| filter.as_deref().is_none_or(|f| name.contains(f));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let mut results: Vec<(&str, Check, Duration)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Check| {
        if !wanted(name) {
            return;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(&mut *f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let line = match &outcome {
            Ok(d) => format!("PASS {name}: {d}"),
            Err(d) => format!("FAIL {name}: {d}"),
        };
        println!("{line}");
        results.push((name, outcome, start.elapsed()));
    };

    run("gradient_suite", &mut gradient_suite);
    run("oracle_equivalence", &mut oracle_equivalence);
    run("learning_capacity_overfit", &mut overfit);
    let needs_model = ["learning_capacity_cv", "calibration_bins", "determinism", "serialization", "api_contract"];
    if needs_model.iter().any(|n| wanted(n)) {
        let planted = Planted::new(11, 600);
        run("learning_capacity_cv", &mut || cross_validation(&planted));
        let predictor = trained_predictor(&planted);
        let with_model = |f: &dyn Fn(&Predictor) -> Check| predictor.as_ref().map_err(|e| format!("training failed: {e}")).and_then(f);
        run("calibration_bins", &mut || with_model(&calibration));
        run("determinism", &mut || with_model(&|p| determinism(p, &planted.embeddings, &rt)));
        run("serialization", &mut || with_model(&serialization));
        run("api_contract", &mut || with_model(&|p| api_contract(p, &rt)));
    }

    let failed = results.iter().filter(|r| r.1.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.0}s)",
        results.len() - failed,
        results.iter().map(|r| r.2.as_secs_f64()).sum::<f64>()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
