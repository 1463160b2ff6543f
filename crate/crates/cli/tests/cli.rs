use std::path::Path;
use std::process::{Command, Output};

use tapkit_core::dataset::{select_elements, SelectionCaps};
use tapkit_core::model::SELECTION_SEED;
use tapkit_core::{Corpus, RngStream};

fn tapkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tapkit"))
        .args(args)
        .env("TAPKIT_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tapkit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    tapkit(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("d");
    let ckpt = dir.path().join("m.tapk");
    ok(&["synth", "--seed", "7", "--screens", "10", "--out", p(&corpus)]);
    ok(&["train", "--corpus", p(&corpus), "--steps", "15", "--batch", "8", "--checkpoint", p(&ckpt)]);
    assert!(ckpt.exists());
    let out = ok(&[
        "eval", "--corpus", p(&corpus), "--steps", "5", "--batch", "8", "--k-folds", "3", "--out", p(dir.path()),
    ]);
    assert!(out.contains("3-fold cv"));
    assert!(out.contains("baseline"));
    let eval: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("eval.json")).unwrap()).unwrap();
    assert_eq!(eval["cross_validation"]["folds"].as_array().unwrap().len(), 3);
    assert_eq!(eval["baseline"]["kind"], "baseline_clickable");
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&["train"]), 1);
    assert_eq!(code(&["train", "--corpus", "/nonexistent/corpus"]), 1);
    assert_eq!(code(&["synth", "--bogus-flag"]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["predict", "--checkpoint", "x.tapk", "--screenshot", "s.png"]), 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("d");
    std::fs::create_dir_all(&corpus).unwrap();
    std::fs::write(corpus.join("corpus.json"), "{ not json").unwrap();
    assert_eq!(code(&["analyze", "--corpus", p(&corpus), "--out", p(&dir.path().join("a"))]), 2);

    let bad = dir.path().join("bad.tapk");
    std::fs::write(&bad, b"TAPKCKPT garbage").unwrap();
    let good = dir.path().join("g");
    ok(&["synth", "--screens", "2", "--out", p(&good)]);
    assert_eq!(
        code(&["predict", "--checkpoint", p(&bad), "--corpus", p(&good), "--screen", "synth-0-00000"]),
        2
    );
}

#[test]
fn help_lists_flags_and_defaults() {
    let cases: &[(&str, &[&str])] = &[
        ("synth", &["--out", "--seed", "--screens", "--raters", "[default: 100]"]),
        ("train", &["--corpus", "--embeddings", "--vocab", "--checkpoint", "--steps", "--batch", "--lr", "[default: 2000]", "[default: 64]"]),
        ("eval", &["--corpus", "--k-folds", "--seed", "[default: 10]"]),
        ("predict", &["--checkpoint", "--threshold", "--screenshot", "--hierarchy"]),
        ("analyze", &["--corpus", "--out", "--seed"]),
        ("agreement", &["--corpus", "--checkpoint"]),
        ("serve", &["--checkpoint", "--embeddings", "--port", "[default: 8080]"]),
        ("plot", &["--input", "--out", "--kind"]),
    ];
    for (cmd, flags) in cases {
        let out = ok(&[cmd, "--help"]);
        for f in *flags {
            assert!(out.contains(f), "{cmd} --help lacks {f}:\n{out}");
        }
    }
}

#[test]
fn predict_covers_selected_elements() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("d");
    let ckpt = dir.path().join("m.tapk");
    ok(&["synth", "--seed", "3", "--screens", "4", "--out", p(&corpus_dir)]);
    ok(&["train", "--corpus", p(&corpus_dir), "--steps", "5", "--batch", "4", "--checkpoint", p(&ckpt)]);
    let corpus = Corpus::load(&corpus_dir).unwrap();
    for (id, screen) in &corpus.screens {
        let out_dir = dir.path().join(format!("p-{id}"));
        ok(&[
            "predict", "--checkpoint", p(&ckpt), "--corpus", p(&corpus_dir), "--screen", id, "--out", p(&out_dir),
        ]);
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("predictions.json")).unwrap()).unwrap();
        let expected: Vec<String> = select_elements(screen, &SelectionCaps::default(), &mut RngStream::new(SELECTION_SEED))
            .iter()
            .map(|e| e.id.clone())
            .collect();
        let got: Vec<String> = v["elements"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["element_id"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(got, expected);

        let png = dir.path().join(format!("{id}.png"));
        let json = dir.path().join(format!("{id}.json"));
        screen.screenshot.save(&png).unwrap();
        std::fs::write(&json, serde_json::to_string(&screen.root).unwrap()).unwrap();
        let table = ok(&["predict", "--checkpoint", p(&ckpt), "--embeddings", p(&corpus_dir.join("embeddings.txt")), "--screenshot", p(&png), "--hierarchy", p(&json)]);
        assert!(table.contains(&format!("{} elements", expected.len())), "{table}");
    }
}

#[test]
fn analyze_agreement_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("r5");
    let out = dir.path().join("out");
    ok(&["synth", "--seed", "1", "--screens", "8", "--raters", "5", "--out", p(&corpus)]);
    ok(&["analyze", "--corpus", p(&corpus), "--out", p(&out)]);
    for f in [
        "heatmap_tappable.json",
        "heatmap_not_tappable.json",
        "accuracy_by_type.json",
        "size_stats.json",
        "word_counts.json",
        "palette_tappable.json",
        "palette_not_tappable.json",
        "tfidf.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let ckpt = dir.path().join("m.tapk");
    ok(&["train", "--corpus", p(&corpus), "--steps", "5", "--batch", "4", "--checkpoint", p(&ckpt)]);
    let text = ok(&["agreement", "--corpus", p(&corpus), "--checkpoint", p(&ckpt), "--out", p(&out)]);
    assert!(text.contains("Fleiss' kappa"));
    for f in ["agreement.json", "kappa.json", "consistency_bins.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    for (input, dims) in [
        ("heatmap_tappable.json", (336, 600)),
        ("palette_not_tappable.json", (600, 80)),
        ("consistency_bins.json", (640, 440)),
    ] {
        let png = dir.path().join(format!("{input}.png"));
        ok(&["plot", "--input", p(&out.join(input)), "--out", p(&png)]);
        assert_eq!(image::image_dimensions(&png).unwrap(), dims);
    }
    assert_eq!(code(&["plot", "--input", p(&out.join("size_stats.json")), "--out", p(&dir.path().join("x.png"))]), 2);
}

#[test]
fn subcommands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let read = |p: &Path| std::fs::read(p).unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let root = dir.path().join(format!("run{run}"));
        let corpus = root.join("d");
        ok(&["synth", "--seed", "11", "--screens", "5", "--out", p(&corpus)]);
        let ckpt = root.join("m.tapk");
        ok(&["train", "--corpus", p(&corpus), "--steps", "10", "--batch", "4", "--seed", "4", "--checkpoint", p(&ckpt)]);
        let analysis = root.join("a");
        ok(&["analyze", "--corpus", p(&corpus), "--seed", "2", "--out", p(&analysis)]);
        outputs.push((
            read(&corpus.join("examples.jsonl")),
            read(&corpus.join("screens/synth-11-00000.png")),
            read(&ckpt),
            read(&analysis.join("palette_tappable.json")),
            read(&analysis.join("heatmap_not_tappable.json")),
        ));
    }
    assert!(outputs[0] == outputs[1]);
}
