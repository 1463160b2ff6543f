use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use proptest::prelude::*;
use tapkit_core::dataset::{
    generate_synthetic, parse_hierarchy, select_elements, Corpus, DatasetError, LabeledExample, PixelRect,
    ScreenRecord, SelectionCaps, SyntheticConfig, ViewElement,
};
use tapkit_core::RngStream;

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synthetic_corpus_bytes_are_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let s = generate_synthetic(&SyntheticConfig::new(7, 10)).unwrap();
        s.corpus.save(d.path()).unwrap();
        fs::write(d.path().join("embeddings.txt"), s.embeddings.to_text()).unwrap();
    }
    let (a, b) = (files_under(dirs[0].path()), files_under(dirs[1].path()));
    assert!(a.len() > 20);
    assert!(a == b, "re-running the generator changed the corpus bytes");

    let other = generate_synthetic(&SyntheticConfig::new(8, 10)).unwrap();
    let first = generate_synthetic(&SyntheticConfig::new(7, 10)).unwrap();
    assert_ne!(other.corpus.examples, first.corpus.examples);
}

/// Pixel-level features an observer can read off a rendered screen.
fn observed_features(corpus: &Corpus, ex: &LabeledExample) -> (f64, f64) {
    let (screen, element) = corpus.resolve(ex);
    let b = element.bounds;
    let px = screen.screenshot.get_pixel(((b.left + b.right) / 2) as u32, ((b.top + b.bottom) / 2) as u32).0;
    let blue = f64::from(u8::from(px[2] >= 180 && px[0] <= 80 && px[1] <= 150));
    let frame = screen.frame();
    let y = f64::from(b.top + b.bottom) / 2.0 / f64::from(frame.height());
    (blue, y)
}

#[test]
fn planted_rule_is_recoverable_by_logistic_regression() {
    let mut cfg = SyntheticConfig::new(11, 10_000);
    cfg.max_examples = Some(600);
    let corpus = generate_synthetic(&cfg).unwrap().corpus;
    assert_eq!(corpus.examples.len(), 600);
    let xs: Vec<[f64; 3]> = corpus
        .examples
        .iter()
        .map(|e| {
            let (blue, y) = observed_features(&corpus, e);
            [1.0, blue, y]
        })
        .collect();
    let ys: Vec<f64> = corpus.examples.iter().map(|e| f64::from(e.human_label)).collect();

    // Full-batch gradient descent on the logistic loss.
    let mut w = [0.0f64; 3];
    for _ in 0..40_000 {
        let mut g = [0.0; 3];
        for (x, y) in xs.iter().zip(&ys) {
            let z: f64 = (0..3).map(|j| w[j] * x[j]).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            for j in 0..3 {
                g[j] += (p - y) * x[j];
            }
        }
        for j in 0..3 {
            w[j] -= 20.0 * g[j] / xs.len() as f64;
        }
    }
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, y)| {
            let z: f64 = (0..3).map(|j| w[j] * x[j]).sum();
            (z >= 0.0) == (**y == 1.0)
        })
        .count();
    assert_eq!(correct, xs.len(), "weights {w:?}");
    // Blue lowers the bar, so its weight is positive, as is the y weight.
    assert!(w[1] > 0.0 && w[2] > 0.0, "{w:?}");
}

#[test]
fn labels_are_balanced_and_clickable_disagrees_at_the_configured_rate() {
    let mut cfg = SyntheticConfig::new(3, 10_000);
    cfg.max_examples = Some(1200);
    let corpus = generate_synthetic(&cfg).unwrap().corpus;
    let n = corpus.examples.len() as f64;
    let pos = corpus.examples.iter().filter(|e| e.human_label == 1).count() as f64;
    assert!((0.4..=0.6).contains(&(pos / n)), "positive share {}", pos / n);
    let flipped = corpus.examples.iter().filter(|e| e.human_label != e.clickable).count() as f64;
    // Binomial(1200, 0.2): sd ≈ 0.0115; allow four sd.
    assert!((flipped / n - 0.2).abs() < 0.046, "disagreement {}", flipped / n);
    for ex in &corpus.examples {
        let (screen, element) = corpus.resolve(ex);
        assert!(!screen.in_excluded_zone(&element.bounds));
    }
}

#[test]
fn corpus_round_trips() {
    let mut cfg = SyntheticConfig::new(21, 100);
    cfg.max_examples = Some(100);
    let corpus = generate_synthetic(&cfg).unwrap().corpus;
    assert_eq!(corpus.examples.len(), 100);
    let a = tempfile::tempdir().unwrap();
    corpus.save(a.path()).unwrap();
    let loaded = Corpus::load(a.path()).unwrap();
    assert_eq!(loaded, corpus);
    let b = tempfile::tempdir().unwrap();
    loaded.save(b.path()).unwrap();
    assert!(files_under(a.path()) == files_under(b.path()));

    let empty = Corpus::default();
    let e = tempfile::tempdir().unwrap();
    empty.save(e.path()).unwrap();
    assert_eq!(Corpus::load(e.path()).unwrap(), empty);
}

#[test]
fn consistency_corpus_round_trips_ratings() {
    let mut cfg = SyntheticConfig::new(2, 4);
    cfg.raters = 5;
    cfg.margin = 0.0;
    let corpus = generate_synthetic(&cfg).unwrap().corpus;
    let dir = tempfile::tempdir().unwrap();
    corpus.save(dir.path()).unwrap();
    let loaded = Corpus::load(dir.path()).unwrap();
    assert_eq!(loaded, corpus);
    let sets = loaded.rating_sets().unwrap();
    assert!(sets.iter().all(|s| s.ratings.len() == 5));
}

#[test]
fn corrupted_line_is_reported_with_its_number() {
    let corpus = generate_synthetic(&SyntheticConfig::new(4, 2)).unwrap().corpus;
    let dir = tempfile::tempdir().unwrap();
    corpus.save(dir.path()).unwrap();
    let path = dir.path().join("examples.jsonl");
    let mut lines: Vec<String> = fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
    lines[2] = "{\"screen_id\": 17".into();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match Corpus::load(dir.path()) {
        Err(DatasetError::CorruptRecord { file, line, .. }) => {
            assert_eq!(file, "examples.jsonl");
            assert_eq!(line, 3);
        }
        other => panic!("expected a corrupt-record error, got {other:?}"),
    }
}

#[test]
fn nested_document_parses_to_matching_tree() {
    let doc = r#"{"activity": {"root": {
        "class": "android.widget.FrameLayout", "bounds": [0, 0, 100, 200], "clickable": false,
        "children": [{
            "class": "android.widget.LinearLayout", "bounds": [0, 20, 100, 120],
            "children": [{"class": "android.widget.Button", "bounds": [10, 30, 90, 60], "clickable": true, "text": "Go"}]
        }]
    }}}"#;
    let parsed = parse_hierarchy(doc).unwrap();
    assert_eq!(parsed.root.depth(), 3);
    let all = parsed.root.walk();
    for parent in &all {
        for child in &parent.children {
            assert!(child.bounds.intersects(&parent.bounds));
        }
    }
    // The middle node had no `clickable`.
    assert!(!all[1].clickable);
    assert_eq!(parsed.warnings.len(), 1);
    let ids: BTreeSet<&str> = all.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids.len(), 3);
}

fn node(id: &str, class: &str, bounds: [i32; 4], clickable: bool, children: Vec<ViewElement>) -> ViewElement {
    ViewElement {
        id: id.into(),
        class_name: class.into(),
        text: None,
        bounds: PixelRect::from(bounds),
        clickable,
        children,
    }
}

fn screen_of(root: ViewElement) -> ScreenRecord {
    let f = root.bounds;
    ScreenRecord::new("s", RgbImage::from_pixel(f.width() as u32, f.height() as u32, Rgb([255, 255, 255])), root).unwrap()
}

#[test]
fn clickable_container_is_selected_once_and_its_children_never() {
    let leaves = (0..3)
        .map(|i| node(&format!("leaf{i}"), "TextView", [10 + 30 * i, 100, 35 + 30 * i, 120], false, vec![]))
        .collect();
    let container = node("card", "LinearLayout", [5, 90, 120, 130], true, leaves);
    let screen = screen_of(node("root", "FrameLayout", [0, 0, 200, 400], false, vec![container]));
    let picked: Vec<&str> = select_elements(&screen, &SelectionCaps::default(), &mut RngStream::new(1))
        .iter()
        .map(|e| e.id.as_str())
        .collect();
    assert_eq!(picked, vec!["card"]);
}

#[test]
fn caps_and_excluded_zones() {
    let mut kids: Vec<ViewElement> = (0..7)
        .map(|i| node(&format!("b{i}"), "Button", [10, 50 + 40 * i, 100, 80 + 40 * i], true, vec![]))
        .collect();
    kids.push(node("status", "Button", [10, 2, 100, 15], true, vec![]));
    kids.push(node("nav", "ImageView", [10, 385, 100, 399], false, vec![]));
    let screen = screen_of(node("root", "FrameLayout", [0, 0, 200, 400], false, kids));
    let caps = SelectionCaps::default();
    let a: Vec<String> = select_elements(&screen, &caps, &mut RngStream::new(9)).iter().map(|e| e.id.clone()).collect();
    let b: Vec<String> = select_elements(&screen, &caps, &mut RngStream::new(9)).iter().map(|e| e.id.clone()).collect();
    assert_eq!(a.len(), 5);
    assert_eq!(a, b);
    assert!(!a.iter().any(|id| id == "status" || id == "nav"));
}

/// Random tree inside `bounds` with unique ids and random clickability.
fn random_tree(rng: &mut RngStream, bounds: PixelRect, depth: usize, next_id: &mut usize) -> ViewElement {
    let id = format!("n{:03}", *next_id);
    *next_id += 1;
    let mut children = Vec::new();
    if depth > 0 && bounds.width() >= 8 && bounds.height() >= 8 {
        for _ in 0..rng.below(4) {
            let w = 4 + rng.below((bounds.width() - 3) as usize) as i32;
            let h = 4 + rng.below((bounds.height() - 3) as usize) as i32;
            let l = bounds.left + rng.below((bounds.width() - w + 1).max(1) as usize) as i32;
            let t = bounds.top + rng.below((bounds.height() - h + 1).max(1) as usize) as i32;
            let r = PixelRect::new(l, t, (l + w).min(bounds.right), (t + h).min(bounds.bottom));
            children.push(random_tree(rng, r, depth - 1, next_id));
        }
    }
    let class = ["Button", "TextView", "ImageView", "LinearLayout"][rng.below(4)];
    ViewElement {
        id,
        class_name: class.into(),
        text: None,
        bounds,
        clickable: rng.bernoulli(0.3),
        children,
    }
}

fn permute_children(e: &mut ViewElement, rng: &mut RngStream) {
    rng.shuffle(&mut e.children);
    for c in &mut e.children {
        permute_children(c, rng);
    }
}

fn ancestors_of<'a>(root: &'a ViewElement, id: &str) -> Vec<&'a ViewElement> {
    fn go<'a>(e: &'a ViewElement, id: &str, path: &mut Vec<&'a ViewElement>) -> bool {
        if e.id == id {
            return true;
        }
        path.push(e);
        for c in &e.children {
            if go(c, id, path) {
                return true;
            }
        }
        path.pop();
        false
    }
    let mut path = Vec::new();
    go(root, id, &mut path);
    path
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_ignores_child_order(tree_seed in any::<u64>(), perm_seed in any::<u64>(), sel_seed in any::<u64>()) {
        let mut next = 0;
        let mut root = random_tree(&mut RngStream::new(tree_seed), PixelRect::new(0, 0, 120, 240), 4, &mut next);
        root.clickable = false;
        let screen = screen_of(root.clone());
        permute_children(&mut root, &mut RngStream::new(perm_seed));
        let permuted = screen_of(root);
        let caps = SelectionCaps { clickable: 3, non_clickable: 3 };
        let ids = |s: &ScreenRecord| -> BTreeSet<String> {
            select_elements(s, &caps, &mut RngStream::new(sel_seed)).iter().map(|e| e.id.clone()).collect()
        };
        prop_assert_eq!(ids(&screen), ids(&permuted));
    }

    #[test]
    fn selection_respects_hierarchy_and_zones(tree_seed in any::<u64>(), sel_seed in any::<u64>()) {
        let mut next = 0;
        let mut root = random_tree(&mut RngStream::new(tree_seed), PixelRect::new(0, 0, 120, 240), 4, &mut next);
        root.clickable = false;
        let screen = screen_of(root);
        let caps = SelectionCaps::default();
        let picked = select_elements(&screen, &caps, &mut RngStream::new(sel_seed));
        prop_assert!(picked.iter().filter(|e| e.clickable).count() <= caps.clickable);
        prop_assert!(picked.iter().filter(|e| !e.clickable).count() <= caps.non_clickable);
        let ids: BTreeSet<&str> = picked.iter().map(|e| e.id.as_str()).collect();
        prop_assert_eq!(ids.len(), picked.len());
        for e in &picked {
            prop_assert!(e.id != screen.root.id);
            prop_assert!(!screen.in_excluded_zone(&e.bounds));
            for a in ancestors_of(&screen.root, &e.id) {
                prop_assert!(!a.clickable, "{} sits inside clickable {}", e.id, a.id);
                prop_assert!(!ids.contains(a.id.as_str()));
            }
        }
    }
}
