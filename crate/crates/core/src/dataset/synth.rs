//! Synthetic screens whose tappability follows a known rule.
//!
//! Each screen holds a handful of solid-colored elements. An element is
//! tappable exactly when its vertical center (as a fraction of screen height)
//! is at least [`BLUE_THRESHOLD`] for saturated-blue elements or
//! [`OTHER_THRESHOLD`] for every other color. Color and position are sampled
//! independently and uniformly, which makes the classes balanced in
//! expectation and the rule linearly separable in `(is_blue, center_y)`.

use std::collections::HashMap;

use image::{Rgb, RgbImage};
use serde_json::json;

use super::corpus::{Corpus, CorpusMeta, LabeledExample, RatingRecord};
use super::hierarchy::{PixelRect, ViewElement};
use super::screen::ScreenRecord;
use super::select::{select_elements, SelectionCaps};
use super::DatasetError;
use crate::features::{EmbeddingTable, EMBEDDING_DIM};
use crate::nn::sigmoid;
use crate::rng::RngStream;

pub const BLUE_THRESHOLD: f64 = 0.30;
pub const OTHER_THRESHOLD: f64 = 0.70;

pub const SYNTHETIC_VOCABULARY: &[&str] = &[
    "submit", "close", "login", "next", "buy", "share", "settings", "profile", "search", "home", "more", "save",
    "play", "cart", "account", "welcome", "news", "weather", "today", "recently", "photo", "gallery", "about",
    "terms", "price", "music", "video", "the", "of", "and", "your", "new", "wall", "computer", "trying",
];

const CLASSES: &[&str] = &[
    "Button",
    "TextView",
    "ImageView",
    "View",
    "ImageButton",
    "CheckBox",
    "LinearLayout",
    "CustomBadgeView",
];

const OTHER_COLORS: &[[u8; 3]] = &[
    [214, 48, 49],
    [46, 160, 67],
    [240, 150, 30],
    [150, 150, 150],
    [70, 70, 70],
    [200, 200, 200],
    [120, 80, 40],
];

const BACKGROUNDS: &[[u8; 3]] = &[[250, 250, 250], [236, 236, 236], [255, 248, 225]];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_screens: usize,
    pub elements_per_screen: usize,
    pub width: u32,
    pub height: u32,
    /// Raters per element. With one rater the label is the planted rule; with
    /// more, each rater votes tappable with probability
    /// `sigmoid((center_y - threshold) / rater_noise)`.
    pub raters: usize,
    pub rater_noise: f64,
    /// Probability that the clickable attribute disagrees with the label.
    pub disagreement: f64,
    /// Element centers are kept at least this far from their threshold.
    pub margin: f64,
    pub caps: SelectionCaps,
    /// Stop once this many labeled examples exist (extra screens are not
    /// generated; the last screen may contribute only part of its elements).
    pub max_examples: Option<usize>,
}

impl SyntheticConfig {
    pub fn new(seed: u64, n_screens: usize) -> Self {
        Self {
            seed,
            n_screens,
            elements_per_screen: 6,
            width: 336,
            height: 600,
            raters: 1,
            rater_noise: 0.06,
            disagreement: 0.2,
            margin: 0.05,
            caps: SelectionCaps::default(),
            max_examples: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub embeddings: EmbeddingTable,
}

pub fn planted_label(is_blue: bool, center_y: f64) -> u8 {
    let threshold = if is_blue { BLUE_THRESHOLD } else { OTHER_THRESHOLD };
    u8::from(center_y >= threshold)
}

pub fn is_saturated_blue([r, g, b]: [u8; 3]) -> bool {
    b >= 180 && r <= 80 && g <= 150
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticCorpus, DatasetError> {
    if config.n_screens == 0 {
        return Err(DatasetError::InvalidArgument("n_screens must be at least 1".into()));
    }
    if config.width > config.height {
        return Err(DatasetError::InvalidArgument("synthetic screens must be portrait".into()));
    }
    let root_rng = RngStream::new(config.seed);
    let meta = CorpusMeta {
        description: format!("synthetic planted-rule corpus, seed {}", config.seed),
        generator: Some(json!({
            "kind": "synthetic-planted-rule",
            "seed": config.seed,
            "n_screens": config.n_screens,
            "rule": format!(
                "tappable iff vertical center / screen height >= {BLUE_THRESHOLD} for saturated-blue elements, >= {OTHER_THRESHOLD} otherwise"
            ),
            "blue_threshold": BLUE_THRESHOLD,
            "other_threshold": OTHER_THRESHOLD,
            "disagreement": config.disagreement,
            "raters": config.raters,
            "rater_noise": config.rater_noise,
            "margin": config.margin,
        })),
        ..CorpusMeta::default()
    };
    let mut corpus = Corpus::new(meta);
    for i in 0..config.n_screens {
        if config.max_examples.is_some_and(|m| corpus.examples.len() >= m) {
            break;
        }
        let mut rng = root_rng.fork(i as u64);
        let screen_id = format!("synth-{}-{i:05}", config.seed);
        let (screen, truths) = synth_screen(config, &screen_id, &mut rng)?;
        let selected: Vec<String> = select_elements(&screen, &config.caps, &mut rng.fork(1))
            .into_iter()
            .map(|e| e.id.clone())
            .collect();
        corpus.add_screen(screen)?;
        for id in selected {
            if config.max_examples.is_some_and(|m| corpus.examples.len() >= m) {
                break;
            }
            let t = &truths[&id];
            if config.raters <= 1 {
                corpus.add_example(LabeledExample {
                    screen_id: screen_id.clone(),
                    element_id: id.clone(),
                    human_label: t.label,
                    clickable: t.clickable,
                    worker_id: "w0".into(),
                })?;
                continue;
            }
            for k in 0..config.raters {
                let p = sigmoid((t.center_y - t.threshold) / config.rater_noise);
                let vote = u8::from(rng.bernoulli(p));
                let worker_id = format!("w{k}");
                corpus.add_rating(RatingRecord {
                    screen_id: screen_id.clone(),
                    element_id: id.clone(),
                    worker_id: worker_id.clone(),
                    label: vote,
                })?;
                corpus.add_example(LabeledExample {
                    screen_id: screen_id.clone(),
                    element_id: id.clone(),
                    human_label: vote,
                    clickable: t.clickable,
                    worker_id,
                })?;
            }
        }
    }
    Ok(SyntheticCorpus {
        corpus,
        embeddings: synthetic_embeddings(&root_rng.fork_named("embeddings")),
    })
}

struct Truth {
    label: u8,
    clickable: u8,
    center_y: f64,
    threshold: f64,
}

fn jitter(c: [u8; 3], rng: &mut RngStream, amount: i32) -> [u8; 3] {
    c.map(|v| (i32::from(v) + rng.below((2 * amount + 1) as usize) as i32 - amount).clamp(0, 255) as u8)
}

fn synth_screen(
    config: &SyntheticConfig,
    screen_id: &str,
    rng: &mut RngStream,
) -> Result<(ScreenRecord, HashMap<String, Truth>), DatasetError> {
    let (w, h) = (config.width as i32, config.height as i32);
    let bg = BACKGROUNDS[rng.below(BACKGROUNDS.len())];
    let mut img = RgbImage::from_pixel(config.width, config.height, Rgb(bg));
    let bar = (f64::from(h) * 0.05).round() as i32;
    fill(&mut img, PixelRect::new(0, 0, w, bar), [40, 40, 40]);
    fill(&mut img, PixelRect::new(0, h - bar, w, h), [0, 0, 0]);

    let mut placed: Vec<PixelRect> = Vec::new();
    let mut children = Vec::new();
    let mut truths = HashMap::new();
    for j in 0..config.elements_per_screen {
        let is_blue = rng.bernoulli(0.5);
        let threshold = if is_blue { BLUE_THRESHOLD } else { OTHER_THRESHOLD };
        let mut rect = None;
        for _ in 0..100 {
            let eh = (rng.uniform_range(0.04, 0.08) * f64::from(h)).round() as i32;
            let ew = (rng.uniform_range(0.2, 0.6) * f64::from(w)).round() as i32;
            let cy = rng.uniform_range(0.1, 0.9) * f64::from(h);
            let top = (cy - f64::from(eh) / 2.0).round() as i32;
            let left = (rng.uniform_range(0.03, 0.97 - f64::from(ew) / f64::from(w)) * f64::from(w)).round() as i32;
            let r = PixelRect::from_xywh(left, top, ew, eh);
            let center = f64::from(r.top + r.bottom) / 2.0 / f64::from(h);
            if (center - threshold).abs() < config.margin {
                continue;
            }
            let padded = PixelRect::new(r.left - 3, r.top - 3, r.right + 3, r.bottom + 3);
            if placed.iter().any(|p| p.intersects(&padded)) {
                continue;
            }
            rect = Some((r, center));
            break;
        }
        let Some((rect, center_y)) = rect else { continue };
        placed.push(rect);

        let color = if is_blue {
            [
                20 + rng.below(41) as u8,
                80 + rng.below(51) as u8,
                200 + rng.below(56) as u8,
            ]
        } else {
            jitter(OTHER_COLORS[rng.below(OTHER_COLORS.len())], rng, 10)
        };
        debug_assert_eq!(is_saturated_blue(color), is_blue);
        fill(&mut img, rect, color);
        let border = color.map(|v| (f64::from(v) * 0.7) as u8);
        outline(&mut img, rect, border);

        let class_name = CLASSES[rng.below(CLASSES.len())];
        let text = match class_name {
            "ImageView" | "View" => None,
            _ => {
                let n = 1 + rng.below(4);
                let words: Vec<&str> = (0..n)
                    .map(|_| SYNTHETIC_VOCABULARY[rng.below(SYNTHETIC_VOCABULARY.len())])
                    .collect();
                Some(words.join(" "))
            }
        };
        let label = planted_label(is_blue, center_y);
        let clickable = if rng.bernoulli(config.disagreement) { 1 - label } else { label };
        let id = format!("e{j}");
        truths.insert(
            id.clone(),
            Truth {
                label,
                clickable,
                center_y,
                threshold,
            },
        );
        children.push(ViewElement {
            id,
            class_name: class_name.to_string(),
            text,
            bounds: rect,
            clickable: clickable == 1,
            children: vec![],
        });
    }
    let root = ViewElement {
        id: "root".into(),
        class_name: "FrameLayout".into(),
        text: None,
        bounds: PixelRect::new(0, 0, w, h),
        clickable: false,
        children,
    };
    Ok((ScreenRecord::new(screen_id, img, root)?, truths))
}

fn fill(img: &mut RgbImage, r: PixelRect, color: [u8; 3]) {
    for y in r.top.max(0)..r.bottom.min(img.height() as i32) {
        for x in r.left.max(0)..r.right.min(img.width() as i32) {
            img.put_pixel(x as u32, y as u32, Rgb(color));
        }
    }
}

fn outline(img: &mut RgbImage, r: PixelRect, color: [u8; 3]) {
    for (x0, y0, x1, y1) in [
        (r.left, r.top, r.right, r.top + 2),
        (r.left, r.bottom - 2, r.right, r.bottom),
        (r.left, r.top, r.left + 2, r.bottom),
        (r.right - 2, r.top, r.right, r.bottom),
    ] {
        fill(img, PixelRect::new(x0, y0, x1, y1), color);
    }
}

fn synthetic_embeddings(rng: &RngStream) -> EmbeddingTable {
    let mut rng = rng.clone();
    let vectors = SYNTHETIC_VOCABULARY
        .iter()
        .map(|w| {
            let v = (0..EMBEDDING_DIM)
                .map(|_| ((rng.uniform_range(-1.0, 1.0) * 1e4).round() / 1e4) as f32)
                .collect();
            (w.to_string(), v)
        })
        .collect();
    EmbeddingTable::from_vectors(vectors, EMBEDDING_DIM).expect("fixed dimension")
}
