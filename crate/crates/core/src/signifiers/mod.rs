//! Descriptive statistics over labeled corpora: which types, locations,
//! sizes, colors and words go with correct or incorrect tappability
//! judgments.

mod color;
mod heatmap;
mod tfidf;

pub use color::{dominant_colors, kmeans, palette_from_samples, ColorPalette, KMeansResult, PaletteColor};
pub use heatmap::{location_heatmap, HeatmapGrid, HEATMAP_HEIGHT, HEATMAP_WIDTH};
pub use tfidf::{corpus_documents, tfidf_keywords, Keyword, TfIdfKeywords};

use serde::{Deserialize, Serialize};

use crate::dataset::{Corpus, LabeledExample, PixelRect, ViewElement};
use crate::features::{tokenize, TypeVocab};

/// Partition of examples by their declared clickable attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementClass {
    Tappable,
    NotTappable,
}

impl ElementClass {
    pub fn flag(self) -> u8 {
        match self {
            Self::Tappable => 1,
            Self::NotTappable => 0,
        }
    }
}

pub(crate) fn examples_with_elements(corpus: &Corpus) -> impl Iterator<Item = (&LabeledExample, &ViewElement, PixelRect)> {
    corpus.examples.iter().map(move |ex| {
        let (screen, element) = corpus.resolve(ex);
        (ex, element, screen.frame())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeAccuracy {
    pub type_name: String,
    /// Clickable elements; `None` when the type has none.
    pub tappable: Option<ClassAccuracy>,
    pub not_tappable: Option<ClassAccuracy>,
}

/// How often human labels agree with the clickable attribute, per element
/// type and clickable class. Types absent from the corpus are omitted.
pub fn accuracy_by_type(corpus: &Corpus, vocab: &TypeVocab) -> Vec<TypeAccuracy> {
    let mut counts = vec![[(0usize, 0usize); 2]; vocab.len()];
    for (ex, element, _) in examples_with_elements(corpus) {
        let t = vocab.index(&element.class_name);
        let c = &mut counts[t][usize::from(ex.clickable == 0)];
        c.1 += 1;
        if ex.human_label == ex.clickable {
            c.0 += 1;
        }
    }
    let acc = |(correct, total): (usize, usize)| {
        (total > 0).then(|| ClassAccuracy {
            correct,
            total,
            accuracy: correct as f64 / total as f64,
        })
    };
    vocab
        .names()
        .iter()
        .zip(counts)
        .filter(|(_, c)| c[0].1 + c[1].1 > 0)
        .map(|(name, c)| TypeAccuracy {
            type_name: name.clone(),
            tappable: acc(c[0]),
            not_tappable: acc(c[1]),
        })
        .collect()
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            n: values.len(),
            mean: mean(values),
            median: median(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeSize {
    pub type_name: String,
    pub labeled_tappable: Summary,
    pub labeled_not_tappable: Summary,
    /// Not-tappable over tappable (by human label).
    pub mean_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub kind: String,
    pub labeled_tappable: Summary,
    pub labeled_not_tappable: Summary,
    /// Clickable elements that people labeled not tappable.
    pub clickable_mislabeled: Summary,
    /// Clickable elements that people labeled tappable.
    pub clickable_correct: Summary,
    /// Mean area of `clickable_mislabeled` over `clickable_correct`.
    pub mislabeled_to_correct_ratio: Option<f64>,
    pub per_type: Vec<TypeSize>,
}

/// Element area as a fraction of the screen frame, after clipping to it.
pub fn normalized_area(bounds: &PixelRect, frame: &PixelRect) -> f64 {
    let clipped = bounds.intersection(frame);
    if clipped.is_empty() || frame.is_empty() {
        return 0.0;
    }
    clipped.area() as f64 / frame.area() as f64
}

pub fn size_stats(corpus: &Corpus, vocab: &TypeVocab) -> SizeStats {
    let mut by_label: [Vec<f64>; 2] = Default::default();
    let (mut mislabeled, mut correct) = (Vec::new(), Vec::new());
    let mut per_type: Vec<[Vec<f64>; 2]> = vec![Default::default(); vocab.len()];
    for (ex, element, frame) in examples_with_elements(corpus) {
        let a = normalized_area(&element.bounds, &frame);
        by_label[usize::from(ex.human_label)].push(a);
        per_type[vocab.index(&element.class_name)][usize::from(ex.human_label)].push(a);
        if ex.clickable == 1 {
            if ex.human_label == 1 {
                correct.push(a);
            } else {
                mislabeled.push(a);
            }
        }
    }
    let per_type = vocab
        .names()
        .iter()
        .zip(per_type)
        .filter(|(_, v)| !v[0].is_empty() || !v[1].is_empty())
        .map(|(name, [neg, pos])| TypeSize {
            type_name: name.clone(),
            mean_ratio: ratio(mean(&neg), mean(&pos)),
            median_ratio: ratio(median(&neg), median(&pos)),
            labeled_tappable: Summary::of(&pos),
            labeled_not_tappable: Summary::of(&neg),
        })
        .collect();
    SizeStats {
        kind: "size_stats".into(),
        labeled_tappable: Summary::of(&by_label[1]),
        labeled_not_tappable: Summary::of(&by_label[0]),
        mislabeled_to_correct_ratio: ratio(mean(&mislabeled), mean(&correct)),
        clickable_mislabeled: Summary::of(&mislabeled),
        clickable_correct: Summary::of(&correct),
        per_type,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCountStats {
    pub kind: String,
    /// Summaries of `ln(words + 1)` by human label.
    pub labeled_tappable: Summary,
    pub labeled_not_tappable: Summary,
    /// Not-tappable over tappable.
    pub mean_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
}

pub fn log_word_count(text: Option<&str>) -> f64 {
    (text.map_or(0, |t| tokenize(t).len()) as f64 + 1.0).ln()
}

pub fn word_count_stats(corpus: &Corpus) -> WordCountStats {
    let mut values: [Vec<f64>; 2] = Default::default();
    for (ex, element, _) in examples_with_elements(corpus) {
        values[usize::from(ex.human_label)].push(log_word_count(element.text.as_deref()));
    }
    let [neg, pos] = values;
    WordCountStats {
        kind: "word_count_stats".into(),
        mean_ratio: ratio(mean(&neg), mean(&pos)),
        median_ratio: ratio(median(&neg), median(&pos)),
        labeled_tappable: Summary::of(&pos),
        labeled_not_tappable: Summary::of(&neg),
    }
}
