use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::examples_with_elements;
use crate::dataset::Corpus;
use crate::features::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfKeywords {
    pub kind: String,
    pub tappable: Vec<Keyword>,
    pub not_tappable: Vec<Keyword>,
}

fn term_counts(tokens: &[String]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

fn top_terms(doc: &BTreeMap<&str, usize>, other: &BTreeMap<&str, usize>, len: usize, top_n: usize) -> Vec<Keyword> {
    let mut scored: Vec<Keyword> = doc
        .iter()
        .filter_map(|(&term, &count)| {
            let df = 1 + usize::from(other.contains_key(term));
            let idf = (2.0 / df as f64).ln();
            let score = count as f64 / len as f64 * idf;
            (score > 0.0).then(|| Keyword {
                term: term.to_string(),
                score,
            })
        })
        .collect();
    // BTreeMap iteration is alphabetical and the sort is stable, so equal
    // scores stay in alphabetical order.
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    scored.truncate(top_n);
    scored
}

/// Two-document TF-IDF: `tf = count / document length`, `idf = ln(2 / df)`.
/// Terms present in both documents score zero and are not listed.
pub fn tfidf_keywords(tappable_text: &str, not_tappable_text: &str, top_n: usize) -> TfIdfKeywords {
    let a = tokenize(tappable_text);
    let b = tokenize(not_tappable_text);
    let (ca, cb) = (term_counts(&a), term_counts(&b));
    TfIdfKeywords {
        kind: "tfidf_keywords".into(),
        tappable: if a.is_empty() { vec![] } else { top_terms(&ca, &cb, a.len(), top_n) },
        not_tappable: if b.is_empty() { vec![] } else { top_terms(&cb, &ca, b.len(), top_n) },
    }
}

/// All element texts joined into one document per human label:
/// `(tappable, not_tappable)`.
pub fn corpus_documents(corpus: &Corpus) -> (String, String) {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (ex, element, _) in examples_with_elements(corpus) {
        if let Some(t) = &element.text {
            if ex.human_label == 1 {
                pos.push(t.as_str());
            } else {
                neg.push(t.as_str());
            }
        }
    }
    (pos.join("\n"), neg.join("\n"))
}
