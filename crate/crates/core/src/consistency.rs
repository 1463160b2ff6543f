//! Agreement between raters, and how model probabilities line up with it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Corpus, RatingSet};
use crate::features::TypeVocab;
use crate::model::{ModelError, Predictor};

#[derive(Debug, Error)]
pub enum ConsistencyError {
    #[error("no rated elements")]
    Empty,
    #[error("element has no ratings")]
    NoRatings,
    #[error("row {row} has {found} ratings, expected {expected}")]
    UnequalRaters { row: usize, expected: usize, found: usize },
    #[error("need at least two raters per element, found {0}")]
    TooFewRaters(usize),
    #[error("every rating falls in one category; chance agreement is 1 and kappa is undefined")]
    DegenerateMarginals,
    #[error("{screen_id}/{element_id} has {found} ratings; binning needs exactly {expected}")]
    WrongRaterCount {
        screen_id: String,
        element_id: String,
        found: usize,
        expected: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sum over categories of the squared share of raters choosing it.
pub fn agreement_score(ratings: &[u8]) -> Result<f64, ConsistencyError> {
    if ratings.is_empty() {
        return Err(ConsistencyError::NoRatings);
    }
    let n = ratings.len() as f64;
    let yes = ratings.iter().filter(|&&r| r == 1).count() as f64;
    Ok((yes / n).powi(2) + ((n - yes) / n).powi(2))
}

/// Mean agreement score as a percentage.
pub fn overall_agreement(sets: &[RatingSet]) -> Result<f64, ConsistencyError> {
    if sets.is_empty() {
        return Err(ConsistencyError::Empty);
    }
    let mut total = 0.0;
    for s in sets {
        total += agreement_score(&s.ratings)?;
    }
    Ok(total / sets.len() as f64 * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementAgreement {
    pub screen_id: String,
    pub element_id: String,
    pub type_name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeAgreement {
    pub type_name: String,
    pub n: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub kind: String,
    pub per_element: Vec<ElementAgreement>,
    pub overall_percent: f64,
    pub per_type: Vec<TypeAgreement>,
}

pub fn agreement(corpus: &Corpus, vocab: &TypeVocab) -> Result<AgreementResult, ConsistencyError> {
    let sets = corpus.rating_sets().map_err(ModelError::from)?;
    let mut per_element = Vec::with_capacity(sets.len());
    let mut by_type: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for s in &sets {
        let score = agreement_score(&s.ratings)?;
        let (_, element) = corpus
            .lookup(&s.screen_id, &s.element_id)
            .expect("ratings are validated on insertion");
        let t = vocab.index(&element.class_name);
        let e = by_type.entry(t).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += score;
        per_element.push(ElementAgreement {
            screen_id: s.screen_id.clone(),
            element_id: s.element_id.clone(),
            type_name: vocab.names()[t].clone(),
            score,
        });
    }
    Ok(AgreementResult {
        kind: "agreement".into(),
        overall_percent: overall_agreement(&sets)?,
        per_type: by_type
            .into_iter()
            .map(|(t, (n, sum))| TypeAgreement {
                type_name: vocab.names()[t].clone(),
                n,
                percent: sum / n as f64 * 100.0,
            })
            .collect(),
        per_element,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kind: String,
    pub kappa: f64,
    /// Mean per-element agreement `P̄`.
    pub observed: f64,
    /// Chance agreement `P̄e`, the sum of squared category shares.
    pub expected: f64,
    pub elements: usize,
    pub raters: usize,
    pub category_shares: Vec<f64>,
    /// Large-sample standard error of kappa under the null of chance
    /// agreement; reported for reference only.
    pub null_standard_error: f64,
}

/// Fleiss' kappa for a matrix of per-element category counts. Every row must
/// have the same total (the number of raters).
pub fn fleiss_kappa(rows: &[Vec<usize>]) -> Result<KappaResult, ConsistencyError> {
    if rows.is_empty() {
        return Err(ConsistencyError::Empty);
    }
    let n: usize = rows[0].iter().sum();
    for (i, r) in rows.iter().enumerate() {
        let s: usize = r.iter().sum();
        if s != n || r.len() != rows[0].len() {
            return Err(ConsistencyError::UnequalRaters {
                row: i,
                expected: n,
                found: s,
            });
        }
    }
    if n < 2 {
        return Err(ConsistencyError::TooFewRaters(n));
    }
    let big_n = rows.len() as f64;
    let nf = n as f64;
    let categories = rows[0].len();
    let shares: Vec<f64> = (0..categories)
        .map(|j| rows.iter().map(|r| r[j]).sum::<usize>() as f64 / (big_n * nf))
        .collect();
    let observed = rows
        .iter()
        .map(|r| (r.iter().map(|&c| (c * c) as f64).sum::<f64>() - nf) / (nf * (nf - 1.0)))
        .sum::<f64>()
        / big_n;
    let expected: f64 = shares.iter().map(|p| p * p).sum();
    if expected >= 1.0 {
        return Err(ConsistencyError::DegenerateMarginals);
    }
    let kappa = (observed - expected) / (1.0 - expected);
    let pq: f64 = shares.iter().map(|p| p * (1.0 - p)).sum();
    let pq_skew: f64 = shares.iter().map(|p| p * (1.0 - p) * ((1.0 - p) - p)).sum();
    let var = 2.0 / (big_n * nf * (nf - 1.0)) * (pq * pq - pq_skew) / (pq * pq);
    Ok(KappaResult {
        kind: "fleiss_kappa".into(),
        kappa,
        observed,
        expected,
        elements: rows.len(),
        raters: n,
        category_shares: shares,
        null_standard_error: var.max(0.0).sqrt(),
    })
}

/// `[not tappable, tappable]` counts per rated element.
pub fn rating_matrix(sets: &[RatingSet]) -> Vec<Vec<usize>> {
    sets.iter()
        .map(|s| {
            let yes = s.ratings.iter().filter(|&&r| r == 1).count();
            vec![s.ratings.len() - yes, yes]
        })
        .collect()
}

pub const RATERS_PER_BIN_ELEMENT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyBin {
    pub label: String,
    pub tappable_votes: usize,
    pub probabilities: Vec<f64>,
    /// `None` for an empty bin.
    pub mean: Option<f64>,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyBins {
    pub kind: String,
    /// Ordered from unanimous not tappable to unanimous tappable.
    pub bins: Vec<ConsistencyBin>,
}

impl ConsistencyBins {
    /// Means of the nonempty bins, in bin order.
    pub fn means(&self) -> Vec<f64> {
        self.bins.iter().filter_map(|b| b.mean).collect()
    }
}

const BIN_LABELS: [&str; 6] = [
    "all agree not tappable",
    "4 of 5 agree not tappable",
    "3 of 5 agree not tappable",
    "3 of 5 agree tappable",
    "4 of 5 agree tappable",
    "all agree tappable",
];

/// Groups model probabilities by how many of five raters voted tappable.
pub fn bin_probabilities(sets: &[RatingSet], probabilities: &[f64]) -> Result<ConsistencyBins, ConsistencyError> {
    assert_eq!(sets.len(), probabilities.len(), "one probability per rated element");
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); RATERS_PER_BIN_ELEMENT + 1];
    for (s, &p) in sets.iter().zip(probabilities) {
        if s.ratings.len() != RATERS_PER_BIN_ELEMENT {
            return Err(ConsistencyError::WrongRaterCount {
                screen_id: s.screen_id.clone(),
                element_id: s.element_id.clone(),
                found: s.ratings.len(),
                expected: RATERS_PER_BIN_ELEMENT,
            });
        }
        groups[s.tappable_votes()].push(p);
    }
    Ok(ConsistencyBins {
        kind: "consistency_bins".into(),
        bins: groups
            .into_iter()
            .enumerate()
            .map(|(votes, probabilities)| ConsistencyBin {
                label: BIN_LABELS[votes].into(),
                tappable_votes: votes,
                mean: crate::signifiers::mean(&probabilities),
                empty: probabilities.is_empty(),
                probabilities,
            })
            .collect(),
    })
}

/// Scores every rated element of `corpus` with `predictor` and bins the
/// probabilities by rater agreement.
pub fn consistency_bins(corpus: &Corpus, predictor: &Predictor) -> Result<ConsistencyBins, ConsistencyError> {
    let sets = corpus.rating_sets().map_err(ModelError::from)?;
    if sets.is_empty() {
        return Err(ConsistencyError::Empty);
    }
    // Score screen by screen so each screen tower runs once.
    let mut by_screen: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in sets.iter().enumerate() {
        by_screen.entry(s.screen_id.as_str()).or_default().push(i);
    }
    let mut probabilities = vec![0.0; sets.len()];
    for (screen_id, idx) in by_screen {
        let screen = &corpus.screens[screen_id];
        let elements: Vec<_> = idx
            .iter()
            .map(|&i| screen.element(&sets[i].element_id).expect("validated reference"))
            .collect();
        for (&i, p) in idx.iter().zip(predictor.score(screen, &elements)?) {
            probabilities[i] = p;
        }
    }
    bin_probabilities(&sets, &probabilities)
}
