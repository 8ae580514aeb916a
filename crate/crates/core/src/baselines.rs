//! Bag-of-words baselines: Dice similarity over token multisets and cosine
//! similarity over TF-IDF vectors.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::matrix::ScoreMatrix;
use crate::token::{InputMode, TypedToken};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaselineError {
    EmptyTexts,
}

impl fmt::Display for BaselineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineError::EmptyTexts => write!(f, "empty texts"),
        }
    }
}

impl core::error::Error for BaselineError {}

fn counts(tokens: &[TypedToken]) -> BTreeMap<&TypedToken, u64> {
    let mut c = BTreeMap::new();
    for t in tokens {
        *c.entry(t).or_insert(0) += 1;
    }
    c
}

/// Dice similarity over token multisets:
/// `2 * |s ∩ p| / (|s| + |p|)`, with multiset intersection taking the
/// per-token minimum of counts.
pub fn dice_score(s: &[TypedToken], p: &[TypedToken]) -> Result<f64, BaselineError> {
    if s.is_empty() && p.is_empty() {
        return Err(BaselineError::EmptyTexts);
    }
    let cs = counts(s);
    let cp = counts(p);
    let mut inter = 0u64;
    for (t, &n) in &cs {
        if let Some(&m) = cp.get(t) {
            inter += n.min(m);
        }
    }
    Ok(2.0 * inter as f64 / (s.len() + p.len()) as f64)
}

/// Document frequencies estimated on the training set, each statement and
/// each proof counted as one document.
#[derive(Debug, Clone)]
pub struct TfIdfModel {
    df: BTreeMap<TypedToken, u64>,
    n_docs: u64,
}

/// Fits document frequencies over the given documents.
pub fn tfidf_fit<'a, I>(train_texts: I) -> TfIdfModel
where
    I: IntoIterator<Item = &'a [TypedToken]>,
{
    let mut df: BTreeMap<TypedToken, u64> = BTreeMap::new();
    let mut n_docs = 0;
    for text in train_texts {
        n_docs += 1;
        for t in counts(text).keys() {
            *df.entry((*t).clone()).or_insert(0) += 1;
        }
    }
    TfIdfModel { df, n_docs }
}

impl TfIdfModel {
    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn df(&self, token: &TypedToken) -> u64 {
        self.df.get(token).copied().unwrap_or(0)
    }

    /// Smoothed inverse document frequency:
    /// `ln((1 + N) / (1 + df)) + 1`. Tokens never seen at fit time get
    /// `df = 0` and still receive a finite weight.
    pub fn idf(&self, token: &TypedToken) -> f64 {
        math::ln((1.0 + self.n_docs as f64) / (1.0 + self.df(token) as f64)) + 1.0
    }
}

/// Sparse L2-normalized TF-IDF vector, sorted by token for merge joins.
/// Explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BowVector {
    entries: Vec<(TypedToken, f64)>,
}

impl BowVector {
    pub fn entries(&self) -> &[(TypedToken, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Builds the TF-IDF vector of a text: raw term counts times IDF, then
/// L2-normalized so cosine reduces to a dot product.
pub fn tfidf_vector(model: &TfIdfModel, text: &[TypedToken]) -> BowVector {
    let mut entries: Vec<(TypedToken, f64)> = counts(text)
        .into_iter()
        .map(|(t, tf)| (t.clone(), tf as f64 * model.idf(t)))
        .collect();
    let norm = math::sqrt(entries.iter().map(|(_, w)| w * w).sum());
    if norm > 0.0 {
        for (_, w) in entries.iter_mut() {
            *w /= norm;
        }
    } else {
        entries.clear();
    }
    BowVector { entries }
}

/// Cosine similarity. Vectors are stored normalized, so this is a sparse
/// dot product; it is 0 whenever either vector has zero norm.
pub fn cosine(u: &BowVector, v: &BowVector) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut dot = 0.0;
    while i < u.entries.len() && j < v.entries.len() {
        match u.entries[i].0.cmp(&v.entries[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                dot += u.entries[i].1 * v.entries[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Dice,
    TfIdf,
}

/// Scores every statement against every proof with a bag-of-words method
/// under an input-mode restriction. For TF-IDF the model must have been fit
/// on training texts (restricted the same way). A text that becomes empty
/// under the restriction scores 0 against everything.
pub fn score_matrix_baseline(
    method: BaselineMethod,
    mode: InputMode,
    tfidf: Option<&TfIdfModel>,
    statements: &[Vec<TypedToken>],
    proofs: &[Vec<TypedToken>],
) -> ScoreMatrix {
    assert_eq!(
        statements.len(),
        proofs.len(),
        "statement and proof lists must have equal length"
    );
    let n = statements.len();
    let restrict = |texts: &[Vec<TypedToken>]| -> Vec<Vec<TypedToken>> {
        texts
            .iter()
            .map(|t| mode.restrict(t).cloned().collect())
            .collect()
    };
    let s_texts = restrict(statements);
    let p_texts = restrict(proofs);

    match method {
        BaselineMethod::Dice => ScoreMatrix::from_fn(n, |i, j| {
            if s_texts[i].is_empty() && p_texts[j].is_empty() {
                0.0
            } else {
                dice_score(&s_texts[i], &p_texts[j]).expect("non-empty by the guard above")
            }
        }),
        BaselineMethod::TfIdf => {
            let model = tfidf.expect("TF-IDF scoring requires a fitted model");
            let s_vecs: Vec<BowVector> = s_texts.iter().map(|t| tfidf_vector(model, t)).collect();
            let p_vecs: Vec<BowVector> = p_texts.iter().map(|t| tfidf_vector(model, t)).collect();
            ScoreMatrix::from_fn(n, |i, j| cosine(&s_vecs[i], &p_vecs[j]))
        }
    }
}
