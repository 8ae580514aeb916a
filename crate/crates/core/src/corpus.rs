//! Statement-proof pairs, length filtering, deterministic splits and
//! vocabularies.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::Xoshiro256;
use crate::token::{InputMode, TypedToken};

pub const DEFAULT_MIN_LEN: usize = 20;
pub const DEFAULT_MAX_LEN: usize = 500;

/// One statement and its gold proof, both as typed-token sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatementProofPair {
    pub id: String,
    pub source_doc: String,
    pub statement: Vec<TypedToken>,
    pub proof: Vec<TypedToken>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    DuplicateId(String),
    TooSmallToSplit(usize),
    UnknownId(String),
    IdInTwoSplits(String),
    MissingFromSplit(String),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::DuplicateId(id) => write!(f, "duplicate pair id {id:?}"),
            CorpusError::TooSmallToSplit(n) => {
                write!(f, "corpus too small to split ({n} pairs, need at least 10)")
            }
            CorpusError::UnknownId(id) => write!(f, "split references unknown pair id {id:?}"),
            CorpusError::IdInTwoSplits(id) => write!(f, "pair id {id:?} appears in two splits"),
            CorpusError::MissingFromSplit(id) => {
                write!(f, "pair id {id:?} is missing from the split")
            }
        }
    }
}

impl core::error::Error for CorpusError {}

/// A collection of pairs plus an optional train/dev/test partition of their
/// ids. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PairCorpus {
    pairs: Vec<StatementProofPair>,
    split: BTreeMap<String, Split>,
}

impl PairCorpus {
    /// Builds an unsplit corpus, rejecting duplicate ids.
    pub fn new(pairs: Vec<StatementProofPair>) -> Result<Self, CorpusError> {
        let mut seen = BTreeMap::new();
        for p in &pairs {
            if seen.insert(p.id.clone(), ()).is_some() {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Self {
            pairs,
            split: BTreeMap::new(),
        })
    }

    pub fn pairs(&self) -> &[StatementProofPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.split.get(id).copied()
    }

    pub fn has_split(&self) -> bool {
        !self.split.is_empty()
    }

    /// Installs a split map, checking it is a partition of exactly the
    /// corpus ids.
    pub fn with_split(mut self, split: BTreeMap<String, Split>) -> Result<Self, CorpusError> {
        for id in split.keys() {
            if !self.pairs.iter().any(|p| &p.id == id) {
                return Err(CorpusError::UnknownId(id.clone()));
            }
        }
        for p in &self.pairs {
            if !split.contains_key(&p.id) {
                return Err(CorpusError::MissingFromSplit(p.id.clone()));
            }
        }
        self.split = split;
        Ok(self)
    }

    /// Pairs belonging to `split`, in corpus order.
    pub fn subset(&self, split: Split) -> Vec<&StatementProofPair> {
        self.pairs
            .iter()
            .filter(|p| self.split.get(&p.id) == Some(&split))
            .collect()
    }

    pub fn split_map(&self) -> &BTreeMap<String, Split> {
        &self.split
    }
}

/// Keeps exactly the pairs whose statement and proof token counts both lie
/// in `[min_len, max_len]`; order is preserved.
pub fn filter_pairs(
    pairs: Vec<StatementProofPair>,
    min_len: usize,
    max_len: usize,
) -> Vec<StatementProofPair> {
    pairs
        .into_iter()
        .filter(|p| {
            let s = p.statement.len();
            let pr = p.proof.len();
            (min_len..=max_len).contains(&s) && (min_len..=max_len).contains(&pr)
        })
        .collect()
}

/// Shuffles the pair ids with a seeded xoshiro256** and partitions them
/// 80/10/10: the first `floor(0.8*N)` of the shuffled order become Train,
/// the next `floor(0.9*N) - floor(0.8*N)` Dev, and the rest Test.
///
/// The corpus keeps its original pair order; only the split assignment
/// depends on the shuffle.
pub fn shuffle_and_split(
    pairs: Vec<StatementProofPair>,
    seed: u64,
) -> Result<PairCorpus, CorpusError> {
    let n = pairs.len();
    if n < 10 {
        return Err(CorpusError::TooSmallToSplit(n));
    }
    let corpus = PairCorpus::new(pairs)?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Xoshiro256::from_seed(seed);
    rng.shuffle(&mut order);

    let train_end = n * 8 / 10;
    let dev_end = n * 9 / 10;
    let mut split = BTreeMap::new();
    for (rank, &idx) in order.iter().enumerate() {
        let s = if rank < train_end {
            Split::Train
        } else if rank < dev_end {
            Split::Dev
        } else {
            Split::Test
        };
        split.insert(corpus.pairs[idx].id.clone(), s);
    }
    corpus.with_split(split)
}

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

/// Token-to-id mapping built from the Train split only. Ids are dense and
/// 0-based with PAD = 0 and UNK = 1; lookups of unknown tokens return UNK.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    ids: BTreeMap<TypedToken, u32>,
    // id order, excluding PAD/UNK (which have no surface form)
    tokens: Vec<TypedToken>,
}

impl Vocabulary {
    /// Number of ids, including PAD and UNK.
    pub fn len(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lookup(&self, token: &TypedToken) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    /// The token assigned to `id`, if it is a regular (non-PAD, non-UNK) id.
    pub fn token_of(&self, id: u32) -> Option<&TypedToken> {
        (id as usize).checked_sub(2).and_then(|i| self.tokens.get(i))
    }

    /// Regular tokens in id order (id 2 first).
    pub fn tokens(&self) -> &[TypedToken] {
        &self.tokens
    }

    /// Rebuilds a vocabulary from tokens listed in id order (id 2 first), as
    /// stored in model checkpoints.
    pub fn from_id_order(tokens: Vec<TypedToken>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + 2))
            .collect();
        Self { ids, tokens }
    }

    /// Maps a text to ids under an input-mode restriction, with UNK fallback.
    ///
    /// A text that becomes empty under the restriction maps to a single PAD
    /// token so that downstream encoders always see a non-empty sequence.
    pub fn text_to_ids(&self, text: &[TypedToken], mode: InputMode) -> Vec<u32> {
        let ids: Vec<u32> = mode.restrict(text).map(|t| self.lookup(t)).collect();
        if ids.is_empty() {
            return alloc::vec![PAD_ID];
        }
        ids
    }
}

/// Counts tokens over Train statements and proofs and assigns dense ids to
/// every token occurring at least `min_freq` times. Id order follows token
/// order, which makes construction deterministic.
pub fn build_vocabulary(corpus: &PairCorpus, min_freq: u64) -> Vocabulary {
    let mut counts: BTreeMap<&TypedToken, u64> = BTreeMap::new();
    for pair in corpus.subset(Split::Train) {
        for t in pair.statement.iter().chain(pair.proof.iter()) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let tokens: Vec<TypedToken> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_freq)
        .map(|(t, _)| t.clone())
        .collect();
    Vocabulary::from_id_order(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    fn pair(id: &str, stmt_len: usize, proof_len: usize) -> StatementProofPair {
        let tok = |i: usize| TypedToken::word(format!("t{i}"));
        StatementProofPair {
            id: id.to_string(),
            source_doc: "doc".to_string(),
            statement: (0..stmt_len).map(tok).collect(),
            proof: (0..proof_len).map(tok).collect(),
        }
    }

    #[test]
    fn filter_excludes_short_statement() {
        let out = filter_pairs(vec![pair("a", 19, 100)], 20, 500);
        assert!(out.is_empty());
    }

    #[test]
    fn filter_keeps_boundaries() {
        let out = filter_pairs(vec![pair("a", 20, 500)], 20, 500);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn filter_matches_brute_force_scan() {
        let mut rng = Xoshiro256::from_seed(11);
        let pairs: Vec<_> = (0..100)
            .map(|i| {
                pair(
                    &format!("p{i}"),
                    rng.below(600) as usize + 1,
                    rng.below(600) as usize + 1,
                )
            })
            .collect();
        let expected: Vec<String> = pairs
            .iter()
            .filter(|p| {
                p.statement.len() >= 20
                    && p.statement.len() <= 500
                    && p.proof.len() >= 20
                    && p.proof.len() <= 500
            })
            .map(|p| p.id.clone())
            .collect();
        let got: Vec<String> = filter_pairs(pairs, 20, 500)
            .into_iter()
            .map(|p| p.id)
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn split_of_ten_is_8_1_1() {
        let pairs: Vec<_> = (0..10).map(|i| pair(&format!("p{i}"), 20, 20)).collect();
        let corpus = shuffle_and_split(pairs, 5).unwrap();
        assert_eq!(corpus.subset(Split::Train).len(), 8);
        assert_eq!(corpus.subset(Split::Dev).len(), 1);
        assert_eq!(corpus.subset(Split::Test).len(), 1);
    }

    #[test]
    fn split_proportions_match_published_counts() {
        // 184094 pairs must split into 147276/18409/18409 within one pair.
        let n: usize = 184_094;
        let train_end = n * 8 / 10;
        let dev_end = n * 9 / 10;
        let train = train_end;
        let dev = dev_end - train_end;
        let test = n - dev_end;
        assert!((train as i64 - 147_276).abs() <= 1, "train {train}");
        assert!((dev as i64 - 18_409).abs() <= 1, "dev {dev}");
        assert!((test as i64 - 18_409).abs() <= 1, "test {test}");
    }

    #[test]
    fn split_is_deterministic() {
        let mk = || (0..57).map(|i| pair(&format!("p{i}"), 20, 20)).collect();
        let a = shuffle_and_split(mk(), 42).unwrap();
        let b = shuffle_and_split(mk(), 42).unwrap();
        assert_eq!(a.split_map(), b.split_map());
        let c = shuffle_and_split(mk(), 43).unwrap();
        assert_ne!(a.split_map(), c.split_map());
    }

    #[test]
    fn split_rejects_tiny_corpus() {
        let pairs: Vec<_> = (0..9).map(|i| pair(&format!("p{i}"), 20, 20)).collect();
        assert!(matches!(
            shuffle_and_split(pairs, 1),
            Err(CorpusError::TooSmallToSplit(9))
        ));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let pairs = vec![pair("a", 20, 20), pair("a", 21, 21)];
        assert!(matches!(
            PairCorpus::new(pairs),
            Err(CorpusError::DuplicateId(_))
        ));
    }

    fn tiny_split_corpus() -> PairCorpus {
        // 1 train pair holding the vocabulary, plus filler to reach N=10.
        let mut pairs = vec![];
        for i in 0..10 {
            pairs.push(pair(&format!("p{i}"), 20, 20));
        }
        let corpus = PairCorpus::new(pairs).unwrap();
        let split = corpus
            .pairs()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s = match i {
                    0..=7 => Split::Train,
                    8 => Split::Dev,
                    _ => Split::Test,
                };
                (p.id.clone(), s)
            })
            .collect();
        corpus.with_split(split).unwrap()
    }

    #[test]
    fn vocabulary_counts_by_hand() {
        let mut pairs = vec![StatementProofPair {
            id: "v".to_string(),
            source_doc: "doc".to_string(),
            statement: vec![
                TypedToken::word("a"),
                TypedToken::word("a"),
                TypedToken::math("normal", "x"),
            ],
            proof: (0..20).map(|i| TypedToken::word(format!("f{i}"))).collect(),
        }];
        for i in 1..10 {
            pairs.push(pair(&format!("p{i}"), 20, 20));
        }
        let corpus = PairCorpus::new(pairs).unwrap();
        let split = corpus
            .pairs()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                (
                    p.id.clone(),
                    if i == 0 { Split::Train } else { Split::Test },
                )
            })
            .collect();
        let corpus = corpus.with_split(split).unwrap();
        // min_freq 2: only "a" survives (f0..f19 and m:x appear once).
        let vocab = build_vocabulary(&corpus, 2);
        assert_eq!(vocab.len(), 3); // PAD, UNK, "a"
        assert_eq!(vocab.lookup(&TypedToken::word("a")), 2);
        assert_eq!(vocab.lookup(&TypedToken::math("normal", "x")), UNK_ID);
    }

    #[test]
    fn dev_only_tokens_map_to_unk() {
        let corpus = tiny_split_corpus();
        let vocab = build_vocabulary(&corpus, 1);
        // "t0" occurs in Train, a brand-new token does not.
        assert_ne!(vocab.lookup(&TypedToken::word("t0")), UNK_ID);
        assert_eq!(vocab.lookup(&TypedToken::word("only-in-dev")), UNK_ID);
    }

    #[test]
    fn vocabulary_matches_counting_oracle() {
        let mut rng = Xoshiro256::from_seed(17);
        let mut pairs = vec![];
        for i in 0..20 {
            let tok = |r: &mut Xoshiro256| TypedToken::word(format!("w{}", r.below(30)));
            pairs.push(StatementProofPair {
                id: format!("p{i}"),
                source_doc: "doc".to_string(),
                statement: (0..25).map(|_| tok(&mut rng)).collect(),
                proof: (0..25).map(|_| tok(&mut rng)).collect(),
            });
        }
        let corpus = shuffle_and_split(pairs, 3).unwrap();

        // Independent frequency count over the train split.
        let mut counts: BTreeMap<TypedToken, u64> = BTreeMap::new();
        for p in corpus.subset(Split::Train) {
            for t in p.statement.iter().chain(p.proof.iter()) {
                *counts.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let expected: Vec<TypedToken> = counts
            .iter()
            .filter(|&(_, &c)| c >= 3)
            .map(|(t, _)| t.clone())
            .collect();

        let vocab = build_vocabulary(&corpus, 3);
        assert_eq!(vocab.tokens(), expected.as_slice());
    }

    #[test]
    fn word_and_math_are_distinct_vocabulary_entries() {
        let corpus = {
            let mut pairs = vec![StatementProofPair {
                id: "v".to_string(),
                source_doc: "doc".to_string(),
                statement: vec![TypedToken::word("x"), TypedToken::math("normal", "x")],
                proof: vec![TypedToken::word("x")],
            }];
            for i in 1..10 {
                pairs.push(pair(&format!("p{i}"), 20, 20));
            }
            let corpus = PairCorpus::new(pairs).unwrap();
            let split = corpus
                .pairs()
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    (
                        p.id.clone(),
                        if i == 0 { Split::Train } else { Split::Test },
                    )
                })
                .collect();
            corpus.with_split(split).unwrap()
        };
        let vocab = build_vocabulary(&corpus, 1);
        let w = vocab.lookup(&TypedToken::word("x"));
        let m = vocab.lookup(&TypedToken::math("normal", "x"));
        assert_ne!(w, m);
        assert_ne!(w, UNK_ID);
        assert_ne!(m, UNK_ID);
    }

    #[test]
    fn empty_restriction_maps_to_pad() {
        let corpus = tiny_split_corpus();
        let vocab = build_vocabulary(&corpus, 1);
        let text = vec![TypedToken::word("t0")];
        assert_eq!(vocab.text_to_ids(&text, InputMode::MathOnly), vec![PAD_ID]);
        assert_eq!(
            vocab.text_to_ids(&text, InputMode::TextOnly),
            vec![vocab.lookup(&TypedToken::word("t0"))]
        );
    }
}
