//! Synthetic corpus generator for end-to-end experiments.
//!
//! Each pair gets a pair-unique marker token present in both the statement
//! and the proof, plus background tokens. The background vocabulary is
//! split into a statement pool and a proof pool: statements draw from the
//! statement pool, and each proof background token is, with probability
//! `overlap`, copied from its own statement (shared vocabulary) and
//! otherwise drawn from the proof pool. At `overlap = 0` the marker is
//! therefore the only token a statement shares with its proof; larger
//! overlaps make matching by bag similarity both possible and noisy.

use proofmatch_core::corpus::{PairCorpus, StatementProofPair};
use proofmatch_core::rng::Xoshiro256;
use proofmatch_core::token::TypedToken;

use crate::Error;

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub n_pairs: usize,
    pub vocab_size: usize,
    pub overlap: f64,
    pub seed: u64,
}

/// Statement lengths are uniform in [21, 27] tokens and proof lengths in
/// [22, 32], comfortably inside the default corpus filter.
const STMT_LEN: (u64, u64) = (21, 27);
const PROOF_LEN: (u64, u64) = (22, 32);

fn background_token(index: u64) -> TypedToken {
    // Alternate word / math tokens so every input mode sees some signal.
    if index % 2 == 0 {
        TypedToken::word(format!("bg{index}"))
    } else {
        TypedToken::math("italic", format!("v{index}"))
    }
}

pub fn synth_corpus(config: &SynthConfig) -> Result<PairCorpus, Error> {
    if !(0.0..=1.0).contains(&config.overlap) {
        return Err(Error::Usage(format!(
            "overlap must be in [0, 1], got {}",
            config.overlap
        )));
    }
    if config.n_pairs > 0 && config.vocab_size < 2 {
        return Err(Error::Usage("vocab size must be at least 2".into()));
    }

    let mut rng = Xoshiro256::from_seed(config.seed);
    let half = (config.vocab_size / 2).max(1) as u64;
    let vocab = config.vocab_size as u64;
    let mut pairs = Vec::with_capacity(config.n_pairs);
    for i in 0..config.n_pairs {
        let marker = TypedToken::math("normal", format!("mk{i}"));

        let stmt_len = STMT_LEN.0 + rng.below(STMT_LEN.1 - STMT_LEN.0 + 1);
        let mut statement: Vec<TypedToken> = (0..stmt_len - 1)
            .map(|_| background_token(rng.below(half)))
            .collect();
        let at = rng.below(statement.len() as u64 + 1) as usize;
        statement.insert(at, marker.clone());

        let proof_len = PROOF_LEN.0 + rng.below(PROOF_LEN.1 - PROOF_LEN.0 + 1);
        let mut proof: Vec<TypedToken> = (0..proof_len - 1)
            .map(|_| {
                if rng.next_f64() < config.overlap {
                    statement[rng.below(statement.len() as u64) as usize].clone()
                } else {
                    background_token(half + rng.below(vocab - half))
                }
            })
            .collect();
        let at = rng.below(proof.len() as u64 + 1) as usize;
        proof.insert(at, marker);

        pairs.push(StatementProofPair {
            id: format!("synth-{i:06}"),
            source_doc: "synth".to_string(),
            statement,
            proof,
        });
    }
    Ok(PairCorpus::new(pairs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proofmatch_core::token::TokenKind;
    use std::collections::BTreeSet;

    #[test]
    fn zero_pairs_gives_empty_corpus() {
        let corpus = synth_corpus(&SynthConfig {
            n_pairs: 0,
            vocab_size: 10,
            overlap: 0.5,
            seed: 1,
        })
        .unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn same_seed_is_identical() {
        let cfg = SynthConfig {
            n_pairs: 25,
            vocab_size: 40,
            overlap: 0.3,
            seed: 9,
        };
        let a = synth_corpus(&cfg).unwrap();
        let b = synth_corpus(&cfg).unwrap();
        assert_eq!(a.pairs(), b.pairs());
    }

    #[test]
    fn zero_overlap_shares_only_the_marker() {
        let corpus = synth_corpus(&SynthConfig {
            n_pairs: 30,
            vocab_size: 60,
            overlap: 0.0,
            seed: 2,
        })
        .unwrap();
        for pair in corpus.pairs() {
            let s: BTreeSet<_> = pair.statement.iter().collect();
            let p: BTreeSet<_> = pair.proof.iter().collect();
            let shared: Vec<_> = s.intersection(&p).collect();
            assert_eq!(shared.len(), 1, "pair {}", pair.id);
            assert_eq!(shared[0].kind(), TokenKind::Math);
            assert!(shared[0].surface().starts_with("mk"));
        }
    }

    #[test]
    fn lengths_respect_the_default_filter() {
        let corpus = synth_corpus(&SynthConfig {
            n_pairs: 200,
            vocab_size: 100,
            overlap: 1.0,
            seed: 3,
        })
        .unwrap();
        for pair in corpus.pairs() {
            assert!((20..=500).contains(&pair.statement.len()));
            assert!((20..=500).contains(&pair.proof.len()));
        }
    }

    #[test]
    fn overlap_outside_unit_interval_is_rejected() {
        let err = synth_corpus(&SynthConfig {
            n_pairs: 1,
            vocab_size: 10,
            overlap: 1.5,
            seed: 0,
        });
        assert!(matches!(err, Err(Error::Usage(_))));
    }
}
