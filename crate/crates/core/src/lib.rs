//! Statement-proof matching as a bipartite assignment problem.
//!
//! Given equal-size collections of mathematical statements and proofs, the
//! goal is to assign each statement its proof. This crate holds everything
//! that does not touch the filesystem:
//!
//! - [`token`] / [`corpus`]: the typed-token data model, pair filtering,
//!   deterministic splits and vocabularies;
//! - [`extract`]: mining statement-proof pairs out of XML element trees and
//!   linearizing MathML formulae;
//! - [`baselines`]: Dice and TF-IDF bag-of-words scorers;
//! - [`encoder`]: a self-attentive text encoder with a bilinear similarity
//!   head and hand-written analytic gradients;
//! - [`training`]: local (in-batch softmax) and hybrid global (max-margin)
//!   objectives with an averaged-SGD optimizer;
//! - [`assignment`]: exact dense and sparse maximum-weight bipartite matching
//!   solvers;
//! - [`eval`]: local/global decoding, MRR and accuracy.
//!
//! File formats, XML parsing and the command-line interface live in the
//! companion `proofmatch` crate. This crate is `no_std`-compatible (with
//! `alloc`); enable the `libm` feature instead of `std` for that.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("proofmatch-core needs either the `std` or the `libm` feature");

pub mod assignment;
pub mod baselines;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod extract;
pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod token;
pub mod training;

mod math;

pub use assignment::{assignment_score, prune_topk, solve_dense, solve_sparse, Assignment};
pub use corpus::{build_vocabulary, filter_pairs, shuffle_and_split, PairCorpus, Split, Vocabulary};
pub use matrix::{ScoreMatrix, SparseScoreMatrix};
pub use token::{InputMode, TokenKind, TypedToken};
