//! On-disk formats: the JSONL corpus, JSON split files and binary model
//! checkpoints.

mod checkpoint;
mod jsonl;
mod split;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use jsonl::{load_corpus, save_corpus};
pub use split::{apply_split, load_split, save_split, split_file_from_corpus, SplitFile};
