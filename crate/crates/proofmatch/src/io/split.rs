//! Split files: `{"seed": 42, "train": [ids], "dev": [ids], "test": [ids]}`.
//! Within each list, ids appear in corpus order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use proofmatch_core::corpus::{PairCorpus, Split};
use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub seed: u64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// Reads a split map back out of a corpus that already carries one.
pub fn split_file_from_corpus(corpus: &PairCorpus, seed: u64) -> SplitFile {
    let ids = |split: Split| -> Vec<String> {
        corpus
            .subset(split)
            .into_iter()
            .map(|p| p.id.clone())
            .collect()
    };
    SplitFile {
        seed,
        train: ids(Split::Train),
        dev: ids(Split::Dev),
        test: ids(Split::Test),
    }
}

pub fn save_split(split: &SplitFile, path: &Path) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(split).expect("split file serializes");
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

pub fn load_split(path: &Path) -> Result<SplitFile, Error> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Installs a split file onto a corpus, validating that the lists form a
/// partition of exactly the corpus ids.
pub fn apply_split(corpus: PairCorpus, split: &SplitFile) -> Result<PairCorpus, Error> {
    let mut map: BTreeMap<String, Split> = BTreeMap::new();
    for (ids, s) in [
        (&split.train, Split::Train),
        (&split.dev, Split::Dev),
        (&split.test, Split::Test),
    ] {
        for id in ids {
            if map.insert(id.clone(), s).is_some() {
                return Err(Error::Data(format!(
                    "pair id {id:?} appears in two splits"
                )));
            }
        }
    }
    Ok(corpus.with_split(map)?)
}
