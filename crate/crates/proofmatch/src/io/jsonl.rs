//! JSONL corpus format, one pair per line:
//! `{"id": "...", "doc": "...", "statement": ["w:suppose", ...], "proof": [...]}`
//!
//! Tokens are serialized as `w:<surface>` for words and `m:<font>:<surface>`
//! for math symbols. Saving is canonical (compact JSON, fields in the order
//! above, `\n` line endings), so save(load(f)) reproduces a canonical file
//! byte for byte.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use proofmatch_core::corpus::{PairCorpus, StatementProofPair};
use proofmatch_core::token::TypedToken;
use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Serialize, Deserialize)]
struct PairRecord {
    id: String,
    doc: String,
    statement: Vec<String>,
    proof: Vec<String>,
}

fn decode_tokens(raw: &[String], what: &str) -> Result<Vec<TypedToken>, String> {
    raw.iter()
        .map(|s| TypedToken::decode(s).map_err(|e| format!("in {what}: {e}")))
        .collect()
}

pub fn load_corpus(path: &Path) -> Result<PairCorpus, Error> {
    let file = File::open(path).map_err(Error::io(path))?;
    let reader = BufReader::new(file);
    let mut pairs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        let lineno = idx + 1;
        let record: PairRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno,
                detail: e.to_string(),
            })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno,
                detail: format!("duplicate pair id {:?}", record.id),
            });
        }
        let statement = decode_tokens(&record.statement, "statement").map_err(|detail| {
            Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno,
                detail,
            }
        })?;
        let proof =
            decode_tokens(&record.proof, "proof").map_err(|detail| Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno,
                detail,
            })?;
        pairs.push(StatementProofPair {
            id: record.id,
            source_doc: record.doc,
            statement,
            proof,
        });
    }
    Ok(PairCorpus::new(pairs)?)
}

pub fn save_corpus(corpus: &PairCorpus, path: &Path) -> Result<(), Error> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut writer = BufWriter::new(file);
    for pair in corpus.pairs() {
        let record = PairRecord {
            id: pair.id.clone(),
            doc: pair.source_doc.clone(),
            statement: pair.statement.iter().map(TypedToken::encode).collect(),
            proof: pair.proof.iter().map(TypedToken::encode).collect(),
        };
        let line = serde_json::to_string(&record).expect("pair record serializes");
        writer.write_all(line.as_bytes()).map_err(Error::io(path))?;
        writer.write_all(b"\n").map_err(Error::io(path))?;
    }
    writer.flush().map_err(Error::io(path))?;
    Ok(())
}
