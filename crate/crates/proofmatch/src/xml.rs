//! XML document parsing and corpus extraction over a directory of files.

use std::path::{Path, PathBuf};

use proofmatch_core::corpus::{filter_pairs, PairCorpus, StatementProofPair};
use proofmatch_core::extract::{
    english_stopword_ratio, extract_pair, find_pairs, XmlElement, XmlNode,
    ENGLISH_RATIO_THRESHOLD,
};
use walkdir::WalkDir;

use crate::Error;

/// Parses an XML document into the element tree the extractors walk.
/// Namespace prefixes are stripped: MathML elements keep their local names
/// (`math`, `mi`, ...) whether or not the document uses a prefix.
pub fn parse_xml_str(text: &str, doc_id: &str) -> Result<XmlElement, Error> {
    let options = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let doc = roxmltree::Document::parse_with_options(text, options)
        .map_err(|e| Error::Data(format!("cannot parse document {doc_id:?}: {e}")))?;
    Ok(convert_element(doc.root_element()))
}

fn convert_element(node: roxmltree::Node<'_, '_>) -> XmlElement {
    let mut element = XmlElement::new(node.tag_name().name());
    element.attrs = node
        .attributes()
        .map(|a| (a.name().to_string(), a.value().to_string()))
        .collect();
    for child in node.children() {
        if child.is_element() {
            element
                .children
                .push(XmlNode::Element(convert_element(child)));
        } else if child.is_text() {
            if let Some(t) = child.text() {
                element.children.push(XmlNode::Text(t.to_string()));
            }
        }
    }
    element
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    pub lang_filter: bool,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            lang_filter: false,
            min_len: proofmatch_core::corpus::DEFAULT_MIN_LEN,
            max_len: proofmatch_core::corpus::DEFAULT_MAX_LEN,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExtractSummary {
    pub documents_seen: usize,
    pub documents_with_pairs: usize,
    pub documents_dropped_by_language: usize,
    pub pairs_before_filter: usize,
    pub pairs_after_filter: usize,
}

/// Extracts statement-proof pairs from every `.xml` file under `input`,
/// in sorted path order so the output is stable. Pair ids are
/// `<file-stem>#<index>`.
pub fn extract_corpus(input: &Path, options: &ExtractOptions) -> Result<(PairCorpus, ExtractSummary), Error> {
    let mut files: Vec<PathBuf> = WalkDir::new(input)
        .into_iter()
        .filter_map(|entry| entry.ok())
        .filter(|entry| {
            entry.file_type().is_file()
                && entry
                    .path()
                    .extension()
                    .is_some_and(|ext| ext.eq_ignore_ascii_case("xml"))
        })
        .map(|entry| entry.into_path())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!(
            "no .xml files found under {}",
            input.display()
        )));
    }

    let mut summary = ExtractSummary::default();
    let mut all_pairs: Vec<StatementProofPair> = Vec::new();
    for file in &files {
        summary.documents_seen += 1;
        let doc_id = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| file.display().to_string());
        let text = std::fs::read_to_string(file).map_err(Error::io(file.as_path()))?;
        let root = parse_xml_str(&text, &doc_id)?;
        let raw_pairs = find_pairs(&root, &doc_id);
        if raw_pairs.is_empty() {
            continue;
        }
        summary.documents_with_pairs += 1;
        let pairs: Vec<StatementProofPair> = raw_pairs
            .iter()
            .enumerate()
            .map(|(k, raw)| extract_pair(raw, format!("{doc_id}#{k}")))
            .collect();
        if options.lang_filter {
            let ratio = english_stopword_ratio(
                pairs
                    .iter()
                    .flat_map(|p| p.statement.iter().chain(p.proof.iter())),
            );
            if ratio < ENGLISH_RATIO_THRESHOLD {
                summary.documents_dropped_by_language += 1;
                continue;
            }
        }
        summary.pairs_before_filter += pairs.len();
        all_pairs.extend(pairs);
    }

    let filtered = filter_pairs(all_pairs, options.min_len, options.max_len);
    summary.pairs_after_filter = filtered.len();
    Ok((PairCorpus::new(filtered)?, summary))
}
