//! Mining statement-proof pairs from XML element trees and linearizing
//! MathML formulae into typed tokens.
//!
//! A pair is two consecutive sibling `div` elements where the first one's
//! `class` attribute contains "theorem" and the second one's `class` is
//! exactly "proof" (both case-insensitively; whitespace-only text between
//! the two divs is ignored). Formula subtrees rooted at `math` are read by
//! depth-first search over their text leaves, each leaf typed with the
//! nearest enclosing `mathvariant` font; everything else is tokenized as
//! lowercased words.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::StatementProofPair;
use crate::token::TypedToken;

/// One node of a parsed XML document: an element or character data.
/// Tag and attribute names are local names (namespace prefixes stripped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XmlNode {
    Element(XmlElement),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlElement {
    pub tag: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<XmlNode>,
}

impl XmlElement {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    fn element_children(&self) -> impl Iterator<Item = &XmlElement> {
        self.children.iter().filter_map(|c| match c {
            XmlNode::Element(e) => Some(e),
            XmlNode::Text(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractError {
    UnparseableDocument { doc_id: String, detail: String },
}

impl fmt::Display for ExtractError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractError::UnparseableDocument { doc_id, detail } => {
                write!(f, "cannot parse document {doc_id:?}: {detail}")
            }
        }
    }
}

impl core::error::Error for ExtractError {}

/// A candidate statement-proof pair: two adjacent sibling `div` subtrees.
#[derive(Debug, Clone)]
pub struct RawPair<'a> {
    pub statement: &'a XmlElement,
    pub proof: &'a XmlElement,
    pub doc_id: String,
}

fn class_contains_theorem(e: &XmlElement) -> bool {
    e.tag == "div"
        && e.attr("class")
            .is_some_and(|c| c.to_lowercase().contains("theorem"))
}

fn class_is_proof(e: &XmlElement) -> bool {
    e.tag == "div" && e.attr("class").is_some_and(|c| c.trim().eq_ignore_ascii_case("proof"))
}

/// Finds every pair of consecutive sibling `div` elements where the first
/// one's class contains "theorem" and the second one's class is "proof",
/// in document order, anywhere in the tree.
pub fn find_pairs<'a>(doc: &'a XmlElement, doc_id: &str) -> Vec<RawPair<'a>> {
    let mut out = Vec::new();
    walk_find(doc, doc_id, &mut out);
    out
}

fn walk_find<'a>(e: &'a XmlElement, doc_id: &str, out: &mut Vec<RawPair<'a>>) {
    let kids: Vec<&XmlElement> = e.element_children().collect();
    for w in kids.windows(2) {
        if class_contains_theorem(w[0]) && class_is_proof(w[1]) {
            out.push(RawPair {
                statement: w[0],
                proof: w[1],
                doc_id: doc_id.to_string(),
            });
        }
    }
    for k in kids {
        walk_find(k, doc_id, out);
    }
}

/// Characters split off as single-token words.
const PUNCTUATION: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '[', ']', '{', '}'];

/// Lowercases, splits on whitespace, and separates punctuation characters
/// into their own word tokens.
pub fn tokenize_text(text: &str) -> Vec<TypedToken> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for ch in chunk.chars() {
            if PUNCTUATION.contains(&ch) {
                if !word.is_empty() {
                    out.push(TypedToken::word(core::mem::take(&mut word)));
                }
                out.push(TypedToken::word(ch.to_string()));
            } else {
                word.extend(ch.to_lowercase());
            }
        }
        if !word.is_empty() {
            out.push(TypedToken::word(word));
        }
    }
    out
}

/// Linearizes a MathML subtree into math tokens: depth-first over text
/// leaves, splitting each leaf on whitespace.
///
/// The font of a token is the nearest enclosing `mathvariant` attribute.
/// Without one, an `mi` holding a single character defaults to "italic"
/// (the MathML convention); every other leaf defaults to "normal".
pub fn linearize_mathml(math: &XmlElement) -> Vec<TypedToken> {
    let mut out = Vec::new();
    linearize_walk(math, None, &mut out);
    out
}

fn linearize_walk<'a>(e: &'a XmlElement, inherited: Option<&'a str>, out: &mut Vec<TypedToken>) {
    let font = e.attr("mathvariant").or(inherited);
    for child in &e.children {
        match child {
            XmlNode::Element(el) => linearize_walk(el, font, out),
            XmlNode::Text(t) => {
                let trimmed = t.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let default_font = if e.tag == "mi" && trimmed.chars().count() == 1 {
                    "italic"
                } else {
                    "normal"
                };
                let resolved = font.unwrap_or(default_font);
                for piece in trimmed.split_whitespace() {
                    out.push(TypedToken::math(resolved, piece));
                }
            }
        }
    }
}

fn tokenize_subtree(e: &XmlElement, out: &mut Vec<TypedToken>) {
    for child in &e.children {
        match child {
            XmlNode::Text(t) => out.extend(tokenize_text(t)),
            XmlNode::Element(el) if el.tag == "math" => out.extend(linearize_mathml(el)),
            XmlNode::Element(el) => tokenize_subtree(el, out),
        }
    }
}

/// Turns a raw pair into token sequences: text nodes go through
/// [`tokenize_text`], `math` subtrees through [`linearize_mathml`], all in
/// document order.
pub fn extract_pair(raw: &RawPair<'_>, id: String) -> StatementProofPair {
    let mut statement = Vec::new();
    tokenize_subtree(raw.statement, &mut statement);
    let mut proof = Vec::new();
    tokenize_subtree(raw.proof, &mut proof);
    StatementProofPair {
        id,
        source_doc: raw.doc_id.clone(),
        statement,
        proof,
    }
}

/// 100 common English words used by the optional language heuristic: a
/// document is considered English when at least 30% of its word tokens are
/// in this list.
pub const ENGLISH_STOPWORDS: [&str; 100] = [
    "the", "of", "and", "a", "to", "in", "is", "that", "for", "it", "as", "was", "with", "be",
    "by", "on", "not", "he", "this", "are", "or", "his", "from", "at", "which", "but", "have",
    "an", "had", "they", "you", "were", "their", "one", "all", "we", "can", "her", "has", "there",
    "been", "if", "more", "when", "will", "would", "who", "so", "no", "she", "other", "its",
    "may", "these", "what", "them", "than", "some", "him", "time", "into", "only", "do", "such",
    "my", "new", "about", "out", "also", "two", "any", "up", "first", "could", "our", "then",
    "most", "see", "me", "should", "after", "said", "your", "very", "between", "made", "many",
    "over", "where", "much", "both", "now", "those", "each", "us", "how", "let", "since", "thus",
    "hence",
];

/// Fraction of word tokens that are bundled English stopwords. Math tokens
/// are ignored; an input without word tokens scores 0.
pub fn english_stopword_ratio<'a>(tokens: impl IntoIterator<Item = &'a TypedToken>) -> f64 {
    let mut words = 0u64;
    let mut hits = 0u64;
    for t in tokens {
        if t.kind() == crate::token::TokenKind::Word {
            words += 1;
            if ENGLISH_STOPWORDS.contains(&t.surface()) {
                hits += 1;
            }
        }
    }
    if words == 0 {
        0.0
    } else {
        hits as f64 / words as f64
    }
}

/// Threshold for [`english_stopword_ratio`] below which a document is
/// dropped when language filtering is enabled.
pub const ENGLISH_RATIO_THRESHOLD: f64 = 0.30;
