//! Corpus statistics: token counts per side, broken down by token type,
//! plus the math proportion.

use std::collections::BTreeSet;

use proofmatch_core::corpus::PairCorpus;
use proofmatch_core::token::{TokenKind, TypedToken};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
}

fn summarize(values: &[f64]) -> SummaryStats {
    if values.is_empty() {
        return SummaryStats {
            min: 0.0,
            max: 0.0,
            mean: 0.0,
            sd: 0.0,
        };
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    // Population standard deviation.
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    SummaryStats {
        min,
        max,
        mean,
        sd: var.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideStats {
    pub both: SummaryStats,
    pub text_only: SummaryStats,
    pub math_only: SummaryStats,
    /// Math tokens as a percentage of all tokens, per text.
    pub math_percent: SummaryStats,
}

fn side_stats<'a>(texts: impl Iterator<Item = &'a [TypedToken]>) -> SideStats {
    let mut both = Vec::new();
    let mut text_only = Vec::new();
    let mut math_only = Vec::new();
    let mut math_pct = Vec::new();
    for tokens in texts {
        let math = tokens
            .iter()
            .filter(|t| t.kind() == TokenKind::Math)
            .count();
        let total = tokens.len();
        both.push(total as f64);
        text_only.push((total - math) as f64);
        math_only.push(math as f64);
        math_pct.push(if total == 0 {
            0.0
        } else {
            100.0 * math as f64 / total as f64
        });
    }
    SideStats {
        both: summarize(&both),
        text_only: summarize(&text_only),
        math_only: summarize(&math_only),
        math_percent: summarize(&math_pct),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub n_pairs: usize,
    pub n_documents: usize,
    pub statements: SideStats,
    pub proofs: SideStats,
}

pub fn corpus_stats(corpus: &PairCorpus) -> CorpusStats {
    let docs: BTreeSet<&str> = corpus.pairs().iter().map(|p| p.source_doc.as_str()).collect();
    CorpusStats {
        n_pairs: corpus.len(),
        n_documents: docs.len(),
        statements: side_stats(corpus.pairs().iter().map(|p| p.statement.as_slice())),
        proofs: side_stats(corpus.pairs().iter().map(|p| p.proof.as_slice())),
    }
}

pub fn render_stats(stats: &CorpusStats) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "pairs: {}    documents: {}\n\n",
        stats.n_pairs, stats.n_documents
    ));
    out.push_str(&format!(
        "{:<24}{:>8}{:>8}{:>16}\n",
        "", "min", "max", "mean±sd"
    ));
    let mut section = |name: &str, side: &SideStats| {
        out.push_str(&format!("{name}\n"));
        for (label, s, pct) in [
            ("  text+math", &side.both, false),
            ("  text only", &side.text_only, false),
            ("  math only", &side.math_only, false),
            ("  math proportion", &side.math_percent, true),
        ] {
            let suffix = if pct { "%" } else { "" };
            out.push_str(&format!(
                "{:<24}{:>7.1}{suffix}{:>7.1}{suffix}{:>11.1}±{:.1}{suffix}\n",
                label, s.min, s.max, s.mean, s.sd
            ));
        }
    };
    section("statements", &stats.statements);
    section("proofs", &stats.proofs);
    out
}
