//! The `proofmatch` command line: extract | split | stats | synth |
//! baseline | train | evaluate.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! divergence.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use proofmatch_core::baselines::{score_matrix_baseline, tfidf_fit, BaselineMethod};
use proofmatch_core::corpus::{build_vocabulary, shuffle_and_split, PairCorpus, Split, Vocabulary};
use proofmatch_core::encoder::{EncoderConfig, EncoderModel};
use proofmatch_core::eval::{decode_local, evaluate, proof_usage_histogram};
use proofmatch_core::matrix::ScoreMatrix;
use proofmatch_core::token::{InputMode, TypedToken};
use proofmatch_core::training::{
    encode_corpus, train, Objective, SelectionMetric, StepKind, TrainConfig, TrainEvent,
};

use crate::io::{
    apply_split, load_checkpoint, load_corpus, load_split, save_checkpoint, save_corpus,
    save_split, split_file_from_corpus,
};
use crate::report::ReportJson;
use crate::stats::{corpus_stats, render_stats};
use crate::synth::{synth_corpus, SynthConfig};
use crate::xml::{extract_corpus, ExtractOptions};
use crate::Error;

#[derive(Parser)]
#[command(
    name = "proofmatch",
    version,
    about = "Match mathematical statements to their proofs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Both,
    Text,
    Math,
}

impl ModeArg {
    fn input_mode(self) -> InputMode {
        match self {
            ModeArg::Both => InputMode::Both,
            ModeArg::Text => InputMode::TextOnly,
            ModeArg::Math => InputMode::MathOnly,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ModeArg::Both => "both",
            ModeArg::Text => "text",
            ModeArg::Math => "math",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Dice,
    Tfidf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SetArg {
    Dev,
    Test,
}

impl SetArg {
    fn split(self) -> Split {
        match self {
            SetArg::Dev => Split::Dev,
            SetArg::Test => Split::Test,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SetArg::Dev => "dev",
            SetArg::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Local,
    Hybrid,
}

#[derive(Subcommand)]
enum Command {
    /// Mine statement-proof pairs from a directory of XML documents.
    Extract {
        /// Directory scanned recursively for .xml files.
        #[arg(long)]
        input: PathBuf,
        /// Output corpus (JSONL).
        #[arg(long)]
        output: PathBuf,
        /// Drop documents whose stopword ratio marks them as non-English.
        #[arg(long)]
        lang_filter: bool,
        /// Minimum token count for statements and proofs.
        #[arg(long, default_value_t = 20)]
        min_len: usize,
        /// Maximum token count for statements and proofs.
        #[arg(long, default_value_t = 500)]
        max_len: usize,
    },
    /// Shuffle pair ids with a seed and write an 80/10/10 split file.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print token-count statistics for a corpus.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Generate a synthetic corpus of marker-linked pairs.
    Synth {
        #[arg(long)]
        n_pairs: usize,
        #[arg(long)]
        vocab_size: usize,
        /// Probability that a proof background token is copied from its
        /// statement (in [0, 1]).
        #[arg(long)]
        overlap: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an evaluation set with a bag-of-words baseline.
    Baseline {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value = "dev")]
        set: SetArg,
        /// Top-k pruning width for global decoding.
        #[arg(long, default_value_t = 500)]
        k: usize,
    },
    /// Train the self-attentive bilinear model.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// JSON experiment configuration (training + encoder sections).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Training log (JSONL). Defaults to `<out>.log.jsonl`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate a trained model on the dev or test set.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, value_enum)]
        set: SetArg,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 500)]
        k: usize,
        #[arg(long)]
        report: PathBuf,
    },
}

/// The JSON experiment configuration for `train`. Unknown keys are
/// rejected; every field has the reference default.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub min_freq: u64,
    pub train: TrainSection,
    pub encoder: EncoderSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            min_freq: 2,
            train: TrainSection::default(),
            encoder: EncoderSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub eval_every: usize,
    pub seed: u64,
    pub selection_metric: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            batch_size: d.batch_size,
            epochs: d.epochs,
            lr: d.lr,
            lr_decay: d.lr_decay,
            eval_every: d.eval_every,
            seed: d.seed,
            selection_metric: "dev_mrr_local".to_string(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub embed_dim: usize,
    pub layers: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub key_dim: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let d = EncoderConfig::default();
        Self {
            embed_dim: d.embed_dim,
            layers: d.layers,
            model_dim: d.model_dim,
            heads: d.heads,
            key_dim: d.key_dim,
            ffn_dim: d.ffn_dim,
            max_len: d.max_len,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    pub fn train_config(&self, objective: Objective) -> Result<TrainConfig, Error> {
        let selection_metric = match self.train.selection_metric.as_str() {
            "dev_mrr_local" => SelectionMetric::DevMrrLocal,
            "dev_acc_local" => SelectionMetric::DevAccLocal,
            other => {
                return Err(Error::Data(format!(
                    "unknown selection_metric {other:?} (expected dev_mrr_local or dev_acc_local)"
                )))
            }
        };
        Ok(TrainConfig {
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            lr: self.train.lr,
            lr_decay: self.train.lr_decay,
            eval_every: self.train.eval_every,
            objective,
            seed: self.train.seed,
            selection_metric,
        })
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            embed_dim: self.encoder.embed_dim,
            layers: self.encoder.layers,
            model_dim: self.encoder.model_dim,
            heads: self.encoder.heads,
            key_dim: self.encoder.key_dim,
            ffn_dim: self.encoder.ffn_dim,
            max_len: self.encoder.max_len,
        }
    }
}

/// Parses argv and runs; returns the process exit code.
pub fn main_impl() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("proofmatch: {e}");
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Extract {
            input,
            output,
            lang_filter,
            min_len,
            max_len,
        } => {
            let options = ExtractOptions {
                lang_filter,
                min_len,
                max_len,
            };
            let (corpus, summary) = extract_corpus(&input, &options)?;
            save_corpus(&corpus, &output)?;
            println!(
                "documents: {} seen, {} with pairs, {} dropped by language",
                summary.documents_seen,
                summary.documents_with_pairs,
                summary.documents_dropped_by_language
            );
            println!(
                "pairs: {} extracted, {} kept after length filter -> {}",
                summary.pairs_before_filter,
                summary.pairs_after_filter,
                output.display()
            );
            Ok(())
        }
        Command::Split { corpus, seed, out } => {
            let loaded = load_corpus(&corpus)?;
            let split_corpus = shuffle_and_split(loaded.pairs().to_vec(), seed)?;
            let file = split_file_from_corpus(&split_corpus, seed);
            save_split(&file, &out)?;
            println!(
                "split {} pairs into {}/{}/{} (seed {seed}) -> {}",
                split_corpus.len(),
                file.train.len(),
                file.dev.len(),
                file.test.len(),
                out.display()
            );
            Ok(())
        }
        Command::Stats { corpus } => {
            let loaded = load_corpus(&corpus)?;
            print!("{}", render_stats(&corpus_stats(&loaded)));
            Ok(())
        }
        Command::Synth {
            n_pairs,
            vocab_size,
            overlap,
            seed,
            out,
        } => {
            let corpus = synth_corpus(&SynthConfig {
                n_pairs,
                vocab_size,
                overlap,
                seed,
            })?;
            save_corpus(&corpus, &out)?;
            println!("wrote {} synthetic pairs -> {}", corpus.len(), out.display());
            Ok(())
        }
        Command::Baseline {
            method,
            mode,
            corpus,
            split,
            report,
            set,
            k,
        } => run_baseline(method, mode, &corpus, &split, &report, set, k),
        Command::Train {
            corpus,
            split,
            config,
            mode,
            objective,
            out,
            log,
        } => run_train(&corpus, &split, &config, mode, objective, &out, log.as_deref()),
        Command::Evaluate {
            model,
            corpus,
            split,
            set,
            mode,
            k,
            report,
        } => run_evaluate(&model, &corpus, &split, set, mode, k, &report),
    }
}

fn load_corpus_with_split(corpus: &Path, split: &Path) -> Result<PairCorpus, Error> {
    let loaded = load_corpus(corpus)?;
    let split_file = load_split(split)?;
    apply_split(loaded, &split_file)
}

fn split_texts(corpus: &PairCorpus, split: Split) -> (Vec<Vec<TypedToken>>, Vec<Vec<TypedToken>>) {
    let pairs = corpus.subset(split);
    let statements = pairs.iter().map(|p| p.statement.clone()).collect();
    let proofs = pairs.iter().map(|p| p.proof.clone()).collect();
    (statements, proofs)
}

fn write_report(report: &ReportJson, path: &Path) -> Result<(), Error> {
    std::fs::write(path, report.to_json_string()).map_err(Error::io(path))?;
    println!(
        "{} {} {}: n={} mrr={:.4} acc_local={:.4} acc_global={:.4}{} -> {}",
        report.method,
        report.mode,
        report.set,
        report.n,
        report.mrr,
        report.accuracy_local,
        report.accuracy_global,
        if report.degraded_global { " (degraded)" } else { "" },
        path.display()
    );
    Ok(())
}

fn report_from_matrix(
    matrix: &ScoreMatrix,
    method: &str,
    mode: ModeArg,
    set: SetArg,
    k: usize,
) -> Result<ReportJson, Error> {
    let eval_report = evaluate(matrix, k)?;
    let usage = proof_usage_histogram(&decode_local(matrix));
    Ok(ReportJson::new(
        method,
        mode.as_str(),
        set.as_str(),
        k,
        &eval_report,
        &usage,
    ))
}

fn run_baseline(
    method: MethodArg,
    mode: ModeArg,
    corpus: &Path,
    split: &Path,
    report: &Path,
    set: SetArg,
    k: usize,
) -> Result<(), Error> {
    let corpus = load_corpus_with_split(corpus, split)?;
    let (statements, proofs) = split_texts(&corpus, set.split());
    if statements.is_empty() {
        return Err(Error::Data(format!("{} split is empty", set.as_str())));
    }
    let input_mode = mode.input_mode();

    let (matrix, method_name) = match method {
        MethodArg::Dice => (
            score_matrix_baseline(BaselineMethod::Dice, input_mode, None, &statements, &proofs),
            "dice",
        ),
        MethodArg::Tfidf => {
            // IDF estimated on the training set only, every statement and
            // proof counting as one document, restricted to the input mode.
            let restricted_train: Vec<Vec<TypedToken>> = corpus
                .subset(Split::Train)
                .into_iter()
                .flat_map(|p| [p.statement.as_slice(), p.proof.as_slice()])
                .map(|text| input_mode.restrict(text).cloned().collect())
                .collect();
            let model = tfidf_fit(restricted_train.iter().map(|t| t.as_slice()));
            (
                score_matrix_baseline(
                    BaselineMethod::TfIdf,
                    input_mode,
                    Some(&model),
                    &statements,
                    &proofs,
                ),
                "tfidf",
            )
        }
    };
    let report_json = report_from_matrix(&matrix, method_name, mode, set, k)?;
    write_report(&report_json, report)
}

fn run_train(
    corpus: &Path,
    split: &Path,
    config: &Path,
    mode: ModeArg,
    objective: ObjectiveArg,
    out: &Path,
    log: Option<&Path>,
) -> Result<(), Error> {
    let corpus = load_corpus_with_split(corpus, split)?;
    let experiment = ExperimentConfig::load(config)?;
    let objective = match objective {
        ObjectiveArg::Local => Objective::Local,
        ObjectiveArg::Hybrid => Objective::HybridGlobal,
    };
    let train_config = experiment.train_config(objective)?;
    let encoder_config = experiment.encoder_config();

    let vocab = build_vocabulary(&corpus, experiment.min_freq);
    let model = EncoderModel::new(encoder_config, vocab.len(), train_config.seed)
        .map_err(|e| Error::Data(e.to_string()))?;
    let data = encode_corpus(&corpus, &vocab, mode.input_mode());

    let log_path: PathBuf = log
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("{}.log.jsonl", out.display())));
    let log_file = File::create(&log_path).map_err(Error::io(log_path.as_path()))?;
    let mut log_writer = BufWriter::new(log_file);
    let mut log_error: Option<std::io::Error> = None;

    let outcome = {
        let mut observer = |event: TrainEvent| {
            let line = match &event {
                TrainEvent::Step {
                    epoch,
                    step,
                    kind,
                    loss,
                    lr,
                } => serde_json::json!({
                    "event": "step",
                    "epoch": epoch,
                    "step": step,
                    "kind": match kind { StepKind::Local => "local", StepKind::Global => "global" },
                    "loss": loss,
                    "lr": lr,
                }),
                TrainEvent::DevEval(p) => serde_json::json!({
                    "event": "dev_eval",
                    "epoch": p.epoch,
                    "dev_mrr": p.dev_mrr,
                    "dev_accuracy": p.dev_accuracy,
                    "is_best": p.is_best,
                }),
            };
            if log_error.is_none() {
                if let Err(e) = writeln!(log_writer, "{line}") {
                    log_error = Some(e);
                }
            }
        };
        train(model, &data, &train_config, &mut observer)?
    };
    log_writer.flush().map_err(Error::io(log_path.as_path()))?;
    if let Some(e) = log_error {
        return Err(Error::Io {
            path: log_path,
            source: e,
        });
    }

    save_checkpoint(&outcome.model, &vocab, out)?;
    println!(
        "trained {} epochs; best dev metric {:.4} at epoch {}; checkpoint -> {}",
        train_config.epochs,
        outcome.best_metric,
        outcome.best_epoch,
        out.display()
    );
    Ok(())
}

fn run_evaluate(
    model: &Path,
    corpus: &Path,
    split: &Path,
    set: SetArg,
    mode: ModeArg,
    k: usize,
    report: &Path,
) -> Result<(), Error> {
    let (model, vocab) = load_checkpoint(model)?;
    let corpus = load_corpus_with_split(corpus, split)?;
    let matrix = model_score_matrix(&model, &vocab, &corpus, set.split(), mode.input_mode())?;
    let report_json = report_from_matrix(&matrix, "neural", mode, set, k)?;
    write_report(&report_json, report)
}

/// Scores one evaluation split with a trained model.
pub fn model_score_matrix(
    model: &EncoderModel,
    vocab: &Vocabulary,
    corpus: &PairCorpus,
    split: Split,
    mode: InputMode,
) -> Result<ScoreMatrix, Error> {
    let pairs = corpus.subset(split);
    if pairs.is_empty() {
        return Err(Error::Data("evaluation split is empty".into()));
    }
    let statements: Vec<Vec<u32>> = pairs
        .iter()
        .map(|p| vocab.text_to_ids(&p.statement, mode))
        .collect();
    let proofs: Vec<Vec<u32>> = pairs
        .iter()
        .map(|p| vocab.text_to_ids(&p.proof, mode))
        .collect();
    Ok(model.score_all(&statements, &proofs)?)
}
