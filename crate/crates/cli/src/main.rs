//! `nlu`: generate corpora, train, cross-validate, predict and serve.

mod response;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cabin_nlu::corpus::{generate_corpus, read_corpus_file, toy_vectors, write_corpus, GeneratorConfig, Label};
use cabin_nlu::embeddings::{load_vectors, PretrainedVectors, DEFAULT_DIM};
use cabin_nlu::eval::{render_report, run_cv, ReportStyle};
use cabin_nlu::models::{ModelSpec, System, TrainConfig};
use cabin_nlu::persist::{load_bundle, save_bundle};
use cabin_nlu::recurrent::CellKind;
use cabin_nlu::NluError;

use response::{handle_line, respond};

const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_MODEL: u8 = 66;
const EXIT_OTHER: u8 = 1;

#[derive(Parser)]
#[command(name = "nlu", version, about = "Slot, keyword and intent recognition for in-vehicle passenger commands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic annotated corpus.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3347)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also write GloVe-format toy vectors for the generator vocabulary.
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        vector_dim: usize,
    },
    /// Train a model on a whole corpus and write a bundle directory.
    Train {
        #[arg(long)]
        model: ModelSpec,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// k-fold cross-validation; writes a JSON report and a text table.
    Eval {
        #[arg(long)]
        model: ModelSpec,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// JSON report path; the table goes next to it with a `.txt` extension.
        #[arg(long)]
        report: PathBuf,
        /// Table layout; defaults to the natural one for the model's task.
        #[arg(long)]
        style: Option<ReportStyle>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Predict one utterance.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Answer newline-delimited JSON requests from stdin.
    Serve {
        #[arg(long)]
        bundle: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// GloVe-format text vectors.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    embedding_dim: usize,
    /// Keep embedding rows fixed during training.
    #[arg(long)]
    freeze_embeddings: bool,
    #[arg(long, default_value = "lstm")]
    cell: CellKind,
    #[arg(long, default_value_t = 128)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 64)]
    attention_dim: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    /// Share of the training data held out for early stopping.
    #[arg(long, default_value_t = 0.1)]
    holdout_fraction: f64,
}

impl RunArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            cell: self.cell,
            hidden_dim: self.hidden_dim,
            attention_dim: self.attention_dim,
            embedding_dim: self.embedding_dim,
            trainable_embeddings: !self.freeze_embeddings,
            dropout: self.dropout,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            patience: self.patience,
            holdout_fraction: self.holdout_fraction,
            ..TrainConfig::default()
        }
    }

    fn vectors(&self) -> Result<Option<PretrainedVectors>, CliError> {
        let Some(path) = &self.embeddings else {
            return Ok(None);
        };
        let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let v = load_vectors(BufReader::new(file), self.embedding_dim, self.seed).map_err(|e| CliError::at(path, e))?;
        Ok(Some(v))
    }
}

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }

    /// Wraps a library error, prefixing the file it concerns.
    fn at(path: &Path, e: NluError) -> Self {
        let mut err = Self::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    }
}

impl From<NluError> for CliError {
    fn from(e: NluError) -> Self {
        let code = match &e {
            NluError::Io(_) => EXIT_IO,
            NluError::Config(_) => EXIT_USAGE,
            NluError::Format { .. } | NluError::DataAt { .. } | NluError::Data(_) => EXIT_DATA,
            NluError::ModelFile(_) => EXIT_MODEL,
            _ => EXIT_OTHER,
        };
        Self::new(code, e.to_string())
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn generate(out: &Path, n: usize, seed: u64, vectors: Option<&Path>, vector_dim: usize) -> Result<(), CliError> {
    let cfg = GeneratorConfig::new(n, seed);
    let corpus = generate_corpus(&cfg)?;
    write_file(out, write_corpus(&corpus).as_bytes())?;
    if let Some(path) = vectors {
        write_file(path, toy_vectors(&cfg.vocabulary(), &cfg.word_groups(), vector_dim, seed).as_bytes())?;
    }
    let mut histogram: BTreeMap<usize, (&str, usize)> = BTreeMap::new();
    for u in &corpus {
        histogram.entry(u.intent.index()).or_insert((u.intent.name(), 0)).1 += 1;
    }
    println!("wrote {} utterances to {}", corpus.len(), out.display());
    for (name, count) in histogram.values() {
        println!("  {name:<16} {count}");
    }
    Ok(())
}

fn load_data(path: &Path) -> Result<Vec<cabin_nlu::corpus::Utterance>, CliError> {
    read_corpus_file(path).map_err(|e| match e {
        NluError::Io(io) => CliError::io(path, io),
        other => CliError::at(path, other),
    })
}

fn train(model: ModelSpec, data: &Path, out: &Path, run: &RunArgs) -> Result<(), CliError> {
    let corpus = load_data(data)?;
    let vectors = run.vectors()?;
    let cfg = run.config();
    cfg.validate()?;
    let system = System::train(model, &corpus, &cfg, vectors.as_ref())?;
    let index = save_bundle(&system, out).map_err(|e| CliError::at(out, e))?;
    println!("trained {model} on {} utterances; bundle {}", corpus.len(), out.display());
    for (role, file) in &index.components {
        println!("  {role}: {file}");
    }
    if let Some(t) = &index.freq_table {
        println!("  freq_table: {t}");
    }
    Ok(())
}

fn eval(model: ModelSpec, data: &Path, k: usize, report: &Path, style: Option<ReportStyle>, run: &RunArgs) -> Result<(), CliError> {
    if k < 2 {
        return Err(CliError::new(EXIT_USAGE, format!("--k must be at least 2, got {k}")));
    }
    let corpus = load_data(data)?;
    let vectors = run.vectors()?;
    let cv = run_cv(model, &run.config(), &corpus, k, run.seed, vectors.as_ref())?;
    let style = style.unwrap_or_else(|| ReportStyle::default_for(cv.task));
    let table = render_report(&cv, style)?;
    write_file(report, cv.to_json()?.as_bytes())?;
    write_file(&report.with_extension("txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

fn open_bundle(path: &Path) -> Result<System, CliError> {
    load_bundle(path).map_err(|e| match e {
        NluError::Io(io) => CliError::io(&path.join(cabin_nlu::persist::BUNDLE_INDEX), io),
        other => CliError::at(path, other),
    })
}

fn predict(bundle: &Path, text: &str) -> Result<(), CliError> {
    let system = open_bundle(bundle)?;
    let body = respond(&system, None, text).map_err(CliError::from)?;
    println!("{}", serde_json::to_string(&body).map_err(|e| CliError::new(EXIT_OTHER, e.to_string()))?);
    Ok(())
}

fn serve(bundle: &Path) -> Result<(), CliError> {
    let system = open_bundle(bundle)?;
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| CliError::new(EXIT_IO, format!("stdin: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let out = handle_line(&system, &line);
        writeln!(stdout, "{out}")
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::new(EXIT_IO, format!("stdout: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate {
            out,
            n,
            seed,
            vectors,
            vector_dim,
        } => generate(&out, n, seed, vectors.as_deref(), vector_dim),
        Command::Train { model, data, out, run } => train(model, &data, &out, &run),
        Command::Eval {
            model,
            data,
            k,
            report,
            style,
            run,
        } => eval(model, &data, k, &report, style, &run),
        Command::Predict { bundle, text } => predict(&bundle, &text),
        Command::Serve { bundle } => serve(&bundle),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nlu: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
