//! The `seqrec-audit` command line.
//!
//! Every data command takes an optional JSON config (`--config`); flags
//! override its fields and the effective config is written to
//! `config.json` in the output directory.

mod commands;
mod config;

pub use commands::{cmd_convert_embeddings, cmd_diagnose, cmd_eval, cmd_split, cmd_stats, EmbeddingTarget};
pub use config::{InputFormat, ModelSpec, RunConfig, MODEL_NAMES};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::Column;
use crate::error::{Error, ErrorKind, Result};

pub const THREADS_ENV: &str = "SEQREC_AUDIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "seqrec-audit", version, about = "Shortcut audits for sequential recommendation benchmarks")]
pub struct Cli {
    /// Worker threads; falls back to the config, then $SEQREC_AUDIT_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition-graph statistics and coverage.
    Stats(DataArgs),
    /// Run models and report Recall/NDCG.
    Eval(EvalArgs),
    /// Full shortcut audit.
    Diagnose(EvalArgs),
    /// Convert embeddings between text and binary.
    ConvertEmbeddings(ConvertArgs),
    /// Write the leave-one-out split for external training.
    Split(DataArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub interactions: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    /// Field delimiter: a character or tab/comma/space/semicolon.
    #[arg(long)]
    pub delimiter: Option<String>,
    /// The interaction file starts with a header row.
    #[arg(long)]
    pub header: bool,
    /// Column name or zero-based position.
    #[arg(long)]
    pub user_col: Option<String>,
    #[arg(long)]
    pub item_col: Option<String>,
    #[arg(long)]
    pub time_col: Option<String>,
    /// Skip malformed rows instead of failing.
    #[arg(long)]
    pub lenient: bool,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub min_item_count: Option<usize>,
    /// Zero vectors for catalog items missing from the embedding file.
    #[arg(long)]
    pub zero_fill: bool,
    /// Cov@k cutoffs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub coverage_ks: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma separated: tgh1, tgh2, semnn, idlast, idsem, count-last, external:<file>.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// External prediction file (repeatable).
    #[arg(long)]
    pub external: Vec<PathBuf>,
    #[arg(long)]
    pub overlap_k: Option<usize>,
    #[arg(long)]
    pub max_hop: Option<usize>,
    #[arg(long)]
    pub bpr_epochs: Option<usize>,
    #[arg(long)]
    pub bpr_dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Target {
    Text,
    Binary,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Output format; defaults to the opposite of the input.
    #[arg(long, value_enum)]
    pub to: Option<Target>,
    /// Scale every nonzero row to unit length.
    #[arg(long)]
    pub normalize: bool,
    /// Text field separator; whitespace when omitted.
    #[arg(long)]
    pub sep: Option<char>,
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v.into();
                }
            };
        }
        set!(self.interactions => cfg.interactions);
        set!(self.embeddings => cfg.embeddings);
        set!(self.output_dir => cfg.output_dir);
        set!(self.dataset => cfg.dataset);
        set!(self.delimiter => cfg.input.delimiter);
        set!(self.coverage_ks => cfg.coverage_ks);
        set!(self.min_len => cfg.preprocess.min_len);
        set!(self.max_len => cfg.preprocess.max_len);
        set!(self.min_item_count => cfg.preprocess.min_item_count);
        if let Some(c) = &self.user_col {
            cfg.input.user_column = Column::parse(c);
        }
        if let Some(c) = &self.item_col {
            cfg.input.item_column = Column::parse(c);
        }
        if let Some(c) = &self.time_col {
            cfg.input.timestamp_column = Column::parse(c);
        }
        cfg.input.header |= self.header;
        cfg.input.lenient |= self.lenient;
        cfg.zero_fill_missing |= self.zero_fill;
    }

    fn config(&self, threads: Option<usize>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg);
        if threads.is_some() {
            cfg.threads = threads;
        }
        Ok(cfg)
    }
}

impl EvalArgs {
    fn config(&self, threads: Option<usize>) -> Result<RunConfig> {
        let mut cfg = self.data.config(threads)?;
        if let Some(m) = &self.models {
            cfg.models = m.clone();
        }
        if let Some(k) = &self.ks {
            cfg.ks = k.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.external.is_empty() {
            cfg.external = self.external.clone();
        }
        if let Some(k) = self.overlap_k {
            cfg.overlap_k = k;
        }
        if let Some(h) = self.max_hop {
            cfg.max_hop = h;
        }
        if let Some(e) = self.bpr_epochs {
            cfg.bpr.epochs = e;
        }
        if let Some(d) = self.bpr_dim {
            cfg.bpr.dim = d;
        }
        Ok(cfg)
    }
}

/// Thread count precedence: flag or config, then the environment, then rayon's default.
fn resolve_threads(configured: Option<usize>) -> Result<Option<usize>> {
    if configured.is_some() {
        return Ok(configured);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV}={v} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

fn install_pool(threads: Option<usize>) -> Result<()> {
    let Some(n) = resolve_threads(threads)? else {
        return Ok(());
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    log::debug!("using {n} threads");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::ConvertEmbeddings(a) => {
            install_pool(threads)?;
            let to = a.to.map(|t| match t {
                Target::Text => EmbeddingTarget::Text,
                Target::Binary => EmbeddingTarget::Binary,
            });
            cmd_convert_embeddings(&a.input, &a.output, to, a.normalize, a.sep)
        }
        Command::Stats(a) => {
            let cfg = a.config(threads)?.finalize()?;
            install_pool(cfg.threads)?;
            cmd_stats(&cfg)
        }
        Command::Split(a) => {
            let cfg = a.config(threads)?.finalize()?;
            install_pool(cfg.threads)?;
            cmd_split(&cfg)
        }
        Command::Eval(a) => {
            let cfg = a.config(threads)?.finalize()?;
            install_pool(cfg.threads)?;
            cmd_eval(&cfg)
        }
        Command::Diagnose(a) => {
            let cfg = a.config(threads)?.finalize()?;
            install_pool(cfg.threads)?;
            cmd_diagnose(&cfg)
        }
    }
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Internal => 3,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}
