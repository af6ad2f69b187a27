use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BprHyper, FusionSpec};
use crate::corpus::{Column, LogFormat, Preprocess};
use crate::diagnostics::AuditConfig;
use crate::error::{Error, Result};
use crate::graph::MAX_HOPS;

pub const MODEL_NAMES: [&str; 6] = ["tgh1", "tgh2", "semnn", "idlast", "idsem", "count-last"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Tgh(String),
    SemNn,
    IdLast,
    IdSem,
    CountLast,
    External(PathBuf),
}

impl ModelSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(file) = s.strip_prefix("external:") {
            if file.is_empty() {
                return Err(Error::Config("`external:` needs a file path".into()));
            }
            return Ok(ModelSpec::External(file.into()));
        }
        Ok(match s {
            "tgh1" | "tgh2" => ModelSpec::Tgh(s.into()),
            "semnn" => ModelSpec::SemNn,
            "idlast" => ModelSpec::IdLast,
            "idsem" => ModelSpec::IdSem,
            "count-last" => ModelSpec::CountLast,
            _ => {
                return Err(Error::Config(format!(
                    "unknown model `{s}`; expected one of {} or external:<file>",
                    MODEL_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn needs_embeddings(&self) -> bool {
        matches!(self, ModelSpec::Tgh(_) | ModelSpec::SemNn | ModelSpec::IdSem)
    }

    pub fn needs_id_last(&self) -> bool {
        matches!(self, ModelSpec::IdLast | ModelSpec::IdSem)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputFormat {
    /// Single character, or one of `tab`, `comma`, `space`, `semicolon`.
    pub delimiter: String,
    pub header: bool,
    pub user_column: Column,
    pub item_column: Column,
    pub timestamp_column: Column,
    pub lenient: bool,
}

impl Default for InputFormat {
    fn default() -> Self {
        InputFormat {
            delimiter: "tab".into(),
            header: false,
            user_column: Column::Index(0),
            item_column: Column::Index(1),
            timestamp_column: Column::Index(2),
            lenient: false,
        }
    }
}

impl InputFormat {
    pub fn delimiter_byte(&self) -> Result<u8> {
        let d = match self.delimiter.as_str() {
            "tab" | "\\t" => "\t",
            "comma" => ",",
            "space" => " ",
            "semicolon" => ";",
            other => other,
        };
        match d.as_bytes() {
            [b] if b.is_ascii() => Ok(*b),
            _ => Err(Error::Config(format!("delimiter must be one ASCII character, got `{}`", self.delimiter))),
        }
    }

    pub fn to_log_format(&self) -> Result<LogFormat> {
        let named = [&self.user_column, &self.item_column, &self.timestamp_column]
            .iter()
            .any(|c| matches!(c, Column::Name(_)));
        Ok(LogFormat {
            delimiter: self.delimiter_byte()?,
            has_header: self.header || named,
            user: self.user_column.clone(),
            item: self.item_column.clone(),
            timestamp: self.timestamp_column.clone(),
            lenient: self.lenient,
        })
    }
}

/// Everything a run depends on. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub interactions: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub dataset: Option<String>,
    pub input: InputFormat,
    pub preprocess: Preprocess,
    /// Substitute zero vectors for items missing from the embedding file.
    pub zero_fill_missing: bool,
    pub models: Vec<String>,
    pub ks: Vec<usize>,
    /// The single source of randomness; copied into `bpr.seed`.
    pub seed: u64,
    pub threads: Option<usize>,
    pub bpr: BprHyper,
    pub fusion: FusionSpec,
    pub coverage_ks: Vec<usize>,
    pub overlap_k: usize,
    pub max_hop: usize,
    /// Prediction files compared against the probes by `diagnose`.
    pub external: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            interactions: None,
            embeddings: None,
            output_dir: None,
            dataset: None,
            input: InputFormat::default(),
            preprocess: Preprocess::default(),
            zero_fill_missing: false,
            models: vec!["tgh1".into(), "tgh2".into(), "semnn".into()],
            ks: vec![1, 5, 10],
            seed: BprHyper::default().seed,
            threads: None,
            bpr: BprHyper::default(),
            fusion: FusionSpec::default(),
            coverage_ks: vec![1, 2, 3],
            overlap_k: 10,
            max_hop: 3,
            external: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn interactions(&self) -> Result<&Path> {
        self.interactions
            .as_deref()
            .ok_or_else(|| Error::Config("no interactions file given (--interactions)".into()))
    }

    pub fn embeddings(&self) -> Result<&Path> {
        self.embeddings
            .as_deref()
            .ok_or_else(|| Error::Config("no embedding file given (--embeddings)".into()))
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory given (--out)".into()))
    }

    /// Dataset label: explicit name, else the interaction file stem.
    pub fn dataset_name(&self) -> String {
        self.dataset.clone().unwrap_or_else(|| {
            self.interactions
                .as_deref()
                .and_then(Path::file_stem)
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
        })
    }

    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        let specs = self.models.iter().map(|m| ModelSpec::parse(m)).collect::<Result<Vec<_>>>()?;
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].contains(m) {
                return Err(Error::Config(format!("model `{m}` listed twice")));
            }
        }
        Ok(specs)
    }

    pub fn audit_config(&self) -> AuditConfig {
        AuditConfig {
            ks: self.ks.clone(),
            coverage_ks: self.coverage_ks.clone(),
            overlap_k: self.overlap_k,
            max_hop: self.max_hop,
            train_id_last: true,
            bpr: self.bpr.clone(),
            fusion: self.fusion,
        }
    }

    /// Checks everything that can be checked before touching data and
    /// propagates the run seed.
    pub fn finalize(mut self) -> Result<Self> {
        self.input.delimiter_byte()?;
        if self.preprocess.min_len < 3 {
            return Err(Error::Config("preprocess.min_len must be at least 3".into()));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::Config("ks must be a nonempty list of positive cutoffs".into()));
        }
        self.ks.sort_unstable();
        self.ks.dedup();
        if self.coverage_ks.contains(&0) {
            return Err(Error::Config("coverage_ks must be positive".into()));
        }
        if self.overlap_k == 0 {
            return Err(Error::Config("overlap_k must be positive".into()));
        }
        if self.max_hop == 0 || self.max_hop > MAX_HOPS {
            return Err(Error::Config(format!("max_hop must be in 1..={MAX_HOPS}")));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if self.bpr.seed != self.seed && self.bpr.seed != BprHyper::default().seed {
            log::warn!("bpr.seed {} replaced by run seed {}", self.bpr.seed, self.seed);
        }
        self.bpr.seed = self.seed;
        self.model_specs()?;
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
