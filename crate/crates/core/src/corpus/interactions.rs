use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: i64,
}

/// Raw interactions in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionLog {
    pub records: Vec<Interaction>,
    /// Rows dropped under [`LogFormat::lenient`].
    pub skipped_rows: usize,
}

impl InteractionLog {
    pub fn from_records(records: Vec<Interaction>) -> Self {
        InteractionLog {
            records,
            skipped_rows: 0,
        }
    }

    /// Convenience constructor used heavily by tests.
    pub fn from_triples<U, I>(rows: impl IntoIterator<Item = (U, I, i64)>) -> Self
    where
        U: Into<String>,
        I: Into<String>,
    {
        Self::from_records(
            rows.into_iter()
                .map(|(u, i, t)| Interaction {
                    user_id: u.into(),
                    item_id: i.into(),
                    timestamp: t,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Selects a column either by header name or by zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Column {
    /// Numeric strings select by position, anything else by name.
    pub fn parse(s: &str) -> Column {
        match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        }
    }

    fn resolve(&self, header: Option<&csv::StringRecord>, path: &Path) -> Result<usize> {
        match self {
            Column::Index(i) => Ok(*i),
            Column::Name(name) => header
                .and_then(|h| h.iter().position(|c| c.trim() == name))
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.clone(),
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogFormat {
    pub delimiter: u8,
    pub has_header: bool,
    pub user: Column,
    pub item: Column,
    pub timestamp: Column,
    /// Skip malformed rows instead of aborting.
    pub lenient: bool,
}

impl Default for LogFormat {
    fn default() -> Self {
        LogFormat {
            delimiter: b'\t',
            has_header: false,
            user: Column::Index(0),
            item: Column::Index(1),
            timestamp: Column::Index(2),
            lenient: false,
        }
    }
}

pub fn load_interactions(path: impl AsRef<Path>, format: &LogFormat) -> Result<InteractionLog> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_interactions(file, path, format)
}

pub fn read_interactions<R: std::io::Read>(
    reader: R,
    path: &Path,
    format: &LogFormat,
) -> Result<InteractionLog> {
    let named = [&format.user, &format.item, &format.timestamp]
        .iter()
        .any(|c| matches!(c, Column::Name(_)));
    let has_header = format.has_header || named;

    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(has_header)
        .flexible(true)
        .quoting(false)
        .from_reader(reader);

    let header = if has_header {
        Some(rdr.headers().map_err(|e| csv_error(path, e))?.clone())
    } else {
        None
    };
    let cols = [
        format.user.resolve(header.as_ref(), path)?,
        format.item.resolve(header.as_ref(), path)?,
        format.timestamp.resolve(header.as_ref(), path)?,
    ];

    let mut log = InteractionLog::default();
    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        match parse_row(&row, cols) {
            Ok(rec) => log.records.push(rec),
            Err(message) if format.lenient => {
                log::warn!("{}:{}: skipping row: {}", path.display(), line, message);
                log.skipped_rows += 1;
            }
            Err(message) => {
                return Err(Error::BadRow {
                    path: path.to_path_buf(),
                    line,
                    message,
                })
            }
        }
    }
    Ok(log)
}

fn parse_row(row: &csv::StringRecord, [u, i, t]: [usize; 3]) -> Result<Interaction, String> {
    let field = |idx: usize, what: &str| -> Result<&str, String> {
        match row.get(idx).map(str::trim) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(format!("missing {what} column (index {idx})")),
        }
    };
    let user_id = field(u, "user")?.to_string();
    let item_id = field(i, "item")?.to_string();
    let ts = field(t, "timestamp")?;
    let timestamp = ts
        .parse::<i64>()
        .map_err(|_| format!("unparseable timestamp `{ts}`"))?;
    Ok(Interaction {
        user_id,
        item_id,
        timestamp,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(PathBuf::from(path), io),
        other => Error::BadRow {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}
