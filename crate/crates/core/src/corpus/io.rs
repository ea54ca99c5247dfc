//! Corpus file formats: JSON lines and RFC-4180 CSV.
//!
//! Both formats carry the same fields. In CSV, `rights_obligations` is `|`-joined and empty
//! optional cells mean "absent". Text that is not valid UTF-8 is decoded lossily and the record
//! is flagged [`RecordStatus::Unreadable`] so that filtering can account for it.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::{Category, Corpus, CorpusError, Label, LicenseRecord, Platform, RecordStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    JsonLines,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::JsonLines,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json_lines" | "jsonl" => Ok(CorpusFormat::JsonLines),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        CorpusFormat::JsonLines => parse_jsonl(&bytes),
        CorpusFormat::Csv => parse_csv(&bytes),
    }
}

/// Parses JSON-lines corpus content. Blank lines are skipped; line numbers are 1-based.
pub fn parse_jsonl(bytes: &[u8]) -> Result<Corpus, CorpusError> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = i + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        if raw.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let (line, lossy) = match std::str::from_utf8(raw) {
            Ok(s) => (s.to_string(), false),
            Err(_) => (String::from_utf8_lossy(raw).into_owned(), true),
        };
        let mut record: LicenseRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if lossy {
            record.status = RecordStatus::Unreadable;
        }
        records.push(record);
        lines.push(line_no);
    }
    with_line_numbers(records, &lines)
}

fn with_line_numbers(records: Vec<LicenseRecord>, lines: &[usize]) -> Result<Corpus, CorpusError> {
    Corpus::new(records).map_err(|e| match e {
        CorpusError::DuplicateId { id, first, second } => CorpusError::DuplicateId {
            id,
            first: lines[first - 1],
            second: lines[second - 1],
        },
        other => other,
    })
}

const CSV_REQUIRED: [&str; 6] = ["id", "name", "platform", "category", "text", "label"];

pub fn parse_csv(bytes: &[u8]) -> Result<Corpus, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader
        .byte_headers()
        .map_err(|e| CorpusError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Ok(Corpus::default());
    }
    let columns: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (String::from_utf8_lossy(h).trim().to_string(), i))
        .collect();
    for name in CSV_REQUIRED {
        if !columns.contains_key(name) {
            return Err(CorpusError::Malformed {
                line: 1,
                message: format!("missing column `{name}`"),
            });
        }
    }

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in reader.byte_records() {
        let row = row.map_err(|e| CorpusError::Malformed {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let malformed = |message: String| CorpusError::Malformed { line, message };

        let mut unreadable = false;
        let mut cell = |name: &str| -> Option<String> {
            let bytes = columns.get(name).and_then(|&i| row.get(i))?;
            match std::str::from_utf8(bytes) {
                Ok(s) => Some(s.to_string()),
                Err(_) => {
                    unreadable = true;
                    Some(String::from_utf8_lossy(bytes).into_owned())
                }
            }
        };
        let required = |value: Option<String>, name: &str| {
            value.ok_or_else(|| CorpusError::Malformed {
                line,
                message: format!("missing field `{name}`"),
            })
        };
        let id = required(cell("id"), "id")?;
        let name = required(cell("name"), "name")?;
        let platform = required(cell("platform"), "platform")?;
        let category = required(cell("category"), "category")?;
        let text = required(cell("text"), "text")?;
        let label = required(cell("label"), "label")?;
        let optional = |v: Option<String>| v.filter(|s| !s.is_empty());
        let url = optional(cell("url"));
        let rationale = optional(cell("rationale"));
        let rights = optional(cell("rights_obligations"))
            .map(|s| s.split('|').map(|p| p.trim().to_string()).collect::<Vec<_>>());
        let status = cell("status").unwrap_or_default();

        let mut record = LicenseRecord {
            id,
            name,
            platform: Platform(platform),
            category: Category::from_str(&category).map_err(malformed)?,
            text,
            url,
            label: Label::from_str(&label).map_err(malformed)?,
            rationale,
            rights_obligations: rights,
            status: RecordStatus::from_str(status.trim()).map_err(malformed)?,
        };
        if unreadable {
            record.status = RecordStatus::Unreadable;
        }
        records.push(record);
        lines.push(line);
    }
    with_line_numbers(records, &lines)
}

/// Writes `corpus` as JSON lines in corpus order.
pub fn save_corpus_jsonl<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for record in corpus {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
