//! Tweet datasets and the theme/keyword glossary.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::fixtures;
use crate::fsutil;

pub const MAX_TWEET_CHARS: usize = 280;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
}

impl TweetRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, date: Option<NaiveDate>) -> Result<Self> {
        let rec = TweetRecord {
            id: id.into(),
            text: text.into(),
            date,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::Validation("tweet id is empty".into()));
        }
        if self.text.trim().is_empty() {
            return Err(Error::Validation(format!("tweet {}: text is empty", self.id)));
        }
        let n = self.text.chars().count();
        if n > MAX_TWEET_CHARS {
            return Err(Error::Validation(format!(
                "tweet {}: text has {n} characters (max {MAX_TWEET_CHARS})",
                self.id
            )));
        }
        Ok(())
    }
}

/// An ordered collection of tweets with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    records: Vec<TweetRecord>,
    provenance: String,
}

impl Dataset {
    pub fn new(records: Vec<TweetRecord>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate tweet id {}", r.id)));
            }
        }
        Ok(Dataset {
            records,
            provenance: provenance.into(),
        })
    }

    pub fn empty(provenance: impl Into<String>) -> Self {
        Dataset {
            records: Vec::new(),
            provenance: provenance.into(),
        }
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TweetRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn into_records(self) -> Vec<TweetRecord> {
        self.records
    }

    /// Keeps the records for which `keep` holds. Order and uniqueness carry over.
    pub(crate) fn retain_where(&self, provenance: String, mut keep: impl FnMut(&TweetRecord) -> bool) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            provenance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TweetFormat {
    Jsonl,
    Csv,
}

impl TweetFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> TweetFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TweetFormat::Csv,
            _ => TweetFormat::Jsonl,
        }
    }
}

impl FromStr for TweetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(TweetFormat::Jsonl),
            "csv" => Ok(TweetFormat::Csv),
            other => Err(Error::Validation(format!("unknown tweet format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiagnostic {
    pub line: usize,
    pub reason: String,
}

/// What happened to each input row during [`load_tweets`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows: usize,
    pub accepted: usize,
    /// Rows that did not parse in the declared format.
    pub malformed: Vec<RowDiagnostic>,
    /// Rows that parsed but violate a record invariant (length, emptiness, duplicate id).
    pub rejected: Vec<RowDiagnostic>,
}

impl LoadReport {
    pub fn dropped(&self) -> usize {
        self.malformed.len() + self.rejected.len()
    }
}

#[derive(Debug, Deserialize)]
struct RawRow {
    id: String,
    text: String,
    #[serde(default)]
    date: Option<String>,
}

fn parse_date(raw: Option<String>) -> std::result::Result<Option<NaiveDate>, String> {
    match raw {
        None => Ok(None),
        Some(s) if s.trim().is_empty() => Ok(None),
        Some(s) => NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(Some)
            .map_err(|e| format!("bad date {s:?}: {e}")),
    }
}

/// Loads tweets, skipping rows that are malformed or violate record
/// invariants. Fails outright when more than half the rows are malformed.
pub fn load_tweets(path: &Path, format: TweetFormat) -> Result<(Dataset, LoadReport)> {
    let text = fsutil::read_to_string(path)?;
    let mut report = LoadReport::default();
    let mut parsed: Vec<(usize, std::result::Result<RawRow, String>)> = Vec::new();

    match format {
        TweetFormat::Jsonl => {
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                parsed.push((i + 1, serde_json::from_str::<RawRow>(line).map_err(|e| e.to_string())));
            }
        }
        TweetFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(text.as_bytes());
            let headers = rdr
                .headers()
                .map_err(|e| Error::format(path, format!("unreadable csv header: {e}")))?
                .clone();
            if !headers.iter().any(|h| h == "id") || !headers.iter().any(|h| h == "text") {
                return Err(Error::format(path, "csv header must contain id,text[,date]"));
            }
            for row in rdr.records() {
                match row {
                    Ok(rec) => {
                        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
                        parsed.push((line, rec.deserialize::<RawRow>(Some(&headers)).map_err(|e| e.to_string())));
                    }
                    Err(e) => {
                        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                        parsed.push((line, Err(e.to_string())));
                    }
                }
            }
        }
    }

    report.rows = parsed.len();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, row) in parsed {
        let row = match row {
            Ok(r) => r,
            Err(reason) => {
                log::warn!("{}:{line}: skipping malformed row: {reason}", path.display());
                report.malformed.push(RowDiagnostic { line, reason });
                continue;
            }
        };
        let date = match parse_date(row.date) {
            Ok(d) => d,
            Err(reason) => {
                log::warn!("{}:{line}: skipping malformed row: {reason}", path.display());
                report.malformed.push(RowDiagnostic { line, reason });
                continue;
            }
        };
        let rec = TweetRecord {
            id: row.id,
            text: row.text,
            date,
        };
        if let Err(e) = rec.validate() {
            report.rejected.push(RowDiagnostic {
                line,
                reason: e.to_string(),
            });
            continue;
        }
        if !seen.insert(rec.id.clone()) {
            report.rejected.push(RowDiagnostic {
                line,
                reason: format!("duplicate tweet id {}", rec.id),
            });
            continue;
        }
        records.push(rec);
    }

    if report.rows > 0 && report.malformed.len() * 2 > report.rows {
        return Err(Error::format(
            path,
            format!(
                "{} of {} rows are malformed; is this really {:?}?",
                report.malformed.len(),
                report.rows,
                format
            ),
        ));
    }
    report.accepted = records.len();
    let dataset = Dataset {
        records,
        provenance: path.display().to_string(),
    };
    Ok((dataset, report))
}

pub fn save_dataset(d: &Dataset, path: &Path, format: TweetFormat) -> Result<()> {
    let bytes = match format {
        TweetFormat::Jsonl => fsutil::to_jsonl(d.records())?,
        TweetFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::io(path, e.into());
            w.write_record(["id", "text", "date"]).map_err(csv_err)?;
            for r in d.records() {
                let date = r.date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default();
                w.write_record([r.id.as_str(), r.text.as_str(), date.as_str()])
                    .map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| Error::io(path, e.into_error()))?
        }
    };
    fsutil::write_atomic(path, &bytes)
}

fn dedup_key(text: &str) -> String {
    text.nfc().collect::<String>().trim().to_string()
}

/// Keeps the first record for each distinct text (NFC-normalized, trimmed).
pub fn dedup(d: &Dataset) -> Dataset {
    let mut seen = HashSet::new();
    d.retain_where(d.provenance.clone(), |r| seen.insert(dedup_key(&r.text)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub name: String,
    pub keywords: Vec<String>,
}

/// Source label used for keywords from the health-keyword list.
pub const HEALTH_SOURCE: &str = "health";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Glossary {
    themes: Vec<Theme>,
    health_keywords: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGlossary {
    themes: Vec<Theme>,
    health_keywords: Vec<String>,
}

fn normalize_keyword(kw: &str, context: &str) -> Result<String> {
    let kw = kw.trim().to_lowercase();
    if kw.is_empty() {
        return Err(Error::Schema(format!("empty keyword in {context}")));
    }
    if !kw.chars().any(char::is_alphanumeric) {
        return Err(Error::Schema(format!("keyword {kw:?} in {context} has no letters or digits")));
    }
    Ok(kw)
}

fn normalize_list(list: &[String], context: &str) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(list.len());
    for kw in list {
        let kw = normalize_keyword(kw, context)?;
        if !seen.insert(kw.clone()) {
            return Err(Error::Schema(format!("duplicate keyword {kw:?} in {context}")));
        }
        out.push(kw);
    }
    Ok(out)
}

impl Glossary {
    pub fn new(themes: Vec<Theme>, health_keywords: Vec<String>) -> Result<Self> {
        let mut out_themes = Vec::with_capacity(themes.len());
        for t in themes {
            if t.name.trim().is_empty() {
                return Err(Error::Schema("theme with empty name".into()));
            }
            let keywords = normalize_list(&t.keywords, &format!("theme {:?}", t.name))?;
            out_themes.push(Theme { name: t.name, keywords });
        }
        let health_keywords = normalize_list(&health_keywords, "health_keywords")?;
        Ok(Glossary {
            themes: out_themes,
            health_keywords,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawGlossary =
            serde_json::from_str(s).map_err(|e| Error::Schema(format!("glossary: {e}")))?;
        Glossary::new(raw.themes, raw.health_keywords)
    }

    /// The glossary bundled with the workbench, or the copy in
    /// `$MISINFO_DATA_DIR` when that is set.
    pub fn default_bundled() -> Result<Self> {
        match fixtures::data_dir_override() {
            Some(dir) => load_glossary(&dir.join(fixtures::GLOSSARY_FILE)),
            None => Glossary::from_json_str(fixtures::GLOSSARY_DEFAULT),
        }
    }

    pub fn themes(&self) -> &[Theme] {
        &self.themes
    }

    pub fn health_keywords(&self) -> &[String] {
        &self.health_keywords
    }

    pub fn theme(&self, name: &str) -> Option<&Theme> {
        self.themes.iter().find(|t| t.name == name)
    }

    /// Every (keyword, source) pair, themes first in file order, then the
    /// health keywords with source [`HEALTH_SOURCE`].
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.themes
            .iter()
            .flat_map(|t| t.keywords.iter().map(move |k| (k.as_str(), t.name.as_str())))
            .chain(self.health_keywords.iter().map(|k| (k.as_str(), HEALTH_SOURCE)))
    }

    /// Returns a copy with one more health keyword.
    pub fn with_health_keyword(&self, kw: &str) -> Result<Self> {
        let mut kws = self.health_keywords.clone();
        kws.push(kw.to_string());
        Glossary::new(self.themes.clone(), kws)
    }
}

pub fn load_glossary(path: &Path) -> Result<Glossary> {
    let text = fsutil::read_to_string(path)?;
    Glossary::from_json_str(&text).map_err(|e| match e {
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}
