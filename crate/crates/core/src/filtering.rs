//! Keyword filtering of raw tweets against the glossary.
//!
//! Text and keywords are both lowercased and split into runs of alphanumeric
//! characters; a keyword matches when its token run appears contiguously in
//! the tweet's token run. So "mask" does not match "unmasked", "#mask" and
//! "mask!" do, and "stay  at-home" matches "stay at home".

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Dataset, Glossary};
use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordMatch {
    pub keyword: String,
    /// Theme name, or `"health"` for the health-keyword list.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchResult {
    pub tweet_id: String,
    pub matched_keywords: Vec<KeywordMatch>,
    pub matched: bool,
}

fn boundary_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// A glossary compiled into token runs, reusable across many tweets.
#[derive(Debug, Clone)]
pub struct KeywordMatcher {
    entries: Vec<(KeywordMatch, Vec<String>)>,
}

impl KeywordMatcher {
    pub fn new(g: &Glossary) -> Self {
        let entries = g
            .entries()
            .map(|(kw, source)| {
                (
                    KeywordMatch {
                        keyword: kw.to_string(),
                        source: source.to_string(),
                    },
                    boundary_tokens(kw),
                )
            })
            .collect();
        KeywordMatcher { entries }
    }

    pub fn matches(&self, text: &str) -> Vec<KeywordMatch> {
        let tokens = boundary_tokens(text);
        self.entries
            .iter()
            .filter(|(_, run)| contains_run(&tokens, run))
            .map(|(m, _)| m.clone())
            .collect()
    }

    pub fn match_tweet(&self, tweet_id: &str, text: &str) -> MatchResult {
        let matched_keywords = self.matches(text);
        MatchResult {
            tweet_id: tweet_id.to_string(),
            matched: !matched_keywords.is_empty(),
            matched_keywords,
        }
    }
}

pub fn match_keywords(text: &str, g: &Glossary) -> MatchResult {
    KeywordMatcher::new(g).match_tweet("", text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordHits {
    pub keyword: String,
    pub theme: String,
    pub hits: usize,
}

/// Per-keyword tweet counts, one row per glossary entry in glossary order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilterReport {
    pub rows: Vec<KeywordHits>,
    pub tweets_in: usize,
    pub tweets_kept: usize,
}

impl FilterReport {
    /// Number of tweets matching `keyword` (under any source).
    pub fn hits(&self, keyword: &str) -> usize {
        self.rows
            .iter()
            .find(|r| r.keyword == keyword)
            .map_or(0, |r| r.hits)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Validation(format!("csv: {e}"));
        w.write_record(["keyword", "theme", "hits"]).map_err(err)?;
        for r in &self.rows {
            w.write_record([r.keyword.as_str(), r.theme.as_str(), &r.hits.to_string()])
                .map_err(err)?;
        }
        w.into_inner()
            .map_err(|e| Error::Validation(format!("csv: {}", e.error())))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_csv()?)
    }
}

/// Keeps the tweets that match at least one glossary keyword, in input order.
pub fn filter_corpus(d: &Dataset, g: &Glossary) -> (Dataset, FilterReport) {
    let matcher = KeywordMatcher::new(g);
    let results: Vec<Vec<KeywordMatch>> = d
        .records()
        .par_iter()
        .map(|r| matcher.matches(&r.text))
        .collect();

    let mut rows: Vec<KeywordHits> = matcher
        .entries
        .iter()
        .map(|(m, _)| KeywordHits {
            keyword: m.keyword.clone(),
            theme: m.source.clone(),
            hits: 0,
        })
        .collect();
    for found in &results {
        for m in found {
            if let Some(row) = rows
                .iter_mut()
                .find(|r| r.keyword == m.keyword && r.theme == m.source)
            {
                row.hits += 1;
            }
        }
    }

    let mut flags = results.iter().map(|m| !m.is_empty());
    let kept = d.retain_where(format!("{} | keyword-filtered", d.provenance()), |_| {
        flags.next().unwrap_or(false)
    });
    let report = FilterReport {
        rows,
        tweets_in: d.len(),
        tweets_kept: kept.len(),
    };
    (kept, report)
}
