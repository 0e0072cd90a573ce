//! Tweet cleanup, tokenization, stopword removal and stemming.
//!
//! Stages run in a fixed order: clean, tokenize, drop stopwords (on the
//! unstemmed tokens), then stem.

use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::annotation::LabelClass;
use crate::corpus::TweetRecord;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::fsutil;
use crate::porter;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordSet {
    english: HashSet<String>,
    trivial: HashSet<String>,
    combined: HashSet<String>,
}

/// The corpus-specific words that carry no signal for this task.
pub const TRIVIAL_WORDS: [&str; 7] = ["covid19", "covid", "covid-19", "coronavirus", "corona", "covid_19", "health"];

fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

impl StopwordSet {
    pub fn new(english: impl IntoIterator<Item = String>, trivial: impl IntoIterator<Item = String>) -> Self {
        let english: HashSet<String> = english.into_iter().map(|w| w.to_lowercase()).collect();
        let trivial: HashSet<String> = trivial.into_iter().map(|w| w.to_lowercase()).collect();
        let combined = english.union(&trivial).cloned().collect();
        StopwordSet { english, trivial, combined }
    }

    pub fn from_lists(english: &str, trivial: &str) -> Self {
        StopwordSet::new(parse_word_list(english), parse_word_list(trivial))
    }

    /// Reads `stopwords.english` and `stopwords.trivial` (one word per line) from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let english = fsutil::read_to_string(&dir.join(fixtures::ENGLISH_STOPWORDS_FILE))?;
        let trivial = fsutil::read_to_string(&dir.join(fixtures::TRIVIAL_STOPWORDS_FILE))?;
        Ok(StopwordSet::from_lists(&english, &trivial))
    }

    /// The bundled lists, or those in `$MISINFO_DATA_DIR` when set.
    pub fn default_bundled() -> Result<Self> {
        match fixtures::data_dir_override() {
            Some(dir) => StopwordSet::load_dir(&dir),
            None => Ok(StopwordSet::from_lists(fixtures::STOPWORDS_ENGLISH, fixtures::STOPWORDS_TRIVIAL)),
        }
    }

    pub fn english(&self) -> &HashSet<String> {
        &self.english
    }

    pub fn trivial(&self) -> &HashSet<String> {
        &self.trivial
    }

    pub fn combined(&self) -> &HashSet<String> {
        &self.combined
    }

    pub fn len(&self) -> usize {
        self.combined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combined.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.combined.contains(word)
    }
}

static URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"(?:https?:|www\.)\S*",
        r"|\bt\.co/\S*",
        // links cut off by truncation, e.g. "htt…"
        r"|\bht{1,2}(?:ps?)?:?/{0,2}…",
    ))
    .expect("valid url regex")
});
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@[A-Za-z0-9_]+").expect("valid mention regex"));

/// Lowercases, strips links and @-mentions, keeps hashtag words without the
/// `#`, turns every other non-alphanumeric character into a space and
/// collapses whitespace.
pub fn clean_text(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let no_urls = URL.replace_all(&lower, " ");
    let no_mentions = MENTION.replace_all(&no_urls, " ");
    let mut out = String::with_capacity(no_mentions.len());
    let mut pending_space = false;
    for c in no_mentions.chars() {
        if c == '#' {
            continue;
        }
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

/// Splits cleaned text on whitespace, dropping single-character and
/// digits-only tokens.
pub fn tokenize(cleaned: &str) -> Vec<String> {
    cleaned
        .split_whitespace()
        .filter(|t| keep_token(t))
        .map(str::to_owned)
        .collect()
}

fn keep_token(t: &str) -> bool {
    t.chars().nth(1).is_some() && !t.chars().all(char::is_numeric)
}

pub fn remove_stopwords(tokens: Vec<String>, sw: &StopwordSet) -> Vec<String> {
    tokens.into_iter().filter(|t| !sw.contains(t)).collect()
}

pub fn stem_token(word: &str) -> String {
    porter::stem(word)
}

/// Cleaned, filtered and stemmed tokens of one tweet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    #[serde(rename = "id")]
    pub tweet_id: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<LabelClass>,
}

impl TokenSequence {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Runs the text stages in order. A stem can land back on a stopword
/// ("thes" -> "the") or on digits ("12s" -> "12"); such stems are dropped so
/// the output obeys the same token rules as the input stages.
pub fn preprocess_text(text: &str, sw: &StopwordSet) -> Vec<String> {
    remove_stopwords(tokenize(&clean_text(text)), sw)
        .iter()
        .map(|t| stem_token(t))
        .filter(|t| keep_token(t) && !sw.contains(t))
        .collect()
}

pub fn preprocess_tweet(t: &TweetRecord, sw: &StopwordSet) -> TokenSequence {
    TokenSequence {
        tweet_id: t.id.clone(),
        tokens: preprocess_text(&t.text, sw),
        label: None,
    }
}

/// Preprocessed-corpus cache: one `{id, tokens, label?}` object per line.
pub fn save_token_sequences(path: &Path, docs: &[TokenSequence]) -> Result<()> {
    fsutil::write_atomic(path, &fsutil::to_jsonl(docs)?)
}

pub fn load_token_sequences(path: &Path) -> Result<Vec<TokenSequence>> {
    let docs: Vec<TokenSequence> = fsutil::read_jsonl(path)?;
    let mut seen = HashSet::new();
    for d in &docs {
        if !seen.insert(d.tweet_id.as_str()) {
            return Err(Error::format(path, format!("duplicate id {}", d.tweet_id)));
        }
    }
    Ok(docs)
}
