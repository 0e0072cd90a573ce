//! Multi-annotator labeling: a journaled label store, plurality voting,
//! adjudication of ties, and the finalized labeled dataset.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, TweetRecord};
use crate::error::{Error, Result};
use crate::fsutil;

/// The five annotation classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelClass {
    /// True information.
    T,
    /// Misinformation.
    M,
    /// Incomplete (truncated, unverifiable).
    I,
    /// Not health-related.
    N,
    /// Annotator unsure.
    U,
}

impl LabelClass {
    pub const ALL: [LabelClass; 5] = [LabelClass::T, LabelClass::M, LabelClass::I, LabelClass::N, LabelClass::U];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelClass::T => "T",
            LabelClass::M => "M",
            LabelClass::I => "I",
            LabelClass::N => "N",
            LabelClass::U => "U",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, LabelClass::M | LabelClass::T)
    }
}

impl fmt::Display for LabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T" => Ok(LabelClass::T),
            "M" => Ok(LabelClass::M),
            "I" => Ok(LabelClass::I),
            "N" => Ok(LabelClass::N),
            "U" => Ok(LabelClass::U),
            _ => Err(Error::Validation(format!("invalid label {s:?}; expected one of T, M, I, N, U"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub tweet_id: String,
    pub annotator_id: String,
    pub label: LabelClass,
    #[serde(with = "rfc3339")]
    pub timestamp: DateTime<Utc>,
}

mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Micros, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteStatus {
    Decided,
    Tie,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub decided: Option<LabelClass>,
    pub tally: BTreeMap<LabelClass, usize>,
    pub status: VoteStatus,
}

impl Vote {
    /// Ties and "unsure" pluralities both go to adjudication.
    pub fn needs_adjudication(&self) -> bool {
        self.status == VoteStatus::Tie || self.decided == Some(LabelClass::U)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub tweet_id: String,
    #[serde(flatten)]
    pub vote: Vote,
}

/// Plurality vote: the label with the strictly greatest count wins; any tie
/// at the top is reported as such.
pub fn majority_vote(labels: &[LabelClass]) -> Vote {
    let mut tally = BTreeMap::new();
    for &l in labels {
        *tally.entry(l).or_insert(0usize) += 1;
    }
    let Some(&top) = tally.values().max() else {
        return Vote {
            decided: None,
            tally,
            status: VoteStatus::Unlabeled,
        };
    };
    let mut leaders = tally.iter().filter(|(_, &c)| c == top).map(|(&l, _)| l);
    let first = leaders.next();
    let (decided, status) = match leaders.next() {
        None => (first, VoteStatus::Decided),
        Some(_) => (None, VoteStatus::Tie),
    };
    Vote { decided, tally, status }
}

const JOURNAL_HEADER: &str = "tweet_id,annotator_id,label,timestamp\n";
const ADJUDICATION_HEADER: &str = "tweet_id,label,timestamp\n";

#[derive(Debug, Clone, Copy)]
struct Effective {
    label: LabelClass,
    timestamp: DateTime<Utc>,
}

/// Label store for one annotation session.
///
/// Every write is appended to a CSV journal and flushed before the call
/// returns; opening a store replays the journal. The effective label for a
/// (tweet, annotator) pair is the one with the latest timestamp, with later
/// journal lines winning timestamp ties.
#[derive(Debug)]
pub struct AnnotationStore {
    dataset: Dataset,
    index: HashMap<String, usize>,
    labels: BTreeMap<(String, String), Effective>,
    adjudications: BTreeMap<String, LabelClass>,
    journal: Option<PathBuf>,
}

fn adjudication_path(journal: &Path) -> PathBuf {
    let mut name = journal.file_name().unwrap_or_default().to_os_string();
    name.push(".adjudications");
    journal.with_file_name(name)
}

fn append_line(path: &Path, header: &str, fields: &[&str]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f: File = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    if fresh {
        buf.extend_from_slice(header.as_bytes());
    }
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        w.write_record(fields).map_err(|e| Error::io(path, e.into()))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

fn read_csv_rows(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::format(path, e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        out.push((line, row));
    }
    Ok(out)
}

fn parse_ts(path: &Path, line: usize, s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::format(path, format!("line {line}: bad timestamp {s:?}: {e}")))
}

impl AnnotationStore {
    /// An unjournaled store, for tests and in-process use.
    pub fn in_memory(dataset: Dataset) -> Self {
        let index = dataset
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        AnnotationStore {
            dataset,
            index,
            labels: BTreeMap::new(),
            adjudications: BTreeMap::new(),
            journal: None,
        }
    }

    /// Opens (or creates) a journaled store and replays existing entries.
    /// Adjudications live in a sibling file `<journal>.adjudications`.
    pub fn open(dataset: Dataset, journal: &Path) -> Result<Self> {
        let mut store = AnnotationStore::in_memory(dataset);
        for (line, row) in read_csv_rows(journal)? {
            if row.len() != 4 {
                return Err(Error::format(journal, format!("line {line}: expected 4 fields")));
            }
            let label: LabelClass = row[2]
                .parse()
                .map_err(|e: Error| Error::format(journal, format!("line {line}: {e}")))?;
            let ts = parse_ts(journal, line, &row[3])?;
            if !store.index.contains_key(&row[0]) {
                log::warn!("{}:{line}: tweet {} not in dataset; ignored", journal.display(), &row[0]);
                continue;
            }
            store.apply(row[0].to_string(), row[1].to_string(), label, ts);
        }
        let adj_path = adjudication_path(journal);
        for (line, row) in read_csv_rows(&adj_path)? {
            if row.len() != 3 {
                return Err(Error::format(&adj_path, format!("line {line}: expected 3 fields")));
            }
            let label: LabelClass = row[1]
                .parse()
                .map_err(|e: Error| Error::format(&adj_path, format!("line {line}: {e}")))?;
            parse_ts(&adj_path, line, &row[2])?;
            store.adjudications.insert(row[0].to_string(), label);
        }
        store.journal = Some(journal.to_path_buf());
        Ok(store)
    }

    fn apply(&mut self, tweet_id: String, annotator_id: String, label: LabelClass, timestamp: DateTime<Utc>) {
        let entry = self.labels.entry((tweet_id, annotator_id));
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                if timestamp >= o.get().timestamp {
                    o.insert(Effective { label, timestamp });
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(Effective { label, timestamp });
            }
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal.as_deref()
    }

    fn require_tweet(&self, tweet_id: &str) -> Result<()> {
        if self.index.contains_key(tweet_id) {
            Ok(())
        } else {
            Err(Error::NotFound(format!("tweet {tweet_id}")))
        }
    }

    pub fn record_label(&mut self, tweet_id: &str, annotator_id: &str, label: LabelClass) -> Result<AnnotationRecord> {
        self.record_label_at(tweet_id, annotator_id, label, Utc::now())
    }

    /// Records a label with an explicit timestamp. The journal is written
    /// (and synced) before the in-memory state changes.
    pub fn record_label_at(
        &mut self,
        tweet_id: &str,
        annotator_id: &str,
        label: LabelClass,
        timestamp: DateTime<Utc>,
    ) -> Result<AnnotationRecord> {
        self.require_tweet(tweet_id)?;
        if annotator_id.trim().is_empty() {
            return Err(Error::Validation("annotator id is empty".into()));
        }
        if let Some(path) = &self.journal {
            let ts = timestamp.to_rfc3339_opts(SecondsFormat::Micros, true);
            append_line(path, JOURNAL_HEADER, &[tweet_id, annotator_id, label.as_str(), &ts])?;
        }
        self.apply(tweet_id.to_string(), annotator_id.to_string(), label, timestamp);
        Ok(AnnotationRecord {
            tweet_id: tweet_id.to_string(),
            annotator_id: annotator_id.to_string(),
            label,
            timestamp,
        })
    }

    /// Effective records, ordered by (tweet id, annotator id).
    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.labels
            .iter()
            .map(|((t, a), e)| AnnotationRecord {
                tweet_id: t.clone(),
                annotator_id: a.clone(),
                label: e.label,
                timestamp: e.timestamp,
            })
            .collect()
    }

    pub fn annotators(&self) -> BTreeSet<String> {
        self.labels.keys().map(|(_, a)| a.clone()).collect()
    }

    /// Effective labels for one tweet, keyed by annotator.
    pub fn labels_for(&self, tweet_id: &str) -> BTreeMap<String, LabelClass> {
        self.labels
            .range((tweet_id.to_string(), String::new())..)
            .take_while(|((t, _), _)| t == tweet_id)
            .map(|((_, a), e)| (a.clone(), e.label))
            .collect()
    }

    pub fn label_of(&self, tweet_id: &str, annotator_id: &str) -> Option<LabelClass> {
        self.labels
            .get(&(tweet_id.to_string(), annotator_id.to_string()))
            .map(|e| e.label)
    }

    pub fn vote(&self, tweet_id: &str) -> Result<VoteOutcome> {
        self.require_tweet(tweet_id)?;
        let labels: Vec<LabelClass> = self.labels_for(tweet_id).into_values().collect();
        Ok(VoteOutcome {
            tweet_id: tweet_id.to_string(),
            vote: majority_vote(&labels),
        })
    }

    /// Vote outcomes for every tweet, in dataset order.
    pub fn outcomes(&self) -> Vec<VoteOutcome> {
        self.dataset
            .records()
            .iter()
            .map(|r| {
                let labels: Vec<LabelClass> = self.labels_for(&r.id).into_values().collect();
                VoteOutcome {
                    tweet_id: r.id.clone(),
                    vote: majority_vote(&labels),
                }
            })
            .collect()
    }

    /// Outcomes that cannot be finalized without adjudication.
    pub fn ties(&self) -> Vec<VoteOutcome> {
        self.outcomes()
            .into_iter()
            .filter(|o| o.vote.needs_adjudication())
            .collect()
    }

    /// First tweet, in dataset order, the annotator has not labeled yet.
    pub fn next_for(&self, annotator_id: &str) -> Option<&TweetRecord> {
        self.dataset
            .records()
            .iter()
            .find(|r| !self.labels.contains_key(&(r.id.clone(), annotator_id.to_string())))
    }

    pub fn adjudicate(&mut self, tweet_id: &str, label: LabelClass) -> Result<()> {
        self.require_tweet(tweet_id)?;
        if label == LabelClass::U {
            return Err(Error::Validation("adjudication cannot settle on U".into()));
        }
        if let Some(journal) = &self.journal {
            let ts = Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true);
            append_line(&adjudication_path(journal), ADJUDICATION_HEADER, &[tweet_id, label.as_str(), &ts])?;
        }
        self.adjudications.insert(tweet_id.to_string(), label);
        Ok(())
    }

    pub fn adjudications(&self) -> &BTreeMap<String, LabelClass> {
        &self.adjudications
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTweet {
    #[serde(flatten)]
    pub tweet: TweetRecord,
    pub label: LabelClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledDataset {
    entries: Vec<LabeledTweet>,
    class_counts: BTreeMap<LabelClass, usize>,
    /// Tweets left out because nobody labeled them.
    excluded: Vec<String>,
}

fn count_classes(entries: &[LabeledTweet]) -> BTreeMap<LabelClass, usize> {
    let mut counts: BTreeMap<LabelClass, usize> = LabelClass::ALL.iter().map(|&l| (l, 0)).collect();
    for e in entries {
        *counts.entry(e.label).or_default() += 1;
    }
    counts
}

impl LabeledDataset {
    pub fn new(entries: Vec<LabeledTweet>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            e.tweet.validate()?;
            if !seen.insert(e.tweet.id.as_str()) {
                return Err(Error::Validation(format!("duplicate tweet id {}", e.tweet.id)));
            }
        }
        Ok(LabeledDataset {
            class_counts: count_classes(&entries),
            entries,
            excluded: Vec::new(),
        })
    }

    pub fn entries(&self) -> &[LabeledTweet] {
        &self.entries
    }

    pub fn class_counts(&self) -> &BTreeMap<LabelClass, usize> {
        &self.class_counts
    }

    pub fn count(&self, label: LabelClass) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One JSON object per line: `{id, text, date?, label}`.
    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &fsutil::to_jsonl(&self.entries)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let entries: Vec<LabeledTweet> = fsutil::read_jsonl(path)?;
        LabeledDataset::new(entries).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Resolves every tweet's final label: its plurality label, or the
/// adjudicated label when the vote needs adjudication. Unlabeled tweets are
/// excluded and listed.
pub fn finalize(store: &AnnotationStore, adjudications: &BTreeMap<String, LabelClass>) -> Result<LabeledDataset> {
    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    let mut unresolved = Vec::new();
    for (rec, outcome) in store.dataset().records().iter().zip(store.outcomes()) {
        let vote = outcome.vote;
        let label = if vote.status == VoteStatus::Unlabeled {
            excluded.push(rec.id.clone());
            continue;
        } else if vote.needs_adjudication() {
            match adjudications.get(&rec.id) {
                Some(LabelClass::U) => {
                    return Err(Error::Validation(format!("tweet {}: adjudication cannot settle on U", rec.id)))
                }
                Some(&l) => l,
                None => {
                    unresolved.push(rec.id.clone());
                    continue;
                }
            }
        } else {
            vote.decided.expect("decided vote carries a label")
        };
        entries.push(LabeledTweet {
            tweet: rec.clone(),
            label,
        });
    }
    if !unresolved.is_empty() {
        return Err(Error::UnresolvedTies(unresolved));
    }
    Ok(LabeledDataset {
        class_counts: count_classes(&entries),
        entries,
        excluded,
    })
}

/// Splits out the misinformation and true-information tweets, in order.
pub fn extract_binary(ld: &LabeledDataset) -> (Dataset, Dataset) {
    let pick = |label: LabelClass, tag: &str| {
        let records = ld
            .entries
            .iter()
            .filter(|e| e.label == label)
            .map(|e| e.tweet.clone())
            .collect();
        Dataset::new(records, tag).expect("labeled dataset ids are unique")
    };
    (pick(LabelClass::M, "label=M"), pick(LabelClass::T, "label=T"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetAgreement {
    pub tweet_id: String,
    pub annotators: usize,
    pub unanimous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub annotator_a: String,
    pub annotator_b: String,
    /// Tweets both annotators labeled.
    pub shared: usize,
    /// Fraction of shared tweets with identical labels; absent when nothing is shared.
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub tweets: Vec<TweetAgreement>,
    pub labeled_tweets: usize,
    /// Tweets per plurality label, over tweets whose vote is decided.
    pub decided: BTreeMap<LabelClass, usize>,
    /// Labeled tweets waiting for adjudication.
    pub ties: usize,
    /// Fraction of labeled tweets where one label holds more than half the votes.
    pub strict_majority_rate: f64,
    pub pairwise: Vec<PairAgreement>,
}

pub fn agreement_stats(store: &AnnotationStore) -> AgreementReport {
    let mut tweets = Vec::new();
    let mut majority = 0usize;
    let mut decided: BTreeMap<LabelClass, usize> = LabelClass::ALL.iter().map(|&l| (l, 0)).collect();
    let mut ties = 0usize;
    for rec in store.dataset().records() {
        let labels = store.labels_for(&rec.id);
        if labels.is_empty() {
            continue;
        }
        let vote = majority_vote(&labels.values().copied().collect::<Vec<_>>());
        let top = vote.tally.values().copied().max().unwrap_or(0);
        if top * 2 > labels.len() {
            majority += 1;
        }
        match vote.decided {
            Some(l) if !vote.needs_adjudication() => *decided.entry(l).or_default() += 1,
            _ => ties += 1,
        }
        tweets.push(TweetAgreement {
            tweet_id: rec.id.clone(),
            annotators: labels.len(),
            unanimous: vote.tally.len() == 1,
        });
    }
    let labeled_tweets = tweets.len();

    let annotators: Vec<String> = store.annotators().into_iter().collect();
    let mut pairwise = Vec::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            let mut shared = 0usize;
            let mut same = 0usize;
            for rec in store.dataset().records() {
                if let (Some(la), Some(lb)) = (store.label_of(&rec.id, a), store.label_of(&rec.id, b)) {
                    shared += 1;
                    same += usize::from(la == lb);
                }
            }
            pairwise.push(PairAgreement {
                annotator_a: a.clone(),
                annotator_b: b.clone(),
                shared,
                agreement: (shared > 0).then(|| same as f64 / shared as f64),
            });
        }
    }

    AgreementReport {
        strict_majority_rate: if labeled_tweets == 0 {
            0.0
        } else {
            majority as f64 / labeled_tweets as f64
        },
        tweets,
        labeled_tweets,
        decided,
        ties,
        pairwise,
    }
}
