//! Vocabularies, bag-of-words and n-gram vectors, and the train/test split.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotation::LabelClass;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::preprocess::TokenSequence;

/// How a token sequence becomes features. Bag-of-words keeps per-tweet
/// counts; the n-gram methods record presence (1) of each contiguous n-tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureMethod {
    Bow,
    Unigram,
    Bigram,
    Trigram,
}

impl FeatureMethod {
    pub const ALL: [FeatureMethod; 4] = [
        FeatureMethod::Bow,
        FeatureMethod::Unigram,
        FeatureMethod::Bigram,
        FeatureMethod::Trigram,
    ];

    pub fn ngram(n: usize) -> Result<Self> {
        match n {
            1 => Ok(FeatureMethod::Unigram),
            2 => Ok(FeatureMethod::Bigram),
            3 => Ok(FeatureMethod::Trigram),
            _ => Err(Error::Validation(format!("n-gram order must be 1, 2 or 3, got {n}"))),
        }
    }

    /// The n-gram order, or `None` for bag-of-words.
    pub fn n(self) -> Option<usize> {
        match self {
            FeatureMethod::Bow => None,
            FeatureMethod::Unigram => Some(1),
            FeatureMethod::Bigram => Some(2),
            FeatureMethod::Trigram => Some(3),
        }
    }

    pub fn is_binary(self) -> bool {
        self != FeatureMethod::Bow
    }

    /// Short machine name used in files and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            FeatureMethod::Bow => "bow",
            FeatureMethod::Unigram => "unigram",
            FeatureMethod::Bigram => "bigram",
            FeatureMethod::Trigram => "trigram",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            FeatureMethod::Bow => "BoW",
            FeatureMethod::Unigram => "uni-gram",
            FeatureMethod::Bigram => "bi-grams",
            FeatureMethod::Trigram => "tri-grams",
        }
    }
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bow" => Ok(FeatureMethod::Bow),
            "unigram" | "uni-gram" | "1gram" | "1-gram" => Ok(FeatureMethod::Unigram),
            "bigram" | "bi-gram" | "bigrams" | "2gram" | "2-gram" => Ok(FeatureMethod::Bigram),
            "trigram" | "tri-gram" | "trigrams" | "3gram" | "3-gram" => Ok(FeatureMethod::Trigram),
            other => Err(Error::Validation(format!(
                "unknown feature method {other:?}; expected bow, unigram, bigram or trigram"
            ))),
        }
    }
}

impl Serialize for FeatureMethod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for FeatureMethod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The `n`-token windows of `tokens`; empty when `tokens` is shorter than `n`.
pub fn extract_ngrams(tokens: &[String], n: usize) -> Result<Vec<&[String]>> {
    if !(1..=3).contains(&n) {
        return Err(Error::Contract(format!("n-gram order must be 1, 2 or 3, got {n}")));
    }
    Ok(tokens.windows(n).collect())
}

/// The feature keys a document contributes under `method`, with repetition.
/// N-gram members are joined with a single space.
pub fn terms(tokens: &[String], method: FeatureMethod) -> Vec<String> {
    match method.n() {
        None | Some(1) => tokens.to_vec(),
        Some(n) => tokens.windows(n).map(|w| w.join(" ")).collect(),
    }
}

/// Identity of a feature space: SHA-256 over its method and vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId(pub [u8; 32]);

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for SpaceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Validation(format!("bad feature space digest: {e}")))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::Validation("feature space digest must be 32 bytes".into()))?;
        Ok(SpaceId(arr))
    }
}

impl Serialize for SpaceId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SpaceId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// What a model needs to know about the space it was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceInfo {
    pub digest: SpaceId,
    pub method: FeatureMethod,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    method: FeatureMethod,
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    id: SpaceId,
}

fn digest(method: FeatureMethod, vocabulary: &[String]) -> SpaceId {
    let mut h = Sha256::new();
    h.update(method.key().as_bytes());
    for term in vocabulary {
        h.update(b"\n");
        h.update(term.as_bytes());
    }
    SpaceId(h.finalize().into())
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    vocabulary: Vec<String>,
}

impl FeatureSpace {
    pub fn from_vocabulary(method: FeatureMethod, vocabulary: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(vocabulary.len());
        for (i, term) in vocabulary.iter().enumerate() {
            if index.insert(term.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary entry {term:?}")));
            }
        }
        Ok(FeatureSpace {
            id: digest(method, &vocabulary),
            method,
            vocabulary,
            index,
        })
    }

    pub fn method(&self) -> FeatureMethod {
        self.method
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn info(&self) -> SpaceInfo {
        SpaceInfo {
            digest: self.id,
            method: self.method,
            dim: self.vocabulary.len(),
        }
    }

    /// Sidecar file: `{method, n?, vocabulary}` with method `bow` or `ngram`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = SpaceFile {
            method: if self.method == FeatureMethod::Bow { "bow" } else { "ngram" }.into(),
            n: self.method.n(),
            vocabulary: self.vocabulary.clone(),
        };
        let mut bytes = serde_json::to_vec(&file).map_err(|e| Error::Validation(e.to_string()))?;
        bytes.push(b'\n');
        fsutil::write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fsutil::read_to_string(path)?;
        let file: SpaceFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let method = match (file.method.as_str(), file.n) {
            ("bow", None) => FeatureMethod::Bow,
            ("ngram", Some(n)) => FeatureMethod::ngram(n).map_err(|e| Error::format(path, e.to_string()))?,
            (m, n) => return Err(Error::format(path, format!("invalid method {m:?} with n={n:?}"))),
        };
        FeatureSpace::from_vocabulary(method, file.vocabulary).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Builds the vocabulary from training documents, in first-occurrence order.
pub fn build_feature_space(train_docs: &[TokenSequence], method: FeatureMethod) -> Result<FeatureSpace> {
    if train_docs.is_empty() {
        return Err(Error::Degenerate("no training documents".into()));
    }
    let mut seen = HashMap::new();
    let mut vocabulary = Vec::new();
    for doc in train_docs {
        for term in terms(&doc.tokens, method) {
            if !seen.contains_key(&term) {
                seen.insert(term.clone(), vocabulary.len());
                vocabulary.push(term);
            }
        }
    }
    if vocabulary.is_empty() {
        return Err(Error::Degenerate(format!(
            "empty {} vocabulary: every training document is too short",
            method.display_name()
        )));
    }
    Ok(FeatureSpace {
        id: digest(method, &vocabulary),
        method,
        vocabulary,
        index: seen,
    })
}

/// A sparse vector over one feature space. Entries are sorted by position
/// and never hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    space: SpaceId,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    /// Validates and normalizes raw entries against `space`.
    pub fn new(space: &SpaceInfo, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(p, _)| p);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Contract(format!("position {} listed twice", w[0].0)));
            }
        }
        for &(p, v) in &entries {
            if p >= space.dim {
                return Err(Error::Contract(format!("position {p} outside vocabulary of {}", space.dim)));
            }
            if !v.is_finite() {
                return Err(Error::Contract(format!("non-finite value at position {p}")));
            }
            if space.method.is_binary() && v != 1.0 {
                return Err(Error::Contract(format!("n-gram vectors are binary; got {v} at position {p}")));
            }
            if v < 0.0 {
                return Err(Error::Contract(format!("negative count {v} at position {p}")));
            }
        }
        Ok(FeatureVector { space: space.digest, entries })
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, position: usize) -> f64 {
        self.entries
            .binary_search_by_key(&position, |&(p, _)| p)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(p, v)| weights[p] * v).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Projects a document onto `space`. Terms missing from the vocabulary are ignored.
pub fn vectorize(doc: &TokenSequence, space: &FeatureSpace) -> FeatureVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for term in terms(&doc.tokens, space.method) {
        if let Some(p) = space.position(&term) {
            let slot = counts.entry(p).or_insert(0.0);
            *slot = if space.method.is_binary() { 1.0 } else { *slot + 1.0 };
        }
    }
    FeatureVector {
        space: space.id,
        entries: counts.into_iter().collect(),
    }
}

/// The two classes the classifiers separate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinaryLabel {
    M,
    T,
}

impl BinaryLabel {
    /// Margin orientation: true information is positive.
    pub fn sign(self) -> f64 {
        match self {
            BinaryLabel::M => -1.0,
            BinaryLabel::T => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            BinaryLabel::M => 0,
            BinaryLabel::T => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            BinaryLabel::M
        } else {
            BinaryLabel::T
        }
    }

    pub fn other(self) -> Self {
        match self {
            BinaryLabel::M => BinaryLabel::T,
            BinaryLabel::T => BinaryLabel::M,
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinaryLabel::M => "M",
            BinaryLabel::T => "T",
        })
    }
}

impl TryFrom<LabelClass> for BinaryLabel {
    type Error = Error;

    fn try_from(l: LabelClass) -> Result<Self> {
        match l {
            LabelClass::M => Ok(BinaryLabel::M),
            LabelClass::T => Ok(BinaryLabel::T),
            other => Err(Error::Validation(format!("label {other} is not M or T"))),
        }
    }
}

impl From<BinaryLabel> for LabelClass {
    fn from(l: BinaryLabel) -> Self {
        match l {
            BinaryLabel::M => LabelClass::M,
            BinaryLabel::T => LabelClass::T,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVector {
    pub id: String,
    pub label: BinaryLabel,
    pub vector: FeatureVector,
}

/// Anything that can be split with per-class bookkeeping.
pub trait Labeled {
    fn class(&self) -> Option<LabelClass>;
}

impl Labeled for TokenSequence {
    fn class(&self) -> Option<LabelClass> {
        self.label
    }
}

impl Labeled for LabeledVector {
    fn class(&self) -> Option<LabelClass> {
        Some(self.label.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub m: usize,
    pub t: usize,
    pub other: usize,
}

impl ClassCounts {
    pub fn of<T: Labeled>(items: &[T]) -> Self {
        let mut c = ClassCounts::default();
        for item in items {
            match item.class() {
                Some(LabelClass::M) => c.m += 1,
                Some(LabelClass::T) => c.t += 1,
                _ => c.other += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
    pub train_counts: ClassCounts,
    pub test_counts: ClassCounts,
}

/// Size of the training side: `floor(ratio * n)`.
pub fn train_size(n: usize, ratio: f64) -> usize {
    // the epsilon keeps products like 0.29 * 100 from flooring to 28
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Shuffles with a seeded ChaCha8 stream and cuts at `floor(ratio * n)`.
pub fn split_train_test<T: Labeled + Clone>(data: &[T], ratio: f64, seed: u64) -> Result<SplitResult<T>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Validation(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    if data.len() < 2 {
        return Err(Error::Degenerate(format!("cannot split {} item(s)", data.len())));
    }
    let n_train = train_size(data.len(), ratio);
    if n_train == 0 || n_train == data.len() {
        return Err(Error::Degenerate(format!(
            "ratio {ratio} on {} items leaves one side empty",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train: Vec<T> = order[..n_train].iter().map(|&i| data[i].clone()).collect();
    let test: Vec<T> = order[n_train..].iter().map(|&i| data[i].clone()).collect();
    Ok(SplitResult {
        train_counts: ClassCounts::of(&train),
        test_counts: ClassCounts::of(&test),
        train,
        test,
        seed,
    })
}

/// Token statistics of a document set under one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenStats {
    pub documents: usize,
    pub terms: usize,
    pub unique: usize,
    pub mean_len: f64,
    pub min_len: usize,
    pub max_len: usize,
}

pub fn token_stats(docs: &[TokenSequence], method: FeatureMethod) -> TokenStats {
    let lens: Vec<usize> = docs.iter().map(|d| terms(&d.tokens, method).len()).collect();
    let unique: std::collections::HashSet<String> = docs.iter().flat_map(|d| terms(&d.tokens, method)).collect();
    let total: usize = lens.iter().sum();
    TokenStats {
        documents: docs.len(),
        terms: total,
        unique: unique.len(),
        mean_len: if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 },
        min_len: lens.iter().copied().min().unwrap_or(0),
        max_len: lens.iter().copied().max().unwrap_or(0),
    }
}

#[derive(Serialize, Deserialize)]
struct VectorRow {
    id: String,
    label: BinaryLabel,
    entries: Vec<(usize, f64)>,
}

/// Vectorized dataset cache: `{id, label, entries: [[position, value], ...]}`
/// per line, next to the feature space saved at `space_path`.
pub fn save_vectors(path: &Path, space_path: &Path, space: &FeatureSpace, rows: &[LabeledVector]) -> Result<()> {
    for r in rows {
        if r.vector.space != space.id {
            return Err(Error::Contract(format!("vector {} belongs to another feature space", r.id)));
        }
    }
    space.save(space_path)?;
    let bytes = fsutil::to_jsonl(rows.iter().map(|r| VectorRow {
        id: r.id.clone(),
        label: r.label,
        entries: r.vector.entries.clone(),
    }))?;
    fsutil::write_atomic(path, &bytes)
}

pub fn load_vectors(path: &Path, space: &FeatureSpace) -> Result<Vec<LabeledVector>> {
    let rows: Vec<VectorRow> = fsutil::read_jsonl(path)?;
    let info = space.info();
    rows.into_iter()
        .map(|r| {
            let vector = FeatureVector::new(&info, r.entries)
                .map_err(|e| Error::format(path, format!("row {}: {e}", r.id)))?;
            Ok(LabeledVector {
                id: r.id,
                label: r.label,
                vector,
            })
        })
        .collect()
}

/// Vectorizes labeled documents. Documents whose label is not M or T are an error.
pub fn vectorize_labeled(docs: &[TokenSequence], space: &FeatureSpace) -> Result<Vec<LabeledVector>> {
    docs.iter()
        .map(|d| {
            let label = d
                .label
                .ok_or_else(|| Error::Validation(format!("document {} has no label", d.tweet_id)))
                .and_then(BinaryLabel::try_from)?;
            Ok(LabeledVector {
                id: d.tweet_id.clone(),
                label,
                vector: vectorize(d, space),
            })
        })
        .collect()
}
