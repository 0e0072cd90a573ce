//! Seeded synthetic labeled corpora.
//!
//! Documents are built from three pools of invented words: one per class and
//! one shared. Each word slot draws from the document's class pool with
//! probability `signal`, otherwise from the shared pool. Every text also
//! carries one keyword from the default glossary so the keyword filter keeps
//! it.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{LabelClass, LabeledDataset, LabeledTweet};
use crate::corpus::{Glossary, TweetRecord, MAX_TWEET_CHARS};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::porter;
use crate::preprocess::{self, StopwordSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_m: usize,
    pub n_t: usize,
    pub vocab_shared: usize,
    pub vocab_m: usize,
    pub vocab_t: usize,
    pub signal: f64,
    /// Inclusive word-slot range per document, keyword included.
    pub length_range: (usize, usize),
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            n_m: 210,
            n_t: 314,
            vocab_shared: 400,
            vocab_m: 80,
            vocab_t: 80,
            signal: 0.8,
            length_range: (2, 32),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.n_m == 0 || self.n_t == 0 {
            return fail("both class counts must be positive".into());
        }
        if self.vocab_shared == 0 || self.vocab_m == 0 || self.vocab_t == 0 {
            return fail("word pools must be non-empty".into());
        }
        if !(0.0..=1.0).contains(&self.signal) {
            return fail(format!("signal must lie in [0, 1], got {}", self.signal));
        }
        let (lo, hi) = self.length_range;
        if lo == 0 || lo > hi {
            return fail(format!("invalid length range {lo}..={hi}"));
        }
        if hi > 40 {
            return fail(format!("maximum length {hi} cannot fit a {MAX_TWEET_CHARS}-character tweet"));
        }
        if self.vocab_shared + self.vocab_m + self.vocab_t > MAX_POOL_WORDS {
            return fail(format!("at most {MAX_POOL_WORDS} pool words in total"));
        }
        Ok(())
    }
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "i", "o", "u"];
const MAX_POOL_WORDS: usize = 20_000;

/// Distinct consonant-vowel words of two or three syllables that survive
/// preprocessing unchanged and do not collide with glossary tokens.
fn invent_words(rng: &mut ChaCha8Rng, count: usize, reserved: &HashSet<String>, sw: &StopwordSet) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(rng).expect("non-empty"));
            w.push_str(VOWELS.choose(rng).expect("non-empty"));
        }
        if seen.contains(&w) || reserved.contains(&w) || sw.contains(&w) || porter::stem(&w) != w {
            continue;
        }
        seen.insert(w.clone());
        out.push(w);
    }
    out
}

struct Pools {
    shared: Vec<String>,
    m: Vec<String>,
    t: Vec<String>,
}

/// Builds the corpus described by `spec`. Identical specs give identical output.
pub fn generate(spec: &SynthSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let glossary = Glossary::default_bundled()?;
    let sw = StopwordSet::default_bundled()?;
    let keywords: Vec<String> = glossary.entries().map(|(k, _)| k.to_string()).collect();
    let reserved: HashSet<String> = keywords
        .iter()
        .flat_map(|k| preprocess::preprocess_text(k, &sw))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let all = invent_words(&mut rng, spec.vocab_shared + spec.vocab_m + spec.vocab_t, &reserved, &sw);
    let pools = Pools {
        shared: all[..spec.vocab_shared].to_vec(),
        m: all[spec.vocab_shared..spec.vocab_shared + spec.vocab_m].to_vec(),
        t: all[spec.vocab_shared + spec.vocab_m..].to_vec(),
    };
    let mut labels: Vec<LabelClass> = std::iter::repeat_n(LabelClass::M, spec.n_m)
        .chain(std::iter::repeat_n(LabelClass::T, spec.n_t))
        .collect();
    labels.shuffle(&mut rng);

    let width = (labels.len()).to_string().len();
    let entries: Vec<LabeledTweet> = labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let mut doc_rng = ChaCha8Rng::seed_from_u64(spec.seed);
            doc_rng.set_stream(i as u64 + 1);
            let text = document(&mut doc_rng, spec, &pools, &keywords, label);
            LabeledTweet {
                tweet: TweetRecord {
                    id: format!("synth-{:0width$}", i + 1),
                    text,
                    date: None,
                },
                label,
            }
        })
        .collect();
    LabeledDataset::new(entries)
}

fn document(rng: &mut ChaCha8Rng, spec: &SynthSpec, pools: &Pools, keywords: &[String], label: LabelClass) -> String {
    let (lo, hi) = spec.length_range;
    let slots = rng.random_range(lo..=hi);
    let class_pool = if label == LabelClass::M { &pools.m } else { &pools.t };
    let mut words: Vec<&str> = (0..slots - 1)
        .map(|_| {
            let pool = if rng.random_bool(spec.signal) { class_pool } else { &pools.shared };
            pool.choose(rng).expect("non-empty pool").as_str()
        })
        .collect();
    let keyword = keywords.choose(rng).expect("glossary has keywords");
    let mut at = rng.random_range(0..=words.len());
    words.insert(at, keyword);
    while words.iter().map(|w| w.chars().count() + 1).sum::<usize>() - 1 > MAX_TWEET_CHARS {
        let last = words.len() - 1;
        if at == last {
            words.remove(0);
            at -= 1;
        } else {
            words.remove(last);
        }
    }
    words.join(" ")
}

/// The sidecar path recording the spec next to a corpus file.
pub fn spec_path(corpus: &Path) -> PathBuf {
    let mut s = corpus.as_os_str().to_owned();
    s.push(".spec.json");
    PathBuf::from(s)
}

/// Writes the corpus as labeled JSONL and the spec beside it.
pub fn write_corpus(spec: &SynthSpec, corpus: &LabeledDataset, path: &Path) -> Result<()> {
    corpus.save(path)?;
    let mut bytes = serde_json::to_vec_pretty(spec).map_err(|e| Error::Validation(e.to_string()))?;
    bytes.push(b'\n');
    fsutil::write_atomic(&spec_path(path), &bytes)
}
