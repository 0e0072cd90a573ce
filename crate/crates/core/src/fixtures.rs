//! Bundled default fixtures (glossary, stopword lists, a separable toy set).
//!
//! The files live in the repository's `data/` directory and are compiled in,
//! so the library works without a checkout. Setting `MISINFO_DATA_DIR` makes
//! the loaders below read the same file names from that directory instead.

use std::path::PathBuf;

use crate::features::{BinaryLabel, FeatureMethod, FeatureSpace, FeatureVector, LabeledVector};

pub const DATA_DIR_ENV: &str = "MISINFO_DATA_DIR";

pub const GLOSSARY_FILE: &str = "glossary.default";
pub const ENGLISH_STOPWORDS_FILE: &str = "stopwords.english";
pub const TRIVIAL_STOPWORDS_FILE: &str = "stopwords.trivial";

pub(crate) const GLOSSARY_DEFAULT: &str = include_str!("../../../data/glossary.default");
pub(crate) const STOPWORDS_ENGLISH: &str = include_str!("../../../data/stopwords.english");
pub(crate) const STOPWORDS_TRIVIAL: &str = include_str!("../../../data/stopwords.trivial");

/// The override directory, if `MISINFO_DATA_DIR` is set and non-empty.
pub fn data_dir_override() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Six linearly separable BoW vectors:
/// M rows load on `cure`/`hoax`, T rows on `vaccin`/`trial`.
pub fn separable_toy() -> (FeatureSpace, Vec<LabeledVector>) {
    let space = FeatureSpace::from_vocabulary(
        FeatureMethod::Bow,
        ["cure", "hoax", "vaccin", "trial"].map(String::from).to_vec(),
    )
    .expect("distinct vocabulary");
    let info = space.info();
    let rows = [
        ("m1", BinaryLabel::M, vec![(0, 2.0), (1, 1.0)]),
        ("m2", BinaryLabel::M, vec![(1, 3.0)]),
        ("m3", BinaryLabel::M, vec![(0, 1.0), (1, 1.0), (3, 1.0)]),
        ("t1", BinaryLabel::T, vec![(2, 2.0), (3, 1.0)]),
        ("t2", BinaryLabel::T, vec![(2, 1.0), (3, 2.0)]),
        ("t3", BinaryLabel::T, vec![(0, 1.0), (2, 2.0), (3, 1.0)]),
    ]
    .into_iter()
    .map(|(id, label, entries)| LabeledVector {
        id: id.into(),
        label,
        vector: FeatureVector::new(&info, entries).expect("valid toy vector"),
    })
    .collect();
    (space, rows)
}
