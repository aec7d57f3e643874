//! Multilingual document corpus: manifest loading, normalization, tokenization.
//!
//! A corpus is loaded from a UTF-8, line-delimited JSON manifest with one
//! document per line. Required keys are `doc_id`, `language`, `body`;
//! `title`, `source_url`, and `page_refs` are optional. Document order is
//! manifest order.
//!
//! [`normalize_text`] is the single normalization pipeline for the whole
//! system: both document bodies and rule keywords pass through it, so
//! accent-insensitive matching ("sécurité" vs "securite") falls out of
//! construction rather than per-call options.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// The two-letter ISO 639-1 language codes, sorted.
const ISO_639_1: &[&str] = &[
    "aa", "ab", "ae", "af", "ak", "am", "an", "ar", "as", "av", "ay", "az", "ba", "be", "bg",
    "bh", "bi", "bm", "bn", "bo", "br", "bs", "ca", "ce", "ch", "co", "cr", "cs", "cu", "cv",
    "cy", "da", "de", "dv", "dz", "ee", "el", "en", "eo", "es", "et", "eu", "fa", "ff", "fi",
    "fj", "fo", "fr", "fy", "ga", "gd", "gl", "gn", "gu", "gv", "ha", "he", "hi", "ho", "hr",
    "ht", "hu", "hy", "hz", "ia", "id", "ie", "ig", "ii", "ik", "io", "is", "it", "iu", "ja",
    "jv", "ka", "kg", "ki", "kj", "kk", "kl", "km", "kn", "ko", "kr", "ks", "ku", "kv", "kw",
    "ky", "la", "lb", "lg", "li", "ln", "lo", "lt", "lu", "lv", "mg", "mh", "mi", "mk", "ml",
    "mn", "mr", "ms", "mt", "my", "na", "nb", "nd", "ne", "ng", "nl", "nn", "no", "nr", "nv",
    "ny", "oc", "oj", "om", "or", "os", "pa", "pi", "pl", "ps", "pt", "qu", "rm", "rn", "ro",
    "ru", "rw", "sa", "sc", "sd", "se", "sg", "si", "sk", "sl", "sm", "sn", "so", "sq", "sr",
    "ss", "st", "su", "sv", "sw", "ta", "te", "tg", "th", "ti", "tk", "tl", "tn", "to", "tr",
    "ts", "tt", "tw", "ty", "ug", "uk", "ur", "uz", "ve", "vi", "vo", "wa", "wo", "xh", "yi",
    "yo", "za", "zh", "zu",
];

/// Whether `code` is a recognized ISO 639-1 two-letter language code.
pub fn is_recognized_language(code: &str) -> bool {
    ISO_639_1.binary_search(&code).is_ok()
}

/// Errors from corpus loading and validation.
///
/// `line` is the 1-based record number: the manifest line for
/// [`load_corpus`], the position in the input list for
/// [`Corpus::from_documents`].
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("duplicate doc_id {doc_id:?} at line {line} (first seen at line {first_line})")]
    DuplicateDocId {
        doc_id: String,
        line: usize,
        first_line: usize,
    },
    #[error("unknown language code {code:?} at line {line}")]
    UnknownLanguage { code: String, line: usize },
    #[error("empty doc_id at line {line}")]
    EmptyDocId { line: usize },
    #[error("document {doc_id:?} at line {line}: body is empty after normalization")]
    EmptyBody { doc_id: String, line: usize },
}

/// A legal text with a CELEX-style identifier and a language tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    /// CELEX-style identifier, e.g. `"CELEX_32023R2841_EN"`.
    pub doc_id: String,
    /// ISO 639-1 two-letter code.
    pub language: String,
    #[serde(default)]
    pub title: String,
    /// Raw body text. Normalize with [`normalize_text`] before matching.
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_refs: Option<Vec<u32>>,
}

/// An ordered, validated collection of documents.
///
/// Immutable after construction; safe for concurrent reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    language_index: BTreeMap<String, Vec<String>>,
    by_id: BTreeMap<String, usize>,
}

impl Corpus {
    /// Validates the documents and builds the language index.
    ///
    /// Fails on duplicate or empty doc_ids, unrecognized language codes,
    /// and bodies that normalize to the empty string.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_id = BTreeMap::new();
        let mut language_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (idx, doc) in documents.iter().enumerate() {
            let line = idx + 1;
            if doc.doc_id.is_empty() {
                return Err(CorpusError::EmptyDocId { line });
            }
            if !is_recognized_language(&doc.language) {
                return Err(CorpusError::UnknownLanguage {
                    code: doc.language.clone(),
                    line,
                });
            }
            if normalize_text(&doc.body).is_empty() {
                return Err(CorpusError::EmptyBody {
                    doc_id: doc.doc_id.clone(),
                    line,
                });
            }
            if let Some(&first) = by_id.get(&doc.doc_id) {
                return Err(CorpusError::DuplicateDocId {
                    doc_id: doc.doc_id.clone(),
                    line,
                    first_line: first + 1,
                });
            }
            by_id.insert(doc.doc_id.clone(), idx);
            language_index
                .entry(doc.language.clone())
                .or_default()
                .push(doc.doc_id.clone());
        }
        Ok(Corpus {
            documents,
            language_index,
            by_id,
        })
    }

    /// Documents in manifest order.
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// Map from language code to the doc_ids in that language, in
    /// manifest order. The value lists partition the corpus.
    pub fn language_index(&self) -> &BTreeMap<String, Vec<String>> {
        &self.language_index
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&idx| &self.documents[idx])
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} documents in {} languages",
            self.documents.len(),
            self.language_index.len()
        )
    }
}

/// Loads a corpus from a line-delimited JSON manifest.
///
/// One document per line; blank lines are not allowed between records.
/// Document order equals file order. Invalid UTF-8 byte sequences are
/// replaced with U+FFFD before parsing.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus, CorpusError> {
    let bytes = std::fs::read(manifest_path).map_err(|source| CorpusError::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8_lossy(&bytes);
    let mut documents = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        // Validate eagerly so errors carry the manifest line, not the
        // record index.
        if doc.doc_id.is_empty() {
            return Err(CorpusError::EmptyDocId { line: line_no });
        }
        if !is_recognized_language(&doc.language) {
            return Err(CorpusError::UnknownLanguage {
                code: doc.language.clone(),
                line: line_no,
            });
        }
        if normalize_text(&doc.body).is_empty() {
            return Err(CorpusError::EmptyBody {
                doc_id: doc.doc_id.clone(),
                line: line_no,
            });
        }
        if let Some(first) = documents
            .iter()
            .position(|(_, d): &(usize, Document)| d.doc_id == doc.doc_id)
        {
            return Err(CorpusError::DuplicateDocId {
                doc_id: doc.doc_id,
                line: line_no,
                first_line: documents[first].0,
            });
        }
        documents.push((line_no, doc));
    }
    Corpus::from_documents(documents.into_iter().map(|(_, d)| d).collect())
}

/// Normalizes text for matching: canonical decomposition, combining
/// diacritics stripped, case folded, recomposed, whitespace runs
/// collapsed to single spaces. Idempotent.
pub fn normalize_text(raw: &str) -> String {
    let stripped: String = raw.nfd().filter(|c| !is_combining_mark(*c)).collect();
    let lowered = stripped.to_lowercase();
    let composed: String = lowered.nfc().collect();
    composed.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalizes raw bytes, replacing invalid UTF-8 sequences with U+FFFD.
/// Returns the normalized text and the number of replaced sequences.
pub fn normalize_bytes(raw: &[u8]) -> (String, usize) {
    let text = String::from_utf8_lossy(raw);
    let replacements = text.matches('\u{FFFD}').count();
    (normalize_text(&text), replacements)
}

/// Splits normalized text on any character that is not a letter or digit.
/// Never yields empty tokens; order is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_string())
        .collect()
}
