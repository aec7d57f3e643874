//! Per-language keyword rules mapping documents to MITRE ATT&CK techniques.
//!
//! Each rule is a curated list of keyword phrases for one (technique,
//! language) pair. A document matches a rule when at least `min_matches`
//! distinct phrases of that rule occur as contiguous token subsequences of
//! the normalized document; the confidence score is
//! `min(1, unique_matches / saturation)`.
//!
//! Matching is contiguous-token, not substring, so "art" never matches
//! inside "party". Documents are only matched against rules of their own
//! language; there is no cross-language fallback.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{is_recognized_language, normalize_text, tokenize, Document};

/// A MITRE ATT&CK technique identifier: `T` + 4 digits, with an optional
/// `.` + 3 digit sub-technique suffix (e.g. `T1566` or `T1021.004`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TechniqueId(String);

impl TechniqueId {
    pub fn new(id: &str) -> Result<Self, RulesError> {
        let b = id.as_bytes();
        let ok = match b.len() {
            5 => b[0] == b'T' && b[1..].iter().all(u8::is_ascii_digit),
            9 => {
                b[0] == b'T'
                    && b[1..5].iter().all(u8::is_ascii_digit)
                    && b[5] == b'.'
                    && b[6..].iter().all(u8::is_ascii_digit)
            }
            _ => false,
        };
        if ok {
            Ok(TechniqueId(id.to_string()))
        } else {
            Err(RulesError::InvalidTechniqueId(id.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TechniqueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for TechniqueId {
    type Error = RulesError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        TechniqueId::new(&value)
    }
}

impl From<TechniqueId> for String {
    fn from(id: TechniqueId) -> String {
        id.0
    }
}

impl std::str::FromStr for TechniqueId {
    type Err = RulesError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TechniqueId::new(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RulesError {
    #[error("cannot read rules file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse rules file {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed technique id {0:?} (expected T#### or T####.###)")]
    InvalidTechniqueId(String),
    #[error("unknown language code {language:?} in rule for {technique_id}")]
    UnknownRuleLanguage {
        technique_id: TechniqueId,
        language: String,
    },
    #[error("duplicate rule for ({technique_id}, {language:?})")]
    DuplicateRule {
        technique_id: TechniqueId,
        language: String,
    },
    #[error("rule ({technique_id}, {language:?}) has an empty keyword list")]
    EmptyKeywordList {
        technique_id: TechniqueId,
        language: String,
    },
    #[error("rule ({technique_id}, {language:?}) has {count} keywords, outside the hard bounds [1, 64]")]
    KeywordCountOutOfBounds {
        technique_id: TechniqueId,
        language: String,
        count: usize,
    },
    #[error("rule ({technique_id}, {language:?}) keyword {keyword:?}: {reason}")]
    InvalidKeyword {
        technique_id: TechniqueId,
        language: String,
        keyword: String,
        reason: String,
    },
    #[error("rule ({technique_id}, {language:?}) keyword {keyword:?} duplicates an earlier keyword after normalization")]
    DuplicateKeyword {
        technique_id: TechniqueId,
        language: String,
        keyword: String,
    },
    #[error("min_matches {min_matches} and saturation {saturation} must be positive with min_matches <= saturation")]
    InvalidThresholds {
        min_matches: usize,
        saturation: usize,
    },
    #[error("no rules exist for language {language:?}; rule coverage gap, not an empty label set")]
    NoRulesForLanguage { language: String },
    #[error("classification references ({technique_id}, {language:?}) which is absent from the rule set")]
    TechniqueNotInRules {
        technique_id: TechniqueId,
        language: String,
    },
    #[error("classification for {technique_id} has an empty matched keyword list")]
    EmptyMatchedKeywords { technique_id: TechniqueId },
    #[error("matched keyword {keyword:?} is not a keyword of the {technique_id} rule")]
    KeywordNotInRule {
        technique_id: TechniqueId,
        keyword: String,
    },
    #[error("matched keyword {keyword:?} does not occur in document {doc_id:?}")]
    KeywordNotInDocument { doc_id: String, keyword: String },
}

/// Curated keyword phrases for one (technique, language) pair.
///
/// Keywords are stored normalized (same pipeline as document bodies) in
/// file order; each phrase is 1–4 tokens and distinct within the rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TechniqueRule {
    technique_id: TechniqueId,
    language: String,
    keywords: Vec<String>,
    keyword_tokens: Vec<Vec<String>>,
}

impl TechniqueRule {
    /// Normalizes and validates raw keyword phrases.
    pub fn new(
        technique_id: TechniqueId,
        language: &str,
        raw_keywords: &[String],
    ) -> Result<Self, RulesError> {
        if !is_recognized_language(language) {
            return Err(RulesError::UnknownRuleLanguage {
                technique_id,
                language: language.to_string(),
            });
        }
        if raw_keywords.is_empty() {
            return Err(RulesError::EmptyKeywordList {
                technique_id,
                language: language.to_string(),
            });
        }
        if raw_keywords.len() > 64 {
            return Err(RulesError::KeywordCountOutOfBounds {
                technique_id,
                language: language.to_string(),
                count: raw_keywords.len(),
            });
        }
        let mut keywords = Vec::with_capacity(raw_keywords.len());
        let mut keyword_tokens = Vec::with_capacity(raw_keywords.len());
        for raw in raw_keywords {
            let normalized = normalize_text(raw);
            let tokens = tokenize(&normalized);
            if tokens.is_empty() || tokens.len() > 4 {
                return Err(RulesError::InvalidKeyword {
                    technique_id,
                    language: language.to_string(),
                    keyword: raw.clone(),
                    reason: format!("{} tokens after normalization, expected 1-4", tokens.len()),
                });
            }
            let canonical = tokens.join(" ");
            if keywords.contains(&canonical) {
                return Err(RulesError::DuplicateKeyword {
                    technique_id,
                    language: language.to_string(),
                    keyword: raw.clone(),
                });
            }
            keywords.push(canonical);
            keyword_tokens.push(tokens);
        }
        Ok(TechniqueRule {
            technique_id,
            language: language.to_string(),
            keywords,
            keyword_tokens,
        })
    }

    pub fn technique_id(&self) -> &TechniqueId {
        &self.technique_id
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    /// Normalized keyword phrases, in file order.
    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }
}

/// Warning attached to a rule whose keyword count falls outside the
/// curation target of 15–20 (still loaded, unlike the hard [1, 64] bounds).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleWarning {
    pub technique_id: TechniqueId,
    pub language: String,
    pub keyword_count: usize,
}

impl fmt::Display for RuleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rule ({}, {:?}) has {} keywords, outside the curation target of 15-20",
            self.technique_id, self.language, self.keyword_count
        )
    }
}

/// All loaded rules keyed by (technique, language), plus the match policy.
///
/// Immutable after load; classification over it is pure and safe to run
/// concurrently across documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TechniqueRuleSet {
    rules: BTreeMap<(TechniqueId, String), TechniqueRule>,
    min_matches: usize,
    saturation: usize,
}

pub const DEFAULT_MIN_MATCHES: usize = 2;
pub const DEFAULT_SATURATION: usize = 5;

impl TechniqueRuleSet {
    pub fn new(
        rules: Vec<TechniqueRule>,
        min_matches: usize,
        saturation: usize,
    ) -> Result<(Self, Vec<RuleWarning>), RulesError> {
        if min_matches == 0 || saturation == 0 || min_matches > saturation {
            return Err(RulesError::InvalidThresholds {
                min_matches,
                saturation,
            });
        }
        let mut map = BTreeMap::new();
        let mut warnings = Vec::new();
        for rule in rules {
            let count = rule.keywords.len();
            if !(15..=20).contains(&count) {
                warnings.push(RuleWarning {
                    technique_id: rule.technique_id.clone(),
                    language: rule.language.clone(),
                    keyword_count: count,
                });
            }
            let key = (rule.technique_id.clone(), rule.language.clone());
            if map.contains_key(&key) {
                return Err(RulesError::DuplicateRule {
                    technique_id: key.0,
                    language: key.1,
                });
            }
            map.insert(key, rule);
        }
        Ok((
            TechniqueRuleSet {
                rules: map,
                min_matches,
                saturation,
            },
            warnings,
        ))
    }

    pub fn min_matches(&self) -> usize {
        self.min_matches
    }

    pub fn saturation(&self) -> usize {
        self.saturation
    }

    pub fn rule(&self, technique_id: &TechniqueId, language: &str) -> Option<&TechniqueRule> {
        self.rules
            .get(&(technique_id.clone(), language.to_string()))
    }

    /// Rules for one language, in technique-id order.
    pub fn rules_for_language<'a>(
        &'a self,
        language: &'a str,
    ) -> impl Iterator<Item = &'a TechniqueRule> {
        self.rules
            .values()
            .filter(move |r| r.language == language)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TechniqueRule> {
        self.rules.values()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

#[derive(Deserialize)]
struct RawRuleFile {
    #[serde(default = "default_min_matches")]
    min_matches: usize,
    #[serde(default = "default_saturation")]
    saturation: usize,
    rules: Vec<RawRule>,
}

fn default_min_matches() -> usize {
    DEFAULT_MIN_MATCHES
}

fn default_saturation() -> usize {
    DEFAULT_SATURATION
}

#[derive(Deserialize)]
struct RawRule {
    technique_id: String,
    language: String,
    keywords: Vec<String>,
}

/// Loads a rule set from a JSON file, returning curation warnings
/// alongside (empty when every rule holds 15–20 keywords).
pub fn load_rules(path: &Path) -> Result<(TechniqueRuleSet, Vec<RuleWarning>), RulesError> {
    let bytes = std::fs::read(path).map_err(|source| RulesError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: RawRuleFile = serde_json::from_slice(&bytes).map_err(|source| RulesError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rules = Vec::with_capacity(raw.rules.len());
    for r in raw.rules {
        let technique_id = TechniqueId::new(&r.technique_id)?;
        rules.push(TechniqueRule::new(technique_id, &r.language, &r.keywords)?);
    }
    TechniqueRuleSet::new(rules, raw.min_matches, raw.saturation)
}

/// One technique label assigned to one document, with the evidence that
/// produced it. The score doubles as the confidence weight of the
/// document–technique edge in the knowledge graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub doc_id: String,
    pub technique_id: TechniqueId,
    /// In (0, 1]: `min(1, unique_matches / saturation)`.
    pub score: f64,
    /// Normalized keyword phrases of the rule that occur in the document,
    /// in rule order.
    pub matched_keywords: Vec<String>,
}

/// First token offset of `phrase` as a contiguous subsequence of `tokens`.
fn find_phrase(tokens: &[String], phrase: &[String]) -> Option<usize> {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return None;
    }
    tokens
        .windows(phrase.len())
        .position(|window| window == phrase)
}

/// Classifies a document against the rules of its own language.
///
/// Output is sorted by (score descending, technique id ascending) and is
/// deterministic. A language with no rules at all is an error — that is a
/// rule-coverage gap, not an empty label set.
pub fn classify(
    doc: &Document,
    rules: &TechniqueRuleSet,
) -> Result<Vec<Classification>, RulesError> {
    let mut any_rule = false;
    let tokens = tokenize(&normalize_text(&doc.body));
    let mut out = Vec::new();
    for rule in rules.rules_for_language(&doc.language) {
        any_rule = true;
        let matched: Vec<String> = rule
            .keyword_tokens
            .iter()
            .zip(&rule.keywords)
            .filter(|(phrase, _)| find_phrase(&tokens, phrase).is_some())
            .map(|(_, keyword)| keyword.clone())
            .collect();
        if matched.len() >= rules.min_matches {
            let score = 1f64.min(matched.len() as f64 / rules.saturation as f64);
            out.push(Classification {
                doc_id: doc.doc_id.clone(),
                technique_id: rule.technique_id.clone(),
                score,
                matched_keywords: matched,
            });
        }
    }
    if !any_rule {
        return Err(RulesError::NoRulesForLanguage {
            language: doc.language.clone(),
        });
    }
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.technique_id.cmp(&b.technique_id))
    });
    Ok(out)
}

/// Where one matched keyword first occurs in the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationEntry {
    pub keyword: String,
    /// Offset into the normalized, tokenized document.
    pub token_offset: usize,
}

/// Human-readable evidence record for one classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub doc_id: String,
    pub technique_id: TechniqueId,
    pub entries: Vec<ExplanationEntry>,
}

/// Re-derives the evidence behind a classification: every matched keyword
/// with its first match position in the document. Deterministic.
pub fn explain(
    doc: &Document,
    classification: &Classification,
    rules: &TechniqueRuleSet,
) -> Result<Explanation, RulesError> {
    let rule = rules
        .rule(&classification.technique_id, &doc.language)
        .ok_or_else(|| RulesError::TechniqueNotInRules {
            technique_id: classification.technique_id.clone(),
            language: doc.language.clone(),
        })?;
    if classification.matched_keywords.is_empty() {
        return Err(RulesError::EmptyMatchedKeywords {
            technique_id: classification.technique_id.clone(),
        });
    }
    let tokens = tokenize(&normalize_text(&doc.body));
    let mut entries = Vec::with_capacity(classification.matched_keywords.len());
    for keyword in &classification.matched_keywords {
        let idx = rule
            .keywords
            .iter()
            .position(|k| k == keyword)
            .ok_or_else(|| RulesError::KeywordNotInRule {
                technique_id: classification.technique_id.clone(),
                keyword: keyword.clone(),
            })?;
        let offset = find_phrase(&tokens, &rule.keyword_tokens[idx]).ok_or_else(|| {
            RulesError::KeywordNotInDocument {
                doc_id: doc.doc_id.clone(),
                keyword: keyword.clone(),
            }
        })?;
        entries.push(ExplanationEntry {
            keyword: keyword.clone(),
            token_offset: offset,
        });
    }
    Ok(Explanation {
        doc_id: doc.doc_id.clone(),
        technique_id: classification.technique_id.clone(),
        entries,
    })
}
