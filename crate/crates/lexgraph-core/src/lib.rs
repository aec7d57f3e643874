//! Core library for mapping multilingual legal documents to MITRE ATT&CK
//! techniques and retrieving documents from the resulting knowledge graph.
//!
//! The pipeline is built from small, independently usable pieces:
//!
//! - [`corpus`] — manifest loading, text normalization, tokenization
//! - [`rules`] — transparent per-language keyword rules producing
//!   technique classifications with confidence scores
//! - [`graph`] — the document/technique knowledge graph with
//!   confidence-weighted edges, serialization, and GraphML export
//! - [`embed`] — deterministic feature-hashing text embeddings plus a
//!   pluggable HTTP embedder contract
//! - [`retrieve`] — policy-scored beam search over the graph, document
//!   ranking, and REINFORCE policy training
//! - [`judge`] — belief/desire/intention structured verdicts with an
//!   auditable decision trail
//! - [`eval`] — precision/recall/F1 at k, MAP, MRR, and classification
//!   metrics over TREC-format qrels and run files
//!
//! Everything is deterministic given a seed: same inputs, same outputs,
//! byte for byte.

pub mod corpus;
pub mod rules;

pub use corpus::{Corpus, Document};
pub use rules::{Classification, TechniqueId, TechniqueRuleSet};
