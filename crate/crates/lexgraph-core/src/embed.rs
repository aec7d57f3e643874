//! Deterministic text embeddings and cosine similarity.
//!
//! The built-in [`HashEmbedder`] uses signed feature hashing over token
//! unigrams and bigrams with a fixed-seed FNV-1a hash: no model weights,
//! no external calls, and the same text embeds to the same vector in any
//! process on any platform. A neural embedder can be plugged in over HTTP
//! via [`RemoteEmbedder`] without touching anything downstream.

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_text, tokenize};

/// Default embedding dimension.
pub const DEFAULT_DIMENSION: usize = 256;

/// Fixed seed for the built-in hashing embedder ("lexgraph" in ASCII).
pub const DEFAULT_SEED: u64 = 0x6C65_7867_7261_7068;

/// Environment variable naming an external embedder endpoint.
pub const EMBED_URL_ENV: &str = "LEXGRAPH_EMBED_URL";

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedder request to {url} failed: {message}")]
    Http { url: String, message: String },
    #[error("embedder response from {url} is invalid: {message}")]
    BadResponse { url: String, message: String },
}

/// A unit-L2-norm real vector, or the zero vector for empty text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn zero(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    /// L2-normalizes accumulated feature counts; an all-zero input stays
    /// the zero vector.
    pub fn from_accumulated(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            EmbeddingVector(values)
        } else {
            EmbeddingVector(values.into_iter().map(|v| v / norm).collect())
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity in [-1, 1]; zero vectors compare as 0 (neutral
/// relevance, keeping NaN out of downstream rewards).
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let norm_a = a.l2_norm();
    let norm_b = b.l2_norm();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

/// A deterministic text embedder: the same text must always produce the
/// same vector, in every process.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Signed feature hashing over token unigrams and bigrams.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dimension: DEFAULT_DIMENSION,
            seed: DEFAULT_SEED,
        }
    }
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        HashEmbedder { dimension, seed }
    }
}

/// Seeded FNV-1a over the feature bytes.
fn fnv1a_seeded(seed: u64, bytes: &[u8]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = FNV_OFFSET ^ seed;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let tokens = tokenize(&normalize_text(text));
        if tokens.is_empty() {
            return Ok(EmbeddingVector::zero(self.dimension));
        }
        let mut values = vec![0.0f64; self.dimension];
        let mut accumulate = |feature: &str| {
            let hash = fnv1a_seeded(self.seed, feature.as_bytes());
            let bucket = (hash % self.dimension as u64) as usize;
            let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
            values[bucket] += sign;
        };
        for token in &tokens {
            accumulate(token);
        }
        for pair in tokens.windows(2) {
            accumulate(&format!("{} {}", pair[0], pair[1]));
        }
        Ok(EmbeddingVector::from_accumulated(values))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dimension: usize,
}

/// Client for the external embedder contract: HTTP POST of
/// `{"texts": [...]}`, response `{"vectors": [[...], ...], "dimension": D}`.
/// Vectors are checked against the declared dimension and re-normalized.
pub struct RemoteEmbedder {
    url: String,
    dimension: usize,
}

impl RemoteEmbedder {
    /// Connects and verifies the endpoint's dimension by embedding a probe.
    pub fn connect(url: &str) -> Result<Self, EmbedError> {
        let vectors = post_embed(url, &["dimension probe"])?;
        let dimension = vectors
            .first()
            .map(EmbeddingVector::dimension)
            .ok_or_else(|| EmbedError::BadResponse {
                url: url.to_string(),
                message: "empty vectors array for probe".into(),
            })?;
        Ok(RemoteEmbedder {
            url: url.to_string(),
            dimension,
        })
    }
}

fn post_embed(url: &str, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let request = EmbedRequest {
        texts: texts.to_vec(),
    };
    let mut response = ureq::post(url)
        .send_json(&request)
        .map_err(|e| EmbedError::Http {
            url: url.to_string(),
            message: e.to_string(),
        })?;
    let body: EmbedResponse =
        response
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::BadResponse {
                url: url.to_string(),
                message: e.to_string(),
            })?;
    if body.vectors.len() != texts.len() {
        return Err(EmbedError::BadResponse {
            url: url.to_string(),
            message: format!(
                "expected {} vectors, got {}",
                texts.len(),
                body.vectors.len()
            ),
        });
    }
    body.vectors
        .into_iter()
        .map(|v| {
            if v.len() != body.dimension {
                return Err(EmbedError::BadResponse {
                    url: url.to_string(),
                    message: format!(
                        "vector length {} disagrees with declared dimension {}",
                        v.len(),
                        body.dimension
                    ),
                });
            }
            Ok(EmbeddingVector::from_accumulated(v))
        })
        .collect()
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let vectors = post_embed(&self.url, texts)?;
        for v in &vectors {
            if v.dimension() != self.dimension {
                return Err(EmbedError::DimensionMismatch {
                    left: v.dimension(),
                    right: self.dimension,
                });
            }
        }
        Ok(vectors)
    }
}

/// The embedder selected by `LEXGRAPH_EMBED_URL`: remote when set, the
/// built-in hashing embedder otherwise.
pub fn embedder_from_env() -> Result<Box<dyn Embedder>, EmbedError> {
    match std::env::var(EMBED_URL_ENV) {
        Ok(url) if !url.is_empty() => Ok(Box::new(RemoteEmbedder::connect(&url)?)),
        _ => Ok(Box::new(HashEmbedder::default())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn embedding_is_deterministic() {
        let e = HashEmbedder::default();
        for text in ["phishing email", "sécurité des réseaux", "a b c d e"] {
            assert_eq!(e.embed(text).unwrap(), e.embed(text).unwrap());
        }
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let e = HashEmbedder::default();
        let v = e.embed("").unwrap();
        assert!(v.is_zero());
        assert_eq!(v.dimension(), DEFAULT_DIMENSION);
        assert!(e.embed("  \t ").unwrap().is_zero());
    }

    #[test]
    fn single_token_matches_hand_computed_hash() {
        // Independent recomputation of the scheme for a one-feature text:
        // FNV-1a with the fixed seed, bucket = hash mod D, sign from the
        // high bit, unit norm.
        let e = HashEmbedder::default();
        let v = e.embed("phishing").unwrap();

        let mut hash: u64 = 0xcbf2_9ce4_8422_2325 ^ DEFAULT_SEED;
        for &b in b"phishing" {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        let bucket = (hash % DEFAULT_DIMENSION as u64) as usize;
        let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
        for (i, &value) in v.values().iter().enumerate() {
            if i == bucket {
                assert!((value - sign).abs() < 1e-12);
            } else {
                assert_eq!(value, 0.0);
            }
        }
    }

    #[test]
    fn embedding_ignores_case_and_accents() {
        let e = HashEmbedder::default();
        assert_eq!(
            e.embed("Sécurité des réseaux").unwrap(),
            e.embed("securite des reseaux").unwrap()
        );
    }

    #[test]
    fn cosine_of_identical_vector_is_one() {
        let e = HashEmbedder::default();
        let v = e.embed("remote services access token").unwrap();
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn cosine_of_disjoint_basis_vectors_is_zero() {
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        a[0] = 1.0;
        b[3] = 1.0;
        let a = EmbeddingVector::from_accumulated(a);
        let b = EmbeddingVector::from_accumulated(b);
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_orders_overlapping_above_disjoint() {
        let e = HashEmbedder::default();
        let query = e.embed("remote services").unwrap();
        let near = e.embed("remote services access").unwrap();
        let far = e.embed("budget report").unwrap();
        assert!(cosine(&query, &near).unwrap() > cosine(&query, &far).unwrap());
    }

    #[test]
    fn cosine_with_zero_vector_is_zero() {
        let e = HashEmbedder::default();
        let v = e.embed("phishing").unwrap();
        let z = EmbeddingVector::zero(DEFAULT_DIMENSION);
        assert_eq!(cosine(&v, &z).unwrap(), 0.0);
        assert_eq!(cosine(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn cosine_dimension_mismatch_is_error() {
        let a = EmbeddingVector::zero(8);
        let b = EmbeddingVector::zero(16);
        assert!(matches!(
            cosine(&a, &b).unwrap_err(),
            EmbedError::DimensionMismatch { left: 8, right: 16 }
        ));
    }

    #[test]
    fn disjoint_fixture_texts_stay_under_collision_bound() {
        let e = HashEmbedder::default();
        let pairs = [
            ("phishing spearphishing email", "kubernetes cluster deployment"),
            ("remote services access", "olive oil tariff schedule"),
            ("exploit public facing application", "annual budget projection"),
            ("access token manipulation", "maritime fishing quota"),
        ];
        for (left, right) in pairs {
            let c = cosine(&e.embed(left).unwrap(), &e.embed(right).unwrap())
                .unwrap()
                .abs();
            assert!(c < 0.3, "collision noise {c} too high for {left:?} vs {right:?}");
        }
    }

    proptest! {
        #[test]
        fn vectors_are_unit_norm_or_zero(text in "\\PC{0,80}") {
            let e = HashEmbedder::default();
            let v = e.embed(&text).unwrap();
            if !v.is_zero() {
                prop_assert!((v.l2_norm() - 1.0).abs() <= 1e-6);
            }
        }

        #[test]
        fn cosine_is_symmetric_and_bounded(a in "[a-z ]{0,40}", b in "[a-z ]{0,40}") {
            let e = HashEmbedder::default();
            let va = e.embed(&a).unwrap();
            let vb = e.embed(&b).unwrap();
            let ab = cosine(&va, &vb).unwrap();
            let ba = cosine(&vb, &va).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
