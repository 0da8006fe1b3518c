use serde::{Deserialize, Serialize};

use super::FeatureVector;
use crate::error::{invalid, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub dim: usize,
    #[serde(default = "default_lowercase")]
    pub lowercase: bool,
}

fn default_lowercase() -> bool {
    true
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            dim: 1024,
            lowercase: true,
        }
    }
}

/// 64-bit FNV-1a over the UTF-8 bytes of `token`.
pub fn fnv1a_64(token: &str) -> u64 {
    token.bytes().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Maximal runs of alphanumeric characters.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

/// Hashed bag-of-words counts. Bucket collisions are not resolved.
pub fn featurize(text: &str, config: &FeaturizerConfig) -> Result<FeatureVector> {
    if config.dim < 2 {
        return Err(invalid(format!("featurizer dim must be >= 2, got {}", config.dim)));
    }
    let mut counts = vec![0.0; config.dim];
    for token in tokenize(text, config.lowercase) {
        let bucket = (fnv1a_64(&token) % config.dim as u64) as usize;
        counts[bucket] += 1.0;
    }
    FeatureVector::new(counts)
}
