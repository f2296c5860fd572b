use super::{EmbeddingProvider, ProviderError, ProviderIdentity};

const DEFAULT_SEED: u64 = 0x5eed_1a6f_a3c1_0001;
const NGRAM: usize = 3;

/// Offline embedder: bag of hashed character trigrams, signed-hashed into a
/// fixed number of buckets and L2-normalized.
///
/// Identical text always yields identical vectors, and texts sharing many
/// trigrams land close together.
#[derive(Debug, Clone)]
pub struct LocalEmbedder {
    dim: usize,
    seed: u64,
}

impl LocalEmbedder {
    pub fn new(dim: usize) -> Self {
        Self::with_seed(dim, DEFAULT_SEED)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        LocalEmbedder { dim, seed }
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = vec![0.0; self.dim];
        let mut add = |gram: &[char]| {
            let h = self.hash(gram);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            out[bucket] += sign;
        };
        if chars.len() < NGRAM {
            add(&chars);
        } else {
            chars.windows(NGRAM).for_each(&mut add);
        }
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|x| *x /= norm);
        }
        out
    }

    /// Seeded FNV-1a over the UTF-8 bytes of the gram, then a final mix so
    /// the top bit is usable as a sign.
    fn hash(&self, gram: &[char]) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ self.seed;
        let mut buf = [0u8; 4];
        for c in gram {
            for b in c.encode_utf8(&mut buf).bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h ^= h >> 33;
        h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
        h ^= h >> 33;
        h
    }
}

impl EmbeddingProvider for LocalEmbedder {
    fn identity(&self) -> ProviderIdentity {
        ProviderIdentity {
            name: "local".into(),
            model: format!("char3-hash-{:016x}", self.seed),
            dim: self.dim,
        }
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed(t)).collect())
    }
}
