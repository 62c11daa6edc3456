use crate::text::normalize;

/// Maps text to a unit vector of fixed dimension.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// Hash of the embedder configuration, stored in index artifacts so a
    /// query with a different embedder is refused.
    fn identity(&self) -> u64;

    fn embed(&self, text: &str) -> Vec<f32>;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Signed feature hashing of character n-grams of the normalized text.
///
/// Each n-gram's UTF-8 bytes are hashed with 64-bit FNV-1a; the bucket is
/// `hash % dim` and bit 63 picks the sign. Counts are accumulated as
/// integers and L2-normalized at the end. Text without any n-gram maps to
/// the first basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
    ngram: usize,
}

impl HashEmbedder {
    pub const DEFAULT_DIM: usize = 256;
    pub const DEFAULT_NGRAM: usize = 3;

    pub fn new(dim: usize) -> Self {
        Self::with_ngram(dim, Self::DEFAULT_NGRAM)
    }

    pub fn with_ngram(dim: usize, ngram: usize) -> Self {
        assert!(
            dim > 0 && ngram > 0,
            "dimension and n-gram size must be positive"
        );
        Self { dim, ngram }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> u64 {
        fnv1a64(format!("hash-ngram/v1/dim={}/n={}", self.dim, self.ngram).as_bytes())
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        let chars: Vec<char> = normalize(text).chars().collect();
        let mut counts = vec![0i64; self.dim];
        let mut gram = String::new();
        for window in chars.windows(self.ngram) {
            gram.clear();
            gram.extend(window);
            let h = fnv1a64(gram.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            if h >> 63 == 1 {
                counts[bucket] -= 1;
            } else {
                counts[bucket] += 1;
            }
        }
        let norm = counts.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        let mut out = vec![0f32; self.dim];
        if norm == 0.0 {
            out[0] = 1.0;
        } else {
            for (o, &c) in out.iter_mut().zip(&counts) {
                *o = (c as f64 / norm) as f32;
            }
        }
        out
    }
}

/// Dot product accumulated in f64.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; 4];
    let mut xa = a.chunks_exact(4);
    let mut xb = b.chunks_exact(4);
    for (x, y) in (&mut xa).zip(&mut xb) {
        for i in 0..4 {
            acc[i] += f64::from(x[i]) * f64::from(y[i]);
        }
    }
    let tail: f64 = xa
        .remainder()
        .iter()
        .zip(xb.remainder())
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Single-precision dot for coarse ANN routing.
pub(crate) fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let mut xa = a.chunks_exact(8);
    let mut xb = b.chunks_exact(8);
    for (x, y) in (&mut xa).zip(&mut xb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f32 = xa
        .remainder()
        .iter()
        .zip(xb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    acc.iter().sum::<f32>() + tail
}
