//! Inverted-file index: spherical k-means over the entry vectors, then
//! each query scans only the lists of its closest centroids.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::embed::dot_f32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnParams {
    /// Number of inverted lists; defaults to `sqrt(entries)`.
    pub lists: Option<usize>,
    /// Lists scanned per query; defaults to a third of the lists.
    pub probes: Option<usize>,
    pub iterations: usize,
    /// Training points per list.
    pub sample_per_list: usize,
    /// Lists each entry is stored in: its closest centroids.
    pub spill: usize,
    pub seed: u64,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self {
            lists: None,
            probes: None,
            iterations: 8,
            sample_per_list: 48,
            spill: 2,
            seed: 0x5eed_f1c7,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Ivf {
    dim: usize,
    centroids: Vec<f32>,
    lists: Vec<Vec<u32>>,
    probes: usize,
}

fn nearest(centroids: &[f32], dim: usize, v: &[f32]) -> usize {
    let mut best = (0usize, f32::NEG_INFINITY);
    for (i, c) in centroids.chunks_exact(dim).enumerate() {
        let s = dot_f32(c, v);
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// The `k` closest centroids, best first.
fn nearest_k(centroids: &[f32], dim: usize, v: &[f32], k: usize) -> Vec<usize> {
    let mut best: Vec<(f32, usize)> = Vec::with_capacity(k + 1);
    for (i, c) in centroids.chunks_exact(dim).enumerate() {
        let s = dot_f32(c, v);
        if best.len() < k || s > best[best.len() - 1].0 {
            let at = best.partition_point(|&(b, _)| b >= s);
            best.insert(at, (s, i));
            best.truncate(k);
        }
    }
    best.into_iter().map(|(_, i)| i).collect()
}

impl Ivf {
    pub fn train(vectors: &[f32], dim: usize, params: &AnnParams) -> Self {
        let n = vectors.len() / dim;
        let row = |i: usize| &vectors[i * dim..(i + 1) * dim];
        let lists = params
            .lists
            .unwrap_or_else(|| (n as f64).sqrt().round() as usize)
            .clamp(1, n.max(1));
        let probes = params
            .probes
            .unwrap_or_else(|| lists.div_ceil(3))
            .clamp(1, lists);

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let sample: Vec<usize> = order
            .iter()
            .copied()
            .take((lists * params.sample_per_list).max(lists))
            .collect();

        let mut centroids: Vec<f32> = Vec::with_capacity(lists * dim);
        for &i in sample.iter().take(lists) {
            centroids.extend_from_slice(row(i));
        }
        if n == 0 {
            centroids.resize(dim, 0.0);
        }

        for _ in 0..params.iterations {
            let assign: Vec<usize> = sample
                .par_iter()
                .map(|&i| nearest(&centroids, dim, row(i)))
                .collect();
            let mut sums = vec![0f64; lists * dim];
            let mut counts = vec![0usize; lists];
            for (&i, &c) in sample.iter().zip(&assign) {
                counts[c] += 1;
                for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                    *s += f64::from(x);
                }
            }
            for c in 0..lists {
                if counts[c] == 0 {
                    continue;
                }
                let sum = &sums[c * dim..(c + 1) * dim];
                let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (dst, &s) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(sum) {
                        *dst = (s / norm) as f32;
                    }
                }
            }
        }

        let spill = params.spill.clamp(1, lists);
        let assign: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| nearest_k(&centroids, dim, row(i), spill))
            .collect();
        let mut inverted = vec![Vec::new(); lists];
        for (i, cs) in assign.into_iter().enumerate() {
            for c in cs {
                inverted[c].push(i as u32);
            }
        }
        Self {
            dim,
            centroids,
            lists: inverted,
            probes,
        }
    }

    pub fn list_count(&self) -> usize {
        self.lists.len()
    }

    /// Distinct entry ids in the lists closest to `query`, ascending.
    pub fn candidates(&self, query: &[f32]) -> Vec<u32> {
        let mut scored: Vec<(f32, usize)> = self
            .centroids
            .chunks_exact(self.dim)
            .map(|c| dot_f32(c, query))
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        let probes = self.probes.min(scored.len());
        if probes < scored.len() {
            scored
                .select_nth_unstable_by(probes - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            scored.truncate(probes);
        }
        let mut out: Vec<u32> = scored
            .into_iter()
            .flat_map(|(_, l)| self.lists[l].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}
