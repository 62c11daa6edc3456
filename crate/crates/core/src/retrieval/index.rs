//! Persisted fact-label embeddings and top-k search.
//!
//! Every entry is one embedded label string tagged with the language group
//! it stands for. Which entries take part in a query, and how they combine,
//! depends on the strategy and the sentence language:
//!
//! | strategy    | entries per fact                      | used for text language `tl`   |
//! |-------------|---------------------------------------|-------------------------------|
//! | El          | `en`                                  | `en`                          |
//! | Tl          | one per language                      | `tl`                          |
//! | ETl-Concat  | `en`, plus `en || l` tagged `l`       | `tl` if present, else `en`    |
//! | ETl-Max/Sum | one per language                      | `en` and `tl`, aggregated     |
//! | All-Concat  | all languages joined, tagged `*`      | `*`                           |
//! | All-Max/Sum | one per language                      | all, aggregated               |

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::ann::{AnnParams, Ivf};
use super::embed::{dot, Embedder};
use super::{Combine, LabelMode, LabelStrategy, RetrievalError};
use crate::binio::{FormatError, Reader, Writer};
use crate::kg::{FactId, KnowledgeGraph, ENGLISH};
use crate::text::LIST_JOINER;

const MAGIC: &str = "FIDX";
const VERSION: u32 = 1;
const ALL_TAG: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    #[default]
    Exact,
    Approximate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredFact {
    pub fact: FactId,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Skip,
    Use,
    /// Preferred single entry (ETl-Concat text-language entry).
    Primary,
    /// Used only when the fact has no primary entry.
    Fallback,
}

#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    dim: usize,
    strategy: LabelStrategy,
    embedder_id: u64,
    vectors: Vec<f32>,
    entry_fact: Vec<u32>,
    entry_tag: Vec<u16>,
    facts: Vec<FactId>,
    tags: Vec<String>,
    ann: Option<Ivf>,
}

impl PartialEq for EmbeddingIndex {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

/// `(tag, text)` entries one fact contributes to the index.
fn index_entries(
    kg: &KnowledgeGraph,
    position: usize,
    strategy: LabelStrategy,
) -> Vec<(String, String)> {
    let languages = kg.label_languages_at(position);
    let label = |l: &str| kg.label_at(position, l).map(|x| x.text);
    match (strategy.mode, strategy.combine) {
        (LabelMode::El, _) => label(ENGLISH)
            .map(|t| vec![(ENGLISH.to_string(), t)])
            .unwrap_or_default(),
        (LabelMode::All, Combine::Concat) => {
            let all: Vec<String> = languages.iter().filter_map(|l| label(l)).collect();
            if all.is_empty() {
                Vec::new()
            } else {
                vec![(ALL_TAG.to_string(), all.join(LIST_JOINER))]
            }
        }
        (LabelMode::ETl, Combine::Concat) => {
            let english = label(ENGLISH);
            let mut out = Vec::new();
            if let Some(en) = &english {
                out.push((ENGLISH.to_string(), en.clone()));
            }
            for l in languages.iter().filter(|&&l| l != ENGLISH) {
                if let Some(t) = label(l) {
                    let text = match &english {
                        Some(en) => format!("{en}{LIST_JOINER}{t}"),
                        None => t,
                    };
                    out.push((l.to_string(), text));
                }
            }
            out
        }
        // Tl and the per-language Max/Sum strategies.
        _ => languages
            .iter()
            .filter_map(|l| label(l).map(|t| (l.to_string(), t)))
            .collect(),
    }
}

fn rank_cmp(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Min-heap entry keeping the best `k` `(score, entry)` pairs.
#[derive(PartialEq)]
struct Worst(f64, u32);

impl Eq for Worst {}

impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        // Greater = worse, so the heap top is the weakest kept entry.
        other.0.total_cmp(&self.0).then(self.1.cmp(&other.1))
    }
}

impl EmbeddingIndex {
    /// Embeds every label the strategy needs. Output is independent of the
    /// number of worker threads.
    pub fn build(
        kg: &KnowledgeGraph,
        embedder: &dyn Embedder,
        strategy: LabelStrategy,
    ) -> Result<Self, RetrievalError> {
        let dim = embedder.dim();
        let per_fact: Vec<Vec<(String, Vec<f32>)>> = (0..kg.fact_count())
            .into_par_iter()
            .map(|p| {
                index_entries(kg, p, strategy)
                    .into_iter()
                    .map(|(tag, text)| {
                        let v = embedder.embed(&text);
                        assert_eq!(v.len(), dim, "embedder returned wrong dimension");
                        (tag, v)
                    })
                    .collect()
            })
            .collect();

        let mut tag_ids: HashMap<String, u16> = HashMap::new();
        let mut tags: Vec<String> = Vec::new();
        let total: usize = per_fact.iter().map(Vec::len).sum();
        let mut vectors = Vec::with_capacity(total * dim);
        let mut entry_fact = Vec::with_capacity(total);
        let mut entry_tag = Vec::with_capacity(total);
        for (position, entries) in per_fact.into_iter().enumerate() {
            for (tag, v) in entries {
                let next = tags.len();
                let id = *tag_ids.entry(tag.clone()).or_insert_with(|| {
                    tags.push(tag);
                    next as u16
                });
                vectors.extend_from_slice(&v);
                entry_fact.push(position as u32);
                entry_tag.push(id);
            }
        }
        Ok(Self {
            dim,
            strategy,
            embedder_id: embedder.identity(),
            vectors,
            entry_fact,
            entry_tag,
            facts: kg.facts().iter().map(|f| f.id.clone()).collect(),
            tags,
            ann: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn strategy(&self) -> LabelStrategy {
        self.strategy
    }

    pub fn embedder_identity(&self) -> u64 {
        self.embedder_id
    }

    pub fn entry_count(&self) -> usize {
        self.entry_fact.len()
    }

    pub fn facts(&self) -> &[FactId] {
        &self.facts
    }

    /// Distinct entry tags (language codes, or `*` for All-Concat).
    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// `(fact, tag, vector)` for entry `i`.
    pub fn entry(&self, i: usize) -> (&FactId, &str, &[f32]) {
        (
            &self.facts[self.entry_fact[i] as usize],
            &self.tags[self.entry_tag[i] as usize],
            &self.vectors[i * self.dim..(i + 1) * self.dim],
        )
    }

    /// Builds the inverted-file structure used by approximate search.
    pub fn build_ann(&mut self, params: &AnnParams) {
        self.ann = Some(Ivf::train(&self.vectors, self.dim, params));
    }

    /// Number of inverted lists, when an approximate index is built.
    pub fn ann_lists(&self) -> Option<usize> {
        self.ann.as_ref().map(|a| a.list_count())
    }

    pub fn has_ann(&self) -> bool {
        self.ann.is_some()
    }

    fn check_embedder(&self, embedder: &dyn Embedder) -> Result<(), RetrievalError> {
        if embedder.dim() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                index: self.dim,
                embedder: embedder.dim(),
            });
        }
        if embedder.identity() != self.embedder_id {
            return Err(RetrievalError::StaleIndex {
                index: self.embedder_id,
                embedder: embedder.identity(),
            });
        }
        Ok(())
    }

    pub fn top_k(
        &self,
        embedder: &dyn Embedder,
        text: &str,
        text_language: &str,
        k: usize,
        mode: SearchMode,
    ) -> Result<Vec<ScoredFact>, RetrievalError> {
        self.check_embedder(embedder)?;
        let query = embedder.embed(text);
        self.top_k_vector(&query, text_language, k, mode)
    }

    /// Highest aggregate scores, ties by ascending fact id. Returns fewer
    /// than `k` results when fewer facts are scorable.
    pub fn top_k_vector(
        &self,
        query: &[f32],
        text_language: &str,
        k: usize,
        mode: SearchMode,
    ) -> Result<Vec<ScoredFact>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if query.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                index: self.dim,
                embedder: query.len(),
            });
        }
        let roles = self.roles(text_language);
        let ranked = match mode {
            SearchMode::Exact => {
                let entries = (0..self.entry_count() as u32)
                    .filter(|&e| roles[self.entry_tag[e as usize] as usize] != Role::Skip)
                    .map(|e| (e, self.entry_score(query, e)));
                self.aggregate_dense(entries, &roles, k)
            }
            SearchMode::Approximate => {
                let ivf = self.ann.as_ref().ok_or(RetrievalError::NoAnn)?;
                let fetch = k.saturating_mul(self.tags.len().max(1));
                let mut heap: BinaryHeap<Worst> = BinaryHeap::with_capacity(fetch + 1);
                for e in ivf.candidates(query) {
                    if roles[self.entry_tag[e as usize] as usize] == Role::Skip {
                        continue;
                    }
                    let s = self.entry_score(query, e);
                    if heap.len() < fetch {
                        heap.push(Worst(s, e));
                    } else if let Some(top) = heap.peek() {
                        if Worst(s, e) < *top {
                            heap.pop();
                            heap.push(Worst(s, e));
                        }
                    }
                }
                let mut fetched: Vec<(u32, f64)> = heap.into_iter().map(|w| (w.1, w.0)).collect();
                fetched.sort_unstable_by_key(|&(e, _)| e);
                self.aggregate_sparse(fetched, &roles, k)
            }
        };
        Ok(ranked
            .into_iter()
            .map(|(score, f)| ScoredFact {
                fact: self.facts[f as usize].clone(),
                score,
            })
            .collect())
    }

    fn entry_score(&self, query: &[f32], e: u32) -> f64 {
        let i = e as usize;
        dot(query, &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    fn roles(&self, text_language: &str) -> Vec<Role> {
        self.tags
            .iter()
            .map(|tag| {
                let tag = tag.as_str();
                match self.strategy.mode {
                    LabelMode::El if tag == ENGLISH => Role::Use,
                    LabelMode::Tl if tag == text_language => Role::Use,
                    LabelMode::ETl if self.strategy.combine == Combine::Concat => {
                        if tag == text_language {
                            Role::Primary
                        } else if tag == ENGLISH {
                            Role::Fallback
                        } else {
                            Role::Skip
                        }
                    }
                    LabelMode::ETl if tag == ENGLISH || tag == text_language => Role::Use,
                    LabelMode::All => Role::Use,
                    _ => Role::Skip,
                }
            })
            .collect()
    }

    fn fold(&self, acc: &mut (f64, f64), role: Role, s: f64) {
        // acc.0: main value, acc.1: fallback; NaN = unset.
        match (self.strategy.combine, role) {
            (_, Role::Fallback) => acc.1 = s,
            (Combine::Sum, _) => acc.0 = if acc.0.is_nan() { s } else { acc.0 + s },
            (Combine::Max, _) => acc.0 = if acc.0.is_nan() { s } else { acc.0.max(s) },
            (Combine::Concat, _) => acc.0 = s,
        }
    }

    fn aggregate_dense(
        &self,
        entries: impl Iterator<Item = (u32, f64)>,
        roles: &[Role],
        k: usize,
    ) -> Vec<(f64, u32)> {
        let mut acc = vec![(f64::NAN, f64::NAN); self.facts.len()];
        for (e, s) in entries {
            let role = roles[self.entry_tag[e as usize] as usize];
            self.fold(&mut acc[self.entry_fact[e as usize] as usize], role, s);
        }
        let scored = acc
            .into_iter()
            .enumerate()
            .filter_map(|(f, (main, fallback))| {
                let s = if main.is_nan() { fallback } else { main };
                (!s.is_nan()).then_some((s, f as u32))
            });
        select_top(scored.collect(), k)
    }

    fn aggregate_sparse(
        &self,
        entries: Vec<(u32, f64)>,
        roles: &[Role],
        k: usize,
    ) -> Vec<(f64, u32)> {
        let mut acc: HashMap<u32, (f64, f64)> = HashMap::new();
        for (e, s) in entries {
            let role = roles[self.entry_tag[e as usize] as usize];
            let slot = acc
                .entry(self.entry_fact[e as usize])
                .or_insert((f64::NAN, f64::NAN));
            self.fold(slot, role, s);
        }
        let scored = acc.into_iter().filter_map(|(f, (main, fallback))| {
            let s = if main.is_nan() { fallback } else { main };
            (!s.is_nan()).then_some((s, f))
        });
        select_top(scored.collect(), k)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC.as_bytes());
        w.u32(VERSION);
        w.u32(self.dim as u32);
        w.u64(self.entry_count() as u64);
        w.u8(self.strategy.tag());
        w.u64(self.embedder_id);
        for &x in &self.vectors {
            w.f32(x);
        }
        w.u64(self.facts.len() as u64);
        for f in &self.facts {
            w.str(f.as_str());
        }
        w.u64(self.tags.len() as u64);
        for t in &self.tags {
            w.str(t);
        }
        for (&f, &t) in self.entry_fact.iter().zip(&self.entry_tag) {
            w.u32(f);
            w.u16(t);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RetrievalError> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(FormatError::Version(version).into());
        }
        let dim = r.u32()? as usize;
        let entries = r.len()?;
        let strategy_tag = r.u8()?;
        let strategy = LabelStrategy::from_tag(strategy_tag)
            .ok_or_else(|| FormatError::Corrupt(format!("strategy tag {strategy_tag}")))?;
        let embedder_id = r.u64()?;
        let vectors = r.f32s(entries.checked_mul(dim).ok_or(FormatError::Truncated)?)?;
        let fact_count = r.len()?;
        let facts = (0..fact_count)
            .map(|_| r.str().map(FactId::new))
            .collect::<Result<Vec<_>, _>>()?;
        let tag_count = r.len()?;
        let tags = (0..tag_count)
            .map(|_| r.str())
            .collect::<Result<Vec<_>, _>>()?;
        let mut entry_fact = Vec::with_capacity(entries);
        let mut entry_tag = Vec::with_capacity(entries);
        for _ in 0..entries {
            let f = r.u32()?;
            let t = r.u16()?;
            if f as usize >= facts.len() || t as usize >= tags.len() {
                return Err(FormatError::Corrupt("payload out of range".into()).into());
            }
            entry_fact.push(f);
            entry_tag.push(t);
        }
        r.finish()?;
        Ok(Self {
            dim,
            strategy,
            embedder_id,
            vectors,
            entry_fact,
            entry_tag,
            facts,
            tags,
            ann: None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        fs::write(path, self.to_bytes()).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let bytes = fs::read(path).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

fn select_top(mut scored: Vec<(f64, u32)>, k: usize) -> Vec<(f64, u32)> {
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_cmp);
    scored
}
