#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use factlink::decoder::{ScorerError, ScoringStep, SequenceScorer};
use factlink::eval::GoldExample;
use factlink::kg::{self, LabelConfig, ENGLISH};
use factlink::retrieval::{dot, Combine, Embedder, LabelMode, LabelStrategy, ScoredFact};
use factlink::{FactId, KnowledgeGraph, TokenId};

pub const LANGS: [&str; 7] = ["en", "hi", "te", "ta", "ur", "gu", "as"];

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn load_fixture_kg(name: &str) -> KnowledgeGraph {
    let dir = fixture_dir(name);
    kg::load_kg(
        &dir.join("entities.jsonl"),
        &dir.join("relations.jsonl"),
        &dir.join("facts.jsonl"),
        LabelConfig::default(),
    )
    .unwrap()
}

const SYLLABLES: [&str; 24] = [
    "ka", "ri", "so", "na", "te", "lu", "mo", "pa", "vi", "de", "ga", "ro", "shi", "an", "el",
    "ur", "bo", "ni", "ta", "ze", "qu", "ly", "fa", "ho",
];

pub fn word<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=3);
    (0..n)
        .map(|_| *SYLLABLES.choose(rng).unwrap())
        .collect::<String>()
}

pub fn phrase<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words);
    (0..n).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy)]
pub struct KgShape {
    pub facts: usize,
    /// Probability that a non-English language labels an item.
    pub other_language_rate: f64,
    /// Probability that an item lacks an English label.
    pub missing_english_rate: f64,
    /// Force distinct English labels for entities and relations.
    pub unique_labels: bool,
}

impl KgShape {
    pub fn english(facts: usize) -> Self {
        Self {
            facts,
            other_language_rate: 0.0,
            missing_english_rate: 0.0,
            unique_labels: false,
        }
    }

    pub fn multilingual(facts: usize) -> Self {
        Self {
            facts,
            other_language_rate: 0.4,
            missing_english_rate: 0.05,
            unique_labels: false,
        }
    }
}

fn labels_for<R: Rng>(rng: &mut R, english: String, shape: &KgShape) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if !rng.gen_bool(shape.missing_english_rate) {
        out.push((ENGLISH.to_string(), english.clone()));
    }
    for lang in &LANGS[1..] {
        if rng.gen_bool(shape.other_language_rate) {
            out.push((lang.to_string(), format!("{lang}{} {}", english, word(rng))));
        }
    }
    if out.is_empty() {
        out.push((ENGLISH.to_string(), english));
    }
    out
}

/// Random KG with roughly `facts` facts (fewer when triples collide).
pub fn random_kg<R: Rng>(rng: &mut R, shape: KgShape) -> KnowledgeGraph {
    let n_entities = (shape.facts / 2).max(4);
    let n_relations = (shape.facts / 10).clamp(2, 200);
    let mut b = KnowledgeGraph::builder();
    let mut seen = HashSet::new();
    let mut fresh = |rng: &mut R, i: usize, max_words| {
        if shape.unique_labels {
            loop {
                let p = format!("{} {}", phrase(rng, max_words), to_word(i));
                if seen.insert(p.clone()) {
                    return p;
                }
            }
        } else {
            phrase(rng, max_words)
        }
    };
    for i in 0..n_entities {
        let en = fresh(rng, i, 3);
        let labels = labels_for(rng, en, &shape);
        b.entity(
            &format!("Q{i}"),
            labels.iter().map(|(l, s)| (l.clone(), s.as_str())),
        )
        .unwrap();
    }
    for i in 0..n_relations {
        let en = fresh(rng, n_entities + i, 2);
        let labels = labels_for(rng, en, &shape);
        b.relation(
            &format!("P{i}"),
            labels.iter().map(|(l, s)| (l.clone(), s.as_str())),
        )
        .unwrap();
    }
    let mut triples = HashSet::new();
    let mut attempts = 0;
    while triples.len() < shape.facts && attempts < shape.facts * 20 {
        attempts += 1;
        let t = (
            rng.gen_range(0..n_entities),
            rng.gen_range(0..n_relations),
            rng.gen_range(0..n_entities),
        );
        if triples.insert(t) {
            b.fact(
                &format!("F{}", triples.len()),
                &format!("Q{}", t.0),
                &format!("P{}", t.1),
                &format!("Q{}", t.2),
            )
            .unwrap();
        }
    }
    b.build()
}

/// Base-26 letters, so unique suffixes stay single tokens.
pub fn to_word(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'a' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    format!("x{s}")
}

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic pseudo-random scorer. A token's score depends on the
/// seed, the decoded prefix and the token string only, in multiples of
/// 1/8 so that exact ties occur.
#[derive(Debug, Clone, Copy)]
pub struct HashScorer {
    pub seed: u64,
}

impl HashScorer {
    pub fn token_score(&self, prefix: &[&str], token: &str) -> f64 {
        let mut h = fnv(0xcbf2_9ce4_8422_2325 ^ self.seed, b"");
        for p in prefix {
            h = fnv(h, p.as_bytes());
            h = fnv(h, &[0xff]);
        }
        h = fnv(h, token.as_bytes());
        -((h % 24) as f64) / 8.0
    }
}

impl SequenceScorer for HashScorer {
    fn score(&self, step: &ScoringStep<'_>) -> Result<Vec<f64>, ScorerError> {
        let prefix = step.vocab.decode(step.prefix);
        Ok(step
            .candidates
            .iter()
            .map(|&c| {
                let tok = if c == TokenId::EOS {
                    "</s>"
                } else {
                    step.vocab.token(c).unwrap_or_default()
                };
                self.token_score(&prefix, tok)
            })
            .collect())
    }
}

/// Gold corpus over `kg` whose texts are unique. Roughly one in ten
/// sentences is NULL-only; the rest carry one or two facts with English
/// labels.
pub fn synthetic_corpus<R: Rng>(
    rng: &mut R,
    kg: &KnowledgeGraph,
    sentences: usize,
) -> Vec<GoldExample> {
    let labelled: Vec<&FactId> = kg
        .facts()
        .iter()
        .map(|f| &f.id)
        .filter(|f| kg.build_label(f, ENGLISH).is_some())
        .collect();
    (0..sentences)
        .map(|i| {
            let gold_facts: Vec<FactId> = if rng.gen_bool(0.1) {
                vec![FactId::null()]
            } else {
                let n = rng.gen_range(1..=2);
                let mut picked: Vec<FactId> = labelled
                    .choose_multiple(rng, n)
                    .map(|f| (*f).clone())
                    .collect();
                picked.sort();
                picked
            };
            let mut words: Vec<String> = gold_facts
                .iter()
                .filter_map(|f| kg.build_label(f, ENGLISH))
                .flat_map(|l| l.parts.into_iter())
                .collect();
            words.push(format!("sentence {}", to_word(i)));
            GoldExample {
                sentence_id: format!("s{i}"),
                lang: ENGLISH.to_string(),
                text: words.join(" "),
                gold_facts,
            }
        })
        .collect()
}

/// Independent restatement of the label expansion rules, over the
/// languages in [`LANGS`].
pub fn oracle_labels(
    kg: &KnowledgeGraph,
    fact: &FactId,
    strategy: LabelStrategy,
    text_language: &str,
) -> Vec<String> {
    // LANGS is already in the fixed language order.
    let langs: Vec<&str> = LANGS
        .into_iter()
        .filter(|l| kg.build_label(fact, l).is_some())
        .filter(|&l| match strategy.mode {
            LabelMode::El => l == ENGLISH,
            LabelMode::Tl => l == text_language,
            LabelMode::ETl => l == ENGLISH || l == text_language,
            LabelMode::All => true,
        })
        .collect();
    let labels: Vec<String> = langs
        .iter()
        .map(|l| kg.build_label(fact, l).unwrap().text)
        .collect();
    if strategy.combine == Combine::Concat && !labels.is_empty() {
        vec![labels.join(" || ")]
    } else {
        labels
    }
}

/// Per-fact label vectors under one strategy and text language, built
/// from [`oracle_labels`].
pub struct OracleEntries {
    pub combine: Combine,
    pub facts: Vec<(FactId, Vec<Vec<f32>>)>,
}

impl OracleEntries {
    pub fn new(
        kg: &KnowledgeGraph,
        embedder: &dyn Embedder,
        cache: &mut HashMap<String, Vec<f32>>,
        strategy: LabelStrategy,
        text_language: &str,
    ) -> Self {
        let facts = kg
            .facts()
            .iter()
            .filter_map(|f| {
                let labels = oracle_labels(kg, &f.id, strategy, text_language);
                if labels.is_empty() {
                    return None;
                }
                let vectors = labels
                    .iter()
                    .map(|l| {
                        cache
                            .entry(l.clone())
                            .or_insert_with(|| embedder.embed(l))
                            .clone()
                    })
                    .collect();
                Some((f.id.clone(), vectors))
            })
            .collect();
        Self {
            combine: strategy.combine,
            facts,
        }
    }

    /// Brute-force top-k: score every fact from scratch and fully sort.
    pub fn top_k(&self, query: &[f32], k: usize) -> Vec<ScoredFact> {
        let mut scored: Vec<ScoredFact> = self
            .facts
            .iter()
            .map(|(id, vectors)| {
                let cosines: Vec<f64> = vectors.iter().map(|v| dot(query, v)).collect();
                let score = match self.combine {
                    Combine::Sum => cosines.iter().sum(),
                    Combine::Max => cosines.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Combine::Concat => cosines[0],
                };
                ScoredFact {
                    fact: id.clone(),
                    score,
                }
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.fact.cmp(&b.fact))
        });
        scored.truncate(k);
        scored
    }
}

/// Equal rankings, allowing swaps only between scores within `eps`.
pub fn same_ranking(a: &[ScoredFact], b: &[ScoredFact], eps: f64) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("lengths differ: {} vs {}", a.len(), b.len()));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if (x.score - y.score).abs() > eps {
            return Err(format!(
                "rank {i}: score {} ({}) vs {} ({})",
                x.score, x.fact, y.score, y.fact
            ));
        }
        if x.fact != y.fact {
            let tied = a
                .iter()
                .chain(b)
                .filter(|s| s.fact == x.fact || s.fact == y.fact)
                .all(|s| (s.score - x.score).abs() <= eps);
            if !tied {
                return Err(format!("rank {i}: {} vs {}", x.fact, y.fact));
            }
        }
    }
    Ok(())
}

/// One label of the exhaustive decoding oracle.
#[derive(Debug, Clone)]
pub struct Enumerated {
    pub tokens: Vec<TokenId>,
    pub score: f64,
    pub ids: Vec<String>,
}

/// Scores every distinct label of `labels` as the sum of its per-token
/// scores plus EOS, then sorts by score and token sequence.
pub fn enumerate_labels(
    trie: &factlink::TokenTrie,
    labels: &[(String, String)],
    scorer: &HashScorer,
) -> Vec<Enumerated> {
    let mut by_tokens: HashMap<Vec<TokenId>, Enumerated> = HashMap::new();
    for (label, id) in labels {
        let pieces = trie.tokenizer().pieces(label);
        let tokens = trie.tokenize(label);
        let entry = by_tokens.entry(tokens.clone()).or_insert_with(|| {
            let refs: Vec<&str> = pieces.iter().map(String::as_str).collect();
            let mut score = 0.0;
            for i in 0..refs.len() {
                score += scorer.token_score(&refs[..i], refs[i]);
            }
            score += scorer.token_score(&refs, "</s>");
            Enumerated {
                tokens,
                score,
                ids: Vec::new(),
            }
        });
        entry.ids.push(id.clone());
    }
    let mut out: Vec<Enumerated> = by_tokens.into_values().collect();
    for e in &mut out {
        e.ids.sort();
        e.ids.dedup();
    }
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    out
}

/// English fact labels plus the NULL label, as fed to the fact trie.
pub fn trie_labels(kg: &KnowledgeGraph) -> Vec<(String, String)> {
    kg.facts()
        .iter()
        .filter_map(|f| kg.build_label(&f.id, ENGLISH))
        .map(|l| (l.text, l.fact.as_str().to_string()))
        .chain(std::iter::once(("None".to_string(), "NULL".to_string())))
        .collect()
}

/// Test-set sentence counts per language of the benchmark corpus.
pub const BENCHMARK_SENTENCES: [(&str, usize); 7] = [
    ("en", 1002),
    ("hi", 889),
    ("te", 888),
    ("ta", 881),
    ("ur", 1001),
    ("gu", 881),
    ("as", 887),
];

/// Gold file with the benchmark's shape: 6,429 sentences and 11,293 gold
/// facts (4,864 sentences with two facts, the rest with one).
pub fn benchmark_shaped_gold() -> Vec<GoldExample> {
    let mut out = Vec::new();
    for (lang, n) in BENCHMARK_SENTENCES {
        for i in 0..n {
            out.push(GoldExample {
                sentence_id: format!("{lang}-{i}"),
                lang: lang.to_string(),
                text: format!("sentence {i}"),
                gold_facts: Vec::new(),
            });
        }
    }
    let total = out.len();
    for (i, ex) in out.iter_mut().enumerate() {
        // Spread the two-fact sentences evenly over the languages.
        let two = (i + 1) * 4864 / total > i * 4864 / total;
        let n = if two { 2 } else { 1 };
        ex.gold_facts = (0..n).map(|j| FactId::new(format!("F{i}-{j}"))).collect();
    }
    out
}
