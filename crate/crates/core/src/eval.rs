//! Linking metrics: P@1, micro-averaged R@5 and relation-macro P@1.
//!
//! For macroP@1 every example joins one class per distinct relation among
//! its gold facts (NULL gold forms the `NULL` class). A class scores the
//! share of its examples whose rank-1 prediction is a gold fact, and the
//! metric is the unweighted mean over classes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{compare_languages, FactId, RelationId};
use crate::predictions::{PredictionList, PredictionRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldExample {
    pub sentence_id: String,
    pub lang: String,
    pub text: String,
    pub gold_facts: Vec<FactId>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{what} file not found: {path}")]
    Missing { what: &'static str, path: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("sentence {0} has no gold facts")]
    EmptyGold(String),
    #[error("duplicate sentence id {0}")]
    DuplicateSentence(String),
    #[error("predictions reference unknown sentence ids: {}", .0.join(", "))]
    UnknownSentences(Vec<String>),
    #[error("no predictions for sentence ids: {}", .0.join(", "))]
    MissingSentences(Vec<String>),
    #[error("gold fact {0} has no known relation")]
    UnknownGoldFact(FactId),
}

pub fn load_gold(path: &Path) -> Result<Vec<GoldExample>, EvalError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => EvalError::Missing {
            what: "gold",
            path: display.clone(),
        },
        _ => EvalError::Io {
            path: display.clone(),
            source,
        },
    })?;
    read_gold(BufReader::new(file), &display)
}

pub fn read_gold<R: BufRead>(reader: R, name: &str) -> Result<Vec<GoldExample>, EvalError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: name.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: GoldExample = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            path: name.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if ex.gold_facts.is_empty() {
            return Err(EvalError::EmptyGold(ex.sentence_id));
        }
        if !seen.insert(ex.sentence_id.clone()) {
            return Err(EvalError::DuplicateSentence(ex.sentence_id));
        }
        out.push(ex);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricOptions {
    /// Treat an empty prediction list as predicting NULL.
    pub empty_as_null: bool,
}

static EMPTY: PredictionList = PredictionList::EMPTY;

/// Pairs every example with its predictions; examples without a record get
/// an empty list. Records for unknown sentences are an error.
pub fn align<'a>(
    examples: &'a [GoldExample],
    predictions: &'a [PredictionRecord],
) -> Result<Vec<(&'a GoldExample, &'a PredictionList)>, EvalError> {
    let known: HashSet<&str> = examples.iter().map(|e| e.sentence_id.as_str()).collect();
    let unknown: Vec<String> = predictions
        .iter()
        .filter(|r| !known.contains(r.sentence_id.as_str()))
        .map(|r| r.sentence_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownSentences(unknown));
    }
    let by_id: HashMap<&str, &PredictionList> = predictions
        .iter()
        .map(|r| (r.sentence_id.as_str(), &r.predictions))
        .collect();
    Ok(examples
        .iter()
        .map(|e| {
            (
                e,
                by_id.get(e.sentence_id.as_str()).copied().unwrap_or(&EMPTY),
            )
        })
        .collect())
}

/// Sentence ids of `examples` that have no prediction record.
pub fn missing_predictions(
    examples: &[GoldExample],
    predictions: &[PredictionRecord],
) -> Vec<String> {
    let have: HashSet<&str> = predictions.iter().map(|r| r.sentence_id.as_str()).collect();
    examples
        .iter()
        .filter(|e| !have.contains(e.sentence_id.as_str()))
        .map(|e| e.sentence_id.clone())
        .collect()
}

/// Rank-1 fact, `None` for an empty list or an invalid generation.
fn top1(preds: &PredictionList, opts: MetricOptions) -> Option<&FactId> {
    static NULL: std::sync::OnceLock<FactId> = std::sync::OnceLock::new();
    match preds.first() {
        Some(p) => p.target.fact(),
        None if opts.empty_as_null => Some(NULL.get_or_init(FactId::null)),
        None => None,
    }
}

fn hit_at_1(ex: &GoldExample, preds: &PredictionList, opts: MetricOptions) -> bool {
    top1(preds, opts).is_some_and(|f| ex.gold_facts.contains(f))
}

fn distinct_gold(ex: &GoldExample) -> Vec<&FactId> {
    let mut g: Vec<&FactId> = ex.gold_facts.iter().collect();
    g.sort();
    g.dedup();
    g
}

fn hits_at_5(ex: &GoldExample, preds: &PredictionList, opts: MetricOptions) -> usize {
    let top: Vec<&FactId> = if preds.is_empty() {
        top1(preds, opts).into_iter().collect()
    } else {
        preds
            .iter()
            .take(5)
            .filter_map(|p| p.target.fact())
            .collect()
    };
    distinct_gold(ex)
        .into_iter()
        .filter(|g| top.contains(g))
        .count()
}

pub fn p_at_1(pairs: &[(&GoldExample, &PredictionList)], opts: MetricOptions) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs.iter().filter(|(e, p)| hit_at_1(e, p, opts)).count();
    hits as f64 / pairs.len() as f64
}

/// Gold facts found in their example's top 5, over all gold facts.
pub fn r_at_5(pairs: &[(&GoldExample, &PredictionList)], opts: MetricOptions) -> f64 {
    let total: usize = pairs.iter().map(|(e, _)| distinct_gold(e).len()).sum();
    if total == 0 {
        return 0.0;
    }
    let hits: usize = pairs.iter().map(|(e, p)| hits_at_5(e, p, opts)).sum();
    hits as f64 / total as f64
}

pub const NULL_CLASS: &str = "NULL";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCount {
    pub examples: usize,
    pub correct: usize,
}

/// Per-relation example and rank-1 hit counts.
pub fn relation_classes(
    pairs: &[(&GoldExample, &PredictionList)],
    relations: &HashMap<FactId, RelationId>,
    opts: MetricOptions,
) -> Result<BTreeMap<String, ClassCount>, EvalError> {
    let mut classes: BTreeMap<String, ClassCount> = BTreeMap::new();
    for (ex, preds) in pairs {
        let mut names: Vec<&str> = Vec::new();
        for f in &ex.gold_facts {
            let name = if f.is_null() {
                NULL_CLASS
            } else {
                relations
                    .get(f)
                    .ok_or_else(|| EvalError::UnknownGoldFact(f.clone()))?
                    .as_str()
            };
            if !names.contains(&name) {
                names.push(name);
            }
        }
        let hit = hit_at_1(ex, preds, opts);
        for name in names {
            let c = classes.entry(name.to_string()).or_default();
            c.examples += 1;
            c.correct += usize::from(hit);
        }
    }
    Ok(classes)
}

fn macro_from_classes(classes: &BTreeMap<String, ClassCount>) -> f64 {
    let scores: Vec<f64> = classes
        .values()
        .filter(|c| c.examples > 0)
        .map(|c| c.correct as f64 / c.examples as f64)
        .collect();
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

pub fn macro_p_at_1(
    pairs: &[(&GoldExample, &PredictionList)],
    relations: &HashMap<FactId, RelationId>,
    opts: MetricOptions,
) -> Result<f64, EvalError> {
    Ok(macro_from_classes(&relation_classes(
        pairs, relations, opts,
    )?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub examples: usize,
    pub p_at_1: f64,
    pub r_at_5: f64,
    /// Absent when no fact-to-relation map was supplied.
    pub macro_p_at_1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageMetrics {
    pub language: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub languages: Vec<LanguageMetrics>,
    /// Unweighted mean over languages.
    pub average: Metrics,
    pub relation_classes: BTreeMap<String, ClassCount>,
    pub invalid_predictions: usize,
}

fn metrics(
    pairs: &[(&GoldExample, &PredictionList)],
    relations: Option<&HashMap<FactId, RelationId>>,
    opts: MetricOptions,
) -> Result<Metrics, EvalError> {
    Ok(Metrics {
        examples: pairs.len(),
        p_at_1: p_at_1(pairs, opts),
        r_at_5: r_at_5(pairs, opts),
        macro_p_at_1: relations
            .map(|r| macro_p_at_1(pairs, r, opts))
            .transpose()?,
    })
}

pub fn evaluate(
    examples: &[GoldExample],
    predictions: &[PredictionRecord],
    relations: Option<&HashMap<FactId, RelationId>>,
    opts: MetricOptions,
) -> Result<EvalReport, EvalError> {
    let pairs = align(examples, predictions)?;
    let mut by_lang: BTreeMap<&str, Vec<(&GoldExample, &PredictionList)>> = BTreeMap::new();
    for &(e, p) in &pairs {
        by_lang.entry(e.lang.as_str()).or_default().push((e, p));
    }
    let mut langs: Vec<&str> = by_lang.keys().copied().collect();
    langs.sort_by(|a, b| compare_languages(a, b));

    let mut languages = Vec::with_capacity(langs.len());
    for lang in langs {
        languages.push(LanguageMetrics {
            language: lang.to_string(),
            metrics: metrics(&by_lang[lang], relations, opts)?,
        });
    }
    let n = languages.len().max(1) as f64;
    let mean = |f: fn(&Metrics) -> f64| languages.iter().map(|l| f(&l.metrics)).sum::<f64>() / n;
    let average = Metrics {
        examples: pairs.len(),
        p_at_1: mean(|m| m.p_at_1),
        r_at_5: mean(|m| m.r_at_5),
        macro_p_at_1: relations.map(|_| mean(|m| m.macro_p_at_1.unwrap_or(0.0))),
    };
    let relation_classes = match relations {
        Some(r) => relation_classes(&pairs, r, opts)?,
        None => BTreeMap::new(),
    };
    let invalid_predictions = predictions
        .iter()
        .map(|r| r.predictions.invalid_count())
        .sum();
    Ok(EvalReport {
        languages,
        average,
        relation_classes,
        invalid_predictions,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>8} {:>9}",
            "language", "examples", "P@1", "R@5", "macroP@1"
        );
        let rows = self
            .languages
            .iter()
            .map(|l| (l.language.as_str(), &l.metrics))
            .chain(std::iter::once(("Average", &self.average)));
        for (name, m) in rows {
            let _ = writeln!(
                out,
                "{:<10} {:>8} {:>8} {:>8} {:>9}",
                name,
                m.examples,
                cell(Some(m.p_at_1)),
                cell(Some(m.r_at_5)),
                cell(m.macro_p_at_1)
            );
        }
        let _ = writeln!(out, "invalid predictions: {}", self.invalid_predictions);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Side-by-side metrics of two runs with `other - self` deltas.
    pub fn compare_table(&self, other: &EvalReport) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>24} {:>24} {:>24}",
            "language",
            "P@1 (base/other/delta)",
            "R@5 (base/other/delta)",
            "macroP@1 (base/other/delta)"
        );
        let find = |r: &'_ EvalReport, lang: &str| -> Option<Metrics> {
            if lang == "Average" {
                return Some(r.average.clone());
            }
            r.languages
                .iter()
                .find(|l| l.language == lang)
                .map(|l| l.metrics.clone())
        };
        let mut names: Vec<String> = self.languages.iter().map(|l| l.language.clone()).collect();
        for l in &other.languages {
            if !names.contains(&l.language) {
                names.push(l.language.clone());
            }
        }
        names.sort_by(|a, b| compare_languages(a, b));
        names.push("Average".to_string());
        let triple = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => format!("{x:.3}/{y:.3}/{:+.3}", y - x),
            _ => format!("{}/{}/-", cell(a), cell(b)),
        };
        for name in names {
            let a = find(self, &name);
            let b = find(other, &name);
            let _ = writeln!(
                out,
                "{:<10} {:>24} {:>24} {:>24}",
                name,
                triple(a.as_ref().map(|m| m.p_at_1), b.as_ref().map(|m| m.p_at_1)),
                triple(a.as_ref().map(|m| m.r_at_5), b.as_ref().map(|m| m.r_at_5)),
                triple(
                    a.as_ref().and_then(|m| m.macro_p_at_1),
                    b.as_ref().and_then(|m| m.macro_p_at_1)
                ),
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LanguageCount {
    pub language: String,
    pub sentences: usize,
    pub gold_facts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub gold_facts: usize,
    /// Average gold facts per sentence, one decimal, rounded half up.
    pub average_facts: String,
    pub languages: Vec<LanguageCount>,
}

/// `num / den` rounded half up to one decimal, computed exactly.
pub fn one_decimal_half_up(num: usize, den: usize) -> String {
    if den == 0 {
        return "0.0".to_string();
    }
    let tenths = (20 * num as u128 + den as u128) / (2 * den as u128);
    format!("{}.{}", tenths / 10, tenths % 10)
}

pub fn corpus_stats(examples: &[GoldExample]) -> CorpusStats {
    let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut facts = 0;
    for e in examples {
        let n = e.gold_facts.len();
        facts += n;
        let c = per.entry(e.lang.as_str()).or_default();
        c.0 += 1;
        c.1 += n;
    }
    let mut languages: Vec<LanguageCount> = per
        .into_iter()
        .map(|(l, (s, f))| LanguageCount {
            language: l.to_string(),
            sentences: s,
            gold_facts: f,
        })
        .collect();
    languages.sort_by(|a, b| compare_languages(&a.language, &b.language));
    CorpusStats {
        sentences: examples.len(),
        gold_facts: facts,
        average_facts: one_decimal_half_up(facts, examples.len()),
        languages,
    }
}

impl CorpusStats {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>10}",
            "language", "sentences", "gold facts"
        );
        for l in &self.languages {
            let _ = writeln!(
                out,
                "{:<10} {:>9} {:>10}",
                l.language, l.sentences, l.gold_facts
            );
        }
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>10}",
            "total", self.sentences, self.gold_facts
        );
        let _ = writeln!(
            out,
            "average gold facts per sentence: {}",
            self.average_facts
        );
        out
    }
}
