//! Ranked predictions and the JSONL file they are exchanged in:
//!
//! ```text
//! {"sentence_id": "s1", "predictions": [{"fact": "F23", "score": -0.4}, {"fact": "NULL", "score": -2.1}]}
//! ```
//!
//! Invalid generations are written as `"INVALID:<label>"`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{FactId, INVALID_PREFIX};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    /// A KG fact or the NULL fact.
    Fact(FactId),
    /// A generated label that names no fact.
    Invalid(String),
}

impl Target {
    pub fn to_wire(&self) -> String {
        match self {
            Target::Fact(id) => id.as_str().to_string(),
            Target::Invalid(label) => format!("{INVALID_PREFIX}{label}"),
        }
    }

    pub fn from_wire(s: &str) -> Self {
        match s.strip_prefix(INVALID_PREFIX) {
            Some(label) => Target::Invalid(label.to_string()),
            None => Target::Fact(FactId::new(s)),
        }
    }

    pub fn fact(&self) -> Option<&FactId> {
        match self {
            Target::Fact(id) => Some(id),
            Target::Invalid(_) => None,
        }
    }

    pub fn is_invalid(&self) -> bool {
        matches!(self, Target::Invalid(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub target: Target,
    pub score: f64,
}

/// Ranked predictions for one sentence: distinct targets, scores
/// non-increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionList(Vec<Prediction>);

impl PredictionList {
    pub const EMPTY: Self = Self(Vec::new());

    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps the first occurrence of each target. Panics if scores increase.
    pub fn from_ranked(items: impl IntoIterator<Item = Prediction>) -> Self {
        let mut list = Self::new();
        for p in items {
            list.push(p);
        }
        list
    }

    /// Appends unless the target is already present.
    pub fn push(&mut self, p: Prediction) -> bool {
        if self.0.iter().any(|q| q.target == p.target) {
            return false;
        }
        if let Some(last) = self.0.last() {
            assert!(
                p.score <= last.score || p.score.is_nan(),
                "prediction scores must be non-increasing"
            );
        }
        self.0.push(p);
        true
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Prediction> {
        self.0.iter()
    }

    pub fn first(&self) -> Option<&Prediction> {
        self.0.first()
    }

    pub fn truncate(&mut self, n: usize) {
        self.0.truncate(n);
    }

    pub fn as_slice(&self) -> &[Prediction] {
        &self.0
    }

    pub fn invalid_count(&self) -> usize {
        self.0.iter().filter(|p| p.target.is_invalid()).count()
    }
}

impl<'a> IntoIterator for &'a PredictionList {
    type Item = &'a Prediction;
    type IntoIter = std::slice::Iter<'a, Prediction>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub sentence_id: String,
    pub predictions: PredictionList,
}

#[derive(Serialize, Deserialize)]
struct WirePrediction {
    fact: String,
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    sentence_id: String,
    predictions: Vec<WirePrediction>,
}

#[derive(Debug, Error)]
pub enum PredictionFileError {
    #[error("predictions file not found: {0}")]
    Missing(String),
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
}

impl PredictionRecord {
    pub fn to_json_line(&self) -> String {
        let wire = WireRecord {
            sentence_id: self.sentence_id.clone(),
            predictions: self
                .predictions
                .iter()
                .map(|p| WirePrediction {
                    fact: p.target.to_wire(),
                    score: if p.score.is_finite() {
                        p.score
                    } else {
                        f64::MIN
                    },
                })
                .collect(),
        };
        serde_json::to_string(&wire).expect("prediction records serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let wire: WireRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let mut predictions = PredictionList::new();
        for p in wire.predictions {
            let target = Target::from_wire(&p.fact);
            if predictions.0.iter().any(|q| q.target == target) {
                return Err(format!("duplicate prediction {}", p.fact));
            }
            if predictions.0.last().is_some_and(|q| p.score > q.score) {
                return Err("prediction scores must be non-increasing".into());
            }
            predictions.0.push(Prediction {
                target,
                score: p.score,
            });
        }
        Ok(Self {
            sentence_id: wire.sentence_id,
            predictions,
        })
    }
}

pub fn write_predictions<W: Write>(writer: W, records: &[PredictionRecord]) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    for r in records {
        writeln!(w, "{}", r.to_json_line())?;
    }
    w.flush()
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, PredictionFileError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => PredictionFileError::Missing(display.clone()),
        _ => PredictionFileError::Io {
            path: display.clone(),
            source,
        },
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| PredictionFileError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = PredictionRecord::from_json_line(&line).map_err(|message| {
            PredictionFileError::Parse {
                path: display.clone(),
                line: i + 1,
                message,
            }
        })?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format_roundtrips() {
        let record = PredictionRecord {
            sentence_id: "s1".into(),
            predictions: PredictionList::from_ranked([
                Prediction {
                    target: Target::Fact("F23".into()),
                    score: -0.5,
                },
                Prediction {
                    target: Target::Fact(FactId::null()),
                    score: -1.0,
                },
                Prediction {
                    target: Target::Invalid("a ; b ; c".into()),
                    score: -2.0,
                },
            ]),
        };
        let line = record.to_json_line();
        assert_eq!(
            line,
            r#"{"sentence_id":"s1","predictions":[{"fact":"F23","score":-0.5},{"fact":"NULL","score":-1.0},{"fact":"INVALID:a ; b ; c","score":-2.0}]}"#
        );
        assert_eq!(PredictionRecord::from_json_line(&line).unwrap(), record);
    }

    #[test]
    fn duplicate_targets_are_dropped() {
        let mut list = PredictionList::new();
        assert!(list.push(Prediction {
            target: Target::Fact("F1".into()),
            score: 0.0
        }));
        assert!(!list.push(Prediction {
            target: Target::Fact("F1".into()),
            score: -1.0
        }));
        assert_eq!(list.len(), 1);
    }

    #[test]
    fn rejects_increasing_scores_in_files() {
        let line = r#"{"sentence_id":"s","predictions":[{"fact":"F1","score":-1},{"fact":"F2","score":0}]}"#;
        assert!(PredictionRecord::from_json_line(line).is_err());
    }
}
