//! Knowledge graph loading, per-language fact labels and the English
//! label dictionary used to map generated labels back to fact ids.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize, Tokenizer, WordTokenizer, COMPONENT_SEPARATOR};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Entity identifier such as `Q39`.
    EntityId
);
string_id!(
    /// Relation identifier such as `P17`.
    RelationId
);
string_id!(
    /// Fact identifier such as `F23`. The reserved id `NULL` stands for
    /// "this sentence expresses no KG fact".
    FactId
);

impl FactId {
    pub const NULL: &'static str = "NULL";

    pub fn null() -> Self {
        Self(Self::NULL.to_string())
    }

    pub fn is_null(&self) -> bool {
        self.0 == Self::NULL
    }
}

/// Surface label of the NULL fact.
pub const NULL_LABEL: &str = "None";

/// Prefix reserved for invalid generations in prediction files.
pub const INVALID_PREFIX: &str = "INVALID:";

/// Languages in the order used whenever labels are listed or concatenated.
pub const PREFERRED_LANGUAGE_ORDER: [&str; 7] = ["en", "hi", "te", "ta", "ur", "gu", "as"];

pub const ENGLISH: &str = "en";

/// Preferred languages first, in their fixed order, then lexicographic.
pub fn compare_languages(a: &str, b: &str) -> Ordering {
    let rank = |l: &str| {
        PREFERRED_LANGUAGE_ORDER
            .iter()
            .position(|p| *p == l)
            .unwrap_or(PREFERRED_LANGUAGE_ORDER.len())
    };
    rank(a).cmp(&rank(b)).then_with(|| a.cmp(b))
}

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{what} file not found: {}", path.display())]
    Missing { what: &'static str, path: PathBuf },
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {source}")]
    AtLine {
        file: String,
        line: usize,
        #[source]
        source: Box<KgError>,
    },
    #[error("malformed record: {0}")]
    Parse(String),
    #[error("unknown entity {entity} in fact {fact}")]
    UnknownEntity { fact: FactId, entity: EntityId },
    #[error("unknown relation {relation} in fact {fact}")]
    UnknownRelation { fact: FactId, relation: RelationId },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("fact {fact} repeats the triple of fact {existing}")]
    DuplicateTriple { fact: FactId, existing: FactId },
    #[error("id {0:?} is reserved or empty")]
    ReservedId(String),
    #[error("{id}: {message}")]
    InvalidLabel { id: String, message: String },
}

/// Per-language labels of an entity or relation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Labels(BTreeMap<String, String>);

impl Labels {
    pub fn get(&self, language: &str) -> Option<&str> {
        self.0.get(language).map(String::as_str)
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn validated(owner: &str, raw: BTreeMap<String, String>) -> Result<Self, KgError> {
        if raw.is_empty() {
            return Err(KgError::InvalidLabel {
                id: owner.to_string(),
                message: "no labels".into(),
            });
        }
        let mut out = BTreeMap::new();
        for (lang, label) in raw {
            let lang = lang.to_ascii_lowercase();
            let valid_lang =
                (2..=8).contains(&lang.len()) && lang.bytes().all(|b| b.is_ascii_lowercase());
            if !valid_lang {
                return Err(KgError::InvalidLabel {
                    id: owner.to_string(),
                    message: format!("invalid language code {lang:?}"),
                });
            }
            if normalize(&label).trim().is_empty() {
                return Err(KgError::InvalidLabel {
                    id: owner.to_string(),
                    message: format!("empty {lang} label"),
                });
            }
            out.insert(lang, label);
        }
        Ok(Self(out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledEntity {
    pub id: EntityId,
    pub labels: Labels,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRelation {
    pub id: RelationId,
    pub labels: Labels,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fact {
    pub id: FactId,
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Ltr,
    Rtl,
}

/// A fact rendered in one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactLabel {
    pub fact: FactId,
    pub language: String,
    /// Components in reading order.
    pub parts: [String; 3],
    pub text: String,
    pub direction: Direction,
}

impl FactLabel {
    fn new(fact: FactId, language: &str, parts: [String; 3], direction: Direction) -> Self {
        let text = parts.join(COMPONENT_SEPARATOR);
        Self {
            fact,
            language: language.to_string(),
            parts,
            text,
            direction,
        }
    }

    /// The same label with the component order and direction flipped.
    pub fn reversed(&self) -> Self {
        let [a, b, c] = self.parts.clone();
        let direction = match self.direction {
            Direction::Ltr => Direction::Rtl,
            Direction::Rtl => Direction::Ltr,
        };
        Self::new(self.fact.clone(), &self.language, [c, b, a], direction)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelConfig {
    /// Languages whose fact labels are written object-first.
    pub rtl_languages: BTreeSet<String>,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            rtl_languages: ["ur".to_string()].into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FactRefs {
    subject: u32,
    relation: u32,
    object: u32,
}

/// Immutable, validated knowledge graph. Facts are kept in ascending id
/// order so positional order equals id order.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vec<LabeledEntity>,
    entity_index: HashMap<EntityId, u32>,
    relations: Vec<LabeledRelation>,
    relation_index: HashMap<RelationId, u32>,
    facts: Vec<Fact>,
    refs: Vec<FactRefs>,
    fact_index: HashMap<FactId, u32>,
    triples: HashMap<(u32, u32, u32), u32>,
    label_config: LabelConfig,
}

#[derive(Debug, Default)]
pub struct KgBuilder {
    entities: Vec<LabeledEntity>,
    entity_index: HashMap<EntityId, u32>,
    relations: Vec<LabeledRelation>,
    relation_index: HashMap<RelationId, u32>,
    facts: Vec<(Fact, FactRefs)>,
    fact_ids: HashMap<FactId, u32>,
    triples: HashMap<(u32, u32, u32), u32>,
    label_config: LabelConfig,
}

fn check_id(id: &str) -> Result<(), KgError> {
    if id.is_empty() || id == FactId::NULL || id.starts_with(INVALID_PREFIX) {
        return Err(KgError::ReservedId(id.to_string()));
    }
    Ok(())
}

fn label_map<'a, I, L>(labels: I) -> BTreeMap<String, String>
where
    I: IntoIterator<Item = (L, &'a str)>,
    L: Into<String>,
{
    labels
        .into_iter()
        .map(|(l, s)| (l.into(), s.to_string()))
        .collect()
}

impl KgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn label_config(mut self, config: LabelConfig) -> Self {
        self.label_config = config;
        self
    }

    pub fn entity<'a, L: Into<String>>(
        &mut self,
        id: &str,
        labels: impl IntoIterator<Item = (L, &'a str)>,
    ) -> Result<&mut Self, KgError> {
        self.add_entity(id, label_map(labels))?;
        Ok(self)
    }

    pub fn relation<'a, L: Into<String>>(
        &mut self,
        id: &str,
        labels: impl IntoIterator<Item = (L, &'a str)>,
    ) -> Result<&mut Self, KgError> {
        self.add_relation(id, label_map(labels))?;
        Ok(self)
    }

    pub fn add_entity(
        &mut self,
        id: &str,
        labels: BTreeMap<String, String>,
    ) -> Result<(), KgError> {
        check_id(id)?;
        let id = EntityId::new(id);
        if self.entity_index.contains_key(&id) {
            return Err(KgError::DuplicateId {
                kind: "entity",
                id: id.0,
            });
        }
        let labels = Labels::validated(id.as_str(), labels)?;
        self.entity_index
            .insert(id.clone(), self.entities.len() as u32);
        self.entities.push(LabeledEntity { id, labels });
        Ok(())
    }

    pub fn add_relation(
        &mut self,
        id: &str,
        labels: BTreeMap<String, String>,
    ) -> Result<(), KgError> {
        check_id(id)?;
        let id = RelationId::new(id);
        if self.relation_index.contains_key(&id) {
            return Err(KgError::DuplicateId {
                kind: "relation",
                id: id.0,
            });
        }
        let labels = Labels::validated(id.as_str(), labels)?;
        self.relation_index
            .insert(id.clone(), self.relations.len() as u32);
        self.relations.push(LabeledRelation { id, labels });
        Ok(())
    }

    /// Entities and relations must already be present.
    pub fn fact(
        &mut self,
        id: &str,
        subject: &str,
        relation: &str,
        object: &str,
    ) -> Result<&mut Self, KgError> {
        check_id(id)?;
        let fact = Fact {
            id: FactId::new(id),
            subject: EntityId::new(subject),
            relation: RelationId::new(relation),
            object: EntityId::new(object),
        };
        if self.fact_ids.contains_key(&fact.id) {
            return Err(KgError::DuplicateId {
                kind: "fact",
                id: fact.id.0,
            });
        }
        let entity = |e: &EntityId| {
            self.entity_index
                .get(e)
                .copied()
                .ok_or_else(|| KgError::UnknownEntity {
                    fact: fact.id.clone(),
                    entity: e.clone(),
                })
        };
        let subject = entity(&fact.subject)?;
        let object = entity(&fact.object)?;
        let relation = self
            .relation_index
            .get(&fact.relation)
            .copied()
            .ok_or_else(|| KgError::UnknownRelation {
                fact: fact.id.clone(),
                relation: fact.relation.clone(),
            })?;
        let key = (subject, relation, object);
        if let Some(&existing) = self.triples.get(&key) {
            return Err(KgError::DuplicateTriple {
                fact: fact.id,
                existing: self.facts[existing as usize].0.id.clone(),
            });
        }
        let slot = self.facts.len() as u32;
        self.triples.insert(key, slot);
        self.fact_ids.insert(fact.id.clone(), slot);
        self.facts.push((
            fact,
            FactRefs {
                subject,
                relation,
                object,
            },
        ));
        Ok(self)
    }

    pub fn build(self) -> KnowledgeGraph {
        let mut facts = self.facts;
        facts.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        let mut fact_index = HashMap::with_capacity(facts.len());
        let mut triples = HashMap::with_capacity(facts.len());
        let mut plain = Vec::with_capacity(facts.len());
        let mut refs = Vec::with_capacity(facts.len());
        for (i, (fact, r)) in facts.into_iter().enumerate() {
            fact_index.insert(fact.id.clone(), i as u32);
            triples.insert((r.subject, r.relation, r.object), i as u32);
            plain.push(fact);
            refs.push(r);
        }
        KnowledgeGraph {
            entities: self.entities,
            entity_index: self.entity_index,
            relations: self.relations,
            relation_index: self.relation_index,
            facts: plain,
            refs,
            fact_index,
            triples,
            label_config: self.label_config,
        }
    }
}

#[derive(Deserialize)]
struct LabeledRecord {
    id: String,
    labels: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct FactRecord {
    id: String,
    subject: String,
    relation: String,
    object: String,
}

fn open(what: &'static str, path: &Path) -> Result<BufReader<File>, KgError> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(KgError::Missing {
            what,
            path: path.to_path_buf(),
        }),
        Err(source) => Err(KgError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// Streams JSONL records, calling `f` on each non-blank line.
fn for_each_record<R, T, F>(reader: R, file: &str, mut f: F) -> Result<(), KgError>
where
    R: Read,
    T: for<'de> Deserialize<'de>,
    F: FnMut(T) -> Result<(), KgError>,
{
    let at = |line: usize, source: KgError| KgError::AtLine {
        file: file.to_string(),
        line,
        source: Box::new(source),
    };
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| KgError::Io {
            path: PathBuf::from(file),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T =
            serde_json::from_str(&line).map_err(|e| at(i + 1, KgError::Parse(e.to_string())))?;
        f(record).map_err(|e| at(i + 1, e))?;
    }
    Ok(())
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Loads `entities.jsonl`, `relations.jsonl` and `facts.jsonl`.
pub fn load_kg(
    entities: &Path,
    relations: &Path,
    facts: &Path,
    config: LabelConfig,
) -> Result<KnowledgeGraph, KgError> {
    let e = open("entities", entities)?;
    let r = open("relations", relations)?;
    let f = open("facts", facts)?;
    load_kg_from_readers(
        (e, &display_name(entities)),
        (r, &display_name(relations)),
        (f, &display_name(facts)),
        config,
    )
}

pub fn load_kg_from_readers<E: Read, R: Read, F: Read>(
    entities: (E, &str),
    relations: (R, &str),
    facts: (F, &str),
    config: LabelConfig,
) -> Result<KnowledgeGraph, KgError> {
    let mut builder = KgBuilder::new().label_config(config);
    for_each_record(entities.0, entities.1, |r: LabeledRecord| {
        builder.add_entity(&r.id, r.labels)
    })?;
    for_each_record(relations.0, relations.1, |r: LabeledRecord| {
        builder.add_relation(&r.id, r.labels)
    })?;
    for_each_record(facts.0, facts.1, |r: FactRecord| {
        builder
            .fact(&r.id, &r.subject, &r.relation, &r.object)
            .map(|_| ())
    })?;
    Ok(builder.build())
}

/// Reads only the relation of every fact, for evaluation by relation class.
pub fn load_fact_relations(path: &Path) -> Result<HashMap<FactId, RelationId>, KgError> {
    let reader = open("facts", path)?;
    let mut out = HashMap::new();
    for_each_record(reader, &display_name(path), |r: FactRecord| {
        out.insert(FactId::new(r.id), RelationId::new(r.relation));
        Ok(())
    })?;
    Ok(out)
}

impl KnowledgeGraph {
    pub fn builder() -> KgBuilder {
        KgBuilder::new()
    }

    pub fn label_config(&self) -> &LabelConfig {
        &self.label_config
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Facts in ascending id order.
    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn entities(&self) -> &[LabeledEntity] {
        &self.entities
    }

    pub fn relations(&self) -> &[LabeledRelation] {
        &self.relations
    }

    pub fn fact(&self, id: &FactId) -> Option<&Fact> {
        self.fact_position(id).map(|i| &self.facts[i])
    }

    pub fn fact_position(&self, id: &FactId) -> Option<usize> {
        self.fact_index.get(id).map(|&i| i as usize)
    }

    pub fn entity(&self, id: &EntityId) -> Option<&LabeledEntity> {
        self.entity_index
            .get(id)
            .map(|&i| &self.entities[i as usize])
    }

    pub fn relation(&self, id: &RelationId) -> Option<&LabeledRelation> {
        self.relation_index
            .get(id)
            .map(|&i| &self.relations[i as usize])
    }

    pub fn fact_for_triple(
        &self,
        subject: &EntityId,
        relation: &RelationId,
        object: &EntityId,
    ) -> Option<&FactId> {
        let s = *self.entity_index.get(subject)?;
        let r = *self.relation_index.get(relation)?;
        let o = *self.entity_index.get(object)?;
        self.triples
            .get(&(s, r, o))
            .map(|&i| &self.facts[i as usize].id)
    }

    fn component_labels(&self, position: usize, language: &str) -> Option<[&str; 3]> {
        let r = self.refs[position];
        Some([
            self.entities[r.subject as usize].labels.get(language)?,
            self.relations[r.relation as usize].labels.get(language)?,
            self.entities[r.object as usize].labels.get(language)?,
        ])
    }

    /// Fact label in `language`, or `None` unless the subject, relation and
    /// object all carry a label in that language.
    pub fn build_label(&self, fact: &FactId, language: &str) -> Option<FactLabel> {
        let position = self.fact_position(fact)?;
        self.label_at(position, language)
    }

    pub(crate) fn label_at(&self, position: usize, language: &str) -> Option<FactLabel> {
        let [s, r, o] = self.component_labels(position, language)?;
        let fact = self.facts[position].id.clone();
        let label = FactLabel::new(
            fact,
            language,
            [s.to_string(), r.to_string(), o.to_string()],
            Direction::Ltr,
        );
        if self.label_config.rtl_languages.contains(language) {
            Some(label.reversed())
        } else {
            Some(label)
        }
    }

    /// Languages in which the fact has a label, in preferred order.
    pub fn label_languages(&self, fact: &FactId) -> Vec<&str> {
        match self.fact_position(fact) {
            Some(p) => self.label_languages_at(p),
            None => Vec::new(),
        }
    }

    pub(crate) fn label_languages_at(&self, position: usize) -> Vec<&str> {
        let r = self.refs[position];
        let subject = &self.entities[r.subject as usize].labels;
        let relation = &self.relations[r.relation as usize].labels;
        let object = &self.entities[r.object as usize].labels;
        let mut langs: Vec<&str> = subject
            .languages()
            .filter(|l| relation.get(l).is_some() && object.get(l).is_some())
            .collect();
        langs.sort_by(|a, b| compare_languages(a, b));
        langs
    }

    /// Every language that labels at least one fact, in preferred order.
    pub fn languages(&self) -> Vec<String> {
        let mut langs: Vec<String> = label_language_stats(self).into_keys().collect();
        langs.sort_by(|a, b| compare_languages(a, b));
        langs
    }
}

/// Number of facts carrying a label in each language.
pub fn label_language_stats(kg: &KnowledgeGraph) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for position in 0..kg.facts.len() {
        for lang in kg.label_languages_at(position) {
            *counts.entry(lang.to_string()).or_default() += 1;
        }
    }
    counts
}

/// Dictionary key for a label: normalized tokens joined by single spaces.
pub fn dictionary_key(label: &str) -> String {
    WordTokenizer.pieces(label).join(" ")
}

/// Normalized English fact label to fact ids.
#[derive(Debug, Clone, Default)]
pub struct LabelDictionary {
    entries: HashMap<String, Vec<FactId>>,
}

impl LabelDictionary {
    pub fn from_kg(kg: &KnowledgeGraph) -> Self {
        let mut entries: HashMap<String, Vec<FactId>> = HashMap::new();
        for position in 0..kg.facts.len() {
            if let Some(label) = kg.label_at(position, ENGLISH) {
                entries
                    .entry(dictionary_key(&label.text))
                    .or_default()
                    .push(label.fact);
            }
        }
        entries
            .entry(dictionary_key(NULL_LABEL))
            .or_default()
            .push(FactId::null());
        for ids in entries.values_mut() {
            ids.sort();
            ids.dedup();
        }
        Self { entries }
    }

    /// All fact ids whose English label normalizes to `label`, ascending.
    pub fn lookup(&self, label: &str) -> &[FactId] {
        self.entries
            .get(&dictionary_key(label))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
