//! C ABI over `factlink`.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns an [`FlStatus`];
//! on failure, [`fl_last_error_message`] describes the error on the calling
//! thread. Strings returned through `char **` out-parameters are
//! NUL-terminated UTF-8 and must be released with [`fl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use serde_json::json;

use factlink::decoder::scorers::OverlapScorer;
use factlink::decoder::{link, DecodeConfig};
use factlink::eval::{self, MetricOptions};
use factlink::kg::{self, LabelConfig};
use factlink::predictions::{read_predictions, PredictionFileError};
use factlink::retrieval::{Embedder, EmbeddingIndex, HashEmbedder, LabelStrategy, SearchMode};
use factlink::{FactId, KnowledgeGraph, TokenTrie};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    NotFound = 3,
    InvalidInput = 4,
    Io = 5,
    Panic = 6,
}

/// A loaded knowledge graph.
pub struct FlKg(KnowledgeGraph);

/// A token trie over fact labels.
pub struct FlTrie(TokenTrie);

/// A dense fact index with the hash embedder that built it.
pub struct FlIndex {
    index: EmbeddingIndex,
    embedder: HashEmbedder,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(FlStatus, String);

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Failure(FlStatus::InvalidInput, e.to_string())
    }

    fn io(e: impl std::fmt::Display) -> Self {
        Failure(FlStatus::Io, e.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FlStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FlStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(FlStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// # Safety
/// `p` is null or points to a live `T`.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(FlStatus::NullArgument, format!("{what} is null")))
}

/// # Safety
/// `out` is null or writable.
unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(
            FlStatus::NullArgument,
            "output pointer is null".into(),
        ));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// # Safety
/// `out` is null or writable.
unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(
            FlStatus::NullArgument,
            "output pointer is null".into(),
        ));
    }
    *out = CString::new(s).map_err(Failure::input)?.into_raw();
    Ok(())
}

/// # Safety
/// `p` is null or was returned by `Box::into_raw`.
unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn kg_failure(e: kg::KgError) -> Failure {
    match e {
        kg::KgError::Missing { .. } => Failure(FlStatus::NotFound, e.to_string()),
        kg::KgError::Io { .. } => Failure::io(e),
        _ => Failure::input(e),
    }
}

fn eval_failure(e: eval::EvalError) -> Failure {
    match e {
        eval::EvalError::Missing { .. } => Failure(FlStatus::NotFound, e.to_string()),
        eval::EvalError::Io { .. } => Failure::io(e),
        _ => Failure::input(e),
    }
}

fn predictions_failure(e: PredictionFileError) -> Failure {
    match e {
        PredictionFileError::Missing(_) => Failure(FlStatus::NotFound, e.to_string()),
        PredictionFileError::Io { .. } => Failure::io(e),
        _ => Failure::input(e),
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn fl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a KG from three JSONL files. Urdu labels are right-to-left.
///
/// # Safety
/// Paths are valid strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_kg_load(
    entities: *const c_char,
    relations: *const c_char,
    facts: *const c_char,
    out: *mut *mut FlKg,
) -> FlStatus {
    guard(|| {
        let kg = kg::load_kg(
            Path::new(text(entities, "entities")?),
            Path::new(text(relations, "relations")?),
            Path::new(text(facts, "facts")?),
            LabelConfig::default(),
        )
        .map_err(kg_failure)?;
        put(out, FlKg(kg))
    })
}

/// # Safety
/// `kg` is null or a handle from [`fl_kg_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fl_kg_free(kg: *mut FlKg) {
    free(kg);
}

/// Number of facts; 0 for a null handle.
///
/// # Safety
/// `kg` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fl_kg_fact_count(kg: *const FlKg) -> usize {
    kg.as_ref().map_or(0, |k| k.0.fact_count())
}

/// Label of `fact_id` in `language`. `FL_STATUS_NOT_FOUND` when the fact is
/// unknown or has no label in that language.
///
/// # Safety
/// `kg` is a live handle; strings are valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_kg_fact_label(
    kg: *const FlKg,
    fact_id: *const c_char,
    language: *const c_char,
    out: *mut *mut c_char,
) -> FlStatus {
    guard(|| {
        let kg = &handle(kg, "kg")?.0;
        let fact = FactId::new(text(fact_id, "fact id")?);
        let language = text(language, "language")?;
        let label = kg.build_label(&fact, language).ok_or_else(|| {
            Failure(
                FlStatus::NotFound,
                format!("no {language} label for fact {fact}"),
            )
        })?;
        put_string(out, label.text)
    })
}

/// Trie over the English fact labels plus the NULL label.
///
/// # Safety
/// `kg` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_trie_build(kg: *const FlKg, out: *mut *mut FlTrie) -> FlStatus {
    guard(|| {
        let trie = TokenTrie::for_facts(&handle(kg, "kg")?.0).map_err(Failure::input)?;
        put(out, FlTrie(trie))
    })
}

/// # Safety
/// `path` is a valid string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_trie_load(path: *const c_char, out: *mut *mut FlTrie) -> FlStatus {
    guard(|| {
        let path = Path::new(text(path, "path")?);
        if !path.exists() {
            return Err(Failure(
                FlStatus::NotFound,
                format!("trie file not found: {}", path.display()),
            ));
        }
        let trie = TokenTrie::load(path).map_err(|e| match e {
            factlink::trie::TrieError::Io { .. } => Failure::io(e),
            _ => Failure::input(e),
        })?;
        put(out, FlTrie(trie))
    })
}

/// # Safety
/// `trie` is a live handle; `path` is a valid string.
#[no_mangle]
pub unsafe extern "C" fn fl_trie_save(trie: *const FlTrie, path: *const c_char) -> FlStatus {
    guard(|| {
        let trie = &handle(trie, "trie")?.0;
        trie.save(Path::new(text(path, "path")?))
            .map_err(Failure::io)
    })
}

/// # Safety
/// `trie` is null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fl_trie_free(trie: *mut FlTrie) {
    free(trie);
}

/// Fact ids whose label is exactly `label`, as a JSON array of strings.
///
/// # Safety
/// `trie` is a live handle; `label` is valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_trie_resolve(
    trie: *const FlTrie,
    label: *const c_char,
    out: *mut *mut c_char,
) -> FlStatus {
    guard(|| {
        let trie = &handle(trie, "trie")?.0;
        let ids = trie.resolve(&trie.tokenize(text(label, "label")?));
        put_string(out, json!(ids).to_string())
    })
}

/// Builds a dense index with the hash embedder. `strategy` is a name such
/// as `"El"` or `"All-Sum"`; `dim` 0 selects the default dimension.
///
/// # Safety
/// `kg` is a live handle; `strategy` is valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_index_build(
    kg: *const FlKg,
    strategy: *const c_char,
    dim: usize,
    out: *mut *mut FlIndex,
) -> FlStatus {
    guard(|| {
        let kg = &handle(kg, "kg")?.0;
        let strategy: LabelStrategy = text(strategy, "strategy")?
            .parse()
            .map_err(Failure::input)?;
        let embedder = HashEmbedder::new(if dim == 0 {
            HashEmbedder::DEFAULT_DIM
        } else {
            dim
        });
        let index = EmbeddingIndex::build(kg, &embedder, strategy).map_err(Failure::input)?;
        put(out, FlIndex { index, embedder })
    })
}

/// Loads an index saved with [`fl_index_save`]. `ngram` 0 selects the
/// default n-gram size; it must match the one the index was built with.
///
/// # Safety
/// `path` is a valid string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_index_load(
    path: *const c_char,
    ngram: usize,
    out: *mut *mut FlIndex,
) -> FlStatus {
    guard(|| {
        let path = Path::new(text(path, "path")?);
        if !path.exists() {
            return Err(Failure(
                FlStatus::NotFound,
                format!("index file not found: {}", path.display()),
            ));
        }
        let index = EmbeddingIndex::load(path).map_err(Failure::input)?;
        let ngram = if ngram == 0 {
            HashEmbedder::DEFAULT_NGRAM
        } else {
            ngram
        };
        let embedder = HashEmbedder::with_ngram(index.dim(), ngram);
        if index.embedder_identity() != embedder.identity() {
            return Err(Failure::input(
                "index was built with a different embedder configuration",
            ));
        }
        put(out, FlIndex { index, embedder })
    })
}

/// # Safety
/// `index` is a live handle; `path` is a valid string.
#[no_mangle]
pub unsafe extern "C" fn fl_index_save(index: *const FlIndex, path: *const c_char) -> FlStatus {
    guard(|| {
        let index = &handle(index, "index")?.index;
        index
            .save(Path::new(text(path, "path")?))
            .map_err(Failure::io)
    })
}

/// # Safety
/// `index` is null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fl_index_free(index: *mut FlIndex) {
    free(index);
}

/// Exact top-`k` facts for `text` in `language`, as a JSON array of
/// `{"fact": id, "score": cosine}` objects, best first.
///
/// # Safety
/// `index` is a live handle; strings are valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_index_top_k(
    index: *const FlIndex,
    query: *const c_char,
    language: *const c_char,
    k: usize,
    out: *mut *mut c_char,
) -> FlStatus {
    guard(|| {
        let h = handle(index, "index")?;
        let hits = h
            .index
            .top_k(
                &h.embedder,
                text(query, "query")?,
                text(language, "language")?,
                k,
                SearchMode::Exact,
            )
            .map_err(Failure::input)?;
        let rows: Vec<_> = hits
            .iter()
            .map(|s| json!({"fact": s.fact.as_str(), "score": s.score}))
            .collect();
        put_string(out, json!(rows).to_string())
    })
}

/// Trie-constrained beam search with the lexical overlap scorer. When
/// `index` is non-null, its top `beam_width` facts for the sentence are
/// passed as context. Output is a JSON array of `{"fact", "score"}`
/// objects; `beam_width` 0 selects the default.
///
/// # Safety
/// `kg` and `trie` are live handles; `index` is null or live; strings are
/// valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_link(
    kg: *const FlKg,
    trie: *const FlTrie,
    index: *const FlIndex,
    sentence: *const c_char,
    language: *const c_char,
    beam_width: usize,
    out: *mut *mut c_char,
) -> FlStatus {
    guard(|| {
        let kg = &handle(kg, "kg")?.0;
        let trie = &handle(trie, "trie")?.0;
        let sentence = text(sentence, "sentence")?;
        let language = text(language, "language")?;
        let mut config = DecodeConfig::default();
        if beam_width > 0 {
            config.beam_width = beam_width;
        }
        let context: Vec<String> = match index.as_ref() {
            Some(h) => h
                .index
                .top_k(
                    &h.embedder,
                    sentence,
                    language,
                    config.context_size,
                    SearchMode::Exact,
                )
                .map_err(Failure::input)?
                .iter()
                .filter_map(|s| kg.build_label(&s.fact, kg::ENGLISH))
                .map(|l| l.text)
                .collect(),
            None => Vec::new(),
        };
        let predictions =
            link(sentence, &context, trie, &OverlapScorer, &config).map_err(Failure::input)?;
        let rows: Vec<_> = predictions
            .iter()
            .map(|p| json!({"fact": p.target.to_wire(), "score": p.score}))
            .collect();
        put_string(out, json!(rows).to_string())
    })
}

/// Evaluates a predictions file against a gold file and returns the JSON
/// report. `facts` may be null; when given, macro P@1 is included.
///
/// # Safety
/// `gold` and `predictions` are valid strings; `facts` is null or valid;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn fl_eval_json(
    gold: *const c_char,
    predictions: *const c_char,
    facts: *const c_char,
    out: *mut *mut c_char,
) -> FlStatus {
    guard(|| {
        let gold = eval::load_gold(Path::new(text(gold, "gold")?)).map_err(eval_failure)?;
        let preds = read_predictions(Path::new(text(predictions, "predictions")?))
            .map_err(predictions_failure)?;
        let relations = if facts.is_null() {
            None
        } else {
            Some(kg::load_fact_relations(Path::new(text(facts, "facts")?)).map_err(kg_failure)?)
        };
        let report = eval::evaluate(
            &gold,
            &preds,
            relations.as_ref(),
            MetricOptions {
                empty_as_null: false,
            },
        )
        .map_err(eval_failure)?;
        put_string(out, report.to_json())
    })
}
