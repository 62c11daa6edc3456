#ifndef FACTLINK_H
#define FACTLINK_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum FlStatus {
  FL_STATUS_OK = 0,
  FL_STATUS_NULL_ARGUMENT = 1,
  FL_STATUS_INVALID_UTF8 = 2,
  FL_STATUS_NOT_FOUND = 3,
  FL_STATUS_INVALID_INPUT = 4,
  FL_STATUS_IO = 5,
  FL_STATUS_PANIC = 6,
} FlStatus;

// A dense fact index with the hash embedder that built it.
typedef struct FlIndex FlIndex;

// A loaded knowledge graph.
typedef struct FlKg FlKg;

// A token trie over fact labels.
typedef struct FlTrie FlTrie;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *fl_last_error_message(void);

// Library version, static storage.
const char *fl_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` is null or a string returned by this library and not yet freed.
void fl_string_free(char *s);

// Loads a KG from three JSONL files. Urdu labels are right-to-left.
//
// # Safety
// Paths are valid strings; `out` is writable.
enum FlStatus fl_kg_load(const char *entities,
                         const char *relations,
                         const char *facts,
                         struct FlKg **out);

// # Safety
// `kg` is null or a handle from [`fl_kg_load`] not yet freed.
void fl_kg_free(struct FlKg *kg);

// Number of facts; 0 for a null handle.
//
// # Safety
// `kg` is null or a live handle.
size_t fl_kg_fact_count(const struct FlKg *kg);

// Label of `fact_id` in `language`. `FL_STATUS_NOT_FOUND` when the fact is
// unknown or has no label in that language.
//
// # Safety
// `kg` is a live handle; strings are valid; `out` is writable.
enum FlStatus fl_kg_fact_label(const struct FlKg *kg,
                               const char *fact_id,
                               const char *language,
                               char **out);

// Trie over the English fact labels plus the NULL label.
//
// # Safety
// `kg` is a live handle; `out` is writable.
enum FlStatus fl_trie_build(const struct FlKg *kg, struct FlTrie **out);

// # Safety
// `path` is a valid string; `out` is writable.
enum FlStatus fl_trie_load(const char *path, struct FlTrie **out);

// # Safety
// `trie` is a live handle; `path` is a valid string.
enum FlStatus fl_trie_save(const struct FlTrie *trie, const char *path);

// # Safety
// `trie` is null or a live handle not yet freed.
void fl_trie_free(struct FlTrie *trie);

// Fact ids whose label is exactly `label`, as a JSON array of strings.
//
// # Safety
// `trie` is a live handle; `label` is valid; `out` is writable.
enum FlStatus fl_trie_resolve(const struct FlTrie *trie, const char *label, char **out);

// Builds a dense index with the hash embedder. `strategy` is a name such
// as `"El"` or `"All-Sum"`; `dim` 0 selects the default dimension.
//
// # Safety
// `kg` is a live handle; `strategy` is valid; `out` is writable.
enum FlStatus fl_index_build(const struct FlKg *kg,
                             const char *strategy,
                             size_t dim,
                             struct FlIndex **out);

// Loads an index saved with [`fl_index_save`]. `ngram` 0 selects the
// default n-gram size; it must match the one the index was built with.
//
// # Safety
// `path` is a valid string; `out` is writable.
enum FlStatus fl_index_load(const char *path, size_t ngram, struct FlIndex **out);

// # Safety
// `index` is a live handle; `path` is a valid string.
enum FlStatus fl_index_save(const struct FlIndex *index, const char *path);

// # Safety
// `index` is null or a live handle not yet freed.
void fl_index_free(struct FlIndex *index);

// Exact top-`k` facts for `text` in `language`, as a JSON array of
// `{"fact": id, "score": cosine}` objects, best first.
//
// # Safety
// `index` is a live handle; strings are valid; `out` is writable.
enum FlStatus fl_index_top_k(const struct FlIndex *index,
                             const char *query,
                             const char *language,
                             size_t k,
                             char **out);

// Trie-constrained beam search with the lexical overlap scorer. When
// `index` is non-null, its top `beam_width` facts for the sentence are
// passed as context. Output is a JSON array of `{"fact", "score"}`
// objects; `beam_width` 0 selects the default.
//
// # Safety
// `kg` and `trie` are live handles; `index` is null or live; strings are
// valid; `out` is writable.
enum FlStatus fl_link(const struct FlKg *kg,
                      const struct FlTrie *trie,
                      const struct FlIndex *index,
                      const char *sentence,
                      const char *language,
                      size_t beam_width,
                      char **out);

// Evaluates a predictions file against a gold file and returns the JSON
// report. `facts` may be null; when given, macro P@1 is included.
//
// # Safety
// `gold` and `predictions` are valid strings; `facts` is null or valid;
// `out` is writable.
enum FlStatus fl_eval_json(const char *gold,
                           const char *predictions,
                           const char *facts,
                           char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FACTLINK_H */
