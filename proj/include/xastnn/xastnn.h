#ifndef XASTNN_XASTNN_H
#define XASTNN_XASTNN_H

/*
 * C interface to the xastnn code-representation library.
 *
 * Every call returns an xastnn_status. On failure a message for the calling
 * thread is available from xastnn_last_error() until the next failing call.
 * Strings returned through `char**` are heap-allocated and released with
 * xastnn_string_free(). Structured inputs and outputs are JSON text.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define XASTNN_API __declspec(dllexport)
#else
#define XASTNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum xastnn_status {
  XASTNN_OK = 0,
  XASTNN_ERR_SYNTAX = 1,           /* source does not parse */
  XASTNN_ERR_SCHEMA = 2,           /* malformed AST document */
  XASTNN_ERR_DATA = 3,             /* dataset record or corpus problem */
  XASTNN_ERR_IO = 4,
  XASTNN_ERR_CHECKPOINT = 5,
  XASTNN_ERR_INVALID_ARGUMENT = 6, /* bad option, config key or profile */
  XASTNN_ERR_NUMERIC = 7,          /* non-finite loss during training */
  XASTNN_ERR_SHAPE = 8,            /* tensor or dimension mismatch */
  XASTNN_ERR_INTERNAL = 9
} xastnn_status;

typedef struct xastnn_ast xastnn_ast;
typedef struct xastnn_model xastnn_model;

typedef struct xastnn_ast_stats {
  size_t depth;
  size_t node_count;
  size_t token_count;
} xastnn_ast_stats;

/* Receives one JSON record per finished epoch: {"epoch","train_loss","valid_metric"}. */
typedef void (*xastnn_epoch_callback)(const char* record_json, void* user);

XASTNN_API const char* xastnn_version(void);
XASTNN_API const char* xastnn_status_name(xastnn_status status);
XASTNN_API const char* xastnn_last_error(void);
XASTNN_API void xastnn_string_free(char* s);

/* ---- AST ---------------------------------------------------------------- */

/* Mini-language source text. */
XASTNN_API xastnn_status xastnn_ast_parse(const char* source, xastnn_ast** out);
/* Interchange document {"root", "nodes": [{"id","kind","text","children"}]}. */
XASTNN_API xastnn_status xastnn_ast_from_json(const char* document, xastnn_ast** out);
/* Reads a file: *.json as an interchange document, anything else as source. */
XASTNN_API xastnn_status xastnn_ast_load(const char* path, xastnn_ast** out);
/* indent < 0 gives a single line. */
XASTNN_API xastnn_status xastnn_ast_to_json(const xastnn_ast* ast, int indent, char** out);
XASTNN_API xastnn_status xastnn_ast_stats_get(const xastnn_ast* ast, xastnn_ast_stats* out);
XASTNN_API void xastnn_ast_free(xastnn_ast* ast);

/*
 * Statement subtree sequence. `options_json` may be NULL or an object with
 * "profile" (minilang | generic-json), "granularity" (statement | program |
 * token) and "root_kinds" (array, generic-json only). The result is an array
 * of {"label","root_id","members","depth","delimiter"}.
 */
XASTNN_API xastnn_status xastnn_split(const xastnn_ast* ast, const char* options_json, char** out);

/* ---- Synthetic corpora -------------------------------------------------- */

/*
 * kind "classify": 4-class labelled programs written to `path`.
 * kind "clone": n pairs to `path`, their programs to `programs_path`.
 * kind "homogeneous": n same-shaped programs to `path` (bench corpus).
 */
XASTNN_API xastnn_status xastnn_generate_corpus(const char* kind, size_t n, uint64_t seed,
                                                const char* path, const char* programs_path);

/* ---- Models ------------------------------------------------------------- */

/*
 * Trains on a classification file (task "classify") or on a pair file plus
 * program table (task "clone", `programs_path` required). `config_json`
 * holds training options; unknown keys are rejected. The report lists the
 * epoch history, the selected epoch and the test-split metric.
 */
XASTNN_API xastnn_status xastnn_train(const char* config_json, const char* data_path,
                                      const char* programs_path, xastnn_epoch_callback on_epoch,
                                      void* user, xastnn_model** out_model, char** out_report);

XASTNN_API xastnn_status xastnn_model_load(const char* path, xastnn_model** out);
XASTNN_API xastnn_status xastnn_model_save(const xastnn_model* model, const char* path);
/* {"config": training options, "code_dim", "vocab_size", "classes"} */
XASTNN_API xastnn_status xastnn_model_info(const xastnn_model* model, char** out);
XASTNN_API xastnn_status xastnn_model_code_dim(const xastnn_model* model, size_t* out);
/* Writes the code vector; fails if `capacity` < code_dim. */
XASTNN_API xastnn_status xastnn_model_embed(xastnn_model* model, const xastnn_ast* ast, double* out,
                                            size_t capacity, size_t* written);
XASTNN_API void xastnn_model_free(xastnn_model* model);

/*
 * Scores a dataset in the model's task format. `split` is train, valid, test
 * or NULL for every record; `seed` drives the split of records without one.
 */
XASTNN_API xastnn_status xastnn_evaluate(xastnn_model* model, const char* data_path,
                                         const char* programs_path, const char* split,
                                         uint64_t seed, char** out_report);

/* ---- Benchmark ---------------------------------------------------------- */

/*
 * Times the representation phase over a program file (one {"source"} or
 * {"ast"} record per line; parsing and splitting happen up front). With a
 * NULL model a freshly initialised one is built from `config_json`. B = 1 is
 * always measured. The report is an array of
 * {"batch_size","per_sample_ms","speedup_vs_B1","level_invocations"}.
 */
XASTNN_API xastnn_status xastnn_bench(const char* corpus_path, xastnn_model* model,
                                      const char* config_json, const size_t* batch_sizes,
                                      size_t count, size_t runs, char** out_report);
/* Renders a bench report as an aligned text table. */
XASTNN_API xastnn_status xastnn_bench_format(const char* report_json, char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* XASTNN_XASTNN_H */
