#include "xastnn/xastnn.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <set>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "ast.hpp"
#include "bench.hpp"
#include "checkpoint.hpp"
#include "dataset.hpp"
#include "minilang.hpp"
#include "splitter.hpp"
#include "synthetic.hpp"
#include "trainer.hpp"

using nlohmann::json;
using namespace xastnn;

struct xastnn_ast {
  Ast ast;
};

struct xastnn_model {
  TrainConfig config;
  std::variant<Model<float>, Model<double>> model;
};

namespace {

thread_local std::string g_last_error;

xastnn_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax: return XASTNN_ERR_SYNTAX;
    case ErrorCode::kSchema: return XASTNN_ERR_SCHEMA;
    case ErrorCode::kUnknownProfile:
    case ErrorCode::kEmptyIdentifierSet:
    case ErrorCode::kInvalidArgument: return XASTNN_ERR_INVALID_ARGUMENT;
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kBadSegmentId:
    case ErrorCode::kNotScalar:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kLengthMismatch: return XASTNN_ERR_SHAPE;
    case ErrorCode::kEmptyInput:
    case ErrorCode::kEmptySequence:
    case ErrorCode::kEmptyBatch:
    case ErrorCode::kEmptyCorpus:
    case ErrorCode::kDataFormat: return XASTNN_ERR_DATA;
    case ErrorCode::kNonFiniteLoss: return XASTNN_ERR_NUMERIC;
    case ErrorCode::kIo: return XASTNN_ERR_IO;
    case ErrorCode::kCheckpoint: return XASTNN_ERR_CHECKPOINT;
    case ErrorCode::kInternal: return XASTNN_ERR_INTERNAL;
  }
  return XASTNN_ERR_INTERNAL;
}

xastnn_status failed(xastnn_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

template <typename F>
xastnn_status guard(F&& body) noexcept {
  try {
    body();
    return XASTNN_OK;
  } catch (const Error& e) {
    return failed(status_of(e.code()), e.what());
  } catch (const json::exception& e) {
    return failed(XASTNN_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return failed(XASTNN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return failed(XASTNN_ERR_INTERNAL, e.what());
  } catch (...) {
    return failed(XASTNN_ERR_INTERNAL, "unknown failure");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::kInvalidArgument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  return out;
}

json parse_options(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("options are not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::kInvalidArgument, "options must be a JSON object");
  return doc;
}

TrainConfig config_from(const char* text) {
  TrainConfig c = TrainConfig::from_json(parse_options(text));
  c.validate();
  return c;
}

json history_json(const std::vector<EpochRecord>& history) {
  json h = json::array();
  for (const auto& r : history) h.push_back(r.to_json());
  return h;
}

json metrics_json(const CloneMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn}, {"tn", m.tn}};
}

EpochCallback forward_epochs(xastnn_epoch_callback cb, void* user) {
  if (cb == nullptr) return {};
  return [cb, user](const EpochRecord& r) { cb(r.to_json().dump().c_str(), user); };
}

template <typename T>
std::size_t classes_of(const Model<T>& m) {
  return m.config.task == Task::kClassify ? m.classifier.classes() : 0;
}

// Program records in file order; ids are optional for bench corpora.
std::vector<Ast> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<Ast> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::kDataFormat, where + ": " + e.what());
    }
    if (!rec.is_object()) fail(ErrorCode::kDataFormat, where + ": record must be an object");
    if (!rec.contains("id")) rec["id"] = "line" + std::to_string(lineno);
    out.push_back(*program_from_json(rec, where).ast);
  }
  if (out.empty()) fail(ErrorCode::kEmptyCorpus, "'" + path + "' holds no programs");
  return out;
}

template <typename T>
json bench_with(Model<T>& model, const std::vector<Ast>& corpus, std::vector<std::size_t> sizes,
                std::size_t runs) {
  std::vector<IndexedSequence> seqs;
  seqs.reserve(corpus.size());
  for (const Ast& a : corpus) seqs.push_back(model.prepare(a));
  return bench_to_json(run_bench(model, seqs, std::move(sizes), runs));
}

template <typename T>
Model<T> fresh_model(const TrainConfig& c, const std::vector<Ast>& corpus) {
  const std::set<std::string> kinds(c.root_kinds.begin(), c.root_kinds.end());
  const RootIdentifierSet ids = default_identifiers(c.profile, kinds);
  std::unordered_map<std::string, std::size_t> counts;
  for (const Ast& a : corpus) {
    for (const TokenTree& t : to_token_trees(split(a, ids, c.granularity))) {
      for (const std::string& tok : t.tokens) ++counts[tok];
    }
  }
  return Model<T>::init(c.model_config(2), Vocabulary::from_counts(counts), c.seed);
}

}  // namespace

extern "C" {

const char* xastnn_version(void) { return "1.0.0"; }

const char* xastnn_status_name(xastnn_status status) {
  switch (status) {
    case XASTNN_OK: return "ok";
    case XASTNN_ERR_SYNTAX: return "syntax error";
    case XASTNN_ERR_SCHEMA: return "schema error";
    case XASTNN_ERR_DATA: return "data error";
    case XASTNN_ERR_IO: return "i/o error";
    case XASTNN_ERR_CHECKPOINT: return "checkpoint error";
    case XASTNN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case XASTNN_ERR_NUMERIC: return "numeric error";
    case XASTNN_ERR_SHAPE: return "shape error";
    case XASTNN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* xastnn_last_error(void) { return g_last_error.c_str(); }

void xastnn_string_free(char* s) { std::free(s); }

xastnn_status xastnn_ast_parse(const char* source, xastnn_ast** out) {
  return guard([&] {
    require(source, "source");
    require(out, "out");
    *out = new xastnn_ast{parse_minilang(source)};
  });
}

xastnn_status xastnn_ast_from_json(const char* document, xastnn_ast** out) {
  return guard([&] {
    require(document, "document");
    require(out, "out");
    json doc;
    try {
      doc = json::parse(document);
    } catch (const json::exception& e) {
      fail(ErrorCode::kSchema, std::string("AST document is not valid JSON: ") + e.what());
    }
    *out = new xastnn_ast{import_ast_json(doc)};
  });
}

xastnn_status xastnn_ast_load(const char* path, xastnn_ast** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    const std::string p(path);
    const std::string text = read_file(p);
    if (p.size() >= 5 && p.compare(p.size() - 5, 5, ".json") == 0) {
      json doc;
      try {
        doc = json::parse(text);
      } catch (const json::exception& e) {
        fail(ErrorCode::kSchema, p + ": not valid JSON: " + e.what());
      }
      *out = new xastnn_ast{import_ast_json(doc)};
    } else {
      *out = new xastnn_ast{parse_minilang(text)};
    }
  });
}

xastnn_status xastnn_ast_to_json(const xastnn_ast* ast, int indent, char** out) {
  return guard([&] {
    require(ast, "ast");
    require(out, "out");
    *out = dup_string(export_ast_json(ast->ast).dump(indent < 0 ? -1 : indent));
  });
}

xastnn_status xastnn_ast_stats_get(const xastnn_ast* ast, xastnn_ast_stats* out) {
  return guard([&] {
    require(ast, "ast");
    require(out, "out");
    const AstStats s = ast_stats(ast->ast);
    *out = {s.depth, s.node_count, s.token_count};
  });
}

void xastnn_ast_free(xastnn_ast* ast) { delete ast; }

xastnn_status xastnn_split(const xastnn_ast* ast, const char* options_json, char** out) {
  return guard([&] {
    require(ast, "ast");
    require(out, "out");
    const json opts = parse_options(options_json);
    std::string profile = "minilang";
    Granularity g = Granularity::kStatement;
    std::set<std::string> kinds;
    for (const auto& [key, value] : opts.items()) {
      if (key == "profile") profile = value.get<std::string>();
      else if (key == "granularity") g = parse_granularity(value.get<std::string>());
      else if (key == "root_kinds") kinds = value.get<std::set<std::string>>();
      else fail(ErrorCode::kInvalidArgument, "unknown split option '" + key + "'");
    }
    const SubtreeSequence seq = split(ast->ast, default_identifiers(profile, kinds), g);
    json items = json::array();
    for (const StatementSubtree& s : seq.items) {
      items.push_back({{"label", s.label},
                       {"root_id", s.root_id},
                       {"members", s.member_ids.size()},
                       {"depth", s.delimiter ? 0 : subtree_depth(s, ast->ast)},
                       {"delimiter", s.delimiter}});
    }
    *out = dup_string(items.dump());
  });
}

xastnn_status xastnn_generate_corpus(const char* kind, size_t n, uint64_t seed, const char* path,
                                     const char* programs_path) {
  return guard([&] {
    require(kind, "kind");
    require(path, "path");
    if (n == 0) fail(ErrorCode::kInvalidArgument, "corpus size must be positive");
    const std::string k(kind);
    if (k == "classify") {
      const ClassificationCorpus c = classification_corpus(n, seed);
      auto out = open_out(path);
      write_classification(out, c.sources, c.labels);
    } else if (k == "clone") {
      require(programs_path, "programs_path");
      const CloneCorpus c = clone_corpus(n, seed);
      auto pairs = open_out(path);
      auto programs = open_out(programs_path);
      write_clone_corpus(pairs, programs, c);
    } else if (k == "homogeneous") {
      auto out = open_out(path);
      const auto sources = homogeneous_corpus(n, seed);
      for (std::size_t i = 0; i < sources.size(); ++i) {
        out << json{{"id", "h" + std::to_string(i)}, {"source", sources[i]}}.dump() << '\n';
      }
    } else {
      fail(ErrorCode::kInvalidArgument, "unknown corpus kind '" + k + "' (classify, clone, homogeneous)");
    }
  });
}

xastnn_status xastnn_train(const char* config_json, const char* data_path, const char* programs_path,
                           xastnn_epoch_callback on_epoch, void* user, xastnn_model** out_model,
                           char** out_report) {
  return guard([&] {
    require(data_path, "data_path");
    require(out_model, "out_model");
    const TrainConfig c = config_from(config_json);
    const EpochCallback cb = forward_epochs(on_epoch, user);
    json report = {{"task", task_name(c.task)}, {"precision", precision_name(c.precision)}};
    auto model = std::make_unique<xastnn_model>();
    model->config = c;
    auto run = [&]<typename T>(T) {
      if (c.task == Task::kClassify) {
        const ClassificationDataset data = read_classification_file(data_path, c.seed);
        TrainResult<T> r = train_classifier<T>(data, c, cb);
        report["metric"] = "accuracy";
        report["best_epoch"] = r.best_epoch;
        report["test_metric"] = r.test_metric;
        report["history"] = history_json(r.history);
        model->model = std::move(r.model);
      } else {
        require(programs_path, "programs_path");
        const CloneDataset data = read_clone_files(data_path, programs_path, c.seed);
        TrainResult<T> r = train_clone<T>(data, c, cb);
        report["metric"] = "f1";
        report["best_epoch"] = r.best_epoch;
        report["test_metric"] = r.test_metric;
        report["history"] = history_json(r.history);
        report["test"] = metrics_json(evaluate_clone(r.model, data, Split::kTest));
        model->model = std::move(r.model);
      }
    };
    if (c.precision == Precision::kF32) run(float{});
    else run(double{});
    if (out_report != nullptr) *out_report = dup_string(report.dump());
    *out_model = model.release();
  });
}

xastnn_status xastnn_model_load(const char* path, xastnn_model** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    LoadedCheckpoint ck = load_checkpoint(path);
    *out = new xastnn_model{std::move(ck.config), std::move(ck.model)};
  });
}

xastnn_status xastnn_model_save(const xastnn_model* model, const char* path) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    // save_checkpoint takes a mutable model for parameter enumeration only.
    auto& m = const_cast<xastnn_model&>(*model);
    std::visit([&](auto& mm) { save_checkpoint(path, mm, m.config); }, m.model);
  });
}

xastnn_status xastnn_model_info(const xastnn_model* model, char** out) {
  return guard([&] {
    require(model, "model");
    require(out, "out");
    json info = std::visit(
        [&](const auto& m) {
          return json{{"config", model->config.to_json()},
                      {"code_dim", m.config.code_dim()},
                      {"vocab_size", m.vocab.size()},
                      {"classes", classes_of(m)}};
        },
        model->model);
    *out = dup_string(info.dump());
  });
}

xastnn_status xastnn_model_code_dim(const xastnn_model* model, size_t* out) {
  return guard([&] {
    require(model, "model");
    require(out, "out");
    *out = std::visit([](const auto& m) { return m.config.code_dim(); }, model->model);
  });
}

xastnn_status xastnn_model_embed(xastnn_model* model, const xastnn_ast* ast, double* out, size_t capacity,
                                 size_t* written) {
  return guard([&] {
    require(model, "model");
    require(ast, "ast");
    require(out, "out");
    std::visit(
        [&](auto& m) {
          const std::size_t dim = m.config.code_dim();
          if (capacity < dim) {
            fail(ErrorCode::kInvalidArgument,
                 "output buffer holds " + std::to_string(capacity) + " values, need " + std::to_string(dim));
          }
          const IndexedSequence seq = m.prepare(ast->ast);
          const auto code = m.code_vectors(std::span<const IndexedSequence>(&seq, 1));
          for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<double>(code[i]);
          if (written != nullptr) *written = dim;
        },
        model->model);
  });
}

void xastnn_model_free(xastnn_model* model) { delete model; }

xastnn_status xastnn_evaluate(xastnn_model* model, const char* data_path, const char* programs_path,
                              const char* split, uint64_t seed, char** out_report) {
  return guard([&] {
    require(model, "model");
    require(data_path, "data_path");
    require(out_report, "out_report");
    std::optional<Split> which;
    if (split != nullptr && *split != '\0') which = parse_split(split);
    json report = {{"task", task_name(model->config.task)},
                   {"split", which ? split_name(*which) : "all"}};
    std::visit(
        [&](auto& m) {
          if (m.config.task == Task::kClassify) {
            const ClassificationDataset data = read_classification_file(data_path, seed);
            report["count"] = which ? data.subset(*which).size() : data.records.size();
            report["accuracy"] = evaluate_classification(m, data, which);
          } else {
            require(programs_path, "programs_path");
            const CloneDataset data = read_clone_files(data_path, programs_path, seed);
            report["count"] = which ? data.subset(*which).size() : data.pairs.size();
            report.update(metrics_json(evaluate_clone(m, data, which)));
          }
        },
        model->model);
    *out_report = dup_string(report.dump());
  });
}

xastnn_status xastnn_bench(const char* corpus_path, xastnn_model* model, const char* config_json,
                           const size_t* batch_sizes, size_t count, size_t runs, char** out_report) {
  return guard([&] {
    require(corpus_path, "corpus_path");
    require(out_report, "out_report");
    if (count > 0) require(batch_sizes, "batch_sizes");
    const std::vector<std::size_t> sizes(batch_sizes, batch_sizes + count);
    const std::vector<Ast> corpus = read_corpus(corpus_path);
    json report;
    if (model != nullptr) {
      report = std::visit([&](auto& m) { return bench_with(m, corpus, sizes, runs); }, model->model);
    } else {
      const TrainConfig c = config_from(config_json);
      if (c.precision == Precision::kF32) {
        Model<float> m = fresh_model<float>(c, corpus);
        report = bench_with(m, corpus, sizes, runs);
      } else {
        Model<double> m = fresh_model<double>(c, corpus);
        report = bench_with(m, corpus, sizes, runs);
      }
    }
    *out_report = dup_string(report.dump());
  });
}

xastnn_status xastnn_bench_format(const char* report_json, char** out_text) {
  return guard([&] {
    require(report_json, "report_json");
    require(out_text, "out_text");
    *out_text = dup_string(bench_to_text(bench_from_json(json::parse(report_json))));
  });
}

}  // extern "C"
