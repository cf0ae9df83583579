// Command-line front end. Talks to the library only through xastnn.h.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xastnn/xastnn.h"

using nlohmann::json;

namespace {

// Status carried out of a command; maps to the process exit code.
struct Failure {
  xastnn_status status;
  std::string message;
};

void check(xastnn_status s) {
  if (s != XASTNN_OK) throw Failure{s, xastnn_last_error()};
}

void user_error(const std::string& message) { throw Failure{XASTNN_ERR_INVALID_ARGUMENT, message}; }

struct Text {
  char* p = nullptr;
  ~Text() { xastnn_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

using AstPtr = std::unique_ptr<xastnn_ast, decltype(&xastnn_ast_free)>;
using ModelPtr = std::unique_ptr<xastnn_model, decltype(&xastnn_model_free)>;

AstPtr load_ast(const std::string& path) {
  xastnn_ast* a = nullptr;
  check(xastnn_ast_load(path.c_str(), &a));
  return {a, &xastnn_ast_free};
}

ModelPtr load_model(const std::string& path) {
  xastnn_model* m = nullptr;
  check(xastnn_model_load(path.c_str(), &m));
  return {m, &xastnn_model_free};
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Options shared by every subcommand; also the keys of the config file.
struct Options {
  std::string format = "text";
  std::uint64_t seed = 42;
  std::size_t d = 128, m = 128, batch_size = 32, epochs = 10, pretrain_epochs = 0;
  double learning_rate = 1e-3, threshold = 0.5, grad_clip = 5.0;
  std::string precision = "f32", granularity = "statement", task = "classify", profile = "minilang";
  std::vector<std::string> root_kinds;
  bool disable_grvu = false, disable_grtu = false, use_rvnn = false, grvu_bias = false,
       freeze_embeddings = false;
  std::map<std::string, CLI::Option*> train_keys;
  CLI::Option* seed_opt = nullptr;

  // Training options that were set on the command line or in the config file.
  json train_config() const {
    json c = json::object();
    c["seed"] = seed;
    auto put = [&](const char* key, const json& value) {
      if (train_keys.at(key)->count() > 0) c[key] = value;
    };
    put("d", d);
    put("m", m);
    put("batch_size", batch_size);
    put("epochs", epochs);
    put("pretrain_epochs", pretrain_epochs);
    put("learning_rate", learning_rate);
    put("threshold", threshold);
    put("grad_clip", grad_clip);
    put("precision", precision);
    put("granularity", granularity);
    put("task", task);
    put("profile", profile);
    put("root_kinds", root_kinds);
    put("disable_grvu", disable_grvu);
    put("disable_grtu", disable_grtu);
    put("use_rvnn", use_rvnn);
    put("grvu_bias", grvu_bias);
    put("freeze_embeddings", freeze_embeddings);
    return c;
  }

  json split_options() const {
    json o = {{"profile", profile}, {"granularity", granularity}};
    if (!root_kinds.empty()) o["root_kinds"] = root_kinds;
    return o;
  }

  bool as_json() const { return format == "json"; }
};

void register_options(CLI::App& app, Options& o) {
  app.add_option("--format", o.format, "Report format")->check(CLI::IsMember({"text", "json"}));
  o.seed_opt = app.add_option("--seed", o.seed, "Random seed (training, data splits, corpora)");
  auto& k = o.train_keys;
  k["d"] = app.add_option("--d", o.d, "Token embedding width");
  k["m"] = app.add_option("--m", o.m, "GRU hidden width per direction");
  k["batch_size"] = app.add_option("--batch_size", o.batch_size, "Training batch size");
  k["epochs"] = app.add_option("--epochs", o.epochs, "Training epochs");
  k["pretrain_epochs"] = app.add_option("--pretrain_epochs", o.pretrain_epochs, "Skip-gram epochs (0 = none)");
  k["learning_rate"] = app.add_option("--learning_rate", o.learning_rate, "Adam step size");
  k["threshold"] = app.add_option("--threshold", o.threshold, "Clone decision threshold");
  k["grad_clip"] = app.add_option("--grad_clip", o.grad_clip, "Global gradient-norm cap (0 = off)");
  k["precision"] = app.add_option("--precision", o.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  k["granularity"] = app.add_option("--granularity", o.granularity, "statement, program or token")
                         ->check(CLI::IsMember({"statement", "program", "token"}));
  k["task"] = app.add_option("--task", o.task, "classify or clone")->check(CLI::IsMember({"classify", "clone"}));
  k["profile"] = app.add_option("--profile", o.profile, "minilang or generic-json");
  k["root_kinds"] = app.add_option("--root_kinds", o.root_kinds, "Statement kinds (generic-json)")->delimiter(',');
  k["disable_grvu"] = app.add_flag("--disable_grvu", o.disable_grvu, "Mean of token embeddings per subtree");
  k["disable_grtu"] = app.add_flag("--disable_grtu", o.disable_grtu, "Pool subtree embeddings directly");
  k["use_rvnn"] = app.add_flag("--use_rvnn", o.use_rvnn, "Plain recursive unit instead of GRvU");
  k["grvu_bias"] = app.add_flag("--grvu_bias", o.grvu_bias, "Bias terms in the GRvU gates");
  k["freeze_embeddings"] = app.add_flag("--freeze_embeddings", o.freeze_embeddings, "Keep pretrained embeddings fixed");
}

void print_json(const json& doc) { std::cout << doc.dump(2) << '\n'; }

int run(int argc, char** argv) {
  CLI::App app{"Tree-structured code representation: split, train, evaluate, embed, benchmark"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key = value file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  Options o;
  register_options(app, o);

  std::string input, output, model_path, programs, metrics_log, split_name, kind;
  std::size_t n = 1000, runs = 5;
  std::vector<std::size_t> batch_sizes = {1, 2, 4, 8, 16, 32};

  auto* split = app.add_subcommand("split", "Print the statement subtree sequence of a program");
  split->add_option("source", input, "Source file or AST JSON")->required();

  auto* export_ast = app.add_subcommand("export-ast", "Write the AST interchange document");
  export_ast->add_option("source", input, "Source file or AST JSON")->required();
  export_ast->add_option("-o,--output", output, "Output file (default stdout)");

  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("data", input, "Classification records, or clone pairs with --programs")->required();
  train->add_option("--programs", programs, "Program table for clone pairs");
  train->add_option("-o,--output", output, "Checkpoint path")->required();
  train->add_option("--metrics", metrics_log, "Append per-epoch records to this file");

  auto* eval = app.add_subcommand("eval", "Score a dataset with a checkpoint");
  eval->add_option("data", input, "Dataset in the checkpoint's task format")->required();
  eval->add_option("--model", model_path, "Checkpoint")->required();
  eval->add_option("--programs", programs, "Program table for clone pairs");
  eval->add_option("--split", split_name, "train, valid or test (default all)")
      ->check(CLI::IsMember({"train", "valid", "test"}));

  auto* embed = app.add_subcommand("embed", "Print the code vector of a program");
  embed->add_option("source", input, "Source file or AST JSON")->required();
  embed->add_option("--model", model_path, "Checkpoint")->required();

  auto* bench = app.add_subcommand("bench", "Time the representation phase per batch size");
  bench->add_option("corpus", input, "One {\"source\"} or {\"ast\"} record per line")->required();
  bench->add_option("--model", model_path, "Checkpoint (default: fresh model from options)");
  bench->add_option("--batch-sizes", batch_sizes, "Batch sizes")->delimiter(',');
  bench->add_option("--runs", runs, "Timed runs per batch size (median reported)")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic corpus");
  gen->add_option("kind", kind, "classify, clone or homogeneous")
      ->required()
      ->check(CLI::IsMember({"classify", "clone", "homogeneous"}));
  gen->add_option("-n,--count", n, "Programs (pairs for clone)")->check(CLI::PositiveNumber);
  gen->add_option("-o,--output", output, "Records file")->required();
  gen->add_option("--programs", programs, "Program table (clone)");

  for (CLI::App* sub : {split, export_ast, train, eval, embed, bench, gen}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*split) {
    AstPtr ast = load_ast(input);
    Text out;
    check(xastnn_split(ast.get(), o.split_options().dump().c_str(), &out.p));
    const json items = json::parse(out.str());
    if (o.as_json()) {
      print_json(items);
    } else {
      for (const auto& it : items) std::cout << it["label"].get<std::string>() << '\n';
    }
  } else if (*export_ast) {
    AstPtr ast = load_ast(input);
    Text out;
    check(xastnn_ast_to_json(ast.get(), 2, &out.p));
    if (output.empty()) {
      std::cout << out.str() << '\n';
    } else {
      std::ofstream f(output);
      if (!f) user_error("cannot write '" + output + "'");
      f << out.str() << '\n';
    }
  } else if (*train) {
    const json config = o.train_config();
    if (config.value("task", "classify") == "clone" && programs.empty()) {
      user_error("clone training needs --programs");
    }
    std::ofstream log;
    if (!metrics_log.empty()) {
      log.open(metrics_log, std::ios::app);
      if (!log) user_error("cannot open '" + metrics_log + "'");
    }
    struct Sink {
      std::ofstream* log;
      bool verbose;
    } sink{metrics_log.empty() ? nullptr : &log, !o.as_json()};
    auto on_epoch = [](const char* record, void* user) {
      auto* s = static_cast<Sink*>(user);
      if (s->log != nullptr) *s->log << record << '\n' << std::flush;
      if (s->verbose) {
        const json r = json::parse(record);
        std::cerr << "epoch " << r["epoch"].get<std::size_t>() << "  loss "
                  << fixed(r["train_loss"].get<double>(), 4) << "  valid "
                  << fixed(r["valid_metric"].get<double>(), 4) << '\n';
      }
    };
    xastnn_model* raw = nullptr;
    Text report;
    check(xastnn_train(config.dump().c_str(), input.c_str(), programs.empty() ? nullptr : programs.c_str(),
                       on_epoch, &sink, &raw, &report.p));
    ModelPtr model(raw, &xastnn_model_free);
    check(xastnn_model_save(model.get(), output.c_str()));
    json r = json::parse(report.str());
    r["checkpoint"] = output;
    if (log.is_open()) {
      log << json{{"final", true},
                  {"metric", r["metric"]},
                  {"best_epoch", r["best_epoch"]},
                  {"test_metric", r["test_metric"]}}.dump()
          << '\n';
    }
    if (o.as_json()) {
      print_json(r);
    } else {
      std::cout << "best epoch " << r["best_epoch"].get<std::size_t>() << ", test "
                << r["metric"].get<std::string>() << " " << fixed(r["test_metric"].get<double>(), 4)
                << "\ncheckpoint " << output << '\n';
    }
  } else if (*eval) {
    ModelPtr model = load_model(model_path);
    Text report;
    check(xastnn_evaluate(model.get(), input.c_str(), programs.empty() ? nullptr : programs.c_str(),
                          split_name.empty() ? nullptr : split_name.c_str(), o.seed, &report.p));
    const json r = json::parse(report.str());
    if (o.as_json()) {
      print_json(r);
    } else if (r.contains("accuracy")) {
      std::cout << "split " << r["split"].get<std::string>() << "  n " << r["count"].get<std::size_t>()
                << "  accuracy " << fixed(r["accuracy"].get<double>(), 4) << '\n';
    } else {
      std::cout << "split " << r["split"].get<std::string>() << "  n " << r["count"].get<std::size_t>()
                << "  precision " << fixed(r["precision"].get<double>(), 4) << "  recall "
                << fixed(r["recall"].get<double>(), 4) << "  f1 " << fixed(r["f1"].get<double>(), 4) << '\n';
    }
  } else if (*embed) {
    ModelPtr model = load_model(model_path);
    AstPtr ast = load_ast(input);
    std::size_t dim = 0;
    check(xastnn_model_code_dim(model.get(), &dim));
    std::vector<double> v(dim);
    check(xastnn_model_embed(model.get(), ast.get(), v.data(), v.size(), &dim));
    if (o.as_json()) {
      std::cout << json(v).dump() << '\n';
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", v[i]);
        std::cout << (i ? " " : "") << buf;
      }
      std::cout << '\n';
    }
  } else if (*bench) {
    ModelPtr model(nullptr, &xastnn_model_free);
    if (!model_path.empty()) model = load_model(model_path);
    Text report;
    check(xastnn_bench(input.c_str(), model.get(), o.train_config().dump().c_str(), batch_sizes.data(),
                       batch_sizes.size(), runs, &report.p));
    if (o.as_json()) {
      print_json(json::parse(report.str()));
    } else {
      Text table;
      check(xastnn_bench_format(report.p, &table.p));
      std::cout << table.str();
    }
  } else if (*gen) {
    if (kind == "clone" && programs.empty()) user_error("clone corpora need --programs");
    check(xastnn_generate_corpus(kind.c_str(), n, o.seed, output.c_str(),
                                 programs.empty() ? nullptr : programs.c_str()));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.status == XASTNN_ERR_INTERNAL ? 2 : 1;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed library output: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
