#include "trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "word2vec.hpp"

namespace xastnn {

void TrainConfig::validate() const {
  if (d == 0 || m == 0) fail(ErrorCode::kInvalidArgument, "d and m must be positive");
  if (batch_size == 0) fail(ErrorCode::kInvalidArgument, "batch size must be positive");
  if (epochs == 0) fail(ErrorCode::kInvalidArgument, "epochs must be positive");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
  }
  if (disable_grvu && use_rvnn) {
    fail(ErrorCode::kInvalidArgument, "disable_grvu and use_rvnn cannot both be set");
  }
  if (!(threshold > 0 && threshold < 1)) fail(ErrorCode::kInvalidArgument, "threshold must lie in (0, 1)");
  if (grad_clip < 0) fail(ErrorCode::kInvalidArgument, "grad_clip must be >= 0");
  if (freeze_embeddings && pretrain_epochs == 0) {
    fail(ErrorCode::kInvalidArgument, "freeze_embeddings needs pretrained embeddings");
  }
}

SubtreeEncoder TrainConfig::encoder() const {
  if (disable_grvu) return SubtreeEncoder::kMeanTokens;
  if (use_rvnn) return SubtreeEncoder::kRvnn;
  return SubtreeEncoder::kGrvu;
}

ModelConfig TrainConfig::model_config(std::size_t classes) const {
  ModelConfig mc;
  mc.d = d;
  mc.m = m;
  mc.classes = classes;
  mc.task = task;
  mc.encoder = encoder();
  mc.use_grtu = !disable_grtu;
  mc.grvu_bias = grvu_bias;
  mc.profile = profile;
  mc.granularity = granularity;
  mc.root_kinds = root_kinds;
  mc.threshold = threshold;
  return mc;
}

nlohmann::json TrainConfig::to_json() const {
  return {
      {"d", d},
      {"m", m},
      {"learning_rate", learning_rate},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"seed", seed},
      {"precision", precision_name(precision)},
      {"granularity", granularity_name(granularity)},
      {"disable_grvu", disable_grvu},
      {"disable_grtu", disable_grtu},
      {"use_rvnn", use_rvnn},
      {"task", task_name(task)},
      {"profile", profile},
      {"root_kinds", root_kinds},
      {"grvu_bias", grvu_bias},
      {"threshold", threshold},
      {"pretrain_epochs", pretrain_epochs},
      {"freeze_embeddings", freeze_embeddings},
      {"grad_clip", grad_clip},
  };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorCode::kInvalidArgument, "config must be an object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "d") c.d = value.get<std::size_t>();
      else if (key == "m") c.m = value.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "precision") c.precision = parse_precision(value.get<std::string>());
      else if (key == "granularity") c.granularity = parse_granularity(value.get<std::string>());
      else if (key == "disable_grvu") c.disable_grvu = value.get<bool>();
      else if (key == "disable_grtu") c.disable_grtu = value.get<bool>();
      else if (key == "use_rvnn") c.use_rvnn = value.get<bool>();
      else if (key == "task") c.task = parse_task(value.get<std::string>());
      else if (key == "profile") c.profile = value.get<std::string>();
      else if (key == "root_kinds") c.root_kinds = value.get<std::vector<std::string>>();
      else if (key == "grvu_bias") c.grvu_bias = value.get<bool>();
      else if (key == "threshold") c.threshold = value.get<double>();
      else if (key == "pretrain_epochs") c.pretrain_epochs = value.get<std::size_t>();
      else if (key == "freeze_embeddings") c.freeze_embeddings = value.get<bool>();
      else if (key == "grad_clip") c.grad_clip = value.get<double>();
      else fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad config value: ") + e.what());
  }
  return c;
}

template <typename T>
void Adam<T>::step(const std::vector<Parameter<T>*>& params) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->value.size(), 0.0);
      v_[i].assign(params[i]->value.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = *params[i];
    if (!p.grad.same_shape(p.value)) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = static_cast<double>(p.grad[k]);
      m[k] = beta1_ * m[k] + (1 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1 - beta2_) * g * g;
      const double update = lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
      p.value[k] = static_cast<T>(static_cast<double>(p.value[k]) - update);
    }
  }
}

template <typename T>
double clip_gradients(const std::vector<Parameter<T>*>& params, double max_norm) {
  double sq = 0;
  for (const Parameter<T>* p : params) {
    for (std::size_t k = 0; k < p->grad.size(); ++k) sq += static_cast<double>(p->grad[k]) * p->grad[k];
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T f = static_cast<T>(max_norm / norm);
    for (Parameter<T>* p : params) {
      for (std::size_t k = 0; k < p->grad.size(); ++k) p->grad[k] *= f;
    }
  }
  return norm;
}

nlohmann::json EpochRecord::to_json() const {
  return {{"epoch", epoch}, {"train_loss", train_loss}, {"valid_metric", valid_metric}};
}

double accuracy(const std::vector<std::int32_t>& predicted, const std::vector<std::int32_t>& labels) {
  if (predicted.size() != labels.size()) fail(ErrorCode::kLengthMismatch, "prediction count mismatch");
  if (labels.empty()) return 0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) ok += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(labels.size());
}

CloneMetrics clone_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  CloneMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.precision = tp + fp == 0 ? 0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall == 0 ? 0 : 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

CloneMetrics clone_metrics(const std::vector<std::int32_t>& predicted, const std::vector<std::int32_t>& labels) {
  if (predicted.size() != labels.size()) fail(ErrorCode::kLengthMismatch, "prediction count mismatch");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] == 1) {
      (labels[i] == 1 ? tp : fp)++;
    } else {
      (labels[i] == 1 ? fn : tn)++;
    }
  }
  return clone_metrics(tp, fp, fn, tn);
}

namespace {

std::vector<TokenTree> token_trees(const Ast& ast, const RootIdentifierSet& ids, Granularity g) {
  return to_token_trees(split(ast, ids, g));
}

void count_tokens(const std::vector<TokenTree>& trees, std::unordered_map<std::string, std::size_t>& counts) {
  for (const TokenTree& t : trees) {
    for (const std::string& tok : t.tokens) ++counts[tok];
  }
}

// Builds the model, optionally from skip-gram embeddings over the training trees.
template <typename T>
Model<T> make_model(const TrainConfig& config, std::size_t classes,
                    const std::vector<const std::vector<TokenTree>*>& train_trees) {
  const ModelConfig mc = config.model_config(classes);
  Model<T> model;
  if (config.pretrain_epochs > 0) {
    std::vector<std::vector<std::string>> streams;
    for (const auto* trees : train_trees) {
      for (const TokenTree& t : *trees) streams.push_back(t.tokens);
    }
    SkipGramConfig sg;
    sg.dim = config.d;
    sg.epochs = config.pretrain_epochs;
    sg.seed = config.seed;
    const EmbeddingTable<T> table = pretrain_embeddings<T>(streams, sg);
    model = Model<T>::init(mc, table.vocab, config.seed, &table.table);
  } else {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto* trees : train_trees) count_tokens(*trees, counts);
    if (counts.empty()) fail(ErrorCode::kDataFormat, "training split has no tokens");
    model = Model<T>::init(mc, Vocabulary::from_counts(counts), config.seed);
  }
  model.freeze_embeddings = config.freeze_embeddings;
  return model;
}

template <typename T>
void check_finite(T loss, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(static_cast<double>(loss))) {
    std::ostringstream msg;
    msg << "loss became " << loss << " at epoch " << epoch << ", batch " << batch;
    fail(ErrorCode::kNonFiniteLoss, msg.str());
  }
}

template <typename T>
double train_step(Model<T>& model, Adam<T>& adam, const TrainConfig& config, Tape<T>& tape, Var<T> loss,
                  std::size_t epoch, std::size_t batch) {
  const T value = loss.value()[0];
  check_finite(value, epoch, batch);
  const auto params = model.trainable();
  for (Parameter<T>* p : model.all_parameters()) p->zero_grad();
  tape.backward(loss);
  const double norm = clip_gradients(params, config.grad_clip);
  if (!std::isfinite(norm)) {
    fail(ErrorCode::kNonFiniteLoss, "non-finite gradient norm at epoch " + std::to_string(epoch) +
                                        ", batch " + std::to_string(batch));
  }
  adam.step(params);
  return static_cast<double>(value);
}

template <typename X>
std::vector<X> pick(const std::vector<X>& items, std::span<const std::size_t> idx) {
  std::vector<X> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(items[i]);
  return out;
}

}  // namespace

template <typename T>
std::vector<std::int32_t> predict_classes(Model<T>& model, const std::vector<IndexedSequence>& seqs,
                                          std::size_t batch_size) {
  std::vector<std::int32_t> out;
  out.reserve(seqs.size());
  for (std::size_t start = 0; start < seqs.size(); start += batch_size) {
    const std::size_t end = std::min(seqs.size(), start + batch_size);
    Tape<T> tape(false);
    const Var<T> codes = model.encode(tape, std::span<const IndexedSequence>(seqs.data() + start, end - start));
    const Tensor<T>& logits = model.classify_logits(tape, codes).value();
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      const auto row = logits.row_span(r);
      out.push_back(static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

template <typename T>
std::vector<T> predict_clone_scores(Model<T>& model, const std::vector<IndexedSequence>& left,
                                    const std::vector<IndexedSequence>& right, std::size_t batch_size) {
  if (left.size() != right.size()) fail(ErrorCode::kLengthMismatch, "pair sides differ in length");
  std::vector<T> out;
  out.reserve(left.size());
  for (std::size_t start = 0; start < left.size(); start += batch_size) {
    const std::size_t end = std::min(left.size(), start + batch_size);
    const std::size_t b = end - start;
    std::vector<IndexedSequence> both(left.begin() + static_cast<std::ptrdiff_t>(start),
                                      left.begin() + static_cast<std::ptrdiff_t>(end));
    both.insert(both.end(), right.begin() + static_cast<std::ptrdiff_t>(start),
                right.begin() + static_cast<std::ptrdiff_t>(end));
    Tape<T> tape(false);
    const Var<T> codes = model.encode(tape, both);
    const Var<T> logits = model.clone_logits(tape, slice_rows(codes, 0, b), slice_rows(codes, b, 2 * b));
    const Tensor<T>& p = sigmoid(logits).value();
    for (std::size_t i = 0; i < b; ++i) out.push_back(p[i]);
  }
  return out;
}

template <typename T>
TrainResult<T> train_classifier(const ClassificationDataset& data, const TrainConfig& config,
                                const EpochCallback& on_epoch) {
  config.validate();
  if (config.task != Task::kClassify) fail(ErrorCode::kInvalidArgument, "config task is not classify");
  if (data.classes < 2) fail(ErrorCode::kDataFormat, "need at least two classes");
  const RootIdentifierSet ids =
      default_identifiers(config.profile, {config.root_kinds.begin(), config.root_kinds.end()});
  std::vector<std::vector<TokenTree>> trees;
  trees.reserve(data.records.size());
  for (const auto& r : data.records) trees.push_back(token_trees(*r.program.ast, ids, config.granularity));

  std::vector<std::size_t> train_idx, valid_idx, test_idx;
  std::vector<const std::vector<TokenTree>*> train_trees;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    switch (data.records[i].split) {
      case Split::kTrain:
        train_idx.push_back(i);
        train_trees.push_back(&trees[i]);
        break;
      case Split::kValid: valid_idx.push_back(i); break;
      case Split::kTest: test_idx.push_back(i); break;
    }
  }
  if (train_idx.empty()) fail(ErrorCode::kDataFormat, "training split is empty");

  TrainResult<T> result{make_model<T>(config, data.classes, train_trees), config, {}, 0, 0};
  Model<T>& model = result.model;
  std::vector<IndexedSequence> seqs;
  std::vector<std::int32_t> labels;
  seqs.reserve(trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) {
    seqs.push_back(index_sequence(trees[i], model.vocab));
    labels.push_back(data.records[i].label);
  }
  const auto& select_idx = valid_idx.empty() ? train_idx : valid_idx;
  const auto select_seqs = pick(seqs, select_idx);
  const auto select_labels = pick(labels, select_idx);

  Model<T> best = model;
  double best_metric = -1;
  Adam<T> adam(config.learning_rate);
  std::mt19937_64 rng(config.seed ^ 0x5eedULL);
  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(config.batch_size, order.size() - start));
      const auto batch = pick(seqs, idx);
      const auto batch_labels = pick(labels, idx);
      Tape<T> tape;
      const Var<T> logits = model.classify_logits(tape, model.encode(tape, batch));
      const Var<T> loss = softmax_cross_entropy(logits, std::span<const std::int32_t>(batch_labels));
      loss_sum += train_step(model, adam, config, tape, loss, epoch, batches);
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.valid_metric = accuracy(predict_classes(model, select_seqs), select_labels);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.valid_metric > best_metric) {
      best_metric = rec.valid_metric;
      best = model;
      result.best_epoch = epoch;
    }
  }
  result.model = std::move(best);
  if (!test_idx.empty()) {
    result.test_metric = accuracy(predict_classes(result.model, pick(seqs, test_idx)), pick(labels, test_idx));
  } else {
    result.test_metric = best_metric;
  }
  return result;
}

template <typename T>
TrainResult<T> train_clone(const CloneDataset& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (config.task != Task::kClone) fail(ErrorCode::kInvalidArgument, "config task is not clone");
  const RootIdentifierSet ids =
      default_identifiers(config.profile, {config.root_kinds.begin(), config.root_kinds.end()});

  // Programs in a stable order so vocabulary ties and indices are reproducible.
  std::vector<std::string> names;
  names.reserve(data.programs.size());
  for (const auto& [id, _] : data.programs) names.push_back(id);
  std::sort(names.begin(), names.end());
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<TokenTree>> trees;
  for (const std::string& id : names) {
    slot[id] = trees.size();
    trees.push_back(token_trees(*data.programs.at(id).ast, ids, config.granularity));
  }

  std::vector<std::size_t> train_idx, valid_idx, test_idx;
  std::vector<char> in_train(trees.size(), 0);
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const ClonePair& p = data.pairs[i];
    switch (p.split) {
      case Split::kTrain:
        train_idx.push_back(i);
        in_train[slot.at(p.id1)] = in_train[slot.at(p.id2)] = 1;
        break;
      case Split::kValid: valid_idx.push_back(i); break;
      case Split::kTest: test_idx.push_back(i); break;
    }
  }
  if (train_idx.empty()) fail(ErrorCode::kDataFormat, "training split is empty");
  std::vector<const std::vector<TokenTree>*> train_trees;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    if (in_train[i]) train_trees.push_back(&trees[i]);
  }

  TrainResult<T> result{make_model<T>(config, 2, train_trees), config, {}, 0, 0};
  Model<T>& model = result.model;
  std::vector<IndexedSequence> programs;
  programs.reserve(trees.size());
  for (const auto& t : trees) programs.push_back(index_sequence(t, model.vocab));

  std::vector<IndexedSequence> left, right;
  std::vector<std::int32_t> labels;
  for (const ClonePair& p : data.pairs) {
    left.push_back(programs[slot.at(p.id1)]);
    right.push_back(programs[slot.at(p.id2)]);
    labels.push_back(p.label);
  }
  auto metric_on = [&](Model<T>& mdl, const std::vector<std::size_t>& idx) {
    const auto scores = predict_clone_scores(mdl, pick(left, idx), pick(right, idx));
    std::vector<std::int32_t> pred;
    for (T s : scores) pred.push_back(static_cast<double>(s) >= mdl.clone.threshold ? 1 : 0);
    return clone_metrics(pred, pick(labels, idx)).f1;
  };
  const auto& select_idx = valid_idx.empty() ? train_idx : valid_idx;

  Model<T> best = model;
  double best_metric = -1;
  Adam<T> adam(config.learning_rate);
  std::mt19937_64 rng(config.seed ^ 0x5eedULL);
  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(config.batch_size, order.size() - start));
      const std::size_t b = idx.size();
      std::vector<IndexedSequence> both = pick(left, idx);
      const auto r = pick(right, idx);
      both.insert(both.end(), r.begin(), r.end());
      const auto batch_labels = pick(labels, idx);
      Tape<T> tape;
      const Var<T> codes = model.encode(tape, both);
      const Var<T> logits = model.clone_logits(tape, slice_rows(codes, 0, b), slice_rows(codes, b, 2 * b));
      const Var<T> loss = bce_with_logits(logits, std::span<const std::int32_t>(batch_labels));
      loss_sum += train_step(model, adam, config, tape, loss, epoch, batches);
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.valid_metric = metric_on(model, select_idx);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.valid_metric > best_metric) {
      best_metric = rec.valid_metric;
      best = model;
      result.best_epoch = epoch;
    }
  }
  result.model = std::move(best);
  result.test_metric = test_idx.empty() ? best_metric : metric_on(result.model, test_idx);
  return result;
}

template <typename T>
double evaluate_classification(Model<T>& model, const ClassificationDataset& data, std::optional<Split> split) {
  std::vector<IndexedSequence> seqs;
  std::vector<std::int32_t> labels;
  for (const auto& r : data.records) {
    if (split && r.split != *split) continue;
    if (r.label < 0 || static_cast<std::size_t>(r.label) >= model.config.classes) {
      fail(ErrorCode::kDataFormat, "label " + std::to_string(r.label) + " out of range for " +
                                       std::to_string(model.config.classes) + " classes");
    }
    seqs.push_back(model.prepare(*r.program.ast));
    labels.push_back(r.label);
  }
  if (seqs.empty()) return 0;
  return accuracy(predict_classes(model, seqs), labels);
}

template <typename T>
CloneMetrics evaluate_clone(Model<T>& model, const CloneDataset& data, std::optional<Split> split) {
  std::unordered_map<std::string, IndexedSequence> cache;
  auto get = [&](const std::string& id) -> const IndexedSequence& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, model.prepare(*data.programs.at(id).ast)).first;
    return it->second;
  };
  std::vector<IndexedSequence> left, right;
  std::vector<std::int32_t> labels;
  for (const ClonePair& p : data.pairs) {
    if (split && p.split != *split) continue;
    left.push_back(get(p.id1));
    right.push_back(get(p.id2));
    labels.push_back(p.label);
  }
  if (labels.empty()) return {};
  const auto scores = predict_clone_scores(model, left, right);
  std::vector<std::int32_t> pred;
  for (T s : scores) pred.push_back(static_cast<double>(s) >= model.clone.threshold ? 1 : 0);
  return clone_metrics(pred, labels);
}

#define XASTNN_INSTANTIATE_TRAINER(T)                                                                 \
  template class Adam<T>;                                                                             \
  template double clip_gradients(const std::vector<Parameter<T>*>&, double);                          \
  template TrainResult<T> train_classifier(const ClassificationDataset&, const TrainConfig&,          \
                                           const EpochCallback&);                                     \
  template TrainResult<T> train_clone(const CloneDataset&, const TrainConfig&, const EpochCallback&); \
  template std::vector<std::int32_t> predict_classes(Model<T>&, const std::vector<IndexedSequence>&,  \
                                                     std::size_t);                                    \
  template std::vector<T> predict_clone_scores(Model<T>&, const std::vector<IndexedSequence>&,        \
                                               const std::vector<IndexedSequence>&, std::size_t);     \
  template double evaluate_classification(Model<T>&, const ClassificationDataset&,                    \
                                          std::optional<Split>);                                      \
  template CloneMetrics evaluate_clone(Model<T>&, const CloneDataset&, std::optional<Split>);

XASTNN_INSTANTIATE_TRAINER(float)
XASTNN_INSTANTIATE_TRAINER(double)

}  // namespace xastnn
