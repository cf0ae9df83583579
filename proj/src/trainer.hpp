#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "model.hpp"

namespace xastnn {

struct TrainConfig {
  std::size_t d = 128;
  std::size_t m = 128;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 42;
  Precision precision = Precision::kF32;
  Granularity granularity = Granularity::kStatement;
  bool disable_grvu = false;  // mean of member token embeddings per subtree
  bool disable_grtu = false;  // pool the subtree embeddings directly
  bool use_rvnn = false;      // plain recursive unit instead of the gated one
  Task task = Task::kClassify;
  std::string profile = "minilang";
  std::vector<std::string> root_kinds;
  bool grvu_bias = false;
  double threshold = 0.5;
  std::size_t pretrain_epochs = 0;  // 0 keeps the random embedding init
  bool freeze_embeddings = false;
  double grad_clip = 5.0;           // global norm; 0 disables

  void validate() const;
  SubtreeEncoder encoder() const;
  ModelConfig model_config(std::size_t classes) const;

  nlohmann::json to_json() const;
  // Keys absent from `doc` keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& doc);
};

template <typename T>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Parameter<T>*>& params);
  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Scales gradients so their global L2 norm is at most `max_norm`. Returns the
// norm before clipping.
template <typename T>
double clip_gradients(const std::vector<Parameter<T>*>& params, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double valid_metric = 0;  // accuracy or F1
  double seconds = 0;

  nlohmann::json to_json() const;
};

struct CloneMetrics {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

double accuracy(const std::vector<std::int32_t>& predicted, const std::vector<std::int32_t>& labels);
CloneMetrics clone_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn = 0);
CloneMetrics clone_metrics(const std::vector<std::int32_t>& predicted, const std::vector<std::int32_t>& labels);

template <typename T>
struct TrainResult {
  Model<T> model;  // best validation epoch
  TrainConfig config;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double test_metric = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

template <typename T>
TrainResult<T> train_classifier(const ClassificationDataset& data, const TrainConfig& config,
                                const EpochCallback& on_epoch = {});
template <typename T>
TrainResult<T> train_clone(const CloneDataset& data, const TrainConfig& config,
                           const EpochCallback& on_epoch = {});

template <typename T>
std::vector<std::int32_t> predict_classes(Model<T>& model, const std::vector<IndexedSequence>& seqs,
                                          std::size_t batch_size = 64);
template <typename T>
std::vector<T> predict_clone_scores(Model<T>& model, const std::vector<IndexedSequence>& left,
                                    const std::vector<IndexedSequence>& right,
                                    std::size_t batch_size = 64);

// Empty split -> every record.
template <typename T>
double evaluate_classification(Model<T>& model, const ClassificationDataset& data,
                               std::optional<Split> split = std::nullopt);
template <typename T>
CloneMetrics evaluate_clone(Model<T>& model, const CloneDataset& data,
                            std::optional<Split> split = std::nullopt);

}  // namespace xastnn
