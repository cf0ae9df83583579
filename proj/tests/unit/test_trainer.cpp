#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "synthetic.hpp"
#include "trainer.hpp"

using namespace xastnn;
using nlohmann::json;

namespace {

ClassificationDataset small_classification(std::size_t n, std::uint64_t seed) {
  const auto corpus = classification_corpus(n, seed);
  std::stringstream s;
  write_classification(s, corpus.sources, corpus.labels);
  return read_classification(s);
}

CloneDataset small_clone(std::size_t n, std::uint64_t seed) {
  const auto corpus = clone_corpus(n, seed);
  std::stringstream pairs, progs;
  write_clone_corpus(pairs, progs, corpus);
  return read_clone(pairs, progs);
}

TrainConfig tiny() {
  TrainConfig c;
  c.d = 8;
  c.m = 8;
  c.epochs = 2;
  c.batch_size = 16;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Metrics, AccuracyAndCounts) {
  EXPECT_DOUBLE_EQ(accuracy({1, 2, 3, 0}, {1, 2, 0, 0}), 0.75);
  EXPECT_THROW(accuracy({1}, {1, 2}), Error);
  // 3 tp, 1 fp, 2 fn, 4 tn
  const std::vector<std::int32_t> pred = {1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  const std::vector<std::int32_t> gold = {1, 1, 1, 0, 1, 1, 0, 0, 0, 0};
  const CloneMetrics m = clone_metrics(pred, gold);
  EXPECT_EQ(m.tp, 3u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 2u);
  EXPECT_EQ(m.tn, 4u);
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.6);
  EXPECT_NEAR(m.f1, 2 * 0.75 * 0.6 / 1.35, 1e-15);
}

TEST(Metrics, DegenerateCountsGiveZero) {
  const CloneMetrics m = clone_metrics(0, 0, 0, 5);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
}

TEST(Optimizer, AdamMatchesHandComputation) {
  Parameter<double> p("p", Tensor<double>(1, 2, std::vector<double>{1.0, -1.0}));
  Adam<double> adam(0.1);
  const std::vector<std::vector<double>> grads = {{0.5, -2.0}, {0.1, 3.0}, {-1.0, 0.0}};
  double m[2] = {0, 0}, v[2] = {0, 0}, x[2] = {1.0, -1.0};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    p.grad = Tensor<double>(1, 2, std::vector<double>(grads[t - 1]));
    adam.step({&p});
    for (int k = 0; k < 2; ++k) {
      const double g = grads[t - 1][static_cast<std::size_t>(k)];
      m[k] = 0.9 * m[k] + 0.1 * g;
      v[k] = 0.999 * v[k] + 0.001 * g * g;
      const double mh = m[k] / (1 - std::pow(0.9, t)), vh = v[k] / (1 - std::pow(0.999, t));
      x[k] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(p.value[static_cast<std::size_t>(k)], x[k], 1e-14);
    }
  }
  EXPECT_EQ(adam.steps(), 3u);
}

TEST(Optimizer, ClipScalesToMaxNorm) {
  Parameter<double> a("a", Tensor<double>(1, 2)), b("b", Tensor<double>(1, 1));
  a.grad = Tensor<double>(1, 2, std::vector<double>{3.0, 0.0});
  b.grad = Tensor<double>(1, 1, 4.0);
  EXPECT_DOUBLE_EQ(clip_gradients<double>({&a, &b}, 1.0), 5.0);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad[0], 0.8, 1e-15);
  // Below the limit and with clipping disabled nothing changes.
  EXPECT_NEAR(clip_gradients<double>({&a, &b}, 2.0), 1.0, 1e-15);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  a.grad[0] = 30;
  clip_gradients<double>({&a, &b}, 0.0);
  EXPECT_EQ(a.grad[0], 30.0);
}

TEST(Config, JsonRoundTrip) {
  TrainConfig c;
  c.d = 32;
  c.m = 16;
  c.learning_rate = 0.01;
  c.precision = Precision::kF64;
  c.granularity = Granularity::kToken;
  c.task = Task::kClone;
  c.disable_grtu = true;
  c.root_kinds = {"If"};
  c.profile = "generic-json";
  c.threshold = 0.3;
  const json doc = c.to_json();
  const TrainConfig back = TrainConfig::from_json(json::parse(doc.dump()));
  EXPECT_EQ(back.to_json(), doc);
}

TEST(Config, PartialAndUnknownKeys) {
  const TrainConfig c = TrainConfig::from_json(json::parse(R"({"epochs": 3})"));
  EXPECT_EQ(c.epochs, 3u);
  EXPECT_EQ(c.d, 128u);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_THROW(TrainConfig::from_json(json::parse(R"({"epochz": 3})")), Error);
  EXPECT_THROW(TrainConfig::from_json(json::parse(R"({"precision": "f16"})")), Error);
  EXPECT_THROW(TrainConfig::from_json(json::parse(R"({"epochs": "three"})")), Error);
}

TEST(Config, Validation) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    try {
      c.validate();
    } catch (const Error& e) {
      return e.code() == ErrorCode::kInvalidArgument;
    }
    return false;
  };
  EXPECT_TRUE(bad([](TrainConfig& c) { c.d = 0; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.batch_size = 0; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.epochs = 0; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.learning_rate = -1; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.learning_rate = NAN; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.threshold = 0; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.grad_clip = -1; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.disable_grvu = c.use_rvnn = true; }));
  EXPECT_TRUE(bad([](TrainConfig& c) { c.freeze_embeddings = true; }));
  TrainConfig ok;
  EXPECT_NO_THROW(ok.validate());
}

TEST(Training, DeterministicForFixedSeed) {
  const auto data = small_classification(120, 1);
  auto a = train_classifier<float>(data, tiny());
  auto b = train_classifier<float>(data, tiny());
  ASSERT_EQ(a.history.size(), 2u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].valid_metric, b.history[i].valid_metric);
  }
  auto pa = a.model.all_parameters(), pb = b.model.all_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
  EXPECT_EQ(a.test_metric, b.test_metric);
}

TEST(Training, CallbackSeesEveryEpochAndLossFalls) {
  const auto data = small_classification(200, 2);
  TrainConfig c = tiny();
  c.epochs = 4;
  c.learning_rate = 5e-3;
  std::vector<std::size_t> seen;
  auto r = train_classifier<float>(data, c, [&](const EpochRecord& e) { seen.push_back(e.epoch); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4}));
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  EXPECT_GE(r.best_epoch, 1u);
  EXPECT_LE(r.best_epoch, 4u);
  for (const auto& e : r.history) {
    const json j = e.to_json();
    EXPECT_TRUE(j.contains("epoch") && j.contains("train_loss") && j.contains("valid_metric"));
  }
}

TEST(Training, BestEpochModelIsReturned) {
  const auto data = small_classification(150, 3);
  TrainConfig c = tiny();
  c.epochs = 3;
  auto r = train_classifier<double>(data, c);
  EXPECT_DOUBLE_EQ(evaluate_classification(r.model, data, Split::kValid),
                   r.history[r.best_epoch - 1].valid_metric);
  EXPECT_DOUBLE_EQ(evaluate_classification(r.model, data, Split::kTest), r.test_metric);
}

TEST(Training, NonFiniteLossStops) {
  const auto data = small_classification(60, 4);
  TrainConfig c = tiny();
  c.learning_rate = 1e300;
  c.grad_clip = 0;
  try {
    train_classifier<float>(data, c);
    FAIL() << "expected a non-finite loss";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
  }
}

TEST(Training, CloneTaskRuns) {
  const auto data = small_clone(150, 5);
  TrainConfig c = tiny();
  c.task = Task::kClone;
  auto r = train_clone<float>(data, c);
  EXPECT_EQ(r.history.size(), 2u);
  const CloneMetrics m = evaluate_clone(r.model, data, Split::kTest);
  EXPECT_DOUBLE_EQ(m.f1, r.test_metric);
  const auto scores = predict_clone_scores(r.model, {r.model.prepare(*data.programs.begin()->second.ast)},
                                           {r.model.prepare(*data.programs.begin()->second.ast)});
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_GE(scores[0], 0.0f);
  EXPECT_LE(scores[0], 1.0f);
}

TEST(Training, PretrainedEmbeddingsFrozen) {
  const auto data = small_classification(80, 6);
  TrainConfig c = tiny();
  c.epochs = 1;
  c.pretrain_epochs = 1;
  c.freeze_embeddings = true;
  auto a = train_classifier<float>(data, c);
  c.epochs = 2;
  auto b = train_classifier<float>(data, c);
  // Same pretraining, frozen during supervised training.
  EXPECT_EQ(a.model.embeddings.value, b.model.embeddings.value);
}

TEST(Training, AblationsChangeEncoder) {
  const auto data = small_classification(60, 7);
  TrainConfig c = tiny();
  c.epochs = 1;
  c.disable_grvu = true;
  EXPECT_EQ(train_classifier<float>(data, c).model.config.encoder, SubtreeEncoder::kMeanTokens);
  c.disable_grvu = false;
  c.disable_grtu = true;
  auto r = train_classifier<float>(data, c);
  EXPECT_FALSE(r.model.config.use_grtu);
  EXPECT_EQ(r.model.config.code_dim(), c.d);
}
