#pragma once

// Full encoder stack plus task heads.
//
// program -> subtree sequence -> subtree embeddings O (GRvU, plain RvNN or
// token mean) -> bidirectional GRU (optional) -> max pool -> code vector c.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "batcher.hpp"
#include "grvu.hpp"
#include "sequence.hpp"
#include "splitter.hpp"
#include "vocabulary.hpp"

namespace xastnn {

enum class Task { kClassify, kClone };

const char* task_name(Task t);
Task parse_task(const std::string& name);

const char* encoder_name(SubtreeEncoder e);

struct ModelConfig {
  std::size_t d = 128;
  std::size_t m = 128;
  std::size_t classes = 2;
  Task task = Task::kClassify;
  SubtreeEncoder encoder = SubtreeEncoder::kGrvu;
  bool use_grtu = true;
  bool grvu_bias = false;
  std::string profile = "minilang";
  Granularity granularity = Granularity::kStatement;
  std::vector<std::string> root_kinds;  // only for the generic-json profile
  double threshold = 0.5;

  // Width of the pooled code vector: 2m with the GRU, d without.
  std::size_t code_dim() const noexcept { return use_grtu ? 2 * m : d; }
  void validate() const;
};

template <typename T>
struct ClassifierHead {
  Parameter<T> weight;  // code_dim x C
  Parameter<T> bias;    // 1 x C

  std::size_t classes() const noexcept { return weight.value.cols(); }
  static ClassifierHead zeros(std::size_t code_dim, std::size_t classes);
};

template <typename T>
struct CloneHead {
  Parameter<T> weight;  // 1 x code_dim
  Parameter<T> bias;    // 1 x 1
  double threshold = 0.5;

  static CloneHead zeros(std::size_t code_dim, double threshold = 0.5);
};

// Logits of a batch of code vectors (B x code_dim) -> B x C.
template <typename T>
Var<T> classifier_logits(Var<T> codes, Var<T> weight, Var<T> bias);
// Pair logits w . |c1 - c2| + b for B pairs -> B x 1.
template <typename T>
Var<T> clone_logits(Var<T> left, Var<T> right, Var<T> weight, Var<T> bias);

// Class probabilities for one code vector (1 x code_dim).
template <typename T>
Tensor<T> classify(const Tensor<T>& code, ClassifierHead<T>& head);
template <typename T>
T clone_score(const Tensor<T>& c1, const Tensor<T>& c2, CloneHead<T>& head);

template <typename T>
class Model {
 public:
  ModelConfig config;
  Vocabulary vocab;
  Parameter<T> embeddings;
  GrvuParams<T> grvu;
  RvnnParams<T> rvnn;
  GrtuParams<T> grtu;
  ClassifierHead<T> classifier;
  CloneHead<T> clone;
  bool freeze_embeddings = false;

  // Random initialization. `pretrained`, if given, must be vocab.size() x d.
  static Model init(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed,
                    const Tensor<T>* pretrained = nullptr);

  // Parameters that receive gradient updates under the current config.
  std::vector<Parameter<T>*> trainable();
  // Every stored parameter, in a fixed order.
  std::vector<Parameter<T>*> all_parameters();

  RootIdentifierSet identifiers() const;
  IndexedSequence prepare(const Ast& ast) const;

  // B x code_dim code vectors of a batch, recorded on `tape`.
  Var<T> encode(Tape<T>& tape, std::span<const IndexedSequence> batch,
                BatchReport* report = nullptr);
  // Subtree embeddings O only (N x d rows in flat order).
  Var<T> subtree_embeddings(Tape<T>& tape, const FlatBatch& flat, std::size_t* level_invocations);

  Tensor<T> code_vectors(std::span<const IndexedSequence> batch);

  Var<T> classify_logits(Tape<T>& tape, Var<T> codes);
  Var<T> clone_logits(Tape<T>& tape, Var<T> left, Var<T> right);
};

}  // namespace xastnn
