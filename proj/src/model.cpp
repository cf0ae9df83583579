#include "model.hpp"

#include <cmath>

namespace xastnn {

const char* task_name(Task t) {
  return t == Task::kClassify ? "classify" : "clone";
}

Task parse_task(const std::string& name) {
  if (name == "classify") return Task::kClassify;
  if (name == "clone") return Task::kClone;
  fail(ErrorCode::kInvalidArgument, "unknown task '" + name + "' (expected classify or clone)");
}

const char* encoder_name(SubtreeEncoder e) {
  switch (e) {
    case SubtreeEncoder::kGrvu: return "grvu";
    case SubtreeEncoder::kRvnn: return "rvnn";
    case SubtreeEncoder::kMeanTokens: return "mean";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (d == 0 || m == 0) fail(ErrorCode::kInvalidArgument, "d and m must be positive");
  if (task == Task::kClassify && classes < 2) {
    fail(ErrorCode::kInvalidArgument, "classification needs at least 2 classes");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "clone threshold must lie in (0, 1)");
  }
}

template <typename T>
ClassifierHead<T> ClassifierHead<T>::zeros(std::size_t code_dim, std::size_t classes) {
  return {{"head.cls.w", Tensor<T>(code_dim, classes)}, {"head.cls.b", Tensor<T>(1, classes)}};
}

template <typename T>
CloneHead<T> CloneHead<T>::zeros(std::size_t code_dim, double threshold) {
  CloneHead h{{"head.clone.w", Tensor<T>(1, code_dim)}, {"head.clone.b", Tensor<T>(1, 1)}, threshold};
  return h;
}

template <typename T>
Var<T> classifier_logits(Var<T> codes, Var<T> weight, Var<T> bias) {
  if (codes.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
    fail(ErrorCode::kShapeMismatch, "classifier head expects " + std::to_string(weight.rows()) +
                                        "-wide code vectors, got " + std::to_string(codes.cols()));
  }
  return add_row(matmul(codes, weight), bias);
}

template <typename T>
Var<T> clone_logits(Var<T> left, Var<T> right, Var<T> weight, Var<T> bias) {
  if (!left.value().same_shape(right.value()) || left.cols() != weight.cols() ||
      weight.rows() != 1 || bias.rows() != 1 || bias.cols() != 1) {
    fail(ErrorCode::kShapeMismatch, "clone head expects two " + std::to_string(weight.cols()) +
                                        "-wide code vectors");
  }
  return add_row(matmul_nt(abs_val(sub(left, right)), weight), bias);
}

template <typename T>
Tensor<T> classify(const Tensor<T>& code, ClassifierHead<T>& head) {
  Tape<T> tape(false);
  const Var<T> logits =
      classifier_logits(tape.constant(code), tape.param(head.weight), tape.param(head.bias));
  return softmax_rows(logits.value());
}

template <typename T>
T clone_score(const Tensor<T>& c1, const Tensor<T>& c2, CloneHead<T>& head) {
  Tape<T> tape(false);
  const Var<T> logit = clone_logits(tape.constant(c1), tape.constant(c2), tape.param(head.weight),
                                    tape.param(head.bias));
  return sigmoid(logit).value()[0];
}

template <typename T>
Model<T> Model<T>::init(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed,
                        const Tensor<T>* pretrained) {
  config.validate();
  Model model;
  model.config = config;
  model.vocab = std::move(vocab);
  std::mt19937_64 rng(seed);
  const std::size_t v = model.vocab.size();
  if (pretrained != nullptr) {
    if (pretrained->rows() != v || pretrained->cols() != config.d) {
      fail(ErrorCode::kShapeMismatch, "pretrained table must be " + std::to_string(v) + "x" +
                                          std::to_string(config.d));
    }
    model.embeddings = {"embed", *pretrained};
  } else {
    std::normal_distribution<double> normal(0.0, 0.1);
    Tensor<T> e(v, config.d);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = static_cast<T>(normal(rng));
    model.embeddings = {"embed", std::move(e)};
  }
  switch (config.encoder) {
    case SubtreeEncoder::kGrvu:
      model.grvu = GrvuParams<T>::uniform(config.d, rng, config.grvu_bias);
      break;
    case SubtreeEncoder::kRvnn:
      model.rvnn = RvnnParams<T>::gaussian(
          config.d, static_cast<T>(1.0 / std::sqrt(static_cast<double>(config.d))), rng);
      break;
    case SubtreeEncoder::kMeanTokens:
      break;
  }
  if (config.use_grtu) model.grtu = GrtuParams<T>::uniform(config.d, config.m, rng);
  if (config.task == Task::kClassify) {
    model.classifier = ClassifierHead<T>::zeros(config.code_dim(), config.classes);
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.code_dim()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < model.classifier.weight.value.size(); ++i) {
      model.classifier.weight.value[i] = static_cast<T>(dist(rng));
    }
  } else {
    model.clone = CloneHead<T>::zeros(config.code_dim(), config.threshold);
  }
  return model;
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::all_parameters() {
  std::vector<Parameter<T>*> out{&embeddings};
  auto append = [&](std::vector<Parameter<T>*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  if (config.encoder == SubtreeEncoder::kGrvu) append(grvu.parameters());
  if (config.encoder == SubtreeEncoder::kRvnn) append(rvnn.parameters());
  if (config.use_grtu) append(grtu.parameters());
  if (config.task == Task::kClassify) {
    append({&classifier.weight, &classifier.bias});
  } else {
    append({&clone.weight, &clone.bias});
  }
  return out;
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::trainable() {
  auto out = all_parameters();
  if (freeze_embeddings) out.erase(out.begin());
  return out;
}

template <typename T>
RootIdentifierSet Model<T>::identifiers() const {
  return default_identifiers(config.profile,
                             std::set<std::string>(config.root_kinds.begin(), config.root_kinds.end()));
}

template <typename T>
IndexedSequence Model<T>::prepare(const Ast& ast) const {
  const SubtreeSequence seq = split(ast, identifiers(), config.granularity);
  return index_sequence(to_token_trees(seq), vocab);
}

template <typename T>
Var<T> Model<T>::subtree_embeddings(Tape<T>& tape, const FlatBatch& flat,
                                    std::size_t* level_invocations) {
  const Var<T> e = tape.param(embeddings);
  switch (config.encoder) {
    case SubtreeEncoder::kGrvu:
      return bottom_up(plan_levels(flat), e, bind(tape, grvu), level_invocations);
    case SubtreeEncoder::kRvnn:
      return bottom_up_rvnn(plan_levels(flat), e, bind(tape, rvnn), level_invocations);
    case SubtreeEncoder::kMeanTokens:
      if (level_invocations != nullptr) *level_invocations = 0;
      return mean_token_embeddings(flat, e);
  }
  fail(ErrorCode::kInternal, "unknown subtree encoder");
}

template <typename T>
Var<T> Model<T>::encode(Tape<T>& tape, std::span<const IndexedSequence> batch, BatchReport* report) {
  const FlatBatch flat = flatten(batch);
  std::size_t calls = 0;
  Var<T> rows = subtree_embeddings(tape, flat, &calls);
  if (config.use_grtu) {
    rows = encode_sequences(rows, std::span<const std::size_t>(flat.lengths), bind(tape, grtu));
  }
  if (report != nullptr) {
    *report = describe(flat);
    report->level_invocations = calls;
  }
  return pool_sequences(rows, std::span<const std::size_t>(flat.lengths));
}

template <typename T>
Tensor<T> Model<T>::code_vectors(std::span<const IndexedSequence> batch) {
  Tape<T> tape(false);
  return encode(tape, batch).value();
}

template <typename T>
Var<T> Model<T>::classify_logits(Tape<T>& tape, Var<T> codes) {
  return classifier_logits(codes, tape.param(classifier.weight), tape.param(classifier.bias));
}

template <typename T>
Var<T> Model<T>::clone_logits(Tape<T>& tape, Var<T> left, Var<T> right) {
  return xastnn::clone_logits(left, right, tape.param(clone.weight), tape.param(clone.bias));
}

#define XASTNN_INSTANTIATE_MODEL(T)                                                  \
  template struct ClassifierHead<T>;                                                 \
  template struct CloneHead<T>;                                                      \
  template Var<T> classifier_logits(Var<T>, Var<T>, Var<T>);                         \
  template Var<T> clone_logits(Var<T>, Var<T>, Var<T>, Var<T>);                      \
  template Tensor<T> classify(const Tensor<T>&, ClassifierHead<T>&);                 \
  template T clone_score(const Tensor<T>&, const Tensor<T>&, CloneHead<T>&);         \
  template class Model<T>;

XASTNN_INSTANTIATE_MODEL(float)
XASTNN_INSTANTIATE_MODEL(double)

}  // namespace xastnn
