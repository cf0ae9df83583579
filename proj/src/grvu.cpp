#include "grvu.hpp"

#include <cmath>

namespace xastnn {

namespace {

template <typename T>
Tensor<T> uniform_matrix(std::size_t r, std::size_t c, T bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  Tensor<T> t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> gaussian_matrix(std::size_t r, std::size_t c, T scale, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, static_cast<double>(scale));
  Tensor<T> t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
void check_row(const char* what, Var<T> v, std::size_t d) {
  const auto& t = v.value();
  if (t.rows() != 1 || t.cols() != d) {
    fail(ErrorCode::kDimensionMismatch, std::string(what) + " must be 1x" + std::to_string(d) +
                                            ", got " + std::to_string(t.rows()) + "x" +
                                            std::to_string(t.cols()));
  }
}

template <typename T>
Var<T> maybe_bias(Var<T> pre, const std::optional<Var<T>>& b) {
  return b ? add_row(pre, *b) : pre;
}

template <typename T>
std::vector<std::vector<std::size_t>> child_lists(const std::vector<std::int32_t>& parent) {
  std::vector<std::vector<std::size_t>> kids(parent.size());
  for (std::size_t i = 1; i < parent.size(); ++i) {
    kids[static_cast<std::size_t>(parent[i])].push_back(i);
  }
  return kids;
}

}  // namespace

template <typename T>
GrvuParams<T> GrvuParams<T>::uniform(std::size_t d, std::mt19937_64& rng, bool use_bias) {
  const T bound = static_cast<T>(std::sqrt(6.0 / (2.0 * static_cast<double>(d))));
  GrvuParams p;
  p.dim = d;
  p.u_z = {"grvu.u_z", uniform_matrix<T>(d, d, bound, rng)};
  p.w_z = {"grvu.w_z", uniform_matrix<T>(d, d, bound, rng)};
  p.u_r = {"grvu.u_r", uniform_matrix<T>(d, d, bound, rng)};
  p.w_r = {"grvu.w_r", uniform_matrix<T>(d, d, bound, rng)};
  p.u_h = {"grvu.u_h", uniform_matrix<T>(d, d, bound, rng)};
  p.w_h = {"grvu.w_h", uniform_matrix<T>(d, d, bound, rng)};
  p.use_bias = use_bias;
  if (use_bias) {
    p.b_z = {"grvu.b_z", Tensor<T>(1, d)};
    p.b_r = {"grvu.b_r", Tensor<T>(1, d)};
    p.b_h = {"grvu.b_h", Tensor<T>(1, d)};
  }
  return p;
}

template <typename T>
GrvuParams<T> GrvuParams<T>::gaussian(std::size_t d, T scale, std::mt19937_64& rng) {
  GrvuParams p;
  p.dim = d;
  p.u_z = {"grvu.u_z", gaussian_matrix<T>(d, d, scale, rng)};
  p.w_z = {"grvu.w_z", gaussian_matrix<T>(d, d, scale, rng)};
  p.u_r = {"grvu.u_r", gaussian_matrix<T>(d, d, scale, rng)};
  p.w_r = {"grvu.w_r", gaussian_matrix<T>(d, d, scale, rng)};
  p.u_h = {"grvu.u_h", gaussian_matrix<T>(d, d, scale, rng)};
  p.w_h = {"grvu.w_h", gaussian_matrix<T>(d, d, scale, rng)};
  return p;
}

template <typename T>
std::vector<Parameter<T>*> GrvuParams<T>::parameters() {
  std::vector<Parameter<T>*> out{&u_z, &w_z, &u_r, &w_r, &u_h, &w_h};
  if (use_bias) {
    out.push_back(&b_z);
    out.push_back(&b_r);
    out.push_back(&b_h);
  }
  return out;
}

template <typename T>
GrvuVars<T> bind(Tape<T>& tape, GrvuParams<T>& p) {
  for (Parameter<T>* m : {&p.u_z, &p.w_z, &p.u_r, &p.w_r, &p.u_h, &p.w_h}) {
    if (m->value.rows() != p.dim || m->value.cols() != p.dim) {
      fail(ErrorCode::kDimensionMismatch, m->name + " must be " + std::to_string(p.dim) + "x" +
                                              std::to_string(p.dim));
    }
  }
  GrvuVars<T> v;
  v.dim = p.dim;
  v.u_z = tape.param(p.u_z);
  v.w_z = tape.param(p.w_z);
  v.u_r = tape.param(p.u_r);
  v.w_r = tape.param(p.w_r);
  v.u_h = tape.param(p.u_h);
  v.w_h = tape.param(p.w_h);
  if (p.use_bias) {
    v.b_z = tape.param(p.b_z);
    v.b_r = tape.param(p.b_r);
    v.b_h = tape.param(p.b_h);
  }
  return v;
}

template <typename T>
RvnnParams<T> RvnnParams<T>::gaussian(std::size_t d, T scale, std::mt19937_64& rng) {
  RvnnParams p;
  p.dim = d;
  p.w = {"rvnn.w", gaussian_matrix<T>(d, d, scale, rng)};
  p.b = {"rvnn.b", gaussian_matrix<T>(1, d, scale, rng)};
  return p;
}

template <typename T>
std::vector<Parameter<T>*> RvnnParams<T>::parameters() {
  return {&w, &b};
}

template <typename T>
RvnnVars<T> bind(Tape<T>& tape, RvnnParams<T>& p) {
  if (p.w.value.rows() != p.dim || p.w.value.cols() != p.dim || p.b.value.cols() != p.dim) {
    fail(ErrorCode::kDimensionMismatch, "rvnn parameters do not match dimension " +
                                            std::to_string(p.dim));
  }
  return {tape.param(p.w), tape.param(p.b), p.dim};
}

template <typename T>
Var<T> grvu_node(Var<T> x, std::span<const Var<T>> child_states, const GrvuVars<T>& p) {
  check_row("GRvU input", x, p.dim);
  for (const Var<T>& h : child_states) check_row("GRvU child state", h, p.dim);

  Var<T> z_pre = matmul_nt(x, p.u_z);
  Var<T> r_pre = matmul_nt(x, p.u_r);
  for (const Var<T>& h : child_states) {
    z_pre = add(z_pre, matmul_nt(h, p.w_z));
    r_pre = add(r_pre, matmul_nt(h, p.w_r));
  }
  Var<T> z = sigmoid(maybe_bias(z_pre, p.b_z));
  Var<T> r = sigmoid(maybe_bias(r_pre, p.b_r));

  Var<T> cand_pre = matmul_nt(x, p.u_h);
  for (const Var<T>& h : child_states) {
    cand_pre = add(cand_pre, matmul_nt(hadamard(h, r), p.w_h));
  }
  Var<T> cand = tanh_act(maybe_bias(cand_pre, p.b_h));

  Var<T> out = hadamard(one_minus(z), cand);
  if (!child_states.empty()) {
    Var<T> child_sum = child_states.front();
    for (std::size_t k = 1; k < child_states.size(); ++k) child_sum = add(child_sum, child_states[k]);
    out = add(hadamard(z, child_sum), out);
  }
  return out;
}

template <typename T>
Tensor<T> grvu_node(const Tensor<T>& x, const std::vector<Tensor<T>>& child_states,
                    GrvuParams<T>& params) {
  Tape<T> tape(false);
  std::vector<Var<T>> kids;
  for (const auto& h : child_states) kids.push_back(tape.constant(h));
  return grvu_node<T>(tape.constant(x), kids, bind(tape, params)).value();
}

template <typename T>
Var<T> grvu_level(Var<T> x, Var<T> child_sum, const GrvuVars<T>& p) {
  if (x.cols() != p.dim || child_sum.cols() != p.dim || x.rows() != child_sum.rows()) {
    fail(ErrorCode::kDimensionMismatch, "grvu_level inputs do not match dimension " +
                                            std::to_string(p.dim));
  }
  Var<T> z = sigmoid(maybe_bias(add(matmul_nt(x, p.u_z), matmul_nt(child_sum, p.w_z)), p.b_z));
  Var<T> r = sigmoid(maybe_bias(add(matmul_nt(x, p.u_r), matmul_nt(child_sum, p.w_r)), p.b_r));
  // sum_k W_h (h_jk * r_j) == W_h (r_j * sum_k h_jk)
  Var<T> cand = tanh_act(
      maybe_bias(add(matmul_nt(x, p.u_h), matmul_nt(hadamard(child_sum, r), p.w_h)), p.b_h));
  return add(hadamard(z, child_sum), hadamard(one_minus(z), cand));
}

template <typename T>
Var<T> rvnn_node(Var<T> x, std::span<const Var<T>> child_states, const RvnnVars<T>& p) {
  check_row("RvNN input", x, p.dim);
  Var<T> pre = add(matmul_nt(x, p.w), p.b);
  for (const Var<T>& h : child_states) {
    check_row("RvNN child state", h, p.dim);
    pre = add(pre, h);
  }
  return sigmoid(pre);
}

template <typename T>
Tensor<T> rvnn_node(const Tensor<T>& x, const std::vector<Tensor<T>>& child_states,
                    RvnnParams<T>& params) {
  Tape<T> tape(false);
  std::vector<Var<T>> kids;
  for (const auto& h : child_states) kids.push_back(tape.constant(h));
  return rvnn_node<T>(tape.constant(x), kids, bind(tape, params)).value();
}

template <typename T>
Var<T> rvnn_level(Var<T> x, Var<T> child_sum, const RvnnVars<T>& p) {
  if (x.cols() != p.dim || child_sum.cols() != p.dim || x.rows() != child_sum.rows()) {
    fail(ErrorCode::kDimensionMismatch, "rvnn_level inputs do not match dimension " +
                                            std::to_string(p.dim));
  }
  return sigmoid(add_row(add(matmul_nt(x, p.w), child_sum), p.b));
}

template <typename T>
Tensor<T> embed_token(const AstNode& node, const Vocabulary& vocab, const Tensor<T>& embeddings) {
  if (embeddings.rows() != vocab.size()) {
    fail(ErrorCode::kDimensionMismatch, "embedding table has " + std::to_string(embeddings.rows()) +
                                            " rows for a vocabulary of " +
                                            std::to_string(vocab.size()));
  }
  return embeddings.row_copy(static_cast<std::size_t>(vocab.index(token_string(node))));
}

template <typename T>
Var<T> encode_tree(const IndexedTree& tree, Var<T> embeddings, const GrvuVars<T>& p) {
  if (tree.size() == 0) fail(ErrorCode::kEmptyInput, "empty subtree");
  const auto kids = child_lists<T>(tree.parent);
  std::vector<Var<T>> state(tree.size());
  for (std::size_t i = tree.size(); i-- > 0;) {
    const std::int32_t tok = tree.token_ids[i];
    Var<T> x = gather_rows(embeddings, std::span<const std::int32_t>(&tok, 1));
    std::vector<Var<T>> children;
    for (std::size_t c : kids[i]) children.push_back(state[c]);
    state[i] = grvu_node<T>(x, children, p);
  }
  return state[0];
}

template <typename T>
Var<T> encode_tree_rvnn(const IndexedTree& tree, Var<T> embeddings, const RvnnVars<T>& p) {
  if (tree.size() == 0) fail(ErrorCode::kEmptyInput, "empty subtree");
  const auto kids = child_lists<T>(tree.parent);
  std::vector<Var<T>> state(tree.size());
  for (std::size_t i = tree.size(); i-- > 0;) {
    const std::int32_t tok = tree.token_ids[i];
    Var<T> x = gather_rows(embeddings, std::span<const std::int32_t>(&tok, 1));
    std::vector<Var<T>> children;
    for (std::size_t c : kids[i]) children.push_back(state[c]);
    state[i] = rvnn_node<T>(x, children, p);
  }
  return state[0];
}

template <typename T>
SubtreeEmbedding<T> encode_subtree(const StatementSubtree& subtree, const Ast& ast,
                                   const Vocabulary& vocab, Parameter<T>& embeddings,
                                   GrvuParams<T>& params) {
  if (embeddings.value.cols() != params.dim) {
    fail(ErrorCode::kDimensionMismatch, "embedding width " + std::to_string(embeddings.value.cols()) +
                                            " differs from GRvU dimension " +
                                            std::to_string(params.dim));
  }
  Tape<T> tape(false);
  const IndexedTree tree = index_tree(to_token_tree(subtree, ast), vocab);
  Var<T> root = encode_tree(tree, tape.param(embeddings), bind(tape, params));
  return {root.value(), subtree.root_id};
}

template <typename T>
std::vector<SubtreeEmbedding<T>> encode_sequence_grvu(const SubtreeSequence& seq,
                                                      const Vocabulary& vocab,
                                                      Parameter<T>& embeddings,
                                                      GrvuParams<T>& params) {
  if (seq.items.empty()) fail(ErrorCode::kEmptySequence, "cannot encode an empty sequence");
  std::vector<SubtreeEmbedding<T>> out;
  out.reserve(seq.items.size());
  for (const auto& s : seq.items) {
    out.push_back(encode_subtree(s, *seq.source_ast, vocab, embeddings, params));
  }
  return out;
}

template <typename T>
GradientHealth gradient_health(std::size_t depth, GrvuParams<T>& grvu, RvnnParams<T>& rvnn,
                               std::uint64_t input_seed) {
  if (depth < 2) fail(ErrorCode::kInvalidArgument, "gradient_health needs depth >= 2");
  if (grvu.dim != rvnn.dim) fail(ErrorCode::kDimensionMismatch, "encoders differ in dimension");
  const std::size_t d = grvu.dim;
  std::mt19937_64 rng(input_seed);
  std::vector<Tensor<T>> inputs;
  for (std::size_t i = 0; i < depth; ++i) inputs.push_back(gaussian_matrix<T>(1, d, T(1), rng));

  auto ratio = [&](auto&& node_fn, Tape<T>& tape) {
    std::vector<Var<T>> xs;
    for (const auto& x : inputs) xs.push_back(tape.input(x));
    // xs[0] is the root, xs[depth-1] the leaf.
    Var<T> h = node_fn(xs[depth - 1], std::span<const Var<T>>());
    for (std::size_t i = depth - 1; i-- > 0;) {
      std::array<Var<T>, 1> child{h};
      h = node_fn(xs[i], std::span<const Var<T>>(child));
    }
    tape.backward(sum(h));
    auto norm = [](const Tensor<T>& g) {
      double s = 0;
      for (std::size_t i = 0; i < g.size(); ++i) s += static_cast<double>(g[i]) * g[i];
      return std::sqrt(s);
    };
    return norm(tape.grad(xs[depth - 1])) / norm(tape.grad(xs[0]));
  };

  GradientHealth out;
  {
    Tape<T> tape;
    const GrvuVars<T> v = bind(tape, grvu);
    out.grvu_ratio = ratio([&](Var<T> x, std::span<const Var<T>> c) { return grvu_node<T>(x, c, v); }, tape);
  }
  {
    Tape<T> tape;
    const RvnnVars<T> v = bind(tape, rvnn);
    out.rvnn_ratio = ratio([&](Var<T> x, std::span<const Var<T>> c) { return rvnn_node<T>(x, c, v); }, tape);
  }
  return out;
}

#define XASTNN_INSTANTIATE_GRVU(T)                                                              \
  template struct GrvuParams<T>;                                                                \
  template struct RvnnParams<T>;                                                                \
  template GrvuVars<T> bind(Tape<T>&, GrvuParams<T>&);                                          \
  template RvnnVars<T> bind(Tape<T>&, RvnnParams<T>&);                                          \
  template Var<T> grvu_node(Var<T>, std::span<const Var<T>>, const GrvuVars<T>&);               \
  template Tensor<T> grvu_node(const Tensor<T>&, const std::vector<Tensor<T>>&, GrvuParams<T>&); \
  template Var<T> grvu_level(Var<T>, Var<T>, const GrvuVars<T>&);                               \
  template Var<T> rvnn_node(Var<T>, std::span<const Var<T>>, const RvnnVars<T>&);               \
  template Tensor<T> rvnn_node(const Tensor<T>&, const std::vector<Tensor<T>>&, RvnnParams<T>&); \
  template Var<T> rvnn_level(Var<T>, Var<T>, const RvnnVars<T>&);                               \
  template Tensor<T> embed_token(const AstNode&, const Vocabulary&, const Tensor<T>&);           \
  template Var<T> encode_tree(const IndexedTree&, Var<T>, const GrvuVars<T>&);                  \
  template Var<T> encode_tree_rvnn(const IndexedTree&, Var<T>, const RvnnVars<T>&);             \
  template SubtreeEmbedding<T> encode_subtree(const StatementSubtree&, const Ast&,              \
                                              const Vocabulary&, Parameter<T>&, GrvuParams<T>&); \
  template std::vector<SubtreeEmbedding<T>> encode_sequence_grvu(                               \
      const SubtreeSequence&, const Vocabulary&, Parameter<T>&, GrvuParams<T>&);                \
  template GradientHealth gradient_health(std::size_t, GrvuParams<T>&, RvnnParams<T>&,          \
                                          std::uint64_t);

XASTNN_INSTANTIATE_GRVU(float)
XASTNN_INSTANTIATE_GRVU(double)

}  // namespace xastnn
