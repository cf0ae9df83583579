#pragma once

// Gated recursive unit over statement subtrees, plus the ungated recursive
// baseline used for gradient comparisons.
//
// For node j with input x_j and children states h_jk (row vectors, weights
// applied as W * v):
//
//   z_j  = sigmoid(U_z x_j + sum_k W_z h_jk)
//   r_j  = sigmoid(U_r x_j + sum_k W_r h_jk)
//   h~_j = tanh(U_h x_j + sum_k W_h (h_jk * r_j))
//   h_j  = z_j * sum_k h_jk + (1 - z_j) * h~_j
//
// No bias terms unless GrvuParams::use_bias is set. The hidden state of a
// subtree's root is the subtree embedding.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "autodiff.hpp"
#include "splitter.hpp"
#include "vocabulary.hpp"

namespace xastnn {

template <typename T>
struct GrvuParams {
  std::size_t dim = 0;
  Parameter<T> u_z, w_z, u_r, w_r, u_h, w_h;
  bool use_bias = false;
  Parameter<T> b_z, b_r, b_h;

  // Gate matrices i.i.d. uniform in +-sqrt(6 / (2d)).
  static GrvuParams uniform(std::size_t d, std::mt19937_64& rng, bool use_bias = false);
  // Gate matrices i.i.d. N(0, scale^2).
  static GrvuParams gaussian(std::size_t d, T scale, std::mt19937_64& rng);

  std::vector<Parameter<T>*> parameters();
};

template <typename T>
struct GrvuVars {
  Var<T> u_z, w_z, u_r, w_r, u_h, w_h;
  std::optional<Var<T>> b_z, b_r, b_h;
  std::size_t dim = 0;
};

template <typename T>
GrvuVars<T> bind(Tape<T>& tape, GrvuParams<T>& params);

// Plain recursive unit: h_j = sigmoid(W x_j + sum_k h_jk + b).
template <typename T>
struct RvnnParams {
  std::size_t dim = 0;
  Parameter<T> w, b;

  static RvnnParams gaussian(std::size_t d, T scale, std::mt19937_64& rng);
  std::vector<Parameter<T>*> parameters();
};

template <typename T>
struct RvnnVars {
  Var<T> w, b;
  std::size_t dim = 0;
};

template <typename T>
RvnnVars<T> bind(Tape<T>& tape, RvnnParams<T>& params);

// One node, children summed term by term as written above.
template <typename T>
Var<T> grvu_node(Var<T> x, std::span<const Var<T>> child_states, const GrvuVars<T>& p);
template <typename T>
Tensor<T> grvu_node(const Tensor<T>& x, const std::vector<Tensor<T>>& child_states,
                    GrvuParams<T>& params);

// A whole level at once: row i of `x` is a node input and row i of
// `child_sum` the sum of that node's children states (zeros for leaves).
template <typename T>
Var<T> grvu_level(Var<T> x, Var<T> child_sum, const GrvuVars<T>& p);

template <typename T>
Var<T> rvnn_node(Var<T> x, std::span<const Var<T>> child_states, const RvnnVars<T>& p);
template <typename T>
Tensor<T> rvnn_node(const Tensor<T>& x, const std::vector<Tensor<T>>& child_states,
                    RvnnParams<T>& params);
template <typename T>
Var<T> rvnn_level(Var<T> x, Var<T> child_sum, const RvnnVars<T>& p);

// Row of `embeddings` for the node's token; unknown tokens map to row 0.
template <typename T>
Tensor<T> embed_token(const AstNode& node, const Vocabulary& vocab, const Tensor<T>& embeddings);

// Sequential reference: recursive post-order evaluation over one tree.
template <typename T>
Var<T> encode_tree(const IndexedTree& tree, Var<T> embeddings, const GrvuVars<T>& p);
template <typename T>
Var<T> encode_tree_rvnn(const IndexedTree& tree, Var<T> embeddings, const RvnnVars<T>& p);

template <typename T>
struct SubtreeEmbedding {
  Tensor<T> o;  // 1 x d
  NodeId root_id = 0;
};

template <typename T>
SubtreeEmbedding<T> encode_subtree(const StatementSubtree& subtree, const Ast& ast,
                                   const Vocabulary& vocab, Parameter<T>& embeddings,
                                   GrvuParams<T>& params);

// Each subtree of the sequence encoded on its own, in order.
template <typename T>
std::vector<SubtreeEmbedding<T>> encode_sequence_grvu(const SubtreeSequence& seq,
                                                      const Vocabulary& vocab,
                                                      Parameter<T>& embeddings,
                                                      GrvuParams<T>& params);

struct GradientHealth {
  double grvu_ratio = 0;
  double rvnn_ratio = 0;
};

// Builds a chain tree of `depth` nodes with N(0, 1) inputs drawn from
// `input_seed`, puts loss = sum(h_root) on both encoders and reports
// |dloss/dx_leaf| / |dloss/dx_root| for each.
template <typename T>
GradientHealth gradient_health(std::size_t depth, GrvuParams<T>& grvu, RvnnParams<T>& rvnn,
                               std::uint64_t input_seed);

}  // namespace xastnn
