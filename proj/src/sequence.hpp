#pragma once

// Bidirectional gated recurrent unit over subtree embeddings and max pooling
// to the code vector. Per direction, with zero initial state:
//
//   z_t  = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//   r_t  = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//   h~_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
//   h_t  = z_t * h_{t-1} + (1 - z_t) * h~_t
//
// v_i = [forward_i, backward_i] and c = per-coordinate max over positions.

#include <random>
#include <span>
#include <vector>

#include "autodiff.hpp"

namespace xastnn {

enum class Direction { kForward, kBackward };

template <typename T>
struct GrtuDirection {
  Parameter<T> w_z, w_r, w_h;  // m x d
  Parameter<T> u_z, u_r, u_h;  // m x m
  Parameter<T> b_z, b_r, b_h;  // 1 x m
};

template <typename T>
struct GrtuParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  GrtuDirection<T> forward;
  GrtuDirection<T> backward;

  // Weights uniform in +-1/sqrt(m), biases zero.
  static GrtuParams uniform(std::size_t d, std::size_t m, std::mt19937_64& rng);
  static GrtuParams zeros(std::size_t d, std::size_t m);
  std::vector<Parameter<T>*> parameters();
};

template <typename T>
struct GrtuDirectionVars {
  Var<T> w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h;
};

template <typename T>
struct GrtuVars {
  GrtuDirectionVars<T> forward;
  GrtuDirectionVars<T> backward;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
};

template <typename T>
GrtuVars<T> bind(Tape<T>& tape, GrtuParams<T>& params);

// Runs one direction over several sequences stored back to back in `inputs`
// (sum(lengths) x d). Sequences are packed longest first so each time step is
// one batched cell evaluation. Returns states aligned with the input rows.
template <typename T>
Var<T> grtu_packed(Var<T> inputs, std::span<const std::size_t> lengths,
                   const GrtuDirectionVars<T>& p, Direction direction);

// Single sequence (M x d) -> M x m.
template <typename T>
Var<T> grtu_direction(Var<T> sequence, const GrtuVars<T>& p, Direction direction);
template <typename T>
Tensor<T> grtu_direction(const std::vector<Tensor<T>>& sequence, GrtuParams<T>& params,
                         Direction direction);

// Both directions, concatenated per position: rows x 2m.
template <typename T>
Var<T> encode_sequences(Var<T> inputs, std::span<const std::size_t> lengths, const GrtuVars<T>& p);

template <typename T>
struct EnhancedSequence {
  Tensor<T> v;  // M x 2m
  std::size_t size() const noexcept { return v.rows(); }
};

template <typename T>
EnhancedSequence<T> encode_sequence(const std::vector<Tensor<T>>& sequence, GrtuParams<T>& params);

template <typename T>
struct CodeVector {
  Tensor<T> c;                       // 1 x width
  std::vector<std::size_t> argmax;   // position supplying each coordinate
};

template <typename T>
CodeVector<T> pool(const EnhancedSequence<T>& v);
template <typename T>
CodeVector<T> pool(const Tensor<T>& v);

// Per-sequence max pooling of back-to-back rows: B x width.
template <typename T>
Var<T> pool_sequences(Var<T> rows, std::span<const std::size_t> lengths);

}  // namespace xastnn
