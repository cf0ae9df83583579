#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation applied to its variables in creation order,
// so ids are already a topological order and backward() is a single reverse
// sweep. Tapes are single-threaded; distinct tapes may live on distinct
// threads. Parameters are read during forward and receive accumulated
// gradients in backward().

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace xastnn {

template <typename T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor<T> value)
      : name(std::move(name)),
        value(std::move(value)),
        grad(this->value.rows(), this->value.cols()) {}

  void zero_grad() {
    if (!grad.same_shape(value)) grad = Tensor<T>(value.rows(), value.cols());
    grad.fill(T(0));
  }

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

template <typename T>
class Tape;

template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  // With record == false no backward closures are kept (inference mode).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  // Leaf whose gradient can be read back with grad() after backward().
  Var<T> input(Tensor<T> value);
  // Binds a parameter; binding the same parameter twice returns the same var.
  Var<T> param(Parameter<T>& p);

  const Tensor<T>& value(Var<T> v) const { return nodes_[v.id].value; }
  // Gradient of the last backward() loss with respect to v (zeros if none).
  Tensor<T> grad(Var<T> v) const;

  // Accumulates d(loss)/d(parameter) into every bound parameter's grad.
  void backward(Var<T> loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  // Inference only: drops every node from `mark` on and re-pushes `keep`'s
  // value as a constant, so scratch buffers are freed while still hot. On a
  // recording tape this returns `keep` untouched.
  Var<T> collapse(std::size_t mark, Var<T> keep);
  bool recording() const noexcept { return record_; }

  // Op-author interface.
  Var<T> push(Tensor<T> value, bool requires_grad, BackwardFn fn);
  Tensor<T>& grad_ref(std::uint32_t id);
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::uint32_t> bound_;
  bool record_;
};

// Elementwise and linear-algebra ops. Binary elementwise ops need identical
// shapes; the only broadcast is add_row (matrix + row vector).
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
// a * transpose(b); b is n x k for a of m x k.
template <typename T> Var<T> matmul_nt(Var<T> a, Var<T> b);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> hadamard(Var<T> a, Var<T> b);
template <typename T> Var<T> add_row(Var<T> a, Var<T> row);
template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> one_minus(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);
template <typename T> Var<T> tanh_act(Var<T> a);
template <typename T> Var<T> abs_val(Var<T> a);
// axis 0 stacks rows, axis 1 joins columns.
template <typename T> Var<T> concat(Var<T> a, Var<T> b, int axis);
template <typename T> Var<T> concat_rows(std::span<const Var<T>> parts);
template <typename T> Var<T> gather_rows(Var<T> a, std::span<const std::int32_t> rows);
template <typename T> Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end);
// Row r of the result is the sum of rows of `values` labelled r, summed in
// ascending row order. Empty groups give zero rows.
template <typename T>
Var<T> segment_sum(Var<T> values, std::span<const std::int32_t> segment_ids,
                   std::size_t groups);
// Per-group, per-column maximum. argmax receives the winning row of `values`
// for each (group, column), first occurrence on ties.
template <typename T>
Var<T> segment_max(Var<T> values, std::span<const std::int32_t> segment_ids,
                   std::size_t groups, std::vector<std::size_t>* argmax);
template <typename T>
std::pair<Var<T>, std::vector<std::size_t>> max_over_rows(Var<T> v);
template <typename T> Var<T> scale_rows(Var<T> a, std::span<const T> factors);
template <typename T> Var<T> sum(Var<T> a);
// Mean softmax cross-entropy of logits (n x C) against class labels.
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const std::int32_t> labels);
// Mean binary cross-entropy of logits (n x 1) against 0/1 labels.
template <typename T>
Var<T> bce_with_logits(Var<T> logits, std::span<const std::int32_t> labels);

template <typename T> Tensor<T> softmax_rows(const Tensor<T>& logits);

// Central-difference gradient of fn with respect to every element of p.
// fn is evaluated with p.value perturbed in place; p is restored afterwards.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T()>& fn, Parameter<T>& p,
                           T epsilon = T(1e-5));

}  // namespace xastnn
