#include "autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace xastnn {

const char* precision_name(Precision p) {
  return p == Precision::kF32 ? "f32" : "f64";
}

Precision parse_precision(const std::string& name) {
  if (name == "f32" || name == "float" || name == "float32") return Precision::kF32;
  if (name == "f64" || name == "double" || name == "float64") return Precision::kF64;
  fail(ErrorCode::kInvalidArgument, "unknown precision '" + name + "'");
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<RowMat<T>> as_mat(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<const RowMat<T>> as_mat(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": " +
                                        shape_str(a.rows(), a.cols()) + " vs " +
                                        shape_str(b.rows(), b.cols()));
  }
}

template <typename T>
Tape<T>& tape_of(Var<T> a) {
  if (a.tape == nullptr) fail(ErrorCode::kInvalidArgument, "unbound variable");
  return *a.tape;
}

template <typename T>
Tape<T>& tape_of(Var<T> a, Var<T> b) {
  if (a.tape != b.tape) fail(ErrorCode::kInvalidArgument, "variables on different tapes");
  return tape_of(a);
}

template <typename T>
bool any_grad(Tape<T>& t, std::initializer_list<std::uint32_t> ids) {
  for (auto id : ids) {
    if (t.requires_grad(id)) return true;
  }
  return false;
}

template <typename T, typename F>
Var<T> unary_elementwise(Var<T> a, F&& f, std::function<T(T x, T y)> dydx) {
  Tape<T>& t = tape_of(a);
  const Tensor<T>& x = t.value(a);
  Tensor<T> y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::uint32_t ia = a.id;
  return t.push(std::move(y), t.requires_grad(ia),
                [ia, dydx](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& xv = tp.value({&tp, ia});
                  const Tensor<T>& yv = tp.value({&tp, self});
                  const Tensor<T>& g = tp.grad_ref(self);
                  Tensor<T>& ga = tp.grad_ref(ia);
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i] * dydx(xv[i], yv[i]);
                  }
                });
}

// Elementwise op whose derivative depends only on the output.
template <typename T, typename D>
Var<T> from_output(Var<T> a, Tensor<T> y, D dydx) {
  Tape<T>& t = tape_of(a);
  const std::uint32_t ia = a.id;
  return t.push(std::move(y), t.requires_grad(ia),
                [ia, dydx](Tape<T>& tp, std::uint32_t self) {
                  const auto yv = as_mat(tp.value({&tp, self})).array();
                  const auto g = as_mat(tp.grad_ref(self)).array();
                  as_mat(tp.grad_ref(ia)).array() += g * dydx(yv);
                });
}

}  // namespace

// --- Tape -------------------------------------------------------------------

template <typename T>
Var<T> Tape<T>::push(Tensor<T> value, bool requires_grad, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (record_ && requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  return push(std::move(value), false, nullptr);
}

template <typename T>
Var<T> Tape<T>::input(Tensor<T> value) {
  return push(std::move(value), true, nullptr);
}

template <typename T>
Var<T> Tape<T>::collapse(std::size_t mark, Var<T> keep) {
  if (record_ || keep.id < mark) return keep;
  Tensor<T> kept = std::move(nodes_[keep.id].value);
  while (nodes_.size() > mark) nodes_.pop_back();
  std::erase_if(bound_, [mark](const auto& kv) { return kv.second >= mark; });
  return constant(std::move(kept));
}

template <typename T>
Var<T> Tape<T>::param(Parameter<T>& p) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return {this, it->second};
  Var<T> v = push(p.value, true, nullptr);
  nodes_[v.id].param = &p;
  bound_.emplace(&p, v.id);
  return v;
}

template <typename T>
Tensor<T>& Tape<T>::grad_ref(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) {
    n.grad = Tensor<T>(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

template <typename T>
Tensor<T> Tape<T>::grad(Var<T> v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor<T>(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this) fail(ErrorCode::kInvalidArgument, "loss from another tape");
  const Tensor<T>& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    fail(ErrorCode::kNotScalar, "backward needs a 1x1 loss, got " +
                                    shape_str(lv.rows(), lv.cols()));
  }
  if (!record_) fail(ErrorCode::kInvalidArgument, "backward on a non-recording tape");
  for (auto& n : nodes_) n.grad = Tensor<T>();
  if (!nodes_[loss.id].requires_grad) return;
  grad_ref(loss.id)[0] = T(1);
  for (std::int64_t id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, static_cast<std::uint32_t>(id));
  }
  for (auto& n : nodes_) {
    if (n.param == nullptr || n.grad.empty()) continue;
    Parameter<T>& p = *n.param;
    if (!p.grad.same_shape(p.value)) p.zero_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  }
}

// --- Linear algebra ---------------------------------------------------------

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& t = tape_of(a, b);
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  if (av.cols() != bv.rows()) {
    fail(ErrorCode::kShapeMismatch, "matmul: " + shape_str(av.rows(), av.cols()) +
                                        " * " + shape_str(bv.rows(), bv.cols()));
  }
  Tensor<T> out(av.rows(), bv.cols());
  as_mat(out).noalias() = as_mat(av) * as_mat(bv);
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(out), any_grad(t, {ia, ib}),
                [ia, ib](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  if (tp.requires_grad(ia)) {
                    as_mat(tp.grad_ref(ia)).noalias() +=
                        as_mat(g) * as_mat(tp.value({&tp, ib})).transpose();
                  }
                  if (tp.requires_grad(ib)) {
                    as_mat(tp.grad_ref(ib)).noalias() +=
                        as_mat(tp.value({&tp, ia})).transpose() * as_mat(g);
                  }
                });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  Tape<T>& t = tape_of(a, b);
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  if (av.cols() != bv.cols()) {
    fail(ErrorCode::kShapeMismatch, "matmul_nt: " + shape_str(av.rows(), av.cols()) +
                                        " * T(" + shape_str(bv.rows(), bv.cols()) + ")");
  }
  Tensor<T> out(av.rows(), bv.rows());
  as_mat(out).noalias() = as_mat(av) * as_mat(bv).transpose();
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(out), any_grad(t, {ia, ib}),
                [ia, ib](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  if (tp.requires_grad(ia)) {
                    as_mat(tp.grad_ref(ia)).noalias() +=
                        as_mat(g) * as_mat(tp.value({&tp, ib}));
                  }
                  if (tp.requires_grad(ib)) {
                    as_mat(tp.grad_ref(ib)).noalias() +=
                        as_mat(g).transpose() * as_mat(tp.value({&tp, ia}));
                  }
                });
}

// --- Elementwise binary -----------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& t = tape_of(a, b);
  require_same_shape("add", t.value(a), t.value(b));
  Tensor<T> out = t.value(a);
  as_mat(out) += as_mat(t.value(b));
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(out), any_grad(t, {ia, ib}),
                [ia, ib](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  if (tp.requires_grad(ia)) as_mat(tp.grad_ref(ia)) += as_mat(g);
                  if (tp.requires_grad(ib)) as_mat(tp.grad_ref(ib)) += as_mat(g);
                });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& t = tape_of(a, b);
  require_same_shape("sub", t.value(a), t.value(b));
  Tensor<T> out = t.value(a);
  as_mat(out) -= as_mat(t.value(b));
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(out), any_grad(t, {ia, ib}),
                [ia, ib](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  if (tp.requires_grad(ia)) as_mat(tp.grad_ref(ia)) += as_mat(g);
                  if (tp.requires_grad(ib)) as_mat(tp.grad_ref(ib)) -= as_mat(g);
                });
}

template <typename T>
Var<T> hadamard(Var<T> a, Var<T> b) {
  Tape<T>& t = tape_of(a, b);
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  require_same_shape("hadamard", av, bv);
  Tensor<T> out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(out), any_grad(t, {ia, ib}),
                [ia, ib](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  if (tp.requires_grad(ia)) {
                    const Tensor<T>& bv2 = tp.value({&tp, ib});
                    Tensor<T>& ga = tp.grad_ref(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
                  }
                  if (tp.requires_grad(ib)) {
                    const Tensor<T>& av2 = tp.value({&tp, ia});
                    Tensor<T>& gb = tp.grad_ref(ib);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
                  }
                });
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> row) {
  Tape<T>& t = tape_of(a, row);
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    fail(ErrorCode::kShapeMismatch, "add_row: " + shape_str(av.rows(), av.cols()) +
                                        " + " + shape_str(rv.rows(), rv.cols()));
  }
  Tensor<T> out = av;
  as_mat(out).rowwise() += as_mat(rv).row(0);
  const std::uint32_t ia = a.id, ir = row.id;
  return t.push(std::move(out), any_grad(t, {ia, ir}),
                [ia, ir](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  if (tp.requires_grad(ia)) as_mat(tp.grad_ref(ia)) += as_mat(g);
                  if (tp.requires_grad(ir)) {
                    as_mat(tp.grad_ref(ir)).row(0) += as_mat(g).colwise().sum();
                  }
                });
}

// --- Elementwise unary ------------------------------------------------------

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return unary_elementwise<T>(
      a, [factor](T x) { return factor * x; },
      [factor](T, T) { return factor; });
}

template <typename T>
Var<T> one_minus(Var<T> a) {
  return unary_elementwise<T>(
      a, [](T x) { return T(1) - x; }, [](T, T) { return T(-1); });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  Tape<T>& t = tape_of(a);
  const Tensor<T>& x = t.value(a);
  Tensor<T> y(x.rows(), x.cols());
  as_mat(y).array() = as_mat(x).array().logistic();
  return from_output(a, std::move(y), [](auto yv) { return yv * (T(1) - yv); });
}

template <typename T>
Var<T> tanh_act(Var<T> a) {
  Tape<T>& t = tape_of(a);
  const Tensor<T>& x = t.value(a);
  Tensor<T> y(x.rows(), x.cols());
  as_mat(y).array() = as_mat(x).array().tanh();
  return from_output(a, std::move(y), [](auto yv) { return T(1) - yv * yv; });
}

template <typename T>
Var<T> abs_val(Var<T> a) {
  return unary_elementwise<T>(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > 0 ? T(1) : (x < 0 ? T(-1) : T(0)); });
}

// --- Structural -------------------------------------------------------------

template <typename T>
Var<T> concat(Var<T> a, Var<T> b, int axis) {
  Tape<T>& t = tape_of(a, b);
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  const std::uint32_t ia = a.id, ib = b.id;
  if (axis == 0) {
    std::array<Var<T>, 2> parts{a, b};
    return concat_rows<T>(parts);
  }
  if (axis != 1) fail(ErrorCode::kInvalidArgument, "concat axis must be 0 or 1");
  if (av.rows() != bv.rows()) {
    fail(ErrorCode::kShapeMismatch, "concat(axis=1): " + shape_str(av.rows(), av.cols()) +
                                        " | " + shape_str(bv.rows(), bv.cols()));
  }
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor<T> out(av.rows(), ca + cb);
  as_mat(out).leftCols(ca) = as_mat(av);
  as_mat(out).rightCols(cb) = as_mat(bv);
  return t.push(std::move(out), any_grad(t, {ia, ib}),
                [ia, ib, ca, cb](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  if (tp.requires_grad(ia)) as_mat(tp.grad_ref(ia)) += as_mat(g).leftCols(ca);
                  if (tp.requires_grad(ib)) as_mat(tp.grad_ref(ib)) += as_mat(g).rightCols(cb);
                });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) fail(ErrorCode::kEmptyInput, "concat_rows of nothing");
  Tape<T>& t = tape_of(parts.front());
  const std::size_t cols = t.value(parts.front()).cols();
  std::size_t rows = 0;
  bool need = false;
  std::vector<std::uint32_t> ids;
  ids.reserve(parts.size());
  for (const Var<T>& p : parts) {
    if (p.tape != &t) fail(ErrorCode::kInvalidArgument, "variables on different tapes");
    const Tensor<T>& v = t.value(p);
    if (v.cols() != cols) {
      fail(ErrorCode::kShapeMismatch, "concat_rows: column counts differ (" +
                                          std::to_string(v.cols()) + " vs " +
                                          std::to_string(cols) + ")");
    }
    rows += v.rows();
    need = need || t.requires_grad(p.id);
    ids.push_back(p.id);
  }
  Tensor<T> out(rows, cols);
  std::size_t at = 0;
  for (std::uint32_t id : ids) {
    const Tensor<T>& v = t.value({&t, id});
    std::copy(v.data(), v.data() + v.size(), out.data() + at * cols);
    at += v.rows();
  }
  return t.push(std::move(out), need,
                [ids = std::move(ids), cols](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  std::size_t offset = 0;
                  for (std::uint32_t id : ids) {
                    const std::size_t n = tp.value({&tp, id}).size();
                    if (tp.requires_grad(id)) {
                      Tensor<T>& gi = tp.grad_ref(id);
                      for (std::size_t i = 0; i < n; ++i) gi[i] += g[offset + i];
                    }
                    offset += n;
                  }
                  (void)cols;
                });
}

template <typename T>
Var<T> gather_rows(Var<T> a, std::span<const std::int32_t> rows) {
  Tape<T>& t = tape_of(a);
  const Tensor<T>& av = t.value(a);
  const std::size_t cols = av.cols();
  Tensor<T> out(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= av.rows()) {
      fail(ErrorCode::kShapeMismatch, "gather_rows: row " + std::to_string(rows[r]) +
                                          " outside " + std::to_string(av.rows()));
    }
    std::copy_n(av.data() + static_cast<std::size_t>(rows[r]) * cols, cols,
                out.data() + r * cols);
  }
  const std::uint32_t ia = a.id;
  return t.push(std::move(out), t.requires_grad(ia),
                [ia, idx = std::vector<std::int32_t>(rows.begin(), rows.end()),
                 cols](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  Tensor<T>& ga = tp.grad_ref(ia);
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    T* dst = ga.data() + static_cast<std::size_t>(idx[r]) * cols;
                    const T* src = g.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                  }
                });
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end) {
  Tape<T>& t = tape_of(a);
  const Tensor<T>& av = t.value(a);
  if (begin > end || end > av.rows()) {
    fail(ErrorCode::kShapeMismatch, "slice_rows [" + std::to_string(begin) + "," +
                                        std::to_string(end) + ") of " +
                                        std::to_string(av.rows()) + " rows");
  }
  const std::size_t cols = av.cols();
  Tensor<T> out(end - begin, cols,
                std::vector<T>(av.data() + begin * cols, av.data() + end * cols));
  const std::uint32_t ia = a.id;
  return t.push(std::move(out), t.requires_grad(ia),
                [ia, begin, cols](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  Tensor<T>& ga = tp.grad_ref(ia);
                  T* dst = ga.data() + begin * cols;
                  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                });
}

template <typename T>
Var<T> segment_sum(Var<T> values, std::span<const std::int32_t> segment_ids,
                   std::size_t groups) {
  Tape<T>& t = tape_of(values);
  const Tensor<T>& v = t.value(values);
  if (segment_ids.size() != v.rows()) {
    fail(ErrorCode::kShapeMismatch, "segment_sum: " + std::to_string(segment_ids.size()) +
                                        " ids for " + std::to_string(v.rows()) + " rows");
  }
  const std::size_t cols = v.cols();
  Tensor<T> out(groups, cols);
  for (std::size_t r = 0; r < segment_ids.size(); ++r) {
    const std::int32_t s = segment_ids[r];
    if (s < 0 || static_cast<std::size_t>(s) >= groups) {
      fail(ErrorCode::kBadSegmentId, "segment id " + std::to_string(s) +
                                         " not in [0," + std::to_string(groups) + ")");
    }
    T* dst = out.data() + static_cast<std::size_t>(s) * cols;
    const T* src = v.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
  }
  const std::uint32_t iv = values.id;
  return t.push(std::move(out), t.requires_grad(iv),
                [iv, ids = std::vector<std::int32_t>(segment_ids.begin(), segment_ids.end()),
                 cols](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  Tensor<T>& gv = tp.grad_ref(iv);
                  for (std::size_t r = 0; r < ids.size(); ++r) {
                    const T* src = g.data() + static_cast<std::size_t>(ids[r]) * cols;
                    T* dst = gv.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                  }
                });
}

template <typename T>
Var<T> segment_max(Var<T> values, std::span<const std::int32_t> segment_ids,
                   std::size_t groups, std::vector<std::size_t>* argmax) {
  Tape<T>& t = tape_of(values);
  const Tensor<T>& v = t.value(values);
  if (segment_ids.size() != v.rows()) {
    fail(ErrorCode::kShapeMismatch, "segment_max: " + std::to_string(segment_ids.size()) +
                                        " ids for " + std::to_string(v.rows()) + " rows");
  }
  const std::size_t cols = v.cols();
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> winner(groups * cols, kUnset);
  Tensor<T> out(groups, cols);
  for (std::size_t r = 0; r < segment_ids.size(); ++r) {
    const std::int32_t s = segment_ids[r];
    if (s < 0 || static_cast<std::size_t>(s) >= groups) {
      fail(ErrorCode::kBadSegmentId, "segment id " + std::to_string(s) +
                                         " not in [0," + std::to_string(groups) + ")");
    }
    const std::size_t base = static_cast<std::size_t>(s) * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      const T x = v(r, c);
      if (winner[base + c] == kUnset || x > out[base + c]) {
        out[base + c] = x;
        winner[base + c] = r;
      }
    }
  }
  for (std::size_t i = 0; i < winner.size(); ++i) {
    if (winner[i] == kUnset) {
      fail(ErrorCode::kEmptyInput, "segment_max: group " + std::to_string(i / cols) +
                                       " has no rows");
    }
  }
  if (argmax != nullptr) *argmax = winner;
  const std::uint32_t iv = values.id;
  return t.push(std::move(out), t.requires_grad(iv),
                [iv, winner = std::move(winner), cols](Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  Tensor<T>& gv = tp.grad_ref(iv);
                  for (std::size_t i = 0; i < winner.size(); ++i) {
                    gv(winner[i], i % cols) += g[i];
                  }
                });
}

template <typename T>
std::pair<Var<T>, std::vector<std::size_t>> max_over_rows(Var<T> v) {
  const std::size_t rows = tape_of(v).value(v).rows();
  if (rows == 0) fail(ErrorCode::kEmptyInput, "max_over_rows of an empty matrix");
  std::vector<std::int32_t> ids(rows, 0);
  std::vector<std::size_t> argmax;
  Var<T> out = segment_max<T>(v, ids, 1, &argmax);
  return {out, std::move(argmax)};
}

template <typename T>
Var<T> scale_rows(Var<T> a, std::span<const T> factors) {
  Tape<T>& t = tape_of(a);
  const Tensor<T>& av = t.value(a);
  if (factors.size() != av.rows()) {
    fail(ErrorCode::kShapeMismatch, "scale_rows: " + std::to_string(factors.size()) +
                                        " factors for " + std::to_string(av.rows()) + " rows");
  }
  Tensor<T> out = av;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (T& x : out.row_span(r)) x *= factors[r];
  }
  const std::uint32_t ia = a.id;
  return t.push(std::move(out), t.requires_grad(ia),
                [ia, f = std::vector<T>(factors.begin(), factors.end())](
                    Tape<T>& tp, std::uint32_t self) {
                  const Tensor<T>& g = tp.grad_ref(self);
                  Tensor<T>& ga = tp.grad_ref(ia);
                  for (std::size_t r = 0; r < f.size(); ++r) {
                    for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += f[r] * g(r, c);
                  }
                });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& t = tape_of(a);
  const Tensor<T>& av = t.value(a);
  T total = 0;
  for (std::size_t i = 0; i < av.size(); ++i) total += av[i];
  const std::uint32_t ia = a.id;
  return t.push(Tensor<T>::scalar(total), t.requires_grad(ia),
                [ia](Tape<T>& tp, std::uint32_t self) {
                  const T g = tp.grad_ref(self)[0];
                  Tensor<T>& ga = tp.grad_ref(ia);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
                });
}

// --- Losses -----------------------------------------------------------------

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  Tensor<T> p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    T mx = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c));
    T z = 0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      p(r, c) = std::exp(logits(r, c) - mx);
      z += p(r, c);
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) p(r, c) /= z;
  }
  return p;
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const std::int32_t> labels) {
  Tape<T>& t = tape_of(logits);
  const Tensor<T>& lv = t.value(logits);
  if (labels.size() != lv.rows() || lv.rows() == 0) {
    fail(ErrorCode::kShapeMismatch, "softmax_cross_entropy: " + std::to_string(labels.size()) +
                                        " labels for " + std::to_string(lv.rows()) + " rows");
  }
  Tensor<T> probs = softmax_rows(lv);
  T loss = 0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    const std::int32_t y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= lv.cols()) {
      fail(ErrorCode::kDataFormat, "class label " + std::to_string(y) + " outside [0," +
                                       std::to_string(lv.cols()) + ")");
    }
    // log-sum-exp form; log(probs) underflows for widely separated logits.
    T top = lv(r, 0);
    for (std::size_t c = 1; c < lv.cols(); ++c) top = std::max(top, lv(r, c));
    T z = 0;
    for (std::size_t c = 0; c < lv.cols(); ++c) z += std::exp(lv(r, c) - top);
    loss += top + std::log(z) - lv(r, static_cast<std::size_t>(y));
  }
  const T n = static_cast<T>(lv.rows());
  const std::uint32_t il = logits.id;
  return t.push(Tensor<T>::scalar(loss / n), t.requires_grad(il),
                [il, probs = std::move(probs),
                 y = std::vector<std::int32_t>(labels.begin(), labels.end()),
                 n](Tape<T>& tp, std::uint32_t self) {
                  const T g = tp.grad_ref(self)[0] / n;
                  Tensor<T>& gl = tp.grad_ref(il);
                  for (std::size_t r = 0; r < probs.rows(); ++r) {
                    for (std::size_t c = 0; c < probs.cols(); ++c) {
                      const T target = static_cast<std::size_t>(y[r]) == c ? T(1) : T(0);
                      gl(r, c) += g * (probs(r, c) - target);
                    }
                  }
                });
}

template <typename T>
Var<T> bce_with_logits(Var<T> logits, std::span<const std::int32_t> labels) {
  Tape<T>& t = tape_of(logits);
  const Tensor<T>& lv = t.value(logits);
  if (lv.cols() != 1 || labels.size() != lv.rows() || lv.rows() == 0) {
    fail(ErrorCode::kShapeMismatch, "bce_with_logits expects n x 1 logits and n labels");
  }
  T loss = 0;
  Tensor<T> probs(lv.rows(), 1);
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    const T x = lv[r];
    const T y = labels[r] != 0 ? T(1) : T(0);
    // log(1 + exp(-|x|)) + max(x, 0) - x*y
    loss += std::log1p(std::exp(-std::abs(x))) + std::max(x, T(0)) - x * y;
    probs[r] = x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  }
  const T n = static_cast<T>(lv.rows());
  const std::uint32_t il = logits.id;
  return t.push(Tensor<T>::scalar(loss / n), t.requires_grad(il),
                [il, probs = std::move(probs),
                 y = std::vector<std::int32_t>(labels.begin(), labels.end()),
                 n](Tape<T>& tp, std::uint32_t self) {
                  const T g = tp.grad_ref(self)[0] / n;
                  Tensor<T>& gl = tp.grad_ref(il);
                  for (std::size_t r = 0; r < probs.size(); ++r) {
                    gl[r] += g * (probs[r] - (y[r] != 0 ? T(1) : T(0)));
                  }
                });
}

template <typename T>
Tensor<T> finite_diff_grad(const std::function<T()>& fn, Parameter<T>& p, T epsilon) {
  if (!(epsilon > 0)) fail(ErrorCode::kInvalidArgument, "epsilon must be positive");
  Tensor<T> g(p.value.rows(), p.value.cols());
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const T saved = p.value[i];
    p.value[i] = saved + epsilon;
    const T up = fn();
    p.value[i] = saved - epsilon;
    const T down = fn();
    p.value[i] = saved;
    g[i] = (up - down) / (T(2) * epsilon);
  }
  return g;
}

#define XASTNN_INSTANTIATE(T)                                                        \
  template class Tape<T>;                                                            \
  template Var<T> matmul(Var<T>, Var<T>);                                            \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                         \
  template Var<T> add(Var<T>, Var<T>);                                               \
  template Var<T> sub(Var<T>, Var<T>);                                               \
  template Var<T> hadamard(Var<T>, Var<T>);                                          \
  template Var<T> add_row(Var<T>, Var<T>);                                           \
  template Var<T> scale(Var<T>, T);                                                  \
  template Var<T> one_minus(Var<T>);                                                 \
  template Var<T> sigmoid(Var<T>);                                                   \
  template Var<T> tanh_act(Var<T>);                                                  \
  template Var<T> abs_val(Var<T>);                                                   \
  template Var<T> concat(Var<T>, Var<T>, int);                                       \
  template Var<T> concat_rows(std::span<const Var<T>>);                              \
  template Var<T> gather_rows(Var<T>, std::span<const std::int32_t>);                \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                      \
  template Var<T> segment_sum(Var<T>, std::span<const std::int32_t>, std::size_t);   \
  template Var<T> segment_max(Var<T>, std::span<const std::int32_t>, std::size_t,    \
                              std::vector<std::size_t>*);                            \
  template std::pair<Var<T>, std::vector<std::size_t>> max_over_rows(Var<T>);        \
  template Var<T> scale_rows(Var<T>, std::span<const T>);                            \
  template Var<T> sum(Var<T>);                                                       \
  template Var<T> softmax_cross_entropy(Var<T>, std::span<const std::int32_t>);      \
  template Var<T> bce_with_logits(Var<T>, std::span<const std::int32_t>);            \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                 \
  template Tensor<T> finite_diff_grad(const std::function<T()>&, Parameter<T>&, T);

XASTNN_INSTANTIATE(float)
XASTNN_INSTANTIATE(double)

}  // namespace xastnn
