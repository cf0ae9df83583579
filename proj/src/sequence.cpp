#include "sequence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xastnn {

namespace {

template <typename T>
Parameter<T> uniform_param(std::string name, std::size_t r, std::size_t c, double bound,
                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  return {std::move(name), std::move(t)};
}

template <typename T>
GrtuDirection<T> make_direction(const std::string& prefix, std::size_t d, std::size_t m,
                                double bound, std::mt19937_64* rng) {
  auto mat = [&](const char* n, std::size_t r, std::size_t c) {
    if (rng == nullptr) return Parameter<T>(prefix + n, Tensor<T>(r, c));
    return uniform_param<T>(prefix + n, r, c, bound, *rng);
  };
  GrtuDirection<T> g;
  g.w_z = mat("w_z", m, d);
  g.w_r = mat("w_r", m, d);
  g.w_h = mat("w_h", m, d);
  g.u_z = mat("u_z", m, m);
  g.u_r = mat("u_r", m, m);
  g.u_h = mat("u_h", m, m);
  g.b_z = {prefix + "b_z", Tensor<T>(1, m)};
  g.b_r = {prefix + "b_r", Tensor<T>(1, m)};
  g.b_h = {prefix + "b_h", Tensor<T>(1, m)};
  return g;
}

template <typename T>
GrtuDirectionVars<T> bind_direction(Tape<T>& tape, GrtuDirection<T>& g) {
  return {tape.param(g.w_z), tape.param(g.w_r), tape.param(g.w_h),
          tape.param(g.u_z), tape.param(g.u_r), tape.param(g.u_h),
          tape.param(g.b_z), tape.param(g.b_r), tape.param(g.b_h)};
}

template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) fail(ErrorCode::kEmptySequence, "empty sequence");
  const std::size_t d = rows.front().cols();
  Tensor<T> out(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].rows() != 1 || rows[i].cols() != d) {
      fail(ErrorCode::kDimensionMismatch, "sequence rows must all be 1x" + std::to_string(d));
    }
    std::copy_n(rows[i].data(), d, out.data() + i * d);
  }
  return out;
}

std::size_t total_length(std::span<const std::size_t> lengths) {
  if (lengths.empty()) fail(ErrorCode::kEmptyBatch, "no sequences");
  std::size_t n = 0;
  for (std::size_t l : lengths) {
    if (l == 0) fail(ErrorCode::kEmptySequence, "sequence of length zero");
    n += l;
  }
  return n;
}

}  // namespace

template <typename T>
GrtuParams<T> GrtuParams<T>::uniform(std::size_t d, std::size_t m, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(m));
  GrtuParams p;
  p.input_dim = d;
  p.hidden = m;
  p.forward = make_direction<T>("grtu.fwd.", d, m, bound, &rng);
  p.backward = make_direction<T>("grtu.bwd.", d, m, bound, &rng);
  return p;
}

template <typename T>
GrtuParams<T> GrtuParams<T>::zeros(std::size_t d, std::size_t m) {
  GrtuParams p;
  p.input_dim = d;
  p.hidden = m;
  p.forward = make_direction<T>("grtu.fwd.", d, m, 0, nullptr);
  p.backward = make_direction<T>("grtu.bwd.", d, m, 0, nullptr);
  return p;
}

template <typename T>
std::vector<Parameter<T>*> GrtuParams<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (GrtuDirection<T>* g : {&forward, &backward}) {
    for (Parameter<T>* p : {&g->w_z, &g->w_r, &g->w_h, &g->u_z, &g->u_r, &g->u_h, &g->b_z,
                            &g->b_r, &g->b_h}) {
      out.push_back(p);
    }
  }
  return out;
}

template <typename T>
GrtuVars<T> bind(Tape<T>& tape, GrtuParams<T>& params) {
  for (GrtuDirection<T>* g : {&params.forward, &params.backward}) {
    if (g->w_z.value.cols() != params.input_dim || g->u_z.value.rows() != params.hidden) {
      fail(ErrorCode::kDimensionMismatch, "GRtU parameters do not match " +
                                              std::to_string(params.input_dim) + " -> " +
                                              std::to_string(params.hidden));
    }
  }
  return {bind_direction(tape, params.forward), bind_direction(tape, params.backward),
          params.input_dim, params.hidden};
}

template <typename T>
Var<T> grtu_packed(Var<T> inputs, std::span<const std::size_t> lengths,
                   const GrtuDirectionVars<T>& p, Direction direction) {
  Tape<T>& tape = *inputs.tape;
  const std::size_t n = total_length(lengths);
  if (inputs.rows() != n) {
    fail(ErrorCode::kLengthMismatch, "sequence lengths sum to " + std::to_string(n) + " but " +
                                         std::to_string(inputs.rows()) + " rows were given");
  }
  const std::size_t m = p.u_z.rows();
  if (inputs.cols() != p.w_z.cols()) {
    fail(ErrorCode::kDimensionMismatch, "GRtU input width " + std::to_string(inputs.cols()) +
                                            " != " + std::to_string(p.w_z.cols()));
  }

  std::vector<std::size_t> offset(lengths.size());
  std::exclusive_scan(lengths.begin(), lengths.end(), offset.begin(), std::size_t{0});
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] > lengths[b]; });
  const std::size_t steps = lengths[order.front()];

  Var<T> xz = add_row(matmul_nt(inputs, p.w_z), p.b_z);
  Var<T> xr = add_row(matmul_nt(inputs, p.w_r), p.b_r);
  Var<T> xh = add_row(matmul_nt(inputs, p.w_h), p.b_h);

  Var<T> h = tape.constant(Tensor<T>(lengths.size(), m));
  std::vector<Var<T>> per_step;
  per_step.reserve(steps);
  // packed_row[flat row] = row of concat(per_step) holding its state.
  std::vector<std::int32_t> packed_row(n);
  std::size_t emitted = 0;
  std::vector<std::int32_t> rows;
  for (std::size_t t = 0; t < steps; ++t) {
    rows.clear();
    for (std::size_t s : order) {
      if (lengths[s] <= t) break;
      const std::size_t pos = direction == Direction::kForward ? t : lengths[s] - 1 - t;
      rows.push_back(static_cast<std::int32_t>(offset[s] + pos));
    }
    const std::size_t active = rows.size();
    const std::size_t mark = tape.size();
    if (active < h.rows()) h = slice_rows(h, 0, active);
    Var<T> z = sigmoid(add(gather_rows(xz, std::span<const std::int32_t>(rows)), matmul_nt(h, p.u_z)));
    Var<T> r = sigmoid(add(gather_rows(xr, std::span<const std::int32_t>(rows)), matmul_nt(h, p.u_r)));
    Var<T> cand = tanh_act(
        add(gather_rows(xh, std::span<const std::int32_t>(rows)), matmul_nt(hadamard(r, h), p.u_h)));
    h = tape.collapse(mark, add(hadamard(z, h), hadamard(one_minus(z), cand)));
    for (std::size_t i = 0; i < active; ++i) {
      packed_row[static_cast<std::size_t>(rows[i])] = static_cast<std::int32_t>(emitted + i);
    }
    emitted += active;
    per_step.push_back(h);
  }
  Var<T> packed = concat_rows<T>(per_step);
  return gather_rows(packed, std::span<const std::int32_t>(packed_row));
}

template <typename T>
Var<T> grtu_direction(Var<T> sequence, const GrtuVars<T>& p, Direction direction) {
  if (sequence.rows() == 0) fail(ErrorCode::kEmptySequence, "cannot encode an empty sequence");
  const std::size_t len = sequence.rows();
  return grtu_packed(sequence, std::span<const std::size_t>(&len, 1),
                     direction == Direction::kForward ? p.forward : p.backward, direction);
}

template <typename T>
Tensor<T> grtu_direction(const std::vector<Tensor<T>>& sequence, GrtuParams<T>& params,
                         Direction direction) {
  Tape<T> tape(false);
  const GrtuVars<T> v = bind(tape, params);
  return grtu_direction(tape.constant(stack_rows(sequence)), v, direction).value();
}

template <typename T>
Var<T> encode_sequences(Var<T> inputs, std::span<const std::size_t> lengths, const GrtuVars<T>& p) {
  Var<T> fwd = grtu_packed(inputs, lengths, p.forward, Direction::kForward);
  Var<T> bwd = grtu_packed(inputs, lengths, p.backward, Direction::kBackward);
  return concat(fwd, bwd, 1);
}

template <typename T>
EnhancedSequence<T> encode_sequence(const std::vector<Tensor<T>>& sequence, GrtuParams<T>& params) {
  Tape<T> tape(false);
  const GrtuVars<T> v = bind(tape, params);
  const std::size_t len = sequence.size();
  Var<T> out = encode_sequences(tape.constant(stack_rows(sequence)),
                                std::span<const std::size_t>(&len, 1), v);
  return {out.value()};
}

template <typename T>
CodeVector<T> pool(const Tensor<T>& v) {
  Tape<T> tape(false);
  auto [c, argmax] = max_over_rows(tape.constant(v));
  return {c.value(), std::move(argmax)};
}

template <typename T>
CodeVector<T> pool(const EnhancedSequence<T>& v) {
  return pool(v.v);
}

template <typename T>
Var<T> pool_sequences(Var<T> rows, std::span<const std::size_t> lengths) {
  const std::size_t n = total_length(lengths);
  if (rows.rows() != n) fail(ErrorCode::kLengthMismatch, "pool_sequences row count mismatch");
  std::vector<std::int32_t> seg;
  seg.reserve(n);
  for (std::size_t s = 0; s < lengths.size(); ++s) seg.insert(seg.end(), lengths[s], static_cast<std::int32_t>(s));
  return segment_max<T>(rows, seg, lengths.size(), nullptr);
}

#define XASTNN_INSTANTIATE_SEQ(T)                                                             \
  template struct GrtuParams<T>;                                                              \
  template GrtuVars<T> bind(Tape<T>&, GrtuParams<T>&);                                        \
  template Var<T> grtu_packed(Var<T>, std::span<const std::size_t>,                           \
                              const GrtuDirectionVars<T>&, Direction);                        \
  template Var<T> grtu_direction(Var<T>, const GrtuVars<T>&, Direction);                      \
  template Tensor<T> grtu_direction(const std::vector<Tensor<T>>&, GrtuParams<T>&, Direction); \
  template Var<T> encode_sequences(Var<T>, std::span<const std::size_t>, const GrtuVars<T>&); \
  template EnhancedSequence<T> encode_sequence(const std::vector<Tensor<T>>&, GrtuParams<T>&); \
  template CodeVector<T> pool(const Tensor<T>&);                                              \
  template CodeVector<T> pool(const EnhancedSequence<T>&);                                    \
  template Var<T> pool_sequences(Var<T>, std::span<const std::size_t>);

XASTNN_INSTANTIATE_SEQ(float)
XASTNN_INSTANTIATE_SEQ(double)

}  // namespace xastnn
