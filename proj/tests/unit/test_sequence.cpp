#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "sequence.hpp"

using namespace xastnn;

namespace {

Tensor<double> randn(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Tensor<double> t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

GrtuParams<double> with_biases(std::size_t d, std::size_t m, std::mt19937_64& rng) {
  auto p = GrtuParams<double>::uniform(d, m, rng);
  for (auto* dir : {&p.forward, &p.backward})
    for (auto* b : {&dir->b_z, &dir->b_r, &dir->b_h}) b->value = randn(1, m, rng);
  return p;
}

oracle::GruWeights weights_of(const GrtuDirection<double>& d) {
  using oracle::to_mat;
  return {to_mat(d.w_z.value), to_mat(d.w_r.value), to_mat(d.w_h.value), to_mat(d.u_z.value),
          to_mat(d.u_r.value), to_mat(d.u_h.value), oracle::row(d.b_z.value, 0),
          oracle::row(d.b_r.value, 0), oracle::row(d.b_h.value, 0)};
}

std::vector<Tensor<double>> rows_of(const Tensor<double>& t) {
  std::vector<Tensor<double>> out;
  for (std::size_t i = 0; i < t.rows(); ++i) out.push_back(t.row_copy(i));
  return out;
}

}  // namespace

TEST(Grtu, DirectionsMatchOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 2 + trial % 4, m = 1 + trial % 5, len = 1 + trial % 9;
    auto p = with_biases(d, m, rng);
    const auto seq = randn(len, d, rng);
    std::vector<oracle::Vec> xs;
    for (std::size_t i = 0; i < len; ++i) xs.push_back(oracle::row(seq, i));
    const auto fwd = grtu_direction(rows_of(seq), p, Direction::kForward);
    const auto bwd = grtu_direction(rows_of(seq), p, Direction::kBackward);
    const auto ef = oracle::gru(xs, weights_of(p.forward), false);
    const auto eb = oracle::gru(xs, weights_of(p.backward), true);
    EXPECT_LT(oracle::max_abs(fwd, ef), 1e-12);
    EXPECT_LT(oracle::max_abs(bwd, eb), 1e-12);

    const auto v = encode_sequence(rows_of(seq), p).v;
    ASSERT_EQ(v.cols(), 2 * m);
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        EXPECT_NEAR(v(i, j), ef[i][j], 1e-12);
        EXPECT_NEAR(v(i, m + j), eb[i][j], 1e-12);
      }
  }
}

TEST(Grtu, ZeroWeightsGiveHalfDecay) {
  // All-zero weights: z = 1/2 and h~ = 0, so h stays 0 from a zero start.
  auto p = GrtuParams<double>::zeros(3, 2);
  std::mt19937_64 rng(2);
  const auto v = encode_sequence(rows_of(randn(4, 3, rng)), p).v;
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], 0.0);
}

TEST(Grtu, PackedMatchesOneByOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = with_biases(4, 3, rng);
    std::uniform_int_distribution<std::size_t> len(1, 12);
    std::vector<std::size_t> lengths(1 + trial % 8);
    for (auto& l : lengths) l = len(rng);
    const std::size_t total = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
    const auto rows = randn(total, 4, rng);
    Tape<double> t(false);
    const auto vars = bind(t, p);
    const auto packed = encode_sequences(t.constant(rows), std::span<const std::size_t>(lengths), vars).value();
    const auto pooled =
        pool_sequences(t.constant(packed), std::span<const std::size_t>(lengths)).value();
    std::size_t at = 0;
    for (std::size_t s = 0; s < lengths.size(); ++s) {
      std::vector<Tensor<double>> one;
      for (std::size_t i = 0; i < lengths[s]; ++i) one.push_back(rows.row_copy(at + i));
      const auto v = encode_sequence(one, p);
      for (std::size_t i = 0; i < lengths[s]; ++i)
        for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(packed(at + i, j), v.v(i, j), 1e-12);
      const auto c = pool(v).c;
      for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(pooled(s, j), c[j], 1e-12);
      at += lengths[s];
    }
  }
}

TEST(Pool, MaxAndArgmax) {
  std::mt19937_64 rng(4);
  const auto v = randn(9, 5, rng);
  const auto cv = pool(v);
  for (std::size_t j = 0; j < 5; ++j) {
    double best = v(0, j);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < 9; ++i)
      if (v(i, j) > best) {
        best = v(i, j);
        arg = i;
      }
    EXPECT_EQ(cv.c[j], best);
    EXPECT_EQ(cv.argmax[j], arg);
  }
}

TEST(Pool, RowPermutationInvariant) {
  std::mt19937_64 rng(5);
  const auto v = randn(7, 4, rng);
  std::vector<std::size_t> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor<double> w(7, 4);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j) w(i, j) = v(perm[i], j);
  const auto a = pool(v), b = pool(w);
  EXPECT_EQ(a.c, b.c);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(perm[b.argmax[j]], a.argmax[j]);
}

TEST(Pool, SingleRowIsIdentity) {
  Tensor<double> v(1, 3, std::vector<double>{-1, 2, 0});
  EXPECT_EQ(pool(v).c, v);
}

TEST(Grtu, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  auto p = with_biases(3, 2, rng);
  Parameter<double> x("x", randn(7, 3, rng));
  const std::vector<std::size_t> lengths = {4, 1, 2};
  const auto w = randn(3, 4, rng);
  auto loss = [&](Tape<double>& t) {
    const auto vars = bind(t, p);
    const auto v = encode_sequences(t.param(x), std::span<const std::size_t>(lengths), vars);
    return sum(hadamard(pool_sequences(v, std::span<const std::size_t>(lengths)), t.constant(w)));
  };
  auto all = p.parameters();
  all.push_back(&x);
  for (auto* q : all) q->zero_grad();
  Tape<double> t;
  t.backward(loss(t));
  for (auto* q : all) {
    const auto numeric = finite_diff_grad<double>(
        [&] {
          Tape<double> f(false);
          return loss(f).value()[0];
        },
        *q);
    EXPECT_LT(oracle::relative_error(q->grad, numeric), 1e-6) << q->name;
  }
}

TEST(Grtu, Errors) {
  std::mt19937_64 rng(7);
  auto p = GrtuParams<double>::uniform(3, 2, rng);
  try {
    encode_sequence<double>({}, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptySequence);
  }
  EXPECT_THROW(encode_sequence<double>({Tensor<double>(1, 4)}, p), Error);
  Tape<double> t(false);
  const auto vars = bind(t, p);
  const std::vector<std::size_t> bad = {2, 2};
  try {
    encode_sequences(t.constant(Tensor<double>(3, 3)), std::span<const std::size_t>(bad), vars);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}
