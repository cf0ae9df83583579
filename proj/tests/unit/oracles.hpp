#pragma once

// Independent reference implementations for the unit tests. Everything here is
// plain loops over std::vector<double>; nothing calls into the tensor engine.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tensor.hpp"
#include "vocabulary.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, Mat[i][j]

template <typename T>
Mat to_mat(const xastnn::Tensor<T>& t) {
  Mat m(t.rows(), Vec(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = static_cast<double>(t(i, j));
  return m;
}

template <typename T>
Vec row(const xastnn::Tensor<T>& t, std::size_t r) {
  Vec v(t.cols());
  for (std::size_t j = 0; j < t.cols(); ++j) v[j] = static_cast<double>(t(r, j));
  return v;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  Mat out(n, Vec(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += a[i][p] * b[p][j];
      out[i][j] = s;
    }
  return out;
}

// W v for W stored m x n.
inline Vec matvec(const Mat& w, const Vec& v) {
  Vec out(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += w[i][j] * v[j];
  return out;
}

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec add(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

struct GrvuWeights {
  Mat uz, wz, ur, wr, uh, wh;
  Vec bz, br, bh;  // empty = no bias
};

// One node written term by term: every child is multiplied separately.
inline Vec grvu_node(const Vec& x, const std::vector<Vec>& kids, const GrvuWeights& w) {
  const std::size_t d = x.size();
  Vec az = matvec(w.uz, x), ar = matvec(w.ur, x), ah = matvec(w.uh, x);
  if (!w.bz.empty()) {
    az = add(az, w.bz);
    ar = add(ar, w.br);
    ah = add(ah, w.bh);
  }
  for (const Vec& h : kids) {
    az = add(az, matvec(w.wz, h));
    ar = add(ar, matvec(w.wr, h));
  }
  Vec z(d), r(d);
  for (std::size_t i = 0; i < d; ++i) {
    z[i] = sigm(az[i]);
    r[i] = sigm(ar[i]);
  }
  for (const Vec& h : kids) {
    Vec hr(d);
    for (std::size_t i = 0; i < d; ++i) hr[i] = h[i] * r[i];
    ah = add(ah, matvec(w.wh, hr));
  }
  Vec out(d), s(d, 0.0);
  for (const Vec& h : kids) s = add(s, h);
  for (std::size_t i = 0; i < d; ++i) out[i] = z[i] * s[i] + (1 - z[i]) * std::tanh(ah[i]);
  return out;
}

// Recursive evaluation of an indexed tree; `emb` rows are token embeddings.
inline Vec grvu_tree(const xastnn::IndexedTree& t, const Mat& emb, const GrvuWeights& w,
                     std::size_t node = 0) {
  std::vector<Vec> kids;
  for (std::size_t c = node + 1; c < t.size(); ++c) {
    if (static_cast<std::size_t>(t.parent[c]) == node) kids.push_back(grvu_tree(t, emb, w, c));
  }
  return grvu_node(emb[static_cast<std::size_t>(t.token_ids[node])], kids, w);
}

struct GruWeights {
  Mat wz, wr, wh, uz, ur, uh;
  Vec bz, br, bh;
};

inline std::vector<Vec> gru(const std::vector<Vec>& xs, const GruWeights& w, bool reverse) {
  const std::size_t m = w.uz.size();
  std::vector<Vec> out(xs.size());
  Vec h(m, 0.0);
  for (std::size_t step = 0; step < xs.size(); ++step) {
    const std::size_t t = reverse ? xs.size() - 1 - step : step;
    const Vec az = add(add(matvec(w.wz, xs[t]), matvec(w.uz, h)), w.bz);
    const Vec ar = add(add(matvec(w.wr, xs[t]), matvec(w.ur, h)), w.br);
    Vec z(m), r(m), rh(m);
    for (std::size_t i = 0; i < m; ++i) {
      z[i] = sigm(az[i]);
      r[i] = sigm(ar[i]);
      rh[i] = r[i] * h[i];
    }
    const Vec ah = add(add(matvec(w.wh, xs[t]), matvec(w.uh, rh)), w.bh);
    Vec next(m);
    for (std::size_t i = 0; i < m; ++i) next[i] = z[i] * h[i] + (1 - z[i]) * std::tanh(ah[i]);
    h = next;
    out[t] = h;
  }
  return out;
}

// Random tree in preorder: parent[i] < i, at most `max_nodes` nodes and
// `max_depth` levels.
inline xastnn::IndexedTree random_tree(std::mt19937_64& rng, std::size_t max_nodes, std::size_t max_depth,
                                       std::int32_t vocab) {
  xastnn::IndexedTree t;
  std::uniform_int_distribution<std::int32_t> tok(0, vocab - 1);
  std::uniform_int_distribution<std::size_t> size_dist(1, max_nodes);
  const std::size_t target = size_dist(rng);
  std::function<void(std::int32_t, std::size_t)> grow = [&](std::int32_t parent, std::size_t depth) {
    const std::int32_t me = static_cast<std::int32_t>(t.size());
    t.token_ids.push_back(tok(rng));
    t.parent.push_back(parent);
    if (depth >= max_depth) return;
    std::uniform_int_distribution<int> kids(0, 3);
    const int k = kids(rng);
    for (int i = 0; i < k && t.size() < target; ++i) grow(me, depth + 1);
  };
  grow(-1, 1);
  return t;
}

// Depth in nodes by explicit recursion.
inline std::size_t tree_depth(const xastnn::IndexedTree& t, std::size_t node = 0) {
  std::size_t best = 0;
  for (std::size_t c = node + 1; c < t.size(); ++c) {
    if (static_cast<std::size_t>(t.parent[c]) == node) best = std::max(best, tree_depth(t, c));
  }
  return best + 1;
}

template <typename T>
double max_abs(const xastnn::Tensor<T>& a, const Mat& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      worst = std::max(worst, std::abs(static_cast<double>(a(i, j)) - b[i][j]));
  return worst;
}

inline double max_abs(const Vec& a, const Vec& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
template <typename T>
double relative_error(const xastnn::Tensor<T>& a, const xastnn::Tensor<T>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]), y = static_cast<double>(b[i]);
    diff += (x - y) * (x - y);
    na += x * x;
    nb += y * y;
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale < 1e-300) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

}  // namespace oracle
