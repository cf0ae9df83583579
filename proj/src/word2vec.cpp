#include "word2vec.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

namespace xastnn {

std::vector<std::vector<std::string>> token_streams(const SubtreeSequence& seq) {
  std::vector<std::vector<std::string>> out;
  for (TokenTree& t : to_token_trees(seq)) out.push_back(std::move(t.tokens));
  return out;
}

template <typename T>
EmbeddingTable<T> pretrain_embeddings(const std::vector<std::vector<std::string>>& streams,
                                      const SkipGramConfig& config) {
  if (config.dim == 0 || config.window == 0) {
    fail(ErrorCode::kInvalidArgument, "skip-gram needs positive dim and window");
  }
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& s : streams) {
    for (const auto& tok : s) {
      ++counts[tok];
      ++total;
    }
  }
  if (total == 0) fail(ErrorCode::kEmptyCorpus, "no tokens to train embeddings on");

  EmbeddingTable<T> out;
  out.vocab = Vocabulary::from_counts(counts, config.min_count);
  const std::size_t v = out.vocab.size();
  const std::size_t d = config.dim;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(d), 0.5 / static_cast<double>(d));
  std::vector<double> syn0(v * d), syn1(v * d, 0.0);
  for (double& x : syn0) x = init(rng);

  // Unigram^0.75 noise distribution over known tokens (index 0 excluded).
  std::vector<double> cdf(v, 0.0);
  double acc = 0;
  for (std::size_t i = 1; i < v; ++i) {
    acc += std::pow(static_cast<double>(counts[out.vocab.token(static_cast<std::int32_t>(i))]), 0.75);
    cdf[i] = acc;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample_negative = [&]() -> std::size_t {
    const double r = unit(rng) * acc;
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), r);
    return it == cdf.end() ? v - 1 : static_cast<std::size_t>(it - cdf.begin());
  };

  std::vector<std::vector<std::int32_t>> ids;
  ids.reserve(streams.size());
  for (const auto& s : streams) {
    std::vector<std::int32_t> row;
    for (const auto& tok : s) {
      const auto id = out.vocab.index(tok);
      if (id != Vocabulary::kUnk) row.push_back(id);
    }
    ids.push_back(std::move(row));
  }

  const double steps_total = static_cast<double>(config.epochs * total);
  double steps_done = 0;
  std::vector<double> grad(d);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& row : ids) {
      for (std::size_t i = 0; i < row.size(); ++i, ++steps_done) {
        const double lr = std::max(config.learning_rate * (1.0 - steps_done / (steps_total + 1.0)),
                                   config.learning_rate * 1e-4);
        const std::size_t shrink =
            std::uniform_int_distribution<std::size_t>(0, config.window - 1)(rng);
        const std::size_t reach = config.window - shrink;
        const std::size_t lo = i >= reach ? i - reach : 0;
        const std::size_t hi = std::min(row.size(), i + reach + 1);
        const std::size_t center = static_cast<std::size_t>(row[i]);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          double* in = &syn0[center * d];
          std::fill(grad.begin(), grad.end(), 0.0);
          for (std::size_t k = 0; k <= config.negatives; ++k) {
            std::size_t target;
            double label;
            if (k == 0) {
              target = static_cast<std::size_t>(row[j]);
              label = 1;
            } else {
              target = sample_negative();
              if (target == static_cast<std::size_t>(row[j])) continue;
              label = 0;
            }
            double* outv = &syn1[target * d];
            double dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += in[c] * outv[c];
            const double pred = 1.0 / (1.0 + std::exp(-std::clamp(dot, -30.0, 30.0)));
            const double g = (label - pred) * lr;
            for (std::size_t c = 0; c < d; ++c) {
              grad[c] += g * outv[c];
              outv[c] += g * in[c];
            }
          }
          for (std::size_t c = 0; c < d; ++c) in[c] += grad[c];
        }
      }
    }
  }

  out.table = Tensor<T>(v, d);
  for (std::size_t i = 0; i < syn0.size(); ++i) out.table[i] = static_cast<T>(syn0[i]);
  return out;
}

template <typename T>
EmbeddingTable<T> pretrain_embeddings(const std::vector<SubtreeSequence>& corpus,
                                      const SkipGramConfig& config) {
  std::vector<std::vector<std::string>> streams;
  for (const auto& seq : corpus) {
    auto s = token_streams(seq);
    streams.insert(streams.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return pretrain_embeddings<T>(streams, config);
}

template EmbeddingTable<float> pretrain_embeddings(const std::vector<std::vector<std::string>>&,
                                                   const SkipGramConfig&);
template EmbeddingTable<double> pretrain_embeddings(const std::vector<std::vector<std::string>>&,
                                                    const SkipGramConfig&);
template EmbeddingTable<float> pretrain_embeddings(const std::vector<SubtreeSequence>&,
                                                   const SkipGramConfig&);
template EmbeddingTable<double> pretrain_embeddings(const std::vector<SubtreeSequence>&,
                                                    const SkipGramConfig&);

}  // namespace xastnn
