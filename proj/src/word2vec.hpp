#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitter.hpp"
#include "tensor.hpp"
#include "vocabulary.hpp"

namespace xastnn {

struct SkipGramConfig {
  std::size_t dim = 128;
  std::size_t epochs = 5;
  std::size_t negatives = 5;
  std::size_t window = 5;
  double learning_rate = 0.025;
  std::size_t min_count = 1;
  std::uint64_t seed = 42;
};

template <typename T>
struct EmbeddingTable {
  Vocabulary vocab;
  Tensor<T> table;  // vocab.size() x dim, row 0 = unk
};

// Preorder token stream of every subtree, one stream per subtree.
std::vector<std::vector<std::string>> token_streams(const SubtreeSequence& seq);

// Skip-gram with negative sampling over the given streams. Context windows do
// not cross stream boundaries. Deterministic for a fixed seed.
template <typename T>
EmbeddingTable<T> pretrain_embeddings(const std::vector<std::vector<std::string>>& streams,
                                      const SkipGramConfig& config);

template <typename T>
EmbeddingTable<T> pretrain_embeddings(const std::vector<SubtreeSequence>& corpus,
                                      const SkipGramConfig& config);

}  // namespace xastnn
