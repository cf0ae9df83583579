#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "splitter.hpp"

namespace xastnn {

// Token <-> index map. Index 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  static constexpr std::int32_t kUnk = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();

  // Tokens ordered by descending frequency, ties broken lexicographically.
  static Vocabulary from_counts(const std::unordered_map<std::string, std::size_t>& counts,
                                std::size_t min_count = 1);
  static Vocabulary from_tokens(const std::vector<std::string>& ordered_tokens);

  std::int32_t add(const std::string& token);
  std::int32_t index(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(std::int32_t index) const { return tokens_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const noexcept { return tokens_.size(); }
  // Tokens after the unk entry, in index order.
  std::vector<std::string> tokens() const { return {tokens_.begin() + 1, tokens_.end()}; }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// TokenTree with tokens resolved to vocabulary indices.
struct IndexedTree {
  std::vector<std::int32_t> token_ids;
  std::vector<std::int32_t> parent;

  std::size_t size() const noexcept { return token_ids.size(); }
  std::size_t depth() const;
  bool operator==(const IndexedTree&) const = default;
};

// One program: its indexed statement subtree sequence.
using IndexedSequence = std::vector<IndexedTree>;

IndexedTree index_tree(const TokenTree& tree, const Vocabulary& vocab);
IndexedSequence index_sequence(const std::vector<TokenTree>& trees, const Vocabulary& vocab);

}  // namespace xastnn
