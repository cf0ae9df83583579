#include "vocabulary.hpp"

#include <algorithm>

#include "errors.hpp"

namespace xastnn {

Vocabulary::Vocabulary() {
  tokens_.emplace_back(kUnkToken);
  index_.emplace(kUnkToken, kUnk);
}

Vocabulary Vocabulary::from_counts(const std::unordered_map<std::string, std::size_t>& counts,
                                   std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> items;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count && tok != kUnkToken) items.emplace_back(tok, n);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, n] : items) v.add(tok);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& ordered_tokens) {
  Vocabulary v;
  for (const auto& t : ordered_tokens) {
    if (v.contains(t)) fail(ErrorCode::kInvalidArgument, "duplicate vocabulary token '" + t + "'");
    v.add(t);
  }
  return v;
}

std::int32_t Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::int32_t Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::size_t IndexedTree::depth() const {
  if (parent.empty()) return 0;
  std::vector<std::size_t> d(parent.size(), 1);
  std::size_t best = 1;
  for (std::size_t i = 1; i < parent.size(); ++i) {
    d[i] = d[static_cast<std::size_t>(parent[i])] + 1;
    best = std::max(best, d[i]);
  }
  return best;
}

IndexedTree index_tree(const TokenTree& tree, const Vocabulary& vocab) {
  IndexedTree t;
  t.parent = tree.parent;
  t.token_ids.reserve(tree.size());
  for (const auto& tok : tree.tokens) t.token_ids.push_back(vocab.index(tok));
  return t;
}

IndexedSequence index_sequence(const std::vector<TokenTree>& trees, const Vocabulary& vocab) {
  IndexedSequence seq;
  seq.reserve(trees.size());
  for (const auto& t : trees) seq.push_back(index_tree(t, vocab));
  return seq;
}

}  // namespace xastnn
