#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ast.hpp"
#include "errors.hpp"

namespace xastnn {

// Marker labels a block kind emits on entry and (optionally) on exit.
struct DelimiterRule {
  std::string open;
  std::optional<std::string> close;

  bool operator==(const DelimiterRule&) const = default;
};

// Statement-root identifiers plus the block bookkeeping used by split().
struct RootIdentifierSet {
  // Kinds that start a statement subtree.
  std::set<std::string> kinds;
  // Pure container kinds. They never join a statement subtree; the traversal
  // walks through them.
  std::set<std::string> containers;
  // Containers that emit boundary markers (subset of `containers`).
  std::map<std::string, DelimiterRule> delimiters;
  // A delimiter block whose parent has one of these kinds emits no markers
  // (loop and function bodies).
  std::set<std::string> silent_under;
  // Statement kinds whose label carries the source line, e.g. Assign(3).
  std::set<std::string> line_labelled;

  bool operator==(const RootIdentifierSet&) const = default;
};

enum class Granularity { kStatement, kProgram, kToken };

const char* granularity_name(Granularity g);
Granularity parse_granularity(const std::string& name);

// Profiles: "minilang" and "generic-json". The generic profile echoes
// `user_kinds` as statement roots and has no containers or delimiters.
RootIdentifierSet default_identifiers(const std::string& language_profile,
                                      const std::set<std::string>& user_kinds = {});

struct StatementSubtree {
  NodeId root_id = 0;
  // Root first, then the remaining members in preorder.
  std::vector<NodeId> member_ids;
  std::string label;
  // Block marker (Compound/End/Else); not part of the node partition.
  bool delimiter = false;
  // Token fed to the encoder for the root: the marker label for End,
  // otherwise derived from the node.
  std::string root_token;

  bool operator==(const StatementSubtree&) const = default;
};

struct SubtreeSequence {
  std::vector<StatementSubtree> items;
  const Ast* source_ast = nullptr;

  std::size_t size() const noexcept { return items.size(); }
  std::vector<std::string> labels() const;
};

SubtreeSequence split(const Ast& ast, const RootIdentifierSet& identifiers,
                      Granularity granularity = Granularity::kStatement);

// Longest root-to-leaf path, in nodes, within the member set.
std::size_t subtree_depth(const StatementSubtree& subtree, const Ast& ast);

// Encoder token for a node: kind, or "kind:text" when the node has text.
std::string token_string(const AstNode& node);

// Self-contained view of a subtree for the encoders: tokens in preorder with
// the local parent index of each node (-1 for the root).
struct TokenTree {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> parent;

  std::size_t size() const noexcept { return tokens.size(); }
  bool operator==(const TokenTree&) const = default;
};

TokenTree to_token_tree(const StatementSubtree& subtree, const Ast& ast);
std::vector<TokenTree> to_token_trees(const SubtreeSequence& seq);

}  // namespace xastnn
