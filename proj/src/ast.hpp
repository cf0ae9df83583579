#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace xastnn {

using NodeId = std::int32_t;

struct AstNode {
  NodeId id = 0;
  std::string kind;
  std::optional<std::string> text;
  std::vector<NodeId> children;

  bool operator==(const AstNode&) const = default;
};

// Byte range [begin, end) in the source plus the 1-based line of `begin`.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  int line = 0;

  bool operator==(const SourceSpan&) const = default;
};

// Immutable ordered labelled tree. Node ids are the contiguous range
// 0..size()-1 and equal the node's index; construction validates every
// structural invariant and throws SchemaError otherwise.
class Ast {
 public:
  Ast(std::vector<AstNode> nodes, NodeId root, std::vector<SourceSpan> spans = {});

  NodeId root() const noexcept { return root_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const AstNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<AstNode>& nodes() const noexcept { return nodes_; }
  NodeId parent(NodeId id) const { return parents_.at(static_cast<std::size_t>(id)); }

  bool has_spans() const noexcept { return !spans_.empty(); }
  std::optional<SourceSpan> span(NodeId id) const;

  // Node ids in preorder starting from the root.
  std::vector<NodeId> preorder() const;

 private:
  std::vector<AstNode> nodes_;
  std::vector<NodeId> parents_;
  std::vector<SourceSpan> spans_;
  NodeId root_;
};

// Same kinds, texts and child order; ids and spans are not compared.
bool structurally_equal(const Ast& a, const Ast& b);

struct AstStats {
  std::size_t depth = 0;
  std::size_t node_count = 0;
  // Nodes that carry lexical text (identifiers, constants, operators, names).
  std::size_t token_count = 0;
};

AstStats ast_stats(const Ast& ast);

// Interchange document: {"root": int, "nodes": [{"id", "kind", "text", "children"}]}.
// Export also writes an optional "span" object per node; import reads it when
// present and ignores any other unknown field.
nlohmann::json export_ast_json(const Ast& ast);
Ast import_ast_json(const nlohmann::json& doc);

}  // namespace xastnn
