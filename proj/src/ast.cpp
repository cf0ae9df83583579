#include "ast.hpp"

#include <algorithm>
#include <unordered_map>
#include <utility>

#include "errors.hpp"

namespace xastnn {

namespace {

[[noreturn]] void schema_error(const std::string& what) { fail(ErrorCode::kSchema, what); }

}  // namespace

Ast::Ast(std::vector<AstNode> nodes, NodeId root, std::vector<SourceSpan> spans)
    : nodes_(std::move(nodes)), spans_(std::move(spans)), root_(root) {
  const auto n = static_cast<NodeId>(nodes_.size());
  if (n == 0) schema_error("an AST needs at least one node");
  if (root_ < 0 || root_ >= n) schema_error("root id " + std::to_string(root_) + " out of range");
  if (!spans_.empty() && spans_.size() != nodes_.size()) {
    schema_error("span table size does not match node count");
  }
  parents_.assign(nodes_.size(), -1);
  for (NodeId i = 0; i < n; ++i) {
    const AstNode& node = nodes_[static_cast<std::size_t>(i)];
    if (node.id != i) schema_error("node ids must equal their index (node " + std::to_string(i) + ")");
    if (node.kind.empty()) schema_error("node " + std::to_string(i) + " has an empty kind");
    for (NodeId c : node.children) {
      if (c < 0 || c >= n) {
        schema_error("node " + std::to_string(i) + " references missing child " + std::to_string(c));
      }
      if (c == root_) schema_error("root " + std::to_string(c) + " appears as a child");
      NodeId& p = parents_[static_cast<std::size_t>(c)];
      if (p != -1) schema_error("node " + std::to_string(c) + " has more than one parent");
      p = i;
    }
  }
  // Single parents plus full reachability from the root rule out cycles.
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<NodeId> stack{root_};
  std::size_t reached = 0;
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(id)]) schema_error("cycle detected at node " + std::to_string(id));
    seen[static_cast<std::size_t>(id)] = true;
    ++reached;
    for (NodeId c : nodes_[static_cast<std::size_t>(id)].children) stack.push_back(c);
  }
  if (reached != nodes_.size()) schema_error("nodes unreachable from the root (cycle detected)");
}

std::optional<SourceSpan> Ast::span(NodeId id) const {
  if (spans_.empty()) return std::nullopt;
  return spans_.at(static_cast<std::size_t>(id));
}

std::vector<NodeId> Ast::preorder() const {
  std::vector<NodeId> order;
  order.reserve(nodes_.size());
  std::vector<NodeId> stack{root_};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& ch = nodes_[static_cast<std::size_t>(id)].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

bool structurally_equal(const Ast& a, const Ast& b) {
  if (a.size() != b.size()) return false;
  std::vector<std::pair<NodeId, NodeId>> stack{{a.root(), b.root()}};
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    stack.pop_back();
    const AstNode& nx = a.node(x);
    const AstNode& ny = b.node(y);
    if (nx.kind != ny.kind || nx.text != ny.text || nx.children.size() != ny.children.size()) {
      return false;
    }
    for (std::size_t i = 0; i < nx.children.size(); ++i) {
      stack.emplace_back(nx.children[i], ny.children[i]);
    }
  }
  return true;
}

AstStats ast_stats(const Ast& ast) {
  AstStats s;
  s.node_count = ast.size();
  std::vector<std::pair<NodeId, std::size_t>> stack{{ast.root(), 1}};
  while (!stack.empty()) {
    auto [id, depth] = stack.back();
    stack.pop_back();
    s.depth = std::max(s.depth, depth);
    const AstNode& node = ast.node(id);
    if (node.text) ++s.token_count;
    for (NodeId c : node.children) stack.emplace_back(c, depth + 1);
  }
  return s;
}

nlohmann::json export_ast_json(const Ast& ast) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const AstNode& n : ast.nodes()) {
    nlohmann::json j;
    j["id"] = n.id;
    j["kind"] = n.kind;
    j["text"] = n.text ? nlohmann::json(*n.text) : nlohmann::json(nullptr);
    j["children"] = n.children;
    if (auto sp = ast.span(n.id)) {
      j["span"] = {{"begin", sp->begin}, {"end", sp->end}, {"line", sp->line}};
    }
    nodes.push_back(std::move(j));
  }
  return {{"root", ast.root()}, {"nodes", std::move(nodes)}};
}

Ast import_ast_json(const nlohmann::json& doc) {
  if (!doc.is_object()) schema_error("AST document must be an object");
  if (!doc.contains("root") || !doc["root"].is_number_integer()) {
    schema_error("missing integer field 'root'");
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) schema_error("missing array field 'nodes'");

  struct Raw {
    std::string kind;
    std::optional<std::string> text;
    std::vector<std::int64_t> children;
    std::optional<SourceSpan> span;
  };
  std::unordered_map<std::int64_t, Raw> raw;
  std::vector<std::int64_t> ids;
  bool all_spans = true;
  for (const auto& j : doc["nodes"]) {
    if (!j.is_object()) schema_error("node entries must be objects");
    if (!j.contains("id") || !j["id"].is_number_integer()) schema_error("node missing integer 'id'");
    if (!j.contains("kind") || !j["kind"].is_string()) schema_error("node missing string 'kind'");
    Raw r;
    const auto id = j["id"].get<std::int64_t>();
    r.kind = j["kind"].get<std::string>();
    if (j.contains("text") && !j["text"].is_null()) {
      if (!j["text"].is_string()) schema_error("node " + std::to_string(id) + ": 'text' must be string or null");
      r.text = j["text"].get<std::string>();
    }
    if (j.contains("children")) {
      if (!j["children"].is_array()) schema_error("node " + std::to_string(id) + ": 'children' must be an array");
      for (const auto& c : j["children"]) {
        if (!c.is_number_integer()) schema_error("node " + std::to_string(id) + ": child ids must be integers");
        r.children.push_back(c.get<std::int64_t>());
      }
    } else {
      schema_error("node " + std::to_string(id) + " missing 'children'");
    }
    if (j.contains("span") && j["span"].is_object()) {
      const auto& s = j["span"];
      r.span = SourceSpan{s.value("begin", std::size_t{0}), s.value("end", std::size_t{0}),
                          s.value("line", 0)};
    } else {
      all_spans = false;
    }
    if (!raw.emplace(id, std::move(r)).second) schema_error("duplicate node id " + std::to_string(id));
    ids.push_back(id);
  }
  const auto root = doc["root"].get<std::int64_t>();
  if (!raw.count(root)) schema_error("root " + std::to_string(root) + " is not a node");

  std::unordered_map<std::int64_t, int> parent_count;
  for (const auto& [id, r] : raw) {
    for (auto c : r.children) {
      if (!raw.count(c)) {
        schema_error("node " + std::to_string(id) + " references missing child " + std::to_string(c));
      }
      if (++parent_count[c] > 1) schema_error("node " + std::to_string(c) + " has more than one parent");
    }
  }
  if (parent_count.count(root)) schema_error("cycle detected: root is a child");

  // Renumber to contiguous preorder.
  std::unordered_map<std::int64_t, NodeId> renumber;
  std::vector<std::int64_t> order;
  std::vector<std::int64_t> stack{root};
  while (!stack.empty()) {
    const auto id = stack.back();
    stack.pop_back();
    if (renumber.count(id)) schema_error("cycle detected at node " + std::to_string(id));
    renumber.emplace(id, static_cast<NodeId>(order.size()));
    order.push_back(id);
    const auto& ch = raw.at(id).children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  if (order.size() != raw.size()) schema_error("nodes unreachable from the root (cycle detected)");

  std::vector<AstNode> nodes(order.size());
  std::vector<SourceSpan> spans;
  if (all_spans) spans.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    Raw& r = raw.at(order[i]);
    AstNode& n = nodes[i];
    n.id = static_cast<NodeId>(i);
    n.kind = std::move(r.kind);
    n.text = std::move(r.text);
    for (auto c : r.children) n.children.push_back(renumber.at(c));
    if (all_spans) spans[i] = *r.span;
  }
  return Ast(std::move(nodes), 0, std::move(spans));
}

}  // namespace xastnn
