#include "splitter.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "errors.hpp"

namespace xastnn {

const char* granularity_name(Granularity g) {
  switch (g) {
    case Granularity::kStatement: return "statement";
    case Granularity::kProgram: return "program";
    case Granularity::kToken: return "token";
  }
  return "statement";
}

Granularity parse_granularity(const std::string& name) {
  if (name == "statement") return Granularity::kStatement;
  if (name == "program") return Granularity::kProgram;
  if (name == "token") return Granularity::kToken;
  fail(ErrorCode::kInvalidArgument, "unknown granularity '" + name + "'");
}

RootIdentifierSet default_identifiers(const std::string& language_profile,
                                      const std::set<std::string>& user_kinds) {
  RootIdentifierSet r;
  if (language_profile == "minilang") {
    r.kinds = {"FunctionDef", "Decl", "Assign", "If", "While", "For", "Return", "ExprStmt"};
    r.kinds.insert(user_kinds.begin(), user_kinds.end());
    r.containers = {"Program", "Compound", "Else"};
    r.delimiters = {{"Compound", {"Compound", "End"}}, {"Else", {"Else", std::nullopt}}};
    r.silent_under = {"While", "For", "FunctionDef"};
    r.line_labelled = {"Decl", "Assign", "Return", "ExprStmt"};
    return r;
  }
  if (language_profile == "generic-json") {
    r.kinds = user_kinds;
    return r;
  }
  fail(ErrorCode::kUnknownProfile, "unknown language profile '" + language_profile + "'");
}

std::string token_string(const AstNode& node) {
  return node.text ? node.kind + ":" + *node.text : node.kind;
}

std::vector<std::string> SubtreeSequence::labels() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(s.label);
  return out;
}

namespace {

class Splitter {
 public:
  Splitter(const Ast& ast, const RootIdentifierSet& ids) : ast_(ast), ids_(ids) {}

  SubtreeSequence run() {
    SubtreeSequence seq;
    seq.source_ast = &ast_;
    out_ = &seq.items;
    traverse(ast_.root());
    return seq;
  }

 private:
  bool is_root(const AstNode& n) const { return ids_.kinds.count(n.kind) > 0; }
  bool is_container(const AstNode& n) const { return ids_.containers.count(n.kind) > 0; }

  void traverse(NodeId id) {
    const AstNode& n = ast_.node(id);
    if (is_root(n)) {
      StatementSubtree s = build(id);
      const std::vector<NodeId> member_ids = s.member_ids;
      std::unordered_set<NodeId> members(member_ids.begin(), member_ids.end());
      out_->push_back(std::move(s));
      // Nested roots and containers may hang below any member, not only the root.
      // Members are in preorder, so this keeps source order.
      for (NodeId m : member_ids) {
        for (NodeId c : ast_.node(m).children) {
          if (!members.count(c)) traverse(c);
        }
      }
      return;
    }
    const DelimiterRule* rule = nullptr;
    if (is_container(n)) {
      auto it = ids_.delimiters.find(n.kind);
      if (it != ids_.delimiters.end() && !silenced(id)) rule = &it->second;
    }
    if (rule) out_->push_back(marker(id, rule->open));
    for (NodeId c : n.children) traverse(c);
    if (rule && rule->close) out_->push_back(marker(id, *rule->close));
  }

  bool silenced(NodeId id) const {
    if (id == ast_.root()) return false;
    return ids_.silent_under.count(ast_.node(ast_.parent(id)).kind) > 0;
  }

  StatementSubtree marker(NodeId id, const std::string& label) const {
    StatementSubtree s;
    s.root_id = id;
    s.member_ids = {id};
    s.label = label;
    s.delimiter = true;
    s.root_token = label;
    return s;
  }

  // Root plus every descendant reachable without entering another statement
  // root or a container.
  StatementSubtree build(NodeId id) const {
    StatementSubtree s;
    s.root_id = id;
    const AstNode& root = ast_.node(id);
    s.root_token = token_string(root);
    s.label = root.kind;
    if (ids_.line_labelled.count(root.kind)) {
      if (auto sp = ast_.span(id); sp && sp->line > 0) {
        s.label += "(" + std::to_string(sp->line) + ")";
      }
    }
    std::vector<NodeId> stack{id};
    while (!stack.empty()) {
      const NodeId cur = stack.back();
      stack.pop_back();
      s.member_ids.push_back(cur);
      const auto& ch = ast_.node(cur).children;
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) {
        const AstNode& c = ast_.node(*it);
        if (!is_root(c) && !is_container(c)) stack.push_back(*it);
      }
    }
    return s;
  }

  const Ast& ast_;
  const RootIdentifierSet& ids_;
  std::vector<StatementSubtree>* out_ = nullptr;
};

}  // namespace

SubtreeSequence split(const Ast& ast, const RootIdentifierSet& identifiers,
                      Granularity granularity) {
  SubtreeSequence seq;
  seq.source_ast = &ast;
  switch (granularity) {
    case Granularity::kStatement:
      if (identifiers.kinds.empty()) {
        fail(ErrorCode::kEmptyIdentifierSet, "statement granularity needs statement kinds");
      }
      return Splitter(ast, identifiers).run();
    case Granularity::kProgram: {
      StatementSubtree s;
      s.root_id = ast.root();
      s.member_ids = ast.preorder();
      s.label = ast.node(ast.root()).kind;
      s.root_token = token_string(ast.node(ast.root()));
      seq.items.push_back(std::move(s));
      return seq;
    }
    case Granularity::kToken:
      for (NodeId id : ast.preorder()) {
        StatementSubtree s;
        s.root_id = id;
        s.member_ids = {id};
        s.label = ast.node(id).kind;
        s.root_token = token_string(ast.node(id));
        seq.items.push_back(std::move(s));
      }
      return seq;
  }
  return seq;
}

TokenTree to_token_tree(const StatementSubtree& subtree, const Ast& ast) {
  TokenTree t;
  const std::size_t n = subtree.member_ids.size();
  t.tokens.reserve(n);
  t.parent.reserve(n);
  std::unordered_map<NodeId, std::int32_t> local;
  local.reserve(n);
  for (std::size_t i = 0; i < n; ++i) local.emplace(subtree.member_ids[i], static_cast<std::int32_t>(i));
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId id = subtree.member_ids[i];
    t.tokens.push_back(i == 0 ? subtree.root_token : token_string(ast.node(id)));
    if (i == 0) {
      t.parent.push_back(-1);
    } else {
      auto it = local.find(ast.parent(id));
      if (it == local.end()) {
        fail(ErrorCode::kInvalidArgument, "subtree members are not connected at node " +
                                              std::to_string(id));
      }
      t.parent.push_back(it->second);
    }
  }
  return t;
}

std::vector<TokenTree> to_token_trees(const SubtreeSequence& seq) {
  if (seq.source_ast == nullptr) fail(ErrorCode::kInvalidArgument, "sequence has no source AST");
  std::vector<TokenTree> out;
  out.reserve(seq.items.size());
  for (const auto& s : seq.items) out.push_back(to_token_tree(s, *seq.source_ast));
  return out;
}

std::size_t subtree_depth(const StatementSubtree& subtree, const Ast& ast) {
  const TokenTree t = to_token_tree(subtree, ast);
  std::vector<std::size_t> depth(t.size(), 1);
  std::size_t best = t.size() ? 1 : 0;
  // Parents precede children in preorder.
  for (std::size_t i = 1; i < t.size(); ++i) {
    depth[i] = depth[static_cast<std::size_t>(t.parent[i])] + 1;
    best = std::max(best, depth[i]);
  }
  return best;
}

}  // namespace xastnn
