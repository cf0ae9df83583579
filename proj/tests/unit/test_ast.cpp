#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "ast.hpp"
#include "minilang.hpp"
#include "synthetic.hpp"

using namespace xastnn;
using nlohmann::json;

namespace {

const char* kLoopSwap =
    "while (i < 5) {\n"
    "    if (a < 100) {\n"
    "        temp = a;\n"
    "        a = b;\n"
    "        b = temp;\n"
    "    }\n"
    "    else\n"
    "        a = a;\n"
    "    i = i + 1;\n"
    "}\n";

std::size_t count_kind(const Ast& ast, const std::string& kind, NodeId from) {
  std::size_t n = ast.node(from).kind == kind ? 1 : 0;
  for (NodeId c : ast.node(from).children) n += count_kind(ast, kind, c);
  return n;
}

}  // namespace

TEST(Parse, LoopSwapShape) {
  const Ast ast = parse_minilang(kLoopSwap);
  EXPECT_EQ(ast.node(ast.root()).kind, "Program");
  const AstNode& loop = ast.node(ast.node(ast.root()).children.at(0));
  EXPECT_EQ(loop.kind, "While");
  EXPECT_EQ(count_kind(ast, "If", loop.id), 1u);
  EXPECT_EQ(count_kind(ast, "Assign", loop.id), 5u);
  EXPECT_EQ(ast.span(loop.id)->line, 1);
}

TEST(Parse, IdsArePreorder) {
  const Ast ast = parse_minilang(kLoopSwap);
  const auto order = ast.preorder();
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(order[i], static_cast<NodeId>(i));
}

TEST(Parse, SyntaxErrorCarriesPosition) {
  try {
    parse_minilang("a = 1;\nb = ;\n");
    FAIL() << "expected a syntax error";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 5);
    EXPECT_EQ(e.token(), ";");
    EXPECT_EQ(e.code(), ErrorCode::kSyntax);
  }
}

TEST(Parse, MissingSemicolonRejected) {
  EXPECT_THROW(parse_minilang("a = a\ni = i + 1;"), SyntaxError);
}

TEST(Parse, ForHeaderKinds) {
  const Ast ast = parse_minilang("for (i = 0; i < n; i = i + 1) { s = s + i; }");
  const AstNode& f = ast.node(ast.node(ast.root()).children[0]);
  ASSERT_EQ(f.kind, "For");
  ASSERT_EQ(f.children.size(), 4u);
  EXPECT_EQ(ast.node(f.children[0]).kind, "Init");
  EXPECT_EQ(ast.node(f.children[1]).kind, "BinaryOp");
  EXPECT_EQ(ast.node(f.children[2]).kind, "Next");
  EXPECT_EQ(ast.node(f.children[3]).kind, "Compound");
}

TEST(Stats, MatchesRecursiveCount) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Ast ast = parse_minilang(random_program(rng));
    std::size_t nodes = 0, tokens = 0;
    std::function<std::size_t(NodeId)> walk = [&](NodeId id) -> std::size_t {
      ++nodes;
      if (ast.node(id).text) ++tokens;
      std::size_t deepest = 0;
      for (NodeId c : ast.node(id).children) deepest = std::max(deepest, walk(c));
      return deepest + 1;
    };
    const std::size_t depth = walk(ast.root());
    const AstStats s = ast_stats(ast);
    EXPECT_EQ(s.depth, depth);
    EXPECT_EQ(s.node_count, nodes);
    EXPECT_EQ(s.token_count, tokens);
  }
}

TEST(Stats, SingleNode) {
  const Ast ast = import_ast_json(json::parse(R"({"root":0,"nodes":[{"id":0,"kind":"Constant","text":"0","children":[]}]})"));
  const AstStats s = ast_stats(ast);
  EXPECT_EQ(s.depth, 1u);
  EXPECT_EQ(s.node_count, 1u);
  EXPECT_EQ(s.token_count, 1u);
}

TEST(Interchange, RoundTripRandomPrograms) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const Ast ast = parse_minilang(random_program(rng));
    const json doc = export_ast_json(ast);
    const Ast back = import_ast_json(json::parse(doc.dump()));
    ASSERT_TRUE(structurally_equal(ast, back)) << "trial " << trial;
    ASSERT_EQ(export_ast_json(back), doc);
  }
}

TEST(Interchange, DepthOneDocumentIsSingleObject) {
  const Ast ast = import_ast_json(json::parse(R"({"root":0,"nodes":[{"id":0,"kind":"Constant","text":"0","children":[]}]})"));
  const json doc = export_ast_json(ast);
  EXPECT_EQ(doc["nodes"].size(), 1u);
  EXPECT_EQ(doc["nodes"][0]["kind"], "Constant");
}

TEST(Interchange, IdsRenumberedToPreorder) {
  const json doc = json::parse(R"({"root":7,"nodes":[
    {"id":7,"kind":"Assign","text":null,"children":[3,9]},
    {"id":9,"kind":"Constant","text":"1","children":[]},
    {"id":3,"kind":"Identifier","text":"a","children":[]}]})");
  const Ast ast = import_ast_json(doc);
  EXPECT_EQ(ast.root(), 0);
  EXPECT_EQ(ast.node(1).kind, "Identifier");
  EXPECT_EQ(ast.node(2).kind, "Constant");
}

TEST(Interchange, UnknownFieldsIgnored) {
  const Ast ast = import_ast_json(json::parse(
      R"({"root":0,"extra":1,"nodes":[{"id":0,"kind":"Constant","text":"0","children":[],"colour":"red"}]})"));
  EXPECT_EQ(ast.size(), 1u);
}

TEST(Interchange, SchemaErrors) {
  auto bad = [](const char* text) {
    try {
      import_ast_json(json::parse(text));
    } catch (const Error& e) {
      return e.code() == ErrorCode::kSchema;
    }
    return false;
  };
  EXPECT_TRUE(bad(R"({"root":0,"nodes":[{"id":0,"kind":"A","text":null,"children":[5]}]})"));
  EXPECT_TRUE(bad(R"({"root":0,"nodes":[{"id":0,"kind":"A","text":null,"children":[1]},
                                        {"id":1,"kind":"B","text":null,"children":[0]}]})"));
  EXPECT_TRUE(bad(R"({"nodes":[{"id":0,"kind":"A","text":null,"children":[]}]})"));
  EXPECT_TRUE(bad(R"({"root":0,"nodes":[{"id":0,"text":null,"children":[]}]})"));
  EXPECT_TRUE(bad(R"({"root":0,"nodes":[{"id":0,"kind":"A","text":null,"children":[1]},
                                        {"id":1,"kind":"B","text":null,"children":[]},
                                        {"id":2,"kind":"C","text":null,"children":[1]}]})"));
  EXPECT_TRUE(bad(R"({"root":0,"nodes":[{"id":0,"kind":"A","text":null,"children":[]},
                                        {"id":0,"kind":"B","text":null,"children":[]}]})"));
  EXPECT_TRUE(bad(R"([1,2,3])"));
}

TEST(Interchange, LoopSwapReimports) {
  const Ast ast = parse_minilang(kLoopSwap);
  const Ast back = import_ast_json(export_ast_json(ast));
  EXPECT_TRUE(structurally_equal(ast, back));
  EXPECT_EQ(back.span(1)->line, 1);
}
