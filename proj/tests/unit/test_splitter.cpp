#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <random>

#include "minilang.hpp"
#include "splitter.hpp"
#include "synthetic.hpp"

using namespace xastnn;

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

const RootIdentifierSet& ids() {
  static const RootIdentifierSet r = default_identifiers("minilang");
  return r;
}

}  // namespace

TEST(Split, LoopSwapGoldenSequence) {
  const Ast ast = parse_minilang(kLoopSwap);
  const std::vector<std::string> expected = {"While",     "If",  "Compound", "Assign(3)", "Assign(4)",
                                             "Assign(5)", "End", "Else",     "Assign(8)", "Assign(9)"};
  EXPECT_EQ(split(ast, ids()).labels(), expected);
}

TEST(Split, SingleStatement) {
  const Ast ast = parse_minilang("a = b;");
  const SubtreeSequence seq = split(ast, ids());
  ASSERT_EQ(seq.size(), 1u);
  EXPECT_EQ(seq.items[0].label, "Assign(1)");
  EXPECT_EQ(seq.items[0].member_ids.size(), 3u);
}

TEST(Split, EmptyFunctionBody) {
  const Ast ast = parse_minilang("void f() {}");
  EXPECT_EQ(split(ast, ids()).labels(), std::vector<std::string>{"FunctionDef"});
}

TEST(Split, TokenGranularityIsOneNodeEach) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Ast ast = parse_minilang(random_program(rng));
    const SubtreeSequence seq = split(ast, ids(), Granularity::kToken);
    ASSERT_EQ(seq.size(), ast.size());
    for (const auto& s : seq.items) EXPECT_EQ(s.member_ids.size(), 1u);
  }
}

TEST(Split, ProgramGranularityIsWholeTree) {
  const Ast ast = parse_minilang(kLoopSwap);
  const SubtreeSequence seq = split(ast, ids(), Granularity::kProgram);
  ASSERT_EQ(seq.size(), 1u);
  EXPECT_EQ(seq.items[0].member_ids.size(), ast.size());
}

// Every node outside the container kinds lands in exactly one statement
// subtree, and each subtree is connected.
TEST(Split, PartitionOracle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const Ast ast = parse_minilang(random_program(rng, 4, 4));
    const SubtreeSequence seq = split(ast, ids());
    std::map<NodeId, int> hits;
    for (const auto& s : seq.items) {
      if (s.delimiter) {
        EXPECT_TRUE(ids().containers.count(ast.node(s.root_id).kind));
        continue;
      }
      EXPECT_TRUE(ids().kinds.count(ast.node(s.root_id).kind));
      for (NodeId m : s.member_ids) ++hits[m];
      EXPECT_NO_THROW(to_token_tree(s, ast));
    }
    for (NodeId id = 0; id < static_cast<NodeId>(ast.size()); ++id) {
      const bool container = ids().containers.count(ast.node(id).kind) > 0;
      EXPECT_EQ(hits[id], container ? 0 : 1) << "node " << id << " kind " << ast.node(id).kind;
    }
  }
}

TEST(Split, SubtreeDepthMatchesRecursion) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Ast ast = parse_minilang(random_program(rng));
    for (const auto& s : split(ast, ids()).items) {
      if (s.delimiter) continue;
      std::set<NodeId> members(s.member_ids.begin(), s.member_ids.end());
      std::function<std::size_t(NodeId)> depth = [&](NodeId id) -> std::size_t {
        std::size_t best = 0;
        for (NodeId c : ast.node(id).children) {
          if (members.count(c)) best = std::max(best, depth(c));
        }
        return best + 1;
      };
      EXPECT_EQ(subtree_depth(s, ast), depth(s.root_id));
    }
  }
}

TEST(Split, MembersArePreorderWithRootFirst) {
  const Ast ast = parse_minilang("x = (a + b) * c;");
  const auto seq = split(ast, ids());
  ASSERT_EQ(seq.size(), 1u);
  const auto& m = seq.items[0].member_ids;
  EXPECT_TRUE(std::is_sorted(m.begin(), m.end()));
  EXPECT_EQ(m.front(), seq.items[0].root_id);
}

TEST(Split, TokenTreeTokensAndParents) {
  const Ast ast = parse_minilang("x = a + 1;");
  const auto seq = split(ast, ids());
  const TokenTree t = to_token_tree(seq.items[0], ast);
  const std::vector<std::string> tokens = {"Assign", "Identifier:x", "BinaryOp:+", "Identifier:a", "Constant:1"};
  EXPECT_EQ(t.tokens, tokens);
  EXPECT_EQ(t.parent, (std::vector<std::int32_t>{-1, 0, 0, 2, 2}));
}

TEST(Split, EndMarkerToken) {
  const Ast ast = parse_minilang(kLoopSwap);
  const auto seq = split(ast, ids());
  const auto trees = to_token_trees(seq);
  EXPECT_EQ(trees[6].tokens, std::vector<std::string>{"End"});
}

TEST(Split, GenericProfileUsesGivenKinds) {
  const Ast ast = parse_minilang(kLoopSwap);
  const auto r = default_identifiers("generic-json", {"If", "Assign"});
  const auto labels = split(ast, r).labels();
  EXPECT_EQ(labels, (std::vector<std::string>{"If", "Assign", "Assign", "Assign", "Assign", "Assign"}));
}

TEST(Split, Errors) {
  const Ast ast = parse_minilang("a = b;");
  EXPECT_THROW(default_identifiers("cobol"), Error);
  try {
    split(ast, default_identifiers("generic-json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyIdentifierSet);
  }
  EXPECT_THROW(parse_granularity("sentence"), Error);
}
