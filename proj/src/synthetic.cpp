#include "synthetic.hpp"

#include <algorithm>
#include <array>
#include <map>

#include <json.hpp>

namespace xastnn {

namespace {

constexpr std::array<const char*, 14> kNames = {"a", "b", "c", "i", "j", "k", "n", "s",
                                                "t", "u", "v", "x", "y", "z"};
constexpr std::array<const char*, 3> kOps = {"+", "-", "*"};
constexpr std::array<const char*, 4> kCompare = {"<", ">", "<=", "!="};

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  explicit Gen(std::mt19937_64& rng) : rng_(rng()) {}

  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin() { return below(2) == 1; }
  std::string name() { return kNames[below(kNames.size())]; }
  std::string op() { return kOps[below(kOps.size())]; }
  std::string constant() { return std::to_string(below(100)); }
  std::string atom() { return below(3) == 0 ? constant() : name(); }

  std::string expr() {
    switch (below(5)) {
      case 0: return atom();
      case 1: return name() + " " + op() + " " + atom();
      case 2: return name() + " " + op() + " " + name();
      case 3: return "(" + name() + " " + op() + " " + atom() + ") " + op() + " " + atom();
      default: return name() + " " + op() + " " + constant();
    }
  }

  std::string simple_statement() {
    switch (below(4)) {
      case 0: return "int " + name() + " = " + expr() + ";";
      case 1: return "print(" + expr() + ");";
      default: return name() + " = " + expr() + ";";
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

struct Writer {
  std::string out;
  int indent = 0;
  void line(const std::string& s) {
    out.append(static_cast<std::size_t>(indent) * 2, ' ');
    out += s;
    out += '\n';
  }
};

void fillers(Gen& g, Writer& w, std::size_t lo, std::size_t hi) {
  const std::size_t n = lo + g.below(hi - lo + 1);
  for (std::size_t i = 0; i < n; ++i) w.line(g.simple_statement());
}

void loop_block(Gen& g, Writer& w, int shape) {
  const std::string a = g.name(), b = g.name(), c = g.name(), d = g.atom();
  const std::string cond = shape == 0 ? "(" + a + " + " + b + ") * " + c
                                      : "(" + a + " * " + b + ") + " + c;
  w.line("while (" + cond + " < " + d + ") {");
  ++w.indent;
  fillers(g, w, 1, 2);
  const std::string i = g.name();
  w.line(i + " = " + i + " + 1;");
  --w.indent;
  w.line("}");
}

void branch_block(Gen& g, Writer& w) {
  w.line("if (" + g.name() + " " + kCompare[g.below(kCompare.size())] + " " + g.atom() + ") {");
  ++w.indent;
  fillers(g, w, 1, 2);
  --w.indent;
  if (g.coin()) {
    w.line("} else {");
    ++w.indent;
    fillers(g, w, 1, 1);
    --w.indent;
  }
  w.line("}");
}

// Template bodies. $0..$5 are identifier slots, $f the function name.
const std::vector<std::string>& clone_templates() {
  static const std::vector<std::string> t = {
      "int $f(int $0) {\n  int $1 = 0;\n  int $2 = 0;\n  while ($2 < $0) {\n    $1 = $1 + $2;\n"
      "    $2 = $2 + 1;\n  }\n  return $1;\n}\n",
      "int $f(int $0, int $1) {\n  if ($0 > $1) {\n    return $0;\n  } else {\n    return $1;\n  }\n}\n",
      "int $f(int $0) {\n  int $1 = 1;\n  for ($2 = 1; $2 <= $0; $2 = $2 + 1) {\n    $1 = $1 * $2;\n"
      "  }\n  return $1;\n}\n",
      "int $f(int $0, int $1) {\n  while ($1 != 0) {\n    int $2 = $0 % $1;\n    $0 = $1;\n"
      "    $1 = $2;\n  }\n  return $0;\n}\n",
      "int $f(int $0) {\n  int $1 = 0;\n  while ($0 > 0) {\n    $0 = $0 / 10;\n    $1 = $1 + 1;\n"
      "  }\n  return $1;\n}\n",
      "int $f(int $0) {\n  int $1 = 0;\n  int $2 = 1;\n  for ($3 = 0; $3 < $0; $3 = $3 + 1) {\n"
      "    int $4 = $1 + $2;\n    $1 = $2;\n    $2 = $4;\n  }\n  return $1;\n}\n",
      "int $f(int $0, int $1) {\n  if ($0 < 0) {\n    return 0 - 1;\n  } else {\n    if ($0 > $1) {\n"
      "      return $1;\n    }\n  }\n  return $0;\n}\n",
      "int $f(int $0) {\n  int $1 = 0;\n  for ($2 = 0; $2 < $0; $2 = $2 + 1) {\n"
      "    for ($3 = 0; $3 < $2; $3 = $3 + 1) {\n      $1 = $1 + $2 * $3;\n    }\n  }\n  return $1;\n}\n",
      "int $f(int $0, int $1) {\n  int $2 = 1;\n  while ($1 > 0) {\n    if ($1 % 2 == 1) {\n"
      "      $2 = $2 * $0;\n    }\n    $0 = $0 * $0;\n    $1 = $1 / 2;\n  }\n  return $2;\n}\n",
      "void $f(int $0) {\n  int $1 = 0;\n  while ($1 < $0) {\n    print($1);\n    $1 = $1 + 2;\n"
      "  }\n  print($0);\n}\n",
  };
  return t;
}

std::string instantiate(const std::string& tmpl, Gen& g) {
  std::vector<std::string> pool(kNames.begin(), kNames.end());
  for (const char* extra : {"m", "p", "q", "r", "w", "acc", "tmp", "res", "cnt", "val"}) pool.push_back(extra);
  std::shuffle(pool.begin(), pool.end(), g.rng());
  static constexpr std::array<const char*, 8> kFuncs = {"f", "g", "h", "calc", "run", "solve", "work", "go"};
  const std::string fname = kFuncs[g.below(kFuncs.size())];
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '$' && i + 1 < tmpl.size()) {
      const char c = tmpl[++i];
      out += c == 'f' ? fname : pool[static_cast<std::size_t>(c - '0')];
    } else {
      out += tmpl[i];
    }
  }
  return out;
}

}  // namespace

ClassificationCorpus classification_corpus(std::size_t n, std::uint64_t seed) {
  ClassificationCorpus c;
  Gen g(seed);
  for (std::size_t p = 0; p < n; ++p) {
    const int label = static_cast<int>(p % 4);
    const int order = label / 2, shape = label % 2;
    Writer w;
    w.line("int main() {");
    ++w.indent;
    fillers(g, w, 0, 2);
    if (order == 0) {
      loop_block(g, w, shape);
      fillers(g, w, 0, 2);
      branch_block(g, w);
    } else {
      branch_block(g, w);
      fillers(g, w, 0, 2);
      loop_block(g, w, shape);
    }
    fillers(g, w, 0, 2);
    w.line("return " + g.atom() + ";");
    --w.indent;
    w.line("}");
    c.sources.push_back(std::move(w.out));
    c.labels.push_back(label);
  }
  return c;
}

std::size_t clone_template_count() { return clone_templates().size(); }

CloneCorpus clone_corpus(std::size_t n_pairs, std::uint64_t seed) {
  CloneCorpus c;
  Gen g(seed);
  const auto& templates = clone_templates();
  const std::size_t k = templates.size();
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const std::int32_t label = p % 2 == 0 ? 1 : 0;
    const std::size_t t1 = g.below(k);
    const std::size_t t2 = label == 1 ? t1 : (t1 + 1 + g.below(k - 1)) % k;
    const std::size_t left = c.sources.size();
    for (std::size_t t : {t1, t2}) {
      c.ids.push_back("c" + std::to_string(c.sources.size()));
      c.sources.push_back(instantiate(templates[t], g));
    }
    c.pairs.push_back({left, left + 1, label});
  }
  return c;
}

std::vector<std::string> homogeneous_corpus(std::size_t n, std::uint64_t seed) {
  Gen g(seed);
  std::vector<std::string> out;
  auto e = [&] { return "(" + g.name() + " " + g.op() + " " + g.name() + ") " + g.op() + " " + g.name(); };
  for (std::size_t p = 0; p < n; ++p) {
    Writer w;
    w.line("int main() {");
    ++w.indent;
    w.line("int " + g.name() + " = " + e() + ";");
    w.line(g.name() + " = " + e() + ";");
    w.line("while (" + e() + " < " + g.name() + ") {");
    ++w.indent;
    w.line(g.name() + " = " + e() + ";");
    w.line(g.name() + " = " + e() + ";");
    --w.indent;
    w.line("}");
    w.line("if (" + e() + " > " + g.name() + ") {");
    ++w.indent;
    w.line(g.name() + " = " + e() + ";");
    --w.indent;
    w.line("} else {");
    ++w.indent;
    w.line(g.name() + " = " + e() + ";");
    --w.indent;
    w.line("}");
    w.line("print(" + e() + ");");
    w.line("return " + e() + ";");
    --w.indent;
    w.line("}");
    out.push_back(std::move(w.out));
  }
  return out;
}

namespace {

void random_block(Gen& g, Writer& w, std::size_t depth, std::size_t max_statements) {
  const std::size_t n = 1 + g.below(max_statements);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pick = depth == 0 ? 0 : g.below(5);
    if (pick <= 1) {
      w.line(g.simple_statement());
    } else if (pick == 2) {
      w.line("while (" + g.expr() + " < " + g.atom() + ") {");
      ++w.indent;
      random_block(g, w, depth - 1, max_statements);
      --w.indent;
      w.line("}");
    } else if (pick == 3) {
      w.line("if (" + g.expr() + ") {");
      ++w.indent;
      random_block(g, w, depth - 1, max_statements);
      --w.indent;
      if (g.coin()) {
        w.line("} else {");
        ++w.indent;
        random_block(g, w, depth - 1, max_statements);
        --w.indent;
      }
      w.line("}");
    } else {
      const std::string v = g.name();
      w.line("for (" + v + " = 0; " + v + " < " + g.atom() + "; " + v + " = " + v + " + 1) {");
      ++w.indent;
      random_block(g, w, depth - 1, max_statements);
      --w.indent;
      w.line("}");
    }
  }
}

}  // namespace

std::string random_program(std::mt19937_64& rng, std::size_t max_depth, std::size_t max_statements) {
  Gen g(rng);
  Writer w;
  if (g.coin()) {
    w.line("int " + g.name() + "(int " + g.name() + ") {");
    ++w.indent;
    random_block(g, w, max_depth, max_statements);
    w.line("return " + g.expr() + ";");
    --w.indent;
    w.line("}");
  } else {
    random_block(g, w, max_depth, max_statements);
  }
  return w.out;
}

void write_clone_corpus(std::ostream& pairs, std::ostream& programs, const CloneCorpus& corpus) {
  for (std::size_t i = 0; i < corpus.sources.size(); ++i) {
    programs << nlohmann::json{{"id", corpus.ids[i]}, {"source", corpus.sources[i]}}.dump() << '\n';
  }
  for (const auto& p : corpus.pairs) {
    pairs << nlohmann::json{{"id1", corpus.ids[p.left]}, {"id2", corpus.ids[p.right]}, {"label", p.label}}.dump()
          << '\n';
  }
}

}  // namespace xastnn
