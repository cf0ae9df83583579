#include "minilang.hpp"

#include <cctype>
#include <memory>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace xastnn {

namespace {

enum class Tok { kIdent, kKeyword, kNumber, kPunct, kEnd };

struct Token {
  Tok type;
  std::string text;
  std::size_t begin;
  std::size_t end;
  int line;
  int column;
};

bool is_keyword(std::string_view s) {
  return s == "int" || s == "void" || s == "if" || s == "else" || s == "while" ||
         s == "for" || s == "return";
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1;
  std::size_t line_start = 0;
  auto column = [&](std::size_t pos) { return static_cast<int>(pos - line_start) + 1; };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '\n') {
      ++i;
      ++line;
      line_start = i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      const std::size_t start = i;
      const int start_line = line;
      const int start_col = column(start);
      i += 2;
      while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) {
        if (src[i] == '\n') {
          ++line;
          line_start = i + 1;
        }
        ++i;
      }
      if (i + 1 >= src.size()) throw SyntaxError(start_line, start_col, "/*", "unterminated comment");
      i += 2;
      continue;
    }
    const std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_')) ++i;
      std::string word(src.substr(start, i - start));
      const Tok t = is_keyword(word) ? Tok::kKeyword : Tok::kIdent;
      out.push_back({t, std::move(word), start, i, line, column(start)});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
      if (i < src.size() && (std::isalpha(static_cast<unsigned char>(src[i])) || src[i] == '_')) {
        throw SyntaxError(line, column(start), std::string(src.substr(start, i + 1 - start)),
                          "malformed number");
      }
      out.push_back({Tok::kNumber, std::string(src.substr(start, i - start)), start, i, line,
                     column(start)});
      continue;
    }
    static constexpr std::string_view kTwo[] = {"==", "!=", "<=", ">=", "&&", "||"};
    bool matched = false;
    if (i + 1 < src.size()) {
      for (std::string_view op : kTwo) {
        if (src.substr(i, 2) == op) {
          out.push_back({Tok::kPunct, std::string(op), i, i + 2, line, column(i)});
          i += 2;
          matched = true;
          break;
        }
      }
    }
    if (matched) continue;
    static constexpr std::string_view kOne = "(){};,=<>+-*/%!";
    if (kOne.find(c) != std::string_view::npos) {
      out.push_back({Tok::kPunct, std::string(1, c), i, i + 1, line, column(i)});
      ++i;
      continue;
    }
    throw SyntaxError(line, column(i), std::string(1, c), "unexpected character");
  }
  out.push_back({Tok::kEnd, "<eof>", src.size(), src.size(), line, column(src.size())});
  return out;
}

struct Node {
  std::string kind;
  std::optional<std::string> text;
  std::vector<std::unique_ptr<Node>> children;
  SourceSpan span;
};

using NodePtr = std::unique_ptr<Node>;

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  NodePtr program(std::size_t source_size) {
    auto root = make("Program", std::nullopt, toks_.front());
    while (peek().type != Tok::kEnd) {
      if (is_funcdef()) {
        root->children.push_back(funcdef());
      } else if (auto s = statement()) {
        root->children.push_back(std::move(s));
      }
    }
    root->span = {0, source_size, 1};
    return root;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at(std::string_view text) const {
    return (peek().type == Tok::kPunct || peek().type == Tok::kKeyword) && peek().text == text;
  }
  const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  const Token& previous() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }

  [[noreturn]] void error(const std::string& what) const {
    const Token& t = peek();
    throw SyntaxError(t.line, t.column, t.text, what);
  }

  const Token& expect(std::string_view text) {
    if (!at(text)) error("expected '" + std::string(text) + "'");
    return advance();
  }

  const Token& expect_ident() {
    if (peek().type != Tok::kIdent) error("expected identifier");
    return advance();
  }

  static NodePtr make(std::string kind, std::optional<std::string> text, const Token& first) {
    auto n = std::make_unique<Node>();
    n->kind = std::move(kind);
    n->text = std::move(text);
    n->span = {first.begin, first.end, first.line};
    return n;
  }

  void close(Node& n) const { n.span.end = previous().end; }

  bool is_funcdef() const {
    return (at("int") || at("void")) && peek(1).type == Tok::kIdent &&
           peek(2).type == Tok::kPunct && peek(2).text == "(";
  }

  NodePtr funcdef() {
    advance();  // return type
    const Token& name = expect_ident();
    auto fn = make("FunctionDef", name.text, name);
    fn->span.begin = toks_[pos_ - 2].begin;
    fn->span.line = toks_[pos_ - 2].line;
    expect("(");
    if (!at(")")) {
      do {
        expect("int");
        const Token& p = expect_ident();
        fn->children.push_back(make("Param", p.text, p));
      } while (at(",") && (advance(), true));
    }
    expect(")");
    if (!at("{")) error("expected function body");
    fn->children.push_back(block());
    close(*fn);
    return fn;
  }

  NodePtr block() {
    auto b = make("Compound", std::nullopt, expect("{"));
    while (!at("}")) {
      if (peek().type == Tok::kEnd) error("unterminated block");
      if (auto s = statement()) b->children.push_back(std::move(s));
    }
    advance();
    close(*b);
    return b;
  }

  // Body positions cannot be empty; a bare ';' becomes an empty block.
  NodePtr body() {
    const Token& first = peek();
    if (auto s = statement()) return s;
    auto b = make("Compound", std::nullopt, first);
    close(*b);
    return b;
  }

  NodePtr statement() {
    const Token& t = peek();
    if (at(";")) {
      advance();
      return nullptr;
    }
    if (at("{")) return block();
    if (at("if")) {
      auto n = make("If", std::nullopt, advance());
      expect("(");
      n->children.push_back(expression());
      expect(")");
      n->children.push_back(body());
      if (at("else")) {
        auto e = make("Else", std::nullopt, advance());
        e->children.push_back(body());
        close(*e);
        n->children.push_back(std::move(e));
      }
      close(*n);
      return n;
    }
    if (at("while")) {
      auto n = make("While", std::nullopt, advance());
      expect("(");
      n->children.push_back(expression());
      expect(")");
      n->children.push_back(body());
      close(*n);
      return n;
    }
    if (at("for")) {
      auto n = make("For", std::nullopt, advance());
      expect("(");
      if (!at(";")) n->children.push_back(assignment_core("Init"));
      expect(";");
      if (!at(";")) n->children.push_back(expression());
      expect(";");
      if (!at(")")) n->children.push_back(assignment_core("Next"));
      expect(")");
      n->children.push_back(body());
      close(*n);
      return n;
    }
    if (at("return")) {
      auto n = make("Return", std::nullopt, advance());
      if (!at(";")) n->children.push_back(expression());
      expect(";");
      close(*n);
      return n;
    }
    if (at("int")) {
      auto n = make("Decl", std::nullopt, advance());
      const Token& name = expect_ident();
      n->children.push_back(make("Identifier", name.text, name));
      if (at("=")) {
        advance();
        n->children.push_back(expression());
      }
      expect(";");
      close(*n);
      return n;
    }
    if (t.type == Tok::kIdent && peek(1).type == Tok::kPunct && peek(1).text == "=") {
      auto n = assignment_core("Assign");
      expect(";");
      close(*n);
      return n;
    }
    if (t.type == Tok::kIdent && peek(1).type == Tok::kPunct && peek(1).text == "(") {
      auto n = make("ExprStmt", std::nullopt, t);
      n->children.push_back(call());
      expect(";");
      close(*n);
      return n;
    }
    error("expected a statement");
  }

  NodePtr assignment_core(const char* kind) {
    const Token& name = expect_ident();
    auto n = make(kind, std::nullopt, name);
    n->children.push_back(make("Identifier", name.text, name));
    expect("=");
    n->children.push_back(expression());
    close(*n);
    return n;
  }

  NodePtr call() {
    const Token& name = expect_ident();
    auto n = make("Call", name.text, name);
    expect("(");
    if (!at(")")) {
      n->children.push_back(expression());
      while (at(",")) {
        advance();
        n->children.push_back(expression());
      }
    }
    expect(")");
    close(*n);
    return n;
  }

  NodePtr expression() { return binary(0); }

  static int precedence(const Token& t) {
    if (t.type != Tok::kPunct) return -1;
    const std::string& s = t.text;
    if (s == "||") return 0;
    if (s == "&&") return 1;
    if (s == "==" || s == "!=") return 2;
    if (s == "<" || s == "<=" || s == ">" || s == ">=") return 3;
    if (s == "+" || s == "-") return 4;
    if (s == "*" || s == "/" || s == "%") return 5;
    return -1;
  }

  NodePtr binary(int min_prec) {
    NodePtr lhs = unary();
    while (precedence(peek()) >= min_prec) {
      const int prec = precedence(peek());
      const Token& op = advance();
      NodePtr rhs = binary(prec + 1);
      auto n = make("BinaryOp", op.text, op);
      n->span.begin = lhs->span.begin;
      n->span.line = lhs->span.line;
      n->children.push_back(std::move(lhs));
      n->children.push_back(std::move(rhs));
      close(*n);
      lhs = std::move(n);
    }
    return lhs;
  }

  NodePtr unary() {
    if (at("-") || at("!")) {
      auto n = make("UnaryOp", peek().text, peek());
      advance();
      n->children.push_back(unary());
      close(*n);
      return n;
    }
    return primary();
  }

  NodePtr primary() {
    const Token& t = peek();
    if (t.type == Tok::kNumber) {
      advance();
      return make("Constant", t.text, t);
    }
    if (t.type == Tok::kIdent) {
      if (peek(1).type == Tok::kPunct && peek(1).text == "(") return call();
      advance();
      return make("Identifier", t.text, t);
    }
    if (at("(")) {
      advance();
      NodePtr e = expression();
      expect(")");
      return e;
    }
    error("expected an expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

void flatten(Node& n, std::vector<AstNode>& nodes, std::vector<SourceSpan>& spans) {
  const auto id = static_cast<NodeId>(nodes.size());
  nodes.push_back({id, std::move(n.kind), std::move(n.text), {}});
  spans.push_back(n.span);
  for (auto& c : n.children) {
    nodes[static_cast<std::size_t>(id)].children.push_back(static_cast<NodeId>(nodes.size()));
    flatten(*c, nodes, spans);
  }
}

}  // namespace

Ast parse_minilang(std::string_view source) {
  Parser parser(lex(source));
  NodePtr root = parser.program(source.size());
  std::vector<AstNode> nodes;
  std::vector<SourceSpan> spans;
  flatten(*root, nodes, spans);
  return Ast(std::move(nodes), 0, std::move(spans));
}

}  // namespace xastnn
