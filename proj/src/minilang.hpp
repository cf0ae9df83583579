#pragma once

#include <string_view>

#include "ast.hpp"
#include "errors.hpp"

namespace xastnn {

// Parses the bundled C-like mini-language into an Ast rooted at a Program
// node. A program is a mix of function definitions and bare statements.
//
//   program   := (funcdef | stmt)*
//   funcdef   := ("int" | "void") IDENT "(" [param ("," param)*] ")" block
//   param     := "int" IDENT
//   stmt      := block | if | while | for | return | decl | assign | call ";" | ";"
//   if        := "if" "(" expr ")" stmt ["else" stmt]
//   while     := "while" "(" expr ")" stmt
//   for       := "for" "(" [IDENT "=" expr] ";" [expr] ";" [IDENT "=" expr] ")" stmt
//   decl      := "int" IDENT ["=" expr] ";"
//   assign    := IDENT "=" expr ";"
//   expr      := binary expressions over || && == != < <= > >= + - * / %,
//                unary - and !, identifiers, integers, calls, parentheses
//
// Node kinds: Program, FunctionDef(text=name), Param(text=name), Compound,
// If, Else, While, For, Init, Next, Return, Decl, Assign, ExprStmt,
// Call(text=name), BinaryOp(text=op), UnaryOp(text=op), Identifier(text),
// Constant(text). Ids are preorder; every node carries a source span.
// Throws SyntaxError with the line/column of the offending token.
Ast parse_minilang(std::string_view source);

}  // namespace xastnn
