// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// MiniHeap language: AST, parser, type checker and pretty-printer.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kiki {

using Loc = int;

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& message)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + message),
        line_(line), col_(col), message_(message) {}
  int line() const { return line_; }
  int col() const { return col_; }
  const std::string& message() const { return message_; }

 private:
  int line_;
  int col_;
  std::string message_;
};

class TypeError : public std::runtime_error {
 public:
  TypeError(Loc loc, int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), loc_(loc), line_(line) {}
  Loc loc() const { return loc_; }
  int line() const { return line_; }

 private:
  Loc loc_;
  int line_;
};

/// Type of a variable or record field: Int, or a pointer to a named record.
struct VarType {
  enum class Kind { Int, Ptr };
  Kind kind = Kind::Int;
  std::string record;

  static VarType integer() { return {}; }
  static VarType pointer(std::string rec) { return {Kind::Ptr, std::move(rec)}; }
  bool is_int() const { return kind == Kind::Int; }
  bool is_ptr() const { return kind == Kind::Ptr; }
  bool operator==(const VarType&) const = default;
};

/// Type of an expression after type checking.
struct ExprType {
  enum class Kind { Unknown, Int, Bool, Ptr, Null };
  Kind kind = Kind::Unknown;
  std::string record;
  bool operator==(const ExprType&) const = default;
};

enum class UnOp { Neg, Not };
enum class BinOp { Add, Sub, Mul, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { IntLit, Null, Nondet, Var, Field, Unary, Binary };
  Kind kind = Kind::IntLit;
  std::int64_t value = 0;  // IntLit
  std::string name;        // Var, Field (base pointer variable)
  std::string field;       // Field
  UnOp unop = UnOp::Neg;
  BinOp binop = BinOp::Add;
  ExprPtr lhs;  // Unary operand, Binary left
  ExprPtr rhs;  // Binary right
  ExprType type;
  int line = 0;
  int col = 0;
};

/// Structural equality, ignoring source positions and type annotations.
bool same_expr(const Expr& a, const Expr& b);

/// Left-hand side of an assignment: `x` or `x->f`.
struct LValue {
  std::string var;
  std::optional<std::string> field;
  bool operator==(const LValue&) const = default;
};

struct Stmt {
  enum class Kind { Assign, Malloc, Free, If, While, Assert, Assume, Skip };
  Kind kind = Kind::Skip;
  Loc loc = 0;
  int line = 0;
  LValue lhs;               // Assign, Malloc
  ExprPtr expr;             // Assign rhs, Free arg, If/While cond, Assert, Assume
  std::string record;       // Malloc
  int site_id = 0;          // Malloc
  int loop_id = 0;          // While
  int assert_id = 0;        // Assert; property id is "assert.<assert_id>"
  std::vector<Stmt> then_body;  // If then, While body
  std::vector<Stmt> else_body;  // If else
  bool has_else = false;
  // Unwinding bookkeeping; parsed programs have origin_loop == loop_id and
  // the other two fields cleared.
  int origin_loop = 0;        // While: the source loop this one was copied from
  int unrolled_loop = 0;      // If: one unrolled iteration of this source loop
  bool unwind_check = false;  // Assume: residual condition left by precise unwinding
};

bool same_stmts(const std::vector<Stmt>& a, const std::vector<Stmt>& b);

struct RecordDecl {
  std::string name;
  std::vector<std::pair<std::string, VarType>> fields;

  const VarType* field_type(const std::string& f) const;
};

struct VarDecl {
  std::string name;
  VarType type;
};

struct Program {
  std::vector<RecordDecl> records;
  std::vector<VarDecl> vars;
  std::vector<Stmt> body;

  const RecordDecl* record(const std::string& name) const;
  const VarDecl* var(const std::string& name) const;
  int malloc_sites() const;
  int loops() const;
  int max_loc() const;
};

/// Structural equality of two programs (positions ignored).
bool same_program(const Program& a, const Program& b);

/// A program whose expressions all carry their types.
struct TypedProgram {
  Program program;
};

Program parse(const std::string& source);
TypedProgram typecheck(const Program& p);

/// Renders a program back to MiniHeap source; parse(print(p)) reproduces p.
std::string print(const Program& p);
std::string print_expr(const Expr& e);

std::string property_for_assert(int assert_id);

/// Visit every statement in text order, including nested ones.
template <typename F>
void for_each_stmt(const std::vector<Stmt>& body, F&& f) {
  for (const auto& s : body) {
    f(s);
    for_each_stmt(s.then_body, f);
    for_each_stmt(s.else_body, f);
  }
}

}  // namespace kiki
