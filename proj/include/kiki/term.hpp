// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Word-level formulas over booleans, fixed-width integers and addresses.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kiki {

class SortError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnboundSymbol : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sort {
  enum class Kind { Bool, Int, Addr };
  Kind kind = Kind::Bool;
  int width = 1;

  static Sort boolean() { return {Kind::Bool, 1}; }
  static Sort integer(int w) { return {Kind::Int, w}; }
  static Sort address(int w) { return {Kind::Addr, w}; }
  bool is_bool() const { return kind == Kind::Bool; }
  bool is_int() const { return kind == Kind::Int; }
  bool is_addr() const { return kind == Kind::Addr; }
  bool operator==(const Sort&) const = default;
};

std::string to_string(const Sort& s);

enum class Op {
  BoolConst, IntConst, AddrConst, Var,
  Not, And, Or, Implies,
  Eq, Neq, Lt, Le,
  Add, Sub, Mul, Neg, SExt,
  Mux
};

class Term;

struct TermNode {
  Op op;
  Sort sort;
  std::int64_t value = 0;  // constants (IntConst signed-normalised)
  std::string name;        // Var
  std::vector<Term> args;
};

/// Immutable, shared formula tree. Copies are cheap.
class Term {
 public:
  Term() = default;
  explicit Term(std::shared_ptr<const TermNode> n) : node_(std::move(n)) {}

  Op op() const { return node_->op; }
  const Sort& sort() const { return node_->sort; }
  std::int64_t value() const { return node_->value; }
  const std::string& name() const { return node_->name; }
  const std::vector<Term>& args() const { return node_->args; }
  const Term& arg(std::size_t i) const { return node_->args.at(i); }
  const TermNode* id() const { return node_.get(); }
  bool valid() const { return node_ != nullptr; }

  bool is_const() const { return op() == Op::BoolConst || op() == Op::IntConst || op() == Op::AddrConst; }
  bool is_true() const { return op() == Op::BoolConst && value() != 0; }
  bool is_false() const { return op() == Op::BoolConst && value() == 0; }

 private:
  std::shared_ptr<const TermNode> node_;
};

// Constructors. All check sorts (throwing SortError) and fold constants.
Term mk_bool(bool b);
Term mk_true();
Term mk_false();
Term mk_int(std::int64_t v, int width);
Term mk_addr(std::int64_t id, int width);
Term mk_var(const std::string& name, Sort sort);
Term mk_not(const Term& a);
Term mk_and(const Term& a, const Term& b);
Term mk_and(const std::vector<Term>& xs);
Term mk_or(const Term& a, const Term& b);
Term mk_or(const std::vector<Term>& xs);
Term mk_implies(const Term& a, const Term& b);
Term mk_eq(const Term& a, const Term& b);
Term mk_neq(const Term& a, const Term& b);
Term mk_lt(const Term& a, const Term& b);  // signed
Term mk_le(const Term& a, const Term& b);  // signed
Term mk_add(const Term& a, const Term& b);
Term mk_sub(const Term& a, const Term& b);
/// Modular product; one operand must be a constant.
Term mk_mul(const Term& a, const Term& b);
Term mk_neg(const Term& a);
/// Sign extension to a wider integer sort.
Term mk_sext(const Term& a, int width);
Term mk_mux(const Term& c, const Term& a, const Term& b);

/// Value of a symbol (booleans are 0/1, integers signed, addresses ids).
using Valuation = std::function<std::optional<std::int64_t>(const std::string& symbol)>;

/// Word-level semantics. Throws UnboundSymbol for unknown variables.
std::int64_t evaluate(const Term& t, const Valuation& val);

std::string to_string(const Term& t);

/// Names of all variables occurring in `t` (with their sorts), sorted.
std::vector<std::pair<std::string, Sort>> free_vars(const Term& t);

}  // namespace kiki
