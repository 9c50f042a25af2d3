// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include "kiki/term.hpp"

#include <map>
#include <set>
#include <unordered_map>

#include "kiki/interpreter.hpp"

namespace kiki {

std::string to_string(const Sort& s) {
  switch (s.kind) {
    case Sort::Kind::Bool: return "bool";
    case Sort::Kind::Int: return "int" + std::to_string(s.width);
    case Sort::Kind::Addr: return "addr" + std::to_string(s.width);
  }
  return "?";
}

namespace {

Term node(Op op, Sort sort, std::vector<Term> args, std::int64_t value = 0, std::string name = {}) {
  auto n = std::make_shared<TermNode>();
  n->op = op;
  n->sort = sort;
  n->value = value;
  n->name = std::move(name);
  n->args = std::move(args);
  return Term(std::move(n));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw SortError(what);
}

void require_bool(const Term& t, const char* op) {
  require(t.valid() && t.sort().is_bool(), std::string(op) + ": expected bool operand, got " +
                                               (t.valid() ? to_string(t.sort()) : "null"));
}

void require_int_pair(const Term& a, const Term& b, const char* op) {
  require(a.valid() && b.valid() && a.sort().is_int() && a.sort() == b.sort(),
          std::string(op) + ": operands must be ints of equal width");
}

bool same_const(const Term& a, const Term& b) {
  return a.is_const() && b.is_const() && a.op() == b.op() && a.value() == b.value();
}

}  // namespace

Term mk_bool(bool b) { return node(Op::BoolConst, Sort::boolean(), {}, b ? 1 : 0); }
Term mk_true() {
  static const Term t = mk_bool(true);
  return t;
}
Term mk_false() {
  static const Term f = mk_bool(false);
  return f;
}

Term mk_int(std::int64_t v, int width) {
  require(width >= 1 && width <= 62, "int width out of range");
  return node(Op::IntConst, Sort::integer(width), {}, wrap(v, width));
}

Term mk_addr(std::int64_t id, int width) {
  require(width >= 1 && id >= 0 && id < (1LL << width), "address id out of range");
  return node(Op::AddrConst, Sort::address(width), {}, id);
}

Term mk_var(const std::string& name, Sort sort) { return node(Op::Var, sort, {}, 0, name); }

Term mk_not(const Term& a) {
  require_bool(a, "not");
  if (a.op() == Op::BoolConst) return mk_bool(a.value() == 0);
  if (a.op() == Op::Not) return a.arg(0);
  return node(Op::Not, Sort::boolean(), {a});
}

Term mk_and(const std::vector<Term>& xs) {
  std::vector<Term> keep;
  for (const auto& x : xs) {
    require_bool(x, "and");
    if (x.is_false()) return mk_false();
    if (x.is_true()) continue;
    if (x.op() == Op::And) {
      for (const auto& y : x.args()) keep.push_back(y);
    } else {
      keep.push_back(x);
    }
  }
  if (keep.empty()) return mk_true();
  if (keep.size() == 1) return keep[0];
  return node(Op::And, Sort::boolean(), std::move(keep));
}

Term mk_and(const Term& a, const Term& b) { return mk_and(std::vector<Term>{a, b}); }

Term mk_or(const std::vector<Term>& xs) {
  std::vector<Term> keep;
  for (const auto& x : xs) {
    require_bool(x, "or");
    if (x.is_true()) return mk_true();
    if (x.is_false()) continue;
    if (x.op() == Op::Or) {
      for (const auto& y : x.args()) keep.push_back(y);
    } else {
      keep.push_back(x);
    }
  }
  if (keep.empty()) return mk_false();
  if (keep.size() == 1) return keep[0];
  return node(Op::Or, Sort::boolean(), std::move(keep));
}

Term mk_or(const Term& a, const Term& b) { return mk_or(std::vector<Term>{a, b}); }

Term mk_implies(const Term& a, const Term& b) {
  require_bool(a, "implies");
  require_bool(b, "implies");
  if (a.is_false() || b.is_true()) return mk_true();
  if (a.is_true()) return b;
  if (b.is_false()) return mk_not(a);
  return node(Op::Implies, Sort::boolean(), {a, b});
}

Term mk_eq(const Term& a, const Term& b) {
  require(a.valid() && b.valid() && a.sort() == b.sort(), "eq: operand sorts differ (" +
                                                             (a.valid() ? to_string(a.sort()) : "null") + " vs " +
                                                             (b.valid() ? to_string(b.sort()) : "null") + ")");
  if (a.is_const() && b.is_const()) return mk_bool(same_const(a, b));
  if (a.id() == b.id()) return mk_true();
  if (a.op() == Op::Var && b.op() == Op::Var && a.name() == b.name()) return mk_true();
  if (a.sort().is_bool()) {
    if (a.is_true()) return b;
    if (b.is_true()) return a;
    if (a.is_false()) return mk_not(b);
    if (b.is_false()) return mk_not(a);
  }
  return node(Op::Eq, Sort::boolean(), {a, b});
}

Term mk_neq(const Term& a, const Term& b) { return mk_not(mk_eq(a, b)); }

Term mk_lt(const Term& a, const Term& b) {
  require_int_pair(a, b, "lt");
  if (a.is_const() && b.is_const()) return mk_bool(a.value() < b.value());
  if (a.id() == b.id()) return mk_false();
  return node(Op::Lt, Sort::boolean(), {a, b});
}

Term mk_le(const Term& a, const Term& b) {
  require_int_pair(a, b, "le");
  if (a.is_const() && b.is_const()) return mk_bool(a.value() <= b.value());
  if (a.id() == b.id()) return mk_true();
  return node(Op::Le, Sort::boolean(), {a, b});
}

Term mk_add(const Term& a, const Term& b) {
  require_int_pair(a, b, "add");
  int w = a.sort().width;
  if (a.is_const() && b.is_const()) return mk_int(a.value() + b.value(), w);
  if (a.is_const() && a.value() == 0) return b;
  if (b.is_const() && b.value() == 0) return a;
  return node(Op::Add, a.sort(), {a, b});
}

Term mk_sub(const Term& a, const Term& b) {
  require_int_pair(a, b, "sub");
  int w = a.sort().width;
  if (a.is_const() && b.is_const()) return mk_int(a.value() - b.value(), w);
  if (b.is_const() && b.value() == 0) return a;
  return node(Op::Sub, a.sort(), {a, b});
}

Term mk_mul(const Term& a, const Term& b) {
  require_int_pair(a, b, "mul");
  require(a.is_const() || b.is_const(), "mul: one operand must be constant");
  int w = a.sort().width;
  if (a.is_const() && b.is_const()) {
    auto p = static_cast<std::uint64_t>(a.value()) * static_cast<std::uint64_t>(b.value());
    return mk_int(static_cast<std::int64_t>(p), w);
  }
  const Term& k = a.is_const() ? a : b;
  const Term& x = a.is_const() ? b : a;
  if (k.value() == 0) return mk_int(0, w);
  if (k.value() == 1) return x;
  return node(Op::Mul, a.sort(), {x, k});
}

Term mk_neg(const Term& a) {
  require(a.valid() && a.sort().is_int(), "neg: expected int operand");
  if (a.is_const()) return mk_int(-a.value(), a.sort().width);
  return node(Op::Neg, a.sort(), {a});
}

Term mk_sext(const Term& a, int width) {
  require(a.valid() && a.sort().is_int() && width >= a.sort().width, "sext: bad operand or width");
  if (width == a.sort().width) return a;
  if (a.is_const()) return mk_int(a.value(), width);
  return node(Op::SExt, Sort::integer(width), {a});
}

Term mk_mux(const Term& c, const Term& a, const Term& b) {
  require_bool(c, "mux");
  require(a.valid() && b.valid() && a.sort() == b.sort(), "mux: branch sorts differ");
  if (c.is_true()) return a;
  if (c.is_false()) return b;
  if (a.id() == b.id() || same_const(a, b)) return a;
  if (a.op() == Op::Var && b.op() == Op::Var && a.name() == b.name()) return a;
  if (a.sort().is_bool()) {
    if (a.is_true() && b.is_false()) return c;
    if (a.is_false() && b.is_true()) return mk_not(c);
  }
  return node(Op::Mux, a.sort(), {c, a, b});
}

std::int64_t evaluate(const Term& t, const Valuation& val) {
  std::unordered_map<const TermNode*, std::int64_t> memo;
  std::function<std::int64_t(const Term&)> ev = [&](const Term& x) -> std::int64_t {
    auto it = memo.find(x.id());
    if (it != memo.end()) return it->second;
    std::int64_t r = 0;
    int w = x.sort().width;
    switch (x.op()) {
      case Op::BoolConst:
      case Op::IntConst:
      case Op::AddrConst: r = x.value(); break;
      case Op::Var: {
        auto v = val(x.name());
        if (!v) throw UnboundSymbol("unbound symbol " + x.name());
        r = x.sort().is_int() ? wrap(*v, w) : *v;
        break;
      }
      case Op::Not: r = ev(x.arg(0)) ? 0 : 1; break;
      case Op::And:
        r = 1;
        for (const auto& a : x.args())
          if (!ev(a)) {
            r = 0;
            break;
          }
        break;
      case Op::Or:
        r = 0;
        for (const auto& a : x.args())
          if (ev(a)) {
            r = 1;
            break;
          }
        break;
      case Op::Implies: r = (!ev(x.arg(0)) || ev(x.arg(1))) ? 1 : 0; break;
      case Op::Eq: r = ev(x.arg(0)) == ev(x.arg(1)); break;
      case Op::Neq: r = ev(x.arg(0)) != ev(x.arg(1)); break;
      case Op::Lt: r = ev(x.arg(0)) < ev(x.arg(1)); break;
      case Op::Le: r = ev(x.arg(0)) <= ev(x.arg(1)); break;
      case Op::Add: r = wrap(ev(x.arg(0)) + ev(x.arg(1)), w); break;
      case Op::Sub: r = wrap(ev(x.arg(0)) - ev(x.arg(1)), w); break;
      case Op::Mul:
        r = wrap(static_cast<std::int64_t>(static_cast<std::uint64_t>(ev(x.arg(0))) *
                                           static_cast<std::uint64_t>(ev(x.arg(1)))),
                 w);
        break;
      case Op::Neg: r = wrap(-ev(x.arg(0)), w); break;
      case Op::SExt: r = ev(x.arg(0)); break;
      case Op::Mux: r = ev(x.arg(0)) ? ev(x.arg(1)) : ev(x.arg(2)); break;
    }
    memo.emplace(x.id(), r);
    return r;
  };
  return ev(t);
}

std::string to_string(const Term& t) {
  auto bin = [&](const char* op) { return "(" + to_string(t.arg(0)) + " " + op + " " + to_string(t.arg(1)) + ")"; };
  auto nary = [&](const char* op) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.args().size(); ++i) {
      if (i) s += std::string(" ") + op + " ";
      s += to_string(t.arg(i));
    }
    return s + ")";
  };
  switch (t.op()) {
    case Op::BoolConst: return t.value() ? "true" : "false";
    case Op::IntConst: return std::to_string(t.value());
    case Op::AddrConst: return "@" + std::to_string(t.value());
    case Op::Var: return t.name();
    case Op::Not: return "!" + to_string(t.arg(0));
    case Op::And: return nary("&&");
    case Op::Or: return nary("||");
    case Op::Implies: return bin("=>");
    case Op::Eq: return bin("==");
    case Op::Neq: return bin("!=");
    case Op::Lt: return bin("<");
    case Op::Le: return bin("<=");
    case Op::Add: return bin("+");
    case Op::Sub: return bin("-");
    case Op::Mul: return bin("*");
    case Op::Neg: return "-" + to_string(t.arg(0));
    case Op::SExt: return "sext" + std::to_string(t.sort().width) + "(" + to_string(t.arg(0)) + ")";
    case Op::Mux: return "mux(" + to_string(t.arg(0)) + ", " + to_string(t.arg(1)) + ", " + to_string(t.arg(2)) + ")";
  }
  return "?";
}

std::vector<std::pair<std::string, Sort>> free_vars(const Term& t) {
  std::map<std::string, Sort> out;
  std::set<const TermNode*> seen;
  std::function<void(const Term&)> walk = [&](const Term& x) {
    if (!seen.insert(x.id()).second) return;
    if (x.op() == Op::Var) out.emplace(x.name(), x.sort());
    for (const auto& a : x.args()) walk(a);
  };
  walk(t);
  return {out.begin(), out.end()};
}

}  // namespace kiki
