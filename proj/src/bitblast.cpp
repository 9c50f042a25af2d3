// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "kiki/solver.hpp"

namespace kiki {

BitBlaster::BitBlaster(ClauseSink& sink) : sink_(sink) {
  true_ = fresh();
  unit(true_);
}

void BitBlaster::unit(Lit a) {
  Lit c[1] = {a};
  sink_.add_clause(c);
}

Lit BitBlaster::and2(Lit a, Lit b) {
  if (is_const(a)) return a == true_ ? b : false_lit();
  if (is_const(b)) return b == true_ ? a : false_lit();
  if (a == b) return a;
  if (a == ~b) return false_lit();
  auto key = std::minmax(a.code, b.code);
  auto it = and_cache_.find(key);
  if (it != and_cache_.end()) return it->second;
  Lit g = fresh();
  Lit c1[] = {~g, a};
  Lit c2[] = {~g, b};
  Lit c3[] = {g, ~a, ~b};
  sink_.add_clause(c1);
  sink_.add_clause(c2);
  sink_.add_clause(c3);
  and_cache_.emplace(key, g);
  return g;
}

Lit BitBlaster::xor2(Lit a, Lit b) {
  if (is_const(a)) return a == true_ ? ~b : b;
  if (is_const(b)) return b == true_ ? ~a : a;
  if (a == b) return false_lit();
  if (a == ~b) return true_;
  Lit g = fresh();
  Lit c1[] = {~g, a, b};
  Lit c2[] = {~g, ~a, ~b};
  Lit c3[] = {g, ~a, b};
  Lit c4[] = {g, a, ~b};
  sink_.add_clause(c1);
  sink_.add_clause(c2);
  sink_.add_clause(c3);
  sink_.add_clause(c4);
  return g;
}

Lit BitBlaster::mux(Lit c, Lit a, Lit b) {
  if (is_const(c)) return c == true_ ? a : b;
  if (a == b) return a;
  if (is_const(a) && is_const(b)) return a == true_ ? c : ~c;
  if (is_const(a)) return a == true_ ? or2(c, b) : and2(~c, b);
  if (is_const(b)) return b == true_ ? or2(~c, a) : and2(c, a);
  Lit g = fresh();
  Lit c1[] = {~c, ~a, g};
  Lit c2[] = {~c, a, ~g};
  Lit c3[] = {c, ~b, g};
  Lit c4[] = {c, b, ~g};
  sink_.add_clause(c1);
  sink_.add_clause(c2);
  sink_.add_clause(c3);
  sink_.add_clause(c4);
  return g;
}

Lit BitBlaster::and_n(const std::vector<Lit>& xs) {
  Lit acc = true_;
  for (Lit x : xs) acc = and2(acc, x);
  return acc;
}

// Sum bits followed by the carry out.
std::vector<Lit> BitBlaster::adder(const std::vector<Lit>& a, const std::vector<Lit>& b, Lit carry) {
  std::vector<Lit> out;
  out.reserve(a.size() + 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    Lit t = xor2(a[i], b[i]);
    out.push_back(xor2(t, carry));
    carry = or2(and2(a[i], b[i]), and2(carry, t));
  }
  out.push_back(carry);
  return out;
}

Lit BitBlaster::equal(const std::vector<Lit>& a, const std::vector<Lit>& b) {
  std::vector<Lit> eqs;
  for (std::size_t i = 0; i < a.size(); ++i) eqs.push_back(~xor2(a[i], b[i]));
  return and_n(eqs);
}

Lit BitBlaster::signed_less(const std::vector<Lit>& a, const std::vector<Lit>& b, bool or_equal) {
  // Flipping the sign bits turns signed order into unsigned order; a + ~b + 1
  // carries out exactly when a >= b (unsigned).
  std::vector<Lit> x = a;
  std::vector<Lit> y = b;
  x.back() = ~x.back();
  y.back() = ~y.back();
  if (or_equal) std::swap(x, y);  // a <= b  <=>  !(b < a)
  std::vector<Lit> ny;
  for (Lit l : y) ny.push_back(~l);
  Lit ge = adder(x, ny, true_).back();
  return or_equal ? ge : ~ge;
}

std::vector<Lit> BitBlaster::blast(const Term& t) {
  auto it = memo_.find(t.id());
  if (it != memo_.end()) return it->second;
  std::vector<Lit> r;
  const int w = t.sort().width;
  auto const_bits = [&](std::int64_t v) {
    std::vector<Lit> bs;
    for (int i = 0; i < w; ++i) bs.push_back(((static_cast<std::uint64_t>(v) >> i) & 1ULL) ? true_ : false_lit());
    return bs;
  };
  switch (t.op()) {
    case Op::BoolConst: r = {t.value() ? true_ : false_lit()}; break;
    case Op::IntConst:
    case Op::AddrConst: r = const_bits(t.value()); break;
    case Op::Var: {
      auto vit = var_map_.find(t.name());
      if (vit != var_map_.end()) {
        if (!(sorts_.at(t.name()) == t.sort()))
          throw SortError("symbol " + t.name() + " used with two sorts");
        r = vit->second;
      } else {
        for (int i = 0; i < w; ++i) r.push_back(fresh());
        var_map_.emplace(t.name(), r);
        sorts_.emplace(t.name(), t.sort());
      }
      break;
    }
    case Op::Not: r = {~literal(t.arg(0))}; break;
    case Op::And: {
      std::vector<Lit> xs;
      for (const auto& a : t.args()) xs.push_back(literal(a));
      r = {and_n(xs)};
      break;
    }
    case Op::Or: {
      std::vector<Lit> xs;
      for (const auto& a : t.args()) xs.push_back(~literal(a));
      r = {~and_n(xs)};
      break;
    }
    case Op::Implies: r = {or2(~literal(t.arg(0)), literal(t.arg(1)))}; break;
    case Op::Eq: r = {equal(bits(t.arg(0)), bits(t.arg(1)))}; break;
    case Op::Neq: r = {~equal(bits(t.arg(0)), bits(t.arg(1)))}; break;
    case Op::Lt: r = {signed_less(bits(t.arg(0)), bits(t.arg(1)), false)}; break;
    case Op::Le: r = {signed_less(bits(t.arg(0)), bits(t.arg(1)), true)}; break;
    case Op::Add:
      r = adder(bits(t.arg(0)), bits(t.arg(1)), false_lit());
      r.pop_back();
      break;
    case Op::Sub: {
      std::vector<Lit> nb;
      for (Lit l : bits(t.arg(1))) nb.push_back(~l);
      r = adder(bits(t.arg(0)), nb, true_);
      r.pop_back();
      break;
    }
    case Op::Neg: {
      std::vector<Lit> na;
      for (Lit l : bits(t.arg(0))) na.push_back(~l);
      r = adder(na, const_bits(0), true_);
      r.pop_back();
      break;
    }
    case Op::Mul: {
      const std::vector<Lit>& x = bits(t.arg(0));
      auto k = static_cast<std::uint64_t>(t.arg(1).value());
      r = const_bits(0);
      for (int i = 0; i < w; ++i) {
        if (!((k >> i) & 1ULL)) continue;
        std::vector<Lit> shifted(static_cast<std::size_t>(w), false_lit());
        for (int j = 0; j + i < w; ++j) shifted[static_cast<std::size_t>(j + i)] = x[static_cast<std::size_t>(j)];
        r = adder(r, shifted, false_lit());
        r.pop_back();
      }
      break;
    }
    case Op::SExt: {
      r = bits(t.arg(0));
      Lit msb = r.back();
      while (static_cast<int>(r.size()) < w) r.push_back(msb);
      break;
    }
    case Op::Mux: {
      Lit c = literal(t.arg(0));
      std::vector<Lit> a = blast(t.arg(1));
      std::vector<Lit> b = blast(t.arg(2));
      for (std::size_t i = 0; i < a.size(); ++i) r.push_back(mux(c, a[i], b[i]));
      break;
    }
  }
  keep_alive_.push_back(t);
  memo_.emplace(t.id(), r);
  return r;
}

Lit BitBlaster::literal(const Term& t) {
  if (!t.sort().is_bool()) throw SortError("expected a boolean term, got " + to_string(t.sort()));
  return blast(t)[0];
}

const std::vector<Lit>& BitBlaster::bits(const Term& t) {
  if (t.sort().is_bool()) throw SortError("expected a word term, got bool");
  blast(t);
  return memo_.at(t.id());
}

void BitBlaster::define(const std::string& name, const Term& t) {
  if (var_map_.count(name)) throw SortError("symbol " + name + " defined twice");
  std::vector<Lit> r = t.sort().is_bool() ? std::vector<Lit>{literal(t)} : bits(t);
  var_map_.emplace(name, std::move(r));
  sorts_.emplace(name, t.sort());
}

Cnf bitblast(const Term& t) {
  Cnf c;
  BitBlaster bb(c);
  bb.assert_term(t);
  c.var_map = bb.var_map();
  return c;
}

}  // namespace kiki
