// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include "kiki/domains.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace kiki {

namespace {

std::int64_t min_of(int w) { return -(std::int64_t{1} << (w - 1)); }
std::int64_t max_of(int w) { return (std::int64_t{1} << (w - 1)) - 1; }

bool materialized(const SsaForm& ssa, int site) {
  return ssa.state_var("$cochosen" + std::to_string(site)) != nullptr;
}

std::uint64_t candidate_mask(const SsaForm& ssa, const std::string& record) {
  std::uint64_t mask = 1;  // NULL
  const auto& objs = ssa.addresses.objects;
  for (std::size_t i = 1; i < objs.size(); ++i) {
    if (!record.empty() && objs[i].record != record) continue;
    if (objs[i].kind == AbstractObject::Kind::Materialized && !materialized(ssa, objs[i].site)) continue;
    mask |= std::uint64_t{1} << i;
  }
  return mask;
}

int popcount(std::uint64_t m) { return __builtin_popcountll(m); }

std::int64_t require(const Valuation& v, const std::string& base) {
  auto x = v(base);
  if (!x) throw UnboundSymbol("no value for " + base);
  return *x;
}

}  // namespace

Frame frame_of(const std::map<std::string, Term>& m) {
  return [&m](const std::string& base) {
    auto it = m.find(base);
    if (it == m.end()) throw UnboundSymbol("frame has no " + base);
    return it->second;
  };
}

std::string loop_flag_base(int origin) { return "$e" + std::to_string(origin); }

Template make_template(const SsaForm& ssa, const LoopBinder& loop, const DomainConfig& cfg) {
  Template t;
  t.loop = loop.loop;
  t.width = ssa.width;
  t.addr_width = ssa.addresses.width;
  for (std::size_t i = 0; i < ssa.addresses.objects.size(); ++i)
    t.address_names.push_back(ssa.addresses.address_name(static_cast<int>(i)));

  std::vector<const StateVar*> ints, ptrs, flags;
  for (const auto& base : loop.bases) {
    const StateVar* v = ssa.state_var(base);
    if (!v) continue;
    if (v->sort.is_int()) ints.push_back(v);
    if (v->sort.is_addr()) ptrs.push_back(v);
    // Loop-executed flags are tracked by symbolic paths, not by rows.
    if (v->sort.is_bool() && v->kind == StateVar::Kind::Ghost && base.rfind("$e", 0) != 0)
      flags.push_back(v);
  }
  using K = TemplateRow::Kind;
  if (cfg.interval || cfg.zones)
    for (const StateVar* v : ints) {
      t.rows.push_back({K::Upper, v->base, "", 0, v->guard});
      t.rows.push_back({K::Lower, v->base, "", 0, v->guard});
    }
  if (cfg.zones) {
    std::vector<const StateVar*> vars;
    for (const StateVar* v : ints)
      if (v->kind == StateVar::Kind::Program) vars.push_back(v);
    if (vars.size() > cfg.zones_cap) {
      t.zones_capped = true;
      vars.resize(cfg.zones_cap);
    }
    for (const StateVar* x : vars)
      for (const StateVar* y : vars)
        if (x != y) t.rows.push_back({K::Diff, x->base, y->base, 0, ""});
  }
  if (cfg.shape) {
    for (const StateVar* v : ptrs) t.rows.push_back({K::PointsTo, v->base, "", candidate_mask(ssa, v->record), v->guard});
    for (const StateVar* v : flags) t.rows.push_back({K::Flag, v->base, "", 3, ""});
  }
  return t;
}

Param bottom(const Template& t) { return Param(t.rows.size()); }

Param top(const Template& t) {
  Param q(t.rows.size());
  for (auto& r : q) r.state = RowValue::State::Top;
  return q;
}

namespace {

Term row_formula(const Template& t, const TemplateRow& row, const RowValue& v, const Frame& f) {
  if (v.state == RowValue::State::Bottom) return mk_false();
  if (v.state == RowValue::State::Top) return mk_true();
  switch (row.kind) {
    case TemplateRow::Kind::Upper: return mk_le(f(row.x), mk_int(v.bound, t.width));
    case TemplateRow::Kind::Lower: return mk_le(mk_int(v.bound, t.width), f(row.x));
    case TemplateRow::Kind::Diff: {
      const int w = t.width + 1;
      return mk_le(mk_sub(mk_sext(f(row.x), w), mk_sext(f(row.y), w)), mk_int(v.bound, w));
    }
    case TemplateRow::Kind::PointsTo: {
      Term p = f(row.x);
      std::vector<Term> alts;
      for (int a = 0; a < 64; ++a)
        if (v.mask >> a & 1) alts.push_back(mk_eq(p, mk_addr(a, t.addr_width)));
      return mk_or(alts);
    }
    case TemplateRow::Kind::Flag: return v.mask == 2 ? f(row.x) : mk_not(f(row.x));
  }
  return mk_true();
}

}  // namespace

Term to_formula(const Template& t, const Param& q, const Frame& f) {
  if (q.size() != t.rows.size()) throw std::invalid_argument("parameter does not fit template");
  std::vector<Term> parts;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& row = t.rows[i];
    Term r = row_formula(t, row, q[i], f);
    if (!row.guard.empty()) r = mk_implies(f(row.guard), r);
    parts.push_back(r);
  }
  return mk_and(parts);
}

Param join_model(const Template& t, const Param& q, const Valuation& val) {
  Param out = q;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    auto& v = out[i];
    if (v.state == RowValue::State::Top) continue;
    if (!row.guard.empty() && require(val, row.guard) == 0) continue;
    const bool first = v.state == RowValue::State::Bottom;
    switch (row.kind) {
      case TemplateRow::Kind::Upper: {
        std::int64_t x = require(val, row.x);
        v.bound = first ? x : std::max(v.bound, x);
        v.state = v.bound >= max_of(t.width) ? RowValue::State::Top : RowValue::State::Value;
        break;
      }
      case TemplateRow::Kind::Lower: {
        std::int64_t x = require(val, row.x);
        v.bound = first ? x : std::min(v.bound, x);
        v.state = v.bound <= min_of(t.width) ? RowValue::State::Top : RowValue::State::Value;
        break;
      }
      case TemplateRow::Kind::Diff: {
        std::int64_t d = require(val, row.x) - require(val, row.y);
        v.bound = first ? d : std::max(v.bound, d);
        v.state = v.bound >= max_of(t.width + 1) ? RowValue::State::Top : RowValue::State::Value;
        break;
      }
      case TemplateRow::Kind::PointsTo: {
        std::int64_t a = require(val, row.x);
        if (a < 0 || a >= 64) throw std::out_of_range("address id out of range");
        v.mask |= std::uint64_t{1} << a;
        v.state = (v.mask & row.candidates) == row.candidates ? RowValue::State::Top : RowValue::State::Value;
        break;
      }
      case TemplateRow::Kind::Flag: {
        v.mask |= require(val, row.x) != 0 ? 2 : 1;
        v.state = v.mask == 3 ? RowValue::State::Top : RowValue::State::Value;
        break;
      }
    }
    if (v.state == RowValue::State::Top) v.bound = 0, v.mask = 0;
  }
  return out;
}

bool leq(const Template& t, const Param& a, const Param& b) {
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.state == RowValue::State::Bottom || y.state == RowValue::State::Top) continue;
    if (y.state == RowValue::State::Bottom || x.state == RowValue::State::Top) return false;
    switch (t.rows[i].kind) {
      case TemplateRow::Kind::Upper:
      case TemplateRow::Kind::Diff:
        if (x.bound > y.bound) return false;
        break;
      case TemplateRow::Kind::Lower:
        if (x.bound < y.bound) return false;
        break;
      case TemplateRow::Kind::PointsTo:
      case TemplateRow::Kind::Flag:
        if ((x.mask & ~y.mask) != 0) return false;
        break;
    }
  }
  return true;
}

std::uint64_t chain_bound(const Template& t) {
  std::uint64_t total = 0;
  for (const auto& row : t.rows) {
    switch (row.kind) {
      case TemplateRow::Kind::Upper:
      case TemplateRow::Kind::Lower: total += (std::uint64_t{1} << t.width) + 1; break;
      case TemplateRow::Kind::Diff: total += (std::uint64_t{1} << (t.width + 1)) + 1; break;
      case TemplateRow::Kind::PointsTo:
      case TemplateRow::Kind::Flag: total += static_cast<std::uint64_t>(popcount(row.candidates)) + 1; break;
    }
  }
  return total;
}

std::vector<std::string> describe(const Template& t, const Param& q) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const auto& v = q[i];
    if (v.state == RowValue::State::Bottom) {
      if (row.guard.empty()) return {"false"};
      continue;  // no such object on this path
    }
    // A saturated points-to row is still a finite set worth showing.
    if (v.state == RowValue::State::Top && row.kind != TemplateRow::Kind::PointsTo) continue;
    switch (row.kind) {
      case TemplateRow::Kind::Upper: out.push_back(row.x + " <= " + std::to_string(v.bound)); break;
      case TemplateRow::Kind::Lower: out.push_back(row.x + " >= " + std::to_string(v.bound)); break;
      case TemplateRow::Kind::Diff:
        out.push_back(row.x + " - " + row.y + " <= " + std::to_string(v.bound));
        break;
      case TemplateRow::Kind::PointsTo: {
        std::string s = row.x + " in {";
        const std::uint64_t mask = v.state == RowValue::State::Top ? row.candidates : v.mask;
        bool sep = false;
        for (std::size_t a = 0; a < t.address_names.size() && a < 64; ++a) {
          if (!(mask >> a & 1)) continue;
          if (sep) s += ", ";
          s += t.address_names[a];
          sep = true;
        }
        out.push_back(s + "}");
        break;
      }
      case TemplateRow::Kind::Flag: out.push_back(row.x + (v.mask == 2 ? " = true" : " = false")); break;
    }
  }
  return out;
}

std::string SymbolicPath::to_string() const {
  std::string s = "{";
  bool sep = false;
  for (const auto& [loop, val] : literals) {
    if (sep) s += ", ";
    s += "e" + std::to_string(loop) + (val ? "=true" : "=false");
    sep = true;
  }
  return s + "}";
}

const Param* PathInvariantMap::find(const SymbolicPath& p) const {
  for (const auto& [path, q] : entries)
    if (path == p) return &q;
  return nullptr;
}

Param* PathInvariantMap::find(const SymbolicPath& p) {
  for (auto& [path, q] : entries)
    if (path == p) return &q;
  return nullptr;
}

Term path_term(const SymbolicPath& p, const Frame& f) {
  std::vector<Term> lits;
  for (const auto& [loop, val] : p.literals) {
    Term e = f(loop_flag_base(loop));
    lits.push_back(val ? e : mk_not(e));
  }
  return mk_and(lits);
}

Term aggregate_power(const PathInvariantMap& pm, const Template& t, const Frame& f) {
  std::vector<Term> parts;
  for (const auto& [path, q] : pm.entries) parts.push_back(mk_implies(path_term(path, f), to_formula(t, q, f)));
  return mk_and(parts);
}

Term covered(const PathInvariantMap& pm, const Frame& f) {
  std::vector<Term> alts;
  for (const auto& [path, q] : pm.entries) alts.push_back(path_term(path, f));
  return mk_or(alts);
}

}  // namespace kiki
