// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Template domains over loop-header states: intervals, zones (difference
/// bounds) and points-to sets, their conjunction, and the power domain that
/// keys invariants by symbolic path.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kiki/ssa.hpp"
#include "kiki/term.hpp"

namespace kiki {

struct DomainConfig {
  bool interval = true;
  bool zones = true;
  bool shape = true;
  std::size_t zones_cap = 12;  // symbols per loop
};

struct TemplateRow {
  enum class Kind { Upper, Lower, Diff, PointsTo, Flag };
  Kind kind = Kind::Upper;
  std::string x;
  std::string y;                // Diff only
  std::uint64_t candidates = 0;  // PointsTo: bit i set if address id i may occur; Flag: bit 0 false, bit 1 true
  std::string guard;             // object fields: the row only constrains existing objects
  bool operator==(const TemplateRow&) const = default;
};

struct Template {
  int loop = 0;
  int width = 8;        // integer width of numeric subjects
  int addr_width = 1;
  std::vector<std::string> address_names;  // id -> "NULL", "&dyn1", ...
  std::vector<TemplateRow> rows;
  bool zones_capped = false;  // more Int symbols than the zones cap allowed

  bool empty() const { return rows.empty(); }
};

/// One row of a template parameter.
struct RowValue {
  enum class State { Bottom, Value, Top };
  State state = State::Bottom;
  std::int64_t bound = 0;   // numeric rows
  std::uint64_t mask = 0;   // PointsTo and Flag rows: set of values
  bool operator==(const RowValue&) const = default;
};
using Param = std::vector<RowValue>;

/// Maps a state base name to the term holding its value in some frame
/// (the cut symbols, the loop-entry state or the back-edge state).
using Frame = std::function<Term(const std::string& base)>;
Frame frame_of(const std::map<std::string, Term>& m);

Template make_template(const SsaForm& ssa, const LoopBinder& loop, const DomainConfig& cfg);
Param bottom(const Template& t);
Param top(const Template& t);
Term to_formula(const Template& t, const Param& q, const Frame& f);
/// Least upper bound of `q` and the point given by `v` (values of the
/// template's subjects; addresses as ids).
Param join_model(const Template& t, const Param& q, const Valuation& v);
bool leq(const Template& t, const Param& a, const Param& b);
/// Length bound of any strictly increasing chain of parameters.
std::uint64_t chain_bound(const Template& t);
/// Rows as text: "x <= 7", "x - y <= 2", "p in {NULL, &dyn1}", "$alloc1 = true".
std::vector<std::string> describe(const Template& t, const Param& q);

/// Valuation of the loop-executed flags, keyed by source loop id.
struct SymbolicPath {
  std::map<int, bool> literals;
  bool operator==(const SymbolicPath&) const = default;
  auto operator<=>(const SymbolicPath&) const = default;
  std::string to_string() const;
};

struct PathInvariantMap {
  std::vector<std::pair<SymbolicPath, Param>> entries;
  const Param* find(const SymbolicPath& p) const;
  Param* find(const SymbolicPath& p);
};

/// State base name of the "loop ran at least once" flag of a source loop.
std::string loop_flag_base(int origin);

Term path_term(const SymbolicPath& p, const Frame& f);
/// Conjunction over entries of path => invariant.
Term aggregate_power(const PathInvariantMap& pm, const Template& t, const Frame& f);
/// Some entry's path holds.
Term covered(const PathInvariantMap& pm, const Frame& f);

}  // namespace kiki
