// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Incremental CDCL SAT core, CNF containers and the bit-blaster that lowers
/// word-level terms to clauses.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kiki/term.hpp"

namespace kiki {

/// Propositional literal: variable index and sign packed as 2*var + neg.
struct Lit {
  int code = 0;

  static Lit make(int var, bool negated = false) { return Lit{2 * var + (negated ? 1 : 0)}; }
  int var() const { return code >> 1; }
  bool negated() const { return code & 1; }
  Lit operator~() const { return Lit{code ^ 1}; }
  bool operator==(const Lit&) const = default;
  auto operator<=>(const Lit&) const = default;
  /// DIMACS form: 1-based, negative when negated.
  int dimacs() const { return negated() ? -(var() + 1) : var() + 1; }
};

/// Receives variables and clauses; implemented by Cnf and Solver.
class ClauseSink {
 public:
  virtual ~ClauseSink() = default;
  virtual int new_var() = 0;
  virtual void add_clause(std::span<const Lit> lits) = 0;
};

struct Cnf : ClauseSink {
  std::vector<std::vector<Lit>> clauses;
  int var_count = 0;
  /// symbol -> bit literals, least significant first
  std::map<std::string, std::vector<Lit>> var_map;

  int new_var() override { return var_count++; }
  void add_clause(std::span<const Lit> lits) override { clauses.emplace_back(lits.begin(), lits.end()); }
};

void write_dimacs(std::ostream& os, int var_count, const std::vector<std::vector<Lit>>& clauses);

enum class SolveResult { Sat, Unsat, ResourceLimit };

struct SolverStats {
  std::uint64_t solves = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t decisions = 0;
  std::uint64_t propagations = 0;
};

/// CDCL solver with two-watched-literal propagation, first-UIP learning,
/// VSIDS branching with phase saving, Luby restarts and solving under
/// assumptions. Clauses are only ever added.
class Solver : public ClauseSink {
 public:
  Solver();

  int new_var() override;
  void add_clause(std::span<const Lit> lits) override;
  void add_clause(std::initializer_list<Lit> lits) { add_clause(std::span<const Lit>(lits.begin(), lits.size())); }

  SolveResult solve(std::span<const Lit> assumptions = {});
  SolveResult solve(std::initializer_list<Lit> assumptions) {
    return solve(std::span<const Lit>(assumptions.begin(), assumptions.size()));
  }

  /// Value of `v` in the last satisfying assignment.
  bool model_value(int v) const { return model_.at(static_cast<std::size_t>(v)); }
  bool model_value(Lit l) const { return model_value(l.var()) != l.negated(); }
  const std::vector<bool>& model() const { return model_; }

  int num_vars() const { return static_cast<int>(assigns_.size()); }
  std::size_t num_clauses() const { return problem_.size(); }
  const std::vector<std::vector<Lit>>& problem_clauses() const { return problem_; }

  void set_conflict_budget(std::uint64_t conflicts) { conflict_budget_ = conflicts; }
  const SolverStats& stats() const { return stats_; }

 private:
  enum : std::int8_t { kUndef = 0, kTrue = 1, kFalse = -1 };
  struct Clause {
    std::vector<Lit> lits;
    bool learnt = false;
  };

  std::int8_t value(Lit l) const {
    std::int8_t v = assigns_[static_cast<std::size_t>(l.var())];
    return l.negated() ? static_cast<std::int8_t>(-v) : v;
  }
  int level() const { return static_cast<int>(trail_lim_.size()); }
  void enqueue(Lit l, int reason);
  int propagate();  // returns conflicting clause index or -1
  void analyze(int conflict, std::vector<Lit>& learnt, int& back_level);
  bool redundant(Lit l, std::uint32_t abstract_levels);
  void backtrack(int lvl);
  int attach(std::vector<Lit> lits, bool learnt);
  Lit pick_branch();
  void bump(int v);
  void heap_insert(int v);
  int heap_pop();
  void heap_up(std::size_t i);
  void heap_down(std::size_t i);
  bool heap_less(int a, int b) const { return activity_[static_cast<std::size_t>(a)] > activity_[static_cast<std::size_t>(b)]; }

  std::vector<Clause> clauses_;
  std::vector<std::vector<Lit>> problem_;
  std::vector<std::vector<int>> watches_;  // indexed by literal code
  std::vector<std::int8_t> assigns_;
  std::vector<int> levels_;
  std::vector<int> reasons_;
  std::vector<bool> phase_;
  std::vector<double> activity_;
  std::vector<int> heap_;
  std::vector<int> heap_pos_;
  std::vector<Lit> trail_;
  std::vector<std::size_t> trail_lim_;
  std::size_t qhead_ = 0;
  std::vector<bool> seen_;
  std::vector<bool> model_;
  double var_inc_ = 1.0;
  bool ok_ = true;  // false once the clause store is unsatisfiable at level 0
  std::uint64_t conflict_budget_ = 200'000;
  SolverStats stats_;
};

/// A satisfying assignment lifted to word level through the bit map.
class Model {
 public:
  Model() = default;
  Model(std::vector<bool> bits, const std::map<std::string, std::vector<Lit>>* var_map, const std::map<std::string, Sort>* sorts)
      : bits_(std::move(bits)), var_map_(var_map), sorts_(sorts) {}

  bool bit(Lit l) const { return bits_.at(static_cast<std::size_t>(l.var())) != l.negated(); }
  /// Word value of a symbol, or nullopt if it was never bit-blasted.
  std::optional<std::int64_t> value(const std::string& symbol) const;
  Valuation valuation() const {
    return [this](const std::string& s) { return value(s); };
  }

 private:
  std::vector<bool> bits_;
  const std::map<std::string, std::vector<Lit>>* var_map_ = nullptr;
  const std::map<std::string, Sort>* sorts_ = nullptr;
};

/// Evaluates a term under a model (word-level semantics).
std::int64_t eval(const Model& m, const Term& t);

/// Tseitin-style lowering of terms into a ClauseSink. Integer operations
/// become ripple-carry adders, comparators and shift-add multipliers;
/// addresses are encoded as unsigned integers of their width.
class BitBlaster {
 public:
  explicit BitBlaster(ClauseSink& sink);

  /// Literal equivalent to a boolean term.
  Lit literal(const Term& t);
  /// Bits (least significant first) of an integer or address term.
  const std::vector<Lit>& bits(const Term& t);
  /// Asserts a boolean term as a unit clause.
  void assert_term(const Term& t) { unit(literal(t)); }
  /// Makes `name` stand for the bits of `t`; no clauses are added. Throws
  /// SortError if `name` was already blasted or defined.
  void define(const std::string& name, const Term& t);

  Lit true_lit() const { return true_; }
  Lit false_lit() const { return ~true_; }
  const std::map<std::string, std::vector<Lit>>& var_map() const { return var_map_; }
  const std::map<std::string, Sort>& sorts() const { return sorts_; }
  Model model(const Solver& s) const { return Model(s.model(), &var_map_, &sorts_); }

 private:
  Lit fresh() { return Lit::make(sink_.new_var()); }
  void unit(Lit a);
  bool is_const(Lit a) const { return a.var() == true_.var(); }
  Lit and2(Lit a, Lit b);
  Lit or2(Lit a, Lit b) { return ~and2(~a, ~b); }
  Lit xor2(Lit a, Lit b);
  Lit mux(Lit c, Lit a, Lit b);
  Lit and_n(const std::vector<Lit>& xs);
  std::vector<Lit> adder(const std::vector<Lit>& a, const std::vector<Lit>& b, Lit carry);
  Lit equal(const std::vector<Lit>& a, const std::vector<Lit>& b);
  Lit signed_less(const std::vector<Lit>& a, const std::vector<Lit>& b, bool or_equal);
  std::vector<Lit> blast(const Term& t);

  ClauseSink& sink_;
  Lit true_;
  std::map<std::string, std::vector<Lit>> var_map_;
  std::map<std::string, Sort> sorts_;
  std::unordered_map<const TermNode*, std::vector<Lit>> memo_;
  std::vector<Term> keep_alive_;
  std::map<std::pair<int, int>, Lit> and_cache_;
};

/// Bit-blasts a boolean term into a standalone CNF whose root is asserted.
Cnf bitblast(const Term& t);

/// Appends every clause of `c` to the solver (variables are shared by index).
void add_clauses(Solver& s, const Cnf& c);

}  // namespace kiki
