// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// The verification loop: bounded refutation on precisely unwound programs
/// and inductive proofs with synthesized loop invariants on over-approximate
/// unwindings, for increasing unwinding depth.

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kiki/domains.hpp"
#include "kiki/interpreter.hpp"
#include "kiki/solver.hpp"
#include "kiki/ssa.hpp"

namespace kiki {

struct Config {
  int k_max = 10;
  int width = 8;
  DomainConfig domains;
  bool paths = true;
  std::size_t path_cap = 32;
  bool check_assertions = true;
  bool check_memsafety = true;
  bool check_leak = true;
  bool malloc_may_fail = false;
  std::uint64_t conflict_budget = 200'000;  // per solver call
  std::int64_t timeout_ms = 0;              // 0: none

  EncodeOptions encode() const;
};

enum class Verdict { True, False, Unknown };
enum class UnknownReason { None, KMaxReached, ResourceLimit, PathCapReached, LeakWithLoops };

std::string to_string(Verdict v, UnknownReason r);

struct PropertyResult {
  std::string property;
  Verdict verdict = Verdict::Unknown;
  UnknownReason reason = UnknownReason::None;
  int k = 0;  // unwinding depth that decided the property
  std::optional<Trace> trace;
};

struct LoopInvariant {
  int loop = 0;
  int origin = 0;
  Template tmpl;
  PathInvariantMap paths;
};

struct Stats {
  int k = 0;
  std::uint64_t solver_calls = 0;
  std::uint64_t refinements = 0;
  std::uint64_t blocked_traces = 0;
  std::size_t max_paths = 0;
  std::uint64_t inductive_checks = 0;
  std::uint64_t inductive_failures = 0;
  double seconds = 0;
};

struct Report {
  std::vector<PropertyResult> results;
  std::vector<LoopInvariant> invariants;  // from the last invariant synthesis
  Stats stats;

  const PropertyResult* find(const std::string& property) const;
};

class ResourceExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wall-clock and solver budgets shared by one verification run.
class Budget {
 public:
  explicit Budget(const Config& cfg);
  void check() const;
  std::uint64_t conflicts() const { return conflicts_; }

 private:
  std::optional<std::chrono::steady_clock::time_point> deadline_;
  std::uint64_t conflicts_;
};

/// A solver loaded with the definitions and assumptions of an SSA form.
class Session {
 public:
  Session(const SsaForm& ssa, const Budget& budget, Stats* stats = nullptr);

  Lit lit(const Term& t) { return bb_.literal(t); }
  Lit fresh() { return Lit::make(solver_.new_var()); }
  /// Adds `act => t`.
  void guarded(Lit act, const Term& t) { solver_.add_clause({~act, lit(t)}); }
  SolveResult solve(const std::vector<Lit>& assumptions);
  Model model() const { return bb_.model(solver_); }
  const Solver& solver() const { return solver_; }

 private:
  const Budget* budget_;
  Stats* stats_;
  Solver solver_;
  BitBlaster bb_;
};

/// Properties checked for `p` under `cfg`, in program order.
std::vector<std::string> properties(const TypedProgram& p, const Config& cfg);

/// Violation of `property` anywhere in the SSA form.
Term violation(const SsaForm& ssa, const std::string& property);

struct Synthesis {
  enum class Status { Ok, ResourceLimit, PathCapReached };
  Status status = Status::Ok;
  std::vector<LoopInvariant> loops;
  std::uint64_t iterations = 0;
  std::uint64_t bound = 0;  // iteration bound from the chain lengths
};

/// Invariant of one loop in the given frame; `true` for empty templates.
Term invariant_in(const LoopInvariant& inv, const Frame& f);
/// Conjunction over loops of `binder => invariant(cut symbols)`.
Term invariant_assumption(const SsaForm& ssa, const std::vector<LoopInvariant>& invs);
/// Some loop entry or back edge leaves the invariant.
Term invariant_violation(const SsaForm& ssa, const std::vector<LoopInvariant>& invs);

/// Computes inductive invariants for all loops of `ssa` at once by lazy
/// refinement from bottom.
Synthesis synthesize_invariants(Session& s, const SsaForm& ssa, const Config& cfg, Stats* stats = nullptr);

/// Re-checks inductiveness in a fresh solver.
bool is_inductive(const SsaForm& ssa, const std::vector<LoopInvariant>& invs, const Budget& budget);

/// Trace of the executed statements in a model of an acyclic SSA form.
Trace extract_trace(const SsaForm& ssa, const Model& m);

/// Runs the verifier.
Report kiki(const TypedProgram& p, const Config& cfg);

/// Textual invariant dump: an `INVARIANT loop <id> path <path>` header per
/// path followed by one indented row per line.
std::string dump_invariants(const std::vector<LoopInvariant>& invs);

}  // namespace kiki
