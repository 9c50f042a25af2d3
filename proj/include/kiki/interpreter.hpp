// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Concrete MiniHeap semantics. The exhaustive interpreter is the ground
/// truth every verdict of the analyser is checked against.

#pragma once

#include <compare>
#include <functional>
#include <optional>
#include <set>

#include "kiki/minilang.hpp"

namespace kiki {

class TraceMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One executed statement together with the nondeterministic values it
/// consumed, in consumption order.
struct TraceStep {
  Loc loc = 0;
  std::vector<std::int64_t> nondet;
  bool operator==(const TraceStep&) const = default;
};

struct Trace {
  std::vector<TraceStep> steps;
  std::string violated;
  std::map<std::string, std::int64_t> final_state;
};

enum class MemErrorKind { NullDeref, NullFree, UseAfterFree, DoubleFree };

struct ExecOutcome {
  enum class Kind { Terminated, AssertViolation, MemError, Leak, BudgetExhausted };
  Kind kind = Kind::Terminated;
  std::string property;  // AssertViolation: "assert.<n>"
  MemErrorKind mem = MemErrorKind::NullDeref;
  Loc loc = 0;
  int site = 0;  // Leak
  std::map<std::string, std::int64_t> final_state;

  auto operator<=>(const ExecOutcome&) const = default;
  bool operator==(const ExecOutcome&) const = default;

  /// The property id this outcome violates, if any.
  std::optional<std::string> violated_property() const;
  std::string describe() const;
};

std::string mem_property(MemErrorKind kind, Loc loc);

struct InterpOptions {
  int width = 8;
  bool malloc_may_fail = false;
};

/// A single execution: the nondeterministic choices it consumed and its outcome.
struct Execution {
  std::vector<TraceStep> steps;
  ExecOutcome outcome;
};

/// Calls `visit` for every execution over all nondeterministic choices within
/// the budgets. Executions blocked by a failing assume are not reported.
void enumerate_executions(const TypedProgram& p, std::size_t step_budget, std::size_t nondet_bits,
                          const InterpOptions& opts, const std::function<void(const Execution&)>& visit);

std::set<ExecOutcome> interpret_exhaustive(const TypedProgram& p, std::size_t step_budget, std::size_t nondet_bits,
                                           const InterpOptions& opts = {});

/// Deterministically re-executes `p` following the nondeterministic values
/// recorded in `t`. Throws TraceMismatch if a required value is missing, is
/// recorded at a different location, or the trace names an unknown location.
ExecOutcome replay(const TypedProgram& p, const Trace& t, const InterpOptions& opts = {},
                   std::size_t step_budget = 1'000'000);

/// Normalises `v` to a signed two's-complement value of `width` bits.
std::int64_t wrap(std::int64_t v, int width);

}  // namespace kiki
