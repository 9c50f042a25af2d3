// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Control-flow graphs, loop analysis, unwinding and the acyclic
/// single-assignment form the analyses run on.

#pragma once

#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kiki/heap_model.hpp"
#include "kiki/minilang.hpp"
#include "kiki/term.hpp"

namespace kiki {

class IrreducibleCfg : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CfgNode {
  enum class Kind { Entry, Exit, Skip, Assign, Malloc, Free, Assert, Assume, Branch, Mark };
  int id = 0;
  Kind kind = Kind::Skip;
  Loc loc = 0;
  const Stmt* stmt = nullptr;  // null for Entry, Exit and Mark
  int loop = 0;         // Branch: loop id when this is a while header; Mark: source loop id
  int origin_loop = 0;  // Branch of a while header: source loop id
};

struct CfgEdge {
  enum class Cond { Always, WhenTrue, WhenFalse };
  int from = 0;
  int to = 0;
  Cond cond = Cond::Always;
};

struct Cfg {
  std::vector<CfgNode> nodes;
  std::vector<CfgEdge> edges;
  int entry = 0;
  int exit = 0;
  /// The program the nodes point into.
  std::shared_ptr<const TypedProgram> program;

  std::vector<int> out_edges(int node) const;
  std::vector<int> in_edges(int node) const;
};

/// Lowers structured statements to a graph. Node ids follow text order, so
/// every edge except a loop's back edge goes from a lower to a higher id.
Cfg build_cfg(const TypedProgram& p);

struct LoopInfo {
  struct Loop {
    int id = 0;
    int origin = 0;
    int header = 0;
    std::set<int> back_edges;  // edge indices
    std::set<int> body;        // node ids, header included
    int parent = 0;            // enclosing loop id, 0 at top level
  };
  std::vector<Loop> loops;

  const Loop* find(int id) const;
  const Loop* header_of(int node) const;
  bool is_back_edge(int edge) const;
};

/// Natural loops from dominators. Throws IrreducibleCfg when a retreating
/// edge does not target a dominator of its source.
LoopInfo find_loops(const Cfg& c);

enum class UnwindMode { Overapprox, Precise };

/// Replicates every loop body `k` times in front of the loop. Overapprox keeps
/// the residual loop; Precise replaces it with `assume(!cond)` flagged as an
/// unwinding check. Copies keep their locations, malloc sites and assertion
/// ids; residual loops nested inside copies get fresh loop ids.
TypedProgram unwind(const TypedProgram& p, int k, UnwindMode mode);

/// Program variables read inside or after each source loop, keyed by loop id.
std::map<int, std::set<std::string>> live_at_loops(const Program& p);

struct EncodeOptions {
  int width = 8;
  bool check_assertions = true;
  bool check_memsafety = true;
  bool check_leak = true;
  bool malloc_may_fail = false;

  HeapConfig heap() const;
};

struct SsaDef {
  std::string symbol;
  Term term;
};

struct SsaAssertion {
  std::string property;
  Loc loc = 0;
  int node = 0;
  Term guard;  // the check is evaluated
  Term cond;   // and must hold
};

/// A program input consumed by the encoded execution.
struct SsaInput {
  std::string symbol;
  Loc loc = 0;
  int node = 0;
  Term guard;  // true iff the interpreter consumes this value
  int bits = 0;
};

struct StateVar {
  enum class Kind { Program, Field, Ghost };
  std::string base;
  Sort sort;
  Kind kind = Kind::Program;
  std::string record;  // pointee record of pointers
  std::string guard;   // object fields: ghost that holds while the object exists
};

struct LoopBinder {
  int loop = 0;
  int origin = 0;
  int header = 0;
  std::string binder;               // b: the header is visited after at least one iteration
  std::vector<std::string> bases;   // state cut at this loop
  std::map<std::string, Term> hat;  // free symbols
  std::map<std::string, Term> entry;
  std::map<std::string, Term> end;  // state on the back edge
  Term entry_guard;
  Term back_guard;
};

struct SsaForm {
  std::vector<StateVar> state;
  std::vector<SsaDef> defs;  // in definition order, which is topological
  std::map<std::string, Sort> symbols;
  std::map<int, std::string> guards;  // node id -> guard symbol
  std::vector<LoopBinder> loops;
  std::vector<SsaAssertion> assertions;
  std::vector<std::pair<Term, Term>> assumptions;  // guard => condition
  std::vector<Term> unwind_checks;                 // reaching a residual loop with its condition true
  std::vector<SsaInput> inputs;
  std::map<std::string, Term> end_state;
  std::vector<std::pair<int, Loc>> steps;  // nodes that are interpreter steps, topological
  AddressSpace addresses;
  int width = 8;

  const StateVar* state_var(const std::string& base) const;
  bool is_free(const std::string& symbol) const;
};

/// Translates an acyclic-after-cutting CFG into single-assignment form with
/// the heap instrumentation selected by `opts`.
SsaForm to_ssa(const Cfg& c, const LoopInfo& li, const EncodeOptions& opts);

/// Definitions in topological order, ties by (base name, version).
std::vector<const SsaDef*> sorted_defs(const SsaForm& s);
/// `symbol := term`, one per line.
std::string dump(const SsaForm& s);

}  // namespace kiki
