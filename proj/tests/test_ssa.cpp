// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "kiki/engine.hpp"

using namespace kiki;

namespace {

TypedProgram compile(const std::string& src) { return typecheck(parse(src)); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::filesystem::path> corpus() {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(KIKI_CORPUS_DIR))
    if (e.path().extension() == ".mh") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

bool assertions_only(const std::string& src) { return src.find("--checks assertions") != std::string::npos; }

EncodeOptions options_for(const std::string& src, int width) {
  EncodeOptions o;
  o.width = width;
  if (assertions_only(src)) o.check_memsafety = o.check_leak = false;
  o.malloc_may_fail = src.find("--malloc-may-fail") != std::string::npos;
  return o;
}

bool is_step(const CfgNode& n) { return n.stmt != nullptr && n.kind != CfgNode::Kind::Mark; }

// Maps an execution's steps to CFG nodes by following edges: from the last
// matched node, the next step is the nearest statement node with that loc.
std::vector<int> match_steps(const Cfg& c, const std::vector<TraceStep>& steps) {
  std::vector<int> out;
  int cur = c.entry;
  for (const auto& s : steps) {
    std::vector<int> work;
    std::set<int> seen;
    for (int ei : c.out_edges(cur)) work.push_back(c.edges[static_cast<std::size_t>(ei)].to);
    int found = -1;
    while (!work.empty() && found < 0) {
      int n = work.front();
      work.erase(work.begin());
      if (!seen.insert(n).second) continue;
      const CfgNode& node = c.nodes[static_cast<std::size_t>(n)];
      if (is_step(node)) {
        if (node.loc == s.loc) found = n;
        continue;
      }
      for (int ei : c.out_edges(n)) work.push_back(c.edges[static_cast<std::size_t>(ei)].to);
    }
    if (found < 0) return {};
    out.push_back(found);
    cur = found;
  }
  return out;
}

// Checks that some assignment of the SSA form agrees with an execution:
// every pinned step occurrence has a true guard and consumes the recorded
// inputs, and the execution's violation (or normal exit) is reproduced.
// Inside a cut loop only the final iteration is pinned; the cut symbols are
// left to the solver.
bool ssa_admits(Session& s, const SsaForm& ssa, const Cfg& c, const LoopInfo& li, const Execution& e) {
  std::vector<int> nodes = match_steps(c, e.steps);
  if (nodes.size() != e.steps.size()) return false;
  std::vector<Lit> pins;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int n = nodes[i];
    bool last = true;
    for (std::size_t j = i + 1; j < nodes.size() && last; ++j) {
      if (nodes[j] == n) last = false;
      for (const auto& l : li.loops)
        if (l.body.count(n) && nodes[j] == l.header) last = false;
    }
    if (!last) continue;
    pins.push_back(s.lit(mk_var(ssa.guards.at(n), Sort::boolean())));
    std::size_t k = 0;
    for (const auto& in : ssa.inputs) {
      if (in.node != n || k >= e.steps[i].nondet.size()) continue;
      Term v = mk_var(in.symbol, ssa.symbols.at(in.symbol));
      std::int64_t val = e.steps[i].nondet[k++];
      pins.push_back(s.lit(in.guard));
      pins.push_back(s.lit(mk_eq(v, v.sort().is_bool() ? mk_bool(val != 0) : mk_int(val, v.sort().width))));
    }
  }
  if (auto prop = e.outcome.violated_property()) {
    std::vector<Term> hits;
    for (const auto& a : ssa.assertions)
      if (a.property == *prop) hits.push_back(mk_and(a.guard, mk_not(a.cond)));
    // Properties left out of the encoding only stop the interpreter.
    if (!hits.empty()) pins.push_back(s.lit(mk_or(hits)));
  } else {
    pins.push_back(s.lit(mk_var(ssa.guards.at(c.exit), Sort::boolean())));
  }
  return s.solve(pins) == SolveResult::Sat;
}

}  // namespace

TEST_CASE("cfg: if/else lowers to a diamond with forward edges only") {
  Cfg c = build_cfg(compile("int x; x = 1; if (x < 2) { x = 2; } else { x = 3; }"));
  REQUIRE(c.nodes.size() == 6);  // entry, assign, branch, two assigns, exit
  CHECK(c.edges.size() == 6);
  for (const auto& e : c.edges) CHECK(e.from < e.to);
  CHECK(c.out_edges(2).size() == 2);
  CHECK(c.in_edges(c.exit).size() == 2);
  CHECK(find_loops(c).loops.empty());
}

TEST_CASE("cfg: a while loop has one back edge to its header") {
  Cfg c = build_cfg(compile("int x; x = 0; while (x < 3) { x = x + 1; }"));
  LoopInfo li = find_loops(c);
  REQUIRE(li.loops.size() == 1);
  const auto& l = li.loops[0];
  CHECK(l.id == 1);
  CHECK(l.back_edges.size() == 1);
  const auto& be = c.edges[static_cast<std::size_t>(*l.back_edges.begin())];
  CHECK(be.to == l.header);
  CHECK(be.from > be.to);
  CHECK(l.body.size() == 3);  // header, mark, increment
  CHECK(l.parent == 0);
}

TEST_CASE("cfg: nested loops record their parent") {
  Cfg c = build_cfg(compile("int i; int j; while (i < 2) { j = 0; while (j < 2) { j = j + 1; } i = i + 1; }"));
  LoopInfo li = find_loops(c);
  REQUIRE(li.loops.size() == 2);
  CHECK(li.find(1)->parent == 0);
  CHECK(li.find(2)->parent == 1);
  CHECK(std::includes(li.find(1)->body.begin(), li.find(1)->body.end(), li.find(2)->body.begin(),
                      li.find(2)->body.end()));
}

TEST_CASE("cfg: a cycle entered at two points is irreducible") {
  Cfg c;
  for (int i = 0; i < 4; ++i) c.nodes.push_back(CfgNode{i, CfgNode::Kind::Skip, 0, nullptr, 0, 0});
  c.entry = 0;
  c.exit = 3;
  c.edges = {{0, 1, CfgEdge::Cond::WhenTrue}, {0, 2, CfgEdge::Cond::WhenFalse}, {1, 2, CfgEdge::Cond::Always},
             {2, 1, CfgEdge::Cond::Always}};
  CHECK_THROWS_AS(find_loops(c), IrreducibleCfg);
}

TEST_CASE("unwind: k = 0 in over-approximate mode is the identity") {
  for (const auto& f : corpus()) {
    TypedProgram p = compile(slurp(f));
    CHECK(same_stmts(unwind(p, 0, UnwindMode::Overapprox).program.body, p.program.body));
  }
}

TEST_CASE("unwind: precise residual blocks runs longer than k") {
  TypedProgram p = compile("int x; x = 0; while (x < 3) { x = x + 1; }");
  // With two copies the residual header still sees x = 2 < 3, so every run is cut off.
  CHECK(interpret_exhaustive(unwind(p, 2, UnwindMode::Precise), 1000, 0).empty());
  auto outs = interpret_exhaustive(unwind(p, 3, UnwindMode::Precise), 1000, 0);
  REQUIRE(outs.size() == 1);
  CHECK(outs.begin()->final_state.at("x") == 3);
}

TEST_CASE("unwind: precise unwinding of bounded loops preserves all outcomes") {
  for (const char* name : {"loop_count_to_three.mh", "nested_loops.mh", "bounded_sum.mh", "zones_meet.mh",
                           "mem_bounded_loop_free.mh", "loop_off_by_one.mh"}) {
    CAPTURE(name);
    TypedProgram p = compile(slurp(std::filesystem::path(KIKI_CORPUS_DIR) / name));
    InterpOptions io{4, false};
    auto expected = interpret_exhaustive(p, 2000, 8, io);
    CHECK(interpret_exhaustive(unwind(p, 12, UnwindMode::Precise), 2000, 8, io) == expected);
  }
}

TEST_CASE("unwind: over-approximate unwinding preserves outcomes on the corpus") {
  for (const auto& f : corpus()) {
    CAPTURE(f.filename().string());
    std::string src = slurp(f);
    TypedProgram p = compile(src);
    InterpOptions io{4, src.find("--malloc-may-fail") != std::string::npos};
    auto expected = interpret_exhaustive(p, 300, 8, io);
    CHECK(interpret_exhaustive(unwind(p, 2, UnwindMode::Overapprox), 300, 8, io) == expected);
  }
}

TEST_CASE("ssa: header values are muxes of binder, cut symbol and entry value") {
  TypedProgram p = unwind(compile("int x; x = 0; while (x < 3) { x = x + 1; }"), 1, UnwindMode::Overapprox);
  Cfg c = build_cfg(p);
  SsaForm s = to_ssa(c, find_loops(c), EncodeOptions{});
  REQUIRE(s.loops.size() == 1);
  const LoopBinder& b = s.loops[0];
  REQUIRE(b.hat.count("x"));
  CHECK(s.is_free(b.hat.at("x").name()));
  int phis = 0;
  for (const auto& d : s.defs) {
    if (d.term.op() != Op::Mux || d.term.arg(0).op() != Op::Var || d.term.arg(0).name() != b.binder) continue;
    if (d.term.arg(1).op() == Op::Var && d.term.arg(1).name() == b.hat.at("x").name()) {
      ++phis;
      CHECK(to_string(d.term.arg(2)) == to_string(b.entry.at("x")));
    }
  }
  CHECK(phis == 1);
}

TEST_CASE("ssa: defs are acyclic and single-assignment on the whole corpus") {
  for (const auto& f : corpus()) {
    for (UnwindMode mode : {UnwindMode::Overapprox, UnwindMode::Precise}) {
      CAPTURE(f.filename().string());
      std::string src = slurp(f);
      TypedProgram p = unwind(compile(src), 2, mode);
      Cfg c = build_cfg(p);
      SsaForm s = to_ssa(c, find_loops(c), options_for(src, 8));
      auto order = sorted_defs(s);  // throws on a duplicate definition
      REQUIRE(order.size() == s.defs.size());
      std::map<std::string, std::size_t> pos;
      for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]->symbol] = i;
      for (std::size_t i = 0; i < order.size(); ++i)
        for (const auto& [name, sort] : free_vars(order[i]->term))
          if (pos.count(name)) CHECK(pos[name] < i);
      for (const auto& b : s.loops)
        for (const auto& [base, h] : b.hat) CHECK_FALSE(pos.count(h.name()));
      if (mode == UnwindMode::Precise) CHECK(s.loops.empty());
    }
  }
}

TEST_CASE("ssa: every execution of the corpus is admitted by the over-approximate form") {
  std::size_t checked = 0;
  for (const auto& f : corpus()) {
    CAPTURE(f.filename().string());
    std::string src = slurp(f);
    TypedProgram orig = compile(src);
    EncodeOptions eo = options_for(src, 4);
    for (int k : {1, 2}) {
      TypedProgram p = unwind(orig, k, UnwindMode::Overapprox);
      Cfg c = build_cfg(p);
      LoopInfo li = find_loops(c);
      SsaForm s = to_ssa(c, li, eo);
      Config cfg;
      Budget budget(cfg);
      Session session(s, budget);
      enumerate_executions(orig, 200, 12, InterpOptions{4, eo.malloc_may_fail}, [&](const Execution& e) {
        if (e.outcome.kind == ExecOutcome::Kind::BudgetExhausted) return;
        CAPTURE(e.outcome.describe());
        CHECK(ssa_admits(session, s, c, li, e));
        ++checked;
      });
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("ssa: precise form admits exactly the bounded executions") {
  for (const auto& f : corpus()) {
    CAPTURE(f.filename().string());
    std::string src = slurp(f);
    TypedProgram p = unwind(compile(src), 2, UnwindMode::Precise);
    EncodeOptions eo = options_for(src, 4);
    Cfg c = build_cfg(p);
    LoopInfo li = find_loops(c);
    SsaForm s = to_ssa(c, li, eo);
    Config cfg;
    Budget budget(cfg);
    Session session(s, budget);
    enumerate_executions(p, 200, 12, InterpOptions{4, eo.malloc_may_fail}, [&](const Execution& e) {
      if (e.outcome.kind == ExecOutcome::Kind::BudgetExhausted) return;
      CHECK(ssa_admits(session, s, c, li, e));
    });
  }
}

TEST_CASE("ssa: an execution with a perturbed input is rejected") {
  TypedProgram p = compile("int x; x = nondet(); if (x < 2) { x = x + 5; } assert(x != 3);");
  Cfg c = build_cfg(p);
  LoopInfo li = find_loops(c);
  SsaForm s = to_ssa(c, li, EncodeOptions{4});
  Config cfg;
  Budget budget(cfg);
  Session session(s, budget);
  std::optional<Execution> bad;
  enumerate_executions(p, 100, 4, InterpOptions{4, false}, [&](const Execution& e) {
    if (e.outcome.violated_property()) bad = e;
  });
  REQUIRE(bad);
  CHECK(ssa_admits(session, s, c, li, *bad));
  Execution wrong = *bad;
  wrong.steps[0].nondet[0] = 4;
  CHECK_FALSE(ssa_admits(session, s, c, li, wrong));
  Execution clean = *bad;
  clean.outcome = ExecOutcome{};
  CHECK_FALSE(ssa_admits(session, s, c, li, clean));
}
