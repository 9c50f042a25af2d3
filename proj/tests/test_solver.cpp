// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <sstream>

#include "differential.hpp"
#include "kiki/solver.hpp"

using namespace kiki;
using namespace kiki::differential;

namespace {

Lit pos(int v) { return Lit::make(v); }
Lit neg(int v) { return Lit::make(v, true); }

}  // namespace

TEST_CASE("solver: trivial instances") {
  Solver s;
  int a = s.new_var(), b = s.new_var();
  s.add_clause({pos(a), pos(b)});
  s.add_clause({neg(a)});
  REQUIRE(s.solve() == SolveResult::Sat);
  CHECK_FALSE(s.model_value(a));
  CHECK(s.model_value(b));
  s.add_clause({neg(b)});
  CHECK(s.solve() == SolveResult::Unsat);
  // Once unsatisfiable, always unsatisfiable.
  CHECK(s.solve() == SolveResult::Unsat);
}

TEST_CASE("solver: pigeonhole 3 into 2 is unsatisfiable") {
  Solver s;
  int p[3][2];
  for (auto& row : p)
    for (int& v : row) v = s.new_var();
  for (auto& row : p) s.add_clause({pos(row[0]), pos(row[1])});
  for (int h = 0; h < 2; ++h)
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) s.add_clause({neg(p[i][h]), neg(p[j][h])});
  CHECK(s.solve() == SolveResult::Unsat);
}

TEST_CASE("solver: pigeonhole 7 into 6 is unsatisfiable") {
  Solver s;
  const int n = 7, m = 6;
  std::vector<std::vector<int>> p(n, std::vector<int>(m));
  for (auto& row : p)
    for (int& v : row) v = s.new_var();
  for (auto& row : p) {
    std::vector<Lit> c;
    for (int v : row) c.push_back(pos(v));
    s.add_clause(c);
  }
  for (int h = 0; h < m; ++h)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s.add_clause({neg(p[static_cast<std::size_t>(i)][static_cast<std::size_t>(h)]), neg(p[static_cast<std::size_t>(j)][static_cast<std::size_t>(h)])});
  CHECK(s.solve() == SolveResult::Unsat);
}

TEST_CASE("solver: random 3-CNF agrees with brute force") {
  Tally t = cnf_rounds(12345, 500);
  INFO(t.first_mismatch.value_or(""));
  CHECK(t.total == 500);
  CHECK(t.all());
}

TEST_CASE("solver: assumptions and incremental use") {
  Solver s;
  int a = s.new_var(), b = s.new_var(), c = s.new_var();
  s.add_clause({neg(a), pos(b)});
  s.add_clause({neg(b), pos(c)});
  CHECK(s.solve({pos(a), neg(c)}) == SolveResult::Unsat);
  CHECK(s.solve({pos(a)}) == SolveResult::Sat);
  CHECK(s.model_value(c));
  CHECK(s.solve({neg(c)}) == SolveResult::Sat);
  CHECK_FALSE(s.model_value(a));
  // Clauses added after a solve take effect.
  s.add_clause({pos(a)});
  CHECK(s.solve({neg(c)}) == SolveResult::Unsat);
  CHECK(s.solve() == SolveResult::Sat);
  CHECK(s.stats().solves >= 5);
}

TEST_CASE("solver: repeated runs give identical models") {
  auto run = [] {
    std::mt19937 rng(7);
    Solver s;
    for (int v = 0; v < 40; ++v) s.new_var();
    for (int c = 0; c < 150; ++c) {
      std::vector<Lit> cl;
      for (int k = 0; k < 3; ++k) cl.push_back(Lit::make(static_cast<int>(rng() % 40), rng() & 1));
      s.add_clause(cl);
    }
    s.solve();
    return s.model();
  };
  CHECK(run() == run());
}

TEST_CASE("solver: conflict budget yields a resource limit") {
  Solver s;
  const int n = 9, m = 8;
  std::vector<std::vector<int>> p(n, std::vector<int>(m));
  for (auto& row : p)
    for (int& v : row) v = s.new_var();
  for (auto& row : p) {
    std::vector<Lit> c;
    for (int v : row) c.push_back(pos(v));
    s.add_clause(c);
  }
  for (int h = 0; h < m; ++h)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s.add_clause({neg(p[static_cast<std::size_t>(i)][static_cast<std::size_t>(h)]), neg(p[static_cast<std::size_t>(j)][static_cast<std::size_t>(h)])});
  s.set_conflict_budget(10);
  CHECK(s.solve() == SolveResult::ResourceLimit);
}

TEST_CASE("dimacs: header and clause lines") {
  Cnf c;
  c.new_var();
  c.new_var();
  Lit cl1[] = {pos(0), neg(1)};
  Lit cl2[] = {pos(1)};
  c.add_clause(cl1);
  c.add_clause(cl2);
  std::ostringstream os;
  write_dimacs(os, c.var_count, c.clauses);
  CHECK(os.str() == "p cnf 2 2\n1 -2 0\n2 0\n");
}

TEST_CASE("bitblast: modular arithmetic at width 3") {
  // 3 + 5 wraps to 0 in three bits.
  Term x = mk_var("x", Sort::integer(3));
  Solver s;
  BitBlaster bb(s);
  Lit l = bb.literal(mk_and(mk_eq(x, mk_int(3, 3)), mk_eq(mk_add(x, mk_int(5, 3)), mk_int(0, 3))));
  CHECK(s.solve({l}) == SolveResult::Sat);
  CHECK(bb.model(s).value("x") == 3);
  Lit ovf = bb.literal(mk_lt(mk_add(x, mk_int(1, 3)), x));
  REQUIRE(s.solve({ovf}) == SolveResult::Sat);
  CHECK(bb.model(s).value("x") == 3);  // only the maximum overflows
}

TEST_CASE("bitblast: random terms agree with a reference evaluator") {
  Tally t = term_rounds(1000);
  INFO(t.first_mismatch.value_or(""));
  CHECK(t.total == 1000);
  CHECK(t.all());
}

TEST_CASE("term: sort errors and folding") {
  Term x = mk_var("x", Sort::integer(4));
  CHECK_THROWS_AS(mk_add(x, mk_var("y", Sort::integer(5))), SortError);
  CHECK_THROWS_AS(mk_and(x, mk_true()), SortError);
  CHECK_THROWS_AS(mk_mul(x, x), SortError);
  CHECK(mk_add(mk_int(7, 4), mk_int(1, 4)).value() == -8);
  CHECK(mk_and(mk_false(), mk_lt(x, x)).is_false());
  CHECK_THROWS_AS(evaluate(x, [](const std::string&) { return std::nullopt; }), UnboundSymbol);
}
