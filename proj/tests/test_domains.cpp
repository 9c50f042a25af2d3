// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "kiki/engine.hpp"

using namespace kiki;

namespace {

constexpr int kWidth = 4;

const char* kLoop =
    "record N { int val; N* next; }\n"
    "N* head; N* n; int i; int s;\n"
    "i = 0; s = 0;\n"
    "while (i < 5) { n = malloc(N); n->val = i; n->next = head; head = n; s = s + i; i = i + 1; }\n"
    "assert(s >= 0);\n";

struct Fixture {
  TypedProgram program;
  SsaForm ssa;
  Template tmpl;

  explicit Fixture(const DomainConfig& dc = {}) : program(unwind(typecheck(parse(kLoop)), 1, UnwindMode::Overapprox)) {
    Cfg c = build_cfg(program);
    EncodeOptions eo;
    eo.width = kWidth;
    eo.check_memsafety = eo.check_leak = false;
    ssa = to_ssa(c, find_loops(c), eo);
    REQUIRE(ssa.loops.size() == 1);
    tmpl = make_template(ssa, ssa.loops[0], dc);
  }

  Frame frame() const {
    return [this](const std::string& base) { return mk_var(base, ssa.state_var(base)->sort); };
  }
};

using Point = std::map<std::string, std::int64_t>;

Valuation valuation(const Point& p) {
  return [&p](const std::string& s) -> std::optional<std::int64_t> {
    auto it = p.find(s);
    if (it == p.end()) return std::nullopt;
    return it->second;
  };
}

// Row semantics written out directly, independent of the formula builder.
bool holds(const Template& t, const Param& q, const Point& p) {
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const auto& v = q[i];
    if (!row.guard.empty() && p.at(row.guard) == 0) continue;
    if (v.state == RowValue::State::Top) continue;
    if (v.state == RowValue::State::Bottom) return false;
    const std::int64_t x = p.at(row.x);
    bool ok = true;
    switch (row.kind) {
      case TemplateRow::Kind::Upper: ok = x <= v.bound; break;
      case TemplateRow::Kind::Lower: ok = x >= v.bound; break;
      case TemplateRow::Kind::Diff: ok = x - p.at(row.y) <= v.bound; break;
      case TemplateRow::Kind::PointsTo:
      case TemplateRow::Kind::Flag: ok = ((v.mask >> (row.kind == TemplateRow::Kind::Flag ? (x != 0) : x)) & 1) != 0; break;
    }
    if (!ok) return false;
  }
  return true;
}

std::vector<int> bits_of(std::uint64_t m) {
  std::vector<int> out;
  for (int i = 0; i < 64; ++i)
    if (m >> i & 1) out.push_back(i);
  return out;
}

class Gen {
 public:
  explicit Gen(unsigned seed) : rng_(seed) {}

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Point point(const Template& t) {
    Point p;
    for (const auto& row : t.rows) {
      if (!row.guard.empty() && !p.count(row.guard)) p[row.guard] = pick(0, 1);
      if (p.count(row.x)) continue;
      switch (row.kind) {
        case TemplateRow::Kind::Upper:
        case TemplateRow::Kind::Lower:
        case TemplateRow::Kind::Diff:
          p[row.x] = pick(-(1 << (kWidth - 1)), (1 << (kWidth - 1)) - 1);
          if (!row.y.empty() && !p.count(row.y)) p[row.y] = pick(-(1 << (kWidth - 1)), (1 << (kWidth - 1)) - 1);
          break;
        case TemplateRow::Kind::PointsTo: {
          auto ids = bits_of(row.candidates);
          p[row.x] = ids[static_cast<std::size_t>(pick(0, static_cast<int>(ids.size()) - 1))];
          break;
        }
        case TemplateRow::Kind::Flag: p[row.x] = pick(0, 1); break;
      }
    }
    return p;
  }

  // Random parameter in normal form: values that join_model would turn into
  // Top are not produced.
  Param param(const Template& t) {
    Param q(t.rows.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto& row = t.rows[i];
      auto& v = q[i];
      int s = pick(0, 5);
      if (s == 0) continue;
      if (s == 1) {
        v.state = RowValue::State::Top;
        continue;
      }
      v.state = RowValue::State::Value;
      const int lo = -(1 << (kWidth - 1)), hi = (1 << (kWidth - 1)) - 1;
      switch (row.kind) {
        case TemplateRow::Kind::Upper: v.bound = pick(lo, hi - 1); break;
        case TemplateRow::Kind::Lower: v.bound = pick(lo + 1, hi); break;
        case TemplateRow::Kind::Diff: v.bound = pick(2 * lo + 1, 2 * hi - 1); break;
        case TemplateRow::Kind::PointsTo:
        case TemplateRow::Kind::Flag: {
          auto ids = bits_of(row.candidates);
          do {
            v.mask = 0;
            for (int id : ids)
              if (pick(0, 1)) v.mask |= std::uint64_t{1} << id;
          } while (v.mask == 0 || v.mask == row.candidates);
          break;
        }
      }
    }
    return q;
  }

 private:
  std::mt19937 rng_;
};

}  // namespace

TEST_CASE("domains: template covers ints, fields, pointers and heap flags") {
  Fixture f;
  std::map<TemplateRow::Kind, int> kinds;
  for (const auto& r : f.tmpl.rows) ++kinds[r.kind];
  CHECK(kinds[TemplateRow::Kind::Diff] == 2);  // i - s, s - i
  CHECK(kinds[TemplateRow::Kind::Upper] == kinds[TemplateRow::Kind::Lower]);
  CHECK(kinds[TemplateRow::Kind::PointsTo] >= 1);
  CHECK(kinds[TemplateRow::Kind::Flag] >= 2);
  for (const auto& r : f.tmpl.rows)
    if (r.x.find('.') != std::string::npos) CHECK_FALSE(r.guard.empty());

  Fixture intervals_only(DomainConfig{true, false, false});
  for (const auto& r : intervals_only.tmpl.rows)
    CHECK((r.kind == TemplateRow::Kind::Upper || r.kind == TemplateRow::Kind::Lower));
}

TEST_CASE("domains: formulas agree with the row semantics") {
  Fixture f;
  Gen g(7);
  Frame fr = f.frame();
  for (int round = 0; round < 400; ++round) {
    Param q = g.param(f.tmpl);
    Point p = g.point(f.tmpl);
    CHECK((evaluate(to_formula(f.tmpl, q, fr), valuation(p)) != 0) == holds(f.tmpl, q, p));
  }
  Point any = g.point(f.tmpl);
  CHECK(evaluate(to_formula(f.tmpl, top(f.tmpl), fr), valuation(any)) == 1);
}

TEST_CASE("domains: joining a point gives the least upper bound") {
  Fixture f;
  Gen g(11);
  for (int round = 0; round < 400; ++round) {
    Param q = g.param(f.tmpl);
    Point p = g.point(f.tmpl);
    Param j = join_model(f.tmpl, q, valuation(p));
    CHECK(holds(f.tmpl, j, p));
    CHECK(leq(f.tmpl, q, j));
    for (int other = 0; other < 10; ++other) {
      Param r = g.param(f.tmpl);
      if (leq(f.tmpl, q, r) && holds(f.tmpl, r, p)) CHECK(leq(f.tmpl, j, r));
    }
    // Joining the same point again changes nothing.
    CHECK(join_model(f.tmpl, j, valuation(p)) == j);
  }
}

TEST_CASE("domains: leq is a partial order that implies inclusion") {
  Fixture f;
  Gen g(13);
  for (int round = 0; round < 300; ++round) {
    Param a = g.param(f.tmpl), b = g.param(f.tmpl), c = g.param(f.tmpl);
    CHECK(leq(f.tmpl, a, a));
    if (leq(f.tmpl, a, b) && leq(f.tmpl, b, a)) CHECK(a == b);
    if (leq(f.tmpl, a, b) && leq(f.tmpl, b, c)) CHECK(leq(f.tmpl, a, c));
    CHECK(leq(f.tmpl, bottom(f.tmpl), a));
    CHECK(leq(f.tmpl, a, top(f.tmpl)));
    // Build a parameter above `a` by joining points, then check inclusion.
    Param up = a;
    for (int k = 0; k < 3; ++k) up = join_model(f.tmpl, up, valuation(g.point(f.tmpl)));
    REQUIRE(leq(f.tmpl, a, up));
    for (int k = 0; k < 20; ++k) {
      Point p = g.point(f.tmpl);
      if (holds(f.tmpl, a, p)) CHECK(holds(f.tmpl, up, p));
    }
  }
}

TEST_CASE("domains: ascending chains stay within the chain bound") {
  Fixture f;
  Gen g(17);
  const std::uint64_t bound = chain_bound(f.tmpl);
  for (int run = 0; run < 20; ++run) {
    Param q = bottom(f.tmpl);
    std::uint64_t steps = 0;
    for (int k = 0; k < 2000; ++k) {
      Param next = join_model(f.tmpl, q, valuation(g.point(f.tmpl)));
      if (next != q) ++steps;
      q = next;
    }
    CHECK(steps <= bound);
  }
}

TEST_CASE("domains: rows saturate to top at the ends of their range") {
  Fixture f;
  Gen g(19);
  Point p = g.point(f.tmpl);
  for (auto& [name, v] : p) {
    const StateVar* sv = f.ssa.state_var(name);
    if (sv && sv->sort.is_int()) v = (1 << (kWidth - 1)) - 1;
    if (sv && sv->sort.is_bool()) v = 1;
  }
  Param q = join_model(f.tmpl, bottom(f.tmpl), valuation(p));
  for (auto& [name, v] : p) {
    const StateVar* sv = f.ssa.state_var(name);
    if (sv && sv->sort.is_int()) v = -(1 << (kWidth - 1));
  }
  q = join_model(f.tmpl, q, valuation(p));
  // Clearing the flags also hides the fields, which must not matter now.
  for (auto& [name, v] : p) {
    const StateVar* sv = f.ssa.state_var(name);
    if (sv && sv->sort.is_bool()) v = 0;
  }
  q = join_model(f.tmpl, q, valuation(p));
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& row = f.tmpl.rows[i];
    CAPTURE(row.x);
    if (row.kind == TemplateRow::Kind::Upper || row.kind == TemplateRow::Kind::Lower ||
        row.kind == TemplateRow::Kind::Flag)
      CHECK(q[i].state == RowValue::State::Top);
  }
  CHECK(describe(f.tmpl, top(f.tmpl)).size() ==
        static_cast<std::size_t>(std::count_if(f.tmpl.rows.begin(), f.tmpl.rows.end(), [](const TemplateRow& r) {
          return r.kind == TemplateRow::Kind::PointsTo;
        })));
  CHECK(describe(f.tmpl, bottom(f.tmpl)) == std::vector<std::string>{"false"});
}

TEST_CASE("domains: paths print as loop flag valuations") {
  SymbolicPath p;
  CHECK(p.to_string() == "{}");
  p.literals = {{1, true}, {2, false}};
  CHECK(p.to_string() == "{e1=true, e2=false}");
  PathInvariantMap pm;
  pm.entries.push_back({p, Param{}});
  CHECK(pm.find(p) != nullptr);
  CHECK(pm.find(SymbolicPath{}) == nullptr);
}

TEST_CASE("domains: counting loop header gets the hull of its reachable values") {
  // Header values of x = 0; while (x < 3) x = x + 1;
  std::int64_t lo = 0, hi = 0;
  for (std::int64_t x = 0;; ++x) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    if (!(x < 3)) break;
  }
  TypedProgram p = typecheck(parse("int x; x = 0; while (x < 3) { x = x + 1; } assert(x <= 3);"));
  Cfg c = build_cfg(p);
  SsaForm ssa = to_ssa(c, find_loops(c), EncodeOptions{});
  for (bool paths : {true, false}) {
    CAPTURE(paths);
    Config cfg;
    cfg.paths = paths;
    cfg.domains = DomainConfig{true, false, false};
    Budget budget(cfg);
    Session s(ssa, budget);
    Synthesis syn = synthesize_invariants(s, ssa, cfg);
    REQUIRE(syn.status == Synthesis::Status::Ok);
    REQUIRE(syn.loops.size() == 1);
    const auto& inv = syn.loops[0];
    std::int64_t got_lo = 1000, got_hi = -1000;
    for (const auto& [path, q] : inv.paths.entries)
      for (std::size_t i = 0; i < q.size(); ++i) {
        const auto& row = inv.tmpl.rows[i];
        if (row.x != "x" || q[i].state != RowValue::State::Value) continue;
        if (row.kind == TemplateRow::Kind::Upper) got_hi = std::max(got_hi, q[i].bound);
        if (row.kind == TemplateRow::Kind::Lower) got_lo = std::min(got_lo, q[i].bound);
      }
    CHECK(got_lo == lo);
    CHECK(got_hi == hi);
    if (paths) CHECK(inv.paths.entries.size() == 2);
    else CHECK(inv.paths.entries.size() == 1);
    CHECK(is_inductive(ssa, syn.loops, budget));
  }
}
