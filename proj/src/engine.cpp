// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include "kiki/engine.hpp"

#include <algorithm>
#include <sstream>

namespace kiki {

namespace {

constexpr int kMaxBlockedTraces = 16;

bool reads_heap(const Expr& e) {
  if (e.kind == Expr::Kind::Field) return true;
  return (e.lhs && reads_heap(*e.lhs)) || (e.rhs && reads_heap(*e.rhs));
}

bool has_loops(const TypedProgram& p) {
  bool any = false;
  for_each_stmt(p.program.body, [&](const Stmt& s) { any = any || s.kind == Stmt::Kind::While; });
  return any;
}

bool is_true_in(const Model& m, const Term& t) { return eval(m, t) != 0; }

Frame map_frame(const std::map<std::string, Term>& m) { return frame_of(m); }

}  // namespace

EncodeOptions Config::encode() const {
  EncodeOptions o;
  o.width = width;
  o.check_assertions = check_assertions;
  o.check_memsafety = check_memsafety;
  o.check_leak = check_leak;
  o.malloc_may_fail = malloc_may_fail;
  return o;
}

std::string to_string(Verdict v, UnknownReason r) {
  switch (v) {
    case Verdict::True: return "TRUE";
    case Verdict::False: return "FALSE";
    case Verdict::Unknown: break;
  }
  switch (r) {
    case UnknownReason::KMaxReached: return "UNKNOWN(kMaxReached)";
    case UnknownReason::ResourceLimit: return "UNKNOWN(ResourceLimit)";
    case UnknownReason::PathCapReached: return "UNKNOWN(PathCapReached)";
    case UnknownReason::LeakWithLoops: return "UNKNOWN(LeakWithLoops)";
    case UnknownReason::None: break;
  }
  return "UNKNOWN";
}

const PropertyResult* Report::find(const std::string& property) const {
  for (const auto& r : results)
    if (r.property == property) return &r;
  return nullptr;
}

Budget::Budget(const Config& cfg) : conflicts_(cfg.conflict_budget) {
  if (cfg.timeout_ms > 0) deadline_ = std::chrono::steady_clock::now() + std::chrono::milliseconds(cfg.timeout_ms);
}

void Budget::check() const {
  if (deadline_ && std::chrono::steady_clock::now() > *deadline_) throw ResourceExhausted("timeout");
}

Session::Session(const SsaForm& ssa, const Budget& budget, Stats* stats)
    : budget_(&budget), stats_(stats), bb_(solver_) {
  solver_.set_conflict_budget(budget.conflicts());
  for (const auto& d : ssa.defs) bb_.define(d.symbol, d.term);
  for (const auto& [g, c] : ssa.assumptions) bb_.assert_term(mk_implies(g, c));
}

SolveResult Session::solve(const std::vector<Lit>& assumptions) {
  budget_->check();
  if (stats_) ++stats_->solver_calls;
  return solver_.solve(std::span<const Lit>(assumptions));
}

std::vector<std::string> properties(const TypedProgram& p, const Config& cfg) {
  std::vector<std::string> out;
  for_each_stmt(p.program.body, [&](const Stmt& s) {
    if (s.kind == Stmt::Kind::Assert && cfg.check_assertions) out.push_back(property_for_assert(s.assert_id));
    if (!cfg.check_memsafety) return;
    if ((s.expr && reads_heap(*s.expr)) || s.lhs.field) {
      out.push_back(mem_property(MemErrorKind::NullDeref, s.loc));
      out.push_back(mem_property(MemErrorKind::UseAfterFree, s.loc));
    }
    if (s.kind == Stmt::Kind::Free) {
      out.push_back(mem_property(MemErrorKind::NullFree, s.loc));
      out.push_back(mem_property(MemErrorKind::DoubleFree, s.loc));
    }
  });
  if (cfg.check_leak) {
    bool mallocs = false;
    for_each_stmt(p.program.body, [&](const Stmt& s) { mallocs = mallocs || s.kind == Stmt::Kind::Malloc; });
    if (mallocs) out.push_back("leak");
  }
  return out;
}

Term violation(const SsaForm& ssa, const std::string& property) {
  std::vector<Term> alts;
  for (const auto& a : ssa.assertions)
    if (a.property == property) alts.push_back(mk_and(a.guard, mk_not(a.cond)));
  return mk_or(alts);
}

Term invariant_in(const LoopInvariant& inv, const Frame& f) {
  if (inv.tmpl.empty()) return mk_true();
  if (inv.paths.entries.empty()) return mk_false();
  return mk_and(covered(inv.paths, f), aggregate_power(inv.paths, inv.tmpl, f));
}

namespace {

const LoopBinder& binder_of(const SsaForm& ssa, int loop) {
  for (const auto& b : ssa.loops)
    if (b.loop == loop) return b;
  throw std::logic_error("no binder for loop " + std::to_string(loop));
}

}  // namespace

Term invariant_assumption(const SsaForm& ssa, const std::vector<LoopInvariant>& invs) {
  std::vector<Term> parts;
  for (const auto& inv : invs) {
    const LoopBinder& b = binder_of(ssa, inv.loop);
    parts.push_back(mk_implies(mk_var(b.binder, Sort::boolean()), invariant_in(inv, map_frame(b.hat))));
  }
  return mk_and(parts);
}

Term invariant_violation(const SsaForm& ssa, const std::vector<LoopInvariant>& invs) {
  std::vector<Term> alts;
  for (const auto& inv : invs) {
    const LoopBinder& b = binder_of(ssa, inv.loop);
    alts.push_back(mk_and(b.entry_guard, mk_not(invariant_in(inv, map_frame(b.entry)))));
    alts.push_back(mk_and(b.back_guard, mk_not(invariant_in(inv, map_frame(b.end)))));
  }
  return mk_or(alts);
}

Synthesis synthesize_invariants(Session& s, const SsaForm& ssa, const Config& cfg, Stats* stats) {
  Synthesis out;
  for (const auto& b : ssa.loops) {
    LoopInvariant inv;
    inv.loop = b.loop;
    inv.origin = b.origin;
    inv.tmpl = make_template(ssa, b, cfg.domains);
    out.loops.push_back(std::move(inv));
  }

  auto bound_now = [&] {
    std::uint64_t total = 0;
    for (const auto& inv : out.loops)
      total += static_cast<std::uint64_t>(inv.paths.entries.size()) * (chain_bound(inv.tmpl) + 1);
    return total;
  };

  for (;;) {
    Lit act = s.fresh();
    s.guarded(act, invariant_assumption(ssa, out.loops));
    s.guarded(act, invariant_violation(ssa, out.loops));
    SolveResult r = s.solve({act});
    if (r == SolveResult::ResourceLimit) {
      out.status = Synthesis::Status::ResourceLimit;
      break;
    }
    if (r == SolveResult::Unsat) break;

    Model m = s.model();
    bool progressed = false;
    for (auto& inv : out.loops) {
      if (inv.tmpl.empty()) continue;
      const LoopBinder& b = binder_of(ssa, inv.loop);
      for (int target = 0; target < 2; ++target) {
        const Term& guard = target == 0 ? b.entry_guard : b.back_guard;
        const auto& frame = target == 0 ? b.entry : b.end;
        if (!is_true_in(m, guard) || is_true_in(m, invariant_in(inv, map_frame(frame)))) continue;
        std::map<std::string, std::int64_t> point;
        SymbolicPath path;
        for (const auto& base : b.bases) {
          point[base] = eval(m, frame.at(base));
          if (cfg.paths && base.rfind("$e", 0) == 0) path.literals[std::stoi(base.substr(2))] = point[base] != 0;
        }
        Param* q = inv.paths.find(path);
        if (!q) {
          if (inv.paths.entries.size() >= cfg.path_cap) {
            out.status = Synthesis::Status::PathCapReached;
            return out;
          }
          inv.paths.entries.emplace_back(path, bottom(inv.tmpl));
          q = &inv.paths.entries.back().second;
        }
        Param joined = join_model(inv.tmpl, *q, [&](const std::string& base) -> std::optional<std::int64_t> {
          auto it = point.find(base);
          if (it == point.end()) return std::nullopt;
          return it->second;
        });
        if (joined == *q || !leq(inv.tmpl, *q, joined)) throw std::logic_error("refinement did not ascend");
        *q = std::move(joined);
        progressed = true;
      }
    }
    if (!progressed) throw std::logic_error("counterexample to induction has no violated target");
    ++out.iterations;
    if (stats) ++stats->refinements;
    if (out.iterations > bound_now()) throw std::logic_error("refinement exceeded its chain bound");
  }
  out.bound = bound_now();
  return out;
}

bool is_inductive(const SsaForm& ssa, const std::vector<LoopInvariant>& invs, const Budget& budget) {
  Session s(ssa, budget);
  Lit act = s.fresh();
  s.guarded(act, invariant_assumption(ssa, invs));
  s.guarded(act, invariant_violation(ssa, invs));
  return s.solve({act}) == SolveResult::Unsat;
}

Trace extract_trace(const SsaForm& ssa, const Model& m) {
  Trace t;
  for (const auto& [node, loc] : ssa.steps) {
    auto g = ssa.guards.find(node);
    if (g == ssa.guards.end() || !m.value(g->second).value_or(0)) continue;
    TraceStep step{loc, {}};
    for (const auto& in : ssa.inputs)
      if (in.node == node && is_true_in(m, in.guard)) step.nondet.push_back(m.value(in.symbol).value_or(0));
    t.steps.push_back(std::move(step));
  }
  return t;
}

namespace {

std::string path_key(const SymbolicPath& p) { return p.to_string(); }

class Verifier {
 public:
  Verifier(const TypedProgram& p, const Config& cfg) : p_(p), cfg_(cfg), budget_(cfg) {
    for (const auto& prop : properties(p, cfg)) {
      PropertyResult r;
      r.property = prop;
      report_.results.push_back(std::move(r));
    }
  }

  Report run() {
    auto start = std::chrono::steady_clock::now();
    bool resources = false;
    Synthesis::Status synth_status = Synthesis::Status::Ok;
    try {
      for (int k = 1; k <= cfg_.k_max && undecided() > 0; ++k) {
        report_.stats.k = k;
        resources |= !refute(k);
        if (undecided() == 0 || !has_loops(p_)) break;
        synth_status = prove(k);
      }
    } catch (const ResourceExhausted&) {
      resources = true;
    }
    const bool loops = has_loops(p_);
    for (auto& r : report_.results) {
      if (r.verdict != Verdict::Unknown) continue;
      if (r.property == "leak" && loops)
        r.reason = UnknownReason::LeakWithLoops;
      else if (resources || synth_status == Synthesis::Status::ResourceLimit)
        r.reason = UnknownReason::ResourceLimit;
      else if (synth_status == Synthesis::Status::PathCapReached)
        r.reason = UnknownReason::PathCapReached;
      else
        r.reason = UnknownReason::KMaxReached;
    }
    report_.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(report_);
  }

 private:
  std::size_t undecided() const {
    return static_cast<std::size_t>(std::count_if(report_.results.begin(), report_.results.end(),
                                                  [](const auto& r) { return r.verdict == Verdict::Unknown; }));
  }

  SsaForm encode(int k, UnwindMode mode) const {
    TypedProgram u = unwind(p_, k, mode);
    Cfg c = build_cfg(u);
    return to_ssa(c, find_loops(c), cfg_.encode());
  }

  // Bounded refutation; returns false if a solver call ran out of budget.
  bool refute(int k) {
    SsaForm ssa = encode(k, UnwindMode::Precise);
    Session s(ssa, budget_, &report_.stats);
    bool complete = true;
    SolveResult exceeded = s.solve({s.lit(mk_or(ssa.unwind_checks))});
    if (exceeded == SolveResult::ResourceLimit) complete = false;
    const bool fully_unwound = exceeded == SolveResult::Unsat;
    InterpOptions io{cfg_.width, cfg_.malloc_may_fail};

    for (auto& r : report_.results) {
      if (r.verdict != Verdict::Unknown) continue;
      Lit viol = s.lit(violation(ssa, r.property));
      Lit act = s.fresh();
      bool blocked = false;
      for (int attempt = 0; attempt <= kMaxBlockedTraces; ++attempt) {
        SolveResult res = s.solve({viol, act});
        if (res == SolveResult::ResourceLimit) {
          complete = false;
          break;
        }
        if (res == SolveResult::Unsat) {
          if (fully_unwound && !blocked) decide(r, Verdict::True, k);
          break;
        }
        if (attempt == kMaxBlockedTraces) break;
        Model m = s.model();
        Trace t = extract_trace(ssa, m);
        std::optional<std::string> hit;
        try {
          ExecOutcome o = replay(p_, t, io);
          hit = o.violated_property();
          t.final_state = o.final_state;
        } catch (const TraceMismatch&) {
        }
        if (hit && *hit == r.property) {
          t.violated = r.property;
          decide(r, Verdict::False, k);
          r.trace = std::move(t);
          break;
        }
        // The model does not correspond to a real execution; exclude its
        // input choices for this property only.
        std::vector<Term> same;
        for (const auto& in : ssa.inputs) {
          if (!is_true_in(m, in.guard)) continue;
          Term v = mk_var(in.symbol, ssa.symbols.at(in.symbol));
          Term val = v.sort().is_bool() ? mk_bool(eval(m, v) != 0) : mk_int(eval(m, v), v.sort().width);
          same.push_back(mk_and(in.guard, mk_eq(v, val)));
        }
        s.guarded(act, mk_not(mk_and(same)));
        blocked = true;
        ++report_.stats.blocked_traces;
      }
    }
    return complete;
  }

  Synthesis::Status prove(int k) {
    SsaForm ssa = encode(k, UnwindMode::Overapprox);
    Session s(ssa, budget_, &report_.stats);
    Synthesis syn = synthesize_invariants(s, ssa, cfg_, &report_.stats);
    report_.invariants = syn.loops;
    for (const auto& inv : syn.loops)
      report_.stats.max_paths = std::max(report_.stats.max_paths, inv.paths.entries.size());
    if (syn.status != Synthesis::Status::Ok) return syn.status;

    ++report_.stats.inductive_checks;
    if (!is_inductive(ssa, syn.loops, budget_)) {
      ++report_.stats.inductive_failures;
      return Synthesis::Status::Ok;
    }
    Lit inv = s.fresh();
    s.guarded(inv, invariant_assumption(ssa, syn.loops));
    for (auto& r : report_.results) {
      if (r.verdict != Verdict::Unknown || r.property == "leak") continue;
      if (s.solve({inv, s.lit(violation(ssa, r.property))}) == SolveResult::Unsat) decide(r, Verdict::True, k);
    }
    return Synthesis::Status::Ok;
  }

  static void decide(PropertyResult& r, Verdict v, int k) {
    r.verdict = v;
    r.reason = UnknownReason::None;
    r.k = k;
  }

  const TypedProgram& p_;
  Config cfg_;
  Budget budget_;
  Report report_;
};

}  // namespace

Report kiki(const TypedProgram& p, const Config& cfg) { return Verifier(p, cfg).run(); }

std::string dump_invariants(const std::vector<LoopInvariant>& invs) {
  std::ostringstream os;
  for (const auto& inv : invs) {
    if (inv.tmpl.empty()) {
      os << "INVARIANT loop " << inv.loop << " path {}\n  true\n";
      continue;
    }
    for (const auto& [path, q] : inv.paths.entries) {
      os << "INVARIANT loop " << inv.loop << " path " << path_key(path) << "\n";
      auto rows = describe(inv.tmpl, q);
      if (rows.empty()) os << "  true\n";
      for (const auto& row : rows) os << "  " << row << "\n";
    }
  }
  return os.str();
}

}  // namespace kiki
