// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include "kiki/interpreter.hpp"

#include <deque>

namespace kiki {

std::int64_t wrap(std::int64_t v, int width) {
  const std::uint64_t mask = width >= 64 ? ~0ULL : ((1ULL << width) - 1);
  std::uint64_t u = static_cast<std::uint64_t>(v) & mask;
  if (width < 64 && (u >> (width - 1)) & 1ULL) u |= ~mask;
  return static_cast<std::int64_t>(u);
}

std::string mem_property(MemErrorKind kind, Loc loc) {
  switch (kind) {
    case MemErrorKind::NullDeref: return "null-deref." + std::to_string(loc);
    case MemErrorKind::UseAfterFree: return "freed-deref." + std::to_string(loc);
    case MemErrorKind::NullFree: return "null-free." + std::to_string(loc);
    case MemErrorKind::DoubleFree: return "freed-free." + std::to_string(loc);
  }
  return "?";
}

std::optional<std::string> ExecOutcome::violated_property() const {
  switch (kind) {
    case Kind::AssertViolation: return property;
    case Kind::MemError: return mem_property(mem, loc);
    case Kind::Leak: return std::string("leak");
    default: return std::nullopt;
  }
}

std::string ExecOutcome::describe() const {
  switch (kind) {
    case Kind::Terminated: return "Terminated";
    case Kind::AssertViolation: return "AssertViolation(" + property + ")";
    case Kind::MemError: return "MemError(" + mem_property(mem, loc) + ")";
    case Kind::Leak: return "Leak(site " + std::to_string(site) + ")";
    case Kind::BudgetExhausted: return "BudgetExhausted";
  }
  return "?";
}

namespace {

/// Supplies nondeterministic values; returns nullopt when none is available.
using Chooser = std::function<std::optional<std::int64_t>(Loc loc, int bits)>;

struct Halt {
  std::optional<ExecOutcome> outcome;  // empty: execution blocked by assume
};

struct Object {
  int site = 0;
  bool alive = true;
  std::map<std::string, std::int64_t> fields;
};

class Machine {
 public:
  Machine(const TypedProgram& p, const InterpOptions& opts, std::size_t step_budget, Chooser choose)
      : p_(p.program), opts_(opts), step_budget_(step_budget), choose_(std::move(choose)) {
    for (const auto& v : p_.vars) vars_[v.name] = 0;
  }

  std::optional<ExecOutcome> run() {
    try {
      exec(p_.body);
    } catch (Halt& h) {
      return h.outcome;
    }
    for (std::size_t id = 1; id < heap_.size(); ++id) {
      if (heap_[id].alive) {
        ExecOutcome o = make(ExecOutcome::Kind::Leak, 0);
        o.site = heap_[id].site;
        for (std::size_t j = id + 1; j < heap_.size(); ++j)
          if (heap_[j].alive) o.site = std::min(o.site, heap_[j].site);
        return o;
      }
    }
    return make(ExecOutcome::Kind::Terminated, 0);
  }

  const std::vector<TraceStep>& steps() const { return steps_; }

 private:
  ExecOutcome make(ExecOutcome::Kind kind, Loc loc) const {
    ExecOutcome o;
    o.kind = kind;
    o.loc = loc;
    o.final_state = vars_;
    return o;
  }

  [[noreturn]] void mem_error(MemErrorKind kind, Loc loc) {
    ExecOutcome o = make(ExecOutcome::Kind::MemError, loc);
    o.mem = kind;
    throw Halt{o};
  }

  void step(Loc loc) {
    if (++steps_taken_ > step_budget_) throw Halt{make(ExecOutcome::Kind::BudgetExhausted, 0)};
    steps_.push_back({loc, {}});
  }

  std::int64_t nondet(Loc loc, int bits) {
    auto v = choose_(loc, bits);
    if (!v) throw Halt{make(ExecOutcome::Kind::BudgetExhausted, 0)};
    steps_.back().nondet.push_back(*v);
    return *v;
  }

  Object& deref(std::int64_t ptr, Loc loc) {
    if (ptr == 0) mem_error(MemErrorKind::NullDeref, loc);
    Object& o = heap_.at(static_cast<std::size_t>(ptr));
    if (!o.alive) mem_error(MemErrorKind::UseAfterFree, loc);
    return o;
  }

  std::int64_t eval(const Expr& e, Loc loc) {
    const int w = opts_.width;
    switch (e.kind) {
      case Expr::Kind::IntLit: return wrap(e.value, w);
      case Expr::Kind::Null: return 0;
      case Expr::Kind::Nondet: return wrap(nondet(loc, w), w);
      case Expr::Kind::Var: return vars_.at(e.name);
      case Expr::Kind::Field: return deref(vars_.at(e.name), loc).fields.at(e.field);
      case Expr::Kind::Unary: {
        std::int64_t v = eval(*e.lhs, loc);
        return e.unop == UnOp::Neg ? wrap(-v, w) : (v ? 0 : 1);
      }
      case Expr::Kind::Binary: {
        if (e.binop == BinOp::And) return eval(*e.lhs, loc) ? (eval(*e.rhs, loc) ? 1 : 0) : 0;
        if (e.binop == BinOp::Or) return eval(*e.lhs, loc) ? 1 : (eval(*e.rhs, loc) ? 1 : 0);
        std::int64_t a = eval(*e.lhs, loc);
        std::int64_t b = eval(*e.rhs, loc);
        switch (e.binop) {
          case BinOp::Add: return wrap(a + b, w);
          case BinOp::Sub: return wrap(a - b, w);
          case BinOp::Mul: return wrap(static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b)), w);
          case BinOp::Eq: return a == b;
          case BinOp::Ne: return a != b;
          case BinOp::Lt: return a < b;
          case BinOp::Le: return a <= b;
          case BinOp::Gt: return a > b;
          case BinOp::Ge: return a >= b;
          default: break;
        }
      }
    }
    return 0;
  }

  void store(const LValue& lv, std::int64_t v, Loc loc) {
    if (!lv.field) {
      vars_[lv.var] = v;
      return;
    }
    deref(vars_.at(lv.var), loc).fields[*lv.field] = v;
  }

  void exec(const std::vector<Stmt>& body) {
    for (const auto& s : body) exec(s);
  }

  void exec(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Skip: step(s.loc); break;
      case Stmt::Kind::Assign: {
        step(s.loc);
        std::int64_t v = eval(*s.expr, s.loc);
        store(s.lhs, v, s.loc);
        break;
      }
      case Stmt::Kind::Malloc: {
        step(s.loc);
        std::int64_t addr = 0;
        bool fail = opts_.malloc_may_fail && nondet(s.loc, 1) != 0;
        if (!fail) {
          if (heap_.empty()) heap_.emplace_back();  // slot 0 is NULL
          Object o;
          o.site = s.site_id;
          for (const auto& [f, t] : p_.record(s.record)->fields) o.fields[f] = 0;
          heap_.push_back(std::move(o));
          addr = static_cast<std::int64_t>(heap_.size() - 1);
        }
        store(s.lhs, addr, s.loc);
        break;
      }
      case Stmt::Kind::Free: {
        step(s.loc);
        std::int64_t ptr = eval(*s.expr, s.loc);
        if (ptr == 0) mem_error(MemErrorKind::NullFree, s.loc);
        Object& o = heap_.at(static_cast<std::size_t>(ptr));
        if (!o.alive) mem_error(MemErrorKind::DoubleFree, s.loc);
        o.alive = false;
        break;
      }
      case Stmt::Kind::Assert: {
        step(s.loc);
        if (!eval(*s.expr, s.loc)) {
          ExecOutcome o = make(ExecOutcome::Kind::AssertViolation, s.loc);
          o.property = property_for_assert(s.assert_id);
          throw Halt{o};
        }
        break;
      }
      case Stmt::Kind::Assume:
        step(s.loc);
        if (!eval(*s.expr, s.loc)) throw Halt{std::nullopt};
        break;
      case Stmt::Kind::If:
        step(s.loc);
        if (eval(*s.expr, s.loc))
          exec(s.then_body);
        else
          exec(s.else_body);
        break;
      case Stmt::Kind::While:
        for (;;) {
          step(s.loc);
          if (!eval(*s.expr, s.loc)) break;
          exec(s.then_body);
        }
        break;
    }
  }

  const Program& p_;
  InterpOptions opts_;
  std::size_t step_budget_;
  Chooser choose_;
  std::map<std::string, std::int64_t> vars_;
  std::vector<Object> heap_;
  std::vector<TraceStep> steps_;
  std::size_t steps_taken_ = 0;
};

}  // namespace

void enumerate_executions(const TypedProgram& p, std::size_t step_budget, std::size_t nondet_bits,
                          const InterpOptions& opts, const std::function<void(const Execution&)>& visit) {
  // Odometer over the choice sequence: each run replays `prefix` and then
  // takes the smallest value for every further request.
  struct Choice {
    std::uint64_t index;
    std::uint64_t count;
  };
  std::vector<Choice> prefix;
  for (;;) {
    std::vector<Choice> taken;
    std::size_t bits_used = 0;
    Chooser chooser = [&](Loc, int bits) -> std::optional<std::int64_t> {
      if (bits_used + static_cast<std::size_t>(bits) > nondet_bits) return std::nullopt;
      bits_used += static_cast<std::size_t>(bits);
      std::uint64_t count = 1ULL << bits;
      std::uint64_t idx = taken.size() < prefix.size() ? prefix[taken.size()].index : 0;
      taken.push_back({idx, count});
      return bits == 1 ? static_cast<std::int64_t>(idx) : wrap(static_cast<std::int64_t>(idx), bits);
    };
    Machine m(p, opts, step_budget, chooser);
    auto outcome = m.run();
    if (outcome) visit(Execution{m.steps(), *outcome});
    while (!taken.empty() && taken.back().index + 1 == taken.back().count) taken.pop_back();
    if (taken.empty()) return;
    ++taken.back().index;
    prefix = std::move(taken);
  }
}

std::set<ExecOutcome> interpret_exhaustive(const TypedProgram& p, std::size_t step_budget, std::size_t nondet_bits,
                                           const InterpOptions& opts) {
  std::set<ExecOutcome> out;
  enumerate_executions(p, step_budget, nondet_bits, opts, [&](const Execution& e) { out.insert(e.outcome); });
  return out;
}

ExecOutcome replay(const TypedProgram& p, const Trace& t, const InterpOptions& opts, std::size_t step_budget) {
  std::set<Loc> locs;
  for_each_stmt(p.program.body, [&](const Stmt& s) { locs.insert(s.loc); });
  std::deque<std::pair<Loc, std::int64_t>> values;
  for (const auto& st : t.steps) {
    if (!locs.count(st.loc)) throw TraceMismatch("trace names unknown location " + std::to_string(st.loc));
    for (auto v : st.nondet) values.emplace_back(st.loc, v);
  }
  Chooser chooser = [&](Loc loc, int bits) -> std::optional<std::int64_t> {
    if (values.empty()) throw TraceMismatch("trace has no nondet value for location " + std::to_string(loc));
    auto [at, v] = values.front();
    if (at != loc)
      throw TraceMismatch("trace supplies a value for location " + std::to_string(at) + " but location " +
                          std::to_string(loc) + " requested one");
    values.pop_front();
    return bits == 1 ? (v != 0 ? 1 : 0) : wrap(v, bits);
  };
  Machine m(p, opts, step_budget, chooser);
  auto outcome = m.run();
  if (!outcome) throw TraceMismatch("trace leads to an execution blocked by assume");
  return *outcome;
}

}  // namespace kiki
