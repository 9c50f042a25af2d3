// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <queue>
#include <sstream>

#include "kiki/interpreter.hpp"
#include "kiki/ssa.hpp"

namespace kiki {

HeapConfig EncodeOptions::heap() const {
  HeapConfig h;
  h.width = width;
  h.materialize = true;
  h.recency = !check_memsafety && !check_leak;
  h.track_freed = check_memsafety;
  h.track_leak = check_leak;
  h.memsafety_props = check_memsafety;
  h.malloc_may_fail = malloc_may_fail;
  return h;
}

const StateVar* SsaForm::state_var(const std::string& base) const {
  for (const auto& v : state)
    if (v.base == base) return &v;
  return nullptr;
}

bool SsaForm::is_free(const std::string& symbol) const {
  if (!symbols.count(symbol)) return false;
  for (const auto& d : defs)
    if (d.symbol == symbol) return false;
  return true;
}

namespace {

std::string loop_flag(int origin) { return "$e" + std::to_string(origin); }

using State = std::map<std::string, Term>;

bool same_value(const Term& a, const Term& b) {
  if (a.id() == b.id()) return true;
  if (a.op() == Op::Var && b.op() == Op::Var) return a.name() == b.name();
  if (a.is_const() && b.is_const()) return a.op() == b.op() && a.value() == b.value() && a.sort() == b.sort();
  return false;
}

class SsaBuilder : public HeapEncoder {
 public:
  SsaBuilder(const Cfg& c, const LoopInfo& li, const EncodeOptions& opts)
      : c_(c), li_(li), opts_(opts), heap_(*c.program, opts.heap()) {
    out_.width = opts.width;
    out_.addresses = heap_.addresses();
  }

  SsaForm run() {
    init_state();
    std::map<int, std::pair<Term, State>> edge_out;  // edge index -> (guard, state)
    for (const auto& node : c_.nodes) {
      node_ = node.id;
      loc_ = node.loc;
      if (node.id == c_.entry) {
        cur_ = init_;
        guard_ = define_guard(node.id, mk_true());
        out_.guards[node.id] = guard_.name();
      } else {
        enter(node, edge_out);
      }
      Term branch_cond = mk_true();
      visit(node, branch_cond);
      if (node.stmt && node.kind != CfgNode::Kind::Mark) out_.steps.emplace_back(node.id, node.loc);
      Term out_guard = guard_;
      if (!(out_guard.op() == Op::Var) && !out_guard.is_const())
        out_guard = define("$ok", std::to_string(node.id), out_guard);
      for (int ei : c_.out_edges(node.id)) {
        const auto& e = c_.edges[static_cast<std::size_t>(ei)];
        Term g = out_guard;
        if (e.cond == CfgEdge::Cond::WhenTrue) g = mk_and(g, branch_cond);
        if (e.cond == CfgEdge::Cond::WhenFalse) g = mk_and(g, mk_not(branch_cond));
        edge_out[ei] = {g, cur_};
        if (li_.is_back_edge(ei)) record_back_edge(e.to, g, cur_);
      }
    }
    out_.end_state = cur_;
    return std::move(out_);
  }

  // HeapEncoder
  Term get(const std::string& base) override { return cur_.at(base); }
  void set(const std::string& base, const Term& value) override { cur_[base] = define(base, next_version(base), value); }
  Term choice(const std::string& prefix, Sort sort) override { return fresh("$" + prefix, sort); }
  Term input(const std::string& prefix, Sort sort, int bits) override {
    Term v = fresh("$" + prefix, sort);
    out_.inputs.push_back({v.name(), loc_, node_, guard_, bits});
    return v;
  }
  void check(const std::string& property, const Term& cond, bool record) override {
    if (record) out_.assertions.push_back({property, loc_, node_, guard_, cond});
    guard_ = mk_and(guard_, cond);
  }
  int width() const override { return opts_.width; }

 private:
  void add_state(const std::string& base, Sort sort, StateVar::Kind kind, const std::string& record, const Term& init,
                 const std::string& guard = "") {
    out_.state.push_back({base, sort, kind, record, guard});
    init_[base] = define(base, "0", init);
    versions_[base] = 0;
  }

  void init_state() {
    const Program& p = c_.program->program;
    for (const auto& v : p.vars) {
      if (v.type.is_int())
        add_state(v.name, Sort::integer(opts_.width), StateVar::Kind::Program, "", mk_int(0, opts_.width));
      else
        add_state(v.name, heap_.addr_sort(), StateVar::Kind::Program, v.type.record, heap_.null());
    }
    for (const auto& hv : heap_.state()) {
      bool ghost = !hv.base.empty() && hv.base[0] == '$';
      add_state(hv.base, hv.sort, ghost ? StateVar::Kind::Ghost : StateVar::Kind::Field, hv.record, hv.init, hv.guard);
    }
    std::set<int> origins;
    for (const auto& n : c_.nodes) {
      if (n.kind == CfgNode::Kind::Mark) origins.insert(n.loop);
    }
    for (int o : origins) add_state(loop_flag(o), Sort::boolean(), StateVar::Kind::Ghost, "", mk_false());
    if (c_.program) live_ = live_at_loops(c_.program->program);
  }

  std::string next_version(const std::string& base) { return std::to_string(++versions_[base]); }

  Term define(const std::string& base, const std::string& version, const Term& t) {
    std::string sym = base + "#" + version;
    out_.defs.push_back({sym, t});
    out_.symbols[sym] = t.sort();
    return mk_var(sym, t.sort());
  }

  Term fresh(const std::string& prefix, Sort sort) {
    std::string sym = prefix + "#" + std::to_string(++fresh_[prefix]);
    out_.symbols[sym] = sort;
    return mk_var(sym, sort);
  }

  Term define_guard(int node, const Term& t) { return define("$g", std::to_string(node), t); }

  State merge(const std::vector<std::pair<Term, const State*>>& in) {
    if (in.size() == 1) return *in[0].second;
    State s;
    for (const auto& [base, v0] : *in[0].second) {
      bool same = true;
      for (std::size_t j = 1; j < in.size() && same; ++j) same = same_value(in[j].second->at(base), v0);
      if (same) {
        s[base] = v0;
        continue;
      }
      Term v = in.back().second->at(base);
      for (std::size_t j = in.size() - 1; j-- > 0;) v = mk_mux(in[j].first, in[j].second->at(base), v);
      s[base] = define(base, next_version(base), v);
    }
    return s;
  }

  void enter(const CfgNode& node, const std::map<int, std::pair<Term, State>>& edge_out) {
    std::vector<std::pair<Term, const State*>> in;
    std::vector<Term> gs;
    for (int ei : c_.in_edges(node.id)) {
      if (li_.is_back_edge(ei)) continue;
      auto it = edge_out.find(ei);
      if (it == edge_out.end()) continue;
      in.emplace_back(it->second.first, &it->second.second);
      gs.push_back(it->second.first);
    }
    Term g = define_guard(node.id, gs.empty() ? mk_false() : mk_or(gs));
    out_.guards[node.id] = g.name();
    guard_ = g;
    cur_ = in.empty() ? init_ : merge(in);
    if (const auto* loop = li_.header_of(node.id)) cut(*loop, g);
  }

  void cut(const LoopInfo::Loop& loop, const Term& entry_guard) {
    LoopBinder b;
    b.loop = loop.id;
    b.origin = loop.origin;
    b.header = loop.header;
    b.entry_guard = entry_guard;
    Term binder = fresh("$b" + std::to_string(loop.id), Sort::boolean());
    b.binder = binder.name();
    const auto& live = live_[loop.origin];
    for (const auto& v : out_.state) {
      if (v.kind == StateVar::Kind::Program && !live.count(v.base)) continue;
      b.bases.push_back(v.base);
      std::string hat_sym = v.base + "#hat" + std::to_string(loop.id);
      out_.symbols[hat_sym] = v.sort;
      Term hat = mk_var(hat_sym, v.sort);
      b.hat[v.base] = hat;
      b.entry[v.base] = cur_.at(v.base);
      cur_[v.base] = define(v.base, next_version(v.base), mk_mux(binder, hat, cur_.at(v.base)));
    }
    b.back_guard = mk_false();
    out_.loops.push_back(std::move(b));
  }

  void record_back_edge(int header, const Term& g, const State& s) {
    for (auto& b : out_.loops) {
      if (b.header != header) continue;
      if (b.back_guard.is_false()) {
        for (const auto& base : b.bases) b.end[base] = s.at(base);
        b.back_guard = g;
      } else {
        for (const auto& base : b.bases)
          if (!same_value(b.end[base], s.at(base))) b.end[base] = define(base, next_version(base), mk_mux(g, s.at(base), b.end[base]));
        b.back_guard = mk_or(b.back_guard, g);
      }
    }
  }

  Term null() const { return heap_.null(); }

  std::string pointee(const std::string& var) const {
    const VarDecl* d = c_.program->program.var(var);
    return d->type.record;
  }

  Term expr(const Expr& e) {
    const int w = opts_.width;
    switch (e.kind) {
      case Expr::Kind::IntLit: return mk_int(wrap(e.value, w), w);
      case Expr::Kind::Null: return null();
      case Expr::Kind::Nondet: return input("nondet", Sort::integer(w), w);
      case Expr::Kind::Var: return cur_.at(e.name);
      case Expr::Kind::Field: return heap_.encode_read(*this, cur_.at(e.name), pointee(e.name), e.field, loc_);
      case Expr::Kind::Unary: {
        Term a = expr(*e.lhs);
        return e.unop == UnOp::Neg ? mk_neg(a) : mk_not(a);
      }
      case Expr::Kind::Binary: break;
    }
    if (e.binop == BinOp::And || e.binop == BinOp::Or) {
      Term a = expr(*e.lhs);
      Term before = guard_;
      bool is_and = e.binop == BinOp::And;
      Term rhs_guard = mk_and(before, is_and ? a : mk_not(a));
      guard_ = rhs_guard;
      Term b = expr(*e.rhs);
      if (guard_.id() == rhs_guard.id())
        guard_ = before;
      else
        guard_ = mk_or(mk_and(before, is_and ? mk_not(a) : a), guard_);
      return is_and ? mk_and(a, b) : mk_or(a, b);
    }
    Term a = expr(*e.lhs);
    Term b = expr(*e.rhs);
    switch (e.binop) {
      case BinOp::Add: return mk_add(a, b);
      case BinOp::Sub: return mk_sub(a, b);
      case BinOp::Mul:
        if (!a.is_const() && !b.is_const())
          throw SortError("line " + std::to_string(e.line) + ": multiplication needs a constant operand");
        return mk_mul(a, b);
      case BinOp::Eq: return mk_eq(a, b);
      case BinOp::Ne: return mk_neq(a, b);
      case BinOp::Lt: return mk_lt(a, b);
      case BinOp::Le: return mk_le(a, b);
      case BinOp::Gt: return mk_lt(b, a);
      case BinOp::Ge: return mk_le(b, a);
      default: break;
    }
    return mk_true();
  }

  void store(const LValue& lv, const Term& v) {
    if (!lv.field) {
      set(lv.var, v);
      return;
    }
    heap_.encode_write(*this, cur_.at(lv.var), pointee(lv.var), *lv.field, v, loc_);
  }

  void visit(const CfgNode& node, Term& branch_cond) {
    using K = CfgNode::Kind;
    const Stmt* s = node.stmt;
    switch (node.kind) {
      case K::Entry:
      case K::Skip: break;
      case K::Exit: heap_.emit_leak_check(*this); break;
      case K::Mark: set(loop_flag(node.loop), mk_true()); break;
      case K::Assign: {
        Term v = expr(*s->expr);
        store(s->lhs, v);
        break;
      }
      case K::Malloc: store(s->lhs, heap_.encode_malloc(*this, s->site_id)); break;
      case K::Free: {
        Term p = expr(*s->expr);
        heap_.encode_free(*this, p, s->expr->type.record, loc_);
        break;
      }
      case K::Assert: {
        Term c = expr(*s->expr);
        check(property_for_assert(s->assert_id), c, opts_.check_assertions);
        break;
      }
      case K::Assume: {
        Term c = expr(*s->expr);
        if (s->unwind_check)
          out_.unwind_checks.push_back(mk_and(guard_, mk_not(c)));
        else
          out_.assumptions.emplace_back(guard_, c);
        guard_ = mk_and(guard_, c);
        break;
      }
      case K::Branch: branch_cond = expr(*s->expr); break;
    }
  }

  const Cfg& c_;
  const LoopInfo& li_;
  EncodeOptions opts_;
  HeapModel heap_;
  SsaForm out_;
  State init_;
  State cur_;
  Term guard_;
  int node_ = 0;
  Loc loc_ = 0;
  std::map<std::string, int> versions_;
  std::map<std::string, int> fresh_;
  std::map<int, std::set<std::string>> live_;
};

std::pair<std::string, long> split_symbol(const std::string& sym) {
  auto pos = sym.rfind('#');
  std::string base = sym.substr(0, pos);
  long version = 0;
  try {
    version = std::stol(sym.substr(pos + 1));
  } catch (...) {
    version = -1;
  }
  return {base, version};
}

}  // namespace

SsaForm to_ssa(const Cfg& c, const LoopInfo& li, const EncodeOptions& opts) { return SsaBuilder(c, li, opts).run(); }

std::vector<const SsaDef*> sorted_defs(const SsaForm& s) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < s.defs.size(); ++i) {
    if (!index.emplace(s.defs[i].symbol, i).second)
      throw std::logic_error("symbol " + s.defs[i].symbol + " is defined twice");
  }
  std::vector<std::vector<std::size_t>> users(s.defs.size());
  std::vector<std::size_t> pending(s.defs.size(), 0);
  for (std::size_t i = 0; i < s.defs.size(); ++i) {
    for (const auto& [name, sort] : free_vars(s.defs[i].term)) {
      auto it = index.find(name);
      if (it == index.end()) continue;
      users[it->second].push_back(i);
      ++pending[i];
    }
  }
  using Key = std::tuple<std::string, long, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  auto push = [&](std::size_t i) {
    auto [base, version] = split_symbol(s.defs[i].symbol);
    ready.emplace(base, version, i);
  };
  for (std::size_t i = 0; i < s.defs.size(); ++i)
    if (pending[i] == 0) push(i);
  std::vector<const SsaDef*> out;
  while (!ready.empty()) {
    std::size_t i = std::get<2>(ready.top());
    ready.pop();
    out.push_back(&s.defs[i]);
    for (std::size_t u : users[i])
      if (--pending[u] == 0) push(u);
  }
  if (out.size() != s.defs.size()) throw std::logic_error("SSA definitions are cyclic");
  return out;
}

std::string dump(const SsaForm& s) {
  std::ostringstream os;
  for (const SsaDef* d : sorted_defs(s)) os << d->symbol << " := " << to_string(d->term) << "\n";
  return os.str();
}

}  // namespace kiki
