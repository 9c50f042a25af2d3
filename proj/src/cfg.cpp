// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <functional>

#include "kiki/ssa.hpp"

namespace kiki {

std::vector<int> Cfg::out_edges(int node) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].from == node) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> Cfg::in_edges(int node) const {
  std::vector<int> in;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].to == node) in.push_back(static_cast<int>(i));
  return in;
}

namespace {

class CfgBuilder {
 public:
  using Pending = std::vector<std::pair<int, CfgEdge::Cond>>;

  explicit CfgBuilder(std::shared_ptr<const TypedProgram> p) { c_.program = std::move(p); }

  Cfg build() {
    c_.entry = add(CfgNode::Kind::Entry, nullptr);
    Pending out = block(c_.program->program.body, {{c_.entry, CfgEdge::Cond::Always}});
    c_.exit = add(CfgNode::Kind::Exit, nullptr);
    connect(out, c_.exit);
    return std::move(c_);
  }

 private:
  int add(CfgNode::Kind kind, const Stmt* s) {
    CfgNode n;
    n.id = static_cast<int>(c_.nodes.size());
    n.kind = kind;
    n.stmt = s;
    n.loc = s ? s->loc : 0;
    c_.nodes.push_back(n);
    return n.id;
  }

  void connect(const Pending& in, int to) {
    for (auto [from, cond] : in) c_.edges.push_back({from, to, cond});
  }

  Pending block(const std::vector<Stmt>& body, Pending in) {
    for (const auto& s : body) in = stmt(s, std::move(in));
    return in;
  }

  int mark(int loop, Pending in) {
    int m = add(CfgNode::Kind::Mark, nullptr);
    c_.nodes[static_cast<std::size_t>(m)].loop = loop;
    connect(in, m);
    return m;
  }

  Pending stmt(const Stmt& s, Pending in) {
    using K = CfgNode::Kind;
    switch (s.kind) {
      case Stmt::Kind::If: {
        int b = add(K::Branch, &s);
        connect(in, b);
        Pending then_in{{b, CfgEdge::Cond::WhenTrue}};
        if (s.unrolled_loop) then_in = {{mark(s.unrolled_loop, then_in), CfgEdge::Cond::Always}};
        Pending out = block(s.then_body, then_in);
        Pending else_out = block(s.else_body, {{b, CfgEdge::Cond::WhenFalse}});
        out.insert(out.end(), else_out.begin(), else_out.end());
        return out;
      }
      case Stmt::Kind::While: {
        int h = add(K::Branch, &s);
        c_.nodes[static_cast<std::size_t>(h)].loop = s.loop_id;
        c_.nodes[static_cast<std::size_t>(h)].origin_loop = s.origin_loop;
        connect(in, h);
        int m = mark(s.origin_loop, {{h, CfgEdge::Cond::WhenTrue}});
        connect(block(s.then_body, {{m, CfgEdge::Cond::Always}}), h);
        return {{h, CfgEdge::Cond::WhenFalse}};
      }
      case Stmt::Kind::Skip: return simple(K::Skip, s, in);
      case Stmt::Kind::Assign: return simple(K::Assign, s, in);
      case Stmt::Kind::Malloc: return simple(K::Malloc, s, in);
      case Stmt::Kind::Free: return simple(K::Free, s, in);
      case Stmt::Kind::Assert: return simple(K::Assert, s, in);
      case Stmt::Kind::Assume: return simple(K::Assume, s, in);
    }
    return in;
  }

  Pending simple(CfgNode::Kind kind, const Stmt& s, const Pending& in) {
    int n = add(kind, &s);
    connect(in, n);
    return {{n, CfgEdge::Cond::Always}};
  }

  Cfg c_;
};

}  // namespace

Cfg build_cfg(const TypedProgram& p) { return CfgBuilder(std::make_shared<const TypedProgram>(p)).build(); }

const LoopInfo::Loop* LoopInfo::find(int id) const {
  for (const auto& l : loops)
    if (l.id == id) return &l;
  return nullptr;
}

const LoopInfo::Loop* LoopInfo::header_of(int node) const {
  for (const auto& l : loops)
    if (l.header == node) return &l;
  return nullptr;
}

bool LoopInfo::is_back_edge(int edge) const {
  for (const auto& l : loops)
    if (l.back_edges.count(edge)) return true;
  return false;
}

LoopInfo find_loops(const Cfg& c) {
  const std::size_t n = c.nodes.size();
  std::vector<std::vector<int>> preds(n), succs(n);
  for (const auto& e : c.edges) {
    preds[static_cast<std::size_t>(e.to)].push_back(e.from);
    succs[static_cast<std::size_t>(e.from)].push_back(e.to);
  }

  // Iterative dominator sets; graphs here are small.
  std::vector<std::vector<bool>> dom(n, std::vector<bool>(n, true));
  dom[static_cast<std::size_t>(c.entry)].assign(n, false);
  dom[static_cast<std::size_t>(c.entry)][static_cast<std::size_t>(c.entry)] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t v = 0; v < n; ++v) {
      if (static_cast<int>(v) == c.entry) continue;
      std::vector<bool> d(n, true);
      if (preds[v].empty()) d.assign(n, false);
      for (int p : preds[v])
        for (std::size_t i = 0; i < n; ++i) d[i] = d[i] && dom[static_cast<std::size_t>(p)][i];
      d[v] = true;
      if (d != dom[v]) {
        dom[v] = std::move(d);
        changed = true;
      }
    }
  }

  // Retreating edges from a depth-first walk must all be back edges.
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<int> retreating;
  std::function<void(int)> dfs = [&](int v) {
    state[static_cast<std::size_t>(v)] = 1;
    for (int ei : c.out_edges(v)) {
      int w = c.edges[static_cast<std::size_t>(ei)].to;
      if (state[static_cast<std::size_t>(w)] == 1)
        retreating.push_back(ei);
      else if (state[static_cast<std::size_t>(w)] == 0)
        dfs(w);
    }
    state[static_cast<std::size_t>(v)] = 2;
  };
  dfs(c.entry);

  LoopInfo li;
  int next_id = 0;
  for (const auto& nd : c.nodes) next_id = std::max(next_id, nd.loop);
  std::map<int, LoopInfo::Loop> by_header;
  for (int ei : retreating) {
    const auto& e = c.edges[static_cast<std::size_t>(ei)];
    if (!dom[static_cast<std::size_t>(e.from)][static_cast<std::size_t>(e.to)])
      throw IrreducibleCfg("edge " + std::to_string(e.from) + " -> " + std::to_string(e.to) +
                           " re-enters a cycle that its target does not dominate");
    auto& l = by_header[e.to];
    l.header = e.to;
    l.back_edges.insert(ei);
    // Natural loop: the header plus everything reaching the latch without it.
    l.body.insert(e.to);
    std::vector<int> work{e.from};
    while (!work.empty()) {
      int v = work.back();
      work.pop_back();
      if (!l.body.insert(v).second) continue;
      for (int p : preds[static_cast<std::size_t>(v)]) work.push_back(p);
    }
  }
  for (auto& [h, l] : by_header) {
    const auto& hn = c.nodes[static_cast<std::size_t>(h)];
    l.id = hn.loop ? hn.loop : ++next_id;
    l.origin = hn.origin_loop ? hn.origin_loop : l.id;
    li.loops.push_back(l);
  }
  for (auto& l : li.loops) {
    std::size_t best = n + 1;
    for (const auto& o : li.loops) {
      if (o.id == l.id || o.body.size() <= l.body.size()) continue;
      if (!std::includes(o.body.begin(), o.body.end(), l.body.begin(), l.body.end())) continue;
      if (o.body.size() < best) {
        best = o.body.size();
        l.parent = o.id;
      }
    }
  }
  return li;
}

namespace {

Stmt unrolled(const Stmt& s, int k, UnwindMode mode, const std::vector<Stmt>& body) {
  Stmt residual;
  if (mode == UnwindMode::Overapprox) {
    residual = s;
    residual.then_body = body;
  } else {
    residual.kind = Stmt::Kind::Assume;
    residual.loc = s.loc;
    residual.line = s.line;
    auto neg = std::make_shared<Expr>();
    neg->kind = Expr::Kind::Unary;
    neg->unop = UnOp::Not;
    neg->lhs = s.expr;
    neg->type.kind = ExprType::Kind::Bool;
    neg->line = s.expr->line;
    neg->col = s.expr->col;
    residual.expr = neg;
    residual.unwind_check = true;
  }
  Stmt acc = residual;
  for (int i = 0; i < k; ++i) {
    Stmt iter;
    iter.kind = Stmt::Kind::If;
    iter.loc = s.loc;
    iter.line = s.line;
    iter.expr = s.expr;
    iter.unrolled_loop = s.origin_loop;
    iter.then_body = body;
    iter.then_body.push_back(std::move(acc));
    acc = std::move(iter);
  }
  return acc;
}

std::vector<Stmt> unwind_block(const std::vector<Stmt>& body, int k, UnwindMode mode) {
  std::vector<Stmt> out;
  for (const auto& s : body) {
    if (s.kind == Stmt::Kind::While) {
      out.push_back(unrolled(s, k, mode, unwind_block(s.then_body, k, mode)));
      continue;
    }
    Stmt c = s;
    c.then_body = unwind_block(s.then_body, k, mode);
    c.else_body = unwind_block(s.else_body, k, mode);
    out.push_back(std::move(c));
  }
  return out;
}

void renumber(std::vector<Stmt>& body, int& next) {
  for (auto& s : body) {
    if (s.kind == Stmt::Kind::While) s.loop_id = ++next;
    renumber(s.then_body, next);
    renumber(s.else_body, next);
  }
}

void collect_reads(const Expr& e, std::set<std::string>& out) {
  if (e.kind == Expr::Kind::Var || e.kind == Expr::Kind::Field) out.insert(e.name);
  if (e.lhs) collect_reads(*e.lhs, out);
  if (e.rhs) collect_reads(*e.rhs, out);
}

}  // namespace

TypedProgram unwind(const TypedProgram& p, int k, UnwindMode mode) {
  TypedProgram out = p;
  out.program.body = unwind_block(p.program.body, std::max(k, 0), mode);
  int next = 0;
  renumber(out.program.body, next);
  return out;
}

std::map<int, std::set<std::string>> live_at_loops(const Program& p) {
  struct Entry {
    Loc loc;
    std::set<std::string> reads;
  };
  std::vector<Entry> stmts;
  std::map<int, Loc> outer_loc;  // loop id -> location of its outermost enclosing loop
  std::function<void(const std::vector<Stmt>&, Loc)> walk = [&](const std::vector<Stmt>& body, Loc top) {
    for (const auto& s : body) {
      Entry e{s.loc, {}};
      if (s.expr) collect_reads(*s.expr, e.reads);
      if (s.lhs.field) e.reads.insert(s.lhs.var);
      stmts.push_back(std::move(e));
      // Unrolled iterations nest like the loop they came from.
      Loc t = top;
      if (s.kind == Stmt::Kind::While || s.unrolled_loop) {
        if (t == 0) t = s.loc;
        if (s.kind == Stmt::Kind::While) outer_loc[s.origin_loop] = t;
      }
      walk(s.then_body, t);
      walk(s.else_body, t);
    }
  };
  walk(p.body, 0);
  std::map<int, std::set<std::string>> live;
  for (const auto& [loop, top] : outer_loc) {
    auto& set = live[loop];
    for (const auto& e : stmts)
      if (e.loc >= top) set.insert(e.reads.begin(), e.reads.end());
  }
  return live;
}

}  // namespace kiki
