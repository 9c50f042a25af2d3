// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include "kiki/solver.hpp"

#include <algorithm>
#include <ostream>

namespace kiki {

namespace {

// Luby sequence 1 1 2 1 1 2 4 1 1 2 ...
double luby(double y, int x) {
  int size = 1;
  int seq = 0;
  while (size < x + 1) {
    ++seq;
    size = 2 * size + 1;
  }
  while (size - 1 != x) {
    size = (size - 1) >> 1;
    --seq;
    x = x % size;
  }
  double r = 1;
  for (int i = 0; i < seq; ++i) r *= y;
  return r;
}

}  // namespace

void write_dimacs(std::ostream& os, int var_count, const std::vector<std::vector<Lit>>& clauses) {
  os << "p cnf " << var_count << " " << clauses.size() << "\n";
  for (const auto& c : clauses) {
    for (Lit l : c) os << l.dimacs() << " ";
    os << "0\n";
  }
}

Solver::Solver() = default;

int Solver::new_var() {
  int v = num_vars();
  assigns_.push_back(kUndef);
  levels_.push_back(0);
  reasons_.push_back(-1);
  phase_.push_back(false);
  activity_.push_back(0.0);
  seen_.push_back(false);
  heap_pos_.push_back(-1);
  watches_.emplace_back();
  watches_.emplace_back();
  heap_insert(v);
  return v;
}

void Solver::add_clause(std::span<const Lit> lits) {
  problem_.emplace_back(lits.begin(), lits.end());
  for (Lit l : lits)
    while (l.var() >= num_vars()) new_var();
  if (!ok_) return;
  backtrack(0);
  std::vector<Lit> c(lits.begin(), lits.end());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  std::vector<Lit> keep;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i + 1 < c.size() && c[i + 1] == ~c[i]) return;  // tautology
    std::int8_t v = value(c[i]);
    if (v == kTrue) return;
    if (v == kUndef) keep.push_back(c[i]);
  }
  if (keep.empty()) {
    ok_ = false;
    return;
  }
  if (keep.size() == 1) {
    enqueue(keep[0], -1);
    if (propagate() >= 0) ok_ = false;
    return;
  }
  attach(std::move(keep), false);
}

int Solver::attach(std::vector<Lit> lits, bool learnt) {
  int idx = static_cast<int>(clauses_.size());
  watches_[static_cast<std::size_t>(lits[0].code)].push_back(idx);
  watches_[static_cast<std::size_t>(lits[1].code)].push_back(idx);
  clauses_.push_back(Clause{std::move(lits), learnt});
  return idx;
}

void Solver::enqueue(Lit l, int reason) {
  auto v = static_cast<std::size_t>(l.var());
  assigns_[v] = l.negated() ? kFalse : kTrue;
  levels_[v] = level();
  reasons_[v] = reason;
  trail_.push_back(l);
}

int Solver::propagate() {
  while (qhead_ < trail_.size()) {
    Lit p = trail_[qhead_++];
    Lit false_lit = ~p;
    ++stats_.propagations;
    auto& ws = watches_[static_cast<std::size_t>(false_lit.code)];
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ws.size()) {
      int ci = ws[i++];
      auto& c = clauses_[static_cast<std::size_t>(ci)].lits;
      if (c[0] == false_lit) std::swap(c[0], c[1]);
      if (value(c[0]) == kTrue) {
        ws[j++] = ci;
        continue;
      }
      bool moved = false;
      for (std::size_t k = 2; k < c.size(); ++k) {
        if (value(c[k]) != kFalse) {
          std::swap(c[1], c[k]);
          watches_[static_cast<std::size_t>(c[1].code)].push_back(ci);
          moved = true;
          break;
        }
      }
      if (moved) continue;
      ws[j++] = ci;
      if (value(c[0]) == kFalse) {
        while (i < ws.size()) ws[j++] = ws[i++];
        ws.resize(j);
        qhead_ = trail_.size();
        return ci;
      }
      enqueue(c[0], ci);
    }
    ws.resize(j);
  }
  return -1;
}

void Solver::bump(int v) {
  auto i = static_cast<std::size_t>(v);
  activity_[i] += var_inc_;
  if (activity_[i] > 1e100) {
    for (auto& a : activity_) a *= 1e-100;
    var_inc_ *= 1e-100;
  }
  if (heap_pos_[i] >= 0) heap_up(static_cast<std::size_t>(heap_pos_[i]));
}

void Solver::analyze(int conflict, std::vector<Lit>& learnt, int& back_level) {
  learnt.clear();
  learnt.push_back(Lit{});
  int path = 0;
  bool have_p = false;
  Lit p{};
  std::size_t idx = trail_.size();
  int ci = conflict;
  do {
    const auto& c = clauses_[static_cast<std::size_t>(ci)].lits;
    for (std::size_t k = have_p ? 1 : 0; k < c.size(); ++k) {
      Lit q = c[k];
      auto v = static_cast<std::size_t>(q.var());
      if (!seen_[v] && levels_[v] > 0) {
        bump(q.var());
        seen_[v] = true;
        if (levels_[v] >= level())
          ++path;
        else
          learnt.push_back(q);
      }
    }
    do {
      --idx;
    } while (!seen_[static_cast<std::size_t>(trail_[idx].var())]);
    p = trail_[idx];
    have_p = true;
    ci = reasons_[static_cast<std::size_t>(p.var())];
    seen_[static_cast<std::size_t>(p.var())] = false;
    --path;
  } while (path > 0);
  learnt[0] = ~p;

  // Local minimisation: drop literals implied by the rest of the clause.
  std::vector<Lit> kept{learnt[0]};
  for (std::size_t k = 1; k < learnt.size(); ++k) {
    int r = reasons_[static_cast<std::size_t>(learnt[k].var())];
    bool drop = r >= 0;
    if (drop) {
      const auto& rc = clauses_[static_cast<std::size_t>(r)].lits;
      for (std::size_t m = 1; m < rc.size(); ++m) {
        auto v = static_cast<std::size_t>(rc[m].var());
        if (!seen_[v] && levels_[v] > 0) {
          drop = false;
          break;
        }
      }
    }
    if (!drop) kept.push_back(learnt[k]);
  }
  for (std::size_t k = 1; k < learnt.size(); ++k) seen_[static_cast<std::size_t>(learnt[k].var())] = false;
  learnt = std::move(kept);

  back_level = 0;
  if (learnt.size() > 1) {
    std::size_t best = 1;
    for (std::size_t k = 2; k < learnt.size(); ++k)
      if (levels_[static_cast<std::size_t>(learnt[k].var())] > levels_[static_cast<std::size_t>(learnt[best].var())])
        best = k;
    std::swap(learnt[1], learnt[best]);
    back_level = levels_[static_cast<std::size_t>(learnt[1].var())];
  }
}

void Solver::backtrack(int lvl) {
  if (level() <= lvl) return;
  std::size_t stop = trail_lim_[static_cast<std::size_t>(lvl)];
  for (std::size_t k = trail_.size(); k-- > stop;) {
    auto v = static_cast<std::size_t>(trail_[k].var());
    phase_[v] = !trail_[k].negated();
    assigns_[v] = kUndef;
    reasons_[v] = -1;
    if (heap_pos_[v] < 0) heap_insert(static_cast<int>(v));
  }
  trail_.resize(stop);
  trail_lim_.resize(static_cast<std::size_t>(lvl));
  qhead_ = stop;
}

Lit Solver::pick_branch() {
  while (!heap_.empty()) {
    int v = heap_pop();
    if (assigns_[static_cast<std::size_t>(v)] == kUndef) return Lit::make(v, !phase_[static_cast<std::size_t>(v)]);
  }
  return Lit{-1};
}

void Solver::heap_insert(int v) {
  heap_pos_[static_cast<std::size_t>(v)] = static_cast<int>(heap_.size());
  heap_.push_back(v);
  heap_up(heap_.size() - 1);
}

int Solver::heap_pop() {
  int top = heap_[0];
  heap_pos_[static_cast<std::size_t>(top)] = -1;
  int last = heap_.back();
  heap_.pop_back();
  if (!heap_.empty()) {
    heap_[0] = last;
    heap_pos_[static_cast<std::size_t>(last)] = 0;
    heap_down(0);
  }
  return top;
}

void Solver::heap_up(std::size_t i) {
  int v = heap_[i];
  while (i > 0) {
    std::size_t parent = (i - 1) / 2;
    int pv = heap_[parent];
    bool before = heap_less(v, pv) || (activity_[static_cast<std::size_t>(v)] == activity_[static_cast<std::size_t>(pv)] && v < pv);
    if (!before) break;
    heap_[i] = pv;
    heap_pos_[static_cast<std::size_t>(pv)] = static_cast<int>(i);
    i = parent;
  }
  heap_[i] = v;
  heap_pos_[static_cast<std::size_t>(v)] = static_cast<int>(i);
}

void Solver::heap_down(std::size_t i) {
  int v = heap_[i];
  auto better = [&](int a, int b) {
    return heap_less(a, b) || (activity_[static_cast<std::size_t>(a)] == activity_[static_cast<std::size_t>(b)] && a < b);
  };
  for (;;) {
    std::size_t l = 2 * i + 1;
    if (l >= heap_.size()) break;
    std::size_t c = l;
    if (l + 1 < heap_.size() && better(heap_[l + 1], heap_[l])) c = l + 1;
    if (!better(heap_[c], v)) break;
    heap_[i] = heap_[c];
    heap_pos_[static_cast<std::size_t>(heap_[i])] = static_cast<int>(i);
    i = c;
  }
  heap_[i] = v;
  heap_pos_[static_cast<std::size_t>(v)] = static_cast<int>(i);
}

SolveResult Solver::solve(std::span<const Lit> assumptions) {
  ++stats_.solves;
  for (Lit a : assumptions)
    while (a.var() >= num_vars()) new_var();
  backtrack(0);
  if (!ok_) return SolveResult::Unsat;
  if (propagate() >= 0) {
    ok_ = false;
    return SolveResult::Unsat;
  }
  std::uint64_t conflicts = 0;
  std::uint64_t restart_at = 100;
  int restarts = 0;
  std::uint64_t since_restart = 0;
  std::vector<Lit> learnt;
  for (;;) {
    int confl = propagate();
    if (confl >= 0) {
      ++conflicts;
      ++since_restart;
      ++stats_.conflicts;
      if (level() == 0) {
        ok_ = false;
        return SolveResult::Unsat;
      }
      int back_level = 0;
      analyze(confl, learnt, back_level);
      backtrack(back_level);
      if (learnt.size() == 1) {
        enqueue(learnt[0], -1);
      } else {
        int ci = attach(learnt, true);
        enqueue(learnt[0], ci);
      }
      var_inc_ /= 0.95;
      if (conflicts >= conflict_budget_) {
        backtrack(0);
        return SolveResult::ResourceLimit;
      }
      continue;
    }
    if (since_restart >= restart_at) {
      since_restart = 0;
      restart_at = static_cast<std::uint64_t>(100 * luby(2, ++restarts));
      backtrack(0);
      continue;
    }
    Lit next{-1};
    while (static_cast<std::size_t>(level()) < assumptions.size()) {
      Lit a = assumptions[static_cast<std::size_t>(level())];
      std::int8_t v = value(a);
      if (v == kTrue) {
        trail_lim_.push_back(trail_.size());
      } else if (v == kFalse) {
        backtrack(0);
        return SolveResult::Unsat;
      } else {
        next = a;
        break;
      }
    }
    if (next.code < 0) {
      next = pick_branch();
      if (next.code < 0) {
        model_.assign(assigns_.size(), false);
        for (std::size_t v = 0; v < assigns_.size(); ++v) model_[v] = assigns_[v] == kTrue;
        backtrack(0);
        return SolveResult::Sat;
      }
      ++stats_.decisions;
    }
    trail_lim_.push_back(trail_.size());
    enqueue(next, -1);
  }
}

std::optional<std::int64_t> Model::value(const std::string& symbol) const {
  if (!var_map_) return std::nullopt;
  auto it = var_map_->find(symbol);
  if (it == var_map_->end()) return std::nullopt;
  const auto& lits = it->second;
  std::uint64_t u = 0;
  for (std::size_t i = 0; i < lits.size(); ++i)
    if (bit(lits[i])) u |= 1ULL << i;
  Sort s = sorts_->at(symbol);
  if (s.is_int()) {
    int w = s.width;
    if (w < 64 && ((u >> (w - 1)) & 1ULL)) u |= ~((1ULL << w) - 1);
  }
  return static_cast<std::int64_t>(u);
}

std::int64_t eval(const Model& m, const Term& t) { return evaluate(t, m.valuation()); }

void add_clauses(Solver& s, const Cnf& c) {
  while (s.num_vars() < c.var_count) s.new_var();
  for (const auto& cl : c.clauses) s.add_clause(cl);
}

}  // namespace kiki
