// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "differential.hpp"
#include "kiki/engine.hpp"

using namespace kiki;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);)
    if (!part.empty()) out.push_back(part);
  return out;
}

struct CorpusFile {
  std::string name;
  std::string source;
  TypedProgram typed;
  Config cfg;
  std::map<std::string, std::string> expect;
};

// Applies the per-file flags of `// ARGS:` lines.
void apply_args(Config& cfg, const std::string& line) {
  auto words = split(line, ' ');
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::string& w = words[i];
    auto next = [&] {
      if (i + 1 >= words.size()) throw std::runtime_error("flag " + w + " needs a value");
      return words[++i];
    };
    if (w == "--checks") {
      cfg.check_assertions = cfg.check_memsafety = cfg.check_leak = false;
      for (const auto& c : split(next(), ',')) {
        if (c == "assertions") cfg.check_assertions = true;
        else if (c == "memsafety") cfg.check_memsafety = true;
        else if (c == "leak") cfg.check_leak = true;
        else throw std::runtime_error("unknown check " + c);
      }
    } else if (w == "--domains") {
      cfg.domains.interval = cfg.domains.zones = cfg.domains.shape = false;
      for (const auto& d : split(next(), ',')) {
        if (d == "interval") cfg.domains.interval = true;
        else if (d == "zones") cfg.domains.zones = true;
        else if (d == "shape") cfg.domains.shape = true;
        else throw std::runtime_error("unknown domain " + d);
      }
    } else if (w == "--malloc-may-fail") {
      cfg.malloc_may_fail = true;
    } else if (w == "--no-paths") {
      cfg.paths = false;
    } else if (w == "--unwind-max") {
      cfg.k_max = std::stoi(next());
    } else {
      throw std::runtime_error("unsupported ARGS flag " + w);
    }
  }
}

std::vector<CorpusFile> load_corpus(const std::filesystem::path& dir) {
  std::vector<CorpusFile> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".mh") continue;
    CorpusFile p;
    p.name = e.path().filename().string();
    std::ifstream in(e.path());
    std::stringstream ss;
    ss << in.rdbuf();
    p.source = ss.str();
    p.typed = typecheck(parse(p.source));
    std::stringstream lines(p.source);
    for (std::string l; std::getline(lines, l);) {
      if (l.rfind("// ARGS:", 0) == 0) apply_args(p.cfg, l.substr(8));
      if (l.rfind("// EXPECT:", 0) == 0) {
        auto w = split(l.substr(10), ' ');
        if (w.size() == 2) p.expect[w[0]] = w[1];
      }
    }
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(), [](const CorpusFile& a, const CorpusFile& b) { return a.name < b.name; });
  return out;
}

const CorpusFile& named(const std::vector<CorpusFile>& corpus, const std::string& name) {
  for (const auto& p : corpus)
    if (p.name == name) return p;
  throw std::runtime_error("corpus lacks " + name);
}

template <class F>
auto parallel_map(const std::vector<CorpusFile>& corpus, F f) {
  using R = decltype(f(corpus.front()));
  std::vector<std::future<R>> futures;
  for (const auto& p : corpus) futures.push_back(std::async(std::launch::async, f, std::cref(p)));
  std::vector<R> out;
  for (auto& fu : futures) out.push_back(fu.get());
  return out;
}

bool replays(const CorpusFile& p, const Config& cfg, const PropertyResult& r) {
  if (!r.trace) return false;
  try {
    ExecOutcome o = replay(p.typed, *r.trace, InterpOptions{cfg.width, cfg.malloc_may_fail});
    auto v = o.violated_property();
    return v && *v == r.property;
  } catch (const TraceMismatch&) {
    return false;
  }
}

struct Line {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int n, const std::string& title, const Line& l) {
  std::cout << "ACCEPTANCE " << n << " " << (l.pass ? "PASS" : "FAIL") << " " << title << ": " << l.detail
            << std::endl;
  if (!l.pass) ++failures;
}

Line list_invariant(const std::vector<CorpusFile>& corpus) {
  const CorpusFile& p = named(corpus, "list_build_bounded_vals.mh");
  Config cfg = p.cfg;
  cfg.width = 8;
  auto t0 = Clock::now();
  Report r = kiki::kiki(p.typed, cfg);
  double secs = seconds_since(t0);
  std::string dump = dump_invariants(r.invariants);
  std::set<std::string> next_rows, val_rows;
  for (const auto& line : split(dump, '\n')) {
    std::string row = line.substr(line.find_first_not_of(' '));
    if (row.rfind("dyn1.next ", 0) == 0) next_rows.insert(row);
    if (row.rfind("dyn1.val ", 0) == 0) val_rows.insert(row);
  }
  const PropertyResult* a = r.find("assert.1");
  bool ok = a && a->verdict == Verdict::True && next_rows == std::set<std::string>{"dyn1.next in {NULL, &dyn1}"} &&
            val_rows == std::set<std::string>{"dyn1.val <= 10", "dyn1.val >= 1"} && secs < 10;
  std::ostringstream d;
  d << "verdict " << (a ? to_string(a->verdict, a->reason) : "missing") << ", rows";
  for (const auto& s : next_rows) d << " [" << s << "]";
  for (const auto& s : val_rows) d << " [" << s << "]";
  d << ", " << secs << " s";
  return {ok, d.str()};
}

Line shape_suite(const std::vector<CorpusFile>& corpus) {
  std::vector<CorpusFile> suite;
  for (const auto& p : corpus)
    if (p.name.rfind("sc_", 0) == 0) suite.push_back(p);
  auto runs = parallel_map(suite, [](const CorpusFile& p) {
    Config cfg = p.cfg;
    cfg.width = 8;
    cfg.k_max = 10;
    auto t0 = Clock::now();
    Report r = kiki::kiki(p.typed, cfg);
    double secs = seconds_since(t0);
    bool all_true = !r.results.empty();
    for (const auto& res : r.results) all_true &= res.verdict == Verdict::True;
    return std::pair{all_true && secs <= 60, secs};
  });
  int proven = 0;
  double worst = 0;
  std::string misses;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    if (runs[i].first) ++proven;
    else misses += " " + suite[i].name;
    worst = std::max(worst, runs[i].second);
  }
  std::ostringstream d;
  d << proven << "/" << suite.size() << " TRUE within 60 s, slowest " << worst << " s";
  if (!misses.empty()) d << ", not proven:" << misses;
  return {suite.size() == 10 && proven >= 9, d.str()};
}

struct SoundnessRun {
  int mismatches = 0;
  int falses = 0;
  int replayed = 0;
  std::size_t executions = 0;
  std::size_t exhausted = 0;
  std::string first;
};

// Nondeterministic bits enumerated per program: five 4-bit inputs.
constexpr std::size_t kOracleBits = 20;
constexpr std::size_t kOracleSteps = 400;

Line soundness(const std::vector<CorpusFile>& corpus) {
  auto t0 = Clock::now();
  auto runs = parallel_map(corpus, [](const CorpusFile& p) {
    Config cfg = p.cfg;
    cfg.width = 4;
    SoundnessRun s;
    std::set<std::string> violated;
    enumerate_executions(p.typed, kOracleSteps, kOracleBits, InterpOptions{4, cfg.malloc_may_fail},
                         [&](const Execution& e) {
                           ++s.executions;
                           if (e.outcome.kind == ExecOutcome::Kind::BudgetExhausted) ++s.exhausted;
                           if (auto v = e.outcome.violated_property()) violated.insert(*v);
                         });
    Report r = kiki::kiki(p.typed, cfg);
    for (const auto& res : r.results) {
      const bool v = violated.count(res.property) > 0;
      bool bad = (res.verdict == Verdict::True && v) || (res.verdict == Verdict::False && !v);
      if (res.verdict == Verdict::False) {
        ++s.falses;
        if (replays(p, cfg, res)) ++s.replayed;
        else bad = true;
      }
      if (bad) {
        ++s.mismatches;
        if (s.first.empty()) s.first = p.name + " " + res.property + " " + to_string(res.verdict, res.reason);
      }
    }
    return s;
  });
  double secs = seconds_since(t0);
  SoundnessRun total;
  for (const auto& s : runs) {
    total.mismatches += s.mismatches;
    total.falses += s.falses;
    total.replayed += s.replayed;
    total.executions += s.executions;
    total.exhausted += s.exhausted;
    if (total.first.empty()) total.first = s.first;
  }
  std::ostringstream d;
  d << corpus.size() << " programs at width 4, " << total.executions << " executions (" << total.exhausted
    << " cut off by the step or input-bit budget), " << total.mismatches << " mismatches, " << total.replayed << "/" << total.falses
    << " FALSE traces replay, " << secs << " s";
  if (!total.first.empty()) d << ", first: " << total.first;
  return {corpus.size() >= 30 && total.mismatches == 0 && total.replayed == total.falses && secs < 600, d.str()};
}

Line inductiveness(const std::vector<CorpusFile>& corpus) {
  struct Count {
    int invariants = 0, inductive = 0, over_bound = 0, skipped = 0;
  };
  auto runs = parallel_map(corpus, [](const CorpusFile& p) {
    Count c;
    Config cfg = p.cfg;
    for (int k = 1; k <= 3; ++k) {
      TypedProgram u = unwind(p.typed, k, UnwindMode::Overapprox);
      Cfg g = build_cfg(u);
      SsaForm ssa = to_ssa(g, find_loops(g), cfg.encode());
      if (ssa.loops.empty()) break;
      Budget budget(cfg);
      Session s(ssa, budget);
      Synthesis syn = synthesize_invariants(s, ssa, cfg);
      if (syn.status != Synthesis::Status::Ok) {
        ++c.skipped;
        continue;
      }
      c.invariants += static_cast<int>(syn.loops.size());
      if (syn.iterations > syn.bound) ++c.over_bound;
      if (is_inductive(ssa, syn.loops, budget)) c.inductive += static_cast<int>(syn.loops.size());
    }
    return c;
  });
  Count total;
  for (const auto& c : runs) {
    total.invariants += c.invariants;
    total.inductive += c.inductive;
    total.over_bound += c.over_bound;
    total.skipped += c.skipped;
  }
  std::ostringstream d;
  d << total.inductive << "/" << total.invariants << " loop invariants inductive in a fresh session (k = 1..3), "
    << total.over_bound << " syntheses over the chain bound, " << total.skipped << " stopped by limits";
  return {total.invariants > 0 && total.inductive == total.invariants && total.over_bound == 0, d.str()};
}

Line solver_differential() {
  auto cnf = differential::cnf_rounds(2024, 500);
  auto terms = differential::term_rounds(1000);
  std::ostringstream d;
  d << cnf.agree << "/" << cnf.total << " 3-CNFs, " << terms.agree << "/" << terms.total << " word-level terms";
  if (cnf.first_mismatch) d << ", first CNF mismatch: " << *cnf.first_mismatch;
  if (terms.first_mismatch) d << ", first term mismatch: " << *terms.first_mismatch;
  return {cnf.total == 500 && cnf.all() && terms.total == 1000 && terms.all(), d.str()};
}

Line memory_safety(const std::vector<CorpusFile>& corpus) {
  bool ok = true;
  std::ostringstream d;
  for (const char* name : {"mem_null_deref.mh", "mem_use_after_free.mh", "mem_double_free.mh", "mem_leak_no_free.mh"}) {
    const CorpusFile& p = named(corpus, name);
    Report r = kiki::kiki(p.typed, p.cfg);
    int expected = 0, refuted = 0;
    for (const auto& [prop, verdict] : p.expect) {
      if (verdict != "FALSE") continue;
      ++expected;
      const PropertyResult* res = r.find(prop);
      if (res && res->verdict == Verdict::False && replays(p, p.cfg, *res)) ++refuted;
    }
    ok &= expected > 0 && refuted == expected;
    d << name << " " << refuted << "/" << expected << " FALSE with replay; ";
  }
  auto leak_of = [&](const char* name) {
    const CorpusFile& p = named(corpus, name);
    const PropertyResult* r = kiki::kiki(p.typed, p.cfg).find("leak");
    return r ? to_string(r->verdict, r->reason) : std::string("missing");
  };
  std::string freed = leak_of("mem_malloc_free_ok.mh");
  std::string looped = leak_of("mem_leak_unbounded_loop.mh");
  d << "malloc+free leak " << freed << "; unbounded loop leak " << looped;
  ok &= freed == "TRUE" && looped == "UNKNOWN(LeakWithLoops)";
  return {ok, d.str()};
}

Line path_precision(const std::vector<CorpusFile>& corpus) {
  const CorpusFile& p = named(corpus, "paths_alloc_in_loop.mh");
  auto run = [&](bool paths) {
    Config cfg = p.cfg;
    cfg.paths = paths;
    auto t0 = Clock::now();
    Report r = kiki::kiki(p.typed, cfg);
    const PropertyResult* a = r.find("assert.1");
    return std::pair{a ? to_string(a->verdict, a->reason) : std::string("missing"), seconds_since(t0)};
  };
  auto [with, t_with] = run(true);
  auto [without, t_without] = run(false);
  std::ostringstream d;
  d << "paths " << with << " (" << t_with << " s), no paths " << without << " (" << t_without << " s)";
  return {with == "TRUE" && without.rfind("UNKNOWN", 0) == 0 && t_with < 10 && t_without < 10, d.str()};
}

Line monotonicity(const std::vector<CorpusFile>& corpus) {
  auto runs = parallel_map(corpus, [](const CorpusFile& p) {
    Config cfg = p.cfg;
    Report lo = kiki::kiki(p.typed, cfg);
    cfg.k_max += 1;
    Report hi = kiki::kiki(p.typed, cfg);
    std::pair<int, std::string> flips{0, ""};
    int decided = 0;
    for (const auto& r : lo.results) {
      if (r.verdict == Verdict::Unknown) continue;
      ++decided;
      const PropertyResult* h = hi.find(r.property);
      if (!h || h->verdict != r.verdict) {
        ++flips.first;
        if (flips.second.empty()) flips.second = p.name + " " + r.property;
      }
    }
    return std::tuple{decided, flips.first, flips.second};
  });
  int decided = 0, flips = 0;
  std::string first;
  for (const auto& [d, f, name] : runs) {
    decided += d;
    flips += f;
    if (first.empty()) first = name;
  }
  std::ostringstream d;
  d << decided << " decided verdicts at the default k bound, " << flips << " changed at one more";
  if (!first.empty()) d << ", first: " << first;
  return {decided > 0 && flips == 0, d.str()};
}

template <class F>
Line guarded(F f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("error: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : KIKI_CORPUS_DIR;
  std::vector<CorpusFile> corpus = load_corpus(dir);
  report(1, "list invariant", guarded([&] { return list_invariant(corpus); }));
  report(2, "shape and content suite", guarded([&] { return shape_suite(corpus); }));
  report(3, "soundness", guarded([&] { return soundness(corpus); }));
  report(4, "inductiveness", guarded([&] { return inductiveness(corpus); }));
  report(5, "solver differential", guarded([&] { return solver_differential(); }));
  report(6, "memory safety", guarded([&] { return memory_safety(corpus); }));
  report(7, "symbolic paths", guarded([&] { return path_precision(corpus); }));
  report(8, "monotonicity", guarded([&] { return monotonicity(corpus); }));
  return failures == 0 ? 0 : 1;
}
