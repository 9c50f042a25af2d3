// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

// kiki-verify: verify one MiniHeap program, or a directory of them against
// their `// EXPECT:` headers.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "kiki/engine.hpp"

namespace fs = std::filesystem;
using namespace kiki;

namespace {

struct CliOptions {
  std::string input;
  bool corpus = false;
  Config config;
  std::string format = "text";
  bool dump_ssa = false;
  bool dump_invariants = false;
  std::string dump_dimacs;
  bool stats = false;
  int jobs = 0;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

// Registers the analysis flags. Shared by the top-level parser and by the
// per-file `// ARGS:` headers in corpus mode.
void add_analysis_flags(CLI::App& app, CliOptions& o, std::string& domains, std::string& checks) {
  app.add_option("--unwind-max", o.config.k_max, "Largest unwinding depth")->check(CLI::PositiveNumber);
  app.add_option("--width", o.config.width, "Integer width in bits")->check(CLI::IsMember({4, 8, 16, 32}));
  app.add_option("--domains", domains, "Comma-separated subset of interval,zones,shape");
  app.add_flag("--no-paths", [&o](std::int64_t) { o.config.paths = false; }, "Disable symbolic paths");
  app.add_option("--path-cap", o.config.path_cap, "Maximum symbolic paths per loop")->check(CLI::PositiveNumber);
  app.add_option("--checks", checks, "Comma-separated subset of assertions,memsafety,leak");
  app.add_flag("--malloc-may-fail", o.config.malloc_may_fail, "malloc may return NULL");
  app.add_option("--timeout-ms", o.config.timeout_ms, "Wall-clock limit per program");
  app.add_option("--conflict-budget", o.config.conflict_budget, "Conflicts allowed per solver call");
}

void apply_lists(CliOptions& o, const std::string& domains, const std::string& checks) {
  if (!domains.empty()) {
    DomainConfig d;
    d.interval = d.zones = d.shape = false;
    for (const auto& x : split(domains, ',')) {
      if (x == "interval") d.interval = true;
      else if (x == "zones") d.zones = true;
      else if (x == "shape") d.shape = true;
      else throw CLI::ValidationError("--domains", "unknown domain '" + x + "'");
    }
    o.config.domains = d;
  }
  if (!checks.empty()) {
    o.config.check_assertions = o.config.check_memsafety = o.config.check_leak = false;
    for (const auto& x : split(checks, ',')) {
      if (x == "assertions") o.config.check_assertions = true;
      else if (x == "memsafety") o.config.check_memsafety = true;
      else if (x == "leak") o.config.check_leak = true;
      else throw CLI::ValidationError("--checks", "unknown check '" + x + "'");
    }
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int exit_code(const Report& r) {
  bool unknown = false;
  for (const auto& x : r.results) {
    if (x.verdict == Verdict::False) return 10;
    if (x.verdict == Verdict::Unknown) unknown = true;
  }
  return unknown ? 20 : 0;
}

void print_report(std::ostream& os, const std::string& file, const Report& r, const CliOptions& o) {
  for (const auto& x : r.results) {
    const std::string verdict = to_string(x.verdict, x.reason);
    if (o.format == "tsv") {
      os << file << '\t' << x.property << '\t' << verdict << '\n';
      continue;
    }
    os << "RESULT " << x.property << ' ' << verdict << '\n';
    if (x.trace) {
      os << "TRACE\n";
      for (const auto& s : x.trace->steps) {
        os << "STEP " << s.loc;
        for (auto v : s.nondet) os << " nondet=" << v;
        os << '\n';
      }
    }
  }
  if (o.stats) {
    const auto& s = r.stats;
    os << "STATS k=" << s.k << " solver_calls=" << s.solver_calls << " refinements=" << s.refinements
       << " blocked_traces=" << s.blocked_traces << " paths=" << s.max_paths << " inductive_checks="
       << s.inductive_checks << " inductive_failures=" << s.inductive_failures << " seconds=" << s.seconds << '\n';
    for (const auto& x : r.results) os << "STATS " << x.property << " k=" << x.k << '\n';
  }
  if (o.dump_invariants) os << dump_invariants(r.invariants);
}

SsaForm first_ssa(const TypedProgram& p, const Config& cfg) {
  TypedProgram u = unwind(p, 1, UnwindMode::Overapprox);
  Cfg c = build_cfg(u);
  return to_ssa(c, find_loops(c), cfg.encode());
}

void write_dimacs_file(const std::string& path, const TypedProgram& p, const Config& cfg) {
  SsaForm ssa = first_ssa(p, cfg);
  Budget budget(cfg);
  Session s(ssa, budget);
  std::vector<Term> viol;
  for (const auto& prop : properties(p, cfg)) viol.push_back(violation(ssa, prop));
  Lit v = s.lit(mk_or(viol));
  std::vector<std::vector<Lit>> clauses = s.solver().problem_clauses();
  clauses.push_back({v});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_dimacs(out, s.solver().num_vars(), clauses);
}

int verify_file(const CliOptions& o) {
  TypedProgram p;
  try {
    p = typecheck(parse(read_file(o.input)));
  } catch (const std::exception& e) {
    std::cerr << o.input << ": " << e.what() << '\n';
    return 2;
  }
  if (o.dump_ssa) std::cout << dump(first_ssa(p, o.config));
  if (!o.dump_dimacs.empty()) write_dimacs_file(o.dump_dimacs, p, o.config);
  Report r = kiki::kiki(p, o.config);
  print_report(std::cout, o.input, r, o);
  return exit_code(r);
}

// ---- corpus mode ----

struct Expectation {
  std::map<std::string, std::string> verdicts;
  std::vector<std::string> args;
};

Expectation read_headers(const std::string& source) {
  Expectation e;
  std::stringstream ss(source);
  for (std::string line; std::getline(ss, line);) {
    auto take = [&](const std::string& tag) -> std::optional<std::string> {
      auto pos = line.find(tag);
      if (pos == std::string::npos || line.compare(0, 2, "//") != 0) return std::nullopt;
      return line.substr(pos + tag.size());
    };
    if (auto rest = take("EXPECT:")) {
      auto words = split(*rest, ' ');
      if (words.size() == 2) e.verdicts[words[0]] = words[1];
    } else if (auto rest = take("ARGS:")) {
      auto words = split(*rest, ' ');
      e.args.insert(e.args.end(), words.begin(), words.end());
    }
  }
  return e;
}

CliOptions with_args(const CliOptions& base, const std::vector<std::string>& args) {
  CliOptions o = base;
  if (args.empty()) return o;
  CLI::App app("file arguments");
  std::string domains, checks;
  add_analysis_flags(app, o, domains, checks);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  app.parse(reversed);
  apply_lists(o, domains, checks);
  return o;
}

struct FileOutcome {
  std::string text;
  int soundness = 0;
  int precision = 0;
  bool skipped = false;
};

bool decisive(const std::string& v) { return v == "TRUE" || v == "FALSE"; }

FileOutcome check_file(const fs::path& file, const CliOptions& base) {
  FileOutcome out;
  std::ostringstream os;
  std::string source = read_file(file);
  Expectation exp = read_headers(source);
  const std::string name = file.filename().string();
  if (exp.verdicts.empty()) {
    std::ostringstream warn;
    warn << "warning: " << name << " has no EXPECT header, skipped\n";
    out.text = warn.str();
    out.skipped = true;
    return out;
  }
  CliOptions o = with_args(base, exp.args);
  auto start = std::chrono::steady_clock::now();
  Report r = kiki::kiki(typecheck(parse(source)), o.config);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  for (const auto& [prop, want] : exp.verdicts) {
    const PropertyResult* got = r.find(prop);
    std::string have = got ? to_string(got->verdict, got->reason) : "MISSING";
    os << name << '\t' << prop << '\t' << want << '\t' << have << '\t' << ms << '\n';
    if (have == want) continue;
    if (decisive(want) && decisive(have))
      ++out.soundness;
    else
      ++out.precision;
  }
  out.text = os.str();
  return out;
}

int run_corpus(const CliOptions& o) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(o.input))
    if (entry.path().extension() == ".mh") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::size_t jobs = o.jobs > 0 ? static_cast<std::size_t>(o.jobs) : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<FileOutcome>> pending;
  std::vector<FileOutcome> results(files.size());
  std::size_t next = 0;
  while (next < files.size() || !pending.empty()) {
    while (next < files.size() && pending.size() < jobs) {
      pending.push_back(std::async(std::launch::async, [&o, f = files[next]] { return check_file(f, o); }));
      ++next;
    }
    // Collect in submission order so the output is deterministic.
    std::size_t done = next - pending.size();
    results[done] = pending.front().get();
    pending.erase(pending.begin());
  }

  int soundness = 0, precision = 0, skipped = 0;
  std::cout << "file\tproperty\texpected\tgot\tmillis\n";
  for (const auto& r : results) {
    (r.skipped ? std::cerr : std::cout) << r.text;
    soundness += r.soundness;
    precision += r.precision;
    skipped += r.skipped;
  }
  std::cerr << "corpus: " << files.size() << " files, " << skipped << " skipped, " << soundness
            << " soundness mismatches, " << precision << " precision mismatches\n";
  if (soundness) return 4;
  if (precision) return 3;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("kiki-verify: proves or refutes assertions and memory safety of MiniHeap programs");
  CliOptions o;
  std::string domains, checks;
  app.add_option("input", o.input, "Program file, or a directory in corpus mode")->required();
  app.add_flag("--corpus", o.corpus, "Check every .mh file of a directory against its EXPECT headers");
  add_analysis_flags(app, o, domains, checks);
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"text", "tsv"}));
  app.add_flag("--dump-ssa", o.dump_ssa, "Print the SSA form at unwinding depth 1");
  app.add_flag("--dump-invariants", o.dump_invariants, "Print the synthesized invariants");
  app.add_option("--dump-dimacs", o.dump_dimacs, "Write the clause store to a DIMACS file");
  app.add_flag("--stats", o.stats, "Print solver and refinement counters");
  app.add_option("--jobs", o.jobs, "Worker threads in corpus mode");
  try {
    app.parse(argc, argv);
    apply_lists(o, domains, checks);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (o.corpus || fs::is_directory(o.input)) return run_corpus(o);
    return verify_file(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
