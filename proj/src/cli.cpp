#include "ric/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ric/error.hpp"
#include "ric/report.hpp"

namespace ric {

namespace {

struct Options {
  std::string command;
  std::string format = "text";
  std::string out;
  bool in_place = false;
  uint64_t seed = 0;
  int trials = 100;
  int assignment_cap = kDefaultAssignmentCap;
  bool no_refine_inputs = false;
  bool no_refine_clobbers = false;
  bool no_refine_memory = false;
  bool no_propagation = false;
  bool no_bit_liveness = false;
  bool timings = false;
  std::vector<std::string> chunk_files;
  std::vector<std::string> files;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Usage, path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool is_json_path(const std::string& p) { return p.size() >= 5 && p.compare(p.size() - 5, 5, ".json") == 0; }

ChunkReport error_report(const SourceSpan& span, const std::string& why) {
  ChunkReport r;
  r.chunk.span = span;
  r.result.verdict = Verdict::Error;
  r.result.reason = why;
  return r;
}

// One source file (or chunk file) and the reports produced for it.
struct Unit {
  std::string path;
  bool is_source = false;
  std::string text;
  std::vector<ChunkReport> reports;
  std::vector<std::vector<Edit>> applied;  // per report, edits to write back
};

class Driver {
 public:
  explicit Driver(const Options& o) : opt_(o) {
    check_.expression_propagation = !o.no_propagation;
    check_.bit_level_liveness = !o.no_bit_liveness;
    refine_.inputs = !o.no_refine_inputs;
    refine_.clobbers = !o.no_refine_clobbers;
    refine_.memory = !o.no_refine_memory;
    refine_.check = check_;
    trial_.trials = o.trials;
    trial_.seed = o.seed;
    trial_.assignment_cap = o.assignment_cap;
  }

  Unit load(const std::string& path, bool chunk_file) {
    Unit u;
    u.path = path;
    if (chunk_file) {
      std::vector<ChunkAst> chunks;
      try {
        chunks = load_chunk_file(path);
      } catch (const Error& e) {
        u.reports.push_back(error_report(SourceSpan{path, 1, 1, 0, 0}, e.what()));
        u.applied.emplace_back();
        return u;
      }
      for (ChunkAst& c : chunks) process(u, std::move(c));
      return u;
    }
    u.is_source = true;
    u.text = read_file(path);
    ScanResult scan = scan_c_source(u.text, path);
    struct Item {
      std::size_t at;
      std::optional<RawStatement> stmt;
      std::optional<ScanDiagnostic> diag;
    };
    std::vector<Item> items;
    for (auto& s : scan.statements) items.push_back({s.span.byte_start, s, std::nullopt});
    for (auto& d : scan.diagnostics) items.push_back({d.span.byte_start, std::nullopt, d});
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.at < b.at; });
    for (auto& it : items) {
      if (it.diag) {
        u.reports.push_back(error_report(it.diag->span, it.diag->message));
        u.applied.emplace_back();
        continue;
      }
      ChunkAst chunk;
      try {
        chunk = parse_asm_statement(*it.stmt);
      } catch (const Error& e) {
        u.reports.push_back(error_report(it.stmt->span, e.what()));
        u.applied.emplace_back();
        continue;
      }
      process(u, std::move(chunk));
    }
    return u;
  }

 private:
  void process(Unit& u, ChunkAst chunk) {
    ChunkReport r;
    std::vector<Edit> to_apply;
    auto t0 = Clock::now();
    r.result = check_chunk(chunk, check_);
    r.timings.check_ms = ms_since(t0);

    if (opt_.command == "patch" && r.result.verdict == Verdict::Issues) {
      t0 = Clock::now();
      PatchReport pr;
      pr.patch = synthesize_patches(chunk, r.result);
      to_apply = pr.patch.edits;
      finish_patch(u, chunk, pr, to_apply);
      r.patch = std::move(pr);
      r.timings.patch_ms = ms_since(t0);
    } else if (opt_.command == "refine" &&
               (r.result.verdict == Verdict::Issues || r.result.verdict == Verdict::Compliant)) {
      t0 = Clock::now();
      RefineOutcome ro = refine_chunk(chunk, refine_);
      if (ro.applicable) {
        to_apply = ro.patch.edits;
        for (const Edit& e : ro.refinements)
          if (!e.suggestion) to_apply.push_back(e);
      }
      if (!to_apply.empty()) {
        PatchReport pr;
        pr.patch = ro.patch;
        finish_patch(u, chunk, pr, to_apply);
        r.patch = std::move(pr);
      }
      r.refinements = std::move(ro);
      r.timings.refine_ms = ms_since(t0);
    } else if (opt_.command == "oracle" &&
               (r.result.verdict == Verdict::Issues || r.result.verdict == Verdict::Compliant)) {
      t0 = Clock::now();
      for (Analysis a : {Analysis::FrameWrite, Analysis::FrameRead, Analysis::Unicity}) {
        try {
          r.oracle.push_back(oracle_check(chunk, a, trial_));
        } catch (const Error& e) {
          OracleResult o;
          o.analysis = a;
          o.note = e.what();
          r.oracle.push_back(o);
        }
      }
      r.timings.oracle_ms = ms_since(t0);
    }
    r.chunk = std::move(chunk);
    u.reports.push_back(std::move(r));
    u.applied.push_back(std::move(to_apply));
  }

  void finish_patch(const Unit& u, const ChunkAst& chunk, PatchReport& pr, const std::vector<Edit>& edits) {
    pr.verification = verify_patch(chunk, edits, check_);
    try {
      pr.statement = render_statement(apply_edits(chunk, edits));
      if (u.is_source && chunk.layout) pr.diff = render_diff(u.text, u.path, chunk, edits);
    } catch (const Error& e) {
      pr.verification.note = e.what();
    }
  }

  const Options& opt_;
  CheckOptions check_;
  RefineOptions refine_;
  TrialConfig trial_;
};

// Applies every chunk's edits to its file, last statement first so earlier
// offsets stay valid.
void write_back(const Unit& u) {
  if (!u.is_source) return;
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < u.reports.size(); ++k)
    if (!u.applied[k].empty() && u.reports[k].chunk.layout) order.push_back(k);
  if (order.empty()) return;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return u.reports[a].chunk.layout->stmt_begin > u.reports[b].chunk.layout->stmt_begin;
  });
  std::string text = u.text;
  for (std::size_t k : order) text = apply_to_source(text, u.reports[k].chunk, u.applied[k]);
  if (text == u.text) return;
  std::ofstream out(u.path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Usage, u.path + ": cannot write file");
  out << text;
}

int exit_code(const std::vector<ChunkReport>& reports) {
  bool error = false, issues = false, scope = false;
  for (const ChunkReport& r : reports) {
    error = error || r.result.verdict == Verdict::Error;
    issues = issues || r.result.verdict == Verdict::Issues;
    scope = scope || r.result.verdict == Verdict::OutOfScope;
    for (const OracleResult& o : r.oracle) issues = issues || o.outcome == OracleOutcome::Violation;
  }
  return error ? 2 : issues ? 1 : scope ? 3 : 0;
}

bool color_enabled() {
  const char* v = std::getenv("RIC_COLOR");
  return v && std::string(v) == "1";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Interface compliance checker for GNU extended inline assembly (x86-32)", "ric"};
  app.add_option("command", opt.command, "check | patch | refine | oracle")
      ->required()
      ->check(CLI::IsMember({"check", "patch", "refine", "oracle"}));
  app.add_option("files", opt.files, "C sources or chunk JSON files");
  app.add_option("--format", opt.format, "report format")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--out", opt.out, "write the report to PATH");
  app.add_flag("--in-place", opt.in_place, "rewrite sources with the synthesized edits");
  app.add_option("--seed", opt.seed, "oracle seed");
  app.add_option("--trials", opt.trials, "oracle trials per analysis")->check(CLI::PositiveNumber);
  app.add_option("--assignment-cap", opt.assignment_cap, "token assignment enumeration cap")->check(CLI::PositiveNumber);
  app.add_flag("--no-refine-inputs", opt.no_refine_inputs, "keep unread inputs");
  app.add_flag("--no-refine-clobbers", opt.no_refine_clobbers, "keep unwritten clobbers");
  app.add_flag("--no-refine-memory", opt.no_refine_memory, "keep the memory keyword");
  app.add_flag("--no-propagation", opt.no_propagation, "disable expression propagation");
  app.add_flag("--no-bit-liveness", opt.no_bit_liveness, "use coarse liveness");
  app.add_flag("--timings", opt.timings, "include timings in the report");
  app.add_option("--chunks", opt.chunk_files, "chunk JSON file")->allow_extra_args(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ric: " << e.what() << "\n";
    return 2;
  }
  if (opt.in_place && opt.command != "patch" && opt.command != "refine") {
    err << "ric: --in-place requires the patch or refine command\n";
    return 2;
  }
  if (opt.files.empty() && opt.chunk_files.empty()) {
    err << "ric: no input files\n";
    return 2;
  }

  try {
    std::vector<std::pair<std::string, bool>> inputs;
    for (const auto& f : opt.files) inputs.emplace_back(f, is_json_path(f));
    for (const auto& f : opt.chunk_files) inputs.emplace_back(f, true);
    std::sort(inputs.begin(), inputs.end());
    inputs.erase(std::unique(inputs.begin(), inputs.end()), inputs.end());

    Driver driver(opt);
    std::vector<Unit> units;
    for (const auto& [path, chunk_file] : inputs) units.push_back(driver.load(path, chunk_file));

    std::vector<ChunkReport> reports;
    for (Unit& u : units) {
      if (opt.in_place) write_back(u);
      for (ChunkReport& r : u.reports) reports.push_back(std::move(r));
    }

    std::string text = opt.format == "json" ? render_json(reports, opt.timings)
                                            : render_text(report_json(reports, opt.timings), color_enabled());
    if (opt.out.empty()) {
      out << text;
    } else {
      std::ofstream f(opt.out, std::ios::binary | std::ios::trunc);
      if (!f) throw Error(ErrorKind::Usage, opt.out + ": cannot write report");
      f << text;
    }
    return exit_code(reports);
  } catch (const std::exception& e) {
    err << "ric: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ric
