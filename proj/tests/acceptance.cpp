// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "ric/cli.hpp"
#include "ric/error.hpp"
#include "ric/interface.hpp"
#include "ric/oracle.hpp"
#include "ric/patcher.hpp"
#include "ric/refiner.hpp"
#include "ric/report.hpp"

using namespace ric;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt_ms(double ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f ms", ms);
  return buf;
}

RegSet regs(std::initializer_list<Reg> rs) {
  RegSet s;
  for (Reg r : rs) s.insert(r);
  return s;
}

Outcome motivating_findings() {
  const ChunkAst c = testing::motivating_chunk();
  const auto t0 = Clock::now();
  const CheckResult r = check_chunk(c);
  const double ms = ms_since(t0);
  std::vector<const Issue*> serious;
  for (const Issue& i : r.issues)
    if (severity_of(i.category) == Severity::Serious) serious.push_back(&i);
  bool roic = false, unicity = false, restored_clean = true;
  for (const Issue* i : serious) {
    roic |= i->category == IssueCategory::ReadOnlyInputClobbered && i->location == Location::reg(Reg::edx);
    unicity |= i->category == IssueCategory::Unicity && i->location == Location::reg(Reg::ebx) && i->related &&
               *i->related == Location::token(0);
  }
  for (const Issue& i : r.issues) {
    if (analysis_of(i.category) != Analysis::FrameWrite) continue;
    restored_clean &= i.location != Location::reg(Reg::ebx) && i.location != Location::reg(Reg::esi) &&
                      i.location != Location::reg(Reg::edi);
  }
  const bool ok = serious.size() == 2 && roic && unicity && restored_clean && ms < 1000;
  return {ok, std::to_string(serious.size()) + " serious findings, " + fmt_ms(ms)};
}

Outcome interface_fidelity() {
  const FormalInterface fi = derive_interface(testing::motivating_chunk());
  bool ok = fi.outputs == std::set<int>{0, 1} && fi.inputs == std::set<int>{2, 3, 5, 6} && fi.canonical(4) == 1 &&
            fi.clobbered.size() == 0 && !fi.flags_clobbered && !fi.memory_separated;
  const std::map<int, Reg> fixed = {{1, Reg::eax}, {3, Reg::edx}, {5, Reg::ecx}, {6, Reg::edi}};
  for (const auto& [id, reg] : fixed) ok &= fi.token(id).fixed_register == reg;
  for (int id : {0, 2}) ok &= !fi.token(id).fixed_register;
  return {ok, "B_O={0,1} B_I={2,3,5,6} %4~%1 fixed {1:eax,3:edx,5:ecx,6:edi}"};
}

Outcome patch_round_trip() {
  const ChunkAst c = testing::motivating_chunk();
  const Patch p = synthesize_patches(c, check_chunk(c));
  bool dummy = false, ebx = false, only_expected = true;
  std::vector<Edit> edits;
  for (const Edit& e : p.edits) {
    if (e.suggestion) continue;
    edits.push_back(e);
    if (e.kind == Edit::Kind::AddOutput && e.constraint == "=d" && e.rebind_input) dummy = true;
    else if (e.kind == Edit::Kind::AddClobber && e.clobber == "ebx") ebx = true;
    else if (!(e.kind == Edit::Kind::AddClobber && e.clobber == "cc")) only_expected = false;
  }
  const PatchVerification v = verify_patch(c, edits);
  const ChunkAst after = apply_edits(c, edits);
  // The rebound input must carry the digit of the new output.
  bool matching = false;
  for (const OperandEntry& in : after.inputs)
    matching |= in.expr_text == "old_val2" && in.constraint == std::to_string(after.outputs.size() - 1);
  const bool ok = dummy && ebx && only_expected && matching && p.unresolved.empty() && v.framing_ok && v.fully_compliant;
  return {ok, std::to_string(edits.size()) + " edits, framing_ok=" + std::to_string(v.framing_ok) +
                  " fully_compliant=" + std::to_string(v.fully_compliant)};
}

Outcome letter_table() {
  const RegSet a = regs({Reg::eax}), b = regs({Reg::ebx}), c = regs({Reg::ecx}), d = regs({Reg::edx});
  const RegSet S = regs({Reg::esi}), D = regs({Reg::edi});
  const RegSet q = a | b | c | d, r = q | S | D | regs({Reg::ebp}), U = a | c | d;
  auto cls = [](RegSet s) {
    OperandClass o;
    o.registers = s;
    return o;
  };
  OperandClass imm, mem, addr, g = cls(r);
  imm.immediate = true;
  mem.memory = true;
  addr.address = true;
  g.immediate = g.memory = true;
  const std::vector<std::pair<char, OperandClass>> table = {
      {'a', cls(a)}, {'b', cls(b)}, {'c', cls(c)}, {'d', cls(d)}, {'S', cls(S)}, {'D', cls(D)}, {'U', cls(U)},
      {'q', cls(q)}, {'Q', cls(q)}, {'r', cls(r)}, {'R', cls(r)}, {'i', imm}, {'n', imm}, {'p', addr},
      {'m', mem},    {'g', g},
  };
  int matched = 0;
  for (const auto& [letter, expect] : table) matched += eval_letter(letter) == expect;
  bool unknown = false;
  try {
    eval_letter('x');
  } catch (const Error& e) {
    unknown = e.kind() == ErrorKind::UnknownLetter;
  }
  return {matched == static_cast<int>(table.size()) && unknown,
          std::to_string(matched) + "/" + std::to_string(table.size()) + " letters"};
}

Outcome oracle_soundness() {
  const auto chunks = testing::corpus();
  const auto t0 = Clock::now();
  int compliant = 0, bad = 0, inconclusive = 0, truncated = 0, confirmed = 0;
  for (const ChunkAst& c : chunks) {
    const CheckResult r = check_chunk(c);
    if (r.verdict != Verdict::Compliant && r.verdict != Verdict::Issues) continue;
    if (!r.program) continue;
    bool violated = false;
    for (Analysis an : {Analysis::FrameWrite, Analysis::FrameRead, Analysis::Unicity}) {
      const OracleResult o = oracle_check(c, an);
      violated |= o.outcome == OracleOutcome::Violation;
      if (r.verdict == Verdict::Compliant && o.outcome == OracleOutcome::Inconclusive)
        ++(o.truncated ? truncated : inconclusive);
    }
    if (r.verdict == Verdict::Compliant) {
      ++compliant;
      bad += violated;
    } else {
      confirmed += violated;
    }
  }
  const double ms = ms_since(t0);
  const bool ok = chunks.size() >= 60 && bad == 0 && ms < 60000;
  return {ok, std::to_string(chunks.size()) + " chunks, " + std::to_string(compliant) + " compliant, " +
                  std::to_string(bad) + " compliant-with-violation, " + std::to_string(truncated) +
                  " runs over the assignment cap, " + std::to_string(inconclusive) + " other inconclusive runs, " +
                  std::to_string(confirmed) + " flagged chunks confirmed, " + fmt_ms(ms)};
}

Outcome ablation() {
  const CheckOptions no_propagation{false, true}, coarse{true, false};
  const auto restore = load_chunk_file(testing::data_path("ablation_restore.json"));
  const auto subreg = load_chunk_file(testing::data_path("ablation_subreg.json"));
  int fw_off = 0, fw_on = 0, fr_off = 0, fr_on = 0;
  auto count = [](const CheckResult& r, Analysis a) {
    return static_cast<int>(std::count_if(r.issues.begin(), r.issues.end(),
                                          [&](const Issue& i) { return analysis_of(i.category) == a; }));
  };
  for (const ChunkAst& c : restore) {
    fw_on += count(check_chunk(c), Analysis::FrameWrite);
    fw_off += count(check_chunk(c, no_propagation), Analysis::FrameWrite) > 0;
  }
  for (const ChunkAst& c : subreg) {
    fr_on += count(check_chunk(c), Analysis::FrameRead);
    fr_off += count(check_chunk(c, coarse), Analysis::FrameRead) > 0;
  }
  const bool ok = restore.size() >= 5 && subreg.size() >= 5 && fw_on == 0 && fr_on == 0 &&
                  fw_off == static_cast<int>(restore.size()) && fr_off == static_cast<int>(subreg.size());
  return {ok, "restore: " + std::to_string(fw_off) + "/" + std::to_string(restore.size()) +
                  " alarmed without propagation, " + std::to_string(fw_on) + " alarms with; sub-register: " +
                  std::to_string(fr_off) + "/" + std::to_string(subreg.size()) + " alarmed coarse, " +
                  std::to_string(fr_on) + " alarms bit-level"};
}

Outcome refinement() {
  const ChunkAst tom = testing::source_chunks("libtomcrypt.c").at(0);
  const RefineOutcome out = refine_chunk(tom);
  bool m2e = false;
  for (const Edit& e : out.refinements)
    if (e.kind == Edit::Kind::MemoryToEntries && !e.entries.empty())
      m2e = std::all_of(e.entries.begin(), e.entries.end(),
                        [](const OperandEntry& oe) { return oe.constraint.find('m') != std::string::npos; });
  std::vector<Edit> all = out.patch.edits;
  all.insert(all.end(), out.refinements.begin(), out.refinements.end());
  const ChunkAst refined = apply_edits(tom, all);
  const bool no_memory =
      std::find(refined.clobbers.begin(), refined.clobbers.end(), "memory") == refined.clobbers.end();
  const bool recheck = check_chunk(refined).verdict == Verdict::Compliant;

  auto one_drop = [](const char* file, Edit::Kind kind) {
    const ChunkAst c = testing::source_chunks(file).at(0);
    const RefineOutcome o = refine_chunk(c);
    return o.refinements.size() == 1 && o.refinements[0].kind == kind;
  };
  const bool dead_input = one_drop("dead_input.c", Edit::Kind::DropInput);
  const bool dead_clobber = one_drop("dead_clobber.c", Edit::Kind::DropClobber);
  return {m2e && no_memory && recheck && dead_input && dead_clobber,
          std::string("MemoryToEntries=") + (m2e ? "yes" : "no") + " memory dropped=" + (no_memory ? "yes" : "no") +
              " recheck=" + (recheck ? "compliant" : "not compliant") + " dead input=" + (dead_input ? "1 drop" : "no") +
              " dead clobber=" + (dead_clobber ? "1 drop" : "no")};
}

Outcome throughput() {
  const auto chunks = testing::corpus();
  double total = 0, worst = 0;
  for (const ChunkAst& c : chunks) {
    const auto t0 = Clock::now();
    (void)check_chunk(c);
    const double ms = ms_since(t0);
    total += ms;
    worst = std::max(worst, ms);
  }
  const double mean = total / static_cast<double>(chunks.size());
  return {mean <= 100, "mean " + fmt_ms(mean) + ", max " + fmt_ms(worst)};
}

Outcome taxonomy() {
  const auto chunks = load_chunk_file(testing::data_path("taxonomy.json"));
  const auto labels = nlohmann::json::parse(testing::read_text(testing::data_path("taxonomy_labels.json")));
  std::set<std::string> cats_seen, pats_seen;
  int mismatches = 0;
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    const CheckResult r = check_chunk(chunks[k]);
    std::set<std::string> cats, pats;
    for (const Issue& i : r.issues) {
      cats.insert(to_string(i.category));
      const Pattern p = classify_pattern(i, chunks[k]).pattern;
      if (p != Pattern::None) pats.insert(to_string(p));
      const bool benign = severity_of(i.category) == Severity::Benign;
      mismatches += benign != (i.category == IssueCategory::FlagClobbered);
    }
    mismatches += cats != labels.at(k).at("categories").get<std::set<std::string>>();
    mismatches += pats != labels.at(k).at("patterns").get<std::set<std::string>>();
    cats_seen.insert(cats.begin(), cats.end());
    pats_seen.insert(pats.begin(), pats.end());
  }
  const bool ok = labels.size() == chunks.size() && mismatches == 0 && cats_seen.size() == 8 && pats_seen.size() == 6;
  return {ok, std::to_string(cats_seen.size()) + "/8 categories, " + std::to_string(pats_seen.size()) +
                  "/6 patterns, " + std::to_string(mismatches) + " label mismatches"};
}

std::string cli_output(std::vector<std::string> args) {
  args.insert(args.begin(), "ric");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return out.str();
}

Outcome determinism() {
  const std::vector<std::vector<std::string>> runs = {
      {"check", "--format", "json", "--chunks", testing::data_path("corpus.json")},
      {"patch", "--format", "json", testing::data_path("motivating.c")},
      {"refine", "--format", "json", testing::data_path("libtomcrypt.c")},
      {"oracle", "--format", "json", "--seed", "7", "--trials", "25", testing::data_path("motivating.c")},
  };
  int identical = 0;
  for (const auto& args : runs) {
    const std::string a = cli_output(args), b = cli_output(args);
    identical += !a.empty() && a == b;
  }
  return {identical == static_cast<int>(runs.size()),
          std::to_string(identical) + "/" + std::to_string(runs.size()) + " reports byte-identical"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"motivating chunk findings", motivating_findings},
      {"formal interface fidelity", interface_fidelity},
      {"patch round-trip", patch_round_trip},
      {"constraint letter table", letter_table},
      {"checker-oracle soundness", oracle_soundness},
      {"optimisation ablation", ablation},
      {"interface refinement", refinement},
      {"check throughput", throughput},
      {"taxonomy and severity", taxonomy},
      {"report determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (k + 1) << ". " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
