#include "ric/report.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace ric {

using nlohmann::ordered_json;

const char* to_string(Severity s) { return s == Severity::Benign ? "benign" : "serious"; }

Severity severity_of(IssueCategory c) { return c == IssueCategory::FlagClobbered ? Severity::Benign : Severity::Serious; }

const char* to_string(Pattern p) {
  switch (p) {
    case Pattern::None: return "none";
    case Pattern::P1: return "P1";
    case Pattern::P2: return "P2";
    case Pattern::P3: return "P3";
    case Pattern::P4: return "P4";
    case Pattern::P5: return "P5";
    case Pattern::P6: return "P6";
  }
  return "none";
}

namespace {

bool uses_push_pop(const std::string& tmpl) {
  std::istringstream is(tmpl);
  std::string word;
  while (is >> word) {
    std::string w;
    for (char c : word)
      if (std::isalpha(static_cast<unsigned char>(c))) w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const char* m : {"push", "pushl", "pop", "popl", "pushw", "popw"})
      if (w == m) return true;
  }
  return false;
}

bool is_memory_category(IssueCategory c) {
  return c == IssueCategory::UnboundMemoryWrite || c == IssueCategory::UnboundMemoryRead;
}

}  // namespace

PatternTag classify_pattern(const Issue& issue, const ChunkAst& chunk) {
  const Location& l = issue.location;
  if (issue.category == IssueCategory::FlagClobbered) return {Pattern::P1, "flags written without \"cc\""};
  if (l.kind == Location::Kind::Reg && l.as_reg() == Reg::ebx) return {Pattern::P2, "ebx used without being declared"};
  const bool esp_finding = (l.kind == Location::Kind::Reg && l.as_reg() == Reg::esp) || l.kind == Location::Kind::Stack;
  if (esp_finding && uses_push_pop(chunk.asm_template)) return {Pattern::P3, "stack manipulated through push/pop"};
  if (is_memory_category(issue.category) && l.kind == Location::Kind::Memory && chunk.context.single_chunk_function.value_or(false))
    return {Pattern::P4, "memory accessed without \"memory\" in a single-chunk function"};
  if (l.kind == Location::Kind::VecReg) {
    if (l.id < 8) return {Pattern::P5, "MMX register written without being declared"};
    return {Pattern::P6, "XMM register written without being declared"};
  }
  return {};
}

RunSummary summarize(const std::vector<ChunkReport>& reports) {
  RunSummary s;
  s.chunks = static_cast<int>(reports.size());
  for (const ChunkReport& r : reports) {
    switch (r.result.verdict) {
      case Verdict::Compliant: ++s.compliant; break;
      case Verdict::OutOfScope: ++s.out_of_scope; break;
      case Verdict::Error: ++s.error; break;
      case Verdict::Issues: {
        bool serious = std::any_of(r.result.issues.begin(), r.result.issues.end(),
                                   [](const Issue& i) { return severity_of(i.category) == Severity::Serious; });
        ++(serious ? s.serious : s.benign_only);
        break;
      }
    }
    for (const Issue& i : r.result.issues) {
      ++s.per_category[to_string(i.category)];
      ++s.per_severity[to_string(severity_of(i.category))];
      const Pattern p = classify_pattern(i, r.chunk).pattern;
      if (p != Pattern::None) ++s.per_pattern[to_string(p)];
    }
    for (const OracleResult& o : r.oracle)
      if (o.outcome == OracleOutcome::Violation) ++s.oracle_violations;
    const double total = r.timings.check_ms + r.timings.patch_ms + r.timings.refine_ms + r.timings.oracle_ms;
    s.total_ms += total;
    s.max_check_ms = std::max(s.max_check_ms, r.timings.check_ms);
    s.mean_check_ms += r.timings.check_ms;
  }
  if (s.chunks) s.mean_check_ms /= s.chunks;
  return s;
}

ordered_json issue_json(const Issue& issue, const ChunkAst& chunk, const FormalInterface* fi) {
  ordered_json j;
  j["category"] = to_string(issue.category);
  j["severity"] = to_string(severity_of(issue.category));
  const PatternTag tag = classify_pattern(issue, chunk);
  j["pattern"] = tag.pattern == Pattern::None ? ordered_json(nullptr) : ordered_json(to_string(tag.pattern));
  j["location"] = issue.location.to_string();
  if (issue.related) j["related"] = issue.related->to_string();
  j["point"] = issue.point;
  j["details"] = describe(issue, fi);
  return j;
}

namespace {

ordered_json edit_json(const Edit& e) {
  ordered_json j;
  j["kind"] = to_string(e.kind);
  j["edit"] = describe(e);
  if (e.position >= 0) j["position"] = e.position;
  if (!e.clobber.empty()) j["clobber"] = e.clobber;
  if (!e.constraint.empty()) j["constraint"] = e.constraint;
  if (!e.expr_text.empty()) j["expr"] = e.expr_text;
  if (!e.entries.empty()) {
    ordered_json list = ordered_json::array();
    for (const OperandEntry& oe : e.entries) list.push_back({{"constraint", oe.constraint}, {"expr", oe.expr_text}});
    j["entries"] = list;
  }
  j["suggestion"] = e.suggestion;
  j["reason"] = e.reason;
  return j;
}

ordered_json oracle_json(const OracleResult& o) {
  ordered_json j;
  j["analysis"] = to_string(o.analysis);
  j["outcome"] = to_string(o.outcome);
  j["trials"] = o.trials_run;
  j["conclusive"] = o.conclusive;
  j["truncated"] = o.truncated;
  if (!o.note.empty()) j["note"] = o.note;
  if (o.witness) {
    ordered_json w;
    w["trial"] = o.witness->trial;
    w["trial_seed"] = o.witness->trial_seed;
    w["assignment"] = o.witness->assignment;
    if (!o.witness->other_assignment.empty()) w["other_assignment"] = o.witness->other_assignment;
    w["detail"] = o.witness->detail;
    j["witness"] = w;
  }
  return j;
}

}  // namespace

ordered_json chunk_json(const ChunkReport& r, bool with_timings) {
  ordered_json j;
  const SourceSpan& sp = r.chunk.span;
  j["span"] = {{"file", sp.file}, {"line", sp.line}, {"column", sp.column}, {"byte_start", sp.byte_start}, {"byte_end", sp.byte_end}};
  j["verdict"] = to_string(r.result.verdict);
  if (!r.result.reason.empty()) j["reason"] = r.result.reason;
  const FormalInterface* fi = r.result.interface ? &*r.result.interface : nullptr;
  ordered_json issues = ordered_json::array();
  for (const Issue& i : r.result.issues) issues.push_back(issue_json(i, r.chunk, fi));
  j["issues"] = issues;

  if (r.patch) {
    ordered_json p;
    ordered_json edits = ordered_json::array();
    for (const Edit& e : r.patch->patch.edits) edits.push_back(edit_json(e));
    p["edits"] = edits;
    ordered_json unresolved = ordered_json::array();
    for (const Issue& i : r.patch->patch.unresolved) unresolved.push_back(issue_json(i, r.chunk, fi));
    p["unresolved"] = unresolved;
    p["verification"] = {{"framing_ok", r.patch->verification.framing_ok},
                         {"fully_compliant", r.patch->verification.fully_compliant},
                         {"interface_satisfiable", r.patch->verification.interface_satisfiable}};
    if (!r.patch->statement.empty()) p["statement"] = r.patch->statement;
    if (!r.patch->diff.empty()) p["diff"] = r.patch->diff;
    j["patch"] = p;
  }
  if (r.refinements) {
    ordered_json rf;
    rf["applicable"] = r.refinements->applicable;
    ordered_json fixes = ordered_json::array();
    for (const Edit& e : r.refinements->patch.edits) fixes.push_back(edit_json(e));
    rf["fixes"] = fixes;
    ordered_json edits = ordered_json::array();
    for (const Edit& e : r.refinements->refinements) edits.push_back(edit_json(e));
    rf["edits"] = edits;
    j["refinements"] = rf;
  }
  if (!r.oracle.empty()) {
    ordered_json o = ordered_json::array();
    for (const OracleResult& x : r.oracle) o.push_back(oracle_json(x));
    j["oracle_witness"] = o;
  }
  if (with_timings)
    j["timings"] = {{"check_ms", r.timings.check_ms},
                    {"patch_ms", r.timings.patch_ms},
                    {"refine_ms", r.timings.refine_ms},
                    {"oracle_ms", r.timings.oracle_ms}};
  return j;
}

ordered_json summary_json(const RunSummary& s, bool with_timings) {
  ordered_json j;
  j["chunks"] = s.chunks;
  j["compliant"] = s.compliant;
  j["benign_only"] = s.benign_only;
  j["serious"] = s.serious;
  j["out_of_scope"] = s.out_of_scope;
  j["error"] = s.error;
  auto counts = [](const std::map<std::string, int>& m) {
    ordered_json o = ordered_json::object();
    for (const auto& [k, v] : m) o[k] = v;
    return o;
  };
  j["per_category"] = counts(s.per_category);
  j["per_severity"] = counts(s.per_severity);
  j["per_pattern"] = counts(s.per_pattern);
  j["oracle_violations"] = s.oracle_violations;
  if (with_timings) j["timings"] = {{"mean_check_ms", s.mean_check_ms}, {"max_check_ms", s.max_check_ms}, {"total_ms", s.total_ms}};
  return j;
}

ordered_json report_json(const std::vector<ChunkReport>& reports, bool with_timings) {
  ordered_json j;
  j["schema"] = 1;
  ordered_json chunks = ordered_json::array();
  for (const ChunkReport& r : reports) chunks.push_back(chunk_json(r, with_timings));
  j["chunks"] = chunks;
  j["summary"] = summary_json(summarize(reports), with_timings);
  return j;
}

std::string render_json(const std::vector<ChunkReport>& reports, bool with_timings) {
  return report_json(reports, with_timings).dump(2) + "\n";
}

std::string render_text(const ordered_json& report, bool color) {
  auto paint = [&](const std::string& s, const char* code) { return color ? std::string("\x1b[") + code + "m" + s + "\x1b[0m" : s; };
  std::ostringstream os;
  for (const auto& c : report.at("chunks")) {
    const auto& sp = c.at("span");
    const std::string verdict = c.at("verdict").get<std::string>();
    const char* code = verdict == "compliant" ? "32" : verdict == "issues" ? "31" : "33";
    os << sp.at("file").get<std::string>() << ":" << sp.at("line").get<int>() << ":" << sp.at("column").get<int>() << ": "
       << paint(verdict, code);
    if (c.contains("reason")) os << " (" << c.at("reason").get<std::string>() << ")";
    os << "\n";
    for (const auto& i : c.at("issues")) {
      const std::string sev = i.at("severity").get<std::string>();
      os << "  [" << paint(sev, sev == "benign" ? "33" : "31") << "] " << i.at("details").get<std::string>();
      if (!i.at("pattern").is_null()) os << " (" << i.at("pattern").get<std::string>() << ")";
      os << "\n";
    }
    if (c.contains("patch")) {
      const auto& p = c.at("patch");
      for (const auto& e : p.at("edits")) os << "  fix: " << e.at("edit").get<std::string>() << "\n";
      for (const auto& u : p.at("unresolved")) os << "  unresolved: " << u.at("details").get<std::string>() << "\n";
      const auto& v = p.at("verification");
      os << "  verification: framing_ok=" << v.at("framing_ok").get<bool>()
         << " fully_compliant=" << v.at("fully_compliant").get<bool>()
         << " interface_satisfiable=" << v.at("interface_satisfiable").get<bool>() << "\n";
      if (p.contains("diff")) os << p.at("diff").get<std::string>();
    }
    if (c.contains("refinements")) {
      for (const auto& e : c.at("refinements").at("edits"))
        os << "  refine" << (e.at("suggestion").get<bool>() ? " (suggestion)" : "") << ": " << e.at("edit").get<std::string>()
           << "\n";
    }
    if (c.contains("oracle_witness")) {
      for (const auto& o : c.at("oracle_witness")) {
        os << "  oracle " << o.at("analysis").get<std::string>() << ": " << o.at("outcome").get<std::string>();
        if (o.contains("witness")) os << " (" << o.at("witness").at("detail").get<std::string>() << ")";
        os << "\n";
      }
    }
  }
  const auto& s = report.at("summary");
  os << s.at("chunks").get<int>() << " chunk(s): " << s.at("compliant").get<int>() << " compliant, "
     << s.at("benign_only").get<int>() << " benign only, " << s.at("serious").get<int>() << " serious, "
     << s.at("out_of_scope").get<int>() << " out of scope, " << s.at("error").get<int>() << " error\n";
  return os.str();
}

}  // namespace ric
