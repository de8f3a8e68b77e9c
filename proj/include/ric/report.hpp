#pragma once

// Severity policy, bad-practice pattern tags, per-run summaries and the
// JSON / text renderings of a run.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ric/checker.hpp"
#include "ric/oracle.hpp"
#include "ric/patcher.hpp"
#include "ric/refiner.hpp"

namespace ric {

enum class Severity { Benign, Serious };

const char* to_string(Severity s);
Severity severity_of(IssueCategory c);

enum class Pattern { None, P1, P2, P3, P4, P5, P6 };

const char* to_string(Pattern p);

struct PatternTag {
  Pattern pattern = Pattern::None;
  std::string rationale;
};

PatternTag classify_pattern(const Issue& issue, const ChunkAst& chunk);

struct ChunkTimings {
  double check_ms = 0;
  double patch_ms = 0;
  double refine_ms = 0;
  double oracle_ms = 0;
};

struct PatchReport {
  Patch patch;
  PatchVerification verification;
  std::string diff;
  std::string statement;  // the patched statement, rendered
};

struct ChunkReport {
  ChunkAst chunk;
  CheckResult result;
  std::optional<PatchReport> patch;
  std::optional<RefineOutcome> refinements;
  std::vector<OracleResult> oracle;
  ChunkTimings timings;
};

struct RunSummary {
  int chunks = 0;
  int compliant = 0;
  int benign_only = 0;
  int serious = 0;
  int out_of_scope = 0;
  int error = 0;
  std::map<std::string, int> per_category;
  std::map<std::string, int> per_severity;
  std::map<std::string, int> per_pattern;
  int oracle_violations = 0;
  double mean_check_ms = 0;
  double max_check_ms = 0;
  double total_ms = 0;
};

RunSummary summarize(const std::vector<ChunkReport>& reports);

nlohmann::ordered_json issue_json(const Issue& issue, const ChunkAst& chunk, const FormalInterface* fi);
nlohmann::ordered_json chunk_json(const ChunkReport& report, bool with_timings);
nlohmann::ordered_json summary_json(const RunSummary& s, bool with_timings);
nlohmann::ordered_json report_json(const std::vector<ChunkReport>& reports, bool with_timings);

std::string render_json(const std::vector<ChunkReport>& reports, bool with_timings);

/// Human-oriented view derived from the JSON report.
std::string render_text(const nlohmann::ordered_json& report, bool color);

}  // namespace ric
