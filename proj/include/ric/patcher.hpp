#pragma once

// Interface edits: synthesis from checker findings, structural application,
// verification and rendering as a unified diff of the C source.

#include <optional>
#include <string>
#include <vector>

#include "ric/checker.hpp"
#include "ric/extraction.hpp"

namespace ric {

struct Edit {
  enum class Kind {
    AddClobber,
    AddOutput,
    AddInput,
    SetMemoryClobber,
    MarkEarlyClobber,
    PromoteToReadWrite,
    DropInput,
    DropClobber,
    DropMemoryKeyword,
    MemoryToEntries,
  };
  Kind kind = Kind::AddClobber;
  std::string clobber;     // AddClobber / DropClobber
  int position = -1;       // entry position in the original chunk
  std::string constraint;  // AddOutput / AddInput
  std::string expr_text;   // AddOutput / AddInput
  int size_bytes = 4;
  // AddOutput: the input at `position` becomes a matching constraint.
  bool rebind_input = false;
  std::vector<OperandEntry> entries;  // MemoryToEntries: new "m" inputs/outputs (constraint carries the mode)
  bool suggestion = false;            // not applied automatically
  std::string reason;

  bool operator==(const Edit&) const = default;
};

const char* to_string(Edit::Kind k);
std::string describe(const Edit& e);

struct Patch {
  std::vector<Edit> edits;
  std::vector<Issue> unresolved;  // findings with no mechanical fix
};

Patch synthesize_patches(const ChunkAst& chunk, const CheckResult& result);

/// Applies non-suggestion edits. Positions refer to the original chunk;
/// template operand references are renumbered accordingly.
ChunkAst apply_edits(const ChunkAst& chunk, const std::vector<Edit>& edits);

/// Old entry position -> new position (-1 when the entry was dropped).
std::vector<int> renumber_map(const ChunkAst& chunk, const std::vector<Edit>& edits);

struct PatchVerification {
  bool framing_ok = false;            // no frame-write / frame-read findings remain
  bool fully_compliant = false;       // no findings at all
  bool interface_satisfiable = false;
  std::optional<CheckResult> after;
  std::string note;
};

PatchVerification verify_patch(const ChunkAst& chunk, const std::vector<Edit>& edits,
                               const CheckOptions& opt = {});

/// Rewrites the statement inside `source`. Throws SpanStale when the
/// source no longer contains the statement at its recorded span.
std::string apply_to_source(const std::string& source, const ChunkAst& chunk, const std::vector<Edit>& edits);

/// Unified diff (LF line endings) between `source` and the patched source.
/// Empty when there is nothing to change.
std::string render_diff(const std::string& source, const std::string& file, const ChunkAst& chunk,
                        const std::vector<Edit>& edits);

std::string unified_diff(const std::string& before, const std::string& after, const std::string& file);

/// Renumbers operand references in raw template text ("%3", "%b3"),
/// leaving "%%" and named references alone.
std::string renumber_template(const std::string& raw, const std::vector<int>& old_to_new);

}  // namespace ric
