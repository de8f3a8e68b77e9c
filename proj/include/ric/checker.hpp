#pragma once

// Static checks of a chunk against its formal interface: frame-write,
// frame-read and unicity.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ric/asm_ir.hpp"
#include "ric/extraction.hpp"
#include "ric/interface.hpp"
#include "ric/ir.hpp"

namespace ric {

enum class IssueCategory {
  FlagClobbered,
  ReadOnlyInputClobbered,
  UnboundRegisterClobbered,
  UnboundMemoryWrite,
  NonWrittenWriteOnlyOutput,
  UnboundRegisterRead,
  UnboundMemoryRead,
  Unicity,
};

const char* to_string(IssueCategory c);
IssueCategory issue_category_from_string(const std::string& s);

enum class Analysis { FrameWrite, FrameRead, Unicity };

Analysis analysis_of(IssueCategory c);

struct Issue {
  IssueCategory category = IssueCategory::FlagClobbered;
  Location location;                // what was clobbered, read or written
  std::optional<Location> related;  // Unicity: the live location it may alias
  int point = -1;                   // IR instruction index
  int origin = -1;                  // template instruction index
  std::string details;
};

struct CheckOptions {
  bool expression_propagation = true;
  bool bit_level_liveness = true;
};

// ---- symbolic resolution -------------------------------------------------

struct MemWrite {
  ExprPtr addr;  // null: unknown write
  ExprPtr value;
  unsigned bytes = 0;
};

struct SymState {
  bool reachable = false;
  std::map<Location, ExprPtr> values;  // absent: entry value
  std::vector<MemWrite> memory;

  ExprPtr value(const Location& l, unsigned width) const;
};

/// Forward symbolic execution over the IR, joining at merge points.
/// Expressions are rewritten in terms of entry values.
class Resolution {
 public:
  explicit Resolution(const IRProgram& p);

  const SymState& before(int pc) const { return states_.at(pc); }
  const SymState& at_exit() const { return states_.back(); }
  ExprPtr resolve(int pc, const ExprPtr& e) const;
  ExprPtr resolve_in(const SymState& s, const ExprPtr& e, int pc) const;

  /// Locations assigned on some path, with the first assigning instruction.
  const std::map<Location, int>& first_writes() const { return first_write_; }

 private:
  ExprPtr lookup(const SymState& s, const ExprPtr& addr, unsigned bytes, int pc) const;
  SymState join(const std::vector<const SymState*>& in, int pc) const;

  const IRProgram& p_;
  std::vector<SymState> states_;
  std::map<Location, int> first_write_;
};

struct AddressParts {
  ExprPtr base;  // null for an absolute address
  int64_t offset = 0;
};

AddressParts decompose_address(const ExprPtr& resolved);

/// What a resolved address designates.
struct MemTarget {
  enum class Kind { TokenMemory, Stack, Whole } kind = Kind::Whole;
  int token = -1;
  int64_t offset = 0;
  int slot = 0;  // Stack: k for esp0 - k
};

MemTarget classify_address(const ExprPtr& resolved, unsigned bytes, const FormalInterface& fi);

/// The program the checker analyses: lifted, with fixed-register tokens
/// replaced by their registers.
IRProgram analysis_program(const ChunkAst& chunk, const FormalInterface& fi);

std::vector<Issue> check_frame_write(const IRProgram& p, const FormalInterface& fi, const Resolution& r,
                                     const CheckOptions& opt);
std::vector<Issue> check_frame_read(const IRProgram& p, const FormalInterface& fi, const Resolution& r,
                                    const CheckOptions& opt);
std::vector<Issue> check_unicity(const IRProgram& p, const FormalInterface& fi, const Resolution& r,
                                 const CheckOptions& opt);

/// Live locations with bit masks after each instruction (index pc) and at
/// entry (index size()).
struct Liveness {
  std::vector<std::map<Location, uint64_t>> live_after;
  std::map<Location, uint64_t> live_in;
  std::map<Location, int> first_use;  // earliest instruction reading an entry value
};

Liveness compute_liveness(const IRProgram& p, const FormalInterface& fi, const Resolution& r, bool bit_level);

enum class Verdict { Compliant, Issues, OutOfScope, Error };

const char* to_string(Verdict v);

struct CheckResult {
  Verdict verdict = Verdict::Compliant;
  std::vector<Issue> issues;
  std::string reason;  // out_of_scope / error explanation
  std::optional<FormalInterface> interface;
  std::optional<IRProgram> program;
};

/// Runs all three analyses. Out-of-scope and malformed chunks are reported
/// through the verdict rather than thrown.
CheckResult check_chunk(const ChunkAst& chunk, const CheckOptions& opt = {});

std::string describe(const Issue& issue, const FormalInterface* fi = nullptr);

}  // namespace ric
