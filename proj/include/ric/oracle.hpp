#pragma once

// Randomized testing oracle: concrete execution of substituted programs in a
// bounded sandbox and trial-based checks of the three properties.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ric/checker.hpp"

namespace ric {

inline constexpr uint32_t kSandboxBase = 0x10000;
inline constexpr uint64_t kStepBudget = 1'000'000;

struct MachineState {
  std::array<uint32_t, kRegCount> regs{};
  std::array<uint8_t, kFlagCount> flags{};
  uint32_t base = kSandboxBase;
  std::vector<uint8_t> memory;

  bool in_range(uint64_t addr, unsigned bytes) const;
  uint64_t load(uint64_t addr, unsigned bytes) const;  // throws OutOfSandbox
  void store(uint64_t addr, uint64_t value, unsigned bytes);
  uint32_t reg(Reg r) const { return regs[static_cast<int>(r)]; }
  void set_reg(Reg r, uint32_t v) { regs[static_cast<int>(r)] = v; }
};

/// Runs a fully substituted program. Throws StepLimit when the budget is
/// exhausted and OutOfSandbox on accesses outside the sandbox.
MachineState exec(const IRProgram& concrete, MachineState s, uint64_t budget = kStepBudget);

/// Where tokens live for one assignment: memory operands get dedicated
/// slots and address registers are chosen so each operand lands on its slot.
struct Placement {
  TokenAssignment assignment;
  std::map<int, uint32_t> slot;                  // memory token -> address
  std::map<int, unsigned> slot_bytes;            // bytes compared for a memory token
  std::map<Reg, uint32_t> pinned;                // registers with forced values
  std::map<std::string, uint32_t> symbols;
  uint32_t esp0 = 0;
};

/// Returns nullopt when the assignment cannot be realized in the sandbox.
std::optional<Placement> place(const FormalInterface& fi, const TokenAssignment& t, const IRProgram& program,
                               uint32_t sandbox_size);

MachineState random_state(const Placement& pl, uint32_t sandbox_size, std::mt19937_64& rng);

/// Bytes of token `id` in state `m` under placement `pl`.
std::vector<uint8_t> token_bytes(const MachineState& m, const Placement& pl, const FormalInterface& fi, int id);
void set_token_bytes(MachineState& m, const Placement& pl, const FormalInterface& fi, int id,
                     const std::vector<uint8_t>& bytes);

/// Equality of the tokens in `tokens` (each read under its own placement)
/// and, when `compare_memory`, of all memory outside the stack scratch area.
/// `why` receives the first difference.
bool equivalent(const MachineState& m1, const MachineState& m2, const Placement& p1, const Placement& p2,
                const std::set<int>& tokens, bool compare_memory, const FormalInterface& fi,
                std::string* why = nullptr);

struct TrialConfig {
  int trials = 100;
  uint64_t seed = 0;
  int assignment_cap = kDefaultAssignmentCap;
  uint32_t sandbox_size = 65536;
};

enum class OracleOutcome { Pass, Violation, Inconclusive };

const char* to_string(OracleOutcome o);

struct Witness {
  int trial = -1;
  uint64_t trial_seed = 0;
  std::string assignment;
  std::string other_assignment;  // unicity only
  std::string detail;
};

struct OracleResult {
  Analysis analysis = Analysis::FrameWrite;
  OracleOutcome outcome = OracleOutcome::Inconclusive;
  std::optional<Witness> witness;
  int trials_run = 0;
  int conclusive = 0;
  bool truncated = false;
  std::string note;
};

OracleResult oracle_check(const ChunkAst& chunk, Analysis analysis, const TrialConfig& cfg = {});

const char* to_string(Analysis a);

}  // namespace ric
