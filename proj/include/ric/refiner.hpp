#pragma once

// Interface refinement: dropping unnecessary declarations and replacing the
// "memory" keyword with precise "m"-class entries.

#include <optional>
#include <string>
#include <vector>

#include "ric/checker.hpp"
#include "ric/patcher.hpp"

namespace ric {

struct MemAccess {
  enum class Kind { Load, Store } kind = Kind::Load;
  enum class Base { Token, Symbol, Stack, Unresolved } base = Base::Unresolved;
  int point = -1;
  int token = -1;      // Base::Token: the pointer (or memory) token
  bool through_pointer = false;  // token holds the address rather than being the memory
  std::string symbol;  // Base::Symbol
  int64_t offset = 0;
  unsigned size = 0;
};

std::vector<MemAccess> memory_access_analysis(const IRProgram& p, const FormalInterface& fi);

struct RefineOptions {
  bool inputs = true;
  bool clobbers = true;
  bool memory = true;
  CheckOptions check;
};

/// Accesses through pointer tokens declared as "m" entries, one per maximal
/// contiguous run. Returns nullopt when some access cannot be attributed.
std::optional<Edit> memory_to_m_entries(const ChunkAst& chunk, const FormalInterface& fi,
                                        const std::vector<MemAccess>& accesses);

/// Refinement edits for a compliant chunk. Every returned edit set has been
/// re-checked: applying it keeps the chunk compliant.
std::vector<Edit> refine_interface(const ChunkAst& chunk, const CheckResult& result, const RefineOptions& opt = {});

struct RefineOutcome {
  Patch patch;                  // fixes applied first (empty for compliant chunks)
  std::vector<Edit> refinements;  // positions refer to the original chunk
  bool applicable = false;      // the chunk is compliant once patched
};

/// Patches the chunk when needed, then refines the patched interface.
RefineOutcome refine_chunk(const ChunkAst& chunk, const RefineOptions& opt = {});

}  // namespace ric
