#pragma once

// Constraint strings, the formal interface (B_O, B_I, S_T, S_C, F) of an
// extended asm chunk, concrete token assignments and their abstraction.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ric/extraction.hpp"
#include "ric/registers.hpp"

namespace ric {

enum class ConstraintMode { Input, OutputWriteOnly, OutputReadWrite };

struct AtomicConstraint {
  enum class Kind { Letter, Match } kind = Kind::Letter;
  char letter = 0;
  std::string match;  // digits or a symbolic name

  bool operator==(const AtomicConstraint&) const = default;
};

struct ConstraintSpec {
  ConstraintMode mode = ConstraintMode::Input;
  bool early_clobber = false;
  bool commutative = false;
  std::vector<std::vector<AtomicConstraint>> alternatives;
};

ConstraintSpec parse_constraint(std::string_view s, bool is_output);

/// The operand family allowed by one constraint alternative. Letters such as
/// 'g' denote unions, so the class is a union description rather than a
/// single-kind variant.
struct OperandClass {
  bool immediate = false;
  RegSet registers;
  bool memory = false;   // *p for p in the address family
  bool address = false;  // the address family itself ('p')
  std::optional<int> match_of;

  bool operator==(const OperandClass&) const = default;
  OperandClass& operator|=(const OperandClass& o);
  bool memory_only() const { return memory && !immediate && registers.empty() && !address; }
  std::optional<Reg> single_register() const;
};

OperandClass eval_letter(char c);

struct MemAddr {
  std::optional<Reg> base;
  std::optional<Reg> index;
  int scale = 1;
  int32_t disp = 0;

  bool operator==(const MemAddr&) const = default;
  auto operator<=>(const MemAddr&) const = default;
};

struct AsmOperand {
  enum class Kind { Register, Immediate, Memory, Address } kind = Kind::Register;
  Reg reg = Reg::eax;
  uint32_t imm = 0;
  MemAddr addr;

  static AsmOperand of_reg(Reg r) { return {Kind::Register, r, 0, {}}; }
  static AsmOperand of_imm(uint32_t v) { return {Kind::Immediate, Reg::eax, v, {}}; }
  static AsmOperand of_mem(MemAddr a) { return {Kind::Memory, Reg::eax, 0, a}; }

  bool operator==(const AsmOperand&) const = default;
  RegSet registers() const;
  std::string to_string() const;
};

using TokenAssignment = std::map<int, AsmOperand>;

std::string to_string(const TokenAssignment& t);

/// A memory entry that stands for the bytes reached through a pointer
/// token: `"m" (*(const char (*)[N]) p)` where `p` is another operand.
struct MemoryRegion {
  int pointer_token = -1;
  int32_t offset = 0;
  int span = 0;
};

struct TokenInfo {
  int id = 0;
  std::optional<std::string> name;
  std::string expr_text;
  int size_bytes = 4;
  bool is_output = false;
  bool is_input = false;  // read by the chunk: B_I, '+' or unified with an input
  bool early_clobber = false;
  bool commutative_with_next = false;
  std::vector<OperandClass> alternatives;  // one per alternative column
  std::vector<int> positions;              // entry positions folded into this token
  std::optional<Reg> fixed_register;
  bool memory_class = false;  // every alternative is a memory operand
  std::optional<MemoryRegion> region;

  unsigned bits() const { return static_cast<unsigned>(size_bytes) * 8u; }
};

struct FormalInterface {
  std::set<int> outputs;  // B_O
  std::set<int> inputs;   // B_I (unified inputs are folded into their output)
  RegSet clobbered;       // S_C registers
  bool flags_clobbered = false;  // "cc" in S_C
  std::set<int> vector_clobbers;  // mm/xmm names, kept for classification
  bool memory_separated = true;   // F
  std::map<int, TokenInfo> tokens;
  std::set<int> early_clobber;
  std::map<int, int> unified;  // entry position -> canonical token
  int alternative_count = 1;

  int canonical(int position) const;
  const TokenInfo& token(int id) const { return tokens.at(id); }
  bool is_effective_input(int id) const { return tokens.at(id).is_input; }
  std::set<int> effective_inputs() const;
};

FormalInterface derive_interface(const ChunkAst& chunk);

struct AssignmentSet {
  std::vector<TokenAssignment> assignments;
  bool truncated = false;
};

inline constexpr int kDefaultAssignmentCap = 256;

AssignmentSet enumerate_assignments(const FormalInterface& fi, int cap = kDefaultAssignmentCap);

/// Independent re-check of the validity filters on one assignment. Returns
/// an empty string when valid, otherwise the violated rule.
std::string assignment_violation(const FormalInterface& fi, const TokenAssignment& t);

struct AbstractLocation {
  enum class Kind { Immediate, Direct, Indirect } kind = Kind::Immediate;
  Reg reg = Reg::eax;

  auto operator<=>(const AbstractLocation&) const = default;
  std::string to_string() const;
};

using AbstractSet = std::set<AbstractLocation>;
using AbstractDomain = std::map<int, AbstractSet>;

AbstractDomain abstract_domain(const FormalInterface& fi);
AbstractSet abstract_of(const AsmOperand& op);

/// Registers that may not back token `id` as a register operand, or as the
/// base/index of its address, given the other tokens pinned to registers.
RegSet register_exclusions(const FormalInterface& fi, int id);
RegSet address_exclusions(const FormalInterface& fi, int id);

}  // namespace ric
