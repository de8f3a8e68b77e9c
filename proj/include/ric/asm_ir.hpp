#pragma once

// Parsing AT&T templates and lifting them to the bit-vector IR.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ric/extraction.hpp"
#include "ric/interface.hpp"
#include "ric/ir.hpp"

namespace ric {

struct TokenRef {
  int token = -1;     // canonical token id
  int position = -1;  // entry position written in the template
  char modifier = 0;  // 'b', 'w', 'k' change the width; others are ignored
};

/// One base or index register of a memory operand.
struct AddrPart {
  std::optional<SubReg> reg;
  std::optional<TokenRef> token;
};

struct AsmArg {
  enum class Kind { Register, Immediate, Memory, Token, Label, VectorRegister } kind = Kind::Register;
  SubReg reg{Reg::eax, 32, 0};
  int64_t imm = 0;
  std::string symbol;  // immediate/displacement symbol, or label name
  TokenRef token;      // Token, or an immediate/displacement given as a token
  bool has_token_disp = false;
  std::optional<AddrPart> base;
  std::optional<AddrPart> index;
  int scale = 1;
  int vector = -1;
};

struct AsmInstr {
  std::string mnemonic;  // as written, lower-cased
  std::vector<AsmArg> args;
  bool lock = false;
  std::string text;
  std::vector<std::string> labels;  // labels defined right before it
};

struct ParsedTemplate {
  std::vector<AsmInstr> instrs;
  std::vector<std::string> trailing_labels;  // labels at the very end
};

ParsedTemplate parse_template(const std::string& asm_template, const ChunkAst& chunk, const FormalInterface& fi);

/// Lifts a parsed template. Throws UnknownMnemonic for instructions outside
/// the supported subset.
IRProgram lift(const ParsedTemplate& t, const FormalInterface& fi);

/// Parses and lifts in one step.
IRProgram lift_chunk(const ChunkAst& chunk, const FormalInterface& fi);

/// Names of the vector registers written by the template (mm/xmm), found
/// syntactically. Used for chunks whose instructions are not modelled.
std::set<int> written_vector_registers(const ChunkAst& chunk);

/// Instantiates token variables with a concrete assignment: registers,
/// immediates, loads/stores at concrete addresses. `symbols` gives values to
/// link-time symbols; unknown symbols stay symbolic.
IRProgram substitute(const IRProgram& p, const FormalInterface& fi, const TokenAssignment& t,
                     const std::map<std::string, uint32_t>& symbols = {});

/// Replaces only the fixed-register tokens by their register.
IRProgram substitute_fixed(const IRProgram& p, const FormalInterface& fi);

}  // namespace ric
