#pragma once

// Bit-vector intermediate representation of asm templates.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ric/registers.hpp"

namespace ric {

struct Location {
  enum class Kind : uint8_t {
    Reg,        // architectural register (id = Reg)
    Flag,       // status flag (id = Flag)
    Token,      // register/immediate operand %id
    TokenAddr,  // address of memory operand %id
    Memory,     // all of memory as one fact
    Stack,      // 4-byte slot at esp0 - id
    Temp,       // lifter scratch value
    VecReg,     // mm/xmm register, classification only
  };
  Kind kind = Kind::Reg;
  int id = 0;

  static Location reg(Reg r) { return {Kind::Reg, static_cast<int>(r)}; }
  static Location flag(Flag f) { return {Kind::Flag, static_cast<int>(f)}; }
  static Location token(int t) { return {Kind::Token, t}; }
  static Location token_addr(int t) { return {Kind::TokenAddr, t}; }
  static Location memory() { return {Kind::Memory, 0}; }
  static Location stack(int k) { return {Kind::Stack, k}; }
  static Location temp(int t) { return {Kind::Temp, t}; }
  static Location vec(int v) { return {Kind::VecReg, v}; }

  Reg as_reg() const { return static_cast<Reg>(id); }
  Flag as_flag() const { return static_cast<Flag>(id); }
  bool operator==(const Location&) const = default;
  auto operator<=>(const Location&) const = default;
  std::string to_string() const;
};

enum class Op : uint8_t {
  Const, Var, Load, Symbol, Opaque,
  Not, Neg, Zext, Sext, Extract,
  Add, Sub, Mul, Udiv, Urem, Sdiv, Srem,
  And, Or, Xor, Shl, Shr, Sar,
  Eq, Ne, Ugt, Ult, Sgt, Slt,
  Concat, Ite,
};

const char* op_name(Op op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  Op op = Op::Const;
  unsigned width = 32;  // 1..64
  uint64_t value = 0;   // Const value, Extract low bit, Opaque id
  Location loc;         // Var
  std::string name;     // Symbol
  std::vector<ExprPtr> args;
  std::size_t hash = 0;

  bool is_const() const { return op == Op::Const; }
  bool is_const(uint64_t v) const { return op == Op::Const && value == v; }
};

uint64_t mask_of(unsigned width);
uint64_t sign_extend(uint64_t v, unsigned from);

bool equal(const ExprPtr& a, const ExprPtr& b);
std::string to_string(const ExprPtr& e);

ExprPtr mk_const(unsigned width, uint64_t value);
ExprPtr mk_var(Location loc, unsigned width);
ExprPtr mk_load(ExprPtr addr, unsigned bytes);
ExprPtr mk_symbol(const std::string& name, unsigned width);
ExprPtr mk_opaque(uint64_t id, unsigned width);
ExprPtr mk_unary(Op op, ExprPtr a);
ExprPtr mk_binary(Op op, ExprPtr a, ExprPtr b);
ExprPtr mk_extract(ExprPtr a, unsigned lo, unsigned width);
ExprPtr mk_zext(ExprPtr a, unsigned width);
ExprPtr mk_sext(ExprPtr a, unsigned width);
ExprPtr mk_concat(ExprPtr hi, ExprPtr lo);
ExprPtr mk_ite(ExprPtr c, ExprPtr t, ExprPtr e);

/// Resizes to `width` by truncation or zero extension.
ExprPtr mk_resize(ExprPtr a, unsigned width);

/// Value of a non-leaf operator (or Const) given its evaluated arguments.
/// Ite is left to callers so an untaken branch is never evaluated.
uint64_t fold(Op op, unsigned width, uint64_t value, unsigned arg_width, unsigned arg1_width, const uint64_t* args);

/// Evaluates with callbacks for variables and memory loads.
struct EvalEnv {
  std::function<uint64_t(const Location&, unsigned width)> var;
  std::function<uint64_t(uint64_t addr, unsigned bytes)> load;
  std::function<uint64_t(const std::string&)> symbol;
  std::function<uint64_t(uint64_t id, unsigned width)> opaque;
};
uint64_t evaluate(const ExprPtr& e, const EvalEnv& env);

/// Rewrites every node bottom-up; `leaf` may replace Var/Load/Symbol nodes.
ExprPtr rewrite(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& leaf);

void collect_vars(const ExprPtr& e, std::set<Location>& out);
bool contains_load(const ExprPtr& e);

ExprPtr simplify(const ExprPtr& e);

struct Instr {
  enum class Kind : uint8_t { Assign, Store, Goto, Branch, Halt };
  Kind kind = Kind::Halt;
  Location dst;        // Assign
  ExprPtr rhs;         // Assign value, Store value, Branch condition
  ExprPtr addr;        // Store
  unsigned bytes = 4;  // Store
  int target = -1;     // Goto/Branch
  int origin = -1;     // index of the template instruction it came from

  static Instr assign(Location d, ExprPtr v, int origin = -1);
  static Instr store(ExprPtr addr, ExprPtr v, unsigned bytes, int origin = -1);
  static Instr jump(int target, int origin = -1);
  static Instr branch(ExprPtr cond, int target, int origin = -1);
  static Instr halt();
};

struct IRProgram {
  std::vector<Instr> instrs;
  std::map<int, unsigned> token_bits;
  std::map<int, unsigned> temp_bits;
  std::set<int> memory_tokens;  // tokens accessed through TokenAddr
  std::vector<std::string> mnemonics;  // template instruction text by origin

  unsigned bits(const Location& l) const;
  std::vector<int> successors(int pc) const;
  bool has_back_edge() const;
  int new_temp(unsigned width);
  std::string to_string() const;
};

/// Checks widths and jump targets; throws MalformedInterface on misuse.
void validate(const IRProgram& p);

}  // namespace ric
