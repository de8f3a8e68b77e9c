#include "ric/asm_ir.hpp"
#include "ric/error.hpp"

namespace ric {

namespace {

ExprPtr address_of(const MemAddr& a) {
  ExprPtr e = mk_const(32, static_cast<uint32_t>(a.disp));
  if (a.base) e = mk_binary(Op::Add, mk_var(Location::reg(*a.base), 32), e);
  if (a.index)
    e = mk_binary(Op::Add, e, mk_binary(Op::Mul, mk_var(Location::reg(*a.index), 32), mk_const(32, a.scale)));
  return simplify(e);
}

class Substituter {
 public:
  Substituter(const IRProgram& p, const TokenAssignment& t, const std::map<std::string, uint32_t>& symbols)
      : p_(p), t_(t), symbols_(symbols) {}

  ExprPtr leaf(const ExprPtr& e) const {
    if (e->op == Op::Symbol) {
      auto it = symbols_.find(e->name);
      return it == symbols_.end() ? nullptr : mk_const(e->width, it->second);
    }
    if (e->op != Op::Var) return nullptr;
    const Location& l = e->loc;
    if (l.kind != Location::Kind::Token && l.kind != Location::Kind::TokenAddr) return nullptr;
    auto it = t_.find(l.id);
    if (it == t_.end()) return nullptr;
    const AsmOperand& op = it->second;
    if (l.kind == Location::Kind::TokenAddr) {
      if (op.kind != AsmOperand::Kind::Memory)
        throw Error(ErrorKind::MalformedInterface, "memory operand %" + std::to_string(l.id) + " given " + op.to_string());
      return address_of(op.addr);
    }
    switch (op.kind) {
      case AsmOperand::Kind::Register:
        if (e->width > 32) throw Error(ErrorKind::MalformedInterface, "register operand wider than 32 bits");
        return mk_extract(mk_var(Location::reg(op.reg), 32), 0, e->width);
      case AsmOperand::Kind::Immediate: return mk_const(e->width, op.imm);
      case AsmOperand::Kind::Memory: return mk_load(address_of(op.addr), e->width / 8);
      case AsmOperand::Kind::Address: return mk_resize(address_of(op.addr), e->width);
    }
    return nullptr;
  }

  ExprPtr expr(const ExprPtr& e) const {
    return simplify(rewrite(e, [this](const ExprPtr& x) { return leaf(x); }));
  }

  IRProgram run() const {
    IRProgram out = p_;
    for (auto& in : out.instrs) {
      if (in.rhs) in.rhs = expr(in.rhs);
      if (in.addr) in.addr = expr(in.addr);
      if (in.kind != Instr::Kind::Assign || in.dst.kind != Location::Kind::Token) continue;
      auto it = t_.find(in.dst.id);
      if (it == t_.end()) continue;
      const AsmOperand& op = it->second;
      const unsigned bits = in.rhs->width;
      switch (op.kind) {
        case AsmOperand::Kind::Register: {
          ExprPtr old = mk_var(Location::reg(op.reg), 32);
          ExprPtr v = bits >= 32 ? mk_resize(in.rhs, 32) : mk_concat(mk_extract(old, bits, 32 - bits), in.rhs);
          in.dst = Location::reg(op.reg);
          in.rhs = simplify(v);
          break;
        }
        case AsmOperand::Kind::Memory:
          in.kind = Instr::Kind::Store;
          in.addr = address_of(op.addr);
          in.bytes = bits / 8;
          break;
        default:
          throw Error(ErrorKind::MalformedInterface,
                      "operand %" + std::to_string(in.dst.id) + " written but assigned " + op.to_string());
      }
    }
    for (const auto& [id, op] : t_)
      if (op.kind == AsmOperand::Kind::Register || op.kind == AsmOperand::Kind::Immediate) out.memory_tokens.erase(id);
    return out;
  }

 private:
  const IRProgram& p_;
  const TokenAssignment& t_;
  const std::map<std::string, uint32_t>& symbols_;
};

}  // namespace

IRProgram substitute(const IRProgram& p, const FormalInterface& fi, const TokenAssignment& t,
                     const std::map<std::string, uint32_t>& symbols) {
  for (const auto& [id, tok] : fi.tokens)
    if (!t.count(id)) throw Error(ErrorKind::MissingToken, "no operand for %" + std::to_string(id));
  IRProgram out = Substituter(p, t, symbols).run();
  validate(out);
  return out;
}

IRProgram substitute_fixed(const IRProgram& p, const FormalInterface& fi) {
  TokenAssignment fixed;
  for (const auto& [id, tok] : fi.tokens)
    if (tok.fixed_register) fixed[id] = AsmOperand::of_reg(*tok.fixed_register);
  static const std::map<std::string, uint32_t> none;
  return Substituter(p, fixed, none).run();
}

}  // namespace ric
