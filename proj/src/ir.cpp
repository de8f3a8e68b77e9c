#include <sstream>

#include "ric/error.hpp"
#include "ric/ir.hpp"

namespace ric {

Instr Instr::assign(Location d, ExprPtr v, int origin) {
  Instr i;
  i.kind = Kind::Assign;
  i.dst = d;
  i.rhs = std::move(v);
  i.origin = origin;
  return i;
}

Instr Instr::store(ExprPtr addr, ExprPtr v, unsigned bytes, int origin) {
  Instr i;
  i.kind = Kind::Store;
  i.addr = std::move(addr);
  i.rhs = std::move(v);
  i.bytes = bytes;
  i.origin = origin;
  return i;
}

Instr Instr::jump(int target, int origin) {
  Instr i;
  i.kind = Kind::Goto;
  i.target = target;
  i.origin = origin;
  return i;
}

Instr Instr::branch(ExprPtr cond, int target, int origin) {
  Instr i;
  i.kind = Kind::Branch;
  i.rhs = std::move(cond);
  i.target = target;
  i.origin = origin;
  return i;
}

Instr Instr::halt() { return Instr{}; }

unsigned IRProgram::bits(const Location& l) const {
  switch (l.kind) {
    case Location::Kind::Reg:
    case Location::Kind::TokenAddr:
    case Location::Kind::Stack: return 32;
    case Location::Kind::Flag: return 1;
    case Location::Kind::Token: {
      auto it = token_bits.find(l.id);
      if (it == token_bits.end()) throw Error(ErrorKind::MissingToken, "%" + std::to_string(l.id));
      return it->second;
    }
    case Location::Kind::Temp: {
      auto it = temp_bits.find(l.id);
      if (it == temp_bits.end()) throw Error(ErrorKind::MalformedInterface, "unknown temp " + l.to_string());
      return it->second;
    }
    case Location::Kind::Memory:
    case Location::Kind::VecReg: return 64;
  }
  return 32;
}

std::vector<int> IRProgram::successors(int pc) const {
  const Instr& i = instrs.at(pc);
  switch (i.kind) {
    case Instr::Kind::Halt: return {};
    case Instr::Kind::Goto: return {i.target};
    case Instr::Kind::Branch:
      if (i.target == pc + 1) return {pc + 1};
      return {pc + 1, i.target};
    default: return {pc + 1};
  }
}

bool IRProgram::has_back_edge() const {
  for (int pc = 0; pc < static_cast<int>(instrs.size()); ++pc)
    for (int s : successors(pc))
      if (s <= pc) return true;
  return false;
}

int IRProgram::new_temp(unsigned width) {
  int id = static_cast<int>(temp_bits.size());
  temp_bits[id] = width;
  return id;
}

std::string IRProgram::to_string() const {
  std::ostringstream os;
  for (std::size_t pc = 0; pc < instrs.size(); ++pc) {
    const Instr& i = instrs[pc];
    os << pc << ": ";
    switch (i.kind) {
      case Instr::Kind::Assign: os << i.dst.to_string() << " <- " << ric::to_string(i.rhs); break;
      case Instr::Kind::Store:
        os << "@[" << ric::to_string(i.addr) << "]_" << i.bytes << " <- " << ric::to_string(i.rhs);
        break;
      case Instr::Kind::Goto: os << "goto " << i.target; break;
      case Instr::Kind::Branch: os << "if " << ric::to_string(i.rhs) << " goto " << i.target; break;
      case Instr::Kind::Halt: os << "halt"; break;
    }
    os << "\n";
  }
  return os.str();
}

void validate(const IRProgram& p) {
  const int n = static_cast<int>(p.instrs.size());
  if (n == 0 || p.instrs.back().kind != Instr::Kind::Halt)
    throw Error(ErrorKind::MalformedInterface, "program must end in halt");
  for (int pc = 0; pc < n; ++pc) {
    const Instr& i = p.instrs[pc];
    auto where = [&] { return "instruction " + std::to_string(pc) + ": "; };
    switch (i.kind) {
      case Instr::Kind::Assign:
        if (i.dst.kind == Location::Kind::Memory || i.dst.kind == Location::Kind::TokenAddr)
          throw Error(ErrorKind::MalformedInterface, where() + "bad assignment target");
        if (i.rhs->width != p.bits(i.dst))
          throw Error(ErrorKind::MalformedInterface, where() + "width mismatch for " + i.dst.to_string());
        break;
      case Instr::Kind::Store:
        if (i.addr->width != 32 || i.rhs->width != i.bytes * 8)
          throw Error(ErrorKind::MalformedInterface, where() + "bad store widths");
        break;
      case Instr::Kind::Branch:
        if (i.rhs->width != 1) throw Error(ErrorKind::MalformedInterface, where() + "branch condition not 1 bit");
        [[fallthrough]];
      case Instr::Kind::Goto:
        if (i.target < 0 || i.target >= n) throw Error(ErrorKind::MalformedInterface, where() + "bad jump target");
        break;
      case Instr::Kind::Halt: break;
    }
  }
}

}  // namespace ric
