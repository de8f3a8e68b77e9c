#include <algorithm>
#include <set>

#include "ric/asm_ir.hpp"
#include "ric/error.hpp"

namespace ric {

namespace {

const std::set<std::string> kBases = {
    "mov", "lea", "xchg", "add", "adc", "sub", "sbb", "inc", "dec", "neg", "cmp", "and", "or", "xor", "not",
    "test", "shl", "sal", "shr", "sar", "rol", "ror", "mul", "imul", "bswap", "push", "pop", "cmpxchg",
    "cmpxchg8b", "nop", "jmp"};

const std::set<std::string> kConditions = {"o",  "no", "b",  "c",  "nae", "ae", "nb",  "nc", "e",  "z",
                                           "ne", "nz", "be", "na", "a",   "nbe", "s",  "ns", "p",  "pe",
                                           "np", "po", "l",  "nge", "ge", "nl", "le", "ng", "g",  "nle"};

unsigned suffix_width(char c) {
  switch (c) {
    case 'b': return 8;
    case 'w': return 16;
    case 'l': return 32;
    default: return 0;
  }
}

struct Decoded {
  std::string base;
  std::string cc;
  unsigned width = 0;
  unsigned src_width = 0;  // movz/movs
};

Decoded decode(const std::string& m) {
  Decoded d;
  if (kBases.count(m)) {
    d.base = m;
    return d;
  }
  if ((m.rfind("movz", 0) == 0 || m.rfind("movs", 0) == 0)) {
    if (m.size() == 6 && suffix_width(m[4]) && suffix_width(m[5]) && suffix_width(m[4]) < suffix_width(m[5])) {
      d.base = m.substr(0, 4);
      d.src_width = suffix_width(m[4]);
      d.width = suffix_width(m[5]);
      return d;
    }
    if (m == "movzx" || m == "movsx") {
      d.base = m.substr(0, 4);
      return d;
    }
  }
  auto with_cc = [&](const std::string& prefix, bool allow_suffix) {
    if (m.rfind(prefix, 0) != 0 || m.size() == prefix.size()) return false;
    std::string cc = m.substr(prefix.size());
    if (kConditions.count(cc)) {
      d.base = prefix;
      d.cc = cc;
      return true;
    }
    if (allow_suffix && suffix_width(cc.back()) && kConditions.count(cc.substr(0, cc.size() - 1))) {
      d.base = prefix;
      d.cc = cc.substr(0, cc.size() - 1);
      d.width = suffix_width(cc.back());
      return true;
    }
    return false;
  };
  if (with_cc("set", true) || with_cc("cmov", true) || with_cc("j", false)) {
    if (d.base == "set") d.width = 8;
    return d;
  }
  if (m.size() > 1 && suffix_width(m.back()) && kBases.count(m.substr(0, m.size() - 1))) {
    d.base = m.substr(0, m.size() - 1);
    d.width = suffix_width(m.back());
    if (d.base == "sal") d.base = "shl";
    return d;
  }
  throw Error(ErrorKind::UnknownMnemonic, "unsupported instruction '" + m + "'");
}

struct LabelDef {
  std::string name;
  int pc;
  int order;
};

struct Fixup {
  int pc;
  std::string ref;
  int order;
};

class Lifter {
 public:
  explicit Lifter(const FormalInterface& fi) : fi_(fi) {
    for (const auto& [id, t] : fi.tokens) {
      p_.token_bits[id] = t.bits();
      if (t.memory_class) p_.memory_tokens.insert(id);
    }
  }

  IRProgram run(const ParsedTemplate& t) {
    for (std::size_t k = 0; k < t.instrs.size(); ++k) {
      origin_ = static_cast<int>(k);
      const auto& in = t.instrs[k];
      for (const auto& l : in.labels) labels_.push_back({l, pc(), origin_});
      p_.mnemonics.push_back(in.text);
      lift_one(in);
    }
    origin_ = static_cast<int>(t.instrs.size());
    for (const auto& l : t.trailing_labels) labels_.push_back({l, pc(), origin_});
    p_.instrs.push_back(Instr::halt());
    resolve_labels();
    validate(p_);
    return std::move(p_);
  }

 private:
  int pc() const { return static_cast<int>(p_.instrs.size()); }

  void emit(Instr i) {
    i.origin = origin_;
    if (i.rhs) i.rhs = simplify(i.rhs);
    if (i.addr) i.addr = simplify(i.addr);
    p_.instrs.push_back(std::move(i));
  }

  ExprPtr stash(ExprPtr e) {
    e = simplify(e);
    if (e->is_const()) return e;
    int t = p_.new_temp(e->width);
    emit(Instr::assign(Location::temp(t), e));
    return mk_var(Location::temp(t), e->width);
  }

  // Operand values referenced after a store must not see the new memory.
  ExprPtr stable(ExprPtr e) { return contains_load(e) ? stash(std::move(e)) : e; }

  static ExprPtr flag(Flag f) { return mk_var(Location::flag(f), 1); }
  void set_flag(Flag f, ExprPtr v) { emit(Instr::assign(Location::flag(f), std::move(v))); }

  static ExprPtr bit(const ExprPtr& e, unsigned i) { return mk_extract(e, i, 1); }
  static ExprPtr msb(const ExprPtr& e) { return bit(e, e->width - 1); }
  static ExprPtr bnot(const ExprPtr& e) { return mk_unary(Op::Not, e); }
  static ExprPtr c(unsigned w, uint64_t v) { return mk_const(w, v); }
  static ExprPtr bin(Op op, ExprPtr a, ExprPtr b) { return mk_binary(op, std::move(a), std::move(b)); }

  const TokenInfo& token(const TokenRef& r) const { return fi_.tokens.at(r.token); }

  unsigned token_width(const TokenRef& r) const {
    if (unsigned w = suffix_width(r.modifier == 'k' ? 'l' : r.modifier)) return w;
    const auto& t = token(r);
    return t.memory_class ? std::min(t.bits(), 64u) : std::min(t.bits(), 32u);
  }

  ExprPtr token_var(const TokenRef& r) const { return mk_var(Location::token(r.token), p_.token_bits.at(r.token)); }

  ExprPtr reg_read(const SubReg& s) const { return mk_extract(mk_var(Location::reg(s.parent), 32), s.shift, s.width); }

  void reg_write(const SubReg& s, ExprPtr v) {
    v = mk_resize(std::move(v), s.width);
    ExprPtr old = mk_var(Location::reg(s.parent), 32);
    emit(Instr::assign(Location::reg(s.parent), splice(old, s.shift, v)));
  }

  // old with bits [lo, lo+width(v)) replaced by v.
  static ExprPtr splice(const ExprPtr& old, unsigned lo, const ExprPtr& v) {
    const unsigned w = old->width, hi = lo + v->width;
    ExprPtr out = v;
    if (lo > 0) out = mk_concat(out, mk_extract(old, 0, lo));
    if (hi < w) out = mk_concat(mk_extract(old, hi, w - hi), out);
    return out;
  }

  ExprPtr addr_part(const AddrPart& part) const {
    if (part.reg) return mk_var(Location::reg(part.reg->parent), 32);
    if (token(*part.token).memory_class)
      throw Error(ErrorKind::MalformedInterface, "memory operand %" + std::to_string(part.token->position) +
                                                     " used as an address register");
    return mk_resize(token_var(*part.token), 32);
  }

  ExprPtr address(const AsmArg& a) const {
    if (a.kind == AsmArg::Kind::Token) {
      if (!token(a.token).memory_class)
        throw Error(ErrorKind::MalformedInterface, "operand %" + std::to_string(a.token.position) + " is not memory");
      return mk_var(Location::token_addr(a.token.token), 32);
    }
    if (a.kind != AsmArg::Kind::Memory) throw Error(ErrorKind::MalformedInterface, "expected a memory operand");
    ExprPtr addr = c(32, static_cast<uint64_t>(a.imm));
    if (!a.symbol.empty()) addr = bin(Op::Add, addr, mk_symbol(a.symbol, 32));
    if (a.has_token_disp) addr = bin(Op::Add, addr, mk_resize(token_var(a.token), 32));
    if (a.base) addr = bin(Op::Add, addr_part(*a.base), addr);
    if (a.index) addr = bin(Op::Add, addr, bin(Op::Mul, addr_part(*a.index), c(32, a.scale)));
    return simplify(addr);
  }

  bool is_memory(const AsmArg& a) const {
    return a.kind == AsmArg::Kind::Memory || (a.kind == AsmArg::Kind::Token && token(a.token).memory_class);
  }

  ExprPtr read(const AsmArg& a, unsigned w) const {
    switch (a.kind) {
      case AsmArg::Kind::Register: return mk_resize(reg_read(a.reg), w);
      case AsmArg::Kind::Immediate:
        if (a.has_token_disp) return mk_resize(token_var(a.token), w);
        if (!a.symbol.empty()) return mk_resize(mk_symbol(a.symbol, 32), w);
        return c(w, static_cast<uint64_t>(a.imm));
      case AsmArg::Kind::Token:
        if (token(a.token).memory_class) return mk_load(address(a), w / 8);
        return mk_resize(token_var(a.token), w);
      case AsmArg::Kind::Memory: return mk_load(address(a), w / 8);
      case AsmArg::Kind::Label: throw Error(ErrorKind::UnknownMnemonic, "label used as a data operand");
      case AsmArg::Kind::VectorRegister: throw Error(ErrorKind::UnknownMnemonic, "vector register operand");
    }
    return nullptr;
  }

  void write(const AsmArg& a, unsigned w, ExprPtr v) {
    v = mk_resize(std::move(v), w);
    switch (a.kind) {
      case AsmArg::Kind::Register: reg_write(a.reg, v); return;
      case AsmArg::Kind::Token: {
        if (token(a.token).memory_class) {
          emit(Instr::store(address(a), v, w / 8));
          return;
        }
        const unsigned tb = p_.token_bits.at(a.token.token);
        ExprPtr value = w >= tb ? mk_resize(v, tb) : splice(token_var(a.token), 0, v);
        emit(Instr::assign(Location::token(a.token.token), value));
        return;
      }
      case AsmArg::Kind::Memory: emit(Instr::store(address(a), v, w / 8)); return;
      default: throw Error(ErrorKind::UnknownMnemonic, "operand is not writable");
    }
  }

  unsigned infer_width(const Decoded& d, const std::vector<const AsmArg*>& args) const {
    if (d.width) return d.width;
    for (const AsmArg* a : args) {
      if (a->kind == AsmArg::Kind::Register) return a->reg.width;
      if (a->kind == AsmArg::Kind::Token && (!token(a->token).memory_class || a->token.modifier))
        return token_width(a->token);
    }
    for (const AsmArg* a : args)
      if (a->kind == AsmArg::Kind::Token) return std::min(token_width(a->token), 32u);
    return 32;
  }

  ExprPtr parity(const ExprPtr& res) const {
    ExprPtr x = mk_extract(res, 0, 8);
    x = bin(Op::Xor, x, bin(Op::Shr, x, c(8, 4)));
    x = bin(Op::Xor, x, bin(Op::Shr, x, c(8, 2)));
    x = bin(Op::Xor, x, bin(Op::Shr, x, c(8, 1)));
    return bnot(bit(x, 0));
  }

  void flags_szp(const ExprPtr& res) {
    set_flag(Flag::z, bin(Op::Eq, res, c(res->width, 0)));
    set_flag(Flag::s, msb(res));
    set_flag(Flag::p, parity(res));
  }

  void flags_logic(const ExprPtr& res) {
    set_flag(Flag::c, c(1, 0));
    set_flag(Flag::o, c(1, 0));
    set_flag(Flag::a, c(1, 0));
    flags_szp(res);
  }

  void flags_add(const ExprPtr& a, const ExprPtr& b, const ExprPtr& res, const ExprPtr& cin, bool set_cf = true) {
    const unsigned w = a->width;
    if (set_cf) {
      ExprPtr wide = bin(Op::Add, mk_zext(a, w + 1), mk_zext(b, w + 1));
      if (cin) wide = bin(Op::Add, wide, mk_zext(cin, w + 1));
      set_flag(Flag::c, bit(wide, w));
    }
    set_flag(Flag::o, msb(bin(Op::And, bin(Op::Xor, a, res), bin(Op::Xor, b, res))));
    set_flag(Flag::a, bit(bin(Op::Xor, bin(Op::Xor, a, b), res), 4));
    flags_szp(res);
  }

  void flags_sub(const ExprPtr& a, const ExprPtr& b, const ExprPtr& res, const ExprPtr& bin_, bool set_cf = true) {
    const unsigned w = a->width;
    if (set_cf) {
      if (bin_) {
        ExprPtr wide = bin(Op::Sub, bin(Op::Sub, mk_zext(a, w + 1), mk_zext(b, w + 1)), mk_zext(bin_, w + 1));
        set_flag(Flag::c, bit(wide, w));
      } else {
        set_flag(Flag::c, bin(Op::Ult, a, b));
      }
    }
    set_flag(Flag::o, msb(bin(Op::And, bin(Op::Xor, a, b), bin(Op::Xor, a, res))));
    set_flag(Flag::a, bit(bin(Op::Xor, bin(Op::Xor, a, b), res), 4));
    flags_szp(res);
  }

  ExprPtr condition(const std::string& cc) const {
    auto Z = flag(Flag::z), C = flag(Flag::c), S = flag(Flag::s), O = flag(Flag::o), P = flag(Flag::p);
    auto sign_ne = bin(Op::Xor, S, O);
    if (cc == "o") return O;
    if (cc == "no") return bnot(O);
    if (cc == "b" || cc == "c" || cc == "nae") return C;
    if (cc == "ae" || cc == "nb" || cc == "nc") return bnot(C);
    if (cc == "e" || cc == "z") return Z;
    if (cc == "ne" || cc == "nz") return bnot(Z);
    if (cc == "be" || cc == "na") return bin(Op::Or, C, Z);
    if (cc == "a" || cc == "nbe") return bnot(bin(Op::Or, C, Z));
    if (cc == "s") return S;
    if (cc == "ns") return bnot(S);
    if (cc == "p" || cc == "pe") return P;
    if (cc == "np" || cc == "po") return bnot(P);
    if (cc == "l" || cc == "nge") return sign_ne;
    if (cc == "ge" || cc == "nl") return bnot(sign_ne);
    if (cc == "le" || cc == "ng") return bin(Op::Or, Z, sign_ne);
    return bnot(bin(Op::Or, Z, sign_ne));  // g, nle
  }

  void expect_args(const AsmInstr& in, std::size_t lo, std::size_t hi) const {
    if (in.args.size() < lo || in.args.size() > hi)
      throw Error(ErrorKind::UnknownMnemonic, "wrong operand count for '" + in.mnemonic + "'");
  }

  void lift_one(const AsmInstr& in);
  void lift_shift(const Decoded& d, const AsmInstr& in);
  void lift_mul(const Decoded& d, const AsmInstr& in);
  void lift_cmpxchg8b(const AsmInstr& in);

  void resolve_labels() {
    for (const auto& f : fixups_) {
      std::optional<int> target;
      const std::string& r = f.ref;
      const bool numeric_ref = r.size() > 1 && (r.back() == 'f' || r.back() == 'b') &&
                               r.substr(0, r.size() - 1).find_first_not_of("0123456789") == std::string::npos;
      if (numeric_ref) {
        std::string name = r.substr(0, r.size() - 1);
        if (r.back() == 'f') {
          for (const auto& l : labels_)
            if (l.name == name && l.order > f.order) {
              target = l.pc;
              break;
            }
        } else {
          for (const auto& l : labels_)
            if (l.name == name && l.order <= f.order) target = l.pc;
        }
      } else {
        for (const auto& l : labels_)
          if (l.name == r) target = l.pc;
      }
      if (!target) throw Error(ErrorKind::UnknownMnemonic, "jump to a label outside the template: " + r);
      p_.instrs[f.pc].target = *target;
    }
  }

  const FormalInterface& fi_;
  IRProgram p_;
  int origin_ = 0;
  std::vector<LabelDef> labels_;
  std::vector<Fixup> fixups_;
};

void Lifter::lift_one(const AsmInstr& in) {
  const Decoded d = decode(in.mnemonic);
  const auto& args = in.args;
  for (const auto& a : args)
    if (a.kind == AsmArg::Kind::VectorRegister)
      throw Error(ErrorKind::UnknownMnemonic, "vector instruction '" + in.mnemonic + "'");
  std::vector<const AsmArg*> all;
  for (const auto& a : args) all.push_back(&a);
  const std::string& b = d.base;

  if (b == "nop") return;
  if (b == "jmp" || b == "j") {
    expect_args(in, 1, 1);
    if (args[0].kind != AsmArg::Kind::Label) throw Error(ErrorKind::UnknownMnemonic, "unsupported jump operand");
    fixups_.push_back({pc(), args[0].symbol, origin_});
    emit(b == "jmp" ? Instr::jump(-1) : Instr::branch(condition(d.cc), -1));
    return;
  }
  if (b == "mov") {
    expect_args(in, 2, 2);
    unsigned w = infer_width(d, all);
    write(args[1], w, read(args[0], w));
    return;
  }
  if (b == "movz" || b == "movs") {
    expect_args(in, 2, 2);
    unsigned dw = d.width ? d.width : infer_width({}, {&args[1]});
    unsigned sw = d.src_width ? d.src_width : infer_width({}, {&args[0]});
    if (sw >= dw) throw Error(ErrorKind::UnknownMnemonic, "bad extension widths in '" + in.mnemonic + "'");
    ExprPtr v = read(args[0], sw);
    write(args[1], dw, b == "movz" ? mk_zext(v, dw) : mk_sext(v, dw));
    return;
  }
  if (b == "lea") {
    expect_args(in, 2, 2);
    unsigned w = infer_width(d, {&args[1]});
    write(args[1], w, mk_resize(address(args[0]), w));
    return;
  }
  if (b == "xchg") {
    expect_args(in, 2, 2);
    unsigned w = infer_width(d, all);
    ExprPtr x = stash(read(args[0], w)), y = stash(read(args[1], w));
    const bool first_is_mem = is_memory(args[0]);
    write(args[first_is_mem ? 0 : 1], w, first_is_mem ? y : x);
    write(args[first_is_mem ? 1 : 0], w, first_is_mem ? x : y);
    return;
  }
  if (b == "add" || b == "adc" || b == "sub" || b == "sbb" || b == "cmp") {
    expect_args(in, 2, 2);
    unsigned w = infer_width(d, all);
    ExprPtr src = stable(read(args[0], w)), dst = stable(read(args[1], w));
    ExprPtr carry = (b == "adc" || b == "sbb") ? flag(Flag::c) : nullptr;
    ExprPtr res;
    if (b == "add" || b == "adc") {
      res = bin(Op::Add, dst, src);
      if (carry) res = bin(Op::Add, res, mk_zext(carry, w));
    } else {
      res = bin(Op::Sub, dst, src);
      if (carry) res = bin(Op::Sub, res, mk_zext(carry, w));
    }
    res = stash(res);
    if (carry) carry = stash(carry);
    if (b == "cmp") {
      flags_sub(dst, src, res, nullptr);
      return;
    }
    if (is_memory(args[1])) write(args[1], w, res);
    if (b == "add" || b == "adc")
      flags_add(dst, src, res, carry);
    else
      flags_sub(dst, src, res, carry);
    if (!is_memory(args[1])) write(args[1], w, res);
    return;
  }
  if (b == "inc" || b == "dec" || b == "neg" || b == "not") {
    expect_args(in, 1, 1);
    unsigned w = infer_width(d, all);
    ExprPtr a = stable(read(args[0], w));
    ExprPtr one = c(w, 1);
    ExprPtr res = stash(b == "inc"   ? bin(Op::Add, a, one)
                        : b == "dec" ? bin(Op::Sub, a, one)
                        : b == "neg" ? mk_unary(Op::Neg, a)
                                     : bnot(a));
    const bool mem = is_memory(args[0]);
    if (mem) write(args[0], w, res);
    if (b == "inc") flags_add(a, one, res, nullptr, false);
    if (b == "dec") flags_sub(a, one, res, nullptr, false);
    if (b == "neg") {
      set_flag(Flag::c, bin(Op::Ne, a, c(w, 0)));
      set_flag(Flag::o, bin(Op::Eq, a, c(w, 1ull << (w - 1))));
      set_flag(Flag::a, bit(bin(Op::Xor, a, res), 4));
      flags_szp(res);
    }
    if (!mem) write(args[0], w, res);
    return;
  }
  if (b == "and" || b == "or" || b == "xor" || b == "test") {
    expect_args(in, 2, 2);
    unsigned w = infer_width(d, all);
    ExprPtr src = stable(read(args[0], w)), dst = stable(read(args[1], w));
    Op op = b == "or" ? Op::Or : b == "xor" ? Op::Xor : Op::And;
    ExprPtr res = stash(bin(op, dst, src));
    if (b == "test") {
      flags_logic(res);
      return;
    }
    const bool mem = is_memory(args[1]);
    if (mem) write(args[1], w, res);
    flags_logic(res);
    if (!mem) write(args[1], w, res);
    return;
  }
  if (b == "shl" || b == "shr" || b == "sar" || b == "rol" || b == "ror") {
    lift_shift(d, in);
    return;
  }
  if (b == "mul" || b == "imul") {
    lift_mul(d, in);
    return;
  }
  if (b == "bswap") {
    expect_args(in, 1, 1);
    if (infer_width(d, all) != 32) throw Error(ErrorKind::UnknownMnemonic, "bswap needs a 32-bit register");
    ExprPtr a = read(args[0], 32);
    ExprPtr r = mk_concat(mk_concat(mk_extract(a, 0, 8), mk_extract(a, 8, 8)),
                          mk_concat(mk_extract(a, 16, 8), mk_extract(a, 24, 8)));
    write(args[0], 32, r);
    return;
  }
  if (b == "push") {
    expect_args(in, 1, 1);
    unsigned w = args[0].kind == AsmArg::Kind::Immediate && !d.width ? 32 : infer_width(d, all);
    if (w != 16 && w != 32) throw Error(ErrorKind::UnknownMnemonic, "bad push width");
    ExprPtr v = stash(read(args[0], w));
    ExprPtr esp = mk_var(Location::reg(Reg::esp), 32);
    emit(Instr::assign(Location::reg(Reg::esp), bin(Op::Sub, esp, c(32, w / 8))));
    emit(Instr::store(esp, v, w / 8));
    return;
  }
  if (b == "pop") {
    expect_args(in, 1, 1);
    unsigned w = infer_width(d, all);
    if (w != 16 && w != 32) throw Error(ErrorKind::UnknownMnemonic, "bad pop width");
    ExprPtr esp = mk_var(Location::reg(Reg::esp), 32);
    ExprPtr v = stash(mk_load(esp, w / 8));
    emit(Instr::assign(Location::reg(Reg::esp), bin(Op::Add, esp, c(32, w / 8))));
    write(args[0], w, v);
    return;
  }
  if (b == "set") {
    expect_args(in, 1, 1);
    write(args[0], 8, mk_zext(condition(d.cc), 8));
    return;
  }
  if (b == "cmov") {
    expect_args(in, 2, 2);
    unsigned w = infer_width(d, all);
    if (w == 8) throw Error(ErrorKind::UnknownMnemonic, "cmov has no byte form");
    write(args[1], w, mk_ite(condition(d.cc), read(args[0], w), read(args[1], w)));
    return;
  }
  if (b == "cmpxchg") {
    expect_args(in, 2, 2);
    unsigned w = infer_width(d, all);
    SubReg acc{Reg::eax, w, 0};
    ExprPtr a = stash(reg_read(acc));
    ExprPtr src = stash(read(args[0], w));
    ExprPtr dst = stash(read(args[1], w));
    ExprPtr res = stash(bin(Op::Sub, a, dst));
    ExprPtr z = stash(bin(Op::Eq, a, dst));
    const bool mem = is_memory(args[1]);
    if (mem) write(args[1], w, mk_ite(z, src, dst));
    flags_sub(a, dst, res, nullptr);
    if (!mem) write(args[1], w, mk_ite(z, src, dst));
    reg_write(acc, mk_ite(z, a, dst));
    return;
  }
  if (b == "cmpxchg8b") {
    lift_cmpxchg8b(in);
    return;
  }
  throw Error(ErrorKind::UnknownMnemonic, "unsupported instruction '" + in.mnemonic + "'");
}

void Lifter::lift_shift(const Decoded& d, const AsmInstr& in) {
  expect_args(in, 1, 2);
  const AsmArg& dst_arg = in.args.back();
  const unsigned w = infer_width(d, {&dst_arg});
  ExprPtr count8;
  if (in.args.size() == 1) {
    count8 = c(8, 1);
  } else {
    const AsmArg& ca = in.args[0];
    if (ca.kind == AsmArg::Kind::Register && !(ca.reg.parent == Reg::ecx && ca.reg.width == 8 && ca.reg.shift == 0))
      throw Error(ErrorKind::UnknownMnemonic, "shift count must be %cl or an immediate");
    count8 = read(ca, 8);
  }
  ExprPtr cnt = simplify(bin(Op::And, count8, c(8, 0x1f)));
  if (cnt->is_const(0)) return;
  cnt = stash(mk_resize(mk_zext(cnt, std::max(w, 8u)), w));
  const bool variable = !cnt->is_const();
  const std::string& b = d.base;

  ExprPtr a = stable(read(dst_arg, w));
  ExprPtr res, cf, of;
  if (b == "shl") {
    res = bin(Op::Shl, a, cnt);
    cf = bit(bin(Op::Shr, a, bin(Op::Sub, c(w, w), cnt)), 0);
    res = stash(res);
    of = bin(Op::Xor, msb(res), cf);
  } else if (b == "shr") {
    res = stash(bin(Op::Shr, a, cnt));
    cf = bit(bin(Op::Shr, a, bin(Op::Sub, cnt, c(w, 1))), 0);
    of = msb(a);
  } else if (b == "sar") {
    res = stash(bin(Op::Sar, a, cnt));
    cf = bit(bin(Op::Sar, a, bin(Op::Sub, cnt, c(w, 1))), 0);
    of = c(1, 0);
  } else {
    ExprPtr rot = w == 32 ? cnt : bin(Op::Urem, cnt, c(w, w));
    ExprPtr back = bin(Op::Sub, c(w, w), rot);
    ExprPtr rotated = b == "rol" ? bin(Op::Or, bin(Op::Shl, a, rot), bin(Op::Shr, a, back))
                                 : bin(Op::Or, bin(Op::Shr, a, rot), bin(Op::Shl, a, back));
    res = stash(mk_ite(bin(Op::Eq, rot, c(w, 0)), a, rotated));
    cf = b == "rol" ? bit(res, 0) : msb(res);
    of = b == "rol" ? bin(Op::Xor, msb(res), cf) : bin(Op::Xor, msb(res), bit(res, w - 2));
  }
  cf = stash(cf);
  auto guarded = [&](Flag f, ExprPtr v) {
    set_flag(f, variable ? mk_ite(bin(Op::Eq, cnt, c(w, 0)), flag(f), v) : v);
  };
  const bool mem = is_memory(dst_arg);
  if (mem) write(dst_arg, w, res);
  guarded(Flag::c, cf);
  guarded(Flag::o, of);
  if (b != "rol" && b != "ror") {
    guarded(Flag::a, c(1, 0));
    guarded(Flag::z, bin(Op::Eq, res, c(w, 0)));
    guarded(Flag::s, msb(res));
    guarded(Flag::p, parity(res));
  }
  if (!mem) write(dst_arg, w, res);
}

void Lifter::lift_mul(const Decoded& d, const AsmInstr& in) {
  expect_args(in, 1, 3);
  const bool is_signed = d.base == "imul";
  std::vector<const AsmArg*> all;
  for (const auto& a : in.args) all.push_back(&a);
  if (in.args.size() == 1) {
    const unsigned w = infer_width(d, all);
    ExprPtr src = stash(read(in.args[0], w));
    ExprPtr acc = reg_read({Reg::eax, w, 0});
    auto ext = [&](ExprPtr e) { return is_signed ? mk_sext(e, 2 * w) : mk_zext(e, 2 * w); };
    ExprPtr prod = stash(bin(Op::Mul, ext(acc), ext(src)));
    ExprPtr lo = mk_extract(prod, 0, w), hi = mk_extract(prod, w, w);
    ExprPtr overflow = is_signed ? bin(Op::Ne, prod, mk_sext(lo, 2 * w)) : bin(Op::Ne, hi, c(w, 0));
    overflow = stash(overflow);
    set_flag(Flag::c, overflow);
    set_flag(Flag::o, overflow);
    for (Flag f : {Flag::z, Flag::s, Flag::p, Flag::a}) set_flag(f, c(1, 0));
    if (w == 8) {
      reg_write({Reg::eax, 16, 0}, prod);
    } else {
      reg_write({Reg::edx, w, 0}, hi);
      reg_write({Reg::eax, w, 0}, lo);
    }
    return;
  }
  if (!is_signed) throw Error(ErrorKind::UnknownMnemonic, "mul takes one operand");
  const AsmArg& dst = in.args.back();
  const unsigned w = infer_width(d, {&dst});
  ExprPtr x = stable(read(in.args.size() == 3 ? in.args[1] : dst, w));
  ExprPtr y = stable(read(in.args[0], w));
  ExprPtr prod = stash(bin(Op::Mul, mk_sext(x, 2 * w), mk_sext(y, 2 * w)));
  ExprPtr lo = mk_extract(prod, 0, w);
  ExprPtr overflow = stash(bin(Op::Ne, prod, mk_sext(lo, 2 * w)));
  set_flag(Flag::c, overflow);
  set_flag(Flag::o, overflow);
  for (Flag f : {Flag::z, Flag::s, Flag::p, Flag::a}) set_flag(f, c(1, 0));
  write(dst, w, lo);
}

void Lifter::lift_cmpxchg8b(const AsmInstr& in) {
  expect_args(in, 1, 1);
  if (!is_memory(in.args[0])) throw Error(ErrorKind::UnknownMnemonic, "cmpxchg8b needs a memory operand");
  ExprPtr addr = stash(address(in.args[0]));
  ExprPtr old = stash(mk_load(addr, 8));
  auto r32 = [](Reg r) { return mk_var(Location::reg(r), 32); };
  ExprPtr z = stash(bin(Op::Eq, mk_concat(r32(Reg::edx), r32(Reg::eax)), old));
  emit(Instr::store(addr, mk_ite(z, mk_concat(r32(Reg::ecx), r32(Reg::ebx)), old), 8));
  set_flag(Flag::z, z);
  emit(Instr::assign(Location::reg(Reg::edx), mk_ite(z, r32(Reg::edx), mk_extract(old, 32, 32))));
  emit(Instr::assign(Location::reg(Reg::eax), mk_ite(z, r32(Reg::eax), mk_extract(old, 0, 32))));
}

}  // namespace

IRProgram lift(const ParsedTemplate& t, const FormalInterface& fi) { return Lifter(fi).run(t); }

IRProgram lift_chunk(const ChunkAst& chunk, const FormalInterface& fi) {
  return lift(parse_template(chunk.asm_template, chunk, fi), fi);
}

}  // namespace ric
