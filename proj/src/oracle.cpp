#include "ric/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "ric/error.hpp"

namespace ric {

namespace {

constexpr uint32_t kSlotStart = 0x400;
constexpr uint32_t kStackTopGap = 0x200;
constexpr uint32_t kScratch = 0x100;
constexpr uint32_t kIndexValue = 4;

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string hex_bytes(const std::vector<uint8_t>& b) {
  std::ostringstream os;
  os << "0x" << std::hex;
  for (auto it = b.rbegin(); it != b.rend(); ++it) os << (*it < 16 ? "0" : "") << static_cast<int>(*it);
  return os.str();
}

std::string hex(uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::string lvalue_key(const TokenInfo& t) {
  std::string k;
  for (char c : t.expr_text)
    if (!std::isspace(static_cast<unsigned char>(c))) k += c;
  return k.empty() ? "#" + std::to_string(t.id) : k;
}

void collect_symbols(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  if (e->op == Op::Symbol) out.insert(e->name);
  for (const auto& a : e->args) collect_symbols(a, out);
}

}  // namespace

const char* to_string(OracleOutcome o) {
  switch (o) {
    case OracleOutcome::Pass: return "pass";
    case OracleOutcome::Violation: return "violation";
    case OracleOutcome::Inconclusive: return "inconclusive";
  }
  return "?";
}

const char* to_string(Analysis a) {
  switch (a) {
    case Analysis::FrameWrite: return "frame_write";
    case Analysis::FrameRead: return "frame_read";
    case Analysis::Unicity: return "unicity";
  }
  return "?";
}

bool MachineState::in_range(uint64_t addr, unsigned bytes) const {
  return addr >= base && addr + bytes <= static_cast<uint64_t>(base) + memory.size();
}

uint64_t MachineState::load(uint64_t addr, unsigned bytes) const {
  if (!in_range(addr, bytes)) throw Error(ErrorKind::OutOfSandbox, "load from " + hex(addr));
  uint64_t v = 0;
  for (unsigned k = 0; k < bytes; ++k) v |= static_cast<uint64_t>(memory[addr - base + k]) << (8 * k);
  return v;
}

void MachineState::store(uint64_t addr, uint64_t value, unsigned bytes) {
  if (!in_range(addr, bytes)) throw Error(ErrorKind::OutOfSandbox, "store to " + hex(addr));
  for (unsigned k = 0; k < bytes; ++k) memory[addr - base + k] = static_cast<uint8_t>(value >> (8 * k));
}

namespace {

// Expressions flattened to postfix code, so the step loop avoids recursion
// and shared-pointer chasing. Ite compiles to jumps to keep evaluation lazy.
struct Step {
  enum class Kind : uint8_t { Push, Reg, Flag, Temp, Load, Fold, JumpIfZero, Jump, Fail, Save, Recall };
  Kind kind = Kind::Push;
  Op op = Op::Const;
  uint8_t arity = 0;
  unsigned width = 0, w0 = 0, w1 = 0;
  uint64_t value = 0;  // constant, mask, jump target or message index
};

struct Code {
  std::vector<Step> steps;
  std::size_t slots = 0;  // shared subexpression values
};

class Compiler {
 public:
  std::vector<std::pair<ErrorKind, std::string>> messages;

  Code compile(const ExprPtr& e) {
    Code c;
    uses_.clear();
    saved_.clear();
    keys_.clear();
    count(e);
    emit(e, c.steps);
    c.slots = saved_.size();
    return c;
  }

 private:
  void fail(std::vector<Step>& out, ErrorKind k, std::string why) {
    Step st;
    st.kind = Step::Kind::Fail;
    st.value = messages.size();
    messages.emplace_back(k, std::move(why));
    out.push_back(st);
  }

  // Structurally equal subtrees share one key node.
  const Expr* key(const ExprPtr& e) {
    auto& bucket = keys_[e->hash];
    for (const ExprPtr& k : bucket)
      if (k == e || equal(k, e)) return k.get();
    bucket.push_back(e);
    return e.get();
  }

  void count(const ExprPtr& e) {
    if (++uses_[key(e)] > 1) return;
    for (const auto& a : e->args) count(a);
  }

  // Repeated subtrees are computed once. Only code outside Ite branches is
  // shared, since everything there runs unconditionally.
  void emit(const ExprPtr& e, std::vector<Step>& out) {
    const Expr* k = key(e);
    const bool shared = branch_depth_ == 0 && !e->args.empty() && uses_[k] > 1;
    if (shared) {
      if (auto it = saved_.find(k); it != saved_.end()) {
        Step r;
        r.kind = Step::Kind::Recall;
        r.value = it->second;
        out.push_back(r);
        return;
      }
    }
    emit_node(e, out);
    if (shared) {
      Step w;
      w.kind = Step::Kind::Save;
      w.value = saved_.size();
      saved_.emplace(k, w.value);
      out.push_back(w);
    }
  }

  void emit_node(const ExprPtr& e, std::vector<Step>& out) {
    Step st;
    st.width = e->width;
    st.value = mask_of(e->width);
    switch (e->op) {
      case Op::Const:
        st.value = e->value;
        out.push_back(st);
        return;
      case Op::Var:
        switch (e->loc.kind) {
          case Location::Kind::Reg: st.kind = Step::Kind::Reg; break;
          case Location::Kind::Flag: st.kind = Step::Kind::Flag; break;
          case Location::Kind::Temp: st.kind = Step::Kind::Temp; break;
          default: return fail(out, ErrorKind::MissingToken, "unsubstituted " + e->loc.to_string());
        }
        st.arity = 0;
        st.w0 = static_cast<unsigned>(e->loc.id);
        out.push_back(st);
        return;
      case Op::Load:
        emit(e->args[0], out);
        st.kind = Step::Kind::Load;
        out.push_back(st);
        return;
      case Op::Symbol: return fail(out, ErrorKind::OutOfSandbox, "unbound symbol " + e->name);
      case Op::Opaque: return fail(out, ErrorKind::OutOfSandbox, "opaque value in concrete evaluation");
      case Op::Ite: {
        emit(e->args[0], out);
        const std::size_t jz = out.size();
        out.push_back(Step{Step::Kind::JumpIfZero});
        ++branch_depth_;
        emit(e->args[1], out);
        const std::size_t jmp = out.size();
        out.push_back(Step{Step::Kind::Jump});
        out[jz].value = out.size();
        emit(e->args[2], out);
        --branch_depth_;
        out[jmp].value = out.size();
        return;
      }
      default: break;
    }
    for (const auto& a : e->args) emit(a, out);
    st.kind = Step::Kind::Fold;
    st.op = e->op;
    st.arity = static_cast<uint8_t>(e->args.size());
    st.value = e->value;
    st.w0 = e->args.empty() ? 0 : e->args[0]->width;
    st.w1 = e->args.size() > 1 ? e->args[1]->width : 0;
    out.push_back(st);
  }

  std::map<const Expr*, int> uses_;
  std::map<const Expr*, uint64_t> saved_;
  std::map<std::size_t, std::vector<ExprPtr>> keys_;
  int branch_depth_ = 0;
};

}  // namespace

MachineState exec(const IRProgram& p, MachineState s, uint64_t budget) {
  const int n = static_cast<int>(p.instrs.size());
  Compiler compiler;
  std::vector<Code> rhs(n), addr(n);
  for (int k = 0; k < n; ++k) {
    if (p.instrs[k].rhs) rhs[k] = compiler.compile(p.instrs[k].rhs);
    if (p.instrs[k].addr) addr[k] = compiler.compile(p.instrs[k].addr);
  }
  std::vector<uint64_t> temps(p.temp_bits.size(), 0);
  std::size_t depth = 0;
  for (const Code& c : rhs) depth = std::max(depth, c.steps.size());
  for (const Code& c : addr) depth = std::max(depth, c.steps.size());
  std::size_t slots = 0;
  for (const Code& c : rhs) slots = std::max(slots, c.slots);
  for (const Code& c : addr) slots = std::max(slots, c.slots);
  std::vector<uint64_t> stack_mem(depth + 1), slot_mem(slots + 1);
  auto run = [&](const Code& code) -> uint64_t {
    uint64_t* sp = stack_mem.data();  // next free slot
    const std::size_t len = code.steps.size();
    for (std::size_t ip = 0; ip < len; ++ip) {
      const Step& st = code.steps[ip];
      switch (st.kind) {
        case Step::Kind::Push: *sp++ = st.value; break;
        case Step::Kind::Reg: *sp++ = s.regs[st.w0] & st.value; break;
        case Step::Kind::Flag: *sp++ = s.flags[st.w0] & st.value; break;
        case Step::Kind::Temp: *sp++ = temps.at(st.w0) & st.value; break;
        case Step::Kind::Load: sp[-1] = s.load(sp[-1] & 0xffffffffull, st.width / 8) & st.value; break;
        case Step::Kind::Fold: {
          sp -= st.arity;
          *sp = fold(st.op, st.width, st.value, st.w0, st.w1, sp);
          ++sp;
          break;
        }
        case Step::Kind::JumpIfZero:
          if (!(*--sp & 1)) ip = st.value - 1;
          break;
        case Step::Kind::Jump: ip = st.value - 1; break;
        case Step::Kind::Save: slot_mem[st.value] = sp[-1]; break;
        case Step::Kind::Recall: *sp++ = slot_mem[st.value]; break;
        case Step::Kind::Fail: {
          const auto& [kind, why] = compiler.messages[st.value];
          throw Error(kind, why);
        }
      }
    }
    return sp[-1];
  };

  uint64_t steps = 0;
  int pc = 0;
  while (pc < n) {
    if (++steps > budget) throw Error(ErrorKind::StepLimit, "step budget exhausted");
    const Instr& i = p.instrs[pc];
    switch (i.kind) {
      case Instr::Kind::Halt: return s;
      case Instr::Kind::Goto: pc = i.target; continue;
      case Instr::Kind::Branch: pc = (run(rhs[pc]) & 1) ? i.target : pc + 1; continue;
      case Instr::Kind::Assign: {
        const uint64_t v = run(rhs[pc]);
        switch (i.dst.kind) {
          case Location::Kind::Reg: s.regs[i.dst.id] = static_cast<uint32_t>(v); break;
          case Location::Kind::Flag: s.flags[i.dst.id] = static_cast<uint8_t>(v & 1); break;
          case Location::Kind::Temp: temps.at(i.dst.id) = v; break;
          default: throw Error(ErrorKind::MissingToken, "unsubstituted " + i.dst.to_string());
        }
        break;
      }
      case Instr::Kind::Store: {
        const uint64_t a = run(addr[pc]);
        s.store(a, run(rhs[pc]), i.bytes);
        break;
      }
    }
    ++pc;
  }
  return s;
}

namespace {

bool solve_address(const MemAddr& a, uint32_t target, std::map<Reg, uint32_t>& pinned) {
  const uint32_t d = static_cast<uint32_t>(a.disp);
  const uint32_t s = static_cast<uint32_t>(a.scale);
  auto pinned_value = [&](Reg r) -> std::optional<uint32_t> {
    auto it = pinned.find(r);
    return it == pinned.end() ? std::nullopt : std::optional<uint32_t>(it->second);
  };
  if (!a.base && !a.index) return target == d;
  if (a.base && a.index && *a.base == *a.index) {
    if (auto v = pinned_value(*a.base)) return *v * (1 + s) + d == target;
    if ((target - d) % (1 + s)) return false;
    pinned[*a.base] = (target - d) / (1 + s);
    return true;
  }
  uint32_t ival = 0;
  if (a.index) {
    if (auto v = pinned_value(*a.index)) {
      ival = *v;
    } else {
      ival = kIndexValue;
      pinned[*a.index] = ival;
    }
  }
  const uint32_t need = target - d - ival * s;
  if (!a.base) return need == 0;
  if (auto v = pinned_value(*a.base)) return *v == need;
  pinned[*a.base] = need;
  return true;
}

}  // namespace

std::optional<Placement> place(const FormalInterface& fi, const TokenAssignment& t, const IRProgram& program,
                               uint32_t sandbox_size) {
  Placement pl;
  pl.assignment = t;
  const uint32_t limit = kSandboxBase + sandbox_size - 0x800;
  uint32_t next = kSandboxBase + kSlotStart;
  bool overflow = false;
  auto alloc = [&](unsigned bytes) {
    uint32_t a = next;
    next += ((bytes + 64 + 255) / 256) * 256;
    if (next > limit) overflow = true;
    return a;
  };

  std::map<std::string, int> lvalue_owner;
  for (const auto& [id, op] : t) {
    if (op.kind != AsmOperand::Kind::Memory && op.kind != AsmOperand::Kind::Address) continue;
    const auto& tok = fi.tokens.at(id);
    const unsigned len = tok.region ? static_cast<unsigned>(tok.region->span) : static_cast<unsigned>(tok.size_bytes);
    const std::string key = lvalue_key(tok);
    auto owner = lvalue_owner.find(key);
    bool shared = owner != lvalue_owner.end();
    uint32_t slot = shared ? pl.slot.at(owner->second) : alloc(len + 16);
    if (overflow) return std::nullopt;
    bool ok = false;
    for (uint32_t adj = 0; adj < (shared ? 1u : 16u) && !ok; ++adj) {
      auto trial = pl.pinned;
      if (solve_address(op.addr, slot + adj, trial)) {
        pl.pinned = std::move(trial);
        slot += adj;
        ok = true;
      }
    }
    if (!ok) return std::nullopt;
    pl.slot[id] = slot;
    pl.slot_bytes[id] = op.kind == AsmOperand::Kind::Address ? 0 : len;
    if (!shared) lvalue_owner[key] = id;
  }

  std::set<std::string> names;
  for (const auto& in : program.instrs) {
    collect_symbols(in.rhs, names);
    collect_symbols(in.addr, names);
  }
  for (const auto& n : names) pl.symbols[n] = alloc(64);
  if (overflow) return std::nullopt;

  std::set<Reg> pointer_regs;
  for (const auto& [id, tok] : fi.tokens) {
    if (!tok.region || !pl.slot.count(id)) continue;
    const AsmOperand& ptr = t.at(tok.region->pointer_token);
    if (ptr.kind != AsmOperand::Kind::Register) return std::nullopt;
    const uint32_t value = pl.slot.at(id) - static_cast<uint32_t>(tok.region->offset);
    auto it = pl.pinned.find(ptr.reg);
    if (it != pl.pinned.end() && it->second != value) return std::nullopt;
    pl.pinned[ptr.reg] = value;
    pointer_regs.insert(ptr.reg);
  }
  // Input registers must carry their own values, not an address.
  for (const auto& [id, op] : t) {
    const auto& tok = fi.tokens.at(id);
    if (op.kind == AsmOperand::Kind::Register && tok.is_input && pl.pinned.count(op.reg) &&
        !pointer_regs.count(op.reg))
      return std::nullopt;
  }

  if (auto it = pl.pinned.find(Reg::esp); it != pl.pinned.end()) {
    pl.esp0 = it->second;
    if (pl.esp0 < kSandboxBase + kScratch || pl.esp0 > kSandboxBase + sandbox_size) return std::nullopt;
  } else {
    pl.esp0 = kSandboxBase + sandbox_size - kStackTopGap;
    pl.pinned[Reg::esp] = pl.esp0;
  }
  return pl;
}

MachineState random_state(const Placement& pl, uint32_t sandbox_size, std::mt19937_64& rng) {
  MachineState s;
  s.memory.resize(sandbox_size);
  // Register values: 5/8 sandbox addresses clear of the operand slots and the
  // stack (so pointer-taking chunks run), 1/4 small counts (so counting loops
  // end within the step budget), 1/8 arbitrary words.
  const uint32_t lo = 0x1000, span = sandbox_size > 0x3000 ? sandbox_size - 0x3000 : 0;
  for (auto& r : s.regs) {
    const uint64_t v = rng();
    const uint32_t payload = static_cast<uint32_t>(v >> 8);
    switch (v & 7) {
      case 5:
      case 6: r = payload & 0xff; break;
      case 7: r = static_cast<uint32_t>(v >> 32); break;
      default: r = span ? s.base + lo + (payload % span & ~3u) : static_cast<uint32_t>(v >> 32);
    }
  }
  uint64_t fl = rng();
  for (int f = 0; f < kFlagCount; ++f) s.flags[f] = (fl >> f) & 1;
  for (std::size_t k = 0; k < s.memory.size(); k += 8) {
    uint64_t v = rng();
    for (std::size_t j = 0; j < 8 && k + j < s.memory.size(); ++j) s.memory[k + j] = static_cast<uint8_t>(v >> (8 * j));
  }
  for (const auto& [r, v] : pl.pinned) s.set_reg(r, v);
  return s;
}

std::vector<uint8_t> token_bytes(const MachineState& m, const Placement& pl, const FormalInterface& fi, int id) {
  const AsmOperand& op = pl.assignment.at(id);
  const unsigned n = static_cast<unsigned>(fi.tokens.at(id).size_bytes);
  std::vector<uint8_t> out;
  auto push_value = [&](uint64_t v, unsigned bytes) {
    for (unsigned k = 0; k < bytes; ++k) out.push_back(static_cast<uint8_t>(v >> (8 * k)));
  };
  switch (op.kind) {
    case AsmOperand::Kind::Register: push_value(m.reg(op.reg), std::min(n, 4u)); break;
    case AsmOperand::Kind::Immediate: push_value(op.imm, std::min(n, 4u)); break;
    case AsmOperand::Kind::Address: push_value(pl.slot.at(id), 4); break;
    case AsmOperand::Kind::Memory: {
      const uint32_t a = pl.slot.at(id);
      const unsigned len = pl.slot_bytes.at(id);
      for (unsigned k = 0; k < len; ++k) out.push_back(static_cast<uint8_t>(m.load(a + k, 1)));
      break;
    }
  }
  return out;
}

void set_token_bytes(MachineState& m, const Placement& pl, const FormalInterface& fi, int id,
                     const std::vector<uint8_t>& bytes) {
  (void)fi;
  const AsmOperand& op = pl.assignment.at(id);
  if (op.kind == AsmOperand::Kind::Register) {
    uint32_t v = m.reg(op.reg);
    for (std::size_t k = 0; k < bytes.size() && k < 4; ++k) {
      v &= ~(0xffu << (8 * k));
      v |= static_cast<uint32_t>(bytes[k]) << (8 * k);
    }
    m.set_reg(op.reg, v);
  } else if (op.kind == AsmOperand::Kind::Memory) {
    const uint32_t a = pl.slot.at(id);
    for (std::size_t k = 0; k < bytes.size(); ++k) m.store(a + k, bytes[k], 1);
  }
}

namespace {

bool in_scratch(uint64_t addr, const MachineState& m, const Placement& pl) {
  return m.reg(Reg::esp) == pl.esp0 && addr < pl.esp0 && addr >= pl.esp0 - kScratch;
}

// Memory operands are compared through their tokens, wherever each placement put them.
bool in_token_slot(uint64_t addr, const Placement& pl) {
  for (const auto& [id, slot] : pl.slot) {
    const auto it = pl.slot_bytes.find(id);
    const uint64_t size = it != pl.slot_bytes.end() ? it->second : 4;
    if (addr >= slot && addr < slot + size) return true;
  }
  return false;
}

}  // namespace

bool equivalent(const MachineState& m1, const MachineState& m2, const Placement& p1, const Placement& p2,
                const std::set<int>& tokens, bool compare_memory, const FormalInterface& fi, std::string* why) {
  for (int t : tokens) {
    auto b1 = token_bytes(m1, p1, fi, t), b2 = token_bytes(m2, p2, fi, t);
    if (b1 != b2) {
      if (why) *why = "%" + std::to_string(t) + ": " + hex_bytes(b1) + " vs " + hex_bytes(b2);
      return false;
    }
  }
  if (!compare_memory) return true;
  const std::size_t n = std::min(m1.memory.size(), m2.memory.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (m1.memory[k] == m2.memory[k]) continue;
    const uint64_t addr = m1.base + k;
    if (in_scratch(addr, m1, p1) && in_scratch(addr, m2, p2)) continue;
    if (&p1 != &p2 && (in_token_slot(addr, p1) || in_token_slot(addr, p2))) continue;
    if (why) *why = "memory at " + hex(addr) + " differs";
    return false;
  }
  return true;
}

namespace {

struct Run {
  std::optional<MachineState> state;
  std::string trap;
};

Run run(const IRProgram& p, const MachineState& s) {
  Run r;
  try {
    r.state = exec(p, s);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::OutOfSandbox && e.kind() != ErrorKind::StepLimit) throw;
    r.trap = e.what();
  }
  return r;
}

class OracleRunner {
 public:
  OracleRunner(const FormalInterface& fi, const IRProgram& lifted, const AssignmentSet& st, const TrialConfig& cfg)
      : fi_(fi), lifted_(lifted), st_(st), cfg_(cfg) {}

  OracleResult check(Analysis a) {
    OracleResult res;
    res.analysis = a;
    res.truncated = st_.truncated;
    const int n = static_cast<int>(st_.assignments.size());
    for (int k = 0; k < cfg_.trials; ++k) {
      const uint64_t trial_seed = splitmix64(cfg_.seed ^ splitmix64(static_cast<uint64_t>(k) + 1));
      std::mt19937_64 rng(trial_seed);
      int idx = cfg_.trials >= n ? k % n : static_cast<int>((static_cast<int64_t>(k) * n) / cfg_.trials);
      int chosen = -1;
      for (int tries = 0; tries < n; ++tries) {
        int cand = (idx + tries) % n;
        if (prepared(cand)) {
          chosen = cand;
          break;
        }
      }
      ++res.trials_run;
      if (chosen < 0) continue;
      std::optional<Witness> w;
      bool conclusive = false;
      switch (a) {
        case Analysis::FrameWrite: conclusive = frame_write(chosen, rng, w); break;
        case Analysis::FrameRead: conclusive = frame_read(chosen, rng, w); break;
        case Analysis::Unicity: conclusive = unicity(chosen, rng, w); break;
      }
      if (conclusive) ++res.conclusive;
      if (w) {
        w->trial = k;
        w->trial_seed = trial_seed;
        res.witness = std::move(w);
        res.outcome = OracleOutcome::Violation;
        return res;
      }
    }
    if (res.truncated) res.note = "assignment set truncated";
    res.outcome = (!res.truncated && res.conclusive * 2 >= res.trials_run && res.conclusive > 0)
                      ? OracleOutcome::Pass
                      : OracleOutcome::Inconclusive;
    if (res.conclusive == 0) res.note = "no conclusive trial";
    return res;
  }

 private:
  struct Prepared {
    Placement placement;
    IRProgram program;
  };

  const Prepared* prepared(int idx) {
    auto it = cache_.find(idx);
    if (it != cache_.end()) return it->second ? &*it->second : nullptr;
    std::optional<Prepared> p;
    const auto& t = st_.assignments[idx];
    if (auto pl = place(fi_, t, lifted_, cfg_.sandbox_size)) {
      IRProgram prog = substitute(lifted_, fi_, t, pl->symbols);
      p = Prepared{std::move(*pl), std::move(prog)};
    }
    auto [pos, _] = cache_.emplace(idx, std::move(p));
    return pos->second ? &*pos->second : nullptr;
  }

  std::set<int> outputs() const { return fi_.outputs; }
  std::set<int> inputs() const { return fi_.effective_inputs(); }

  bool frame_write(int idx, std::mt19937_64& rng, std::optional<Witness>& w) {
    const Prepared& pr = *prepared(idx);
    MachineState s = random_state(pr.placement, cfg_.sandbox_size, rng);
    Run r = run(pr.program, s);
    if (!r.state) return false;
    const MachineState& f = *r.state;
    RegSet may_change = fi_.clobbered;
    for (int o : fi_.outputs) {
      const AsmOperand& op = pr.placement.assignment.at(o);
      if (op.kind == AsmOperand::Kind::Register) may_change.insert(op.reg);
    }
    auto report = [&](std::string detail) {
      w = Witness{};
      w->assignment = to_string(pr.placement.assignment);
      w->detail = std::move(detail);
    };
    for (int k = 0; k < kRegCount; ++k) {
      Reg reg = static_cast<Reg>(k);
      if (may_change.contains(reg) || s.reg(reg) == f.reg(reg)) continue;
      report(std::string(reg_name(reg)) + " changed: " + hex(s.reg(reg)) + " -> " + hex(f.reg(reg)));
      return true;
    }
    if (!fi_.flags_clobbered)
      for (int k = 0; k < kFlagCount; ++k)
        if (s.flags[k] != f.flags[k]) {
          report(std::string(flag_name(static_cast<Flag>(k))) + " changed");
          return true;
        }
    if (fi_.memory_separated) {
      for (std::size_t k = 0; k < s.memory.size(); ++k) {
        if (s.memory[k] == f.memory[k]) continue;
        const uint64_t addr = s.base + k;
        if (in_scratch(addr, f, pr.placement)) continue;
        bool in_output = false;
        for (int o : fi_.outputs) {
          auto slot = pr.placement.slot.find(o);
          if (slot == pr.placement.slot.end()) continue;
          if (addr >= slot->second && addr < slot->second + pr.placement.slot_bytes.at(o)) in_output = true;
        }
        if (in_output) continue;
        report("memory at " + hex(addr) + " changed");
        return true;
      }
    }
    return true;
  }

  bool compare_runs(const Run& r1, const Run& r2, const Placement& p1, const Placement& p2,
                    std::optional<Witness>& w) {
    if (!r1.state && !r2.state) return false;
    w = Witness{};
    w->assignment = to_string(p1.assignment);
    if (&p1 != &p2) w->other_assignment = to_string(p2.assignment);
    if (!r1.state || !r2.state) {
      w->detail = "only one run trapped: " + (r1.state ? r2.trap : r1.trap);
      return true;
    }
    std::string why;
    if (equivalent(*r1.state, *r2.state, p1, p2, outputs(), !fi_.memory_separated, fi_, &why)) {
      w.reset();
      return true;
    }
    w->detail = "outputs differ: " + why;
    return true;
  }

  bool frame_read(int idx, std::mt19937_64& rng, std::optional<Witness>& w) {
    const Prepared& pr = *prepared(idx);
    const Placement& pl = pr.placement;
    MachineState s1 = random_state(pl, cfg_.sandbox_size, rng);
    MachineState s2 = random_state(pl, cfg_.sandbox_size, rng);
    if (!fi_.memory_separated) s2.memory = s1.memory;
    for (int t : inputs()) set_token_bytes(s2, pl, fi_, t, token_bytes(s1, pl, fi_, t));
    return compare_runs(run(pr.program, s1), run(pr.program, s2), pl, pl, w);
  }

  bool same_immediates(const TokenAssignment& a, const TokenAssignment& b) const {
    for (const auto& [id, op] : a) {
      const AsmOperand& o = b.at(id);
      if ((op.kind == AsmOperand::Kind::Immediate) != (o.kind == AsmOperand::Kind::Immediate)) return false;
      if (op.kind == AsmOperand::Kind::Immediate && op.imm != o.imm) return false;
    }
    return true;
  }

  bool unicity(int idx, std::mt19937_64& rng, std::optional<Witness>& w) {
    const int n = static_cast<int>(st_.assignments.size());
    std::vector<int> same, other;
    for (int j = 0; j < n; ++j) {
      (same_immediates(st_.assignments[idx], st_.assignments[j]) ? same : other).push_back(j);
    }
    const std::vector<int>& pool = same.empty() ? other : same;
    int j2 = idx;
    if (!pool.empty()) {
      int start = static_cast<int>(rng() % pool.size());
      for (std::size_t k = 0; k < pool.size(); ++k) {
        int cand = pool[(start + k) % pool.size()];
        if (prepared(cand)) {
          j2 = cand;
          break;
        }
      }
    }
    const Prepared& a = *prepared(idx);
    const Prepared& b = *prepared(j2);
    // Only the inputs are shared: everything else is drawn afresh, so the
    // T1 = T2 case covers frame-read.
    MachineState s1 = random_state(a.placement, cfg_.sandbox_size, rng);
    MachineState s2 = random_state(b.placement, cfg_.sandbox_size, rng);
    if (!fi_.memory_separated) s2.memory = s1.memory;
    for (int t : inputs()) set_token_bytes(s2, b.placement, fi_, t, token_bytes(s1, a.placement, fi_, t));
    // Under the memory keyword a memory operand names the same object for
    // every assignment, so its prior contents carry over even when write-only.
    if (!fi_.memory_separated)
      for (const auto& [t, op] : b.placement.assignment)
        if (op.kind == AsmOperand::Kind::Memory && a.placement.assignment.at(t).kind == AsmOperand::Kind::Memory)
          set_token_bytes(s2, b.placement, fi_, t, token_bytes(s1, a.placement, fi_, t));
    return compare_runs(run(a.program, s1), run(b.program, s2), a.placement, b.placement, w);
  }

  const FormalInterface& fi_;
  const IRProgram& lifted_;
  const AssignmentSet& st_;
  const TrialConfig& cfg_;
  std::map<int, std::optional<Prepared>> cache_;
};

}  // namespace

OracleResult oracle_check(const ChunkAst& chunk, Analysis analysis, const TrialConfig& cfg) {
  if (cfg.sandbox_size < 4096) throw Error(ErrorKind::Usage, "sandbox size must be at least 4096 bytes");
  if (cfg.trials < 1) throw Error(ErrorKind::Usage, "trial count must be positive");
  OracleResult res;
  res.analysis = analysis;
  FormalInterface fi;
  IRProgram lifted;
  AssignmentSet st;
  try {
    fi = derive_interface(chunk);
    lifted = lift_chunk(chunk, fi);
    st = enumerate_assignments(fi, cfg.assignment_cap);
  } catch (const Error& e) {
    res.note = e.what();
    return res;
  }
  return OracleRunner(fi, lifted, st, cfg).check(analysis);
}

}  // namespace ric
