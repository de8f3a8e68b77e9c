#include "ric/checker.hpp"

#include <algorithm>
#include <sstream>

#include "ric/error.hpp"

namespace ric {

const char* to_string(IssueCategory c) {
  switch (c) {
    case IssueCategory::FlagClobbered: return "FlagClobbered";
    case IssueCategory::ReadOnlyInputClobbered: return "ReadOnlyInputClobbered";
    case IssueCategory::UnboundRegisterClobbered: return "UnboundRegisterClobbered";
    case IssueCategory::UnboundMemoryWrite: return "UnboundMemoryWrite";
    case IssueCategory::NonWrittenWriteOnlyOutput: return "NonWrittenWriteOnlyOutput";
    case IssueCategory::UnboundRegisterRead: return "UnboundRegisterRead";
    case IssueCategory::UnboundMemoryRead: return "UnboundMemoryRead";
    case IssueCategory::Unicity: return "Unicity";
  }
  return "?";
}

IssueCategory issue_category_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(IssueCategory::Unicity); ++i)
    if (s == to_string(static_cast<IssueCategory>(i))) return static_cast<IssueCategory>(i);
  throw Error(ErrorKind::SchemaViolation, "unknown issue category '" + s + "'");
}

Analysis analysis_of(IssueCategory c) {
  switch (c) {
    case IssueCategory::FlagClobbered:
    case IssueCategory::ReadOnlyInputClobbered:
    case IssueCategory::UnboundRegisterClobbered:
    case IssueCategory::UnboundMemoryWrite: return Analysis::FrameWrite;
    case IssueCategory::Unicity: return Analysis::Unicity;
    default: return Analysis::FrameRead;
  }
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Compliant: return "compliant";
    case Verdict::Issues: return "issues";
    case Verdict::OutOfScope: return "out_of_scope";
    case Verdict::Error: return "error";
  }
  return "?";
}

namespace {

Issue make_issue(const IRProgram& p, IssueCategory c, Location l, int pc, std::string details = {}) {
  Issue i;
  i.category = c;
  i.location = l;
  i.point = pc;
  i.origin = pc >= 0 && pc < static_cast<int>(p.instrs.size()) ? p.instrs[pc].origin : -1;
  i.details = std::move(details);
  return i;
}

std::optional<int> fixed_owner(const FormalInterface& fi, Reg r) {
  for (const auto& [id, t] : fi.tokens)
    if (t.fixed_register == r) return id;
  return std::nullopt;
}

// Location holding the content of a memory-class token.
Location content_of(int token) { return Location::token(token); }

std::vector<bool> reachable_pcs(const IRProgram& p) {
  std::vector<bool> seen(p.instrs.size(), false);
  std::vector<int> work{0};
  while (!work.empty()) {
    int pc = work.back();
    work.pop_back();
    if (seen[pc]) continue;
    seen[pc] = true;
    for (int s : p.successors(pc)) work.push_back(s);
  }
  return seen;
}

}  // namespace

// ---------------------------------------------------------------- liveness

namespace {

class LivenessBuilder {
 public:
  LivenessBuilder(const IRProgram& p, const FormalInterface& fi, const Resolution& r, bool bit_level)
      : p_(p), fi_(fi), r_(r), bit_level_(bit_level) {}

  Liveness run() {
    const int n = static_cast<int>(p_.instrs.size());
    Liveness out;
    out.live_after.assign(n, {});
    std::vector<std::map<Location, uint64_t>> live_in(n);
    bool changed = true;
    while (changed) {
      changed = false;
      for (int pc = n - 1; pc >= 0; --pc) {
        std::map<Location, uint64_t> after;
        for (int s : p_.successors(pc)) merge(after, live_in[s]);
        auto in = transfer(pc, after);
        if (after != out.live_after[pc] || in != live_in[pc]) {
          out.live_after[pc] = std::move(after);
          live_in[pc] = std::move(in);
          changed = true;
        }
      }
    }
    out.live_in = live_in.empty() ? std::map<Location, uint64_t>{} : live_in[0];
    out.first_use = first_use_;
    return out;
  }

 private:
  static void merge(std::map<Location, uint64_t>& into, const std::map<Location, uint64_t>& from) {
    for (const auto& [l, m] : from) into[l] |= m;
  }

  uint64_t full(const Location& l) const {
    if (l.kind == Location::Kind::Memory) return 1;
    if (l.kind == Location::Kind::Token && p_.memory_tokens.count(l.id))
      return mask_of(std::min(fi_.tokens.at(l.id).bits(), 64u));
    return mask_of(p_.bits(l));
  }

  std::map<Location, uint64_t> seeds() const {
    std::map<Location, uint64_t> s;
    for (int id : fi_.outputs) {
      const auto& t = fi_.tokens.at(id);
      if (t.fixed_register) {
        s[Location::reg(*t.fixed_register)] |= bit_level_ ? mask_of(std::min(t.bits(), 32u)) : mask_of(32);
      } else {
        Location l = t.memory_class ? content_of(id) : Location::token(id);
        s[l] |= full(l);
      }
    }
    if (!fi_.memory_separated) s[Location::memory()] = 1;
    return s;
  }

  void add(std::map<Location, uint64_t>& live, const Location& l, uint64_t m, int pc) {
    if (!m) return;
    live[l] |= m;
    auto [it, inserted] = first_use_.try_emplace(l, pc);
    if (!inserted) it->second = std::min(it->second, pc);
  }

  Location target_location(const MemTarget& t) const {
    switch (t.kind) {
      case MemTarget::Kind::TokenMemory: return content_of(t.token);
      case MemTarget::Kind::Stack: return Location::stack(t.slot);
      case MemTarget::Kind::Whole: break;
    }
    return Location::memory();
  }

  void need(std::map<Location, uint64_t>& live, const ExprPtr& e, uint64_t m, int pc) {
    m &= mask_of(e->width);
    if (!m) return;
    if (!bit_level_) m = mask_of(e->width);
    const unsigned w = e->width;
    auto arg = [&](std::size_t i) { return e->args[i]; };
    auto all = [&](const ExprPtr& x) { need(live, x, mask_of(x->width), pc); };
    switch (e->op) {
      case Op::Const:
      case Op::Symbol:
      case Op::Opaque: return;
      case Op::Var:
        if (e->loc.kind == Location::Kind::Reg && !bit_level_) m = mask_of(32);
        add(live, e->loc, bit_level_ ? m : full(e->loc), pc);
        return;
      case Op::Load: {
        all(arg(0));
        MemTarget t = classify_address(r_.resolve(pc, arg(0)), w / 8, fi_);
        Location l = target_location(t);
        add(live, l, full(l), pc);
        return;
      }
      case Op::Not: need(live, arg(0), m, pc); return;
      case Op::Neg:
      case Op::Add:
      case Op::Sub:
      case Op::Mul: {
        unsigned top = 63 - static_cast<unsigned>(__builtin_clzll(m));
        uint64_t prefix = mask_of(top + 1);
        for (const auto& a : e->args) need(live, a, prefix, pc);
        return;
      }
      case Op::Zext: need(live, arg(0), m, pc); return;
      case Op::Sext: {
        const unsigned aw = arg(0)->width;
        uint64_t ma = m & mask_of(aw);
        if (m & ~mask_of(aw)) ma |= 1ull << (aw - 1);
        need(live, arg(0), ma, pc);
        return;
      }
      case Op::Extract: need(live, arg(0), m << e->value, pc); return;
      case Op::Concat: {
        const unsigned lw = arg(1)->width;
        need(live, arg(1), m & mask_of(lw), pc);
        need(live, arg(0), lw >= 64 ? 0 : m >> lw, pc);
        return;
      }
      case Op::And:
      case Op::Or: {
        for (int k = 0; k < 2; ++k) {
          const ExprPtr& x = arg(k);
          const ExprPtr& other = arg(1 - k);
          if (other->is_const()) {
            need(live, x, e->op == Op::And ? m & other->value : m & ~other->value, pc);
          } else {
            need(live, x, m, pc);
          }
        }
        return;
      }
      case Op::Xor:
        need(live, arg(0), m, pc);
        need(live, arg(1), m, pc);
        return;
      case Op::Shl:
      case Op::Shr:
      case Op::Sar: {
        if (!arg(1)->is_const()) {
          all(arg(0));
          all(arg(1));
          return;
        }
        const uint64_t c = arg(1)->value;
        if (c >= w) {
          if (e->op == Op::Sar) need(live, arg(0), 1ull << (w - 1), pc);
          return;
        }
        if (e->op == Op::Shl) {
          need(live, arg(0), m >> c, pc);
        } else {
          uint64_t ma = (m << c) & mask_of(w);
          if (e->op == Op::Sar && c > 0 && (m >> (w - c))) ma |= 1ull << (w - 1);
          need(live, arg(0), ma, pc);
        }
        return;
      }
      case Op::Ite:
        need(live, arg(0), 1, pc);
        need(live, arg(1), m, pc);
        need(live, arg(2), m, pc);
        return;
      default:
        for (const auto& a : e->args) all(a);
        return;
    }
  }

  std::map<Location, uint64_t> transfer(int pc, const std::map<Location, uint64_t>& after) {
    const Instr& i = p_.instrs[pc];
    std::map<Location, uint64_t> live = after;
    switch (i.kind) {
      case Instr::Kind::Halt: return seeds();
      case Instr::Kind::Goto: return live;
      case Instr::Kind::Branch: need(live, i.rhs, 1, pc); return live;
      case Instr::Kind::Assign: {
        auto it = live.find(i.dst);
        uint64_t m = it == live.end() ? 0 : it->second;
        if (it != live.end()) live.erase(it);
        need(live, i.rhs, m, pc);
        return live;
      }
      case Instr::Kind::Store: {
        MemTarget t = classify_address(r_.resolve(pc, i.addr), i.bytes, fi_);
        Location l = target_location(t);
        auto it = live.find(l);
        bool target_live = it != live.end() && it->second;
        bool kills = (t.kind == MemTarget::Kind::TokenMemory && t.offset == 0 &&
                      i.bytes * 8 >= fi_.tokens.at(t.token).bits()) ||
                     (t.kind == MemTarget::Kind::Stack && i.bytes >= 4);
        if (kills && it != live.end()) live.erase(it);
        need(live, i.addr, mask_of(32), pc);
        if (target_live) need(live, i.rhs, mask_of(i.rhs->width), pc);
        return live;
      }
    }
    return live;
  }

  const IRProgram& p_;
  const FormalInterface& fi_;
  const Resolution& r_;
  bool bit_level_;
  std::map<Location, int> first_use_;
};

}  // namespace

Liveness compute_liveness(const IRProgram& p, const FormalInterface& fi, const Resolution& r, bool bit_level) {
  return LivenessBuilder(p, fi, r, bit_level).run();
}

// -------------------------------------------------------------- frame-write

std::vector<Issue> check_frame_write(const IRProgram& p, const FormalInterface& fi, const Resolution& r,
                                     const CheckOptions& opt) {
  std::vector<Issue> out;
  const SymState& exit = r.at_exit();
  auto modified = [&](const Location& l) {
    if (!opt.expression_propagation || !exit.reachable) return true;
    return !equal(exit.value(l, p.bits(l)), mk_var(l, p.bits(l)));
  };

  std::vector<std::pair<Location, int>> flags;
  for (const auto& [l, pc] : r.first_writes()) {
    if (!modified(l)) continue;
    switch (l.kind) {
      case Location::Kind::Reg: {
        const Reg reg = l.as_reg();
        if (fi.clobbered.contains(reg)) break;
        auto owner = fixed_owner(fi, reg);
        if (owner && fi.tokens.at(*owner).is_output) break;
        if (owner) {
          out.push_back(make_issue(p, IssueCategory::ReadOnlyInputClobbered, l, pc,
                                   std::string(reg_name(reg)) + " holds input %" + std::to_string(*owner)));
        } else {
          out.push_back(make_issue(p, IssueCategory::UnboundRegisterClobbered, l, pc));
        }
        break;
      }
      case Location::Kind::Flag:
        if (!fi.flags_clobbered) flags.emplace_back(l, pc);
        break;
      case Location::Kind::Token:
        if (!fi.tokens.at(l.id).is_output)
          out.push_back(make_issue(p, IssueCategory::ReadOnlyInputClobbered, l, pc, "input operand written"));
        break;
      default: break;
    }
  }
  if (!flags.empty()) {
    std::sort(flags.begin(), flags.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    std::string names;
    for (const auto& [l, pc] : flags) names += (names.empty() ? "" : ",") + l.to_string();
    out.push_back(make_issue(p, IssueCategory::FlagClobbered, flags[0].first, flags[0].second, names));
  }

  const bool esp_restored = opt.expression_propagation && exit.reachable &&
                            equal(exit.value(Location::reg(Reg::esp), 32), mk_var(Location::reg(Reg::esp), 32));
  const auto live = reachable_pcs(p);
  std::set<int> reported_tokens;
  bool reported_memory = false;
  for (int pc = 0; pc < static_cast<int>(p.instrs.size()); ++pc) {
    const Instr& i = p.instrs[pc];
    if (i.kind != Instr::Kind::Store || !live[pc]) continue;
    MemTarget t = classify_address(r.resolve(pc, i.addr), i.bytes, fi);
    if (t.kind == MemTarget::Kind::TokenMemory) {
      const auto& tok = fi.tokens.at(t.token);
      if (tok.is_output || !fi.memory_separated) continue;
      if (reported_tokens.insert(t.token).second)
        out.push_back(make_issue(p, IssueCategory::ReadOnlyInputClobbered, content_of(t.token), pc,
                                 "store into input memory operand"));
      continue;
    }
    if (t.kind == MemTarget::Kind::Stack && esp_restored) continue;
    if (fi.memory_separated && !reported_memory) {
      reported_memory = true;
      out.push_back(make_issue(p, IssueCategory::UnboundMemoryWrite, Location::memory(), pc,
                               "store to " + to_string(r.resolve(pc, i.addr))));
    }
  }
  return out;
}

// --------------------------------------------------------------- frame-read

namespace {

std::set<int> non_written_outputs(const IRProgram& p, const FormalInterface& fi, const Resolution& r) {
  std::set<int> written;
  const auto live = reachable_pcs(p);
  for (int pc = 0; pc < static_cast<int>(p.instrs.size()); ++pc) {
    const Instr& i = p.instrs[pc];
    if (!live[pc]) continue;
    if (i.kind == Instr::Kind::Assign) {
      if (i.dst.kind == Location::Kind::Token) written.insert(i.dst.id);
      if (i.dst.kind == Location::Kind::Reg)
        if (auto owner = fixed_owner(fi, i.dst.as_reg())) written.insert(*owner);
    } else if (i.kind == Instr::Kind::Store) {
      MemTarget t = classify_address(r.resolve(pc, i.addr), i.bytes, fi);
      if (t.kind == MemTarget::Kind::TokenMemory) written.insert(t.token);
    }
  }
  std::set<int> out;
  for (int id : fi.outputs)
    if (!fi.tokens.at(id).is_input && !written.count(id)) out.insert(id);
  return out;
}

}  // namespace

std::vector<Issue> check_frame_read(const IRProgram& p, const FormalInterface& fi, const Resolution& r,
                                    const CheckOptions& opt) {
  std::vector<Issue> out;
  const std::set<int> silent = non_written_outputs(p, fi, r);
  for (int id : silent) {
    const auto& t = fi.tokens.at(id);
    Location l = t.fixed_register ? Location::reg(*t.fixed_register) : Location::token(id);
    out.push_back(make_issue(p, IssueCategory::NonWrittenWriteOnlyOutput, l, -1,
                             "output %" + std::to_string(id) + " is never written"));
  }

  RegSet input_regs;
  for (const auto& [id, t] : fi.tokens)
    if (t.is_input && t.fixed_register) input_regs.insert(*t.fixed_register);

  const Liveness lv = compute_liveness(p, fi, r, opt.bit_level_liveness);
  for (const auto& [l, m] : lv.live_in) {
    if (!m) continue;
    auto use = lv.first_use.find(l);
    const int pc = use == lv.first_use.end() ? 0 : use->second;
    switch (l.kind) {
      case Location::Kind::Reg: {
        const Reg reg = l.as_reg();
        if (reg == Reg::esp || input_regs.contains(reg)) break;
        auto owner = fixed_owner(fi, reg);
        if (owner && silent.count(*owner)) break;
        out.push_back(make_issue(p, IssueCategory::UnboundRegisterRead, l, pc));
        break;
      }
      case Location::Kind::Flag: out.push_back(make_issue(p, IssueCategory::UnboundRegisterRead, l, pc)); break;
      case Location::Kind::Token: {
        const auto& t = fi.tokens.at(l.id);
        if (t.is_input || silent.count(l.id)) break;
        if (t.memory_class) {
          if (fi.memory_separated)
            out.push_back(make_issue(p, IssueCategory::UnboundMemoryRead, l, pc, "write-only memory operand read"));
        } else {
          out.push_back(make_issue(p, IssueCategory::UnboundRegisterRead, l, pc, "write-only operand read"));
        }
        break;
      }
      case Location::Kind::Memory:
        if (fi.memory_separated) out.push_back(make_issue(p, IssueCategory::UnboundMemoryRead, l, pc));
        break;
      case Location::Kind::Stack:
        out.push_back(make_issue(p, IssueCategory::UnboundMemoryRead, l, pc, "read below the stack pointer"));
        break;
      default: break;
    }
  }
  return out;
}

// ------------------------------------------------------------------ unicity

namespace {

AbstractSet abstract_of_location(const Location& l, const FormalInterface& fi, const AbstractDomain& dom,
                                 const IRProgram& p) {
  AbstractSet s;
  switch (l.kind) {
    case Location::Kind::Reg: s.insert({AbstractLocation::Kind::Direct, l.as_reg()}); break;
    case Location::Kind::Token:
      if (!p.memory_tokens.count(l.id) && dom.count(l.id)) s = dom.at(l.id);
      break;
    case Location::Kind::TokenAddr:
      if (dom.count(l.id))
        for (const auto& a : dom.at(l.id))
          if (a.kind == AbstractLocation::Kind::Indirect) s.insert(a);
      break;
    default: break;
  }
  (void)fi;
  return s;
}

bool related(const AbstractSet& written, const AbstractSet& live) {
  for (const auto& x : written) {
    if (x.kind != AbstractLocation::Kind::Direct) continue;
    for (const auto& y : live)
      if (y.kind != AbstractLocation::Kind::Immediate && y.reg == x.reg) return true;
  }
  return false;
}

bool is_token(const Location& l) {
  return l.kind == Location::Kind::Token || l.kind == Location::Kind::TokenAddr;
}

}  // namespace

std::vector<Issue> check_unicity(const IRProgram& p, const FormalInterface& fi, const Resolution& r,
                                 const CheckOptions& opt) {
  std::vector<Issue> out;
  const AbstractDomain dom = abstract_domain(fi);
  const Liveness lv = compute_liveness(p, fi, r, opt.bit_level_liveness);
  const auto reach = reachable_pcs(p);
  std::set<std::pair<Location, Location>> seen;
  for (int pc = 0; pc < static_cast<int>(p.instrs.size()); ++pc) {
    const Instr& i = p.instrs[pc];
    if (!reach[pc] || i.kind != Instr::Kind::Assign) continue;
    const Location& l = i.dst;
    if (l.kind != Location::Kind::Reg && l.kind != Location::Kind::Token) continue;
    if (l.kind == Location::Kind::Reg && fi.clobbered.contains(l.as_reg())) continue;
    const AbstractSet a = abstract_of_location(l, fi, dom, p);
    if (a.empty()) continue;
    for (const auto& [u, m] : lv.live_after[pc]) {
      if (!m || u == l) continue;
      if (u.kind == Location::Kind::Reg && fi.clobbered.contains(u.as_reg())) continue;
      if (is_token(l) && is_token(u)) {
        if (l.id == u.id) continue;
        if (fi.early_clobber.count(l.id)) continue;
        // Distinct outputs, and distinct inputs, never share a register.
        if (u.kind == Location::Kind::Token && fi.tokens.count(l.id) && fi.tokens.count(u.id)) {
          const TokenInfo &tl = fi.token(l.id), &tu = fi.token(u.id);
          if ((tl.is_output && tu.is_output) || (tl.is_input && tu.is_input)) continue;
        }
      }
      if (!related(a, abstract_of_location(u, fi, dom, p))) continue;
      Location key_u = u.kind == Location::Kind::TokenAddr ? Location::token(u.id) : u;
      if (!seen.insert({l, key_u}).second) continue;
      Issue is = make_issue(p, IssueCategory::Unicity, l, pc);
      is.related = key_u;
      is.details = l.to_string() + " written while " + key_u.to_string() + " is live";
      out.push_back(std::move(is));
    }
  }
  return out;
}

// -------------------------------------------------------------------- driver

CheckResult check_chunk(const ChunkAst& chunk, const CheckOptions& opt) {
  CheckResult res;
  try {
    res.interface = derive_interface(chunk);
  } catch (const Error& e) {
    res.verdict = Verdict::Error;
    res.reason = e.what();
    return res;
  }
  const FormalInterface& fi = *res.interface;
  try {
    res.program = analysis_program(chunk, fi);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UnknownMnemonic) {
      res.verdict = Verdict::Error;
      res.reason = e.what();
      return res;
    }
    res.reason = e.what();
    for (int v : written_vector_registers(chunk)) {
      if (fi.vector_clobbers.count(v)) continue;
      Issue is;
      is.category = IssueCategory::UnboundRegisterClobbered;
      is.location = Location::vec(v);
      is.details = vector_reg_name(v) + " written but not clobbered";
      res.issues.push_back(std::move(is));
    }
    res.verdict = res.issues.empty() ? Verdict::OutOfScope : Verdict::Issues;
    return res;
  }
  const IRProgram& p = *res.program;
  const Resolution r(p);
  for (auto&& v : {check_frame_write(p, fi, r, opt), check_frame_read(p, fi, r, opt), check_unicity(p, fi, r, opt)})
    res.issues.insert(res.issues.end(), v.begin(), v.end());
  std::stable_sort(res.issues.begin(), res.issues.end(), [](const Issue& a, const Issue& b) {
    if (a.point != b.point) return a.point < b.point;
    return a.category < b.category;
  });
  res.verdict = res.issues.empty() ? Verdict::Compliant : Verdict::Issues;
  return res;
}

std::string describe(const Issue& issue, const FormalInterface* fi) {
  std::ostringstream os;
  os << to_string(issue.category) << " " << issue.location.to_string();
  if (issue.related) os << " vs " << issue.related->to_string();
  if (issue.origin >= 0) os << " at instruction " << issue.origin;
  if (!issue.details.empty()) os << ": " << issue.details;
  (void)fi;
  return os.str();
}

}  // namespace ric
