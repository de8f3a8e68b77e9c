#include <algorithm>

#include "ric/checker.hpp"

namespace ric {

namespace {

uint64_t opaque_id(int pc, const Location& l) {
  return (static_cast<uint64_t>(pc) << 20) ^ (static_cast<uint64_t>(l.kind) << 12) ^ static_cast<uint64_t>(l.id & 0xfff);
}

bool is_stack_below(const AddressParts& a) {
  return a.base && a.base->op == Op::Var && a.base->loc == Location::reg(Reg::esp) && a.offset < 0;
}

bool same_base(const AddressParts& a, const AddressParts& b) {
  if (!a.base || !b.base) return !a.base && !b.base;
  return equal(a.base, b.base);
}

}  // namespace

ExprPtr SymState::value(const Location& l, unsigned width) const {
  auto it = values.find(l);
  return it == values.end() ? mk_var(l, width) : it->second;
}

AddressParts decompose_address(const ExprPtr& a) {
  if (a->is_const()) return {nullptr, static_cast<int32_t>(static_cast<uint32_t>(a->value))};
  if (a->op == Op::Add && a->args[1]->is_const())
    return {a->args[0], static_cast<int32_t>(static_cast<uint32_t>(a->args[1]->value))};
  return {a, 0};
}

Resolution::Resolution(const IRProgram& p) : p_(p) {
  const int n = static_cast<int>(p.instrs.size());
  std::vector<std::vector<int>> preds(n);
  std::map<int, int> loop_end;  // back-edge target -> furthest source
  for (int pc = 0; pc < n; ++pc)
    for (int s : p.successors(pc)) {
      if (s > pc) {
        preds[s].push_back(pc);
      } else {
        loop_end[s] = std::max(loop_end[s], pc);
      }
    }
  states_.assign(n, SymState{});
  std::vector<SymState> outs(n);
  for (int pc = 0; pc < n; ++pc) {
    SymState in;
    std::vector<const SymState*> incoming;
    for (int q : preds[pc])
      if (outs[q].reachable) incoming.push_back(&outs[q]);
    if (pc == 0) {
      in.reachable = true;
      if (!incoming.empty()) in = join({&in, incoming[0]}, pc);
    } else {
      in = join(incoming, pc);
    }
    if (auto it = loop_end.find(pc); it != loop_end.end() && in.reachable) {
      for (int q = pc; q <= it->second; ++q) {
        const Instr& li = p.instrs[q];
        if (li.kind == Instr::Kind::Assign) in.values[li.dst] = mk_opaque(opaque_id(pc, li.dst), p.bits(li.dst));
        if (li.kind == Instr::Kind::Store && (in.memory.empty() || in.memory.back().addr)) in.memory.push_back({});
      }
    }
    states_[pc] = in;
    SymState out = in;
    const Instr& i = p.instrs[pc];
    if (in.reachable) {
      if (i.kind == Instr::Kind::Assign) {
        out.values[i.dst] = resolve_in(in, i.rhs, pc);
        first_write_.try_emplace(i.dst, pc);
      } else if (i.kind == Instr::Kind::Store) {
        ExprPtr a = resolve_in(in, i.addr, pc);
        ExprPtr v = resolve_in(in, i.rhs, pc);
        std::erase_if(out.memory, [&](const MemWrite& w) { return w.addr && w.bytes == i.bytes && equal(w.addr, a); });
        out.memory.push_back({a, v, i.bytes});
      }
    }
    outs[pc] = std::move(out);
  }
}

SymState Resolution::join(const std::vector<const SymState*>& in, int pc) const {
  SymState out;
  if (in.empty()) return out;
  out = *in[0];
  for (std::size_t k = 1; k < in.size(); ++k) {
    const SymState& s = *in[k];
    std::set<Location> keys;
    for (const auto& [l, v] : out.values) keys.insert(l);
    for (const auto& [l, v] : s.values) keys.insert(l);
    for (const auto& l : keys) {
      const unsigned w = p_.bits(l);
      ExprPtr a = out.value(l, w), b = s.value(l, w);
      if (!equal(a, b)) out.values[l] = mk_opaque(opaque_id(pc, l), w);
    }
    std::size_t common = 0;
    while (common < out.memory.size() && common < s.memory.size()) {
      const auto &x = out.memory[common], &y = s.memory[common];
      bool same = x.bytes == y.bytes && ((!x.addr && !y.addr) ||
                                         (x.addr && y.addr && equal(x.addr, y.addr) && equal(x.value, y.value)));
      if (!same) break;
      ++common;
    }
    if (common != out.memory.size() || common != s.memory.size()) {
      out.memory.resize(common);
      out.memory.push_back({});
    }
  }
  out.reachable = true;
  return out;
}

ExprPtr Resolution::lookup(const SymState& s, const ExprPtr& addr, unsigned bytes, int pc) const {
  const AddressParts want = decompose_address(addr);
  for (auto it = s.memory.rbegin(); it != s.memory.rend(); ++it) {
    const MemWrite& w = *it;
    if (!w.addr) break;
    const AddressParts have = decompose_address(w.addr);
    if (same_base(want, have)) {
      const int64_t lo = want.offset - have.offset;
      if (lo >= 0 && lo + bytes <= w.bytes) return simplify(mk_extract(w.value, static_cast<unsigned>(lo) * 8, bytes * 8));
      if (want.offset + static_cast<int64_t>(bytes) <= have.offset || have.offset + static_cast<int64_t>(w.bytes) <= want.offset)
        continue;
      break;
    }
    if (is_stack_below(want) != is_stack_below(have)) continue;
    break;
  }
  bool clean = std::none_of(s.memory.begin(), s.memory.end(), [&](const MemWrite& w) {
    if (!w.addr) return true;
    const AddressParts have = decompose_address(w.addr);
    if (same_base(want, have))
      return !(want.offset + static_cast<int64_t>(bytes) <= have.offset ||
               have.offset + static_cast<int64_t>(w.bytes) <= want.offset);
    return is_stack_below(want) == is_stack_below(have);
  });
  if (clean) return mk_load(addr, bytes);
  return mk_opaque((addr->hash << 8) ^ static_cast<uint64_t>(pc) ^ 0x5a5a0000ull, bytes * 8);
}

ExprPtr Resolution::resolve_in(const SymState& s, const ExprPtr& e, int pc) const {
  ExprPtr out = rewrite(e, [&](const ExprPtr& x) -> ExprPtr {
    if (x->op == Op::Var) {
      auto it = s.values.find(x->loc);
      return it == s.values.end() ? nullptr : it->second;
    }
    if (x->op == Op::Load) return lookup(s, simplify(x->args[0]), x->width / 8, pc);
    return nullptr;
  });
  return simplify(out);
}

ExprPtr Resolution::resolve(int pc, const ExprPtr& e) const { return resolve_in(states_.at(pc), e, pc); }

MemTarget classify_address(const ExprPtr& resolved, unsigned bytes, const FormalInterface& fi) {
  MemTarget t;
  const AddressParts a = decompose_address(resolved);
  if (!a.base || a.base->op != Op::Var) return t;
  const Location& l = a.base->loc;
  if (l.kind == Location::Kind::TokenAddr) {
    t.kind = MemTarget::Kind::TokenMemory;
    t.token = l.id;
    t.offset = a.offset;
    return t;
  }
  if (l == Location::reg(Reg::esp)) {
    if (a.offset < 0) {
      t.kind = MemTarget::Kind::Stack;
      t.slot = static_cast<int>(-a.offset);
    }
    return t;
  }
  for (const auto& [id, tok] : fi.tokens) {
    if (!tok.region) continue;
    const auto& ptr = fi.tokens.at(tok.region->pointer_token);
    bool base_matches = (l.kind == Location::Kind::Token && l.id == tok.region->pointer_token) ||
                        (l.kind == Location::Kind::Reg && ptr.fixed_register && l.as_reg() == *ptr.fixed_register);
    if (!base_matches) continue;
    const int64_t lo = tok.region->offset, hi = lo + tok.region->span;
    if (a.offset >= lo && a.offset + static_cast<int64_t>(bytes) <= hi) {
      t.kind = MemTarget::Kind::TokenMemory;
      t.token = id;
      t.offset = a.offset - lo;
      return t;
    }
  }
  return t;
}

IRProgram analysis_program(const ChunkAst& chunk, const FormalInterface& fi) {
  return substitute_fixed(lift_chunk(chunk, fi), fi);
}

}  // namespace ric
