#include "ric/refiner.hpp"

#include <algorithm>
#include <cctype>

#include "ric/error.hpp"

namespace ric {

namespace {

void collect_loads(const ExprPtr& e, std::vector<ExprPtr>& out) {
  if (!e) return;
  if (e->op == Op::Load) out.push_back(e);
  for (const auto& a : e->args) collect_loads(a, out);
}

MemAccess classify(const ExprPtr& resolved, unsigned bytes, const FormalInterface& fi) {
  MemAccess m;
  m.size = bytes;
  const MemTarget t = classify_address(resolved, bytes, fi);
  if (t.kind == MemTarget::Kind::TokenMemory) {
    m.base = MemAccess::Base::Token;
    m.token = t.token;
    m.offset = t.offset;
    return m;
  }
  if (t.kind == MemTarget::Kind::Stack) {
    m.base = MemAccess::Base::Stack;
    m.offset = -t.slot;
    return m;
  }
  const AddressParts a = decompose_address(resolved);
  m.offset = a.offset;
  if (!a.base) return m;
  if (a.base->op == Op::Symbol) {
    m.base = MemAccess::Base::Symbol;
    m.symbol = a.base->name;
    return m;
  }
  if (a.base->op != Op::Var) return m;
  const Location& l = a.base->loc;
  if (l.kind == Location::Kind::Token && fi.tokens.count(l.id) && fi.token(l.id).is_input) {
    m.base = MemAccess::Base::Token;
    m.token = l.id;
    m.through_pointer = true;
  } else if (l.kind == Location::Kind::Reg) {
    if (l.as_reg() == Reg::esp) {
      m.base = MemAccess::Base::Stack;
      return m;
    }
    for (const auto& [id, tok] : fi.tokens)
      if (tok.fixed_register == l.as_reg() && tok.is_input) {
        m.base = MemAccess::Base::Token;
        m.token = id;
        m.through_pointer = true;
      }
  }
  return m;
}

// Operand numbers and names referenced from the template.
void template_references(const std::string& t, std::set<int>& numbers, std::set<std::string>& names) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '%') continue;
    if (i + 1 < t.size() && t[i + 1] == '%') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < t.size() && std::isalpha(static_cast<unsigned char>(t[j])) && j - i <= 2) ++j;
    if (j < t.size() && t[j] == '[') {
      auto close = t.find(']', j);
      if (close != std::string::npos) names.insert(t.substr(j + 1, close - j - 1));
      continue;
    }
    std::size_t d = j;
    while (d < t.size() && std::isdigit(static_cast<unsigned char>(t[d]))) ++d;
    if (d > j) numbers.insert(std::stoi(t.substr(j, d - j)));
  }
}

int entry_size_for(int64_t span) {
  for (int s : {1, 2, 4})
    if (span <= s) return s;
  return 8;
}

std::string region_expr(const std::string& pointer, bool readonly, int64_t offset, int64_t span) {
  const std::string elem = readonly ? "const char" : "char";
  std::string s = "*(" + elem + " (*)[" + std::to_string(span) + "]) ";
  if (offset == 0) return s + pointer;
  return s + "((" + elem + " *)(" + pointer + ") + " + std::to_string(offset) + ")";
}

}  // namespace

std::vector<MemAccess> memory_access_analysis(const IRProgram& p, const FormalInterface& fi) {
  const Resolution r(p);
  std::vector<MemAccess> out;
  for (int pc = 0; pc < static_cast<int>(p.instrs.size()); ++pc) {
    const Instr& i = p.instrs[pc];
    if (!r.before(pc).reachable) continue;
    std::vector<ExprPtr> loads;
    collect_loads(i.rhs, loads);
    collect_loads(i.addr, loads);
    for (const ExprPtr& ld : loads) {
      MemAccess m = classify(r.resolve(pc, ld->args[0]), ld->width / 8, fi);
      m.kind = MemAccess::Kind::Load;
      m.point = pc;
      out.push_back(m);
    }
    if (i.kind == Instr::Kind::Store) {
      MemAccess m = classify(r.resolve(pc, i.addr), i.bytes, fi);
      m.kind = MemAccess::Kind::Store;
      m.point = pc;
      out.push_back(m);
    }
  }
  return out;
}

std::optional<Edit> memory_to_m_entries(const ChunkAst& chunk, const FormalInterface& fi,
                                        const std::vector<MemAccess>& accesses) {
  (void)chunk;
  struct Interval {
    int64_t lo, hi;
    bool load, store;
  };
  std::map<std::string, std::vector<Interval>> per_base;  // pointer expression -> accesses
  bool symbolic = false;
  for (const MemAccess& m : accesses) {
    if (m.base == MemAccess::Base::Unresolved) return std::nullopt;
    if (m.base == MemAccess::Base::Stack || (m.base == MemAccess::Base::Token && !m.through_pointer)) continue;
    std::string pointer;
    if (m.base == MemAccess::Base::Symbol) {
      pointer = "&" + m.symbol;
      symbolic = true;
    } else {
      pointer = fi.token(m.token).expr_text;
    }
    per_base[pointer].push_back({m.offset, m.offset + static_cast<int64_t>(m.size), m.kind == MemAccess::Kind::Load,
                                 m.kind == MemAccess::Kind::Store});
  }
  if (per_base.empty()) return std::nullopt;

  Edit e;
  e.kind = Edit::Kind::MemoryToEntries;
  e.suggestion = symbolic;
  e.reason = symbolic ? "global symbols are accessed; declare them as memory operands"
                      : "every memory access goes through a pointer operand";
  std::vector<OperandEntry> outs, ins;
  for (auto& [pointer, list] : per_base) {
    std::sort(list.begin(), list.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> runs;
    for (const Interval& iv : list) {
      if (!runs.empty() && iv.lo <= runs.back().hi) {
        runs.back().hi = std::max(runs.back().hi, iv.hi);
        runs.back().load |= iv.load;
        runs.back().store |= iv.store;
      } else {
        runs.push_back(iv);
      }
    }
    for (const Interval& run : runs) {
      OperandEntry oe;
      const int64_t span = run.hi - run.lo;
      oe.size_bytes = entry_size_for(span);
      oe.expr_text = region_expr(pointer, !run.store, run.lo, span);
      if (!run.store) {
        oe.constraint = "m";
        ins.push_back(oe);
      } else {
        oe.constraint = run.load ? "+m" : "=m";
        outs.push_back(oe);
      }
    }
  }
  e.entries = outs;
  e.entries.insert(e.entries.end(), ins.begin(), ins.end());
  return e;
}

std::vector<Edit> refine_interface(const ChunkAst& chunk, const CheckResult& result, const RefineOptions& opt) {
  std::vector<Edit> accepted;
  if (result.verdict != Verdict::Compliant || !result.interface || !result.program) return accepted;
  const FormalInterface& fi = *result.interface;
  const IRProgram& p = *result.program;
  const Resolution r(p);
  const Liveness live = compute_liveness(p, fi, r, opt.check.bit_level_liveness);
  const int nout = static_cast<int>(chunk.outputs.size());

  std::vector<std::vector<Edit>> groups;

  if (opt.inputs) {
    std::set<int> numbers;
    std::set<std::string> names;
    template_references(chunk.asm_template, numbers, names);
    std::set<int> pointers;
    for (const auto& [id, t] : fi.tokens)
      if (t.region) pointers.insert(t.region->pointer_token);
    for (const auto& [id, t] : fi.tokens) {
      if (t.is_output || !t.is_input || t.positions.size() != 1 || pointers.count(id)) continue;
      const int pos = t.positions.front();
      if (pos < nout || numbers.count(pos)) continue;
      const OperandEntry& entry = chunk.entry(pos);
      if (entry.name && names.count(*entry.name)) continue;
      if (entry.constraint.find('%') != std::string::npos) continue;
      if (pos > 0 && chunk.entry(pos - 1).constraint.find('%') != std::string::npos) continue;
      bool read = live.live_in.count(Location::token(id)) || live.live_in.count(Location::token_addr(id));
      if (t.fixed_register) read = read || live.live_in.count(Location::reg(*t.fixed_register));
      if (read) continue;
      Edit e;
      e.kind = Edit::Kind::DropInput;
      e.position = pos;
      e.reason = "input %" + std::to_string(pos) + " is never read";
      groups.push_back({e});
    }
  }

  if (opt.clobbers) {
    const auto& writes = r.first_writes();
    auto drop = [&](const std::string& name) {
      Edit e;
      e.kind = Edit::Kind::DropClobber;
      e.clobber = name;
      e.reason = "\"" + name + "\" is never written";
      groups.push_back({e});
    };
    fi.clobbered.for_each([&](Reg reg) {
      if (!writes.count(Location::reg(reg))) drop(reg_name(reg));
    });
    if (fi.flags_clobbered) {
      bool flag_written = false;
      for (int f = 0; f < kFlagCount; ++f) flag_written = flag_written || writes.count(Location::flag(static_cast<Flag>(f)));
      if (!flag_written) drop("cc");
    }
    const std::set<int> vec_written = written_vector_registers(chunk);
    for (int v : fi.vector_clobbers)
      if (!vec_written.count(v)) drop(vector_reg_name(v));
  }

  if (opt.memory && !fi.memory_separated) {
    const auto accesses = memory_access_analysis(p, fi);
    const bool needs_memory = std::any_of(accesses.begin(), accesses.end(), [](const MemAccess& m) {
      return m.base != MemAccess::Base::Stack && !(m.base == MemAccess::Base::Token && !m.through_pointer);
    });
    Edit drop;
    drop.kind = Edit::Kind::DropMemoryKeyword;
    if (!needs_memory) {
      drop.reason = "no memory access outside declared operands";
      groups.push_back({drop});
    } else if (auto entries = memory_to_m_entries(chunk, fi, accesses)) {
      drop.reason = "replaced by memory operands";
      drop.suggestion = entries->suggestion;
      groups.push_back({*entries, drop});
    }
  }

  // Keep each group only if the accumulated edits still check compliant.
  for (const auto& g : groups) {
    if (g.front().suggestion) {
      accepted.insert(accepted.end(), g.begin(), g.end());
      continue;
    }
    std::vector<Edit> trial = accepted;
    trial.insert(trial.end(), g.begin(), g.end());
    try {
      if (check_chunk(apply_edits(chunk, trial), opt.check).verdict == Verdict::Compliant) accepted = std::move(trial);
    } catch (const Error&) {
    }
  }
  return accepted;
}

RefineOutcome refine_chunk(const ChunkAst& chunk, const RefineOptions& opt) {
  RefineOutcome out;
  CheckResult first = check_chunk(chunk, opt.check);
  ChunkAst patched = chunk;
  CheckResult current = first;
  if (first.verdict == Verdict::Issues) {
    out.patch = synthesize_patches(chunk, first);
    if (!out.patch.unresolved.empty()) return out;
    try {
      patched = apply_edits(chunk, out.patch.edits);
    } catch (const Error&) {
      return out;
    }
    current = check_chunk(patched, opt.check);
  }
  if (current.verdict != Verdict::Compliant) return out;
  out.applicable = true;

  const std::vector<int> map = renumber_map(chunk, out.patch.edits);
  for (Edit e : refine_interface(patched, current, opt)) {
    if (e.kind == Edit::Kind::DropInput) {
      auto it = std::find(map.begin(), map.end(), e.position);
      if (it == map.end()) continue;
      e.position = static_cast<int>(it - map.begin());
    }
    out.refinements.push_back(std::move(e));
  }
  return out;
}

}  // namespace ric
