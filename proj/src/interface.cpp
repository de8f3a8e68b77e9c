#include "ric/interface.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <unordered_set>

#include "ric/error.hpp"

namespace ric {

ConstraintSpec parse_constraint(std::string_view s, bool is_output) {
  if (s.empty()) throw Error(ErrorKind::MalformedInterface, "empty constraint");
  ConstraintSpec spec;
  spec.alternatives.emplace_back();
  bool mode_set = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == '?' || c == '!' || c == '*') continue;
    switch (c) {
      case '=':
      case '+':
        if (!is_output)
          throw Error(ErrorKind::MalformedInterface, std::string("'") + c + "' on an input constraint");
        spec.mode = c == '=' ? ConstraintMode::OutputWriteOnly : ConstraintMode::OutputReadWrite;
        mode_set = true;
        continue;
      case '&':
        spec.early_clobber = true;
        continue;
      case '%':
        spec.commutative = true;
        continue;
      case ',':
        spec.alternatives.emplace_back();
        continue;
      default:
        break;
    }
    if (c == '[' || std::isdigit(static_cast<unsigned char>(c))) {
      if (is_output) throw Error(ErrorKind::MalformedInterface, "matching constraint on an output");
      AtomicConstraint m{AtomicConstraint::Kind::Match, 0, {}};
      if (c == '[') {
        auto close = s.find(']', i);
        if (close == std::string_view::npos) throw Error(ErrorKind::MalformedInterface, "unterminated [name]");
        m.match = std::string(s.substr(i + 1, close - i - 1));
        i = close;
      } else {
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) m.match += s[i++];
        --i;
      }
      spec.alternatives.back().push_back(std::move(m));
      continue;
    }
    eval_letter(c);  // throws UnknownLetter
    spec.alternatives.back().push_back({AtomicConstraint::Kind::Letter, c, {}});
  }
  if (is_output && !mode_set)
    throw Error(ErrorKind::ModeMissing, "output constraint \"" + std::string(s) + "\" lacks '=' or '+'");
  for (const auto& alt : spec.alternatives)
    if (alt.empty()) throw Error(ErrorKind::MalformedInterface, "empty alternative in \"" + std::string(s) + "\"");
  return spec;
}

OperandClass& OperandClass::operator|=(const OperandClass& o) {
  immediate = immediate || o.immediate;
  registers = registers | o.registers;
  memory = memory || o.memory;
  address = address || o.address;
  if (o.match_of) match_of = o.match_of;
  return *this;
}

std::optional<Reg> OperandClass::single_register() const {
  if (immediate || memory || address || match_of) return std::nullopt;
  return registers.single();
}

OperandClass eval_letter(char c) {
  constexpr RegSet a = RegSet::of(Reg::eax), b = RegSet::of(Reg::ebx), cc = RegSet::of(Reg::ecx),
                   d = RegSet::of(Reg::edx), S = RegSet::of(Reg::esi), D = RegSet::of(Reg::edi);
  constexpr RegSet q = a | b | cc | d;
  constexpr RegSet r = q | S | D | RegSet::of(Reg::ebp);
  OperandClass cls;
  switch (c) {
    case 'a': cls.registers = a; break;
    case 'b': cls.registers = b; break;
    case 'c': cls.registers = cc; break;
    case 'd': cls.registers = d; break;
    case 'S': cls.registers = S; break;
    case 'D': cls.registers = D; break;
    case 'U': cls.registers = a | cc | d; break;
    case 'q':
    case 'Q': cls.registers = q; break;
    case 'r':
    case 'R': cls.registers = r; break;
    case 'i':
    case 'n': cls.immediate = true; break;
    case 'p': cls.address = true; break;
    case 'm': cls.memory = true; break;
    case 'g':
      cls.immediate = true;
      cls.registers = r;
      cls.memory = true;
      break;
    default:
      throw Error(ErrorKind::UnknownLetter, std::string("'") + c + "'");
  }
  return cls;
}

RegSet AsmOperand::registers() const {
  RegSet s;
  switch (kind) {
    case Kind::Register: s.insert(reg); break;
    case Kind::Immediate: break;
    case Kind::Memory:
    case Kind::Address:
      if (addr.base) s.insert(*addr.base);
      if (addr.index) s.insert(*addr.index);
      break;
  }
  return s;
}

std::string AsmOperand::to_string() const {
  switch (kind) {
    case Kind::Register: return std::string("%") + reg_name(reg);
    case Kind::Immediate: return "$" + std::to_string(imm);
    case Kind::Memory:
    case Kind::Address: {
      std::string s = kind == Kind::Address ? "&" : "";
      if (addr.disp) s += std::to_string(addr.disp);
      s += "(";
      if (addr.base) s += std::string("%") + reg_name(*addr.base);
      if (addr.index) s += std::string(",%") + reg_name(*addr.index) + "," + std::to_string(addr.scale);
      return s + ")";
    }
  }
  return "?";
}

std::string to_string(const TokenAssignment& t) {
  std::string s = "[";
  bool first = true;
  for (const auto& [id, op] : t) {
    if (!first) s += ", ";
    s += "%" + std::to_string(id) + " -> " + op.to_string();
    first = false;
  }
  return s + "]";
}

std::string AbstractLocation::to_string() const {
  switch (kind) {
    case Kind::Immediate: return "Immediate";
    case Kind::Direct: return std::string("Direct ") + reg_name(reg);
    case Kind::Indirect: return std::string("Indirect ") + reg_name(reg);
  }
  return "?";
}

int FormalInterface::canonical(int position) const {
  auto it = unified.find(position);
  if (it == unified.end()) throw Error(ErrorKind::BadTokenRef, "no operand %" + std::to_string(position));
  return it->second;
}

std::set<int> FormalInterface::effective_inputs() const {
  std::set<int> out;
  for (const auto& [id, t] : tokens)
    if (t.is_input) out.insert(id);
  return out;
}

namespace {

std::string squash(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  while (out.size() >= 2 && out.front() == '(' && out.back() == ')') {
    int depth = 0;
    bool wraps = true;
    for (std::size_t i = 0; i < out.size(); ++i) {
      depth += out[i] == '(' ? 1 : out[i] == ')' ? -1 : 0;
      if (depth == 0 && i + 1 < out.size()) {
        wraps = false;
        break;
      }
    }
    if (!wraps) break;
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

// Recognizes "*(T (*)[N]) X", "*(T (*)[N])((T *)(X) + K)" and "*X".
struct RegionExpr {
  std::string pointer;
  int32_t offset = 0;
  std::optional<int> span;
};

std::optional<RegionExpr> parse_region_expr(std::string_view expr) {
  std::string s = squash(expr);
  if (s.empty() || s[0] != '*') return std::nullopt;
  s.erase(0, 1);
  RegionExpr r;
  auto marker = s.find("(*)[");
  if (s.rfind("(", 0) == 0 && marker != std::string::npos) {
    auto close = s.find("])", marker);
    if (close == std::string::npos) return std::nullopt;
    try {
      r.span = std::stoi(s.substr(marker + 4, close - marker - 4));
    } catch (const std::exception&) {
      return std::nullopt;
    }
    std::string inner = squash(s.substr(close + 2));
    auto plus = inner.rfind(")+");
    if (inner.rfind("(", 0) == 0 && plus != std::string::npos && inner.find("*)(") != std::string::npos) {
      auto cast_end = inner.find("*)(");
      std::string ptr = inner.substr(cast_end + 2, plus - cast_end - 1);
      try {
        r.offset = std::stoi(inner.substr(plus + 2));
      } catch (const std::exception&) {
        return std::nullopt;
      }
      r.pointer = squash(ptr);
    } else {
      r.pointer = inner;
    }
  } else {
    r.pointer = squash(s);
  }
  if (r.pointer.empty()) return std::nullopt;
  return r;
}

}  // namespace

FormalInterface derive_interface(const ChunkAst& chunk) {
  FormalInterface fi;
  const int n_out = static_cast<int>(chunk.outputs.size());

  std::vector<ConstraintSpec> specs;
  for (const auto& e : chunk.outputs) specs.push_back(parse_constraint(e.constraint, true));
  for (const auto& e : chunk.inputs) specs.push_back(parse_constraint(e.constraint, false));

  int columns = 1;
  for (const auto& s : specs) {
    int n = static_cast<int>(s.alternatives.size());
    if (n > 1 && columns > 1 && n != columns)
      throw Error(ErrorKind::MalformedInterface, "operands disagree on the number of alternatives");
    columns = std::max(columns, n);
  }
  fi.alternative_count = columns;

  auto classes_of = [&](const ConstraintSpec& s) {
    std::vector<OperandClass> out;
    for (int col = 0; col < columns; ++col) {
      const auto& alt = s.alternatives[s.alternatives.size() == 1 ? 0 : col];
      OperandClass cls;
      for (const auto& a : alt)
        if (a.kind == AtomicConstraint::Kind::Letter) cls |= eval_letter(a.letter);
      out.push_back(cls);
    }
    return out;
  };

  auto finish_token = [](TokenInfo& t) {
    std::optional<Reg> fixed;
    bool all_fixed = true, all_mem = true;
    for (const auto& c : t.alternatives) {
      auto r = c.single_register();
      if (!r || (fixed && *fixed != *r)) all_fixed = false;
      if (r) fixed = r;
      all_mem = all_mem && c.memory_only();
    }
    t.fixed_register = all_fixed ? fixed : std::nullopt;
    t.memory_class = all_mem;
  };

  for (int p = 0; p < n_out; ++p) {
    const auto& e = chunk.outputs[p];
    TokenInfo t;
    t.id = p;
    t.name = e.name;
    t.expr_text = e.expr_text;
    t.size_bytes = e.size_bytes;
    t.is_output = true;
    t.is_input = specs[p].mode == ConstraintMode::OutputReadWrite;
    t.early_clobber = specs[p].early_clobber;
    t.alternatives = classes_of(specs[p]);
    t.positions = {p};
    finish_token(t);
    fi.outputs.insert(p);
    if (t.is_input) fi.inputs.insert(p);
    if (t.early_clobber) fi.early_clobber.insert(p);
    fi.unified[p] = p;
    fi.tokens[p] = std::move(t);
  }

  auto resolve_match = [&](const std::string& m) -> int {
    if (!m.empty() && std::isdigit(static_cast<unsigned char>(m[0]))) {
      int target = std::stoi(m);
      if (target >= n_out)
        throw Error(ErrorKind::MalformedInterface, "matching constraint \"" + m + "\" does not name an output");
      return target;
    }
    for (int p = 0; p < n_out; ++p)
      if (chunk.outputs[p].name == m) return p;
    throw Error(ErrorKind::MalformedInterface, "matching constraint [" + m + "] does not name an output");
  };

  for (std::size_t k = 0; k < chunk.inputs.size(); ++k) {
    const int p = n_out + static_cast<int>(k);
    const auto& e = chunk.inputs[k];
    const auto& spec = specs[p];

    std::optional<int> match_target;
    bool any_match = false, all_match = true;
    for (const auto& alt : spec.alternatives) {
      bool has = std::any_of(alt.begin(), alt.end(),
                             [](const AtomicConstraint& a) { return a.kind == AtomicConstraint::Kind::Match; });
      any_match = any_match || has;
      if (!has || alt.size() != 1) {
        all_match = false;
        continue;
      }
      int target = resolve_match(alt[0].match);
      if (match_target && *match_target != target) all_match = false;
      match_target = target;
    }
    if (any_match && !all_match)
      throw Error(ErrorKind::MalformedInterface,
                  "matching constraint mixed with other alternatives in \"" + e.constraint + "\"");

    std::optional<int> unify_with;
    if (all_match && match_target) {
      unify_with = *match_target;
    } else {
      TokenInfo probe;
      probe.alternatives = classes_of(spec);
      finish_token(probe);
      if (probe.fixed_register) {
        for (int o = 0; o < n_out; ++o) {
          const auto& out = fi.tokens[o];
          if (out.fixed_register == probe.fixed_register && !out.is_input) {
            unify_with = o;
            break;
          }
        }
      }
    }

    if (unify_with) {
      auto& out = fi.tokens[*unify_with];
      out.is_input = true;
      out.positions.push_back(p);
      fi.unified[p] = *unify_with;
      continue;
    }

    TokenInfo t;
    t.id = p;
    t.name = e.name;
    t.expr_text = e.expr_text;
    t.size_bytes = e.size_bytes;
    t.is_input = true;
    t.commutative_with_next = spec.commutative;
    t.alternatives = classes_of(spec);
    t.positions = {p};
    finish_token(t);
    fi.inputs.insert(p);
    fi.unified[p] = p;
    fi.tokens[p] = std::move(t);
  }

  for (const auto& c : chunk.clobbers) {
    if (c == "cc") {
      fi.flags_clobbered = true;
    } else if (c == "memory") {
      fi.memory_separated = false;
    } else if (auto sub = parse_subreg(c)) {
      fi.clobbered.insert(sub->parent);
    } else if (auto v = parse_vector_reg(c)) {
      fi.vector_clobbers.insert(*v);
    }
  }

  for (const auto& [id, t] : fi.tokens)
    if (t.fixed_register && fi.clobbered.contains(*t.fixed_register))
      throw Error(ErrorKind::ClobberOverlap, std::string("clobber \"") + reg_name(*t.fixed_register) +
                                                 "\" is pinned by operand %" + std::to_string(id));

  for (auto& [id, t] : fi.tokens) {
    if (!t.memory_class) continue;
    auto region = parse_region_expr(t.expr_text);
    if (!region) continue;
    for (const auto& [pid, pt] : fi.tokens) {
      if (pid == id || pt.memory_class || !pt.is_input) continue;
      if (squash(pt.expr_text) == region->pointer) {
        t.region = MemoryRegion{pid, region->offset, region->span.value_or(t.size_bytes)};
        break;
      }
    }
  }
  return fi;
}

RegSet register_exclusions(const FormalInterface& fi, int id) {
  const auto& t = fi.tokens.at(id);
  RegSet out = fi.clobbered;
  for (const auto& [uid, u] : fi.tokens) {
    if (uid == id || !u.fixed_register) continue;
    bool conflict = (t.is_input && u.is_input) || (t.is_output && u.is_output) ||
                    (t.early_clobber && u.is_input) || (u.early_clobber && t.is_input);
    if (conflict) out.insert(*u.fixed_register);
  }
  return out;
}

RegSet address_exclusions(const FormalInterface& fi, int id) {
  RegSet out = fi.clobbered;
  for (const auto& [uid, u] : fi.tokens) {
    if (uid == id || !u.fixed_register) continue;
    if (u.is_input || u.early_clobber) out.insert(*u.fixed_register);
  }
  return out;
}

namespace {

constexpr int32_t kSampleDisplacements[] = {4, -4, 0x1000};
constexpr int kScales[] = {1, 2, 4, 8};

// Sampled address family: simple forms first so truncated enumerations
// still cover every base register.
std::vector<MemAddr> address_family(RegSet excluded) {
  std::vector<Reg> bases, indices;
  for (int i = 0; i < kRegCount; ++i) {
    Reg r = static_cast<Reg>(i);
    if (excluded.contains(r)) continue;
    bases.push_back(r);
    if (r != Reg::esp) indices.push_back(r);
  }
  std::vector<MemAddr> out;
  for (Reg b : bases) out.push_back({b, std::nullopt, 1, 0});
  for (int32_t d : kSampleDisplacements)
    for (Reg b : bases) out.push_back({b, std::nullopt, 1, d});
  for (int s : kScales)
    for (Reg b : bases)
      for (Reg i : indices) out.push_back({b, i, s, 0});
  for (int32_t d : kSampleDisplacements)
    for (int s : kScales)
      for (Reg b : bases)
        for (Reg i : indices) out.push_back({b, i, s, d});
  return out;
}

std::vector<AsmOperand> candidates(const FormalInterface& fi, int id, const OperandClass& cls) {
  const auto& t = fi.tokens.at(id);
  std::vector<AsmOperand> out;
  cls.registers.minus(register_exclusions(fi, id)).for_each([&](Reg r) { out.push_back(AsmOperand::of_reg(r)); });
  if (cls.immediate && !t.is_output) {
    out.push_back(AsmOperand::of_imm(1));
    out.push_back(AsmOperand::of_imm(42));
  }
  if (cls.memory || (cls.address && !t.is_output)) {
    for (const auto& a : address_family(address_exclusions(fi, id))) {
      AsmOperand op = AsmOperand::of_mem(a);
      if (!cls.memory) op.kind = AsmOperand::Kind::Address;
      out.push_back(op);
    }
  }
  return out;
}

struct Column {
  std::vector<int> ids;
  std::vector<std::vector<AsmOperand>> cands;
};

std::vector<Column> build_columns(const FormalInterface& fi) {
  std::vector<Column> cols;
  for (int col = 0; col < fi.alternative_count; ++col) {
    std::vector<std::map<int, OperandClass>> variants(1);
    for (const auto& [id, t] : fi.tokens) variants[0][id] = t.alternatives[col];
    for (const auto& [id, t] : fi.tokens) {
      if (!t.commutative_with_next) continue;
      auto next = fi.unified.find(id + 1);
      if (next == fi.unified.end() || next->second != id + 1) continue;
      std::size_t n = variants.size();
      for (std::size_t v = 0; v < n; ++v) {
        auto swapped = variants[v];
        std::swap(swapped[id], swapped[id + 1]);
        variants.push_back(std::move(swapped));
      }
    }
    for (const auto& v : variants) {
      Column c;
      for (const auto& [id, cls] : v) {
        c.ids.push_back(id);
        c.cands.push_back(candidates(fi, id, cls));
      }
      cols.push_back(std::move(c));
    }
  }
  return cols;
}

}  // namespace

std::string assignment_violation(const FormalInterface& fi, const TokenAssignment& t) {
  for (const auto& [id, tok] : fi.tokens)
    if (!t.count(id)) return "token %" + std::to_string(id) + " unassigned";
  std::set<Reg> out_regs;
  std::set<std::string> out_mems;
  std::set<Reg> in_regs;
  for (const auto& [id, op] : t) {
    const auto& tok = fi.tokens.at(id);
    if (!(op.registers() & fi.clobbered).empty()) return "operand of %" + std::to_string(id) + " is not clobber-free";
    if (tok.is_output) {
      if (op.kind != AsmOperand::Kind::Register && op.kind != AsmOperand::Kind::Memory)
        return "output %" + std::to_string(id) + " is not assignable";
      if (op.kind == AsmOperand::Kind::Register && !out_regs.insert(op.reg).second)
        return "outputs share register " + std::string(reg_name(op.reg));
      if (op.kind == AsmOperand::Kind::Memory && !out_mems.insert(op.to_string()).second)
        return "outputs share memory operand " + op.to_string();
    }
    if (tok.is_input && op.kind == AsmOperand::Kind::Register && !in_regs.insert(op.reg).second)
      return "inputs share register " + std::string(reg_name(op.reg));
    if (op.kind == AsmOperand::Kind::Register && register_exclusions(fi, id).contains(op.reg))
      return "register of %" + std::to_string(id) + " is pinned by another operand";
    if ((op.kind == AsmOperand::Kind::Memory || op.kind == AsmOperand::Kind::Address) &&
        !(op.registers() & address_exclusions(fi, id)).empty())
      return "address of %" + std::to_string(id) + " uses a pinned register";
  }
  for (int e : fi.early_clobber) {
    const auto& op = t.at(e);
    if (op.kind != AsmOperand::Kind::Register) continue;
    for (const auto& [id, other] : t)
      if (id != e && fi.tokens.at(id).is_input && other.registers().contains(op.reg))
        return "early-clobber output %" + std::to_string(e) + " shares " + reg_name(op.reg);
  }
  return {};
}

AssignmentSet enumerate_assignments(const FormalInterface& fi, int cap) {
  if (cap < 1) throw Error(ErrorKind::Usage, "assignment cap must be >= 1");
  AssignmentSet result;
  auto cols = build_columns(fi);
  std::size_t max_len = 0;
  for (const auto& c : cols)
    for (const auto& l : c.cands) max_len = std::max(max_len, l.size());

  std::unordered_set<std::string> seen;
  bool stop = false;
  // Visits index tuples level by level (level = largest index in the tuple)
  // so small candidate indices of every token combine before large ones.
  for (std::size_t level = 0; level < std::max<std::size_t>(max_len, 1) && !stop; ++level) {
    for (const auto& c : cols) {
      if (stop) break;
      const std::size_t n = c.ids.size();
      bool empty = std::any_of(c.cands.begin(), c.cands.end(), [](const auto& l) { return l.empty(); });
      if (empty) continue;
      std::vector<std::size_t> limit(n), idx(n, 0);
      bool reachable = n == 0 ? level == 0 : false;
      for (std::size_t k = 0; k < n; ++k) {
        limit[k] = std::min(level, c.cands[k].size() - 1);
        reachable = reachable || c.cands[k].size() > level;
      }
      if (!reachable) continue;
      while (true) {
        bool at_level = n == 0;
        for (std::size_t k = 0; k < n; ++k) at_level = at_level || idx[k] == level;
        if (at_level) {
          TokenAssignment t;
          for (std::size_t k = 0; k < n; ++k) t[c.ids[k]] = c.cands[k][idx[k]];
          if (assignment_violation(fi, t).empty() && seen.insert(to_string(t)).second) {
            if (static_cast<int>(result.assignments.size()) == cap) {
              result.truncated = true;
              stop = true;
              break;
            }
            result.assignments.push_back(std::move(t));
          }
        }
        std::size_t k = 0;
        while (k < n && idx[k] == limit[k]) idx[k++] = 0;
        if (k == n) break;
        ++idx[k];
      }
    }
  }
  if (result.assignments.empty())
    throw Error(ErrorKind::Unsatisfiable, "no token assignment satisfies the interface");
  return result;
}

AbstractSet abstract_of(const AsmOperand& op) {
  AbstractSet s;
  switch (op.kind) {
    case AsmOperand::Kind::Register: s.insert({AbstractLocation::Kind::Direct, op.reg}); break;
    case AsmOperand::Kind::Immediate: s.insert({AbstractLocation::Kind::Immediate, Reg::eax}); break;
    case AsmOperand::Kind::Memory:
    case AsmOperand::Kind::Address:
      op.registers().for_each([&](Reg r) { s.insert({AbstractLocation::Kind::Indirect, r}); });
      break;
  }
  return s;
}

AbstractDomain abstract_domain(const FormalInterface& fi) {
  AbstractDomain dom;
  for (const auto& [id, t] : fi.tokens) {
    AbstractSet& s = dom[id];
    std::vector<OperandClass> classes = t.alternatives;
    // A commutative pair may exchange constraint classes.
    if (t.commutative_with_next && fi.tokens.count(id + 1)) {
      for (const auto& c : fi.tokens.at(id + 1).alternatives) classes.push_back(c);
    }
    if (id > 0 && fi.tokens.count(id - 1) && fi.tokens.at(id - 1).commutative_with_next && t.is_input) {
      for (const auto& c : fi.tokens.at(id - 1).alternatives) classes.push_back(c);
    }
    const RegSet reg_ok = RegSet::all().minus(register_exclusions(fi, id)).minus(RegSet::of(Reg::esp));
    const RegSet addr_ok = RegSet::all().minus(address_exclusions(fi, id));
    for (const auto& c : classes) {
      (c.registers & reg_ok).for_each([&](Reg r) { s.insert({AbstractLocation::Kind::Direct, r}); });
      if (c.immediate && !t.is_output) s.insert({AbstractLocation::Kind::Immediate, Reg::eax});
      if (c.memory || (c.address && !t.is_output))
        addr_ok.for_each([&](Reg r) { s.insert({AbstractLocation::Kind::Indirect, r}); });
    }
  }
  return dom;
}

}  // namespace ric
