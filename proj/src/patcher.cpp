#include "ric/patcher.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "ric/error.hpp"

namespace ric {

namespace {

std::optional<char> letter_of(Reg r) {
  switch (r) {
    case Reg::eax: return 'a';
    case Reg::ebx: return 'b';
    case Reg::ecx: return 'c';
    case Reg::edx: return 'd';
    case Reg::esi: return 'S';
    case Reg::edi: return 'D';
    default: return std::nullopt;
  }
}

std::optional<int> owner_of(const FormalInterface& fi, Reg r) {
  for (const auto& [id, t] : fi.tokens)
    if (t.fixed_register == r) return id;
  return std::nullopt;
}

int entry_position(const TokenInfo& t) { return t.positions.empty() ? t.id : t.positions.front(); }

// First position of the input entry folded into `t` (for input-only tokens
// this is the token's own entry).
int input_position(const TokenInfo& t, int output_count) {
  for (int p : t.positions)
    if (p >= output_count) return p;
  return entry_position(t);
}

std::string dummy_name(const ChunkAst& chunk, std::set<std::string>& taken) {
  for (int n = 0;; ++n) {
    std::string name = "_ric_dummy" + std::to_string(n);
    if (taken.count(name)) continue;
    bool used = false;
    for (const auto* list : {&chunk.outputs, &chunk.inputs})
      for (const auto& e : *list) used = used || e.expr_text.find(name) != std::string::npos;
    if (used) continue;
    taken.insert(name);
    return name;
  }
}

std::string register_letters(std::string_view constraint) {
  std::string out;
  for (char c : constraint)
    if (std::isalpha(static_cast<unsigned char>(c)) || c == ',') out += c;
  return out;
}

std::string clobber_name(const Location& l) {
  if (l.kind == Location::Kind::VecReg) return vector_reg_name(l.id);
  return reg_name(l.as_reg());
}

bool is_digit_constraint(const std::string& c) {
  return !c.empty() && std::all_of(c.begin(), c.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); });
}

}  // namespace

const char* to_string(Edit::Kind k) {
  switch (k) {
    case Edit::Kind::AddClobber: return "AddClobber";
    case Edit::Kind::AddOutput: return "AddOutput";
    case Edit::Kind::AddInput: return "AddInput";
    case Edit::Kind::SetMemoryClobber: return "SetMemoryClobber";
    case Edit::Kind::MarkEarlyClobber: return "MarkEarlyClobber";
    case Edit::Kind::PromoteToReadWrite: return "PromoteToReadWrite";
    case Edit::Kind::DropInput: return "DropInput";
    case Edit::Kind::DropClobber: return "DropClobber";
    case Edit::Kind::DropMemoryKeyword: return "DropMemoryKeyword";
    case Edit::Kind::MemoryToEntries: return "MemoryToEntries";
  }
  return "?";
}

std::string describe(const Edit& e) {
  std::string s = to_string(e.kind);
  switch (e.kind) {
    case Edit::Kind::AddClobber:
    case Edit::Kind::DropClobber: return s + "(\"" + e.clobber + "\")";
    case Edit::Kind::AddOutput:
      s += "(\"" + e.constraint + "\" (" + e.expr_text + ")";
      if (e.rebind_input) s += ", matched by %" + std::to_string(e.position);
      return s + ")";
    case Edit::Kind::AddInput: return s + "(\"" + e.constraint + "\" (" + e.expr_text + "))";
    case Edit::Kind::MarkEarlyClobber:
    case Edit::Kind::PromoteToReadWrite:
    case Edit::Kind::DropInput: return s + "(%" + std::to_string(e.position) + ")";
    case Edit::Kind::MemoryToEntries: {
      s += "(";
      for (std::size_t k = 0; k < e.entries.size(); ++k)
        s += (k ? ", \"" : "\"") + e.entries[k].constraint + "\" (" + e.entries[k].expr_text + ")";
      return s + ")";
    }
    default: return s;
  }
}

// ---- synthesis -------------------------------------------------------------

Patch synthesize_patches(const ChunkAst& chunk, const CheckResult& result) {
  Patch patch;
  if (!result.interface || result.verdict == Verdict::Error) return patch;
  const FormalInterface& fi = *result.interface;
  const int nout = static_cast<int>(chunk.outputs.size());
  std::set<std::string> taken;

  auto push = [&](Edit e) {
    // Two findings with the same fix yield one edit; the reason is informational.
    const bool seen = std::any_of(patch.edits.begin(), patch.edits.end(), [&](Edit d) {
      d.reason = e.reason;
      return d == e;
    });
    if (!seen) patch.edits.push_back(std::move(e));
  };
  auto clobber = [&](const std::string& name, const std::string& why) {
    Edit e;
    e.kind = Edit::Kind::AddClobber;
    e.clobber = name;
    e.reason = why;
    push(e);
  };
  auto simple = [&](Edit::Kind k, int position, const std::string& why) {
    Edit e;
    e.kind = k;
    e.position = position;
    e.reason = why;
    push(e);
  };
  // The written input gets a write-only dummy companion it is matched to.
  std::set<int> dummied;
  auto add_dummy = [&](const TokenInfo& t, const std::string& constraint, const std::string& why) {
    if (!dummied.insert(t.id).second) return;
    Edit e;
    e.kind = Edit::Kind::AddOutput;
    e.constraint = constraint;
    e.expr_text = dummy_name(chunk, taken);
    e.size_bytes = t.size_bytes;
    e.position = input_position(t, nout);
    e.rebind_input = true;
    e.reason = why;
    push(e);
  };
  auto add_matching_input = [&](const TokenInfo& t, const std::string& why) {
    if (t.memory_class) {
      simple(Edit::Kind::PromoteToReadWrite, entry_position(t), why);
      return;
    }
    const OperandEntry& out = chunk.entry(entry_position(t));
    Edit e;
    e.kind = Edit::Kind::AddInput;
    e.constraint = std::to_string(entry_position(t));
    e.expr_text = out.expr_text;
    e.size_bytes = out.size_bytes;
    e.reason = why;
    push(e);
  };

  for (const Issue& issue : result.issues) {
    const Location& l = issue.location;
    switch (issue.category) {
      case IssueCategory::FlagClobbered: clobber("cc", "flags are written"); break;
      case IssueCategory::UnboundRegisterClobbered:
        if (l.kind == Location::Kind::Reg || l.kind == Location::Kind::VecReg)
          clobber(clobber_name(l), clobber_name(l) + " is written");
        else
          patch.unresolved.push_back(issue);
        break;
      case IssueCategory::ReadOnlyInputClobbered: {
        const TokenInfo* t = nullptr;
        if (l.kind == Location::Kind::Reg) {
          if (auto o = owner_of(fi, l.as_reg())) t = &fi.token(*o);
        } else if (l.kind == Location::Kind::Token) {
          t = &fi.token(l.id);
        }
        if (!t) {
          patch.unresolved.push_back(issue);
          break;
        }
        const std::string why = "input %" + std::to_string(entry_position(*t)) + " is overwritten";
        if (t->fixed_register) {
          if (auto c = letter_of(*t->fixed_register)) {
            add_dummy(*t, std::string("=") + *c, why);
            break;
          }
        }
        const OperandEntry& in = chunk.entry(input_position(*t, nout));
        if (!t->memory_class && !t->region && t->alternatives.size() == 1 && !is_digit_constraint(in.constraint)) {
          add_dummy(*t, "=" + register_letters(in.constraint), why);
        } else {
          simple(Edit::Kind::PromoteToReadWrite, input_position(*t, nout), why);
        }
        break;
      }
      case IssueCategory::UnboundMemoryWrite:
      case IssueCategory::UnboundMemoryRead:
        if (l.kind == Location::Kind::Memory) {
          Edit e;
          e.kind = Edit::Kind::SetMemoryClobber;
          e.reason = issue.category == IssueCategory::UnboundMemoryWrite ? "memory is written" : "memory is read";
          push(e);
        } else if (l.kind == Location::Kind::Token && fi.tokens.count(l.id)) {
          simple(Edit::Kind::PromoteToReadWrite, entry_position(fi.token(l.id)),
                 "output %" + std::to_string(entry_position(fi.token(l.id))) + " is read before being written");
        } else {
          patch.unresolved.push_back(issue);
        }
        break;
      case IssueCategory::NonWrittenWriteOnlyOutput:
      case IssueCategory::UnboundRegisterRead: {
        const TokenInfo* t = nullptr;
        if (l.kind == Location::Kind::Token) {
          t = &fi.token(l.id);
        } else if (l.kind == Location::Kind::Reg) {
          if (auto o = owner_of(fi, l.as_reg()); o && fi.token(*o).is_output && !fi.token(*o).is_input)
            t = &fi.token(*o);
        }
        if (!t || !t->is_output) {
          patch.unresolved.push_back(issue);
          break;
        }
        add_matching_input(*t, issue.category == IssueCategory::NonWrittenWriteOnlyOutput
                                   ? "output %" + std::to_string(entry_position(*t)) + " is never written"
                                   : "output %" + std::to_string(entry_position(*t)) + " is read before being written");
        break;
      }
      case IssueCategory::Unicity: {
        if (l.kind == Location::Kind::Reg) {
          const Reg r = l.as_reg();
          if (auto o = owner_of(fi, r)) {
            const TokenInfo& t = fi.token(*o);
            if (t.is_output) simple(Edit::Kind::MarkEarlyClobber, entry_position(t), "may share a location with a live operand");
            // input-only owners are handled by the frame-write dummy
          } else {
            clobber(reg_name(r), std::string(reg_name(r)) + " may hold a live operand");
          }
        } else if ((l.kind == Location::Kind::Token || l.kind == Location::Kind::TokenAddr) && fi.tokens.count(l.id)) {
          const TokenInfo& t = fi.token(l.id);
          if (t.is_output) simple(Edit::Kind::MarkEarlyClobber, entry_position(t), "may share a location with a live operand");
          else patch.unresolved.push_back(issue);
        } else {
          patch.unresolved.push_back(issue);
        }
        break;
      }
    }
  }
  return patch;
}

// ---- structural application -------------------------------------------------

namespace {

struct WorkEntry {
  OperandEntry entry;
  int old_pos = -1;           // -1: new entry
  bool moved = false;         // original input promoted into the outputs
  bool changed = false;       // constraint text differs from the original
  int match_new_output = -1;  // rebinding target (index into outputs)
};

struct Plan {
  std::vector<WorkEntry> outs, ins;
  std::vector<std::string> clobbers;
  std::vector<bool> clobber_kept;       // per original clobber
  std::vector<std::string> new_clobbers;
  std::vector<int> map;                 // old -> new position
  std::string tmpl;
  std::vector<std::pair<std::string, int>> declarations;  // dummy name, bytes
};

std::string renumber_constraint(const std::string& c, const std::vector<int>& map) {
  std::string out;
  for (std::size_t i = 0; i < c.size();) {
    if (!std::isdigit(static_cast<unsigned char>(c[i]))) {
      out += c[i++];
      continue;
    }
    std::size_t j = i;
    while (j < c.size() && std::isdigit(static_cast<unsigned char>(c[j]))) ++j;
    int n = std::stoi(c.substr(i, j - i));
    out += (n < static_cast<int>(map.size()) && map[n] >= 0) ? std::to_string(map[n]) : c.substr(i, j - i);
    i = j;
  }
  return out;
}

Plan make_plan(const ChunkAst& chunk, const std::vector<Edit>& edits) {
  Plan plan;
  const int nout = static_cast<int>(chunk.outputs.size());
  for (int k = 0; k < nout; ++k) plan.outs.push_back({chunk.outputs[k], k});
  for (std::size_t k = 0; k < chunk.inputs.size(); ++k) plan.ins.push_back({chunk.inputs[k], nout + static_cast<int>(k)});
  plan.clobbers = chunk.clobbers;
  plan.clobber_kept.assign(chunk.clobbers.size(), true);

  auto find = [](std::vector<WorkEntry>& list, int old) {
    return std::find_if(list.begin(), list.end(), [&](const WorkEntry& w) { return w.old_pos == old; });
  };
  auto has_clobber = [&](const std::string& name) {
    for (std::size_t k = 0; k < chunk.clobbers.size(); ++k)
      if (plan.clobber_kept[k] && chunk.clobbers[k] == name) return true;
    return std::find(plan.new_clobbers.begin(), plan.new_clobbers.end(), name) != plan.new_clobbers.end();
  };
  auto add_clobber = [&](const std::string& raw) {
    auto name = normalize_clobber(raw);
    if (!name) throw Error(ErrorKind::MalformedInterface, "unknown clobber \"" + raw + "\"");
    if (!has_clobber(*name)) plan.new_clobbers.push_back(*name);
  };
  auto drop_clobber = [&](const std::string& raw) {
    auto name = normalize_clobber(raw).value_or(raw);
    for (std::size_t k = 0; k < chunk.clobbers.size(); ++k)
      if (chunk.clobbers[k] == name) plan.clobber_kept[k] = false;
    std::erase(plan.new_clobbers, name);
  };

  for (const Edit& e : edits) {
    if (e.suggestion) continue;
    switch (e.kind) {
      case Edit::Kind::AddClobber: add_clobber(e.clobber); break;
      case Edit::Kind::SetMemoryClobber: add_clobber("memory"); break;
      case Edit::Kind::DropClobber: drop_clobber(e.clobber); break;
      case Edit::Kind::DropMemoryKeyword: drop_clobber("memory"); break;
      case Edit::Kind::AddOutput: {
        WorkEntry w;
        w.entry = {std::nullopt, e.constraint, e.expr_text, e.size_bytes, 0};
        plan.outs.push_back(w);
        if (e.expr_text.rfind("_ric_dummy", 0) == 0) plan.declarations.emplace_back(e.expr_text, e.size_bytes);
        if (e.rebind_input) {
          auto it = find(plan.ins, e.position);
          if (it == plan.ins.end()) throw Error(ErrorKind::MalformedInterface, "no input entry at position " + std::to_string(e.position));
          it->match_new_output = static_cast<int>(plan.outs.size()) - 1;
        }
        break;
      }
      case Edit::Kind::AddInput: {
        WorkEntry w;
        w.entry = {std::nullopt, e.constraint, e.expr_text, e.size_bytes, 0};
        plan.ins.push_back(w);
        break;
      }
      case Edit::Kind::MarkEarlyClobber: {
        auto it = find(plan.outs, e.position);
        if (it == plan.outs.end()) throw Error(ErrorKind::MalformedInterface, "no output entry at position " + std::to_string(e.position));
        std::string& c = it->entry.constraint;
        if (c.find('&') == std::string::npos) {
          c.insert(!c.empty() && (c[0] == '=' || c[0] == '+') ? 1 : 0, "&");
          it->changed = true;
        }
        break;
      }
      case Edit::Kind::PromoteToReadWrite: {
        if (auto it = find(plan.outs, e.position); it != plan.outs.end()) {
          std::string& c = it->entry.constraint;
          if (auto eq = c.find('='); eq != std::string::npos) {
            c[eq] = '+';
            it->changed = true;
          }
          break;
        }
        auto it = find(plan.ins, e.position);
        if (it == plan.ins.end()) throw Error(ErrorKind::MalformedInterface, "no entry at position " + std::to_string(e.position));
        WorkEntry w = *it;
        plan.ins.erase(it);
        w.entry.constraint = "+" + w.entry.constraint;
        w.moved = true;
        plan.outs.push_back(w);
        break;
      }
      case Edit::Kind::DropInput: {
        auto it = find(plan.ins, e.position);
        if (it == plan.ins.end()) throw Error(ErrorKind::MalformedInterface, "no input entry at position " + std::to_string(e.position));
        plan.ins.erase(it);
        break;
      }
      case Edit::Kind::MemoryToEntries:
        for (const OperandEntry& oe : e.entries) {
          WorkEntry w;
          w.entry = oe;
          bool is_out = !oe.constraint.empty() && (oe.constraint[0] == '=' || oe.constraint[0] == '+');
          (is_out ? plan.outs : plan.ins).push_back(w);
        }
        break;
    }
  }

  plan.map.assign(chunk.entry_count(), -1);
  const int new_nout = static_cast<int>(plan.outs.size());
  for (int k = 0; k < new_nout; ++k)
    if (plan.outs[k].old_pos >= 0) plan.map[plan.outs[k].old_pos] = k;
  for (std::size_t k = 0; k < plan.ins.size(); ++k)
    if (plan.ins[k].old_pos >= 0) plan.map[plan.ins[k].old_pos] = new_nout + static_cast<int>(k);

  for (auto* list : {&plan.outs, &plan.ins})
    for (WorkEntry& w : *list) {
      std::string c = renumber_constraint(w.entry.constraint, plan.map);
      if (w.match_new_output >= 0) c = std::to_string(w.match_new_output);
      if (c != w.entry.constraint) {
        w.entry.constraint = c;
        w.changed = true;
      }
    }
  for (std::size_t k = 0; k < chunk.clobbers.size(); ++k)
    if (!plan.clobber_kept[k]) plan.clobbers[k].clear();
  std::erase(plan.clobbers, std::string());
  plan.clobbers.insert(plan.clobbers.end(), plan.new_clobbers.begin(), plan.new_clobbers.end());
  plan.tmpl = renumber_template(chunk.asm_template, plan.map);
  return plan;
}

bool identity(const std::vector<int>& map) {
  for (std::size_t k = 0; k < map.size(); ++k)
    if (map[k] != static_cast<int>(k)) return false;
  return true;
}

}  // namespace

std::string renumber_template(const std::string& raw, const std::vector<int>& old_to_new) {
  std::string out;
  for (std::size_t i = 0; i < raw.size();) {
    if (raw[i] != '%') {
      out += raw[i++];
      continue;
    }
    if (i + 1 < raw.size() && raw[i + 1] == '%') {
      out += "%%";
      i += 2;
      continue;
    }
    std::size_t j = i + 1;
    while (j < raw.size() && std::isalpha(static_cast<unsigned char>(raw[j])) && j - i <= 2) ++j;
    std::size_t d = j;
    while (d < raw.size() && std::isdigit(static_cast<unsigned char>(raw[d]))) ++d;
    if (d == j) {
      out += raw[i++];
      continue;
    }
    int n = std::stoi(raw.substr(j, d - j));
    out += raw.substr(i, j - i);
    out += (n < static_cast<int>(old_to_new.size()) && old_to_new[n] >= 0) ? std::to_string(old_to_new[n]) : raw.substr(j, d - j);
    i = d;
  }
  return out;
}

std::vector<int> renumber_map(const ChunkAst& chunk, const std::vector<Edit>& edits) {
  return make_plan(chunk, edits).map;
}

ChunkAst apply_edits(const ChunkAst& chunk, const std::vector<Edit>& edits) {
  Plan plan = make_plan(chunk, edits);
  ChunkAst out = chunk;
  out.layout.reset();
  out.outputs.clear();
  out.inputs.clear();
  int pos = 0;
  for (const WorkEntry& w : plan.outs) {
    out.outputs.push_back(w.entry);
    out.outputs.back().position = pos++;
  }
  for (const WorkEntry& w : plan.ins) {
    out.inputs.push_back(w.entry);
    out.inputs.back().position = pos++;
  }
  out.clobbers = plan.clobbers;
  out.asm_template = plan.tmpl;
  return out;
}

PatchVerification verify_patch(const ChunkAst& chunk, const std::vector<Edit>& edits, const CheckOptions& opt) {
  PatchVerification v;
  ChunkAst patched;
  try {
    patched = apply_edits(chunk, edits);
    FormalInterface fi = derive_interface(patched);
    v.interface_satisfiable = !enumerate_assignments(fi, 1).assignments.empty();
  } catch (const Error& e) {
    v.note = e.what();
    return v;
  }
  CheckResult r = check_chunk(patched, opt);
  const bool framing_issue = std::any_of(r.issues.begin(), r.issues.end(),
                                         [](const Issue& i) { return analysis_of(i.category) != Analysis::Unicity; });
  v.framing_ok = (r.verdict == Verdict::Compliant || r.verdict == Verdict::Issues) && !framing_issue;
  v.fully_compliant = r.verdict == Verdict::Compliant;
  if (r.verdict == Verdict::Error || r.verdict == Verdict::OutOfScope) v.note = r.reason;
  v.after = std::move(r);
  return v;
}

// ---- textual application ------------------------------------------------------

namespace {

struct Replacement {
  std::size_t begin, end;
  std::string text;
};

std::string entry_text(const OperandEntry& e) {
  std::string s;
  if (e.name) s += "[" + *e.name + "] ";
  return s + quote_c_string(e.constraint) + " (" + e.expr_text + ")";
}

const char* c_type(int bytes) {
  switch (bytes) {
    case 1: return "unsigned char";
    case 2: return "unsigned short";
    case 8: return "unsigned long long";
    default: return "unsigned int";
  }
}

std::size_t line_start(const std::string& s, std::size_t pos) {
  while (pos > 0 && s[pos - 1] != '\n') --pos;
  return pos;
}

std::string trim_copy(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::string apply_to_source(const std::string& source, const ChunkAst& chunk, const std::vector<Edit>& edits) {
  if (!chunk.layout) throw Error(ErrorKind::SpanStale, "chunk has no source layout");
  const ChunkLayout& lay = *chunk.layout;
  if (lay.stmt_end > source.size() || lay.stmt_begin > lay.stmt_end ||
      source.compare(lay.stmt_begin, lay.stmt_end - lay.stmt_begin, lay.stmt_text) != 0)
    throw Error(ErrorKind::SpanStale, chunk.span.file + ":" + std::to_string(chunk.span.line) + ": statement text changed since scan");
  if (lay.output_entries.size() != chunk.outputs.size() || lay.input_entries.size() != chunk.inputs.size() ||
      lay.clobber_literals.size() != chunk.clobbers.size())
    throw Error(ErrorKind::SpanStale, "layout does not match the chunk");

  const Plan plan = make_plan(chunk, edits);
  std::vector<Replacement> reps;

  if (!identity(plan.map))
    for (const ByteRange& r : lay.template_pieces) {
      std::string raw = source.substr(r.begin, r.end - r.begin);
      std::string now = renumber_template(raw, plan.map);
      if (now != raw) reps.push_back({r.begin, r.end, now});
    }

  // Each section is re-rendered between its first and last original item,
  // keeping original separators between surviving neighbours.
  std::vector<std::string> trailing(3);  // content for sections missing a colon
  auto section = [&](int index, const std::vector<ByteRange>& ranges, const std::vector<std::string>& originals,
                     const std::vector<bool>& kept, const std::vector<std::string>& added, bool modified) {
    if (!modified) return;
    std::string body;
    int last_kept = -1;
    for (std::size_t k = 0; k < ranges.size(); ++k) {
      if (!kept[k]) continue;
      if (!body.empty()) {
        body += last_kept == static_cast<int>(k) - 1 ? source.substr(ranges[k - 1].end, ranges[k].begin - ranges[k - 1].end) : ", ";
      }
      body += originals[k];
      last_kept = static_cast<int>(k);
    }
    for (const std::string& a : added) body += (body.empty() ? "" : ", ") + a;
    if (!ranges.empty()) {
      reps.push_back({ranges.front().begin, ranges.back().end, body});
    } else if (static_cast<int>(lay.colons.size()) > index) {
      if (!body.empty()) reps.push_back({lay.colons[index] + 1, lay.colons[index] + 1, " " + body});
    } else {
      trailing[index] = body;
    }
  };

  auto operands = [&](int index, const std::vector<OperandEntry>& orig, const std::vector<ByteRange>& entry_ranges,
                      const std::vector<ByteRange>& constraint_ranges, int first_pos, const std::vector<WorkEntry>& now) {
    std::vector<std::string> texts(orig.size());
    std::vector<bool> kept(orig.size(), false);
    std::vector<std::string> added;
    bool modified = false;
    for (const WorkEntry& w : now) {
      const int k = w.old_pos - first_pos;
      if (w.old_pos < 0 || w.moved || k < 0 || k >= static_cast<int>(orig.size())) {
        added.push_back(entry_text(w.entry));
        modified = true;
        continue;
      }
      kept[k] = true;
      const ByteRange& er = entry_ranges[k];
      std::string t = source.substr(er.begin, er.end - er.begin);
      if (w.changed) {
        const ByteRange& cr = constraint_ranges[k];
        t = t.substr(0, cr.begin - er.begin) + quote_c_string(w.entry.constraint) + t.substr(cr.end - er.begin);
        modified = true;
      }
      texts[k] = t;
    }
    if (std::count(kept.begin(), kept.end(), true) != static_cast<long>(orig.size())) modified = true;
    section(index, entry_ranges, texts, kept, added, modified);
  };

  const int nout = static_cast<int>(chunk.outputs.size());
  operands(0, chunk.outputs, lay.output_entries, lay.output_constraints, 0, plan.outs);
  operands(1, chunk.inputs, lay.input_entries, lay.input_constraints, nout, plan.ins);
  {
    std::vector<std::string> texts;
    for (const ByteRange& r : lay.clobber_literals) texts.push_back(source.substr(r.begin, r.end - r.begin));
    std::vector<std::string> added;
    for (const std::string& c : plan.new_clobbers) added.push_back(quote_c_string(c));
    const bool modified = !added.empty() || std::count(plan.clobber_kept.begin(), plan.clobber_kept.end(), false) > 0;
    section(2, lay.clobber_literals, texts, plan.clobber_kept, added, modified);
  }

  int last_needed = -1;
  for (int k = 0; k < 3; ++k)
    if (!trailing[k].empty()) last_needed = k;
  if (last_needed >= 0) {
    std::string tail;
    for (int k = static_cast<int>(lay.colons.size()); k <= last_needed; ++k)
      tail += " :" + (trailing[k].empty() ? std::string() : " " + trailing[k]);
    std::size_t at = lay.close_paren;
    while (at > lay.stmt_begin && std::isspace(static_cast<unsigned char>(source[at - 1]))) --at;
    reps.push_back({at, at, tail});
  }

  // Declarations for dummy lvalues go above the statement (and above a
  // size annotation directly preceding it, which is rewritten to match).
  std::size_t anchor = line_start(source, lay.stmt_begin);
  const std::string indent = [&] {
    std::size_t e = anchor;
    while (e < source.size() && (source[e] == ' ' || source[e] == '\t')) ++e;
    return source.substr(anchor, e - anchor);
  }();
  if (anchor > 0) {
    std::size_t prev = line_start(source, anchor - 1);
    std::string line = trim_copy(std::string_view(source).substr(prev, anchor - 1 - prev));
    if (line.rfind("//", 0) == 0 && trim_copy(line.substr(2)).rfind("size:", 0) == 0) {
      const bool sizes_change = !plan.declarations.empty() || plan.outs.size() != chunk.outputs.size() ||
                                plan.ins.size() != chunk.inputs.size();
      if (sizes_change) {
        std::string list;
        for (std::size_t k = 0; k < plan.outs.size(); ++k) list += (k ? "," : "") + std::to_string(plan.outs[k].entry.size_bytes);
        list += "|";
        for (std::size_t k = 0; k < plan.ins.size(); ++k) list += (k ? "," : "") + std::to_string(plan.ins[k].entry.size_bytes);
        std::size_t s = prev;
        while (s < anchor && (source[s] == ' ' || source[s] == '\t')) ++s;
        reps.push_back({s, anchor - 1, "// size: " + list});
      }
      anchor = prev;
    }
  }
  if (!plan.declarations.empty()) {
    std::string decl;
    for (const auto& [name, bytes] : plan.declarations) decl += indent + c_type(bytes) + " " + name + ";\n";
    reps.push_back({anchor, anchor, decl});
  }

  std::stable_sort(reps.begin(), reps.end(), [](const Replacement& a, const Replacement& b) { return a.begin > b.begin; });
  std::string out = source;
  for (const Replacement& r : reps) out.replace(r.begin, r.end - r.begin, r.text);
  return out;
}

std::string unified_diff(const std::string& before, const std::string& after, const std::string& file) {
  if (before == after) return "";
  auto split = [](const std::string& s) {
    std::vector<std::string> lines;
    std::size_t i = 0;
    while (i < s.size()) {
      std::size_t nl = s.find('\n', i);
      if (nl == std::string::npos) {
        lines.push_back(s.substr(i));
        break;
      }
      lines.push_back(s.substr(i, nl - i + 1));
      i = nl + 1;
    }
    return lines;
  };
  const auto a = split(before), b = split(after);
  std::size_t pre = 0;
  while (pre < a.size() && pre < b.size() && a[pre] == b[pre]) ++pre;
  std::size_t suf = 0;
  while (suf < a.size() - pre && suf < b.size() - pre && a[a.size() - 1 - suf] == b[b.size() - 1 - suf]) ++suf;

  // Edit script over the differing middle: ' ' keep, '-' delete, '+' insert.
  struct Op {
    char tag;
    std::size_t ai, bi;
  };
  std::vector<Op> ops;
  for (std::size_t k = 0; k < pre; ++k) ops.push_back({' ', k, k});
  const std::size_t n = a.size() - pre - suf, m = b.size() - pre - suf;
  if (n * m <= 4'000'000) {
    std::vector<std::vector<uint32_t>> lcs(n + 1, std::vector<uint32_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
      for (std::size_t j = m; j-- > 0;)
        lcs[i][j] = a[pre + i] == b[pre + j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
      if (i < n && j < m && a[pre + i] == b[pre + j]) {
        ops.push_back({' ', pre + i++, pre + j++});
      } else if (i < n && (j == m || lcs[i + 1][j] >= lcs[i][j + 1])) {
        ops.push_back({'-', pre + i++, pre + j});
      } else {
        ops.push_back({'+', pre + i, pre + j++});
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) ops.push_back({'-', pre + i, pre});
    for (std::size_t j = 0; j < m; ++j) ops.push_back({'+', pre + n, pre + j});
  }
  for (std::size_t k = 0; k < suf; ++k) ops.push_back({' ', pre + n + k, pre + m + k});

  const std::size_t ctx = 3;
  std::ostringstream os;
  os << "--- a/" << file << "\n+++ b/" << file << "\n";
  auto emit = [&](char tag, const std::string& line) {
    os << tag << line;
    if (line.empty() || line.back() != '\n') os << "\n\\ No newline at end of file\n";
  };
  auto range = [](std::size_t first, std::size_t count) {
    std::size_t line = count == 0 ? first : first + 1;
    return std::to_string(line) + (count == 1 ? "" : "," + std::to_string(count));
  };
  std::size_t k = 0;
  while (k < ops.size()) {
    while (k < ops.size() && ops[k].tag == ' ') ++k;
    if (k == ops.size()) break;
    std::size_t start = k >= ctx ? k - ctx : 0;
    // Extend while the next change is within 2*ctx unchanged lines.
    std::size_t end = k;
    for (;;) {
      while (end < ops.size() && ops[end].tag != ' ') ++end;
      std::size_t gap = end;
      while (gap < ops.size() && ops[gap].tag == ' ') ++gap;
      if (gap < ops.size() && gap - end <= 2 * ctx) {
        end = gap;
        continue;
      }
      end = std::min(ops.size(), end + ctx);
      break;
    }
    std::size_t acount = 0, bcount = 0;
    for (std::size_t x = start; x < end; ++x) {
      acount += ops[x].tag != '+';
      bcount += ops[x].tag != '-';
    }
    os << "@@ -" << range(ops[start].ai, acount) << " +" << range(ops[start].bi, bcount) << " @@\n";
    for (std::size_t x = start; x < end; ++x) {
      const Op& o = ops[x];
      emit(o.tag, o.tag == '+' ? b[o.bi] : a[o.ai]);
    }
    k = end;
  }
  return os.str();
}

std::string render_diff(const std::string& source, const std::string& file, const ChunkAst& chunk,
                        const std::vector<Edit>& edits) {
  if (std::none_of(edits.begin(), edits.end(), [](const Edit& e) { return !e.suggestion; })) return "";
  return unified_diff(source, apply_to_source(source, chunk, edits), file);
}

}  // namespace ric
