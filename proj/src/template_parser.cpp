#include <algorithm>
#include <cctype>

#include "ric/asm_ir.hpp"
#include "ric/error.hpp"

namespace ric {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Splits the template into statements, dropping comments.
std::vector<std::string> split_statements(const std::string& tmpl) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    char c = tmpl[i];
    if (c == '#') {
      while (i < tmpl.size() && tmpl[i] != '\n') ++i;
      c = '\n';
    } else if (c == '/' && i + 1 < tmpl.size() && tmpl[i + 1] == '*') {
      auto end = tmpl.find("*/", i + 2);
      i = end == std::string::npos ? tmpl.size() : end + 1;
      cur += ' ';
      continue;
    }
    if (c == '\n' || c == ';') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<std::string> split_args(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

std::optional<int64_t> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used, 0);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

class Parser {
 public:
  Parser(const ChunkAst& chunk, const FormalInterface& fi) : chunk_(chunk), fi_(fi) {}

  TokenRef token_ref(const std::string& s) {
    // s starts after '%'
    TokenRef ref;
    std::size_t i = 0;
    if (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i])) && i + 1 < s.size() &&
        (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '[')) {
      ref.modifier = s[i];
      ++i;
    }
    if (ref.modifier == 'l') throw Error(ErrorKind::UnknownMnemonic, "asm goto labels are not supported");
    std::string rest = s.substr(i);
    int position = -1;
    if (!rest.empty() && rest[0] == '[') {
      auto close = rest.find(']');
      if (close == std::string::npos || close + 1 != rest.size())
        throw Error(ErrorKind::BadTokenRef, "%" + s);
      std::string name = rest.substr(1, close - 1);
      for (int p = 0; p < chunk_.entry_count(); ++p)
        if (chunk_.entry(p).name == name) position = p;
      if (position < 0) throw Error(ErrorKind::BadTokenRef, "no operand named [" + name + "]");
    } else {
      auto n = parse_number(rest);
      if (!n || rest.find_first_not_of("0123456789") != std::string::npos) throw Error(ErrorKind::BadTokenRef, "%" + s);
      position = static_cast<int>(*n);
      if (position >= chunk_.entry_count())
        throw Error(ErrorKind::BadTokenRef, "%" + rest + " exceeds the operand count");
    }
    ref.position = position;
    ref.token = fi_.canonical(position);
    return ref;
  }

  AddrPart addr_part(const std::string& s) {
    AddrPart part;
    if (s.rfind("%%", 0) == 0) {
      auto r = parse_subreg(lower(s.substr(2)));
      if (!r || r->width != 32) throw Error(ErrorKind::UnknownMnemonic, "bad address register " + s);
      part.reg = r;
    } else if (s.rfind("%", 0) == 0) {
      part.token = token_ref(s.substr(1));
    } else {
      throw Error(ErrorKind::UnknownMnemonic, "bad address component '" + s + "'");
    }
    return part;
  }

  AsmArg memory(const std::string& s) {
    AsmArg a;
    a.kind = AsmArg::Kind::Memory;
    auto open = s.find('(');
    std::string disp = trim(s.substr(0, open));
    if (open != std::string::npos) {
      auto close = s.rfind(')');
      if (close == std::string::npos || close < open) throw Error(ErrorKind::UnknownMnemonic, "bad memory operand " + s);
      auto parts = split_args(s.substr(open + 1, close - open - 1));
      if (!parts.empty() && !parts[0].empty()) a.base = addr_part(parts[0]);
      if (parts.size() > 1 && !parts[1].empty()) a.index = addr_part(parts[1]);
      if (parts.size() > 2) {
        auto sc = parse_number(parts[2]);
        if (!sc || (*sc != 1 && *sc != 2 && *sc != 4 && *sc != 8))
          throw Error(ErrorKind::UnknownMnemonic, "bad scale in " + s);
        a.scale = static_cast<int>(*sc);
      }
    }
    displacement(disp, a);
    return a;
  }

  void displacement(const std::string& disp, AsmArg& a) {
    if (disp.empty()) return;
    if (disp[0] == '%') {
      a.token = token_ref(disp.substr(1));
      a.has_token_disp = true;
      return;
    }
    if (auto n = parse_number(disp)) {
      a.imm = *n;
      return;
    }
    auto plus = disp.find_last_of("+-");
    if (plus != std::string::npos && plus > 0) {
      if (auto n = parse_number(disp.substr(plus + 1))) {
        a.imm = disp[plus] == '-' ? -*n : *n;
        a.symbol = trim(disp.substr(0, plus));
        return;
      }
    }
    a.symbol = disp;
  }

  AsmArg arg(const std::string& s, bool branch) {
    AsmArg a;
    if (s.empty()) throw Error(ErrorKind::UnknownMnemonic, "empty operand");
    if (s[0] == '*') throw Error(ErrorKind::UnknownMnemonic, "indirect jumps are not supported");
    if (s[0] == '$') {
      std::string v = trim(s.substr(1));
      a.kind = AsmArg::Kind::Immediate;
      if (!v.empty() && v[0] == '%') {
        a.token = token_ref(v.substr(1));
        a.has_token_disp = true;
      } else if (auto n = parse_number(v)) {
        a.imm = *n;
      } else {
        a.symbol = v;
      }
      return a;
    }
    if (s.find('(') != std::string::npos) return memory(s);
    if (s.rfind("%%", 0) == 0) {
      std::string name = lower(s.substr(2));
      if (auto v = parse_vector_reg(name)) {
        a.kind = AsmArg::Kind::VectorRegister;
        a.vector = *v;
        return a;
      }
      auto r = parse_subreg(name);
      if (!r) throw Error(ErrorKind::UnknownMnemonic, "unknown register " + s);
      a.kind = AsmArg::Kind::Register;
      a.reg = *r;
      return a;
    }
    if (s[0] == '%') {
      a.kind = AsmArg::Kind::Token;
      a.token = token_ref(s.substr(1));
      return a;
    }
    if (branch) {
      a.kind = AsmArg::Kind::Label;
      a.symbol = s;
      return a;
    }
    return memory(s);
  }

 private:
  const ChunkAst& chunk_;
  const FormalInterface& fi_;
};

bool is_label_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$')) return false;
  return true;
}

}  // namespace

ParsedTemplate parse_template(const std::string& asm_template, const ChunkAst& chunk, const FormalInterface& fi) {
  Parser parser(chunk, fi);
  ParsedTemplate out;
  std::vector<std::string> pending_labels;
  bool pending_lock = false;
  for (std::string stmt : split_statements(asm_template)) {
    // Leading "label:" definitions.
    while (true) {
      auto colon = stmt.find(':');
      if (colon == std::string::npos) break;
      std::string name = trim(stmt.substr(0, colon));
      if (!is_label_name(name)) break;
      pending_labels.push_back(name);
      stmt = trim(stmt.substr(colon + 1));
    }
    if (stmt.empty()) continue;
    std::size_t sp = 0;
    while (sp < stmt.size() && !std::isspace(static_cast<unsigned char>(stmt[sp]))) ++sp;
    std::string mnemonic = lower(stmt.substr(0, sp));
    std::string rest = trim(stmt.substr(sp));
    if (mnemonic == "lock") {
      if (rest.empty()) {
        pending_lock = true;
        continue;
      }
      pending_lock = true;
      sp = 0;
      while (sp < rest.size() && !std::isspace(static_cast<unsigned char>(rest[sp]))) ++sp;
      mnemonic = lower(rest.substr(0, sp));
      rest = trim(rest.substr(sp));
    }
    if (!mnemonic.empty() && mnemonic[0] == '.')
      throw Error(ErrorKind::UnknownMnemonic, "assembler directive " + mnemonic);
    AsmInstr instr;
    instr.mnemonic = mnemonic;
    instr.lock = pending_lock;
    instr.text = stmt;
    instr.labels = std::move(pending_labels);
    pending_labels.clear();
    pending_lock = false;
    const bool branch = mnemonic[0] == 'j';
    for (const auto& a : split_args(rest)) instr.args.push_back(parser.arg(a, branch));
    out.instrs.push_back(std::move(instr));
  }
  if (pending_lock) throw Error(ErrorKind::UnknownMnemonic, "dangling lock prefix");
  out.trailing_labels = std::move(pending_labels);
  return out;
}

std::set<int> written_vector_registers(const ChunkAst& chunk) {
  std::set<int> out;
  for (const auto& stmt : split_statements(chunk.asm_template)) {
    std::size_t sp = stmt.find_first_of(" \t");
    if (sp == std::string::npos) continue;
    std::string mnemonic = lower(stmt.substr(0, sp));
    auto args = split_args(stmt.substr(sp));
    if (args.empty()) continue;
    const std::string& dst = args.back();
    if (dst.rfind("%%", 0) != 0) continue;
    // Stores and compares do not write their last operand.
    if (mnemonic.rfind("ucomis", 0) == 0 || mnemonic.rfind("comis", 0) == 0 || mnemonic.rfind("ptest", 0) == 0)
      continue;
    if (auto v = parse_vector_reg(lower(dst.substr(2)))) out.insert(*v);
  }
  return out;
}

}  // namespace ric
