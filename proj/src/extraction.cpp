#include "ric/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ric/error.hpp"
#include "ric/registers.hpp"

namespace ric {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

class LineIndex {
 public:
  explicit LineIndex(std::string_view text) {
    starts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i)
      if (text[i] == '\n') starts_.push_back(i + 1);
  }

  std::pair<int, int> locate(std::size_t offset) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
    auto line = static_cast<int>(it - starts_.begin());
    return {line, static_cast<int>(offset - starts_[line - 1]) + 1};
  }

 private:
  std::vector<std::size_t> starts_;
};

// Skips a string or character literal starting at `i` (on the quote).
// Returns the offset one past the closing quote, or text.size() if unterminated.
std::size_t skip_literal(std::string_view text, std::size_t i) {
  char quote = text[i++];
  while (i < text.size()) {
    char c = text[i];
    if (c == '\\') {
      i += 2;
      continue;
    }
    if (c == quote) return i + 1;
    if (c == '\n') return i;  // unterminated literal: recover at end of line
    ++i;
  }
  return text.size();
}

std::size_t skip_comment(std::string_view text, std::size_t i) {
  if (text.compare(i, 2, "//") == 0) {
    auto nl = text.find('\n', i);
    return nl == std::string_view::npos ? text.size() : nl;
  }
  auto end = text.find("*/", i + 2);
  return end == std::string_view::npos ? text.size() : end + 2;
}

bool at_comment(std::string_view text, std::size_t i) {
  return i + 1 < text.size() && text[i] == '/' && (text[i + 1] == '/' || text[i + 1] == '*');
}

std::size_t skip_space_and_comments(std::string_view text, std::size_t i) {
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    } else if (at_comment(text, i)) {
      i = skip_comment(text, i);
    } else {
      break;
    }
  }
  return i;
}

// Finds the parenthesis matching the one at `open`; npos when unbalanced.
std::size_t find_matching_paren(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size();) {
    char c = text[i];
    if (at_comment(text, i)) {
      i = skip_comment(text, i);
      continue;
    }
    if (c == '"' || c == '\'') {
      i = skip_literal(text, i);
      continue;
    }
    if (c == '(') ++depth;
    if (c == ')' && --depth == 0) return i;
    ++i;
  }
  return std::string_view::npos;
}

bool is_asm_keyword(std::string_view id) { return id == "asm" || id == "__asm__" || id == "__asm"; }

std::optional<Qualifier> qualifier_of(std::string_view id) {
  if (id == "volatile" || id == "__volatile__" || id == "__volatile") return Qualifier::Volatile;
  if (id == "inline" || id == "__inline__" || id == "__inline") return Qualifier::Inline;
  if (id == "goto") return Qualifier::Goto;
  return std::nullopt;
}

// Keywords after which an asm keyword still starts a statement.
bool is_statement_keyword(std::string_view id) {
  return id == "else" || id == "do" || id == "return" || id == "case" || id == "default";
}

int decode_hex(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Decodes the content of a C string literal (without its quotes).
std::string decode_c_string(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c != '\\' || i + 1 >= s.size()) {
      out += c;
      continue;
    }
    char e = s[++i];
    switch (e) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case 'v': out += '\v'; break;
      case 'f': out += '\f'; break;
      case 'a': out += '\a'; break;
      case 'b': out += '\b'; break;
      case 'x': {
        int v = 0;
        while (i + 1 < s.size() && decode_hex(s[i + 1]) >= 0) v = v * 16 + decode_hex(s[++i]);
        out += static_cast<char>(v);
        break;
      }
      default:
        if (e >= '0' && e <= '7') {
          int v = e - '0';
          for (int k = 0; k < 2 && i + 1 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '7'; ++k)
            v = v * 8 + (s[++i] - '0');
          out += static_cast<char>(v);
        } else {
          out += e;  // \\ \" \' \?
        }
    }
  }
  return out;
}

constexpr std::string_view kConstraintAlphabet = "=+&%,abcdSDUqQrRinpmg0123456789?!*";

// Returns the first character outside the supported constraint alphabet,
// allowing bracketed symbolic names ("[name]") used by matching constraints.
std::optional<char> bad_constraint_char(std::string_view c) {
  bool in_name = false;
  for (char ch : c) {
    if (in_name) {
      if (ch == ']') in_name = false;
      else if (!is_ident_char(ch)) return ch;
      continue;
    }
    if (ch == '[') {
      in_name = true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    if (kConstraintAlphabet.find(ch) == std::string_view::npos) return ch;
  }
  if (in_name) return '[';
  return std::nullopt;
}

class BodyParser {
 public:
  BodyParser(std::string_view body, std::size_t base) : s_(body), base_(base) {}

  ChunkAst parse(const SourceSpan& span) {
    ChunkAst chunk;
    chunk.span = span;
    ChunkLayout layout;

    skip_ws();
    if (!at('"')) fail("expected the template string literal");
    chunk.asm_template = read_string_concat(&layout.template_pieces);

    int section = 0;
    while (true) {
      skip_ws();
      if (pos_ >= s_.size()) break;
      if (!at(':')) fail("expected ':' between interface sections");
      layout.colons.push_back(base_ + pos_);
      ++pos_;
      ++section;
      switch (section) {
        case 1: parse_entries(chunk.outputs, layout.output_entries, layout.output_constraints); break;
        case 2: parse_entries(chunk.inputs, layout.input_entries, layout.input_constraints); break;
        case 3: parse_clobbers(chunk, layout.clobber_literals); break;
        case 4: parse_labels(); break;
        default: fail("too many ':' sections");
      }
    }

    int position = 0;
    for (auto& e : chunk.outputs) e.position = position++;
    for (auto& e : chunk.inputs) e.position = position++;
    layout.close_paren = base_ + s_.size();
    chunk.layout = std::move(layout);
    return chunk;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::MalformedInterface, what + " at body offset " + std::to_string(pos_));
  }

  bool at(char c) const { return pos_ < s_.size() && s_[pos_] == c; }

  void skip_ws() { pos_ = skip_space_and_comments(s_, pos_); }

  std::string read_string_concat(std::vector<ByteRange>* pieces) {
    std::string out;
    while (true) {
      skip_ws();
      if (!at('"')) break;
      std::size_t start = pos_;
      std::size_t end = skip_literal(s_, pos_);
      if (end > s_.size() || s_[end - 1] != '"' || end - start < 2) fail("unterminated string literal");
      out += decode_c_string(s_.substr(start + 1, end - start - 2));
      if (pieces) pieces->push_back({base_ + start, base_ + end});
      pos_ = end;
    }
    return out;
  }

  void parse_entries(std::vector<OperandEntry>& out, std::vector<ByteRange>& entry_ranges,
                     std::vector<ByteRange>& constraint_ranges) {
    skip_ws();
    if (pos_ >= s_.size() || at(':')) return;
    while (true) {
      skip_ws();
      std::size_t entry_start = pos_;
      OperandEntry entry;
      if (at('[')) {
        auto close = s_.find(']', pos_);
        if (close == std::string_view::npos) fail("unterminated symbolic operand name");
        entry.name = trim(s_.substr(pos_ + 1, close - pos_ - 1));
        pos_ = close + 1;
        skip_ws();
      }
      if (!at('"')) fail("expected a constraint string");
      std::vector<ByteRange> pieces;
      entry.constraint = read_string_concat(&pieces);
      if (entry.constraint.empty()) fail("empty constraint");
      if (auto bad = bad_constraint_char(entry.constraint))
        throw Error(ErrorKind::BadConstraintChar,
                    std::string("'") + *bad + "' in constraint \"" + entry.constraint + "\"");
      constraint_ranges.push_back({pieces.front().begin, pieces.back().end});
      skip_ws();
      if (!at('(')) fail("expected '(' before operand expression");
      auto close = find_matching_paren(s_, pos_);
      if (close == std::string_view::npos) fail("unbalanced operand expression");
      entry.expr_text = trim(s_.substr(pos_ + 1, close - pos_ - 1));
      pos_ = close + 1;
      entry_ranges.push_back({base_ + entry_start, base_ + pos_});
      out.push_back(std::move(entry));
      skip_ws();
      if (!at(',')) break;
      ++pos_;
    }
  }

  void parse_clobbers(ChunkAst& chunk, std::vector<ByteRange>& ranges) {
    skip_ws();
    if (pos_ >= s_.size() || at(':')) return;
    while (true) {
      skip_ws();
      if (!at('"')) fail("expected a clobber string");
      std::vector<ByteRange> pieces;
      std::string raw = read_string_concat(&pieces);
      auto name = normalize_clobber(raw);
      if (!name) fail("unknown clobber \"" + raw + "\"");
      chunk.clobbers.push_back(*name);
      ranges.push_back({pieces.front().begin, pieces.back().end});
      skip_ws();
      if (!at(',')) break;
      ++pos_;
    }
  }

  // asm goto label list: accepted and ignored.
  void parse_labels() {
    while (pos_ < s_.size() && !at(':')) ++pos_;
  }

  std::string_view s_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

std::string strip_modifiers(std::string_view constraint) {
  std::string out;
  for (char c : constraint)
    if (c != '=' && c != '+' && c != '&' && c != '%' && !std::isspace(static_cast<unsigned char>(c)))
      out += c;
  return out;
}

std::optional<Reg> fixed_letter_register(char c) {
  switch (c) {
    case 'a': return Reg::eax;
    case 'b': return Reg::ebx;
    case 'c': return Reg::ecx;
    case 'd': return Reg::edx;
    case 'S': return Reg::esi;
    case 'D': return Reg::edi;
    default: return std::nullopt;
  }
}

void check_clobber_overlap(ChunkAst& chunk) {
  auto check = [&](const OperandEntry& e) {
    std::string core = strip_modifiers(e.constraint);
    std::optional<Reg> pinned;
    std::stringstream ss(core);
    std::string alt;
    bool all_same = true;
    while (std::getline(ss, alt, ',')) {
      std::optional<Reg> r = alt.size() == 1 ? fixed_letter_register(alt[0]) : std::nullopt;
      if (!r || (pinned && *pinned != *r)) {
        all_same = false;
        break;
      }
      pinned = r;
    }
    if (!all_same || !pinned) return;
    if (std::find(chunk.clobbers.begin(), chunk.clobbers.end(), reg_name(*pinned)) != chunk.clobbers.end())
      chunk.diagnostics.push_back(std::string("clobber \"") + reg_name(*pinned) + "\" overlaps operand %" +
                                  std::to_string(e.position));
  };
  for (const auto& e : chunk.outputs) check(e);
  for (const auto& e : chunk.inputs) check(e);
}

bool valid_size(int s) { return s == 1 || s == 2 || s == 4 || s == 8; }

}  // namespace

const OperandEntry& ChunkAst::entry(int position) const {
  if (position < static_cast<int>(outputs.size())) return outputs.at(position);
  return inputs.at(position - outputs.size());
}

bool structurally_equal(const ChunkAst& a, const ChunkAst& b) {
  return a.asm_template == b.asm_template && a.outputs == b.outputs && a.inputs == b.inputs &&
         a.clobbers == b.clobbers && a.qualifiers == b.qualifiers && a.context == b.context;
}

std::optional<std::string> normalize_clobber(std::string_view name) {
  std::string n;
  for (char c : name)
    if (!std::isspace(static_cast<unsigned char>(c))) n += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (!n.empty() && n[0] == '%') n.erase(0, 1);
  if (n == "cc" || n == "memory") return n;
  if (auto sub = parse_subreg(n)) return std::string(reg_name(sub->parent));
  if (auto v = parse_vector_reg(n)) return vector_reg_name(*v);
  // x87 stack registers and a few GCC pseudo-registers are accepted as
  // names; they never participate in the modelled semantics.
  if (n == "st" || (n.size() == 5 && n.rfind("st(", 0) == 0 && n[4] == ')') || n == "dirflag" ||
      n == "fpsr" || n == "fpcr" || n == "flags")
    return n == "flags" ? std::string("cc") : n;
  return std::nullopt;
}

ScanResult scan_c_source(std::string_view text, const std::string& file) {
  ScanResult result;
  LineIndex lines(text);
  auto make_span = [&](std::size_t b, std::size_t e) {
    auto [line, col] = lines.locate(b);
    return SourceSpan{file, line, col, b, e};
  };

  std::optional<std::string> pending_size;
  bool prev_is_ident = false;  // previous significant token is an identifier or ']'
  bool line_start = true;

  for (std::size_t i = 0; i < text.size();) {
    char c = text[i];
    if (c == '\n') {
      line_start = true;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (line_start && c == '#') {
      // Preprocessor directive, including backslash continuations.
      while (i < text.size() && text[i] != '\n') {
        if (text[i] == '\\' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
        ++i;
      }
      continue;
    }
    line_start = false;
    if (at_comment(text, i)) {
      std::size_t end = skip_comment(text, i);
      if (text[i + 1] == '/') {
        std::string body = trim(text.substr(i + 2, end - i - 2));
        if (body.rfind("size:", 0) == 0) pending_size = trim(std::string_view(body).substr(5));
      }
      i = end;
      continue;
    }
    if (c == '"' || c == '\'') {
      i = skip_literal(text, i);
      prev_is_ident = false;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t start = i;
      while (i < text.size() && is_ident_char(text[i])) ++i;
      std::string_view id = text.substr(start, i - start);
      if (!is_asm_keyword(id) || prev_is_ident) {
        prev_is_ident = !is_statement_keyword(id);
        continue;
      }
      std::set<Qualifier> qualifiers;
      std::size_t j = skip_space_and_comments(text, i);
      while (j < text.size() && is_ident_start(text[j])) {
        std::size_t k = j;
        while (k < text.size() && is_ident_char(text[k])) ++k;
        auto q = qualifier_of(text.substr(j, k - j));
        if (!q) break;
        qualifiers.insert(*q);
        j = skip_space_and_comments(text, k);
      }
      if (j >= text.size() || text[j] != '(') {
        prev_is_ident = true;
        continue;
      }
      std::size_t close = find_matching_paren(text, j);
      if (close == std::string_view::npos) {
        result.diagnostics.push_back({make_span(start, i), "UnterminatedStatement: unbalanced parentheses after asm"});
        prev_is_ident = false;
        continue;
      }
      RawStatement stmt;
      stmt.span = make_span(start, close + 1);
      stmt.qualifiers = std::move(qualifiers);
      stmt.body = std::string(text.substr(j + 1, close - j - 1));
      stmt.body_offset = j + 1;
      stmt.text = std::string(text.substr(start, close + 1 - start));
      stmt.size_annotation = std::move(pending_size);
      pending_size.reset();
      result.statements.push_back(std::move(stmt));
      i = close + 1;
      prev_is_ident = false;
      continue;
    }
    prev_is_ident = (c == ']');
    if (c == ';' || c == '{' || c == '}') pending_size.reset();
    ++i;
  }
  return result;
}

ChunkAst parse_asm_statement(std::string_view body, const SourceSpan& span) {
  BodyParser parser(body, 0);
  ChunkAst chunk = parser.parse(span);
  chunk.layout.reset();
  check_clobber_overlap(chunk);
  return chunk;
}

ChunkAst parse_asm_statement(const RawStatement& raw) {
  BodyParser parser(raw.body, raw.body_offset);
  ChunkAst chunk = parser.parse(raw.span);
  chunk.qualifiers = raw.qualifiers;
  chunk.layout->stmt_begin = raw.span.byte_start;
  chunk.layout->stmt_end = raw.span.byte_end;
  chunk.layout->stmt_text = raw.text;
  if (raw.size_annotation) apply_size_annotation(chunk, *raw.size_annotation);
  check_clobber_overlap(chunk);
  return chunk;
}

void apply_size_annotation(ChunkAst& chunk, std::string_view annotation) {
  auto parse_list = [](std::string_view s) {
    std::vector<int> out;
    std::stringstream ss{std::string(s)};
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        out.push_back(std::stoi(item));
      } catch (const std::exception&) {
        out.push_back(-1);
      }
    }
    return out;
  };
  auto bar = annotation.find('|');
  auto outs = parse_list(annotation.substr(0, bar));
  auto ins = bar == std::string_view::npos ? std::vector<int>{} : parse_list(annotation.substr(bar + 1));
  if (outs.size() != chunk.outputs.size() || ins.size() != chunk.inputs.size()) {
    chunk.diagnostics.push_back("size annotation does not match the operand count; ignored");
    return;
  }
  for (int s : outs)
    if (!valid_size(s)) {
      chunk.diagnostics.push_back("size annotation has an invalid size; ignored");
      return;
    }
  for (int s : ins)
    if (!valid_size(s)) {
      chunk.diagnostics.push_back("size annotation has an invalid size; ignored");
      return;
    }
  for (std::size_t k = 0; k < outs.size(); ++k) chunk.outputs[k].size_bytes = outs[k];
  for (std::size_t k = 0; k < ins.size(); ++k) chunk.inputs[k].size_bytes = ins[k];
}

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::SchemaViolation, path + ": " + what);
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) schema_fail(path + "." + it.key(), "unknown field");
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) schema_fail(path + "." + key, "missing field");
  return obj.at(key);
}

std::string require_string(const json& v, const std::string& path) {
  if (!v.is_string()) schema_fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<OperandEntry> parse_entries_json(const json& arr, const std::string& path) {
  if (!arr.is_array()) schema_fail(path, "expected an array");
  std::vector<OperandEntry> out;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const json& e = arr[k];
    std::string p = path + "[" + std::to_string(k) + "]";
    if (!e.is_object()) schema_fail(p, "expected an object");
    reject_unknown(e, p, {"name", "constraint", "size_bytes", "expr_text"});
    OperandEntry entry;
    if (e.contains("name") && !e.at("name").is_null()) entry.name = require_string(e.at("name"), p + ".name");
    entry.constraint = require_string(require(e, p, "constraint"), p + ".constraint");
    if (entry.constraint.empty()) schema_fail(p + ".constraint", "must be non-empty");
    if (auto bad = bad_constraint_char(entry.constraint))
      schema_fail(p + ".constraint", std::string("bad constraint character '") + *bad + "'");
    if (e.contains("size_bytes")) {
      const json& s = e.at("size_bytes");
      if (!s.is_number_integer()) schema_fail(p + ".size_bytes", "expected an integer");
      entry.size_bytes = s.get<int>();
      if (!valid_size(entry.size_bytes)) schema_fail(p + ".size_bytes", "must be one of 1, 2, 4, 8");
    }
    if (e.contains("expr_text")) entry.expr_text = require_string(e.at("expr_text"), p + ".expr_text");
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace

std::vector<ChunkAst> parse_chunk_json(std::string_view json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    schema_fail("$", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) schema_fail("$", "top level must be an array");
  std::vector<ChunkAst> chunks;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const json& r = doc[k];
    std::string p = "$[" + std::to_string(k) + "]";
    if (!r.is_object()) schema_fail(p, "expected an object");
    reject_unknown(r, p, {"arch", "template", "outputs", "inputs", "clobbers", "qualifiers", "context"});
    if (r.contains("arch") && require_string(r.at("arch"), p + ".arch") != "i386")
      schema_fail(p + ".arch", "only i386 is supported");
    ChunkAst chunk;
    chunk.asm_template = require_string(require(r, p, "template"), p + ".template");
    chunk.outputs = parse_entries_json(require(r, p, "outputs"), p + ".outputs");
    chunk.inputs = parse_entries_json(require(r, p, "inputs"), p + ".inputs");
    const json& clobbers = require(r, p, "clobbers");
    if (!clobbers.is_array()) schema_fail(p + ".clobbers", "expected an array");
    for (std::size_t c = 0; c < clobbers.size(); ++c) {
      std::string cp = p + ".clobbers[" + std::to_string(c) + "]";
      auto name = normalize_clobber(require_string(clobbers[c], cp));
      if (!name) schema_fail(cp, "unknown clobber");
      chunk.clobbers.push_back(*name);
    }
    if (r.contains("qualifiers")) {
      const json& qs = r.at("qualifiers");
      if (!qs.is_array()) schema_fail(p + ".qualifiers", "expected an array");
      for (std::size_t q = 0; q < qs.size(); ++q) {
        std::string qp = p + ".qualifiers[" + std::to_string(q) + "]";
        auto qual = qualifier_of(require_string(qs[q], qp));
        if (!qual) schema_fail(qp, "unknown qualifier");
        chunk.qualifiers.insert(*qual);
      }
    }
    chunk.span.file = origin;
    chunk.span.line = static_cast<int>(k) + 1;
    if (r.contains("context")) {
      const json& ctx = r.at("context");
      std::string cp = p + ".context";
      if (!ctx.is_object()) schema_fail(cp, "expected an object");
      reject_unknown(ctx, cp, {"file", "line", "single_chunk_function"});
      if (ctx.contains("file")) chunk.span.file = require_string(ctx.at("file"), cp + ".file");
      if (ctx.contains("line")) {
        if (!ctx.at("line").is_number_integer() || ctx.at("line").get<int>() < 1)
          schema_fail(cp + ".line", "expected a positive integer");
        chunk.span.line = ctx.at("line").get<int>();
      }
      if (ctx.contains("single_chunk_function")) {
        if (!ctx.at("single_chunk_function").is_boolean())
          schema_fail(cp + ".single_chunk_function", "expected a boolean");
        chunk.context.single_chunk_function = ctx.at("single_chunk_function").get<bool>();
      }
    }
    int position = 0;
    for (auto& e : chunk.outputs) e.position = position++;
    for (auto& e : chunk.inputs) e.position = position++;
    check_clobber_overlap(chunk);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

std::vector<ChunkAst> load_chunk_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::SchemaViolation, path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_chunk_json(buf.str(), path);
}

std::string chunk_to_json(const std::vector<ChunkAst>& chunks) {
  json doc = json::array();
  auto entries = [](const std::vector<OperandEntry>& es) {
    json arr = json::array();
    for (const auto& e : es) {
      json j;
      if (e.name) j["name"] = *e.name;
      j["constraint"] = e.constraint;
      j["size_bytes"] = e.size_bytes;
      j["expr_text"] = e.expr_text;
      arr.push_back(std::move(j));
    }
    return arr;
  };
  for (const auto& c : chunks) {
    json r;
    r["arch"] = "i386";
    r["template"] = c.asm_template;
    r["outputs"] = entries(c.outputs);
    r["inputs"] = entries(c.inputs);
    r["clobbers"] = c.clobbers;
    json qs = json::array();
    for (auto q : c.qualifiers)
      qs.push_back(q == Qualifier::Volatile ? "volatile" : q == Qualifier::Inline ? "inline" : "goto");
    r["qualifiers"] = qs;
    json ctx = json::object();
    if (!c.span.file.empty()) ctx["file"] = c.span.file;
    ctx["line"] = c.span.line;
    if (c.context.single_chunk_function) ctx["single_chunk_function"] = *c.context.single_chunk_function;
    r["context"] = ctx;
    doc.push_back(std::move(r));
  }
  return doc.dump(2);
}

std::string quote_c_string(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\%03o", static_cast<unsigned char>(c));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

std::string render_statement(const ChunkAst& chunk) {
  std::string out = "__asm__";
  if (chunk.qualifiers.count(Qualifier::Volatile)) out += " volatile";
  if (chunk.qualifiers.count(Qualifier::Inline)) out += " inline";
  if (chunk.qualifiers.count(Qualifier::Goto)) out += " goto";
  out += " (" + quote_c_string(chunk.asm_template);
  auto entries = [](const std::vector<OperandEntry>& es) {
    std::string s;
    for (std::size_t k = 0; k < es.size(); ++k) {
      if (k) s += ", ";
      if (es[k].name) s += "[" + *es[k].name + "] ";
      s += quote_c_string(es[k].constraint) + " (" + es[k].expr_text + ")";
    }
    return s;
  };
  std::size_t sections = !chunk.clobbers.empty() ? 3 : !chunk.inputs.empty() ? 2 : !chunk.outputs.empty() ? 1 : 0;
  if (sections >= 1) out += " : " + entries(chunk.outputs);
  if (sections >= 2) out += " : " + entries(chunk.inputs);
  if (sections >= 3) {
    out += " : ";
    for (std::size_t k = 0; k < chunk.clobbers.size(); ++k) {
      if (k) out += ", ";
      out += quote_c_string(chunk.clobbers[k]);
    }
  }
  return out + ")";
}

}  // namespace ric
