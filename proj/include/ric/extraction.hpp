#pragma once

// Locating GNU extended asm statements in C text and parsing them into
// structured chunks.

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ric {

struct SourceSpan {
  std::string file;
  int line = 1;
  int column = 1;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;

  bool operator==(const SourceSpan&) const = default;
};

struct OperandEntry {
  std::optional<std::string> name;
  std::string constraint;
  std::string expr_text;
  int size_bytes = 4;
  int position = 0;

  bool operator==(const OperandEntry&) const = default;
};

enum class Qualifier { Volatile, Inline, Goto };

struct ChunkContext {
  std::optional<bool> single_chunk_function;
  std::string notes;

  bool operator==(const ChunkContext&) const = default;
};

// Byte ranges into the original source, recorded when the chunk was parsed
// from C text. Used to place minimal textual patches.
struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const ByteRange&) const = default;
};

struct ChunkLayout {
  std::size_t stmt_begin = 0;
  std::size_t stmt_end = 0;  // one past the closing parenthesis
  std::string stmt_text;     // statement text as scanned, for staleness checks
  std::vector<ByteRange> template_pieces;  // string literals, quotes included
  std::vector<ByteRange> output_constraints;
  std::vector<ByteRange> input_constraints;
  std::vector<ByteRange> output_entries;
  std::vector<ByteRange> input_entries;
  std::vector<ByteRange> clobber_literals;
  // Offsets of the section-separating colons that exist (0 to 4 of them).
  std::vector<std::size_t> colons;
  std::size_t close_paren = 0;
};

struct ChunkAst {
  SourceSpan span;
  std::set<Qualifier> qualifiers;
  std::string asm_template;
  std::vector<OperandEntry> outputs;
  std::vector<OperandEntry> inputs;
  std::vector<std::string> clobbers;
  ChunkContext context;
  // Parse-time diagnostics that do not prevent building the chunk
  // (e.g. a clobber naming a register pinned by an operand).
  std::vector<std::string> diagnostics;
  std::optional<ChunkLayout> layout;

  const OperandEntry& entry(int position) const;
  int entry_count() const { return static_cast<int>(outputs.size() + inputs.size()); }
};

bool structurally_equal(const ChunkAst& a, const ChunkAst& b);

struct RawStatement {
  SourceSpan span;
  std::set<Qualifier> qualifiers;
  std::string body;  // text between the outer parentheses
  std::size_t body_offset = 0;
  std::string text;  // full statement text from the keyword to ')'
  std::optional<std::string> size_annotation;  // from a preceding "// size:" comment
};

struct ScanDiagnostic {
  SourceSpan span;
  std::string message;
};

struct ScanResult {
  std::vector<RawStatement> statements;
  std::vector<ScanDiagnostic> diagnostics;
};

ScanResult scan_c_source(std::string_view text, const std::string& file);

/// Parses the body of an asm statement (the text between its parentheses).
ChunkAst parse_asm_statement(std::string_view body, const SourceSpan& span);

/// Parses a scanned statement, carrying over its qualifiers, the optional
/// size annotation and the byte layout used for patching.
ChunkAst parse_asm_statement(const RawStatement& raw);

/// Applies a "8,1|8,4,4,4,4" style size list (outputs | inputs).
void apply_size_annotation(ChunkAst& chunk, std::string_view annotation);

std::vector<ChunkAst> load_chunk_file(const std::string& path);
std::vector<ChunkAst> parse_chunk_json(std::string_view json_text, const std::string& origin);
std::string chunk_to_json(const std::vector<ChunkAst>& chunks);

/// Renders a chunk back to GNU syntax: `__asm__ [volatile] ("..." : ... )`.
std::string render_statement(const ChunkAst& chunk);

/// Encodes a decoded template as a C string literal.
std::string quote_c_string(std::string_view text);

/// Normalizes a clobber name ("%EBX" -> "ebx"). Returns nullopt when the
/// name is not a known register, "cc" or "memory".
std::optional<std::string> normalize_clobber(std::string_view name);

}  // namespace ric
