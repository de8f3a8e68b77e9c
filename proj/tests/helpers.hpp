#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <sstream>
#include <string>
#include <vector>

#include "ric/checker.hpp"
#include "ric/extraction.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(RIC_TEST_DATA) + "/" + name; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Chunk from the text between the parentheses of an asm statement.
inline ric::ChunkAst chunk_of(const std::string& body) {
  return ric::parse_asm_statement(body, ric::SourceSpan{"test.c", 1, 1, 0, 0});
}

// Every chunk scanned from a fixture source, in order.
inline std::vector<ric::ChunkAst> source_chunks(const std::string& file) {
  const std::string text = read_text(data_path(file));
  std::vector<ric::ChunkAst> out;
  for (const auto& raw : ric::scan_c_source(text, file).statements) out.push_back(ric::parse_asm_statement(raw));
  return out;
}

// The compare-and-swap chunk used throughout the suite.
inline ric::ChunkAst motivating_chunk() {
  for (auto& c : source_chunks("motivating.c"))
    if (c.asm_template.find("cmpxchg8b") != std::string::npos) return c;
  throw std::runtime_error("motivating fixture missing");
}

inline std::vector<ric::ChunkAst> corpus() { return ric::load_chunk_file(data_path("corpus.json")); }

inline std::multiset<std::string> categories(const ric::CheckResult& r) {
  std::multiset<std::string> out;
  for (const auto& i : r.issues) out.insert(ric::to_string(i.category));
  return out;
}

}  // namespace testing
