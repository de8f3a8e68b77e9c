#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "ric/asm_ir.hpp"
#include "ric/oracle.hpp"
#include "ric/refiner.hpp"

using namespace ric;
using testing::chunk_of;

namespace {

std::vector<MemAccess> accesses_of(const ChunkAst& c) {
  const FormalInterface fi = derive_interface(c);
  return memory_access_analysis(lift_chunk(c, fi), fi);
}

std::vector<Edit::Kind> kinds(const std::vector<Edit>& edits) {
  std::vector<Edit::Kind> out;
  for (const Edit& e : edits) out.push_back(e.kind);
  return out;
}

}  // namespace

TEST_CASE("dropping unnecessary declarations") {
  SUBCASE("an input the template never reads") {
    const ChunkAst c = testing::source_chunks("dead_input.c").at(0);
    const std::vector<Edit> r = refine_interface(c, check_chunk(c));
    REQUIRE(r.size() == 1);
    CHECK(r[0].kind == Edit::Kind::DropInput);
    CHECK(r[0].position == 2);
  }
  SUBCASE("a clobber the template never writes") {
    const ChunkAst c = testing::source_chunks("dead_clobber.c").at(0);
    const std::vector<Edit> r = refine_interface(c, check_chunk(c));
    REQUIRE(r.size() == 1);
    CHECK(r[0].kind == Edit::Kind::DropClobber);
    CHECK(r[0].clobber == "ecx");
  }
  SUBCASE("the memory keyword on a register-only template") {
    const ChunkAst c = chunk_of("\"movl %1, %0\" : \"=r\" (y) : \"r\" (x) : \"memory\"");
    CHECK(kinds(refine_interface(c, check_chunk(c))) == std::vector<Edit::Kind>{Edit::Kind::DropMemoryKeyword});
  }
  SUBCASE("options switch each refinement off") {
    const ChunkAst c = testing::source_chunks("dead_input.c").at(0);
    RefineOptions opt;
    opt.inputs = false;
    CHECK(refine_interface(c, check_chunk(c), opt).empty());
  }
  SUBCASE("a written clobber stays") {
    const ChunkAst c = chunk_of("\"movl $0, %%ecx\" : : : \"ecx\"");
    CHECK(refine_interface(c, check_chunk(c)).empty());
  }
}

TEST_CASE("memory access analysis") {
  SUBCASE("an eight-byte memory operand") {
    const auto acc = accesses_of(chunk_of("\"cmpxchg8b %0\" : \"+m\" (*p) : \"a\" (a), \"d\" (d), \"b\" (b), \"c\" (c) : \"cc\""));
    REQUIRE_FALSE(acc.empty());
    const auto load = std::find_if(acc.begin(), acc.end(), [](const MemAccess& a) { return a.kind == MemAccess::Kind::Load; });
    REQUIRE(load != acc.end());
    CHECK(load->base == MemAccess::Base::Token);
    CHECK(load->token == 0);
    CHECK_FALSE(load->through_pointer);
    CHECK(load->size == 8);
    CHECK(load->offset == 0);
  }
  SUBCASE("a store four bytes past a pointer") {
    const auto acc = accesses_of(chunk_of("\"movl %1, 4(%0)\" : : \"r\" (p), \"r\" (v) : \"memory\""));
    REQUIRE(acc.size() == 1);
    CHECK(acc[0].kind == MemAccess::Kind::Store);
    CHECK(acc[0].base == MemAccess::Base::Token);
    CHECK(acc[0].token == 0);
    CHECK(acc[0].through_pointer);
    CHECK(acc[0].offset == 4);
    CHECK(acc[0].size == 4);
  }
  SUBCASE("an address built from a fixed register") {
    const auto acc = accesses_of(chunk_of("\"movl (%%esi,%%ecx,4), %0\" : \"=r\" (y) : : \"memory\""));
    REQUIRE(acc.size() == 1);
    CHECK(acc[0].base == MemAccess::Base::Unresolved);
  }
}

TEST_CASE("adjacent loads merge into one entry") {
  const ChunkAst c = testing::source_chunks("libtomcrypt.c").at(0);
  CHECK(check_chunk(c).verdict == Verdict::Issues);
  const RefineOutcome out = refine_chunk(c);
  REQUIRE(out.applicable);
  const auto m2e = std::find_if(out.refinements.begin(), out.refinements.end(),
                                [](const Edit& e) { return e.kind == Edit::Kind::MemoryToEntries; });
  REQUIRE(m2e != out.refinements.end());
  REQUIRE(m2e->entries.size() == 1);
  CHECK(m2e->entries[0].constraint == "m");
  CHECK(m2e->entries[0].size_bytes == 8);

  std::vector<Edit> all = out.patch.edits;
  all.insert(all.end(), out.refinements.begin(), out.refinements.end());
  const ChunkAst refined = apply_edits(c, all);
  CHECK(std::find(refined.clobbers.begin(), refined.clobbers.end(), "memory") == refined.clobbers.end());
  CHECK(check_chunk(refined).verdict == Verdict::Compliant);
}

TEST_CASE("an unattributable access keeps the memory keyword") {
  const ChunkAst c = chunk_of("\"movl (%%esi,%%ecx,4), %0\" : \"=r\" (y) : : \"memory\"");
  const FormalInterface fi = derive_interface(c);
  CHECK_FALSE(memory_to_m_entries(c, fi, accesses_of(c)));
}

TEST_CASE("refinement soundness across the corpus") {
  TrialConfig cfg;
  cfg.trials = 20;
  int refined_count = 0;
  for (const ChunkAst& c : testing::corpus()) {
    const CheckResult r = check_chunk(c);
    if (r.verdict != Verdict::Compliant) continue;
    const std::vector<Edit> edits = refine_interface(c, r);
    if (edits.empty()) continue;
    ++refined_count;
    CAPTURE(c.asm_template);
    const ChunkAst after = apply_edits(c, edits);
    CHECK(check_chunk(after).verdict == Verdict::Compliant);
    for (Analysis a : {Analysis::FrameWrite, Analysis::FrameRead, Analysis::Unicity})
      CHECK(oracle_check(after, a, cfg).outcome != OracleOutcome::Violation);
  }
  CHECK(refined_count > 0);
}

TEST_CASE("refinement only shrinks register declarations") {
  for (const ChunkAst& c : testing::corpus()) {
    const CheckResult r = check_chunk(c);
    if (r.verdict != Verdict::Compliant) continue;
    const std::vector<Edit> edits = refine_interface(c, r);
    const ChunkAst after = apply_edits(c, edits);
    CAPTURE(c.asm_template);
    for (const std::string& k : after.clobbers)
      CHECK(std::find(c.clobbers.begin(), c.clobbers.end(), k) != c.clobbers.end());
    CHECK(after.outputs.size() <= c.outputs.size() + 1);
    for (const Edit& e : edits) {
      if (e.kind != Edit::Kind::MemoryToEntries) continue;
      for (const OperandEntry& n : e.entries) CHECK(n.constraint.find('m') != std::string::npos);
    }
    // Refining again finds nothing more to drop.
    const CheckResult again = check_chunk(after);
    if (again.verdict == Verdict::Compliant) CHECK(refine_interface(after, again).empty());
  }
}
