#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "ric/asm_ir.hpp"
#include "ric/error.hpp"

using namespace ric;
using testing::categories;
using testing::chunk_of;

namespace {

bool has(const CheckResult& r, IssueCategory c, const Location& where) {
  return std::any_of(r.issues.begin(), r.issues.end(),
                     [&](const Issue& i) { return i.category == c && i.location == where; });
}

std::set<Location> live_set(const std::map<Location, uint64_t>& m) {
  std::set<Location> s;
  for (const auto& [l, mask] : m)
    if (mask) s.insert(l);
  return s;
}

// Issue identity used for subset comparisons between analysis variants.
std::set<std::string> keys(const CheckResult& r) {
  std::set<std::string> s;
  for (const Issue& i : r.issues) s.insert(std::string(to_string(i.category)) + "@" + i.location.to_string());
  return s;
}

ChunkAst from_file(const std::string& file, std::size_t index) {
  return ric::load_chunk_file(testing::data_path(file)).at(index);
}

}  // namespace

TEST_CASE("compare-and-swap chunk: clobbered read-only input and a unicity hazard") {
  const CheckResult r = check_chunk(testing::motivating_chunk());
  REQUIRE(r.verdict == Verdict::Issues);
  CHECK(has(r, IssueCategory::ReadOnlyInputClobbered, Location::reg(Reg::edx)));
  const auto u = std::find_if(r.issues.begin(), r.issues.end(),
                              [](const Issue& i) { return i.category == IssueCategory::Unicity; });
  REQUIRE(u != r.issues.end());
  CHECK(u->location == Location::reg(Reg::ebx));
  REQUIRE(u->related);
  CHECK(*u->related == Location::token(0));

  // ebx and esi come back to their entry values: no frame-write finding on them.
  for (const Issue& i : r.issues) {
    if (i.category == IssueCategory::Unicity) continue;
    CHECK(i.location != Location::reg(Reg::ebx));
    CHECK(i.location != Location::reg(Reg::esi));
    CHECK(i.location != Location::reg(Reg::edi));
  }
  const auto serious = std::count_if(r.issues.begin(), r.issues.end(),
                                     [](const Issue& i) { return i.category != IssueCategory::FlagClobbered; });
  CHECK(serious == 2);
}

TEST_CASE("declaring ebx as clobbered removes the unicity finding") {
  ChunkAst c = testing::motivating_chunk();
  c.clobbers.push_back("ebx");
  const CheckResult r = check_chunk(c);
  CHECK(categories(r).count("Unicity") == 0);
  const AbstractDomain d = abstract_domain(*r.interface);
  CHECK(d.at(0).count({AbstractLocation::Kind::Indirect, Reg::ebx}) == 0);
}

TEST_CASE("frame-write") {
  SUBCASE("restored exchange pair") {
    const CheckResult r = check_chunk(chunk_of("\"xchgl %%ebx,%%edi\\n\\txchgl %%ebx,%%edi\" : : \"D\" (p)"));
    CHECK(r.verdict == Verdict::Compliant);
  }
  SUBCASE("undeclared register and flags") {
    const CheckResult r = check_chunk(chunk_of("\"incl %%ecx\""));
    CHECK(categories(r) == std::multiset<std::string>{"FlagClobbered", "UnboundRegisterClobbered"});
    CHECK(has(r, IssueCategory::UnboundRegisterClobbered, Location::reg(Reg::ecx)));
  }
  SUBCASE("memory store without memory clobber") {
    const CheckResult r = check_chunk(chunk_of("\"movl %0, (%1)\" : : \"r\" (v), \"r\" (p)"));
    CHECK(categories(r) == std::multiset<std::string>{"UnboundMemoryWrite"});
  }
  SUBCASE("push without pop") {
    const CheckResult r = check_chunk(chunk_of("\"pushl %%ecx\""));
    CHECK(has(r, IssueCategory::UnboundRegisterClobbered, Location::reg(Reg::esp)));
  }
}

TEST_CASE("frame-read") {
  SUBCASE("undeclared register read") {
    const CheckResult r = check_chunk(chunk_of("\"movl %%edx, %0\" : \"=r\" (x)"));
    CHECK(categories(r) == std::multiset<std::string>{"UnboundRegisterRead"});
    CHECK(has(r, IssueCategory::UnboundRegisterRead, Location::reg(Reg::edx)));
  }
  SUBCASE("setz into a one-byte output is compliant and high eax bits are dead") {
    const ChunkAst c = from_file("ablation_subreg.json", 0);
    const CheckResult r = check_chunk(c);
    CHECK(r.verdict == Verdict::Compliant);
    const Resolution res(*r.program);
    const Liveness lv = compute_liveness(*r.program, *r.interface, res, true);
    const auto it = lv.live_in.find(Location::reg(Reg::eax));
    const uint64_t mask = it == lv.live_in.end() ? 0 : it->second;
    CHECK((mask & 0xffffff00ull) == 0);
  }
  SUBCASE("output never written") {
    const CheckResult r = check_chunk(chunk_of("\"\" : \"=r\" (x)"));
    CHECK(categories(r) == std::multiset<std::string>{"NonWrittenWriteOnlyOutput"});
  }
  SUBCASE("load through a pointer without memory clobber") {
    const CheckResult r = check_chunk(chunk_of("\"movl (%1), %0\" : \"=r\" (y) : \"r\" (p)"));
    CHECK(categories(r) == std::multiset<std::string>{"UnboundMemoryRead"});
  }
}

TEST_CASE("unicity") {
  SUBCASE("all operands pinned") {
    const CheckResult r = check_chunk(chunk_of("\"movl %1, %0\\n\\tmovl %2, %%ecx\" : \"=a\" (x) : \"d\" (y), \"S\" (z) : \"ecx\""));
    CHECK(categories(r).count("Unicity") == 0);
  }
  SUBCASE("output written before the last input is read") {
    const CheckResult r = check_chunk(chunk_of("\"movl %2, %0\\n\\tmovl %3, %1\" : \"=r\" (a), \"=r\" (b) : \"r\" (c), \"r\" (d)"));
    CHECK(categories(r).count("Unicity") == 1);
  }
  SUBCASE("early clobber fixes it") {
    const CheckResult r = check_chunk(chunk_of("\"movl %2, %0\\n\\tmovl %3, %1\" : \"=&r\" (a), \"=r\" (b) : \"r\" (c), \"r\" (d)"));
    CHECK(r.verdict == Verdict::Compliant);
  }
}

TEST_CASE("verdicts") {
  CHECK(check_chunk(chunk_of("\"nop\"")).verdict == Verdict::Compliant);
  const CheckResult fld = check_chunk(chunk_of("\"fld %0\" : : \"m\" (x)"));
  CHECK(fld.verdict == Verdict::OutOfScope);
  CHECK(fld.issues.empty());
  const CheckResult bad = check_chunk(chunk_of("\"movl %4, %0\" : \"=r\" (x)"));
  CHECK(bad.verdict == Verdict::Error);
  CHECK_FALSE(bad.reason.empty());
}

TEST_CASE("compliant iff no findings, across the corpus") {
  for (const ChunkAst& c : testing::corpus()) {
    const CheckResult r = check_chunk(c);
    if (r.verdict == Verdict::Compliant) CHECK(r.issues.empty());
    if (r.verdict == Verdict::Issues) CHECK_FALSE(r.issues.empty());
  }
}

TEST_CASE("the optimisations only remove alarms") {
  for (const ChunkAst& c : testing::corpus()) {
    const CheckResult full = check_chunk(c);
    if (full.verdict != Verdict::Compliant && full.verdict != Verdict::Issues) continue;
    CAPTURE(c.asm_template);
    const std::set<std::string> with = keys(full);
    for (CheckOptions o : {CheckOptions{false, true}, CheckOptions{true, false}, CheckOptions{false, false}}) {
      const std::set<std::string> without = keys(check_chunk(c, o));
      CHECK(std::includes(without.begin(), without.end(), with.begin(), with.end()));
    }
  }
}

TEST_CASE("ablation suites") {
  const CheckOptions no_propagation{false, true}, coarse{true, false};
  for (const ChunkAst& c : load_chunk_file(testing::data_path("ablation_restore.json"))) {
    CAPTURE(c.asm_template);
    CHECK(check_chunk(c).verdict == Verdict::Compliant);
    const CheckResult r = check_chunk(c, no_propagation);
    CHECK(r.verdict == Verdict::Issues);
    for (const Issue& i : r.issues) CHECK(analysis_of(i.category) == Analysis::FrameWrite);
  }
  for (const ChunkAst& c : load_chunk_file(testing::data_path("ablation_subreg.json"))) {
    CAPTURE(c.asm_template);
    CHECK(check_chunk(c).verdict == Verdict::Compliant);
    const CheckResult r = check_chunk(c, coarse);
    CHECK(r.verdict == Verdict::Issues);
    for (const Issue& i : r.issues) CHECK(analysis_of(i.category) == Analysis::FrameRead);
  }
}

TEST_CASE("bit-level liveness refines coarse liveness") {
  auto subset = [](const std::set<Location>& a, const std::set<Location>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  int strictly_finer = 0;
  for (const ChunkAst& c : testing::corpus()) {
    const CheckResult r = check_chunk(c);
    if (!r.program || !r.interface) continue;
    CAPTURE(c.asm_template);
    const Resolution res(*r.program);
    const Liveness bits = compute_liveness(*r.program, *r.interface, res, true);
    const Liveness coarse = compute_liveness(*r.program, *r.interface, res, false);
    CHECK(subset(live_set(bits.live_in), live_set(coarse.live_in)));
    REQUIRE(bits.live_after.size() == coarse.live_after.size());
    for (std::size_t pc = 0; pc < bits.live_after.size(); ++pc) {
      CHECK(subset(live_set(bits.live_after[pc]), live_set(coarse.live_after[pc])));
      strictly_finer += live_set(bits.live_after[pc]) != live_set(coarse.live_after[pc]);
    }
  }
  CHECK(strictly_finer > 0);
}

TEST_CASE("with a single assignment, unicity adds nothing beyond the frame analyses") {
  int seen = 0;
  for (const ChunkAst& c : testing::corpus()) {
    const CheckResult r = check_chunk(c);
    if (!r.interface || r.verdict == Verdict::Error) continue;
    AssignmentSet s;
    try {
      s = enumerate_assignments(*r.interface, 2);
    } catch (const Error&) {
      continue;
    }
    if (s.assignments.size() != 1) continue;
    ++seen;
    CAPTURE(c.asm_template);
    CHECK(categories(r).count("Unicity") == 0);
  }
  CHECK(seen > 0);
}

TEST_CASE("issue descriptions name the location") {
  const CheckResult r = check_chunk(chunk_of("\"incl %%ecx\""));
  for (const Issue& i : r.issues) CHECK(describe(i, &*r.interface).find(i.location.to_string()) != std::string::npos);
}
