#include <doctest.h>

#include "helpers.hpp"
#include "ric/error.hpp"
#include "ric/interface.hpp"

using namespace ric;
using testing::chunk_of;

namespace {

RegSet regs(std::initializer_list<Reg> rs) {
  RegSet s;
  for (Reg r : rs) s.insert(r);
  return s;
}

// Register sets of the i386 constraint figure, written out by hand.
const RegSet kA = regs({Reg::eax}), kB = regs({Reg::ebx}), kC = regs({Reg::ecx}), kD = regs({Reg::edx}),
             kS = regs({Reg::esi}), kDI = regs({Reg::edi});
const RegSet kU = kA | kC | kD;
const RegSet kQ = kA | kB | kC | kD;
const RegSet kR = kQ | kS | kDI | regs({Reg::ebp});

OperandClass reg_class(RegSet s) {
  OperandClass c;
  c.registers = s;
  return c;
}

// Validity filters re-implemented from the constraint rules, independent of
// the enumerator: assignable outputs, distinct output locations, no
// clobbered register anywhere, early-clobber outputs disjoint from inputs.
std::string validate(const FormalInterface& fi, const TokenAssignment& t) {
  auto used = [](const AsmOperand& op) {
    RegSet s;
    if (op.kind == AsmOperand::Kind::Register) s.insert(op.reg);
    if (op.kind == AsmOperand::Kind::Memory || op.kind == AsmOperand::Kind::Address) {
      if (op.addr.base) s.insert(*op.addr.base);
      if (op.addr.index) s.insert(*op.addr.index);
    }
    return s;
  };
  std::vector<AsmOperand> outs;
  for (const auto& [id, info] : fi.tokens) {
    if (!t.count(id)) return "token %" + std::to_string(id) + " unassigned";
    const AsmOperand& op = t.at(id);
    if (!(used(op) & fi.clobbered).empty()) return "clobbered register used";
    bool fits = false;
    for (const OperandClass& c : info.alternatives) {
      if (op.kind == AsmOperand::Kind::Register && c.registers.contains(op.reg)) fits = true;
      if (op.kind == AsmOperand::Kind::Immediate && c.immediate) fits = true;
      if (op.kind == AsmOperand::Kind::Memory && c.memory) fits = true;
      if (op.kind == AsmOperand::Kind::Address && c.address) fits = true;
    }
    if (!fits) return "operand outside its class";
    if (info.is_output) {
      if (op.kind != AsmOperand::Kind::Register && op.kind != AsmOperand::Kind::Memory) return "output not assignable";
      for (const AsmOperand& o : outs)
        if (o == op || (o.kind == AsmOperand::Kind::Register && op.kind == AsmOperand::Kind::Register && o.reg == op.reg))
          return "outputs share a location";
      outs.push_back(op);
    }
  }
  for (int e : fi.early_clobber) {
    const RegSet mine = used(t.at(e));
    for (const auto& [id, info] : fi.tokens)
      if (id != e && info.is_input && !(used(t.at(id)) & mine).empty()) return "early clobber shared with an input";
  }
  return "";
}

}  // namespace

TEST_CASE("constraint strings") {
  SUBCASE("fixed output") {
    const ConstraintSpec s = parse_constraint("=a", true);
    CHECK(s.mode == ConstraintMode::OutputWriteOnly);
    CHECK_FALSE(s.early_clobber);
    REQUIRE(s.alternatives.size() == 1);
    REQUIRE(s.alternatives[0].size() == 1);
    CHECK(s.alternatives[0][0].letter == 'a');
  }
  SUBCASE("alternatives") {
    const ConstraintSpec s = parse_constraint("rm,r", false);
    CHECK(s.mode == ConstraintMode::Input);
    REQUIRE(s.alternatives.size() == 2);
    CHECK(s.alternatives[0].size() == 2);
    CHECK(s.alternatives[0][0].letter == 'r');
    CHECK(s.alternatives[0][1].letter == 'm');
    CHECK(s.alternatives[1].size() == 1);
  }
  SUBCASE("early clobber") {
    const ConstraintSpec s = parse_constraint("=&q", true);
    CHECK(s.mode == ConstraintMode::OutputWriteOnly);
    CHECK(s.early_clobber);
    CHECK(s.alternatives.at(0).at(0).letter == 'q');
  }
  SUBCASE("read-write, matching and commutative") {
    CHECK(parse_constraint("+r", true).mode == ConstraintMode::OutputReadWrite);
    const ConstraintSpec m = parse_constraint("0", false);
    CHECK(m.alternatives.at(0).at(0).kind == AtomicConstraint::Kind::Match);
    CHECK(m.alternatives.at(0).at(0).match == "0");
    CHECK(parse_constraint("%r", false).commutative);
  }
  SUBCASE("outputs need a mode") { CHECK_THROWS_AS(parse_constraint("r", true), Error); }
}

TEST_CASE("letter table") {
  const std::vector<std::pair<char, RegSet>> table = {
      {'a', kA}, {'b', kB}, {'c', kC}, {'d', kD}, {'S', kS}, {'D', kDI},
      {'U', kU}, {'q', kQ}, {'Q', kQ}, {'r', kR}, {'R', kR},
  };
  for (const auto& [letter, set] : table) {
    CAPTURE(letter);
    CHECK(eval_letter(letter) == reg_class(set));
  }
  CHECK(kR.size() == 7);
  CHECK_FALSE(kR.contains(Reg::esp));

  OperandClass imm;
  imm.immediate = true;
  CHECK(eval_letter('i') == imm);
  CHECK(eval_letter('n') == imm);

  OperandClass mem;
  mem.memory = true;
  CHECK(eval_letter('m') == mem);
  OperandClass addr;
  addr.address = true;
  CHECK(eval_letter('p') == addr);

  OperandClass g = reg_class(kR);
  g.immediate = true;
  g.memory = true;
  CHECK(eval_letter('g') == g);

  try {
    eval_letter('x');
    FAIL("expected UnknownLetter");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownLetter);
  }
}

TEST_CASE("formal interface of the compare-and-swap chunk") {
  const FormalInterface fi = derive_interface(testing::motivating_chunk());
  CHECK(fi.outputs == std::set<int>{0, 1});
  CHECK(fi.inputs == std::set<int>{2, 3, 5, 6});
  CHECK(fi.unified == std::map<int, int>{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 1}, {5, 5}, {6, 6}});
  CHECK(fi.canonical(4) == 1);
  CHECK(fi.clobbered.empty());
  CHECK_FALSE(fi.flags_clobbered);
  CHECK_FALSE(fi.memory_separated);
  CHECK(fi.token(1).fixed_register == Reg::eax);
  CHECK(fi.token(3).fixed_register == Reg::edx);
  CHECK(fi.token(5).fixed_register == Reg::ecx);
  CHECK(fi.token(6).fixed_register == Reg::edi);
  CHECK_FALSE(fi.token(0).fixed_register);
  CHECK(fi.token(0).memory_class);
  CHECK(fi.token(1).is_input);  // folded "a" input
}

TEST_CASE("read-write entry is both output and input") {
  const FormalInterface fi = derive_interface(chunk_of("\"incl %0\" : \"+r\" (x)"));
  CHECK(fi.outputs == std::set<int>{0});
  CHECK(fi.inputs == std::set<int>{0});
  CHECK(fi.memory_separated);
}

TEST_CASE("flags and memory clobbers without entries") {
  const FormalInterface fi = derive_interface(chunk_of("\"\" : : : \"cc\", \"memory\""));
  CHECK(fi.flags_clobbered);
  CHECK_FALSE(fi.memory_separated);
  CHECK(fi.outputs.empty());
  CHECK(fi.inputs.empty());
  CHECK(fi.clobbered.empty());
}

TEST_CASE("clobbering a register an entry pins is reported") {
  const ChunkAst c = chunk_of("\"nop\" : : \"b\" (x) : \"ebx\"");
  bool raised = !c.diagnostics.empty();
  try {
    derive_interface(c);
  } catch (const Error& e) {
    raised = raised || e.kind() == ErrorKind::ClobberOverlap;
  }
  CHECK(raised);
}

TEST_CASE("assignment enumeration") {
  SUBCASE("one register input") {
    const auto s = enumerate_assignments(derive_interface(chunk_of("\"nop\" : : \"r\" (x)")));
    CHECK(s.assignments.size() == 7);
    CHECK_FALSE(s.truncated);
  }
  SUBCASE("output with a matching input shares its register") {
    const FormalInterface fi = derive_interface(chunk_of("\"incl %0\" : \"=r\" (x) : \"0\" (y)"));
    const auto s = enumerate_assignments(fi);
    CHECK(s.assignments.size() == 7);
    CHECK(fi.canonical(1) == 0);
  }
  SUBCASE("clobbered registers are excluded") {
    const auto s = enumerate_assignments(derive_interface(chunk_of("\"nop\" : : \"q\" (x) : \"ebx\"")));
    std::set<Reg> got;
    for (const auto& t : s.assignments) got.insert(t.at(0).reg);
    CHECK(got == std::set<Reg>{Reg::eax, Reg::ecx, Reg::edx});
  }
  SUBCASE("cap truncates") {
    const auto s = enumerate_assignments(
        derive_interface(chunk_of("\"nop\" : \"=r\" (a), \"=r\" (b) : \"r\" (c), \"r\" (d)")), 10);
    CHECK(s.assignments.size() == 10);
    CHECK(s.truncated);
  }
  SUBCASE("no valid assignment") {
    try {
      enumerate_assignments(derive_interface(chunk_of("\"nop\" : \"=a\" (x), \"=a\" (y)")));
      FAIL("expected Unsatisfiable");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Unsatisfiable);
    }
  }
}

TEST_CASE("abstract domains") {
  using K = AbstractLocation::Kind;
  SUBCASE("fixed register") {
    const auto d = abstract_domain(derive_interface(chunk_of("\"nop\" : : \"d\" (x)")));
    CHECK(d.at(0) == AbstractSet{{K::Direct, Reg::edx}});
  }
  SUBCASE("memory operand reaches every address register") {
    const auto d = abstract_domain(derive_interface(chunk_of("\"nop\" : : \"m\" (x)")));
    AbstractSet expect;
    for (Reg r : {Reg::eax, Reg::ecx, Reg::edx, Reg::ebx, Reg::esp, Reg::ebp, Reg::esi, Reg::edi})
      expect.insert({K::Indirect, r});
    CHECK(d.at(0) == expect);
    CHECK(expect.size() == 8);
  }
  SUBCASE("immediate") {
    const auto d = abstract_domain(derive_interface(chunk_of("\"nop\" : : \"i\" (4)")));
    CHECK(d.at(0) == AbstractSet{{K::Immediate, Reg::eax}});
  }
}

TEST_CASE("enumerated assignments pass the independent validity filters") {
  int checked = 0;
  for (const ChunkAst& c : testing::corpus()) {
    FormalInterface fi;
    AssignmentSet s;
    try {
      fi = derive_interface(c);
      s = enumerate_assignments(fi);
    } catch (const Error&) {
      continue;
    }
    for (const auto& t : s.assignments) {
      CAPTURE(c.asm_template);
      CAPTURE(to_string(t));
      CHECK(validate(fi, t) == "");
      CHECK(assignment_violation(fi, t) == "");
      ++checked;
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("abstraction covers every enumerated operand") {
  for (const ChunkAst& c : testing::corpus()) {
    FormalInterface fi;
    AssignmentSet s;
    try {
      fi = derive_interface(c);
      s = enumerate_assignments(fi);
    } catch (const Error&) {
      continue;
    }
    const AbstractDomain d = abstract_domain(fi);
    for (const auto& t : s.assignments)
      for (const auto& [id, op] : t)
        for (const AbstractLocation& a : abstract_of(op)) CHECK(d.at(id).count(a) == 1);
  }
}

TEST_CASE("interface derivation is deterministic") {
  for (const ChunkAst& c : testing::corpus()) {
    try {
      const FormalInterface a = derive_interface(c), b = derive_interface(c);
      CHECK(a.outputs == b.outputs);
      CHECK(a.inputs == b.inputs);
      CHECK(a.unified == b.unified);
      CHECK(a.clobbered == b.clobbered);
      CHECK(a.memory_separated == b.memory_separated);
      CHECK(to_string(enumerate_assignments(a).assignments.front()) ==
            to_string(enumerate_assignments(b).assignments.front()));
    } catch (const Error&) {
    }
  }
}
