#include <doctest.h>

#include <bit>
#include <random>

#include "helpers.hpp"
#include "ric/asm_ir.hpp"
#include "ric/error.hpp"
#include "ric/oracle.hpp"

using namespace ric;
using testing::chunk_of;

namespace {

MachineState blank_state() {
  MachineState m;
  m.memory.assign(0x10000, 0);
  return m;
}

// Lifts `body`, binds the tokens to `t` and runs it from `m`.
MachineState run(const std::string& body, const TokenAssignment& t, MachineState m) {
  const ChunkAst c = chunk_of(body);
  const FormalInterface fi = derive_interface(c);
  return exec(substitute(lift_chunk(c, fi), fi, t), m);
}

struct Flags {
  int z, c, s, o, p, a;
};

Flags flags_of(const MachineState& m) {
  auto f = [&](Flag x) { return static_cast<int>(m.flags[static_cast<int>(x)]); };
  return {f(Flag::z), f(Flag::c), f(Flag::s), f(Flag::o), f(Flag::p), f(Flag::a)};
}

// Reference flag values written from the architecture manual's definitions.
Flags reference_add(uint32_t a, uint32_t b) {
  const uint32_t r = a + b;
  return {r == 0, r < a, static_cast<int>(r >> 31), static_cast<int>(((~(a ^ b) & (a ^ r)) >> 31) & 1),
          std::popcount(r & 0xffu) % 2 == 0, static_cast<int>(((a ^ b ^ r) >> 4) & 1)};
}

Flags reference_sub(uint32_t a, uint32_t b) {
  const uint32_t r = a - b;
  return {r == 0, a < b, static_cast<int>(r >> 31), static_cast<int>((((a ^ b) & (a ^ r)) >> 31) & 1),
          std::popcount(r & 0xffu) % 2 == 0, static_cast<int>(((a ^ b ^ r) >> 4) & 1)};
}

Flags reference_logic(uint32_t r) {
  return {r == 0, 0, static_cast<int>(r >> 31), 0, std::popcount(r & 0xffu) % 2 == 0, -1};
}

void check_flags(const Flags& got, const Flags& want) {
  CHECK(got.z == want.z);
  CHECK(got.c == want.c);
  CHECK(got.s == want.s);
  CHECK(got.o == want.o);
  CHECK(got.p == want.p);
  if (want.a >= 0) CHECK(got.a == want.a);
}

const TokenAssignment kEcxEdx = {{0, AsmOperand::of_reg(Reg::ecx)}, {1, AsmOperand::of_reg(Reg::edx)}};

}  // namespace

TEST_CASE("template parsing") {
  SUBCASE("lock prefix and token operand") {
    const ChunkAst c = chunk_of("\"lock; cmpxchg8b %0\" : \"+m\" (*p) : : \"memory\"");
    const auto t = parse_template(c.asm_template, c, derive_interface(c));
    REQUIRE(t.instrs.size() == 1);
    CHECK(t.instrs[0].lock);
    CHECK(t.instrs[0].mnemonic == "cmpxchg8b");
    REQUIRE(t.instrs[0].args.size() == 1);
    CHECK(t.instrs[0].args[0].kind == AsmArg::Kind::Token);
    CHECK(t.instrs[0].args[0].token.token == 0);
  }
  SUBCASE("register exchange") {
    const ChunkAst c = chunk_of("\"xchgl %%ebx, %%edi\"");
    const auto t = parse_template(c.asm_template, c, derive_interface(c));
    REQUIRE(t.instrs.size() == 1);
    REQUIRE(t.instrs[0].args.size() == 2);
    CHECK(t.instrs[0].args[0].kind == AsmArg::Kind::Register);
    CHECK(t.instrs[0].args[0].reg.parent == Reg::ebx);
    CHECK(t.instrs[0].args[1].reg.parent == Reg::edi);
  }
  SUBCASE("empty template") {
    const ChunkAst c = chunk_of("\"\"");
    CHECK(parse_template(c.asm_template, c, derive_interface(c)).instrs.empty());
  }
  SUBCASE("addressing modes and labels") {
    const ChunkAst c = chunk_of("\"1: movl 8(%1,%%ecx,4), %0\\n\\tjnz 1b\" : \"=r\" (y) : \"r\" (p) : \"ecx\"");
    const auto t = parse_template(c.asm_template, c, derive_interface(c));
    REQUIRE(t.instrs.size() == 2);
    CHECK(t.instrs[0].labels == std::vector<std::string>{"1"});
    const AsmArg& m = t.instrs[0].args.at(0);
    CHECK(m.kind == AsmArg::Kind::Memory);
    CHECK(m.imm == 8);
    CHECK(m.scale == 4);
    REQUIRE(m.base);
    CHECK(m.base->token);
    REQUIRE(m.index);
    CHECK(m.index->reg->parent == Reg::ecx);
  }
  SUBCASE("out-of-range token") {
    const ChunkAst c = chunk_of("\"movl %3, %0\" : \"=r\" (y)");
    CHECK_THROWS_AS(lift_chunk(c, derive_interface(c)), Error);
  }
}

TEST_CASE("setz keeps the upper bits of eax") {
  MachineState m = blank_state();
  m.set_reg(Reg::eax, 0x12345678);
  m.flags[static_cast<int>(Flag::z)] = 1;
  CHECK(run("\"setz %%al\"", {}, m).reg(Reg::eax) == 0x12345601u);
  m.flags[static_cast<int>(Flag::z)] = 0;
  CHECK(run("\"setz %%al\"", {}, m).reg(Reg::eax) == 0x12345600u);
}

TEST_CASE("cmpxchg8b compares edx:eax with memory") {
  const std::string body = "\"lock; cmpxchg8b %0\" : \"+m\" (*p)";
  const uint32_t addr = kSandboxBase + 0x100;
  MemAddr a;
  a.base = Reg::esi;
  const TokenAssignment t = {{0, AsmOperand::of_mem(a)}};
  MachineState m = blank_state();
  m.set_reg(Reg::esi, addr);
  m.store(addr, 0x1111111122222222ull, 8);
  m.set_reg(Reg::edx, 0x11111111);
  m.set_reg(Reg::eax, 0x22222222);
  m.set_reg(Reg::ecx, 0xcccccccc);
  m.set_reg(Reg::ebx, 0xbbbbbbbb);
  SUBCASE("equal: store ecx:ebx, z set") {
    const MachineState r = run(body, t, m);
    CHECK(r.load(addr, 8) == 0xccccccccbbbbbbbbull);
    CHECK(r.flags[static_cast<int>(Flag::z)] == 1);
  }
  SUBCASE("different: load into edx:eax, z clear") {
    m.set_reg(Reg::eax, 0);
    const MachineState r = run(body, t, m);
    CHECK(r.load(addr, 8) == 0x1111111122222222ull);
    CHECK(r.reg(Reg::eax) == 0x22222222u);
    CHECK(r.reg(Reg::edx) == 0x11111111u);
    CHECK(r.flags[static_cast<int>(Flag::z)] == 0);
  }
}

TEST_CASE("arithmetic flags follow the reference table") {
  std::mt19937 rng(3);
  std::vector<std::pair<uint32_t, uint32_t>> samples = {
      {0, 0}, {1, 0xffffffff}, {0x7fffffff, 1}, {0x80000000, 0x80000000}, {0x0f, 0x01}, {5, 7}};
  for (int k = 0; k < 200; ++k) samples.emplace_back(rng(), rng());
  for (const auto& [x, y] : samples) {
    CAPTURE(x);
    CAPTURE(y);
    MachineState m = blank_state();
    m.set_reg(Reg::ecx, x);
    m.set_reg(Reg::edx, y);
    const std::string io = " : \"+r\" (a) : \"r\" (b)";

    MachineState r = run("\"addl %1, %0\"" + io, kEcxEdx, m);
    CHECK(r.reg(Reg::ecx) == x + y);
    check_flags(flags_of(r), reference_add(x, y));

    r = run("\"subl %1, %0\"" + io, kEcxEdx, m);
    CHECK(r.reg(Reg::ecx) == x - y);
    check_flags(flags_of(r), reference_sub(x, y));

    r = run("\"cmpl %1, %0\"" + io, kEcxEdx, m);
    CHECK(r.reg(Reg::ecx) == x);
    check_flags(flags_of(r), reference_sub(x, y));

    r = run("\"andl %1, %0\"" + io, kEcxEdx, m);
    CHECK(r.reg(Reg::ecx) == (x & y));
    check_flags(flags_of(r), reference_logic(x & y));

    r = run("\"xorl %1, %0\"" + io, kEcxEdx, m);
    CHECK(r.reg(Reg::ecx) == (x ^ y));
    check_flags(flags_of(r), reference_logic(x ^ y));

    m.flags[static_cast<int>(Flag::c)] = 1;
    r = run("\"adcl %1, %0\"" + io, kEcxEdx, m);
    CHECK(r.reg(Reg::ecx) == x + y + 1);
    CHECK(r.flags[static_cast<int>(Flag::c)] == (static_cast<uint64_t>(x) + y + 1 > 0xffffffffull));
  }
}

TEST_CASE("inc and dec leave the carry flag alone") {
  MachineState m = blank_state();
  m.set_reg(Reg::ecx, 0xffffffff);
  m.flags[static_cast<int>(Flag::c)] = 1;
  const MachineState r = run("\"incl %0\" : \"+r\" (x)", {{0, AsmOperand::of_reg(Reg::ecx)}}, m);
  CHECK(r.reg(Reg::ecx) == 0);
  CHECK(r.flags[static_cast<int>(Flag::z)] == 1);
  CHECK(r.flags[static_cast<int>(Flag::c)] == 1);
}

TEST_CASE("push and pop move esp and memory") {
  MachineState m = blank_state();
  m.set_reg(Reg::esp, kSandboxBase + 0x8000);
  m.set_reg(Reg::ebx, 0xdeadbeef);
  const MachineState r = run("\"pushl %%ebx\\n\\tpopl %%ecx\"", {}, m);
  CHECK(r.reg(Reg::esp) == kSandboxBase + 0x8000);
  CHECK(r.reg(Reg::ecx) == 0xdeadbeefu);
  CHECK(r.load(kSandboxBase + 0x8000 - 4, 4) == 0xdeadbeefu);
}

TEST_CASE("an exchange pair is the identity") {
  std::mt19937 rng(9);
  for (int k = 0; k < 100; ++k) {
    MachineState m = blank_state();
    for (auto& r : m.regs) r = rng();
    for (auto& f : m.flags) f = rng() & 1;
    const MachineState r = run("\"xchgl %%ebx, %%edi\\n\\txchgl %%ebx, %%edi\"", {}, m);
    CHECK(r.regs == m.regs);
    CHECK(r.flags == m.flags);
    CHECK(r.memory == m.memory);
  }
}

TEST_CASE("substitution") {
  const ChunkAst c = chunk_of("\"incl %0\" : \"+r\" (x)");
  const FormalInterface fi = derive_interface(c);
  const IRProgram p = lift_chunk(c, fi);
  SUBCASE("token becomes its register") {
    const IRProgram s = substitute(p, fi, {{0, AsmOperand::of_reg(Reg::ecx)}});
    MachineState m = blank_state();
    m.set_reg(Reg::ecx, 41);
    CHECK(exec(s, m).reg(Reg::ecx) == 42u);
    const std::string text = s.to_string();
    CHECK(text.find("%0") == std::string::npos);
  }
  SUBCASE("memory token becomes its address") {
    const ChunkAst cm = chunk_of("\"incl %0\" : \"+m\" (x)");
    const FormalInterface fim = derive_interface(cm);
    MemAddr a;
    a.base = Reg::esi;
    const IRProgram s = substitute(lift_chunk(cm, fim), fim, {{0, AsmOperand::of_mem(a)}});
    MachineState m = blank_state();
    m.set_reg(Reg::esi, kSandboxBase + 0x40);
    m.store(kSandboxBase + 0x40, 7, 4);
    CHECK(exec(s, m).load(kSandboxBase + 0x40, 4) == 8u);
    CHECK(s.to_string().find("&0") == std::string::npos);
  }
  SUBCASE("missing token") {
    try {
      substitute(p, fi, {});
      FAIL("expected MissingToken");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingToken);
    }
  }
  SUBCASE("token-free programs are unchanged") {
    const ChunkAst n = chunk_of("\"movl %%eax, %%ebx\"");
    const FormalInterface fin = derive_interface(n);
    const IRProgram q = lift_chunk(n, fin);
    CHECK(substitute(q, fin, {}).to_string() == q.to_string());
  }
}

TEST_CASE("unsupported instructions") {
  const ChunkAst c = chunk_of("\"fld %0\" : : \"m\" (x)");
  try {
    lift_chunk(c, derive_interface(c));
    FAIL("expected UnknownMnemonic");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownMnemonic);
  }
}

TEST_CASE("every lifted corpus program is well formed") {
  int lifted = 0;
  for (const ChunkAst& c : testing::corpus()) {
    FormalInterface fi;
    IRProgram p;
    try {
      fi = derive_interface(c);
      p = lift_chunk(c, fi);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnknownMnemonic);
      continue;
    }
    CHECK_NOTHROW(validate(p));
    const auto set = enumerate_assignments(fi, 4);
    for (const auto& t : set.assignments) {
      const IRProgram s = substitute(p, fi, t);
      CHECK_NOTHROW(validate(s));
      for (const Instr& i : s.instrs) {
        CHECK(i.dst.kind != Location::Kind::Token);
        CHECK(i.dst.kind != Location::Kind::TokenAddr);
      }
    }
    ++lifted;
  }
  CHECK(lifted >= 70);
}
