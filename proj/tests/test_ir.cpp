#include <doctest.h>

#include <functional>
#include <random>

#include "ric/ir.hpp"

using namespace ric;

namespace {

const ExprPtr X = mk_var(Location::reg(Reg::eax), 32);
const ExprPtr Y = mk_var(Location::reg(Reg::ebx), 32);

uint64_t eval_at(const ExprPtr& e, uint32_t x, uint32_t y) {
  EvalEnv env;
  env.var = [&](const Location& l, unsigned) -> uint64_t { return l.as_reg() == Reg::eax ? x : y; };
  env.load = [](uint64_t a, unsigned) -> uint64_t { return a * 2654435761u; };
  return evaluate(e, env);
}

// Random expression over X and Y, 32 bits wide.
ExprPtr random_expr(std::mt19937& rng, int depth) {
  if (depth == 0 || rng() % 4 == 0) {
    switch (rng() % 3) {
      case 0: return X;
      case 1: return Y;
      default: return mk_const(32, rng() % 3 == 0 ? rng() : rng() % 5);
    }
  }
  static const Op binops[] = {Op::Add, Op::Sub, Op::Mul, Op::And, Op::Or, Op::Xor, Op::Shl, Op::Shr, Op::Sar};
  switch (rng() % 6) {
    case 0: return mk_unary(Op::Not, random_expr(rng, depth - 1));
    case 1: return mk_unary(Op::Neg, random_expr(rng, depth - 1));
    case 2: {
      const ExprPtr a = random_expr(rng, depth - 1);
      return mk_concat(mk_extract(a, 8, 24), mk_extract(a, 0, 8));
    }
    case 3:
      return mk_ite(mk_binary(Op::Ult, random_expr(rng, depth - 1), random_expr(rng, depth - 1)),
                    random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    default:
      return mk_binary(binops[rng() % std::size(binops)], random_expr(rng, depth - 1), random_expr(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("simplification examples") {
  CHECK(equal(simplify(mk_binary(Op::Sub, mk_binary(Op::Add, X, mk_const(32, 1)), mk_const(32, 1))), X));
  CHECK(equal(simplify(mk_binary(Op::Add, mk_binary(Op::Add, mk_const(32, 1), X), mk_const(32, 0xffffffff))), X));
  CHECK(equal(simplify(mk_binary(Op::Xor, X, X)), mk_const(32, 0)));
  CHECK(equal(simplify(mk_concat(mk_extract(X, 8, 24), mk_extract(X, 0, 8))), X));
  CHECK(equal(simplify(mk_binary(Op::Sub, X, X)), mk_const(32, 0)));
  CHECK(equal(simplify(mk_unary(Op::Not, mk_unary(Op::Not, X))), X));
  CHECK(equal(simplify(mk_binary(Op::Or, X, mk_const(32, 0))), X));
  CHECK(equal(simplify(mk_binary(Op::And, X, mk_const(32, 0xffffffff))), X));
  CHECK(equal(simplify(mk_ite(mk_const(1, 1), X, Y)), X));
  CHECK(equal(simplify(mk_binary(Op::Add, mk_const(32, 2), mk_const(32, 3))), mk_const(32, 5)));
}

TEST_CASE("each rewrite rule preserves values") {
  const std::vector<ExprPtr> rules = {
      mk_binary(Op::Sub, mk_binary(Op::Add, X, mk_const(32, 7)), mk_const(32, 7)),
      mk_binary(Op::Xor, mk_binary(Op::Add, X, Y), mk_binary(Op::Add, X, Y)),
      mk_binary(Op::Sub, Y, Y),
      mk_binary(Op::Add, mk_binary(Op::Add, X, mk_const(32, 5)), mk_const(32, 0xfffffff0)),
      mk_concat(mk_extract(Y, 8, 24), mk_extract(Y, 0, 8)),
      mk_concat(mk_extract(X, 16, 16), mk_concat(mk_extract(X, 8, 8), mk_extract(X, 0, 8))),
      mk_unary(Op::Not, mk_unary(Op::Not, Y)),
      mk_unary(Op::Neg, mk_unary(Op::Neg, X)),
      mk_binary(Op::Xor, X, mk_const(32, 0)),
      mk_binary(Op::And, Y, mk_const(32, 0xffffffff)),
      mk_ite(mk_const(1, 0), X, Y),
      mk_extract(mk_zext(mk_extract(X, 0, 8), 32), 0, 8),
      mk_load(mk_binary(Op::Sub, mk_binary(Op::Add, Y, mk_const(32, 4)), mk_const(32, 4)), 4),
  };
  std::mt19937 rng(11);
  for (const ExprPtr& e : rules) {
    const ExprPtr s = simplify(e);
    CAPTURE(to_string(e));
    for (int k = 0; k < 10000; ++k) {
      const uint32_t x = rng(), y = rng();
      REQUIRE(eval_at(e, x, y) == eval_at(s, x, y));
    }
  }
}

TEST_CASE("simplification preserves values on random expressions") {
  std::mt19937 rng(5);
  for (int n = 0; n < 400; ++n) {
    const ExprPtr e = random_expr(rng, 4);
    const ExprPtr s = simplify(e);
    CAPTURE(to_string(e));
    for (int k = 0; k < 50; ++k) {
      const uint32_t x = rng(), y = rng();
      REQUIRE(eval_at(e, x, y) == eval_at(s, x, y));
    }
    CHECK(equal(simplify(s), s));  // fixpoint
  }
}

TEST_CASE("concrete operator semantics") {
  const ExprPtr b8 = mk_const(8, 0x80);
  CHECK(eval_at(mk_sext(b8, 32), 0, 0) == 0xffffff80u);
  CHECK(eval_at(mk_zext(b8, 32), 0, 0) == 0x80u);
  CHECK(eval_at(mk_binary(Op::Sar, mk_const(32, 0x80000000u), mk_const(32, 4)), 0, 0) == 0xf8000000u);
  CHECK(eval_at(mk_binary(Op::Slt, mk_const(32, 0xffffffffu), mk_const(32, 0)), 0, 0) == 1);
  CHECK(eval_at(mk_binary(Op::Ult, mk_const(32, 0xffffffffu), mk_const(32, 0)), 0, 0) == 0);
  CHECK(eval_at(mk_binary(Op::Udiv, X, mk_const(32, 0)), 9, 0) == 0);
  CHECK(eval_at(mk_concat(mk_const(8, 0xab), mk_const(8, 0xcd)), 0, 0) == 0xabcd);
  CHECK(eval_at(mk_extract(X, 8, 8), 0x1234, 0) == 0x12);
  CHECK(eval_at(mk_binary(Op::Shl, X, mk_const(32, 32)), 1, 0) == 0);
}

TEST_CASE("textual form is stable") {
  const ExprPtr e = mk_binary(Op::Add, X, mk_const(32, 1));
  CHECK(to_string(e) == to_string(mk_binary(Op::Add, X, mk_const(32, 1))));
  IRProgram p;
  p.instrs.push_back(Instr::assign(Location::reg(Reg::eax), e));
  p.instrs.push_back(Instr::halt());
  CHECK(p.to_string() == p.to_string());
  CHECK_NOTHROW(validate(p));
}
