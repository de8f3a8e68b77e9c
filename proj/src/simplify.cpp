#include "ric/ir.hpp"

namespace ric {

namespace {

bool all_const(const Expr& e) {
  if (e.args.empty()) return false;
  for (const auto& a : e.args)
    if (!a->is_const()) return false;
  return true;
}

ExprPtr fold(const ExprPtr& e) {
  EvalEnv env;
  return mk_const(e->width, evaluate(e, env));
}

ExprPtr simplify_node(const ExprPtr& e);

ExprPtr add(ExprPtr a, ExprPtr b) { return simplify_node(mk_binary(Op::Add, std::move(a), std::move(b))); }

ExprPtr simplify_node(const ExprPtr& e) {
  if (e->op == Op::Load || e->args.empty()) return e;
  if (all_const(*e)) return fold(e);

  const unsigned w = e->width;
  const ExprPtr& a = e->args[0];
  const ExprPtr b = e->args.size() > 1 ? e->args[1] : nullptr;

  switch (e->op) {
    case Op::Not:
    case Op::Neg:
      if (a->op == e->op) return a->args[0];
      break;
    case Op::Add: {
      if (a->is_const() && !b->is_const()) return add(b, a);
      if (b->is_const(0)) return a;
      if (b->is_const() && a->op == Op::Add && a->args[1]->is_const())
        return add(a->args[0], mk_const(w, a->args[1]->value + b->value));
      break;
    }
    case Op::Sub:
      if (equal(a, b)) return mk_const(w, 0);
      if (b->is_const()) return add(a, mk_const(w, 0 - b->value));
      break;
    case Op::Xor:
      if (equal(a, b)) return mk_const(w, 0);
      if (a->is_const(0)) return b;
      if (b->is_const(0)) return a;
      break;
    case Op::And:
      if (equal(a, b)) return a;
      if (a->is_const(mask_of(w))) return b;
      if (b->is_const(mask_of(w))) return a;
      if (a->is_const(0) || b->is_const(0)) return mk_const(w, 0);
      break;
    case Op::Or:
      if (equal(a, b)) return a;
      if (a->is_const(0)) return b;
      if (b->is_const(0)) return a;
      if (a->is_const(mask_of(w)) || b->is_const(mask_of(w))) return mk_const(w, mask_of(w));
      break;
    case Op::Mul:
      if (a->is_const(1)) return b;
      if (b->is_const(1)) return a;
      if (a->is_const(0) || b->is_const(0)) return mk_const(w, 0);
      break;
    case Op::Shl:
    case Op::Shr:
    case Op::Sar:
      if (b->is_const(0)) return a;
      break;
    case Op::Eq:
      if (equal(a, b)) return mk_const(1, 1);
      break;
    case Op::Ne:
      if (equal(a, b)) return mk_const(1, 0);
      break;
    case Op::Zext:
      if (a->op == Op::Zext) return simplify_node(mk_zext(a->args[0], w));
      break;
    case Op::Extract: {
      const unsigned lo = static_cast<unsigned>(e->value);
      if (a->op == Op::Extract)
        return simplify_node(mk_extract(a->args[0], lo + static_cast<unsigned>(a->value), w));
      if (a->op == Op::Concat) {
        const ExprPtr& hi_part = a->args[0];
        const ExprPtr& lo_part = a->args[1];
        if (lo + w <= lo_part->width) return simplify_node(mk_extract(lo_part, lo, w));
        if (lo >= lo_part->width) return simplify_node(mk_extract(hi_part, lo - lo_part->width, w));
      }
      if (a->op == Op::Zext) {
        const ExprPtr& inner = a->args[0];
        if (lo + w <= inner->width) return simplify_node(mk_extract(inner, lo, w));
        if (lo >= inner->width) return mk_const(w, 0);
      }
      break;
    }
    case Op::Concat: {
      if (a->is_const(0)) return simplify_node(mk_zext(b, w));
      if (a->op == Op::Extract && b->op == Op::Extract && equal(a->args[0], b->args[0]) &&
          a->value == b->value + b->width)
        return simplify_node(mk_extract(a->args[0], static_cast<unsigned>(b->value), w));
      break;
    }
    case Op::Ite: {
      if (a->is_const()) return a->value ? e->args[1] : e->args[2];
      if (equal(e->args[1], e->args[2])) return e->args[1];
      break;
    }
    default: break;
  }
  return e;
}

}  // namespace

ExprPtr simplify(const ExprPtr& e) {
  if (e->args.empty()) return e;
  std::vector<ExprPtr> args;
  bool changed = false;
  for (const auto& a : e->args) {
    args.push_back(simplify(a));
    changed = changed || args.back() != a;
  }
  ExprPtr node = e;
  if (changed) {
    switch (e->op) {
      case Op::Load: node = mk_load(args[0], e->width / 8); break;
      case Op::Not:
      case Op::Neg: node = mk_unary(e->op, args[0]); break;
      case Op::Zext: node = mk_zext(args[0], e->width); break;
      case Op::Sext: node = mk_sext(args[0], e->width); break;
      case Op::Extract: node = mk_extract(args[0], static_cast<unsigned>(e->value), e->width); break;
      case Op::Concat: node = mk_concat(args[0], args[1]); break;
      case Op::Ite: node = mk_ite(args[0], args[1], args[2]); break;
      default: node = mk_binary(e->op, args[0], args[1]); break;
    }
  }
  return simplify_node(node);
}

}  // namespace ric
