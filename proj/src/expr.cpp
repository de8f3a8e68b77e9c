#include <sstream>

#include "ric/error.hpp"
#include "ric/ir.hpp"

namespace ric {

uint64_t mask_of(unsigned width) { return width >= 64 ? ~0ull : (1ull << width) - 1; }

uint64_t sign_extend(uint64_t v, unsigned from) {
  if (from >= 64) return v;
  v &= mask_of(from);
  if ((v >> (from - 1)) & 1) v |= ~mask_of(from);
  return v;
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Const: return "const";
    case Op::Var: return "var";
    case Op::Load: return "load";
    case Op::Symbol: return "sym";
    case Op::Opaque: return "opaque";
    case Op::Not: return "~";
    case Op::Neg: return "-";
    case Op::Zext: return "zext";
    case Op::Sext: return "sext";
    case Op::Extract: return "extract";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Udiv: return "/u";
    case Op::Urem: return "%u";
    case Op::Sdiv: return "/s";
    case Op::Srem: return "%s";
    case Op::And: return "&";
    case Op::Or: return "|";
    case Op::Xor: return "^";
    case Op::Shl: return "<<";
    case Op::Shr: return ">>u";
    case Op::Sar: return ">>s";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::Ugt: return ">u";
    case Op::Ult: return "<u";
    case Op::Sgt: return ">s";
    case Op::Slt: return "<s";
    case Op::Concat: return "::";
    case Op::Ite: return "ite";
  }
  return "?";
}

std::string Location::to_string() const {
  switch (kind) {
    case Kind::Reg: return reg_name(as_reg());
    case Kind::Flag: return flag_name(as_flag());
    case Kind::Token: return "%" + std::to_string(id);
    case Kind::TokenAddr: return "&%" + std::to_string(id);
    case Kind::Memory: return "memory";
    case Kind::Stack: return "stack[esp0-" + std::to_string(id) + "]";
    case Kind::Temp: return "t" + std::to_string(id);
    case Kind::VecReg: return vector_reg_name(id);
  }
  return "?";
}

namespace {

std::size_t mix(std::size_t h, std::size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)); }

ExprPtr finish(Expr e) {
  if (e.width == 0 || e.width > 64) throw Error(ErrorKind::MalformedInterface, "expression width out of range");
  std::size_t h = mix(static_cast<std::size_t>(e.op), e.width);
  h = mix(h, e.value);
  h = mix(h, static_cast<std::size_t>(e.loc.kind) * 1315423911u + static_cast<std::size_t>(e.loc.id));
  h = mix(h, std::hash<std::string>{}(e.name));
  for (const auto& a : e.args) h = mix(h, a->hash);
  e.hash = h;
  return std::make_shared<const Expr>(std::move(e));
}

bool is_comparison(Op op) {
  return op == Op::Eq || op == Op::Ne || op == Op::Ugt || op == Op::Ult || op == Op::Sgt || op == Op::Slt;
}

}  // namespace

bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->hash != b->hash || a->op != b->op || a->width != b->width || a->value != b->value || a->loc != b->loc ||
      a->name != b->name || a->args.size() != b->args.size())
    return false;
  for (std::size_t i = 0; i < a->args.size(); ++i)
    if (!equal(a->args[i], b->args[i])) return false;
  return true;
}

std::string to_string(const ExprPtr& e) {
  std::ostringstream os;
  switch (e->op) {
    case Op::Const:
      os << "0x" << std::hex << e->value << std::dec << ":" << e->width;
      break;
    case Op::Var: os << e->loc.to_string(); break;
    case Op::Load: os << "@[" << to_string(e->args[0]) << "]_" << e->width / 8; break;
    case Op::Symbol: os << e->name; break;
    case Op::Opaque: os << "?" << e->value; break;
    case Op::Not:
    case Op::Neg: os << op_name(e->op) << "(" << to_string(e->args[0]) << ")"; break;
    case Op::Zext:
    case Op::Sext: os << op_name(e->op) << e->width << "(" << to_string(e->args[0]) << ")"; break;
    case Op::Extract:
      os << to_string(e->args[0]) << "[" << e->value + e->width - 1 << ".." << e->value << "]";
      break;
    case Op::Ite:
      os << "ite(" << to_string(e->args[0]) << ", " << to_string(e->args[1]) << ", " << to_string(e->args[2]) << ")";
      break;
    default:
      os << "(" << to_string(e->args[0]) << " " << op_name(e->op) << " " << to_string(e->args[1]) << ")";
      break;
  }
  return os.str();
}

ExprPtr mk_const(unsigned width, uint64_t value) {
  Expr e;
  e.op = Op::Const;
  e.width = width;
  e.value = value & mask_of(width);
  return finish(std::move(e));
}

ExprPtr mk_var(Location loc, unsigned width) {
  Expr e;
  e.op = Op::Var;
  e.width = width;
  e.loc = loc;
  return finish(std::move(e));
}

ExprPtr mk_load(ExprPtr addr, unsigned bytes) {
  Expr e;
  e.op = Op::Load;
  e.width = bytes * 8;
  e.args = {mk_resize(std::move(addr), 32)};
  return finish(std::move(e));
}

ExprPtr mk_symbol(const std::string& name, unsigned width) {
  Expr e;
  e.op = Op::Symbol;
  e.width = width;
  e.name = name;
  return finish(std::move(e));
}

ExprPtr mk_opaque(uint64_t id, unsigned width) {
  Expr e;
  e.op = Op::Opaque;
  e.width = width;
  e.value = id;
  return finish(std::move(e));
}

ExprPtr mk_unary(Op op, ExprPtr a) {
  if (op != Op::Not && op != Op::Neg) throw Error(ErrorKind::MalformedInterface, "not a unary operator");
  Expr e;
  e.op = op;
  e.width = a->width;
  e.args = {std::move(a)};
  return finish(std::move(e));
}

ExprPtr mk_binary(Op op, ExprPtr a, ExprPtr b) {
  if (op == Op::Concat) return mk_concat(std::move(a), std::move(b));
  const bool shift = op == Op::Shl || op == Op::Shr || op == Op::Sar;
  if (shift) {
    b = mk_resize(std::move(b), a->width);
  } else if (a->width != b->width) {
    throw Error(ErrorKind::MalformedInterface,
                std::string("width mismatch in ") + op_name(op) + ": " + to_string(a) + " vs " + to_string(b));
  }
  Expr e;
  e.op = op;
  e.width = is_comparison(op) ? 1 : a->width;
  e.args = {std::move(a), std::move(b)};
  return finish(std::move(e));
}

ExprPtr mk_extract(ExprPtr a, unsigned lo, unsigned width) {
  if (lo + width > a->width) throw Error(ErrorKind::MalformedInterface, "extract out of range");
  if (lo == 0 && width == a->width) return a;
  Expr e;
  e.op = Op::Extract;
  e.width = width;
  e.value = lo;
  e.args = {std::move(a)};
  return finish(std::move(e));
}

ExprPtr mk_zext(ExprPtr a, unsigned width) {
  if (width < a->width) throw Error(ErrorKind::MalformedInterface, "zext narrows");
  if (width == a->width) return a;
  Expr e;
  e.op = Op::Zext;
  e.width = width;
  e.args = {std::move(a)};
  return finish(std::move(e));
}

ExprPtr mk_sext(ExprPtr a, unsigned width) {
  if (width < a->width) throw Error(ErrorKind::MalformedInterface, "sext narrows");
  if (width == a->width) return a;
  Expr e;
  e.op = Op::Sext;
  e.width = width;
  e.args = {std::move(a)};
  return finish(std::move(e));
}

ExprPtr mk_concat(ExprPtr hi, ExprPtr lo) {
  Expr e;
  e.op = Op::Concat;
  e.width = hi->width + lo->width;
  e.args = {std::move(hi), std::move(lo)};
  return finish(std::move(e));
}

ExprPtr mk_ite(ExprPtr c, ExprPtr t, ExprPtr f) {
  if (c->width != 1) c = mk_binary(Op::Ne, c, mk_const(c->width, 0));
  if (t->width != f->width) throw Error(ErrorKind::MalformedInterface, "ite branches differ in width");
  Expr e;
  e.op = Op::Ite;
  e.width = t->width;
  e.args = {std::move(c), std::move(t), std::move(f)};
  return finish(std::move(e));
}

ExprPtr mk_resize(ExprPtr a, unsigned width) {
  if (a->width == width) return a;
  if (a->width > width) return mk_extract(std::move(a), 0, width);
  return mk_zext(std::move(a), width);
}

uint64_t fold(Op op, unsigned width, uint64_t value, unsigned arg_width, unsigned arg1_width, const uint64_t* a) {
  const uint64_t m = mask_of(width);
  switch (op) {
    case Op::Const: return value;
    case Op::Not: return ~a[0] & m;
    case Op::Neg: return (0 - a[0]) & m;
    case Op::Zext: return a[0];
    case Op::Sext: return sign_extend(a[0], arg_width) & m;
    case Op::Extract: return (a[0] >> value) & m;
    case Op::Concat: {
      const uint64_t hi = arg1_width >= 64 ? 0 : a[0] << arg1_width;
      return (hi | a[1]) & m;
    }
    case Op::Ite: return (a[0] & 1) ? a[1] : a[2];
    default: break;
  }
  const unsigned w = arg_width;
  const uint64_t x = a[0], y = a[1];
  switch (op) {
    case Op::Add: return (x + y) & m;
    case Op::Sub: return (x - y) & m;
    case Op::Mul: return (x * y) & m;
    case Op::Udiv: return y ? (x / y) & m : 0;
    case Op::Urem: return y ? (x % y) & m : 0;
    case Op::And: return x & y;
    case Op::Or: return x | y;
    case Op::Xor: return x ^ y;
    case Op::Shl: return y >= w ? 0 : (x << y) & m;
    case Op::Shr: return y >= w ? 0 : x >> y;
    case Op::Eq: return x == y;
    case Op::Ne: return x != y;
    case Op::Ugt: return x > y;
    case Op::Ult: return x < y;
    default: break;
  }
  const int64_t sx = static_cast<int64_t>(sign_extend(x, w)), sy = static_cast<int64_t>(sign_extend(y, w));
  switch (op) {
    case Op::Sdiv: return sy && !(sy == -1 && sx == INT64_MIN) ? static_cast<uint64_t>(sx / sy) & m : 0;
    case Op::Srem: return sy && !(sy == -1 && sx == INT64_MIN) ? static_cast<uint64_t>(sx % sy) & m : 0;
    case Op::Sar: return static_cast<uint64_t>(sx >> (y >= w ? w - 1 : y)) & m;
    case Op::Sgt: return sx > sy;
    case Op::Slt: return sx < sy;
    default: break;
  }
  throw Error(ErrorKind::MalformedInterface, std::string("cannot evaluate ") + op_name(op));
}

uint64_t evaluate(const ExprPtr& e, const EvalEnv& env) {
  const uint64_t m = mask_of(e->width);
  switch (e->op) {
    case Op::Var: return env.var(e->loc, e->width) & m;
    case Op::Load: return env.load(evaluate(e->args[0], env), e->width / 8) & m;
    case Op::Symbol:
      if (!env.symbol) throw Error(ErrorKind::OutOfSandbox, "unbound symbol " + e->name);
      return env.symbol(e->name) & m;
    case Op::Opaque:
      if (!env.opaque) throw Error(ErrorKind::OutOfSandbox, "opaque value in concrete evaluation");
      return env.opaque(e->value, e->width) & m;
    case Op::Ite:
      return (evaluate(e->args[0], env) & 1) ? evaluate(e->args[1], env) : evaluate(e->args[2], env);
    default: break;
  }
  uint64_t a[2] = {0, 0};
  for (std::size_t k = 0; k < e->args.size() && k < 2; ++k) a[k] = evaluate(e->args[k], env);
  const unsigned w0 = e->args.empty() ? 0 : e->args[0]->width;
  const unsigned w1 = e->args.size() > 1 ? e->args[1]->width : 0;
  return fold(e->op, e->width, e->value, w0, w1, a);
}

ExprPtr rewrite(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& leaf) {
  switch (e->op) {
    case Op::Var:
    case Op::Symbol: {
      auto r = leaf(e);
      return r ? r : e;
    }
    case Op::Const:
    case Op::Opaque: return e;
    default: break;
  }
  std::vector<ExprPtr> args;
  bool changed = false;
  for (const auto& a : e->args) {
    args.push_back(rewrite(a, leaf));
    changed = changed || args.back() != a;
  }
  ExprPtr node = e;
  if (changed) {
    Expr copy = *e;
    copy.args = std::move(args);
    node = finish(std::move(copy));
  }
  if (node->op == Op::Load) {
    auto r = leaf(node);
    if (r) return r;
  }
  return node;
}

void collect_vars(const ExprPtr& e, std::set<Location>& out) {
  if (e->op == Op::Var) out.insert(e->loc);
  for (const auto& a : e->args) collect_vars(a, out);
}

bool contains_load(const ExprPtr& e) {
  if (e->op == Op::Load) return true;
  for (const auto& a : e->args)
    if (contains_load(a)) return true;
  return false;
}

}  // namespace ric
