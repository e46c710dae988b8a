#include "patchcm/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace patchcm {

namespace {

enum class Tok { end, number, ident, plus, minus, star, slash, caret, lparen, rparen };

struct Lexer {
  std::string_view src;
  std::size_t pos = 0;

  Tok kind = Tok::end;
  std::size_t tok_pos = 0;
  double number = 0;
  std::string ident;

  explicit Lexer(std::string_view s) : src(s) { advance(); }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(tok_pos, msg); }

  void advance() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    tok_pos = pos;
    if (pos >= src.size()) {
      kind = Tok::end;
      return;
    }
    char c = src[pos];
    switch (c) {
      case '+': kind = Tok::plus; ++pos; return;
      case '-': kind = Tok::minus; ++pos; return;
      case '*': kind = Tok::star; ++pos; return;
      case '/': kind = Tok::slash; ++pos; return;
      case '^': kind = Tok::caret; ++pos; return;
      case '(': kind = Tok::lparen; ++pos; return;
      case ')': kind = Tok::rparen; ++pos; return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src.data() + pos;
      char* end = nullptr;
      number = std::strtod(begin, &end);
      if (end == begin) throw ParseError(pos, "malformed number");
      pos += static_cast<std::size_t>(end - begin);
      kind = Tok::number;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
        ++pos;
      ident = std::string(src.substr(start, pos - start));
      kind = Tok::ident;
      return;
    }
    throw ParseError(pos, std::string("unexpected character '") + c + "'");
  }
};

Expr make(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

// binding powers: + - (10), * / (20), unary - (30), ^ (40, right-assoc)
constexpr int kAddBp = 10, kMulBp = 20, kNegBp = 30, kPowBp = 40;

struct Parser {
  Lexer lex;

  explicit Parser(std::string_view s) : lex(s) {}

  Expr parse() {
    Expr e = expression(0);
    if (lex.kind != Tok::end) lex.fail("expected end of input");
    return e;
  }

  int parse_exponent() {
    // nonnegative integer literal; a chained a^b^c exponent folds right
    if (lex.kind == Tok::minus) lex.fail("exponent must be a nonnegative integer");
    if (lex.kind != Tok::number) lex.fail("expected integer exponent");
    double v = lex.number;
    std::size_t at = lex.tok_pos;
    if (v != std::floor(v) || v < 0 || v > 1e6)
      throw ParseError(at, "exponent must be a nonnegative integer");
    lex.advance();
    long long e = static_cast<long long>(v);
    if (lex.kind == Tok::caret) {
      lex.advance();
      int inner = parse_exponent();
      double folded = std::pow(static_cast<double>(e), inner);
      if (folded > 1e6) throw ParseError(at, "exponent too large");
      e = static_cast<long long>(folded);
    }
    return static_cast<int>(e);
  }

  Expr primary() {
    switch (lex.kind) {
      case Tok::number: {
        double v = lex.number;
        lex.advance();
        return make({.kind = ExprKind::number, .number = v});
      }
      case Tok::ident: {
        std::string name = lex.ident;
        std::size_t at = lex.tok_pos;
        lex.advance();
        if (lex.kind == Tok::lparen) {
          FnName fn;
          if (name == "sin") fn = FnName::sin;
          else if (name == "cos") fn = FnName::cos;
          else if (name == "exp") fn = FnName::exp;
          else if (name == "sqrt") fn = FnName::sqrt;
          else throw ParseError(at, "unknown function name '" + name + "'");
          lex.advance();
          Expr arg = expression(0);
          if (lex.kind != Tok::rparen) lex.fail("expected ')'");
          lex.advance();
          return make({.kind = ExprKind::call, .fn = fn, .lhs = arg});
        }
        return make({.kind = ExprKind::ident, .name = name});
      }
      case Tok::lparen: {
        lex.advance();
        Expr e = expression(0);
        if (lex.kind != Tok::rparen) lex.fail("expected ')'");
        lex.advance();
        return e;
      }
      case Tok::minus: {
        lex.advance();
        Expr operand = expression(kNegBp);
        return make({.kind = ExprKind::unary_neg, .lhs = operand});
      }
      default:
        lex.fail("expected expression");
    }
  }

  Expr expression(int min_bp) {
    Expr lhs = primary();
    for (;;) {
      BinOp op;
      int bp;
      switch (lex.kind) {
        case Tok::plus: op = BinOp::add; bp = kAddBp; break;
        case Tok::minus: op = BinOp::sub; bp = kAddBp; break;
        case Tok::star: op = BinOp::mul; bp = kMulBp; break;
        case Tok::slash: op = BinOp::div; bp = kMulBp; break;
        case Tok::caret: {
          if (kPowBp < min_bp) return lhs;
          lex.advance();
          int e = parse_exponent();
          lhs = make({.kind = ExprKind::pow, .exponent = e, .lhs = lhs});
          continue;
        }
        default:
          return lhs;
      }
      if (bp < min_bp) return lhs;
      lex.advance();
      Expr rhs = expression(bp + 1);  // left-associative
      lhs = make({.kind = ExprKind::binary, .op = op, .lhs = lhs, .rhs = rhs});
    }
  }
};

int precedence_of(const Expr& e) {
  switch (e->kind) {
    case ExprKind::number: return e->number < 0 ? kNegBp : 100;
    case ExprKind::ident:
    case ExprKind::call: return 100;
    case ExprKind::pow: return kPowBp;
    case ExprKind::unary_neg: return kNegBp;
    case ExprKind::binary:
      return (e->op == BinOp::add || e->op == BinOp::sub) ? kAddBp : kMulBp;
  }
  return 100;
}

void print(const Expr& e, std::string& out) {
  auto child = [&](const Expr& c, int min_bp) {
    if (precedence_of(c) < min_bp) {
      out += '(';
      print(c, out);
      out += ')';
    } else {
      print(c, out);
    }
  };
  switch (e->kind) {
    case ExprKind::number: {
      char buf[32];
      auto res = std::to_chars(buf, buf + sizeof buf, e->number);
      out.append(buf, res.ptr);
      return;
    }
    case ExprKind::ident:
      out += e->name;
      return;
    case ExprKind::unary_neg:
      out += '-';
      child(e->lhs, kNegBp + 1);
      return;
    case ExprKind::pow:
      child(e->lhs, kPowBp + 1);
      out += '^';
      out += std::to_string(e->exponent);
      return;
    case ExprKind::call:
      switch (e->fn) {
        case FnName::sin: out += "sin("; break;
        case FnName::cos: out += "cos("; break;
        case FnName::exp: out += "exp("; break;
        case FnName::sqrt: out += "sqrt("; break;
      }
      print(e->lhs, out);
      out += ')';
      return;
    case ExprKind::binary: {
      const bool additive = e->op == BinOp::add || e->op == BinOp::sub;
      const int bp = additive ? kAddBp : kMulBp;
      child(e->lhs, bp);
      switch (e->op) {
        case BinOp::add: out += " + "; break;
        case BinOp::sub: out += " - "; break;
        case BinOp::mul: out += '*'; break;
        case BinOp::div: out += '/'; break;
      }
      child(e->rhs, bp + 1);
      return;
    }
  }
}

}  // namespace

Expr parse_expression(std::string_view source) { return Parser(source).parse(); }

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::number: return a->number == b->number;
    case ExprKind::ident: return a->name == b->name;
    case ExprKind::unary_neg: return structurally_equal(a->lhs, b->lhs);
    case ExprKind::pow:
      return a->exponent == b->exponent && structurally_equal(a->lhs, b->lhs);
    case ExprKind::call: return a->fn == b->fn && structurally_equal(a->lhs, b->lhs);
    case ExprKind::binary:
      return a->op == b->op && structurally_equal(a->lhs, b->lhs) &&
             structurally_equal(a->rhs, b->rhs);
  }
  return false;
}

namespace {
void collect_names(const Expr& e, std::set<std::string>& out) {
  if (!e) return;
  if (e->kind == ExprKind::ident) out.insert(e->name);
  collect_names(e->lhs, out);
  collect_names(e->rhs, out);
}
}  // namespace

std::set<std::string> free_names(const Expr& e) {
  std::set<std::string> out;
  collect_names(e, out);
  return out;
}

Jet eval_jet(const Expr& e, const EvalContext& ctx) {
  switch (e->kind) {
    case ExprKind::number:
      return Jet::constant(e->number, ctx.order, ctx.nvars);
    case ExprKind::ident: {
      auto it = ctx.vars.find(e->name);
      if (it != ctx.vars.end()) {
        if (it->second.order() != ctx.order || it->second.nvars() != ctx.nvars)
          throw ValidationError("binding for '" + e->name + "' has mismatched jet shape");
        return it->second;
      }
      if (ctx.params) {
        auto pit = ctx.params->find(e->name);
        if (pit != ctx.params->end())
          return Jet::constant(pit->second, ctx.order, ctx.nvars);
      }
      throw ValidationError("unbound name '" + e->name + "'");
    }
    case ExprKind::unary_neg:
      return -eval_jet(e->lhs, ctx);
    case ExprKind::pow:
      return pow_int(eval_jet(e->lhs, ctx), e->exponent);
    case ExprKind::call: {
      Jet a = eval_jet(e->lhs, ctx);
      switch (e->fn) {
        case FnName::sin: return sin(a);
        case FnName::cos: return cos(a);
        case FnName::exp: return exp(a);
        case FnName::sqrt: return sqrt(a);
      }
      break;
    }
    case ExprKind::binary: {
      Jet a = eval_jet(e->lhs, ctx);
      Jet b = eval_jet(e->rhs, ctx);
      switch (e->op) {
        case BinOp::add: return a + b;
        case BinOp::sub: return a - b;
        case BinOp::mul: return a * b;
        case BinOp::div: return a / b;
      }
      break;
    }
  }
  throw ValidationError("malformed expression tree");
}

double eval_scalar(const Expr& e, const std::map<std::string, double>& vars,
                   const std::map<std::string, double>* params) {
  EvalContext ctx = EvalContext::for_shape(0, 1, params);
  for (const auto& [k, v] : vars) ctx.bind(k, Jet::constant(v, 0, 1));
  return eval_jet(e, ctx).value();
}

}  // namespace patchcm
