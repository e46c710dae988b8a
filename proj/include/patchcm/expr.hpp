#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "patchcm/jet.hpp"

namespace patchcm {

enum class ExprKind { number, ident, unary_neg, binary, call, pow };

enum class BinOp { add, sub, mul, div };
enum class FnName { sin, cos, exp, sqrt };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

/// Immutable expression tree. `^` is kept as a dedicated node because its
/// exponent is restricted to nonnegative integer literals, which keeps jet
/// evaluation exact.
struct ExprNode {
  ExprKind kind;
  double number = 0;       // number
  std::string name;        // ident
  BinOp op = BinOp::add;   // binary
  FnName fn = FnName::sin; // call
  int exponent = 0;        // pow
  Expr lhs, rhs;           // children (lhs only for unary/call/pow)
};

/// Parse with standard precedence (^ above unary minus above * / above + -),
/// left-associative * / + -, right-associative ^. Throws ParseError with the
/// byte offset of the first offending token.
Expr parse_expression(std::string_view source);

/// Minimal-parentheses rendering; parse(to_string(e)) is structurally equal
/// to e.
std::string to_string(const Expr& e);

bool structurally_equal(const Expr& a, const Expr& b);

/// Names of all identifiers appearing in the tree.
std::set<std::string> free_names(const Expr& e);

/// Evaluation bindings: dynamic variables carry jets, parameters are plain
/// reals (bound as constant jets of the context shape).
struct EvalContext {
  int order = 0;
  int nvars = 1;
  std::map<std::string, Jet> vars;
  const std::map<std::string, double>* params = nullptr;

  static EvalContext for_shape(int order, int nvars,
                               const std::map<std::string, double>* params = nullptr) {
    EvalContext c;
    c.order = order;
    c.nvars = nvars;
    c.params = params;
    return c;
  }
  void bind(const std::string& name, Jet j) { vars.insert_or_assign(name, std::move(j)); }
};

/// Jet evaluation of the tree; with order-0 jets this is plain evaluation.
Jet eval_jet(const Expr& e, const EvalContext& ctx);

double eval_scalar(const Expr& e, const std::map<std::string, double>& vars,
                   const std::map<std::string, double>* params = nullptr);

}  // namespace patchcm
