#include "patchcm/jet.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace patchcm {

namespace {

void enumerate_exps(int nvars, int order, int var, std::array<int, kMaxJetVars>& cur,
                    int remaining, std::vector<std::array<int, kMaxJetVars>>& out) {
  if (var == nvars - 1) {
    cur[var] = remaining;
    out.push_back(cur);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[var] = e;
    enumerate_exps(nvars, order, var + 1, cur, remaining - e, out);
  }
}

}  // namespace

JetBasis::JetBasis(int order, int nvars) : order_(order), nvars_(nvars) {
  if (order < 0) throw ValidationError("jet order must be nonnegative");
  if (nvars < 1 || nvars > kMaxJetVars)
    throw ValidationError("jet nvars must be in [1, " + std::to_string(kMaxJetVars) + "]");

  std::array<int, kMaxJetVars> cur{};
  for (int d = 0; d <= order; ++d) enumerate_exps(nvars, order, 0, cur, d, exps_);
  degs_.resize(exps_.size());
  for (std::size_t i = 0; i < exps_.size(); ++i) {
    int d = 0;
    for (int v = 0; v < nvars; ++v) d += exps_[i][v];
    degs_[i] = d;
  }

  // dense exponent -> index lookup with strides (order+1)^nvars
  strides_.resize(nvars);
  int s = 1;
  for (int v = nvars - 1; v >= 0; --v) {
    strides_[v] = s;
    s *= order + 1;
  }
  lookup_.assign(s, -1);
  for (std::size_t i = 0; i < exps_.size(); ++i) {
    int key = 0;
    for (int v = 0; v < nvars; ++v) key += exps_[i][v] * strides_[v];
    lookup_[key] = static_cast<int>(i);
  }

  prod_onto_.resize(exps_.size());
  const int m = static_cast<int>(exps_.size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (degs_[i] + degs_[j] > order) continue;
      int key = 0;
      for (int v = 0; v < nvars; ++v) key += (exps_[i][v] + exps_[j][v]) * strides_[v];
      prod_onto_[lookup_[key]].emplace_back(i, j);
    }
  }
}

const JetBasis& JetBasis::get(int order, int nvars) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<JetBasis>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{order, nvars}];
  if (!slot) slot = std::unique_ptr<JetBasis>(new JetBasis(order, nvars));
  return *slot;
}

int JetBasis::index_of(std::span<const int> exponents) const {
  int key = 0, total = 0;
  for (int v = 0; v < nvars_; ++v) {
    int e = v < static_cast<int>(exponents.size()) ? exponents[v] : 0;
    if (e < 0) return -1;
    total += e;
    if (total > order_) return -1;
    key += e * strides_[v];
  }
  return lookup_[key];
}

void check_shapes(const Jet& a, const Jet& b) {
  if (!a.same_shape(b))
    throw ValidationError("jet shape mismatch: (" + std::to_string(a.order()) + "," +
                          std::to_string(a.nvars()) + ") vs (" + std::to_string(b.order()) +
                          "," + std::to_string(b.nvars()) + ")");
}

Jet Jet::constant(double value, int order, int nvars) {
  Jet j(order, nvars);
  j.c_[0] = value;
  return j;
}

Jet Jet::variable(int index, double value, int order, int nvars) {
  if (index < 0 || index >= nvars)
    throw ValidationError("jet variable index " + std::to_string(index) +
                          " out of range for nvars=" + std::to_string(nvars));
  Jet j(order, nvars);
  j.c_[0] = value;
  if (order >= 1) j.c_[1 + index] = 1.0;
  return j;
}

double Jet::coefficient(std::span<const int> multidegree) const {
  int idx = basis_->index_of(multidegree);
  if (idx < 0) throw ValidationError("multidegree exceeds jet order");
  return c_[idx];
}

Jet Jet::operator-() const {
  Jet r = *this;
  r.c_ = -r.c_;
  return r;
}

Jet& Jet::operator+=(const Jet& rhs) {
  check_shapes(*this, rhs);
  c_ += rhs.c_;
  return *this;
}

Jet& Jet::operator-=(const Jet& rhs) {
  check_shapes(*this, rhs);
  c_ -= rhs.c_;
  return *this;
}

Jet operator*(const Jet& lhs, const Jet& rhs) {
  check_shapes(lhs, rhs);
  const JetBasis& b = lhs.basis();
  Jet out(b.order(), b.nvars());
  if (b.nvars() == 1) {
    const int m = b.size();
    for (int i = 0; i < m; ++i) {
      double acc = 0;
      for (int j = 0; j <= i; ++j) acc += lhs.c_[j] * rhs.c_[i - j];
      out.c_[i] = acc;
    }
    return out;
  }
  for (int t = 0; t < b.size(); ++t) {
    double acc = 0;
    for (auto [i, j] : b.products_onto(t)) acc += lhs.c_[i] * rhs.c_[j];
    out.c_[t] = acc;
  }
  return out;
}

Jet operator/(const Jet& lhs, const Jet& rhs) {
  check_shapes(lhs, rhs);
  const JetBasis& b = lhs.basis();
  const double b0 = rhs.c_[0];
  if (b0 == 0.0) throw DomainError("jet division by zero constant term");
  Jet out(b.order(), b.nvars());
  if (b.nvars() == 1) {
    const int m = b.size();
    for (int i = 0; i < m; ++i) {
      double acc = lhs.c_[i];
      for (int j = 1; j <= i; ++j) acc -= rhs.c_[j] * out.c_[i - j];
      out.c_[i] = acc / b0;
    }
    return out;
  }
  // triangular in graded order: targets only ever consume strictly
  // lower-degree quotient entries
  for (int t = 0; t < b.size(); ++t) {
    double acc = lhs.c_[t];
    for (auto [i, j] : b.products_onto(t))
      if (i != 0) acc -= rhs.c_[i] * out.c_[j];
    out.c_[t] = acc / b0;
  }
  return out;
}

namespace {

// f(u) for multivariate u via Horner in the nilpotent part, given the
// univariate Taylor coefficients t_k = f^(k)(u0)/k!.
Jet compose_series(const Jet& u, std::span<const double> t) {
  const int order = u.order();
  Jet uhat = u;
  uhat.raw(0) = 0.0;
  Jet res = Jet::constant(t[order], order, u.nvars());
  for (int k = order - 1; k >= 0; --k) {
    res = res * uhat;
    res += t[k];
  }
  return res;
}

}  // namespace

Jet sin(const Jet& x) {
  const int n = x.order();
  if (x.nvars() == 1) {
    // coupled recurrence: s_k = (1/k) sum j a_j c_{k-j}, c_k = -(1/k) sum j a_j s_{k-j}
    Jet s(n, 1), c(n, 1);
    s.raw(0) = std::sin(x.value());
    c.raw(0) = std::cos(x.value());
    for (int k = 1; k <= n; ++k) {
      double sa = 0, ca = 0;
      for (int j = 1; j <= k; ++j) {
        sa += j * x[j] * c[k - j];
        ca += j * x[j] * s[k - j];
      }
      s.raw(k) = sa / k;
      c.raw(k) = -ca / k;
    }
    return s;
  }
  std::vector<double> t(n + 1);
  const double sv = std::sin(x.value()), cv = std::cos(x.value());
  double fact = 1;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) fact *= k;
    const double tab[4] = {sv, cv, -sv, -cv};
    t[k] = tab[k % 4] / fact;
  }
  return compose_series(x, t);
}

Jet cos(const Jet& x) {
  const int n = x.order();
  if (x.nvars() == 1) {
    Jet s(n, 1), c(n, 1);
    s.raw(0) = std::sin(x.value());
    c.raw(0) = std::cos(x.value());
    for (int k = 1; k <= n; ++k) {
      double sa = 0, ca = 0;
      for (int j = 1; j <= k; ++j) {
        sa += j * x[j] * c[k - j];
        ca += j * x[j] * s[k - j];
      }
      s.raw(k) = sa / k;
      c.raw(k) = -ca / k;
    }
    return c;
  }
  std::vector<double> t(n + 1);
  const double sv = std::sin(x.value()), cv = std::cos(x.value());
  double fact = 1;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) fact *= k;
    const double tab[4] = {cv, -sv, -cv, sv};
    t[k] = tab[k % 4] / fact;
  }
  return compose_series(x, t);
}

Jet exp(const Jet& x) {
  const int n = x.order();
  const double e0 = std::exp(x.value());
  if (x.nvars() == 1) {
    Jet b(n, 1);
    b.raw(0) = e0;
    for (int k = 1; k <= n; ++k) {
      double acc = 0;
      for (int j = 1; j <= k; ++j) acc += j * x[j] * b[k - j];
      b.raw(k) = acc / k;
    }
    return b;
  }
  std::vector<double> t(n + 1);
  double fact = 1;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) fact *= k;
    t[k] = e0 / fact;
  }
  return compose_series(x, t);
}

Jet sqrt(const Jet& x) {
  if (x.value() <= 0.0) throw DomainError("jet sqrt of nonpositive constant term");
  const JetBasis& b = x.basis();
  const double r0 = std::sqrt(x.value());
  Jet out(b.order(), b.nvars());
  out.raw(0) = r0;
  if (b.nvars() == 1) {
    for (int k = 1; k <= b.order(); ++k) {
      double acc = x[k];
      for (int j = 1; j <= k - 1; ++j) acc -= out[j] * out[k - j];
      out.raw(k) = acc / (2 * r0);
    }
    return out;
  }
  for (int t = 1; t < b.size(); ++t) {
    double acc = x[t];
    for (auto [i, j] : b.products_onto(t))
      if (i != 0 && j != 0) acc -= out[i] * out[j];
    out.raw(t) = acc / (2 * r0);
  }
  return out;
}

Jet pow_int(const Jet& x, int n) {
  if (n < 0) throw DomainError("pow_int requires a nonnegative exponent");
  Jet acc = Jet::constant(1.0, x.order(), x.nvars());
  Jet base = x;
  int e = n;
  while (e > 0) {
    if (e & 1) acc = acc * base;
    e >>= 1;
    if (e) base = base * base;
  }
  return acc;
}

Jet jet_apply(JetOp op, std::span<const Jet> args, int ipow) {
  switch (op) {
    case JetOp::add: return args[0] + args[1];
    case JetOp::sub: return args[0] - args[1];
    case JetOp::mul: return args[0] * args[1];
    case JetOp::div: return args[0] / args[1];
    case JetOp::neg: return -args[0];
    case JetOp::pow_int: return pow_int(args[0], ipow);
    case JetOp::sin: return sin(args[0]);
    case JetOp::cos: return cos(args[0]);
    case JetOp::exp: return exp(args[0]);
    case JetOp::sqrt: return sqrt(args[0]);
  }
  throw ValidationError("unknown jet op");
}

Jet truncated(const Jet& x, int new_order) {
  if (new_order > x.order()) throw ValidationError("truncated: order increase");
  Jet out(new_order, x.nvars());
  for (int i = 0; i < out.size(); ++i) out.raw(i) = x[i];  // graded order is nested
  return out;
}

Jet lift_append_var(const Jet& x, int new_order) {
  if (new_order < x.order()) throw ValidationError("lift_append_var: order decrease");
  const JetBasis& src = x.basis();
  Jet out(new_order, x.nvars() + 1);
  const JetBasis& dst = out.basis();
  std::array<int, kMaxJetVars> e{};
  for (int i = 0; i < src.size(); ++i) {
    const auto& se = src.exponents(i);
    for (int v = 0; v < src.nvars(); ++v) e[v] = se[v];
    e[src.nvars()] = 0;
    out.raw(dst.index_of(std::span<const int>(e.data(), dst.nvars()))) = x[i];
  }
  return out;
}

Jet integrate_last_var(const Jet& x) {
  const JetBasis& b = x.basis();
  const int last = b.nvars() - 1;
  Jet out(b.order(), b.nvars());
  std::array<int, kMaxJetVars> e{};
  for (int i = 0; i < b.size(); ++i) {
    if (x[i] == 0.0) continue;
    const auto& se = b.exponents(i);
    for (int v = 0; v < b.nvars(); ++v) e[v] = se[v];
    e[last] += 1;
    int idx = b.index_of(std::span<const int>(e.data(), b.nvars()));
    if (idx >= 0) out.raw(idx) = x[i] / e[last];
  }
  return out;
}

Jet extract_last_var_coeff(const Jet& x, int k, int out_order) {
  const JetBasis& b = x.basis();
  const int last = b.nvars() - 1;
  const int out_nvars = b.nvars() - 1;
  if (out_nvars < 1) {
    // scalar result promoted to a 1-var jet of order 0
    Jet out(0, 1);
    std::array<int, kMaxJetVars> e{};
    e[0] = k;
    int idx = b.index_of(std::span<const int>(e.data(), 1));
    out.raw(0) = idx >= 0 ? x[idx] : 0.0;
    return out;
  }
  Jet out(out_order, out_nvars);
  const JetBasis& ob = out.basis();
  for (int i = 0; i < b.size(); ++i) {
    const auto& se = b.exponents(i);
    if (se[last] != k) continue;
    int idx = ob.index_of(std::span<const int>(se.data(), out_nvars));
    if (idx >= 0) out.raw(idx) = x[i];
  }
  return out;
}

Jet deflate_by_var(const Jet& x, int var) {
  const JetBasis& b = x.basis();
  Jet out(b.order() - 1 >= 0 ? b.order() - 1 : 0, b.nvars());
  const JetBasis& ob = out.basis();
  double scale = 1.0 + x.coeffs().cwiseAbs().maxCoeff();
  std::array<int, kMaxJetVars> e{};
  for (int i = 0; i < b.size(); ++i) {
    const auto& se = b.exponents(i);
    if (se[var] == 0) {
      if (std::abs(x[i]) > 1e-9 * scale)
        throw DomainError("deflate_by_var: jet is not divisible by the variable");
      continue;
    }
    for (int v = 0; v < b.nvars(); ++v) e[v] = se[v];
    e[var] -= 1;
    int idx = ob.index_of(std::span<const int>(e.data(), b.nvars()));
    if (idx >= 0) out.raw(idx) = x[i];
  }
  return out;
}

}  // namespace patchcm
