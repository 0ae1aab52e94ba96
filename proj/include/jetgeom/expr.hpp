#pragma once

// Symbolic scalar expressions over the jet coordinates (t^a, x^i, x^i_a).
//
// Expressions are immutable DAGs of shared nodes. Construction applies light
// local simplification only: constant folding, flattening of sums/products,
// merging of like terms and like factors, and a hash-based ordering of
// operands. There is no canonical normal form; equality of two expressions
// is decided by sampling (see sampling.hpp), or structurally via same().

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace jetgeom {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by eval for log of a non-positive argument, division by zero,
/// negative base with a non-integer exponent, or a non-finite result.
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnboundVariable : public Error {
 public:
  using Error::Error;
};

/// Manifold dimensions: p temporal, n spatial.
struct Dims {
  int p = 1;
  int n = 1;
  int vertical() const { return n * p; }
  int frame() const { return p + n + n * p; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

enum class VarKind : std::uint8_t { temporal, spatial, velocity };

/// A jet coordinate. Indices are 0-based internally and 1-based in text.
/// A velocity variable x^i_a carries both a spatial and a temporal index.
struct Variable {
  VarKind kind = VarKind::temporal;
  int spatial = -1;
  int temporal = -1;

  static Variable t(int a) { return {VarKind::temporal, -1, a}; }
  static Variable x(int i) { return {VarKind::spatial, i, -1}; }
  static Variable v(int i, int a) { return {VarKind::velocity, i, a}; }

  bool in_range(const Dims& d) const {
    switch (kind) {
      case VarKind::temporal: return temporal >= 0 && temporal < d.p && spatial == -1;
      case VarKind::spatial: return spatial >= 0 && spatial < d.n && temporal == -1;
      case VarKind::velocity:
        return spatial >= 0 && spatial < d.n && temporal >= 0 && temporal < d.p;
    }
    return false;
  }

  std::string name() const {
    switch (kind) {
      case VarKind::temporal: return "t" + std::to_string(temporal + 1);
      case VarKind::spatial: return "x" + std::to_string(spatial + 1);
      case VarKind::velocity:
        return "x" + std::to_string(spatial + 1) + "_" + std::to_string(temporal + 1);
    }
    return "?";
  }

  friend auto operator<=>(const Variable&, const Variable&) = default;
};

/// Exact rational number with positive denominator, used for exponents.
struct Rational {
  long num = 0;
  long den = 1;

  Rational() = default;
  Rational(long n, long d = 1) : num(n), den(d) {
    if (den == 0) throw Error("rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  bool is_integer() const { return den == 1; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend Rational operator+(Rational a, Rational b) {
    return {a.num * b.den + b.num * a.den, a.den * b.den};
  }
  friend Rational operator-(Rational a, Rational b) {
    return {a.num * b.den - b.num * a.den, a.den * b.den};
  }
  friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

enum class Op : std::uint8_t { constant, variable, add, mul, pow, sin, cos, exp, log };

class Expr;

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::constant;
  double value = 0.0;
  Variable var{};
  Rational exponent{};
  std::vector<NodePtr> args;
  std::uint64_t hash = 0;
  // Bloom-style mask of variables occurring below this node.
  std::uint64_t varmask = 0;
};

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  v += 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  v ^= v >> 30;
  v *= 0xbf58476d1ce4e5b9ULL;
  v ^= v >> 27;
  v *= 0x94d049bb133111ebULL;
  v ^= v >> 31;
  return h ^ v;
}

inline std::uint64_t var_bit(const Variable& v) {
  std::uint64_t h = mix(static_cast<std::uint64_t>(v.kind) + 1,
                        static_cast<std::uint64_t>(v.spatial + 7) * 131 +
                            static_cast<std::uint64_t>(v.temporal + 11));
  return 1ULL << (h % 64);
}

inline NodePtr finish(Node n) {
  std::uint64_t h = mix(0, static_cast<std::uint64_t>(n.op) + 1);
  switch (n.op) {
    case Op::constant: {
      double v = n.value == 0.0 ? 0.0 : n.value;  // fold -0
      h = mix(h, std::bit_cast<std::uint64_t>(v));
      break;
    }
    case Op::variable:
      h = mix(h, static_cast<std::uint64_t>(n.var.kind));
      h = mix(h, static_cast<std::uint64_t>(n.var.spatial + 3));
      h = mix(h, static_cast<std::uint64_t>(n.var.temporal + 5));
      n.varmask = var_bit(n.var);
      break;
    case Op::pow:
      h = mix(h, static_cast<std::uint64_t>(n.exponent.num));
      h = mix(h, static_cast<std::uint64_t>(n.exponent.den));
      break;
    default:
      break;
  }
  for (const auto& a : n.args) {
    h = mix(h, a->hash);
    n.varmask |= a->varmask;
  }
  n.hash = h;
  return std::make_shared<const Node>(std::move(n));
}

inline bool same_node(const Node* a, const Node* b) {
  if (a == b) return true;
  if (a->hash != b->hash || a->op != b->op || a->args.size() != b->args.size()) return false;
  switch (a->op) {
    case Op::constant: return a->value == b->value;
    case Op::variable: return a->var == b->var;
    case Op::pow:
      if (!(a->exponent == b->exponent)) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a->args.size(); ++i)
    if (!same_node(a->args[i].get(), b->args[i].get())) return false;
  return true;
}

}  // namespace detail

/// Handle to an immutable expression node. Default-constructed is 0.
class Expr {
 public:
  Expr() : node_(zero_node()) {}
  Expr(double c) : node_(constant_node(c)) {}  // NOLINT(google-explicit-constructor)
  explicit Expr(detail::NodePtr n) : node_(std::move(n)) {}

  static Expr var(Variable v) {
    detail::Node n;
    n.op = Op::variable;
    n.var = v;
    return Expr(detail::finish(std::move(n)));
  }

  Op op() const { return node_->op; }
  bool is_constant() const { return node_->op == Op::constant; }
  bool is_zero() const { return is_constant() && node_->value == 0.0; }
  bool is_one() const { return is_constant() && node_->value == 1.0; }
  double constant_value() const { return node_->value; }
  const Variable& variable() const { return node_->var; }
  Rational exponent() const { return node_->exponent; }
  std::size_t arity() const { return node_->args.size(); }
  Expr arg(std::size_t i) const { return Expr(node_->args[i]); }
  std::uint64_t hash() const { return node_->hash; }
  std::uint64_t varmask() const { return node_->varmask; }
  const detail::Node* raw() const { return node_.get(); }
  const detail::NodePtr& ptr() const { return node_; }

 private:
  static detail::NodePtr constant_node(double c) {
    detail::Node n;
    n.op = Op::constant;
    n.value = c == 0.0 ? 0.0 : c;
    return detail::finish(std::move(n));
  }
  static const detail::NodePtr& zero_node() {
    static const detail::NodePtr z = constant_node(0.0);
    return z;
  }

  detail::NodePtr node_;
};

/// Structural equality (after the local simplification done at construction).
inline bool same(const Expr& a, const Expr& b) { return detail::same_node(a.raw(), b.raw()); }

Expr make_add(std::vector<Expr> terms);
Expr make_mul(std::vector<Expr> factors);
Expr make_pow(const Expr& base, Rational exponent);
Expr make_func(Op op, const Expr& arg);

inline Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return make_add({a, b});
}
inline Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return Expr(0.0);
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  return make_mul({a, b});
}
inline Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr(-a.constant_value());
  return Expr(-1.0) * a;
}
inline Expr operator-(const Expr& a, const Expr& b) {
  if (b.is_zero()) return a;
  return a + (-b);
}
inline Expr operator/(const Expr& a, const Expr& b) { return a * make_pow(b, Rational(-1)); }
inline Expr& operator+=(Expr& a, const Expr& b) { return a = a + b; }
inline Expr& operator-=(Expr& a, const Expr& b) { return a = a - b; }
inline Expr& operator*=(Expr& a, const Expr& b) { return a = a * b; }

inline Expr pow(const Expr& b, Rational r) { return make_pow(b, r); }
inline Expr sin(const Expr& a) { return make_func(Op::sin, a); }
inline Expr cos(const Expr& a) { return make_func(Op::cos, a); }
inline Expr exp(const Expr& a) { return make_func(Op::exp, a); }
inline Expr log(const Expr& a) { return make_func(Op::log, a); }

inline Expr tvar(int a) { return Expr::var(Variable::t(a)); }
inline Expr xvar(int i) { return Expr::var(Variable::x(i)); }
inline Expr vvar(int i, int a) { return Expr::var(Variable::v(i, a)); }

namespace detail {

inline bool hash_less(const Expr& a, const Expr& b) { return a.hash() < b.hash(); }

// Splits a term into numeric coefficient and remaining product.
inline std::pair<double, Expr> split_coefficient(const Expr& e) {
  if (e.op() == Op::mul && e.arg(0).is_constant()) {
    if (e.arity() == 2) return {e.arg(0).constant_value(), e.arg(1)};
    Node n;
    n.op = Op::mul;
    for (std::size_t i = 1; i < e.arity(); ++i) n.args.push_back(e.raw()->args[i]);
    return {e.arg(0).constant_value(), Expr(finish(std::move(n)))};
  }
  return {1.0, e};
}

inline std::pair<Expr, Rational> split_power(const Expr& e) {
  if (e.op() == Op::pow) return {e.arg(0), e.exponent()};
  return {e, Rational(1)};
}

// Builds a product node from already-simplified, non-constant factors.
inline Expr raw_mul(double coef, std::vector<Expr> factors) {
  if (coef == 0.0) return Expr(0.0);
  std::sort(factors.begin(), factors.end(), hash_less);
  if (factors.empty()) return Expr(coef);
  if (factors.size() == 1 && coef == 1.0) return factors[0];
  Node n;
  n.op = Op::mul;
  if (coef != 1.0) n.args.push_back(Expr(coef).ptr());
  for (auto& f : factors) n.args.push_back(f.ptr());
  return Expr(finish(std::move(n)));
}

}  // namespace detail

inline Expr make_add(std::vector<Expr> terms) {
  double constant = 0.0;
  std::vector<std::pair<double, Expr>> merged;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> index;
  std::function<void(const Expr&)> push = [&](const Expr& t) {
    if (t.op() == Op::add) {
      for (std::size_t i = 0; i < t.arity(); ++i) push(t.arg(i));
      return;
    }
    if (t.is_constant()) {
      constant += t.constant_value();
      return;
    }
    auto [c, rest] = detail::split_coefficient(t);
    auto& slots = index[rest.hash()];
    for (auto k : slots) {
      if (same(merged[k].second, rest)) {
        merged[k].first += c;
        return;
      }
    }
    slots.push_back(merged.size());
    merged.emplace_back(c, rest);
  };
  for (const auto& t : terms) push(t);

  std::vector<Expr> out;
  for (auto& [c, rest] : merged) {
    if (c == 0.0) continue;
    if (c == 1.0) {
      out.push_back(rest);
    } else if (rest.op() == Op::mul) {
      std::vector<Expr> fs;
      for (std::size_t i = 0; i < rest.arity(); ++i) fs.push_back(rest.arg(i));
      out.push_back(detail::raw_mul(c, std::move(fs)));
    } else {
      out.push_back(detail::raw_mul(c, {rest}));
    }
  }
  std::sort(out.begin(), out.end(), detail::hash_less);
  if (out.empty()) return Expr(constant);
  if (out.size() == 1 && constant == 0.0) return out[0];
  detail::Node n;
  n.op = Op::add;
  if (constant != 0.0) n.args.push_back(Expr(constant).ptr());
  for (auto& t : out) n.args.push_back(t.ptr());
  return Expr(detail::finish(std::move(n)));
}

inline Expr make_mul(std::vector<Expr> factors) {
  double coef = 1.0;
  std::vector<std::pair<Expr, Rational>> merged;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> index;
  std::function<void(const Expr&)> push = [&](const Expr& f) {
    if (f.op() == Op::mul) {
      for (std::size_t i = 0; i < f.arity(); ++i) push(f.arg(i));
      return;
    }
    if (f.is_constant()) {
      coef *= f.constant_value();
      return;
    }
    auto [base, r] = detail::split_power(f);
    auto& slots = index[base.hash()];
    for (auto k : slots) {
      if (same(merged[k].first, base)) {
        merged[k].second = merged[k].second + r;
        return;
      }
    }
    slots.push_back(merged.size());
    merged.emplace_back(base, r);
  };
  for (const auto& f : factors) push(f);
  if (coef == 0.0) return Expr(0.0);

  std::vector<Expr> out;
  for (auto& [base, r] : merged) {
    if (r.num == 0) continue;
    Expr f = make_pow(base, r);
    if (f.is_constant()) {
      coef *= f.constant_value();
    } else if (f.op() == Op::mul) {
      // integer power of a product base, distributed by make_pow
      for (std::size_t i = 0; i < f.arity(); ++i) {
        if (f.arg(i).is_constant()) coef *= f.arg(i).constant_value();
        else out.push_back(f.arg(i));
      }
    } else {
      out.push_back(f);
    }
  }
  return detail::raw_mul(coef, std::move(out));
}

inline Expr make_pow(const Expr& base, Rational r) {
  if (r.num == 0) return Expr(1.0);
  if (r == Rational(1)) return base;
  if (base.is_constant()) {
    double b = base.constant_value();
    if (r.is_integer()) {
      if (!(b == 0.0 && r.num < 0)) return Expr(std::pow(b, static_cast<double>(r.num)));
    } else if (b > 0.0) {
      return Expr(std::pow(b, r.value()));
    }
    // otherwise keep unevaluated so eval reports the domain error
  }
  if (r.is_integer()) {
    if (base.op() == Op::pow) return make_pow(base.arg(0), base.exponent() * r);
    if (base.op() == Op::mul) {
      std::vector<Expr> fs;
      for (std::size_t i = 0; i < base.arity(); ++i) fs.push_back(make_pow(base.arg(i), r));
      double coef = 1.0;
      std::vector<Expr> rest;
      for (auto& f : fs) {
        if (f.is_constant()) coef *= f.constant_value();
        else rest.push_back(f);
      }
      return detail::raw_mul(coef, std::move(rest));
    }
  }
  detail::Node n;
  n.op = Op::pow;
  n.exponent = r;
  n.args.push_back(base.ptr());
  return Expr(detail::finish(std::move(n)));
}

inline Expr make_func(Op op, const Expr& a) {
  if (a.is_constant()) {
    double v = a.constant_value();
    switch (op) {
      case Op::sin: return Expr(std::sin(v));
      case Op::cos: return Expr(std::cos(v));
      case Op::exp: return Expr(std::exp(v));
      case Op::log:
        if (v > 0.0) return Expr(std::log(v));
        break;
      default: break;
    }
  }
  if (op == Op::log && a.op() == Op::exp) return a.arg(0);
  detail::Node n;
  n.op = op;
  n.args.push_back(a.ptr());
  return Expr(detail::finish(std::move(n)));
}

// ---------------------------------------------------------------------------
// Differentiation

/// Partial derivative. Distinct variables are independent.
inline Expr diff(const Expr& e, const Variable& v) {
  const std::uint64_t bit = detail::var_bit(v);
  std::unordered_map<const detail::Node*, Expr> memo;
  std::function<Expr(const Expr&)> rec = [&](const Expr& f) -> Expr {
    if ((f.varmask() & bit) == 0) return Expr(0.0);
    if (auto it = memo.find(f.raw()); it != memo.end()) return it->second;
    Expr out;
    switch (f.op()) {
      case Op::constant: out = Expr(0.0); break;
      case Op::variable: out = Expr(f.variable() == v ? 1.0 : 0.0); break;
      case Op::add: {
        std::vector<Expr> ts;
        for (std::size_t i = 0; i < f.arity(); ++i) ts.push_back(rec(f.arg(i)));
        out = make_add(std::move(ts));
        break;
      }
      case Op::mul: {
        std::vector<Expr> ts;
        for (std::size_t i = 0; i < f.arity(); ++i) {
          Expr d = rec(f.arg(i));
          if (d.is_zero()) continue;
          std::vector<Expr> fs;
          fs.push_back(d);
          for (std::size_t j = 0; j < f.arity(); ++j)
            if (j != i) fs.push_back(f.arg(j));
          ts.push_back(make_mul(std::move(fs)));
        }
        out = make_add(std::move(ts));
        break;
      }
      case Op::pow: {
        Rational r = f.exponent();
        Expr d = rec(f.arg(0));
        out = make_mul({Expr(r.value()), make_pow(f.arg(0), r - Rational(1)), d});
        break;
      }
      case Op::sin: out = cos(f.arg(0)) * rec(f.arg(0)); break;
      case Op::cos: out = -(sin(f.arg(0)) * rec(f.arg(0))); break;
      case Op::exp: out = f * rec(f.arg(0)); break;
      case Op::log: out = rec(f.arg(0)) / f.arg(0); break;
    }
    memo.emplace(f.raw(), out);
    return out;
  };
  return rec(e);
}

// ---------------------------------------------------------------------------
// Evaluation

/// Values for the jet coordinates at one point. Entries left unset are
/// unbound; eval of an expression touching them throws UnboundVariable.
class Binding {
 public:
  Binding() = default;
  explicit Binding(Dims d)
      : dims_(d),
        t_(static_cast<std::size_t>(d.p), kUnset),
        x_(static_cast<std::size_t>(d.n), kUnset),
        v_(static_cast<std::size_t>(d.n * d.p), kUnset) {}

  const Dims& dims() const { return dims_; }

  void set(const Variable& var, double value) { slot(var) = value; }
  double get(const Variable& var) const {
    const double* s = find(var);
    if (s == nullptr || std::isnan(*s)) throw UnboundVariable("unbound variable " + var.name());
    return *s;
  }
  bool has(const Variable& var) const {
    const double* s = find(var);
    return s != nullptr && !std::isnan(*s);
  }

  std::vector<std::pair<Variable, double>> entries() const {
    std::vector<std::pair<Variable, double>> out;
    for (int a = 0; a < dims_.p; ++a) out.emplace_back(Variable::t(a), t_[a]);
    for (int i = 0; i < dims_.n; ++i) out.emplace_back(Variable::x(i), x_[i]);
    for (int i = 0; i < dims_.n; ++i)
      for (int a = 0; a < dims_.p; ++a) out.emplace_back(Variable::v(i, a), v_[i * dims_.p + a]);
    return out;
  }

 private:
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

  double& slot(const Variable& var) {
    double* s = const_cast<double*>(find(var));
    if (s == nullptr) throw Error("variable " + var.name() + " outside binding dimensions");
    return *s;
  }
  const double* find(const Variable& var) const {
    if (!var.in_range(dims_)) return nullptr;
    switch (var.kind) {
      case VarKind::temporal: return &t_[var.temporal];
      case VarKind::spatial: return &x_[var.spatial];
      case VarKind::velocity: return &v_[var.spatial * dims_.p + var.temporal];
    }
    return nullptr;
  }

  Dims dims_{};
  std::vector<double> t_, x_, v_;
};

namespace detail {

inline double eval_node(const Node* n, const Binding& b,
                        std::unordered_map<const Node*, double>* memo) {
  if (n->op == Op::constant) return n->value;
  if (n->op == Op::variable) return b.get(n->var);
  if (memo != nullptr) {
    if (auto it = memo->find(n); it != memo->end()) return it->second;
  }
  double r = 0.0;
  switch (n->op) {
    case Op::add:
      for (const auto& a : n->args) r += eval_node(a.get(), b, memo);
      break;
    case Op::mul:
      r = 1.0;
      for (const auto& a : n->args) r *= eval_node(a.get(), b, memo);
      break;
    case Op::pow: {
      double base = eval_node(n->args[0].get(), b, memo);
      const Rational& q = n->exponent;
      if (base == 0.0 && q.num < 0) throw DomainError("division by zero");
      if (q.is_integer()) {
        r = std::pow(base, static_cast<double>(q.num));
      } else {
        if (base < 0.0) throw DomainError("negative base with non-integer exponent");
        r = std::pow(base, q.value());
      }
      break;
    }
    case Op::sin: r = std::sin(eval_node(n->args[0].get(), b, memo)); break;
    case Op::cos: r = std::cos(eval_node(n->args[0].get(), b, memo)); break;
    case Op::exp: r = std::exp(eval_node(n->args[0].get(), b, memo)); break;
    case Op::log: {
      double a = eval_node(n->args[0].get(), b, memo);
      if (a <= 0.0) throw DomainError("log of non-positive argument");
      r = std::log(a);
      break;
    }
    default: break;
  }
  if (!std::isfinite(r)) throw DomainError("non-finite value");
  if (memo != nullptr) memo->emplace(n, r);
  return r;
}

}  // namespace detail

/// Memoized per call: expressions are DAGs with heavy sharing.
inline double eval(const Expr& e, const Binding& b) {
  if (e.arity() == 0) return detail::eval_node(e.raw(), b, nullptr);
  std::unordered_map<const detail::Node*, double> memo;
  return detail::eval_node(e.raw(), b, &memo);
}

/// Evaluates many expressions at one point, sharing results of common
/// subexpressions.
class PointEvaluator {
 public:
  explicit PointEvaluator(const Binding& b) : binding_(b) {}
  double operator()(const Expr& e) { return detail::eval_node(e.raw(), binding_, &memo_); }

 private:
  const Binding& binding_;
  std::unordered_map<const detail::Node*, double> memo_;
};

/// A batch of expressions linearized into a topologically ordered
/// instruction list; evaluates every output at a point in one flat pass.
class Tape {
 public:
  explicit Tape(const std::vector<Expr>& outputs) {
    std::unordered_map<const detail::Node*, int> slot;
    std::vector<std::pair<const detail::Node*, bool>> stack;
    for (const auto& e : outputs) {
      stack.push_back({e.raw(), false});
      while (!stack.empty()) {
        auto [n, expanded] = stack.back();
        stack.pop_back();
        if (slot.count(n)) continue;
        if (!expanded) {
          stack.push_back({n, true});
          for (const auto& a : n->args)
            if (!slot.count(a.get())) stack.push_back({a.get(), false});
          continue;
        }
        Instr in{n->op, static_cast<int>(args_.size()), static_cast<int>(n->args.size()), n->value, n->var,
                 n->exponent};
        for (const auto& a : n->args) args_.push_back(slot.at(a.get()));
        slot.emplace(n, static_cast<int>(code_.size()));
        code_.push_back(in);
      }
      out_.push_back(slot.at(e.raw()));
    }
  }

  std::size_t size() const { return code_.size(); }

  /// Values of all outputs; throws DomainError like eval.
  std::vector<double> operator()(const Binding& b) const {
    std::vector<double> v(code_.size());
    for (std::size_t k = 0; k < code_.size(); ++k) {
      const Instr& in = code_[k];
      const int* a = args_.data() + in.first;
      double r = 0.0;
      switch (in.op) {
        case Op::constant: r = in.value; break;
        case Op::variable: r = b.get(in.var); break;
        case Op::add:
          for (int i = 0; i < in.count; ++i) r += v[a[i]];
          break;
        case Op::mul:
          r = 1.0;
          for (int i = 0; i < in.count; ++i) r *= v[a[i]];
          break;
        case Op::pow: {
          double base = v[a[0]];
          if (base == 0.0 && in.exponent.num < 0) throw DomainError("division by zero");
          if (in.exponent.is_integer()) {
            r = std::pow(base, static_cast<double>(in.exponent.num));
          } else {
            if (base < 0.0) throw DomainError("negative base with non-integer exponent");
            r = std::pow(base, in.exponent.value());
          }
          break;
        }
        case Op::sin: r = std::sin(v[a[0]]); break;
        case Op::cos: r = std::cos(v[a[0]]); break;
        case Op::exp: r = std::exp(v[a[0]]); break;
        case Op::log:
          if (v[a[0]] <= 0.0) throw DomainError("log of non-positive argument");
          r = std::log(v[a[0]]);
          break;
      }
      if (!std::isfinite(r)) throw DomainError("non-finite value");
      v[k] = r;
    }
    std::vector<double> out(out_.size());
    for (std::size_t i = 0; i < out_.size(); ++i) out[i] = v[out_[i]];
    return out;
  }

 private:
  struct Instr {
    Op op;
    int first;
    int count;
    double value;
    Variable var;
    Rational exponent;
  };
  std::vector<Instr> code_;
  std::vector<int> args_;
  std::vector<int> out_;
};

// ---------------------------------------------------------------------------
// Substitution and inspection

/// Simultaneous replacement of variables in a batch of expressions, sharing
/// work across common subexpressions. Unmapped variables are kept.
inline std::vector<Expr> substitute(const std::vector<Expr>& es,
                                    const std::function<std::optional<Expr>(const Variable&)>& map) {
  std::unordered_map<const detail::Node*, Expr> memo;
  std::function<Expr(const Expr&)> rec = [&](const Expr& f) -> Expr {
    if (f.op() == Op::constant) return f;
    if (auto it = memo.find(f.raw()); it != memo.end()) return it->second;
    Expr out;
    switch (f.op()) {
      case Op::variable: {
        auto m = map(f.variable());
        out = m ? *m : f;
        break;
      }
      case Op::add:
      case Op::mul: {
        std::vector<Expr> xs;
        xs.reserve(f.arity());
        for (std::size_t i = 0; i < f.arity(); ++i) xs.push_back(rec(f.arg(i)));
        out = f.op() == Op::add ? make_add(std::move(xs)) : make_mul(std::move(xs));
        break;
      }
      case Op::pow: out = make_pow(rec(f.arg(0)), f.exponent()); break;
      default: out = make_func(f.op(), rec(f.arg(0))); break;
    }
    memo.emplace(f.raw(), out);
    return out;
  };
  std::vector<Expr> out;
  out.reserve(es.size());
  for (const auto& e : es) out.push_back(rec(e));
  return out;
}

inline Expr substitute(const Expr& e, const std::function<std::optional<Expr>(const Variable&)>& map) {
  return substitute(std::vector<Expr>{e}, map)[0];
}

inline std::set<Variable> variables(const Expr& e) {
  std::set<Variable> out;
  std::unordered_map<const detail::Node*, bool> seen;
  std::function<void(const Expr&)> rec = [&](const Expr& f) {
    if (!seen.emplace(f.raw(), true).second) return;
    if (f.op() == Op::variable) out.insert(f.variable());
    for (std::size_t i = 0; i < f.arity(); ++i) rec(f.arg(i));
  };
  rec(e);
  return out;
}

inline bool depends_on_kind(const Expr& e, VarKind k) {
  for (const auto& v : variables(e))
    if (v.kind == k) return true;
  return false;
}

/// Number of distinct nodes in the DAG.
inline std::size_t node_count(const Expr& e) {
  std::unordered_map<const detail::Node*, bool> seen;
  std::function<void(const Expr&)> rec = [&](const Expr& f) {
    if (!seen.emplace(f.raw(), true).second) return;
    for (std::size_t i = 0; i < f.arity(); ++i) rec(f.arg(i));
  };
  rec(e);
  return seen.size();
}

// ---------------------------------------------------------------------------
// Rendering. Output follows the parse grammar so that parse(render(e))
// reproduces e up to sampled equivalence.

namespace detail {

inline std::string render_number(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    std::ostringstream os;
    os << static_cast<long long>(v);
    return os.str();
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// precedence: 1 sum, 2 product, 3 power, 4 atom
inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::add: return 1;
    case Op::mul: return 2;
    case Op::pow: return 3;
    case Op::constant: return e.constant_value() < 0 ? 1 : 4;
    default: return 4;
  }
}

inline std::string render_rec(const Expr& e);

inline std::string wrap(const Expr& e, int min_prec) {
  std::string s = render_rec(e);
  return precedence(e) < min_prec ? "(" + s + ")" : s;
}

inline std::string render_product(const Expr& e, bool& negative) {
  // e is a product (or a single factor); returns text without leading sign.
  negative = false;
  std::vector<Expr> fs;
  double coef = 1.0;
  if (e.op() == Op::mul) {
    for (std::size_t i = 0; i < e.arity(); ++i) {
      if (e.arg(i).is_constant()) coef *= e.arg(i).constant_value();
      else fs.push_back(e.arg(i));
    }
  } else if (e.is_constant()) {
    coef = e.constant_value();
  } else {
    fs.push_back(e);
  }
  if (coef < 0) {
    negative = true;
    coef = -coef;
  }
  std::string out;
  if (coef != 1.0 || fs.empty()) out = render_number(coef);
  for (const auto& f : fs) {
    if (!out.empty()) out += "*";
    out += wrap(f, 3);
  }
  return out;
}

inline std::string render_rec(const Expr& e) {
  switch (e.op()) {
    case Op::constant: return render_number(e.constant_value());
    case Op::variable: return e.variable().name();
    case Op::add: {
      std::string out;
      for (std::size_t i = 0; i < e.arity(); ++i) {
        bool neg = false;
        std::string t = render_product(e.arg(i), neg);
        if (i == 0) out += (neg ? "-" : "") + t;
        else out += (neg ? " - " : " + ") + t;
      }
      return out;
    }
    case Op::mul: {
      bool neg = false;
      std::string t = render_product(e, neg);
      return neg ? "-" + t : t;
    }
    case Op::pow: {
      Rational r = e.exponent();
      std::string base = wrap(e.arg(0), 4);
      if (r.is_integer() && r.num > 0) return base + "^" + std::to_string(r.num);
      if (r.is_integer()) return base + "^(" + std::to_string(r.num) + ")";
      return base + "^(" + std::to_string(r.num) + "/" + std::to_string(r.den) + ")";
    }
    case Op::sin: return "sin(" + render_rec(e.arg(0)) + ")";
    case Op::cos: return "cos(" + render_rec(e.arg(0)) + ")";
    case Op::exp: return "exp(" + render_rec(e.arg(0)) + ")";
    case Op::log: return "log(" + render_rec(e.arg(0)) + ")";
  }
  return "?";
}

}  // namespace detail

inline std::string render(const Expr& e) { return detail::render_rec(e); }

}  // namespace jetgeom
