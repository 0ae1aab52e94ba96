#pragma once

// Seeded random sampling of jet coordinates and the sampled equality notion
// used by every identity check. Equality here is probabilistic: two
// expressions are "equivalent" when they agree to tolerance at every drawn
// point, not when they are proven equal.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "jetgeom/expr.hpp"

namespace jetgeom {

struct SampleConfig {
  int points = 25;
  std::uint64_t seed = 20240917;
  double lo = -1.5;
  double hi = 1.5;
  double atol = 1e-9;
  double rtol = 1e-7;
};

/// Portable uniform generator; std distributions are implementation-defined,
/// reports must be byte-identical across runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

inline Binding random_binding(Dims d, Rng& rng, double lo, double hi) {
  Binding b(d);
  for (int a = 0; a < d.p; ++a) b.set(Variable::t(a), rng.uniform(lo, hi));
  for (int i = 0; i < d.n; ++i) b.set(Variable::x(i), rng.uniform(lo, hi));
  for (int i = 0; i < d.n; ++i)
    for (int a = 0; a < d.p; ++a) b.set(Variable::v(i, a), rng.uniform(lo, hi));
  return b;
}

/// Random polynomial: a constant plus `terms` monomials of degree 1..max_degree
/// in the given variables. With quantum > 0 coefficients are multiples of it.
inline Expr random_polynomial(const std::vector<Variable>& vars, Rng& rng, int terms = 3, int max_degree = 2,
                              double quantum = 0.0) {
  auto coef = [&] {
    double c = rng.uniform(-1, 1);
    return quantum > 0 ? std::round(c / quantum) * quantum : c;
  };
  std::vector<Expr> ts{Expr(coef())};
  for (int k = 0; k < terms; ++k) {
    std::vector<Expr> fs{Expr(coef())};
    int deg = rng.integer(1, max_degree);
    for (int j = 0; j < deg; ++j) fs.push_back(Expr::var(vars[rng.integer(0, static_cast<int>(vars.size()) - 1)]));
    ts.push_back(make_mul(std::move(fs)));
  }
  return make_add(std::move(ts));
}

/// Base coordinates (t, x), followed by the jet coordinates when requested.
inline std::vector<Variable> coordinates(Dims d, bool velocities = true) {
  std::vector<Variable> vars;
  for (int a = 0; a < d.p; ++a) vars.push_back(Variable::t(a));
  for (int i = 0; i < d.n; ++i) vars.push_back(Variable::x(i));
  if (velocities)
    for (int i = 0; i < d.n; ++i)
      for (int a = 0; a < d.p; ++a) vars.push_back(Variable::v(i, a));
  return vars;
}

/// Draws cfg.points bindings. A point for which `valid` throws DomainError
/// or returns false is redrawn, at most 10 times per point.
inline std::vector<Binding> sample_points(Dims d, const SampleConfig& cfg,
                                          const std::function<bool(const Binding&)>& valid = {}) {
  Rng rng(cfg.seed);
  std::vector<Binding> out;
  for (int k = 0; k < cfg.points; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt <= 10 && !ok; ++attempt) {
      Binding b = random_binding(d, rng, cfg.lo, cfg.hi);
      try {
        ok = !valid || valid(b);
      } catch (const DomainError&) {
        ok = false;
      }
      if (ok) out.push_back(std::move(b));
    }
    if (!ok) throw DomainError("no valid sample point after 10 retries");
  }
  return out;
}

inline bool close(double a, double b, double atol, double rtol) {
  return std::fabs(a - b) <= atol + rtol * std::max(std::fabs(a), std::fabs(b));
}

/// Sampled equality: |a-b| <= atol + rtol*max(|a|,|b|) at every point drawn
/// uniformly from the sampling box. A point where either side hits a domain
/// error is redrawn (up to 10 times) and the comparison fails after that.
inline bool equivalent(const Expr& a, const Expr& b, Dims d, const SampleConfig& cfg = {}) {
  if (same(a, b)) return true;
  const Tape tape({a, b});
  Rng rng(cfg.seed);
  for (int k = 0; k < cfg.points; ++k) {
    bool evaluated = false;
    for (int attempt = 0; attempt <= 10 && !evaluated; ++attempt) {
      Binding pt = random_binding(d, rng, cfg.lo, cfg.hi);
      try {
        auto vals = tape(pt);
        double va = vals[0];
        double vb = vals[1];
        evaluated = true;
        if (!close(va, vb, cfg.atol, cfg.rtol)) return false;
      } catch (const DomainError&) {
      }
    }
    if (!evaluated) return false;
  }
  return true;
}

/// Evaluates a batch of expressions over fixed points, sharing common
/// subexpressions per point.
inline std::vector<std::vector<double>> evaluate_all(const std::vector<Expr>& exprs,
                                                     const std::vector<Binding>& points) {
  const Tape tape(exprs);
  std::vector<std::vector<double>> out;
  out.reserve(points.size());
  for (const auto& pt : points) out.push_back(tape(pt));
  return out;
}

/// max |e| over the given points, and the index of the worst point.
struct Residual {
  double max_abs = 0.0;
  int worst_point = -1;
};

inline Residual max_abs(const std::vector<Expr>& exprs, const std::vector<Binding>& points) {
  Residual r;
  const Tape tape(exprs);
  for (std::size_t k = 0; k < points.size(); ++k)
    for (double v : tape(points[k])) {
      if (r.worst_point < 0 || std::fabs(v) > r.max_abs) {
        r.max_abs = std::fabs(v);
        r.worst_point = static_cast<int>(k);
      }
    }
  return r;
}

}  // namespace jetgeom
