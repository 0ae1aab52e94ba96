#pragma once

#include <vector>

#include "jetgeom/connection.hpp"
#include "jetgeom/sampling.hpp"

namespace testing_helpers {

using namespace jetgeom;

inline std::vector<Variable> all_variables(Dims d, bool velocities = true) {
  std::vector<Variable> vars;
  for (int a = 0; a < d.p; ++a) vars.push_back(Variable::t(a));
  for (int i = 0; i < d.n; ++i) vars.push_back(Variable::x(i));
  if (velocities)
    for (int i = 0; i < d.n; ++i)
      for (int a = 0; a < d.p; ++a) vars.push_back(Variable::v(i, a));
  return vars;
}

/// Random polynomial with `terms` monomials of degree <= max_degree.
inline Expr random_poly(const std::vector<Variable>& vars, Rng& rng, int terms = 3, int max_degree = 2) {
  std::vector<Expr> ts{Expr(rng.uniform(-1, 1))};
  for (int k = 0; k < terms; ++k) {
    std::vector<Expr> fs{Expr(rng.uniform(-1, 1))};
    int deg = rng.integer(1, max_degree);
    for (int j = 0; j < deg; ++j) fs.push_back(Expr::var(vars[rng.integer(0, static_cast<int>(vars.size()) - 1)]));
    ts.push_back(make_mul(std::move(fs)));
  }
  return make_add(std::move(ts));
}

inline Expr random_poly(Dims d, Rng& rng, int terms = 3, int max_degree = 2) {
  return random_poly(all_variables(d), rng, terms, max_degree);
}

inline NonlinearConnection random_nlc(Dims d, Rng& rng) {
  auto nlc = NonlinearConnection::zero(d);
  for (std::size_t k = 0; k < nlc.M.size(); ++k) nlc.M.flat(k) = random_poly(d, rng, 2);
  for (std::size_t k = 0; k < nlc.N.size(); ++k) nlc.N.flat(k) = random_poly(d, rng, 2);
  return nlc;
}

inline GammaConnection random_gamma(Dims d, Rng& rng, int terms = 2) {
  auto g = GammaConnection::zero(d);
  for (auto f : kFamilies)
    for (std::size_t k = 0; k < g[f].size(); ++k) g[f].flat(k) = random_poly(d, rng, terms);
  return g;
}

inline JetModel sphere_model(int p = 1) {
  ExprArray h({p, p}), phi({2, 2});
  for (int a = 0; a < p; ++a) h(a, a) = 1.0;
  phi(0, 0) = 1.0;
  phi(1, 1) = pow(sin(xvar(0)), Rational(2));
  return {{p, 2}, h, phi};
}

inline JetModel exponential_model() {
  ExprArray h({1, 1}), phi({1, 1});
  h(0, 0) = exp(2 * tvar(0));
  phi(0, 0) = 1.0;
  return {{1, 1}, h, phi};
}

inline SampleConfig sphere_box() {
  SampleConfig c;
  c.lo = 0.4;
  c.hi = 1.4;
  return c;
}

/// All components of an array equal the given ones via sampled equality.
inline bool all_equivalent(const ExprArray& a, const ExprArray& b, Dims d, const SampleConfig& cfg = {}) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!equivalent(a.flat(k), b.flat(k), d, cfg)) return false;
  return true;
}

inline bool all_zero(const ExprArray& a, Dims d, const SampleConfig& cfg = {}) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!equivalent(a.flat(k), Expr(0.0), d, cfg)) return false;
  return true;
}

}  // namespace testing_helpers
