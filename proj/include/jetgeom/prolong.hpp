#pragma once

// Total derivatives and first jet prolongations of vector fields on T x M.

#include <string>
#include <vector>

#include "jetgeom/calculus.hpp"
#include "jetgeom/connection.hpp"
#include "jetgeom/invariants.hpp"
#include "jetgeom/model.hpp"

namespace jetgeom {

/// X = X^a d/dt^a + X^i d/dx^i with coefficients in (t, x) only.
struct BaseVectorField {
  Dims dims;
  std::vector<Expr> Xt;  // [p]
  std::vector<Expr> Xm;  // [n]

  static BaseVectorField zero(Dims d) {
    return {d, std::vector<Expr>(static_cast<std::size_t>(d.p)), std::vector<Expr>(static_cast<std::size_t>(d.n))};
  }

  void validate() const {
    if (static_cast<int>(Xt.size()) != dims.p || static_cast<int>(Xm.size()) != dims.n)
      throw ValidationError("vector field needs " + std::to_string(dims.p) + " time and " + std::to_string(dims.n) +
                            " space components");
    for (const auto* part : {&Xt, &Xm})
      for (const auto& e : *part) {
        if (depends_on_kind(e, VarKind::velocity)) throw ValidationError("vector field component depends on a jet variable");
        for (const auto& v : variables(e))
          if (!v.in_range(dims)) throw ValidationError("variable " + v.name() + " out of range");
      }
  }
};

/// D_a f = df/dt^a + df/dx^i x^i_a for f on T x M.
inline std::vector<Expr> total_derivative(const Expr& f, Dims d) {
  if (depends_on_kind(f, VarKind::velocity)) throw ValidationError("total derivative of a function of jet variables");
  std::vector<Expr> out;
  for (int a = 0; a < d.p; ++a) {
    std::vector<Expr> ts{diff(f, Variable::t(a))};
    for (int i = 0; i < d.n; ++i) ts.push_back(diff(f, Variable::x(i)) * vvar(i, a));
    out.push_back(make_add(std::move(ts)));
  }
  return out;
}

/// Natural-frame prolongation: X^{(i)}_{(a)} = D_a X^i - (D_a X^b) x^i_b.
inline DVectorField olver_prolong(const BaseVectorField& X) {
  X.validate();
  const Dims d = X.dims;
  auto out = DVectorField::zero(d);
  out.Xt = X.Xt;
  out.Xm = X.Xm;
  std::vector<std::vector<Expr>> DXt, DXm;
  for (const auto& e : X.Xt) DXt.push_back(total_derivative(e, d));
  for (const auto& e : X.Xm) DXm.push_back(total_derivative(e, d));
  for (int i = 0; i < d.n; ++i)
    for (int a = 0; a < d.p; ++a) {
      std::vector<Expr> ts{DXm[i][a]};
      for (int b = 0; b < d.p; ++b) ts.push_back(-(DXt[b][a] * vvar(i, b)));
      out.Xv(i, a) = make_add(std::move(ts));
    }
  return out;
}

/// Adapted-frame prolongation built from covariant derivatives of X, with
/// correction groups X^m (M + Gbar x + Lbar x x) and -X^m (-N + G + L x).
inline DVectorField geometric_prolong(const BaseVectorField& X, const GammaConnection& g,
                                      const NonlinearConnection& nlc) {
  X.validate();
  const Dims d = X.dims;
  const int p = d.p, n = d.n;
  auto base = DVectorField::zero(d);
  base.Xt = X.Xt;
  base.Xm = X.Xm;
  CovariantDerivative cov(g, nlc);
  DTensor Tx = base.part(Space::T), Mx = base.part(Space::M);
  DTensor Tt = cov.along(Tx, Space::T), Tm = cov.along(Tx, Space::M);  // X^b_{/a}, X^b_{|j}
  DTensor Mt = cov.along(Mx, Space::T), Mm = cov.along(Mx, Space::M);  // X^i_{/a}, X^i_{|j}
  auto out = base;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < p; ++a) {
      std::vector<Expr> ts{Mt(i, a)};
      for (int j = 0; j < n; ++j) ts.push_back(Mm(i, j) * vvar(j, a));
      for (int b = 0; b < p; ++b) {
        ts.push_back(-(Tt(b, a) * vvar(i, b)));
        for (int j = 0; j < n; ++j) ts.push_back(-(Tm(b, j) * vvar(j, a) * vvar(i, b)));
      }
      for (int mu = 0; mu < p; ++mu) {
        std::vector<Expr> gr{nlc.M(i, a, mu)};
        for (int b = 0; b < p; ++b) {
          gr.push_back(g[Family::Gbar](b, mu, a) * vvar(i, b));
          for (int j = 0; j < n; ++j) gr.push_back(g[Family::Lbar](b, mu, j) * vvar(j, a) * vvar(i, b));
        }
        ts.push_back(X.Xt[mu] * make_add(std::move(gr)));
      }
      for (int m = 0; m < n; ++m) {
        std::vector<Expr> gr{-nlc.N(i, a, m), g[Family::G](i, m, a)};
        for (int j = 0; j < n; ++j) gr.push_back(g[Family::L](i, m, j) * vvar(j, a));
        ts.push_back(-(X.Xm[m] * make_add(std::move(gr))));
      }
      out.Xv(i, a) = make_add(std::move(ts));
    }
  return out;
}

enum class FrameDirection { NaturalToAdapted, AdaptedToNatural };

/// Re-expresses a vector field between the natural and adapted frames:
/// horizontal parts agree, vertical parts differ by M X^t + N X^m.
inline DVectorField frame_convert(const DVectorField& v, const NonlinearConnection& nlc, FrameDirection dir) {
  const Dims d = v.dims;
  const double s = dir == FrameDirection::NaturalToAdapted ? 1.0 : -1.0;
  auto out = v;
  for (int i = 0; i < d.n; ++i)
    for (int a = 0; a < d.p; ++a) {
      std::vector<Expr> ts{v.Xv(i, a)};
      for (int mu = 0; mu < d.p; ++mu) ts.push_back(s * (nlc.M(i, a, mu) * v.Xt[mu]));
      for (int m = 0; m < d.n; ++m) ts.push_back(s * (nlc.N(i, a, m) * v.Xm[m]));
      out.Xv(i, a) = make_add(std::move(ts));
    }
  return out;
}

/// Vertical adapted components for the Berwald connection of (h, phi), from
/// the metric derivatives X^i_{//a} = dX^i/dt^a, X^i_{||j} = dX^i/dx^j +
/// gamma^i_{mj} X^m, X^b_{//a} = dX^b/dt^a + H^b_{ma} X^m, X^b_{||j} = dX^b/dx^j.
inline ExprArray berwald_prolong(const BaseVectorField& X, const ChristoffelData& cd) {
  X.validate();
  const Dims d = X.dims;
  const int p = d.p, n = d.n;
  ExprArray out({n, p});
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < p; ++a) {
      std::vector<Expr> ts{diff(X.Xm[i], Variable::t(a))};
      for (int j = 0; j < n; ++j) {
        std::vector<Expr> xj{diff(X.Xm[i], Variable::x(j))};
        for (int m = 0; m < n; ++m) xj.push_back(cd.gamma(i, m, j) * X.Xm[m]);
        ts.push_back(make_add(std::move(xj)) * vvar(j, a));
      }
      for (int b = 0; b < p; ++b) {
        std::vector<Expr> tb{diff(X.Xt[b], Variable::t(a))};
        for (int mu = 0; mu < p; ++mu) tb.push_back(cd.H(b, mu, a) * X.Xt[mu]);
        ts.push_back(-(make_add(std::move(tb)) * vvar(i, b)));
        for (int j = 0; j < n; ++j) ts.push_back(-(diff(X.Xt[b], Variable::x(j)) * vvar(j, a) * vvar(i, b)));
      }
      out(i, a) = make_add(std::move(ts));
    }
  return out;
}

/// Geometric minus Olver-plus-shift, componentwise over the vertical block.
inline CheckResult check_prolongation_relation(const BaseVectorField& X, const GammaConnection& g,
                                               const NonlinearConnection& nlc, const std::vector<Binding>& pts,
                                               double tol, const std::string& id = "prolong.relation") {
  auto Y = geometric_prolong(X, g, nlc);
  auto Z = frame_convert(olver_prolong(X), nlc, FrameDirection::NaturalToAdapted);
  std::vector<Expr> res;
  for (std::size_t k = 0; k < Y.Xv.size(); ++k) res.push_back(Y.Xv.flat(k) - Z.Xv.flat(k));
  return residual_check(id, "Y", res, pts, tol);
}

}  // namespace jetgeom
