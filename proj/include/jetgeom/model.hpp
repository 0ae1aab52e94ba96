#pragma once

// The manifold pair (T, M) with metrics h(t) and phi(x), their Levi-Civita
// Christoffel symbols and metric curvature tensors.
//
// The metrics are only required to be invertible on the sampling box; the
// signature is never used, so "pseudo-Riemannian" metrics are accepted as is.

#include <functional>
#include <string>

#include "jetgeom/array.hpp"
#include "jetgeom/expr.hpp"
#include "jetgeom/sampling.hpp"

namespace jetgeom {

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Determinant by cofactor expansion; square arrays up to 4x4.
inline Expr determinant(const ExprArray& m) {
  const int n = m.shape()[0];
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  Expr det;
  for (int c = 0; c < n; ++c) {
    if (m(0, c).is_zero()) continue;
    ExprArray minor({n - 1, n - 1});
    for (int r = 1; r < n; ++r)
      for (int k = 0, kk = 0; k < n; ++k) {
        if (k == c) continue;
        minor(r - 1, kk++) = m(r, k);
      }
    Expr term = m(0, c) * determinant(minor);
    det = (c % 2 == 0) ? det + term : det - term;
  }
  return det;
}

/// Symbolic inverse via the adjugate. Rejects sizes above 4.
inline ExprArray inverse(const ExprArray& m) {
  const int n = m.shape()[0];
  if (n > 4) throw ValidationError("symbolic inversion supports at most 4x4 matrices");
  ExprArray inv({n, n});
  Expr det = determinant(m);
  if (det.is_zero()) throw ValidationError("matrix is structurally singular");
  Expr inv_det = pow(det, Rational(-1));
  if (n == 1) {
    inv(0, 0) = inv_det;
    return inv;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      ExprArray minor({n - 1, n - 1});
      for (int r = 0, rr = 0; r < n; ++r) {
        if (r == j) continue;
        for (int c = 0, cc = 0; c < n; ++c) {
          if (c == i) continue;
          minor(rr, cc++) = m(r, c);
        }
        ++rr;
      }
      Expr cof = determinant(minor);
      if ((i + j) % 2 == 1) cof = -cof;
      inv(i, j) = cof * inv_det;
    }
  return inv;
}

struct JetModel {
  Dims dims;
  ExprArray h;    // [alpha][beta], functions of t only
  ExprArray phi;  // [i][j], functions of x only

  JetModel() = default;
  JetModel(Dims d, ExprArray h_, ExprArray phi_) : dims(d), h(std::move(h_)), phi(std::move(phi_)) {
    validate();
  }

  static JetModel flat(Dims d) {
    ExprArray h({d.p, d.p}), phi({d.n, d.n});
    for (int a = 0; a < d.p; ++a) h(a, a) = Expr(1.0);
    for (int i = 0; i < d.n; ++i) phi(i, i) = Expr(1.0);
    return {d, h, phi};
  }

  void validate() const {
    if (dims.p < 1 || dims.n < 1) throw ValidationError("dimensions must be positive");
    if (dims.p > 4 || dims.n > 4) throw ValidationError("dimensions above 4 are not supported");
    check_metric(h, dims.p, VarKind::temporal, "h");
    check_metric(phi, dims.n, VarKind::spatial, "phi");
  }

  /// True when both metrics have |det| > 1e-12 at the point.
  bool invertible_at(const Binding& b) const {
    return std::fabs(eval(determinant(h), b)) > 1e-12 && std::fabs(eval(determinant(phi), b)) > 1e-12;
  }

 private:
  static void check_metric(const ExprArray& g, int size, VarKind allowed, const std::string& name) {
    if (g.rank() != 2 || g.shape()[0] != size || g.shape()[1] != size)
      throw ValidationError(name + " has wrong shape");
    for (int a = 0; a < size; ++a)
      for (int b = 0; b < size; ++b) {
        if (!same(g(a, b), g(b, a))) throw ValidationError(name + " is not symmetric");
        for (const auto& v : variables(g(a, b)))
          if (v.kind != allowed)
            throw ValidationError(name + " depends on " + v.name());
      }
  }
};

struct ChristoffelData {
  ExprArray H;      // H^g_{ab}  as [g][a][b]
  ExprArray gamma;  // gamma^k_{ij} as [k][i][j]
};

struct MetricCurvature {
  ExprArray Hcurv;  // H^d_{abc}  as [d][a][b][c]
  ExprArray r;      // r^l_{ijk}  as [l][i][j][k]
};

namespace detail {

// Levi-Civita symbols of g with coordinates coord(0..size-1).
inline ExprArray levi_civita(const ExprArray& g, int size, const std::function<Variable(int)>& coord) {
  ExprArray ginv = inverse(g);
  ExprArray dg({size, size, size});  // dg[m][a][b] = d_m g_ab
  for (int m = 0; m < size; ++m)
    for (int a = 0; a < size; ++a)
      for (int b = 0; b < size; ++b) dg(m, a, b) = diff(g(a, b), coord(m));
  ExprArray out({size, size, size});
  for (int c = 0; c < size; ++c)
    for (int a = 0; a < size; ++a)
      for (int b = a; b < size; ++b) {
        std::vector<Expr> terms;
        for (int m = 0; m < size; ++m) {
          Expr bracket = dg(a, m, b) + dg(b, m, a) - dg(m, a, b);
          if (bracket.is_zero() || ginv(c, m).is_zero()) continue;
          terms.push_back(Expr(0.5) * ginv(c, m) * bracket);
        }
        out(c, a, b) = make_add(std::move(terms));
        out(c, b, a) = out(c, a, b);
      }
  return out;
}

// R^d_{abc} = d_c G^d_{ab} - d_b G^d_{ac} + G^m_{ab} G^d_{mc} - G^m_{ac} G^d_{mb}
inline ExprArray riemann(const ExprArray& G, int size, const std::function<Variable(int)>& coord) {
  ExprArray out({size, size, size, size});
  for (int d = 0; d < size; ++d)
    for (int a = 0; a < size; ++a)
      for (int b = 0; b < size; ++b)
        for (int c = b + 1; c < size; ++c) {
          std::vector<Expr> terms{diff(G(d, a, b), coord(c)), -diff(G(d, a, c), coord(b))};
          for (int m = 0; m < size; ++m) {
            terms.push_back(G(m, a, b) * G(d, m, c));
            terms.push_back(-(G(m, a, c) * G(d, m, b)));
          }
          out(d, a, b, c) = make_add(std::move(terms));
          out(d, a, c, b) = -out(d, a, b, c);
        }
  return out;
}

}  // namespace detail

inline ChristoffelData christoffel(const JetModel& model) {
  const Dims d = model.dims;
  return {detail::levi_civita(model.h, d.p, Variable::t),
          detail::levi_civita(model.phi, d.n, Variable::x)};
}

/// Curvature of each metric with the sign that makes the Berwald
/// connection's h_T and h_M curvature blocks equal H and r exactly:
///   r^l_{ijk} = d_k gamma^l_{ij} - d_j gamma^l_{ik}
///             + gamma^m_{ij} gamma^l_{mk} - gamma^m_{ik} gamma^l_{mj}
/// (the negative of the textbook R^l_{ijk}); likewise for H.
inline MetricCurvature metric_curvature(const ChristoffelData& cd) {
  const int p = cd.H.shape()[0];
  const int n = cd.gamma.shape()[0];
  return {detail::riemann(cd.H, p, Variable::t), detail::riemann(cd.gamma, n, Variable::x)};
}

}  // namespace jetgeom
