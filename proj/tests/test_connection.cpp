#include <gtest/gtest.h>

#include "helpers.hpp"
#include "jetgeom/connection.hpp"
#include "jetgeom/parse.hpp"

using namespace jetgeom;
using namespace testing_helpers;

namespace {

const Dims d12{1, 2};
const Dims d22{2, 2};

// Pulled-back metric g~ = g(y(y~)) dy/dy~ dy/dy~ in the new coordinates.
ExprArray pull_back(const ExprArray& g, const std::vector<Expr>& inverse, VarKind kind) {
  const int n = static_cast<int>(inverse.size());
  auto var = [&](int k) { return kind == VarKind::temporal ? Variable::t(k) : Variable::x(k); };
  auto sub = [&](const Expr& e) {
    return substitute(e, [&](const Variable& v) -> std::optional<Expr> {
      if (v.kind == kind) return inverse[kind == VarKind::temporal ? v.temporal : v.spatial];
      return std::nullopt;
    });
  };
  ExprArray out({n, n});
  for (int m = 0; m < n; ++m)
    for (int l = m; l < n; ++l) {
      std::vector<Expr> ts;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) ts.push_back(sub(g(a, b)) * diff(inverse[a], var(m)) * diff(inverse[b], var(l)));
      out(m, l) = make_add(std::move(ts));
      out(l, m) = out(m, l);
    }
  return out;
}

bool equivalent_new(const JetChange& jc, const Expr& a, const Expr& b, const SampleConfig& cfg = {}) {
  return equivalent(jc.to_old(a), jc.to_old(b), jc.dims(), cfg);
}

bool arrays_equivalent_new(const JetChange& jc, const ExprArray& a, const ExprArray& b,
                           const SampleConfig& cfg = {}) {
  return all_equivalent(jc.to_old(a), jc.to_old(b), jc.dims(), cfg);
}

}  // namespace

TEST(CanonicalNlc, Flat) {
  auto nlc = canonical_nlc(christoffel(JetModel::flat({2, 3})));
  EXPECT_TRUE(nlc.M.structurally_zero());
  EXPECT_TRUE(nlc.N.structurally_zero());
  EXPECT_EQ(nlc.M.shape(), (std::vector<int>{3, 2, 2}));
  EXPECT_EQ(nlc.N.shape(), (std::vector<int>{3, 2, 3}));
}

TEST(CanonicalNlc, Sphere) {
  auto nlc = canonical_nlc(christoffel(sphere_model()));
  EXPECT_TRUE(equivalent(nlc.N(0, 0, 1), -sin(xvar(0)) * cos(xvar(0)) * vvar(1, 0), d12, sphere_box()));
  EXPECT_TRUE(nlc.M.structurally_zero());
}

TEST(CanonicalNlc, ExponentialTemporal) {
  auto nlc = canonical_nlc(christoffel(exponential_model()));
  EXPECT_TRUE(equivalent(nlc.M(0, 0, 0), -vvar(0, 0), {1, 1}));
}

TEST(AdaptedFrame, ZeroNlcGivesPartials) {
  FrameOperators ops(NonlinearConnection::zero(d22));
  Rng rng(1);
  for (int k = 0; k < 5; ++k) {
    Expr f = random_poly(d22, rng, 4, 3);
    for (int a = 0; a < 2; ++a) EXPECT_TRUE(same(ops.delta_t(a, f), diff(f, Variable::t(a))));
    for (int i = 0; i < 2; ++i) EXPECT_TRUE(same(ops.delta_x(i, f), diff(f, Variable::x(i))));
  }
}

TEST(AdaptedFrame, DeltaOfVelocityCoordinate) {
  Rng rng(2);
  auto nlc = random_nlc(d22, rng);
  FrameOperators ops(nlc);
  for (int a = 0; a < 2; ++a)
    for (int j = 0; j < 2; ++j)
      for (int b = 0; b < 2; ++b) {
        EXPECT_TRUE(same(ops.delta_t(a, vvar(j, b)), -nlc.M(j, b, a)));
        EXPECT_TRUE(same(ops.delta_x(a, vvar(j, b)), -nlc.N(j, b, a)));
      }
}

TEST(AdaptedFrame, FrameCoframeDuality) {
  Rng rng(3);
  for (Dims d : {Dims{1, 1}, Dims{1, 2}, Dims{2, 2}, Dims{2, 3}}) {
    FrameOperators ops(random_nlc(d, rng));
    const int D = d.frame();
    auto pts = sample_points(d, {});
    for (int K = 0; K < D; ++K) {
      auto w = ops.coframe(K);
      for (int A = 0; A < D; ++A) {
        auto x = ops.natural(A);
        std::vector<Expr> ts;
        for (int c = 0; c < D; ++c) ts.push_back(w[c] * x[c]);
        EXPECT_TRUE(equivalent(make_add(std::move(ts)), Expr(K == A ? 1.0 : 0.0), d));
      }
    }
  }
}

TEST(AdaptedFrame, NaturalComponentsMatchOperators) {
  Rng rng(4);
  auto nlc = random_nlc(d22, rng);
  FrameOperators ops(nlc);
  const Frame& fr = ops.frame();
  for (int k = 0; k < 3; ++k) {
    Expr f = random_poly(d22, rng, 4, 3);
    for (int A = 0; A < fr.size(); ++A) {
      auto c = ops.natural(A);
      std::vector<Expr> ts;
      for (int B = 0; B < fr.size(); ++B) ts.push_back(c[B] * diff(f, fr.coordinate(B)));
      EXPECT_TRUE(equivalent(make_add(std::move(ts)), ops.apply(A, f), d22));
    }
  }
  // to_natural and from_natural are inverse
  std::vector<Expr> v;
  for (int A = 0; A < fr.size(); ++A) v.push_back(random_poly(d22, rng));
  auto back = ops.from_natural(ops.to_natural(v));
  for (int A = 0; A < fr.size(); ++A) EXPECT_TRUE(equivalent(back[A], v[A], d22));
}

TEST(Berwald, FlatIsZero) {
  auto g = berwald(christoffel(JetModel::flat({2, 2})));
  for (auto f : kFamilies) {
    EXPECT_TRUE(g[f].structurally_zero()) << family_name(f);
    EXPECT_EQ(g[f].shape(), family_shape(f, {2, 2}));
  }
}

TEST(Berwald, SphereComponents) {
  auto cd = christoffel(sphere_model());
  auto g = berwald(cd);
  EXPECT_TRUE(same(g[Family::Lv](0, 0, 0, 1, 1), cd.gamma(0, 1, 1)));
  for (auto f : {Family::G, Family::Lbar, Family::Cbar, Family::C, Family::Cv})
    EXPECT_TRUE(g[f].structurally_zero()) << family_name(f);
}

TEST(Berwald, TemporalFamilies) {
  Dims d{2, 2};
  ExprArray h({2, 2}), phi({2, 2});
  h(0, 0) = parse("2 + t2^2", d);
  h(1, 1) = parse("1 + t1^2", d);
  phi(0, 0) = phi(1, 1) = 1.0;
  auto cd = christoffel({d, h, phi});
  auto g = berwald(cd);
  for (int k = 0; k < 2; ++k)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 2; ++i)
          for (int a = 0; a < 2; ++a) {
            Expr expect = k == i ? -cd.H(b, a, c) : Expr(0.0);
            EXPECT_TRUE(same(g[Family::Gv](k, b, c, i, a), expect));
          }
  EXPECT_TRUE(g[Family::Gbar].structurally_zero() == cd.H.structurally_zero());
}

TEST(FrameTable, MatchesFamilyLayout) {
  Rng rng(5);
  auto g = random_gamma(d22, rng, 1);
  auto table = frame_coefficients(g);
  Frame fr{d22};
  // nabla_{d/dx^j_c} d/dx^i_b = Cv^{(k)(b)(c)}_{(a)(i)(j)} d/dx^k_a
  for (int k = 0; k < 2; ++k)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
          for (int c = 0; c < 2; ++c)
            for (int j = 0; j < 2; ++j)
              EXPECT_TRUE(same(table(fr.v(j, c), fr.v(i, b), fr.v(k, a)), g[Family::Cv](k, b, a, i, c, j)));
  // nabla_{d/dt^g} d/dx^i_b = Gv^{(k)(b)}_{(a)(i)g} d/dx^k_a
  for (int k = 0; k < 2; ++k)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
          for (int ga = 0; ga < 2; ++ga)
            EXPECT_TRUE(same(table(fr.t(ga), fr.v(i, b), fr.v(k, a)), g[Family::Gv](k, b, a, i, ga)));
  // nabla_{d/dx^j_g} d/dt^b = Cbar^{a(g)}_{b(j)} d/dt^a
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int ga = 0; ga < 2; ++ga)
        for (int j = 0; j < 2; ++j)
          EXPECT_TRUE(same(table(fr.v(j, ga), fr.t(b), fr.t(a)), g[Family::Cbar](a, b, ga, j)));
  // nabla_{d/dx^j} d/dx^i = L^k_{ij} d/dx^k; cross-block entries vanish
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        EXPECT_TRUE(same(table(fr.x(j), fr.x(i), fr.x(k)), g[Family::L](k, i, j)));
        EXPECT_TRUE(table(fr.x(j), fr.x(i), fr.t(k)).is_zero());
        EXPECT_TRUE(table(fr.x(j), fr.t(i), fr.v(k, 0)).is_zero());
      }
}

TEST(ChartChangeTest, RandomQuadraticIsConsistent) {
  for (Dims d : {Dims{1, 1}, Dims{1, 2}, Dims{2, 2}, Dims{2, 3}}) {
    auto c = random_quadratic_change(d, 17);
    EXPECT_NO_THROW(c.validate());
    EXPECT_TRUE(change_is_consistent(c, {}));
    EXPECT_TRUE(change_is_consistent(c, sphere_box()));
  }
}

TEST(ChartChangeTest, RejectsMixedChanges) {
  auto c = ChartChange::identity(d12);
  c.x_forward[0] = xvar(0) + tvar(0);
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_THROW(JetChange{c}, ValidationError);
  c = ChartChange::identity(d12);
  c.t_forward.pop_back();
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(TransformNlc, IdentityChange) {
  Rng rng(6);
  auto nlc = random_nlc(d22, rng);
  JetChange jc(ChartChange::identity(d22));
  auto out = transform_nlc(nlc, jc);
  EXPECT_TRUE(all_equivalent(out.M, nlc.M, d22));
  EXPECT_TRUE(all_equivalent(out.N, nlc.N, d22));
}

TEST(TransformNlc, ConstantLinearChangeOfFlatStaysZero) {
  Dims d{2, 2};
  auto c = ChartChange::identity(d);
  c.x_forward = {2 * xvar(0) + xvar(1), xvar(0) - xvar(1)};
  c.x_inverse = {(xvar(0) + xvar(1)) / 3, (xvar(0) - 2 * xvar(1)) / 3};
  c.t_forward = {tvar(0) + 3 * tvar(1), tvar(1)};
  c.t_inverse = {tvar(0) - 3 * tvar(1), tvar(1)};
  JetChange jc(c);
  auto out = transform_nlc(canonical_nlc(christoffel(JetModel::flat(d))), jc);
  EXPECT_TRUE(all_zero(out.M, d));
  EXPECT_TRUE(all_zero(out.N, d));
}

TEST(TransformNlc, RoundTrip) {
  Rng rng(7);
  auto nlc = random_nlc(d22, rng);
  auto c = random_quadratic_change(d22, 3);
  JetChange fwd(c), back(c.inverted());
  auto there = transform_nlc(nlc, fwd);
  auto again = transform_nlc(there, back);
  EXPECT_TRUE(all_equivalent(again.M, nlc.M, d22));
  EXPECT_TRUE(all_equivalent(again.N, nlc.N, d22));
}

TEST(TransformNlc, CanonicalOfPulledBackMetrics) {
  auto model = sphere_model(2);
  model.h(0, 0) = parse("2 + t2^2", model.dims);
  auto c = random_quadratic_change(model.dims, 11);
  JetChange jc(c);
  JetModel pulled(model.dims, pull_back(model.h, c.t_inverse, VarKind::temporal),
                  pull_back(model.phi, c.x_inverse, VarKind::spatial));
  auto expect = canonical_nlc(christoffel(pulled));
  auto got = transform_nlc(canonical_nlc(christoffel(model)), jc);
  EXPECT_TRUE(arrays_equivalent_new(jc, got.M, expect.M, sphere_box()));
  EXPECT_TRUE(arrays_equivalent_new(jc, got.N, expect.N, sphere_box()));
}

TEST(AdaptedFrame, TransformationLawUnderChartChange) {
  Rng rng(8);
  for (Dims d : {Dims{1, 2}, Dims{2, 2}}) {
    auto nlc = random_nlc(d, rng);
    JetChange jc(random_quadratic_change(d, 21));
    FrameOperators old_ops(nlc), new_ops(transform_nlc(nlc, jc));
    for (int k = 0; k < 3; ++k) {
      Expr f_new = random_poly(d, rng, 4, 2);
      Expr f = jc.to_old(f_new);
      for (int a = 0; a < d.p; ++a) {
        std::vector<Expr> ts;
        for (int b = 0; b < d.p; ++b) ts.push_back(jc.jt()(b, a) * jc.to_old(new_ops.delta_t(b, f_new)));
        EXPECT_TRUE(equivalent(old_ops.delta_t(a, f), make_add(std::move(ts)), d));
      }
      for (int i = 0; i < d.n; ++i) {
        std::vector<Expr> ts;
        for (int j = 0; j < d.n; ++j) ts.push_back(jc.jx()(j, i) * jc.to_old(new_ops.delta_x(j, f_new)));
        EXPECT_TRUE(equivalent(old_ops.delta_x(i, f), make_add(std::move(ts)), d));
      }
      for (int i = 0; i < d.n; ++i)
        for (int a = 0; a < d.p; ++a) {
          std::vector<Expr> ts;
          for (int j = 0; j < d.n; ++j)
            for (int b = 0; b < d.p; ++b)
              ts.push_back(jc.jx()(j, i) * jc.jt_inv()(a, b) * jc.to_old(new_ops.partial_v(j, b, f_new)));
          EXPECT_TRUE(equivalent(old_ops.partial_v(i, a, f), make_add(std::move(ts)), d));
        }
    }
  }
}

TEST(TransformGamma, IdentityChange) {
  Rng rng(9);
  auto g = random_gamma(d22, rng, 1);
  auto out = transform_gamma(g, JetChange(ChartChange::identity(d22)));
  for (auto f : kFamilies) EXPECT_TRUE(all_equivalent(out[f], g[f], d22)) << family_name(f);
}

TEST(TransformGamma, AffineTemporalChangeHasNoInhomogeneousTerm) {
  Dims d{1, 1};
  auto c = ChartChange::identity(d);
  c.t_forward = {3 * tvar(0) + 2};
  c.t_inverse = {(tvar(0) - 2) / 3};
  JetChange jc(c);
  auto out = transform_gamma(GammaConnection::zero(d), jc);
  EXPECT_TRUE(all_zero(out[Family::Gbar], d));
  EXPECT_TRUE(all_zero(out[Family::Gv], d));
  c.t_forward = {tvar(0) + tvar(0) * tvar(0) / 10};
  c.t_inverse = {(pow(1 + 0.4 * tvar(0), Rational(1, 2)) - 1) * 5};
  auto bent = transform_gamma(GammaConnection::zero(d), JetChange(c));
  EXPECT_FALSE(all_zero(bent[Family::Gbar], d));
}

TEST(TransformGamma, BerwaldOfPulledBackMetrics) {
  for (int p : {1, 2}) {
    auto model = sphere_model(p);
    if (p == 2) model.h(1, 1) = parse("1 + t1^2", model.dims);
    Dims d = model.dims;
    auto c = random_quadratic_change(d, 12);
    JetChange jc(c);
    JetModel pulled(d, pull_back(model.h, c.t_inverse, VarKind::temporal),
                    pull_back(model.phi, c.x_inverse, VarKind::spatial));
    auto expect = berwald(christoffel(pulled));
    auto got = transform_gamma(berwald(christoffel(model)), jc);
    for (auto f : kFamilies)
      EXPECT_TRUE(arrays_equivalent_new(jc, got[f], expect[f], sphere_box())) << family_name(f) << " p=" << p;
  }
}

TEST(TransformGamma, RoundTrip) {
  Rng rng(10);
  auto g = random_gamma(d22, rng, 1);
  auto c = random_quadratic_change(d22, 4);
  auto again = transform_gamma(transform_gamma(g, JetChange(c)), JetChange(c.inverted()));
  for (auto f : kFamilies) EXPECT_TRUE(all_equivalent(again[f], g[f], d22)) << family_name(f);
}

// Each law written directly in the implicit form old = F(new).
TEST(TransformGamma, NineLawsImplicitForm) {
  Rng rng(13);
  const Dims d = d22;
  const int p = d.p, n = d.n;
  auto g = random_gamma(d, rng, 1);
  auto c = random_quadratic_change(d, 5);
  JetChange jc(c);
  auto gn = transform_gamma(g, jc);
  for (auto f : kFamilies) gn[f] = jc.to_old(gn[f]);
  const auto &Jt = jc.jt(), &Ti = jc.jt_inv(), &Jx = jc.jx(), &Xi = jc.jx_inv();
  // second derivatives: of the forward maps in old coordinates, of the
  // inverse temporal map in new coordinates (then rewritten in old)
  auto d2t = [&](int e, int a, int b) { return diff(diff(c.t_forward[e], Variable::t(a)), Variable::t(b)); };
  auto d2x = [&](int r, int i, int j) { return diff(diff(c.x_forward[r], Variable::x(i)), Variable::x(j)); };
  auto d2ti = [&](int b, int m, int e) {
    return jc.to_old(diff(diff(c.t_inverse[b], Variable::t(m)), Variable::t(e)));
  };
  auto check = [&](const Expr& lhs, std::vector<Expr> rhs, const char* what) {
    EXPECT_TRUE(equivalent(lhs, make_add(std::move(rhs)), d)) << what;
  };
  auto delta = [](int a, int b) { return a == b ? 1.0 : 0.0; };

  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b)
      for (int e = 0; e < p; ++e) {
        std::vector<Expr> lhs, rhs{d2t(e, a, b)};
        for (int dl = 0; dl < p; ++dl) lhs.push_back(g[Family::Gbar](dl, a, b) * Jt(e, dl));
        for (int m = 0; m < p; ++m)
          for (int ga = 0; ga < p; ++ga) rhs.push_back(gn[Family::Gbar](e, m, ga) * Jt(m, a) * Jt(ga, b));
        check(make_add(std::move(lhs)), std::move(rhs), "Gbar");
      }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int ga = 0; ga < p; ++ga) {
        std::vector<Expr> rhs;
        for (int m = 0; m < n; ++m)
          for (int j = 0; j < n; ++j)
            for (int b = 0; b < p; ++b) rhs.push_back(gn[Family::G](m, j, b) * Xi(k, m) * Jx(j, i) * Jt(b, ga));
        check(g[Family::G](k, i, ga), std::move(rhs), "G");
      }
  // G^{(k)(b)}_{(ga)(i)al}, stored [k][b][ga][i][al]
  for (int k = 0; k < n; ++k)
    for (int b = 0; b < p; ++b)
      for (int ga = 0; ga < p; ++ga)
        for (int i = 0; i < n; ++i)
          for (int al = 0; al < p; ++al) {
            std::vector<Expr> rhs;
            for (int pp = 0; pp < n; ++pp)
              for (int et = 0; et < p; ++et)
                for (int ep = 0; ep < p; ++ep)
                  for (int j = 0; j < n; ++j)
                    for (int mu = 0; mu < p; ++mu)
                      rhs.push_back(gn[Family::Gv](pp, et, ep, j, mu) * Xi(k, pp) * Jt(ep, ga) * Jx(j, i) *
                                    Ti(b, et) * Jt(mu, al));
            if (k == i)
              for (int mu = 0; mu < p; ++mu)
                for (int ep = 0; ep < p; ++ep) rhs.push_back(Jt(mu, al) * Jt(ep, ga) * d2ti(b, mu, ep));
            check(g[Family::Gv](k, b, ga, i, al), std::move(rhs), "Gv");
          }
  for (int ga = 0; ga < p; ++ga)
    for (int b = 0; b < p; ++b)
      for (int l = 0; l < n; ++l) {
        std::vector<Expr> lhs, rhs;
        for (int j = 0; j < n; ++j) lhs.push_back(g[Family::Lbar](ga, b, j) * Xi(j, l));
        for (int et = 0; et < p; ++et)
          for (int mu = 0; mu < p; ++mu) rhs.push_back(gn[Family::Lbar](et, mu, l) * Ti(ga, et) * Jt(mu, b));
        check(make_add(std::move(lhs)), std::move(rhs), "Lbar");
      }
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        std::vector<Expr> lhs, rhs{d2x(r, i, j)};
        for (int m = 0; m < n; ++m) lhs.push_back(g[Family::L](m, i, j) * Jx(r, m));
        for (int pp = 0; pp < n; ++pp)
          for (int q = 0; q < n; ++q) rhs.push_back(gn[Family::L](r, pp, q) * Jx(pp, i) * Jx(q, j));
        check(make_add(std::move(lhs)), std::move(rhs), "L");
      }
  // L^{(k)(b)}_{(ga)(i)j}, stored [k][b][ga][i][j]
  for (int k = 0; k < n; ++k)
    for (int b = 0; b < p; ++b)
      for (int ga = 0; ga < p; ++ga)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            std::vector<Expr> rhs;
            for (int r = 0; r < n; ++r)
              for (int et = 0; et < p; ++et)
                for (int nu = 0; nu < p; ++nu)
                  for (int pp = 0; pp < n; ++pp)
                    for (int l = 0; l < n; ++l)
                      rhs.push_back(gn[Family::Lv](r, et, nu, pp, l) * Xi(k, r) * Jt(nu, ga) * Jx(pp, i) *
                                    Ti(b, et) * Jx(l, j));
            for (int r = 0; r < n; ++r) rhs.push_back(delta(b, ga) * Xi(k, r) * d2x(r, i, j));
            check(g[Family::Lv](k, b, ga, i, j), std::move(rhs), "Lv");
          }
  // Cbar^{ga(al)}_{b(i)}, stored [ga][b][al][i]
  for (int ga = 0; ga < p; ++ga)
    for (int b = 0; b < p; ++b)
      for (int al = 0; al < p; ++al)
        for (int i = 0; i < n; ++i) {
          std::vector<Expr> rhs;
          for (int mu = 0; mu < p; ++mu)
            for (int dl = 0; dl < p; ++dl)
              for (int ep = 0; ep < p; ++ep)
                for (int j = 0; j < n; ++j)
                  rhs.push_back(gn[Family::Cbar](mu, ep, dl, j) * Ti(ga, mu) * Jt(ep, b) * Jx(j, i) * Ti(al, dl));
          check(g[Family::Cbar](ga, b, al, i), std::move(rhs), "Cbar");
        }
  // C^{k(al)}_{i(j)}, stored [k][i][al][j]
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int al = 0; al < p; ++al)
        for (int j = 0; j < n; ++j) {
          std::vector<Expr> rhs;
          for (int s = 0; s < n; ++s)
            for (int pp = 0; pp < n; ++pp)
              for (int b = 0; b < p; ++b)
                for (int r = 0; r < n; ++r)
                  rhs.push_back(gn[Family::C](s, pp, b, r) * Xi(k, s) * Jx(pp, i) * Jx(r, j) * Ti(al, b));
          check(g[Family::C](k, i, al, j), std::move(rhs), "C");
        }
  // C^{(k)(b)(al)}_{(ga)(i)(j)}, stored [k][b][ga][i][al][j]
  for (int k = 0; k < n; ++k)
    for (int b = 0; b < p; ++b)
      for (int ga = 0; ga < p; ++ga)
        for (int i = 0; i < n; ++i)
          for (int al = 0; al < p; ++al)
            for (int j = 0; j < n; ++j) {
              std::vector<Expr> rhs;
              for (int r = 0; r < n; ++r)
                for (int mu = 0; mu < p; ++mu)
                  for (int ep = 0; ep < p; ++ep)
                    for (int pp = 0; pp < n; ++pp)
                      for (int nu = 0; nu < p; ++nu)
                        for (int q = 0; q < n; ++q)
                          rhs.push_back(gn[Family::Cv](r, mu, ep, pp, nu, q) * Xi(k, r) * Jt(ep, ga) * Jx(pp, i) *
                                        Ti(b, mu) * Jx(q, j) * Ti(al, nu));
              check(g[Family::Cv](k, b, ga, i, al, j), std::move(rhs), "Cv");
            }
}
