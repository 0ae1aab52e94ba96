#include <gtest/gtest.h>

#include "helpers.hpp"
#include "jetgeom/calculus.hpp"

using namespace jetgeom;
using namespace testing_helpers;

namespace {

const Dims d22{2, 2};
const Dims d12{1, 2};

Signature random_signature(Rng& rng, int max_rank) {
  static const Space spaces[] = {Space::T, Space::M, Space::V};
  Signature sig;
  int r = rng.integer(0, max_rank);
  for (int k = 0; k < r; ++k) sig.push_back({spaces[rng.integer(0, 2)], rng.integer(0, 1) == 1});
  return sig;
}

DTensor random_tensor(Dims d, Signature sig, Rng& rng) {
  DTensor t(d, std::move(sig));
  for (std::size_t k = 0; k < t.size(); ++k) t.components().flat(k) = random_poly(d, rng, 2);
  return t;
}

bool tensors_equivalent(const DTensor& a, const DTensor& b, const SampleConfig& cfg = {}) {
  return a.signature() == b.signature() && all_equivalent(a.components(), b.components(), a.dims(), cfg);
}

// Moves slot `from` of a tensor to the end.
DTensor move_slot_last(const DTensor& D, std::size_t from) {
  Signature sig;
  for (std::size_t s = 0; s < D.rank(); ++s)
    if (s != from) sig.push_back(D.signature()[s]);
  sig.push_back(D.signature()[from]);
  DTensor out(D.dims(), sig);
  for (std::size_t k = 0; k < D.size(); ++k) {
    auto idx = D.components().unflatten(k);
    std::vector<int> j;
    for (std::size_t s = 0; s < idx.size(); ++s)
      if (s != from) j.push_back(idx[s]);
    j.push_back(idx[from]);
    out.at(j) = D.components().flat(k);
  }
  return out;
}

struct Setup {
  Dims d;
  GammaConnection g;
  NonlinearConnection nlc;
};

std::vector<Setup> setups() {
  Rng rng(100);
  std::vector<Setup> out;
  for (Dims d : {Dims{1, 1}, Dims{1, 2}, Dims{2, 2}}) out.push_back({d, random_gamma(d, rng, 1), random_nlc(d, rng)});
  auto cd = christoffel(sphere_model());
  out.push_back({d12, berwald(cd), canonical_nlc(cd)});
  return out;
}

}  // namespace

TEST(CovariantDerivative, ScalarSpecializationIsStructural) {
  Rng rng(1);
  for (const auto& [d, g, nlc] : setups()) {
    for (int k = 0; k < 3; ++k) {
      Expr f = random_poly(d, rng, 4, 3);
      auto F = DTensor::scalar(d, f);
      auto T = cov_deriv_T(F, g, nlc), M = cov_deriv_M(F, g, nlc), V = cov_deriv_v(F, g, nlc);
      for (int e = 0; e < d.p; ++e) {
        std::vector<Expr> ts{diff(f, Variable::t(e))};
        for (int kk = 0; kk < d.n; ++kk)
          for (int ga = 0; ga < d.p; ++ga) ts.push_back(-(nlc.M(kk, ga, e) * diff(f, Variable::v(kk, ga))));
        EXPECT_TRUE(same(T(e), make_add(std::move(ts))));
      }
      for (int p = 0; p < d.n; ++p) {
        std::vector<Expr> ts{diff(f, Variable::x(p))};
        for (int kk = 0; kk < d.n; ++kk)
          for (int ga = 0; ga < d.p; ++ga) ts.push_back(-(nlc.N(kk, ga, p) * diff(f, Variable::v(kk, ga))));
        EXPECT_TRUE(same(M(p), make_add(std::move(ts))));
      }
      for (int p = 0; p < d.n; ++p)
        for (int e = 0; e < d.p; ++e) EXPECT_TRUE(same(V(p * d.p + e), diff(f, Variable::v(p, e))));
    }
  }
}

TEST(CovariantDerivative, ZeroConnectionConstantTensor) {
  Dims d = d22;
  auto g = GammaConnection::zero(d);
  auto nlc = NonlinearConnection::zero(d);
  DTensor D(d, {IndexSlot::up(Space::V), IndexSlot::down(Space::T)});
  for (std::size_t k = 0; k < D.size(); ++k) D.components().flat(k) = static_cast<double>(k) + 1.5;
  for (auto* op : {&cov_deriv_T, &cov_deriv_M, &cov_deriv_v})
    EXPECT_TRUE((*op)(D, g, nlc).components().structurally_zero());
}

TEST(CovariantDerivative, VectorFieldComponentsExplicit) {
  Rng rng(2);
  for (const auto& [d, g, nlc] : setups()) {
    FrameOperators ops(nlc);
    auto X = DVectorField::zero(d);
    for (auto& e : X.Xt) e = random_poly(d, rng);
    for (auto& e : X.Xm) e = random_poly(d, rng);
    for (std::size_t k = 0; k < X.Xv.size(); ++k) X.Xv.flat(k) = random_poly(d, rng);
    const int p = d.p, n = d.n;
    auto Tt = cov_deriv_T(X.part(Space::T), g, nlc), Tm = cov_deriv_T(X.part(Space::M), g, nlc),
         Tv = cov_deriv_T(X.part(Space::V), g, nlc);
    auto Mt = cov_deriv_M(X.part(Space::T), g, nlc), Mm = cov_deriv_M(X.part(Space::M), g, nlc),
         Mv = cov_deriv_M(X.part(Space::V), g, nlc);
    auto Vt = cov_deriv_v(X.part(Space::T), g, nlc), Vm = cov_deriv_v(X.part(Space::M), g, nlc),
         Vv = cov_deriv_v(X.part(Space::V), g, nlc);
    for (int e = 0; e < p; ++e) {
      for (int a = 0; a < p; ++a) {
        Expr s = ops.delta_t(e, X.Xt[a]);
        for (int mu = 0; mu < p; ++mu) s = s + X.Xt[mu] * g[Family::Gbar](a, mu, e);
        EXPECT_TRUE(equivalent(Tt(a, e), s, d));
      }
      for (int i = 0; i < n; ++i) {
        Expr s = ops.delta_t(e, X.Xm[i]);
        for (int m = 0; m < n; ++m) s = s + X.Xm[m] * g[Family::G](i, m, e);
        EXPECT_TRUE(equivalent(Tm(i, e), s, d));
      }
      for (int i = 0; i < n; ++i)
        for (int a = 0; a < p; ++a) {
          Expr s = ops.delta_t(e, X.Xv(i, a));
          for (int m = 0; m < n; ++m)
            for (int mu = 0; mu < p; ++mu) s = s + X.Xv(m, mu) * g[Family::Gv](i, mu, a, m, e);
          EXPECT_TRUE(equivalent(Tv(i * p + a, e), s, d));
        }
    }
    for (int q = 0; q < n; ++q) {
      for (int a = 0; a < p; ++a) {
        Expr s = ops.delta_x(q, X.Xt[a]);
        for (int mu = 0; mu < p; ++mu) s = s + X.Xt[mu] * g[Family::Lbar](a, mu, q);
        EXPECT_TRUE(equivalent(Mt(a, q), s, d));
      }
      for (int i = 0; i < n; ++i) {
        Expr s = ops.delta_x(q, X.Xm[i]);
        for (int m = 0; m < n; ++m) s = s + X.Xm[m] * g[Family::L](i, m, q);
        EXPECT_TRUE(equivalent(Mm(i, q), s, d));
      }
      for (int i = 0; i < n; ++i)
        for (int a = 0; a < p; ++a) {
          Expr s = ops.delta_x(q, X.Xv(i, a));
          for (int m = 0; m < n; ++m)
            for (int mu = 0; mu < p; ++mu) s = s + X.Xv(m, mu) * g[Family::Lv](i, mu, a, m, q);
          EXPECT_TRUE(equivalent(Mv(i * p + a, q), s, d));
        }
    }
    for (int q = 0; q < n; ++q)
      for (int e = 0; e < p; ++e) {
        const int dir = q * p + e;
        for (int a = 0; a < p; ++a) {
          Expr s = diff(X.Xt[a], Variable::v(q, e));
          for (int mu = 0; mu < p; ++mu) s = s + X.Xt[mu] * g[Family::Cbar](a, mu, e, q);
          EXPECT_TRUE(equivalent(Vt(a, dir), s, d));
        }
        for (int i = 0; i < n; ++i) {
          Expr s = diff(X.Xm[i], Variable::v(q, e));
          for (int m = 0; m < n; ++m) s = s + X.Xm[m] * g[Family::C](i, m, e, q);
          EXPECT_TRUE(equivalent(Vm(i, dir), s, d));
        }
        for (int i = 0; i < n; ++i)
          for (int a = 0; a < p; ++a) {
            Expr s = diff(X.Xv(i, a), Variable::v(q, e));
            for (int m = 0; m < n; ++m)
              for (int mu = 0; mu < p; ++mu) s = s + X.Xv(m, mu) * g[Family::Cv](i, mu, a, m, e, q);
            EXPECT_TRUE(equivalent(Vv(i * p + a, dir), s, d));
          }
      }
  }
}

TEST(CovariantDerivative, LowerSlotsCarryMinusSign) {
  // A 1-form omega_a dt^a: omega_{a/e} = delta omega_a / delta t^e - omega_m Gbar^m_{ae}
  Rng rng(3);
  Dims d = d22;
  auto g = random_gamma(d, rng, 1);
  auto nlc = random_nlc(d, rng);
  FrameOperators ops(nlc);
  DTensor w = random_tensor(d, {IndexSlot::down(Space::T)}, rng);
  DTensor v = random_tensor(d, {IndexSlot::down(Space::V)}, rng);
  auto wt = cov_deriv_T(w, g, nlc);
  auto vm = cov_deriv_M(v, g, nlc);
  for (int a = 0; a < 2; ++a)
    for (int e = 0; e < 2; ++e) {
      Expr s = ops.delta_t(e, w(a));
      for (int m = 0; m < 2; ++m) s = s - w(m) * g[Family::Gbar](m, a, e);
      EXPECT_TRUE(equivalent(wt(a, e), s, d));
    }
  // (dl) over (l) lower pair: - v_{(m)}^{(mu)} Lv^{(m)(dl)}_{(mu)(l)q}
  for (int l = 0; l < 2; ++l)
    for (int dl = 0; dl < 2; ++dl)
      for (int q = 0; q < 2; ++q) {
        Expr s = ops.delta_x(q, v(l * 2 + dl));
        for (int m = 0; m < 2; ++m)
          for (int mu = 0; mu < 2; ++mu) s = s - v(m * 2 + mu) * g[Family::Lv](m, dl, mu, l, q);
        EXPECT_TRUE(equivalent(vm(l * 2 + dl, q), s, d));
      }
}

TEST(DTensorOps, KroneckerTraces) {
  Dims d{2, 3};
  EXPECT_TRUE(same(contract(DTensor::kronecker(d, Space::M), 0, 1)(), Expr(3.0)));
  EXPECT_TRUE(same(contract(DTensor::kronecker(d, Space::T), 0, 1)(), Expr(2.0)));
  EXPECT_TRUE(same(contract(DTensor::kronecker(d, Space::V), 0, 1)(), Expr(6.0)));
}

TEST(DTensorOps, ContractRejectsNonDualSlots) {
  Dims d = d22;
  DTensor a(d, {IndexSlot::up(Space::T), IndexSlot::down(Space::M)});
  EXPECT_THROW(contract(a, 0, 1), Error);
  DTensor b(d, {IndexSlot::up(Space::V), IndexSlot::up(Space::V)});
  EXPECT_THROW(contract(b, 0, 1), Error);
  EXPECT_THROW(contract(b, 0, 0), Error);
  EXPECT_THROW(add(a, b), Error);
}

TEST(DTensorOps, ShapesFollowSignature) {
  Dims d{2, 3};
  DTensor t(d, {IndexSlot::up(Space::V), IndexSlot::down(Space::T), IndexSlot::down(Space::M)});
  EXPECT_EQ(t.size(), 6u * 2u * 3u);
  EXPECT_EQ(DTensor::scalar(d, 2.0).size(), 1u);
  auto D = cov_deriv_v(t, GammaConnection::zero(d), NonlinearConnection::zero(d));
  EXPECT_EQ(D.signature().back(), IndexSlot::down(Space::V));
  EXPECT_EQ(D.size(), t.size() * 6u);
}

// Additivity, Leibniz and contraction commutation on random tensors.
TEST(DTensorOps, ConnectionProperties) {
  Rng rng(4);
  for (const auto& [d, g, nlc] : setups()) {
    CovariantDerivative cd(g, nlc);
    for (int trial = 0; trial < 10; ++trial) {
      Signature sig = random_signature(rng, 2);
      DTensor D = random_tensor(d, sig, rng), F = random_tensor(d, sig, rng);
      for (Space s : {Space::T, Space::M, Space::V}) {
        EXPECT_TRUE(tensors_equivalent(cd.along(add(D, F), s), add(cd.along(D, s), cd.along(F, s))));
        // Leibniz: product of two rank-1 factors
        DTensor a = random_tensor(d, random_signature(rng, 1), rng);
        DTensor b = random_tensor(d, random_signature(rng, 1), rng);
        DTensor lhs = cd.along(tensor_product(a, b), s);
        DTensor da = cd.along(a, s), db = cd.along(b, s);
        DTensor r1 = tensor_product(a, db);
        DTensor r2 = move_slot_last(tensor_product(da, b), a.rank());
        EXPECT_TRUE(tensors_equivalent(lhs, add(r2, r1)));
      }
      // contraction of a dual pair commutes with the derivative
      static const Space spaces[] = {Space::T, Space::M, Space::V};
      Space sp = spaces[rng.integer(0, 2)];
      DTensor C = random_tensor(d, {IndexSlot::up(sp), IndexSlot::down(sp)}, rng);
      for (Space s : {Space::T, Space::M, Space::V}) {
        DTensor lhs = cd.along(contract(C, 0, 1), s);
        DTensor rhs = contract(cd.along(C, s), 0, 1);
        EXPECT_TRUE(tensors_equivalent(lhs, rhs));
      }
    }
  }
}

TEST(DTensorOps, Tensoriality) {
  Rng rng(5);
  for (Dims d : {d12, d22}) {
    auto g = random_gamma(d, rng, 1);
    auto nlc = random_nlc(d, rng);
    JetChange jc(random_quadratic_change(d, 31));
    auto g2 = transform_gamma(g, jc);
    auto n2 = transform_nlc(nlc, jc);
    for (int trial = 0; trial < 3; ++trial) {
      Signature sig = random_signature(rng, 2);
      if (sig.empty()) sig.push_back(IndexSlot::up(Space::V));
      DTensor D = random_tensor(d, sig, rng);
      DTensor Dn = transform_tensor(D, jc);
      for (Space s : {Space::T, Space::M, Space::V}) {
        DTensor lhs = transform_tensor(CovariantDerivative(g, nlc).along(D, s), jc);
        DTensor rhs = CovariantDerivative(g2, n2).along(Dn, s);
        EXPECT_TRUE(all_equivalent(jc.to_old(lhs.components()), jc.to_old(rhs.components()), d));
      }
    }
  }
}

TEST(DTensorOps, TransformRoundTrip) {
  Rng rng(6);
  auto c = random_quadratic_change(d22, 8);
  JetChange fwd(c), back(c.inverted());
  DTensor D = random_tensor(d22, {IndexSlot::up(Space::V), IndexSlot::down(Space::E)}, rng);
  DTensor again = transform_tensor(transform_tensor(D, fwd), back);
  EXPECT_TRUE(tensors_equivalent(again, D));
}
