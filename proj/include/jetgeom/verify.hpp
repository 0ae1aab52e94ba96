#pragma once

// The identity battery: every module's invariant suite over one model,
// sampled at one seeded point set.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "jetgeom/calculus.hpp"
#include "jetgeom/connection.hpp"
#include "jetgeom/invariants.hpp"
#include "jetgeom/model.hpp"
#include "jetgeom/prolong.hpp"
#include "jetgeom/sampling.hpp"

namespace jetgeom {

struct VerifyContext {
  JetModel metric;
  NonlinearConnection nlc;
  GammaConnection g;
  bool berwald = true;  // nlc and connection are the defaults of the metric pair
  std::optional<ChartChange> chart;
  SampleConfig sampler;
  double tol = 1e-6;
  double exact_tol = 1e-12;
  std::vector<Binding> points;

  Dims dims() const { return metric.dims; }
};

/// Points where the metrics are invertible and every connection component is finite.
inline std::vector<Binding> valid_points(const JetModel& metric, const NonlinearConnection& nlc,
                                         const GammaConnection& g, const SampleConfig& cfg) {
  std::vector<Expr> all(nlc.M.data());
  all.insert(all.end(), nlc.N.data().begin(), nlc.N.data().end());
  for (auto f : kFamilies) all.insert(all.end(), g[f].data().begin(), g[f].data().end());
  const Tape tape(all);
  return sample_points(metric.dims, cfg, [&](const Binding& b) {
    if (!metric.invertible_at(b)) return false;
    (void)tape(b);
    return true;
  });
}

/// Fills the defaults of a context: canonical nlc and Berwald connection unless given.
inline VerifyContext make_context(const JetModel& metric, std::optional<NonlinearConnection> nlc,
                                  std::optional<GammaConnection> g, const SampleConfig& cfg, double tol) {
  auto cd = christoffel(metric);
  VerifyContext ctx{metric,
                    nlc ? *nlc : canonical_nlc(cd),
                    g ? *g : berwald(cd),
                    !nlc && !g,
                    std::nullopt,
                    cfg,
                    tol,
                    1e-12,
                    {}};
  ctx.points = valid_points(ctx.metric, ctx.nlc, ctx.g, cfg);
  return ctx;
}

namespace detail {

inline std::vector<Expr> difference(const ExprArray& a, const ExprArray& b) {
  std::vector<Expr> r;
  for (std::size_t k = 0; k < a.size(); ++k) r.push_back(a.flat(k) - b.flat(k));
  return r;
}

inline Signature random_signature(Rng& rng, int max_rank) {
  static const Space spaces[] = {Space::T, Space::M, Space::V};
  Signature sig;
  const int r = rng.integer(0, max_rank);
  for (int k = 0; k < r; ++k) sig.push_back({spaces[rng.integer(0, 2)], rng.integer(0, 1) == 1});
  return sig;
}

inline DTensor random_tensor(Dims d, Signature sig, Rng& rng) {
  DTensor t(d, std::move(sig));
  auto vars = coordinates(d);
  for (std::size_t k = 0; k < t.size(); ++k) t.components().flat(k) = random_polynomial(vars, rng, 2);
  return t;
}

inline DVectorField random_dvector_field(Dims d, Rng& rng) {
  auto X = DVectorField::zero(d);
  auto vars = coordinates(d);
  for (auto& e : X.Xt) e = random_polynomial(vars, rng);
  for (auto& e : X.Xm) e = random_polynomial(vars, rng);
  for (std::size_t k = 0; k < X.Xv.size(); ++k) X.Xv.flat(k) = random_polynomial(vars, rng);
  return X;
}

inline BaseVectorField random_base_field(Dims d, Rng& rng) {
  auto X = BaseVectorField::zero(d);
  auto vars = coordinates(d, false);
  for (auto& e : X.Xt) e = random_polynomial(vars, rng, 3, 3);
  for (auto& e : X.Xm) e = random_polynomial(vars, rng, 3, 3);
  return X;
}

// Moves slot `from` to the end.
inline DTensor move_slot_last(const DTensor& D, std::size_t from) {
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

// A structural equality check: zero residual when every pair is the same
// node, otherwise the sampled difference with a failing verdict.
inline CheckResult structural_check(std::string id, std::string family, const std::vector<Expr>& lhs,
                                    const std::vector<Expr>& rhs, const std::vector<Binding>& pts) {
  bool all_same = true;
  std::vector<Expr> res;
  for (std::size_t k = 0; k < lhs.size(); ++k) {
    all_same = all_same && same(lhs[k], rhs[k]);
    res.push_back(lhs[k] - rhs[k]);
  }
  if (all_same) return {std::move(id), std::move(family), 0.0, -1, 0.0, true, {}};
  auto r = residual_check(std::move(id), std::move(family), res, pts, 0.0);
  r.pass = false;
  return r;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) { return seed ^ (0x9E3779B97F4A7C15ull * (tag + 1)); }

}  // namespace detail

/// Frame/coframe duality and the adapted-frame transformation law under a
/// chart change (the model's own, otherwise a seeded random quadratic one).
inline std::vector<CheckResult> frames_suite(const VerifyContext& ctx) {
  const Dims d = ctx.dims();
  const int D = d.frame();
  FrameOperators ops(ctx.nlc);
  std::vector<CheckResult> out;
  std::vector<Expr> dual;
  for (int K = 0; K < D; ++K) {
    auto w = ops.coframe(K);
    for (int A = 0; A < D; ++A) {
      auto x = ops.natural(A);
      std::vector<Expr> ts{Expr(K == A ? -1.0 : 0.0)};
      for (int c = 0; c < D; ++c) ts.push_back(w[c] * x[c]);
      dual.push_back(make_add(std::move(ts)));
    }
  }
  out.push_back(residual_check("frame.duality", "coframe", dual, ctx.points, ctx.tol));

  ChartChange change = ctx.chart ? *ctx.chart : random_quadratic_change(d, detail::mix_seed(ctx.sampler.seed, 1));
  JetChange jc(change);
  FrameOperators new_ops(transform_nlc(ctx.nlc, jc));
  Rng rng(detail::mix_seed(ctx.sampler.seed, 2));
  auto vars = coordinates(d);
  std::vector<Expr> lt, lm, lv;
  for (int k = 0; k < 3; ++k) {
    Expr f_new = random_polynomial(vars, rng, 4, 2);
    Expr f = jc.to_old(f_new);
    for (int a = 0; a < d.p; ++a) {
      std::vector<Expr> ts{ops.delta_t(a, f)};
      for (int b = 0; b < d.p; ++b) ts.push_back(-(jc.jt()(b, a) * jc.to_old(new_ops.delta_t(b, f_new))));
      lt.push_back(make_add(std::move(ts)));
    }
    for (int i = 0; i < d.n; ++i) {
      std::vector<Expr> ts{ops.delta_x(i, f)};
      for (int j = 0; j < d.n; ++j) ts.push_back(-(jc.jx()(j, i) * jc.to_old(new_ops.delta_x(j, f_new))));
      lm.push_back(make_add(std::move(ts)));
    }
    for (int i = 0; i < d.n; ++i)
      for (int a = 0; a < d.p; ++a) {
        std::vector<Expr> ts{ops.partial_v(i, a, f)};
        for (int j = 0; j < d.n; ++j)
          for (int b = 0; b < d.p; ++b)
            ts.push_back(-(jc.jx()(j, i) * jc.jt_inv()(a, b) * jc.to_old(new_ops.partial_v(j, b, f_new))));
        lv.push_back(make_add(std::move(ts)));
      }
  }
  out.push_back(residual_check("frame.law.t", "delta_t", lt, ctx.points, ctx.tol));
  out.push_back(residual_check("frame.law.m", "delta_x", lm, ctx.points, ctx.tol));
  out.push_back(residual_check("frame.law.v", "partial_v", lv, ctx.points, ctx.tol));
  return out;
}

/// Scalar specialization (structural) and the additivity, Leibniz and
/// contraction properties of the covariant derivatives on random tensors.
inline std::vector<CheckResult> calculus_suite(const VerifyContext& ctx, int trials = 10) {
  const Dims d = ctx.dims();
  const auto& nlc = ctx.nlc;
  CovariantDerivative cov(ctx.g, nlc);
  Rng rng(detail::mix_seed(ctx.sampler.seed, 3));
  auto vars = coordinates(d);
  std::vector<CheckResult> out;
  std::vector<Expr> lt, rt, lm, rm, lv, rv;
  for (int k = 0; k < 3; ++k) {
    Expr f = random_polynomial(vars, rng, 4, 3);
    auto F = DTensor::scalar(d, f);
    auto T = cov.along(F, Space::T), M = cov.along(F, Space::M), V = cov.along(F, Space::V);
    for (int e = 0; e < d.p; ++e) {
      std::vector<Expr> ts{diff(f, Variable::t(e))};
      for (int kk = 0; kk < d.n; ++kk)
        for (int ga = 0; ga < d.p; ++ga) ts.push_back(-(nlc.M(kk, ga, e) * diff(f, Variable::v(kk, ga))));
      lt.push_back(T(e));
      rt.push_back(make_add(std::move(ts)));
    }
    for (int q = 0; q < d.n; ++q) {
      std::vector<Expr> ts{diff(f, Variable::x(q))};
      for (int kk = 0; kk < d.n; ++kk)
        for (int ga = 0; ga < d.p; ++ga) ts.push_back(-(nlc.N(kk, ga, q) * diff(f, Variable::v(kk, ga))));
      lm.push_back(M(q));
      rm.push_back(make_add(std::move(ts)));
    }
    for (int q = 0; q < d.n; ++q)
      for (int e = 0; e < d.p; ++e) {
        lv.push_back(V(q * d.p + e));
        rv.push_back(diff(f, Variable::v(q, e)));
      }
  }
  out.push_back(detail::structural_check("calculus.scalar.t", "f/e", lt, rt, ctx.points));
  out.push_back(detail::structural_check("calculus.scalar.m", "f|p", lm, rm, ctx.points));
  out.push_back(detail::structural_check("calculus.scalar.v", "f|v", lv, rv, ctx.points));

  static const Space spaces[] = {Space::T, Space::M, Space::V};
  std::vector<Expr> additivity, leibniz, contraction;
  auto append = [](std::vector<Expr>& to, const DTensor& a, const DTensor& b) {
    for (std::size_t k = 0; k < a.size(); ++k) to.push_back(a.components().flat(k) - b.components().flat(k));
  };
  for (int trial = 0; trial < trials; ++trial) {
    Signature sig = detail::random_signature(rng, 2);
    DTensor A = detail::random_tensor(d, sig, rng), B = detail::random_tensor(d, sig, rng);
    DTensor a = detail::random_tensor(d, detail::random_signature(rng, 1), rng);
    DTensor b = detail::random_tensor(d, detail::random_signature(rng, 1), rng);
    Space sp = spaces[rng.integer(0, 2)];
    DTensor C = detail::random_tensor(d, {IndexSlot::up(sp), IndexSlot::down(sp)}, rng);
    for (Space s : spaces) {
      append(additivity, cov.along(add(A, B), s), add(cov.along(A, s), cov.along(B, s)));
      DTensor rhs = add(detail::move_slot_last(tensor_product(cov.along(a, s), b), a.rank()),
                        tensor_product(a, cov.along(b, s)));
      append(leibniz, cov.along(tensor_product(a, b), s), rhs);
      append(contraction, cov.along(contract(C, 0, 1), s), contract(cov.along(C, s), 0, 1));
    }
  }
  out.push_back(residual_check("calculus.additivity", "D", additivity, ctx.points, ctx.tol));
  out.push_back(residual_check("calculus.leibniz", "D", leibniz, ctx.points, ctx.tol));
  out.push_back(residual_check("calculus.contraction", "D", contraction, ctx.points, ctx.tol));
  return out;
}

/// Closed-form torsion against the operator definition; on Berwald models
/// also the remark that only the nlc curvature families survive.
inline std::vector<CheckResult> torsion_suite(const VerifyContext& ctx) {
  auto out = check_torsion_oracle(ctx.g, ctx.nlc, ctx.points, ctx.tol);
  if (!ctx.berwald) return out;
  const Dims d = ctx.dims();
  const int p = d.p, n = d.n;
  auto curv = metric_curvature(christoffel(ctx.metric));
  auto tbl = torsion_table(ctx.g, ctx.nlc);
  for (const auto& f : tbl.families) {
    ExprArray expect(f.value.components().shape());
    if (f.name == "R_tt") {
      for (int m = 0; m < n; ++m)
        for (int mu = 0; mu < p; ++mu)
          for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b) {
              std::vector<Expr> ts;
              for (int g = 0; g < p; ++g) ts.push_back(-(curv.Hcurv(g, mu, a, b) * vvar(m, g)));
              expect(m * p + mu, a, b) = make_add(std::move(ts));
            }
    } else if (f.name == "R_mm") {
      for (int m = 0; m < n; ++m)
        for (int mu = 0; mu < p; ++mu)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
              std::vector<Expr> ts;
              for (int l = 0; l < n; ++l) ts.push_back(curv.r(m, l, i, j) * vvar(l, mu));
              expect(m * p + mu, i, j) = make_add(std::move(ts));
            }
    }
    out.push_back(residual_check("torsion.remark." + f.name, f.name, detail::difference(f.value.components(), expect),
                                 ctx.points, ctx.tol));
  }
  return out;
}

/// Closed-form curvature against the operator definition; on Berwald models
/// also the remark: only H, r and their Kronecker lifts to the vertical block.
inline std::vector<CheckResult> curvature_suite(const VerifyContext& ctx) {
  auto out = check_curvature_oracle(ctx.g, ctx.nlc, ctx.points, ctx.tol);
  if (!ctx.berwald) return out;
  const Dims d = ctx.dims();
  const int p = d.p, n = d.n;
  auto curv = metric_curvature(christoffel(ctx.metric));
  auto tbl = curvature_table(ctx.g, ctx.nlc);
  for (const auto& f : tbl.families) {
    ExprArray expect(f.value.components().shape());
    if (f.name == "Rbar_tt") {
      expect = curv.Hcurv;
    } else if (f.name == "R_mm") {
      expect = curv.r;
    } else if (f.name == "Rv_tt") {
      for (int k = 0; k < n; ++k)
        for (int g = 0; g < p; ++g)
          for (int b = 0; b < p; ++b)
            for (int a = 0; a < p; ++a)
              for (int c = 0; c < p; ++c) expect(k * p + g, k * p + b, a, c) = -curv.Hcurv(b, g, a, c);
    } else if (f.name == "Rv_mm") {
      for (int l = 0; l < n; ++l)
        for (int g = 0; g < p; ++g)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              for (int k = 0; k < n; ++k) expect(l * p + g, i * p + g, j, k) = curv.r(l, i, j, k);
    }
    out.push_back(residual_check("curvature.remark." + f.name, f.name,
                                 detail::difference(f.value.components(), expect), ctx.points, ctx.tol));
  }
  if (p == 1)
    out.push_back(residual_check("curvature.remark.Rbar_tt.one_dimensional", "Rbar_tt",
                                 tbl["Rbar_tt"].components().data(), ctx.points, ctx.tol));
  return out;
}

/// Ricci identities for `fields` seeded random d-vector fields.
inline std::vector<CheckResult> ricci_suite(const VerifyContext& ctx, int fields = 5) {
  auto inv = frame_invariants(ctx.g, ctx.nlc);
  Rng rng(detail::mix_seed(ctx.sampler.seed, 4));
  std::vector<CheckResult> out;
  for (int k = 0; k < fields; ++k) {
    auto X = detail::random_dvector_field(ctx.dims(), rng);
    auto rs = check_ricci(X, ctx.g, ctx.nlc, inv, ctx.points, ctx.tol, "ricci.field" + std::to_string(k + 1) + ".");
    out.insert(out.end(), rs.begin(), rs.end());
  }
  return out;
}

inline std::vector<CheckResult> deflection_suite(const VerifyContext& ctx) {
  auto out = check_deflection_forms(ctx.g, ctx.nlc, ctx.points, ctx.tol);
  auto ids = check_deflection_identities(ctx.g, ctx.nlc, ctx.points, ctx.tol);
  out.insert(out.end(), ids.begin(), ids.end());
  if (ctx.berwald) {
    auto def = deflection(ctx.g, ctx.nlc);
    const int nv = ctx.dims().vertical();
    ExprArray kron({nv, nv});
    for (int k = 0; k < nv; ++k) kron(k, k) = Expr(1.0);
    out.push_back(residual_check("deflection.berwald.Dbar", "Dbar", def.Dbar.components().data(), ctx.points, ctx.tol));
    out.push_back(residual_check("deflection.berwald.D", "D", def.D.components().data(), ctx.points, ctx.tol));
    out.push_back(residual_check("deflection.berwald.d", "d", detail::difference(def.d.components(), kron), ctx.points,
                                 ctx.tol));
  }
  return out;
}

inline std::vector<CheckResult> bianchi_suite(const VerifyContext& ctx) {
  return check_bianchi(ctx.g, ctx.nlc, ctx.points, ctx.tol);
}

/// Adapted-frame prolongation versus Olver's for seeded random base fields;
/// the Berwald reduction on Berwald models; the rotation field when p = n = 1.
inline std::vector<CheckResult> prolong_suite(const VerifyContext& ctx, int fields = 5) {
  const Dims d = ctx.dims();
  Rng rng(detail::mix_seed(ctx.sampler.seed, 5));
  std::vector<CheckResult> out;
  std::optional<ChristoffelData> cd;
  if (ctx.berwald) cd = christoffel(ctx.metric);
  for (int k = 0; k < fields; ++k) {
    auto X = detail::random_base_field(d, rng);
    const std::string tag = "field" + std::to_string(k + 1);
    out.push_back(check_prolongation_relation(X, ctx.g, ctx.nlc, ctx.points, ctx.exact_tol, "prolong.relation." + tag));
    if (cd) {
      auto Y = geometric_prolong(X, ctx.g, ctx.nlc);
      out.push_back(residual_check("prolong.berwald." + tag, "Y", detail::difference(Y.Xv, berwald_prolong(X, *cd)),
                                   ctx.points, ctx.exact_tol));
    }
  }
  if (d.p == 1 && d.n == 1) {
    auto X = BaseVectorField::zero(d);
    X.Xt[0] = -xvar(0);
    X.Xm[0] = tvar(0);
    Expr v = olver_prolong(X).Xv(0, 0);
    out.push_back(residual_check("prolong.rotation", "X", {v - (1.0 + vvar(0, 0) * vvar(0, 0))}, ctx.points,
                                 ctx.exact_tol));
  }
  return out;
}

struct Suite {
  std::string name;
  std::function<std::vector<CheckResult>(const VerifyContext&)> run;
};

inline const std::vector<Suite>& suites() {
  static const std::vector<Suite> all{
      {"frames", [](const VerifyContext& c) { return frames_suite(c); }},
      {"calculus", [](const VerifyContext& c) { return calculus_suite(c); }},
      {"torsion", torsion_suite},
      {"curvature", curvature_suite},
      {"ricci", [](const VerifyContext& c) { return ricci_suite(c); }},
      {"deflection", deflection_suite},
      {"bianchi", bianchi_suite},
      {"prolong", [](const VerifyContext& c) { return prolong_suite(c); }},
  };
  return all;
}

inline std::vector<CheckResult> run_suites(const VerifyContext& ctx) {
  std::vector<CheckResult> out;
  for (const auto& s : suites()) {
    auto rs = s.run(ctx);
    out.insert(out.end(), rs.begin(), rs.end());
  }
  return out;
}

}  // namespace jetgeom
