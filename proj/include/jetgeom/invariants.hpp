#pragma once

// Torsion and curvature of a Gamma-linear connection in closed form, their
// operator-definition oracles, deflection tensors, and the Ricci and
// Bianchi identity suites as sampled residual checks.
//
// Frame-level conventions (flat frame indices, see Frame):
//   Tf(G, b, c)    = G-component of T(X_c, X_b)
//   Rf(F, a, b, c) = F-component of R(X_c, X_b) X_a

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jetgeom/calculus.hpp"
#include "jetgeom/connection.hpp"
#include "jetgeom/sampling.hpp"

namespace jetgeom {

// ---------------------------------------------------------------------------
// Check records

struct CheckResult {
  std::string id;
  std::string family;
  double max_residual = 0.0;
  int worst_point = -1;
  double tolerance = 0.0;
  bool pass = true;
  std::string error;  // domain error text; empty when evaluation succeeded
};

/// max |e| over the points, compared against tol.
inline CheckResult residual_check(std::string id, std::string family, const std::vector<Expr>& residuals,
                                  const std::vector<Binding>& points, double tol) {
  CheckResult r{std::move(id), std::move(family), 0.0, -1, tol, true, {}};
  std::vector<Expr> live;
  for (const auto& e : residuals)
    if (!e.is_zero()) live.push_back(e);
  if (live.empty()) return r;
  try {
    Residual res = max_abs(live, points);
    r.max_residual = res.max_abs;
    r.worst_point = res.worst_point;
    r.pass = res.max_abs <= tol;
  } catch (const DomainError& e) {
    r.max_residual = std::numeric_limits<double>::quiet_NaN();
    r.pass = false;
    r.error = e.what();
  }
  return r;
}

inline bool all_pass(const std::vector<CheckResult>& rs) {
  return std::all_of(rs.begin(), rs.end(), [](const CheckResult& r) { return r.pass; });
}

inline char block_letter(Block b) { return "tmv"[static_cast<int>(b)]; }

// ---------------------------------------------------------------------------
// Curvature of the nonlinear connection

struct NlcCurvature {
  DTensor Rtt;  // R^{(m)}_{(mu)ab}  [V^, T_, T_]
  DTensor Rtm;  // R^{(m)}_{(mu)aj}  [V^, T_, M_]
  DTensor Rmm;  // R^{(m)}_{(mu)ij}  [V^, M_, M_]
};

inline NlcCurvature nlc_curvature(const NonlinearConnection& nlc) {
  const Dims d = nlc.dims;
  const int p = d.p, n = d.n;
  FrameOperators ops(nlc);
  const auto V = IndexSlot::up(Space::V), T = IndexSlot::down(Space::T), M = IndexSlot::down(Space::M);
  NlcCurvature out{DTensor(d, {V, T, T}), DTensor(d, {V, T, M}), DTensor(d, {V, M, M})};
  for (int m = 0; m < n; ++m)
    for (int mu = 0; mu < p; ++mu) {
      const int v = m * p + mu;
      for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b)
          out.Rtt(v, a, b) = ops.delta_t(b, nlc.M(m, mu, a)) - ops.delta_t(a, nlc.M(m, mu, b));
      for (int a = 0; a < p; ++a)
        for (int j = 0; j < n; ++j)
          out.Rtm(v, a, j) = ops.delta_x(j, nlc.M(m, mu, a)) - ops.delta_t(a, nlc.N(m, mu, j));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          out.Rmm(v, i, j) = ops.delta_x(j, nlc.N(m, mu, i)) - ops.delta_x(i, nlc.N(m, mu, j));
    }
  return out;
}

/// Adapted-frame components of [X_A, X_B], computed from natural components.
inline std::vector<Expr> adapted_bracket(const FrameOperators& ops, int A, int B) {
  const Frame& fr = ops.frame();
  const int D = fr.size();
  auto u = ops.natural(A), w = ops.natural(B);
  std::vector<Expr> nat(static_cast<std::size_t>(D));
  for (int k = 0; k < D; ++k) {
    std::vector<Expr> ts;
    for (int j = 0; j < D; ++j) {
      Variable cj = fr.coordinate(j);
      if (!u[j].is_zero()) {
        Expr dw = diff(w[k], cj);
        if (!dw.is_zero()) ts.push_back(u[j] * dw);
      }
      if (!w[j].is_zero()) {
        Expr du = diff(u[k], cj);
        if (!du.is_zero()) ts.push_back(-(w[j] * du));
      }
    }
    nat[k] = make_add(std::move(ts));
  }
  return ops.from_natural(nat);
}

/// Bracket identities: [X_A, X_B] for every pair of frame blocks against
/// the nonlinear-connection curvature and the vertical derivatives of M, N.
inline std::vector<CheckResult> check_brackets(const NonlinearConnection& nlc, const std::vector<Binding>& pts,
                                               double tol) {
  const Dims d = nlc.dims;
  const int p = d.p;
  FrameOperators ops(nlc);
  const Frame& fr = ops.frame();
  auto R = nlc_curvature(nlc);
  // expected vertical component (m, mu) of [X_A, X_B], zero elsewhere
  auto expected = [&](int A, int B, int K) -> Expr {
    if (fr.block(K) != Block::V) return Expr(0.0);
    const int v = fr.local(K), m = v / p, mu = v % p;
    const int a = fr.local(A), b = fr.local(B);
    switch (fr.block(A)) {
      case Block::T:
        switch (fr.block(B)) {
          case Block::T: return R.Rtt(v, a, b);
          case Block::M: return R.Rtm(v, a, b);
          case Block::V: return diff(nlc.M(m, mu, a), fr.coordinate(B));
        }
        break;
      case Block::M:
        switch (fr.block(B)) {
          case Block::T: return -R.Rtm(v, b, a);
          case Block::M: return R.Rmm(v, a, b);
          case Block::V: return diff(nlc.N(m, mu, a), fr.coordinate(B));
        }
        break;
      case Block::V:
        switch (fr.block(B)) {
          case Block::T: return -diff(nlc.M(m, mu, b), fr.coordinate(A));
          case Block::M: return -diff(nlc.N(m, mu, b), fr.coordinate(A));
          case Block::V: return Expr(0.0);
        }
        break;
    }
    return Expr(0.0);
  };
  std::vector<CheckResult> out;
  for (std::size_t x = 0; x < kBlocks.size(); ++x)
    for (std::size_t y = x; y < kBlocks.size(); ++y) {
      Block bx = kBlocks[x], by = kBlocks[y];
      std::vector<Expr> res;
      for (int a = 0; a < fr.range(bx); ++a)
        for (int b = 0; b < fr.range(by); ++b) {
          int A = fr.index(bx, a), B = fr.index(by, b);
          auto br = adapted_bracket(ops, A, B);
          for (int K = 0; K < fr.size(); ++K) res.push_back(br[K] - expected(A, B, K));
        }
      std::string fam{block_letter(bx), block_letter(by)};
      out.push_back(residual_check("bracket." + fam, fam, res, pts, tol));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Torsion

/// One family of a torsion or curvature table: the target block, optional
/// source block (curvature only) and the two derivative blocks.
struct TableCell {
  std::string name;
  Block target;
  std::optional<Block> source;
  Block b, c;
  DTensor value;
};

struct TorsionTable {
  std::vector<TableCell> families;  // the twelve effective families

  const DTensor& operator[](const std::string& name) const {
    for (const auto& f : families)
      if (f.name == name) return f.value;
    throw Error("unknown torsion family " + name);
  }
};

/// Layout of the twelve torsion families: (name, target, b, c).
inline const std::vector<std::tuple<std::string, Block, Block, Block>>& torsion_layout() {
  static const std::vector<std::tuple<std::string, Block, Block, Block>> layout{
      {"Tbar_tt", Block::T, Block::T, Block::T}, {"Tbar_tm", Block::T, Block::T, Block::M},
      {"T_tm", Block::M, Block::T, Block::M},    {"T_mm", Block::M, Block::M, Block::M},
      {"Pbar_tv", Block::T, Block::T, Block::V}, {"P_mv", Block::M, Block::M, Block::V},
      {"Pv_tv", Block::V, Block::T, Block::V},   {"Pv_mv", Block::V, Block::M, Block::V},
      {"S_vv", Block::V, Block::V, Block::V},    {"R_tt", Block::V, Block::T, Block::T},
      {"R_tm", Block::V, Block::T, Block::M},    {"R_mm", Block::V, Block::M, Block::M}};
  return layout;
}

inline TorsionTable torsion_table(const GammaConnection& g, const NonlinearConnection& nlc) {
  const Dims d = g.dims;
  const int p = d.p, n = d.n;
  auto sig = [](Block up, Block b, Block c) {
    return Signature{IndexSlot::up(space_of(up)), IndexSlot::down(space_of(b)), IndexSlot::down(space_of(c))};
  };
  std::map<std::string, DTensor> v;
  for (const auto& [name, up, b, c] : torsion_layout()) v.emplace(name, DTensor(d, sig(up, b, c)));
  auto& Ttt = v["Tbar_tt"];
  auto& Ttm = v["Tbar_tm"];
  auto& T2 = v["T_tm"];
  auto& Tmm = v["T_mm"];
  auto& Pb = v["Pbar_tv"];
  auto& Pm = v["P_mv"];
  auto& Pvt = v["Pv_tv"];
  auto& Pvm = v["Pv_mv"];
  auto& S = v["S_vv"];
  for (int mu = 0; mu < p; ++mu)
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < p; ++b) Ttt(mu, a, b) = g[Family::Gbar](mu, a, b) - g[Family::Gbar](mu, b, a);
      for (int j = 0; j < n; ++j) Ttm(mu, a, j) = g[Family::Lbar](mu, a, j);
      for (int j = 0; j < n; ++j)
        for (int be = 0; be < p; ++be) Pb(mu, a, j * p + be) = g[Family::Cbar](mu, a, be, j);
    }
  for (int m = 0; m < n; ++m) {
    for (int a = 0; a < p; ++a)
      for (int j = 0; j < n; ++j) T2(m, a, j) = -g[Family::G](m, j, a);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Tmm(m, i, j) = g[Family::L](m, i, j) - g[Family::L](m, j, i);
        for (int be = 0; be < p; ++be) Pm(m, i, j * p + be) = g[Family::C](m, i, be, j);
      }
  }
  for (int m = 0; m < n; ++m)
    for (int mu = 0; mu < p; ++mu) {
      const int vm = m * p + mu;
      for (int j = 0; j < n; ++j)
        for (int be = 0; be < p; ++be) {
          const int vj = j * p + be;
          Variable xjb = Variable::v(j, be);
          for (int a = 0; a < p; ++a)
            Pvt(vm, a, vj) = diff(nlc.M(m, mu, a), xjb) - g[Family::Gv](m, be, mu, j, a);
          for (int i = 0; i < n; ++i)
            Pvm(vm, i, vj) = diff(nlc.N(m, mu, i), xjb) - g[Family::Lv](m, be, mu, j, i);
          for (int i = 0; i < n; ++i)
            for (int a = 0; a < p; ++a)
              S(vm, i * p + a, vj) = g[Family::Cv](m, a, mu, i, be, j) - g[Family::Cv](m, be, mu, j, a, i);
        }
    }
  auto R = nlc_curvature(nlc);
  v["R_tt"] = R.Rtt;
  v["R_tm"] = R.Rtm;
  v["R_mm"] = R.Rmm;
  TorsionTable t;
  for (const auto& [name, up, b, c] : torsion_layout()) t.families.push_back({name, up, std::nullopt, b, c, v.at(name)});
  return t;
}

/// Whole-frame torsion Tf(G, b, c) assembled from the table.
inline ExprArray frame_torsion(const TorsionTable& t, Dims d) {
  const Frame fr{d};
  const int D = fr.size();
  ExprArray Tf({D, D, D});
  for (const auto& cell : t.families) {
    const auto& val = cell.value;
    for (std::size_t k = 0; k < val.size(); ++k) {
      auto idx = val.components().unflatten(k);
      int G = fr.index(cell.target, idx[0]), b = fr.index(cell.b, idx[1]), c = fr.index(cell.c, idx[2]);
      const Expr& e = val.components().flat(k);
      Tf(G, b, c) = e;
      if (cell.b != cell.c) Tf(G, c, b) = -e;
    }
  }
  return Tf;
}

/// Tf from the definition T(X_c, X_b) = nabla_c X_b - nabla_b X_c - [X_c, X_b].
inline ExprArray torsion_oracle(const GammaConnection& g, const NonlinearConnection& nlc) {
  const Frame fr{g.dims};
  const int D = fr.size();
  auto table = frame_coefficients(g);
  FrameOperators ops(nlc);
  ExprArray Tf({D, D, D});
  for (int b = 0; b < D; ++b)
    for (int c = 0; c < D; ++c) {
      auto br = adapted_bracket(ops, c, b);
      for (int G = 0; G < D; ++G) Tf(G, b, c) = table(c, b, G) - table(b, c, G) - br[G];
    }
  return Tf;
}

// ---------------------------------------------------------------------------
// Curvature

struct CurvatureTable {
  std::vector<TableCell> families;  // the eighteen families

  const DTensor& operator[](const std::string& name) const {
    for (const auto& f : families)
      if (f.name == name) return f.value;
    throw Error("unknown curvature family " + name);
  }
};

/// The six derivative block pairs (b, c) in table order.
inline const std::array<std::pair<Block, Block>, 6>& block_pairs() {
  static const std::array<std::pair<Block, Block>, 6> pairs{{{Block::T, Block::T},
                                                             {Block::T, Block::M},
                                                             {Block::M, Block::M},
                                                             {Block::T, Block::V},
                                                             {Block::M, Block::V},
                                                             {Block::V, Block::V}}};
  return pairs;
}

inline std::string curvature_name(Block K, std::size_t pair) {
  static const char* stem[3][6] = {{"Rbar_tt", "Rbar_tm", "Rbar_mm", "Pbar_tv", "Pbar_mv", "Sbar_vv"},
                                   {"R_tt", "R_tm", "R_mm", "P_tv", "P_mv", "S_vv"},
                                   {"Rv_tt", "Rv_tm", "Rv_mm", "Pv_tv", "Pv_mv", "Sv_vv"}};
  return stem[static_cast<int>(K)][pair];
}

/// nabla_{X_dir} X_a = conn[f][a][dir] X_f restricted to target block K and
/// direction block X, as a d-tensor [K^, K_, X_].
inline DTensor connection_view(const GammaConnection& g, Block X, Block K) {
  const Frame fr{g.dims};
  DTensor t(g.dims, {IndexSlot::up(space_of(K)), IndexSlot::down(space_of(K)), IndexSlot::down(space_of(X))});
  for (int f = 0; f < fr.range(K); ++f)
    for (int a = 0; a < fr.range(K); ++a)
      for (int e = 0; e < fr.range(X); ++e) t(f, a, e) = g.coefficient(X, K, e, a, f);
  return t;
}

inline CurvatureTable curvature_table(const GammaConnection& g, const NonlinearConnection& nlc) {
  const Dims d = g.dims;
  const Frame fr{d};
  FrameOperators ops(nlc);
  CovariantDerivative cov(g, nlc);
  auto tors = torsion_table(g, nlc);
  const DTensor& Rtt = tors["R_tt"];
  const DTensor& Rtm = tors["R_tm"];
  const DTensor& Rmm = tors["R_mm"];
  const DTensor& Pvt = tors["Pv_tv"];
  const DTensor& Pvm = tors["Pv_mv"];
  const int nv = fr.range(Block::V);
  CurvatureTable out;
  for (Block K : kBlocks) {
    const int r = fr.range(K);
    DTensor GT = connection_view(g, Block::T, K), GM = connection_view(g, Block::M, K),
            GV = connection_view(g, Block::V, K);
    DTensor GV_T = cov.along(GV, Space::T), GV_M = cov.along(GV, Space::M);
    auto dir_op = [&](Block X, int e, const Expr& f) { return ops.apply(fr.index(X, e), f); };
    // F1..F3: delta_c G1[f][a][b] - delta_b G2[f][a][c] + G1 G2 - G2 G1 + GV R
    auto horizontal = [&](const DTensor& G1, Block B1, const DTensor& G2, Block B2, const DTensor& Rn) {
      DTensor res(d, {IndexSlot::up(space_of(K)), IndexSlot::down(space_of(K)), IndexSlot::down(space_of(B1)),
                      IndexSlot::down(space_of(B2))});
      for (int f = 0; f < r; ++f)
        for (int a = 0; a < r; ++a)
          for (int b = 0; b < fr.range(B1); ++b)
            for (int c = 0; c < fr.range(B2); ++c) {
              std::vector<Expr> ts{dir_op(B2, c, G1(f, a, b)), -dir_op(B1, b, G2(f, a, c))};
              for (int mu = 0; mu < r; ++mu) {
                ts.push_back(G1(mu, a, b) * G2(f, mu, c));
                ts.push_back(-(G2(mu, a, c) * G1(f, mu, b)));
              }
              for (int v = 0; v < nv; ++v) ts.push_back(GV(f, a, v) * Rn(v, b, c));
              res(f, a, b, c) = make_add(std::move(ts));
            }
      return res;
    };
    // F4, F5: d/dx^{(k,g)} G1[f][a][b] - (GV[f][a][(k,g)])_{:b} + GV P
    auto mixed = [&](const DTensor& G1, Block B1, const DTensor& GVd, const DTensor& P) {
      DTensor res(d, {IndexSlot::up(space_of(K)), IndexSlot::down(space_of(K)), IndexSlot::down(space_of(B1)),
                      IndexSlot::down(Space::V)});
      for (int f = 0; f < r; ++f)
        for (int a = 0; a < r; ++a)
          for (int b = 0; b < fr.range(B1); ++b)
            for (int c = 0; c < nv; ++c) {
              std::vector<Expr> ts{diff(G1(f, a, b), fr.coordinate(fr.index(Block::V, c))), -GVd(f, a, c, b)};
              for (int v = 0; v < nv; ++v) ts.push_back(GV(f, a, v) * P(v, b, c));
              res(f, a, b, c) = make_add(std::move(ts));
            }
      return res;
    };
    // F6: vertical alternation
    DTensor S(d, {IndexSlot::up(space_of(K)), IndexSlot::down(space_of(K)), IndexSlot::down(Space::V),
                  IndexSlot::down(Space::V)});
    for (int f = 0; f < r; ++f)
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < nv; ++b)
          for (int c = 0; c < nv; ++c) {
            std::vector<Expr> ts{diff(GV(f, a, b), fr.coordinate(fr.index(Block::V, c))),
                                 -diff(GV(f, a, c), fr.coordinate(fr.index(Block::V, b)))};
            for (int mu = 0; mu < r; ++mu) {
              ts.push_back(GV(mu, a, b) * GV(f, mu, c));
              ts.push_back(-(GV(mu, a, c) * GV(f, mu, b)));
            }
            S(f, a, b, c) = make_add(std::move(ts));
          }
    DTensor vals[6] = {horizontal(GT, Block::T, GT, Block::T, Rtt), horizontal(GT, Block::T, GM, Block::M, Rtm),
                       horizontal(GM, Block::M, GM, Block::M, Rmm), mixed(GT, Block::T, GV_T, Pvt),
                       mixed(GM, Block::M, GV_M, Pvm),           S};
    for (std::size_t k = 0; k < 6; ++k)
      out.families.push_back({curvature_name(K, k), K, K, block_pairs()[k].first, block_pairs()[k].second, vals[k]});
  }
  return out;
}

/// Whole-frame curvature Rf(F, a, b, c) assembled from the table.
inline ExprArray frame_curvature(const CurvatureTable& t, Dims d) {
  const Frame fr{d};
  const int D = fr.size();
  ExprArray Rf({D, D, D, D});
  for (const auto& cell : t.families) {
    const auto& val = cell.value;
    for (std::size_t k = 0; k < val.size(); ++k) {
      auto idx = val.components().unflatten(k);
      int F = fr.index(cell.target, idx[0]), a = fr.index(*cell.source, idx[1]);
      int b = fr.index(cell.b, idx[2]), c = fr.index(cell.c, idx[3]);
      const Expr& e = val.components().flat(k);
      Rf(F, a, b, c) = e;
      if (cell.b != cell.c) Rf(F, a, c, b) = -e;
    }
  }
  return Rf;
}

/// Rf from the definition R(X_c, X_b) X_a = nabla_c nabla_b X_a
/// - nabla_b nabla_c X_a - nabla_{[X_c, X_b]} X_a.
inline ExprArray curvature_oracle(const GammaConnection& g, const NonlinearConnection& nlc) {
  const Frame fr{g.dims};
  const int D = fr.size();
  auto G = frame_coefficients(g);
  FrameOperators ops(nlc);
  ExprArray Rf({D, D, D, D});
  for (int b = 0; b < D; ++b)
    for (int c = 0; c < D; ++c) {
      auto br = adapted_bracket(ops, c, b);
      for (int a = 0; a < D; ++a)
        for (int F = 0; F < D; ++F) {
          std::vector<Expr> ts{ops.apply(c, G(b, a, F)), -ops.apply(b, G(c, a, F))};
          for (int H = 0; H < D; ++H) {
            if (!G(b, a, H).is_zero() && !G(c, H, F).is_zero()) ts.push_back(G(b, a, H) * G(c, H, F));
            if (!G(c, a, H).is_zero() && !G(b, H, F).is_zero()) ts.push_back(-(G(c, a, H) * G(b, H, F)));
            if (!br[H].is_zero() && !G(H, a, F).is_zero()) ts.push_back(-(br[H] * G(H, a, F)));
          }
          Rf(F, a, b, c) = make_add(std::move(ts));
        }
    }
  return Rf;
}

/// Table versus oracle, one check per (target block, derivative pair) cell,
/// including the cells the table declares zero.
inline std::vector<CheckResult> check_torsion_oracle(const GammaConnection& g, const NonlinearConnection& nlc,
                                                     const std::vector<Binding>& pts, double tol) {
  const Dims d = g.dims;
  const Frame fr{d};
  auto table = frame_torsion(torsion_table(g, nlc), d);
  auto oracle = torsion_oracle(g, nlc);
  std::vector<CheckResult> out;
  for (const auto& [B, C] : block_pairs())
    for (Block G : kBlocks) {
      std::string fam = "0";
      for (const auto& [name, up, b, c] : torsion_layout())
        if (up == G && b == B && c == C) fam = name;
      std::vector<Expr> res;
      for (int g0 = 0; g0 < fr.range(G); ++g0)
        for (int b0 = 0; b0 < fr.range(B); ++b0)
          for (int c0 = 0; c0 < fr.range(C); ++c0) {
            int Gi = fr.index(G, g0), bi = fr.index(B, b0), ci = fr.index(C, c0);
            res.push_back(table(Gi, bi, ci) - oracle(Gi, bi, ci));
            if (B != C) res.push_back(table(Gi, ci, bi) - oracle(Gi, ci, bi));
          }
      std::string cell = std::string{block_letter(G), '.', block_letter(B), block_letter(C)};
      out.push_back(residual_check("torsion.oracle." + cell, fam, res, pts, tol));
    }
  return out;
}

inline std::vector<CheckResult> check_curvature_oracle(const GammaConnection& g, const NonlinearConnection& nlc,
                                                       const std::vector<Binding>& pts, double tol) {
  const Dims d = g.dims;
  const Frame fr{d};
  auto table = frame_curvature(curvature_table(g, nlc), d);
  auto oracle = curvature_oracle(g, nlc);
  const int D = fr.size();
  std::vector<CheckResult> out;
  for (Block K : kBlocks)
    for (std::size_t k = 0; k < 6; ++k) {
      auto [B, C] = block_pairs()[k];
      std::vector<Expr> res;
      for (int f = 0; f < fr.range(K); ++f)
        for (int a = 0; a < fr.range(K); ++a)
          for (int b0 = 0; b0 < fr.range(B); ++b0)
            for (int c0 = 0; c0 < fr.range(C); ++c0) {
              int F = fr.index(K, f), A = fr.index(K, a), bi = fr.index(B, b0), ci = fr.index(C, c0);
              res.push_back(table(F, A, bi, ci) - oracle(F, A, bi, ci));
              if (B != C) res.push_back(table(F, A, ci, bi) - oracle(F, A, ci, bi));
            }
      out.push_back(residual_check("curvature.oracle." + curvature_name(K, k), curvature_name(K, k), res, pts, tol));
    }
  // a Gamma-linear connection preserves the blocks: R(X, Y) maps each block into itself
  std::vector<Expr> cross;
  for (int F = 0; F < D; ++F)
    for (int a = 0; a < D; ++a) {
      if (fr.block(F) == fr.block(a)) continue;
      for (int b = 0; b < D; ++b)
        for (int c = 0; c < D; ++c) cross.push_back(oracle(F, a, b, c) - table(F, a, b, c));
    }
  out.push_back(residual_check("curvature.oracle.cross_block", "0", cross, pts, tol));
  return out;
}

// ---------------------------------------------------------------------------
// Deflection and Ricci identities

struct DeflectionTensors {
  DTensor Dbar;  // [V^, T_]
  DTensor D;     // [V^, M_]
  DTensor d;     // [V^, V_]
};

/// Closed forms: Dbar = -M + Gv x, D = -N + Lv x, d = delta delta + Cv x.
inline DeflectionTensors deflection(const GammaConnection& g, const NonlinearConnection& nlc) {
  const Dims dm = g.dims;
  const int p = dm.p, n = dm.n;
  const auto V = IndexSlot::up(Space::V);
  DeflectionTensors out{DTensor(dm, {V, IndexSlot::down(Space::T)}), DTensor(dm, {V, IndexSlot::down(Space::M)}),
                        DTensor(dm, {V, IndexSlot::down(Space::V)})};
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < p; ++a) {
      const int vi = i * p + a;
      for (int b = 0; b < p; ++b) {
        std::vector<Expr> ts{-nlc.M(i, a, b)};
        for (int m = 0; m < n; ++m)
          for (int mu = 0; mu < p; ++mu) ts.push_back(g[Family::Gv](i, mu, a, m, b) * vvar(m, mu));
        out.Dbar(vi, b) = make_add(std::move(ts));
      }
      for (int j = 0; j < n; ++j) {
        std::vector<Expr> ts{-nlc.N(i, a, j)};
        for (int m = 0; m < n; ++m)
          for (int mu = 0; mu < p; ++mu) ts.push_back(g[Family::Lv](i, mu, a, m, j) * vvar(m, mu));
        out.D(vi, j) = make_add(std::move(ts));
      }
      for (int j = 0; j < n; ++j)
        for (int b = 0; b < p; ++b) {
          std::vector<Expr> ts{Expr(i == j && a == b ? 1.0 : 0.0)};
          for (int m = 0; m < n; ++m)
            for (int mu = 0; mu < p; ++mu) ts.push_back(g[Family::Cv](i, mu, a, m, b, j) * vvar(m, mu));
          out.d(vi, j * p + b) = make_add(std::move(ts));
        }
    }
  return out;
}

/// The Liouville field x^i_a d/dx^i_a.
inline DVectorField liouville(Dims d) {
  auto X = DVectorField::zero(d);
  for (int i = 0; i < d.n; ++i)
    for (int a = 0; a < d.p; ++a) X.Xv(i, a) = vvar(i, a);
  return X;
}

/// Closed-form deflections versus covariant derivatives of the Liouville field.
inline std::vector<CheckResult> check_deflection_forms(const GammaConnection& g, const NonlinearConnection& nlc,
                                                       const std::vector<Binding>& pts, double tol) {
  auto def = deflection(g, nlc);
  DTensor C = liouville(g.dims).part(Space::V);
  CovariantDerivative cov(g, nlc);
  std::vector<CheckResult> out;
  auto diffs = [](const DTensor& a, const DTensor& b) {
    std::vector<Expr> r;
    for (std::size_t k = 0; k < a.size(); ++k) r.push_back(a.components().flat(k) - b.components().flat(k));
    return r;
  };
  out.push_back(residual_check("deflection.Dbar", "Dbar", diffs(def.Dbar, cov.along(C, Space::T)), pts, tol));
  out.push_back(residual_check("deflection.D", "D", diffs(def.D, cov.along(C, Space::M)), pts, tol));
  out.push_back(residual_check("deflection.d", "d", diffs(def.d, cov.along(C, Space::V)), pts, tol));
  return out;
}

namespace detail {

// X2(a, b, c) - X2(a, c, b) - X^m Rf(a, m, b, c) + X1(a, G) Tf(G, b, c) over the
// whole frame, grouped by (a block, b block <= c block); rows restricts a.
inline std::vector<CheckResult> ricci_lines(const std::string& prefix, const std::vector<Expr>& X,
                                            const DTensor& X1, const DTensor& X2, const ExprArray& Rf,
                                            const ExprArray& Tf, Dims d, const std::vector<Block>& rows,
                                            const std::vector<Binding>& pts, double tol) {
  const Frame fr{d};
  const int D = fr.size();
  std::vector<CheckResult> out;
  for (Block ra : rows)
    for (std::size_t k = 0; k < 6; ++k) {
      auto [B, C] = block_pairs()[k];
      std::vector<Expr> res;
      for (int a0 = 0; a0 < fr.range(ra); ++a0)
        for (int b0 = 0; b0 < fr.range(B); ++b0)
          for (int c0 = 0; c0 < fr.range(C); ++c0) {
            int a = fr.index(ra, a0), b = fr.index(B, b0), c = fr.index(C, c0);
            std::vector<Expr> ts{X2(a, b, c), -X2(a, c, b)};
            for (int m = 0; m < D; ++m)
              if (!X[m].is_zero() && !Rf(a, m, b, c).is_zero()) ts.push_back(-(X[m] * Rf(a, m, b, c)));
            for (int G = 0; G < D; ++G)
              if (!Tf(G, b, c).is_zero()) ts.push_back(X1(a, G) * Tf(G, b, c));
            res.push_back(make_add(std::move(ts)));
          }
      std::string line = std::string{block_letter(ra), '.', block_letter(B), block_letter(C)};
      out.push_back(residual_check(prefix + line, line, res, pts, tol));
    }
  return out;
}

}  // namespace detail

/// Whole-frame torsion and curvature from the closed-form tables.
struct FrameInvariants {
  ExprArray Tf;
  ExprArray Rf;
};

inline FrameInvariants frame_invariants(const GammaConnection& g, const NonlinearConnection& nlc) {
  return {frame_torsion(torsion_table(g, nlc), g.dims), frame_curvature(curvature_table(g, nlc), g.dims)};
}

/// The eighteen Ricci identity lines for a d-vector field, with curvature
/// and torsion taken from the closed-form tables.
inline std::vector<CheckResult> check_ricci(const DVectorField& X, const GammaConnection& g,
                                            const NonlinearConnection& nlc, const FrameInvariants& inv,
                                            const std::vector<Binding>& pts, double tol,
                                            const std::string& prefix = "ricci.") {
  CovariantDerivative cov(g, nlc);
  DTensor X1 = cov.along(X.as_tensor(), Space::E);
  DTensor X2 = cov.along(X1, Space::E);
  return detail::ricci_lines(prefix, X.frame(), X1, X2, inv.Rf, inv.Tf, g.dims, {Block::T, Block::M, Block::V}, pts,
                             tol);
}

inline std::vector<CheckResult> check_ricci(const DVectorField& X, const GammaConnection& g,
                                            const NonlinearConnection& nlc, const std::vector<Binding>& pts,
                                            double tol, const std::string& prefix = "ricci.") {
  return check_ricci(X, g, nlc, frame_invariants(g, nlc), pts, tol, prefix);
}

/// The six deflection identities: the vertical Ricci lines for the Liouville
/// field, with its first derivatives replaced by the closed-form deflections.
inline std::vector<CheckResult> check_deflection_identities(const GammaConnection& g, const NonlinearConnection& nlc,
                                                            const std::vector<Binding>& pts, double tol) {
  const Dims d = g.dims;
  const Frame fr{d};
  auto def = deflection(g, nlc);
  // first derivatives of the Liouville field from the closed forms: rows in V only
  DTensor X1(d, {IndexSlot::up(Space::E), IndexSlot::down(Space::E)});
  for (int v = 0; v < fr.range(Block::V); ++v) {
    const int a = fr.index(Block::V, v);
    for (int b = 0; b < d.p; ++b) X1(a, fr.index(Block::T, b)) = def.Dbar(v, b);
    for (int j = 0; j < d.n; ++j) X1(a, fr.index(Block::M, j)) = def.D(v, j);
    for (int w = 0; w < fr.range(Block::V); ++w) X1(a, fr.index(Block::V, w)) = def.d(v, w);
  }
  CovariantDerivative cov(g, nlc);
  DTensor X2 = cov.along(X1, Space::E);
  auto Rf = frame_curvature(curvature_table(g, nlc), d);
  auto Tf = frame_torsion(torsion_table(g, nlc), d);
  auto X = liouville(d).frame();
  return detail::ricci_lines("deflection.identity.", X, X1, X2, Rf, Tf, d, {Block::V}, pts, tol);
}

// ---------------------------------------------------------------------------
// Bianchi identities

/// Both Bianchi families over all ordered frame triples, with residuals
/// grouped by block pattern:
///   B1: cyc{ Rf(F, A, B, C) - Tf(F, A, B):C - Tf(G, A, B) Tf(F, C, G) }
///   B2: cyc{ Rf(F, D, A, B):C + Tf(G, A, B) Rf(F, D, C, G) }
/// B1 groups by (F block, multiset of A, B, C blocks); B2 by (F = D block,
/// multiset). The cyclic sum runs over (A, B, C), (B, C, A), (C, A, B).
inline std::vector<CheckResult> check_bianchi(const GammaConnection& g, const NonlinearConnection& nlc,
                                              const std::vector<Binding>& pts, double tol) {
  const Dims d = g.dims;
  const Frame fr{d};
  const int D = fr.size();
  auto Tf = frame_torsion(torsion_table(g, nlc), d);
  auto Rf = frame_curvature(curvature_table(g, nlc), d);
  CovariantDerivative cov(g, nlc);
  DTensor Tt(d, {IndexSlot::up(Space::E), IndexSlot::down(Space::E), IndexSlot::down(Space::E)}, Tf);
  DTensor Rt(d,
             {IndexSlot::up(Space::E), IndexSlot::down(Space::E), IndexSlot::down(Space::E), IndexSlot::down(Space::E)},
             Rf);
  DTensor dT = cov.along(Tt, Space::E);
  DTensor dR = cov.along(Rt, Space::E);

  auto pattern = [&](int A, int B, int C) {
    std::array<int, 3> bl{static_cast<int>(fr.block(A)), static_cast<int>(fr.block(B)), static_cast<int>(fr.block(C))};
    std::sort(bl.begin(), bl.end());
    std::string s;
    for (int b : bl) s += block_letter(static_cast<Block>(b));
    return s;
  };
  std::map<std::string, std::vector<Expr>> g1, g2;
  auto b1 = [&](int F, int A, int B, int C) {
    std::vector<Expr> ts{Rf(F, A, B, C), -dT(F, A, B, C)};
    for (int G = 0; G < D; ++G)
      if (!Tf(G, A, B).is_zero() && !Tf(F, C, G).is_zero()) ts.push_back(-(Tf(G, A, B) * Tf(F, C, G)));
    return make_add(std::move(ts));
  };
  auto b2 = [&](int F, int Dd, int A, int B, int C) {
    std::vector<Expr> ts{dR(F, Dd, A, B, C)};
    for (int G = 0; G < D; ++G)
      if (!Tf(G, A, B).is_zero() && !Rf(F, Dd, C, G).is_zero()) ts.push_back(Tf(G, A, B) * Rf(F, Dd, C, G));
    return make_add(std::move(ts));
  };
  for (int A = 0; A < D; ++A)
    for (int B = 0; B < D; ++B)
      for (int C = 0; C < D; ++C) {
        std::string pat = pattern(A, B, C);
        for (int F = 0; F < D; ++F) {
          std::string key1 = std::string{block_letter(fr.block(F)), '.'} + pat;
          g1[key1].push_back(b1(F, A, B, C) + b1(F, B, C, A) + b1(F, C, A, B));
          for (int Dd = 0; Dd < D; ++Dd) {
            if (fr.block(Dd) != fr.block(F)) continue;
            g2[key1].push_back(b2(F, Dd, A, B, C) + b2(F, Dd, B, C, A) + b2(F, Dd, C, A, B));
          }
        }
      }
  std::vector<CheckResult> out;
  for (auto& [key, res] : g1) out.push_back(residual_check("bianchi.first." + key, key, res, pts, tol));
  for (auto& [key, res] : g2) out.push_back(residual_check("bianchi.second." + key, key, res, pts, tol));
  return out;
}

}  // namespace jetgeom
