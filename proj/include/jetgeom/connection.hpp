#pragma once

// Nonlinear connections, Gamma-linear connections and the adapted frame
// {d/dt^a, d/dx^i, d/dx^i_a} on the 1-jet space, plus transformation of
// both kinds of connection under product chart changes t~(t), x~(x).

#include <array>
#include <cmath>
#include <string>
#include <tuple>

#include "jetgeom/array.hpp"
#include "jetgeom/expr.hpp"
#include "jetgeom/model.hpp"
#include "jetgeom/sampling.hpp"

namespace jetgeom {

/// The three summands of the tangent space: T-horizontal, M-horizontal,
/// vertical.
enum class Block : std::uint8_t { T, M, V };

inline constexpr std::array<Block, 3> kBlocks{Block::T, Block::M, Block::V};

inline const char* block_name(Block b) {
  switch (b) {
    case Block::T: return "T";
    case Block::M: return "M";
    case Block::V: return "V";
  }
  return "?";
}

/// Flat indexing of the adapted frame. Vertical elements d/dx^i_a use the
/// local index i*p + a. Natural coordinates (t, x, x_a) share the layout.
struct Frame {
  Dims dims;

  int size() const { return dims.frame(); }
  int range(Block b) const {
    switch (b) {
      case Block::T: return dims.p;
      case Block::M: return dims.n;
      case Block::V: return dims.n * dims.p;
    }
    return 0;
  }
  int offset(Block b) const {
    switch (b) {
      case Block::T: return 0;
      case Block::M: return dims.p;
      case Block::V: return dims.p + dims.n;
    }
    return 0;
  }
  int index(Block b, int local) const { return offset(b) + local; }
  int t(int a) const { return a; }
  int x(int i) const { return dims.p + i; }
  int v(int i, int a) const { return dims.p + dims.n + i * dims.p + a; }
  int vlocal(int i, int a) const { return i * dims.p + a; }
  Block block(int A) const {
    if (A < dims.p) return Block::T;
    if (A < dims.p + dims.n) return Block::M;
    return Block::V;
  }
  int local(int A) const { return A - offset(block(A)); }
  // (spatial, temporal) of a vertical local index
  int vspace(int local) const { return local / dims.p; }
  int vtime(int local) const { return local % dims.p; }

  /// The natural coordinate paired with frame index A.
  Variable coordinate(int A) const {
    switch (block(A)) {
      case Block::T: return Variable::t(local(A));
      case Block::M: return Variable::x(local(A));
      case Block::V: return Variable::v(vspace(local(A)), vtime(local(A)));
    }
    return {};
  }
};

struct NonlinearConnection {
  Dims dims;
  ExprArray M;  // M^{(i)}_{(a)b} as [i][a][b]
  ExprArray N;  // N^{(i)}_{(a)j} as [i][a][j]

  static NonlinearConnection zero(Dims d) {
    return {d, ExprArray({d.n, d.p, d.p}), ExprArray({d.n, d.p, d.n})};
  }
};

/// The nine component families of a Gamma-linear connection.
enum class Family : std::uint8_t { Gbar, G, Gv, Lbar, L, Lv, Cbar, C, Cv };

inline constexpr std::array<Family, 9> kFamilies{Family::Gbar, Family::G,    Family::Gv,
                                                 Family::Lbar, Family::L,    Family::Lv,
                                                 Family::Cbar, Family::C,    Family::Cv};

inline const char* family_name(Family f) {
  static const char* names[] = {"Gbar", "G", "Gv", "Lbar", "L", "Lv", "Cbar", "C", "Cv"};
  return names[static_cast<int>(f)];
}

/// Storage shapes. Each family is stored target indices first, then source
/// indices, then the direction index (a temporal/spatial pair for the C's):
///   Gbar^a_{bg} [a][b][g]          Lbar^a_{bj} [a][b][j]
///   G^k_{ig}    [k][i][g]          L^k_{ij}    [k][i][j]
///   Gv^{(k)(b)}_{(a)(i)g} [k][b][a][i][g]
///   Lv^{(k)(b)}_{(a)(i)j} [k][b][a][i][j]
///   Cbar^{a(g)}_{b(k)} [a][b][g][k]
///   C^{k(g)}_{i(j)}    [k][i][g][j]
///   Cv^{(k)(b)(g)}_{(a)(i)(j)} [k][b][a][i][g][j]
inline std::vector<int> family_shape(Family f, Dims d) {
  const int p = d.p, n = d.n;
  switch (f) {
    case Family::Gbar: return {p, p, p};
    case Family::G: return {n, n, p};
    case Family::Gv: return {n, p, p, n, p};
    case Family::Lbar: return {p, p, n};
    case Family::L: return {n, n, n};
    case Family::Lv: return {n, p, p, n, n};
    case Family::Cbar: return {p, p, p, n};
    case Family::C: return {n, n, p, n};
    case Family::Cv: return {n, p, p, n, p, n};
  }
  return {};
}

/// Family holding the coefficients of nabla_{direction} (target block).
inline Family family_for(Block direction, Block target) {
  static const Family table[3][3] = {{Family::Gbar, Family::G, Family::Gv},
                                     {Family::Lbar, Family::L, Family::Lv},
                                     {Family::Cbar, Family::C, Family::Cv}};
  return table[static_cast<int>(direction)][static_cast<int>(target)];
}

struct GammaConnection {
  Dims dims;
  std::array<ExprArray, 9> families;

  static GammaConnection zero(Dims d) {
    GammaConnection g{d, {}};
    for (auto f : kFamilies) g.families[static_cast<int>(f)] = ExprArray(family_shape(f, d));
    return g;
  }

  ExprArray& operator[](Family f) { return families[static_cast<int>(f)]; }
  const ExprArray& operator[](Family f) const { return families[static_cast<int>(f)]; }

  /// Storage location of the coefficient in
  ///   nabla_{X_dir} X_source = coeff * X_target
  /// where dir/source/target are block-local frame indices and source and
  /// target lie in the same block. This is the only place the nine storage
  /// layouts are spelled out.
  std::pair<Family, std::vector<int>> locate(Block dir_block, Block block, int dir, int source,
                                             int target) const {
    const Frame fr{dims};
    Family f = family_for(dir_block, block);
    std::vector<int> idx;
    switch (block) {
      case Block::T:
      case Block::M:
        idx = {target, source};
        break;
      case Block::V:
        idx = {fr.vspace(target), fr.vtime(source), fr.vtime(target), fr.vspace(source)};
        break;
    }
    if (dir_block == Block::V) {
      idx.push_back(fr.vtime(dir));
      idx.push_back(fr.vspace(dir));
    } else {
      idx.push_back(dir);
    }
    return {f, idx};
  }

  const Expr& coefficient(Block dir_block, Block block, int dir, int source, int target) const {
    auto [f, idx] = locate(dir_block, block, dir, source, target);
    return (*this)[f].at(idx);
  }
  Expr& coefficient(Block dir_block, Block block, int dir, int source, int target) {
    auto [f, idx] = locate(dir_block, block, dir, source, target);
    return (*this)[f].at(idx);
  }
};

/// Full table nabla_{X_A} X_B = sum_C table(A, B, C) X_C over the adapted
/// frame; zero whenever B and C lie in different blocks.
inline ExprArray frame_coefficients(const GammaConnection& g) {
  const Frame fr{g.dims};
  const int D = fr.size();
  ExprArray table({D, D, D});
  for (Block X : kBlocks)
    for (Block K : kBlocks)
      for (int a = 0; a < fr.range(X); ++a)
        for (int b = 0; b < fr.range(K); ++b)
          for (int c = 0; c < fr.range(K); ++c)
            table(fr.index(X, a), fr.index(K, b), fr.index(K, c)) = g.coefficient(X, K, a, b, c);
  return table;
}

/// M = -H^g_{ab} x^i_g, N = gamma^i_{jm} x^m_a.
inline NonlinearConnection canonical_nlc(const ChristoffelData& cd) {
  const int p = cd.H.shape()[0], n = cd.gamma.shape()[0];
  Dims d{p, n};
  auto nlc = NonlinearConnection::zero(d);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < p; ++b) {
        std::vector<Expr> ts;
        for (int g = 0; g < p; ++g) ts.push_back(-(cd.H(g, a, b) * vvar(i, g)));
        nlc.M(i, a, b) = make_add(std::move(ts));
      }
      for (int j = 0; j < n; ++j) {
        std::vector<Expr> ts;
        for (int m = 0; m < n; ++m) ts.push_back(cd.gamma(i, j, m) * vvar(m, a));
        nlc.N(i, a, j) = make_add(std::move(ts));
      }
    }
  return nlc;
}

/// Berwald connection of the metric pair: Gbar = H, Gv = -delta H, L = gamma,
/// Lv = delta gamma, the other five families zero.
inline GammaConnection berwald(const ChristoffelData& cd) {
  const int p = cd.H.shape()[0], n = cd.gamma.shape()[0];
  auto g = GammaConnection::zero({p, n});
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b)
      for (int c = 0; c < p; ++c) g[Family::Gbar](a, b, c) = cd.H(a, b, c);
  // Gv^{(k)(b)}_{(c)(i)a} = -delta^k_i H^b_{ac}
  for (int k = 0; k < n; ++k)
    for (int b = 0; b < p; ++b)
      for (int c = 0; c < p; ++c)
        for (int a = 0; a < p; ++a) g[Family::Gv](k, b, c, k, a) = -cd.H(b, a, c);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g[Family::L](k, i, j) = cd.gamma(k, i, j);
  // Lv^{(k)(b)}_{(c)(i)j} = delta^b_c gamma^k_{ij}
  for (int k = 0; k < n; ++k)
    for (int b = 0; b < p; ++b)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g[Family::Lv](k, b, b, i, j) = cd.gamma(k, i, j);
  return g;
}

/// The adapted frame and coframe of a nonlinear connection:
///   d/dt^a = d_t^a - M^{(j)}_{(b)a} d/dx^j_b
///   d/dx^i = d_x^i - N^{(j)}_{(b)i} d/dx^j_b
///   dx^i_a + M^{(i)}_{(a)b} dt^b + N^{(i)}_{(a)j} dx^j
class FrameOperators {
 public:
  explicit FrameOperators(NonlinearConnection nlc) : nlc_(std::move(nlc)), frame_{nlc_.dims} {}

  const Frame& frame() const { return frame_; }
  const NonlinearConnection& nlc() const { return nlc_; }

  Expr delta_t(int a, const Expr& f) const {
    std::vector<Expr> ts{diff(f, Variable::t(a))};
    add_vertical(ts, f, [&](int j, int b) { return nlc_.M(j, b, a); });
    return make_add(std::move(ts));
  }
  Expr delta_x(int i, const Expr& f) const {
    std::vector<Expr> ts{diff(f, Variable::x(i))};
    add_vertical(ts, f, [&](int j, int b) { return nlc_.N(j, b, i); });
    return make_add(std::move(ts));
  }
  Expr partial_v(int i, int a, const Expr& f) const { return diff(f, Variable::v(i, a)); }

  /// X_A(f) for the frame element with flat index A.
  Expr apply(int A, const Expr& f) const {
    int l = frame_.local(A);
    switch (frame_.block(A)) {
      case Block::T: return delta_t(l, f);
      case Block::M: return delta_x(l, f);
      case Block::V: return partial_v(frame_.vspace(l), frame_.vtime(l), f);
    }
    return {};
  }

  /// Natural-coordinate components of X_A.
  std::vector<Expr> natural(int A) const {
    std::vector<Expr> c(static_cast<std::size_t>(frame_.size()));
    c[A] = Expr(1.0);
    Block b = frame_.block(A);
    int l = frame_.local(A);
    if (b == Block::V) return c;
    for (int j = 0; j < frame_.dims.n; ++j)
      for (int be = 0; be < frame_.dims.p; ++be)
        c[frame_.v(j, be)] = -(b == Block::T ? nlc_.M(j, be, l) : nlc_.N(j, be, l));
    return c;
  }

  /// Natural-coordinate components of the coframe element dual to X_K.
  std::vector<Expr> coframe(int K) const {
    std::vector<Expr> c(static_cast<std::size_t>(frame_.size()));
    c[K] = Expr(1.0);
    if (frame_.block(K) != Block::V) return c;
    int l = frame_.local(K);
    int i = frame_.vspace(l), a = frame_.vtime(l);
    for (int b = 0; b < frame_.dims.p; ++b) c[frame_.t(b)] = nlc_.M(i, a, b);
    for (int j = 0; j < frame_.dims.n; ++j) c[frame_.x(j)] = nlc_.N(i, a, j);
    return c;
  }

  /// Adapted components -> natural components of a vector field.
  std::vector<Expr> to_natural(const std::vector<Expr>& adapted) const {
    std::vector<Expr> out = adapted;
    for (int j = 0; j < frame_.dims.n; ++j)
      for (int b = 0; b < frame_.dims.p; ++b) {
        std::vector<Expr> ts{adapted[frame_.v(j, b)]};
        for (int a = 0; a < frame_.dims.p; ++a) ts.push_back(-(adapted[frame_.t(a)] * nlc_.M(j, b, a)));
        for (int i = 0; i < frame_.dims.n; ++i) ts.push_back(-(adapted[frame_.x(i)] * nlc_.N(j, b, i)));
        out[frame_.v(j, b)] = make_add(std::move(ts));
      }
    return out;
  }

  /// Natural components -> adapted components of a vector field.
  std::vector<Expr> from_natural(const std::vector<Expr>& nat) const {
    std::vector<Expr> out = nat;
    for (int j = 0; j < frame_.dims.n; ++j)
      for (int b = 0; b < frame_.dims.p; ++b) {
        std::vector<Expr> ts{nat[frame_.v(j, b)]};
        for (int a = 0; a < frame_.dims.p; ++a) ts.push_back(nat[frame_.t(a)] * nlc_.M(j, b, a));
        for (int i = 0; i < frame_.dims.n; ++i) ts.push_back(nat[frame_.x(i)] * nlc_.N(j, b, i));
        out[frame_.v(j, b)] = make_add(std::move(ts));
      }
    return out;
  }

 private:
  template <typename Coef>
  void add_vertical(std::vector<Expr>& ts, const Expr& f, Coef coef) const {
    for (int j = 0; j < frame_.dims.n; ++j)
      for (int b = 0; b < frame_.dims.p; ++b) {
        const Expr& c = coef(j, b);
        if (c.is_zero()) continue;
        Expr d = diff(f, Variable::v(j, b));
        if (d.is_zero()) continue;
        ts.push_back(-(c * d));
      }
  }

  NonlinearConnection nlc_;
  Frame frame_;
};

inline FrameOperators adapted_frame(const NonlinearConnection& nlc) { return FrameOperators(nlc); }

// ---------------------------------------------------------------------------
// Chart changes

/// A product chart change t~ = t~(t), x~ = x~(x) with user-supplied inverse.
/// Forward maps are written in the old coordinates; inverse maps are written
/// using the same variable names, read as the new coordinates.
struct ChartChange {
  Dims dims;
  std::vector<Expr> t_forward, t_inverse;
  std::vector<Expr> x_forward, x_inverse;

  static ChartChange identity(Dims d) {
    ChartChange c{d, {}, {}, {}, {}};
    for (int a = 0; a < d.p; ++a) {
      c.t_forward.push_back(tvar(a));
      c.t_inverse.push_back(tvar(a));
    }
    for (int i = 0; i < d.n; ++i) {
      c.x_forward.push_back(xvar(i));
      c.x_inverse.push_back(xvar(i));
    }
    return c;
  }

  ChartChange inverted() const { return {dims, t_inverse, t_forward, x_inverse, x_forward}; }

  void validate() const {
    if (static_cast<int>(t_forward.size()) != dims.p || static_cast<int>(t_inverse.size()) != dims.p ||
        static_cast<int>(x_forward.size()) != dims.n || static_cast<int>(x_inverse.size()) != dims.n)
      throw ValidationError("chart change has wrong number of components");
    auto only = [](const std::vector<Expr>& es, VarKind k, const char* what) {
      for (const auto& e : es)
        for (const auto& v : variables(e))
          if (v.kind != k)
            throw ValidationError(std::string("mixed chart changes are not supported: ") + what +
                                  " depends on " + v.name());
    };
    only(t_forward, VarKind::temporal, "t map");
    only(t_inverse, VarKind::temporal, "t inverse");
    only(x_forward, VarKind::spatial, "x map");
    only(x_inverse, VarKind::spatial, "x inverse");
  }
};

/// Everything derived from a chart change on the jet level: Jacobians in
/// old coordinates, the induced jet coordinate maps, and the block Jacobian
/// of the adapted frame.
class JetChange {
 public:
  explicit JetChange(ChartChange c) : change_(std::move(c)), frame_{change_.dims} {
    change_.validate();
    const Dims d = change_.dims;
    const int p = d.p, n = d.n;
    jt_ = ExprArray({p, p});
    jt_inv_ = ExprArray({p, p});
    jx_ = ExprArray({n, n});
    jx_inv_ = ExprArray({n, n});
    jt_new_ = ExprArray({p, p});
    jx_inv_new_ = ExprArray({n, n});
    auto t_fwd = [&](const Variable& v) -> std::optional<Expr> {
      if (v.kind == VarKind::temporal) return change_.t_forward[v.temporal];
      return std::nullopt;
    };
    auto x_fwd = [&](const Variable& v) -> std::optional<Expr> {
      if (v.kind == VarKind::spatial) return change_.x_forward[v.spatial];
      return std::nullopt;
    };
    auto t_inv = [&](const Variable& v) -> std::optional<Expr> {
      if (v.kind == VarKind::temporal) return change_.t_inverse[v.temporal];
      return std::nullopt;
    };
    for (int m = 0; m < p; ++m)
      for (int a = 0; a < p; ++a) {
        jt_(m, a) = diff(change_.t_forward[m], Variable::t(a));
        jt_inv_(m, a) = substitute(diff(change_.t_inverse[m], Variable::t(a)), t_fwd);
        jt_new_(m, a) = substitute(jt_(m, a), t_inv);
      }
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        jx_(j, k) = diff(change_.x_forward[j], Variable::x(k));
        jx_inv_new_(j, k) = diff(change_.x_inverse[j], Variable::x(k));
        jx_inv_(j, k) = substitute(jx_inv_new_(j, k), x_fwd);
      }
    // x~^j_b = (dx~^j/dx^k) x^k_g (dt^g/dt~^b), in old coordinates
    vel_new_of_old_ = ExprArray({n, p});
    vel_old_of_new_ = ExprArray({n, p});
    for (int j = 0; j < n; ++j)
      for (int b = 0; b < p; ++b) {
        std::vector<Expr> ts, us;
        for (int k = 0; k < n; ++k)
          for (int g = 0; g < p; ++g) {
            ts.push_back(jx_(j, k) * vvar(k, g) * jt_inv_(g, b));
            // x^j_b = (dx^j/dx~^k) x~^k_g (dt~^g/dt^b), in new coordinates
            us.push_back(jx_inv_new_(j, k) * vvar(k, g) * jt_new_(g, b));
          }
        vel_new_of_old_(j, b) = make_add(std::move(ts));
        vel_old_of_new_(j, b) = make_add(std::move(us));
      }
  }

  const ChartChange& change() const { return change_; }
  const Dims& dims() const { return change_.dims; }

  /// dt~^m/dt^a, dt^g/dt~^b, dx~^j/dx^k, dx^k/dx~^j; all in old coordinates.
  const ExprArray& jt() const { return jt_; }
  const ExprArray& jt_inv() const { return jt_inv_; }
  const ExprArray& jx() const { return jx_; }
  const ExprArray& jx_inv() const { return jx_inv_; }

  /// New coordinate (as function of old) for a variable of the new chart.
  Expr new_of_old(const Variable& v) const {
    switch (v.kind) {
      case VarKind::temporal: return change_.t_forward[v.temporal];
      case VarKind::spatial: return change_.x_forward[v.spatial];
      case VarKind::velocity: return vel_new_of_old_(v.spatial, v.temporal);
    }
    return {};
  }
  Expr old_of_new(const Variable& v) const {
    switch (v.kind) {
      case VarKind::temporal: return change_.t_inverse[v.temporal];
      case VarKind::spatial: return change_.x_inverse[v.spatial];
      case VarKind::velocity: return vel_old_of_new_(v.spatial, v.temporal);
    }
    return {};
  }

  /// Rewrites an old-chart function in the new coordinates.
  Expr to_new(const Expr& e) const {
    return substitute(e, [&](const Variable& v) -> std::optional<Expr> { return old_of_new(v); });
  }
  std::vector<Expr> to_new(const std::vector<Expr>& es) const {
    return substitute(es, [&](const Variable& v) -> std::optional<Expr> { return old_of_new(v); });
  }
  std::vector<Expr> to_old(const std::vector<Expr>& es) const {
    return substitute(es, [&](const Variable& v) -> std::optional<Expr> { return new_of_old(v); });
  }
  /// Componentwise chart rewrite of a whole array.
  ExprArray to_new(const ExprArray& a) const { return rewrite(a, true); }
  ExprArray to_old(const ExprArray& a) const { return rewrite(a, false); }

  /// Rewrites a new-chart function in the old coordinates.
  Expr to_old(const Expr& e) const {
    return substitute(e, [&](const Variable& v) -> std::optional<Expr> { return new_of_old(v); });
  }

  /// Block Jacobian of the adapted frame: X_C = sum_C' lambda(C', C) X~_C'
  /// for block-local indices of the given block (old coordinates).
  Expr lambda(Block b, int new_local, int old_local) const {
    switch (b) {
      case Block::T: return jt_(new_local, old_local);
      case Block::M: return jx_(new_local, old_local);
      case Block::V:
        // d/dx^i_a = (dx~^j/dx^i)(dt^a/dt~^b) d/dx~^j_b
        return jx_(frame_.vspace(new_local), frame_.vspace(old_local)) *
               jt_inv_(frame_.vtime(old_local), frame_.vtime(new_local));
    }
    return {};
  }
  /// Inverse block Jacobian: X~_C' = sum_C lambda_inv(C, C') X_C.
  Expr lambda_inv(Block b, int old_local, int new_local) const {
    switch (b) {
      case Block::T: return jt_inv_(old_local, new_local);
      case Block::M: return jx_inv_(old_local, new_local);
      case Block::V:
        return jx_inv_(frame_.vspace(old_local), frame_.vspace(new_local)) *
               jt_(frame_.vtime(new_local), frame_.vtime(old_local));
    }
    return {};
  }

 private:
  ExprArray rewrite(const ExprArray& a, bool forward) const {
    auto vals = forward ? to_new(a.data()) : to_old(a.data());
    ExprArray out(a.shape());
    for (std::size_t k = 0; k < vals.size(); ++k) out.flat(k) = vals[k];
    return out;
  }

  ChartChange change_;
  Frame frame_;
  ExprArray jt_, jt_inv_, jx_, jx_inv_;
  ExprArray jt_new_, jx_inv_new_;
  ExprArray vel_new_of_old_, vel_old_of_new_;
};

namespace detail {

inline std::vector<std::vector<double>> invert_numeric(std::vector<std::vector<double>> a) {
  const int n = static_cast<int>(a.size());
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    if (std::fabs(a[piv][c]) < 1e-12) throw ValidationError("singular linear map");
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    double s = a[c][c];
    for (int k = 0; k < n; ++k) {
      a[c][k] /= s;
      inv[c][k] /= s;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      double f = a[r][c];
      for (int k = 0; k < n; ++k) {
        a[r][k] -= f * a[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

// z = A q(y) + b with q_0 = y_0 + c_0 y_0^2, q_k = y_k + c_k y_{k-1}^2.
inline std::pair<std::vector<Expr>, std::vector<Expr>> random_quadratic_map(
    int size, Rng& rng, const std::function<Expr(int)>& var) {
  std::vector<double> c(size), b(size);
  std::vector<std::vector<double>> A(size, std::vector<double>(size));
  for (int k = 0; k < size; ++k) c[k] = rng.uniform(0.05, 0.15);
  for (int r = 0; r < size; ++r)
    for (int k = 0; k < size; ++k) A[r][k] = (r == k ? 1.0 : 0.0) + rng.uniform(-0.2, 0.2);
  for (int k = 0; k < size; ++k) b[k] = rng.uniform(-0.3, 0.3);
  auto Ainv = invert_numeric(A);

  std::vector<Expr> q(size);
  for (int k = 0; k < size; ++k) {
    Expr prev = k == 0 ? var(0) : var(k - 1);
    q[k] = var(k) + c[k] * prev * prev;
  }
  std::vector<Expr> fwd(size), inv(size), qi(size);
  for (int r = 0; r < size; ++r) {
    std::vector<Expr> ts{Expr(b[r])};
    for (int k = 0; k < size; ++k) ts.push_back(A[r][k] * q[k]);
    fwd[r] = make_add(std::move(ts));
  }
  for (int r = 0; r < size; ++r) {
    std::vector<Expr> ts;
    for (int k = 0; k < size; ++k) ts.push_back(Ainv[r][k] * (var(k) - b[k]));
    qi[r] = make_add(std::move(ts));
  }
  inv[0] = (pow(1 + 4 * c[0] * qi[0], Rational(1, 2)) - 1) / (2 * c[0]);
  for (int k = 1; k < size; ++k) inv[k] = qi[k] - c[k] * inv[k - 1] * inv[k - 1];
  return {fwd, inv};
}

}  // namespace detail

/// Seeded invertible chart change, quadratic in each factor, with exact
/// inverse. Intended for sampling boxes within [-1.5, 1.5].
inline ChartChange random_quadratic_change(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  ChartChange c{d, {}, {}, {}, {}};
  std::tie(c.t_forward, c.t_inverse) = detail::random_quadratic_map(d.p, rng, tvar);
  std::tie(c.x_forward, c.x_inverse) = detail::random_quadratic_map(d.n, rng, xvar);
  return c;
}

/// True when forward and inverse maps compose to the identity on the box.
inline bool change_is_consistent(const ChartChange& c, const SampleConfig& cfg) {
  auto compose = [&](const std::vector<Expr>& outer, const std::vector<Expr>& inner, VarKind k) {
    for (std::size_t r = 0; r < outer.size(); ++r) {
      Expr e = substitute(outer[r], [&](const Variable& v) -> std::optional<Expr> {
        if (v.kind == k) return inner[k == VarKind::temporal ? v.temporal : v.spatial];
        return std::nullopt;
      });
      Expr id = k == VarKind::temporal ? tvar(static_cast<int>(r)) : xvar(static_cast<int>(r));
      if (!equivalent(e, id, c.dims, cfg)) return false;
    }
    return true;
  };
  return compose(c.t_forward, c.t_inverse, VarKind::temporal) &&
         compose(c.x_forward, c.x_inverse, VarKind::spatial) &&
         compose(c.t_inverse, c.t_forward, VarKind::temporal) &&
         compose(c.x_inverse, c.x_forward, VarKind::spatial);
}

/// Nonlinear connection components in the new chart, solved from
///   M~^{(j)}_{(b)m} dt~^m/dt^a = M^{(k)}_{(g)a} dx~^j/dx^k dt^g/dt~^b - dx~^j_b/dt^a
///   N~^{(j)}_{(b)k} dx~^k/dx^i = N^{(k)}_{(g)i} dx~^j/dx^k dt^g/dt~^b - dx~^j_b/dx^i
inline NonlinearConnection transform_nlc(const NonlinearConnection& nlc, const JetChange& jc) {
  const Dims d = nlc.dims;
  const int p = d.p, n = d.n;
  auto out = NonlinearConnection::zero(d);
  for (int j = 0; j < n; ++j)
    for (int b = 0; b < p; ++b) {
      Expr xt = jc.new_of_old(Variable::v(j, b));
      std::vector<Expr> rhs_t(static_cast<std::size_t>(p)), rhs_x(static_cast<std::size_t>(n));
      for (int a = 0; a < p; ++a) {
        std::vector<Expr> ts{-diff(xt, Variable::t(a))};
        for (int k = 0; k < n; ++k)
          for (int g = 0; g < p; ++g) ts.push_back(nlc.M(k, g, a) * jc.jx()(j, k) * jc.jt_inv()(g, b));
        rhs_t[a] = make_add(std::move(ts));
      }
      for (int i = 0; i < n; ++i) {
        std::vector<Expr> ts{-diff(xt, Variable::x(i))};
        for (int k = 0; k < n; ++k)
          for (int g = 0; g < p; ++g) ts.push_back(nlc.N(k, g, i) * jc.jx()(j, k) * jc.jt_inv()(g, b));
        rhs_x[i] = make_add(std::move(ts));
      }
      for (int m = 0; m < p; ++m) {
        std::vector<Expr> ts;
        for (int a = 0; a < p; ++a) ts.push_back(rhs_t[a] * jc.jt_inv()(a, m));
        out.M(j, b, m) = make_add(std::move(ts));
      }
      for (int k = 0; k < n; ++k) {
        std::vector<Expr> ts;
        for (int i = 0; i < n; ++i) ts.push_back(rhs_x[i] * jc.jx_inv()(i, k));
        out.N(j, b, k) = make_add(std::move(ts));
      }
    }
  out.M = jc.to_new(out.M);
  out.N = jc.to_new(out.N);
  return out;
}

/// Gamma-linear connection components in the new chart. With the block
/// Jacobian X_B = lambda(B', B) X~_B', the defining relations give
///   conn~(A', B', C') = lambda_inv(A, A') lambda_inv(B, B')
///       * [conn(A, B, C) lambda(C', C) - X_A(lambda(C', B))]
/// which is the componentwise content of the nine transformation laws.
inline GammaConnection transform_gamma(const GammaConnection& g, const JetChange& jc) {
  const Frame fr{g.dims};
  auto out = GammaConnection::zero(g.dims);
  for (Block X : kBlocks)
    for (Block K : kBlocks) {
      const int nx = fr.range(X), nk = fr.range(K);
      // bracket(a, b, c') for old direction a, old source b, new target c'
      std::vector<Expr> bracket(static_cast<std::size_t>(nx * nk * nk));
      for (int a = 0; a < nx; ++a) {
        Variable coord = fr.coordinate(fr.index(X, a));
        for (int b = 0; b < nk; ++b)
          for (int c2 = 0; c2 < nk; ++c2) {
            std::vector<Expr> ts{-diff(jc.lambda(K, c2, b), coord)};
            for (int c = 0; c < nk; ++c) {
              const Expr& coef = g.coefficient(X, K, a, b, c);
              if (!coef.is_zero()) ts.push_back(coef * jc.lambda(K, c2, c));
            }
            bracket[(a * nk + b) * nk + c2] = make_add(std::move(ts));
          }
      }
      for (int a2 = 0; a2 < nx; ++a2)
        for (int b2 = 0; b2 < nk; ++b2)
          for (int c2 = 0; c2 < nk; ++c2) {
            std::vector<Expr> ts;
            for (int a = 0; a < nx; ++a) {
              Expr la = jc.lambda_inv(X, a, a2);
              if (la.is_zero()) continue;
              for (int b = 0; b < nk; ++b) {
                const Expr& br = bracket[(a * nk + b) * nk + c2];
                if (br.is_zero()) continue;
                Expr lb = jc.lambda_inv(K, b, b2);
                if (lb.is_zero()) continue;
                ts.push_back(la * lb * br);
              }
            }
            out.coefficient(X, K, a2, b2, c2) = make_add(std::move(ts));
          }
    }
  std::vector<Expr> all;
  for (const auto& fam : out.families) all.insert(all.end(), fam.data().begin(), fam.data().end());
  all = jc.to_new(all);
  std::size_t at = 0;
  for (auto& fam : out.families)
    for (std::size_t k = 0; k < fam.size(); ++k) fam.flat(k) = all[at++];
  return out;
}

}  // namespace jetgeom
