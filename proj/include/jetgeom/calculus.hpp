#pragma once

// Distinguished tensors and the T-horizontal, M-horizontal and vertical
// covariant derivatives of a Gamma-linear connection.
//
// A slot addresses one block of the adapted frame. A V slot carries a
// (spatial, temporal) pair as the single local index i*p + a. Slots of the
// whole frame (space E) are used by the frame-level identity checks.

#include <string>
#include <vector>

#include "jetgeom/array.hpp"
#include "jetgeom/connection.hpp"

namespace jetgeom {

enum class Space : std::uint8_t { T, M, V, E };

inline Space space_of(Block b) {
  switch (b) {
    case Block::T: return Space::T;
    case Block::M: return Space::M;
    case Block::V: return Space::V;
  }
  return Space::E;
}

struct IndexSlot {
  Space space = Space::T;
  bool upper = true;

  static IndexSlot up(Space s) { return {s, true}; }
  static IndexSlot down(Space s) { return {s, false}; }

  int range(Dims d) const {
    switch (space) {
      case Space::T: return d.p;
      case Space::M: return d.n;
      case Space::V: return d.n * d.p;
      case Space::E: return d.frame();
    }
    return 0;
  }
  /// Flat frame index of a local index of this slot.
  int frame_index(Dims d, int local) const {
    Frame fr{d};
    switch (space) {
      case Space::T: return fr.index(Block::T, local);
      case Space::M: return fr.index(Block::M, local);
      case Space::V: return fr.index(Block::V, local);
      case Space::E: return local;
    }
    return 0;
  }
  bool dual_of(const IndexSlot& o) const { return space == o.space && upper != o.upper; }
  bool operator==(const IndexSlot&) const = default;

  std::string name() const {
    static const char* names[] = {"T", "M", "V", "E"};
    return std::string(names[static_cast<int>(space)]) + (upper ? "^" : "_");
  }
};

using Signature = std::vector<IndexSlot>;

class DTensor {
 public:
  DTensor() = default;
  DTensor(Dims d, Signature sig) : dims_(d), sig_(std::move(sig)), comp_(shape_of(d, sig_)) {}
  DTensor(Dims d, Signature sig, ExprArray comps) : dims_(d), sig_(std::move(sig)), comp_(std::move(comps)) {
    if (comp_.shape() != shape_of(dims_, sig_)) throw Error("DTensor: components do not match signature");
  }

  static DTensor scalar(Dims d, Expr f) {
    DTensor t(d, {});
    t.comp_.flat(0) = std::move(f);
    return t;
  }
  /// Identity d-tensor delta^A_B on one space.
  static DTensor kronecker(Dims d, Space s) {
    DTensor t(d, {IndexSlot::up(s), IndexSlot::down(s)});
    int r = t.sig_[0].range(d);
    for (int k = 0; k < r; ++k) t.comp_(k, k) = 1.0;
    return t;
  }

  static std::vector<int> shape_of(Dims d, const Signature& sig) {
    std::vector<int> shape;
    for (const auto& s : sig) shape.push_back(s.range(d));
    return shape;
  }

  const Dims& dims() const { return dims_; }
  const Signature& signature() const { return sig_; }
  std::size_t rank() const { return sig_.size(); }
  const ExprArray& components() const { return comp_; }
  ExprArray& components() { return comp_; }
  std::size_t size() const { return comp_.size(); }

  const Expr& at(const std::vector<int>& idx) const { return comp_.at(idx); }
  Expr& at(const std::vector<int>& idx) { return comp_.at(idx); }
  template <typename... I>
  const Expr& operator()(I... idx) const {
    return comp_(idx...);
  }
  template <typename... I>
  Expr& operator()(I... idx) {
    return comp_(idx...);
  }

 private:
  Dims dims_{1, 1};
  Signature sig_;
  ExprArray comp_{std::vector<int>{}};
};

/// A d-vector field X = X^a d/dt^a + X^i d/dx^i + X^{(i)}_{(a)} d/dx^i_a,
/// stored as Xv[i][a].
struct DVectorField {
  Dims dims;
  std::vector<Expr> Xt, Xm;
  ExprArray Xv;

  static DVectorField zero(Dims d) {
    return {d, std::vector<Expr>(static_cast<std::size_t>(d.p)), std::vector<Expr>(static_cast<std::size_t>(d.n)),
            ExprArray({d.n, d.p})};
  }
  /// Components on the whole adapted frame.
  std::vector<Expr> frame() const {
    std::vector<Expr> out(Xt);
    out.insert(out.end(), Xm.begin(), Xm.end());
    out.insert(out.end(), Xv.data().begin(), Xv.data().end());
    return out;
  }
  static DVectorField from_frame(Dims d, const std::vector<Expr>& c) {
    auto X = zero(d);
    Frame fr{d};
    for (int a = 0; a < d.p; ++a) X.Xt[a] = c[fr.t(a)];
    for (int i = 0; i < d.n; ++i) X.Xm[i] = c[fr.x(i)];
    for (int i = 0; i < d.n; ++i)
      for (int a = 0; a < d.p; ++a) X.Xv(i, a) = c[fr.v(i, a)];
    return X;
  }
  DTensor as_tensor() const {
    DTensor t(dims, {IndexSlot::up(Space::E)});
    auto c = frame();
    for (std::size_t k = 0; k < c.size(); ++k) t.components().flat(k) = c[k];
    return t;
  }
  DTensor part(Space s) const {
    DTensor t(dims, {IndexSlot::up(s)});
    const std::vector<Expr>* src = nullptr;
    switch (s) {
      case Space::T: src = &Xt; break;
      case Space::M: src = &Xm; break;
      case Space::V: src = &Xv.data(); break;
      case Space::E: return as_tensor();
    }
    for (std::size_t k = 0; k < src->size(); ++k) t.components().flat(k) = (*src)[k];
    return t;
  }
};

/// Covariant derivative of a Gamma-linear connection along adapted frame
/// directions. For an upper slot the connection term is
/// +D^{..c..} conn(A, c, I_s), for a lower slot -D_{..c..} conn(A, I_s, c);
/// this one table drives every rank and slot mix.
class CovariantDerivative {
 public:
  CovariantDerivative(const GammaConnection& g, const NonlinearConnection& nlc)
      : dims_(g.dims), table_(frame_coefficients(g)), ops_(nlc) {}

  const Dims& dims() const { return dims_; }
  const ExprArray& table() const { return table_; }
  const FrameOperators& ops() const { return ops_; }

  /// Component of D_{:A} at multi-index idx for frame direction A.
  Expr component(const DTensor& D, const std::vector<int>& idx, int A) const {
    std::vector<Expr> ts{ops_.apply(A, D.at(idx))};
    std::vector<int> j = idx;
    const auto& sig = D.signature();
    for (std::size_t s = 0; s < sig.size(); ++s) {
      const IndexSlot& slot = sig[s];
      const int r = slot.range(dims_);
      const int own = slot.frame_index(dims_, idx[s]);
      for (int c = 0; c < r; ++c) {
        const int fc = slot.frame_index(dims_, c);
        const Expr& coef = slot.upper ? table_(A, fc, own) : table_(A, own, fc);
        if (coef.is_zero()) continue;
        j[s] = c;
        const Expr& val = D.at(j);
        if (val.is_zero()) continue;
        ts.push_back(slot.upper ? val * coef : -(val * coef));
      }
      j[s] = idx[s];
    }
    return make_add(std::move(ts));
  }

  /// Appends one lower slot of the given space (E: every frame direction).
  DTensor along(const DTensor& D, Space dir) const {
    Signature sig = D.signature();
    IndexSlot out_slot = IndexSlot::down(dir);
    sig.push_back(out_slot);
    DTensor out(dims_, sig);
    const int r = out_slot.range(dims_);
    const std::size_t n_in = D.size();
    for (std::size_t k = 0; k < n_in; ++k) {
      std::vector<int> idx = D.components().unflatten(k);
      for (int e = 0; e < r; ++e) out.components().flat(k * static_cast<std::size_t>(r) + e) =
          component(D, idx, out_slot.frame_index(dims_, e));
    }
    return out;
  }

 private:
  Dims dims_;
  ExprArray table_;
  FrameOperators ops_;
};

inline DTensor cov_deriv_T(const DTensor& D, const GammaConnection& g, const NonlinearConnection& nlc) {
  return CovariantDerivative(g, nlc).along(D, Space::T);
}
inline DTensor cov_deriv_M(const DTensor& D, const GammaConnection& g, const NonlinearConnection& nlc) {
  return CovariantDerivative(g, nlc).along(D, Space::M);
}
inline DTensor cov_deriv_v(const DTensor& D, const GammaConnection& g, const NonlinearConnection& nlc) {
  return CovariantDerivative(g, nlc).along(D, Space::V);
}
inline DTensor cov_deriv_full(const DTensor& D, const GammaConnection& g, const NonlinearConnection& nlc) {
  return CovariantDerivative(g, nlc).along(D, Space::E);
}

inline DTensor add(const DTensor& a, const DTensor& b) {
  if (a.signature() != b.signature()) throw Error("add: signatures differ");
  DTensor out(a.dims(), a.signature());
  for (std::size_t k = 0; k < a.size(); ++k) out.components().flat(k) = a.components().flat(k) + b.components().flat(k);
  return out;
}

inline DTensor subtract(const DTensor& a, const DTensor& b) {
  if (a.signature() != b.signature()) throw Error("subtract: signatures differ");
  DTensor out(a.dims(), a.signature());
  for (std::size_t k = 0; k < a.size(); ++k) out.components().flat(k) = a.components().flat(k) - b.components().flat(k);
  return out;
}

/// (a (x) b) with the slots of b following those of a.
inline DTensor tensor_product(const DTensor& a, const DTensor& b) {
  Signature sig = a.signature();
  sig.insert(sig.end(), b.signature().begin(), b.signature().end());
  DTensor out(a.dims(), sig);
  const std::size_t nb = b.size();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < nb; ++j)
      out.components().flat(i * nb + j) = a.components().flat(i) * b.components().flat(j);
  return out;
}

/// Contraction of a dual slot pair; V pairs sum over both sub-indices.
inline DTensor contract(const DTensor& D, std::size_t sa, std::size_t sb) {
  const auto& sig = D.signature();
  if (sa >= sig.size() || sb >= sig.size() || sa == sb) throw Error("contract: bad slot");
  if (!sig[sa].dual_of(sig[sb])) throw Error("contract: slots are not a dual pair");
  Signature out_sig;
  for (std::size_t s = 0; s < sig.size(); ++s)
    if (s != sa && s != sb) out_sig.push_back(sig[s]);
  DTensor out(D.dims(), out_sig);
  const int r = sig[sa].range(D.dims());
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::vector<int> oi = out.components().unflatten(k);
    std::vector<int> full(sig.size());
    for (std::size_t s = 0, o = 0; s < sig.size(); ++s)
      if (s != sa && s != sb) full[s] = oi[o++];
    std::vector<Expr> ts;
    for (int c = 0; c < r; ++c) {
      full[sa] = full[sb] = c;
      ts.push_back(D.at(full));
    }
    out.components().flat(k) = make_add(std::move(ts));
  }
  return out;
}

/// Frame-block Jacobian entry for one slot: transforms component index
/// `old_local` of an upper slot into `new_local` (lower slots use the inverse).
inline Expr slot_jacobian(const JetChange& jc, const IndexSlot& slot, int new_local, int old_local) {
  Dims d = jc.dims();
  if (slot.space == Space::E) {
    Frame fr{d};
    Block bn = fr.block(new_local), bo = fr.block(old_local);
    if (bn != bo) return Expr(0.0);
    return slot.upper ? jc.lambda(bn, fr.local(new_local), fr.local(old_local))
                      : jc.lambda_inv(bn, fr.local(old_local), fr.local(new_local));
  }
  Block b = slot.space == Space::T ? Block::T : slot.space == Space::M ? Block::M : Block::V;
  return slot.upper ? jc.lambda(b, new_local, old_local) : jc.lambda_inv(b, old_local, new_local);
}

/// Components of D in the new chart, slot by slot.
inline DTensor transform_tensor(const DTensor& D, const JetChange& jc) {
  const Dims d = D.dims();
  const auto& sig = D.signature();
  // contract one slot at a time
  ExprArray cur = D.components();
  for (std::size_t s = 0; s < sig.size(); ++s) {
    ExprArray next(cur.shape());
    const int r = sig[s].range(d);
    std::vector<std::vector<Expr>> J(r, std::vector<Expr>(r));
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b) J[a][b] = slot_jacobian(jc, sig[s], a, b);
    for (std::size_t k = 0; k < cur.size(); ++k) {
      std::vector<int> idx = cur.unflatten(k);
      const int target = idx[s];
      std::vector<Expr> ts;
      for (int b = 0; b < r; ++b) {
        if (J[target][b].is_zero()) continue;
        idx[s] = b;
        const Expr& v = cur.at(idx);
        if (!v.is_zero()) ts.push_back(J[target][b] * v);
      }
      next.flat(k) = make_add(std::move(ts));
    }
    cur = std::move(next);
  }
  return DTensor(d, sig, jc.to_new(cur));
}

}  // namespace jetgeom
