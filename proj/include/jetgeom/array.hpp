#pragma once

#include <initializer_list>
#include <numeric>
#include <vector>

#include "jetgeom/expr.hpp"

namespace jetgeom {

/// Dense row-major multi-index array of expressions.
class ExprArray {
 public:
  ExprArray() = default;
  explicit ExprArray(std::vector<int> shape) : shape_(std::move(shape)) {
    std::size_t total = 1;
    for (int s : shape_) total *= static_cast<std::size_t>(s);
    data_.assign(total, Expr(0.0));
  }

  const std::vector<int>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  template <typename... I>
  Expr& operator()(I... idx) {
    return data_[offset({static_cast<int>(idx)...})];
  }
  template <typename... I>
  const Expr& operator()(I... idx) const {
    return data_[offset({static_cast<int>(idx)...})];
  }

  Expr& at(const std::vector<int>& idx) { return data_[offset(idx)]; }
  const Expr& at(const std::vector<int>& idx) const { return data_[offset(idx)]; }

  Expr& flat(std::size_t k) { return data_[k]; }
  const Expr& flat(std::size_t k) const { return data_[k]; }
  const std::vector<Expr>& data() const { return data_; }

  std::vector<int> unflatten(std::size_t k) const {
    std::vector<int> idx(shape_.size());
    for (std::size_t r = shape_.size(); r-- > 0;) {
      idx[r] = static_cast<int>(k % static_cast<std::size_t>(shape_[r]));
      k /= static_cast<std::size_t>(shape_[r]);
    }
    return idx;
  }

  bool structurally_zero() const {
    for (const auto& e : data_)
      if (!e.is_zero()) return false;
    return true;
  }

 private:
  std::size_t offset(std::initializer_list<int> idx) const {
    if (idx.size() != shape_.size()) throw Error("ExprArray: rank mismatch");
    std::size_t k = 0;
    std::size_t r = 0;
    for (int i : idx) {
      if (i < 0 || i >= shape_[r]) throw Error("ExprArray: index out of range");
      k = k * static_cast<std::size_t>(shape_[r]) + static_cast<std::size_t>(i);
      ++r;
    }
    return k;
  }
  std::size_t offset(const std::vector<int>& idx) const {
    if (idx.size() != shape_.size()) throw Error("ExprArray: rank mismatch");
    std::size_t k = 0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] < 0 || idx[r] >= shape_[r]) throw Error("ExprArray: index out of range");
      k = k * static_cast<std::size_t>(shape_[r]) + static_cast<std::size_t>(idx[r]);
    }
    return k;
  }

  std::vector<int> shape_;
  std::vector<Expr> data_;
};

}  // namespace jetgeom
