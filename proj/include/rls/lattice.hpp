#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rls/cell_integrals.hpp"
#include "rls/errors.hpp"

namespace rls {

using Index3 = std::array<int, 3>;

// Nodes of the cell-centred lattice h (i + 1/2, j + 1/2, k + 1/2) that
// survive a support predicate. Every node stands for its cube of side h.
struct SupportGrid {
  double h = 0.0;
  std::vector<Vec3> nodes;
  std::vector<Index3> index;
  Index3 lo{0, 0, 0};  // componentwise min of `index`
  Index3 extent{0, 0, 0};  // max - min + 1 per axis

  size_t size() const { return nodes.size(); }
  double weight() const { return h * h * h; }
  static Vec3 position(const Index3& i, double h) {
    return h * Vec3(i[0] + 0.5, i[1] + 0.5, i[2] + 0.5);
  }

  void finalize() {
    if (nodes.empty()) return;
    lo = index[0];
    Index3 hi = index[0];
    for (const auto& i : index)
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], i[a]);
        hi[a] = std::max(hi[a], i[a]);
      }
    for (int a = 0; a < 3; ++a) extent[a] = hi[a] - lo[a] + 1;
  }
};

// All cell-centred nodes inside the ball |r| <= radius accepted by `keep`.
inline SupportGrid make_support_grid(double h, double radius,
                                     const std::function<bool(const Vec3&)>& keep) {
  if (!(h > 0.0)) throw Error("make_support_grid: spacing must be positive");
  SupportGrid g;
  g.h = h;
  const int n = static_cast<int>(std::ceil(radius / h)) + 1;
  for (int i = -n; i < n; ++i)
    for (int j = -n; j < n; ++j)
      for (int k = -n; k < n; ++k) {
        const Index3 idx{i, j, k};
        const Vec3 r = SupportGrid::position(idx, h);
        if (r.norm() > radius) continue;
        if (!keep(r)) continue;
        g.nodes.push_back(r);
        g.index.push_back(idx);
      }
  g.finalize();
  return g;
}

// Table of a translation-invariant kernel on integer lattice offsets
// o in [-(e-1), e-1]^3, already multiplied by the cell volume:
//   offset 0            singular self-cell integral
//   Chebyshev ring 1,2  Gauss-Legendre cell integral
//   otherwise           midpoint value times h^3
template <class Value>
class KernelTable {
 public:
  KernelTable() = default;

  template <class Pointwise>
  KernelTable(const Index3& extent, double h, Pointwise&& kernel, const Value& self_cell)
      : extent_(extent) {
    for (int a = 0; a < 3; ++a) span_[a] = 2 * extent[a] - 1;
    values_.resize(static_cast<size_t>(span_[0]) * span_[1] * span_[2]);
    const double vol = h * h * h;
    for (int i = 0; i < span_[0]; ++i)
      for (int j = 0; j < span_[1]; ++j)
        for (int k = 0; k < span_[2]; ++k) {
          const Index3 o{i - extent[0] + 1, j - extent[1] + 1, k - extent[2] + 1};
          const int ring = std::max({std::abs(o[0]), std::abs(o[1]), std::abs(o[2])});
          const Vec3 d = h * Vec3(o[0], o[1], o[2]);
          Value v;
          if (ring == 0) {
            v = self_cell;
          } else if (int order = near_cell_order(ring); order > 0) {
            v = cell_integral(kernel, d, h, order);
          } else {
            v = kernel(d) * vol;
          }
          values_[flat(i, j, k)] = v;
        }
  }

  const Value& operator()(const Index3& o) const {
    return values_[flat(o[0] + extent_[0] - 1, o[1] + extent_[1] - 1, o[2] + extent_[2] - 1)];
  }
  const Index3& extent() const { return extent_; }
  const Index3& span() const { return span_; }

 private:
  size_t flat(int i, int j, int k) const {
    return (static_cast<size_t>(i) * span_[1] + j) * span_[2] + k;
  }
  Index3 extent_{0, 0, 0};
  Index3 span_{0, 0, 0};
  std::vector<Value> values_;
};

}  // namespace rls
