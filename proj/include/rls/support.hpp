#pragma once

#include <memory>
#include <vector>

#include "rls/lattice.hpp"
#include "rls/potentials.hpp"

namespace rls {

// Lattice nodes carrying a cell-averaged potential whose magnitude exceeds
// support_tol * max |V|. The ball searched is where every analytic term
// has decayed below support_tol of its strength.
template <class Value>
struct SampledSupport {
  std::shared_ptr<SupportGrid> grid;
  std::vector<Value> values;
};

template <class Value, class Assemble, class Magnitude>
SampledSupport<Value> sample_support(const PotentialSpec& spec, double h, double support_tol,
                                     Assemble&& assemble, Magnitude&& magnitude) {
  if (!(h > 0.0)) throw ConfigError("grid.h", "spacing must be positive");
  SampledSupport<Value> out;
  out.grid = std::make_shared<SupportGrid>();
  out.grid->h = h;
  if (spec.is_zero()) return out;
  const double radius = spec.support_radius(support_tol) + 0.5 * std::sqrt(3.0) * h;
  const SupportGrid candidates = make_support_grid(h, radius, [](const Vec3&) { return true; });
  std::vector<Value> vals(candidates.size());
  double vmax = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    vals[i] = cell_average<Value>(spec, candidates.nodes[i], h, assemble);
    vmax = std::max(vmax, magnitude(vals[i]));
  }
  if (vmax == 0.0) return out;
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (magnitude(vals[i]) <= support_tol * vmax) continue;
    out.grid->nodes.push_back(candidates.nodes[i]);
    out.grid->index.push_back(candidates.index[i]);
    out.values.push_back(vals[i]);
  }
  out.grid->finalize();
  return out;
}

}  // namespace rls
