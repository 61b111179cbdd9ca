#pragma once

#include <cmath>
#include <complex>

#include "rls/kernels.hpp"
#include "rls/quadrature.hpp"

namespace rls {

namespace detail {
// I(a) = int_0^1 t e^{i a t} dt
inline cplx ramp_exponential(cplx a) {
  if (std::abs(a) < 0.5) {
    cplx term = 1.0, sum = 0.0;
    for (int n = 0; n < 30; ++n) {
      sum += term / double(n + 2);
      term *= kI * a / double(n + 1);
    }
    return sum;
  }
  const cplx e = std::exp(kI * a);
  return e / (kI * a) + (e - 1.0) / (a * a);
}
}  // namespace detail

// Integral of e^{i kappa |r|} / (4 pi |r|) over the cube [-h/2, h/2]^3.
// The cube is split into six pyramids with apex at the origin; the radial
// integral is done in closed form and the face integral by Gauss-Legendre.
inline cplx cube_helmholtz_integral(cplx kappa, double h, int order = 24) {
  const auto& gl = cached_gauss_legendre(order);
  cplx face = 0.0;
  for (int i = 0; i < order; ++i) {
    const double u = 0.5 * gl.nodes[i];
    for (int j = 0; j < order; ++j) {
      const double v = 0.5 * gl.nodes[j];
      const double p = std::sqrt(u * u + v * v + 0.25);
      face += 0.25 * gl.weights[i] * gl.weights[j] *
              detail::ramp_exponential(kappa * h * p) / p;
    }
  }
  return 6.0 * 0.5 * h * h * face / (4.0 * kPi);
}

// Constant C0 with int_cube 1/(4 pi |r|) = C0 h^2.
inline double cube_coulomb_constant() {
  static const double c0 = cube_helmholtz_integral(0.0, 1.0, 48).real();
  return c0;
}

// Integral of a kernel over the cube of side h centred at `center`, by a
// tensor Gauss-Legendre rule. Intended for cells that do not contain the
// kernel's singularity.
template <class Kernel>
auto cell_integral(Kernel&& kernel, const Vec3& center, double h, int order) {
  const auto& gl = cached_gauss_legendre(order);
  using Value = decltype(kernel(center));
  Value sum = kernel(center) * 0.0;
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) {
      for (int k = 0; k < order; ++k) {
        const Vec3 p = center + 0.5 * h * Vec3(gl.nodes[i], gl.nodes[j], gl.nodes[k]);
        const double w = gl.weights[i] * gl.weights[j] * gl.weights[k];
        sum += kernel(p) * w;
      }
    }
  }
  return Value(sum * (h * h * h / 8.0));
}

// Quadrature order used for a neighbour cell at Chebyshev lattice distance
// `ring`; 0 means plain midpoint.
inline int near_cell_order(int ring) {
  switch (ring) {
    case 1: return 8;
    case 2: return 4;
    default: return 0;
  }
}

}  // namespace rls
