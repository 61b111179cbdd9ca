#pragma once

#include <cmath>
#include <vector>

#include "rls/dirac_algebra.hpp"
#include "rls/errors.hpp"
#include "rls/quadrature.hpp"

namespace rls {

// Product rule on S^2: Gauss-Legendre in cos(theta) times the uniform rule
// in phi. With n polar nodes and 2n azimuthal nodes it integrates
// spherical harmonics exactly up to degree 2n - 1. The node set is closed
// under inversion, which the reciprocity checks rely on.
struct AngularMesh {
  std::vector<Vec3> directions;
  std::vector<double> weights;
  int degree = 0;  // exact for polynomials up to this degree

  size_t size() const { return directions.size(); }
  // Largest l whose (2l+1)-fold multiplicity the rule resolves.
  int l_max() const { return degree / 2; }
};

inline AngularMesh make_angular_mesh(int degree) {
  if (degree < 1) throw Error("make_angular_mesh: degree must be >= 1");
  const int n_theta = (degree + 2) / 2;
  const int n_phi = 2 * n_theta;
  const auto& gl = cached_gauss_legendre(n_theta);
  AngularMesh mesh;
  mesh.degree = 2 * n_theta - 1;
  for (int t = 0; t < n_theta; ++t) {
    const double ct = gl.nodes[t];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int p = 0; p < n_phi; ++p) {
      const double ph = 2.0 * kPi * (p + 0.5) / n_phi;
      mesh.directions.emplace_back(st * std::cos(ph), st * std::sin(ph), ct);
      mesh.weights.push_back(gl.weights[t] * 2.0 * kPi / n_phi);
    }
  }
  return mesh;
}

// Real orthonormal spherical harmonics; m < 0 is the sine branch.
inline double real_spherical_harmonic(int l, int m, const Vec3& w) {
  const double theta = std::acos(std::clamp(w[2], -1.0, 1.0));
  const double phi = std::atan2(w[1], w[0]);
  const int am = std::abs(m);
  const double y = std::sph_legendre(l, am, theta);
  if (m == 0) return y;
  const double s = std::sqrt(2.0) * ((am % 2) ? -1.0 : 1.0);
  return m > 0 ? s * y * std::cos(am * phi) : s * y * std::sin(am * phi);
}

inline double legendre(int l, double x) { return std::legendre(l, std::clamp(x, -1.0, 1.0)); }

}  // namespace rls
