#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "rls/angular.hpp"
#include "rls/potentials.hpp"

namespace rls {

// Radial reduction of -Delta + V for a spherically symmetric V:
//   u'' = (l(l+1)/r^2 + V(r) - E) u,  u ~ r^{l+1} at the origin.
struct RadialProblem {
  std::function<double(double)> v;
  std::vector<double> breakpoints;  // radii where V jumps
  double r_max = 0.0;               // V is negligible beyond r_max
};

inline RadialProblem radial_problem(const PotentialSpec& spec, double tol = 1e-13) {
  if (!spec.is_radial_scalar()) throw NonRadialPotential("partial waves need a spherically symmetric scalar potential");
  RadialProblem p;
  p.v = [spec](double r) { return assemble_scalar_potential(spec, Vec3(0, 0, r)); };
  for (const auto& t : spec.scalar.terms)
    if (t.family == Family::square_well) p.breakpoints.push_back(t.scale);
  p.r_max = std::max(1.0, spec.support_radius(tol));
  std::sort(p.breakpoints.begin(), p.breakpoints.end());
  return p;
}

namespace detail {

struct RadialState {
  double u, du;
  int nodes = 0;
};

// Classical RK4 for (u, u') from r0 to r1 with steps of at most dr,
// counting sign changes of u.
inline void radial_rk4(const RadialProblem& p, int l, double energy, double r0, double r1, double dr,
                       RadialState& s) {
  const double ll = l * (l + 1.0);
  // V is sampled strictly inside [r0, r1] so a jump at either end is seen
  // from the correct side.
  auto rhs = [&](double r, double u) { return (ll / (r * r) + p.v(r) - energy) * u; };
  const int n = std::max(1, static_cast<int>(std::ceil((r1 - r0) / dr)));
  const double h = (r1 - r0) / n;
  const double eps = 1e-12 * h;
  for (int i = 0; i < n; ++i) {
    const double r = r0 + i * h;
    const double ra = r + (i == 0 ? eps : 0.0), rb = r + h - (i == n - 1 ? eps : 0.0);
    const double k1u = s.du, k1v = rhs(ra, s.u);
    const double k2u = s.du + 0.5 * h * k1v, k2v = rhs(r + 0.5 * h, s.u + 0.5 * h * k1u);
    const double k3u = s.du + 0.5 * h * k2v, k3v = rhs(r + 0.5 * h, s.u + 0.5 * h * k2u);
    const double k4u = s.du + h * k3v, k4v = rhs(rb, s.u + h * k3u);
    const double u_new = s.u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    s.du += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    if ((u_new > 0) != (s.u > 0) && u_new != 0.0) ++s.nodes;
    s.u = u_new;
    // keep magnitudes bounded in classically forbidden regions
    const double big = std::max(std::abs(s.u), std::abs(s.du));
    if (big > 1e100) {
      s.u /= big;
      s.du /= big;
    }
  }
}

// Regular solution integrated from near the origin to r_end.
inline RadialState integrate_regular(const RadialProblem& p, int l, double energy, double r_end,
                                     double dr) {
  const double r0 = std::min(1e-6, 0.01 * dr);
  RadialState s{std::pow(r0, l + 1), (l + 1) * std::pow(r0, l)};
  double r = r0;
  for (double b : p.breakpoints) {
    if (b <= r || b >= r_end) continue;
    radial_rk4(p, l, energy, r, b, dr, s);
    r = b;
  }
  radial_rk4(p, l, energy, r, r_end, dr, s);
  return s;
}

// Riccati-Bessel functions x j_l(x), x y_l(x) and derivatives.
inline void riccati(int l, double x, double& j, double& dj, double& y, double& dy) {
  const double jl = std::sph_bessel(l, x), yl = std::sph_neumann(l, x);
  const double jm = l > 0 ? std::sph_bessel(l - 1, x) : std::cos(x) / x;
  const double ym = l > 0 ? std::sph_neumann(l - 1, x) : std::sin(x) / x;
  // d/dx [x f_l(x)] = x f_{l-1}(x) - l f_l(x)
  j = x * jl;
  y = x * yl;
  dj = x * jm - l * jl;
  dy = x * ym - l * yl;
}

}  // namespace detail

struct PartialWaveResult {
  double k = 0.0;
  std::vector<double> delta;  // delta_l, l = 0..l_max

  // f(theta) = (1/k) sum (2l+1) e^{i delta} sin(delta) P_l(cos theta)
  cplx amplitude(double cos_theta) const {
    cplx f = 0.0;
    for (size_t l = 0; l < delta.size(); ++l)
      f += (2.0 * l + 1.0) * std::exp(kI * delta[l]) * std::sin(delta[l]) * legendre(int(l), cos_theta);
    return f / k;
  }
  // Conventional total cross section 4 pi / k^2 sum (2l+1) sin^2 delta.
  double sigma() const {
    double s = 0.0;
    for (size_t l = 0; l < delta.size(); ++l) s += (2.0 * l + 1.0) * std::pow(std::sin(delta[l]), 2);
    return 4.0 * kPi / (k * k) * s;
  }
};

// Phase shifts by outward integration and matching to Riccati-Bessel
// functions where V has died off: u ~ sin(kr - l pi/2 + delta).
inline PartialWaveResult partial_waves(const RadialProblem& p, double lambda, int l_max, double dr = 1e-3) {
  if (!(lambda > 0.0)) throw Error("partial_waves: lambda must be positive");
  PartialWaveResult out;
  out.k = std::sqrt(lambda);
  const double big_r = p.r_max;
  for (int l = 0; l <= l_max; ++l) {
    const auto s = detail::integrate_regular(p, l, lambda, big_r, dr);
    const double beta = s.du / s.u;
    double j, dj, y, dy;
    detail::riccati(l, out.k * big_r, j, dj, y, dy);
    // u = A (j cos d - y sin d) with y = x y_l(x) -> -cos(x - l pi/2)
    const double num = out.k * dj - beta * j;
    const double den = out.k * dy - beta * y;
    double d = std::atan2(num, den);
    // atan2 returns tan d = num/den up to pi; fold into (-pi/2, pi/2]
    if (d > kPi / 2) d -= kPi;
    if (d <= -kPi / 2) d += kPi;
    out.delta.push_back(d);
  }
  return out;
}

// Born phase shift -k int V(r) j_l(kr)^2 r^2 dr.
inline double born_phase(const RadialProblem& p, double lambda, int l, int n = 4000) {
  const double k = std::sqrt(lambda);
  std::vector<double> edges{0.0};
  for (double b : p.breakpoints) edges.push_back(b);
  edges.push_back(p.r_max);
  const auto& gl = cached_gauss_legendre(16);
  double s = 0.0;
  for (size_t e = 0; e + 1 < edges.size(); ++e) {
    const int panels = std::max(1, n * int(std::ceil(edges[e + 1] - edges[e])) / int(std::ceil(p.r_max)));
    const double w = (edges[e + 1] - edges[e]) / panels;
    for (int q = 0; q < panels; ++q)
      for (int i = 0; i < 16; ++i) {
        const double r = edges[e] + w * (q + 0.5 * (gl.nodes[i] + 1.0));
        const double jl = std::sph_bessel(l, k * r);
        s += 0.5 * w * gl.weights[i] * p.v(r) * jl * jl * r * r;
      }
  }
  return -k * s;
}

// Bound states of channel l by node counting: the regular solution at
// energy E < 0 has as many nodes on (0, R) as there are levels below E.
struct RadialBoundStates {
  std::vector<double> energies;
};

inline RadialBoundStates radial_bound_states(const RadialProblem& p, int l, double e_min,
                                             double tol = 1e-12, double dr = 1e-3) {
  RadialBoundStates out;
  auto count = [&](double e) {
    const double kap = std::sqrt(-e);
    auto s = detail::integrate_regular(p, l, e, p.r_max, dr);
    if (l == 0) {
      // V = 0 beyond r_max: u = u0 cosh(kap x) + (u0'/kap) sinh(kap x)
      // has one more zero iff 0 < -u0 kap / u0' < 1
      const double t = -s.u * kap / s.du;
      return s.nodes + ((t > 0.0 && t < 1.0) ? 1 : 0);
    }
    const double r_end = p.r_max + 25.0 / std::max(kap, 1e-2);
    detail::radial_rk4(p, l, e, p.r_max, r_end, 0.02, s);
    return s.nodes;
  };
  const double e_top = -1e-10;
  const int n_top = count(e_top);
  const int n_bot = count(e_min);
  for (int level = n_bot; level < n_top; ++level) {
    double lo = e_min, hi = e_top;
    while (hi - lo > tol * std::max(1.0, std::abs(lo))) {
      const double mid = 0.5 * (lo + hi);
      if (count(mid) > level) hi = mid;
      else lo = mid;
    }
    out.energies.push_back(0.5 * (lo + hi));
  }
  return out;
}

}  // namespace rls
