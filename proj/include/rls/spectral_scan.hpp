#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "rls/partial_waves.hpp"
#include "rls/quadrature.hpp"
#include "rls/schrodinger.hpp"

namespace rls {

// Singularity data of I + K at one energy. `sign` is the sign of the real
// determinant (K is similar to a Hermitian operator at real energies below
// the continuum), so it flips across every simple root.
struct ProbeValue {
  double smallest_singular = 1.0;
  double norm = 1.0;
  double sign = 1.0;
};

using SpectralProbe = std::function<ProbeValue(double)>;

template <int B>
ProbeValue probe_system(const NystromSystem<B>& sys) {
  if (sys.size() == 0) return {};
  ProbeValue p;
  p.smallest_singular = sys.smallest_singular_value();
  p.norm = sys.norm();
  p.sign = sys.log_determinant().second.real() >= 0.0 ? 1.0 : -1.0;
  return p;
}

// I + K(lambda) of the lattice scatterer, at any real lambda.
inline SpectralProbe schrodinger_probe(const SchrodingerScatterer& sc) {
  return [&sc](double e) { return probe_system(sc.system(e)); };
}

namespace detail {

// kappa i_l(kappa r<) k_l(kappa r>) with i_0 = sinh x / x, k_0 = e^{-x} / x:
// the l-th angular component of e^{-kappa|r-s|} / (4 pi |r-s|).
inline double modified_green_l(int l, double kappa, double r, double s) {
  const double lo = std::min(r, s), hi = std::max(r, s);
  if (l == 0) return (std::exp(-kappa * (hi - lo)) - std::exp(-kappa * (hi + lo))) / (2.0 * kappa * lo * hi);
  const double a = kappa * lo, b = kappa * hi;
  const double il = std::sqrt(kPi / (2.0 * a)) * std::cyl_bessel_i(l + 0.5, a);
  const double kl = std::sqrt(2.0 / (kPi * b)) * std::cyl_bessel_k(l + 0.5, b);
  return kappa * il * kl;
}

}  // namespace detail

// Radial Gauss-Legendre nodes on [0, r_max] split at the breakpoints.
struct RadialMesh {
  std::vector<double> r, w;
};

inline RadialMesh radial_mesh(const RadialProblem& p, double panel, int order) {
  std::vector<double> edges{0.0};
  for (double b : p.breakpoints)
    if (b > 0.0 && b < p.r_max) edges.push_back(b);
  edges.push_back(p.r_max);
  const auto& gl = cached_gauss_legendre(order);
  RadialMesh m;
  for (size_t e = 0; e + 1 < edges.size(); ++e) {
    const int n = std::max(1, int(std::ceil((edges[e + 1] - edges[e]) / panel)));
    const double width = (edges[e + 1] - edges[e]) / n;
    for (int q = 0; q < n; ++q)
      for (int i = 0; i < order; ++i) {
        m.r.push_back(edges[e] + width * (q + 0.5 * (gl.nodes[i] + 1.0)));
        m.w.push_back(0.5 * width * gl.weights[i]);
      }
  }
  return m;
}

// Birman-Schwinger operator of a spherically symmetric V in partial wave l
// at energy E = -kappa^2 < 0, in the symmetric form
//   A_ij = sqrt(w_i) r_i |V_i|^{1/2} g_l(r_i, r_j) sgn V_j |V_j|^{1/2} r_j sqrt(w_j).
// I + A is singular exactly when E is a level of channel l.
inline Eigen::MatrixXd radial_birman_schwinger(const RadialProblem& p, const RadialMesh& mesh, int l, double energy) {
  if (!(energy < 0.0)) throw Error("radial_birman_schwinger: energy must be negative");
  const double kappa = std::sqrt(-energy);
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.r.size());
  Eigen::VectorXd left(n), right(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = p.v(mesh.r[i]);
    const double c = std::sqrt(mesh.w[i]) * mesh.r[i] * std::sqrt(std::abs(v));
    left[i] = c;
    right[i] = v > 0 ? c : (v < 0 ? -c : 0.0);
  }
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = left[i] * detail::modified_green_l(l, kappa, mesh.r[i], mesh.r[j]) * right[j];
  return a;
}

inline SpectralProbe radial_probe(const RadialProblem& p, int l, double panel = 0.125, int order = 16) {
  const RadialMesh mesh = radial_mesh(p, panel, order);
  return [p, l, mesh](double e) {
    Eigen::MatrixXd a = radial_birman_schwinger(p, mesh, l, e);
    a.diagonal().array() += 1.0;
    ProbeValue v;
    if (a.rows() == 0) return v;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    v.smallest_singular = svd.singularValues()[a.rows() - 1];
    v.norm = svd.singularValues()[0];
    v.sign = Eigen::PartialPivLU<Eigen::MatrixXd>(a).determinant() >= 0.0 ? 1.0 : -1.0;
    return v;
  };
}

struct SpectralScanResult {
  std::vector<double> energies;
  std::vector<double> smallest_singular;
  std::vector<double> norm;
  std::vector<double> sign;
  std::vector<bool> flagged;  // smallest_singular < threshold * norm
  std::vector<double> bound_states;
  double threshold = 1e-6;

  std::vector<double> flagged_energies() const {
    std::vector<double> out;
    for (size_t i = 0; i < energies.size(); ++i)
      if (flagged[i]) out.push_back(energies[i]);
    return out;
  }
};

inline std::vector<double> energy_grid(double lo, double hi, int count) {
  if (count < 2 || !(hi > lo)) throw ConfigError("scan.range", "need count >= 2 and hi > lo");
  std::vector<double> e(count);
  for (int i = 0; i < count; ++i) e[i] = lo + (hi - lo) * i / (count - 1);
  return e;
}

inline SpectralScanResult exceptional_scan(const SpectralProbe& probe, const std::vector<double>& energies,
                                           double threshold = 1e-6) {
  SpectralScanResult out;
  out.threshold = threshold;
  out.energies = energies;
  for (double e : energies) {
    const ProbeValue v = probe(e);
    out.smallest_singular.push_back(v.smallest_singular);
    out.norm.push_back(v.norm);
    out.sign.push_back(v.sign);
    out.flagged.push_back(v.smallest_singular < threshold * v.norm);
  }
  return out;
}

// Root of the signed surrogate sign * sigma_min in [a, b] by the Illinois
// variant of regula falsi, to |b - a| <= tol.
inline double refine_root(const SpectralProbe& probe, double a, double b, double tol = 1e-8) {
  auto f = [&](double e) {
    const ProbeValue v = probe(e);
    return v.sign * v.smallest_singular;
  };
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) throw NoRootInBracket("no sign change of det(I + K) between the bracket ends");
  int side = 0;
  for (int it = 0; it < 200 && std::abs(b - a) > tol; ++it) {
    double c = (a * fb - b * fa) / (fb - fa);
    // fall back to bisection if the secant lands on an end
    if (!(c > std::min(a, b) && c < std::max(a, b))) c = 0.5 * (a + b);
    const double fc = f(c);
    if (fc == 0.0) return c;
    if ((fc > 0) == (fb > 0)) {
      b = c;
      fb = fc;
      if (side == -1) fa /= 2;
      side = -1;
    } else {
      a = c;
      fa = fc;
      if (side == 1) fb /= 2;
      side = 1;
    }
  }
  return 0.5 * (a + b);
}

namespace detail {

// Golden-section minimum of sigma_min on [a, b].
inline double golden_minimum(const SpectralProbe& probe, double a, double b, double tol, double& fmin) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = probe(c).smallest_singular, fd = probe(d).smallest_singular;
  while (std::abs(b - a) > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = probe(c).smallest_singular;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = probe(d).smallest_singular;
    }
  }
  fmin = std::min(fc, fd);
  return fc < fd ? c : d;
}

}  // namespace detail

// Levels in [lo, hi] (below the continuum): sign changes of det(I + K) on
// the scan are refined with refine_root; interior minima of sigma_min
// without a sign change (a pair of nearby roots) are located by golden
// section and split there.
inline SpectralScanResult bound_state_search(const SpectralProbe& probe, double lo, double hi, int count,
                                             double tol = 1e-8, double threshold = 1e-6) {
  SpectralScanResult out = exceptional_scan(probe, energy_grid(lo, hi, count), threshold);
  const auto& e = out.energies;
  const auto& s = out.smallest_singular;
  for (size_t i = 0; i + 1 < e.size(); ++i)
    if (out.sign[i] != out.sign[i + 1]) out.bound_states.push_back(refine_root(probe, e[i], e[i + 1], tol));
  // interior minimum with equal signs on both sides: look for a double crossing
  for (size_t i = 1; i + 1 < e.size(); ++i) {
    if (out.sign[i - 1] != out.sign[i] || out.sign[i] != out.sign[i + 1]) continue;
    if (!(s[i] < s[i - 1] && s[i] <= s[i + 1])) continue;
    double fmin = 0.0;
    const double m = detail::golden_minimum(probe, e[i - 1], e[i + 1], 1e-3 * (e[i + 1] - e[i]), fmin);
    const ProbeValue pm = probe(m);
    if (pm.sign == out.sign[i]) continue;
    out.bound_states.push_back(refine_root(probe, e[i - 1], m, tol));
    out.bound_states.push_back(refine_root(probe, m, e[i + 1], tol));
  }
  std::sort(out.bound_states.begin(), out.bound_states.end());
  return out;
}

// Levels of channel l in [e_min, 0) on two radial meshes (panel, panel/2).
// The Nystrom error of the kinked kernel is O(panel^2), so the
// extrapolation (4 fine - coarse) / 3 removes the leading term.
struct RadialLevels {
  std::vector<double> coarse, fine, extrapolated;
};

inline RadialLevels radial_level_search(const RadialProblem& p, int l, double e_min, double panel = 0.25,
                                        int count = 60, double tol = 1e-10) {
  if (!(e_min < 0.0)) throw ConfigError("bound.range", "lower end must be negative");
  const double hi = -1e-6 * std::abs(e_min);
  RadialLevels out;
  out.coarse = bound_state_search(radial_probe(p, l, panel), e_min, hi, count, tol).bound_states;
  out.fine = bound_state_search(radial_probe(p, l, 0.5 * panel), e_min, hi, count, tol).bound_states;
  if (out.coarse.size() == out.fine.size()) {
    for (size_t i = 0; i < out.fine.size(); ++i) out.extrapolated.push_back((4.0 * out.fine[i] - out.coarse[i]) / 3.0);
  } else {
    out.extrapolated = out.fine;
  }
  return out;
}

}  // namespace rls
