#pragma once

// Reference computations for the test suite and the validation commands.
// Nothing here calls the closed-form kernels it is used to check.

#include <cmath>
#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "rls/dirac_algebra.hpp"
#include "rls/quadrature.hpp"

namespace rls::oracle {

inline cplx sqrt_upper(cplx z) {
  cplx k = std::sqrt(z);
  if (k.imag() < 0.0) k = -k;
  return k;
}

// Composite Gauss-Legendre on [a, b] with `panels` panels of order `n`.
template <class F>
auto composite_gl(F&& f, double a, double b, int panels, int n) {
  const auto rule = gauss_legendre(n);
  using V = decltype(f(a));
  V sum = f(0.5 * (a + b)) * 0.0;
  const double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * w;
    for (int i = 0; i < n; ++i) sum += f(lo + 0.5 * w * (rule.nodes[i] + 1.0)) * (0.5 * w * rule.weights[i]);
  }
  return V(sum);
}

// (Q * J+)(r) = int Q(u) J+(r - u) du with
//   Q(u)  = sqrt(pi/2) e^{-m|u|} [m beta + i (m + 1/|u|) (u.alpha)/|u|] / |u|
//   J+(v) = sqrt(pi/2) e^{i kappa |v|} / |v|
// reduced by axial symmetry about r and the substitution s = |r - u|,
// which removes the 1/|r - u| singularity; the result is a smooth 2D
// integral in (|u|, s).
inline Mat4c convolution_q_jplus(const Vec3& r, cplx kappa, double m, int panels = 40) {
  const double big_r = r.norm();
  const auto& alg = DiracAlgebra::get();
  auto inner = [&](double rho) {
    // returns (I0, I1) = int e^{i kappa s} ds, int c(s) e^{i kappa s} ds over [|R-rho|, R+rho]
    const double lo = std::abs(big_r - rho), hi = big_r + rho;
    auto f0 = [&](double s) { return std::exp(kI * kappa * s); };
    auto f1 = [&](double s) {
      const double c = (big_r * big_r + rho * rho - s * s) / (2.0 * big_r * rho);
      return c * std::exp(kI * kappa * s);
    };
    const int p = 2 + static_cast<int>((hi - lo) * std::abs(kappa));
    return std::pair<cplx, cplx>(composite_gl(f0, lo, hi, p, 16), composite_gl(f1, lo, hi, p, 16));
  };
  auto integrand_beta = [&](double rho) {
    const auto [i0, i1] = inner(rho);
    (void)i1;
    return std::exp(-m * rho) / (big_r * rho) * m * rho * i0;
  };
  auto integrand_alpha = [&](double rho) {
    const auto [i0, i1] = inner(rho);
    (void)i0;
    return std::exp(-m * rho) / (big_r * rho) * kI * (m * rho + 1.0) * i1;
  };
  const double tail = big_r + 45.0 / m;
  const cplx cb = composite_gl(integrand_beta, 0.0, big_r, panels, 16) +
                  composite_gl(integrand_beta, big_r, tail, 3 * panels, 16);
  const cplx ca = composite_gl(integrand_alpha, 0.0, big_r, panels, 16) +
                  composite_gl(integrand_alpha, big_r, tail, 3 * panels, 16);
  const double pre = kPi * kPi;
  return pre * (cb * alg.beta + ca * alg.dot_alpha(r / big_r));
}

// B+ assembled from the convolution route, with F carrying (2 pi)^{-3/2}:
//   B+ = Q + (2 pi)^{-3/2} mu^2 (Q * J+) + mu J+.
inline Mat4c b_plus_by_convolution(const Vec3& r, cplx mu, double m, int panels = 40) {
  const auto& alg = DiracAlgebra::get();
  const cplx kappa = [&] {
    cplx k = sqrt_upper(mu * mu - m * m);
    if (k.imag() == 0.0 && mu.real() < 0.0) k = -std::abs(k.real());
    return k;
  }();
  const double d = r.norm();
  const double s = std::sqrt(kPi / 2.0);
  const Mat4c q = s * std::exp(-m * d) / d * (m * alg.beta + kI * (m + 1.0 / d) * alg.dot_alpha(r) / d);
  const cplx jp = s * std::exp(kI * kappa * d) / d;
  return q + std::pow(2.0 * kPi, -1.5) * mu * mu * convolution_q_jplus(r, kappa, m, panels) +
         mu * jp * Mat4c::Identity();
}

// (2 pi)^{-3/2} sum_q dq^3 e^{i q.r} M(q) e^{-a^2 q^2 / 2} on a symmetric
// cell-centred momentum grid of n^3 points and spacing dq. M is supplied
// through its scalar parts: M(q) = (c_beta beta + c0 + alpha.q) / den(q).
struct MomentumGrid {
  int n;
  double dq;
  double smoothing;  // a
};

inline std::vector<Mat4c> momentum_grid_transform(const std::vector<Vec3>& points, const MomentumGrid& g,
                                                  double beta_coeff, cplx scalar_coeff,
                                                  const std::function<cplx(double)>& den) {
  const auto& alg = DiracAlgebra::get();
  const int n = g.n;
  std::vector<double> q1(n);
  for (int i = 0; i < n; ++i) q1[i] = (i - 0.5 * (n - 1)) * g.dq;
  std::vector<cplx> base(static_cast<size_t>(n) * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double q2 = q1[i] * q1[i] + q1[j] * q1[j] + q1[k] * q1[k];
        base[(static_cast<size_t>(i) * n + j) * n + k] = std::exp(-0.5 * g.smoothing * g.smoothing * q2) / den(q2);
      }
  const double c = std::pow(2.0 * kPi, -1.5) * g.dq * g.dq * g.dq;
  std::vector<Mat4c> out;
  std::vector<cplx> ex(n), ey(n), ez(n);
  for (const Vec3& r : points) {
    for (int i = 0; i < n; ++i) {
      ex[i] = std::exp(kI * q1[i] * r[0]);
      ey[i] = std::exp(kI * q1[i] * r[1]);
      ez[i] = std::exp(kI * q1[i] * r[2]);
    }
    cplx s0 = 0.0;
    cplx sa[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < n; ++i) {
      cplx si0 = 0.0, si1 = 0.0, si2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const cplx* b = &base[(static_cast<size_t>(i) * n + j) * n];
        cplx sj0 = 0.0, sj2 = 0.0;
        for (int k = 0; k < n; ++k) {
          const cplx w = b[k] * ez[k];
          sj0 += w;
          sj2 += w * q1[k];
        }
        si0 += ey[j] * sj0;
        si1 += ey[j] * sj0 * q1[j];
        si2 += ey[j] * sj2;
      }
      s0 += ex[i] * si0;
      sa[0] += ex[i] * si0 * q1[i];
      sa[1] += ex[i] * si1;
      sa[2] += ex[i] * si2;
    }
    Mat4c m = (beta_coeff * alg.beta + scalar_coeff * Mat4c::Identity()) * s0;
    for (int a = 0; a < 3; ++a) m += sa[a] * alg.alpha[a];
    out.push_back(c * m);
  }
  return out;
}

// int K(s) G_a(r - s) ds for a kernel singular like 1/|s|^2 at the origin,
// G_a the unit-mass Gaussian of standard deviation a. Spherical
// coordinates about the singularity make |s|^2 K(s) bounded.
inline Mat4c gaussian_smoothed(const std::function<Mat4c(const Vec3&)>& kernel, const Vec3& r,
                               double a, int n_rho = 96, int n_theta = 48, int n_phi = 96) {
  const double rmax = r.norm() + 7.0 * a;
  const double rmin = std::max(0.0, r.norm() - 7.0 * a);
  const auto gr = gauss_legendre(n_rho);
  const auto gt = gauss_legendre(n_theta);
  const double norm = std::pow(2.0 * kPi * a * a, -1.5);
  Mat4c sum = Mat4c::Zero();
  // radial range [0, rmax] split at rmin so the Gaussian bulk is resolved
  auto radial = [&](double lo, double hi) {
    for (int i = 0; i < n_rho; ++i) {
      const double rho = lo + 0.5 * (hi - lo) * (gr.nodes[i] + 1.0);
      const double wr = 0.5 * (hi - lo) * gr.weights[i];
      if (rho <= 0.0) continue;
      for (int t = 0; t < n_theta; ++t) {
        const double ct = gt.nodes[t];
        const double st = std::sqrt(1.0 - ct * ct);
        for (int p = 0; p < n_phi; ++p) {
          const double ph = 2.0 * kPi * (p + 0.5) / n_phi;
          const Vec3 w(st * std::cos(ph), st * std::sin(ph), ct);
          const Vec3 s = rho * w;
          const double g = norm * std::exp(-(r - s).squaredNorm() / (2.0 * a * a));
          if (g < 1e-300) continue;
          sum += kernel(s) * (g * rho * rho * wr * gt.weights[t] * 2.0 * kPi / n_phi);
        }
      }
    }
  };
  if (rmin > 0.0) radial(0.0, rmin);
  radial(rmin, rmax);
  return sum;
}

// int over the cube [-h/2, h/2]^3 of f, singular only at the origin, by
// recursive octree refinement around the singular corner.
inline cplx cube_integral_recursive(const std::function<cplx(const Vec3&)>& f, double h, int depth = 24) {
  const auto gl = gauss_legendre(6);
  // cube [0, side]^3 reflected by `sign`, singular at its origin corner
  std::function<cplx(const Vec3&, double, int)> corner = [&](const Vec3& sign, double side, int d) -> cplx {
    if (d == 0) return 0.0;
    const double half = 0.5 * side;
    cplx s = 0.0;
    for (int c = 1; c < 8; ++c) {
      Vec3 lo(((c >> 0) & 1) * half, ((c >> 1) & 1) * half, ((c >> 2) & 1) * half);
      auto g = [&](const Vec3& x) { return f(x.cwiseProduct(sign)); };
      cplx part = 0.0;
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
          for (int k = 0; k < 6; ++k) {
            const Vec3 p = lo + 0.5 * half * Vec3(gl.nodes[i] + 1, gl.nodes[j] + 1, gl.nodes[k] + 1);
            part += g(p) * (gl.weights[i] * gl.weights[j] * gl.weights[k]);
          }
      s += part * (half * half * half / 8.0);
    }
    return s + corner(sign, half, d - 1);
  };
  cplx total = 0.0;
  for (int c = 0; c < 8; ++c) {
    const Vec3 sign((c & 1) ? 1.0 : -1.0, (c & 2) ? 1.0 : -1.0, (c & 4) ? 1.0 : -1.0);
    total += corner(sign, 0.5 * h, depth);
  }
  return total;
}

}  // namespace rls::oracle
