#pragma once

#include <array>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "rls/errors.hpp"

namespace rls {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Mat2c = Eigen::Matrix2cd;
using Mat4c = Eigen::Matrix4cd;
using Vec4c = Eigen::Vector4cd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

// Dirac representation: alpha_s = [[0, sigma_s], [sigma_s, 0]],
// beta = diag(I2, -I2).
struct DiracAlgebra {
  std::array<Mat2c, 3> sigma;
  std::array<Mat4c, 3> alpha;
  Mat4c beta;

  static const DiracAlgebra& get() {
    static const DiracAlgebra instance = build();
    return instance;
  }

  // r . alpha = r1 alpha1 + r2 alpha2 + r3 alpha3
  Mat4c dot_alpha(const Vec3& r) const {
    return r[0] * alpha[0] + r[1] * alpha[1] + r[2] * alpha[2];
  }
  Mat2c dot_sigma(const Vec3& r) const {
    return r[0] * sigma[0] + r[1] * sigma[1] + r[2] * sigma[2];
  }

 private:
  static DiracAlgebra build() {
    DiracAlgebra d;
    d.sigma[0] << 0, 1, 1, 0;
    d.sigma[1] << 0, -kI, kI, 0;
    d.sigma[2] << 1, 0, 0, -1;
    for (int s = 0; s < 3; ++s) {
      d.alpha[s].setZero();
      d.alpha[s].block<2, 2>(0, 2) = d.sigma[s];
      d.alpha[s].block<2, 2>(2, 0) = d.sigma[s];
    }
    d.beta.setZero();
    d.beta.diagonal() << 1, 1, -1, -1;
    return d;
  }
};

struct MomentumPoint {
  Vec3 q;
  double m;

  MomentumPoint(Vec3 q_, double m_) : q(std::move(q_)), m(m_) {
    if (!(m > 0.0)) throw Error("MomentumPoint: mass must be positive");
  }
  double energy() const { return std::sqrt(m * m + q.squaredNorm()); }
};

// H0(q) = m beta + alpha . q
inline Mat4c dirac_h0(const MomentumPoint& p) {
  const auto& d = DiracAlgebra::get();
  return p.m * d.beta + d.dot_alpha(p.q);
}

// Columns of z0 are the normalized eigenvectors g1..g4; eigenvalues are
// ordered (-E, -E, +E, +E) with E = sqrt(m^2 + |q|^2).
struct FreeEigensystem {
  Eigen::Vector4d eigenvalues;
  Mat4c z0;

  Vec4c column(int n) const { return z0.col(n - 1); }
  Mat4c d() const { return eigenvalues.cast<cplx>().asDiagonal(); }
};

// Spinor closed form, continuous at q = 0:
//   positive energy  u(chi) = [(E+m) chi ; (sigma.q) chi] / N
//   negative energy  v(chi) = [-(sigma.q) chi ; (E+m) chi] / N
// with N = sqrt(2E(E+m)). Channels 1,2 use chi = (0,1),(1,0), which
// reproduces the first pair of closed-form vectors exactly after
// normalization; channels 3,4 use chi = (1,0),(0,1).
inline FreeEigensystem dirac_eigensystem(const MomentumPoint& p) {
  const auto& d = DiracAlgebra::get();
  const double e = p.energy();
  const double norm = std::sqrt(2.0 * e * (e + p.m));
  const Mat2c sq = d.dot_sigma(p.q);
  const Eigen::Vector2cd up(1.0, 0.0);
  const Eigen::Vector2cd down(0.0, 1.0);

  auto negative = [&](const Eigen::Vector2cd& chi) {
    Vec4c v;
    v.head<2>() = -sq * chi;
    v.tail<2>() = (e + p.m) * chi;
    return Vec4c(v / norm);
  };
  auto positive = [&](const Eigen::Vector2cd& chi) {
    Vec4c v;
    v.head<2>() = (e + p.m) * chi;
    v.tail<2>() = sq * chi;
    return Vec4c(v / norm);
  };

  FreeEigensystem es;
  es.eigenvalues << -e, -e, e, e;
  es.z0.col(0) = negative(down);
  es.z0.col(1) = negative(up);
  es.z0.col(2) = positive(up);
  es.z0.col(3) = positive(down);
  return es;
}

// Normalized spinor g_n(k), n in 1..4.
inline Vec4c free_spinor(const Vec3& k, double m, int n) {
  return dirac_eigensystem(MomentumPoint(k, m)).column(n);
}

// Projector onto the eigenspace of H0(q) with eigenvalue sign(lambda) E:
// (H0(q) + |E|) / (2|E|) for positive, (|E| - H0(q)) / (2|E|) for negative.
inline Mat4c energy_projector(const Vec3& q, double m, int sign) {
  const MomentumPoint p(q, m);
  const double e = p.energy();
  return (Mat4c::Identity() * e + sign * dirac_h0(p)) / (2.0 * e);
}

// (H0(q) - mu)^{-1} through the three-term identity
//   H0^{-1} + H0^{-1} mu^2 / (E^2 - mu^2) + mu / (E^2 - mu^2).
inline Mat4c resolvent_free(const MomentumPoint& p, cplx mu) {
  const double e2 = p.m * p.m + p.q.squaredNorm();
  const cplx denom = e2 - mu * mu;
  if (std::abs(denom) <= 1e-14 * std::max(1.0, e2)) {
    throw SingularShell("resolvent_free: mu lies on the mass shell of q");
  }
  const Mat4c h0_inv = dirac_h0(p) / e2;
  return h0_inv + h0_inv * (mu * mu / denom) +
         Mat4c::Identity() * (mu / denom);
}

}  // namespace rls
