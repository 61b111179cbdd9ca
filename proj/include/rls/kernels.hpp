#pragma once

#include <cmath>
#include <complex>

#include "rls/dirac_algebra.hpp"
#include "rls/errors.hpp"

namespace rls {

inline const double kSqrtPiOver2 = std::sqrt(kPi / 2.0);
inline const double kTwoPi32 = std::pow(2.0 * kPi, 1.5);

// Kinematic context of an on-shell computation. Channels 1,2 belong to
// negative energies and 3,4 to positive energies.
struct EnergyShell {
  double m;
  double lambda;
  double kappa;
  Vec3 incident;
  int channel;

  EnergyShell(double m_, double lambda_, Vec3 incident_ = Vec3::UnitZ(), int channel_ = 0)
      : m(m_), lambda(lambda_), incident(incident_.normalized()), channel(channel_) {
    if (!(m > 0.0)) throw Error("EnergyShell: mass must be positive");
    if (!(std::abs(lambda) > m)) {
      throw GapEnergy("EnergyShell: |lambda| must exceed m for scattering");
    }
    kappa = std::sqrt(lambda * lambda - m * m);
    if (channel == 0) channel = lambda > 0 ? 3 : 1;
    check_channel(channel);
  }

  void check_channel(int n) const {
    if (n < 1 || n > 4) throw ChannelMismatch("channel must be in 1..4");
    if ((n <= 2) != (lambda < 0)) {
      throw ChannelMismatch("channel " + std::to_string(n) +
                            " inconsistent with sign of energy " + std::to_string(lambda));
    }
  }
  int sign() const { return lambda > 0 ? 1 : -1; }
  // Outgoing-wave number: e^{i kappa_out |r|} is the scattered wave.
  double kappa_out() const { return sign() * kappa; }
  // The channels available on this shell.
  std::array<int, 2> channels() const {
    return lambda > 0 ? std::array<int, 2>{3, 4} : std::array<int, 2>{1, 2};
  }
  Vec3 momentum() const { return kappa * incident; }
};

// kappa(mu) = sqrt(mu^2 - m^2) on the branch Im kappa > 0, continued onto
// the real axis from above: kappa >= 0 for mu >= m, kappa <= 0 for mu <= -m.
// Inside the gap kappa = i sqrt(m^2 - mu^2).
inline cplx outgoing_kappa(cplx mu, double m) {
  cplx k = std::sqrt(mu * mu - m * m);
  if (k.imag() < 0.0) k = -k;
  if (k.imag() == 0.0 && mu.real() < 0.0) k = -std::abs(k.real());
  return k;
}

namespace detail {
inline double checked_norm(const Vec3& r) {
  const double d = r.norm();
  if (!(d > 0.0)) throw SingularPoint();
  return d;
}
inline bool real_in_gap(cplx mu, double m) {
  return mu.imag() == 0.0 && std::abs(mu.real()) < m;
}
}  // namespace detail

// J+(r, mu) = sqrt(pi/2) e^{i kappa |r|} / |r|.
inline cplx kernel_j_plus(const Vec3& r, cplx mu, double m) {
  const double d = detail::checked_norm(r);
  return kSqrtPiOver2 * std::exp(kI * outgoing_kappa(mu, m) * d) / d;
}

// Q(r) = F[H0^{-1}] = sqrt(pi/2) e^{-m|r|} [m beta + i (m + 1/|r|) (r.alpha)/|r|] / |r|.
inline Mat4c kernel_q(const Vec3& r, double m) {
  const double d = detail::checked_norm(r);
  const auto& alg = DiracAlgebra::get();
  const Mat4c bracket = m * alg.beta + kI * (m + 1.0 / d) * alg.dot_alpha(r) / d;
  return kSqrtPiOver2 * std::exp(-m * d) / d * bracket;
}

// Outgoing scalar Helmholtz kernel e^{i kappa |r|} / (4 pi |r|).
inline cplx helmholtz_green(const Vec3& r, cplx kappa) {
  const double d = detail::checked_norm(r);
  return std::exp(kI * kappa * d) / (4.0 * kPi * d);
}

// Kernel of the free Dirac resolvent (H0 - mu)^{-1} in position space:
//   G0(r) = (m beta + mu - i alpha.grad) e^{i kappa r} / (4 pi r)
//         = [m beta + mu + (kappa + i/r)(alpha.r)/r] e^{i kappa r} / (4 pi r).
// Valid for any mu off E, including real mu inside the gap, and for
// mu = lambda + i0 on E via the branch in outgoing_kappa.
inline Mat4c free_dirac_green(const Vec3& r, cplx mu, double m) {
  const double d = detail::checked_norm(r);
  const auto& alg = DiracAlgebra::get();
  const cplx kappa = outgoing_kappa(mu, m);
  const cplx g = std::exp(kI * kappa * d) / (4.0 * kPi * d);
  Mat4c out = (m * alg.beta + mu * Mat4c::Identity()) * g;
  out += ((kappa + kI / d) * g / d) * alg.dot_alpha(r);
  return out;
}

// Same kernel when the mass and kappa are already known (hot loops).
inline Mat4c free_dirac_green(const Vec3& r, cplx mu, double m, cplx kappa) {
  const double d = detail::checked_norm(r);
  const auto& alg = DiracAlgebra::get();
  const cplx g = std::exp(kI * kappa * d) / (4.0 * kPi * d);
  Mat4c out = (m * alg.beta + mu * Mat4c::Identity()) * g;
  out += ((kappa + kI / d) * g / d) * alg.dot_alpha(r);
  return out;
}

// B+(r, mu) = F[(H0 - mu)^{-1}] with F carrying (2 pi)^{-3/2}; closed form
// (2 pi)^{3/2} G0(r). Equals Q + (2 pi)^{-3/2} mu^2 (Q * J+) + mu J+.
inline Mat4c kernel_b_plus(const Vec3& r, cplx mu, double m) {
  if (mu.imag() < 0.0) throw BranchError("kernel_b_plus: requires Im mu >= 0");
  if (detail::real_in_gap(mu, m)) {
    throw BranchError("kernel_b_plus: real energy inside the gap (-m, m)");
  }
  return kTwoPi32 * free_dirac_green(r, mu, m);
}

// B-(u, lambda) = B+(-u, lambda)^*.
inline Mat4c kernel_b_minus(const Vec3& u, cplx mu, double m) {
  return kernel_b_plus(-u, mu, m).adjoint();
}

// e^{i sqrt(lambda) |r - s|} / (4 pi |r - s|), lambda > 0.
inline cplx kernel_helmholtz(const Vec3& r, const Vec3& s, double lambda) {
  if (!(lambda >= 0.0)) throw BranchError("kernel_helmholtz: lambda must be >= 0");
  return helmholtz_green(r - s, std::sqrt(lambda));
}

// Schrodinger wave number on the physical sheet: sqrt(lambda) for
// lambda >= 0, i sqrt(-lambda) below threshold.
inline cplx schrodinger_kappa(cplx lambda) {
  cplx k = std::sqrt(lambda);
  if (k.imag() < 0.0) k = -k;
  return k;
}

}  // namespace rls
