#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rls/dirac.hpp"
#include "rls/fft_convolution.hpp"
#include "rls/quadrature.hpp"

namespace rls {

// Spinor field sampled on the centred cube x = h (j - n/2), j = 0..n-1 per
// axis; index (i n + j) n + l.
struct BoxField {
  int n = 0;
  double h = 0.0;
  std::vector<Vec4c> values;

  BoxField() = default;
  BoxField(int n_, double h_) : n(n_), h(h_), values(size_t(n_) * n_ * n_, Vec4c::Zero()) {}

  size_t size() const { return values.size(); }
  Vec3 position(size_t idx) const {
    const int l = int(idx % n), j = int((idx / n) % n), i = int(idx / (size_t(n) * n));
    return h * Vec3(i - 0.5 * n, j - 0.5 * n, l - 0.5 * n);
  }
  double squared_norm() const {
    double s = 0.0;
    for (const auto& v : values) s += v.squaredNorm();
    return s * h * h * h;
  }
};

inline BoxField sample_box(int n, double h, const std::function<Vec4c(const Vec3&)>& f) {
  BoxField b(n, h);
  for (size_t i = 0; i < b.size(); ++i) b.values[i] = f(b.position(i));
  return b;
}

// Channel transforms f_n(k), n = 1..4, column n - 1, on the reciprocal grid
// k = dk (l - n/2), dk = 2 pi / (n h).
struct ChannelTransform {
  int n = 0;
  double dk = 0.0;
  Eigen::MatrixXcd values;  // n^3 x 4

  Vec3 momentum(size_t idx) const {
    const int l = int(idx % n), j = int((idx / n) % n), i = int(idx / (size_t(n) * n));
    return dk * Vec3(i - 0.5 * n, j - 0.5 * n, l - 0.5 * n);
  }
  // sum_n int |f_n|^2 dk
  double squared_norm() const { return values.squaredNorm() * dk * dk * dk; }
};

// V = 0 transform f_n(k) = (2 pi)^{-3/2} g_n*(k) int e^{-ik.r} f(r) dr by FFT.
// The centring is handled by (-1)^j before and (-1)^l after the DFT and a
// constant phase, so the discrete Parseval identity holds exactly.
inline ChannelTransform free_eigen_transform(const BoxField& f, double m) {
  if (f.n < 2 || f.n % 2 != 0) throw ConfigError("transform.n", "box size must be even and >= 2");
  const int n = f.n;
  const size_t total = f.size();
  ChannelTransform out;
  out.n = n;
  out.dk = 2.0 * kPi / (n * f.h);
  detail::FftwBuffer buf(total);
  detail::FftwPlan plan({n, n, n}, buf, FFTW_FORWARD);
  auto parity = [n](size_t idx) {
    const int s = int(idx % n) + int((idx / n) % n) + int(idx / (size_t(n) * n));
    return (s % 2 == 0) ? 1.0 : -1.0;
  };
  const cplx phase = std::polar(std::pow(2.0 * kPi, -1.5) * f.h * f.h * f.h, -1.5 * kPi * n);
  Eigen::MatrixXcd ft(total, 4);
  for (int a = 0; a < 4; ++a) {
    for (size_t i = 0; i < total; ++i) buf.data[i] = parity(i) * f.values[i][a];
    plan.run(buf);
    for (size_t i = 0; i < total; ++i) ft(i, a) = phase * parity(i) * buf.data[i];
  }
  out.values.resize(total, 4);
  for (size_t i = 0; i < total; ++i) {
    const auto es = dirac_eigensystem(MomentumPoint(out.momentum(i), m));
    const Vec4c v = ft.row(i).transpose();
    for (int c = 1; c <= 4; ++c) out.values(i, c - 1) = es.column(c).dot(v);
  }
  return out;
}

// Generalized transform f_n(k) = (2 pi)^{-3/2} int phi_n*(r, k) f(r) dr at
// the given momenta, with phi_n the scattering solutions at
// lambda_n(k) = -+ sqrt(k^2 + m^2). Rows are momenta, columns channels 1..4.
inline Eigen::MatrixXcd eigen_transform(const DiracScatterer& sc, const BoxField& f, const std::vector<Vec3>& momenta) {
  const double m = sc.mass(), vol = f.h * f.h * f.h, norm = std::pow(2.0 * kPi, -1.5);
  Eigen::MatrixXcd out(momenta.size(), 4);
  for (size_t q = 0; q < momenta.size(); ++q) {
    const double kn = momenta[q].norm();
    if (!(kn > 0.0)) throw SingularPoint();
    const double e = std::sqrt(kn * kn + m * m);
    const Vec3 dir = momenta[q] / kn;
    for (int pair = 0; pair < 2; ++pair) {
      const double lambda = pair == 0 ? -e : e;
      const std::vector<int> chans = pair == 0 ? std::vector<int>{1, 2} : std::vector<int>{3, 4};
      const auto sol = sc.solve(lambda, {dir}, chans);
      for (size_t c = 0; c < 2; ++c) {
        cplx acc = 0.0;
        for (size_t i = 0; i < f.size(); ++i) {
          if (f.values[i].isZero()) continue;
          acc += sc.phi(sol, c, f.position(i)).dot(f.values[i]);
        }
        out(q, chans[c] - 1) = norm * acc * vol;
      }
    }
  }
  return out;
}

// Q(delta) = int_0^inf 2 delta / (delta^2 + (E(q) - E(k))^2) dq,
// E(q) = sqrt(q^2 + m^2). With E - E(k) = delta tan(theta) the Lorentzian
// becomes 2 d theta and dq = E / sqrt(E^2 - m^2) dE; theta = theta0 +
// (pi/2 - theta0) t^2 removes the square-root endpoint singularity at E = m.
inline double lorentzian_shell_integral(double k, double m, double delta, int panels = 400, int order = 16) {
  if (!(k > 0.0) || !(delta > 0.0)) throw ConfigError("lorentzian_shell_integral", "need k > 0 and delta > 0");
  const double ek = std::sqrt(k * k + m * m);
  const double theta0 = std::atan((m - ek) / delta), span = 0.5 * kPi - theta0;
  auto integrand = [&](double t) {
    const double theta = theta0 + span * t * t;
    const double x = std::tan(theta);
    // E^2 - m^2 = (E - m)(E + m) with E - m = delta (tan theta - tan theta0)
    const double em = std::max(delta * (x - std::tan(theta0)), 0.0);
    const double e = m + em;
    if (!(em > 0.0)) return 0.0;
    return 2.0 * e / std::sqrt(em * (e + m)) * 2.0 * span * t;
  };
  // panels graded toward t = 0 and around the peak theta = 0
  const double t_peak = std::sqrt(-theta0 / span);
  std::vector<double> edges;
  const int half = panels / 2;
  for (int i = 0; i <= half; ++i) edges.push_back(t_peak * std::pow(double(i) / half, 2));
  for (int i = 1; i <= panels - half; ++i) {
    const double u = double(i) / (panels - half);
    edges.push_back(t_peak + (1.0 - t_peak) * u * u);
  }
  const auto& gl = cached_gauss_legendre(order);
  double sum = 0.0;
  for (size_t p = 0; p + 1 < edges.size(); ++p) {
    const double a = edges[p], b = edges[p + 1];
    if (!(b > a)) continue;
    for (int i = 0; i < order; ++i) sum += 0.5 * (b - a) * gl.weights[i] * integrand(a + 0.5 * (b - a) * (gl.nodes[i] + 1.0));
  }
  return sum;
}

inline double lorentzian_shell_limit(double k, double m) { return 2.0 * kPi * std::sqrt(k * k + m * m) / k; }

// Green function of H0 + V at complex mu:
//   G(r, s) = G0(r - s) - sum_j G0(r - r_j) V1 W1 X_j h^3,
// where (I + K(mu)) X = V1 G0(. - s). The system is factored once.
class DiracGreen {
 public:
  DiracGreen(const DiracScatterer& sc, cplx mu) : sc_(sc), mu_(mu), kappa_(outgoing_kappa(mu, sc.mass())), sys_(sc.system(mu)) {}

  cplx mu() const { return mu_; }
  cplx kappa() const { return kappa_; }

  // G0(r - s) with the cell-averaged self value when r and s share a node.
  Mat4c free(const Vec3& r, const Vec3& s) const {
    const double h = sc_.grid().h;
    if ((r - s).norm() < 1e-12 * h) {
      const auto& alg = DiracAlgebra::get();
      return (sc_.mass() * alg.beta + mu_ * Mat4c::Identity()) * (cube_helmholtz_integral(kappa_, h) / sc_.grid().weight());
    }
    return free_dirac_green(r - s, mu_, sc_.mass(), kappa_);
  }

  Mat4c operator()(const Vec3& r, const Vec3& s) const { return (*this)(r, std::vector<Vec3>{s}).front(); }

  // G(r, s_c) for several sources sharing one solve.
  std::vector<Mat4c> operator()(const Vec3& r, const std::vector<Vec3>& sources) const {
    std::vector<Mat4c> out;
    const size_t nodes = sc_.grid().size();
    for (const auto& s : sources) out.push_back(free(r, s));
    if (nodes == 0) return out;
    const auto x = correction(sources);
    for (size_t c = 0; c < sources.size(); ++c)
      for (int b = 0; b < 4; ++b) out[c].col(b) -= sc_.green_apply(mu_, kappa_, r, x.col(4 * c + b));
    return out;
  }

  // (R - R0) f at the targets for a field given by point samples with
  // weights: first route sums G - G0 over the sources, second applies
  // -R0 V1 W1 (I + K)^{-1} V1 R0 f with R0 f computed once on the nodes.
  std::vector<Vec4c> resolvent_difference_green(const std::vector<Vec3>& targets, const std::vector<Vec3>& sources,
                                                const std::vector<Vec4c>& values, double weight) const {
    std::vector<Vec4c> out;
    for (const auto& r : targets) {
      const auto g = (*this)(r, sources);
      Vec4c acc = Vec4c::Zero();
      for (size_t c = 0; c < sources.size(); ++c) acc += (g[c] - free(r, sources[c])) * values[c] * weight;
      out.push_back(acc);
    }
    return out;
  }

  std::vector<Vec4c> resolvent_difference_operator(const std::vector<Vec3>& targets, const std::vector<Vec3>& sources,
                                                   const std::vector<Vec4c>& values, double weight) const {
    const auto& grid = sc_.grid();
    const size_t nodes = grid.size();
    std::vector<Vec4c> out(targets.size(), Vec4c::Zero());
    if (nodes == 0) return out;
    Eigen::VectorXcd rhs(4 * nodes);
    for (size_t j = 0; j < nodes; ++j) {
      Vec4c r0f = Vec4c::Zero();
      for (size_t c = 0; c < sources.size(); ++c) r0f += free(grid.nodes[j], sources[c]) * values[c] * weight;
      rhs.segment<4>(4 * j) = sc_.root()[j] * r0f;
    }
    const Eigen::VectorXcd x = weighted(sys_.solve(rhs));
    for (size_t t = 0; t < targets.size(); ++t) out[t] = -sc_.green_apply(mu_, kappa_, targets[t], x);
    return out;
  }

 private:
  // V1 W1 X for the sources, one 4-column block per source.
  Eigen::MatrixXcd correction(const std::vector<Vec3>& sources) const {
    const auto& grid = sc_.grid();
    const size_t nodes = grid.size();
    Eigen::MatrixXcd rhs(4 * nodes, 4 * sources.size());
    for (size_t c = 0; c < sources.size(); ++c)
      for (size_t j = 0; j < nodes; ++j) rhs.block<4, 4>(4 * j, 4 * c) = sc_.root()[j] * free(grid.nodes[j], sources[c]);
    return weighted(sys_.solve(rhs));
  }

  Eigen::MatrixXcd weighted(Eigen::MatrixXcd x) const {
    for (size_t j = 0; j < sc_.grid().size(); ++j) x.middleRows<4>(4 * j) = sc_.right_factor(j) * x.middleRows<4>(4 * j);
    return x;
  }

  const DiracScatterer& sc_;
  cplx mu_, kappa_;
  NystromSystem<4> sys_;
};

}  // namespace rls
