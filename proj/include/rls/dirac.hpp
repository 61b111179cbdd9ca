#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rls/angular.hpp"
#include "rls/nystrom.hpp"
#include "rls/schrodinger.hpp"
#include "rls/support.hpp"

namespace rls {

using Mat2c = Eigen::Matrix2cd;

// 2^4 pi^5, the proportionality constant quoted between F_p and lambda T_p.
inline const double kGammaReference = 16.0 * std::pow(kPi, 5);

struct DiracSettings {
  double h = 0.2;
  double support_tol = 1e-8;
  SolverOptions solver{};  // dense_limit counts unknowns: 8000 = 2000 nodes
};

// Solutions of (I + K(lambda)) psi = e^{ik.r} V1 g_n(k), one column per
// (incident direction, channel) pair.
struct RlsSolution {
  double m = 1.0;
  double lambda = 0.0;
  double kappa = 0.0;  // |k| >= 0
  std::vector<Vec3> incident;  // unit directions; k = kappa * incident
  std::vector<int> channel;
  Eigen::MatrixXcd psi;   // 4N x M
  Eigen::MatrixXcd vphi;  // V phi = V1 W1 psi, 4N x M
  std::optional<KrylovReport> krylov;

  Vec3 momentum(size_t column) const { return kappa * incident[column]; }
};

// Nystrom discretization of the modified relativistic Lippmann-Schwinger
// equation (I + K(mu)) psi = e^{ik.r} V1 g_n(k),
//   K f(r) = V1(r) int G0(r - s, mu) V1(s) W1(s) f(s) ds,
// G0 the kernel of (H0 - mu)^{-1}. The self-cell keeps the even part
// (m beta + mu) int_cube e^{i kappa r}/(4 pi r); the odd alpha.r part
// integrates to zero over the cube.
class DiracScatterer {
 public:
  using Block = Mat4c;

  DiracScatterer(const PotentialSpec& spec, double m, DiracSettings settings = {})
      : spec_(spec), m_(m), settings_(settings) {
    if (!(m > 0.0)) throw ConfigError("mass", "must be positive");
    auto sampled = sample_support<Mat4c>(spec, settings.h, settings.support_tol, assemble_dirac_potential,
                                         [](const Mat4c& v) { return v.norm(); });
    grid_ = sampled.grid;
    v_ = std::move(sampled.values);
    for (const auto& v : v_) {
      const auto f = factorize_potential(v);
      v1_.push_back(f.v1);
      w1_.push_back(f.w1);
    }
  }

  const SupportGrid& grid() const { return *grid_; }
  const std::vector<Mat4c>& potential() const { return v_; }
  const std::vector<Mat4c>& root() const { return v1_; }
  Mat4c right_factor(size_t j) const { return v1_[j] * w1_[j]; }
  const PotentialSpec& spec() const { return spec_; }
  double mass() const { return m_; }
  const DiracSettings& settings() const { return settings_; }

  // Cell-integrated kernel table of G0 at mu on the branch `kappa`.
  KernelTable<Block> kernel_table(cplx mu, cplx kappa) const {
    const double h = grid_->h, m = m_;
    const auto& alg = DiracAlgebra::get();
    auto pointwise = [=](const Vec3& d) { return Block(free_dirac_green(d, mu, m, kappa)); };
    const Block self = (m * alg.beta + mu * Mat4c::Identity()) * cube_helmholtz_integral(kappa, h);
    return KernelTable<Block>(grid_->extent, h, pointwise, self);
  }

  // I + K(mu). mu = lambda (real, |lambda| > m) is taken on the outgoing
  // branch; real mu inside the gap and complex mu use Im kappa > 0.
  NystromSystem<4> system(cplx mu) const { return system(mu, outgoing_kappa(mu, m_)); }

  NystromSystem<4> system(cplx mu, cplx kappa) const {
    if (grid_->size() == 0) return NystromSystem<4>(grid_, {}, {}, KernelTable<Block>{}, settings_.solver);
    std::vector<Block> right;
    for (size_t i = 0; i < v1_.size(); ++i) right.push_back(right_factor(i));
    return NystromSystem<4>(grid_, v1_, std::move(right), kernel_table(mu, kappa), settings_.solver);
  }

  RlsSolution solve(double lambda, const std::vector<Vec3>& directions, const std::vector<int>& channels) const {
    const EnergyShell shell(m_, lambda);
    for (int n : channels) shell.check_channel(n);
    RlsSolution sol;
    sol.m = m_;
    sol.lambda = lambda;
    sol.kappa = shell.kappa;
    for (const auto& d : directions)
      for (int n : channels) {
        sol.incident.push_back(d.normalized());
        sol.channel.push_back(n);
      }
    const size_t nodes = grid_->size(), cols = sol.incident.size();
    if (nodes == 0) {
      sol.psi = sol.vphi = Eigen::MatrixXcd::Zero(0, cols);
      return sol;
    }
    const auto sys = system(lambda);
    sys.check_exceptional(lambda);
    Eigen::MatrixXcd rhs(4 * nodes, cols);
    for (size_t c = 0; c < cols; ++c) {
      const Vec3 k = sol.momentum(c);
      const Vec4c g = free_spinor(k, m_, sol.channel[c]);
      for (size_t i = 0; i < nodes; ++i)
        rhs.block<4, 1>(4 * i, c) = std::exp(kI * k.dot(grid_->nodes[i])) * (v1_[i] * g);
    }
    sol.psi = sys.solve(rhs);
    sol.krylov = sys.last_krylov();
    sol.vphi.resize(4 * nodes, cols);
    for (size_t i = 0; i < nodes; ++i)
      sol.vphi.middleRows<4>(4 * i) = v1_[i] * w1_[i] * sol.psi.middleRows<4>(4 * i);
    return sol;
  }

  // phi(r) = e^{ik.r} g_n(k) - int G0(r - s) V(s) phi(s) ds at any r.
  Vec4c phi(const RlsSolution& sol, size_t column, const Vec3& r) const {
    const Vec3 k = sol.momentum(column);
    Vec4c acc = std::exp(kI * k.dot(r)) * free_spinor(k, m_, sol.channel[column]);
    const cplx kappa = outgoing_kappa(sol.lambda, m_);
    acc -= green_apply(sol.lambda, kappa, r, sol.vphi.col(column));
    return acc;
  }

  // sum_j G0(r - r_j) x_j h^3 for a 4N vector x; the self-cell uses the
  // cell-averaged kernel.
  Vec4c green_apply(cplx mu, cplx kappa, const Vec3& r, const Eigen::VectorXcd& x) const {
    const double h = grid_->h, vol = grid_->weight();
    const auto& alg = DiracAlgebra::get();
    Vec4c acc = Vec4c::Zero();
    for (size_t j = 0; j < grid_->size(); ++j) {
      const Vec3 d = r - grid_->nodes[j];
      const Mat4c g = d.norm() < 1e-12 * h
                          ? Mat4c((m_ * alg.beta + mu * Mat4c::Identity()) * (cube_helmholtz_integral(kappa, h) / vol))
                          : free_dirac_green(d, mu, m_, kappa);
      acc += g * x.segment<4>(4 * j) * vol;
    }
    return acc;
  }

  // Rows 4i..4i+3: int e^{-i q_i.r} V(r) phi(r) dr for each column, at
  // momenta q_i.
  Eigen::MatrixXcd momentum_integrals(const RlsSolution& sol, const std::vector<Vec3>& momenta) const {
    const size_t nodes = grid_->size();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(4 * momenta.size(), sol.incident.size());
    if (nodes == 0) return out;
    const double vol = grid_->weight();
    Eigen::MatrixXcd e(momenta.size(), nodes);
    for (size_t i = 0; i < momenta.size(); ++i)
      for (size_t n = 0; n < nodes; ++n) e(i, n) = std::exp(-kI * momenta[i].dot(grid_->nodes[n])) * vol;
    for (int a = 0; a < 4; ++a) {
      Eigen::MatrixXcd comp(nodes, sol.incident.size());
      for (size_t n = 0; n < nodes; ++n) comp.row(n) = sol.vphi.row(4 * n + a);
      const Eigen::MatrixXcd r = e * comp;
      for (size_t i = 0; i < momenta.size(); ++i) out.row(4 * i + a) = r.row(i);
    }
    return out;
  }

 private:
  PotentialSpec spec_;
  double m_;
  DiracSettings settings_;
  std::shared_ptr<SupportGrid> grid_;
  std::vector<Mat4c> v_, v1_, w1_;
};

// Amplitude vector at outgoing momentum q on the shell:
//   f = -(lambda / 2 pi) P_lambda(q) int e^{-i q.r} V phi dr,
// P_lambda(q) = (H0(q) + lambda) / (2 lambda). With q = kappa_out w this is
// the coefficient of e^{i kappa_out |r|}/|r| in direction w, kappa_out =
// sign(lambda) kappa.
inline Vec4c amplitude_from_integral(double lambda, double m, const Vec3& q, const Vec4c& integral) {
  const Mat4c p = (dirac_h0(MomentumPoint(q, m)) + lambda * Mat4c::Identity()) / (2.0 * lambda);
  return -(lambda / (2.0 * kPi)) * (p * integral);
}

// On-shell data of one channel pair p on an angular mesh, with momenta
// q = kappa w and k = kappa w'. Matrices are indexed (2 i + s, 2 j + n)
// with i, j mesh nodes and s, n in {0, 1} the position inside the pair.
struct DiracOnShell {
  double m = 1.0, lambda = 0.0, kappa = 0.0;
  int pair = 2;  // 1: channels (1,2), lambda < -m; 2: channels (3,4), lambda > m
  AngularMesh mesh;
  Eigen::MatrixXcd t;       // g_s*(q) int e^{-iq.r} V phi_n(r, k) dr
  Eigen::MatrixXcd big_t;   // (2 pi)^{-3} t
  Eigen::MatrixXcd f;       // f_{s,n}(q, k) = g_s*(q) f(w, k, n)
  Eigen::MatrixXcd f_vec;   // rows 4i..4i+3: amplitude vectors, column 2j+n
  std::array<int, 2> channels{3, 4};
};

inline DiracOnShell dirac_on_shell(const DiracScatterer& sc, double lambda, const AngularMesh& mesh) {
  const EnergyShell shell(sc.mass(), lambda);
  DiracOnShell out;
  out.m = sc.mass();
  out.lambda = lambda;
  out.kappa = shell.kappa;
  out.pair = lambda > 0 ? 2 : 1;
  out.channels = shell.channels();
  out.mesh = mesh;
  const std::vector<int> chans{out.channels[0], out.channels[1]};
  const auto sol = sc.solve(lambda, mesh.directions, chans);
  std::vector<Vec3> momenta;
  for (const auto& w : mesh.directions) momenta.push_back(shell.kappa * w);
  const Eigen::MatrixXcd integ = sc.momentum_integrals(sol, momenta);
  const Eigen::Index nm = static_cast<Eigen::Index>(mesh.size());
  out.t.resize(2 * nm, 2 * nm);
  out.f.resize(2 * nm, 2 * nm);
  out.f_vec.resize(4 * nm, 2 * nm);
  for (Eigen::Index i = 0; i < nm; ++i) {
    const auto es = dirac_eigensystem(MomentumPoint(momenta[i], out.m));
    for (Eigen::Index c = 0; c < 2 * nm; ++c) {
      const Vec4c v = integ.block<4, 1>(4 * i, c);
      const Vec4c fv = amplitude_from_integral(lambda, out.m, momenta[i], v);
      out.f_vec.block<4, 1>(4 * i, c) = fv;
      for (int s = 0; s < 2; ++s) {
        const Vec4c g = es.column(out.channels[s]);
        out.t(2 * i + s, c) = g.dot(v);  // conjugates g
        out.f(2 * i + s, c) = g.dot(fv);
      }
    }
  }
  out.big_t = out.t / std::pow(2.0 * kPi, 3);
  return out;
}

// Coefficient c in S_p = I + c W^{1/2} t W^{1/2}: c = -i kappa |lambda| / (4 pi^2),
// so that S = I + i sgn(lambda) (kappa / 2 pi) F. Flux conservation fixes the
// phase; |c| = a(|k|) (2 pi)^{-3} with a = 2 pi |lambda| kappa.
inline cplx dirac_s_coefficient(double lambda, double kappa) {
  return -kI * kappa * std::abs(lambda) / (4.0 * kPi * kPi);
}

inline SMatrixBlock dirac_s_matrix(const DiracOnShell& d) {
  SMatrixBlock b;
  b.t = d.t;
  const Eigen::Index n = d.t.rows();
  std::vector<double> w(n);
  Eigen::VectorXd sw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = d.mesh.weights[i / 2];
    sw[i] = std::sqrt(w[i]);
  }
  b.s = Eigen::MatrixXcd::Identity(n, n) +
        dirac_s_coefficient(d.lambda, d.kappa) * (sw.asDiagonal() * d.t * sw.asDiagonal());
  detail::decompose(b, w);
  return b;
}

// Cross sections of pair p. `direct` is the 2 x 2 matrix
// int int F F* dW dW'; `ergodic` rebuilds it from the S eigen-decomposition
// with the constant implied by S = I + i sgn(lambda) (kappa / 2 pi) F, namely
// (2 pi / kappa)^2 sum |mu_j - 1|^2 int G_j G_j*; `reference` uses the
// quoted constant (lambda gamma)^2 in its place.
struct DiracCrossSections {
  Mat2c direct = Mat2c::Zero();
  Mat2c ergodic = Mat2c::Zero();
  Mat2c reference = Mat2c::Zero();
  double trace_direct = 0.0, trace_ergodic = 0.0, trace_reference = 0.0;
  double hs_sum = 0.0;  // sum |mu_j - 1|^2

  double direct_over_reference() const { return trace_reference > 0 ? trace_direct / trace_reference : 0.0; }
};

inline DiracCrossSections dirac_cross_sections(const DiracOnShell& d, const SMatrixBlock& b) {
  DiracCrossSections cs;
  const Eigen::Index nm = static_cast<Eigen::Index>(d.mesh.size());
  for (Eigen::Index i = 0; i < nm; ++i)
    for (Eigen::Index j = 0; j < nm; ++j) {
      const Mat2c blk = d.f.block<2, 2>(2 * i, 2 * j);
      cs.direct += d.mesh.weights[i] * d.mesh.weights[j] * (blk * blk.adjoint());
    }
  Mat2c sum = Mat2c::Zero();
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const double a = std::norm(b.mu[j] - 1.0);
    cs.hs_sum += a;
    Mat2c gg = Mat2c::Zero();
    for (Eigen::Index i = 0; i < nm; ++i) {
      const Eigen::Vector2cd u = b.schur_basis.block<2, 1>(2 * i, j);
      gg += u * u.adjoint();
    }
    sum += a * gg;
  }
  cs.ergodic = std::pow(2.0 * kPi / d.kappa, 2) * sum;
  cs.reference = std::pow(d.lambda * kGammaReference, 2) * sum;
  cs.trace_direct = cs.direct.trace().real();
  cs.trace_ergodic = cs.ergodic.trace().real();
  cs.trace_reference = cs.reference.trace().real();
  return cs;
}

// Least-squares c in F ~ c lambda T.
struct GammaFit {
  double c_real = 0.0;
  cplx c = 0.0;
  double residual = 0.0;     // ||F - c lambda T|| / ||F||
  double correlation = 0.0;  // |<lambda T, F>| / (||lambda T|| ||F||)
  double reference = -kGammaReference;
};

inline GammaFit gamma_consistency(const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& big_t, double lambda) {
  const Eigen::MatrixXcd x = lambda * big_t;
  const double xx = x.squaredNorm();
  if (!(xx > 1e-300) || !(xx > 1e-28 * f.squaredNorm())) throw DegenerateFit("gamma_consistency: T is numerically zero");
  const cplx xy = (x.conjugate().cwiseProduct(f)).sum();
  GammaFit g;
  g.c = xy / xx;
  g.c_real = g.c.real();
  const double fn = f.norm();
  g.residual = fn > 0 ? (f - g.c * x).norm() / fn : 0.0;
  g.correlation = fn > 0 ? std::abs(xy) / (std::sqrt(xx) * fn) : 0.0;
  return g;
}

// Far-field residual rho(R) = max_w |R (phi(R w) - e^{ik.Rw} g_n - e^{i kappa_out R} f(w)/R)|
// for the physical amplitude f(w) at momentum kappa_out w; also the
// amplitude recovered at each R.
struct FarFieldReport {
  std::vector<double> radii, residual;
  std::vector<double> extraction_error;  // max_w |f_R(w) - f(w)| / max_w |f(w)|
};

inline FarFieldReport far_field_check(const DiracScatterer& sc, const RlsSolution& sol, size_t column,
                                      const std::vector<double>& radii, const std::vector<Vec3>& directions) {
  FarFieldReport rep;
  rep.radii = radii;
  const double kout = sol.lambda > 0 ? sol.kappa : -sol.kappa;
  std::vector<Vec3> momenta;
  for (const auto& w : directions) momenta.push_back(kout * w);
  const Eigen::MatrixXcd integ = sc.momentum_integrals(sol, momenta);
  std::vector<Vec4c> f;
  double fmax = 0.0;
  for (size_t i = 0; i < directions.size(); ++i) {
    f.push_back(amplitude_from_integral(sol.lambda, sol.m, momenta[i], integ.block<4, 1>(4 * i, column)));
    fmax = std::max(fmax, f.back().norm());
  }
  const Vec3 k = sol.momentum(column);
  const Vec4c g = free_spinor(k, sol.m, sol.channel[column]);
  for (double r : radii) {
    double rho = 0.0, ext = 0.0;
    for (size_t i = 0; i < directions.size(); ++i) {
      const Vec3 x = r * directions[i];
      const Vec4c scattered = sc.phi(sol, column, x) - std::exp(kI * k.dot(x)) * g;
      const cplx wave = std::exp(kI * kout * r);
      rho = std::max(rho, (r * scattered - wave * f[i]).norm());
      ext = std::max(ext, (r * scattered / wave - f[i]).norm());
    }
    rep.residual.push_back(rho);
    rep.extraction_error.push_back(fmax > 0 ? ext / fmax : ext);
  }
  return rep;
}

// First Born amplitude at momenta (q, k): -(lambda/2 pi) P(q) V~(q - k) g_n(k)
// with V~(Q) = int e^{-iQ.r} V(r) dr for a scalar Yukawa-type nu
// (analytic families, A = 0).
inline Vec4c dirac_born_amplitude(const PotentialSpec& spec, double m, double lambda, const Vec3& q, const Vec3& k,
                                  int n) {
  if (spec.has_vector_part() || spec.tabulated) throw Error("dirac_born_amplitude: scalar analytic terms only");
  // V = -e nu I4 and -(1/4 pi) int e^{-iQ.r} nu = born_amplitude(nu)
  const cplx vt = 4.0 * kPi * born_amplitude(spec, q, k);
  return amplitude_from_integral(lambda, m, q, vt * free_spinor(k, m, n));
}

}  // namespace rls
