#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "rls/angular.hpp"
#include "rls/nystrom.hpp"
#include "rls/support.hpp"

namespace rls {

struct SchrodingerSettings {
  double h = 0.15;
  double support_tol = 1e-8;
  SolverOptions solver{};
};

// Solutions of (I + K(lambda)) psi = e^{ik.r} |V|^{1/2} for a set of
// incident directions; column j belongs to incident[j].
struct SchrodingerSolution {
  double lambda = 0.0;
  std::vector<Vec3> incident;
  Eigen::MatrixXcd psi;   // N x M
  Eigen::MatrixXcd vphi;  // V phi at the nodes, N x M
  std::optional<KrylovReport> krylov;
};

// Nystrom discretization of the modified Lippmann-Schwinger equation
//   (I + K(lambda)) psi = e^{ik.r} |V|^{1/2},
//   K f(r) = |V(r)|^{1/2} int e^{i sqrt(lambda)|r-s|}/(4 pi |r-s|) sgn V(s) |V(s)|^{1/2} f(s) ds
// on the cell-centred lattice restricted to the support of V.
class SchrodingerScatterer {
 public:
  using Block = Eigen::Matrix<cplx, 1, 1>;

  SchrodingerScatterer(const PotentialSpec& spec, SchrodingerSettings settings = {})
      : spec_(spec), settings_(settings) {
    auto sampled = sample_support<double>(spec, settings.h, settings.support_tol, assemble_scalar_potential,
                                          [](double v) { return std::abs(v); });
    grid_ = sampled.grid;
    v_ = std::move(sampled.values);
    for (double v : v_) {
      const auto f = factorize_potential(v);
      root_.push_back(f.v1);
      sign_.push_back(f.w);
    }
  }

  const SupportGrid& grid() const { return *grid_; }
  const std::vector<double>& potential() const { return v_; }
  const PotentialSpec& spec() const { return spec_; }
  const SchrodingerSettings& settings() const { return settings_; }

  // I + K(lambda); lambda may be complex or negative (bound-state search).
  NystromSystem<1> system(cplx lambda) const {
    if (grid_->size() == 0) return NystromSystem<1>(grid_, {}, {}, KernelTable<Block>{}, settings_.solver);
    const cplx kappa = schrodinger_kappa(lambda);
    const double h = grid_->h;
    auto pointwise = [kappa](const Vec3& d) { return Block(helmholtz_green(d, kappa)); };
    KernelTable<Block> table(grid_->extent, h, pointwise, Block(cube_helmholtz_integral(kappa, h)));
    std::vector<Block> left, right;
    for (size_t i = 0; i < v_.size(); ++i) {
      left.push_back(Block(root_[i]));
      right.push_back(Block(sign_[i] * root_[i]));
    }
    return NystromSystem<1>(grid_, std::move(left), std::move(right), std::move(table), settings_.solver);
  }

  SchrodingerSolution solve(double lambda, const std::vector<Vec3>& incident) const {
    if (!(lambda > 0.0)) throw Error("solve: lambda must be positive");
    SchrodingerSolution sol;
    sol.lambda = lambda;
    sol.incident = incident;
    const size_t n = grid_->size();
    if (n == 0) {
      sol.psi = sol.vphi = Eigen::MatrixXcd::Zero(0, incident.size());
      return sol;
    }
    const auto sys = system(lambda);
    sys.check_exceptional(lambda);
    const double k = std::sqrt(lambda);
    Eigen::MatrixXcd rhs(n, incident.size());
    for (size_t j = 0; j < incident.size(); ++j)
      for (size_t i = 0; i < n; ++i)
        rhs(i, j) = std::exp(kI * k * incident[j].dot(grid_->nodes[i])) * root_[i];
    sol.psi = sys.solve(rhs);
    sol.krylov = sys.last_krylov();
    sol.vphi.resize(n, incident.size());
    for (size_t i = 0; i < n; ++i) sol.vphi.row(i) = sign_[i] * root_[i] * sol.psi.row(i);
    return sol;
  }

  // phi(r) = e^{ik.r} - int G0(r - s) V(s) phi(s) ds, any r.
  cplx phi(const SchrodingerSolution& sol, size_t column, const Vec3& r) const {
    const double k = std::sqrt(sol.lambda);
    const double h = grid_->h;
    cplx acc = std::exp(kI * k * sol.incident[column].dot(r));
    for (size_t j = 0; j < grid_->size(); ++j) {
      const Vec3 d = r - grid_->nodes[j];
      const cplx g = d.norm() < 1e-12 * h ? cube_helmholtz_integral(k, h) / (h * h * h) : helmholtz_green(d, k);
      acc -= g * sol.vphi(j, column) * (h * h * h);
    }
    return acc;
  }

  // T(w_i, w'_j) = sum_n e^{-i sqrt(lambda) r_n.w_i} (V phi)(r_n, w'_j) h^3.
  Eigen::MatrixXcd t_matrix(const SchrodingerSolution& sol, const std::vector<Vec3>& outgoing) const {
    const double k = std::sqrt(sol.lambda);
    const double vol = grid_->weight();
    Eigen::MatrixXcd e(outgoing.size(), grid_->size());
    for (size_t i = 0; i < outgoing.size(); ++i)
      for (size_t n = 0; n < grid_->size(); ++n)
        e(i, n) = std::exp(-kI * k * outgoing[i].dot(grid_->nodes[n])) * vol;
    if (grid_->size() == 0) return Eigen::MatrixXcd::Zero(outgoing.size(), sol.incident.size());
    return e * sol.vphi;
  }

  // First Born amplitude on the same lattice: -(1/4 pi) sum e^{-i(k-k').r} V h^3.
  cplx discrete_born(double lambda, const Vec3& out, const Vec3& in) const {
    const Vec3 q = std::sqrt(lambda) * (out - in);
    cplx s = 0.0;
    for (size_t n = 0; n < grid_->size(); ++n) s += std::exp(-kI * q.dot(grid_->nodes[n])) * v_[n];
    return -s * grid_->weight() / (4.0 * kPi);
  }

 private:
  PotentialSpec spec_;
  SchrodingerSettings settings_;
  std::shared_ptr<SupportGrid> grid_;
  std::vector<double> v_, root_, sign_;
};

inline Eigen::MatrixXcd amplitude_from_t(const Eigen::MatrixXcd& t) { return -t / (4.0 * kPi); }

// Analytic first Born amplitude -(1/4 pi) int e^{-i(k - k').s} V(s) ds.
inline cplx born_amplitude(const PotentialSpec& spec, const Vec3& k, const Vec3& k_prime) {
  if (spec.tabulated || spec.has_vector_part()) {
    throw Error("born_amplitude: analytic form needs scalar analytic terms");
  }
  const Vec3 q = k - k_prime;
  const double qn = q.norm();
  cplx f = 0.0;
  for (const auto& t : spec.scalar.terms) {
    const double g = spec.charge * t.strength;
    double v = 0.0;
    switch (t.family) {
      case Family::yukawa:
        v = -g / (t.scale * t.scale + qn * qn);
        break;
      case Family::gaussian: {
        const double w = t.scale;
        v = -g * std::sqrt(kPi) * w * w * w / 4.0 * std::exp(-w * w * qn * qn / 4.0);
        break;
      }
      case Family::square_well: {
        const double r = t.scale, x = qn * r;
        // V = -depth inside r; (sin x - x cos x)/q^3 -> r^3/3
        const double shape = x < 1e-3 ? r * r * r / 3.0 * (1.0 - x * x / 10.0)
                                       : (std::sin(x) - x * std::cos(x)) / (qn * qn * qn);
        v = g * shape;
        break;
      }
    }
    f += v * std::exp(-kI * q.dot(t.center));
  }
  return f;
}

// Discretized S(lambda) = I - 2 pi i mu^2 D^{1/2} T D^{1/2} on an angular
// mesh, mu^2 = sqrt(lambda) / (16 pi^3). The Schur form supplies
// eigenvalues and an orthonormal basis; for a normal S it is the
// eigen-decomposition.
struct SMatrixBlock {
  Eigen::MatrixXcd t;
  Eigen::MatrixXcd s;
  Eigen::VectorXcd mu;
  Eigen::MatrixXcd schur_basis;  // unitary; columns in the symmetric (weighted) basis
  Eigen::MatrixXcd g;            // G_j(w_i) = schur_basis(i, j) / sqrt(w_i)
  double unitarity_defect = 0.0;  // ||S* S - I||_F
  double normality_defect = 0.0;  // Frobenius norm of the strictly upper Schur part

  Eigen::Index size() const { return s.rows(); }
};

namespace detail {
inline void decompose(SMatrixBlock& b, const std::vector<double>& weights) {
  const Eigen::Index n = b.s.rows();
  b.unitarity_defect = (b.s.adjoint() * b.s - Eigen::MatrixXcd::Identity(n, n)).norm();
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(b.s);
  const Eigen::MatrixXcd& tri = schur.matrixT();
  b.schur_basis = schur.matrixU();
  b.mu = tri.diagonal();
  b.normality_defect = Eigen::MatrixXcd(tri.triangularView<Eigen::StrictlyUpper>()).norm();
  b.g.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) b.g.row(i) = b.schur_basis.row(i) / std::sqrt(weights[i]);
}
}  // namespace detail

inline SMatrixBlock schrodinger_s_matrix(double lambda, const Eigen::MatrixXcd& t, const AngularMesh& mesh) {
  SMatrixBlock b;
  b.t = t;
  const Eigen::Index n = t.rows();
  const double mu2 = std::sqrt(lambda) / (16.0 * kPi * kPi * kPi);
  Eigen::VectorXd sw(n);
  for (Eigen::Index i = 0; i < n; ++i) sw[i] = std::sqrt(mesh.weights[i]);
  b.s = Eigen::MatrixXcd::Identity(n, n) - 2.0 * kPi * kI * mu2 * (sw.asDiagonal() * t * sw.asDiagonal());
  detail::decompose(b, mesh.weights);
  return b;
}

// sigma = int int |f|^2 over both spheres.
inline double cross_section_direct(const Eigen::MatrixXcd& f, const AngularMesh& mesh) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j) s += mesh.weights[i] * mesh.weights[j] * std::norm(f(i, j));
  return s;
}

// sigma = (4 pi^2 / lambda) sum |mu_j - 1|^2.
inline double cross_section_ergodic(const Eigen::VectorXcd& mu, double lambda) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) s += std::norm(mu[j] - 1.0);
  return 4.0 * kPi * kPi / lambda * s;
}

// Coefficients a_j(w) = (2 pi / (i sqrt(lambda))) (mu_j - 1) G_j(w) of
// f(w, w') = sum_j a_j(w) conj(G_j(w')), ordered by decreasing |mu_j - 1|.
struct ErgodicExpansion {
  std::vector<Eigen::Index> order;
  Eigen::MatrixXcd a;            // mesh x modes, columns follow `order`
  std::vector<double> residual;  // weighted L2 residual after keeping 1..n modes
};

inline ErgodicExpansion ergodic_expansion(const Eigen::MatrixXcd& f, const SMatrixBlock& b, double lambda,
                                          const AngularMesh& mesh) {
  ErgodicExpansion e;
  const Eigen::Index n = b.size();
  e.order.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) e.order[j] = j;
  std::stable_sort(e.order.begin(), e.order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return std::abs(b.mu[x] - 1.0) > std::abs(b.mu[y] - 1.0);
  });
  const cplx pre = 2.0 * kPi / (kI * std::sqrt(lambda));
  e.a.resize(n, n);
  for (Eigen::Index c = 0; c < n; ++c) e.a.col(c) = pre * (b.mu[e.order[c]] - 1.0) * b.g.col(e.order[c]);
  Eigen::MatrixXcd recon = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    recon += e.a.col(c) * b.g.col(e.order[c]).adjoint();
    double r = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) r += mesh.weights[i] * mesh.weights[j] * std::norm(f(i, j) - recon(i, j));
    e.residual.push_back(std::sqrt(r));
  }
  return e;
}

}  // namespace rls
