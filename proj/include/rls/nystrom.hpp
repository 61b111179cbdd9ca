#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "rls/fft_convolution.hpp"
#include "rls/krylov.hpp"
#include "rls/lattice.hpp"

namespace rls {

enum class SolverMode { automatic, dense, iterative };

inline SolverMode solver_mode_from_string(const std::string& s) {
  if (s == "auto") return SolverMode::automatic;
  if (s == "dense") return SolverMode::dense;
  if (s == "iterative") return SolverMode::iterative;
  throw ConfigError("solver.mode", "expected auto|dense|iterative, got '" + s + "'");
}

struct SolverOptions {
  SolverMode mode = SolverMode::automatic;
  size_t dense_limit = 8000;  // unknowns
  KrylovOptions krylov{};
  // I + K is flagged singular when sigma_min < relative_threshold * ||I + K||.
  double exceptional_threshold = 1e-6;
  bool check_exceptional = true;
};

namespace detail {

// sigma_min of a dense matrix from its LU factors by inverse iteration on
// (A* A)^{-1}; exact SVD for small sizes.
inline double smallest_singular_value(const Eigen::MatrixXcd& a,
                                      const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu) {
  const Eigen::Index n = a.rows();
  if (n == 0) return 1.0;
  if (n <= 400) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(a);
    return svd.singularValues()[n - 1];
  }
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(1.0 + 0.37 * std::sin(1.3 * i), 0.21 * std::cos(0.7 * i));
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < 60; ++it) {
    Eigen::VectorXcd w = lu.solve(v);
    Eigen::VectorXcd u = lu.adjoint().solve(w);
    const double nu = u.norm();
    const double next = 1.0 / std::sqrt(nu);
    v = u / nu;
    if (it > 3 && std::abs(next - est) <= 1e-10 * next) {
      est = next;
      break;
    }
    est = next;
  }
  return est;
}

inline double spectral_norm(const Eigen::MatrixXcd& a) {
  const Eigen::Index n = a.cols();
  if (n == 0) return 0.0;
  if (n <= 400) return Eigen::BDCSVD<Eigen::MatrixXcd>(a).singularValues()[0];
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(n).normalized();
  double est = 0.0;
  for (int it = 0; it < 60; ++it) {
    Eigen::VectorXcd w = a.adjoint() * (a * v);
    const double nw = w.norm();
    const double next = std::sqrt(nw);
    v = w / nw;
    if (it > 3 && std::abs(next - est) <= 1e-10 * next) return next;
    est = next;
  }
  return est;
}

}  // namespace detail

// Nystrom discretization of I + K with
//   (K x)_i = L_i sum_j T(index_i - index_j) R_j x_j
// where T is a translation-invariant B x B kernel table (cell weights
// folded in) and L, R are per-node B x B factors.
template <int B>
class NystromSystem {
 public:
  using Block = Eigen::Matrix<cplx, B, B>;

  NystromSystem(std::shared_ptr<const SupportGrid> grid, std::vector<Block> left,
                std::vector<Block> right, KernelTable<Block> table, SolverOptions opt = {})
      : grid_(std::move(grid)),
        left_(std::move(left)),
        right_(std::move(right)),
        table_(std::move(table)),
        opt_(opt) {
    const size_t unknowns = static_cast<size_t>(B) * grid_->size();
    dense_ = opt_.mode == SolverMode::dense ||
             (opt_.mode == SolverMode::automatic && unknowns <= opt_.dense_limit);
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(B * grid_->size()); }
  bool is_dense() const { return dense_; }
  const SupportGrid& grid() const { return *grid_; }
  const KernelTable<Block>& table() const { return table_; }

  // Dense K (without the identity).
  Eigen::MatrixXcd k_matrix() const {
    const size_t n = grid_->size();
    Eigen::MatrixXcd k(size(), size());
    for (size_t j = 0; j < n; ++j) {
      for (size_t i = 0; i < n; ++i) {
        Index3 o;
        for (int a = 0; a < 3; ++a) o[a] = grid_->index[i][a] - grid_->index[j][a];
        k.template block<B, B>(B * i, B * j) = left_[i] * table_(o) * right_[j];
      }
    }
    return k;
  }

  // (I + K) x, matrix-free.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const {
    if (dense_) {
      ensure_matrix();
      return *matrix_ * x;
    }
    ensure_convolver();
    const size_t n = grid_->size();
    Eigen::VectorXcd rx(size());
    for (size_t j = 0; j < n; ++j) rx.template segment<B>(B * j) = right_[j] * x.template segment<B>(B * j);
    Eigen::VectorXcd c = convolver_->convolve(rx);
    Eigen::VectorXcd y = x;
    for (size_t i = 0; i < n; ++i) y.template segment<B>(B * i) += left_[i] * c.template segment<B>(B * i);
    return y;
  }

  // Dense I + K, cached.
  const Eigen::MatrixXcd& matrix() const {
    ensure_matrix();
    return *matrix_;
  }

  // Singular-value diagnostics need the dense matrix.
  double smallest_singular_value() const {
    require_dense("smallest singular value");
    ensure_lu();
    return detail::smallest_singular_value(*matrix_, *lu_);
  }
  double norm() const {
    require_dense("operator norm");
    ensure_matrix();
    return detail::spectral_norm(*matrix_);
  }
  // ||K||, without the identity.
  double k_norm() const {
    require_dense("operator norm");
    ensure_matrix();
    return detail::spectral_norm(*matrix_ - Eigen::MatrixXcd::Identity(size(), size()));
  }

  // Throws ExceptionalValue when I + K is numerically singular (dense
  // mode only; in iterative mode a stagnating Krylov solve reports it).
  void check_exceptional(double energy) const {
    if (!opt_.check_exceptional || !dense_ || size() == 0) return;
    const double smin = smallest_singular_value();
    const double thresh = opt_.exceptional_threshold * norm();
    if (smin < thresh) throw ExceptionalValue(energy, smin, thresh);
  }

  // Solves (I + K) X = RHS column by column.
  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const {
    if (size() == 0) return rhs;
    if (dense_) {
      ensure_lu();
      return lu_->solve(rhs);
    }
    Eigen::MatrixXcd out(rhs.rows(), rhs.cols());
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
      Eigen::VectorXcd x = Eigen::VectorXcd::Zero(rhs.rows());
      const Eigen::VectorXcd b = rhs.col(c);
      const auto rep = gmres([this](const Eigen::VectorXcd& v) { return apply(v); }, b, x, opt_.krylov);
      last_krylov_ = rep;
      if (!rep.converged) {
        throw SolverDidNotConverge("GMRES stalled at relative residual " +
                                   std::to_string(rep.relative_residual) + " after " +
                                   std::to_string(rep.iterations) + " iterations");
      }
      out.col(c) = x;
    }
    return out;
  }

  // Signed log-determinant of I + K (dense): returns (log|det|, phase).
  std::pair<double, cplx> log_determinant() const {
    require_dense("determinant");
    ensure_lu();
    const auto& lu = lu_->matrixLU();
    double logabs = 0.0;
    cplx phase = lu_->permutationP().determinant();
    for (Eigen::Index i = 0; i < lu.rows(); ++i) {
      const cplx d = lu(i, i);
      logabs += std::log(std::abs(d));
      phase *= d / std::abs(d);
    }
    return {logabs, phase};
  }

  const std::optional<KrylovReport>& last_krylov() const { return last_krylov_; }

 private:
  void require_dense(const char* what) const {
    if (!dense_) {
      throw Error(std::string(what) + " needs the dense path: " + std::to_string(size()) +
                  " unknowns exceed solver.dense_limit");
    }
  }
  void ensure_matrix() const {
    if (matrix_) return;
    matrix_ = k_matrix();
    matrix_->diagonal().array() += 1.0;
  }
  void ensure_lu() const {
    if (lu_) return;
    ensure_matrix();
    lu_.emplace(*matrix_);
  }
  void ensure_convolver() const {
    if (!convolver_) convolver_ = std::make_unique<FftConvolver<B>>(*grid_, table_);
  }

  std::shared_ptr<const SupportGrid> grid_;
  std::vector<Block> left_, right_;
  KernelTable<Block> table_;
  SolverOptions opt_;
  bool dense_ = true;
  mutable std::optional<Eigen::MatrixXcd> matrix_;
  mutable std::optional<Eigen::PartialPivLU<Eigen::MatrixXcd>> lu_;
  mutable std::unique_ptr<FftConvolver<B>> convolver_;
  mutable std::optional<KrylovReport> last_krylov_;
};

}  // namespace rls
