#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "rls/errors.hpp"

namespace rls {

struct KrylovOptions {
  double tolerance = 1e-10;  // relative residual
  int max_iterations = 500;
  int restart = 60;
};

struct KrylovReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// Restarted GMRES with modified Gram-Schmidt and Givens rotations for
// A x = b, where `apply` computes A v.
template <class Apply>
KrylovReport gmres(Apply&& apply, const Eigen::VectorXcd& b, Eigen::VectorXcd& x,
                   const KrylovOptions& opt = {}) {
  using Vec = Eigen::VectorXcd;
  using cplx = std::complex<double>;
  KrylovReport rep;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero(b.size());
    rep.converged = true;
    return rep;
  }
  if (x.size() != b.size()) x.setZero(b.size());

  const int m = opt.restart;
  std::vector<Vec> basis;
  Eigen::MatrixXcd hess(m + 1, m);
  std::vector<cplx> cs(m), sn(m);
  Eigen::VectorXcd g(m + 1);

  while (rep.iterations < opt.max_iterations) {
    Vec r = b - apply(x);
    double beta = r.norm();
    rep.relative_residual = beta / bnorm;
    if (rep.relative_residual <= opt.tolerance) {
      rep.converged = true;
      return rep;
    }
    basis.assign(1, r / beta);
    hess.setZero();
    g.setZero();
    g[0] = beta;
    int k = 0;
    for (; k < m && rep.iterations < opt.max_iterations; ++k) {
      ++rep.iterations;
      Vec w = apply(basis[k]);
      for (int i = 0; i <= k; ++i) {
        hess(i, k) = basis[i].dot(w);
        w -= hess(i, k) * basis[i];
      }
      hess(k + 1, k) = w.norm();
      for (int i = 0; i < k; ++i) {
        const cplx t = std::conj(cs[i]) * hess(i, k) + std::conj(sn[i]) * hess(i + 1, k);
        hess(i + 1, k) = -sn[i] * hess(i, k) + cs[i] * hess(i + 1, k);
        hess(i, k) = t;
      }
      const double a = std::abs(hess(k, k));
      const double bb = std::abs(hess(k + 1, k));
      const double rho = std::hypot(a, bb);
      if (rho == 0.0) {
        cs[k] = 1.0;
        sn[k] = 0.0;
      } else {
        cs[k] = hess(k, k) / rho;
        sn[k] = hess(k + 1, k) / rho;
      }
      hess(k, k) = rho;
      hess(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = std::conj(cs[k]) * g[k];
      rep.relative_residual = std::abs(g[k + 1]) / bnorm;
      const double wn = w.norm();
      if (rep.relative_residual <= opt.tolerance || wn == 0.0) {
        ++k;
        break;
      }
      basis.push_back(w / wn);
    }
    Eigen::VectorXcd y = hess.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    for (int i = 0; i < k; ++i) x += y[i] * basis[i];
    if (rep.relative_residual <= opt.tolerance) {
      const double true_res = (b - apply(x)).norm() / bnorm;
      rep.relative_residual = true_res;
      if (true_res <= 10.0 * opt.tolerance) {
        rep.converged = true;
        return rep;
      }
    }
  }
  return rep;
}

}  // namespace rls
