#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rls/dirac_algebra.hpp"
#include "rls/errors.hpp"

namespace rls {

enum class Family { yukawa, gaussian, square_well };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::yukawa: return "yukawa";
    case Family::gaussian: return "gaussian";
    case Family::square_well: return "square_well";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "yukawa") return Family::yukawa;
  if (s == "gaussian") return Family::gaussian;
  if (s == "square_well") return Family::square_well;
  throw ConfigError("family", "unknown potential family '" + s + "'");
}

// One analytic term centred at `center`:
//   yukawa       strength e^{-scale r} / r
//   gaussian     strength e^{-r^2 / scale^2}
//   square_well  -strength for r < scale, 0 outside (strength is the depth)
struct AnalyticTerm {
  Family family = Family::gaussian;
  double strength = 0.0;
  double scale = 1.0;
  Vec3 center = Vec3::Zero();

  double operator()(const Vec3& r) const {
    const double d = (r - center).norm();
    switch (family) {
      case Family::yukawa:
        return d > 0.0 ? strength * std::exp(-scale * d) / d
                       : std::numeric_limits<double>::infinity();
      case Family::gaussian:
        return strength * std::exp(-d * d / (scale * scale));
      case Family::square_well:
        return d < scale ? -strength : 0.0;
    }
    return 0.0;
  }

  // Radius beyond which |term| < tol * |strength| (infinite support families).
  double support_radius(double tol) const {
    const double c = center.norm();
    switch (family) {
      case Family::yukawa: {
        // e^{-scale r}/r < tol for r >= 1 once scale r >= -log(tol)
        return c + std::max(1.0, -std::log(tol) / scale);
      }
      case Family::gaussian:
        return c + scale * std::sqrt(-std::log(tol));
      case Family::square_well:
        return c + scale;
    }
    return c;
  }
};

// Sum of analytic terms; the zero potential is the empty sum.
struct ScalarProfile {
  std::vector<AnalyticTerm> terms;

  double operator()(const Vec3& r) const {
    double v = 0.0;
    for (const auto& t : terms) v += t(r);
    return v;
  }
  bool empty() const { return terms.empty(); }
  bool is_radial() const {
    return std::all_of(terms.begin(), terms.end(),
                       [](const AnalyticTerm& t) { return t.center.norm() == 0.0; });
  }
  double support_radius(double tol) const {
    double r = 0.0;
    for (const auto& t : terms) r = std::max(r, t.support_radius(tol));
    return r;
  }
  bool has_discontinuity() const {
    return std::any_of(terms.begin(), terms.end(),
                       [](const AnalyticTerm& t) { return t.family == Family::square_well; });
  }
};

// Values sampled on a uniform lattice, interpolated trilinearly, zero
// outside. Each node carries a 4x4 Hermitian matrix (Dirac) or a real
// scalar stored on the diagonal (Schrodinger).
struct TabulatedPotential {
  Vec3 origin = Vec3::Zero();  // position of node (0,0,0)
  double spacing = 1.0;
  std::array<int, 3> dims{0, 0, 0};
  bool matrix_valued = false;
  std::vector<Mat4c> values;

  const Mat4c& at(int i, int j, int k) const {
    return values[(static_cast<size_t>(i) * dims[1] + j) * dims[2] + k];
  }

  Mat4c operator()(const Vec3& r) const {
    const Vec3 x = (r - origin) / spacing;
    std::array<int, 3> base;
    std::array<double, 3> frac;
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor(x[a]);
      base[a] = static_cast<int>(f);
      frac[a] = x[a] - f;
      if (x[a] < -1e-9 || x[a] > dims[a] - 1 + 1e-9) return Mat4c::Zero();
      if (base[a] >= dims[a] - 1) {
        base[a] = dims[a] - 1;
        frac[a] = 0.0;
      }
    }
    Mat4c out = Mat4c::Zero();
    for (int c = 0; c < 8; ++c) {
      double w = 1.0;
      std::array<int, 3> idx;
      for (int a = 0; a < 3; ++a) {
        const int bit = (c >> a) & 1;
        idx[a] = std::min(base[a] + bit, dims[a] - 1);
        w *= bit ? frac[a] : 1.0 - frac[a];
      }
      if (w != 0.0) out += w * at(idx[0], idx[1], idx[2]);
    }
    return out;
  }

  double support_radius() const {
    double r = 0.0;
    for (int c = 0; c < 8; ++c) {
      Vec3 p = origin;
      for (int a = 0; a < 3; ++a) p[a] += ((c >> a) & 1) * spacing * (dims[a] - 1);
      r = std::max(r, p.norm());
    }
    return r;
  }
};

// Reads a tabulated potential. One node per line:
//   x y z v                                   (scalar)
//   x y z re(V_11) im(V_11) ... re(V_44) im(V_44)  (4x4, row-major)
// Nodes must fill a uniform lattice; lines starting with '#' are comments.
inline TabulatedPotential read_tabulated_potential(std::istream& in) {
  struct Row {
    Vec3 x;
    Mat4c v;
  };
  std::vector<Row> rows;
  std::string line;
  int width = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> cols;
    double d;
    while (ss >> d) cols.push_back(d);
    if (cols.empty()) continue;
    if (width < 0) width = static_cast<int>(cols.size());
    if (static_cast<int>(cols.size()) != width || (width != 4 && width != 35)) {
      throw ConfigError("tabulated", "expected 4 or 35 columns per row, got " +
                                         std::to_string(cols.size()));
    }
    Row r;
    r.x = Vec3(cols[0], cols[1], cols[2]);
    if (width == 4) {
      r.v = Mat4c::Identity() * cols[3];
    } else {
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          r.v(i, j) = cplx(cols[3 + 2 * (4 * i + j)], cols[4 + 2 * (4 * i + j)]);
      if ((r.v - r.v.adjoint()).norm() > 1e-10 * std::max(1.0, r.v.norm())) {
        throw ConfigError("tabulated", "node matrix is not Hermitian");
      }
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw ConfigError("tabulated", "no nodes");

  TabulatedPotential t;
  t.matrix_valued = width == 35;
  Vec3 lo = rows[0].x, hi = rows[0].x;
  for (const auto& r : rows) {
    lo = lo.cwiseMin(r.x);
    hi = hi.cwiseMax(r.x);
  }
  double h = std::numeric_limits<double>::infinity();
  for (const auto& r : rows)
    for (int a = 0; a < 3; ++a) {
      const double d = r.x[a] - lo[a];
      if (d > 1e-12) h = std::min(h, d);
    }
  if (!std::isfinite(h)) h = 1.0;
  t.origin = lo;
  t.spacing = h;
  for (int a = 0; a < 3; ++a) t.dims[a] = static_cast<int>(std::lround((hi[a] - lo[a]) / h)) + 1;
  t.values.assign(static_cast<size_t>(t.dims[0]) * t.dims[1] * t.dims[2], Mat4c::Zero());
  std::vector<char> seen(t.values.size(), 0);
  for (const auto& r : rows) {
    std::array<int, 3> idx;
    for (int a = 0; a < 3; ++a) {
      const double f = (r.x[a] - lo[a]) / h;
      idx[a] = static_cast<int>(std::lround(f));
      if (std::abs(f - idx[a]) > 1e-6) {
        throw ConfigError("tabulated", "nodes do not lie on a uniform lattice");
      }
    }
    const size_t flat = (static_cast<size_t>(idx[0]) * t.dims[1] + idx[1]) * t.dims[2] + idx[2];
    t.values[flat] = r.v;
    seen[flat] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw ConfigError("tabulated", "lattice is incomplete");
  }
  return t;
}

inline TabulatedPotential read_tabulated_potential(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("tabulated", "cannot open '" + path + "'");
  return read_tabulated_potential(in);
}

// Potential description shared by both problems. Schrodinger uses
// `scalar` directly as V(r). Dirac assembles
//   V(r) = -e nu(r) I4 + e (alpha1 A1 + alpha2 A2 + alpha3 A3)
// with nu = scalar and A = vector.
struct PotentialSpec {
  ScalarProfile scalar;
  std::array<ScalarProfile, 3> vector;
  double charge = 1.0;
  std::shared_ptr<const TabulatedPotential> tabulated;
  // Sub-samples per axis when averaging V over a lattice cell; 1 = point value.
  int cell_samples = 4;

  bool is_zero() const {
    return scalar.empty() && vector[0].empty() && vector[1].empty() && vector[2].empty() &&
           !tabulated;
  }
  bool has_vector_part() const {
    return !(vector[0].empty() && vector[1].empty() && vector[2].empty());
  }
  bool is_radial_scalar() const { return !tabulated && !has_vector_part() && scalar.is_radial(); }

  double support_radius(double tol) const {
    double r = scalar.support_radius(tol);
    for (const auto& a : vector) r = std::max(r, a.support_radius(tol));
    if (tabulated) r = std::max(r, tabulated->support_radius());
    return r;
  }

  // Scalar multiple of the potential (coupling sweeps).
  PotentialSpec scaled(double factor) const {
    PotentialSpec out = *this;
    out.charge *= factor;
    return out;
  }
};

inline double assemble_scalar_potential(const PotentialSpec& spec, const Vec3& r) {
  double v = spec.charge * spec.scalar(r);
  if (spec.tabulated) v += spec.charge * spec.tabulated->operator()(r)(0, 0).real();
  return v;
}

inline Mat4c assemble_dirac_potential(const PotentialSpec& spec, const Vec3& r) {
  const auto& alg = DiracAlgebra::get();
  Mat4c v = Mat4c::Zero();
  if (!spec.scalar.empty()) v -= spec.charge * spec.scalar(r) * Mat4c::Identity();
  for (int s = 0; s < 3; ++s)
    if (!spec.vector[s].empty()) v += spec.charge * spec.vector[s](r) * alg.alpha[s];
  if (spec.tabulated) {
    const Mat4c t = spec.tabulated->operator()(r);
    v += spec.tabulated->matrix_valued ? Mat4c(spec.charge * t)
                                       : Mat4c(-spec.charge * t(0, 0).real() * Mat4c::Identity());
  }
  return v;
}

// Cell average of an assembled potential over the cube of side h centred
// at `center` (midpoint sub-rule, spec.cell_samples per axis).
template <class Value, class Assemble>
Value cell_average(const PotentialSpec& spec, const Vec3& center, double h, Assemble&& assemble) {
  const int s = std::max(1, spec.cell_samples);
  if (s == 1) return assemble(spec, center);
  Value sum = assemble(spec, center) * 0.0;
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      for (int k = 0; k < s; ++k) {
        const Vec3 off((i + 0.5) / s - 0.5, (j + 0.5) / s - 0.5, (k + 0.5) / s - 0.5);
        sum += assemble(spec, Vec3(center + h * off));
      }
  return Value(sum / double(s * s * s));
}

struct FactorizedPotential {
  Mat4c v1;  // |V|^{1/2}
  Mat4c w1;  // sgn V, eigenvalues in {-1, 0, 1}
};

// V = U D U*, V1 = U |D|^{1/2} U*, W1 = U sgn(D) U*, sgn(0) = 0.
inline FactorizedPotential factorize_potential(const Mat4c& v) {
  Eigen::SelfAdjointEigenSolver<Mat4c> es(v);
  const Eigen::Vector4d d = es.eigenvalues();
  const Mat4c& u = es.eigenvectors();
  const double scale = d.cwiseAbs().maxCoeff();
  Eigen::Vector4d root, sign;
  for (int j = 0; j < 4; ++j) {
    const bool zero = std::abs(d[j]) <= 1e-15 * scale;
    root[j] = zero ? 0.0 : std::sqrt(std::abs(d[j]));
    sign[j] = zero ? 0.0 : (d[j] > 0 ? 1.0 : -1.0);
  }
  FactorizedPotential f;
  f.v1 = u * root.cast<cplx>().asDiagonal() * u.adjoint();
  f.w1 = u * sign.cast<cplx>().asDiagonal() * u.adjoint();
  return f;
}

struct ScalarFactor {
  double v1;  // |V|^{1/2}
  double w;   // sgn V
};

inline ScalarFactor factorize_potential(double v) {
  return {std::sqrt(std::abs(v)), v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0)};
}

}  // namespace rls
