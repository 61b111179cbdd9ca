// Acceptance run: one PASS/FAIL line per criterion. Optional arguments select
// criteria by number; the exit code is 1 if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rls/dirac_transforms.hpp"
#include "rls/oracles.hpp"
#include "rls/partial_waves.hpp"
#include "rls/spectral_scan.hpp"

using namespace rls;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // records a sub-check; the detail line lists every measured value
  void expect(bool ok, const std::string& what) {
    pass = pass && ok;
    if (detail.tellp() > 0) detail << "; ";
    detail << what << (ok ? "" : " [miss]");
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

PotentialSpec term(Family f, double strength, double scale) {
  PotentialSpec s;
  s.scalar.terms.push_back({f, strength, scale, Vec3::Zero()});
  return s;
}

struct SchrodingerRun {
  AngularMesh mesh;
  Eigen::MatrixXcd f;
  SMatrixBlock block;
};

SchrodingerRun schrodinger_run(const SchrodingerScatterer& sc, double lambda, int degree) {
  SchrodingerRun r;
  r.mesh = make_angular_mesh(degree);
  const Eigen::MatrixXcd t = sc.t_matrix(sc.solve(lambda, r.mesh.directions), r.mesh.directions);
  r.f = amplitude_from_t(t);
  r.block = schrodinger_s_matrix(lambda, t, r.mesh);
  return r;
}

SchrodingerScatterer schrodinger(const PotentialSpec& s, double h, double tol = 1e-8) {
  SchrodingerSettings st;
  st.h = h;
  st.support_tol = tol;
  return SchrodingerScatterer(s, st);
}

DiracScatterer dirac(const PotentialSpec& s, double h, double tol = 1e-2) {
  DiracSettings st;
  st.h = h;
  st.support_tol = tol;
  return DiracScatterer(s, 1.0, st);
}

// Gaussian well shared by the Dirac criteria
const DiracScatterer& dirac_well() {
  static const DiracScatterer sc = dirac(term(Family::gaussian, -0.8, 0.7), 0.35);
  return sc;
}

std::vector<double> hs_partial_sums(const Eigen::VectorXcd& mu) {
  std::vector<double> d;
  for (auto m : mu) d.push_back(std::norm(m - 1.0));
  std::sort(d.rbegin(), d.rend());
  std::partial_sum(d.begin(), d.end(), d.begin());
  return d;
}

Outcome algebra() {
  Outcome o;
  const auto& d = DiracAlgebra::get();
  const std::array<Mat4c, 4> all{d.alpha[0], d.alpha[1], d.alpha[2], d.beta};
  double anti = 0.0;
  for (int s = 0; s < 4; ++s)
    for (int t = 0; t < 4; ++t)
      anti = std::max(anti, (all[s] * all[t] + all[t] * all[s] - (s == t ? 2.0 : 0.0) * Mat4c::Identity()).norm());
  o.expect(anti == 0.0, "anticommutators " + fmt(anti));
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uq(-4.0, 4.0), um(0.05, 4.0), ure(-4.0, 4.0), uim(0.05, 3.0);
  double res = 0.0, resolvent = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const MomentumPoint p(Vec3(uq(rng), uq(rng), uq(rng)), um(rng));
    const auto es = dirac_eigensystem(p);
    const Mat4c h = dirac_h0(p);
    for (int n = 0; n < 4; ++n) res = std::max(res, (h * es.z0.col(n) - es.eigenvalues[n] * es.z0.col(n)).norm());
    const cplx mu(ure(rng), (t % 2 ? 1.0 : -1.0) * uim(rng));
    const Mat4c direct = (h - mu * Mat4c::Identity()).inverse();
    resolvent = std::max(resolvent, (resolvent_free(p, mu) - direct).norm() / direct.norm());
  }
  o.expect(res <= 1e-11, "H0 eigen-residual " + fmt(res));
  o.expect(resolvent <= 1e-10, "resolvent identity " + fmt(resolvent));
  return o;
}

Outcome kernel_triangle() {
  Outcome o;
  const double m = 1.0, a = 0.42, box = 20.0;
  const cplx mu(1.5, 0.5);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0), radius(0.8, 2.5);
  std::vector<Vec3> pts;
  while (pts.size() < 10) {
    const Vec3 v(u(rng), u(rng), u(rng));
    if (v.norm() > 0.1 && v.norm() <= 1.0) pts.push_back(radius(rng) * v.normalized());
  }
  auto rel = [](const Mat4c& x, const Mat4c& y) { return (x - y).norm() / y.norm(); };
  double conv_coarse = 0.0, conv_fine = 0.0;
  std::vector<Mat4c> smooth;
  for (const auto& r : pts) {
    const Mat4c closed = kernel_b_plus(r, mu, m);
    conv_coarse = std::max(conv_coarse, rel(oracle::b_plus_by_convolution(r, mu, m, 2), closed));
    conv_fine = std::max(conv_fine, rel(oracle::b_plus_by_convolution(r, mu, m, 40), closed));
    smooth.push_back(oracle::gaussian_smoothed([&](const Vec3& x) { return kernel_b_plus(x, mu, m); }, r, a));
  }
  std::vector<double> fourier;
  for (int n : {48, 64, 96}) {
    const auto ft = oracle::momentum_grid_transform(pts, {n, 2.0 * kPi / box, a}, m, mu,
                                                    [&](double q2) { return q2 + m * m - mu * mu; });
    double worst = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, rel(ft[i], smooth[i]));
    fourier.push_back(worst);
  }
  o.expect(conv_fine <= 1e-2 && conv_fine < conv_coarse,
           "closed vs convolution " + fmt(conv_fine) + " (2 panels " + fmt(conv_coarse) + ")");
  o.expect(fourier[2] <= 1e-2 && fourier[1] < fourier[0] && fourier[2] < fourier[1],
           "closed vs Fourier " + fmt(fourier[0]) + " -> " + fmt(fourier[1]) + " -> " + fmt(fourier[2]));
  return o;
}

Outcome factorization() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  auto op_norm = [](const Mat4c& a) { return Eigen::JacobiSVD<Mat4c>(a).singularValues()[0]; };
  double rec = 0.0, norms = 0.0, w = 0.0;
  for (int t = 0; t < 10000; ++t) {
    Mat4c a;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = cplx(g(rng), g(rng));
    const Mat4c v = 0.5 * (a + a.adjoint());
    const auto f = factorize_potential(v);
    rec = std::max(rec, (f.v1 * f.w1 * f.v1 - v).norm());
    norms = std::max(norms, std::abs(std::pow(op_norm(f.v1), 2) - op_norm(v)));
    // W1 is a Hermitian partial isometry commuting with V1
    w = std::max({w, (f.w1 * f.w1 * f.w1 - f.w1).norm(), (f.w1 - f.w1.adjoint()).norm(),
                  (f.v1 * f.w1 - f.w1 * f.v1).norm()});
  }
  o.expect(rec <= 1e-12, "V1 W1 V1 - V " + fmt(rec));
  o.expect(norms <= 1e-12, "|V1|^2 - |V| " + fmt(norms));
  o.expect(w <= 1e-12, "W1 structure " + fmt(w));
  return o;
}

Outcome born_limit() {
  Outcome o;
  const double lambda = 1.0;
  const Vec3 in = Vec3::UnitZ();
  std::vector<Vec3> outs;
  for (double th : {0.0, 0.5, 1.0, kPi / 2, 2.0, kPi}) outs.push_back(Vec3(std::sin(th), 0.0, std::cos(th)));
  {
    const auto sc = schrodinger(term(Family::yukawa, 0.01, 1.0), 0.2, 1e-5);
    const auto f = amplitude_from_t(sc.t_matrix(sc.solve(lambda, {in}), outs));
    double worst = 0.0;
    for (size_t i = 0; i < outs.size(); ++i) {
      const cplx fb = born_amplitude(sc.spec(), std::sqrt(lambda) * outs[i], std::sqrt(lambda) * in);
      worst = std::max(worst, std::abs(f(i, 0) - fb) / std::abs(fb));
    }
    o.expect(worst <= 0.02, "g = 0.01 deviation " + fmt(worst));
  }
  // distance to the first Born term of the same lattice
  std::vector<double> gs{1e-3, 1e-2, 1e-1}, dev;
  for (double g : gs) {
    const auto sc = schrodinger(term(Family::yukawa, g, 1.0), 0.3, 1e-4);
    const auto f = amplitude_from_t(sc.t_matrix(sc.solve(lambda, {in}), outs));
    double d = 0.0;
    for (size_t i = 0; i < outs.size(); ++i) d = std::max(d, std::abs(f(i, 0) - sc.discrete_born(lambda, outs[i], in)));
    dev.push_back(d);
  }
  const double slope = std::log(dev[2] / dev[0]) / std::log(gs[2] / gs[0]);
  o.expect(std::abs(slope - 2.0) <= 0.3, "log-log slope " + fmt(slope));
  return o;
}

// Nearest eigenvalues to e^{2 i delta_l}, 2l+1 per l, claimed from l = 0 up.
std::vector<cplx> cluster_means(const Eigen::VectorXcd& mu, const std::vector<double>& delta, int l_top) {
  std::vector<bool> used(mu.size(), false);
  std::vector<cplx> means;
  for (int l = 0; l <= l_top; ++l) {
    const cplx target = std::exp(2.0 * kI * delta[l]);
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < mu.size(); ++j)
      if (!used[j]) idx.push_back(j);
    std::sort(idx.begin(), idx.end(),
              [&](Eigen::Index a, Eigen::Index b) { return std::abs(mu[a] - target) < std::abs(mu[b] - target); });
    cplx mean = 0.0;
    for (int c = 0; c <= 2 * l; ++c) {
      used[idx[c]] = true;
      mean += mu[idx[c]];
    }
    means.push_back(mean / double(2 * l + 1));
  }
  return means;
}

Outcome partial_wave_check() {
  Outcome o;
  for (double depth : {2.0, 4.0}) {
    const auto spec = term(Family::square_well, depth, 1.0);
    const auto run = schrodinger_run(schrodinger(spec, 0.15), 1.0, 17);
    const auto pw = partial_waves(radial_problem(spec), 1.0, 12);
    double fmax = 0.0, err = 0.0;
    for (size_t i = 0; i < run.mesh.size(); ++i)
      for (size_t j = 0; j < run.mesh.size(); j += 3) {
        const cplx ref = pw.amplitude(run.mesh.directions[i].dot(run.mesh.directions[j]));
        fmax = std::max(fmax, std::abs(ref));
        err = std::max(err, std::abs(std::abs(run.f(i, j)) - std::abs(ref)));
      }
    const std::string tag = depth < kPi * kPi / 4 ? "subcritical" : "supercritical";
    o.expect(err / fmax <= 0.05, tag + " |f| error " + fmt(err / fmax));
    const auto means = cluster_means(run.block.mu, pw.delta, 3);
    double worst = 0.0;
    for (int l = 0; l <= 3; ++l) worst = std::max(worst, std::abs(means[l] - std::exp(2.0 * kI * pw.delta[l])));
    o.expect(worst <= 0.03, tag + " cluster means (l <= 3) " + fmt(worst));
  }
  return o;
}

Outcome ergodic_identity() {
  Outcome o;
  const std::vector<std::pair<std::string, SchrodingerScatterer>> cases{
      {"gaussian", schrodinger(term(Family::gaussian, -6.0, 0.7), 0.25, 1e-3)},
      {"square well", schrodinger(term(Family::square_well, 4.0, 1.0), 0.2)}};
  for (const auto& [name, sc] : cases)
    for (double lambda : {0.5, 1.0}) {
      const auto run = schrodinger_run(sc, lambda, 17);
      const double sd = cross_section_direct(run.f, run.mesh);
      const double rel = std::abs(sd - cross_section_ergodic(run.block.mu, lambda)) / sd;
      o.expect(sd > 0.0 && rel <= 0.01, name + " at " + fmt(lambda) + ": " + fmt(rel));
    }
  return o;
}

Outcome unitarity_refinement() {
  Outcome o;
  auto monotone = [](const std::vector<double>& d) { return d[1] < d[0] && d[2] < d[1]; };
  std::vector<double> s;
  for (auto [h, degree] : std::vector<std::pair<double, int>>{{0.3, 9}, {0.2, 13}, {0.15, 17}})
    s.push_back(schrodinger_run(schrodinger(term(Family::square_well, 4.0, 1.0), h), 1.0, degree).block.unitarity_defect);
  o.expect(monotone(s), "Schrodinger " + fmt(s[0]) + " -> " + fmt(s[1]) + " -> " + fmt(s[2]));
  for (double lambda : {1.5, -1.5}) {
    std::vector<double> d;
    for (auto [h, degree] : std::vector<std::pair<double, int>>{{0.45, 5}, {0.35, 9}, {0.28, 13}})
      d.push_back(dirac_s_matrix(dirac_on_shell(dirac(term(Family::gaussian, -0.8, 0.7), h), lambda,
                                                make_angular_mesh(degree)))
                      .unitarity_defect);
    o.expect(monotone(d), "Dirac " + fmt(lambda) + ": " + fmt(d[0]) + " -> " + fmt(d[1]) + " -> " + fmt(d[2]));
  }
  return o;
}

Outcome bound_states() {
  Outcome o;
  for (double depth : {4.0, 6.0}) {
    const auto p = radial_problem(term(Family::square_well, depth, 1.0));
    const double shooting = radial_bound_states(p, 0, -depth).energies.at(0);
    const auto found = radial_level_search(p, 0, -depth);
    const double rel = found.extrapolated.empty() ? 1.0 : std::abs(found.extrapolated[0] - shooting) / std::abs(shooting);
    o.expect(rel <= 1e-3, "depth " + fmt(depth) + " ground level " + fmt(found.extrapolated.empty() ? 0.0 : found.extrapolated[0]) +
                              " vs " + fmt(shooting) + " (rel " + fmt(rel) + ")");
  }
  const auto sub = radial_level_search(radial_problem(term(Family::square_well, 2.0, 1.0)), 0, -2.0);
  o.expect(sub.fine.empty(), "subcritical roots " + std::to_string(sub.fine.size()));
  return o;
}

Outcome far_field() {
  Outcome o;
  const auto mesh = make_angular_mesh(5);
  for (double lambda : {1.5, -1.5}) {
    const auto sol = dirac_well().solve(lambda, {Vec3(0, 0, 1)}, {lambda > 0 ? 3 : 1});
    const double k = sol.kappa;
    const auto rep = far_field_check(dirac_well(), sol, 0, {10 / k, 20 / k, 40 / k}, mesh.directions);
    const bool dec = rep.residual[1] < rep.residual[0] && rep.residual[2] < rep.residual[1];
    o.expect(dec, fmt(lambda) + " residual " + fmt(rep.residual[0]) + " -> " + fmt(rep.residual[1]) + " -> " +
                      fmt(rep.residual[2]));
    o.expect(rep.extraction_error[2] <= 0.05, fmt(lambda) + " extraction " + fmt(rep.extraction_error[2]));
  }
  return o;
}

Outcome gamma_consistency_check() {
  Outcome o;
  const auto spec = term(Family::gaussian, -0.1, 0.7);
  for (double lambda : {1.5, -1.5}) {
    std::vector<double> c;
    double corr = 1.0;
    for (double h : {0.45, 0.35, 0.28}) {
      const auto d = dirac_on_shell(dirac(spec, h), lambda, make_angular_mesh(5));
      const auto g = gamma_consistency(d.f, d.big_t, lambda);
      c.push_back(g.c_real);
      corr = std::min(corr, g.correlation);
    }
    o.expect(corr >= 0.999, fmt(lambda) + " correlation " + fmt(corr));
    o.detail << "; fitted c " << fmt(c[0]) << " -> " << fmt(c[1]) << " -> " << fmt(c[2]) << " beside -gamma "
             << fmt(-kGammaReference);
  }
  return o;
}

Outcome lorentzian_limit() {
  Outcome o;
  for (double k : {0.4, 1.3, 5.0}) {
    std::vector<double> err;
    for (double delta : {1e-2, 1e-3, 1e-4}) err.push_back(std::abs(lorentzian_shell_integral(k, 1.0, delta) - lorentzian_shell_limit(k, 1.0)));
    const double limit = lorentzian_shell_limit(k, 1.0);
    const bool first_order = err[1] / err[0] <= 0.13 && err[2] / err[1] <= 0.13;
    o.expect(first_order && err[2] <= 1e-3 * limit, "k = " + fmt(k) + " errors " + fmt(err[0]) + ", " + fmt(err[1]) +
                                                         ", " + fmt(err[2]));
  }
  return o;
}

Outcome hilbert_schmidt() {
  Outcome o;
  const auto sc = schrodinger(term(Family::square_well, 4.0, 1.0), 0.2);
  const auto a = hs_partial_sums(schrodinger_run(sc, 1.0, 17).block.mu);
  const auto b = hs_partial_sums(schrodinger_run(sc, 1.0, 25).block.mu);
  double worst = 0.0;
  for (size_t n = 0; n < a.size(); ++n) worst = std::max(worst, std::abs(a[n] - b[n]));
  o.expect(worst <= 1e-6, "Schrodinger partial sums " + fmt(worst));
  for (double lambda : {1.5, -1.5}) {
    std::vector<std::vector<double>> sums;
    for (int degree : {13, 17}) {
      const auto d = dirac_on_shell(dirac_well(), lambda, make_angular_mesh(degree));
      sums.push_back(hs_partial_sums(dirac_s_matrix(d).mu));
    }
    double w = 0.0;
    for (size_t n = 0; n < sums[0].size(); ++n) w = std::max(w, std::abs(sums[0][n] - sums[1][n]));
    o.expect(w <= 1e-6, std::string(lambda > 0 ? "S2" : "S1") + " partial sums " + fmt(w));
  }
  return o;
}

Outcome free_parseval() {
  Outcome o;
  const int n = 32;
  const double h = 0.25, dk = 2 * kPi / (n * h);
  const Vec3 k0(2 * dk, 0, 0);
  const std::vector<std::function<Vec4c(const Vec3&)>> packets{
      [&](const Vec3& r) { return Vec4c(free_spinor(k0, 1.0, 3) * std::exp(kI * k0.dot(r) - r.squaredNorm() / 2.0)); },
      [&](const Vec3& r) {
        return Vec4c(Vec4c(1.0, 0.5 * kI, -0.3, 0.2) * std::exp(kI * 1.1 * r[1] - (r - Vec3(0.5, 0, 0)).squaredNorm() / 1.5));
      },
      [&](const Vec3& r) {
        const double w = std::max(0.0, 1.0 - r.norm() / 3.0);
        return Vec4c(Vec4c(0.0, 1.0, kI, -1.0) * w * w * std::exp(-kI * 0.7 * (r[0] + r[2])));
      }};
  for (size_t p = 0; p < packets.size(); ++p) {
    const auto f = sample_box(n, h, packets[p]);
    const double rel = std::abs(free_eigen_transform(f, 1.0).squared_norm() - f.squared_norm()) / f.squared_norm();
    o.expect(rel <= 1e-3, "packet " + std::to_string(p + 1) + " " + fmt(rel));
  }
  return o;
}

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  const std::vector<Criterion> all{
      {1, "algebra suite", 5, algebra},
      {2, "kernel oracle triangle", 120, kernel_triangle},
      {3, "factorization suite", 5, factorization},
      {4, "Schrodinger Born limit", 120, born_limit},
      {5, "partial-wave cross-check", 300, partial_wave_check},
      {6, "ergodic identity", 300, ergodic_identity},
      {7, "unitarity refinement", 600, unitarity_refinement},
      {8, "bound states", 120, bound_states},
      {9, "Dirac far field", 300, far_field},
      {10, "gamma consistency", 300, gamma_consistency_check},
      {11, "Lorentzian limit quadrature", 1, lorentzian_limit},
      {12, "Hilbert-Schmidt tails", 120, hilbert_schmidt},
      {13, "free Parseval", 60, free_parseval}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.expect(secs <= c.budget_seconds, "runtime " + fmt(secs) + " s of " + fmt(c.budget_seconds) + " s");
    failures += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.str().c_str());
  }
  return failures == 0 ? 0 : 1;
}
