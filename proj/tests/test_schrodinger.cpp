#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "rls/oracles.hpp"
#include "rls/partial_waves.hpp"
#include "rls/schrodinger.hpp"

using namespace rls;

namespace {

PotentialSpec square_well(double depth, double radius = 1.0) {
  PotentialSpec s;
  s.scalar.terms.push_back({Family::square_well, depth, radius, Vec3::Zero()});
  return s;
}

PotentialSpec yukawa(double g, double mu0 = 1.0) {
  PotentialSpec s;
  s.scalar.terms.push_back({Family::yukawa, g, mu0, Vec3::Zero()});
  return s;
}

struct MeshRun {
  AngularMesh mesh;
  Eigen::MatrixXcd t, f;
  SMatrixBlock block;
};

MeshRun run_on_mesh(const SchrodingerScatterer& sc, double lambda, int degree) {
  MeshRun r;
  r.mesh = make_angular_mesh(degree);
  const auto sol = sc.solve(lambda, r.mesh.directions);
  r.t = sc.t_matrix(sol, r.mesh.directions);
  r.f = amplitude_from_t(r.t);
  r.block = schrodinger_s_matrix(lambda, r.t, r.mesh);
  return r;
}

// Depth-4 unit well at lambda = 1 on the default lattice and mesh, shared
// by the partial-wave, ergodic and expansion tests.
const MeshRun& square_well_run() {
  static const MeshRun run = [] {
    SchrodingerScatterer sc(square_well(4.0));
    return run_on_mesh(sc, 1.0, 17);
  }();
  return run;
}

// Eigenvalues nearest to e^{2 i delta_l}, 2l+1 per l, claimed greedily from l = 0.
std::vector<std::vector<Eigen::Index>> assign_clusters(const Eigen::VectorXcd& mu, const std::vector<double>& delta,
                                                       int l_top) {
  std::vector<bool> used(mu.size(), false);
  std::vector<std::vector<Eigen::Index>> out;
  for (int l = 0; l <= l_top; ++l) {
    const cplx target = std::exp(2.0 * kI * delta[l]);
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < mu.size(); ++j)
      if (!used[j]) idx.push_back(j);
    std::sort(idx.begin(), idx.end(),
              [&](Eigen::Index a, Eigen::Index b) { return std::abs(mu[a] - target) < std::abs(mu[b] - target); });
    idx.resize(2 * l + 1);
    for (auto j : idx) used[j] = true;
    out.push_back(idx);
  }
  return out;
}

}  // namespace

TEST_CASE("zero potential has empty support and trivial scattering", "[schrodinger]") {
  SchrodingerScatterer sc(PotentialSpec{});
  CHECK(sc.grid().size() == 0);
  CHECK(sc.system(1.0).size() == 0);
  const auto mesh = make_angular_mesh(5);
  const auto sol = sc.solve(1.0, mesh.directions);
  const auto t = sc.t_matrix(sol, mesh.directions);
  CHECK(t.norm() == 0.0);
  const auto b = schrodinger_s_matrix(1.0, t, mesh);
  CHECK((b.s - Eigen::MatrixXcd::Identity(b.size(), b.size())).norm() == 0.0);
  for (auto m : b.mu) CHECK(m == cplx(1.0));
  CHECK(cross_section_direct(amplitude_from_t(t), mesh) == 0.0);
  CHECK(cross_section_ergodic(b.mu, 1.0) == 0.0);
  const Vec3 r(0.3, -1.2, 2.0);
  CHECK(std::abs(sc.phi(sol, 0, r) - std::exp(kI * mesh.directions[0].dot(r))) < 1e-15);
  CHECK(born_amplitude(PotentialSpec{}, Vec3::UnitX(), Vec3::UnitZ()) == cplx(0.0));
}

TEST_CASE("single-node K is minus the depth times the cube integral", "[schrodinger]") {
  const double h = 0.15, c = 2.5;
  PotentialSpec s;
  s.cell_samples = 1;
  s.scalar.terms.push_back({Family::square_well, c, 0.05, SupportGrid::position({0, 0, 0}, h)});
  SchrodingerSettings st;
  st.h = h;
  SchrodingerScatterer sc(s, st);
  REQUIRE(sc.grid().size() == 1);
  const auto k = sc.system(0.0).k_matrix();
  const cplx cell = oracle::cube_integral_recursive([](const Vec3& r) { return cplx(1.0 / (4.0 * kPi * r.norm())); }, h);
  CHECK(std::abs(k(0, 0) - (-c) * cell) < 1e-9 * std::abs(cell) * c);
  // C0 h^2 scaling
  const cplx cell2 = oracle::cube_integral_recursive([](const Vec3& r) { return cplx(1.0 / (4.0 * kPi * r.norm())); }, 2 * h);
  CHECK(std::abs(cell2 / cell - 4.0) < 1e-9);
}

TEST_CASE("K is symmetric under swapping mirror nodes of an even potential", "[schrodinger]") {
  PotentialSpec s;
  s.cell_samples = 1;
  const double h = 0.3;
  for (double x : {-1.0, 1.0}) s.scalar.terms.push_back({Family::square_well, 1.5, 0.1, Vec3(x * 0.5 * h, 0.5 * h, 0.5 * h)});
  SchrodingerSettings st;
  st.h = h;
  SchrodingerScatterer sc(s, st);
  REQUIRE(sc.grid().size() == 2);
  const auto k = sc.system(1.0).k_matrix();
  CHECK(std::abs(k(0, 1) - k(1, 0)) < 1e-15);
  CHECK(std::abs(k(0, 0) - k(1, 1)) < 1e-15);
}

TEST_CASE("weak Yukawa is Born dominated", "[schrodinger][born]") {
  const double g = 0.01, lambda = 1.0;
  SchrodingerSettings st;
  st.h = 0.2;
  st.support_tol = 1e-5;
  SchrodingerScatterer sc(yukawa(g), st);
  const Vec3 in = Vec3::UnitZ();
  const auto sol = sc.solve(lambda, {in});

  Eigen::VectorXcd free(sc.grid().size());
  for (size_t i = 0; i < sc.grid().size(); ++i)
    free[i] = std::exp(kI * in.dot(sc.grid().nodes[i])) * std::sqrt(std::abs(sc.potential()[i]));
  CHECK((sol.psi.col(0) - free).norm() / free.norm() <= 0.02);

  std::vector<Vec3> outs;
  for (double th : {0.0, 0.5, 1.0, kPi / 2, 2.0, kPi}) outs.push_back(Vec3(std::sin(th), 0.0, std::cos(th)));
  const auto f = amplitude_from_t(sc.t_matrix(sol, outs));
  for (size_t i = 0; i < outs.size(); ++i) {
    const cplx fb = born_amplitude(sc.spec(), std::sqrt(lambda) * outs[i], std::sqrt(lambda) * in);
    CHECK(std::abs(f(i, 0) - fb) / std::abs(fb) <= 0.02);
  }
  CHECK(std::abs(f(0, 0) - cplx(-0.01)) <= 0.02 * 0.01);
}

TEST_CASE("distance to the first Born term is quadratic in the coupling", "[schrodinger][born]") {
  const double lambda = 1.0;
  SchrodingerSettings st;
  st.h = 0.3;
  st.support_tol = 1e-4;
  const Vec3 in = Vec3::UnitZ();
  const std::vector<Vec3> outs{Vec3::UnitZ(), Vec3::UnitX(), -Vec3::UnitZ()};
  std::vector<double> gs{1e-3, 1e-2, 1e-1}, dev;
  for (double g : gs) {
    SchrodingerScatterer sc(yukawa(g), st);
    const auto f = amplitude_from_t(sc.t_matrix(sc.solve(lambda, {in}), outs));
    double d = 0.0;
    for (size_t i = 0; i < outs.size(); ++i) d = std::max(d, std::abs(f(i, 0) - sc.discrete_born(lambda, outs[i], in)));
    dev.push_back(d);
  }
  const double slope = std::log(dev[2] / dev[0]) / std::log(gs[2] / gs[0]);
  CHECK(std::abs(slope - 2.0) <= 0.3);
}

TEST_CASE("analytic Born amplitudes", "[schrodinger][born]") {
  const Vec3 k(0, 0, 1.3), kp(0.8, 0.0, 0.5);
  const double q = (k - kp).norm();
  CHECK(std::abs(born_amplitude(yukawa(0.7, 1.5), k, kp) - cplx(-0.7 / (2.25 + q * q))) < 1e-15);
  // Gaussian: -(1/4 pi) int V e^{-iq.s} ds = -int V(r) sin(qr)/(qr) r^2 dr
  PotentialSpec gs;
  gs.scalar.terms.push_back({Family::gaussian, -2.0, 0.8, Vec3::Zero()});
  const cplx radial = -oracle::composite_gl(
      [&](double r) { return -2.0 * std::exp(-r * r / 0.64) * std::sin(q * r) / (q * r) * r * r; }, 0.0, 8.0, 40, 12);
  CHECK(std::abs(born_amplitude(gs, k, kp) - radial) < 1e-12);
  // square well matches the same radial transform, and a shifted centre adds a phase
  const cplx sw = -oracle::composite_gl(
      [&](double r) { return -3.0 * std::sin(q * r) / (q * r) * r * r; }, 0.0, 1.2, 20, 12);
  CHECK(std::abs(born_amplitude(square_well(3.0, 1.2), k, kp) - sw) < 1e-12);
  PotentialSpec shifted = square_well(3.0, 1.2);
  const Vec3 c(0.2, -0.1, 0.4);
  shifted.scalar.terms[0].center = c;
  CHECK(std::abs(born_amplitude(shifted, k, kp) - sw * std::exp(-kI * (k - kp).dot(c))) < 1e-12);
}

TEST_CASE("Born Yukawa cross section reduces to a closed form", "[schrodinger][born]") {
  const double g = 0.05, mu0 = 1.0, lambda = 1.0;
  const auto mesh = make_angular_mesh(41);
  Eigen::MatrixXcd f(mesh.size(), mesh.size());
  for (size_t i = 0; i < mesh.size(); ++i)
    for (size_t j = 0; j < mesh.size(); ++j) f(i, j) = born_amplitude(yukawa(g, mu0), mesh.directions[i], mesh.directions[j]);
  const double closed = 16.0 * kPi * kPi * g * g / (mu0 * mu0 * (mu0 * mu0 + 4.0 * lambda));
  CHECK(std::abs(cross_section_direct(f, mesh) - closed) / closed < 1e-6);
}

TEST_CASE("square well amplitude agrees with partial waves", "[schrodinger][partial-waves]") {
  for (double depth : {2.0, 4.0}) {
    const MeshRun fresh = depth == 4.0 ? MeshRun{} : run_on_mesh(SchrodingerScatterer(square_well(depth)), 1.0, 17);
    const MeshRun& run = depth == 4.0 ? square_well_run() : fresh;
    const auto pw = partial_waves(radial_problem(square_well(depth)), 1.0, 12);
    double fmax = 0.0, err = 0.0;
    for (size_t i = 0; i < run.mesh.size(); i += 7)
      for (size_t j = 0; j < run.mesh.size(); j += 5) {
        const cplx ref = pw.amplitude(run.mesh.directions[i].dot(run.mesh.directions[j]));
        fmax = std::max(fmax, std::abs(ref));
        err = std::max(err, std::abs(std::abs(run.f(i, j)) - std::abs(ref)));
      }
    CHECK(err / fmax <= 0.05);

    const double sd = cross_section_direct(run.f, run.mesh);
    CHECK(std::abs(sd - 4.0 * kPi * pw.sigma()) / sd <= 0.05);
    CHECK(std::abs(sd - cross_section_ergodic(run.block.mu, 1.0)) / sd <= 0.01);

    const auto clusters = assign_clusters(run.block.mu, pw.delta, 3);
    for (int l = 0; l <= 3; ++l) {
      cplx mean = 0.0;
      for (auto j : clusters[l]) mean += run.block.mu[j];
      mean /= double(2 * l + 1);
      CHECK(std::abs(mean - std::exp(2.0 * kI * pw.delta[l])) <= 0.03);
    }
  }
}

TEST_CASE("square well S eigenvectors are spherical harmonics", "[schrodinger][ergodic]") {
  const MeshRun& run = square_well_run();
  const auto pw = partial_waves(radial_problem(square_well(4.0)), 1.0, 12);
  const auto clusters = assign_clusters(run.block.mu, pw.delta, 3);
  const Eigen::Index n = run.block.size();
  for (int l = 0; l <= 3; ++l) {
    Eigen::MatrixXcd basis(n, 2 * l + 1);
    for (int c = 0; c <= 2 * l; ++c) basis.col(c) = run.block.schur_basis.col(clusters[l][c]);
    // the Schur basis of a nearly normal S is orthonormal; align within the cluster by projection
    for (int m = -l; m <= l; ++m) {
      Eigen::VectorXcd y(n);
      for (Eigen::Index i = 0; i < n; ++i)
        y[i] = std::sqrt(run.mesh.weights[i]) * real_spherical_harmonic(l, m, run.mesh.directions[i]);
      CHECK((basis.adjoint() * y).norm() / y.norm() >= 0.99);
    }
  }
}

TEST_CASE("ergodic expansion reconstructs the amplitude", "[schrodinger][ergodic]") {
  const MeshRun& run = square_well_run();
  const auto e = ergodic_expansion(run.f, run.block, 1.0, run.mesh);
  for (size_t i = 1; i < e.residual.size(); ++i) CHECK(e.residual[i] <= e.residual[i - 1] * (1.0 + 1e-12) + 1e-14);
  const double fnorm = std::sqrt(cross_section_direct(run.f, run.mesh));
  CHECK(e.residual.back() <= 1e-6 * fnorm);
  // the expansion of a zero amplitude is zero
  const MeshRun zero = run_on_mesh(SchrodingerScatterer(PotentialSpec{}), 1.0, 5);
  const auto ez = ergodic_expansion(zero.f, zero.block, 1.0, zero.mesh);
  CHECK(ez.a.norm() == 0.0);
}

TEST_CASE("ergodic identity for a Gaussian at two energies", "[schrodinger][ergodic]") {
  PotentialSpec s;
  s.scalar.terms.push_back({Family::gaussian, -6.0, 0.7, Vec3::Zero()});
  SchrodingerSettings st;
  st.h = 0.25;
  st.support_tol = 1e-3;
  SchrodingerScatterer sc(s, st);
  for (double lambda : {0.5, 1.0}) {
    const auto run = run_on_mesh(sc, lambda, 17);
    const double sd = cross_section_direct(run.f, run.mesh);
    CHECK(sd > 0.0);
    CHECK(std::abs(sd - cross_section_ergodic(run.block.mu, lambda)) / sd <= 0.01);
    CHECK(run.block.unitarity_defect < 1e-2);
  }
}

TEST_CASE("low-energy cross section is s-wave dominated", "[schrodinger][partial-waves]") {
  const double lambda = 0.04;
  SchrodingerSettings st;
  st.h = 0.2;
  const auto run = run_on_mesh(SchrodingerScatterer(square_well(1.0), st), lambda, 9);
  const auto pw = partial_waves(radial_problem(square_well(1.0)), lambda, 4);
  const double swave = 4.0 * kPi * kPi / lambda * 4.0 * std::pow(std::sin(pw.delta[0]), 2);
  CHECK(std::abs(cross_section_ergodic(run.block.mu, lambda) - swave) / swave <= 0.05);
}

TEST_CASE("unitarity defect decreases under refinement", "[schrodinger][unitarity]") {
  std::vector<double> defect;
  for (auto [h, degree] : std::vector<std::pair<double, int>>{{0.3, 9}, {0.2, 13}, {0.15, 17}}) {
    SchrodingerSettings st;
    st.h = h;
    defect.push_back(run_on_mesh(SchrodingerScatterer(square_well(4.0), st), 1.0, degree).block.unitarity_defect);
  }
  CHECK(defect[1] < defect[0]);
  CHECK(defect[2] < defect[1]);
  CHECK(defect[2] < 1e-3);
}

TEST_CASE("S - I tail sums are stable under mesh refinement", "[schrodinger][hilbert-schmidt]") {
  SchrodingerSettings st;
  st.h = 0.2;
  SchrodingerScatterer sc(square_well(4.0), st);
  auto sums = [&](int degree) {
    const auto b = run_on_mesh(sc, 1.0, degree).block;
    std::vector<double> d;
    for (auto m : b.mu) d.push_back(std::norm(m - 1.0));
    std::sort(d.rbegin(), d.rend());
    std::partial_sum(d.begin(), d.end(), d.begin());
    return d;
  };
  const auto a = sums(17), b = sums(25);
  for (size_t n = 1; n <= a.size(); ++n) CHECK(std::abs(a[n - 1] - b[n - 1]) <= 1e-6);
  CHECK(b.back() - b[80] <= 1e-6);
}

TEST_CASE("reciprocity and rotation equivariance", "[schrodinger][symmetry]") {
  PotentialSpec s;
  s.scalar.terms.push_back({Family::gaussian, -2.0, 0.6, Vec3(0.4, 0.1, -0.2)});
  s.scalar.terms.push_back({Family::gaussian, -1.0, 0.5, Vec3(-0.5, 0.3, 0.3)});
  SchrodingerSettings st;
  st.h = 0.3;
  st.support_tol = 1e-3;
  SchrodingerScatterer sc(s, st);
  const auto run = run_on_mesh(sc, 1.0, 9);
  const auto& dirs = run.mesh.directions;
  auto opposite = [&](size_t i) {
    for (size_t j = 0; j < dirs.size(); ++j)
      if ((dirs[j] + dirs[i]).norm() < 1e-12) return j;
    FAIL("mesh is not closed under inversion");
    return size_t(0);
  };
  const double tmax = run.t.cwiseAbs().maxCoeff();
  double recip = 0.0;
  for (size_t i = 0; i < dirs.size(); ++i)
    for (size_t j = 0; j < dirs.size(); ++j) recip = std::max(recip, std::abs(run.t(i, j) - run.t(opposite(j), opposite(i))));
  CHECK(recip <= 1e-3 * tmax);

  // a quarter turn about z maps the lattice onto itself; a generic turn does not
  auto rotated_error = [&](const Eigen::Matrix3d& rot) {
    PotentialSpec r = s;
    for (auto& t : r.scalar.terms) t.center = rot * t.center;
    SchrodingerScatterer sr(r, st);
    const std::vector<Vec3> in{dirs[3], dirs[40]}, out{dirs[7], dirs[20], dirs[61]};
    std::vector<Vec3> rin, rout;
    for (auto& d : in) rin.push_back(rot * d);
    for (auto& d : out) rout.push_back(rot * d);
    const auto f0 = sc.t_matrix(sc.solve(1.0, in), out);
    const auto f1 = sr.t_matrix(sr.solve(1.0, rin), rout);
    return (f1 - f0).cwiseAbs().maxCoeff() / f0.cwiseAbs().maxCoeff();
  };
  CHECK(rotated_error(Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ()).toRotationMatrix()) <= 1e-10);
  CHECK(rotated_error(Eigen::AngleAxisd(0.7, Vec3(1, 2, 2).normalized()).toRotationMatrix()) <= 2e-2);
}

TEST_CASE("ExceptionalValue is raised below the singular-value threshold", "[schrodinger]") {
  SchrodingerSettings st;
  st.h = 0.3;
  st.solver.exceptional_threshold = 0.99;
  SchrodingerScatterer sc(square_well(4.0), st);
  CHECK_THROWS_AS(sc.solve(1.0, {Vec3::UnitZ()}), ExceptionalValue);
  st.solver.exceptional_threshold = 1e-6;
  SchrodingerScatterer ok(square_well(4.0), st);
  CHECK_NOTHROW(ok.solve(1.0, {Vec3::UnitZ()}));
}

TEST_CASE("partial-wave oracle limits", "[partial-waves]") {
  const auto p0 = partial_waves(radial_problem(square_well(0.0)), 1.0, 4);
  for (double d : p0.delta) CHECK(std::abs(d) < 1e-9);
  // steep barrier: delta_0 -> -k R
  const double lambda = 0.25;
  const auto hard = partial_waves(radial_problem(square_well(-400.0)), lambda, 0, 1e-4);
  CHECK(std::abs(hard.delta[0] + std::sqrt(lambda) * 1.0) <= 0.06);
  // weak potential: Born phases
  const auto weak = radial_problem(square_well(0.02));
  const auto pw = partial_waves(weak, 1.0, 3);
  for (int l = 0; l <= 3; ++l) CHECK(std::abs(pw.delta[l] - born_phase(weak, 1.0, l)) <= 0.05 * std::abs(born_phase(weak, 1.0, l)));
  PotentialSpec off = square_well(1.0);
  off.scalar.terms[0].center = Vec3(0.1, 0, 0);
  CHECK_THROWS_AS(radial_problem(off), NonRadialPotential);
}
