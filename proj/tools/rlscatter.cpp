#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include <CLI11.hpp>
#include <fftw3.h>

#include "bundle.hpp"
#include "rls/dirac_transforms.hpp"
#include "rls/oracles.hpp"
#include "rls/partial_waves.hpp"
#include "rls/spectral_scan.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace rls;
using namespace rls::cli;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitConfig = 2, kExitNumerical = 3, kExitOracle = 4;

bool g_verbose = false;
std::mutex g_log_mutex;

void log(const std::string& msg) {
  if (!g_verbose) return;
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[rlscatter] " << msg << "\n";
}

// Runs body(i) for i in [0, n) on `threads` workers; results are stored by
// index so the output order never depends on scheduling.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(threads, int(n)); ++t)
    pool.emplace_back([&] {
      try {
        for (size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!first) first = std::current_exception();
        next = n;
      }
    });
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

struct Run {
  RunConfig config;
  fs::path out;
  int threads = 1;
  nlohmann::json summary;
  std::vector<std::pair<std::string, Table>> tables;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void add_table(const std::string& name, Table t) { tables.emplace_back(name, std::move(t)); }

  void finish(const std::string& command) {
    fs::create_directories(out);
    summary["command"] = command;
    summary["schema_version"] = kSchemaVersion;
    summary["config"] = config.source;
    std::vector<std::string> names;
    for (const auto& [name, t] : tables) {
      write_table(out / name, t);
      names.push_back(name);
    }
    summary["tables"] = names;
    write_json(out / "summary.json", summary);
    nlohmann::json meta;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    meta["timestamp"] = stamp;
    meta["rlscatter_version"] = kVersion;
    meta["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION);
    meta["fftw_version"] = std::string(fftw_version);
    meta["compiler"] = __VERSION__;
    meta["threads"] = threads;
    meta["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(out / "metadata.json", meta);
  }
};

SchrodingerScatterer make_schrodinger(const RunConfig& c) {
  SchrodingerSettings s;
  s.h = c.h;
  s.support_tol = c.support_tol;
  s.solver = c.solver;
  return SchrodingerScatterer(c.potential, s);
}

DiracScatterer make_dirac(const RunConfig& c) {
  DiracSettings s;
  s.h = c.h;
  s.support_tol = c.support_tol;
  s.solver = c.solver;
  return DiracScatterer(c.potential, c.mass, s);
}

bool analytic_scalar(const PotentialSpec& p) { return !p.is_zero() && !p.tabulated && !p.has_vector_part(); }

Table directions_table(const AngularMesh& mesh) {
  Table t{"unit directions w_i and quadrature weights of the angular mesh (sum of weights = 4 pi)",
          {"index", "x", "y", "z", "weight"}, {}};
  for (size_t i = 0; i < mesh.size(); ++i)
    t.add({double(i), mesh.directions[i][0], mesh.directions[i][1], mesh.directions[i][2], mesh.weights[i]});
  return t;
}

Table eigen_table(const SMatrixBlock& b) {
  Table t{"eigenvalues mu_j of the on-shell S block (Schur order)", {"j", "re_mu", "im_mu", "abs_mu_minus_1_sq"}, {}};
  for (Eigen::Index j = 0; j < b.size(); ++j) t.add({double(j), b.mu[j].real(), b.mu[j].imag(), std::norm(b.mu[j] - 1.0)});
  return t;
}

struct EnergyRecord {
  nlohmann::json summary;
  std::vector<std::pair<std::string, Table>> tables;
  bool failed = false;
};

std::string energy_tag(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return buf;
}

EnergyRecord solve_schrodinger(const SchrodingerScatterer& sc, const RunConfig& c, const AngularMesh& mesh,
                               double lambda, size_t idx) {
  EnergyRecord r;
  const auto sol = sc.solve(lambda, mesh.directions);
  const Eigen::MatrixXcd t = sc.t_matrix(sol, mesh.directions);
  const Eigen::MatrixXcd f = amplitude_from_t(t);
  const auto b = schrodinger_s_matrix(lambda, t, mesh);
  const double sd = cross_section_direct(f, mesh), se = cross_section_ergodic(b.mu, lambda);
  Table amp{"scattering amplitude f(w_out, w_in) in length units; directions by index into directions.csv",
            {"i_out", "j_in", "re_f", "im_f"}, {}};
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j) amp.add({double(i), double(j), f(i, j).real(), f(i, j).imag()});
  r.tables.emplace_back("amplitudes_" + energy_tag(idx) + ".csv", std::move(amp));
  r.tables.emplace_back("s_eigenvalues_" + energy_tag(idx) + ".csv", eigen_table(b));
  auto& s = r.summary;
  s["sigma_direct"] = sd;
  s["sigma_ergodic"] = se;
  s["sigma_trace"] = sd;
  s["ergodic_relative_difference"] = sd > 0 ? std::abs(sd - se) / sd : 0.0;
  s["unitarity_defect"] = b.unitarity_defect;
  s["hs_sum"] = (b.mu.array() - 1.0).abs2().sum();
  if (sol.krylov) s["krylov_iterations"] = sol.krylov->iterations;
  if (c.oracles.born && analytic_scalar(c.potential)) {
    double err = 0.0, ref = 0.0;
    for (size_t i = 0; i < mesh.size(); ++i)
      for (size_t j = 0; j < mesh.size(); ++j) {
        const Vec3 k = std::sqrt(lambda) * mesh.directions[j], q = std::sqrt(lambda) * mesh.directions[i];
        const cplx fb = born_amplitude(c.potential, q, k);
        err = std::max(err, std::abs(f(i, j) - fb));
        ref = std::max(ref, std::abs(fb));
      }
    s["oracle_born_relative"] = ref > 0 ? err / ref : 0.0;
  }
  if (c.oracles.partial_waves && c.potential.is_radial_scalar() && !c.potential.is_zero()) {
    const auto pw = partial_waves(radial_problem(c.potential), lambda, std::max(4, mesh.l_max()));
    const double ref = 4.0 * kPi * pw.sigma();
    s["oracle_partial_wave_sigma"] = ref;
    s["oracle_partial_wave_relative"] = ref > 0 ? std::abs(sd - ref) / ref : 0.0;
  }
  return r;
}

EnergyRecord solve_dirac(const DiracScatterer& sc, const RunConfig& c, const AngularMesh& mesh, double lambda,
                         size_t idx) {
  EnergyRecord r;
  const auto d = dirac_on_shell(sc, lambda, mesh);
  const auto b = dirac_s_matrix(d);
  const auto cs = dirac_cross_sections(d, b);
  Table amp{"channel amplitudes f_{s,n}(kappa w_out, kappa w_in) in length units; s, n are channel numbers "
            "(1,2: lambda < -m; 3,4: lambda > m)",
            {"i_out", "j_in", "s", "n", "re_f", "im_f"},
            {}};
  for (Eigen::Index i = 0; i < Eigen::Index(mesh.size()); ++i)
    for (Eigen::Index j = 0; j < Eigen::Index(mesh.size()); ++j)
      for (int s = 0; s < 2; ++s)
        for (int n = 0; n < 2; ++n) {
          const cplx v = d.f(2 * i + s, 2 * j + n);
          amp.add({double(i), double(j), double(d.channels[s]), double(d.channels[n]), v.real(), v.imag()});
        }
  r.tables.emplace_back("amplitudes_" + energy_tag(idx) + ".csv", std::move(amp));
  r.tables.emplace_back("s_eigenvalues_" + energy_tag(idx) + ".csv", eigen_table(b));
  auto& s = r.summary;
  s["pair"] = d.pair;
  s["kappa"] = d.kappa;
  s["sigma_direct_trace"] = cs.trace_direct;
  s["sigma_ergodic_trace"] = cs.trace_ergodic;
  s["sigma_reference_trace"] = cs.trace_reference;
  s["direct_over_reference"] = cs.direct_over_reference();
  s["ergodic_relative_difference"] = cs.trace_direct > 0 ? std::abs(cs.trace_direct - cs.trace_ergodic) / cs.trace_direct : 0.0;
  nlohmann::json sigma = nlohmann::json::array();
  for (int a = 0; a < 2; ++a)
    for (int bb = 0; bb < 2; ++bb) sigma.push_back({cs.direct(a, bb).real(), cs.direct(a, bb).imag()});
  s["sigma_direct_matrix"] = sigma;
  s["unitarity_defect"] = b.unitarity_defect;
  s["hs_sum"] = cs.hs_sum;
  try {
    const auto g = gamma_consistency(d.f, d.big_t, lambda);
    s["gamma_fit"] = {{"c_re", g.c.real()}, {"c_im", g.c.imag()}, {"residual", g.residual},
                      {"correlation", g.correlation}, {"reference", g.reference}};
  } catch (const DegenerateFit&) {
    s["gamma_fit"] = nullptr;
  }
  if (c.oracles.born && analytic_scalar(c.potential)) {
    double err = 0.0, ref = 0.0;
    const auto sol = sc.solve(lambda, {mesh.directions[0]}, {d.channels[0]});
    std::vector<Vec3> q;
    for (const auto& w : mesh.directions) q.push_back(d.kappa * w);
    const auto integ = sc.momentum_integrals(sol, q);
    for (size_t i = 0; i < q.size(); ++i) {
      const Vec4c f = amplitude_from_integral(lambda, c.mass, q[i], integ.block<4, 1>(4 * i, 0));
      const Vec4c fb = dirac_born_amplitude(c.potential, c.mass, lambda, q[i], sol.momentum(0), d.channels[0]);
      err = std::max(err, (f - fb).norm());
      ref = std::max(ref, fb.norm());
    }
    s["oracle_born_relative"] = ref > 0 ? err / ref : 0.0;
  }
  return r;
}

int cmd_solve(Run& run) {
  const auto& c = run.config;
  validate_scattering(c);
  const auto mesh = make_angular_mesh(c.angular_degree);
  run.add_table("directions.csv", directions_table(mesh));
  std::optional<SchrodingerScatterer> ss;
  std::optional<DiracScatterer> ds;
  if (c.problem == Problem::schrodinger)
    ss.emplace(make_schrodinger(c));
  else
    ds.emplace(make_dirac(c));
  const size_t nodes = ss ? ss->grid().size() : ds->grid().size();
  log("support nodes: " + std::to_string(nodes) + ", mesh directions: " + std::to_string(mesh.size()));
  const auto& e = c.energies.values;
  std::vector<EnergyRecord> rec(e.size());
  parallel_for(e.size(), run.threads, [&](size_t i) {
    log("energy " + std::to_string(e[i]));
    try {
      rec[i] = ss ? solve_schrodinger(*ss, c, mesh, e[i], i) : solve_dirac(*ds, c, mesh, e[i], i);
      rec[i].summary["status"] = "ok";
    } catch (const std::exception& ex) {
      rec[i] = EnergyRecord{};
      rec[i].failed = true;
      rec[i].summary["status"] = "failed";
      rec[i].summary["error"] = ex.what();
    }
    rec[i].summary["energy"] = e[i];
  });
  Table overview{"per-energy overview; status 1 = ok, 0 = failed (other columns NaN); cross sections in length^2",
                 {"energy", "status", "sigma_direct", "sigma_ergodic", "unitarity_defect"},
                 {}};
  nlohmann::json energies = nlohmann::json::array();
  bool failed = false;
  const double nan = std::nan("");
  for (size_t i = 0; i < e.size(); ++i) {
    auto& s = rec[i].summary;
    failed = failed || rec[i].failed;
    if (rec[i].failed) {
      overview.add({e[i], 0.0, nan, nan, nan});
    } else {
      const double sd = s.contains("sigma_direct") ? s["sigma_direct"].get<double>() : s["sigma_direct_trace"].get<double>();
      const double se = s.contains("sigma_ergodic") ? s["sigma_ergodic"].get<double>() : s["sigma_ergodic_trace"].get<double>();
      overview.add({e[i], 1.0, sd, se, s["unitarity_defect"].get<double>()});
    }
    for (auto& [name, t] : rec[i].tables) run.add_table(name, std::move(t));
    energies.push_back(s);
  }
  run.add_table("energies.csv", std::move(overview));
  run.summary["problem"] = c.problem == Problem::schrodinger ? "schrodinger" : "dirac";
  run.summary["support_nodes"] = nodes;
  run.summary["energies"] = energies;
  run.finish("solve");
  return failed ? kExitNumerical : 0;
}

SpectralProbe make_probe(const Run& run, std::optional<SchrodingerScatterer>& ss, std::optional<DiracScatterer>& ds) {
  if (run.config.problem == Problem::schrodinger) {
    ss.emplace(make_schrodinger(run.config));
    return schrodinger_probe(*ss);
  }
  ds.emplace(make_dirac(run.config));
  const DiracScatterer* p = &*ds;
  return [p](double e) { return probe_system(p->system(e)); };
}

int cmd_scan(Run& run) {
  const auto& c = run.config;
  if (c.energies.values.empty()) throw ConfigError("energies", "required for scan");
  for (double e : c.energies.values) {
    if (c.problem == Problem::schrodinger && !(e > 0.0)) throw ConfigError("energies", "scan energies must be positive");
    if (c.problem == Problem::dirac && !(std::abs(e) > c.mass))
      throw ConfigError("energies", "energy " + std::to_string(e) + " lies in the gap [-m, m]");
  }
  std::optional<SchrodingerScatterer> ss;
  std::optional<DiracScatterer> ds;
  const auto probe = make_probe(run, ss, ds);
  const auto& e = c.energies.values;
  std::vector<ProbeValue> v(e.size());
  parallel_for(e.size(), run.threads, [&](size_t i) {
    log("scan energy " + std::to_string(e[i]));
    v[i] = probe(e[i]);
  });
  const double thr = c.solver.exceptional_threshold;
  Table t{"smallest singular value and spectral norm of I + K(lambda); flagged = sigma_min < threshold * norm",
          {"lambda", "smallest_singular", "norm", "flagged"},
          {}};
  nlohmann::json flagged = nlohmann::json::array();
  for (size_t i = 0; i < e.size(); ++i) {
    const bool f = v[i].smallest_singular < thr * v[i].norm;
    t.add({e[i], v[i].smallest_singular, v[i].norm, f ? 1.0 : 0.0});
    if (f) flagged.push_back(e[i]);
  }
  run.add_table("scan.csv", std::move(t));
  run.summary["threshold"] = thr;
  run.summary["flagged"] = flagged;
  run.finish("scan");
  return 0;
}

int cmd_bound(Run& run) {
  const auto& c = run.config;
  validate_bound(c);
  Table t{"bound-state energies; method 0 = 3D lattice Birman-Schwinger scan, 1 = radial partial-wave reduction "
          "(l = partial wave, -1 for the lattice)",
          {"method", "l", "energy"},
          {}};
  nlohmann::json out;
  if (c.problem == Problem::schrodinger && c.potential.is_radial_scalar() && !c.potential.is_zero()) {
    const auto p = radial_problem(c.potential);
    std::vector<RadialLevels> levels(c.bound.l_max + 1);
    parallel_for(levels.size(), run.threads, [&](size_t l) {
      levels[l] = radial_level_search(p, int(l), c.bound.lo, 0.25, std::max(c.bound.count, 60), std::min(c.bound.tol, 1e-10));
    });
    nlohmann::json radial = nlohmann::json::array();
    for (size_t l = 0; l < levels.size(); ++l)
      for (double en : levels[l].extrapolated) {
        t.add({1.0, double(l), en});
        radial.push_back({{"l", l}, {"energy", en}});
      }
    out["radial"] = radial;
  }
  std::optional<SchrodingerScatterer> ss;
  std::optional<DiracScatterer> ds;
  const auto probe = make_probe(run, ss, ds);
  const size_t nodes = ss ? ss->grid().size() : ds->grid().size();
  const size_t unknowns = ss ? nodes : 4 * nodes;
  if (unknowns > c.solver.dense_limit) {
    out["lattice"] = nullptr;
    out["lattice_skipped"] = "support has " + std::to_string(unknowns) + " unknowns, above solver.dense_limit";
  } else {
    const auto r = bound_state_search(probe, c.bound.lo, c.bound.hi, c.bound.count, c.bound.tol, c.solver.exceptional_threshold);
    for (double en : r.bound_states) t.add({0.0, -1.0, en});
    out["lattice"] = r.bound_states;
  }
  run.add_table("bound.csv", std::move(t));
  run.summary["bound_states"] = out;
  run.finish("bound");
  return 0;
}

struct Check {
  std::string name;
  double value;
  double tolerance;
  bool pass;
};

int cmd_validate(Run& run) {
  const auto& c = run.config;
  validate_scattering(c);
  std::vector<Check> checks;
  auto upper = [&](const std::string& name, double v, double tol) { checks.push_back({name, v, tol, v <= tol}); };
  auto lower = [&](const std::string& name, double v, double tol) { checks.push_back({name, v, tol, v >= tol}); };
  const auto mesh = make_angular_mesh(c.angular_degree);
  const double lambda = c.energies.values.front();
  if (c.problem == Problem::schrodinger) {
    const auto sc = make_schrodinger(c);
    const auto r = solve_schrodinger(sc, c, mesh, lambda, 0);
    upper("unitarity_defect", r.summary["unitarity_defect"], 2e-2);
    upper("ergodic_identity", r.summary["ergodic_relative_difference"], 1e-2);
    if (r.summary.contains("oracle_born_relative")) upper("born_amplitude", r.summary["oracle_born_relative"], 5e-2);
    if (r.summary.contains("oracle_partial_wave_relative"))
      upper("partial_wave_sigma", r.summary["oracle_partial_wave_relative"], 5e-2);
    const auto free = make_schrodinger([&] {
      RunConfig z = c;
      z.potential = PotentialSpec{};
      return z;
    }());
    const auto rf = solve_schrodinger(free, c, mesh, lambda, 0);
    upper("free_sigma", rf.summary["sigma_direct"], 0.0);
  } else {
    const auto sc = make_dirac(c);
    const auto r = solve_dirac(sc, c, mesh, lambda, 0);
    upper("unitarity_defect", r.summary["unitarity_defect"], 2e-2);
    upper("direct_vs_ergodic_trace", r.summary["ergodic_relative_difference"], 1e-8);
    if (!r.summary["gamma_fit"].is_null()) lower("gamma_correlation", r.summary["gamma_fit"]["correlation"], 0.999);
    if (r.summary.contains("oracle_born_relative")) upper("born_amplitude", r.summary["oracle_born_relative"], 5e-2);
    const double kappa = r.summary["kappa"];
    if (c.oracles.far_field) {
      const int ch = lambda > 0 ? 3 : 1;
      const auto sol = sc.solve(lambda, {Vec3(0, 0, 1)}, {ch});
      const auto ff = far_field_check(sc, sol, 0, {10 / kappa, 20 / kappa, 40 / kappa}, mesh.directions);
      checks.push_back({"far_field_decreasing", ff.residual[2], ff.residual[1],
                        ff.residual[1] <= ff.residual[0] && ff.residual[2] <= ff.residual[1]});
      upper("far_field_extraction", ff.extraction_error[2], 5e-2);
    }
    const double q = lorentzian_shell_integral(kappa, c.mass, 1e-4), lim = lorentzian_shell_limit(kappa, c.mass);
    upper("lorentzian_limit", std::abs(q - lim) / lim, 1e-3);
    if (c.oracles.free_parseval) {
      std::mt19937 rng(c.seed);
      std::normal_distribution<double> nd;
      Vec4c amp;
      for (int a = 0; a < 4; ++a) amp[a] = cplx(nd(rng), nd(rng));
      const Vec3 k0(nd(rng), nd(rng), nd(rng));
      const auto f = sample_box(32, 0.25, [&](const Vec3& x) { return Vec4c(amp * std::exp(kI * k0.dot(x) - x.squaredNorm() / 2)); });
      const auto t = free_eigen_transform(f, c.mass);
      upper("free_parseval", std::abs(t.squared_norm() - f.squared_norm()) / f.squared_norm(), 1e-3);
    }
  }
  Table t{"oracle checks; pass = 1 when value meets tolerance", {"check", "value", "tolerance", "pass"}, {}};
  nlohmann::json js = nlohmann::json::array();
  bool ok = true;
  for (size_t i = 0; i < checks.size(); ++i) {
    t.add({double(i), checks[i].value, checks[i].tolerance, checks[i].pass ? 1.0 : 0.0});
    js.push_back({{"check", checks[i].name}, {"value", checks[i].value}, {"tolerance", checks[i].tolerance},
                  {"pass", checks[i].pass}});
    ok = ok && checks[i].pass;
    std::cout << (checks[i].pass ? "PASS " : "FAIL ") << checks[i].name << " value=" << checks[i].value
              << " tolerance=" << checks[i].tolerance << "\n";
  }
  run.add_table("validate.csv", std::move(t));
  run.summary["checks"] = js;
  run.summary["passed"] = ok;
  run.finish("validate");
  return ok ? 0 : kExitOracle;
}

int cmd_kernels(Run& run) {
  const auto& c = run.config;
  const double m = c.mass;
  const double re = c.energies.values.empty() ? 1.5 * m : c.energies.values.front();
  const cplx mu(re, 0.5 * m);
  std::mt19937 rng(c.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), radius(0.8, 2.5);
  std::vector<Vec3> pts;
  while (pts.size() < 10) {
    Vec3 d(u(rng), u(rng), u(rng));
    if (d.norm() < 1e-3) continue;
    pts.push_back(radius(rng) * d.normalized());
  }
  // Fourier leg: both sides smoothed by a Gaussian of width a, momentum sums
  // on three grids of a fixed box
  const double a = 0.42, box = 20.0;
  const std::vector<int> sizes{48, 64, 96};
  Table t{"B+ closed form against the convolution route and Gaussian-smoothed momentum-grid transforms (relative "
          "Frobenius errors) at mu = lambda + 0.5 m i",
          {"x", "y", "z", "rel_conv_coarse", "rel_conv_fine", "rel_fourier_48", "rel_fourier_64", "rel_fourier_96"},
          {}};
  std::vector<std::vector<double>> err(pts.size(), std::vector<double>(5));
  std::vector<Mat4c> smooth(pts.size());
  parallel_for(pts.size(), run.threads, [&](size_t i) {
    const Mat4c closed = kernel_b_plus(pts[i], mu, m);
    err[i][0] = (oracle::b_plus_by_convolution(pts[i], mu, m, 2) - closed).norm() / closed.norm();
    err[i][1] = (oracle::b_plus_by_convolution(pts[i], mu, m, 40) - closed).norm() / closed.norm();
    smooth[i] = oracle::gaussian_smoothed([&](const Vec3& x) { return kernel_b_plus(x, mu, m); }, pts[i], a);
  });
  for (size_t g = 0; g < sizes.size(); ++g) {
    log("momentum grid " + std::to_string(sizes[g]));
    const auto fourier = oracle::momentum_grid_transform(pts, {sizes[g], 2.0 * kPi / box, a}, m, mu,
                                                         [&](double q2) { return q2 + m * m - mu * mu; });
    for (size_t i = 0; i < pts.size(); ++i) err[i][2 + g] = (fourier[i] - smooth[i]).norm() / smooth[i].norm();
  }
  std::vector<double> worst(5, 0.0);
  for (size_t i = 0; i < pts.size(); ++i) {
    t.add({pts[i][0], pts[i][1], pts[i][2], err[i][0], err[i][1], err[i][2], err[i][3], err[i][4]});
    for (int c = 0; c < 5; ++c) worst[c] = std::max(worst[c], err[i][c]);
  }
  run.add_table("kernels.csv", std::move(t));
  const bool conv_ok = worst[1] <= 1e-2 && worst[1] < worst[0];
  const bool fourier_ok = worst[4] <= 1e-2 && worst[3] < worst[2] && worst[4] < worst[3];
  const bool ok = conv_ok && fourier_ok;
  run.summary["mu"] = {mu.real(), mu.imag()};
  run.summary["max_relative_error"] = {{"convolution_coarse", worst[0]}, {"convolution_fine", worst[1]},
                                       {"fourier_48", worst[2]}, {"fourier_64", worst[3]}, {"fourier_96", worst[4]}};
  run.summary["passed"] = ok;
  std::cout << (conv_ok ? "PASS" : "FAIL") << " closed form vs convolution: " << worst[1] << " (coarse " << worst[0]
            << ")\n";
  std::cout << (fourier_ok ? "PASS" : "FAIL") << " closed form vs Fourier: " << worst[2] << ", " << worst[3] << ", "
            << worst[4] << " on 48^3, 64^3, 96^3\n";
  run.finish("kernels");
  return ok ? 0 : kExitOracle;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relativistic and nonrelativistic Lippmann-Schwinger scattering solver"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir;
  int threads = 1;
  app.add_option("--config", config_path, "run configuration (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (overrides the config's output)");
  app.add_option("--threads", threads, "worker threads (RLS_THREADS overrides)")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", g_verbose, "progress on stderr");
  app.add_flag_callback("--version", [] {
    std::cout << "rlscatter " << kVersion << "\n";
    std::exit(0);
  });
  const std::map<std::string, std::function<int(Run&)>> commands{{"solve", cmd_solve},
                                                                  {"scan", cmd_scan},
                                                                  {"bound", cmd_bound},
                                                                  {"validate", cmd_validate},
                                                                  {"kernels", cmd_kernels}};
  const std::map<std::string, std::string> help{
      {"solve", "amplitudes, S eigenvalues and cross sections per energy"},
      {"scan", "smallest singular value of I + K over the energies"},
      {"bound", "bound-state search below the continuum or in the gap"},
      {"validate", "oracle suite at the first energy"},
      {"kernels", "closed-form kernel against the convolution oracle"}};
  for (const auto& [name, text] : help) app.add_subcommand(name, text);
  CLI11_PARSE(app, argc, argv);
  if (const char* env = std::getenv("RLS_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) threads = t;
  }
  try {
    Run run;
    run.config = load_config(config_path);
    run.out = out_dir.empty() ? fs::path(run.config.output) : fs::path(out_dir);
    run.threads = threads;
    // dense LU and SVD are single-threaded; parallelism is over energies
    Eigen::setNbThreads(1);
    const std::string name = app.get_subcommands().front()->get_name();
    log("command " + name + ", output " + run.out.string() + ", threads " + std::to_string(threads));
    return commands.at(name)(run);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}
