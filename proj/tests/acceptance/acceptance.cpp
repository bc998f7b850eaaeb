// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "fsn/cli.hpp"
#include "fsn/constitutive.hpp"
#include "fsn/field_solver.hpp"
#include "fsn/fsn_lattice.hpp"
#include "fsn/tag_ingest.hpp"

namespace fs = std::filesystem;
using namespace fsn;
using constitutive::Matrix3;

namespace tol {
constexpr double shell_runtime_s = 5.0;
constexpr double creep_slope_rel = 1e-9;
constexpr double gradient_rel = 1e-6;
constexpr double gradient_step = 1e-6;
constexpr double deviator_trace = 1e-12;
constexpr double flow_rel = 0.01;
constexpr int flow_steps = 10'000;
constexpr double flow_runtime_s = 10.0;
constexpr double patch_max_norm = 1e-10;
constexpr double uniform_residual = 1e-12;
constexpr double onset_fast = 105.0;
constexpr double onset_slow = 72.0;
constexpr double onset_band = 10.0;
constexpr std::size_t onset_max_nodes = 10'000;
constexpr double onset_runtime_s = 60.0;
constexpr int fca_contexts = 50;
constexpr int fracture_runs = 200;
}  // namespace tol

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix3 random_matrix(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = u(rng);
  return m;
}

// 1. shell populations against breadth-first enumeration
Verdict shell_counts() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t mismatches = 0, checked = 0;
  for (int z = 2; z <= 6; ++z) {
    for (int k = 0; k <= 8; ++k) {
      const auto lat = lattice::build_bethe({z, k, 1}, {UINT64_MAX});
      const auto nb = lat.intact_neighbours();
      std::vector<int> dist(lat.nodes.size(), -1);
      std::queue<std::size_t> q;
      dist[0] = 0;
      q.push(0);
      while (!q.empty()) {
        const auto v = q.front();
        q.pop();
        for (auto w : nb[v])
          if (dist[w] < 0) {
            dist[w] = dist[v] + 1;
            q.push(w);
          }
      }
      std::vector<std::uint64_t> counts(static_cast<std::size_t>(k) + 1, 0);
      for (int d : dist) {
        if (d < 0 || d > k) {
          ++mismatches;
          continue;
        }
        ++counts[static_cast<std::size_t>(d)];
      }
      for (int g = 1; g <= k; ++g) {
        ++checked;
        if (counts[static_cast<std::size_t>(g)] != lattice::shell_count(z, g)) ++mismatches;
      }
    }
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < tol::shell_runtime_s,
          fmt::format("{} shells checked, {} mismatches, {:.2f} s (limit {} s)", checked, mismatches,
                      t, tol::shell_runtime_s)};
}

// 2. creep law slope in log-log coordinates
Verdict creep_slope() {
  double worst = 0.0;
  bool exact = true;
  for (double m : {0.5, 1.0, 3.0, 6.09}) {
    const constitutive::CreepParams p{1.7, m, 1.19, constitutive::CreepOrientation::as_printed};
    exact = exact && constitutive::creep_rate(p.s_hat, p) == p.B;
    const int n = 41;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      const double x = -2.0 + 4.0 * i / (n - 1);
      const double y = std::log10(constitutive::creep_rate(p.s_hat * std::pow(10.0, x), p));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    worst = std::max(worst, std::abs(slope + m) / m);
  }
  return {worst < tol::creep_slope_rel && exact,
          fmt::format("worst relative slope error {:.2e} (limit {:.0e}), rate at s_hat equals B: {}",
                      worst, tol::creep_slope_rel, exact)};
}

// 3. analytic yield gradients against central differences
Verdict gradient_oracle() {
  std::mt19937_64 rng(31337);
  const constitutive::OntologyConstants c{.phason_coupling = 0.7};
  double worst = 0.0;
  int used = 0;
  while (used < 100) {
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-2, 2)(rng));
    const constitutive::StressState st{constitutive::PhononTensor(random_matrix(rng, scale)),
                                       constitutive::PhasonTensor(random_matrix(rng, scale))};
    const auto g = constitutive::yield_gradients(st, c);
    if (g.phonon_degenerate || g.phason_degenerate) continue;
    ++used;
    const double h = tol::gradient_step * std::max(st.phonon.matrix().norm(), st.phason.norm());
    auto f = [&](const Matrix3& s, const Matrix3& k) {
      return constitutive::effective_stress({constitutive::PhononTensor(s), constitutive::PhasonTensor(k)}, c)
          .total;
    };
    Matrix3 fs, fk;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Matrix3 e = Matrix3::Zero();
        e(i, j) = h;
        const Matrix3& s = st.phonon.matrix();
        const Matrix3& k = st.phason.matrix();
        fs(i, j) = (f(s + e, k) - f(s - e, k)) / (2 * h);
        fk(i, j) = (f(s, k + e) - f(s, k - e)) / (2 * h);
      }
    worst = std::max(worst, (g.phonon.matrix() - fs).norm() / g.phonon.matrix().norm());
    worst = std::max(worst, (g.phason.matrix() - fk).norm() / g.phason.matrix().norm());
  }
  return {worst < tol::gradient_rel,
          fmt::format("{} states, worst relative error {:.2e} (limit {:.0e})", used, worst,
                      tol::gradient_rel)};
}

// 4. traces of emitted deviators
Verdict deviator_traces() {
  std::mt19937_64 rng(2718);
  const constitutive::OntologyConstants c{.s_0 = 0.5, .n = 3.0, .E_el = 2.0, .bulk = 1.5,
                                          .phason_coupling = 0.4};
  const constitutive::FlowModel flow{constitutive::ModulusMode::ramberg_osgood_consistent, 1.0};
  const constitutive::YieldModel yield{constitutive::YieldMode::perfect, 0.0};
  double worst = 0.0;
  std::size_t count = 0;
  auto note = [&](double trace) {
    worst = std::max(worst, std::abs(trace));
    ++count;
  };
  for (int i = 0; i < 2000; ++i) {
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-3, 1)(rng));
    const constitutive::StressState st{constitutive::PhononTensor(random_matrix(rng, scale)),
                                       constitutive::PhasonTensor(random_matrix(rng, scale))};
    note(st.phonon.deviator().trace());
    note(st.phason.deviator().trace());
    const auto strain = constitutive::total_deformation_state(st, c);
    note(strain.phonon.deviator().trace());
    note(strain.phason.deviator().trace());
    const auto g = constitutive::yield_gradients(st, c);
    note(g.phonon.trace());
    const auto inc = constitutive::plastic_flow_increment(st, scale, flow, yield, c);
    note(inc.phonon.trace());
  }
  return {worst <= tol::deviator_trace,
          fmt::format("{} deviators, max |trace| {:.2e} (limit {:.0e})", count, worst,
                      tol::deviator_trace)};
}

// 5. incremental flow against total deformation under proportional loading
Verdict flow_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  Matrix3 dir;
  dir << 1.0, 0.3, -0.2, 0.3, -0.4, 0.1, -0.2, 0.1, -0.6;
  const constitutive::PhononTensor unit =
      constitutive::PhononTensor(dir).deviator() *
      (1.0 / constitutive::effective_stress({constitutive::PhononTensor(dir), {}}, {}).phonon);
  double worst = 0.0;
  for (double n : {1.0, 3.0, 5.0}) {
    const constitutive::OntologyConstants c{.s_0 = 1.0, .n = n, .E_el = 10.0, .bulk = 2.0};
    const constitutive::YieldModel yield{constitutive::YieldMode::perfect, c.s_0};
    const constitutive::FlowModel flow{constitutive::ModulusMode::ramberg_osgood_consistent, 1.0};
    const double s_end = 3.0 * c.s_0;
    const double dS = (s_end - c.s_0) / tol::flow_steps;
    Matrix3 strain = constitutive::total_deformation_state({unit * c.s_0, {}}, c).phonon.matrix();
    for (int i = 0; i < tol::flow_steps; ++i) {
      const double S = c.s_0 + i * dS;
      strain += constitutive::plastic_flow_increment({unit * S, {}}, dS, flow, yield, c).phonon.matrix();
    }
    const Matrix3 total = constitutive::total_deformation_state({unit * s_end, {}}, c).phonon.matrix();
    worst = std::max(worst, (strain - total).norm() / total.norm());
  }
  const double t = seconds_since(t0);
  return {worst < tol::flow_rel && t < tol::flow_runtime_s,
          fmt::format("n in {{1,3,5}}, {} steps, worst relative error {:.2e} (limit {}), {:.2f} s",
                      tol::flow_steps, worst, tol::flow_rel, t)};
}

// 6. patch test and uniform-stress residual
Verdict patch_test() {
  const auto lat = lattice::build_bethe({3, 6, 42});
  solver::Models m;
  m.constants.E_el = 3.0;
  m.constants.bulk = 2.0;
  m.constants.phason_coupling = 0.5;
  m.plasticity_enabled = false;
  Matrix3 g;
  g << 0.02, -0.01, 0.005, 0.013, -0.004, 0.002, -0.007, 0.011, 0.016;
  const solver::AffineBoundary bc{g, 0.5 * g.transpose()};
  solver::SolverOptions opt;
  opt.initial_guess = solver::InitialGuess::zero;
  const auto res = solver::solve_equilibrium(lat, bc, m, opt);
  const auto affine = solver::LatticeField::affine(lat, bc.phonon_gradient, bc.phason_gradient);
  double dev = 0.0;
  for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
    dev = std::max(dev, (res.field.u[i] - affine.u[i]).lpNorm<Eigen::Infinity>());
    dev = std::max(dev, (res.field.w[i] - affine.w[i]).lpNorm<Eigen::Infinity>());
  }
  std::mt19937_64 rng(4);
  const constitutive::StressState uniform{constitutive::PhononTensor(random_matrix(rng, 5.0)),
                                          constitutive::PhasonTensor(random_matrix(rng, 5.0))};
  const std::vector<constitutive::StressState> stress(lat.nodes.size(), uniform);
  const double r = solver::equilibrium_residual(lat, stress).norm;
  return {dev <= tol::patch_max_norm && r <= tol::uniform_residual,
          fmt::format("interior deviation {:.2e} (limit {:.0e}), uniform residual {:.2e} (limit {:.0e})",
                      dev, tol::patch_max_norm, r, tol::uniform_residual)};
}

// 7. rate dependence of the ductility onset under the shipped defaults
Verdict calibrated_onset() {
  const auto t0 = std::chrono::steady_clock::now();
  const cli::RunConfig cfg;
  const auto lat = lattice::build_bethe(cfg.lattice.spec, cfg.lattice.build);
  double onset[2];
  bool converged = true;
  const double rates[2] = {1e-3, 1e-2};
  for (int i = 0; i < 2; ++i) {
    auto load = cfg.load;
    load.strain_rate = rates[i];
    const auto run = solver::run_loading(lat, load, cfg.models, cfg.solver);
    converged = converged && run.converged;
    onset[i] = solver::ductility_onset(run.curve);
  }
  const double t = seconds_since(t0);
  const bool pass = converged && onset[1] >= onset[0] &&
                    std::abs(onset[1] - tol::onset_fast) <= tol::onset_band &&
                    std::abs(onset[0] - tol::onset_slow) <= tol::onset_band &&
                    lat.nodes.size() <= tol::onset_max_nodes && t < tol::onset_runtime_s;
  return {pass, fmt::format("onset {:.1f}% at 1e-3 (target {}±{}), {:.1f}% at 1e-2 (target {}±{}), "
                            "{} nodes, {:.2f} s",
                            onset[0], tol::onset_slow, tol::onset_band, onset[1], tol::onset_fast,
                            tol::onset_band, lat.nodes.size(), t)};
}

// 8. concept enumeration against subset closure
Verdict fca_oracle() {
  std::mt19937_64 rng(8080);
  int mismatches = 0;
  std::size_t concepts = 0;
  for (int trial = 0; trial < tol::fca_contexts; ++trial) {
    const std::size_t n = 1 + rng() % 8, m = 1 + rng() % 8;
    std::vector<std::string> objs, attrs;
    for (std::size_t i = 0; i < n; ++i) objs.push_back("o" + std::to_string(i));
    for (std::size_t i = 0; i < m; ++i) attrs.push_back("a" + std::to_string(i));
    ingest::FormalContext ctx(objs, attrs);
    const auto density = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    for (std::size_t o = 0; o < n; ++o)
      for (std::size_t a = 0; a < m; ++a)
        if (std::uniform_real_distribution<double>(0, 1)(rng) < density) ctx.add_incidence(o, a);

    std::set<std::pair<std::uint64_t, std::uint64_t>> oracle;
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
      std::uint64_t intent = 0, extent = 0;
      for (std::size_t a = 0; a < m; ++a) {
        bool all = true;
        for (std::size_t o = 0; o < n; ++o)
          if ((mask >> o & 1) && !ctx.incident(o, a)) all = false;
        if (all) intent |= 1ULL << a;
      }
      for (std::size_t o = 0; o < n; ++o) {
        bool all = true;
        for (std::size_t a = 0; a < m; ++a)
          if ((intent >> a & 1) && !ctx.incident(o, a)) all = false;
        if (all) extent |= 1ULL << o;
      }
      oracle.emplace(extent, intent);
    }
    std::set<std::pair<std::uint64_t, std::uint64_t>> got;
    const auto list = ingest::enumerate_concepts(ctx);
    for (const auto& k : list) got.emplace(k.extent.to_ulong(), k.intent.to_ulong());
    if (got != oracle || list.size() != oracle.size()) ++mismatches;
    concepts += list.size();
  }
  return {mismatches == 0, fmt::format("{} contexts, {} concepts, {} mismatches", tol::fca_contexts,
                                       concepts, mismatches)};
}

// 9. two simulate invocations with the same configuration
Verdict determinism() {
  const auto root = fs::temp_directory_path() / ("fsn_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::string files[2][2];
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    const auto dir = root / ("run" + std::to_string(i));
    std::ostringstream out, err;
    codes[i] = cli::run({"--out", dir.string(), "--seed", "42", "--quiet", "simulate"}, out, err);
    const char* names[2] = {"curve.csv", "events.jsonl"};
    for (int f = 0; f < 2; ++f) {
      std::ifstream in(dir / names[f], std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      files[i][f] = s.str();
    }
  }
  fs::remove_all(root);
  const bool same = files[0][0] == files[1][0] && files[0][1] == files[1][1];
  return {codes[0] == 0 && codes[1] == 0 && same && !files[0][0].empty(),
          fmt::format("exit codes {}/{}, curve {} bytes, events {} bytes, identical: {}", codes[0],
                      codes[1], files[0][0].size(), files[0][1].size(), same)};
}

// 10. broken bond counts never decrease without rewiring
Verdict fracture_monotone() {
  std::mt19937_64 rng(1009);
  const cli::RunConfig cfg;
  int violations = 0, with_fracture = 0, failed = 0;
  for (int run = 0; run < tol::fracture_runs; ++run) {
    const int z = 3 + static_cast<int>(rng() % 2);
    const int k = z == 3 ? 4 + static_cast<int>(rng() % 2) : 3 + static_cast<int>(rng() % 2);
    const auto lat = lattice::build_bethe({z, k, rng()}, {10'000, 1.0, 0.3});
    solver::LoadProgram load = cfg.load;
    load.seed = rng();
    load.steps = 30;
    load.target_strain = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
    load.strain_rate = std::pow(10.0, std::uniform_real_distribution<double>(-3, -1)(rng));
    load.fracture_threshold = std::uniform_real_distribution<double>(0.1, 0.3)(rng);
    load.threshold_scatter = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
    load.direction = rng() % 2 ? solver::LoadDirection::shear : solver::LoadDirection::uniaxial;
    load.rewire = solver::RewireRule::off;
    const auto res = solver::run_loading(lat, load, cfg.models, cfg.solver);
    failed += res.converged ? 0 : 1;
    for (std::size_t i = 1; i < res.curve.size(); ++i)
      if (res.curve[i].broken_bonds < res.curve[i - 1].broken_bonds) ++violations;
    with_fracture += res.curve.back().broken_bonds > 0 ? 1 : 0;
  }
  return {violations == 0,
          fmt::format("{} runs, {} with fractures, {} stopped early, {} decreases", tol::fracture_runs,
                      with_fracture, failed, violations)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"shell counts", shell_counts},
      {"creep power law", creep_slope},
      {"yield gradient oracle", gradient_oracle},
      {"deviator traces", deviator_traces},
      {"flow vs deformation", flow_consistency},
      {"patch test", patch_test},
      {"calibrated onset", calibrated_onset},
      {"concept oracle", fca_oracle},
      {"determinism", determinism},
      {"fracture monotonicity", fracture_monotone},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::cout << fmt::format("[{}] {:2} {}: {}\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                             v.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
