#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <tuple>

#include "fsn/field_solver.hpp"
#include "fsn/random.hpp"
#include "system.hpp"

namespace fsn::solver {
namespace {

using constitutive::effective_stress;

Matrix3 load_direction(LoadDirection d) {
  Matrix3 m = Matrix3::Zero();
  if (d == LoadDirection::uniaxial) {
    m(0, 0) = 1.0;
  } else {
    m(0, 1) = 0.5;
    m(1, 0) = 0.5;
  }
  return m;
}

std::vector<double> bond_thresholds(const LoadProgram& p, std::size_t bonds) {
  std::vector<double> t(bonds, p.fracture_threshold);
  if (p.threshold_scatter > 0.0 && std::isfinite(p.fracture_threshold)) {
    Rng rng(splitmix64(p.seed ^ 0xF7AC7E5ULL));
    for (auto& v : t) v *= 1.0 + p.threshold_scatter * (2.0 * uniform01(rng) - 1.0);
  }
  return t;
}

struct RewireChoice {
  std::size_t p = 0;
  std::size_t q = 0;
  double distance = std::numeric_limits<double>::infinity();
};

// Closest unbonded pair with one end on the broken bond and the other in
// the site (both ends and their intact neighbours); isolated nodes are skipped.
std::optional<RewireChoice> choose_rewire(const FsnLattice& lattice, std::size_t bond) {
  const auto nbrs = lattice.intact_neighbours();
  const auto [a, b] = std::pair(lattice.bonds[bond].a, lattice.bonds[bond].b);
  std::vector<std::size_t> site{a, b};
  site.insert(site.end(), nbrs[a].begin(), nbrs[a].end());
  site.insert(site.end(), nbrs[b].begin(), nbrs[b].end());
  std::sort(site.begin(), site.end());
  site.erase(std::unique(site.begin(), site.end()), site.end());

  auto bonded = [&](std::size_t x, std::size_t y) {
    return std::any_of(lattice.bonds.begin(), lattice.bonds.end(), [&](const lattice::Bond& e) {
      return (e.a == x && e.b == y) || (e.a == y && e.b == x);
    });
  };
  std::optional<RewireChoice> best;
  for (std::size_t p : {a, b}) {
    if (nbrs[p].empty()) continue;
    for (std::size_t q : site) {
      if (q == p || nbrs[q].empty() || bonded(p, q)) continue;
      RewireChoice c{std::min(p, q), std::max(p, q),
                     (lattice.nodes[p].position - lattice.nodes[q].position).norm()};
      if (!best || std::tie(c.distance, c.p, c.q) < std::tie(best->distance, best->p, best->q)) {
        best = c;
      }
    }
  }
  return best;
}

}  // namespace

double LoadProgram::time_step() const {
  return target_strain / (static_cast<double>(steps) * strain_rate);
}

void LoadProgram::validate() const {
  if (!(strain_rate > 0.0) || !std::isfinite(strain_rate)) {
    throw ValidationError("load.strain_rate must be > 0");
  }
  if (!(target_strain >= 0.0) || !std::isfinite(target_strain)) {
    throw ValidationError("load.target_strain must be >= 0");
  }
  if (steps < 1) throw ValidationError("load.steps must be >= 1");
  if (!(fracture_threshold > 0.0)) throw ValidationError("load.fracture_threshold must be > 0");
  if (!(threshold_scatter >= 0.0 && threshold_scatter < 1.0)) {
    throw ValidationError("load.threshold_scatter must be in [0, 1)");
  }
  if (rewire_budget < 0) throw ValidationError("load.rewire_budget must be >= 0");
  if (!std::isfinite(phason_ratio)) throw ValidationError("load.phason_ratio must be finite");
}

RunResult run_loading(const FsnLattice& input, const LoadProgram& program, const Models& models,
                      const SolverOptions& options,
                      std::span<const std::optional<double>> node_exposition) {
  program.validate();
  models.validate();
  options.validate();

  RunResult run;
  run.lattice = input;
  FsnLattice& lattice = run.lattice;
  const std::size_t n = lattice.nodes.size();
  const auto& c = models.constants;

  run.curve.push_back(CurveSample{});
  run.yield_exposition.push_back(std::numeric_limits<double>::quiet_NaN());
  run.field = LatticeField::zero(n);
  run.stress.assign(n, StressState{});
  if (program.target_strain == 0.0) return run;

  const double dt = program.time_step();
  const Matrix3 direction = load_direction(program.direction);
  std::vector<double> threshold = bond_thresholds(program, lattice.bonds.size());
  PlasticStrains plastic;
  plastic.phonon.assign(n, PhononTensor());
  plastic.phason.assign(n, PhasonTensor());
  std::vector<double> hardening(n, 0.0);
  std::vector<double> previous_s(n, 0.0);
  std::vector<bool> yielded(n, false);
  std::size_t broken = 0, created = 0;
  int rewired = 0;

  auto system = std::make_unique<detail::EquilibriumSystem>(lattice, models);
  const LatticeField* warm = nullptr;

  for (int step = 1; step <= program.steps; ++step) {
    const double e = program.target_strain * step / program.steps;
    AffineBoundary boundary{e * direction, program.phason_ratio * e * direction};

    EquilibriumResult eq;
    try {
      eq = system->solve(boundary, options, &plastic, warm);
    } catch (const SolverError& err) {
      run.converged = false;
      run.error = "step " + std::to_string(step) + ": " + err.what();
      break;
    }
    run.solver_iterations += eq.iterations;
    run.field = std::move(eq.field);
    warm = &run.field;

    const StrainField strains = compute_strains(system->stencils(), run.field);
    auto trial = system->stresses(strains, &plastic);
    const auto& flagged = system->flagged();
    const auto& phi = system->stiffness();
    const double g = c.shear_modulus();

    std::size_t active = 0, plastic_nodes = 0;
    double exposition_sum = 0.0;
    std::size_t exposition_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (flagged[i]) continue;
      ++active;
      if (!models.plasticity_enabled) continue;
      constitutive::YieldModel y = models.yield;
      y.k = hardening[i];
      const double s_trial = effective_stress(trial[i], c).total;
      const double ys = y.yield_stress();
      if (constitutive::yield_function(s_trial, y) < 0.0) continue;
      ++plastic_nodes;
      if (i < node_exposition.size() && node_exposition[i]) {
        exposition_sum += *node_exposition[i];
        ++exposition_count;
      }
      if (!yielded[i]) {
        yielded[i] = true;
        run.events.push_back(Event{step, EventKind::yield, i, s_trial});
      }
      const double stiff = 3.0 * g * phi[i];
      double gamma = 0.0;
      const double ds_trial = s_trial - std::max(previous_s[i], ys);
      if (ds_trial > 0.0) {
        const double modulus = constitutive::clustering_modulus(s_trial, models.flow, c);
        if (std::isfinite(modulus)) gamma += ds_trial / (modulus + stiff);
      }
      if (models.creep_enabled && s_trial > 0.0) {
        double creep = constitutive::creep_rate(s_trial, models.creep) * dt;
        if (stiff > 0.0) creep = std::min(creep, std::max(0.0, (s_trial - ys) / stiff - gamma));
        gamma += creep;
      }
      if (!(gamma > 0.0)) continue;
      const auto grad = constitutive::yield_gradients(trial[i], c);
      plastic.phonon[i] += grad.phonon * gamma;
      plastic.phason[i] += grad.phason * gamma;
      hardening[i] += gamma;
    }

    // Post-update local stresses feed the reported curve and the fracture check.
    run.stress = system->stresses(strains, &plastic);
    std::vector<double> s_eff(n, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (flagged[i]) continue;
      s_eff[i] = effective_stress(run.stress[i], c).total;
      previous_s[i] = s_eff[i];
      sum += s_eff[i];
    }

    bool topology_changed = false;
    std::optional<std::size_t> worst;
    double worst_ratio = 1.0;
    for (std::size_t b = 0; b < lattice.bonds.size(); ++b) {
      const auto& bond = lattice.bonds[b];
      if (!bond.intact) continue;
      const double load = 0.5 * (s_eff[bond.a] + s_eff[bond.b]);
      const double ratio = load / threshold[b];
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst = b;
      }
    }
    if (worst) {
      auto& bond = lattice.bonds[*worst];
      bond.intact = false;
      ++broken;
      topology_changed = true;
      run.events.push_back(Event{step, EventKind::fracture, *worst,
                                 0.5 * (s_eff[bond.a] + s_eff[bond.b])});
      if (program.rewire == RewireRule::nearest_unbonded && rewired < program.rewire_budget) {
        if (const auto choice = choose_rewire(lattice, *worst)) {
          lattice.bonds.push_back(lattice::Bond{choice->p, choice->q, bond.stiffness, true});
          threshold.push_back(threshold[*worst]);
          ++rewired;
          ++created;
          run.events.push_back(
              Event{step, EventKind::rewire, lattice.bonds.size() - 1, choice->distance});
        }
      }
    }

    CurveSample sample;
    sample.step = step;
    sample.applied_strain = e;
    sample.mean_effective_stress = active > 0 ? sum / static_cast<double>(active) : 0.0;
    sample.broken_bonds = broken;
    sample.new_bonds = created;
    sample.plastic_fraction =
        active > 0 ? static_cast<double>(plastic_nodes) / static_cast<double>(active) : 0.0;
    run.curve.push_back(sample);
    run.yield_exposition.push_back(exposition_count > 0
                                       ? exposition_sum / static_cast<double>(exposition_count)
                                       : std::numeric_limits<double>::quiet_NaN());

    if (topology_changed) {
      try {
        system = std::make_unique<detail::EquilibriumSystem>(lattice, models);
      } catch (const SolverError& err) {
        run.converged = false;
        run.error = "step " + std::to_string(step) + ": " + err.what();
        break;
      }
    }
  }
  return run;
}

double ductility_onset(std::span<const CurveSample> curve) {
  if (curve.size() < 10) {
    throw ValidationError("ductility_onset needs at least 10 samples (got " +
                          std::to_string(curve.size()) + ")");
  }
  auto slope = [&](std::size_t i) {
    const double de = curve[i + 1].applied_strain - curve[i].applied_strain;
    return (curve[i + 1].mean_effective_stress - curve[i].mean_effective_stress) / de;
  };
  const double k0 = slope(0);
  if (!(k0 > 0.0)) return std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    if (slope(i) < 0.1 * k0) return 100.0 * curve[i].applied_strain;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace fsn::solver
