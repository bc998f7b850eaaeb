#pragma once

// Quasi-static mechanics on an FSN lattice: least-squares strain recovery,
// nodal stress laws, the discrete equilibrium residual and its solver, and
// the strain-controlled loading driver with yield, fracture and rewiring.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fsn/constitutive.hpp"
#include "fsn/error.hpp"
#include "fsn/fsn_lattice.hpp"

namespace fsn::solver {

using constitutive::Matrix3;
using constitutive::OntologyConstants;
using constitutive::PhasonTensor;
using constitutive::PhononTensor;
using constitutive::StrainState;
using constitutive::StressState;
using lattice::FsnLattice;

struct LatticeField {
  std::vector<Eigen::Vector3d> u;  // phonon displacement per node
  std::vector<Eigen::Vector3d> w;  // phason displacement per node

  static LatticeField zero(std::size_t nodes);
  /// u = Gu x, w = Gw x at every node position.
  static LatticeField affine(const FsnLattice& lattice, const Matrix3& phonon_gradient,
                             const Matrix3& phason_gradient);
};

/// Weighted least-squares gradient stencil of one node. The gradient of a
/// nodal field f is sum_j (f_j - f_i) weights[j]^T. Nodes whose intact-bond
/// neighbours do not span three dimensions use their two-ring instead; if
/// that also fails the node is degenerate.
struct Stencil {
  std::vector<std::size_t> nodes;
  std::vector<Eigen::Vector3d> weights;
  bool extended = false;
  bool degenerate = false;
};

struct StencilSet {
  std::vector<Stencil> stencils;
  std::size_t degenerate_count = 0;
};

StencilSet build_stencils(const FsnLattice& lattice);

struct StrainField {
  std::vector<StrainState> strains;
  std::vector<bool> flagged;
  std::size_t warnings = 0;  // number of flagged nodes
};

/// Symmetrised phonon gradient and plain phason gradient at every node.
StrainField compute_strains(const FsnLattice& lattice, const LatticeField& field);
StrainField compute_strains(const StencilSet& stencils, const LatticeField& field);

enum class StressLaw { elastic, total_deformation };

/// Nodal stress from strain. "elastic" is the isotropic linear map (shear
/// E_el/3, bulk) on the phonon channel and alpha times the same map on the
/// phason channel; "total_deformation" inverts the total-deformation relation
/// with a safeguarded scalar Newton iteration. Throws SolverError when the
/// inversion fails within 100 iterations.
StressState node_stress(const StrainState& strain, const OntologyConstants& c, StressLaw law);

struct Residual {
  std::vector<Eigen::Vector3d> phonon;
  std::vector<Eigen::Vector3d> phason;
  /// Max over interior, non-degenerate nodes of the Euclidean norm of the
  /// stacked (phonon, phason) residual.
  double norm = 0.0;
};

/// Least-squares divergence of both stress channels; degenerate nodes carry
/// zero residual and boundary nodes are left out of the norm.
Residual equilibrium_residual(const FsnLattice& lattice, std::span<const StressState> stress);
Residual equilibrium_residual(const FsnLattice& lattice, const StencilSet& stencils,
                              std::span<const StressState> stress);

struct Models {
  OntologyConstants constants;
  StressLaw law = StressLaw::elastic;
  constitutive::YieldModel yield;
  constitutive::FlowModel flow;
  constitutive::CreepParams creep;
  bool creep_enabled = false;
  bool plasticity_enabled = true;

  void validate() const;
};

struct AffineBoundary {
  Matrix3 phonon_gradient = Matrix3::Zero();
  Matrix3 phason_gradient = Matrix3::Zero();
};

enum class InitialGuess { affine, zero };

struct SolverOptions {
  double tol = 1e-9;
  int max_iter = 50;
  double damping = 1.0;
  InitialGuess initial_guess = InitialGuess::affine;

  void validate() const;
};

/// Plastic eigenstrains per node; absent means zero.
struct PlasticStrains {
  std::vector<PhononTensor> phonon;
  std::vector<PhasonTensor> phason;
};

struct EquilibriumResult {
  LatticeField field;
  int iterations = 0;
  double residual = 0.0;
};

class NonConvergenceError : public SolverError {
 public:
  NonConvergenceError(const std::string& what, double residual, LatticeField best, int iterations)
      : SolverError(what, residual), best_(std::move(best)), iterations_(iterations) {}
  const LatticeField& best_field() const noexcept { return best_; }
  int iterations() const noexcept { return iterations_; }

 private:
  LatticeField best_;
  int iterations_;
};

/// Relative stiffness of each node: intact incident bond stiffness summed and
/// divided by the node's nominal degree.
std::vector<double> stiffness_factors(const FsnLattice& lattice);

/// Boundary nodes follow the affine map; interior nodes are relaxed by a
/// damped fixed-point iteration preconditioned with the factorised linear
/// elastic operator until the residual norm drops below tol * max(1, r0),
/// r0 being the starting residual. Throws NonConvergenceError carrying the
/// best field.
EquilibriumResult solve_equilibrium(const FsnLattice& lattice, const AffineBoundary& boundary,
                                    const Models& models, const SolverOptions& options,
                                    const PlasticStrains* plastic = nullptr);

enum class LoadMode { strain_controlled };
enum class LoadDirection { uniaxial, shear };
enum class RewireRule { off, nearest_unbonded };

struct LoadProgram {
  LoadMode mode = LoadMode::strain_controlled;
  LoadDirection direction = LoadDirection::uniaxial;
  double strain_rate = 1e-2;  // per unit time exposition
  double target_strain = 1.0;
  int steps = 100;
  double fracture_threshold = std::numeric_limits<double>::infinity();
  double threshold_scatter = 0.0;  // per-bond threshold factor in [1 - s, 1 + s]
  RewireRule rewire = RewireRule::off;
  int rewire_budget = 0;
  double phason_ratio = 0.0;  // phason boundary gradient relative to phonon
  std::uint64_t seed = 0;

  double time_step() const;
  void validate() const;
};

struct CurveSample {
  int step = 0;
  double applied_strain = 0.0;
  double mean_effective_stress = 0.0;
  std::size_t broken_bonds = 0;
  std::size_t new_bonds = 0;
  double plastic_fraction = 0.0;
};

enum class EventKind { yield, fracture, rewire };

struct Event {
  int step = 0;
  EventKind kind = EventKind::yield;
  std::size_t id = 0;  // node id for yield, bond id otherwise
  double detail = 0.0;
};

using EventLog = std::vector<Event>;

struct RunResult {
  std::vector<CurveSample> curve;
  EventLog events;
  bool converged = true;
  std::string error;
  FsnLattice lattice;  // final topology
  LatticeField field;
  std::vector<StressState> stress;
  /// Mean exposition of yielding nodes at each sample (NaN when none or
  /// when no exposition data was supplied).
  std::vector<double> yield_exposition;
  int solver_iterations = 0;
};

/// Strain-controlled quasi-static run. Never throws on solver failure: the
/// partial result is returned with converged = false.
RunResult run_loading(const FsnLattice& lattice, const LoadProgram& program, const Models& models,
                      const SolverOptions& options = {},
                      std::span<const std::optional<double>> node_exposition = {});

/// Applied strain in percent where the tangent slope first drops below 10%
/// of the initial slope; +infinity if it never does. Throws ValidationError
/// for fewer than 10 samples.
double ductility_onset(std::span<const CurveSample> curve);

const char* to_string(EventKind kind);

void write_curve_csv(std::ostream& out, std::span<const CurveSample> curve);
void write_events_jsonl(std::ostream& out, std::span<const Event> events);

}  // namespace fsn::solver
