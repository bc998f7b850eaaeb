#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "fsn/field_solver.hpp"

namespace fsn::solver::detail {

/// Stencils, stiffness factors and the factorised linear operator of one
/// lattice topology. Rebuilt whenever bonds change.
///
/// Interior nodes satisfy the stationarity condition of the nodal strain
/// energy, sum_m s_m b_mk = 0, where b_mk is the gradient coefficient of
/// node k in node m's stencil (self term included). On an irregular tree
/// sum_m b_mk does not vanish, so a uniform stress would exert a spurious
/// force g_k; it is removed using the node's reference stress, i.e. the
/// stress at the affine boundary strain minus the node's own plastic
/// strain. The correction does not depend on the unknowns, so the operator
/// stays symmetric positive definite.
class EquilibriumSystem {
 public:
  EquilibriumSystem(const FsnLattice& lattice, const Models& models);

  const StencilSet& stencils() const noexcept { return stencils_; }
  const std::vector<double>& stiffness() const noexcept { return phi_; }
  /// Degenerate stencil, not pinned by enough prescribed nodes, or owning a
  /// vanishing pivot of the linear operator.
  const std::vector<bool>& flagged() const noexcept { return flagged_; }
  std::size_t flagged_count() const noexcept { return flagged_count_; }

  /// Nodal stresses phi * law(strain - plastic); flagged nodes get zero.
  std::vector<StressState> stresses(const StrainField& strains, const PlasticStrains* plastic) const;
  std::vector<StressState> stresses(const LatticeField& field, const PlasticStrains* plastic) const;

  /// warm, when given, supplies the interior starting values.
  EquilibriumResult solve(const AffineBoundary& boundary, const SolverOptions& options,
                          const PlasticStrains* plastic, const LatticeField* warm) const;

 private:
  using SparseMatrix = Eigen::SparseMatrix<double>;
  using Factor = Eigen::SimplicialLDLT<SparseMatrix>;

  struct Coupling {
    std::vector<std::size_t> nodes;  // node itself first, then its stencil
    std::vector<Eigen::Vector3d> coef;
  };

  void assemble();
  /// Appends the nodes owning vanishing pivots to `weak`.
  std::unique_ptr<Factor> factorise(double scale, bool phason, std::vector<std::size_t>& weak) const;
  StressState node_law(const StrainState& strain, const PlasticStrains* plastic,
                       std::size_t node) const;

  const FsnLattice& lattice_;
  Models models_;
  StencilSet stencils_;
  std::vector<Coupling> coupling_;
  std::vector<Eigen::Vector3d> defect_;  // g_k
  std::vector<double> phi_;
  std::vector<bool> flagged_;
  std::size_t flagged_count_ = 0;
  std::vector<long> unknown_;  // node -> unknown index, -1 when prescribed
  std::vector<std::size_t> unknown_nodes_;
  std::unique_ptr<Factor> phonon_;
  std::unique_ptr<Factor> phason_;
};

}  // namespace fsn::solver::detail
