#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "fsn/field_solver.hpp"
#include "system.hpp"

namespace fsn::solver {
namespace {

constexpr double kPivotTolerance = 1e-9;

using constitutive::effective_strain;
using constitutive::effective_strain_slope;

StressState elastic_stress(const StrainState& e, const OntologyConstants& c) {
  const double g = c.shear_modulus();
  const double lambda = c.lame_lambda();
  StressState s;
  s.phonon = PhononTensor(lambda * e.phonon.trace() * Matrix3::Identity() +
                          2.0 * g * e.phonon.matrix());
  s.phason = PhasonTensor(c.phason_coupling * (lambda * e.phason.trace() * Matrix3::Identity() +
                                               2.0 * g * e.phason.matrix()));
  return s;
}

// Finds S_eff with eps_eff(S) = eps_eq + (2a/3) sqrt(|w'|^2 + 3/4 K_kk^2 (eps_eff/S)^2).
double invert_effective(double eps_eq, double w_dev2, double k_kk, const OntologyConstants& c) {
  const double a = c.phason_coupling;
  const double q = 0.75 * k_kk * k_kk;
  auto h = [&](double s, double* slope) {
    double e, de, ratio, dratio;
    if (s > 0.0) {
      e = effective_strain(s, c);
      de = effective_strain_slope(s, c);
      ratio = e / s;
      dratio = (de * s - e) / (s * s);
    } else {
      e = 0.0;
      de = 1.0 / c.E_el;
      ratio = 1.0 / c.E_el;
      dratio = 0.0;
    }
    const double root = std::sqrt(w_dev2 + q * ratio * ratio);
    if (slope) {
      *slope = de - (root > 0.0 ? (2.0 * a / 3.0) * q * ratio * dratio / root : 0.0);
    }
    return e - eps_eq - (2.0 * a / 3.0) * root;
  };

  double f_lo = h(0.0, nullptr);
  if (!(f_lo < 0.0)) return 0.0;
  double lo = 0.0;
  double hi = std::max(c.s_0, c.E_el * eps_eq);
  if (!(hi > 0.0)) hi = 1.0;
  double f_hi = h(hi, nullptr);
  for (int i = 0; f_hi < 0.0; ++i) {
    if (i > 2000 || !std::isfinite(f_hi)) {
      throw SolverError("total-deformation inversion could not bracket the root", -f_hi);
    }
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    f_hi = h(hi, nullptr);
  }
  const double scale = std::max({eps_eq, std::sqrt(w_dev2), 1e-300});
  double s = 0.5 * (lo + hi);
  double f = 0.0;
  for (int it = 0; it < 100; ++it) {
    double slope = 0.0;
    f = h(s, &slope);
    if (std::abs(f) <= 1e-15 * scale || hi - lo <= 1e-15 * hi) return s;
    if (f < 0.0) {
      lo = s;
    } else {
      hi = s;
    }
    double next = slope > 0.0 ? s - f / slope : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    s = next;
  }
  throw SolverError("total-deformation inversion did not converge in 100 iterations", std::abs(f));
}

StressState total_deformation_stress(const StrainState& e, const OntologyConstants& c) {
  const Matrix3 e_dev = e.phonon.deviator().matrix();
  const Matrix3 w_dev = e.phason.deviator().matrix();
  const double eps_kk = e.phonon.trace();
  const double w_kk = e.phason.trace();
  const double eps_eq = std::sqrt(2.0 / 3.0 * e_dev.squaredNorm());
  const double k_kk = 3.0 * c.bulk * w_kk;
  const double s = invert_effective(eps_eq, w_dev.squaredNorm(), k_kk, c);
  const double r = s > 0.0 ? 2.0 * s / (3.0 * effective_strain(s, c)) : 2.0 * c.E_el / 3.0;
  StressState out;
  out.phonon = PhononTensor(r * e_dev + c.bulk * eps_kk * Matrix3::Identity());
  out.phason = PhasonTensor(r * w_dev + c.bulk * w_kk * Matrix3::Identity());
  return out;
}

StrainState minus_plastic(const StrainState& e, const PlasticStrains* plastic, std::size_t i) {
  if (!plastic) return e;
  StrainState out = e;
  if (i < plastic->phonon.size()) out.phonon = e.phonon - plastic->phonon[i];
  if (i < plastic->phason.size()) out.phason = e.phason - plastic->phason[i];
  return out;
}

Eigen::Matrix3d phonon_block(const Eigen::Vector3d& bk, const Eigen::Vector3d& bl, double lambda,
                             double g) {
  return lambda * bk * bl.transpose() + g * bk.dot(bl) * Eigen::Matrix3d::Identity() +
         g * bl * bk.transpose();
}

Eigen::Matrix3d phason_block(const Eigen::Vector3d& bk, const Eigen::Vector3d& bl, double lambda,
                             double g) {
  return lambda * bk * bl.transpose() + 2.0 * g * bk.dot(bl) * Eigen::Matrix3d::Identity();
}

}  // namespace

StressState node_stress(const StrainState& strain, const OntologyConstants& c, StressLaw law) {
  return law == StressLaw::elastic ? elastic_stress(strain, c) : total_deformation_stress(strain, c);
}

void Models::validate() const {
  constants.validate();
  yield.validate();
  flow.validate();
  if (creep_enabled) creep.validate();
}

void SolverOptions::validate() const {
  if (!(tol > 0.0)) throw ValidationError("solver.tol must be > 0");
  if (max_iter < 1) throw ValidationError("solver.max_iter must be >= 1");
  if (!(damping > 0.0 && damping <= 1.0)) throw ValidationError("solver.damping must be in (0, 1]");
}

namespace detail {

EquilibriumSystem::EquilibriumSystem(const FsnLattice& lattice, const Models& models)
    : lattice_(lattice), models_(models), stencils_(build_stencils(lattice)),
      phi_(stiffness_factors(lattice)) {
  const std::size_t n = lattice.nodes.size();
  flagged_.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) flagged_[i] = stencils_.stencils[i].degenerate;

  // Components of the intact graph need three non-collinear prescribed nodes
  // to pin rigid motion; anything less is a loose fragment and carries no load.
  const auto nbrs = lattice.intact_neighbours();
  std::vector<bool> seen(n, false);
  for (std::size_t start = 0; start < n; ++start) {
    if (seen[start]) continue;
    std::vector<std::size_t> members{start};
    seen[start] = true;
    for (std::size_t head = 0; head < members.size(); ++head) {
      for (std::size_t j : nbrs[members[head]]) {
        if (!seen[j]) {
          seen[j] = true;
          members.push_back(j);
        }
      }
    }
    bool has_interior = false;
    std::vector<Eigen::Vector3d> fixed;
    for (std::size_t m : members) {
      if (lattice.is_boundary(m) || flagged_[m]) {
        fixed.push_back(lattice.nodes[m].position);
      } else {
        has_interior = true;
      }
    }
    if (!has_interior) continue;
    bool pinned = false;
    if (fixed.size() >= 3) {
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& x : fixed) cov += (x - fixed.front()) * (x - fixed.front()).transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig;
      eig.computeDirect(cov, Eigen::EigenvaluesOnly);
      pinned = eig.eigenvalues()(1) > 1e-9 * eig.eigenvalues()(2);
    }
    if (!pinned) {
      for (std::size_t m : members) flagged_[m] = true;
    }
  }
  // Near-singular directions that survive the pinning check (typically
  // heavily fractured fragments) show up as vanishing pivots; their nodes are
  // frozen like loose fragments and the operator is assembled again.
  const double phason_scale =
      models.law == StressLaw::elastic ? models.constants.phason_coupling : 1.0;
  for (std::size_t round = 0;; ++round) {
    assemble();
    if (unknown_nodes_.empty()) break;
    std::vector<std::size_t> weak;
    phonon_ = factorise(1.0, false, weak);
    if (weak.empty() && phason_scale > 0.0) phason_ = factorise(phason_scale, true, weak);
    if (weak.empty()) break;
    if (round >= n) throw SolverError("linear elastic operator is singular", 0.0);
    for (std::size_t node : weak) flagged_[node] = true;
  }
  flagged_count_ = static_cast<std::size_t>(std::count(flagged_.begin(), flagged_.end(), true));
}

void EquilibriumSystem::assemble() {
  const std::size_t n = lattice_.nodes.size();
  coupling_.assign(n, Coupling{});
  defect_.assign(n, Eigen::Vector3d::Zero());
  for (std::size_t m = 0; m < n; ++m) {
    if (flagged_[m]) continue;
    const Stencil& st = stencils_.stencils[m];
    Coupling& c = coupling_[m];
    c.nodes.assign(1, m);
    c.coef.assign(1, Eigen::Vector3d::Zero());
    for (std::size_t k = 0; k < st.nodes.size(); ++k) {
      c.nodes.push_back(st.nodes[k]);
      c.coef.push_back(st.weights[k]);
      c.coef.front() -= st.weights[k];
    }
    for (std::size_t k = 0; k < c.nodes.size(); ++k) defect_[c.nodes[k]] += c.coef[k];
  }

  unknown_.assign(n, -1);
  unknown_nodes_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (!lattice_.is_boundary(i) && !flagged_[i]) {
      unknown_[i] = static_cast<long>(unknown_nodes_.size());
      unknown_nodes_.push_back(i);
    }
  }
  phonon_.reset();
  phason_.reset();
}

std::unique_ptr<EquilibriumSystem::Factor> EquilibriumSystem::factorise(
    double scale, bool phason, std::vector<std::size_t>& weak) const {
  const double g = models_.constants.shear_modulus();
  const double lambda = models_.constants.lame_lambda();
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t m = 0; m < coupling_.size(); ++m) {
    if (flagged_[m]) continue;
    const Coupling& c = coupling_[m];
    for (std::size_t a = 0; a < c.nodes.size(); ++a) {
      const long row = unknown_[c.nodes[a]];
      if (row < 0) continue;
      for (std::size_t b = 0; b < c.nodes.size(); ++b) {
        const long col = unknown_[c.nodes[b]];
        if (col < 0) continue;
        const Eigen::Matrix3d block =
            scale * phi_[m] *
            (phason ? phason_block(c.coef[a], c.coef[b], lambda, g)
                    : phonon_block(c.coef[a], c.coef[b], lambda, g));
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            triplets.emplace_back(static_cast<int>(3 * row) + i, static_cast<int>(3 * col) + j,
                                  block(i, j));
      }
    }
  }
  const int dim = static_cast<int>(3 * unknown_nodes_.size());
  SparseMatrix mat(dim, dim);
  mat.setFromTriplets(triplets.begin(), triplets.end());
  auto factor = std::make_unique<Factor>();
  factor->compute(mat);
  // A failed factorisation stops at the first bad pivot; later entries are stale.
  const auto& d = factor->vectorD();
  const auto& perm = factor->permutationP().indices();
  std::vector<int> original(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) original[static_cast<std::size_t>(perm(j))] = j;
  const bool failed = factor->info() != Eigen::Success;
  const double largest = d.cwiseAbs().maxCoeff();
  for (int i = 0; i < dim; ++i) {
    if (!(d(i) > kPivotTolerance * largest)) {
      weak.push_back(unknown_nodes_[static_cast<std::size_t>(original[static_cast<std::size_t>(i)] / 3)]);
      if (failed) break;
    }
  }
  return factor;
}

StressState EquilibriumSystem::node_law(const StrainState& strain, const PlasticStrains* plastic,
                                        std::size_t node) const {
  const StressState s =
      node_stress(minus_plastic(strain, plastic, node), models_.constants, models_.law);
  return StressState{s.phonon * phi_[node], s.phason * phi_[node]};
}

std::vector<StressState> EquilibriumSystem::stresses(const StrainField& strains,
                                                     const PlasticStrains* plastic) const {
  std::vector<StressState> out(strains.strains.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!flagged_[i]) out[i] = node_law(strains.strains[i], plastic, i);
  }
  return out;
}

std::vector<StressState> EquilibriumSystem::stresses(const LatticeField& field,
                                                     const PlasticStrains* plastic) const {
  return stresses(compute_strains(stencils_, field), plastic);
}

EquilibriumResult EquilibriumSystem::solve(const AffineBoundary& boundary,
                                           const SolverOptions& options,
                                           const PlasticStrains* plastic,
                                           const LatticeField* warm) const {
  options.validate();
  const std::size_t n = lattice_.nodes.size();
  EquilibriumResult result;
  result.field = LatticeField::affine(lattice_, boundary.phonon_gradient, boundary.phason_gradient);
  if (warm && warm->u.size() == n && warm->w.size() == n) {
    for (std::size_t i : unknown_nodes_) {
      result.field.u[i] = warm->u[i];
      result.field.w[i] = warm->w[i];
    }
  } else if (options.initial_guess == InitialGuess::zero) {
    for (std::size_t i : unknown_nodes_) {
      result.field.u[i].setZero();
      result.field.w[i].setZero();
    }
  }

  // Reference stresses do not change during the iteration.
  const StrainState affine{PhononTensor(boundary.phonon_gradient),
                           PhasonTensor(boundary.phason_gradient)};
  std::vector<StressState> reference(unknown_nodes_.size());
  for (std::size_t k = 0; k < unknown_nodes_.size(); ++k) {
    reference[k] = node_law(affine, plastic, unknown_nodes_[k]);
  }

  const int dim = static_cast<int>(3 * unknown_nodes_.size());
  Eigen::VectorXd ru(dim), rw(dim);
  LatticeField best = result.field;
  double best_norm = std::numeric_limits<double>::infinity();
  double threshold = options.tol;
  for (int it = 0;; ++it) {
    const auto stress = stresses(result.field, plastic);
    ru.setZero();
    rw.setZero();
    for (std::size_t m = 0; m < n; ++m) {
      if (flagged_[m]) continue;
      const Coupling& c = coupling_[m];
      for (std::size_t a = 0; a < c.nodes.size(); ++a) {
        const long row = unknown_[c.nodes[a]];
        if (row < 0) continue;
        ru.segment<3>(3 * row) += stress[m].phonon.matrix() * c.coef[a];
        rw.segment<3>(3 * row) += stress[m].phason.matrix() * c.coef[a];
      }
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < unknown_nodes_.size(); ++k) {
      const auto idx = static_cast<Eigen::Index>(3 * k);
      const Eigen::Vector3d& g = defect_[unknown_nodes_[k]];
      ru.segment<3>(idx) -= reference[k].phonon.matrix() * g;
      rw.segment<3>(idx) -= reference[k].phason.matrix() * g;
      norm = std::max(norm, std::sqrt(ru.segment<3>(idx).squaredNorm() +
                                      rw.segment<3>(idx).squaredNorm()));
    }
    if (!std::isfinite(norm)) break;
    if (it == 0) threshold = options.tol * std::max(1.0, norm);
    if (norm < best_norm) {
      best_norm = norm;
      best = result.field;
    }
    if (norm < threshold) {
      result.iterations = it;
      result.residual = norm;
      return result;
    }
    if (it >= options.max_iter) break;
    const Eigen::VectorXd du = phonon_->solve(ru);
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(dim);
    if (phason_) dw = phason_->solve(rw);
    for (std::size_t k = 0; k < unknown_nodes_.size(); ++k) {
      const std::size_t i = unknown_nodes_[k];
      const auto idx = static_cast<Eigen::Index>(3 * k);
      result.field.u[i] -= options.damping * du.segment<3>(idx);
      result.field.w[i] -= options.damping * dw.segment<3>(idx);
    }
  }
  throw NonConvergenceError(fmt::format("equilibrium did not converge: residual {:.3e}", best_norm) +
                                " after " + std::to_string(options.max_iter) + " iterations",
                            best_norm, std::move(best), options.max_iter);
}

}  // namespace detail

EquilibriumResult solve_equilibrium(const FsnLattice& lattice, const AffineBoundary& boundary,
                                    const Models& models, const SolverOptions& options,
                                    const PlasticStrains* plastic) {
  models.validate();
  options.validate();
  const detail::EquilibriumSystem system(lattice, models);
  return system.solve(boundary, options, plastic, nullptr);
}

}  // namespace fsn::solver
