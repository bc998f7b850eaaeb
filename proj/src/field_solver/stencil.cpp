#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "fsn/field_solver.hpp"

namespace fsn::solver {
namespace {

constexpr double kRankTolerance = 1e-3;

// Fills weights for the given neighbour set; false when the offsets do not
// span three dimensions.
bool fit(const FsnLattice& lattice, std::size_t node, const std::vector<std::size_t>& ring,
         Stencil& out) {
  if (ring.size() < 3) return false;
  const Eigen::Vector3d& xi = lattice.nodes[node].position;
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  std::vector<Eigen::Vector3d> offsets;
  std::vector<double> w;
  offsets.reserve(ring.size());
  for (std::size_t j : ring) {
    const Eigen::Vector3d dx = lattice.nodes[j].position - xi;
    const double len2 = dx.squaredNorm();
    if (!(len2 > 0.0)) return false;
    offsets.push_back(dx);
    w.push_back(1.0 / len2);
    m += w.back() * dx * dx.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig;
  eig.computeDirect(m, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  if (!(ev(2) > 0.0) || ev(0) < kRankTolerance * ev(2)) return false;
  const Eigen::Matrix3d inv = m.inverse();
  out.nodes = ring;
  out.weights.clear();
  for (std::size_t k = 0; k < ring.size(); ++k) out.weights.push_back(w[k] * (inv * offsets[k]));
  return true;
}

}  // namespace

LatticeField LatticeField::zero(std::size_t nodes) {
  LatticeField f;
  f.u.assign(nodes, Eigen::Vector3d::Zero());
  f.w.assign(nodes, Eigen::Vector3d::Zero());
  return f;
}

LatticeField LatticeField::affine(const FsnLattice& lattice, const Matrix3& phonon_gradient,
                                  const Matrix3& phason_gradient) {
  LatticeField f;
  f.u.reserve(lattice.nodes.size());
  f.w.reserve(lattice.nodes.size());
  for (const auto& n : lattice.nodes) {
    f.u.push_back(phonon_gradient * n.position);
    f.w.push_back(phason_gradient * n.position);
  }
  return f;
}

StencilSet build_stencils(const FsnLattice& lattice) {
  const auto nbrs = lattice.intact_neighbours();
  StencilSet set;
  set.stencils.resize(lattice.nodes.size());
  for (std::size_t i = 0; i < lattice.nodes.size(); ++i) {
    Stencil& st = set.stencils[i];
    if (fit(lattice, i, nbrs[i], st)) continue;
    std::vector<std::size_t> ring = nbrs[i];
    for (std::size_t j : nbrs[i]) ring.insert(ring.end(), nbrs[j].begin(), nbrs[j].end());
    std::sort(ring.begin(), ring.end());
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
    ring.erase(std::remove(ring.begin(), ring.end(), i), ring.end());
    if (fit(lattice, i, ring, st)) {
      st.extended = true;
      continue;
    }
    st = Stencil{};
    st.degenerate = true;
    ++set.degenerate_count;
  }
  return set;
}

StrainField compute_strains(const FsnLattice& lattice, const LatticeField& field) {
  return compute_strains(build_stencils(lattice), field);
}

StrainField compute_strains(const StencilSet& stencils, const LatticeField& field) {
  const std::size_t n = stencils.stencils.size();
  if (field.u.size() != n || field.w.size() != n) {
    throw ValidationError("field size does not match the lattice");
  }
  StrainField out;
  out.strains.resize(n);
  out.flagged.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const Stencil& st = stencils.stencils[i];
    if (st.degenerate) {
      out.flagged[i] = true;
      ++out.warnings;
      continue;
    }
    Matrix3 gu = Matrix3::Zero();
    Matrix3 gw = Matrix3::Zero();
    for (std::size_t k = 0; k < st.nodes.size(); ++k) {
      const std::size_t j = st.nodes[k];
      gu += (field.u[j] - field.u[i]) * st.weights[k].transpose();
      gw += (field.w[j] - field.w[i]) * st.weights[k].transpose();
    }
    out.strains[i].phonon = PhononTensor(gu);
    out.strains[i].phason = PhasonTensor(gw);
  }
  return out;
}

Residual equilibrium_residual(const FsnLattice& lattice, std::span<const StressState> stress) {
  return equilibrium_residual(lattice, build_stencils(lattice), stress);
}

Residual equilibrium_residual(const FsnLattice& lattice, const StencilSet& stencils,
                              std::span<const StressState> stress) {
  const std::size_t n = lattice.nodes.size();
  if (stress.size() != n || stencils.stencils.size() != n) {
    throw ValidationError("stress field size does not match the lattice");
  }
  Residual r;
  r.phonon.assign(n, Eigen::Vector3d::Zero());
  r.phason.assign(n, Eigen::Vector3d::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    const Stencil& st = stencils.stencils[i];
    if (st.degenerate) continue;
    for (std::size_t k = 0; k < st.nodes.size(); ++k) {
      const std::size_t j = st.nodes[k];
      r.phonon[i] += (stress[j].phonon.matrix() - stress[i].phonon.matrix()) * st.weights[k];
      r.phason[i] += (stress[j].phason.matrix() - stress[i].phason.matrix()) * st.weights[k];
    }
    if (!lattice.is_boundary(i)) {
      r.norm = std::max(r.norm, std::sqrt(r.phonon[i].squaredNorm() + r.phason[i].squaredNorm()));
    }
  }
  return r;
}

std::vector<double> stiffness_factors(const FsnLattice& lattice) {
  std::vector<double> sum(lattice.nodes.size(), 0.0);
  for (const auto& b : lattice.bonds) {
    if (!b.intact) continue;
    sum[b.a] += b.stiffness;
    sum[b.b] += b.stiffness;
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const int degree = lattice.nominal_degree(i);
    sum[i] = degree > 0 ? sum[i] / degree : 1.0;
  }
  return sum;
}

}  // namespace fsn::solver
