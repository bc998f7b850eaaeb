#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "fsn/error.hpp"
#include "fsn/fsn_lattice.hpp"
#include "fsn/random.hpp"

namespace fsn::lattice {
namespace {

constexpr int kLayoutCandidates = 24;

Eigen::Vector3d random_unit(Rng& rng) {
  const double z = 2.0 * uniform01(rng) - 1.0;
  const double phi = 2.0 * std::numbers::pi * uniform01(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

// Ratio of extreme eigenvalues of sum d d^T; 1 for an isotropic star,
// 0 when the offsets are coplanar.
double spread_quality(const std::vector<Eigen::Vector3d>& dirs, const Eigen::Vector3d* back) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  for (const auto& d : dirs) m += d * d.transpose();
  if (back) m += (*back) * back->transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig;
  eig.computeDirect(m, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return ev(2) > 0.0 ? std::max(0.0, ev(0)) / ev(2) : 0.0;
}

std::vector<Eigen::Vector3d> child_directions(Rng& rng, int count, const Eigen::Vector3d* back) {
  std::vector<Eigen::Vector3d> best;
  double best_quality = -1.0;
  std::vector<Eigen::Vector3d> candidate(static_cast<std::size_t>(count));
  for (int attempt = 0; attempt < kLayoutCandidates; ++attempt) {
    for (auto& d : candidate) d = random_unit(rng);
    const double q = spread_quality(candidate, back);
    if (q > best_quality) {
      best_quality = q;
      best = candidate;
    }
  }
  return best;
}

}  // namespace

void BetheLatticeSpec::validate() const {
  if (z < 2) throw ValidationError("coordination number z must be >= 2 (got " + std::to_string(z) + ")");
  if (k_max < 0) {
    throw ValidationError("maximum generation k_max must be >= 0 (got " + std::to_string(k_max) + ")");
  }
}

int FsnLattice::nominal_degree(std::size_t node) const {
  const int gen = nodes.at(node).generation;
  if (spec.k_max == 0) return 0;
  return gen == spec.k_max ? 1 : spec.z;
}

std::vector<std::vector<std::size_t>> FsnLattice::incident_bonds() const {
  std::vector<std::vector<std::size_t>> incident(nodes.size());
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    incident[bonds[b].a].push_back(b);
    incident[bonds[b].b].push_back(b);
  }
  return incident;
}

std::vector<std::vector<std::size_t>> FsnLattice::intact_neighbours() const {
  std::vector<std::vector<std::size_t>> nbrs(nodes.size());
  for (const auto& bond : bonds) {
    if (!bond.intact) continue;
    nbrs[bond.a].push_back(bond.b);
    nbrs[bond.b].push_back(bond.a);
  }
  for (auto& list : nbrs) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return nbrs;
}

std::uint64_t shell_count(int z, int k) {
  if (z < 2) throw DomainError("shell_count requires z >= 2");
  if (k < 1) throw DomainError("shell_count requires k >= 1");
  std::uint64_t n = static_cast<std::uint64_t>(z);
  for (int i = 1; i < k; ++i) {
    if (n > UINT64_MAX / static_cast<std::uint64_t>(z - 1)) {
      throw DomainError("shell_count overflows 64 bits");
    }
    n *= static_cast<std::uint64_t>(z - 1);
  }
  return n;
}

std::uint64_t projected_node_count(int z, int k_max) {
  std::uint64_t total = 1;
  std::uint64_t shell = 1;
  for (int k = 1; k <= k_max; ++k) {
    const std::uint64_t factor = static_cast<std::uint64_t>(k == 1 ? z : z - 1);
    if (factor != 0 && shell > UINT64_MAX / factor) return UINT64_MAX;
    shell *= factor;
    if (total > UINT64_MAX - shell) return UINT64_MAX;
    total += shell;
  }
  return total;
}

FsnLattice build_bethe(const BetheLatticeSpec& spec, const BuildOptions& options) {
  spec.validate();
  if (!(options.stiffness > 0.0) || !(options.stiffness_spread >= 0.0) ||
      !(options.stiffness_spread < 1.0)) {
    throw ValidationError("bond stiffness must be > 0 with spread in [0, 1)");
  }
  const auto projected = projected_node_count(spec.z, spec.k_max);
  if (projected > options.max_nodes) {
    throw RefusalError("projected node count " + std::to_string(projected) +
                           " exceeds the bound of " + std::to_string(options.max_nodes),
                       static_cast<double>(projected));
  }

  FsnLattice lattice;
  lattice.spec = spec;
  lattice.nodes.reserve(projected);
  lattice.bonds.reserve(projected - 1);

  Rng layout_rng(spec.seed);
  Rng stiffness_rng(splitmix64(spec.seed ^ 0x5EEDB0D5ULL));
  // Unit direction from each node towards its parent (origin has none).
  std::vector<Eigen::Vector3d> towards_parent;
  towards_parent.reserve(projected);

  lattice.nodes.push_back(Node{0, 0, std::nullopt, Eigen::Vector3d::Zero()});
  towards_parent.emplace_back(Eigen::Vector3d::Zero());

  std::size_t frontier_begin = 0, frontier_end = 1;
  for (int k = 1; k <= spec.k_max; ++k) {
    for (std::size_t parent = frontier_begin; parent < frontier_end; ++parent) {
      const int children = (k == 1) ? spec.z : spec.z - 1;
      const Eigen::Vector3d* back = (k == 1) ? nullptr : &towards_parent[parent];
      const auto dirs = child_directions(layout_rng, children, back);
      for (const auto& d : dirs) {
        const std::size_t id = lattice.nodes.size();
        lattice.nodes.push_back(Node{id, k, std::nullopt, lattice.nodes[parent].position + d});
        towards_parent.push_back(-d);
        double stiffness = options.stiffness;
        if (options.stiffness_spread > 0.0) {
          stiffness *= 1.0 + options.stiffness_spread * (2.0 * uniform01(stiffness_rng) - 1.0);
        }
        lattice.bonds.push_back(Bond{parent, id, stiffness, true});
      }
    }
    frontier_begin = frontier_end;
    frontier_end = lattice.nodes.size();
  }
  return lattice;
}

double generation_distance(const FsnLattice& lattice, std::size_t a, std::size_t b,
                           GenerationMetric metric) {
  if (a >= lattice.nodes.size() || b >= lattice.nodes.size()) {
    throw ValidationError("unknown node id " + std::to_string(std::max(a, b)));
  }
  const double diff =
      std::abs(static_cast<double>(lattice.nodes[a].generation - lattice.nodes[b].generation));
  return metric == GenerationMetric::sqrt_difference ? std::sqrt(diff) : diff;
}

FsnLattice assign_tags(const FsnLattice& lattice, std::span<const ingest::FdTag> tags,
                       AssignStrategy strategy) {
  if (tags.size() > lattice.nodes.size()) {
    throw ValidationError("cannot place " + std::to_string(tags.size()) + " tags on " +
                          std::to_string(lattice.nodes.size()) + " nodes");
  }
  FsnLattice out = lattice;
  for (auto& n : out.nodes) n.tag.reset();

  std::vector<std::size_t> order(out.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (strategy == AssignStrategy::random) {
    Rng rng(splitmix64(lattice.spec.seed ^ 0xA551C4EDULL));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_below(rng, i)]);
    }
  }
  for (std::size_t t = 0; t < tags.size(); ++t) out.nodes[order[t]].tag = tags[t].id;
  return out;
}

}  // namespace fsn::lattice
