#pragma once

// Bethe-lattice networks of FD tags: construction, shell populations,
// generation distances, (C, E, R) embedding and concept-based matching.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "fsn/tag_ingest.hpp"

namespace fsn::lattice {

struct BetheLatticeSpec {
  int z = 3;      // coordination number
  int k_max = 4;  // last generation
  std::uint64_t seed = 0;

  /// Throws ValidationError naming the violated constraint.
  void validate() const;
  bool operator==(const BetheLatticeSpec&) const = default;
};

struct BuildOptions {
  std::size_t max_nodes = 1'000'000;
  double stiffness = 1.0;
  /// Bond stiffness is drawn uniformly from stiffness * [1 - spread, 1 + spread].
  double stiffness_spread = 0.0;
};

struct Node {
  std::size_t id = 0;
  int generation = 0;
  std::optional<std::size_t> tag;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

struct Bond {
  std::size_t a = 0;
  std::size_t b = 0;
  double stiffness = 1.0;
  bool intact = true;
};

struct FsnLattice {
  BetheLatticeSpec spec;
  std::vector<Node> nodes;
  std::vector<Bond> bonds;

  std::size_t node_count() const noexcept { return nodes.size(); }

  /// Boundary nodes are the outermost shell (the origin when k_max = 0).
  bool is_boundary(std::size_t node) const { return nodes.at(node).generation == spec.k_max; }

  /// Degree the node had when the tree was built.
  int nominal_degree(std::size_t node) const;

  /// Bond ids incident to each node, intact or not.
  std::vector<std::vector<std::size_t>> incident_bonds() const;

  /// Neighbour node ids over intact bonds, sorted.
  std::vector<std::vector<std::size_t>> intact_neighbours() const;
};

/// 1 + sum_{k=1..k_max} z (z-1)^{k-1}, saturating at UINT64_MAX.
std::uint64_t projected_node_count(int z, int k_max);

/// Population of shell k: z (z-1)^{k-1}. Throws DomainError for k < 1 or z < 2.
std::uint64_t shell_count(int z, int k);

/// Breadth-first construction; node ids are assigned generation by
/// generation, so node 0 is the origin. Positions come from a seeded layout
/// with unit bond length whose per-node neighbour offsets are well spread in
/// three dimensions. Throws RefusalError when the projected node count
/// exceeds `options.max_nodes`.
FsnLattice build_bethe(const BetheLatticeSpec& spec, const BuildOptions& options = {});

enum class GenerationMetric { sqrt_difference, difference };

double generation_distance(const FsnLattice& lattice, std::size_t a, std::size_t b,
                           GenerationMetric metric = GenerationMetric::sqrt_difference);

/// Stable hash of a uri mapped into [0, 1).
double uri_coordinate(std::string_view uri);

/// (c, e, r): normalised size of the resource intent, the exposition, and
/// the uri coordinate. Throws ValidationError when context_ref is unknown.
Eigen::Vector3d embed(const ingest::FdTag& fd, const ingest::FormalContext& context);

enum class Signature { euclidean, minkowski };

/// Euclidean norm, or sqrt(|dc^2 + de^2 - dr^2|) for the (+,+,-) signature.
double embedding_distance(const Eigen::Vector3d& x, const Eigen::Vector3d& y,
                          Signature signature = Signature::euclidean);

enum class AssignStrategy { bfs, random };

/// Injective tag placement. "bfs" gives tag i to node i; "random" uses a
/// permutation seeded with spec.seed.
FsnLattice assign_tags(const FsnLattice& lattice, std::span<const ingest::FdTag> tags,
                       AssignStrategy strategy = AssignStrategy::bfs);

/// Jaccard overlap of the closed intents of the two tags' context objects.
/// Two empty intents score 0.
double ontology_match(const ingest::FdTag& a, const ingest::FdTag& b,
                      const ingest::FormalContext& context);

nlohmann::ordered_json lattice_to_json(const FsnLattice& lattice);
/// Validates ids, endpoints and stiffness; throws ValidationError.
FsnLattice lattice_from_json(const nlohmann::json& j);

}  // namespace fsn::lattice
