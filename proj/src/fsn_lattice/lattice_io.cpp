#include <cmath>

#include "fsn/error.hpp"
#include "fsn/fsn_lattice.hpp"

namespace fsn::lattice {

nlohmann::ordered_json lattice_to_json(const FsnLattice& lattice) {
  nlohmann::ordered_json j;
  j["spec"] = {{"z", lattice.spec.z}, {"k_max", lattice.spec.k_max}, {"seed", lattice.spec.seed}};
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : lattice.nodes) {
    nlohmann::ordered_json node;
    node["id"] = n.id;
    node["gen"] = n.generation;
    node["tag"] = n.tag ? nlohmann::ordered_json(*n.tag) : nlohmann::ordered_json(nullptr);
    node["xyz"] = {n.position.x(), n.position.y(), n.position.z()};
    nodes.push_back(std::move(node));
  }
  j["nodes"] = std::move(nodes);
  auto bonds = nlohmann::ordered_json::array();
  for (const auto& b : lattice.bonds) {
    bonds.push_back(nlohmann::ordered_json{
        {"a", b.a}, {"b", b.b}, {"stiffness", b.stiffness}, {"intact", b.intact}});
  }
  j["bonds"] = std::move(bonds);
  return j;
}

FsnLattice lattice_from_json(const nlohmann::json& j) {
  FsnLattice lattice;
  try {
    const auto& spec = j.at("spec");
    lattice.spec.z = spec.at("z").get<int>();
    lattice.spec.k_max = spec.at("k_max").get<int>();
    lattice.spec.seed = spec.at("seed").get<std::uint64_t>();
    lattice.spec.validate();

    for (const auto& item : j.at("nodes")) {
      Node n;
      n.id = item.at("id").get<std::size_t>();
      n.generation = item.at("gen").get<int>();
      if (!item.at("tag").is_null()) n.tag = item.at("tag").get<std::size_t>();
      const auto xyz = item.at("xyz").get<std::vector<double>>();
      if (xyz.size() != 3) throw ValidationError("node xyz must have 3 components");
      n.position = Eigen::Vector3d(xyz[0], xyz[1], xyz[2]);
      if (n.id != lattice.nodes.size()) {
        throw ValidationError("node ids must be contiguous from 0 (saw " + std::to_string(n.id) + ")");
      }
      if (n.generation < 0 || n.generation > lattice.spec.k_max) {
        throw ValidationError("node " + std::to_string(n.id) + " has generation out of range");
      }
      if (!n.position.allFinite()) {
        throw ValidationError("node " + std::to_string(n.id) + " has non-finite coordinates");
      }
      lattice.nodes.push_back(std::move(n));
    }
    for (const auto& item : j.at("bonds")) {
      Bond b;
      b.a = item.at("a").get<std::size_t>();
      b.b = item.at("b").get<std::size_t>();
      b.stiffness = item.at("stiffness").get<double>();
      b.intact = item.at("intact").get<bool>();
      if (b.a >= lattice.nodes.size() || b.b >= lattice.nodes.size() || b.a == b.b) {
        throw ValidationError("bond " + std::to_string(lattice.bonds.size()) +
                              " has invalid endpoints");
      }
      if (!(b.stiffness > 0.0) || !std::isfinite(b.stiffness)) {
        throw ValidationError("bond " + std::to_string(lattice.bonds.size()) +
                              " stiffness must be positive");
      }
      lattice.bonds.push_back(b);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed lattice JSON: ") + e.what());
  }
  return lattice;
}

}  // namespace fsn::lattice
