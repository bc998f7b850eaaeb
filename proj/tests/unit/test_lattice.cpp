#include <doctest.h>

#include <cmath>
#include <queue>

#include "fsn/error.hpp"
#include "fsn/fsn_lattice.hpp"

using namespace fsn::lattice;
using fsn::ingest::FdTag;
using fsn::ingest::FormalContext;

namespace {

std::vector<std::size_t> bfs_shells(const FsnLattice& lat) {
  const auto nb = lat.intact_neighbours();
  std::vector<int> dist(lat.nodes.size(), -1);
  std::queue<std::size_t> q;
  dist[0] = 0;
  q.push(0);
  while (!q.empty()) {
    const auto v = q.front();
    q.pop();
    for (auto w : nb[v]) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
    }
  }
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    REQUIRE(dist[i] >= 0);
    CHECK(dist[i] == lat.nodes[i].generation);
    if (counts.size() <= static_cast<std::size_t>(dist[i])) counts.resize(dist[i] + 1);
    ++counts[dist[i]];
  }
  return counts;
}

FdTag tag_on(std::string ref, double e = 0.0) {
  FdTag t;
  t.context_ref = ref;
  t.resource = ref;
  t.exposition = e;
  return t;
}

}  // namespace

TEST_CASE("construction examples") {
  auto a = build_bethe({3, 1, 0});
  CHECK(a.nodes.size() == 4);
  CHECK(a.bonds.size() == 3);
  CHECK(build_bethe({3, 4, 0}).nodes.size() == 46);
  const auto path = build_bethe({2, 5, 0});
  CHECK(path.nodes.size() == 11);
  for (std::size_t i = 0; i < path.nodes.size(); ++i) CHECK(path.intact_neighbours()[i].size() <= 2);
  CHECK(build_bethe({2, 0, 0}).nodes.size() == 1);
}

TEST_CASE("shell counts match breadth-first enumeration") {
  CHECK(shell_count(3, 1) == 3);
  CHECK(shell_count(3, 2) == 6);
  CHECK(shell_count(4, 3) == 36);
  for (int z = 2; z <= 6; ++z) {
    for (int k = 0; k <= 5; ++k) {
      const auto lat = build_bethe({z, k, 1});
      const auto counts = bfs_shells(lat);
      REQUIRE(counts.size() == static_cast<std::size_t>(k + 1));
      CHECK(counts[0] == 1);
      for (int g = 1; g <= k; ++g) CHECK(counts[g] == shell_count(z, g));
      CHECK(lat.nodes.size() == projected_node_count(z, k));
      CHECK(lat.bonds.size() == lat.nodes.size() - 1);
    }
  }
  CHECK_THROWS_AS(shell_count(3, 0), fsn::DomainError);
  CHECK_THROWS_AS(shell_count(1, 2), fsn::DomainError);
}

TEST_CASE("interior nodes have full coordination") {
  const auto lat = build_bethe({4, 3, 5});
  const auto nb = lat.intact_neighbours();
  for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
    CHECK(lat.nominal_degree(i) == static_cast<int>(nb[i].size()));
    CHECK(nb[i].size() == (lat.is_boundary(i) ? 1u : 4u));
  }
}

TEST_CASE("layout has unit bonds and respects the seed") {
  const auto a = build_bethe({3, 4, 9});
  const auto b = build_bethe({3, 4, 9});
  const auto c = build_bethe({3, 4, 10});
  for (const auto& bond : a.bonds) {
    CHECK((a.nodes[bond.a].position - a.nodes[bond.b].position).norm() == doctest::Approx(1.0));
  }
  bool differ = false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].position == b.nodes[i].position);
    differ = differ || a.nodes[i].position != c.nodes[i].position;
  }
  CHECK(differ);
}

TEST_CASE("stiffness spread stays in range") {
  const auto lat = build_bethe({3, 5, 2}, {100000, 2.0, 0.25});
  for (const auto& b : lat.bonds) {
    CHECK(b.stiffness >= 1.5);
    CHECK(b.stiffness <= 2.5);
  }
}

TEST_CASE("validation and size refusal") {
  CHECK_THROWS_WITH_AS(build_bethe({1, 3, 0}), doctest::Contains("z"), fsn::ValidationError);
  CHECK_THROWS_AS(build_bethe({3, -1, 0}), fsn::ValidationError);
  try {
    build_bethe({3, 10, 0}, {1000});
    FAIL("expected refusal");
  } catch (const fsn::RefusalError& e) {
    CHECK(e.measured() == static_cast<double>(projected_node_count(3, 10)));
  }
  CHECK(projected_node_count(6, 200) == UINT64_MAX);
}

TEST_CASE("generation distance") {
  const auto lat = build_bethe({3, 5, 0});
  const std::size_t g1 = 1, g5 = lat.nodes.size() - 1;
  REQUIRE(lat.nodes[g5].generation == 5);
  CHECK(generation_distance(lat, g1, g1 + 1) == 0.0);
  CHECK(generation_distance(lat, g1, g5) == doctest::Approx(2.0));
  CHECK(generation_distance(lat, 0, 4) == doctest::Approx(std::sqrt(2.0)));
  CHECK(generation_distance(lat, 0, 4, GenerationMetric::difference) == 2.0);
}

TEST_CASE("embedding") {
  SUBCASE("empty attribute set") {
    FormalContext c({"u"}, {});
    const auto x = embed(tag_on("u", 0.0), c);
    CHECK(x.x() == 0.0);
    CHECK(x.y() == 0.0);
    CHECK(x.z() >= 0.0);
    CHECK(x.z() < 1.0);
  }
  SUBCASE("full intent") {
    FormalContext c({"u"}, {"d1", "d2"});
    c.add_incidence(0, 0);
    c.add_incidence(0, 1);
    const auto x = embed(tag_on("u", 1.0), c);
    CHECK(x.x() == 1.0);
    CHECK(x.y() == 1.0);
  }
  SUBCASE("one of four") {
    FormalContext c({"u"}, {"d1", "d2", "d3", "d4"});
    c.add_incidence(0, 2);
    const auto x = embed(tag_on("u", 0.5), c);
    CHECK(x.x() == 0.25);
    CHECK(x.y() == 0.5);
    CHECK(x.z() == uri_coordinate("u"));
  }
  SUBCASE("unknown reference") {
    FormalContext c({"u"}, {});
    CHECK_THROWS_AS(embed(tag_on("v"), c), fsn::ValidationError);
  }
  CHECK(embedding_distance({0, 0, 0}, {3, 4, 0}) == doctest::Approx(5.0));
  CHECK(embedding_distance({0, 0, 0}, {1, 1, 1}, Signature::minkowski) == doctest::Approx(1.0));
}

TEST_CASE("tag assignment") {
  const auto lat = build_bethe({3, 1, 3});
  std::vector<FdTag> tags(4);
  for (std::size_t i = 0; i < 4; ++i) tags[i].id = i;
  const auto bfs = assign_tags(lat, tags);
  for (std::size_t i = 0; i < 4; ++i) CHECK(bfs.nodes[i].tag == i);
  const auto none = assign_tags(lat, {});
  for (const auto& n : none.nodes) CHECK_FALSE(n.tag.has_value());
  const auto r1 = assign_tags(lat, tags, AssignStrategy::random);
  const auto r2 = assign_tags(lat, tags, AssignStrategy::random);
  std::vector<bool> seen(4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r1.nodes[i].tag == r2.nodes[i].tag);
    REQUIRE(r1.nodes[i].tag.has_value());
    seen[*r1.nodes[i].tag] = true;
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool s) { return s; }));
}

TEST_CASE("ontology match") {
  FormalContext c({"r1", "r2", "r3", "r4"}, {"d1", "d2", "d3", "d4"});
  c.add_incidence(0, 0);
  c.add_incidence(0, 1);
  c.add_incidence(1, 0);
  c.add_incidence(1, 2);
  c.add_incidence(2, 3);
  CHECK(ontology_match(tag_on("r1"), tag_on("r1"), c) == 1.0);
  CHECK(ontology_match(tag_on("r1"), tag_on("r3"), c) == 0.0);
  CHECK(ontology_match(tag_on("r1"), tag_on("r2"), c) == doctest::Approx(1.0 / 3.0));
  CHECK(ontology_match(tag_on("r4"), tag_on("r4"), c) == 0.0);
}

TEST_CASE("lattice json round trip and validation") {
  auto lat = build_bethe({3, 3, 4}, {1000, 1.0, 0.3});
  lat.bonds[2].intact = false;
  const auto back = lattice_from_json(nlohmann::json::parse(lattice_to_json(lat).dump()));
  REQUIRE(back.nodes.size() == lat.nodes.size());
  CHECK(back.spec == lat.spec);
  for (std::size_t i = 0; i < lat.nodes.size(); ++i) CHECK(back.nodes[i].position == lat.nodes[i].position);
  for (std::size_t i = 0; i < lat.bonds.size(); ++i) {
    CHECK(back.bonds[i].stiffness == lat.bonds[i].stiffness);
    CHECK(back.bonds[i].intact == lat.bonds[i].intact);
  }
  auto j = nlohmann::json::parse(lattice_to_json(lat).dump());
  j["bonds"][0]["b"] = 999;
  CHECK_THROWS_AS(lattice_from_json(j), fsn::ValidationError);
}
