#include <doctest.h>

#include <sstream>

#include "fsn/error.hpp"
#include "fsn/fsn_lattice.hpp"
#include "fsn/tag_ingest.hpp"

using namespace fsn::ingest;

namespace {

TagEvent ev(std::string tag, std::string uri, std::uint64_t imp, std::uint64_t clk, std::int64_t ts = 0) {
  return TagEvent{std::move(tag), std::move(uri), ts, imp, clk};
}

ParseResult parse(const std::string& text) {
  std::istringstream in(text);
  return parse_events(in);
}

}  // namespace

TEST_CASE("single record maps field by field") {
  const auto r = parse(R"({"tag":"football","uri":"http://a/1","ts":100,"imp":10,"clk":5})");
  REQUIRE(r.events.size() == 1);
  CHECK(r.skipped() == 0);
  CHECK(r.events[0] == ev("football", "http://a/1", 10, 5, 100));
}

TEST_CASE("empty stream") {
  const auto r = parse("");
  CHECK(r.events.empty());
  CHECK(r.skipped() == 0);
}

TEST_CASE("invalid lines are skipped with their line number") {
  const auto r = parse(
      "{\"tag\":\"a\",\"uri\":\"u\",\"ts\":1,\"imp\":3,\"clk\":4}\n"
      "\n"
      "not json\n"
      "{\"tag\":\"a\",\"uri\":\"u\",\"ts\":1,\"imp\":-3,\"clk\":0}\n"
      "{\"tag\":\"\",\"uri\":\"u\",\"ts\":1,\"imp\":3,\"clk\":0}\n"
      "{\"tag\":\"a\",\"uri\":\"u\",\"ts\":1.5,\"imp\":3,\"clk\":0}\n"
      "{\"tag\":\"a\",\"uri\":\"u\",\"imp\":3,\"clk\":0}\n"
      "{\"tag\":\"a\",\"uri\":\"u\",\"ts\":-7,\"imp\":3,\"clk\":1}\n");
  CHECK(r.events.size() == 1);
  CHECK(r.events[0].timestamp == -7);
  REQUIRE(r.skipped() == 6);
  CHECK(r.errors[0].line == 1);
  CHECK(r.errors[1].line == 3);
  CHECK(r.errors[5].line == 7);
}

TEST_CASE("serialise then parse is the identity") {
  const auto e = ev("Tag \"quoted\" \xC3\xA9", "http://x/y?z=1", 12, 3, -5);
  const auto r = parse(serialize_event(e));
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0] == e);
}

TEST_CASE("missing file is an io error") {
  CHECK_THROWS_AS(parse_events_file("/nonexistent/events.jsonl"), fsn::IoError);
}

TEST_CASE("exposition pools clicks and impressions") {
  SUBCASE("single") {
    const std::vector<TagEvent> e{ev("t", "u", 10, 5)};
    CHECK(compute_exposition(e).exposition.at({"t", "u"}) == 0.5);
  }
  SUBCASE("no clicks") {
    const std::vector<TagEvent> e{ev("t", "u", 10, 0), ev("t", "u", 10, 0)};
    CHECK(compute_exposition(e).exposition.at({"t", "u"}) == 0.0);
  }
  SUBCASE("pooled") {
    const std::vector<TagEvent> e{ev("t", "u", 10, 5), ev("t", "u", 30, 5)};
    CHECK(compute_exposition(e).exposition.at({"t", "u"}) == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("zero impressions are undefined") {
    const std::vector<TagEvent> e{ev("t", "u", 0, 0), ev("s", "u", 2, 1)};
    const auto r = compute_exposition(e);
    CHECK(r.exposition.size() == 1);
    REQUIRE(r.undefined.size() == 1);
    CHECK(r.undefined[0] == PairKey{"t", "u"});
  }
}

TEST_CASE("tokenizer") {
  CHECK(tokenize("Football Match!") == std::vector<std::string>{"football", "match"});
  CHECK(tokenize("the a of").empty());
  CHECK(tokenize("airplane-traffic airplane") == std::vector<std::string>{"airplane", "traffic"});
  CHECK(tokenize("x y z").empty());
  CHECK(tokenize("R2D2 r2d2") == std::vector<std::string>{"r2d2"});
  const auto words = stopwords();
  CHECK(std::is_sorted(words.begin(), words.end()));
}

TEST_CASE("formal context construction") {
  SUBCASE("one event") {
    const std::vector<TagEvent> e{ev("football", "u1", 1, 0)};
    const auto c = build_formal_context(e);
    CHECK(c.objects() == std::vector<std::string>{"u1"});
    CHECK(c.attributes() == std::vector<std::string>{"football"});
    CHECK(c.incidence_count() == 1);
    CHECK(c.incident(0, 0));
  }
  SUBCASE("two tags on one resource") {
    const std::vector<TagEvent> e{ev("football", "u1", 1, 0), ev("match", "u1", 1, 0)};
    const auto c = build_formal_context(e);
    CHECK(c.object_count() == 1);
    CHECK(c.attribute_count() == 2);
    CHECK(c.incidence_count() == 2);
  }
  SUBCASE("empty") {
    const auto c = build_formal_context({});
    CHECK(c.object_count() == 0);
    CHECK(c.attribute_count() == 0);
    CHECK(c.incidence_count() == 0);
  }
  SUBCASE("swapped roles") {
    const std::vector<TagEvent> e{ev("football match", "u1", 1, 0)};
    const auto c = build_formal_context(e, ContextRoles::tags_as_objects);
    CHECK(c.objects() == std::vector<std::string>{"football", "match"});
    CHECK(c.attributes() == std::vector<std::string>{"u1"});
  }
  SUBCASE("row and column views agree") {
    const std::vector<TagEvent> e{ev("a b", "u1", 1, 0), ev("b c", "u2", 1, 0), ev("c", "u3", 1, 0)};
    const auto c = build_formal_context(e);
    for (std::size_t o = 0; o < c.object_count(); ++o)
      for (std::size_t a = 0; a < c.attribute_count(); ++a)
        CHECK(c.attributes_of(o).test(a) == c.objects_of(a).test(o));
  }
}

TEST_CASE("duplicate ids are rejected") {
  CHECK_THROWS_AS(FormalContext({"a", "a"}, {"d"}), fsn::ValidationError);
}

TEST_CASE("context json round trip") {
  const std::vector<TagEvent> e{ev("a b", "u1", 1, 0), ev("b c", "u2", 1, 0)};
  const auto c = build_formal_context(e);
  CHECK(context_from_json(context_to_json(c)) == c);
  CHECK_THROWS_AS(context_from_json(nlohmann::json::parse(R"({"objects":["a"]})")),
                  fsn::ValidationError);
}

TEST_CASE("fd tags") {
  const std::vector<TagEvent> e{ev("football", "u1", 10, 5), ev("match", "u1", 10, 1)};
  const auto c = build_formal_context(e);
  const auto expo = compute_exposition(e);
  SUBCASE("one pair") {
    const std::vector<PairKey> pairs{{"football", "u1"}};
    const auto r = build_fd_tags(c, pairs, expo.exposition, fsn::lattice::embed);
    REQUIRE(r.tags.size() == 1);
    CHECK(r.tags[0].exposition == 0.5);
    CHECK(r.tags[0].context_ref == "u1");
  }
  SUBCASE("no pairs") {
    CHECK(build_fd_tags(c, {}, expo.exposition, fsn::lattice::embed).tags.empty());
  }
  SUBCASE("same resource, two tags") {
    const auto pairs = distinct_pairs(e);
    const auto r = build_fd_tags(c, pairs, expo.exposition, fsn::lattice::embed);
    REQUIRE(r.tags.size() == 2);
    CHECK(r.tags[0].id != r.tags[1].id);
    CHECK(r.tags[0].resource == r.tags[1].resource);
  }
  SUBCASE("missing exposition") {
    const std::vector<PairKey> pairs{{"nope", "u1"}};
    CHECK_THROWS_AS(build_fd_tags(c, pairs, expo.exposition, fsn::lattice::embed),
                    fsn::ValidationError);
  }
  SUBCASE("json round trip") {
    const auto pairs = distinct_pairs(e);
    const auto r = build_fd_tags(c, pairs, expo.exposition, fsn::lattice::embed);
    const auto back = tags_from_json(nlohmann::json::parse(tags_to_json(r.tags).dump()));
    REQUIRE(back.size() == r.tags.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].tag == r.tags[i].tag);
      CHECK(back[i].embedding == r.tags[i].embedding);
    }
  }
}
