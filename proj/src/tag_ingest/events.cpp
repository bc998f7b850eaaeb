#include "fsn/error.hpp"
#include "fsn/tag_ingest.hpp"

#include <fstream>
#include <istream>
#include <set>

namespace fsn::ingest {
namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

}  // namespace

std::variant<TagEvent, std::string> event_from_json(const nlohmann::json& record) {
  if (!record.is_object()) return std::string("record is not a JSON object");
  for (const char* key : {"tag", "uri", "ts", "imp", "clk"}) {
    if (!record.contains(key)) return std::string("missing field '") + key + "'";
  }
  const auto& tag = record["tag"];
  const auto& uri = record["uri"];
  if (!tag.is_string()) return std::string("field 'tag' is not a string");
  if (!uri.is_string()) return std::string("field 'uri' is not a string");
  if (!record["ts"].is_number_integer()) return std::string("field 'ts' is not an integer");
  for (const char* key : {"imp", "clk"}) {
    const auto& v = record[key];
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
      return std::string("field '") + key + "' is not a non-negative integer";
    }
  }

  TagEvent event;
  event.tag_label = std::string(trim(tag.get_ref<const std::string&>()));
  event.resource_uri = uri.get<std::string>();
  if (record["ts"].is_number_unsigned()) {
    const auto ts = record["ts"].get<std::uint64_t>();
    if (ts > static_cast<std::uint64_t>(INT64_MAX)) return std::string("field 'ts' out of range");
    event.timestamp = static_cast<std::int64_t>(ts);
  } else {
    event.timestamp = record["ts"].get<std::int64_t>();
  }
  event.impressions = record["imp"].get<std::uint64_t>();
  event.clicks = record["clk"].get<std::uint64_t>();

  if (event.tag_label.empty()) return std::string("empty tag label");
  if (event.resource_uri.empty()) return std::string("empty resource uri");
  if (event.clicks > event.impressions) return std::string("clicks exceed impressions");
  return event;
}

ParseResult parse_events(std::istream& in) {
  if (!in) throw IoError("event stream is not readable");
  ParseResult result;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      result.errors.push_back({number, std::string("invalid JSON: ") + e.what()});
      continue;
    }
    auto parsed = event_from_json(record);
    if (auto* err = std::get_if<std::string>(&parsed)) {
      result.errors.push_back({number, std::move(*err)});
    } else {
      result.events.push_back(std::move(std::get<TagEvent>(parsed)));
    }
  }
  if (in.bad()) throw IoError("read failure on event stream");
  return result;
}

ParseResult parse_events_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open events file: " + path.string());
  return parse_events(in);
}

std::string serialize_event(const TagEvent& event) {
  nlohmann::ordered_json j;
  j["tag"] = event.tag_label;
  j["uri"] = event.resource_uri;
  j["ts"] = event.timestamp;
  j["imp"] = event.impressions;
  j["clk"] = event.clicks;
  return j.dump();
}

ExpositionResult compute_exposition(std::span<const TagEvent> events) {
  struct Totals {
    std::uint64_t clicks = 0;
    std::uint64_t impressions = 0;
  };
  std::map<PairKey, Totals> groups;
  for (const auto& e : events) {
    auto& t = groups[PairKey{e.tag_label, e.resource_uri}];
    t.clicks += e.clicks;
    t.impressions += e.impressions;
  }
  ExpositionResult result;
  for (const auto& [key, t] : groups) {
    if (t.impressions == 0) {
      result.undefined.push_back(key);
      continue;
    }
    result.exposition.emplace(key, static_cast<double>(t.clicks) / static_cast<double>(t.impressions));
  }
  return result;
}

std::vector<PairKey> distinct_pairs(std::span<const TagEvent> events) {
  std::set<PairKey> pairs;
  for (const auto& e : events) pairs.insert(PairKey{e.tag_label, e.resource_uri});
  return {pairs.begin(), pairs.end()};
}

}  // namespace fsn::ingest
