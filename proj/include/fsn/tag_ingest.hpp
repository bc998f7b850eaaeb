#pragma once

// Tag-event ingestion: parsing, click-through exposition, tokenization,
// formal contexts (objects x attributes incidence) and FD tags.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <boost/dynamic_bitset.hpp>
#include <json.hpp>

namespace fsn::ingest {

struct TagEvent {
  std::string tag_label;
  std::string resource_uri;
  std::int64_t timestamp = 0;
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;

  bool operator==(const TagEvent&) const = default;
};

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ParseResult {
  std::vector<TagEvent> events;
  std::vector<LineError> errors;

  std::size_t skipped() const noexcept { return errors.size(); }
};

/// Parses line-delimited JSON events. Malformed lines are skipped and
/// reported in `errors`; blank lines are ignored. Throws IoError when the
/// stream itself fails.
ParseResult parse_events(std::istream& in);
ParseResult parse_events_file(const std::filesystem::path& path);

/// Canonical single-line JSON for an event (no trailing newline).
std::string serialize_event(const TagEvent& event);

/// Validates one JSON record; returns the event or an error message.
std::variant<TagEvent, std::string> event_from_json(const nlohmann::json& record);

struct PairKey {
  std::string tag;
  std::string uri;

  auto operator<=>(const PairKey&) const = default;
};

struct ExpositionResult {
  std::map<PairKey, double> exposition;
  /// Groups with zero total impressions (ratio undefined).
  std::vector<PairKey> undefined;
};

/// Pools clicks and impressions per (tag, uri) and returns clicks/impressions.
ExpositionResult compute_exposition(std::span<const TagEvent> events);

/// Distinct (tag, uri) pairs in sorted order.
std::vector<PairKey> distinct_pairs(std::span<const TagEvent> events);

/// Lowercase ASCII-folded alphanumeric tokens of length >= 2, stopwords
/// removed, deduplicated in order of first occurrence.
std::vector<std::string> tokenize(std::string_view text);

/// The built-in English stopword list, sorted.
std::span<const std::string_view> stopwords();

enum class ContextRoles { resources_as_objects, tags_as_objects };

/// A formal context (objects, attributes, incidence) stored as a bit matrix
/// with both row (object -> attributes) and column (attribute -> objects)
/// views kept in sync.
class FormalContext {
 public:
  using Set = boost::dynamic_bitset<>;

  FormalContext() = default;
  /// Throws ValidationError on duplicate object or attribute ids.
  FormalContext(std::vector<std::string> objects, std::vector<std::string> attributes);

  void add_incidence(std::size_t object, std::size_t attribute);

  const std::vector<std::string>& objects() const noexcept { return objects_; }
  const std::vector<std::string>& attributes() const noexcept { return attributes_; }
  std::size_t object_count() const noexcept { return objects_.size(); }
  std::size_t attribute_count() const noexcept { return attributes_.size(); }

  bool incident(std::size_t object, std::size_t attribute) const;
  const Set& attributes_of(std::size_t object) const { return rows_.at(object); }
  const Set& objects_of(std::size_t attribute) const { return columns_.at(attribute); }

  std::optional<std::size_t> object_index(std::string_view id) const;
  std::optional<std::size_t> attribute_index(std::string_view id) const;

  std::size_t incidence_count() const;
  std::vector<std::pair<std::size_t, std::size_t>> incidence_pairs() const;

  Set no_objects() const { return Set(objects_.size()); }
  Set no_attributes() const { return Set(attributes_.size()); }

  bool operator==(const FormalContext& other) const;

 private:
  std::vector<std::string> objects_;
  std::vector<std::string> attributes_;
  std::unordered_map<std::string, std::size_t> object_lookup_;
  std::unordered_map<std::string, std::size_t> attribute_lookup_;
  std::vector<Set> rows_;
  std::vector<Set> columns_;
};

/// Objects are distinct resources (or tag tokens when roles are swapped),
/// in order of first appearance; attributes likewise.
FormalContext build_formal_context(std::span<const TagEvent> events,
                                   ContextRoles roles = ContextRoles::resources_as_objects);

/// Prime operator on an object set: attributes shared by every object.
FormalContext::Set derive_objects(const FormalContext& context, const FormalContext::Set& objects);
/// Prime operator on an attribute set: objects carrying every attribute.
FormalContext::Set derive_attributes(const FormalContext& context,
                                     const FormalContext::Set& attributes);

enum class Side { objects, attributes };

/// Id-level prime operator. Throws ValidationError naming the first unknown id.
std::vector<std::string> derive(const FormalContext& context, std::span<const std::string> ids,
                                Side side);

struct Concept {
  FormalContext::Set extent;
  FormalContext::Set intent;

  bool operator==(const Concept&) const = default;
};

struct ConceptOptions {
  std::size_t max_cells = 1'000'000;
  std::size_t max_concepts = 1'000'000;
};

/// All formal concepts, ordered by extent size then lexicographic extent.
/// Throws RefusalError when |T|*|D| exceeds `max_cells` or the concept count
/// exceeds `max_concepts`.
std::vector<Concept> enumerate_concepts(const FormalContext& context, ConceptOptions options = {});

/// Strict weak order used for concept listings.
bool extent_less(const FormalContext::Set& a, const FormalContext::Set& b);

struct FdTag {
  std::size_t id = 0;
  std::string tag;
  std::string context_ref;  // object id in the formal context
  double exposition = 0.0;
  std::string resource;
  Eigen::Vector3d embedding = Eigen::Vector3d::Zero();
};

using EmbeddingHook = std::function<Eigen::Vector3d(const FdTag&, const FormalContext&)>;

struct FdTagResult {
  std::vector<FdTag> tags;
  /// Pairs skipped because no context object could be named for them
  /// (tag-token roles with a label that has no tokens).
  std::vector<PairKey> unreferenced;
};

/// One FD tag per pair, ids assigned in pair order. Throws ValidationError
/// listing pairs that lack an exposition value.
FdTagResult build_fd_tags(const FormalContext& context, std::span<const PairKey> pairs,
                          const std::map<PairKey, double>& exposition, const EmbeddingHook& embed,
                          ContextRoles roles = ContextRoles::resources_as_objects);

nlohmann::ordered_json context_to_json(const FormalContext& context);
FormalContext context_from_json(const nlohmann::json& j);
nlohmann::ordered_json tags_to_json(std::span<const FdTag> tags);
std::vector<FdTag> tags_from_json(const nlohmann::json& j);

}  // namespace fsn::ingest
