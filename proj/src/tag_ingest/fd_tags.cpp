#include "fsn/error.hpp"
#include "fsn/tag_ingest.hpp"

namespace fsn::ingest {

FdTagResult build_fd_tags(const FormalContext& context, std::span<const PairKey> pairs,
                          const std::map<PairKey, double>& exposition, const EmbeddingHook& embed,
                          ContextRoles roles) {
  std::string missing;
  for (const auto& p : pairs) {
    if (!exposition.contains(p)) {
      if (!missing.empty()) missing += ", ";
      missing += "(" + p.tag + ", " + p.uri + ")";
    }
  }
  if (!missing.empty()) throw ValidationError("missing exposition for: " + missing);

  FdTagResult result;
  for (const auto& p : pairs) {
    FdTag tag;
    tag.id = result.tags.size();
    tag.tag = p.tag;
    tag.resource = p.uri;
    tag.exposition = exposition.at(p);
    if (roles == ContextRoles::resources_as_objects) {
      tag.context_ref = p.uri;
    } else {
      auto tokens = tokenize(p.tag);
      if (tokens.empty()) {
        result.unreferenced.push_back(p);
        continue;
      }
      tag.context_ref = std::move(tokens.front());
    }
    if (embed) tag.embedding = embed(tag, context);
    result.tags.push_back(std::move(tag));
  }
  return result;
}

nlohmann::ordered_json tags_to_json(std::span<const FdTag> tags) {
  auto array = nlohmann::ordered_json::array();
  for (const auto& t : tags) {
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["tag"] = t.tag;
    j["context_ref"] = t.context_ref;
    j["exposition"] = t.exposition;
    j["resource"] = t.resource;
    j["embedding"] = {t.embedding.x(), t.embedding.y(), t.embedding.z()};
    array.push_back(std::move(j));
  }
  return array;
}

std::vector<FdTag> tags_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("FD tag JSON must be an array");
  std::vector<FdTag> tags;
  try {
    for (const auto& item : j) {
      FdTag t;
      t.id = item.at("id").get<std::size_t>();
      t.tag = item.at("tag").get<std::string>();
      t.context_ref = item.at("context_ref").get<std::string>();
      t.exposition = item.at("exposition").get<double>();
      t.resource = item.at("resource").get<std::string>();
      const auto x = item.at("embedding").get<std::vector<double>>();
      if (x.size() != 3) throw ValidationError("FD tag embedding must have 3 components");
      t.embedding = Eigen::Vector3d(x[0], x[1], x[2]);
      if (!(t.exposition >= 0.0 && t.exposition <= 1.0)) {
        throw ValidationError("FD tag exposition outside [0,1] for id " + std::to_string(t.id));
      }
      if (!t.embedding.allFinite()) {
        throw ValidationError("non-finite embedding for FD tag id " + std::to_string(t.id));
      }
      tags.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed FD tag JSON: ") + e.what());
  }
  return tags;
}

}  // namespace fsn::ingest
