#include "fsn/error.hpp"
#include "fsn/tag_ingest.hpp"

#include <algorithm>
#include <set>

namespace fsn::ingest {

FormalContext::FormalContext(std::vector<std::string> objects, std::vector<std::string> attributes)
    : objects_(std::move(objects)), attributes_(std::move(attributes)) {
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    if (!object_lookup_.emplace(objects_[i], i).second) {
      throw ValidationError("duplicate object id: " + objects_[i]);
    }
  }
  for (std::size_t i = 0; i < attributes_.size(); ++i) {
    if (!attribute_lookup_.emplace(attributes_[i], i).second) {
      throw ValidationError("duplicate attribute id: " + attributes_[i]);
    }
  }
  rows_.assign(objects_.size(), Set(attributes_.size()));
  columns_.assign(attributes_.size(), Set(objects_.size()));
}

void FormalContext::add_incidence(std::size_t object, std::size_t attribute) {
  if (object >= objects_.size() || attribute >= attributes_.size()) {
    throw ValidationError("incidence pair references a missing object or attribute");
  }
  rows_[object].set(attribute);
  columns_[attribute].set(object);
}

bool FormalContext::incident(std::size_t object, std::size_t attribute) const {
  return rows_.at(object).test(attribute);
}

std::optional<std::size_t> FormalContext::object_index(std::string_view id) const {
  if (auto it = object_lookup_.find(std::string(id)); it != object_lookup_.end()) return it->second;
  return std::nullopt;
}

std::optional<std::size_t> FormalContext::attribute_index(std::string_view id) const {
  if (auto it = attribute_lookup_.find(std::string(id)); it != attribute_lookup_.end()) {
    return it->second;
  }
  return std::nullopt;
}

std::size_t FormalContext::incidence_count() const {
  std::size_t n = 0;
  for (const auto& row : rows_) n += row.count();
  return n;
}

std::vector<std::pair<std::size_t, std::size_t>> FormalContext::incidence_pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t o = 0; o < rows_.size(); ++o) {
    for (auto a = rows_[o].find_first(); a != Set::npos; a = rows_[o].find_next(a)) {
      pairs.emplace_back(o, a);
    }
  }
  return pairs;
}

bool FormalContext::operator==(const FormalContext& other) const {
  return objects_ == other.objects_ && attributes_ == other.attributes_ && rows_ == other.rows_;
}

FormalContext build_formal_context(std::span<const TagEvent> events, ContextRoles roles) {
  std::vector<std::string> objects, attributes;
  std::unordered_map<std::string, std::size_t> object_ids, attribute_ids;
  std::vector<std::pair<std::size_t, std::size_t>> incidence;

  const auto intern = [](std::vector<std::string>& names,
                         std::unordered_map<std::string, std::size_t>& ids,
                         const std::string& name) {
    auto [it, inserted] = ids.emplace(name, names.size());
    if (inserted) names.push_back(name);
    return it->second;
  };

  for (const auto& e : events) {
    const auto tokens = tokenize(e.tag_label);
    if (roles == ContextRoles::resources_as_objects) {
      const auto o = intern(objects, object_ids, e.resource_uri);
      for (const auto& t : tokens) incidence.emplace_back(o, intern(attributes, attribute_ids, t));
    } else {
      if (tokens.empty()) continue;
      const auto a = intern(attributes, attribute_ids, e.resource_uri);
      for (const auto& t : tokens) incidence.emplace_back(intern(objects, object_ids, t), a);
    }
  }

  FormalContext context(std::move(objects), std::move(attributes));
  for (const auto& [o, a] : incidence) context.add_incidence(o, a);
  return context;
}

FormalContext::Set derive_objects(const FormalContext& context, const FormalContext::Set& objects) {
  if (objects.size() != context.object_count()) {
    throw ValidationError("object set size does not match the context");
  }
  FormalContext::Set result(context.attribute_count());
  result.set();
  for (auto o = objects.find_first(); o != FormalContext::Set::npos; o = objects.find_next(o)) {
    result &= context.attributes_of(o);
  }
  return result;
}

FormalContext::Set derive_attributes(const FormalContext& context,
                                     const FormalContext::Set& attributes) {
  if (attributes.size() != context.attribute_count()) {
    throw ValidationError("attribute set size does not match the context");
  }
  FormalContext::Set result(context.object_count());
  result.set();
  for (auto a = attributes.find_first(); a != FormalContext::Set::npos;
       a = attributes.find_next(a)) {
    result &= context.objects_of(a);
  }
  return result;
}

std::vector<std::string> derive(const FormalContext& context, std::span<const std::string> ids,
                                Side side) {
  const bool from_objects = side == Side::objects;
  FormalContext::Set input(from_objects ? context.object_count() : context.attribute_count());
  for (const auto& id : ids) {
    const auto index = from_objects ? context.object_index(id) : context.attribute_index(id);
    if (!index) {
      throw ValidationError(std::string("unknown ") + (from_objects ? "object" : "attribute") +
                            " id: " + id);
    }
    input.set(*index);
  }
  const auto output =
      from_objects ? derive_objects(context, input) : derive_attributes(context, input);
  const auto& names = from_objects ? context.attributes() : context.objects();
  std::vector<std::string> result;
  for (auto i = output.find_first(); i != FormalContext::Set::npos; i = output.find_next(i)) {
    result.push_back(names[i]);
  }
  return result;
}

bool extent_less(const FormalContext::Set& a, const FormalContext::Set& b) {
  const auto ca = a.count(), cb = b.count();
  if (ca != cb) return ca < cb;
  auto i = a.find_first();
  auto j = b.find_first();
  while (i != FormalContext::Set::npos && j != FormalContext::Set::npos) {
    if (i != j) return i < j;
    i = a.find_next(i);
    j = b.find_next(j);
  }
  return false;
}

std::vector<Concept> enumerate_concepts(const FormalContext& context, ConceptOptions options) {
  const double cells =
      static_cast<double>(context.object_count()) * static_cast<double>(context.attribute_count());
  if (cells > static_cast<double>(options.max_cells)) {
    throw RefusalError("formal context has " + std::to_string(static_cast<long long>(cells)) +
                           " incidence cells, above the bound of " +
                           std::to_string(options.max_cells),
                       cells);
  }

  // Extents are exactly the intersections of attribute extents, with the
  // empty intersection being the full object set.
  std::set<FormalContext::Set> extents;
  FormalContext::Set top(context.object_count());
  top.set();
  extents.insert(top);
  for (std::size_t a = 0; a < context.attribute_count(); ++a) {
    const auto& column = context.objects_of(a);
    std::vector<FormalContext::Set> fresh;
    for (const auto& e : extents) {
      auto meet = e & column;
      if (!extents.contains(meet)) fresh.push_back(std::move(meet));
    }
    for (auto& f : fresh) extents.insert(std::move(f));
    if (extents.size() > options.max_concepts) {
      throw RefusalError("concept count exceeds the bound of " +
                             std::to_string(options.max_concepts),
                         static_cast<double>(extents.size()));
    }
  }

  std::vector<Concept> concepts;
  concepts.reserve(extents.size());
  for (const auto& e : extents) concepts.push_back(Concept{e, derive_objects(context, e)});
  std::sort(concepts.begin(), concepts.end(),
            [](const Concept& x, const Concept& y) { return extent_less(x.extent, y.extent); });
  return concepts;
}

nlohmann::ordered_json context_to_json(const FormalContext& context) {
  nlohmann::ordered_json j;
  j["objects"] = context.objects();
  j["attributes"] = context.attributes();
  auto incidence = nlohmann::ordered_json::array();
  for (const auto& [o, a] : context.incidence_pairs()) incidence.push_back({o, a});
  j["incidence"] = std::move(incidence);
  return j;
}

FormalContext context_from_json(const nlohmann::json& j) {
  try {
    FormalContext context(j.at("objects").get<std::vector<std::string>>(),
                          j.at("attributes").get<std::vector<std::string>>());
    for (const auto& pair : j.at("incidence")) {
      if (!pair.is_array() || pair.size() != 2) {
        throw ValidationError("incidence entries must be [object, attribute] index pairs");
      }
      context.add_incidence(pair[0].get<std::size_t>(), pair[1].get<std::size_t>());
    }
    return context;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed formal context JSON: ") + e.what());
  }
}

}  // namespace fsn::ingest
