#include <cmath>

#include "fsn/error.hpp"
#include "fsn/fsn_lattice.hpp"
#include "fsn/random.hpp"

namespace fsn::lattice {
namespace {

const ingest::FormalContext::Set& intent_of(const ingest::FdTag& fd,
                                            const ingest::FormalContext& context) {
  const auto index = context.object_index(fd.context_ref);
  if (!index) {
    throw ValidationError("FD tag " + std::to_string(fd.id) + " references unknown context object '" +
                          fd.context_ref + "'");
  }
  // The derivation of a single object is already a closed intent.
  return context.attributes_of(*index);
}

}  // namespace

double uri_coordinate(std::string_view uri) {
  return static_cast<double>(stable_hash(uri) >> 11) * 0x1.0p-53;
}

Eigen::Vector3d embed(const ingest::FdTag& fd, const ingest::FormalContext& context) {
  const auto& intent = intent_of(fd, context);
  const double c = context.attribute_count() == 0
                       ? 0.0
                       : static_cast<double>(intent.count()) /
                             static_cast<double>(context.attribute_count());
  return {c, fd.exposition, uri_coordinate(fd.resource)};
}

double embedding_distance(const Eigen::Vector3d& x, const Eigen::Vector3d& y, Signature signature) {
  const Eigen::Vector3d d = x - y;
  if (signature == Signature::euclidean) return d.norm();
  return std::sqrt(std::abs(d.x() * d.x() + d.y() * d.y() - d.z() * d.z()));
}

double ontology_match(const ingest::FdTag& a, const ingest::FdTag& b,
                      const ingest::FormalContext& context) {
  const auto& ia = intent_of(a, context);
  const auto& ib = intent_of(b, context);
  const auto uni = (ia | ib).count();
  if (uni == 0) return 0.0;
  return static_cast<double>((ia & ib).count()) / static_cast<double>(uni);
}

}  // namespace fsn::lattice
