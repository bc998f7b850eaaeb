#include <ostream>

#include <fmt/format.h>

#include "fsn/field_solver.hpp"

namespace fsn::solver {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::yield:
      return "yield";
    case EventKind::fracture:
      return "fracture";
    case EventKind::rewire:
      return "rewire";
  }
  return "unknown";
}

// fmt's "{}" is the shortest round-trip form and ignores the C locale.
void write_curve_csv(std::ostream& out, std::span<const CurveSample> curve) {
  out << "step,strain,stress,broken,new,plastic_fraction\n";
  for (const auto& s : curve) {
    out << fmt::format("{},{},{},{},{},{}\n", s.step, s.applied_strain, s.mean_effective_stress,
                       s.broken_bonds, s.new_bonds, s.plastic_fraction);
  }
}

void write_events_jsonl(std::ostream& out, std::span<const Event> events) {
  for (const auto& e : events) {
    out << fmt::format("{{\"step\":{},\"kind\":\"{}\",\"id\":{},\"detail\":{}}}\n", e.step,
                       to_string(e.kind), e.id, e.detail);
  }
}

}  // namespace fsn::solver
