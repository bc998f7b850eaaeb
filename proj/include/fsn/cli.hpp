#pragma once

// The fsnsim command-line surface: configuration, manifests and commands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fsn/field_solver.hpp"
#include "fsn/fsn_lattice.hpp"
#include "fsn/tag_ingest.hpp"

namespace fsn::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kIo = 2, kValidation = 3, kSolver = 4 };

struct IngestSection {
  std::string events;   // tag-event JSONL
  std::string tags;     // FD tags JSON (simulate, match, export)
  std::string context;  // formal context JSON (match, export)
  ingest::ContextRoles roles = ingest::ContextRoles::resources_as_objects;
};

struct LatticeSection {
  lattice::BetheLatticeSpec spec{3, 7, 42};
  lattice::BuildOptions build{10'000, 1.0, 0.2};
  lattice::AssignStrategy assign = lattice::AssignStrategy::bfs;
  std::string input;  // prebuilt lattice JSON; empty means build from spec
};

struct EmbeddingSection {
  lattice::Signature signature = lattice::Signature::euclidean;
  lattice::GenerationMetric generation_metric = lattice::GenerationMetric::sqrt_difference;
};

struct SweepSection {
  std::vector<double> rates{1e-3, 1e-2};
  int threads = 0;  // 0 picks the hardware concurrency
};

/// Every tunable of a run. Defaults are the shipped calibrated values.
struct RunConfig {
  IngestSection ingest;
  LatticeSection lattice;
  EmbeddingSection embedding;
  solver::Models models;
  solver::LoadProgram load;
  solver::SolverOptions solver;
  std::string output_dir = "out";
  SweepSection sweep;

  RunConfig();
  void validate() const;
};

/// Parses the TOML subset used by fsnsim: [section] headers, key = value
/// with numbers, booleans, quoted strings, inf/nan and flat number arrays,
/// and # comments. Unknown sections or keys are rejected.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text: sections and keys sorted, numbers in shortest round-trip
/// form. Parsing it gives back the same configuration.
std::string to_toml(const RunConfig& config);

/// SHA-256 of the canonical text without the [output] section, so the hash
/// depends on key order in neither the file nor the output location.
std::string config_hash(const RunConfig& config);

std::string sha256_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fsn::cli
