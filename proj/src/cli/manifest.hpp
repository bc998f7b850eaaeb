#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsn/cli.hpp"

namespace fsn::cli::detail {

/// Collects per-stage status while a command runs and renders manifest.json.
class Manifest {
 public:
  Manifest(std::string command, const RunConfig& config);

  void add_input(const std::filesystem::path& path);
  /// Closes the running stage (if any) and opens a new one.
  void stage(const std::string& name);
  void finish_stage(const std::string& status);
  nlohmann::ordered_json& diagnostics() { return diagnostics_; }

  std::string render();

 private:
  struct Stage {
    std::string name;
    std::string status;
    double seconds = 0.0;
  };

  std::string command_;
  std::string hash_;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json diagnostics_ = nlohmann::ordered_json::object();
  std::vector<Stage> stages_;
  bool open_ = false;
  std::chrono::steady_clock::time_point started_;
  std::chrono::steady_clock::time_point stage_started_;
  std::chrono::system_clock::time_point wall_started_;
};

}  // namespace fsn::cli::detail
