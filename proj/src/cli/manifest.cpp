#include "manifest.hpp"

#include <fstream>
#include <memory>
#include <system_error>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "fsn/error.hpp"

#ifndef FSN_VERSION
#define FSN_VERSION "0.0.0"
#endif

namespace fsn::cli {
namespace {

std::string hex(const unsigned char* data, unsigned len) {
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) out += fmt::format("{:02x}", data[i]);
  return out;
}

struct DigestDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error("SHA-256 initialisation failed");
    }
  }
  void update(const void* data, std::size_t len) {
    if (EVP_DigestUpdate(ctx_.get(), data, len) != 1) throw Error("SHA-256 update failed");
  }
  std::string hex_digest() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw Error("SHA-256 finalisation failed");
    return hex(md, len);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex_digest();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  return h.hex_digest();
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed on " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

namespace detail {

Manifest::Manifest(std::string command, const RunConfig& config)
    : command_(std::move(command)), hash_(config_hash(config)),
      started_(std::chrono::steady_clock::now()), wall_started_(std::chrono::system_clock::now()) {}

void Manifest::add_input(const std::filesystem::path& path) {
  inputs_[path.generic_string()] = file_digest(path);
}

void Manifest::stage(const std::string& name) {
  if (open_) finish_stage("ok");
  stages_.push_back(Stage{name, "running", 0.0});
  stage_started_ = std::chrono::steady_clock::now();
  open_ = true;
}

void Manifest::finish_stage(const std::string& status) {
  if (!open_) return;
  stages_.back().status = status;
  stages_.back().seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - stage_started_).count();
  open_ = false;
}

std::string Manifest::render() {
  if (open_) finish_stage("ok");
  nlohmann::ordered_json j;
  j["tool"] = "fsnsim";
  j["version"] = FSN_VERSION;
  j["command"] = command_;
  j["config_hash"] = hash_;
  j["inputs"] = inputs_;
  j["started_utc"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(wall_started_)));
  j["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  auto stages = nlohmann::ordered_json::array();
  for (const auto& s : stages_) {
    stages.push_back({{"name", s.name}, {"status", s.status}, {"seconds", s.seconds}});
  }
  j["stages"] = std::move(stages);
  j["diagnostics"] = diagnostics_;
  return j.dump(2) + "\n";
}

}  // namespace detail
}  // namespace fsn::cli
