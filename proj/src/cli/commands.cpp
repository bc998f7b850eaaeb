#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fsn/cli.hpp"
#include "fsn/error.hpp"
#include "manifest.hpp"

namespace fsn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

class Context {
 public:
  Context(const Globals& g, std::ostream& out, std::ostream& err) : globals_(g), out_(out), err_(err) {
    if (!g.config.empty()) config_ = load_config(g.config);
    if (g.seed) {
      config_.lattice.spec.seed = *g.seed;
      config_.load.seed = *g.seed;
    }
    if (!g.out.empty()) config_.output_dir = g.out;
  }

  const RunConfig& config() const { return config_; }
  RunConfig& config() { return config_; }
  fs::path out_dir() const { return config_.output_dir; }
  bool quiet() const { return globals_.quiet; }
  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }
  void info(const std::string& line) {
    if (!globals_.quiet) out_ << line << '\n';
  }
  void warn(const std::string& line) {
    if (!globals_.quiet) err_ << "warning: " << line << '\n';
  }

 private:
  const Globals& globals_;
  std::ostream& out_;
  std::ostream& err_;
  RunConfig config_;
};

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string("no ") + what + " file configured");
  if (!fs::exists(path)) throw IoError(std::string(what) + " file not found: " + path);
}

lattice::FsnLattice obtain_lattice(const RunConfig& config, detail::Manifest* manifest) {
  if (!config.lattice.input.empty()) {
    require_file(config.lattice.input, "lattice");
    if (manifest) manifest->add_input(config.lattice.input);
    return lattice::lattice_from_json(read_json(config.lattice.input));
  }
  return lattice::build_bethe(config.lattice.spec, config.lattice.build);
}

std::vector<ingest::FdTag> load_tags(const std::string& path, detail::Manifest* manifest) {
  require_file(path, "tags");
  if (manifest) manifest->add_input(path);
  try {
    return ingest::tags_from_json(read_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed tags file: " + std::string(e.what()));
  }
}

ingest::FormalContext load_context(const std::string& path, detail::Manifest* manifest) {
  require_file(path, "context");
  if (manifest) manifest->add_input(path);
  try {
    return ingest::context_from_json(read_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed context file: " + std::string(e.what()));
  }
}

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

ordered_json json_number(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

// ---- ingest ----------------------------------------------------------------

int cmd_ingest(Context& ctx, const std::string& events_arg) {
  const std::string events_path = events_arg.empty() ? ctx.config().ingest.events : events_arg;
  require_file(events_path, "events");
  detail::Manifest manifest("ingest", ctx.config());
  manifest.add_input(events_path);

  manifest.stage("parse");
  const auto parsed = ingest::parse_events_file(events_path);
  for (const auto& e : parsed.errors) ctx.warn(fmt::format("line {}: {}", e.line, e.message));

  manifest.stage("context");
  const auto roles = ctx.config().ingest.roles;
  const auto exposition = ingest::compute_exposition(parsed.events);
  std::vector<ingest::PairKey> pairs;
  for (const auto& p : ingest::distinct_pairs(parsed.events)) {
    if (exposition.exposition.contains(p)) pairs.push_back(p);
  }
  for (const auto& p : exposition.undefined) {
    ctx.warn("no impressions for (" + p.tag + ", " + p.uri + "); exposition undefined, tag skipped");
  }
  const auto context = ingest::build_formal_context(parsed.events, roles);
  const auto tags = ingest::build_fd_tags(context, pairs, exposition.exposition, lattice::embed, roles);

  manifest.stage("write");
  const fs::path dir = ctx.out_dir();
  write_atomic(dir / "context.json", ingest::context_to_json(context).dump(2) + "\n");
  write_atomic(dir / "tags.json", ingest::tags_to_json(tags.tags).dump(2) + "\n");
  manifest.diagnostics()["objects"] = context.object_count();
  manifest.diagnostics()["attributes"] = context.attribute_count();
  manifest.diagnostics()["tags"] = tags.tags.size();
  manifest.diagnostics()["skipped_lines"] = parsed.skipped();
  manifest.diagnostics()["undefined_exposition"] = exposition.undefined.size();
  write_atomic(dir / "manifest.json", manifest.render());

  ctx.info(fmt::format("objects={} attributes={} tags={} skipped={}", context.object_count(),
                       context.attribute_count(), tags.tags.size(), parsed.skipped()));
  return kOk;
}

// ---- build -----------------------------------------------------------------

int cmd_build(Context& ctx) {
  detail::Manifest manifest("build", ctx.config());
  manifest.stage("build");
  const auto lat = lattice::build_bethe(ctx.config().lattice.spec, ctx.config().lattice.build);
  manifest.stage("write");
  write_atomic(ctx.out_dir() / "lattice.json", lattice::lattice_to_json(lat).dump(2) + "\n");
  manifest.diagnostics()["nodes"] = lat.nodes.size();
  manifest.diagnostics()["bonds"] = lat.bonds.size();
  write_atomic(ctx.out_dir() / "manifest.json", manifest.render());
  ctx.info(fmt::format("nodes={} bonds={}", lat.nodes.size(), lat.bonds.size()));
  return kOk;
}

// ---- simulate --------------------------------------------------------------

struct SimulationSummary {
  double rate = 0.0;
  double onset = std::numeric_limits<double>::infinity();
  double final_stress = 0.0;
  std::size_t samples = 0;
  bool converged = true;
  std::string error;
};

SimulationSummary simulate_into(const RunConfig& config, const lattice::FsnLattice& base,
                                const std::vector<std::optional<double>>& exposition,
                                const fs::path& dir, detail::Manifest& manifest) {
  manifest.stage("load");
  const auto run = solver::run_loading(base, config.load, config.models, config.solver, exposition);
  manifest.finish_stage(run.converged ? "ok" : "failed");

  manifest.stage("write");
  std::ostringstream curve, events;
  solver::write_curve_csv(curve, run.curve);
  solver::write_events_jsonl(events, run.events);
  write_atomic(dir / "curve.csv", curve.str());
  write_atomic(dir / "events.jsonl", events.str());

  SimulationSummary s;
  s.rate = config.load.strain_rate;
  s.samples = run.curve.size();
  s.converged = run.converged;
  s.error = run.error;
  s.final_stress = run.curve.back().mean_effective_stress;
  std::optional<std::size_t> onset_index;
  if (run.curve.size() >= 10) {
    s.onset = solver::ductility_onset(run.curve);
    for (std::size_t i = 0; i < run.curve.size() && std::isfinite(s.onset); ++i) {
      if (100.0 * run.curve[i].applied_strain == s.onset) onset_index = i;
    }
  }

  Eigen::Matrix3d mean_stress = Eigen::Matrix3d::Zero();
  for (const auto& st : run.stress) mean_stress += st.phonon.matrix();
  if (!run.stress.empty()) mean_stress /= static_cast<double>(run.stress.size());
  std::size_t intact = 0;
  for (const auto& b : run.lattice.bonds) intact += b.intact ? 1 : 0;

  auto& d = manifest.diagnostics();
  d["nodes"] = base.nodes.size();
  d["bonds_initial"] = base.bonds.size();
  d["bonds_intact_final"] = intact;
  d["samples"] = run.curve.size();
  d["converged"] = run.converged;
  if (!run.converged) d["error"] = run.error;
  d["solver_iterations"] = run.solver_iterations;
  d["ductility_onset_percent"] = json_number(s.onset);
  d["final_mean_effective_stress"] = s.final_stress;
  d["final_mean_phonon_stress"] = constitutive::row_major(mean_stress);
  d["time_step"] = config.load.time_step();
  d["yield_exposition_at_onset"] =
      onset_index ? json_number(run.yield_exposition[*onset_index]) : ordered_json(nullptr);
  write_atomic(dir / "manifest.json", manifest.render());
  return s;
}

std::vector<std::optional<double>> node_exposition(const lattice::FsnLattice& lat,
                                                   const std::vector<ingest::FdTag>& tags) {
  std::vector<std::optional<double>> out(lat.nodes.size());
  for (const auto& n : lat.nodes) {
    if (n.tag && *n.tag < tags.size()) out[n.id] = tags[*n.tag].exposition;
  }
  return out;
}

struct Prepared {
  lattice::FsnLattice lattice;
  std::vector<std::optional<double>> exposition;
};

Prepared prepare(const RunConfig& config, detail::Manifest* manifest) {
  if (manifest) manifest->stage("lattice");
  Prepared p;
  p.lattice = obtain_lattice(config, manifest);
  if (!config.ingest.tags.empty()) {
    const auto tags = load_tags(config.ingest.tags, manifest);
    p.lattice = lattice::assign_tags(p.lattice, tags, config.lattice.assign);
    p.exposition = node_exposition(p.lattice, tags);
  }
  return p;
}

int cmd_simulate(Context& ctx) {
  const RunConfig& config = ctx.config();
  detail::Manifest manifest("simulate", config);
  const auto prepared = prepare(config, &manifest);
  const auto s = simulate_into(config, prepared.lattice, prepared.exposition, ctx.out_dir(), manifest);
  ctx.info(fmt::format("samples={} onset={} final_stress={}", s.samples, number(s.onset),
                       number(s.final_stress)));
  if (!s.converged) {
    ctx.err() << "error: " << s.error << '\n';
    return kSolver;
  }
  return kOk;
}

// ---- sweep -----------------------------------------------------------------

int cmd_sweep(Context& ctx) {
  const RunConfig& config = ctx.config();
  if (config.sweep.rates.empty()) throw ValidationError("sweep.rates is empty");
  detail::Manifest manifest("sweep", config);
  const auto prepared = prepare(config, &manifest);
  manifest.stage("runs");

  const std::size_t count = config.sweep.rates.size();
  std::vector<SimulationSummary> results(count);
  std::vector<std::exception_ptr> failures(count);
  std::atomic<std::size_t> next{0};
  unsigned threads = config.sweep.threads > 0 ? static_cast<unsigned>(config.sweep.threads)
                                              : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(count));
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        RunConfig rc = config;
        rc.load.strain_rate = config.sweep.rates[i];
        detail::Manifest m("simulate", rc);
        const fs::path dir = ctx.out_dir() / ("rate_" + number(rc.load.strain_rate));
        results[i] = simulate_into(rc, prepared.lattice, prepared.exposition, dir, m);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::string table = "rate,onset,final_stress,converged\n";
  bool all_converged = true;
  auto runs = ordered_json::array();
  for (const auto& r : results) {
    table += fmt::format("{},{},{},{}\n", number(r.rate), number(r.onset), number(r.final_stress),
                         r.converged ? 1 : 0);
    all_converged = all_converged && r.converged;
    runs.push_back({{"rate", r.rate}, {"onset_percent", json_number(r.onset)},
                    {"converged", r.converged}});
    ctx.info(fmt::format("rate={} onset={} final_stress={}", number(r.rate), number(r.onset),
                         number(r.final_stress)));
  }
  manifest.finish_stage(all_converged ? "ok" : "failed");
  write_atomic(ctx.out_dir() / "sweep.csv", table);
  manifest.diagnostics()["runs"] = std::move(runs);
  write_atomic(ctx.out_dir() / "manifest.json", manifest.render());
  return all_converged ? kOk : kSolver;
}

// ---- match -----------------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> read_pairs(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read pairs file " + path.string());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    std::size_t a = 0, b = 0;
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      std::size_t used_a = 0, used_b = 0;
      const std::string sa = line.substr(0, comma), sb = line.substr(comma + 1);
      a = std::stoull(sa, &used_a);
      b = std::stoull(sb, &used_b);
      if (used_a != sa.size() || used_b != sb.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      if (line_no == 1 && line.rfind("tag_a", 0) == 0) continue;  // header
      throw ValidationError(fmt::format("pairs line {}: expected two tag ids", line_no));
    }
    pairs.emplace_back(a, b);
  }
  return pairs;
}

int cmd_match(Context& ctx, std::string tags_path, std::string context_path,
              const std::string& pairs_path) {
  if (tags_path.empty()) tags_path = ctx.config().ingest.tags;
  if (context_path.empty()) context_path = ctx.config().ingest.context;
  detail::Manifest manifest("match", ctx.config());
  manifest.stage("read");
  const auto tags = load_tags(tags_path, &manifest);
  const auto context = load_context(context_path, &manifest);
  require_file(pairs_path, "pairs");
  manifest.add_input(pairs_path);
  const auto pairs = read_pairs(pairs_path);

  manifest.stage("match");
  auto find = [&](std::size_t id) -> const ingest::FdTag& {
    for (const auto& t : tags) {
      if (t.id == id) return t;
    }
    throw ValidationError("unknown tag id " + std::to_string(id));
  };
  std::string table = "tag_a,tag_b,score\n";
  for (const auto& [a, b] : pairs) {
    table += fmt::format("{},{},{:.6f}\n", a, b, lattice::ontology_match(find(a), find(b), context));
  }
  manifest.stage("write");
  write_atomic(ctx.out_dir() / "matches.csv", table);
  manifest.diagnostics()["pairs"] = pairs.size();
  write_atomic(ctx.out_dir() / "manifest.json", manifest.render());
  ctx.info(fmt::format("pairs={}", pairs.size()));
  return kOk;
}

// ---- export ----------------------------------------------------------------

int cmd_export(Context& ctx) {
  const RunConfig& config = ctx.config();
  detail::Manifest manifest("export", config);
  manifest.stage("lattice");
  auto lat = obtain_lattice(config, &manifest);
  std::vector<ingest::FdTag> tags;
  if (!config.ingest.tags.empty()) {
    tags = load_tags(config.ingest.tags, &manifest);
    lat = lattice::assign_tags(lat, tags, config.lattice.assign);
  }
  manifest.stage("write");
  const ingest::FdTag* origin_tag =
      !lat.nodes.empty() && lat.nodes[0].tag ? &tags[*lat.nodes[0].tag] : nullptr;
  std::string table = "id,generation,tag,x,y,z,c,e,r,origin_distance,embedding_distance\n";
  for (const auto& n : lat.nodes) {
    std::string tag, c, e, r, emb;
    if (n.tag) {
      const auto& t = tags[*n.tag];
      tag = std::to_string(t.id);
      c = number(t.embedding.x());
      e = number(t.embedding.y());
      r = number(t.embedding.z());
      if (origin_tag) {
        emb = number(lattice::embedding_distance(origin_tag->embedding, t.embedding,
                                                 config.embedding.signature));
      }
    }
    table += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", n.id, n.generation, tag,
                         number(n.position.x()), number(n.position.y()), number(n.position.z()), c,
                         e, r,
                         number(lattice::generation_distance(lat, 0, n.id,
                                                             config.embedding.generation_metric)),
                         emb);
  }
  write_atomic(ctx.out_dir() / "lattice.json", lattice::lattice_to_json(lat).dump(2) + "\n");
  write_atomic(ctx.out_dir() / "nodes.csv", table);
  manifest.diagnostics()["nodes"] = lat.nodes.size();
  manifest.diagnostics()["tagged"] = std::min(tags.size(), lat.nodes.size());
  write_atomic(ctx.out_dir() / "manifest.json", manifest.render());
  ctx.info(fmt::format("nodes={} tagged={}", lat.nodes.size(), std::min(tags.size(), lat.nodes.size())));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Folksodriven structure network simulator", "fsnsim"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", FSN_VERSION);

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Configuration file");
  app.add_option("--out", g.out, "Output directory (overrides output.dir)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for lattice layout and load scatter");
  app.add_flag("--quiet", g.quiet, "Suppress summaries and warnings");

  std::string events_arg;
  auto* ingest = app.add_subcommand("ingest", "Parse tag events into a formal context and FD tags");
  ingest->add_option("events", events_arg, "Tag-event JSONL (defaults to ingest.events)");

  auto* build = app.add_subcommand("build", "Build a Bethe lattice and write lattice.json");

  std::string lattice_arg, tags_arg, context_arg, pairs_arg;
  auto* simulate = app.add_subcommand("simulate", "Run a strain-controlled loading simulation");
  simulate->add_option("--lattice", lattice_arg, "Prebuilt lattice JSON");
  simulate->add_option("--tags", tags_arg, "FD tags JSON to place on the lattice");

  auto* sweep = app.add_subcommand("sweep", "Run simulate for every rate in sweep.rates");
  sweep->add_option("--lattice", lattice_arg, "Prebuilt lattice JSON");
  sweep->add_option("--tags", tags_arg, "FD tags JSON to place on the lattice");

  auto* match = app.add_subcommand("match", "Score tag pairs by concept overlap");
  match->add_option("--tags", tags_arg, "FD tags JSON");
  match->add_option("--context", context_arg, "Formal context JSON");
  match->add_option("--pairs", pairs_arg, "CSV of tag id pairs")->required();

  auto* exporter = app.add_subcommand("export", "Write the tagged lattice and per-node coordinates");
  exporter->add_option("--lattice", lattice_arg, "Prebuilt lattice JSON");
  exporter->add_option("--tags", tags_arg, "FD tags JSON to place on the lattice");

  bool print_defaults = false;
  auto* config_cmd = app.add_subcommand("config", "Configuration utilities");
  config_cmd->add_flag("--print-defaults", print_defaults, "Print the default configuration");

  std::vector<std::string> argv_store{"fsnsim"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? std::string(FSN_VERSION) + "\n"
                                                           : app.help());
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (config_cmd->parsed()) {
      if (!print_defaults) throw ValidationError("config: nothing to do (try --print-defaults)");
      out << to_toml(RunConfig{});
      return kOk;
    }
    Context ctx(g, out, err);
    if (!lattice_arg.empty()) ctx.config().lattice.input = lattice_arg;
    if (!tags_arg.empty() && !match->parsed()) ctx.config().ingest.tags = tags_arg;
    if (ingest->parsed()) return cmd_ingest(ctx, events_arg);
    if (build->parsed()) return cmd_build(ctx);
    if (simulate->parsed()) return cmd_simulate(ctx);
    if (sweep->parsed()) return cmd_sweep(ctx);
    if (match->parsed()) return cmd_match(ctx, tags_arg, context_arg, pairs_arg);
    if (exporter->parsed()) return cmd_export(ctx);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << '\n';
    return kSolver;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace fsn::cli
