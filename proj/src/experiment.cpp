#include "mcd/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mcd/error.hpp"
#include "experiment_detail.hpp"
#include "mcd/metrics.hpp"
#include "mcd/pairs.hpp"
#include "mcd/random.hpp"
#include "mcd/store.hpp"

namespace mcd::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- results file -----------------------------------------------------------

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::map<std::string, std::string> read_results(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(store::read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("results file " + path.string() + ": malformed line '" + line + "'");
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

void write_results(const fs::path& path, const std::map<std::string, std::string>& values) {
  std::string text;
  for (const auto& [k, v] : values) text += k + "=" + v + "\n";
  store::write_text_atomic(path, text);
}

// ---- manifests --------------------------------------------------------------

namespace {

json to_json(const StageManifest& m) {
  return {{"stage", m.stage},   {"config_hash", m.config_hash}, {"stage_key", m.stage_key},
          {"seed", m.seed},     {"inputs", m.inputs},           {"outputs", m.outputs},
          {"nondeterministic", m.nondeterministic}, {"note", m.note}, {"wall_time_s", m.wall_time_s}};
}

StageManifest manifest_from_json(const json& j) {
  StageManifest m;
  m.stage = j.at("stage").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.stage_key = j.at("stage_key").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  m.nondeterministic = j.at("nondeterministic").get<bool>();
  m.note = j.value("note", "");
  m.wall_time_s = j.value("wall_time_s", 0.0);
  return m;
}

std::vector<std::string> own_sections(Stage s) {
  switch (s) {
    case Stage::simulate:
      return {"/seed", "/mode", "/phantom", "/spectra", "/acquisition", "/temporal/scene", "/temporal/phase"};
    case Stage::rebin: return {"/rebin"};
    case Stage::train: return {"/domain", "/pairs", "/model", "/train", "/temporal/ordering"};
    case Stage::denoise: return {"/denoise", "/temporal/ensemble"};
    case Stage::reconstruct: return {"/reconstruct", "/domain", "/denoise", "/temporal/ordering"};
    case Stage::decompose: return {"/decompose"};
    case Stage::evaluate: return {"/evaluate"};
    case Stage::report: return {};
  }
  return {};
}

}  // namespace

// ---- Experiment -------------------------------------------------------------

Experiment::Experiment(json effective, fs::path workdir)
    : json_(std::move(effective)), cfg_(parse_config(json_)), hash_(config_hash(json_)), workdir_(std::move(workdir)) {}

Experiment Experiment::open(const fs::path& config_path, const fs::path& workdir,
                            const std::vector<std::string>& overrides) {
  if (!fs::exists(config_path)) throw ConfigError("config file not found: " + config_path.string());
  json file;
  try {
    file = json::parse(store::read_text(config_path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + config_path.string() + " is not valid JSON: " + e.what());
  }
  json eff = effective_config_json(file, overrides);
  // Relative table paths resolve against the config file's directory.
  auto& table = eff["spectra"]["mac_table"];
  if (table.is_string() && !table.get<std::string>().empty()) {
    fs::path p = table.get<std::string>();
    if (p.is_relative()) table = (fs::absolute(config_path).parent_path() / p).lexically_normal().string();
  }
  return Experiment(std::move(eff), workdir);
}

std::vector<Stage> Experiment::pipeline() const {
  std::vector<Stage> p{Stage::simulate};
  if (cfg_.mode == Mode::spectral) {
    if (cfg_.rebin_enabled) p.push_back(Stage::rebin);
    if (!cfg_.denoise_enabled)
      p.insert(p.end(), {Stage::reconstruct, Stage::decompose});
    else if (cfg_.domain == Domain::projections)
      p.insert(p.end(), {Stage::train, Stage::denoise, Stage::reconstruct, Stage::decompose});
    else
      p.insert(p.end(), {Stage::reconstruct, Stage::train, Stage::denoise, Stage::decompose});
  } else {
    const Ordering o = cfg_.denoise_enabled ? cfg_.temporal.ordering : Ordering::none;
    if (o == Ordering::none)
      p.push_back(Stage::reconstruct);
    else if (o == Ordering::before)
      p.insert(p.end(), {Stage::train, Stage::denoise, Stage::reconstruct});
    else
      p.insert(p.end(), {Stage::reconstruct, Stage::train, Stage::denoise});
  }
  p.insert(p.end(), {Stage::evaluate, Stage::report});
  return p;
}

std::vector<Stage> Experiment::upstream(Stage stage) const {
  const auto p = pipeline();
  const auto it = std::find(p.begin(), p.end(), stage);
  if (it == p.end()) {
    std::string why;
    if (stage == Stage::rebin) why = " (rebin.enabled is false)";
    else if (stage == Stage::decompose) why = " (temporal mode has no material decomposition)";
    else if (stage == Stage::train || stage == Stage::denoise) why = " (denoising is disabled)";
    throw ConfigError("stage '" + to_string(stage) + "' is not part of this configuration's pipeline" + why);
  }
  return {p.begin(), it};
}

std::string Experiment::stage_key(Stage stage) const {
  std::string acc;
  for (Stage u : upstream(stage)) acc += stage_key(u) + ";";
  acc += to_string(stage) + ":";
  for (const auto& ptr : own_sections(stage)) acc += ptr + "=" + json_.at(json::json_pointer(ptr)).dump() + ";";
  return store::hash_hex(fnv1a64(acc));
}

std::optional<StageManifest> Experiment::manifest(Stage stage) const {
  const fs::path p = workdir_ / to_string(stage) / "manifest.json";
  if (!fs::exists(p)) return std::nullopt;
  try {
    return manifest_from_json(json::parse(store::read_text(p)));
  } catch (const std::exception& e) {
    throw DataError("corrupt manifest " + p.string() + ": " + e.what());
  }
}

void Experiment::check_dependencies(Stage stage) const {
  for (Stage u : upstream(stage)) {
    const auto m = manifest(u);
    const std::string name = to_string(u);
    if (!m)
      throw MissingDependencyError(name, "stage '" + to_string(stage) + "' needs the outputs of stage '" + name +
                                             "', which has not been run in " + workdir_.string() + "; run '" + name +
                                             "' first");
    if (m->stage_key != stage_key(u))
      throw MissingDependencyError(name, "stage '" + name + "' in " + workdir_.string() +
                                             " was produced under a different configuration; rerun '" + name + "'");
  }
}

void Experiment::run(Stage stage) {
  check_dependencies(stage);
  fs::create_directories(workdir_ / to_string(stage));
  store::write_text_atomic(workdir_ / "config.json", json_.dump(2) + "\n");
  const fs::path mpath = workdir_ / to_string(stage) / "manifest.json";
  if (fs::exists(mpath)) fs::remove(mpath);

  detail::StageContext ctx(*this, stage, stage_key(stage));
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg_.mode == Mode::spectral) {
    switch (stage) {
      case Stage::simulate: detail::simulate_spectral(ctx); break;
      case Stage::rebin: detail::rebin_spectral(ctx); break;
      case Stage::train: detail::train_stage(ctx); break;
      case Stage::denoise: detail::denoise_stage(ctx); break;
      case Stage::reconstruct: detail::reconstruct_spectral(ctx); break;
      case Stage::decompose: detail::decompose_stage(ctx); break;
      case Stage::evaluate: detail::evaluate_spectral(ctx); break;
      case Stage::report: detail::report_spectral(ctx); break;
    }
  } else {
    switch (stage) {
      case Stage::simulate: detail::simulate_temporal(ctx); break;
      case Stage::train: detail::train_stage(ctx); break;
      case Stage::denoise: detail::denoise_stage(ctx); break;
      case Stage::reconstruct: detail::reconstruct_temporal(ctx); break;
      case Stage::evaluate: detail::evaluate_temporal(ctx); break;
      case Stage::report: detail::report_temporal(ctx); break;
      default: throw ConfigError("stage '" + to_string(stage) + "' is not part of the temporal pipeline");
    }
  }
  ctx.manifest.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  store::write_text_atomic(mpath, to_json(ctx.manifest).dump(2) + "\n");
}

void Experiment::run_all() {
  for (Stage s : pipeline()) run(s);
}

fs::path Experiment::results_path() const { return workdir_ / "results.txt"; }

std::map<std::string, std::string> Experiment::results() const {
  if (!fs::exists(results_path()))
    throw MissingDependencyError("evaluate", "no results in " + workdir_.string() + "; run 'evaluate' first");
  return read_results(results_path());
}

}  // namespace mcd::experiment
