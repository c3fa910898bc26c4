// mcd: command-line driver for the experiment pipelines. Talks to the library
// through the C API only.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcd.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitRuntime = 4;

int exit_code(mcd_status s) {
  switch (s) {
    case MCD_OK: return kExitOk;
    case MCD_ERR_CONFIG:
    case MCD_ERR_INVALID_ARGUMENT: return kExitConfig;
    case MCD_ERR_MISSING_DEPENDENCY: return kExitMissing;
    default: return kExitRuntime;
  }
}

int report(mcd_status s) {
  if (s == MCD_OK) return kExitOk;
  std::fprintf(stderr, "mcd: %s: %s\n", mcd_status_string(s), mcd_last_error());
  if (s == MCD_ERR_MISSING_DEPENDENCY) std::fprintf(stderr, "mcd: missing stage: %s\n", mcd_last_missing_stage());
  return exit_code(s);
}

template <class F>
std::string fetch(F f, const mcd_experiment* exp) {
  size_t need = 0;
  if (f(exp, nullptr, 0, &need) != MCD_OK) return {};
  std::string s(need, '\0');
  if (f(exp, s.data(), s.size(), &need) != MCD_OK) return {};
  s.resize(need - 1);
  return s;
}

bool is_own_option(const std::string& key) {
  return key == "config" || key == "workdir" || key == "help" || key == "show-config";
}

}  // namespace

int main(int argc, char** argv) {
  // "--dotted.key=value" flags other than the tool's own options become
  // config overrides; everything else goes to the option parser.
  std::vector<std::string> overrides;
  std::vector<std::string> rest;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    const auto eq = a.find('=');
    if (a.rfind("--", 0) == 0 && eq != std::string::npos && !is_own_option(a.substr(2, eq - 2)))
      overrides.push_back(a.substr(2));
    else
      rest.push_back(a);
  }

  CLI::App app{"mcd: multi-channel Noise2Noise simulation and denoising pipelines"};
  app.require_subcommand(1, 1);
  std::string config_path, workdir;
  bool show_config = false;
  const char* stages[] = {"simulate", "rebin", "train", "denoise", "reconstruct", "decompose", "evaluate", "report", "all"};
  const char* help[] = {"simulate phantom and noisy acquisition",
                        "rebin energy channels",
                        "train the Noise2Noise denoiser",
                        "apply the trained denoiser",
                        "reconstruct slices / retrieve phase",
                        "per-voxel material decomposition",
                        "compute metrics and the results file",
                        "write plots and tables",
                        "run every stage of the configured pipeline"};
  for (std::size_t i = 0; i < std::size(stages); ++i) {
    auto* sc = app.add_subcommand(stages[i], help[i]);
    sc->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    sc->add_option("-w,--workdir", workdir, "experiment directory (default: runs/<config name>)");
    sc->add_flag("--show-config", show_config, "print the effective configuration before running");
    sc->footer("Any config field can be overridden with --dotted.key=value, e.g. --train.epochs=3 --seed=7");
  }

  std::vector<std::string> reversed(rest.rbegin(), rest.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  std::vector<const char*> ov;
  for (const auto& o : overrides) ov.push_back(o.c_str());

  mcd_experiment* exp = nullptr;
  if (workdir.empty()) {
    // Resolve the default from the configured name.
    mcd_status s = mcd_experiment_open(config_path.c_str(), ".", ov.data(), ov.size(), &exp);
    if (s != MCD_OK) return report(s);
    const std::string cfg = fetch(mcd_experiment_effective_config, exp);
    mcd_experiment_free(exp);
    exp = nullptr;
    workdir = "runs/" + nlohmann::json::parse(cfg).value("name", std::string("experiment"));
  }
  mcd_status s = mcd_experiment_open(config_path.c_str(), workdir.c_str(), ov.data(), ov.size(), &exp);
  if (s != MCD_OK) return report(s);
  if (show_config) std::printf("%s\n", fetch(mcd_experiment_effective_config, exp).c_str());
  std::fprintf(stderr, "mcd: %s in %s (config %s; pipeline: %s)\n", stage.c_str(), workdir.c_str(),
               fetch(mcd_experiment_config_hash, exp).c_str(), fetch(mcd_experiment_pipeline, exp).c_str());
  s = mcd_experiment_run(exp, stage.c_str());
  if (s == MCD_OK && (stage == "evaluate" || stage == "all"))
    std::printf("results: %s\n", fetch(mcd_experiment_results_path, exp).c_str());
  mcd_experiment_free(exp);
  return report(s);
}
