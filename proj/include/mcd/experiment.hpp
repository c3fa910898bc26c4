#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mcd/decompose.hpp"
#include "mcd/denoiser.hpp"
#include "mcd/phantom.hpp"
#include "mcd/phase.hpp"
#include "mcd/projector.hpp"
#include "mcd/rebin.hpp"
#include "mcd/spectra.hpp"

namespace mcd::experiment {

enum class Mode { spectral, temporal };
// Where the denoiser runs in the spectral pipeline.
enum class Domain { projections, slices };
// Temporal pipeline: denoise before or after phase retrieval, or not at all.
enum class Ordering { before, after, none };

enum class Stage { simulate, rebin, train, denoise, reconstruct, decompose, evaluate, report };
inline constexpr std::array<Stage, 8> kAllStages = {Stage::simulate, Stage::rebin,     Stage::train,
                                                    Stage::denoise,  Stage::reconstruct, Stage::decompose,
                                                    Stage::evaluate, Stage::report};
std::string to_string(Stage s);
Stage parse_stage(std::string_view name);  // ConfigError on unknown names

// Material i (0-based) fills phantom label i + 1. Without an edge, or with an
// edge outside the grid, the spectrum is a plain power law.
struct MaterialDef {
  std::string name;
  double a = 1.0;  // mu at the first grid energy, 1/mm
  double p = 3.0;
  std::optional<double> kedge_keV;
  double jump = 4.0;
};

struct TemporalObjectPart {
  double dx = 0, dy = 0, semi_a = 8, semi_b = 5, angle_deg = 0, value = 1.0;
};

struct TemporalSettings {
  std::array<std::size_t, 2> shape{96, 96};  // (y, x)
  std::size_t n_series = 6;
  std::size_t n_frames = 40;
  std::size_t hold_frames = 20;  // still frames at the start of every series
  double speed_px_per_frame = 0.6;
  double max_rotation_deg_per_frame = 2.0;
  std::vector<TemporalObjectPart> parts;
  double mu_per_unit = 0.5;        // attenuation per unit of object signal
  double photons_per_pixel = 200;  // flat-field Poisson mean
  PhaseConfig phase;
  Ordering ordering = Ordering::before;
  int ensemble_draws = 0;  // > 1 also writes a median-ensemble output
  double ensemble_sigma = 0.05;
};

struct Config {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  Mode mode = Mode::spectral;
  Domain domain = Domain::projections;

  // phantom
  std::array<std::size_t, 3> phantom_shape{64, 64, 64};  // (z, y, x)
  double voxel_size_mm = 0.1;
  std::vector<PointCloudSpec> clouds;  // seeds are offsets added to the phantom seed
  std::size_t slab_first = 0;
  std::size_t slab_count = 0;  // 0 = every slice

  // spectra
  EnergyGrid grid;
  std::string mac_table;  // optional CSV; overrides the synthetic materials
  std::vector<MaterialDef> materials;
  double source_peak_keV = 55.0;
  double source_width_keV = 20.0;
  double source_peak_fluence = 1.0e5;

  // acquisition and reconstruction
  std::size_t n_angles = 120;
  std::size_t detector_count = 0;  // 0 = smallest odd count covering the diagonal
  double exposure_scale = 1.0;
  double count_floor = 1.0;
  RampFilter filter = RampFilter::ram_lak;

  bool rebin_enabled = false;
  IntervalScheme rebin;

  // pairs, model, training
  double split_ratio = 0.8;
  double ssim_threshold = 0.6;
  double ssim_prefilter_sigma = 2.0;
  ModelConfig model;
  TrainConfig train;
  bool denoise_enabled = true;

  DecomposeConfig decompose;

  // evaluation
  std::vector<std::size_t> binning_factors{1, 2, 3, 5};
  std::size_t kedge_min_voxels = 100;
  double kedge_flux_fraction = 0.5;  // edges where the source exceeds this fraction of its peak

  TemporalSettings temporal;
};

// Complete default configuration as JSON; every accepted key appears here.
nlohmann::json default_config_json();
// Defaults, merged with `file` (unknown keys rejected), then `overrides` of
// the form "dotted.key=value" (value parsed as JSON, else taken as a string).
nlohmann::json effective_config_json(const nlohmann::json& file, const std::vector<std::string>& overrides);
// Typed view with field-level validation; throws ConfigError naming the field.
Config parse_config(const nlohmann::json& effective);
// Hash of the canonical serialisation.
std::string config_hash(const nlohmann::json& effective);

struct StageManifest {
  std::string stage;
  std::string config_hash;
  std::string stage_key;  // hash of the config sections this stage and its upstream depend on
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // name -> content hash
  std::map<std::string, std::string> outputs;  // name -> content hash
  bool nondeterministic = false;
  std::string note;
  double wall_time_s = 0.0;
};

class Experiment {
 public:
  Experiment(nlohmann::json effective, std::filesystem::path workdir);
  // Loads a config file and applies overrides. The file is never modified.
  static Experiment open(const std::filesystem::path& config_path, const std::filesystem::path& workdir,
                         const std::vector<std::string>& overrides = {});

  const Config& config() const noexcept { return cfg_; }
  const nlohmann::json& effective_json() const noexcept { return json_; }
  const std::string& hash() const noexcept { return hash_; }
  const std::filesystem::path& workdir() const noexcept { return workdir_; }

  // Stages of this configuration's pipeline, in execution order.
  std::vector<Stage> pipeline() const;
  // Runs one stage. Throws MissingDependencyError naming the first upstream
  // stage whose outputs are absent or were produced under a different config.
  void run(Stage stage);
  void run_all();

  std::filesystem::path results_path() const;
  std::map<std::string, std::string> results() const;
  std::optional<StageManifest> manifest(Stage stage) const;

  // Config-section hash of a stage and everything upstream of it.
  std::string stage_key(Stage stage) const;
  // Pipeline stages before `stage`; ConfigError when `stage` is not in it.
  std::vector<Stage> upstream(Stage stage) const;

 private:
  void check_dependencies(Stage stage) const;

  nlohmann::json json_;
  Config cfg_;
  std::string hash_;
  std::filesystem::path workdir_;
};

// Reads / writes the flat results file: sorted "key=value" lines.
std::map<std::string, std::string> read_results(const std::filesystem::path& path);
void write_results(const std::filesystem::path& path, const std::map<std::string, std::string>& values);
// Round-trippable formatting used in the results file; +inf prints as "inf".
std::string format_value(double v);

}  // namespace mcd::experiment
