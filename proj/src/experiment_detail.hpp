#pragma once

// Internal plumbing shared by the stage implementations.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcd/experiment.hpp"
#include "mcd/ndarray.hpp"
#include "mcd/store.hpp"

namespace mcd::experiment::detail {

class StageContext {
 public:
  StageContext(const Experiment& exp, Stage stage, std::string stage_key);

  const Experiment& exp;
  const Config& cfg;
  Stage stage;
  StageManifest manifest;

  std::filesystem::path dir() const { return dir_of(stage); }
  std::filesystem::path dir_of(Stage s) const;

  // Inputs are recorded in the manifest and in every output's provenance as
  // "<stage>/<name>" -> content hash.
  store::ArrayContainer read(Stage from, const std::string& name);
  Array read_array(Stage from, const std::string& name);
  NdArray<std::uint16_t> read_labels(Stage from, const std::string& name);
  nlohmann::json read_json(Stage from, const std::string& name);
  std::filesystem::path read_file(Stage from, const std::string& name);  // opaque file, hashed
  bool has(Stage from, const std::string& name) const;

  store::Metadata meta(std::vector<std::string> axes, std::string units, std::vector<double> channel_keV = {}) const;
  void write(const std::string& name, const Array& a, std::vector<std::string> axes, std::string units,
             std::vector<double> channel_keV = {});
  void write(const std::string& name, const NdArray<std::uint16_t>& a, std::vector<std::string> axes,
             std::string units);
  void write_json(const std::string& name, const nlohmann::json& j);
  void record_output_file(const std::string& name);  // hashes a file already written in dir()

 private:
  void record_input(const std::string& key, const std::string& hash);
};

std::string file_hash(const std::filesystem::path& path);

// Spectral description shared by simulate and rebin ("spectra.json").
struct SpectralInfo {
  std::vector<double> channel_keV;
  std::vector<double> flux;  // source photons/mm^2 per channel
  std::vector<double> flat;  // expected flat-field counts per pixel and channel
  std::vector<MaterialSpectrum> materials;  // phantom labels 1..M
  nlohmann::json to_json() const;
  static SpectralInfo from_json(const nlohmann::json& j);
};

Stage spectral_source_stage(const Config& cfg);  // rebin when enabled, else simulate
// -ln(counts / flat) for a (angle, channel, z, u) count stack.
Array attenuation(const Array& counts, const std::vector<double>& flat, double floor);
// Slab of the phantom label volume the pipeline images.
NdArray<std::uint16_t> slab_labels(const Config& cfg, const NdArray<std::uint16_t>& full);
std::size_t slab_first(const Config& cfg);
std::size_t slab_count(const Config& cfg);

// Stage bodies.
void simulate_spectral(StageContext& ctx);
void rebin_spectral(StageContext& ctx);
void reconstruct_spectral(StageContext& ctx);
void decompose_stage(StageContext& ctx);
void evaluate_spectral(StageContext& ctx);
void report_spectral(StageContext& ctx);

void simulate_temporal(StageContext& ctx);
void reconstruct_temporal(StageContext& ctx);
void evaluate_temporal(StageContext& ctx);
void report_temporal(StageContext& ctx);

void train_stage(StageContext& ctx);
// Adds train.* keys from the training report when the pipeline trains.
void add_train_results(StageContext& ctx, std::map<std::string, std::string>& res);
void denoise_stage(StageContext& ctx);

}  // namespace mcd::experiment::detail
