#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcd/ndarray.hpp"
#include "mcd/nn.hpp"
#include "mcd/pairs.hpp"

namespace mcd {

struct ModelConfig {
  int in_channels = 2;  // 2 for spectral pairs, 1 for temporal pairs
  int base_width = 16;
  int depth = 3;
  std::uint64_t seed = 0;
};

struct TrainConfig {
  double learning_rate = 3e-4;
  int epochs = 10;
  int batch_size = 8;
  std::uint64_t seed = 0;
  std::string loss = "l1";
  AugmentConfig augment{.crop = 64, .flips = true, .rot90 = true};
  // Batches per epoch; 0 means one pass over the training pairs.
  std::size_t steps_per_epoch = 0;
  // Validation pairs evaluated per epoch (evenly spaced); 0 means all.
  std::size_t max_val_pairs = 0;
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch, mean L1 in data units
  std::vector<double> val_loss;    // per epoch
  double initial_val_loss = 0.0;   // untrained model on the validation pairs
  double identity_val_loss = 0.0;  // copy of input channel 0 on the same pairs
  double wall_time_s = 0.0;
  long steps = 0;
};

// Affine input map x -> (x - mean) / scale, inverted at the output.
struct Normalization {
  double mean = 0.0;
  double scale = 1.0;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  const nn::UNet& network() const noexcept { return net_; }
  const Normalization& normalization() const noexcept { return norm_; }
  void set_normalization(const Normalization& n);
  std::span<const float> parameters() const noexcept { return params_; }
  std::span<float> parameters() noexcept { return params_; }

  // One output image with the spatial shape of the inputs.
  Image predict(std::span<const Image> inputs) const;
  std::vector<Image> predict_batch(std::span<const std::vector<Image>> batch) const;

  // Single-file checkpoint: "MCDMODEL", u32 version, u64 header length, JSON
  // header, then float32 little-endian parameters.
  void save(const std::filesystem::path& path, const nlohmann::json& extra = nlohmann::json::object()) const;
  static Model load(const std::filesystem::path& path);
  static nlohmann::json read_header(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  nn::UNet net_;
  Normalization norm_;
  std::vector<float> params_;
};

struct TrainResult {
  Model model;
  TrainReport report;
};

TrainResult train(const ModelConfig& model_config, const PairSet& train_pairs, const PairSet& val_pairs,
                  const TrainConfig& config);

// Mean absolute error of model predictions / of the copy-input-0 predictor.
double l1_loss(const Model& model, const PairSet& pairs, std::size_t max_pairs = 0);
double identity_l1_loss(const PairSet& pairs, std::size_t max_pairs = 0);

// Runs (j-1, j) inference over every series of a (series, channel, h, w)
// stack; returns the J-1 half-grid outputs at channel positions j - 0.5.
Array predict_half_grid(const Model& model, const Array& stack);

// Midpoints of consecutive half-grid channels: J-1 half-grid channels ->
// J-2 integer channels 1..J-2.
Array shift_compensate(const Array& half_grid, std::size_t channel_axis = 1);

// shift_compensate plus edge channels so the output has J channels again:
// channel 0 takes half-grid 0.5, channel J-1 takes half-grid J-1.5.
Array to_integer_grid(const Array& half_grid, std::size_t channel_axis = 1);

using ImageFilter = std::function<Image(const Image&)>;

// Denoises n_draws noisy copies (iid Gaussian, sigma) and takes the pixel-wise
// median. n_draws must be odd.
Image median_ensemble(const ImageFilter& denoise, const Image& frame, int n_draws, double noise_sigma,
                      std::uint64_t seed);
Image median_ensemble(const Model& model, const Image& frame, int n_draws, double noise_sigma, std::uint64_t seed);

}  // namespace mcd
