#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcd/ndarray.hpp"

namespace mcd {

enum class PairMode { spectral_train, spectral_infer, temporal };
std::string to_string(PairMode mode);

struct PairMeta {
  std::size_t series = 0;                  // angle, slice or sequence index i
  std::vector<std::size_t> input_channels;  // channel / frame indices fed to the model
  std::size_t target_channel = 0;           // unused for spectral_infer
  double nominal_index = 0;                 // channel index the output represents
  PairMode mode = PairMode::spectral_train;
};

struct PairSample {
  std::vector<Image> inputs;
  Image target;  // empty for inference pairs
  PairMeta meta;
};

// Index list over a shared (series, channel, h, w) stack; samples are
// materialised on demand.
class PairSet {
 public:
  PairSet() = default;
  PairSet(std::shared_ptr<const Array> stack, std::vector<PairMeta> items);

  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const PairMeta& meta(std::size_t k) const { return items_.at(k); }
  const std::vector<PairMeta>& items() const noexcept { return items_; }
  PairSample sample(std::size_t k) const;
  std::size_t input_arity() const;
  const Array& stack() const { return *stack_; }
  std::shared_ptr<const Array> shared_stack() const { return stack_; }

  // Pairs whose series index is in `series` (sorted).
  PairSet restrict_to_series(std::span<const std::size_t> series) const;

 private:
  std::shared_ptr<const Array> stack_;
  std::vector<PairMeta> items_;
};

// Inputs (j-1, j+1), target j for every interior channel 1 <= j <= J-2.
PairSet spectral_train_pairs(std::shared_ptr<const Array> stack);
// Inputs (j-1, j) for j = 1..J-1; the output sits at j - 0.5.
PairSet spectral_infer_pairs(std::shared_ptr<const Array> stack);
// (frame j-1 -> frame j) for consecutive frames with SSIM >= threshold.
// Frames are Gaussian-blurred by `prefilter_sigma` before the SSIM test only.
// SSIM uses `data_range`, or the stack's global range when <= 0.
PairSet temporal_pairs(std::shared_ptr<const Array> series, double ssim_threshold, double data_range = 0.0,
                       double prefilter_sigma = 0.0);

// Number of leakage violations (target channel among inputs) in a pair set.
std::size_t count_leakage(const PairSet& pairs);

struct SplitSpec {
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

// Random split of `indices` into (train, validation); train gets round(ratio*n)
// elements. Both outputs are sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split(std::span<const std::size_t> indices,
                                                                    const SplitSpec& spec);

struct AugmentConfig {
  std::size_t crop = 0;  // square crop side; 0 keeps the full image
  bool flips = false;
  bool rot90 = false;
  long max_shift = 0;             // integer translation, reflection padded
  double max_rotation_deg = 0.0;  // small-angle rotation
  double scale_jitter = 0.0;      // scale in [1 - j, 1 + j]
  double max_shear = 0.0;
  double blur_sigma_max = 0.0;    // Gaussian blur of the inputs only
  double blur_probability = 0.0;

  bool geometric_enabled() const {
    return crop || flips || rot90 || max_shift || max_rotation_deg > 0 || scale_jitter > 0 || max_shear > 0;
  }
};

// One random transform drawn from `seed`, applied identically to every input
// and the target; blur touches inputs only.
PairSample augment(const PairSample& sample, const AugmentConfig& config, std::uint64_t seed);

}  // namespace mcd
