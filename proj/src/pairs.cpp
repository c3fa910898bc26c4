#include "mcd/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mcd/imaging.hpp"
#include "mcd/metrics.hpp"

namespace mcd {

std::string to_string(PairMode mode) {
  switch (mode) {
    case PairMode::spectral_train: return "spectral_train";
    case PairMode::spectral_infer: return "spectral_infer";
    case PairMode::temporal: return "temporal";
  }
  return "?";
}

PairSet::PairSet(std::shared_ptr<const Array> stack, std::vector<PairMeta> items)
    : stack_(std::move(stack)), items_(std::move(items)) {
  if (!stack_) throw ConfigError("PairSet: null stack");
  require_rank(stack_->shape(), 4, "PairSet stack (series, channel, h, w)");
}

PairSample PairSet::sample(std::size_t k) const {
  const PairMeta& m = items_.at(k);
  PairSample s;
  s.meta = m;
  for (auto c : m.input_channels) s.inputs.push_back(plane(*stack_, {m.series, c}));
  if (m.mode != PairMode::spectral_infer) s.target = plane(*stack_, {m.series, m.target_channel});
  return s;
}

std::size_t PairSet::input_arity() const {
  return items_.empty() ? 0 : items_.front().input_channels.size();
}

PairSet PairSet::restrict_to_series(std::span<const std::size_t> series) const {
  std::vector<PairMeta> kept;
  for (const auto& m : items_)
    if (std::binary_search(series.begin(), series.end(), m.series)) kept.push_back(m);
  return PairSet(stack_, std::move(kept));
}

PairSet spectral_train_pairs(std::shared_ptr<const Array> stack) {
  require_rank(stack->shape(), 4, "spectral_train_pairs");
  const std::size_t ni = stack->dim(0), nj = stack->dim(1);
  if (nj < 3) throw ConfigError("spectral_train_pairs: need at least 3 channels, got " + std::to_string(nj));
  std::vector<PairMeta> items;
  items.reserve(ni * (nj - 2));
  for (std::size_t i = 0; i < ni; ++i)
    for (std::size_t j = 1; j + 1 < nj; ++j)
      items.push_back({i, {j - 1, j + 1}, j, static_cast<double>(j), PairMode::spectral_train});
  return PairSet(std::move(stack), std::move(items));
}

PairSet spectral_infer_pairs(std::shared_ptr<const Array> stack) {
  require_rank(stack->shape(), 4, "spectral_infer_pairs");
  const std::size_t ni = stack->dim(0), nj = stack->dim(1);
  if (nj < 2) throw ConfigError("spectral_infer_pairs: need at least 2 channels, got " + std::to_string(nj));
  std::vector<PairMeta> items;
  items.reserve(ni * (nj - 1));
  for (std::size_t i = 0; i < ni; ++i)
    for (std::size_t j = 1; j < nj; ++j)
      items.push_back({i, {j - 1, j}, j, static_cast<double>(j) - 0.5, PairMode::spectral_infer});
  return PairSet(std::move(stack), std::move(items));
}

PairSet temporal_pairs(std::shared_ptr<const Array> series, double ssim_threshold, double data_range,
                       double prefilter_sigma) {
  require_rank(series->shape(), 4, "temporal_pairs");
  const std::size_t ni = series->dim(0), nt = series->dim(1);
  if (nt < 2) throw ConfigError("temporal_pairs: need at least 2 frames");
  if (!(ssim_threshold >= 0.0 && ssim_threshold <= 1.0)) throw ConfigError("temporal_pairs: threshold must be in [0,1]");
  if (data_range <= 0) {
    const auto [lo, hi] = std::minmax_element(series->values().begin(), series->values().end());
    data_range = std::max(*hi - *lo, 1e-12);
  }
  std::vector<PairMeta> items;
  for (std::size_t i = 0; i < ni; ++i) {
    Image prev = imaging::gaussian_blur(plane(*series, {i, 0}), prefilter_sigma);
    for (std::size_t j = 1; j < nt; ++j) {
      Image cur = imaging::gaussian_blur(plane(*series, {i, j}), prefilter_sigma);
      if (metrics::ssim(prev, cur, data_range) >= ssim_threshold)
        items.push_back({i, {j - 1}, j, static_cast<double>(j), PairMode::temporal});
      prev = std::move(cur);
    }
  }
  return PairSet(std::move(series), std::move(items));
}

std::size_t count_leakage(const PairSet& pairs) {
  std::size_t bad = 0;
  for (const auto& m : pairs.items()) {
    if (m.mode == PairMode::spectral_infer) continue;
    if (std::find(m.input_channels.begin(), m.input_channels.end(), m.target_channel) != m.input_channels.end()) ++bad;
  }
  return bad;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split(std::span<const std::size_t> indices,
                                                                    const SplitSpec& spec) {
  if (!(spec.ratio > 0.0 && spec.ratio < 1.0)) throw ConfigError("split: ratio must be in (0, 1)");
  const std::size_t n = indices.size();
  if (n < 2) throw ConfigError("split: need at least 2 indices");
  auto n_train = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> order(indices.begin(), indices.end());
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> val(order.begin() + static_cast<long>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {std::move(train), std::move(val)};
}

PairSample augment(const PairSample& sample, const AugmentConfig& cfg, std::uint64_t seed) {
  PairSample out = sample;
  if (sample.inputs.empty()) return out;
  const std::size_t h = sample.inputs.front().dim(0), w = sample.inputs.front().dim(1);
  if (cfg.crop > h || cfg.crop > w)
    throw ConfigError("augment: crop " + std::to_string(cfg.crop) + " exceeds image " + shape_string(sample.inputs.front().shape()));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform_int = [&](long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng); };

  // Draw every parameter up front so the transform is shared by all images.
  std::size_t r0 = 0, c0 = 0;
  if (cfg.crop) {
    r0 = static_cast<std::size_t>(uniform_int(0, static_cast<long>(h - cfg.crop)));
    c0 = static_cast<std::size_t>(uniform_int(0, static_cast<long>(w - cfg.crop)));
  }
  const bool flip_lr = cfg.flips && u01(rng) < 0.5;
  const bool flip_ud = cfg.flips && u01(rng) < 0.5;
  const int quarter_turns = cfg.rot90 ? static_cast<int>(uniform_int(0, 3)) : 0;
  const long dy = cfg.max_shift ? uniform_int(-cfg.max_shift, cfg.max_shift) : 0;
  const long dx = cfg.max_shift ? uniform_int(-cfg.max_shift, cfg.max_shift) : 0;
  const double angle = cfg.max_rotation_deg > 0 ? (2 * u01(rng) - 1) * cfg.max_rotation_deg : 0.0;
  const double scale = cfg.scale_jitter > 0 ? 1.0 + (2 * u01(rng) - 1) * cfg.scale_jitter : 1.0;
  const double shear = cfg.max_shear > 0 ? (2 * u01(rng) - 1) * cfg.max_shear : 0.0;
  const bool blur = cfg.blur_sigma_max > 0 && u01(rng) < cfg.blur_probability;
  const double sigma = blur ? u01(rng) * cfg.blur_sigma_max : 0.0;

  auto transform = [&](const Image& img) {
    Image t = cfg.crop ? imaging::crop(img, r0, c0, cfg.crop, cfg.crop) : img;
    if (flip_lr) t = imaging::flip_lr(t);
    if (flip_ud) t = imaging::flip_ud(t);
    if (quarter_turns) t = imaging::rot90(t, quarter_turns);
    if (dy || dx) t = imaging::shift(t, dy, dx);
    if (angle != 0.0 || scale != 1.0 || shear != 0.0) t = imaging::affine(t, angle, scale, shear);
    return t;
  };
  for (auto& img : out.inputs) {
    img = transform(img);
    if (blur) img = imaging::gaussian_blur(img, sigma);
  }
  if (!out.target.empty()) out.target = transform(out.target);
  return out;
}

}  // namespace mcd
