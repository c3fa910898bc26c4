#include "mcd/phase.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <fftw3.h>

#include "mcd/error.hpp"

namespace mcd {

ClampPolicy parse_clamp_policy(const std::string& name) {
  if (name == "error") return ClampPolicy::error;
  if (name == "clamp") return ClampPolicy::clamp;
  throw ConfigError("unknown clamp policy '" + name + "' (error | clamp)");
}

double paganin_transfer(double fy, double fx, double alpha) {
  const double k2 = 4.0 * std::numbers::pi * std::numbers::pi * (fy * fy + fx * fx);
  return 1.0 / (1.0 + alpha * k2);
}

namespace {

void check(const PhaseConfig& c) {
  if (!(c.alpha >= 0)) throw ConfigError("phase: alpha must be >= 0");
  if (!(c.pixel_size_mm > 0)) throw ConfigError("phase: pixel_size_mm must be > 0");
}

// Signed frequency (cycles/mm) of DFT index i on an n-point grid.
double freq(std::size_t i, std::size_t n, double pixel) {
  const long s = i <= n / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
  return static_cast<double>(s) / (static_cast<double>(n) * pixel);
}

// Applies transfer(fy, fx) in the Fourier domain.
template <class Transfer>
Image fourier_filter(const Image& image, const PhaseConfig& cfg, Transfer transfer) {
  require_rank(image.shape(), 2, "phase filter");
  const std::size_t H = image.dim(0), W = image.dim(1);
  const std::size_t PH = cfg.symmetric_padding ? 2 * H : H, PW = cfg.symmetric_padding ? 2 * W : W;
  std::vector<double> buf(PH * PW);
  for (std::size_t y = 0; y < PH; ++y)
    for (std::size_t x = 0; x < PW; ++x) {
      const std::size_t sy = y < H ? y : 2 * H - 1 - y, sx = x < W ? x : 2 * W - 1 - x;
      buf[y * PW + x] = image(sy, sx);
    }
  const std::size_t CW = PW / 2 + 1;
  std::vector<std::complex<double>> spec(PH * CW);
  fftw_plan fwd = fftw_plan_dft_r2c_2d(static_cast<int>(PH), static_cast<int>(PW), buf.data(),
                                       reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
  fftw_plan inv = fftw_plan_dft_c2r_2d(static_cast<int>(PH), static_cast<int>(PW),
                                       reinterpret_cast<fftw_complex*>(spec.data()), buf.data(), FFTW_ESTIMATE);
  fftw_execute(fwd);
  const double norm = 1.0 / static_cast<double>(PH * PW);
  for (std::size_t y = 0; y < PH; ++y) {
    const double fy = freq(y, PH, cfg.pixel_size_mm);
    for (std::size_t x = 0; x < CW; ++x) spec[y * CW + x] *= transfer(fy, freq(x, PW, cfg.pixel_size_mm)) * norm;
  }
  fftw_execute(inv);
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(inv);
  Image out(image.shape());
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) out(y, x) = buf[y * PW + x];
  return out;
}

}  // namespace

Image paganin_lowpass(const Image& image, const PhaseConfig& config) {
  check(config);
  if (config.alpha == 0) return image;
  return fourier_filter(image, config, [&](double fy, double fx) { return paganin_transfer(fy, fx, config.alpha); });
}

Image phase_contrast_forward(const Image& transmission, const PhaseConfig& config) {
  check(config);
  if (config.alpha == 0) return transmission;
  return fourier_filter(transmission, config,
                        [&](double fy, double fx) { return 1.0 / paganin_transfer(fy, fx, config.alpha); });
}

Image paganin_filter(const Image& image, const PhaseConfig& config) {
  check(config);
  if (config.clamp == ClampPolicy::error)
    for (std::size_t i = 0; i < image.size(); ++i)
      if (!(image[i] > 0))
        throw DataError("paganin_filter: non-positive pixel " + std::to_string(image[i]) + " at flat index " +
                        std::to_string(i));
  Image out = paganin_lowpass(image, config);
  for (auto& v : out.storage()) {
    if (!(v > 0)) {
      if (config.clamp == ClampPolicy::error)
        throw DataError("paganin_filter: filtered intensity is non-positive; use the clamp policy");
      v = config.clamp_floor;
    }
    v = -std::log(std::max(v, config.clamp == ClampPolicy::clamp ? config.clamp_floor : 0.0));
  }
  return out;
}

std::vector<double> flicker_score(const Array& series, const NdArray<std::uint8_t>& mask) {
  require_rank(series.shape(), 3, "flicker_score");
  if (series.dim(0) < 2) throw ConfigError("flicker_score: needs >= 2 frames");
  require_same_shape(mask.shape(), Shape{series.dim(1), series.dim(2)}, "flicker_score mask");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  if (idx.empty()) throw ConfigError("flicker_score: empty background mask");
  const std::size_t plane = mask.size();
  std::vector<double> scores;
  for (std::size_t t = 0; t + 1 < series.dim(0); ++t) {
    double s = 0, s2 = 0;
    for (auto i : idx) {
      const double d = series[(t + 1) * plane + i] - series[t * plane + i];
      s += d;
      s2 += d * d;
    }
    const double n = static_cast<double>(idx.size());
    const double mean = s / n;
    scores.push_back(std::sqrt(std::max(0.0, s2 / n - mean * mean)));
  }
  return scores;
}

}  // namespace mcd
