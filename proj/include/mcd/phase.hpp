#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcd/ndarray.hpp"

namespace mcd {

enum class ClampPolicy { error, clamp };
ClampPolicy parse_clamp_policy(const std::string& name);

struct PhaseConfig {
  double alpha = 0.0;          // low-pass strength, mm^2
  double pixel_size_mm = 1.0;
  bool symmetric_padding = false;  // mirror-pad to twice the size instead of periodic wrap
  ClampPolicy clamp = ClampPolicy::error;
  double clamp_floor = 1e-6;   // lower bound applied under ClampPolicy::clamp
};

// Multiplies the spectrum by 1 / (1 + alpha |k|^2), k = 2 pi f in rad/mm.
Image paganin_lowpass(const Image& image, const PhaseConfig& config);
// -ln(paganin_lowpass(image)); the image must be strictly positive.
Image paganin_filter(const Image& image, const PhaseConfig& config);
// Inverse transfer (1 + alpha |k|^2): maps a transmission image to the
// intensity that paganin_lowpass restores. Used by the temporal simulation.
Image phase_contrast_forward(const Image& transmission, const PhaseConfig& config);

// Transfer value of the low-pass at spatial frequency (fy, fx) in cycles/mm.
double paganin_transfer(double fy, double fx, double alpha);

// score_t = population std over mask pixels of frame_{t+1} - frame_t.
// `series` is (t, y, x); `mask` is (y, x), nonzero = background.
std::vector<double> flicker_score(const Array& series, const NdArray<std::uint8_t>& mask);

}  // namespace mcd
