#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mcd/ndarray.hpp"

namespace mcd::metrics {

// PSNR of identical images. Reports print it as "inf".
inline constexpr double psnr_identical = std::numeric_limits<double>::infinity();

// 20 log10(range) - 10 log10(MSE) in dB.
double psnr(const Image& image, const Image& reference, double data_range);

struct SsimParams {
  std::size_t window = 7;  // odd; uniform window
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean SSIM over every fully contained window, C1 = (k1 L)^2, C2 = (k2 L)^2,
// sample (N-1) covariance normalisation.
double ssim(const Image& image, const Image& reference, double data_range, SsimParams params = {});
double ssim_1d(std::span<const double> a, std::span<const double> b, double data_range, SsimParams params = {});

// 1D SSIM between the mean voxel spectrum inside each labelled region and its
// reference spectrum. `volume` is (channel, z, y, x), `labels` (z, y, x).
// Regions without voxels yield no score.
std::map<int, std::optional<double>> spectral_ssim(const Array& volume,
                                                   const std::map<int, std::vector<double>>& reference,
                                                   const NdArray<std::uint16_t>& labels, SsimParams params = {});

// Mean in-region spectrum per label (channel-long vectors).
std::map<int, std::vector<double>> mean_region_spectra(const Array& volume, const NdArray<std::uint16_t>& labels);

// Area under the precision-recall curve: thresholds at every distinct score,
// AP = sum_k (R_k - R_{k-1}) P_k. Empty when there are no positives.
std::optional<double> auprc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct AuprcReport {
  std::vector<std::optional<double>> per_class;  // indexed by class / material index
  double mean = 0.0;                             // over classes with a defined value
};

// One-vs-rest AUPRC using `fractions` (class, voxels...) as scores against
// integer labels with the same voxel layout.
AuprcReport auprc_per_class(const Array& fractions, const NdArray<std::uint16_t>& labels);

struct ConfusionMatrix {
  NdArray<std::uint64_t> counts;  // (true, predicted)
  Array rates;                    // row-normalised; zero rows for absent classes
  NdArray<std::uint8_t> error_map;  // 1 where predicted != true, labels' shape
};

ConfusionMatrix confusion(const NdArray<std::uint16_t>& truth, const NdArray<std::uint16_t>& predicted,
                          std::size_t n_classes);

}  // namespace mcd::metrics
