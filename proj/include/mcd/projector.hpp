#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mcd/ndarray.hpp"
#include "mcd/spectra.hpp"

namespace mcd {

// Parallel-beam geometry for an N x N slice of square pixels. The detector
// pitch equals the pixel size and the detector is centred on the rotation axis.
struct ParallelGeometry {
  std::vector<double> angles_deg;
  std::size_t detector_count = 0;
  double pixel_size_mm = 1.0;
};

// n angles equally spaced over [0, 180).
std::vector<double> equispaced_angles(std::size_t n);
// Smallest odd detector count covering the slice diagonal.
std::size_t default_detector_count(std::size_t slice_size);

// Line integrals (angle, u) in value*mm. Ray-driven: each ray is sampled at
// half-pixel steps with bilinear interpolation.
Image radon(const Image& slice, const ParallelGeometry& geom);

// Exact adjoint of radon(): scatters sinogram values with the same weights.
Image backproject(const Image& sinogram, const ParallelGeometry& geom, std::size_t output_size);

enum class RampFilter { ram_lak, hann };
RampFilter parse_ramp_filter(const std::string& name);

// Filtered back projection of a single-channel sinogram (angle, u) onto an
// output_size x output_size grid with the geometry's pixel size. Uses a
// band-limited spatial ramp kernel and pixel-driven linear back-interpolation.
Image fbp(const Image& sinogram, const ParallelGeometry& geom, RampFilter filter, std::size_t output_size);

enum class SinogramKind { counts, attenuation };

struct SpectralSinogram {
  Array data;  // (angle, channel, u)
  std::vector<double> angles_deg;
  EnergyGrid grid;
  SinogramKind kind = SinogramKind::counts;
};

// Path length in mm of each listed material along every ray: (material, angle, u).
Array material_path_lengths(const NdArray<std::uint16_t>& label_slice, std::span<const int> material_ids,
                            const ParallelGeometry& geom);

// Expected counts (angle, channel, u) from per-material path lengths.
// pixel area = pixel_size^2.
Array expected_counts(const Array& path_lengths, std::span<const MaterialSpectrum* const> materials,
                      const SourceSpectrum& source, double exposure_scale, double pixel_size_mm);

// Expected counts N = source * area * exposure * exp(-sum_m mu_m L_m).
// `materials` maps label value -> spectrum; every nonzero label must be present.
SpectralSinogram forward_spectral(const NdArray<std::uint16_t>& label_slice,
                                  const std::map<int, MaterialSpectrum>& materials, const EnergyGrid& grid,
                                  const SourceSpectrum& source, double exposure_scale,
                                  const ParallelGeometry& geom);

// Flat-field counts (channel) for an unattenuated ray.
std::vector<double> flat_counts(const SourceSpectrum& source, double exposure_scale, double pixel_size_mm);

// Independent Poisson draws; element i uses a stream keyed by (seed, i), so the
// result does not depend on evaluation order.
Array poissonize(const Array& expected, std::uint64_t seed);
SpectralSinogram poissonize(const SpectralSinogram& expected, std::uint64_t seed);

// -ln(max(counts, floor) / flat). `flat` has the shape of a trailing suffix of
// `counts` and is broadcast over the leading axes.
Array neg_log_normalize(const Array& counts, const Array& flat, double floor = 1.0);

// Sum over `channel_axis`.
Array white_beam(const Array& a, std::size_t channel_axis);

}  // namespace mcd
