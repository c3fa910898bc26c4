#include "mcd/projector.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <fftw3.h>

#include "mcd/random.hpp"

namespace mcd {

std::vector<double> equispaced_angles(std::size_t n) {
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = 180.0 * static_cast<double>(i) / static_cast<double>(n);
  return a;
}

std::size_t default_detector_count(std::size_t slice_size) {
  auto d = static_cast<std::size_t>(std::ceil(static_cast<double>(slice_size) * std::numbers::sqrt2));
  return d % 2 ? d : d + 1;
}

RampFilter parse_ramp_filter(const std::string& name) {
  if (name == "ramp" || name == "ram_lak" || name == "ram-lak") return RampFilter::ram_lak;
  if (name == "hann" || name == "hann-ramp" || name == "hann_ramp") return RampFilter::hann;
  throw ConfigError("unknown FBP filter '" + name + "' (expected ramp | hann-ramp)");
}

namespace {

void check_geometry(const ParallelGeometry& g, std::size_t slice_size) {
  if (g.angles_deg.empty()) throw ConfigError("projector: empty angle list");
  if (!(g.pixel_size_mm > 0)) throw ConfigError("projector: pixel size must be > 0");
  if (g.detector_count < slice_size)
    throw ConfigError("projector: detector_count " + std::to_string(g.detector_count) + " < slice width " +
                      std::to_string(slice_size));
}

// Walks every sample of every ray and hands (angle, u, pixel, weight) to `visit`.
// Weights already include the sample step (mm), so radon = sum(weight * pixel).
template <class Visit>
void for_each_ray_sample(std::size_t n, const ParallelGeometry& g, Visit&& visit) {
  const double c0 = 0.5 * static_cast<double>(n - 1);
  const double u0 = 0.5 * static_cast<double>(g.detector_count - 1);
  const double dt = 0.5;  // in pixel units
  const double reach = 0.5 * static_cast<double>(n) * std::numbers::sqrt2 + 1.0;
  const long m_max = static_cast<long>(std::ceil(reach / dt));
  const double w_step = dt * g.pixel_size_mm;
  const long ni = static_cast<long>(n);
  for (std::size_t ia = 0; ia < g.angles_deg.size(); ++ia) {
    const double th = g.angles_deg[ia] * std::numbers::pi / 180.0;
    const double ct = std::cos(th), st = std::sin(th);
    for (std::size_t iu = 0; iu < g.detector_count; ++iu) {
      const double u = static_cast<double>(iu) - u0;
      for (long m = -m_max; m <= m_max; ++m) {
        const double t = static_cast<double>(m) * dt;
        const double fx = u * ct - t * st + c0;  // column
        const double fy = u * st + t * ct + c0;  // row
        const double flx = std::floor(fx), fly = std::floor(fy);
        const long x0 = static_cast<long>(flx), y0 = static_cast<long>(fly);
        if (x0 < -1 || y0 < -1 || x0 >= ni || y0 >= ni) continue;
        const double ax = fx - flx, ay = fy - fly;
        const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
        const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
        const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
        for (int k = 0; k < 4; ++k) {
          if (xs[k] < 0 || ys[k] < 0 || xs[k] >= ni || ys[k] >= ni || w[k] == 0.0) continue;
          visit(ia, iu, static_cast<std::size_t>(ys[k]) * n + static_cast<std::size_t>(xs[k]), w[k] * w_step);
        }
      }
    }
  }
}

// Frequency response of the band-limited ramp on a zero-padded length.
std::vector<double> ramp_response(std::size_t padded, double tau, RampFilter filter) {
  std::vector<double> h(padded, 0.0);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  h[0] = 1.0 / (4.0 * tau * tau);
  for (std::size_t n = 1; n <= padded / 2; ++n) {
    if (n % 2 == 1) {
      const double v = -1.0 / (static_cast<double>(n * n) * pi2 * tau * tau);
      h[n] = v;
      h[padded - n] = v;
    }
  }
  std::vector<std::complex<double>> spec(padded / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(padded), h.data(),
                                        reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  std::vector<double> resp(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    double r = spec[k].real() * tau;
    if (filter == RampFilter::hann)
      r *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(padded / 2)));
    resp[k] = r;
  }
  return resp;
}

}  // namespace

Image radon(const Image& slice, const ParallelGeometry& geom) {
  require_rank(slice.shape(), 2, "radon");
  if (slice.dim(0) != slice.dim(1)) throw ConfigError("radon: slice must be square");
  const std::size_t n = slice.dim(0);
  check_geometry(geom, n);
  Image sino({geom.angles_deg.size(), geom.detector_count}, 0.0);
  const double* px = slice.data();
  double* out = sino.data();
  const std::size_t nd = geom.detector_count;
  for_each_ray_sample(n, geom, [&](std::size_t ia, std::size_t iu, std::size_t pix, double w) {
    out[ia * nd + iu] += w * px[pix];
  });
  return sino;
}

Image backproject(const Image& sinogram, const ParallelGeometry& geom, std::size_t output_size) {
  require_rank(sinogram.shape(), 2, "backproject");
  check_geometry(geom, output_size);
  if (sinogram.dim(0) != geom.angles_deg.size() || sinogram.dim(1) != geom.detector_count)
    throw DataError("backproject: sinogram shape " + shape_string(sinogram.shape()) + " does not match geometry");
  Image img({output_size, output_size}, 0.0);
  double* out = img.data();
  const double* s = sinogram.data();
  const std::size_t nd = geom.detector_count;
  for_each_ray_sample(output_size, geom, [&](std::size_t ia, std::size_t iu, std::size_t pix, double w) {
    out[pix] += w * s[ia * nd + iu];
  });
  return img;
}

Image fbp(const Image& sinogram, const ParallelGeometry& geom, RampFilter filter, std::size_t output_size) {
  require_rank(sinogram.shape(), 2, "fbp");
  check_geometry(geom, output_size);
  const std::size_t na = sinogram.dim(0), nd = sinogram.dim(1);
  if (na < 2) throw ConfigError("fbp: need at least 2 angles");
  if (na != geom.angles_deg.size()) throw DataError("fbp: sinogram has " + std::to_string(na) + " angles, geometry " +
                                                    std::to_string(geom.angles_deg.size()));
  if (nd != geom.detector_count)
    throw DataError("fbp: sinogram has " + std::to_string(nd) + " detector bins, geometry expects " +
                    std::to_string(geom.detector_count));

  std::size_t padded = 64;
  while (padded < 2 * nd) padded *= 2;
  const auto resp = ramp_response(padded, geom.pixel_size_mm, filter);

  // Filter every projection.
  Image filtered({na, nd}, 0.0);
  std::vector<double> row(padded);
  std::vector<std::complex<double>> spec(padded / 2 + 1);
  fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(padded), row.data(),
                                       reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
  fftw_plan inv = fftw_plan_dft_c2r_1d(static_cast<int>(padded), reinterpret_cast<fftw_complex*>(spec.data()),
                                       row.data(), FFTW_ESTIMATE);
  for (std::size_t a = 0; a < na; ++a) {
    std::fill(row.begin(), row.end(), 0.0);
    std::copy_n(sinogram.data() + a * nd, nd, row.begin());
    fftw_execute(fwd);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= resp[k];
    fftw_execute(inv);
    for (std::size_t u = 0; u < nd; ++u) filtered(a, u) = row[u] / static_cast<double>(padded);
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(inv);

  // Pixel-driven back projection with linear interpolation along u.
  const std::size_t n = output_size;
  const double c0 = 0.5 * static_cast<double>(n - 1);
  const double u0 = 0.5 * static_cast<double>(nd - 1);
  Image img({n, n}, 0.0);
  const double dtheta = std::numbers::pi / static_cast<double>(na);
  for (std::size_t a = 0; a < na; ++a) {
    const double th = geom.angles_deg[a] * std::numbers::pi / 180.0;
    const double ct = std::cos(th), st = std::sin(th);
    const double* q = filtered.data() + a * nd;
    for (std::size_t r = 0; r < n; ++r) {
      const double y = static_cast<double>(r) - c0;
      double* out = img.data() + r * n;
      for (std::size_t c = 0; c < n; ++c) {
        const double x = static_cast<double>(c) - c0;
        const double fu = x * ct + y * st + u0;
        const double fl = std::floor(fu);
        const long k = static_cast<long>(fl);
        if (k < 0 || k + 1 >= static_cast<long>(nd)) continue;
        const double w = fu - fl;
        out[c] += (1 - w) * q[k] + w * q[k + 1];
      }
    }
  }
  for (auto& v : img.values()) v *= dtheta;
  return img;
}

Array material_path_lengths(const NdArray<std::uint16_t>& label_slice, std::span<const int> material_ids,
                            const ParallelGeometry& geom) {
  require_rank(label_slice.shape(), 2, "material_path_lengths");
  const std::size_t n = label_slice.dim(0);
  Array out({material_ids.size(), geom.angles_deg.size(), geom.detector_count}, 0.0);
  const std::size_t block = geom.angles_deg.size() * geom.detector_count;
  for (std::size_t m = 0; m < material_ids.size(); ++m) {
    Image mask({n, label_slice.dim(1)}, 0.0);
    bool any = false;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (label_slice[i] == material_ids[m]) mask[i] = 1.0, any = true;
    if (!any) continue;
    const Image s = radon(mask, geom);
    std::copy_n(s.data(), block, out.data() + m * block);
  }
  return out;
}

std::vector<double> flat_counts(const SourceSpectrum& source, double exposure_scale, double pixel_size_mm) {
  if (!(exposure_scale > 0)) throw ConfigError("exposure_scale must be > 0");
  std::vector<double> f(source.photons_per_mm2.size());
  const double area = pixel_size_mm * pixel_size_mm;
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = source.photons_per_mm2[j] * area * exposure_scale;
  return f;
}

Array expected_counts(const Array& path_lengths, std::span<const MaterialSpectrum* const> materials,
                      const SourceSpectrum& source, double exposure_scale, double pixel_size_mm) {
  require_rank(path_lengths.shape(), 3, "expected_counts");
  if (path_lengths.dim(0) != materials.size()) throw DataError("expected_counts: material count mismatch");
  const std::size_t na = path_lengths.dim(1), nu = path_lengths.dim(2);
  const std::size_t nc = source.photons_per_mm2.size();
  const auto flat = flat_counts(source, exposure_scale, pixel_size_mm);
  Array out({na, nc, nu}, 0.0);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t j = 0; j < nc; ++j)
      for (std::size_t u = 0; u < nu; ++u) {
        double att = 0.0;
        for (std::size_t m = 0; m < materials.size(); ++m) att += materials[m]->mu[j] * path_lengths(m, a, u);
        out(a, j, u) = flat[j] * std::exp(-att);
      }
  return out;
}

SpectralSinogram forward_spectral(const NdArray<std::uint16_t>& label_slice,
                                  const std::map<int, MaterialSpectrum>& materials, const EnergyGrid& grid,
                                  const SourceSpectrum& source, double exposure_scale,
                                  const ParallelGeometry& geom) {
  require_rank(label_slice.shape(), 2, "forward_spectral");
  validate(source, grid);
  std::vector<int> ids;
  std::vector<const MaterialSpectrum*> specs;
  std::vector<bool> seen(65536, false);
  for (auto v : label_slice.values()) seen[v] = true;
  for (int id = 1; id < 65536; ++id) {
    if (!seen[static_cast<std::size_t>(id)]) continue;
    auto it = materials.find(id);
    if (it == materials.end()) throw ConfigError("forward_spectral: label " + std::to_string(id) + " has no material");
    validate(it->second, grid);
    ids.push_back(id);
    specs.push_back(&it->second);
  }
  const Array paths = material_path_lengths(label_slice, ids, geom);
  return {expected_counts(paths, specs, source, exposure_scale, geom.pixel_size_mm), geom.angles_deg, grid,
          SinogramKind::counts};
}

Array poissonize(const Array& expected, std::uint64_t seed) {
  Array out(expected.shape(), 0.0);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double lam = expected[i];
    if (!(lam >= 0) || !std::isfinite(lam))
      throw InvariantError("poissonize: invalid expectation " + std::to_string(lam) + " at element " + std::to_string(i));
    if (lam == 0.0) continue;
    SplitMix64 eng(stream_seed(seed, i));
    std::poisson_distribution<long long> dist(lam);
    out[i] = static_cast<double>(dist(eng));
  }
  return out;
}

SpectralSinogram poissonize(const SpectralSinogram& expected, std::uint64_t seed) {
  if (expected.kind != SinogramKind::counts) throw ConfigError("poissonize: input must hold expected counts");
  return {poissonize(expected.data, seed), expected.angles_deg, expected.grid, SinogramKind::counts};
}

Array neg_log_normalize(const Array& counts, const Array& flat, double floor) {
  const auto& cs = counts.shape();
  const auto& fs = flat.shape();
  if (fs.size() > cs.size() || !std::equal(fs.rbegin(), fs.rend(), cs.rbegin()))
    throw DataError("neg_log_normalize: flat shape " + shape_string(fs) + " is not a suffix of " + shape_string(cs));
  if (!(floor > 0)) throw ConfigError("neg_log_normalize: floor must be > 0");
  for (double f : flat.values())
    if (!(f > 0)) throw DataError("neg_log_normalize: flat field must be strictly positive");
  Array out(cs, 0.0);
  const std::size_t block = flat.size();
  for (std::size_t i = 0; i < counts.size(); ++i)
    out[i] = -std::log(std::max(counts[i], floor) / flat[i % block]);
  return out;
}

Array white_beam(const Array& a, std::size_t channel_axis) {
  if (channel_axis >= a.rank()) throw ConfigError("white_beam: channel axis out of range");
  if (a.dim(channel_axis) < 1) throw DataError("white_beam: no channels");
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(channel_axis));
  Array out(out_shape, 0.0);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < channel_axis; ++i) outer *= a.dim(i);
  for (std::size_t i = channel_axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
  const std::size_t nc = a.dim(channel_axis);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += a[(o * nc + c) * inner + i];
  return out;
}

}  // namespace mcd
