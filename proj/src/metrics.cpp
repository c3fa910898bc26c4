#include "mcd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcd::metrics {

double psnr(const Image& image, const Image& reference, double data_range) {
  require_same_shape(image.shape(), reference.shape(), "psnr");
  if (!(data_range > 0)) throw ConfigError("psnr: data_range must be > 0");
  double mse = 0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double d = image[i] - reference[i];
    mse += d * d;
  }
  mse /= static_cast<double>(image.size());
  if (mse == 0.0) return psnr_identical;
  return 20.0 * std::log10(data_range) - 10.0 * std::log10(mse);
}

namespace {

double ssim_from_moments(double sx, double sy, double sxx, double syy, double sxy, double n, double c1, double c2) {
  const double mx = sx / n, my = sy / n;
  const double cov_norm = n / (n - 1.0);
  const double vx = cov_norm * (sxx / n - mx * mx);
  const double vy = cov_norm * (syy / n - my * my);
  const double vxy = cov_norm * (sxy / n - mx * my);
  return ((2 * mx * my + c1) * (2 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

void check_params(const SsimParams& p, double data_range) {
  if (p.window < 3 || p.window % 2 == 0) throw ConfigError("ssim: window must be odd and >= 3");
  if (!(data_range > 0)) throw ConfigError("ssim: data_range must be > 0");
}

}  // namespace

double ssim(const Image& a, const Image& b, double data_range, SsimParams p) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  require_rank(a.shape(), 2, "ssim");
  check_params(p, data_range);
  const std::size_t h = a.dim(0), w = a.dim(1), win = p.window;
  if (h < win || w < win) throw DataError("ssim: image smaller than the window");
  const double c1 = (p.k1 * data_range) * (p.k1 * data_range);
  const double c2 = (p.k2 * data_range) * (p.k2 * data_range);

  // Summed-area tables with a zero border row/column.
  const std::size_t W = w + 1;
  std::vector<double> ix((h + 1) * W, 0), iy(ix), ixx(ix), iyy(ix), ixy(ix);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double x = a(r, c), y = b(r, c);
      const std::size_t k = (r + 1) * W + (c + 1), up = r * W + (c + 1), left = (r + 1) * W + c, diag = r * W + c;
      ix[k] = x + ix[up] + ix[left] - ix[diag];
      iy[k] = y + iy[up] + iy[left] - iy[diag];
      ixx[k] = x * x + ixx[up] + ixx[left] - ixx[diag];
      iyy[k] = y * y + iyy[up] + iyy[left] - iyy[diag];
      ixy[k] = x * y + ixy[up] + ixy[left] - ixy[diag];
    }
  auto box = [&](const std::vector<double>& t, std::size_t r, std::size_t c) {
    return t[(r + win) * W + (c + win)] - t[r * W + (c + win)] - t[(r + win) * W + c] + t[r * W + c];
  };
  const double n = static_cast<double>(win * win);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + win <= h; ++r)
    for (std::size_t c = 0; c + win <= w; ++c) {
      total += ssim_from_moments(box(ix, r, c), box(iy, r, c), box(ixx, r, c), box(iyy, r, c), box(ixy, r, c), n, c1, c2);
      ++count;
    }
  return total / static_cast<double>(count);
}

double ssim_1d(std::span<const double> a, std::span<const double> b, double data_range, SsimParams p) {
  if (a.size() != b.size()) throw DataError("ssim_1d: length mismatch");
  check_params(p, data_range);
  const std::size_t n = a.size(), win = p.window;
  if (n < win) throw DataError("ssim_1d: signal shorter than the window");
  const double c1 = (p.k1 * data_range) * (p.k1 * data_range);
  const double c2 = (p.k2 * data_range) * (p.k2 * data_range);
  double total = 0;
  for (std::size_t s = 0; s + win <= n; ++s) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = s; i < s + win; ++i) {
      sx += a[i], sy += b[i], sxx += a[i] * a[i], syy += b[i] * b[i], sxy += a[i] * b[i];
    }
    total += ssim_from_moments(sx, sy, sxx, syy, sxy, static_cast<double>(win), c1, c2);
  }
  return total / static_cast<double>(n - win + 1);
}

std::map<int, std::vector<double>> mean_region_spectra(const Array& volume, const NdArray<std::uint16_t>& labels) {
  if (volume.rank() != labels.rank() + 1) throw DataError("mean_region_spectra: volume must be (channel, labels shape...)");
  if (!std::equal(labels.shape().begin(), labels.shape().end(), volume.shape().begin() + 1))
    throw DataError("mean_region_spectra: label shape does not match volume");
  const std::size_t nc = volume.dim(0), nv = labels.size();
  std::map<int, std::vector<double>> sums;
  std::map<int, std::size_t> counts;
  for (std::size_t v = 0; v < nv; ++v) {
    auto& s = sums[labels[v]];
    if (s.empty()) s.assign(nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c) s[c] += volume[c * nv + v];
    ++counts[labels[v]];
  }
  for (auto& [k, s] : sums)
    for (auto& v : s) v /= static_cast<double>(counts[k]);
  return sums;
}

std::map<int, std::optional<double>> spectral_ssim(const Array& volume,
                                                   const std::map<int, std::vector<double>>& reference,
                                                   const NdArray<std::uint16_t>& labels, SsimParams params) {
  const std::size_t nc = volume.dim(0);
  for (const auto& [k, ref] : reference)
    if (ref.size() != nc)
      throw DataError("spectral_ssim: reference spectrum for label " + std::to_string(k) + " has " +
                      std::to_string(ref.size()) + " channels, volume has " + std::to_string(nc));
  const auto means = mean_region_spectra(volume, labels);
  std::map<int, std::optional<double>> out;
  for (const auto& [k, ref] : reference) {
    auto it = means.find(k);
    if (it == means.end()) {
      out[k] = std::nullopt;
      continue;
    }
    const auto [lo, hi] = std::minmax_element(ref.begin(), ref.end());
    const double range = *hi - *lo > 0 ? *hi - *lo : 1.0;
    out[k] = ssim_1d(it->second, ref, range, params);
  }
  return out;
}

std::optional<double> auprc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw DataError("auprc: scores and labels differ in length");
  const std::size_t n = scores.size();
  const std::size_t n_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(), [](auto p) { return p != 0; }));
  if (n_pos == 0) return std::nullopt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0, prev_recall = 0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < n;) {
    const double s = scores[order[k]];
    while (k < n && scores[order[k]] == s) {
      (positive[order[k]] ? tp : fp) += 1;
      ++k;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

AuprcReport auprc_per_class(const Array& fractions, const NdArray<std::uint16_t>& labels) {
  if (fractions.rank() < 1 || fractions.size() != fractions.dim(0) * labels.size())
    throw DataError("auprc_per_class: fractions must be (class, voxels) matching labels");
  const std::size_t nk = fractions.dim(0), nv = labels.size();
  AuprcReport r;
  double sum = 0;
  std::size_t defined = 0;
  std::vector<std::uint8_t> pos(nv);
  for (std::size_t k = 0; k < nk; ++k) {
    for (std::size_t v = 0; v < nv; ++v) pos[v] = labels[v] == k;
    auto a = auprc(std::span<const double>(fractions.data() + k * nv, nv), pos);
    r.per_class.push_back(a);
    if (a) sum += *a, ++defined;
  }
  r.mean = defined ? sum / static_cast<double>(defined) : 0.0;
  return r;
}

ConfusionMatrix confusion(const NdArray<std::uint16_t>& truth, const NdArray<std::uint16_t>& predicted,
                          std::size_t n_classes) {
  require_same_shape(truth.shape(), predicted.shape(), "confusion");
  ConfusionMatrix m{NdArray<std::uint64_t>({n_classes, n_classes}, 0), Array({n_classes, n_classes}, 0.0),
                    NdArray<std::uint8_t>(truth.shape(), 0)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::size_t t = truth[i], p = predicted[i];
    if (t >= n_classes || p >= n_classes)
      throw DataError("confusion: label " + std::to_string(std::max(t, p)) + " outside the " +
                      std::to_string(n_classes) + "-class material set");
    ++m.counts(t, p);
    m.error_map[i] = t != p;
  }
  for (std::size_t t = 0; t < n_classes; ++t) {
    std::uint64_t row = 0;
    for (std::size_t p = 0; p < n_classes; ++p) row += m.counts(t, p);
    if (row == 0) continue;
    for (std::size_t p = 0; p < n_classes; ++p)
      m.rates(t, p) = static_cast<double>(m.counts(t, p)) / static_cast<double>(row);
  }
  return m;
}

}  // namespace mcd::metrics
