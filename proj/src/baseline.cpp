#include "mcd/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mcd/error.hpp"
#include "mcd/imaging.hpp"

namespace mcd {

BaselineMethod parse_baseline_method(const std::string& name) {
  if (name == "gaussian") return BaselineMethod::gaussian;
  if (name == "median") return BaselineMethod::median;
  if (name == "nlm") return BaselineMethod::nlm;
  if (name == "tv") return BaselineMethod::tv;
  throw ConfigError("unknown baseline method '" + name + "' (gaussian | median | nlm | tv)");
}

std::string to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::gaussian: return "gaussian";
    case BaselineMethod::median: return "median";
    case BaselineMethod::nlm: return "nlm";
    case BaselineMethod::tv: return "tv";
  }
  return "?";
}

Image median_filter(const Image& image, std::size_t kernel_size) {
  require_rank(image.shape(), 2, "median_filter");
  if (kernel_size == 0 || kernel_size % 2 == 0) throw ConfigError("median_filter: kernel_size must be odd");
  const long r = static_cast<long>(kernel_size / 2);
  const long H = static_cast<long>(image.dim(0)), W = static_cast<long>(image.dim(1));
  Image out(image.shape());
  std::vector<double> win(kernel_size * kernel_size);
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      std::size_t n = 0;
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx)
          win[n++] = image(static_cast<std::size_t>(imaging::reflect_index(y + dy, H)),
                           static_cast<std::size_t>(imaging::reflect_index(x + dx, W)));
      std::nth_element(win.begin(), win.begin() + static_cast<long>(n / 2), win.end());
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = win[n / 2];
    }
  return out;
}

Image nlm_filter(const Image& image, std::size_t patch_radius, std::size_t search_radius, double h) {
  require_rank(image.shape(), 2, "nlm_filter");
  if (!(h > 0)) throw ConfigError("nlm_filter: h must be > 0");
  if (search_radius == 0) throw ConfigError("nlm_filter: search_radius must be >= 1");
  const long pr = static_cast<long>(patch_radius), sr = static_cast<long>(search_radius);
  const std::size_t pad = patch_radius + search_radius;
  const Image p = imaging::pad_reflect(image, pad, pad, pad, pad);
  const long H = static_cast<long>(image.dim(0)), W = static_cast<long>(image.dim(1));
  const long off = static_cast<long>(pad);
  const double patch_n = static_cast<double>((2 * pr + 1) * (2 * pr + 1));
  const double inv_h2 = 1.0 / (h * h);
  auto at = [&](long y, long x) { return p(static_cast<std::size_t>(y + off), static_cast<std::size_t>(x + off)); };
  Image out(image.shape());
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double wsum = 0, vsum = 0;
      for (long sy = -sr; sy <= sr; ++sy)
        for (long sx = -sr; sx <= sr; ++sx) {
          double d2 = 0;
          for (long py = -pr; py <= pr; ++py)
            for (long px = -pr; px <= pr; ++px) {
              const double d = at(y + py, x + px) - at(y + sy + py, x + sx + px);
              d2 += d * d;
            }
          const double wgt = std::exp(-(d2 / patch_n) * inv_h2);
          wsum += wgt;
          vsum += wgt * at(y + sy, x + sx);
        }
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = vsum / wsum;
    }
  return out;
}

Image tv_denoise(const Image& image, double weight, double tolerance, int max_iter) {
  require_rank(image.shape(), 2, "tv_denoise");
  if (!(weight > 0)) throw ConfigError("tv_denoise: weight must be > 0");
  if (!(tolerance > 0) || max_iter < 1) throw ConfigError("tv_denoise: tolerance must be > 0 and max_iter >= 1");
  const std::size_t H = image.dim(0), W = image.dim(1);
  const double tau = 0.125;
  Image px(image.shape()), py(image.shape()), div(image.shape());
  Image u = image;
  for (int it = 0; it < max_iter; ++it) {
    // div p with Neumann-consistent backward differences
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        double d = 0;
        d += (x + 1 < W ? px(y, x) : 0.0) - (x > 0 ? px(y, x - 1) : 0.0);
        d += (y + 1 < H ? py(y, x) : 0.0) - (y > 0 ? py(y - 1, x) : 0.0);
        div(y, x) = d;
      }
    double change = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double nu = image[i] + weight * div[i];
      change = std::max(change, std::abs(nu - u[i]));
      u[i] = nu;
    }
    // gradient of (div p + f / weight) = u / weight, forward differences
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double gx = x + 1 < W ? (u(y, x + 1) - u(y, x)) / weight : 0.0;
        const double gy = y + 1 < H ? (u(y + 1, x) - u(y, x)) / weight : 0.0;
        const double norm = 1.0 + tau * std::sqrt(gx * gx + gy * gy);
        px(y, x) = (px(y, x) + tau * gx) / norm;
        py(y, x) = (py(y, x) + tau * gy) / norm;
      }
    if (it > 0 && change < tolerance) break;
  }
  return u;
}

Image baseline(BaselineMethod method, const Image& image, const BaselineParams& params) {
  switch (method) {
    case BaselineMethod::gaussian:
      if (params.sigma < 0) throw ConfigError("gaussian baseline: sigma must be >= 0");
      return imaging::gaussian_blur(image, params.sigma);
    case BaselineMethod::median: return median_filter(image, params.kernel_size);
    case BaselineMethod::nlm: return nlm_filter(image, params.patch_radius, params.search_radius, params.h);
    case BaselineMethod::tv: return tv_denoise(image, params.tv_weight, params.tv_tolerance, params.tv_max_iter);
  }
  throw ConfigError("unknown baseline method");
}

}  // namespace mcd
