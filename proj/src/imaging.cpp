#include "mcd/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace mcd::imaging {

long reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Image crop(const Image& img, std::size_t row0, std::size_t col0, std::size_t rows, std::size_t cols) {
  if (row0 + rows > img.dim(0) || col0 + cols > img.dim(1))
    throw ConfigError("crop: window exceeds image " + shape_string(img.shape()));
  Image out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(img.data() + (row0 + r) * img.dim(1) + col0, cols, out.data() + r * cols);
  return out;
}

Image pad_reflect(const Image& img, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right) {
  const long h = static_cast<long>(img.dim(0)), w = static_cast<long>(img.dim(1));
  Image out({img.dim(0) + top + bottom, img.dim(1) + left + right});
  for (std::size_t r = 0; r < out.dim(0); ++r) {
    const long sr = reflect_index(static_cast<long>(r) - static_cast<long>(top), h);
    for (std::size_t c = 0; c < out.dim(1); ++c)
      out(r, c) = img(sr, reflect_index(static_cast<long>(c) - static_cast<long>(left), w));
  }
  return out;
}

Image rot90(const Image& img, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return img;
  const std::size_t h = img.dim(0), w = img.dim(1);
  Image out(k == 2 ? Shape{h, w} : Shape{w, h});
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double v = img(r, c);
      if (k == 1)
        out(w - 1 - c, r) = v;
      else if (k == 2)
        out(h - 1 - r, w - 1 - c) = v;
      else
        out(c, h - 1 - r) = v;
    }
  return out;
}

Image flip_lr(const Image& img) {
  Image out(img.shape());
  const std::size_t h = img.dim(0), w = img.dim(1);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) out(r, c) = img(r, w - 1 - c);
  return out;
}

Image flip_ud(const Image& img) {
  Image out(img.shape());
  const std::size_t h = img.dim(0), w = img.dim(1);
  for (std::size_t r = 0; r < h; ++r) std::copy_n(img.data() + (h - 1 - r) * w, w, out.data() + r * w);
  return out;
}

Image shift(const Image& img, long dy, long dx) {
  const long h = static_cast<long>(img.dim(0)), w = static_cast<long>(img.dim(1));
  Image out(img.shape());
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) out(r, c) = img(reflect_index(r - dy, h), reflect_index(c - dx, w));
  return out;
}

Image affine(const Image& img, double angle_deg, double scale, double shear) {
  if (!(scale > 0)) throw ConfigError("affine: scale must be > 0");
  const long h = static_cast<long>(img.dim(0)), w = static_cast<long>(img.dim(1));
  const double cy = 0.5 * static_cast<double>(h - 1), cx = 0.5 * static_cast<double>(w - 1);
  const double th = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  // Forward map A = R * S * H; we sample the source at A^{-1}(dest).
  // H = [[1, shear],[0,1]], S = scale*I, R = rotation.
  const double a00 = scale * c, a01 = scale * (c * shear - s);
  const double a10 = scale * s, a11 = scale * (s * shear + c);
  const double det = a00 * a11 - a01 * a10;
  const double i00 = a11 / det, i01 = -a01 / det, i10 = -a10 / det, i11 = a00 / det;
  Image out(img.shape());
  for (long r = 0; r < h; ++r)
    for (long col = 0; col < w; ++col) {
      const double y = static_cast<double>(r) - cy, x = static_cast<double>(col) - cx;
      const double sx = i00 * x + i01 * y + cx;
      const double sy = i10 * x + i11 * y + cy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      auto at = [&](long yy, long xx) { return img(reflect_index(yy, h), reflect_index(xx, w)); };
      out(r, col) = (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
                    ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
    }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  const long radius = std::max(1L, static_cast<long>(std::ceil(4.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

namespace {

Image separable(const Image& img, const std::vector<double>& k) {
  const long h = static_cast<long>(img.dim(0)), w = static_cast<long>(img.dim(1));
  const long radius = static_cast<long>(k.size() / 2);
  Image tmp(img.shape()), out(img.shape());
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double acc = 0;
      for (long i = -radius; i <= radius; ++i) acc += k[static_cast<std::size_t>(i + radius)] * img(r, reflect_index(c + i, w));
      tmp(r, c) = acc;
    }
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double acc = 0;
      for (long i = -radius; i <= radius; ++i) acc += k[static_cast<std::size_t>(i + radius)] * tmp(reflect_index(r + i, h), c);
      out(r, c) = acc;
    }
  return out;
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0) return img;
  return separable(img, gaussian_kernel(sigma));
}

Image box_blur(const Image& img, std::size_t width) {
  if (width % 2 == 0) throw ConfigError("box_blur: width must be odd");
  return separable(img, std::vector<double>(width, 1.0 / static_cast<double>(width)));
}

double mean(const Image& img) {
  return std::accumulate(img.values().begin(), img.values().end(), 0.0) / static_cast<double>(img.size());
}
double min_value(const Image& img) { return *std::min_element(img.values().begin(), img.values().end()); }
double max_value(const Image& img) { return *std::max_element(img.values().begin(), img.values().end()); }

}  // namespace mcd::imaging
