#pragma once

// Small 2D image utilities shared by augmentation, baselines and metrics.

#include <cstddef>
#include <vector>

#include "mcd/ndarray.hpp"

namespace mcd::imaging {

// Symmetric (half-sample) reflection of an index into [0, n).
long reflect_index(long i, long n);

Image crop(const Image& img, std::size_t row0, std::size_t col0, std::size_t rows, std::size_t cols);
// Reflection padding on all sides.
Image pad_reflect(const Image& img, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right);

// k quarter turns counter-clockwise.
Image rot90(const Image& img, int k);
Image flip_lr(const Image& img);
Image flip_ud(const Image& img);
// Integer translation with reflection at the borders.
Image shift(const Image& img, long dy, long dx);

// Bilinear resampling under the inverse map of a rotation by `angle_deg`
// about the centre combined with isotropic `scale` and a shear; reflection
// boundary.
Image affine(const Image& img, double angle_deg, double scale, double shear);

std::vector<double> gaussian_kernel(double sigma);
// Separable Gaussian blur, reflection boundary. sigma <= 0 returns a copy.
Image gaussian_blur(const Image& img, double sigma);
// Separable box mean of odd width, reflection boundary.
Image box_blur(const Image& img, std::size_t width);

double mean(const Image& img);
double min_value(const Image& img);
double max_value(const Image& img);

}  // namespace mcd::imaging
