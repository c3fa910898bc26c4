#pragma once

#include <string>

#include "mcd/ndarray.hpp"

namespace mcd {

enum class BaselineMethod { gaussian, median, nlm, tv };
BaselineMethod parse_baseline_method(const std::string& name);
std::string to_string(BaselineMethod m);

struct BaselineParams {
  double sigma = 1.0;            // gaussian
  std::size_t kernel_size = 3;   // median, odd
  std::size_t patch_radius = 1;  // nlm
  std::size_t search_radius = 5;
  double h = 0.1;                // nlm filtering strength
  double tv_weight = 0.1;        // tv: larger means smoother
  double tv_tolerance = 1e-5;    // stop when max |u_k - u_{k-1}| falls below
  int tv_max_iter = 500;
};

// Classical single-image denoisers; boundaries are reflection padded.
Image baseline(BaselineMethod method, const Image& image, const BaselineParams& params = {});

Image median_filter(const Image& image, std::size_t kernel_size);
Image nlm_filter(const Image& image, std::size_t patch_radius, std::size_t search_radius, double h);
// Rudin-Osher-Fatemi model solved with Chambolle's projection iteration.
Image tv_denoise(const Image& image, double weight, double tolerance = 1e-5, int max_iter = 500);

}  // namespace mcd
