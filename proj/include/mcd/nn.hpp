#pragma once

// Minimal CPU convolutional network: 3x3 convolutions via im2col + GEMM,
// ReLU, 2x2 max pooling, nearest upsampling, skip concatenation. Single
// precision, single sample per call; callers accumulate gradients over a batch.

#include <cstdint>
#include <span>
#include <vector>

namespace mcd::nn {

// Channel-major single-sample activation (c, h, w).
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, float fill = 0.0f)
      : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}
  float* channel(int k) { return v.data() + static_cast<std::size_t>(k) * h * w; }
  const float* channel(int k) const { return v.data() + static_cast<std::size_t>(k) * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
};

// Convolution with `same` zero padding. Parameters live in an external flat
// buffer at [offset, offset + count): weights (cout, cin, k, k) then bias.
struct Conv2d {
  int cin = 0, cout = 0, k = 3;
  std::size_t offset = 0;

  std::size_t weight_count() const { return static_cast<std::size_t>(cout) * cin * k * k; }
  std::size_t count() const { return weight_count() + static_cast<std::size_t>(cout); }

  void forward(std::span<const float> params, const Tensor& in, Tensor& out, std::vector<float>& col) const;
  // Accumulates parameter gradients into `grads`; writes the input gradient
  // into `grad_in` when non-null.
  void backward(std::span<const float> params, const Tensor& in, const Tensor& grad_out, Tensor* grad_in,
                std::span<float> grads, std::vector<float>& col) const;
};

// Encoder-decoder with skip connections. Level l has base_width * 2^l
// channels; each level runs two 3x3 conv + ReLU blocks. The 1x1 head is
// zero-initialised and added to the mean of the input channels, so an
// untrained network is the channel-mean (identity for one input).
class UNet {
 public:
  UNet() = default;
  UNet(int in_channels, int base_width, int depth);

  int in_channels() const noexcept { return in_channels_; }
  int base_width() const noexcept { return base_width_; }
  int depth() const noexcept { return depth_; }
  std::size_t parameter_count() const noexcept { return n_params_; }
  // Spatial dimensions must be multiples of this.
  int size_multiple() const noexcept { return 1 << (depth_ - 1); }

  std::vector<float> initial_parameters(std::uint64_t seed) const;

  struct Cache {
    std::vector<Tensor> enc_in, enc_mid, enc_out;
    std::vector<std::vector<std::uint32_t>> pool_idx;
    std::vector<Tensor> dec_in, dec_mid, dec_out;
    Tensor head_in;
    std::vector<float> col;
  };

  // `cache` may be null for inference.
  void forward(std::span<const float> params, const Tensor& x, Tensor& y, Cache* cache) const;
  void backward(std::span<const float> params, const Cache& cache, const Tensor& grad_y, std::span<float> grads) const;

 private:
  int in_channels_ = 1, base_width_ = 16, depth_ = 3;
  std::vector<Conv2d> enc1_, enc2_, dec1_, dec2_;
  Conv2d head_;
  std::size_t n_params_ = 0;
};

// Adam without learning-rate scheduling.
class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<float> params, std::span<const float> grads);
  long steps() const noexcept { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<float> m_, v_;
};

}  // namespace mcd::nn
