#include "mcd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Core>

#include "mcd/error.hpp"

namespace mcd::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void im2col3(const Tensor& in, std::vector<float>& col) {
  const int H = in.h, W = in.w;
  const std::size_t hw = in.plane();
  col.assign(static_cast<std::size_t>(in.c) * 9 * hw, 0.0f);
  for (int ci = 0; ci < in.c; ++ci) {
    const float* src = in.channel(ci);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        float* dst = col.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, dx = kx - 1;
        const int x_lo = std::max(0, -dx), x_hi = std::min(W, W - dx);
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          const float* s = src + static_cast<std::size_t>(sy) * W + dx;
          float* d = dst + static_cast<std::size_t>(y) * W;
          for (int x = x_lo; x < x_hi; ++x) d[x] = s[x];
        }
      }
  }
}

void col2im3(const std::vector<float>& col, Tensor& out) {
  const int H = out.h, W = out.w;
  const std::size_t hw = out.plane();
  for (int ci = 0; ci < out.c; ++ci) {
    float* dst = out.channel(ci);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const float* src = col.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, dx = kx - 1;
        const int x_lo = std::max(0, -dx), x_hi = std::min(W, W - dx);
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          float* d = dst + static_cast<std::size_t>(sy) * W + dx;
          const float* s = src + static_cast<std::size_t>(y) * W;
          for (int x = x_lo; x < x_hi; ++x) d[x] += s[x];
        }
      }
  }
}

void relu_inplace(Tensor& t) {
  for (auto& v : t.v) v = v < 0.0f ? 0.0f : v;
}

// grad *= (activation > 0)
void relu_backward(const Tensor& act, Tensor& grad) {
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    if (!(act.v[i] > 0.0f)) grad.v[i] = 0.0f;
}

void maxpool2(const Tensor& in, Tensor& out, std::vector<std::uint32_t>& idx) {
  out = Tensor(in.c, in.h / 2, in.w / 2);
  idx.assign(out.v.size(), 0);
  std::size_t o = 0;
  for (int c = 0; c < in.c; ++c) {
    const float* s = in.channel(c);
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x, ++o) {
        const std::uint32_t base = static_cast<std::uint32_t>((2 * y) * in.w + 2 * x);
        std::uint32_t best = base;
        for (std::uint32_t cand : {base + 1, base + static_cast<std::uint32_t>(in.w), base + static_cast<std::uint32_t>(in.w) + 1})
          if (s[cand] > s[best]) best = cand;
        out.v[o] = s[best];
        idx[o] = best;
      }
  }
}

void maxpool2_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& idx, Tensor& grad_in) {
  std::size_t o = 0;
  for (int c = 0; c < grad_out.c; ++c) {
    float* g = grad_in.channel(c);
    for (std::size_t k = 0; k < grad_out.plane(); ++k, ++o) g[idx[o]] += grad_out.v[o];
  }
}

// Nearest 2x upsampling of `low` concatenated with `skip` along channels.
void upsample_concat(const Tensor& low, const Tensor& skip, Tensor& out) {
  out = Tensor(low.c + skip.c, skip.h, skip.w);
  for (int c = 0; c < low.c; ++c) {
    const float* s = low.channel(c);
    float* d = out.channel(c);
    for (int y = 0; y < skip.h; ++y)
      for (int x = 0; x < skip.w; ++x) d[y * skip.w + x] = s[(y / 2) * low.w + x / 2];
  }
  std::copy(skip.v.begin(), skip.v.end(), out.v.begin() + static_cast<long>(static_cast<std::size_t>(low.c) * skip.plane()));
}

void upsample_concat_backward(const Tensor& grad, Tensor& grad_low, Tensor& grad_skip) {
  for (int c = 0; c < grad_low.c; ++c) {
    const float* s = grad.channel(c);
    float* d = grad_low.channel(c);
    for (int y = 0; y < grad.h; ++y)
      for (int x = 0; x < grad.w; ++x) d[(y / 2) * grad_low.w + x / 2] += s[y * grad.w + x];
  }
  const float* s = grad.channel(grad_low.c);
  for (std::size_t i = 0; i < grad_skip.v.size(); ++i) grad_skip.v[i] += s[i];
}

}  // namespace

void Conv2d::forward(std::span<const float> params, const Tensor& in, Tensor& out, std::vector<float>& col) const {
  if (in.c != cin) throw InvariantError("Conv2d: channel mismatch");
  const int hw = static_cast<int>(in.plane());
  out = Tensor(cout, in.h, in.w);
  ConstMapMat wmat(params.data() + offset, cout, cin * k * k);
  const float* bias = params.data() + offset + weight_count();
  MapMat omat(out.v.data(), cout, hw);
  if (k == 1) {
    omat.noalias() = wmat * ConstMapMat(in.v.data(), cin, hw);
  } else {
    im2col3(in, col);
    omat.noalias() = wmat * ConstMapMat(col.data(), cin * 9, hw);
  }
  for (int o = 0; o < cout; ++o) omat.row(o).array() += bias[o];
}

void Conv2d::backward(std::span<const float> params, const Tensor& in, const Tensor& grad_out, Tensor* grad_in,
                      std::span<float> grads, std::vector<float>& col) const {
  const int hw = static_cast<int>(in.plane());
  const int kk = cin * k * k;
  ConstMapMat g(grad_out.v.data(), cout, hw);
  MapMat gw(grads.data() + offset, cout, kk);
  float* gb = grads.data() + offset + weight_count();
  for (int o = 0; o < cout; ++o) gb[o] += g.row(o).sum();
  if (k == 1) {
    ConstMapMat x(in.v.data(), cin, hw);
    gw.noalias() += g * x.transpose();
    if (grad_in) {
      ConstMapMat wmat(params.data() + offset, cout, kk);
      MapMat gi(grad_in->v.data(), cin, hw);
      gi.noalias() += wmat.transpose() * g;
    }
    return;
  }
  im2col3(in, col);
  gw.noalias() += g * ConstMapMat(col.data(), kk, hw).transpose();
  if (grad_in) {
    ConstMapMat wmat(params.data() + offset, cout, kk);
    MapMat(col.data(), kk, hw).noalias() = wmat.transpose() * g;
    col2im3(col, *grad_in);
  }
}

UNet::UNet(int in_channels, int base_width, int depth)
    : in_channels_(in_channels), base_width_(base_width), depth_(depth) {
  if (in_channels < 1) throw ConfigError("UNet: in_channels must be >= 1");
  if (base_width < 1) throw ConfigError("UNet: base_width must be >= 1");
  if (depth < 1 || depth > 6) throw ConfigError("UNet: depth must be in [1, 6]");
  std::size_t off = 0;
  auto add = [&](int cin, int cout, int k) {
    Conv2d c{cin, cout, k, off};
    off += c.count();
    return c;
  };
  int prev = in_channels;
  for (int l = 0; l < depth; ++l) {
    const int w = base_width << l;
    enc1_.push_back(add(prev, w, 3));
    enc2_.push_back(add(w, w, 3));
    prev = w;
  }
  dec1_.resize(static_cast<std::size_t>(depth > 1 ? depth - 1 : 0));
  dec2_.resize(dec1_.size());
  for (int l = depth - 2; l >= 0; --l) {
    const int w = base_width << l;
    dec1_[static_cast<std::size_t>(l)] = add((w << 1) + w, w, 3);
    dec2_[static_cast<std::size_t>(l)] = add(w, w, 3);
  }
  head_ = add(base_width, 1, 1);
  n_params_ = off;
}

std::vector<float> UNet::initial_parameters(std::uint64_t seed) const {
  std::vector<float> p(n_params_, 0.0f);
  std::mt19937_64 rng(seed);
  auto he = [&](const Conv2d& c) {
    std::normal_distribution<float> nd(0.0f, std::sqrt(2.0f / static_cast<float>(c.cin * c.k * c.k)));
    for (std::size_t i = 0; i < c.weight_count(); ++i) p[c.offset + i] = nd(rng);
  };
  for (std::size_t l = 0; l < enc1_.size(); ++l) he(enc1_[l]), he(enc2_[l]);
  for (std::size_t l = 0; l < dec1_.size(); ++l) he(dec1_[l]), he(dec2_[l]);
  // head stays zero: the untrained network returns the input channel mean
  return p;
}

void UNet::forward(std::span<const float> params, const Tensor& x, Tensor& y, Cache* cache) const {
  if (x.c != in_channels_) throw ConfigError("UNet: expected " + std::to_string(in_channels_) + " input channels");
  const int m = size_multiple();
  if (x.h % m || x.w % m) throw InvariantError("UNet: spatial size must be a multiple of " + std::to_string(m));
  Cache local;
  Cache& c = cache ? *cache : local;
  const auto L = static_cast<std::size_t>(depth_);
  c.enc_in.resize(L), c.enc_mid.resize(L), c.enc_out.resize(L), c.pool_idx.resize(L);
  c.dec_in.resize(L), c.dec_mid.resize(L), c.dec_out.resize(L);

  c.enc_in[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    if (l > 0) maxpool2(c.enc_out[l - 1], c.enc_in[l], c.pool_idx[l]);
    enc1_[l].forward(params, c.enc_in[l], c.enc_mid[l], c.col);
    relu_inplace(c.enc_mid[l]);
    enc2_[l].forward(params, c.enc_mid[l], c.enc_out[l], c.col);
    relu_inplace(c.enc_out[l]);
  }
  const Tensor* up = &c.enc_out[L - 1];
  for (std::size_t l = L - 1; l-- > 0;) {
    upsample_concat(*up, c.enc_out[l], c.dec_in[l]);
    dec1_[l].forward(params, c.dec_in[l], c.dec_mid[l], c.col);
    relu_inplace(c.dec_mid[l]);
    dec2_[l].forward(params, c.dec_mid[l], c.dec_out[l], c.col);
    relu_inplace(c.dec_out[l]);
    up = &c.dec_out[l];
  }
  c.head_in = *up;
  head_.forward(params, c.head_in, y, c.col);
  const float inv = 1.0f / static_cast<float>(x.c);
  for (int k = 0; k < x.c; ++k) {
    const float* s = x.channel(k);
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += inv * s[i];
  }
}

void UNet::backward(std::span<const float> params, const Cache& cache, const Tensor& grad_y,
                    std::span<float> grads) const {
  auto& c = const_cast<Cache&>(cache);  // only the im2col scratch buffer is touched
  const auto L = static_cast<std::size_t>(depth_);
  Tensor g(c.head_in.c, c.head_in.h, c.head_in.w);
  head_.backward(params, c.head_in, grad_y, &g, grads, c.col);

  // Gradients flowing into each encoder output from its skip connection.
  std::vector<Tensor> g_enc(L);
  for (std::size_t l = 0; l < L; ++l) g_enc[l] = Tensor(c.enc_out[l].c, c.enc_out[l].h, c.enc_out[l].w);

  if (L == 1) {
    g_enc[0].v = g.v;
  } else {
    for (std::size_t l = 0; l < L - 1; ++l) {
      relu_backward(c.dec_out[l], g);
      Tensor g_mid(c.dec_mid[l].c, c.dec_mid[l].h, c.dec_mid[l].w);
      dec2_[l].backward(params, c.dec_mid[l], g, &g_mid, grads, c.col);
      relu_backward(c.dec_mid[l], g_mid);
      Tensor g_in(c.dec_in[l].c, c.dec_in[l].h, c.dec_in[l].w);
      dec1_[l].backward(params, c.dec_in[l], g_mid, &g_in, grads, c.col);
      const Tensor& low = l + 1 == L - 1 ? c.enc_out[L - 1] : c.dec_out[l + 1];
      Tensor g_low(low.c, low.h, low.w);
      upsample_concat_backward(g_in, g_low, g_enc[l]);
      g = std::move(g_low);
    }
    // g now holds the gradient w.r.t. the bottleneck output.
    for (std::size_t i = 0; i < g.v.size(); ++i) g_enc[L - 1].v[i] += g.v[i];
  }

  for (std::size_t l = L; l-- > 0;) {
    Tensor go = std::move(g_enc[l]);
    relu_backward(c.enc_out[l], go);
    Tensor g_mid(c.enc_mid[l].c, c.enc_mid[l].h, c.enc_mid[l].w);
    enc2_[l].backward(params, c.enc_mid[l], go, &g_mid, grads, c.col);
    relu_backward(c.enc_mid[l], g_mid);
    if (l == 0) {
      enc1_[l].backward(params, c.enc_in[l], g_mid, nullptr, grads, c.col);
    } else {
      Tensor g_in(c.enc_in[l].c, c.enc_in[l].h, c.enc_in[l].w);
      enc1_[l].backward(params, c.enc_in[l], g_mid, &g_in, grads, c.col);
      maxpool2_backward(g_in, c.pool_idx[l], g_enc[l - 1]);
    }
  }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0f), v_(n, 0.0f) {
  if (!(lr > 0)) throw ConfigError("Adam: learning rate must be > 0");
}

void Adam::step(std::span<float> params, std::span<const float> grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(b1_), b2 = static_cast<float>(b2_);
  const float step = static_cast<float>(lr_ / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1 - b2) * grads[i] * grads[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_c2) + eps);
  }
}

}  // namespace mcd::nn
