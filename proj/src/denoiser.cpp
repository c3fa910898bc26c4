#include "mcd/denoiser.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mcd/error.hpp"
#include "mcd/imaging.hpp"
#include "mcd/random.hpp"

namespace mcd {

namespace {

constexpr char kMagic[8] = {'M', 'C', 'D', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void validate(const ModelConfig& c) {
  if (c.in_channels < 1 || c.in_channels > 2) throw ConfigError("model: in_channels must be 1 or 2");
}

nn::Tensor to_tensor(std::span<const Image> inputs, const Normalization& n, std::size_t pad_h, std::size_t pad_w) {
  const std::size_t h = inputs.front().dim(0) + pad_h, w = inputs.front().dim(1) + pad_w;
  nn::Tensor t(static_cast<int>(inputs.size()), static_cast<int>(h), static_cast<int>(w));
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Image img = (pad_h || pad_w) ? imaging::pad_reflect(inputs[k], 0, pad_h, 0, pad_w) : inputs[k];
    float* d = t.channel(static_cast<int>(k));
    for (std::size_t i = 0; i < img.size(); ++i) d[i] = static_cast<float>((img[i] - n.mean) / n.scale);
  }
  return t;
}

std::vector<std::size_t> evenly_spaced(std::size_t n, std::size_t max_count) {
  std::vector<std::size_t> idx;
  if (max_count == 0 || max_count >= n) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  for (std::size_t k = 0; k < max_count; ++k) idx.push_back(k * n / max_count);
  return idx;
}

double mean_abs_diff(const Image& a, const Image& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

Normalization stack_normalization(const PairSet& pairs) {
  std::set<std::pair<std::size_t, std::size_t>> planes;
  for (const auto& m : pairs.items()) {
    for (auto c : m.input_channels) planes.emplace(m.series, c);
    if (m.mode != PairMode::spectral_infer) planes.emplace(m.series, m.target_channel);
  }
  const Array& s = pairs.stack();
  const std::size_t plane = s.dim(2) * s.dim(3);
  double sum = 0, sum2 = 0;
  std::size_t n = 0;
  for (auto [series, ch] : planes) {
    const double* p = s.data() + (series * s.dim(1) + ch) * plane;
    for (std::size_t i = 0; i < plane; ++i) sum += p[i], sum2 += p[i] * p[i];
    n += plane;
  }
  Normalization out;
  out.mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum2 / static_cast<double>(n) - out.mean * out.mean);
  out.scale = var > 0 ? std::sqrt(var) : 1.0;
  return out;
}

}  // namespace

Model::Model(const ModelConfig& config)
    : config_(config), net_((validate(config), config.in_channels), config.base_width, config.depth) {
  params_ = net_.initial_parameters(config.seed);
}

void Model::set_normalization(const Normalization& n) {
  if (!(n.scale > 0) || !std::isfinite(n.mean)) throw ConfigError("model: normalization scale must be > 0");
  norm_ = n;
}

Image Model::predict(std::span<const Image> inputs) const {
  if (inputs.size() != static_cast<std::size_t>(config_.in_channels))
    throw ConfigError("predict: model expects " + std::to_string(config_.in_channels) + " inputs, got " +
                      std::to_string(inputs.size()));
  require_rank(inputs.front().shape(), 2, "predict");
  for (const auto& img : inputs) require_same_shape(img.shape(), inputs.front().shape(), "predict");
  const std::size_t h = inputs.front().dim(0), w = inputs.front().dim(1);
  const auto m = static_cast<std::size_t>(net_.size_multiple());
  const std::size_t ph = (m - h % m) % m, pw = (m - w % m) % m;
  if (ph >= h || pw >= w) throw DataError("predict: image " + shape_string(inputs.front().shape()) + " too small");
  const nn::Tensor x = to_tensor(inputs, norm_, ph, pw);
  nn::Tensor y;
  net_.forward(params_, x, y, nullptr);
  Image out = make_image(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      out(r, c) = static_cast<double>(y.v[r * static_cast<std::size_t>(y.w) + c]) * norm_.scale + norm_.mean;
  return out;
}

std::vector<Image> Model::predict_batch(std::span<const std::vector<Image>> batch) const {
  std::vector<Image> out;
  out.reserve(batch.size());
  for (const auto& inputs : batch) out.push_back(predict(inputs));
  return out;
}

void Model::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json h;
  h["format"] = "mcd-model";
  h["version"] = kVersion;
  h["architecture"] = "unet";
  h["model"] = {{"in_channels", config_.in_channels},
                {"base_width", config_.base_width},
                {"depth", config_.depth},
                {"seed", config_.seed}};
  h["normalization"] = {{"mean", norm_.mean}, {"scale", norm_.scale}};
  h["parameter_count"] = params_.size();
  h["extra"] = extra;
  const std::string header = h.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write model checkpoint " + tmp.string());
    const std::uint64_t len = header.size();
    f.write(kMagic, sizeof kMagic);
    f.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    f.write(reinterpret_cast<const char*>(&len), sizeof len);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(reinterpret_cast<const char*>(params_.data()), static_cast<std::streamsize>(params_.size() * sizeof(float)));
    if (!f) throw IoError("short write to model checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

nlohmann::json read_checkpoint(const std::filesystem::path& path, std::vector<float>* params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("model checkpoint not found: " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  f.read(magic, sizeof magic);
  if (!f || std::memcmp(magic, kMagic, sizeof magic) != 0) throw IoError(path.string() + ": not a model checkpoint");
  f.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kVersion)
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  f.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!f || len > (1u << 26)) throw IoError(path.string() + ": corrupt checkpoint header");
  std::string header(len, '\0');
  f.read(header.data(), static_cast<std::streamsize>(len));
  if (!f) throw IoError(path.string() + ": truncated checkpoint header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  if (params) {
    const auto n = h.at("parameter_count").get<std::size_t>();
    params->resize(n);
    f.read(reinterpret_cast<char*>(params->data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (f.gcount() != static_cast<std::streamsize>(n * sizeof(float)))
      throw IoError(path.string() + ": expected " + std::to_string(n * sizeof(float)) + " weight bytes, found " +
                    std::to_string(f.gcount()));
    if (f.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes after weights");
  }
  return h;
}

}  // namespace

nlohmann::json Model::read_header(const std::filesystem::path& path) { return read_checkpoint(path, nullptr); }

Model Model::load(const std::filesystem::path& path) {
  std::vector<float> params;
  const auto h = read_checkpoint(path, &params);
  ModelConfig c;
  try {
    const auto& m = h.at("model");
    c.in_channels = m.at("in_channels").get<int>();
    c.base_width = m.at("base_width").get<int>();
    c.depth = m.at("depth").get<int>();
    c.seed = m.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": incomplete checkpoint header: " + e.what());
  }
  Model model(c);
  if (params.size() != model.params_.size())
    throw IoError(path.string() + ": parameter count does not match the architecture");
  model.params_ = std::move(params);
  model.set_normalization({h.at("normalization").at("mean").get<double>(), h.at("normalization").at("scale").get<double>()});
  return model;
}

double l1_loss(const Model& model, const PairSet& pairs, std::size_t max_pairs) {
  if (pairs.empty()) throw DataError("l1_loss: empty pair set");
  double s = 0;
  const auto idx = evenly_spaced(pairs.size(), max_pairs);
  for (auto k : idx) {
    const auto p = pairs.sample(k);
    s += mean_abs_diff(model.predict(p.inputs), p.target);
  }
  return s / static_cast<double>(idx.size());
}

double identity_l1_loss(const PairSet& pairs, std::size_t max_pairs) {
  if (pairs.empty()) throw DataError("identity_l1_loss: empty pair set");
  double s = 0;
  const auto idx = evenly_spaced(pairs.size(), max_pairs);
  for (auto k : idx) {
    const auto p = pairs.sample(k);
    s += mean_abs_diff(p.inputs.front(), p.target);
  }
  return s / static_cast<double>(idx.size());
}

TrainResult train(const ModelConfig& model_config, const PairSet& train_pairs, const PairSet& val_pairs,
                  const TrainConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  if (train_pairs.empty()) throw ConfigError("train: no training pairs");
  if (val_pairs.empty()) throw ConfigError("train: no validation pairs");
  if (!(config.learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
  if (config.epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (config.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (config.loss != "l1") throw ConfigError("train: unsupported loss '" + config.loss + "'");
  for (const PairSet* ps : {&train_pairs, &val_pairs})
    if (ps->input_arity() != static_cast<std::size_t>(model_config.in_channels))
      throw ConfigError("train: pair arity " + std::to_string(ps->input_arity()) + " does not match in_channels " +
                        std::to_string(model_config.in_channels));

  Model model(model_config);
  model.set_normalization(stack_normalization(train_pairs));
  TrainReport report;
  report.initial_val_loss = l1_loss(model, val_pairs, config.max_val_pairs);
  report.identity_val_loss = identity_l1_loss(val_pairs, config.max_val_pairs);

  const auto& stack = train_pairs.stack();
  const std::size_t h = stack.dim(2), w = stack.dim(3);
  AugmentConfig aug = config.augment;
  const auto m = static_cast<std::size_t>(model.network().size_multiple());
  if (aug.crop == 0 || aug.crop > std::min(h, w)) aug.crop = std::min(h, w);
  aug.crop -= aug.crop % m;
  if (aug.crop == 0) throw ConfigError("train: images smaller than the network size multiple");

  const nn::UNet& net = model.network();
  const Normalization norm = model.normalization();
  nn::Adam adam(model.parameters().size(), config.learning_rate);
  std::vector<float> grads(model.parameters().size());
  nn::UNet::Cache cache;
  const std::uint64_t order_seed = derive_seed(config.seed, "order");
  const std::uint64_t aug_seed = derive_seed(config.seed, "augment");
  const std::size_t n = train_pairs.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps = config.steps_per_epoch ? config.steps_per_epoch : (n + batch - 1) / batch;

  std::vector<std::size_t> order(n);
  std::size_t cursor = n;
  std::uint64_t drawn = 0;
  std::mt19937_64 order_rng(order_seed);
  auto next_index = [&]() {
    if (cursor == n) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), order_rng);
      cursor = 0;
    }
    return order[cursor++];
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0;
    for (std::size_t step = 0; step < steps; ++step) {
      std::fill(grads.begin(), grads.end(), 0.0f);
      double batch_loss = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t k = next_index();
        const PairMeta& meta = train_pairs.meta(k);
        if (std::find(meta.input_channels.begin(), meta.input_channels.end(), meta.target_channel) !=
            meta.input_channels.end())
          throw InvariantError("train: target channel " + std::to_string(meta.target_channel) +
                               " fed as input (series " + std::to_string(meta.series) + ")");
        const PairSample s = augment(train_pairs.sample(k), aug, stream_seed(aug_seed, drawn++));
        const nn::Tensor x = to_tensor(s.inputs, norm, 0, 0);
        nn::Tensor y;
        net.forward(model.parameters(), x, y, &cache);
        nn::Tensor g(1, y.h, y.w);
        const float inv = 1.0f / static_cast<float>(y.v.size() * batch);
        double l = 0;
        for (std::size_t i = 0; i < y.v.size(); ++i) {
          const float t = static_cast<float>((s.target[i] - norm.mean) / norm.scale);
          const float d = y.v[i] - t;
          l += std::abs(d);
          g.v[i] = d > 0 ? inv : (d < 0 ? -inv : 0.0f);
        }
        batch_loss += l / static_cast<double>(y.v.size());
        net.backward(model.parameters(), cache, g, grads);
      }
      batch_loss = batch_loss / static_cast<double>(batch) * norm.scale;
      if (!std::isfinite(batch_loss))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step) + " (learning_rate " + std::to_string(config.learning_rate) +
                            ", normalization scale " + std::to_string(norm.scale) + ")");
      adam.step(model.parameters(), grads);
      epoch_loss += batch_loss;
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(steps));
    const double vl = l1_loss(model, val_pairs, config.max_val_pairs);
    if (!std::isfinite(vl))
      throw TrainingError("train: non-finite validation loss after epoch " + std::to_string(epoch));
    report.val_loss.push_back(vl);
  }
  report.steps = adam.steps();
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report)};
}

Array predict_half_grid(const Model& model, const Array& stack) {
  require_rank(stack.shape(), 4, "predict_half_grid");
  if (model.config().in_channels != 2) throw ConfigError("predict_half_grid: needs a two-input model");
  const std::size_t S = stack.dim(0), J = stack.dim(1), h = stack.dim(2), w = stack.dim(3);
  if (J < 2) throw ConfigError("predict_half_grid: needs >= 2 channels");
  Array out({S, J - 1, h, w});
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t j = 1; j < J; ++j) {
      const std::vector<Image> in{plane(stack, {s, j - 1}), plane(stack, {s, j})};
      set_plane(out, {s, j - 1}, model.predict(in));
    }
  return out;
}

namespace {

// (outer, channel, inner) view of an arbitrary-rank array.
struct AxisView {
  std::size_t outer = 1, channels = 0, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ConfigError("channel axis " + std::to_string(axis) + " out of range");
  AxisView v;
  v.channels = s[axis];
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

Array shift_compensate(const Array& half_grid, std::size_t channel_axis) {
  const AxisView v = axis_view(half_grid.shape(), channel_axis);
  if (v.channels < 2) throw ConfigError("shift_compensate: needs >= 2 half-grid channels");
  Shape shape = half_grid.shape();
  shape[channel_axis] = v.channels - 1;
  Array out(shape);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t c = 0; c + 1 < v.channels; ++c) {
      const double* a = half_grid.data() + (o * v.channels + c) * v.inner;
      const double* b = a + v.inner;
      double* d = out.data() + (o * (v.channels - 1) + c) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) d[i] = 0.5 * (a[i] + b[i]);
    }
  return out;
}

Array to_integer_grid(const Array& half_grid, std::size_t channel_axis) {
  const AxisView v = axis_view(half_grid.shape(), channel_axis);
  const Array mid = shift_compensate(half_grid, channel_axis);
  const std::size_t J = v.channels + 1;
  Shape shape = half_grid.shape();
  shape[channel_axis] = J;
  Array out(shape);
  for (std::size_t o = 0; o < v.outer; ++o) {
    auto dst = [&](std::size_t c) { return out.data() + (o * J + c) * v.inner; };
    std::copy_n(half_grid.data() + (o * v.channels) * v.inner, v.inner, dst(0));
    std::copy_n(mid.data() + (o * (J - 2)) * v.inner, (J - 2) * v.inner, dst(1));
    std::copy_n(half_grid.data() + (o * v.channels + v.channels - 1) * v.inner, v.inner, dst(J - 1));
  }
  return out;
}

Image median_ensemble(const ImageFilter& denoise, const Image& frame, int n_draws, double noise_sigma,
                      std::uint64_t seed) {
  if (n_draws < 1 || n_draws % 2 == 0) throw ConfigError("median_ensemble: n_draws must be odd and >= 1");
  if (noise_sigma < 0) throw ConfigError("median_ensemble: noise_sigma must be >= 0");
  std::vector<Image> outs;
  outs.reserve(static_cast<std::size_t>(n_draws));
  for (int d = 0; d < n_draws; ++d) {
    Image noisy = frame;
    if (noise_sigma > 0) {
      std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(d)));
      std::normal_distribution<double> nd(0.0, noise_sigma);
      for (auto& x : noisy.storage()) x += nd(rng);
    }
    outs.push_back(denoise(noisy));
  }
  Image out(frame.shape());
  std::vector<double> vals(outs.size());
  const std::size_t mid = outs.size() / 2;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t d = 0; d < outs.size(); ++d) vals[d] = outs[d][i];
    std::nth_element(vals.begin(), vals.begin() + static_cast<long>(mid), vals.end());
    out[i] = vals[mid];
  }
  return out;
}

Image median_ensemble(const Model& model, const Image& frame, int n_draws, double noise_sigma, std::uint64_t seed) {
  if (model.config().in_channels != 1) throw ConfigError("median_ensemble: needs a single-input model");
  return median_ensemble([&](const Image& img) { return model.predict(std::span<const Image>(&img, 1)); }, frame,
                         n_draws, noise_sigma, seed);
}

}  // namespace mcd
