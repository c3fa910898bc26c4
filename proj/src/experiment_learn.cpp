#include <algorithm>
#include <numeric>

#include "experiment_detail.hpp"
#include "mcd/error.hpp"
#include "mcd/pairs.hpp"
#include "mcd/random.hpp"

namespace mcd::experiment::detail {

using nlohmann::json;

namespace {

struct DenoiserInput {
  Array stack;  // (series, channel, h, w)
  std::vector<std::string> axes;
  std::string units;
  std::vector<double> channel_keV;
};

DenoiserInput denoiser_input(StageContext& ctx) {
  const Config& c = ctx.cfg;
  if (c.mode == Mode::spectral) {
    if (c.domain == Domain::projections) {
      const Stage src = spectral_source_stage(c);
      const auto info = SpectralInfo::from_json(ctx.read_json(src, "spectra.json"));
      return {attenuation(ctx.read_array(src, "counts"), info.flat, c.count_floor),
              {"angle", "channel", "z", "u"},
              "attenuation",
              info.channel_keV};
    }
    auto c2 = ctx.read(Stage::reconstruct, "noisy");
    return {store::to_double(c2), {"z", "channel", "y", "x"}, "1/mm", c2.meta.channel_keV};
  }
  if (c.temporal.ordering == Ordering::before)
    return {ctx.read_array(Stage::simulate, "noisy"), {"series", "t", "y", "x"}, "intensity", {}};
  return {ctx.read_array(Stage::reconstruct, "noisy"), {"series", "t", "y", "x"}, "attenuation", {}};
}

}  // namespace

void train_stage(StageContext& ctx) {
  const Config& c = ctx.cfg;
  auto stack = std::make_shared<const Array>(denoiser_input(ctx).stack);
  const PairSet all = c.mode == Mode::spectral
                          ? spectral_train_pairs(stack)
                          : temporal_pairs(stack, c.ssim_threshold, 0.0, c.ssim_prefilter_sigma);
  std::vector<std::size_t> series(stack->dim(0));
  std::iota(series.begin(), series.end(), 0);
  const auto [tr, va] = split(series, {c.split_ratio, derive_seed(c.seed, "split")});
  const PairSet train_pairs = all.restrict_to_series(tr);
  const PairSet val_pairs = all.restrict_to_series(va);
  if (train_pairs.empty() || val_pairs.empty())
    throw ConfigError("training needs pairs on both sides of the split (train " + std::to_string(train_pairs.size()) +
                      ", validation " + std::to_string(val_pairs.size()) +
                      "); check pairs.split_ratio and pairs.ssim_threshold");

  const TrainResult r = train(c.model, train_pairs, val_pairs, c.train);
  r.model.save(ctx.dir() / "model.bin", {{"config_hash", ctx.exp.hash()}, {"stage_key", ctx.manifest.stage_key}});
  ctx.record_output_file("model.bin");
  json rep = {{"train_loss", r.report.train_loss},
              {"val_loss", r.report.val_loss},
              {"initial_val_loss", r.report.initial_val_loss},
              {"identity_val_loss", r.report.identity_val_loss},
              {"steps", r.report.steps},
              {"train_pairs", train_pairs.size()},
              {"val_pairs", val_pairs.size()},
              {"candidate_pairs", all.size()},
              {"train_series", tr},
              {"val_series", va}};
  ctx.write_json("report.json", rep);
  ctx.manifest.nondeterministic = false;
  ctx.manifest.note = "single-threaded float32 training with seeded order and augmentation; bit-reproducible on the same build and CPU";
}

void add_train_results(StageContext& ctx, std::map<std::string, std::string>& res) {
  const auto p = ctx.exp.pipeline();
  if (std::find(p.begin(), p.end(), Stage::train) == p.end()) return;
  const json r = ctx.read_json(Stage::train, "report.json");
  const auto& val = r.at("val_loss");
  res["train.epochs"] = std::to_string(val.size());
  res["train.steps"] = std::to_string(r.at("steps").get<long>());
  res["train.val_l1"] = format_value(val.back().get<double>());
  res["train.initial_val_l1"] = format_value(r.at("initial_val_loss").get<double>());
  res["train.identity_val_l1"] = format_value(r.at("identity_val_loss").get<double>());
  res["train.final_train_l1"] = format_value(r.at("train_loss").back().get<double>());
  res["train.pairs"] = std::to_string(r.at("train_pairs").get<std::size_t>());
  res["train.val_pairs"] = std::to_string(r.at("val_pairs").get<std::size_t>());
}

void denoise_stage(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const Model model = Model::load(ctx.read_file(Stage::train, "model.bin"));
  const DenoiserInput in = denoiser_input(ctx);
  if (c.mode == Mode::spectral) {
    ctx.write("denoised", to_integer_grid(predict_half_grid(model, in.stack)), in.axes, in.units, in.channel_keV);
    return;
  }
  const std::size_t S = in.stack.dim(0), T = in.stack.dim(1);
  Array out(in.stack.shape());
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t t = 0; t < T; ++t) {
      const std::vector<Image> frame{plane(in.stack, {s, t})};
      set_plane(out, {s, t}, model.predict(frame));
    }
  ctx.write("denoised", out, in.axes, in.units);
  if (c.temporal.ensemble_draws > 1) {
    // Evaluation series only: the static segment is where flicker is scored.
    Array ens({1, T, in.stack.dim(2), in.stack.dim(3)});
    const std::uint64_t seed = derive_seed(c.seed, "ensemble");
    for (std::size_t t = 0; t < T; ++t)
      set_plane(ens, {0, t},
                median_ensemble(model, plane(in.stack, {0, t}), c.temporal.ensemble_draws, c.temporal.ensemble_sigma,
                                stream_seed(seed, t)));
    ctx.write("ensemble", ens, in.axes, in.units);
  }
}

}  // namespace mcd::experiment::detail
