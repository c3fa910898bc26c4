#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "experiment_detail.hpp"
#include "mcd/error.hpp"
#include "mcd/imaging.hpp"
#include "mcd/metrics.hpp"
#include "mcd/plot.hpp"
#include "mcd/projector.hpp"
#include "mcd/random.hpp"

namespace mcd::experiment::detail {

using nlohmann::json;

namespace {

// Frames [0, n) of series s as a (t, y, x) array.
Array frames(const Array& stack, std::size_t s, std::size_t n) {
  const std::size_t P = stack.dim(2) * stack.dim(3);
  Array out({n, stack.dim(2), stack.dim(3)});
  std::copy_n(stack.data() + s * stack.dim(1) * P, n * P, out.data());
  return out;
}

Image mean_frame(const Array& f) {
  const std::size_t T = f.dim(0), P = f.dim(1) * f.dim(2);
  Image m({f.dim(1), f.dim(2)}, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t p = 0; p < P; ++p) m[p] += f[t * P + p];
  for (auto& v : m.storage()) v /= static_cast<double>(T);
  return m;
}

Array retrieve_all(const Array& stack, const PhaseConfig& phase) {
  Array out(stack.shape());
  for (std::size_t s = 0; s < stack.dim(0); ++s)
    for (std::size_t t = 0; t < stack.dim(1); ++t) set_plane(out, {s, t}, paganin_filter(plane(stack, {s, t}), phase));
  return out;
}

struct FrameScores {
  double psnr = 0, ssim = 0;
};

FrameScores score(const Array& f, const Image& ref) {
  const double range = std::max(imaging::max_value(ref) - imaging::min_value(ref), 1e-12);
  FrameScores s;
  for (std::size_t t = 0; t < f.dim(0); ++t) {
    const Image im = plane(f, {t});
    s.psnr += metrics::psnr(im, ref, range);
    s.ssim += metrics::ssim(im, ref, range);
  }
  s.psnr /= static_cast<double>(f.dim(0));
  s.ssim /= static_cast<double>(f.dim(0));
  return s;
}

double mean_flicker(const Array& f, const NdArray<std::uint8_t>& mask) {
  const auto v = flicker_score(f, mask);
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void simulate_temporal(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const auto& ts = c.temporal;
  std::mt19937_64 rng(derive_seed(c.seed, "scene"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t S = ts.n_series, T = ts.n_frames, Y = ts.shape[0], X = ts.shape[1];
  Array signal({S, T, Y, X}), clean({S, T, Y, X}), noisy({S, T, Y, X});
  const std::uint64_t noise_seed = derive_seed(c.seed, "noise");
  for (std::size_t s = 0; s < S; ++s) {
    MotionSeriesSpec spec;
    spec.n_frames = T;
    spec.hold_frames = ts.hold_frames;
    spec.parts.clear();
    for (const auto& p : ts.parts) spec.parts.push_back({p.dx, p.dy, p.semi_a, p.semi_b, p.angle_deg, p.value});
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    spec.velocity_px_per_frame = {ts.speed_px_per_frame * std::cos(theta), ts.speed_px_per_frame * std::sin(theta)};
    spec.rotation_deg_per_frame = ts.max_rotation_deg_per_frame * (2.0 * unit(rng) - 1.0);
    // Centre the trajectory so the object stays in view for the whole series.
    const double moving = static_cast<double>(T - ts.hold_frames - (T > ts.hold_frames ? 1 : 0));
    spec.origin_x = 0.5 * static_cast<double>(X - 1) - 0.5 * moving * spec.velocity_px_per_frame[0];
    spec.origin_y = 0.5 * static_cast<double>(Y - 1) - 0.5 * moving * spec.velocity_px_per_frame[1];
    spec.seed = stream_seed(derive_seed(c.seed, "scene"), s);
    const Array sig = generate_motion_series(spec, {Y, X});

    Array expected({T, Y, X});
    for (std::size_t t = 0; t < T; ++t) {
      Image tr = plane(sig, {t});
      for (auto& v : tr.storage()) v = std::exp(-ts.mu_per_unit * v);
      Image inten = phase_contrast_forward(tr, ts.phase);
      set_plane(signal, {s, t}, plane(sig, {t}));
      set_plane(clean, {s, t}, inten);
      for (auto& v : inten.storage()) v = std::max(v, 0.0) * ts.photons_per_pixel;
      set_plane(expected, {t}, inten);
    }
    const Array counts = poissonize(expected, stream_seed(noise_seed, s));
    const std::size_t block = T * Y * X;
    for (std::size_t i = 0; i < block; ++i) noisy[s * block + i] = counts[i] / ts.photons_per_pixel;
  }
  ctx.write("signal", signal, {"series", "t", "y", "x"}, "object signal");
  ctx.write("clean", clean, {"series", "t", "y", "x"}, "intensity");
  ctx.write("noisy", noisy, {"series", "t", "y", "x"}, "intensity");
}

void reconstruct_temporal(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const auto& phase = c.temporal.phase;
  ctx.write("noisy", retrieve_all(ctx.read_array(Stage::simulate, "noisy"), phase), {"series", "t", "y", "x"},
            "attenuation");
  if (c.denoise_enabled && c.temporal.ordering == Ordering::before) {
    ctx.write("denoised", retrieve_all(ctx.read_array(Stage::denoise, "denoised"), phase), {"series", "t", "y", "x"},
              "attenuation");
    if (c.temporal.ensemble_draws > 1)
      ctx.write("ensemble", retrieve_all(ctx.read_array(Stage::denoise, "ensemble"), phase),
                {"series", "t", "y", "x"}, "attenuation");
  }
}

void evaluate_temporal(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const auto& ts = c.temporal;
  const std::size_t H = ts.hold_frames;
  const Ordering ord = c.denoise_enabled ? ts.ordering : Ordering::none;

  // Reference: average of the static segment of series 0, before retrieval,
  // and its retrieval.
  const Array noisy_pre = frames(ctx.read_array(Stage::simulate, "noisy"), 0, H);
  const Image ref_pre = mean_frame(noisy_pre);
  const Image ref_post = paganin_filter(ref_pre, ts.phase);
  const Array noisy_post = frames(ctx.read_array(Stage::reconstruct, "noisy"), 0, H);
  const Array signal = frames(ctx.read_array(Stage::simulate, "signal"), 0, 1);
  const Array clean_pre = frames(ctx.read_array(Stage::simulate, "clean"), 0, 1);
  NdArray<std::uint8_t> background({signal.dim(1), signal.dim(2)});
  for (std::size_t i = 0; i < background.size(); ++i) background[i] = signal[i] == 0.0 ? 1 : 0;
  Image truth_post = plane(signal, {0});
  for (auto& v : truth_post.storage()) v *= ts.mu_per_unit;

  std::map<std::string, std::string> res;
  res["config.hash"] = ctx.exp.hash();
  res["config.seed"] = std::to_string(c.seed);
  res["data.static_frames"] = std::to_string(H);
  auto put = [&](const std::string& domain, const std::string& variant, const Array& f, const Image& ref,
                 const Image& truth) {
    const auto sc = score(f, ref);
    res["psnr." + domain + "." + variant] = format_value(sc.psnr);
    res["ssim." + domain + "." + variant] = format_value(sc.ssim);
    res["psnr_truth." + domain + "." + variant] = format_value(score(f, truth).psnr);
    res["flicker." + domain + "." + variant] = format_value(mean_flicker(f, background));
  };
  put("pre_retrieval", "noisy", noisy_pre, ref_pre, plane(clean_pre, {0}));
  put("post_retrieval", "noisy", noisy_post, ref_post, truth_post);
  if (ord == Ordering::before) {
    put("pre_retrieval", "denoised", frames(ctx.read_array(Stage::denoise, "denoised"), 0, H), ref_pre,
        plane(clean_pre, {0}));
    put("post_retrieval", "denoised", frames(ctx.read_array(Stage::reconstruct, "denoised"), 0, H), ref_post,
        truth_post);
    if (ts.ensemble_draws > 1) {
      put("pre_retrieval", "ensemble", frames(ctx.read_array(Stage::denoise, "ensemble"), 0, H), ref_pre,
          plane(clean_pre, {0}));
      put("post_retrieval", "ensemble", frames(ctx.read_array(Stage::reconstruct, "ensemble"), 0, H), ref_post,
          truth_post);
    }
  } else if (ord == Ordering::after) {
    put("post_retrieval", "denoised", frames(ctx.read_array(Stage::denoise, "denoised"), 0, H), ref_post,
        truth_post);
    if (ts.ensemble_draws > 1)
      put("post_retrieval", "ensemble", frames(ctx.read_array(Stage::denoise, "ensemble"), 0, H), ref_post,
          truth_post);
  }
  add_train_results(ctx, res);
  write_results(ctx.dir() / "results.txt", res);
  ctx.record_output_file("results.txt");
  write_results(ctx.exp.results_path(), res);
}

void report_temporal(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const auto res = read_results(ctx.read_file(Stage::evaluate, "results.txt"));
  const Ordering ord = c.denoise_enabled ? c.temporal.ordering : Ordering::none;
  const std::size_t H = c.temporal.hold_frames, t_show = H / 2;

  // Frame panels: static reference, noisy, denoised (where available).
  const Array noisy_pre = frames(ctx.read_array(Stage::simulate, "noisy"), 0, H);
  const Array noisy_post = frames(ctx.read_array(Stage::reconstruct, "noisy"), 0, H);
  std::vector<Image> pre{mean_frame(noisy_pre), plane(noisy_pre, {t_show})};
  std::vector<Image> post{paganin_filter(mean_frame(noisy_pre), c.temporal.phase), plane(noisy_post, {t_show})};
  if (ord == Ordering::before) {
    pre.push_back(plane(frames(ctx.read_array(Stage::denoise, "denoised"), 0, H), {t_show}));
    post.push_back(plane(frames(ctx.read_array(Stage::reconstruct, "denoised"), 0, H), {t_show}));
  } else if (ord == Ordering::after) {
    post.push_back(plane(frames(ctx.read_array(Stage::denoise, "denoised"), 0, H), {t_show}));
  }
  auto write_panels = [&](const std::string& name, const std::vector<Image>& imgs) {
    const double lo = imaging::min_value(imgs.front()), hi = imaging::max_value(imgs.front());
    std::vector<Image> z;
    for (const auto& im : imgs) z.push_back(plot::zoom(im, 3));
    plot::write_png_gray(ctx.dir() / name, plot::hstack(z, 8, hi), lo, hi);
    ctx.record_output_file(name);
  };
  write_panels("frames_pre_retrieval.png", pre);
  write_panels("frames_post_retrieval.png", post);

  std::vector<std::vector<std::string>> rows;
  for (const std::string domain : {"pre_retrieval", "post_retrieval"}) {
    auto get = [&](const std::string& k) {
      const auto it = res.find(k);
      return it == res.end() ? std::string("-") : it->second.substr(0, 6);
    };
    rows.push_back({domain == "pre_retrieval" ? "before retrieval" : "after retrieval",
                    get("psnr." + domain + ".noisy"), get("psnr." + domain + ".denoised"),
                    get("ssim." + domain + ".noisy"), get("ssim." + domain + ".denoised")});
  }
  plot::write_table_svg(ctx.dir() / "psnr_table.svg", "Static-segment PSNR / SSIM vs averaged reference",
                        {"", "PSNR noisy", "PSNR denoised", "SSIM noisy", "SSIM denoised"}, rows);
  ctx.record_output_file("psnr_table.svg");
}

}  // namespace mcd::experiment::detail
