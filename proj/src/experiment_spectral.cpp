#include <algorithm>
#include <cmath>
#include <numeric>

#include "experiment_detail.hpp"
#include "mcd/error.hpp"
#include "mcd/imaging.hpp"
#include "mcd/metrics.hpp"
#include "mcd/plot.hpp"
#include "mcd/random.hpp"

namespace mcd::experiment::detail {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ParallelGeometry geometry(const Config& c, std::size_t detector_count) {
  ParallelGeometry g;
  g.angles_deg = equispaced_angles(c.n_angles);
  g.detector_count = detector_count;
  g.pixel_size_mm = c.voxel_size_mm;
  return g;
}

std::vector<MaterialSpectrum> build_materials(const Config& c) {
  if (!c.mac_table.empty()) {
    MacTable t = load_mac_table(c.mac_table);
    if (!(t.grid == c.grid))
      throw ConfigError("config field 'spectra.mac_table': table grid (" + std::to_string(t.grid.start_keV) + " keV, " +
                        std::to_string(t.grid.n_bins) + " bins) differs from spectra.grid");
    return t.materials;
  }
  std::vector<MaterialSpectrum> out;
  const double last = c.grid.center(c.grid.n_bins - 1);
  for (const auto& d : c.materials) {
    if (d.kedge_keV && *d.kedge_keV > c.grid.start_keV && *d.kedge_keV <= last)
      out.push_back(synth_kedge_material(c.grid, d.name, d.a, d.p, *d.kedge_keV, d.jump));
    else
      out.push_back(synth_power_law_material(c.grid, d.name, d.a, d.p));
  }
  return out;
}

// (angle, channel, z, u) stack -> (z, channel, y, x) volume, one FBP per plane.
Array fbp_stack(const Array& stack, const ParallelGeometry& geom, RampFilter filter, std::size_t n) {
  const std::size_t A = stack.dim(0), C = stack.dim(1), Z = stack.dim(2), U = stack.dim(3);
  Array vol({Z, C, n, n});
  Image sino({A, U});
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t a = 0; a < A; ++a)
        std::copy_n(stack.data() + ((a * C + c) * Z + z) * U, U, sino.data() + a * U);
      set_plane(vol, {z, c}, fbp(sino, geom, filter, n));
    }
  return vol;
}

std::vector<MaterialSpectrum> with_air(const SpectralInfo& info) {
  std::vector<MaterialSpectrum> m{{"air", std::vector<double>(info.channel_keV.size(), 0.0), std::nullopt}};
  m.insert(m.end(), info.materials.begin(), info.materials.end());
  return m;
}

// Volume holding the denoised reconstruction, if this pipeline has one.
std::optional<Stage> denoised_volume_stage(const Config& c) {
  if (!c.denoise_enabled) return std::nullopt;
  return c.domain == Domain::projections ? Stage::reconstruct : Stage::denoise;
}

std::vector<std::string> variants(const Config& c) {
  return denoised_volume_stage(c) ? std::vector<std::string>{"noisy", "denoised"} : std::vector<std::string>{"noisy"};
}

Array load_volume(StageContext& ctx, const std::string& variant) {
  if (variant == "noisy") return ctx.read_array(Stage::reconstruct, "noisy");
  return ctx.read_array(*denoised_volume_stage(ctx.cfg), "denoised");
}

// Mean spectrum over voxels of label m; interior voxels (all six neighbours
// share the label) when there are at least `min_voxels` of them.
struct RegionSpectrum {
  std::vector<double> mean;
  std::size_t voxels = 0;
  bool interior = false;
};

std::vector<std::uint8_t> region_mask(const NdArray<std::uint16_t>& labels, std::uint16_t m, bool interior) {
  const std::size_t Z = labels.dim(0), Y = labels.dim(1), X = labels.dim(2);
  std::vector<std::uint8_t> mask(labels.size(), 0);
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t y = 0; y < Y; ++y)
      for (std::size_t x = 0; x < X; ++x) {
        if (labels(z, y, x) != m) continue;
        if (interior) {
          if (z == 0 || y == 0 || x == 0 || z + 1 == Z || y + 1 == Y || x + 1 == X) continue;
          if (labels(z - 1, y, x) != m || labels(z + 1, y, x) != m || labels(z, y - 1, x) != m ||
              labels(z, y + 1, x) != m || labels(z, y, x - 1) != m || labels(z, y, x + 1) != m)
            continue;
        }
        mask[(z * Y + y) * X + x] = 1;
      }
  return mask;
}

RegionSpectrum region_spectrum(const Array& vol, const NdArray<std::uint16_t>& labels, std::uint16_t m,
                               std::size_t min_voxels) {
  const std::size_t Z = vol.dim(0), C = vol.dim(1), P = vol.dim(2) * vol.dim(3);
  RegionSpectrum r;
  auto mask = region_mask(labels, m, true);
  r.voxels = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  r.interior = r.voxels >= min_voxels;
  if (!r.interior) {
    mask = region_mask(labels, m, false);
    r.voxels = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  }
  r.mean.assign(C, 0.0);
  if (r.voxels == 0) return r;
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = vol.data() + (z * C + c) * P;
      const std::uint8_t* mk = mask.data() + z * P;
      double s = 0;
      for (std::size_t p = 0; p < P; ++p)
        if (mk[p]) s += src[p];
      r.mean[c] += s;
    }
  for (auto& v : r.mean) v /= static_cast<double>(r.voxels);
  return r;
}

std::size_t max_jump_channel(const std::vector<double>& s) {
  std::size_t best = 1;
  for (std::size_t j = 2; j < s.size(); ++j)
    if (s[j] - s[j - 1] > s[best] - s[best - 1]) best = j;
  return best;
}

// Mean over slices and channels of per-plane SSIM against the truth volume;
// each channel uses the truth's dynamic range in that channel.
double spatial_ssim(const Array& vol, const Array& truth) {
  const std::size_t Z = vol.dim(0), C = vol.dim(1);
  double sum = 0;
  for (std::size_t c = 0; c < C; ++c) {
    double hi = 0;
    for (std::size_t z = 0; z < Z; ++z) hi = std::max(hi, imaging::max_value(plane(truth, {z, c})));
    const double range = hi > 0 ? hi : 1.0;
    for (std::size_t z = 0; z < Z; ++z) sum += metrics::ssim(plane(vol, {z, c}), plane(truth, {z, c}), range);
  }
  return sum / static_cast<double>(Z * C);
}

// Channel-mean rebinning by a uniform factor (trailing partial group dropped).
Array bin_channels(const Array& vol, std::size_t factor) {
  IntervalScheme s{{vol.dim(1)}, {factor}, TailPolicy::drop};
  RebinResult r = rebin(vol, 1, s);
  for (auto& v : r.data.storage()) v /= static_cast<double>(factor);
  return std::move(r.data);
}

Array truth_volume(const NdArray<std::uint16_t>& labels, const std::vector<MaterialSpectrum>& mats) {
  const std::size_t Z = labels.dim(0), C = mats.front().mu.size(), P = labels.dim(1) * labels.dim(2);
  Array t({Z, C, labels.dim(1), labels.dim(2)}, 0.0);
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t p = 0; p < P; ++p) {
      const std::uint16_t l = labels[z * P + p];
      if (l == 0) continue;
      for (std::size_t c = 0; c < C; ++c) t[(z * C + c) * P + p] = mats[l - 1].mu[c];
    }
  return t;
}

}  // namespace

void simulate_spectral(StageContext& ctx) {
  const Config& c = ctx.cfg;
  if (c.clouds.empty()) throw ConfigError("config field 'phantom.clouds': at least one cloud is required");
  auto clouds = c.clouds;
  const std::uint64_t phantom_seed = derive_seed(c.seed, "phantom");
  for (auto& s : clouds) s.seed = stream_seed(phantom_seed, s.seed);
  const LabelVolume vol = rasterize(clouds, c.phantom_shape, c.voxel_size_mm);

  const auto mats = build_materials(c);
  for (const auto& s : clouds)
    if (static_cast<std::size_t>(s.material_id) > mats.size())
      throw ConfigError("phantom cloud uses material " + std::to_string(s.material_id) + " but only " +
                        std::to_string(mats.size()) + " materials exist");
  std::map<int, MaterialSpectrum> by_label;
  for (std::size_t i = 0; i < mats.size(); ++i) by_label[static_cast<int>(i + 1)] = mats[i];
  const SourceSpectrum source = synth_source(c.grid, c.source_peak_keV, c.source_width_keV, c.source_peak_fluence);

  const std::size_t N = c.phantom_shape[1];
  const auto geom = geometry(c, c.detector_count ? c.detector_count : default_detector_count(N));
  const std::size_t A = c.n_angles, C = c.grid.n_bins, Z = slab_count(c), U = geom.detector_count, z0 = slab_first(c);
  const std::uint64_t noise_seed = derive_seed(c.seed, "noise");
  Array counts({A, C, Z, U});
  for (std::size_t z = 0; z < Z; ++z) {
    const auto slice = plane(vol.labels, {z0 + z});
    const auto expected = forward_spectral(slice, by_label, c.grid, source, c.exposure_scale, geom);
    const Array noisy = poissonize(expected.data, stream_seed(noise_seed, z0 + z));
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t ch = 0; ch < C; ++ch)
        std::copy_n(noisy.data() + (a * C + ch) * U, U, counts.data() + ((a * C + ch) * Z + z) * U);
  }

  SpectralInfo info;
  info.channel_keV = c.grid.centers();
  info.flux = source.photons_per_mm2;
  info.flat = flat_counts(source, c.exposure_scale, c.voxel_size_mm);
  info.materials = mats;
  ctx.write("labels", vol.labels, {"z", "y", "x"}, "label");
  ctx.write_json("spectra.json", info.to_json());
  ctx.write("counts", counts, {"angle", "channel", "z", "u"}, "counts", info.channel_keV);
}

void rebin_spectral(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const auto info = SpectralInfo::from_json(ctx.read_json(Stage::simulate, "spectra.json"));
  const Array counts = ctx.read_array(Stage::simulate, "counts");
  RebinResult r = rebin(counts, 1, c.rebin);
  auto summed = [&](const std::vector<double>& v) {
    auto m = rebin_mean(v, r);
    for (std::size_t g = 0; g < m.size(); ++g) m[g] *= static_cast<double>(r.group_count[g]);
    return m;
  };
  SpectralInfo out;
  out.channel_keV = rebin_mean(info.channel_keV, r);
  out.flux = summed(info.flux);
  out.flat = summed(info.flat);
  for (const auto& m : info.materials) out.materials.push_back({m.name, rebin_mean(m.mu, r), m.kedge_keV});
  ctx.write_json("groups.json", {{"group_first", r.group_first},
                                 {"group_count", r.group_count},
                                 {"dropped_channels", r.dropped_channels}});
  ctx.write_json("spectra.json", out.to_json());
  ctx.write("counts", r.data, {"angle", "channel", "z", "u"}, "counts", out.channel_keV);
}

void reconstruct_spectral(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const Stage src = spectral_source_stage(c);
  const auto info = SpectralInfo::from_json(ctx.read_json(src, "spectra.json"));
  const Array counts = ctx.read_array(src, "counts");
  const auto geom = geometry(c, counts.dim(3));
  const std::size_t N = c.phantom_shape[1];
  Array denoised_proj;
  if (c.denoise_enabled && c.domain == Domain::projections) denoised_proj = ctx.read_array(Stage::denoise, "denoised");
  ctx.write("noisy", fbp_stack(attenuation(counts, info.flat, c.count_floor), geom, c.filter, N),
            {"z", "channel", "y", "x"}, "1/mm", info.channel_keV);
  if (!denoised_proj.empty())
    ctx.write("denoised", fbp_stack(denoised_proj, geom, c.filter, N), {"z", "channel", "y", "x"}, "1/mm",
              info.channel_keV);
}

void decompose_stage(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const auto info = SpectralInfo::from_json(ctx.read_json(spectral_source_stage(c), "spectra.json"));
  const auto mats = with_air(info);
  for (const auto& v : variants(c)) {
    const Array vol = load_volume(ctx, v);
    const FractionMap map = decompose(vol, mats, c.decompose);
    NdArray<std::uint16_t> nc(map.nonconverged.shape());
    std::copy(map.nonconverged.values().begin(), map.nonconverged.values().end(), nc.data());
    ctx.write("fractions_" + v, map.fractions, {"material", "z", "y", "x"}, "fraction");
    ctx.write("nonconverged_" + v, nc, {"z", "y", "x"}, "flag");
  }
}

void evaluate_spectral(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const auto info = SpectralInfo::from_json(ctx.read_json(spectral_source_stage(c), "spectra.json"));
  const auto labels = slab_labels(c, ctx.read_labels(Stage::simulate, "labels"));
  const std::size_t M = info.materials.size(), C = info.channel_keV.size();
  const Array truth = truth_volume(labels, info.materials);

  std::map<std::string, std::string> res;
  res["config.hash"] = ctx.exp.hash();
  res["config.seed"] = std::to_string(c.seed);
  res["data.channels"] = std::to_string(C);
  res["data.slices"] = std::to_string(labels.dim(0));
  json eval;
  eval["channel_keV"] = info.channel_keV;
  eval["materials"] = json::array();
  for (const auto& m : info.materials)
    eval["materials"].push_back(
        {{"name", m.name}, {"mu", m.mu}, {"kedge_keV", m.kedge_keV ? json(*m.kedge_keV) : json(nullptr)}});

  // Flux-eligible edges and their first channel at or above the edge.
  const double flux_max = *std::max_element(info.flux.begin(), info.flux.end());
  std::vector<std::optional<std::size_t>> edge_channel(M);
  for (std::size_t m = 0; m < M; ++m) {
    const auto& k = info.materials[m].kedge_keV;
    if (!k || *k <= info.channel_keV.front() || *k > info.channel_keV.back()) continue;
    const std::size_t j = static_cast<std::size_t>(
        std::lower_bound(info.channel_keV.begin(), info.channel_keV.end(), *k) - info.channel_keV.begin());
    const std::string key = "kedge." + info.materials[m].name;
    res[key + ".true_channel"] = std::to_string(j);
    const bool eligible = info.flux[j] >= c.kedge_flux_fraction * flux_max;
    res[key + ".eligible"] = eligible ? "1" : "0";
    edge_channel[m] = j;
  }

  for (const auto& v : variants(c)) {
    const Array vol = load_volume(ctx, v);
    const Array fr = ctx.read_array(Stage::decompose, "fractions_" + v);
    const auto nc = ctx.read_labels(Stage::decompose, "nonconverged_" + v);
    if (fr.dim(0) != M + 1 || fr.dim(1) != labels.dim(0))
      throw DataError("fractions_" + v + " shape " + shape_string(fr.shape()) + " does not match the phantom slab");

    const auto rep = metrics::auprc_per_class(fr, labels);
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t k = 0; k <= M; ++k) {
      const std::string name = k == 0 ? "air" : info.materials[k - 1].name;
      const auto& val = rep.per_class[k];
      res["auprc." + v + "." + name] = val ? format_value(*val) : "undefined";
      if (k > 0 && val) sum += *val, ++n;
    }
    res["auprc." + v + ".mean"] = n ? format_value(sum / static_cast<double>(n)) : "undefined";

    FractionMap map;
    map.fractions = fr;
    const auto pred = classify(map);
    const auto conf = metrics::confusion(labels, pred, M + 1);
    std::uint64_t correct = 0, total = 0;
    for (std::size_t i = 0; i <= M; ++i)
      for (std::size_t j = 0; j <= M; ++j) {
        total += conf.counts(i, j);
        if (i == j) correct += conf.counts(i, j);
      }
    res["classification." + v + ".accuracy"] = format_value(static_cast<double>(correct) / static_cast<double>(total));
    std::vector<std::vector<double>> rates(M + 1, std::vector<double>(M + 1));
    for (std::size_t i = 0; i <= M; ++i)
      for (std::size_t j = 0; j <= M; ++j) rates[i][j] = conf.rates(i, j);
    eval["confusion"][v] = rates;

    double max_sum_err = 0, min_f = 0;
    const std::size_t nvox = fr.size() / (M + 1);
    for (std::size_t i = 0; i < nvox; ++i) {
      double s = 0;
      for (std::size_t k = 0; k <= M; ++k) {
        s += fr[k * nvox + i];
        min_f = std::min(min_f, fr[k * nvox + i]);
      }
      max_sum_err = std::max(max_sum_err, std::abs(s - 1.0));
    }
    res["decompose." + v + ".max_sum_error"] = format_value(max_sum_err);
    res["decompose." + v + ".min_fraction"] = format_value(min_f);
    res["decompose." + v + ".nonconverged"] =
        std::to_string(std::count_if(nc.values().begin(), nc.values().end(), [](auto f) { return f != 0; }));

    res["ssim.spatial." + v] = format_value(spatial_ssim(vol, truth));
    for (std::size_t f : c.binning_factors) {
      if (f > C / 2) continue;
      const std::string key = "binning.f" + std::to_string(f);
      res[key + ".channels"] = std::to_string(C / f);
      res[key + ".ssim_spatial." + v] = format_value(spatial_ssim(bin_channels(vol, f), bin_channels(truth, f)));
    }

    for (std::size_t m = 0; m < M; ++m) {
      const auto& mat = info.materials[m];
      const auto rs = region_spectrum(vol, labels, static_cast<std::uint16_t>(m + 1), c.kedge_min_voxels);
      eval["spectra"][v][mat.name] = rs.mean;
      if (rs.voxels == 0) {
        res["ssim.spectral." + mat.name + "." + v] = "undefined";
        continue;
      }
      const auto [lo, hi] = std::minmax_element(mat.mu.begin(), mat.mu.end());
      res["ssim.spectral." + mat.name + "." + v] =
          format_value(metrics::ssim_1d(rs.mean, mat.mu, *hi - *lo > 0 ? *hi - *lo : 1.0));
      if (!edge_channel[m]) continue;
      const std::string key = "kedge." + mat.name;
      const std::size_t found = max_jump_channel(rs.mean);
      res[key + ".voxels"] = std::to_string(rs.voxels);
      res[key + ".interior_only"] = rs.interior ? "1" : "0";
      res[key + ".found_channel." + v] = std::to_string(found);
      const long d = static_cast<long>(found) - static_cast<long>(*edge_channel[m]);
      res[key + ".within_1." + v] = std::abs(d) <= 1 ? "1" : "0";
    }
  }
  add_train_results(ctx, res);

  ctx.write_json("evaluation.json", eval);
  write_results(ctx.dir() / "results.txt", res);
  ctx.record_output_file("results.txt");
  write_results(ctx.exp.results_path(), res);
}

void report_spectral(StageContext& ctx) {
  const Config& c = ctx.cfg;
  const auto res = read_results(ctx.read_file(Stage::evaluate, "results.txt"));
  const json eval = ctx.read_json(Stage::evaluate, "evaluation.json");
  const auto labels = slab_labels(c, ctx.read_labels(Stage::simulate, "labels"));
  const auto keV = eval.at("channel_keV").get<std::vector<double>>();
  std::vector<MaterialSpectrum> mats;
  for (const auto& m : eval.at("materials"))
    mats.push_back({m.at("name").get<std::string>(), m.at("mu").get<std::vector<double>>(),
                    m.at("kedge_keV").is_null() ? std::nullopt : std::optional<double>(m.at("kedge_keV").get<double>())});
  const std::size_t M = mats.size(), C = keV.size();
  const auto vs = variants(c);
  const fs::path out = ctx.dir();

  // Noisy vs denoised slices at the middle slice, mid channel and edge channel.
  const std::size_t zmid = labels.dim(0) / 2;
  const Array truth = truth_volume(labels, mats);
  std::vector<Array> vols;
  for (const auto& v : vs) vols.push_back(load_volume(ctx, v));
  for (std::size_t ch : {C / 4, C / 2, (3 * C) / 4}) {
    std::vector<Image> panels{plot::zoom(plane(truth, {zmid, ch}), 4)};
    for (const auto& vol : vols) panels.push_back(plot::zoom(plane(vol, {zmid, ch}), 4));
    double hi = 0;
    for (const auto& m : mats) hi = std::max(hi, m.mu[ch]);
    const std::string name = "slice_channel" + std::to_string(ch) + ".png";
    plot::write_png_gray(out / name, plot::hstack(panels, 8, hi), 0.0, hi * 1.1);
    ctx.record_output_file(name);
  }

  // Label maps: truth, then argmax of each variant's fractions.
  {
    const std::size_t Y = labels.dim(1), X = labels.dim(2), gap = 2;
    NdArray<std::uint16_t> strip({Y, X * (vs.size() + 1) + gap * vs.size()}, 0);
    auto put = [&](const NdArray<std::uint16_t>& img, std::size_t slot) {
      for (std::size_t y = 0; y < Y; ++y)
        for (std::size_t x = 0; x < X; ++x) strip(y, slot * (X + gap) + x) = img(zmid, y, x);
    };
    put(labels, 0);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      FractionMap map;
      map.fractions = ctx.read_array(Stage::decompose, "fractions_" + vs[i]);
      put(classify(map), i + 1);
    }
    plot::write_png_labels(out / "labels.png", strip, 4);
    ctx.record_output_file("labels.png");
  }

  // Voxel spectra against theory.
  for (const auto& m : mats) {
    plot::LineChart ch{"Mean voxel spectrum: " + m.name, "energy (keV)", "mu (1/mm)", {}, {}};
    ch.series.push_back({"theory", keV, m.mu, true, false});
    for (const auto& v : vs) ch.series.push_back({v, keV, eval.at("spectra").at(v).at(m.name).get<std::vector<double>>()});
    if (m.kedge_keV) ch.vertical_markers.push_back(*m.kedge_keV);
    const std::string name = "spectrum_" + m.name + ".svg";
    plot::write_line_chart_svg(out / name, ch);
    ctx.record_output_file(name);
  }

  std::vector<std::string> names{"air"};
  for (const auto& m : mats) names.push_back(m.name);
  for (const auto& v : vs) {
    const auto rates = eval.at("confusion").at(v).get<std::vector<std::vector<double>>>();
    const std::string name = "confusion_" + v + ".svg";
    plot::write_heatmap_svg(out / name, "Confusion (" + v + "), row-normalised", names, names, rates);
    ctx.record_output_file(name);
  }

  {
    std::vector<std::string> header{"material"};
    for (const auto& v : vs) header.push_back("AUPRC " + v);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 1; k <= M; ++k) {
      std::vector<std::string> r{names[k]};
      for (const auto& v : vs) r.push_back(res.at("auprc." + v + "." + names[k]));
      rows.push_back(r);
    }
    std::vector<std::string> mean{"mean"};
    for (const auto& v : vs) mean.push_back(res.at("auprc." + v + ".mean"));
    rows.push_back(mean);
    for (auto& r : rows)
      for (std::size_t i = 1; i < r.size(); ++i)
        if (r[i] != "undefined") r[i] = r[i].substr(0, 6);
    plot::write_table_svg(out / "auprc_table.svg", "Per-material AUPRC", header, rows);
    ctx.record_output_file("auprc_table.svg");
  }

  {
    plot::LineChart ch{"Spatial SSIM vs channel binning", "binning factor", "mean SSIM", {}, {}};
    for (const auto& v : vs) {
      plot::Series s{v, {}, {}, false, true};
      for (std::size_t f : c.binning_factors) {
        const auto it = res.find("binning.f" + std::to_string(f) + ".ssim_spatial." + v);
        if (it == res.end()) continue;
        s.x.push_back(static_cast<double>(f));
        s.y.push_back(std::stod(it->second));
      }
      ch.series.push_back(s);
    }
    plot::write_line_chart_svg(out / "ssim_vs_binning.svg", ch);
    ctx.record_output_file("ssim_vs_binning.svg");
  }
}

}  // namespace mcd::experiment::detail
