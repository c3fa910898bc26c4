#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mcd/error.hpp"
#include "mcd/experiment.hpp"
#include "mcd/random.hpp"
#include "mcd/store.hpp"

namespace mcd::experiment {

using nlohmann::json;

namespace {

const char* kDefaults = R"JSON(
{
  "name": "experiment",
  "seed": 20240501,
  "mode": "spectral",
  "domain": "projections",
  "phantom": {
    "shape": [64, 64, 64],
    "voxel_size_mm": 0.1,
    "slab_first": 0,
    "slab_count": 0,
    "clouds": [
      {"kind": "swiss_roll", "n_points": 7000, "point_radius_vox": 2, "priority": 1, "material": 1, "seed": 1, "rotation_deg": 0, "scale": 1.0},
      {"kind": "swiss_roll", "n_points": 7000, "point_radius_vox": 2, "priority": 2, "material": 2, "seed": 2, "rotation_deg": 180, "scale": 1.0},
      {"kind": "moons", "n_points": 5000, "point_radius_vox": 2, "priority": 3, "material": 3, "seed": 3, "rotation_deg": 0, "scale": 0.55},
      {"kind": "moons", "n_points": 5000, "point_radius_vox": 2, "priority": 4, "material": 4, "seed": 4, "rotation_deg": 90, "scale": 0.45},
      {"kind": "s_curve", "n_points": 5000, "point_radius_vox": 2, "priority": 5, "material": 5, "seed": 5, "rotation_deg": 45, "scale": 0.6}
    ]
  },
  "spectra": {
    "grid": {"start_keV": 40.0, "step_keV": 1.0, "n_bins": 46},
    "mac_table": "",
    "materials": [
      {"name": "Eu", "a": 0.25, "p": 3.0, "kedge_keV": 48.5, "jump": 3.0},
      {"name": "Gd", "a": 0.25, "p": 3.0, "kedge_keV": 50.2, "jump": 3.0},
      {"name": "Yb", "a": 0.25, "p": 3.0, "kedge_keV": 61.3, "jump": 3.0},
      {"name": "Lu", "a": 0.25, "p": 3.0, "kedge_keV": 63.3, "jump": 3.0},
      {"name": "U", "a": 0.5, "p": 2.5, "kedge_keV": 115.6, "jump": 2.0}
    ],
    "source": {"peak_keV": 55.0, "width_keV": 20.0, "peak_fluence": 175000.0}
  },
  "acquisition": {"n_angles": 120, "detector_count": 0, "exposure_scale": 0.04, "count_floor": 1.0},
  "reconstruct": {"filter": "ram_lak"},
  "rebin": {"enabled": false, "interval_sizes": [46], "factors": [1], "tail_policy": "drop"},
  "pairs": {"split_ratio": 0.8, "ssim_threshold": 0.6, "ssim_prefilter_sigma": 2.0},
  "model": {"base_width": 16, "depth": 3},
  "train": {
    "learning_rate": 0.0003,
    "epochs": 8,
    "batch_size": 8,
    "steps_per_epoch": 125,
    "max_val_pairs": 256,
    "loss": "l1",
    "augment": {"crop": 32, "flips": true, "rot90": true, "max_shift": 0, "max_rotation_deg": 0.0,
                "scale_jitter": 0.0, "max_shear": 0.0, "blur_sigma_max": 0.0, "blur_probability": 0.0}
  },
  "denoise": {"enabled": true},
  "decompose": {"tolerance": 1e-8, "max_iter": 500},
  "evaluate": {"binning_factors": [1, 2, 3, 5], "kedge_min_voxels": 100, "kedge_flux_fraction": 0.5},
  "temporal": {
    "scene": {
      "shape": [96, 96],
      "n_series": 6,
      "n_frames": 40,
      "hold_frames": 20,
      "speed_px_per_frame": 0.6,
      "max_rotation_deg_per_frame": 2.0,
      "parts": [
        {"dx": 0.0, "dy": 0.0, "semi_a": 14.0, "semi_b": 9.0, "angle_deg": 20.0, "value": 1.0},
        {"dx": 6.0, "dy": -3.0, "semi_a": 5.0, "semi_b": 3.0, "angle_deg": -30.0, "value": 1.5}
      ],
      "mu_per_unit": 0.5,
      "photons_per_pixel": 200.0
    },
    "phase": {"alpha_mm2": 0.00004, "pixel_size_mm": 0.01, "symmetric_padding": true, "clamp": "clamp", "clamp_floor": 1e-6},
    "ordering": "before",
    "ensemble": {"draws": 0, "sigma": 0.05}
  }
}
)JSON";

std::string join_path(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

void merge_checked(json& target, const json& patch, const std::string& path) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string field = join_path(path, it.key());
    if (!target.contains(it.key())) throw ConfigError("unknown config field '" + field + "'");
    json& slot = target[it.key()];
    if (slot.is_object() && it.value().is_object())
      merge_checked(slot, it.value(), field);
    else
      slot = it.value();
  }
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

void apply_override(json& root, const std::string& spec) {
  std::string body = spec;
  if (body.rfind("--", 0) == 0) body = body.substr(2);
  const auto eq = body.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "': expected key=value");
  const std::string key = body.substr(0, eq);
  const json value = parse_override_value(body.substr(eq + 1));

  json* node = &root;
  std::string walked;
  std::istringstream parts(key);
  std::string seg;
  std::vector<std::string> segs;
  while (std::getline(parts, seg, '.')) segs.push_back(seg);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string& s = segs[i];
    walked = join_path(walked, s);
    if (s.empty()) throw ConfigError("override '" + spec + "': empty key segment");
    if (node->is_object()) {
      if (!node->contains(s)) throw ConfigError("unknown config field '" + walked + "'");
      node = &(*node)[s];
    } else if (node->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw ConfigError("override '" + spec + "': '" + walked + "' needs a numeric index");
      }
      if (idx >= node->size()) throw ConfigError("override '" + spec + "': index out of range at '" + walked + "'");
      node = &(*node)[idx];
    } else {
      throw ConfigError("unknown config field '" + walked + "'");
    }
  }
  *node = value;
}

// ---- typed readers with field-level messages --------------------------------

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

const json& member(const json& obj, const std::string& key, const std::string& path) {
  const std::string field = join_path(path, key);
  if (!obj.is_object()) bad(path, "expected an object");
  if (!obj.contains(key)) bad(field, "missing");
  return obj.at(key);
}

double number(const json& obj, const std::string& key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_number()) bad(join_path(path, key), "expected a number, got " + v.dump());
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(join_path(path, key), "must be finite");
  return d;
}

double positive(const json& obj, const std::string& key, const std::string& path) {
  const double d = number(obj, key, path);
  if (!(d > 0)) bad(join_path(path, key), "must be > 0, got " + member(obj, key, path).dump());
  return d;
}

double nonnegative(const json& obj, const std::string& key, const std::string& path) {
  const double d = number(obj, key, path);
  if (d < 0) bad(join_path(path, key), "must be >= 0, got " + member(obj, key, path).dump());
  return d;
}

long integer(const json& obj, const std::string& key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_number_integer()) bad(join_path(path, key), "expected an integer, got " + v.dump());
  return v.get<long>();
}

std::size_t count(const json& obj, const std::string& key, const std::string& path, long min_value = 0) {
  const long v = integer(obj, key, path);
  if (v < min_value) bad(join_path(path, key), "must be >= " + std::to_string(min_value) + ", got " + std::to_string(v));
  return static_cast<std::size_t>(v);
}

bool boolean(const json& obj, const std::string& key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_boolean()) bad(join_path(path, key), "expected true or false, got " + v.dump());
  return v.get<bool>();
}

std::string text(const json& obj, const std::string& key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_string()) bad(join_path(path, key), "expected a string, got " + v.dump());
  return v.get<std::string>();
}

const json& array(const json& obj, const std::string& key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_array()) bad(join_path(path, key), "expected an array, got " + v.dump());
  return v;
}

template <class F>
auto choice(const json& obj, const std::string& key, const std::string& path, F parse) {
  const std::string s = text(obj, key, path);
  try {
    return parse(s);
  } catch (const ConfigError& e) {
    bad(join_path(path, key), e.what());
  }
}

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& path) {
  if (!obj.is_object()) bad(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError("unknown config field '" + join_path(path, it.key()) + "'");
}

std::vector<std::size_t> count_list(const json& obj, const std::string& key, const std::string& path, long min_value) {
  const json& a = array(obj, key, path);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string field = join_path(path, key) + "." + std::to_string(i);
    if (!a[i].is_number_integer() || a[i].get<long>() < min_value)
      bad(field, "expected an integer >= " + std::to_string(min_value) + ", got " + a[i].dump());
    out.push_back(a[i].get<std::size_t>());
  }
  return out;
}

Mode parse_mode(const std::string& s) {
  if (s == "spectral") return Mode::spectral;
  if (s == "temporal") return Mode::temporal;
  throw ConfigError("expected 'spectral' or 'temporal', got '" + s + "'");
}

Domain parse_domain(const std::string& s) {
  if (s == "projections") return Domain::projections;
  if (s == "slices") return Domain::slices;
  throw ConfigError("expected 'projections' or 'slices', got '" + s + "'");
}

Ordering parse_ordering(const std::string& s) {
  if (s == "before") return Ordering::before;
  if (s == "after") return Ordering::after;
  if (s == "none") return Ordering::none;
  throw ConfigError("expected 'before', 'after' or 'none', got '" + s + "'");
}

}  // namespace

std::string to_string(Stage s) {
  switch (s) {
    case Stage::simulate: return "simulate";
    case Stage::rebin: return "rebin";
    case Stage::train: return "train";
    case Stage::denoise: return "denoise";
    case Stage::reconstruct: return "reconstruct";
    case Stage::decompose: return "decompose";
    case Stage::evaluate: return "evaluate";
    case Stage::report: return "report";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kAllStages)
    if (to_string(s) == name) return s;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

json default_config_json() { return json::parse(kDefaults); }

json effective_config_json(const json& file, const std::vector<std::string>& overrides) {
  if (!file.is_object()) throw ConfigError("config: top level must be an object");
  json eff = default_config_json();
  merge_checked(eff, file, "");
  for (const auto& o : overrides) apply_override(eff, o);
  return eff;
}

std::string config_hash(const json& effective) { return store::hash_hex(fnv1a64(effective.dump())); }

Config parse_config(const json& j) {
  Config c;
  only_keys(j, {"name", "seed", "mode", "domain", "phantom", "spectra", "acquisition", "reconstruct", "rebin", "pairs",
                "model", "train", "denoise", "decompose", "evaluate", "temporal"},
            "");
  c.name = text(j, "name", "");
  if (c.name.empty()) bad("name", "must not be empty");
  {
    const json& s = member(j, "seed", "");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      bad("seed", "expected a non-negative integer, got " + s.dump());
    c.seed = s.get<std::uint64_t>();
  }
  c.mode = choice(j, "mode", "", parse_mode);
  c.domain = choice(j, "domain", "", parse_domain);

  // phantom
  {
    const std::string P = "phantom";
    const json& ph = member(j, "phantom", "");
    const json& shape = array(ph, "shape", P);
    if (shape.size() != 3) bad("phantom.shape", "expected [z, y, x]");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!shape[i].is_number_integer() || shape[i].get<long>() < 8)
        bad("phantom.shape." + std::to_string(i), "expected an integer >= 8, got " + shape[i].dump());
      c.phantom_shape[i] = shape[i].get<std::size_t>();
    }
    if (c.phantom_shape[1] != c.phantom_shape[2]) bad("phantom.shape", "slices must be square (y == x)");
    c.voxel_size_mm = positive(ph, "voxel_size_mm", P);
    c.slab_first = count(ph, "slab_first", P);
    c.slab_count = count(ph, "slab_count", P);
    if (c.slab_count == 0) {
      if (c.slab_first != 0) bad("phantom.slab_first", "must be 0 when slab_count is 0 (whole volume)");
    } else if (c.slab_first + c.slab_count > c.phantom_shape[0]) {
      bad("phantom.slab_count", "slab extends past the phantom (" + std::to_string(c.slab_first) + " + " +
                                    std::to_string(c.slab_count) + " > " + std::to_string(c.phantom_shape[0]) + ")");
    }
    const json& clouds = array(ph, "clouds", P);
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      const std::string F = "phantom.clouds." + std::to_string(i);
      const json& e = clouds[i];
      only_keys(e, {"kind", "n_points", "point_radius_vox", "priority", "material", "seed", "rotation_deg", "scale"}, F);
      PointCloudSpec s;
      s.kind = choice(e, "kind", F, [](const std::string& k) { return parse_cloud_kind(k); });
      s.n_points = count(e, "n_points", F, 1);
      s.point_radius_vox = static_cast<int>(count(e, "point_radius_vox", F, 0));
      s.priority = static_cast<int>(integer(e, "priority", F));
      s.material_id = static_cast<int>(count(e, "material", F, 1));
      s.seed = count(e, "seed", F);
      s.rotation_deg = number(e, "rotation_deg", F);
      s.scale = positive(e, "scale", F);
      c.clouds.push_back(s);
    }
  }

  // spectra
  {
    const std::string S = "spectra";
    const json& sp = member(j, "spectra", "");
    const json& g = member(sp, "grid", S);
    c.grid = EnergyGrid{number(g, "start_keV", "spectra.grid"), positive(g, "step_keV", "spectra.grid"),
                        count(g, "n_bins", "spectra.grid", 3)};
    if (!(c.grid.start_keV > 0)) bad("spectra.grid.start_keV", "must be > 0");
    c.mac_table = text(sp, "mac_table", S);
    const json& mats = array(sp, "materials", S);
    for (std::size_t i = 0; i < mats.size(); ++i) {
      const std::string F = "spectra.materials." + std::to_string(i);
      const json& e = mats[i];
      only_keys(e, {"name", "a", "p", "kedge_keV", "jump"}, F);
      MaterialDef m;
      m.name = text(e, "name", F);
      if (m.name.empty()) bad(F + ".name", "must not be empty");
      m.a = positive(e, "a", F);
      m.p = nonnegative(e, "p", F);
      if (!member(e, "kedge_keV", F).is_null()) m.kedge_keV = positive(e, "kedge_keV", F);
      m.jump = positive(e, "jump", F);
      if (m.jump < 1) bad(F + ".jump", "must be >= 1");
      c.materials.push_back(m);
    }
    if (c.mode == Mode::spectral) {
      if (c.materials.empty() && c.mac_table.empty()) bad("spectra.materials", "at least one material is required");
      for (std::size_t i = 0; i < c.clouds.size(); ++i)
        if (c.mac_table.empty() && static_cast<std::size_t>(c.clouds[i].material_id) > c.materials.size())
          bad("phantom.clouds." + std::to_string(i) + ".material",
              "refers to material " + std::to_string(c.clouds[i].material_id) + " but only " +
                  std::to_string(c.materials.size()) + " are defined");
      if (!c.mac_table.empty() && !std::filesystem::exists(c.mac_table))
        bad("spectra.mac_table", "file not found: " + c.mac_table);
    }
    const json& src = member(sp, "source", S);
    c.source_peak_keV = positive(src, "peak_keV", "spectra.source");
    c.source_width_keV = positive(src, "width_keV", "spectra.source");
    c.source_peak_fluence = positive(src, "peak_fluence", "spectra.source");
  }

  // acquisition, reconstruction, rebinning
  {
    const json& a = member(j, "acquisition", "");
    c.n_angles = count(a, "n_angles", "acquisition", 2);
    c.detector_count = count(a, "detector_count", "acquisition");
    c.exposure_scale = positive(a, "exposure_scale", "acquisition");
    c.count_floor = positive(a, "count_floor", "acquisition");
    c.filter = choice(member(j, "reconstruct", ""), "filter", "reconstruct",
                      [](const std::string& s) { return parse_ramp_filter(s); });
    const json& r = member(j, "rebin", "");
    c.rebin_enabled = boolean(r, "enabled", "rebin");
    c.rebin.interval_sizes = count_list(r, "interval_sizes", "rebin", 1);
    c.rebin.factors = count_list(r, "factors", "rebin", 1);
    c.rebin.tail_policy = choice(r, "tail_policy", "rebin", [](const std::string& s) { return parse_tail_policy(s); });
    if (c.rebin.interval_sizes.size() != c.rebin.factors.size())
      bad("rebin.factors", "needs one factor per interval");
    if (c.rebin_enabled && c.mode == Mode::spectral) {
      std::size_t total = 0;
      for (auto n : c.rebin.interval_sizes) total += n;
      if (total != c.grid.n_bins)
        bad("rebin.interval_sizes", "intervals cover " + std::to_string(total) + " channels, the grid has " +
                                        std::to_string(c.grid.n_bins));
    }
  }

  // pairs, model, train
  {
    const json& p = member(j, "pairs", "");
    c.split_ratio = number(p, "split_ratio", "pairs");
    if (!(c.split_ratio > 0 && c.split_ratio < 1)) bad("pairs.split_ratio", "must lie in (0, 1)");
    c.ssim_threshold = number(p, "ssim_threshold", "pairs");
    if (c.ssim_threshold < 0 || c.ssim_threshold > 1) bad("pairs.ssim_threshold", "must lie in [0, 1]");
    c.ssim_prefilter_sigma = nonnegative(p, "ssim_prefilter_sigma", "pairs");

    const json& m = member(j, "model", "");
    c.model.base_width = static_cast<int>(count(m, "base_width", "model", 1));
    c.model.depth = static_cast<int>(count(m, "depth", "model", 1));
    if (c.model.depth > 6) bad("model.depth", "must be <= 6");
    c.model.in_channels = c.mode == Mode::spectral ? 2 : 1;
    c.model.seed = derive_seed(c.seed, "model");

    const std::string T = "train";
    const json& t = member(j, "train", "");
    c.train.learning_rate = positive(t, "learning_rate", T);
    c.train.epochs = static_cast<int>(count(t, "epochs", T, 1));
    c.train.batch_size = static_cast<int>(count(t, "batch_size", T, 1));
    c.train.steps_per_epoch = count(t, "steps_per_epoch", T);
    c.train.max_val_pairs = count(t, "max_val_pairs", T);
    c.train.loss = text(t, "loss", T);
    if (c.train.loss != "l1") bad("train.loss", "only 'l1' is supported");
    c.train.seed = derive_seed(c.seed, "train");
    const std::string A = "train.augment";
    const json& au = member(t, "augment", T);
    auto& ag = c.train.augment;
    ag.crop = count(au, "crop", A);
    ag.flips = boolean(au, "flips", A);
    ag.rot90 = boolean(au, "rot90", A);
    ag.max_shift = integer(au, "max_shift", A);
    if (ag.max_shift < 0) bad("train.augment.max_shift", "must be >= 0");
    ag.max_rotation_deg = nonnegative(au, "max_rotation_deg", A);
    ag.scale_jitter = nonnegative(au, "scale_jitter", A);
    if (ag.scale_jitter >= 1) bad("train.augment.scale_jitter", "must be < 1");
    ag.max_shear = nonnegative(au, "max_shear", A);
    ag.blur_sigma_max = nonnegative(au, "blur_sigma_max", A);
    ag.blur_probability = nonnegative(au, "blur_probability", A);
    if (ag.blur_probability > 1) bad("train.augment.blur_probability", "must be <= 1");

    c.denoise_enabled = boolean(member(j, "denoise", ""), "enabled", "denoise");
  }

  {
    const json& d = member(j, "decompose", "");
    c.decompose.tolerance = positive(d, "tolerance", "decompose");
    c.decompose.max_iter = static_cast<int>(count(d, "max_iter", "decompose", 1));
    const json& e = member(j, "evaluate", "");
    c.binning_factors = count_list(e, "binning_factors", "evaluate", 1);
    c.kedge_min_voxels = count(e, "kedge_min_voxels", "evaluate", 1);
    c.kedge_flux_fraction = number(e, "kedge_flux_fraction", "evaluate");
    if (c.kedge_flux_fraction < 0 || c.kedge_flux_fraction > 1) bad("evaluate.kedge_flux_fraction", "must lie in [0, 1]");
  }

  // temporal
  {
    const json& t = member(j, "temporal", "");
    auto& ts = c.temporal;
    const std::string S = "temporal.scene";
    const json& sc = member(t, "scene", "temporal");
    const json& shape = array(sc, "shape", S);
    if (shape.size() != 2) bad("temporal.scene.shape", "expected [y, x]");
    for (std::size_t i = 0; i < 2; ++i) {
      if (!shape[i].is_number_integer() || shape[i].get<long>() < 16)
        bad("temporal.scene.shape." + std::to_string(i), "expected an integer >= 16, got " + shape[i].dump());
      ts.shape[i] = shape[i].get<std::size_t>();
    }
    ts.n_series = count(sc, "n_series", S, 2);
    ts.n_frames = count(sc, "n_frames", S, 3);
    ts.hold_frames = count(sc, "hold_frames", S);
    if (ts.hold_frames < 2 || ts.hold_frames > ts.n_frames)
      bad("temporal.scene.hold_frames", "must lie in [2, n_frames]");
    ts.speed_px_per_frame = nonnegative(sc, "speed_px_per_frame", S);
    ts.max_rotation_deg_per_frame = nonnegative(sc, "max_rotation_deg_per_frame", S);
    const json& parts = array(sc, "parts", S);
    if (parts.empty()) bad("temporal.scene.parts", "at least one part is required");
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const std::string F = "temporal.scene.parts." + std::to_string(i);
      only_keys(parts[i], {"dx", "dy", "semi_a", "semi_b", "angle_deg", "value"}, F);
      TemporalObjectPart p;
      p.dx = number(parts[i], "dx", F);
      p.dy = number(parts[i], "dy", F);
      p.semi_a = positive(parts[i], "semi_a", F);
      p.semi_b = positive(parts[i], "semi_b", F);
      p.angle_deg = number(parts[i], "angle_deg", F);
      p.value = number(parts[i], "value", F);
      ts.parts.push_back(p);
    }
    ts.mu_per_unit = nonnegative(sc, "mu_per_unit", S);
    ts.photons_per_pixel = positive(sc, "photons_per_pixel", S);
    const std::string H = "temporal.phase";
    const json& ph = member(t, "phase", "temporal");
    ts.phase.alpha = nonnegative(ph, "alpha_mm2", H);
    ts.phase.pixel_size_mm = positive(ph, "pixel_size_mm", H);
    ts.phase.symmetric_padding = boolean(ph, "symmetric_padding", H);
    ts.phase.clamp = choice(ph, "clamp", H, [](const std::string& s) { return parse_clamp_policy(s); });
    ts.phase.clamp_floor = positive(ph, "clamp_floor", H);
    ts.ordering = choice(t, "ordering", "temporal", parse_ordering);
    const json& en = member(t, "ensemble", "temporal");
    ts.ensemble_draws = static_cast<int>(count(en, "draws", "temporal.ensemble"));
    if (ts.ensemble_draws > 1 && ts.ensemble_draws % 2 == 0) bad("temporal.ensemble.draws", "must be odd");
    ts.ensemble_sigma = nonnegative(en, "sigma", "temporal.ensemble");
  }
  return c;
}

}  // namespace mcd::experiment
