#include <cmath>

#include "experiment_detail.hpp"
#include "mcd/error.hpp"
#include "mcd/random.hpp"
#include "mcd/store.hpp"

namespace mcd::experiment::detail {

using nlohmann::json;
namespace fs = std::filesystem;

StageContext::StageContext(const Experiment& e, Stage s, std::string key) : exp(e), cfg(e.config()), stage(s) {
  manifest.stage = to_string(s);
  manifest.config_hash = e.hash();
  manifest.stage_key = std::move(key);
  manifest.seed = e.config().seed;
}

fs::path StageContext::dir_of(Stage s) const { return exp.workdir() / to_string(s); }

void StageContext::record_input(const std::string& key, const std::string& hash) {
  const auto it = manifest.inputs.find(key);
  if (it != manifest.inputs.end() && it->second != hash)
    throw InvariantError("input '" + key + "' changed while stage '" + manifest.stage + "' was running");
  manifest.inputs[key] = hash;
}

bool StageContext::has(Stage from, const std::string& name) const {
  return store::exists(dir_of(from) / name) || fs::exists(dir_of(from) / name);
}

store::ArrayContainer StageContext::read(Stage from, const std::string& name) {
  const fs::path stem = dir_of(from) / name;
  if (!store::exists(stem))
    throw MissingDependencyError(to_string(from), "missing output '" + name + "' of stage '" + to_string(from) +
                                                      "' in " + exp.workdir().string() + "; rerun '" +
                                                      to_string(from) + "'");
  auto c = store::read(stem);
  record_input(to_string(from) + "/" + name, c.content_hash());
  return c;
}

Array StageContext::read_array(Stage from, const std::string& name) { return store::to_double(read(from, name)); }

NdArray<std::uint16_t> StageContext::read_labels(Stage from, const std::string& name) {
  return store::to_uint16(read(from, name));
}

fs::path StageContext::read_file(Stage from, const std::string& name) {
  const fs::path p = dir_of(from) / name;
  if (!fs::exists(p))
    throw MissingDependencyError(to_string(from), "missing output '" + name + "' of stage '" + to_string(from) +
                                                      "'; rerun '" + to_string(from) + "'");
  record_input(to_string(from) + "/" + name, file_hash(p));
  return p;
}

json StageContext::read_json(Stage from, const std::string& name) {
  const fs::path p = read_file(from, name);
  try {
    return json::parse(store::read_text(p));
  } catch (const json::exception& e) {
    throw DataError("malformed " + p.string() + ": " + e.what());
  }
}

store::Metadata StageContext::meta(std::vector<std::string> axes, std::string units,
                                   std::vector<double> channel_keV) const {
  store::Metadata m;
  m.axes = std::move(axes);
  m.units = std::move(units);
  m.channel_keV = std::move(channel_keV);
  m.provenance.seed = cfg.seed;
  m.provenance.config_hash = exp.hash();
  m.provenance.stage = manifest.stage;
  m.provenance.inputs = manifest.inputs;
  return m;
}

void StageContext::write(const std::string& name, const Array& a, std::vector<std::string> axes, std::string units,
                         std::vector<double> channel_keV) {
  const auto c = store::from_array(a, meta(std::move(axes), std::move(units), std::move(channel_keV)));
  store::write(c, dir() / name);
  manifest.outputs[name] = c.content_hash();
}

void StageContext::write(const std::string& name, const NdArray<std::uint16_t>& a, std::vector<std::string> axes,
                         std::string units) {
  const auto c = store::from_array(a, meta(std::move(axes), std::move(units)));
  store::write(c, dir() / name);
  manifest.outputs[name] = c.content_hash();
}

void StageContext::write_json(const std::string& name, const json& j) {
  store::write_text_atomic(dir() / name, j.dump(2) + "\n");
  record_output_file(name);
}

void StageContext::record_output_file(const std::string& name) { manifest.outputs[name] = file_hash(dir() / name); }

std::string file_hash(const fs::path& path) { return store::hash_hex(fnv1a64(store::read_text(path))); }

json SpectralInfo::to_json() const {
  json mats = json::array();
  for (const auto& m : materials)
    mats.push_back({{"name", m.name}, {"kedge_keV", m.kedge_keV ? json(*m.kedge_keV) : json(nullptr)}, {"mu", m.mu}});
  return {{"channel_keV", channel_keV}, {"flux", flux}, {"flat", flat}, {"materials", mats}};
}

SpectralInfo SpectralInfo::from_json(const json& j) {
  SpectralInfo s;
  try {
    s.channel_keV = j.at("channel_keV").get<std::vector<double>>();
    s.flux = j.at("flux").get<std::vector<double>>();
    s.flat = j.at("flat").get<std::vector<double>>();
    for (const auto& m : j.at("materials")) {
      MaterialSpectrum ms;
      ms.name = m.at("name").get<std::string>();
      if (!m.at("kedge_keV").is_null()) ms.kedge_keV = m.at("kedge_keV").get<double>();
      ms.mu = m.at("mu").get<std::vector<double>>();
      s.materials.push_back(std::move(ms));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed spectra.json: ") + e.what());
  }
  return s;
}

Stage spectral_source_stage(const Config& cfg) { return cfg.rebin_enabled ? Stage::rebin : Stage::simulate; }

Array attenuation(const Array& counts, const std::vector<double>& flat, double floor) {
  require_rank(counts.shape(), 4, "attenuation");
  const std::size_t A = counts.dim(0), C = counts.dim(1), inner = counts.dim(2) * counts.dim(3);
  if (flat.size() != C) throw DataError("attenuation: flat has " + std::to_string(flat.size()) + " channels");
  Array out(counts.shape());
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t c = 0; c < C; ++c) {
      if (!(flat[c] > 0)) throw DataError("attenuation: flat field must be strictly positive");
      const std::size_t off = (a * C + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) out[off + i] = -std::log(std::max(counts[off + i], floor) / flat[c]);
    }
  return out;
}

std::size_t slab_first(const Config& cfg) { return cfg.slab_count ? cfg.slab_first : 0; }
std::size_t slab_count(const Config& cfg) { return cfg.slab_count ? cfg.slab_count : cfg.phantom_shape[0]; }

NdArray<std::uint16_t> slab_labels(const Config& cfg, const NdArray<std::uint16_t>& full) {
  const std::size_t z0 = slab_first(cfg), nz = slab_count(cfg), plane = full.dim(1) * full.dim(2);
  NdArray<std::uint16_t> out({nz, full.dim(1), full.dim(2)});
  std::copy_n(full.data() + z0 * plane, nz * plane, out.data());
  return out;
}

}  // namespace mcd::experiment::detail
