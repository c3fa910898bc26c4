#include "mcd/store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "mcd/random.hpp"

namespace mcd::store {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

std::string to_string(ScalarType t) {
  switch (t) {
    case ScalarType::float32: return "float32";
    case ScalarType::uint16: return "uint16";
    case ScalarType::uint32: return "uint32";
  }
  return "?";
}

ScalarType parse_scalar_type(const std::string& name) {
  if (name == "float32") return ScalarType::float32;
  if (name == "uint16") return ScalarType::uint16;
  if (name == "uint32") return ScalarType::uint32;
  throw IoError("unknown scalar type '" + name + "'");
}

std::size_t scalar_size(ScalarType t) {
  return t == ScalarType::uint16 ? 2 : 4;
}

bool is_known_axis(const std::string& name) {
  static const char* known[] = {"angle", "channel", "z", "y", "x", "u", "v", "t", "material", "series"};
  for (auto* k : known)
    if (name == k) return true;
  return false;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string ArrayContainer::content_hash() const {
  return hash_hex(fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
}

namespace {

template <class Src, class Dst>
ArrayContainer pack(const NdArray<Src>& a, ScalarType type, Metadata meta) {
  ArrayContainer c;
  c.type = type;
  c.shape = a.shape();
  c.meta = std::move(meta);
  c.bytes.resize(a.size() * sizeof(Dst));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Dst v = static_cast<Dst>(a[i]);
    std::memcpy(c.bytes.data() + i * sizeof(Dst), &v, sizeof(Dst));
  }
  return c;
}

template <class Dst>
NdArray<Dst> unpack(const ArrayContainer& c) {
  NdArray<Dst> out(c.shape);
  auto load = [&](auto tag) {
    using S = decltype(tag);
    for (std::size_t i = 0; i < out.size(); ++i) {
      S v;
      std::memcpy(&v, c.bytes.data() + i * sizeof(S), sizeof(S));
      out[i] = static_cast<Dst>(v);
    }
  };
  switch (c.type) {
    case ScalarType::float32: load(float{}); break;
    case ScalarType::uint16: load(std::uint16_t{}); break;
    case ScalarType::uint32: load(std::uint32_t{}); break;
  }
  return out;
}

void validate(const ArrayContainer& c, const std::string& where) {
  if (c.meta.axes.size() != c.shape.size())
    throw IoError(where + ": sidecar lists " + std::to_string(c.meta.axes.size()) +
                  " axis names for a rank-" + std::to_string(c.shape.size()) + " shape");
  for (const auto& a : c.meta.axes)
    if (!is_known_axis(a)) throw IoError(where + ": unknown axis name '" + a + "'");
  const std::size_t expected = shape_product(c.shape) * scalar_size(c.type);
  if (c.bytes.size() != expected)
    throw IoError(where + ": data length mismatch, expected " + std::to_string(expected) +
                  " bytes, found " + std::to_string(c.bytes.size()));
}

fs::path with_suffix(const fs::path& stem, const char* suffix) {
  return fs::path(stem.string() + suffix);
}

void write_bytes_atomic(const fs::path& path, const char* data, std::size_t n) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + tmp.string() + "' for writing");
    os.write(data, static_cast<std::streamsize>(n));
    if (!os) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

}  // namespace

ArrayContainer from_array(const NdArray<double>& a, Metadata meta) {
  return pack<double, float>(a, ScalarType::float32, std::move(meta));
}
ArrayContainer from_array(const NdArray<float>& a, Metadata meta) {
  return pack<float, float>(a, ScalarType::float32, std::move(meta));
}
ArrayContainer from_array(const NdArray<std::uint16_t>& a, Metadata meta) {
  return pack<std::uint16_t, std::uint16_t>(a, ScalarType::uint16, std::move(meta));
}
ArrayContainer from_array(const NdArray<std::uint32_t>& a, Metadata meta) {
  return pack<std::uint32_t, std::uint32_t>(a, ScalarType::uint32, std::move(meta));
}

NdArray<double> to_double(const ArrayContainer& c) { return unpack<double>(c); }

NdArray<std::uint16_t> to_uint16(const ArrayContainer& c) {
  if (c.type != ScalarType::uint16) throw IoError("container holds " + to_string(c.type) + ", expected uint16");
  return unpack<std::uint16_t>(c);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_bytes_atomic(path, text.data(), text.size());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write(const ArrayContainer& c, const fs::path& stem) {
  validate(c, stem.string());
  json side;
  side["format"] = "mcd-array";
  side["version"] = 1;
  side["dtype"] = to_string(c.type);
  side["shape"] = c.shape;
  side["axes"] = c.meta.axes;
  side["units"] = c.meta.units;
  if (!c.meta.channel_keV.empty()) side["channel_keV"] = c.meta.channel_keV;
  if (c.meta.frame_rate_hz) side["frame_rate_hz"] = *c.meta.frame_rate_hz;
  side["content_hash"] = c.content_hash();
  side["provenance"] = {{"seed", c.meta.provenance.seed},
                        {"config_hash", c.meta.provenance.config_hash},
                        {"stage", c.meta.provenance.stage},
                        {"inputs", c.meta.provenance.inputs}};
  // Data first: a sidecar only appears once its data file is complete.
  write_bytes_atomic(with_suffix(stem, ".raw"), reinterpret_cast<const char*>(c.bytes.data()), c.bytes.size());
  write_text_atomic(with_suffix(stem, ".json"), side.dump(2) + "\n");
}

bool exists(const fs::path& stem) {
  return fs::exists(with_suffix(stem, ".json")) && fs::exists(with_suffix(stem, ".raw"));
}

ArrayContainer read(const fs::path& stem) {
  const fs::path side_path = with_suffix(stem, ".json");
  const fs::path raw_path = with_suffix(stem, ".raw");
  if (!fs::exists(side_path)) throw IoError("missing sidecar '" + side_path.string() + "'");
  if (!fs::exists(raw_path)) throw IoError("missing data file '" + raw_path.string() + "'");
  json side;
  try {
    side = json::parse(read_text(side_path));
  } catch (const json::exception& e) {
    throw IoError("malformed sidecar '" + side_path.string() + "': " + e.what());
  }
  ArrayContainer c;
  try {
    if (side.value("format", "") != "mcd-array") throw IoError("'" + side_path.string() + "' is not an mcd-array sidecar");
    if (side.value("version", 0) != 1)
      throw IoError("unsupported container version in '" + side_path.string() + "'");
    c.type = parse_scalar_type(side.at("dtype").get<std::string>());
    c.shape = side.at("shape").get<Shape>();
    c.meta.axes = side.at("axes").get<std::vector<std::string>>();
    c.meta.units = side.value("units", "");
    if (side.contains("channel_keV")) c.meta.channel_keV = side["channel_keV"].get<std::vector<double>>();
    if (side.contains("frame_rate_hz")) c.meta.frame_rate_hz = side["frame_rate_hz"].get<double>();
    const auto& p = side.at("provenance");
    c.meta.provenance.seed = p.value("seed", std::uint64_t{0});
    c.meta.provenance.config_hash = p.value("config_hash", "");
    c.meta.provenance.stage = p.value("stage", "");
    if (p.contains("inputs")) c.meta.provenance.inputs = p["inputs"].get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw IoError("invalid sidecar '" + side_path.string() + "': " + e.what());
  }
  const auto actual = fs::file_size(raw_path);
  const std::size_t expected = shape_product(c.shape) * scalar_size(c.type);
  if (actual != expected)
    throw IoError("'" + raw_path.string() + "': data length mismatch, expected " + std::to_string(expected) +
                  " bytes, found " + std::to_string(actual));
  c.bytes.resize(actual);
  std::ifstream is(raw_path, std::ios::binary);
  is.read(reinterpret_cast<char*>(c.bytes.data()), static_cast<std::streamsize>(actual));
  if (!is) throw IoError("short read from '" + raw_path.string() + "'");
  validate(c, stem.string());
  return c;
}

}  // namespace mcd::store
