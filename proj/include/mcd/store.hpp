#pragma once

// Array containers: a raw little-endian C-order data file plus a JSON sidecar.
//
//   <stem>.raw   element bytes, little-endian, C order
//   <stem>.json  {"format": "mcd-array", "version": 1, "dtype": "float32",
//                 "shape": [...], "axes": [...], "units": "...",
//                 "channel_keV": [...]?, "frame_rate_hz": x?,
//                 "content_hash": "<fnv1a64 of .raw>",
//                 "provenance": {"seed": n, "config_hash": "...", "stage": "...",
//                                "inputs": {"name": "<content_hash>", ...}}}
//
// Writes go to temporary files that are renamed into place, so a reader never
// observes a partially written container.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcd/ndarray.hpp"

namespace mcd::store {

enum class ScalarType { float32, uint16, uint32 };

std::string to_string(ScalarType t);
ScalarType parse_scalar_type(const std::string& name);
std::size_t scalar_size(ScalarType t);

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string stage;
  std::map<std::string, std::string> inputs;  // input name -> content hash

  bool operator==(const Provenance&) const = default;
};

struct Metadata {
  std::vector<std::string> axes;
  std::string units;
  std::vector<double> channel_keV;       // empty when the array has no energy axis
  std::optional<double> frame_rate_hz;
  Provenance provenance;

  bool operator==(const Metadata&) const = default;
};

// Axis names allowed in a sidecar.
bool is_known_axis(const std::string& name);

struct ArrayContainer {
  ScalarType type = ScalarType::float32;
  Shape shape;
  std::vector<std::uint8_t> bytes;  // little-endian element bytes
  Metadata meta;

  std::string content_hash() const;
  bool operator==(const ArrayContainer&) const = default;
};

ArrayContainer from_array(const NdArray<double>& a, Metadata meta);  // stored as float32
ArrayContainer from_array(const NdArray<float>& a, Metadata meta);
ArrayContainer from_array(const NdArray<std::uint16_t>& a, Metadata meta);
ArrayContainer from_array(const NdArray<std::uint32_t>& a, Metadata meta);

// Conversions back; integer containers convert to double exactly.
NdArray<double> to_double(const ArrayContainer& c);
NdArray<std::uint16_t> to_uint16(const ArrayContainer& c);

// `path` is the stem; ".raw" and ".json" are appended.
void write(const ArrayContainer& c, const std::filesystem::path& stem);
ArrayContainer read(const std::filesystem::path& stem);
bool exists(const std::filesystem::path& stem);

// Atomic text write (temp file + rename).
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::string hash_hex(std::uint64_t h);

}  // namespace mcd::store
