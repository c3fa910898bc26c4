#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "mcd/error.hpp"
#include "mcd/ndarray.hpp"
#include "mcd/random.hpp"
#include "mcd/store.hpp"

namespace fs = std::filesystem;
using namespace mcd;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / "mcd_store_tests" / name;
  fs::create_directories(p.parent_path());
  return p;
}

store::Metadata meta3() {
  store::Metadata m;
  m.axes = {"z", "y", "x"};
  m.units = "1/mm";
  m.provenance.seed = 11;
  m.provenance.stage = "unit";
  return m;
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("ndarray indexing is row-major") {
    NdArray<int> a({2, 3, 4});
    a(1, 2, 3) = 7;
    CHECK(a[1 * 12 + 2 * 4 + 3] == 7);
    CHECK(a.strides() == std::vector<std::size_t>{12, 4, 1});
    CHECK_THROWS_AS(NdArray<int>({2, 2}, std::vector<int>{1, 2, 3}), DataError);
  }

  TEST_CASE("stream seeds are order independent and distinct") {
    CHECK(stream_seed(5, 3) == stream_seed(5, 3));
    CHECK(stream_seed(5, 3) != stream_seed(5, 4));
    CHECK(stream_seed(5, 3) != stream_seed(6, 3));
    CHECK(derive_seed(1, "noise") != derive_seed(1, "split"));
  }

  TEST_CASE("float32 round trip of a random (3,4,5) array is bit-identical") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(-5.0f, 5.0f);
    NdArray<float> a({3, 4, 5});
    for (auto& v : a.storage()) v = u(rng);
    const auto stem = scratch("f32");
    store::write(store::from_array(a, meta3()), stem);
    const auto c = store::read(stem);
    CHECK(c.shape == Shape{3, 4, 5});
    CHECK(c.type == store::ScalarType::float32);
    CHECK(c.meta == meta3());
    const auto b = store::to_double(c);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(static_cast<float>(b[i]) == a[i]);
    CHECK(store::from_array(a, meta3()) == c);
  }

  TEST_CASE("integer round trips") {
    NdArray<std::uint16_t> a({3, 4, 5});
    NdArray<std::uint32_t> b({3, 4, 5});
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = static_cast<std::uint16_t>(65535 - 977 * i);
      b[i] = static_cast<std::uint32_t>(4000000000u - 123457u * i);
    }
    store::write(store::from_array(a, meta3()), scratch("u16"));
    store::write(store::from_array(b, meta3()), scratch("u32"));
    CHECK(store::to_uint16(store::read(scratch("u16"))) == a);
    const auto rb = store::read(scratch("u32"));
    CHECK(rb.type == store::ScalarType::uint32);
    CHECK(rb == store::from_array(b, meta3()));
  }

  TEST_CASE("truncated data file names expected and actual bytes") {
    NdArray<float> a({3, 4, 5}, 1.0f);
    const auto stem = scratch("trunc");
    store::write(store::from_array(a, meta3()), stem);
    fs::resize_file(fs::path(stem.string() + ".raw"), 100);
    try {
      store::read(stem);
      FAIL("expected an IoError");
    } catch (const IoError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("240") != std::string::npos);
      CHECK(msg.find("100") != std::string::npos);
    }
  }

  TEST_CASE("sidecar axis count must match rank") {
    NdArray<float> a({3, 4, 5}, 1.0f);
    const auto stem = scratch("axes");
    store::write(store::from_array(a, meta3()), stem);
    const fs::path side = stem.string() + ".json";
    auto j = nlohmann::json::parse(store::read_text(side));
    j["axes"] = {"y", "x"};
    store::write_text_atomic(side, j.dump());
    CHECK_THROWS_AS(store::read(stem), IoError);
  }

  TEST_CASE("missing files are reported") {
    CHECK_THROWS_AS(store::read(scratch("does_not_exist")), IoError);
    CHECK_FALSE(store::exists(scratch("does_not_exist")));
  }

  TEST_CASE("content hash tracks bytes") {
    NdArray<float> a({4}, 1.0f);
    auto c1 = store::from_array(a, meta3());
    a[2] = 2.0f;
    auto c2 = store::from_array(a, meta3());
    CHECK(c1.content_hash() != c2.content_hash());
  }
}
