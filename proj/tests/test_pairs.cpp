#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mcd/error.hpp"
#include "mcd/imaging.hpp"
#include "mcd/metrics.hpp"
#include "mcd/pairs.hpp"

using namespace mcd;

namespace {

std::shared_ptr<const Array> ramp_stack(std::size_t S, std::size_t J, std::size_t h, std::size_t w) {
  auto a = std::make_shared<Array>(Shape{S, J, h, w});
  for (std::size_t i = 0; i < a->size(); ++i) (*a)[i] = static_cast<double>(i % 9973);
  return a;
}

Image texture(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Image t = make_image(n, n);
  for (auto& v : t.storage()) v = u(rng);
  return imaging::gaussian_blur(t, 1.5);
}

}  // namespace

TEST_SUITE("pairs") {
  TEST_CASE("spectral training pairs") {
    const auto p3 = spectral_train_pairs(ramp_stack(4, 3, 2, 2));
    REQUIRE(p3.size() == 4);
    for (const auto& m : p3.items()) {
      CHECK(m.input_channels == std::vector<std::size_t>{0, 2});
      CHECK(m.target_channel == 1);
    }
    const auto p135 = spectral_train_pairs(ramp_stack(2, 135, 1, 1));
    CHECK(p135.size() == 2 * 133);
    CHECK(count_leakage(p135) == 0);
    for (const auto& m : p135.items())
      CHECK(std::find(m.input_channels.begin(), m.input_channels.end(), m.target_channel) == m.input_channels.end());
    CHECK_THROWS_AS(spectral_train_pairs(ramp_stack(1, 2, 1, 1)), ConfigError);
  }

  TEST_CASE("spectral inference pairs sit on the half grid") {
    const auto p2 = spectral_infer_pairs(ramp_stack(1, 2, 1, 1));
    REQUIRE(p2.size() == 1);
    CHECK(p2.meta(0).nominal_index == 0.5);
    const auto p = spectral_infer_pairs(ramp_stack(1, 135, 1, 1));
    REQUIRE(p.size() == 134);
    CHECK(p.meta(0).nominal_index == 0.5);
    CHECK(p.meta(133).nominal_index == 133.5);
    for (std::size_t k = 1; k < p.size(); ++k) CHECK(p.meta(k).nominal_index - p.meta(k - 1).nominal_index == 1.0);
  }

  TEST_CASE("temporal pairs and SSIM filtering") {
    const std::size_t T = 8, n = 32;
    const Image base = texture(n, 1);
    auto series = std::make_shared<Array>(Shape{1, T, n, n});
    for (std::size_t t = 0; t < T; ++t) set_plane(*series, {0, t}, base);
    SUBCASE("static series keeps every pair") {
      CHECK(temporal_pairs(series, 0.5, 1.0).size() == T - 1);
    }
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0, 0.05);
    for (auto& v : series->storage()) v += nd(rng);
    SUBCASE("threshold 1 discards noisy pairs") { CHECK(temporal_pairs(series, 1.0, 1.0).empty()); }
    SUBCASE("a teleporting frame removes exactly the two pairs touching it") {
      set_plane(*series, {0, 4}, texture(n, 99));
      std::vector<double> s;
      for (std::size_t t = 1; t < T; ++t) s.push_back(metrics::ssim(plane(*series, {0, t - 1}), plane(*series, {0, t}), 1.0));
      std::vector<double> sorted = s;
      std::sort(sorted.begin(), sorted.end());
      const double thr = 0.5 * (sorted[1] + sorted[2]);  // gap between the two clusters
      const auto p = temporal_pairs(series, thr, 1.0);
      REQUIRE(p.size() == T - 3);
      for (const auto& m : p.items()) {
        CHECK(m.target_channel != 4);
        CHECK(m.input_channels[0] != 4);
      }
    }
  }

  TEST_CASE("split") {
    std::vector<std::size_t> idx(120);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto [tr, va] = split(idx, {0.8, 5});
    CHECK(tr.size() == 96);
    CHECK(va.size() == 24);
    const auto [tr2, va2] = split(idx, {0.8, 5});
    CHECK(tr == tr2);
    CHECK(va == va2);
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t n = 2 + rng() % 200;
      std::vector<std::size_t> ids(n);
      std::iota(ids.begin(), ids.end(), std::size_t{1000});
      const auto [a, b] = split(ids, {0.3 + 0.5 * static_cast<double>(rep % 5) / 5.0, rng()});
      std::set<std::size_t> all(a.begin(), a.end());
      for (auto v : b) CHECK(all.insert(v).second);  // disjoint
      CHECK(all.size() == n);                         // covering
    }
  }

  TEST_CASE("augmentation") {
    PairSample s;
    s.inputs = {texture(64, 1), texture(64, 2)};
    s.target = texture(64, 3);
    SUBCASE("disabled config is the identity") {
      const auto r = augment(s, AugmentConfig{}, 4);
      CHECK(r.inputs[0] == s.inputs[0]);
      CHECK(r.inputs[1] == s.inputs[1]);
      CHECK(r.target == s.target);
    }
    SUBCASE("crops share one offset") {
      // Make every image the same so the crop offset can be located by search.
      Image idx = make_image(64, 64);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<double>(i);
      PairSample t{{idx, idx}, idx, {}};
      AugmentConfig c;
      c.crop = 32;
      const auto r = augment(t, c, 11);
      CHECK(r.target.shape() == Shape{32, 32});
      CHECK(r.inputs[0] == r.target);
      CHECK(r.inputs[1] == r.target);
    }
    SUBCASE("rotating by 180 degrees twice is the identity") {
      const auto once = imaging::rot90(s.target, 2);
      CHECK(imaging::rot90(once, 2) == s.target);
      const auto twice = imaging::affine(imaging::affine(s.target, 180.0, 1.0, 0.0), 180.0, 1.0, 0.0);
      for (std::size_t i = 0; i < twice.size(); ++i) CHECK(twice[i] == doctest::Approx(s.target[i]).epsilon(1e-9));
    }
    SUBCASE("transform commutes with pair construction") {
      AugmentConfig c;
      c.crop = 40;
      c.flips = c.rot90 = true;
      c.max_shift = 3;
      const auto r = augment(s, c, 21);
      // Augmenting a sample whose inputs equal its target yields identical outputs.
      PairSample same{{s.target, s.target}, s.target, {}};
      const auto q = augment(same, c, 21);
      CHECK(q.inputs[0] == q.target);
      CHECK(q.target == r.target);
    }
    SUBCASE("oversized crop is rejected") {
      AugmentConfig c;
      c.crop = 65;
      CHECK_THROWS_AS(augment(s, c, 1), ConfigError);
    }
  }

  TEST_CASE("full-epoch leakage scan") {
    auto stack = ramp_stack(12, 46, 4, 4);
    const auto pairs = spectral_train_pairs(stack);
    std::size_t violations = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto s = pairs.sample(k);
      const auto& m = s.meta;
      for (auto c : m.input_channels) violations += c == m.target_channel;
      // the materialised target is the stack plane of the target channel
      violations += !(s.target == plane(*stack, {m.series, m.target_channel}));
    }
    CHECK(violations == 0);
  }
}
