#include <doctest.h>

#include <cmath>
#include <random>

#include "mcd/baseline.hpp"
#include "mcd/error.hpp"

using namespace mcd;

TEST_SUITE("baseline") {
  TEST_CASE("gaussian with vanishing sigma is the identity") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    Image a = make_image(9, 11);
    for (auto& v : a.storage()) v = u(rng);
    BaselineParams p;
    p.sigma = 1e-3;
    const auto out = baseline(BaselineMethod::gaussian, a, p);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(out[i] - a[i]) <= 1e-6);
  }

  TEST_CASE("median removes a salt pixel exactly") {
    Image a = make_image(5, 5, 0.25);
    a(2, 2) = 1.0;
    const auto out = baseline(BaselineMethod::median, a);
    for (double v : out.storage()) CHECK(v == 0.25);
    BaselineParams p;
    p.kernel_size = 4;
    CHECK_THROWS_AS(baseline(BaselineMethod::median, a, p), ConfigError);
  }

  TEST_CASE("tv keeps the step and flattens plateaus") {
    const std::size_t n = 32;
    Image clean = make_image(n, n), noisy = make_image(n, n);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0, 0.1);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        clean(y, x) = x < 16 ? 0.2 : 1.0;
        noisy(y, x) = clean(y, x) + nd(rng);
      }
    BaselineParams p;
    p.tv_weight = 0.15;
    const auto out = baseline(BaselineMethod::tv, noisy, p);
    auto plateau_var = [&](const Image& img) {
      double m = 0, s = 0, c = 0;
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 2; x < 13; ++x) m += img(y, x), ++c;
      m /= c;
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 2; x < 13; ++x) s += (img(y, x) - m) * (img(y, x) - m);
      return s / c;
    };
    CHECK(plateau_var(noisy) >= 4.0 * plateau_var(out));
    // the largest horizontal jump of the row mean stays between columns 15 and 16
    std::size_t edge = 0;
    double best = 0;
    for (std::size_t x = 1; x < n; ++x) {
      double d = 0;
      for (std::size_t y = 0; y < n; ++y) d += out(y, x) - out(y, x - 1);
      if (d > best) best = d, edge = x;
    }
    CHECK(edge == 16);
    p.tv_weight = 0;
    CHECK_THROWS_AS(baseline(BaselineMethod::tv, noisy, p), ConfigError);
  }

  TEST_CASE("nlm smooths noise on a flat image") {
    Image a = make_image(16, 16, 0.5);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0, 0.05);
    for (auto& v : a.storage()) v += nd(rng);
    BaselineParams p;
    p.h = 0.1;
    p.search_radius = 3;
    const auto out = baseline(BaselineMethod::nlm, a, p);
    double s_in = 0, s_out = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s_in += (a[i] - 0.5) * (a[i] - 0.5), s_out += (out[i] - 0.5) * (out[i] - 0.5);
    CHECK(s_out < 0.5 * s_in);
    CHECK_THROWS_AS(parse_baseline_method("bilateral"), ConfigError);
  }
}
