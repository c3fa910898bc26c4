#include <doctest.h>

#include <cmath>
#include <random>

#include "mcd/error.hpp"
#include "mcd/nn.hpp"

using namespace mcd;
using namespace mcd::nn;

namespace {

Tensor random_tensor(int c, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0, 1);
  Tensor t(c, h, w);
  for (auto& v : t.v) v = nd(rng);
  return t;
}

// Loss L = sum(r * y) for a fixed random r, so dL/dy = r.
double probe_loss(const UNet& net, std::span<const float> p, const Tensor& x, const Tensor& r) {
  Tensor y;
  net.forward(p, x, y, nullptr);
  double s = 0;
  for (std::size_t i = 0; i < y.v.size(); ++i) s += static_cast<double>(r.v[i]) * y.v[i];
  return s;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("untrained network returns the input channel mean") {
    const UNet net(2, 4, 3);
    const auto p = net.initial_parameters(1);
    const Tensor x = random_tensor(2, 16, 12, 3);
    Tensor y;
    net.forward(p, x, y, nullptr);
    REQUIRE(y.c == 1);
    CHECK(y.h == 16);
    CHECK(y.w == 12);
    for (std::size_t i = 0; i < y.v.size(); ++i) CHECK(y.v[i] == doctest::Approx(0.5f * (x.v[i] + x.v[i + y.v.size()])));
    Tensor bad(2, 10, 12);
    CHECK_THROWS_AS(net.forward(p, bad, y, nullptr), InvariantError);
    CHECK_THROWS_AS(net.forward(p, Tensor(1, 16, 12), y, nullptr), ConfigError);
  }

  TEST_CASE("conv gradient matches finite differences") {
    Conv2d c{2, 3, 3, 0};
    std::vector<float> p(c.count());
    std::mt19937_64 rng(4);
    std::normal_distribution<float> nd(0, 0.5f);
    for (auto& v : p) v = nd(rng);
    Tensor x = random_tensor(2, 5, 6, 5), r = random_tensor(3, 5, 6, 6);
    std::vector<float> col, grads(p.size(), 0.0f);
    Tensor y, gin(2, 5, 6);
    c.forward(p, x, y, col);
    c.backward(p, x, r, &gin, grads, col);
    auto loss = [&](const std::vector<float>& pp, const Tensor& xx) {
      Tensor yy;
      std::vector<float> cc;
      c.forward(pp, xx, yy, cc);
      double s = 0;
      for (std::size_t i = 0; i < yy.v.size(); ++i) s += static_cast<double>(r.v[i]) * yy.v[i];
      return s;
    };
    const float h = 1e-2f;
    for (std::size_t i = 0; i < p.size(); i += 5) {
      auto pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      const double fd = (loss(pp, x) - loss(pm, x)) / (2 * h);
      CHECK(grads[i] == doctest::Approx(fd).epsilon(2e-3).scale(1.0));
    }
    for (std::size_t i = 0; i < x.v.size(); i += 3) {
      Tensor xp = x, xm = x;
      xp.v[i] += h;
      xm.v[i] -= h;
      const double fd = (loss(p, xp) - loss(p, xm)) / (2 * h);
      CHECK(gin.v[i] == doctest::Approx(fd).epsilon(2e-3).scale(1.0));
    }
  }

  TEST_CASE("network gradient matches finite differences") {
    const UNet net(2, 3, 3);
    auto p = net.initial_parameters(7);
    // give the zero head weights so gradients reach the body
    std::mt19937_64 rng(8);
    std::normal_distribution<float> nd(0, 0.5f);
    for (std::size_t i = p.size() - 4; i < p.size(); ++i) p[i] = nd(rng);
    const Tensor x = random_tensor(2, 8, 8, 9), r = random_tensor(1, 8, 8, 10);
    UNet::Cache cache;
    Tensor y;
    net.forward(p, x, y, &cache);
    std::vector<float> grads(p.size(), 0.0f);
    net.backward(p, cache, r, grads);
    // double-precision reference in float arithmetic: use a relative step and
    // compare on parameters whose gradient is not tiny
    const float h = 2e-3f;
    int compared = 0, agree = 0;
    for (std::size_t i = 0; i < p.size(); i += 7) {
      auto pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      const double fd = (probe_loss(net, pp, x, r) - probe_loss(net, pm, x, r)) / (2 * h);
      if (std::abs(fd) < 1e-2) continue;
      ++compared;
      // ReLU kinks make a few central differences unreliable
      if (std::abs(grads[i] - fd) <= 0.02 * std::abs(fd) + 1e-3) ++agree;
    }
    CHECK(compared > 30);
    CHECK(agree >= compared * 95 / 100);
  }

  TEST_CASE("depth one network") {
    const UNet net(1, 4, 1);
    CHECK(net.size_multiple() == 1);
    auto p = net.initial_parameters(1);
    const Tensor x = random_tensor(1, 5, 7, 2);
    Tensor y;
    UNet::Cache cache;
    net.forward(p, x, y, &cache);
    for (std::size_t i = 0; i < y.v.size(); ++i) CHECK(y.v[i] == x.v[i]);
    std::vector<float> g(p.size(), 0.0f);
    net.backward(p, cache, random_tensor(1, 5, 7, 3), g);
    // with a zero head only the head itself receives gradient
    double head = 0;
    for (std::size_t i = p.size() - 5; i < p.size(); ++i) head += std::abs(g[i]);
    CHECK(head > 0);
  }

  TEST_CASE("adam minimises a quadratic") {
    std::vector<float> x{3.0f, -2.0f};
    Adam opt(2, 0.05);
    for (int i = 0; i < 2000; ++i) {
      const std::vector<float> g{2 * (x[0] - 1.0f), 2 * (x[1] + 0.5f)};
      opt.step(x, g);
    }
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(x[1] == doctest::Approx(-0.5).epsilon(1e-2));
    CHECK(opt.steps() == 2000);
    CHECK_THROWS_AS(Adam(2, 0.0), ConfigError);
  }
}
