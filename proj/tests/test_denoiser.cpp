#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "mcd/denoiser.hpp"
#include "mcd/error.hpp"
#include "mcd/phase.hpp"

using namespace mcd;

namespace {

// (series, channel, h, w) stack of a constant signal plus iid Gaussian noise.
std::shared_ptr<Array> noisy_constant(std::size_t S, std::size_t J, std::size_t n, double value, double sigma,
                                      std::uint64_t seed) {
  auto a = std::make_shared<Array>(Shape{S, J, n, n}, value);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0, sigma);
  for (auto& v : a->storage()) v += nd(rng);
  return a;
}

TrainConfig quick_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.learning_rate = 1e-3;
  c.seed = 3;
  c.augment = AugmentConfig{.crop = 16, .flips = true, .rot90 = true};
  c.steps_per_epoch = 20;
  return c;
}

double stddev(const Image& a) {
  double m = 0, s = 0;
  for (double v : a.storage()) m += v;
  m /= static_cast<double>(a.size());
  for (double v : a.storage()) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace

TEST_SUITE("denoiser") {
  TEST_CASE("untrained model: zeros in, finite same-shape output") {
    const Model m(ModelConfig{2, 8, 3, 1});
    const std::vector<Image> in{make_image(13, 21), make_image(13, 21)};
    const auto out = m.predict(in);
    CHECK(out.shape() == Shape{13, 21});
    for (double v : out.storage()) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(m.predict(std::vector<Image>{make_image(8, 8)}), ConfigError);
    CHECK_THROWS_AS(m.predict(std::vector<Image>{make_image(8, 8), make_image(8, 9)}), DataError);
  }

  TEST_CASE("training on constant signal with noise") {
    const auto train_stack = noisy_constant(6, 5, 24, 0.5, 0.1, 1);
    const auto val_stack = noisy_constant(3, 5, 24, 0.5, 0.1, 2);
    const auto tr = spectral_train_pairs(train_stack), va = spectral_train_pairs(val_stack);
    const ModelConfig mc{2, 8, 3, 5};

    SUBCASE("zero epochs returns the initial model") {
      const auto r = train(mc, tr, va, quick_config(0));
      CHECK(r.report.train_loss.empty());
      CHECK(r.report.val_loss.empty());
      const Model fresh(mc);
      CHECK(std::equal(fresh.parameters().begin(), fresh.parameters().end(), r.model.parameters().begin()));
    }

    SUBCASE("loss decreases and noise is at least halved") {
      const auto r = train(mc, tr, va, quick_config(5));
      REQUIRE(r.report.val_loss.size() == 5);
      CHECK(r.report.train_loss.size() == 5);
      CHECK(r.report.val_loss.back() < r.report.initial_val_loss);
      CHECK(r.report.val_loss.back() <= r.report.identity_val_loss);
      const auto held = noisy_constant(1, 2, 32, 0.5, 0.1, 77);
      const std::vector<Image> in{plane(*held, {0, 0}), plane(*held, {0, 1})};
      CHECK(stddev(r.model.predict(in)) < 0.05);
    }

    SUBCASE("arity mismatch") {
      CHECK_THROWS_AS(train(ModelConfig{1, 8, 3, 5}, tr, va, quick_config(1)), ConfigError);
      TrainConfig bad = quick_config(1);
      bad.learning_rate = 0;
      CHECK_THROWS_AS(train(mc, tr, va, bad), ConfigError);
    }

    SUBCASE("training is deterministic per seed") {
      const auto a = train(mc, tr, va, quick_config(2));
      const auto b = train(mc, tr, va, quick_config(2));
      CHECK(a.report.val_loss == b.report.val_loss);
      CHECK(std::equal(a.model.parameters().begin(), a.model.parameters().end(), b.model.parameters().begin()));
    }

    SUBCASE("divergent optimisation is reported") {
      TrainConfig c = quick_config(2);
      c.learning_rate = 1e30;
      CHECK_THROWS_AS(train(mc, tr, va, c), TrainingError);
    }
  }

  TEST_CASE("batched predict, half-grid inference and checkpoints") {
    Model m(ModelConfig{2, 4, 2, 9});
    std::mt19937_64 rng(1);
    std::normal_distribution<float> nd(0, 0.1f);
    for (auto& p : m.parameters()) p += nd(rng);
    m.set_normalization({0.3, 2.0});
    const auto stack = noisy_constant(2, 6, 12, 1.0, 0.2, 4);
    std::vector<std::vector<Image>> batch;
    for (std::size_t j = 1; j < 6; ++j) batch.push_back({plane(*stack, {0, j - 1}), plane(*stack, {0, j})});
    const auto outs = m.predict_batch(batch);
    for (std::size_t k = 0; k < batch.size(); ++k) CHECK(outs[k] == m.predict(batch[k]));

    const auto half = predict_half_grid(m, *stack);
    CHECK(half.shape() == Shape{2, 5, 12, 12});
    CHECK(plane(half, {0, 2}) == outs[2]);

    const auto path = std::filesystem::temp_directory_path() / "mcd_denoiser_tests" / "model.bin";
    m.save(path, {{"note", "unit"}});
    const Model back = Model::load(path);
    CHECK(back.normalization().mean == 0.3);
    CHECK(back.normalization().scale == 2.0);
    CHECK(back.predict(batch[1]) == m.predict(batch[1]));
    CHECK(Model::read_header(path)["extra"]["note"] == "unit");
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
    CHECK_THROWS_AS(Model::load(path), IoError);
  }

  TEST_CASE("shift compensation") {
    Array lin({1, 6, 2, 2});
    for (std::size_t c = 0; c < 6; ++c)
      for (std::size_t i = 0; i < 4; ++i) lin[c * 4 + i] = 3.0 * (static_cast<double>(c) + 0.5) - 1.0 + static_cast<double>(i);
    const auto out = shift_compensate(lin);
    REQUIRE(out.shape() == Shape{1, 5, 2, 2});
    for (std::size_t c = 0; c < 5; ++c)
      for (std::size_t i = 0; i < 4; ++i)
        CHECK(out[c * 4 + i] == 3.0 * static_cast<double>(c + 1) - 1.0 + static_cast<double>(i));
    Array two({2}, std::vector<double>{1.0, 3.0});
    CHECK(shift_compensate(two, 0)[0] == 2.0);
    Array constant({3, 4, 5}, 2.5);
    const auto flat = shift_compensate(constant, 1);
    for (double v : flat.storage()) CHECK(v == 2.5);
    CHECK_THROWS_AS(shift_compensate(Array({1, 1, 3, 3}), 1), ConfigError);
    const auto full = to_integer_grid(lin);
    CHECK(full.shape() == Shape{1, 7, 2, 2});
    CHECK(full[0] == lin[0]);
    CHECK(full[6 * 4] == lin[5 * 4]);
  }

  TEST_CASE("median ensemble") {
    Model m(ModelConfig{1, 4, 2, 2});
    std::mt19937_64 rng(3);
    std::normal_distribution<float> nd(0, 0.2f);
    for (auto& p : m.parameters()) p += nd(rng);
    const auto frame = plane(*noisy_constant(1, 1, 16, 0.5, 0.1, 5), {0, 0});
    CHECK(median_ensemble(m, frame, 1, 0.0, 1) == m.predict(std::vector<Image>{frame}));
    CHECK_THROWS_AS(median_ensemble(m, frame, 4, 0.1, 1), ConfigError);

    // Median over the same draws presented in reverse order.
    std::vector<Image> draws;
    int calls = 0;
    const auto out = median_ensemble(
        [&](const Image& img) {
          ++calls;
          draws.push_back(m.predict(std::vector<Image>{img}));
          return draws.back();
        },
        frame, 5, 0.1, 9);
    CHECK(calls == 5);
    std::reverse(draws.begin(), draws.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::vector<double> v;
      for (const auto& d : draws) v.push_back(d[i]);
      std::sort(v.begin(), v.end());
      CHECK(out[i] == v[2]);
    }
  }

  TEST_CASE("median ensemble reduces background flicker") {
    // Static noisy series: background 0.5, a bright square, sigma 0.1.
    const std::size_t T = 12, n = 32;
    auto series = std::make_shared<Array>(Shape{1, T, n, n}, 0.5);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t y = 10; y < 20; ++y)
        for (std::size_t x = 10; x < 20; ++x) (*series)(0, t, y, x) = 0.9;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0, 0.1);
    for (auto& v : series->storage()) v += nd(rng);
    const auto pairs = temporal_pairs(series, 0.0, 1.0);
    std::vector<std::size_t> tr_idx{0, 1, 2, 3, 4, 5, 6, 7}, va_idx{8, 9, 10};
    std::vector<PairMeta> tr, va;
    for (auto k : tr_idx) tr.push_back(pairs.meta(k));
    for (auto k : va_idx) va.push_back(pairs.meta(k));
    TrainConfig c = quick_config(8);
    const auto r = train(ModelConfig{1, 8, 3, 4}, PairSet(series, tr), PairSet(series, va), c);

    Array single({T, n, n}), ens({T, n, n});
    for (std::size_t t = 0; t < T; ++t) {
      const auto f = plane(*series, {0, t});
      set_plane(single, {t}, r.model.predict(std::vector<Image>{f}));
      set_plane(ens, {t}, median_ensemble(r.model, f, 31, 0.05, 100 + t));
    }
    NdArray<std::uint8_t> mask({n, n}, 1);
    for (std::size_t y = 6; y < 24; ++y)
      for (std::size_t x = 6; x < 24; ++x) mask(y, x) = 0;
    const auto s1 = flicker_score(single, mask), s2 = flicker_score(ens, mask);
    double m1 = 0, m2 = 0;
    for (std::size_t k = 0; k < s1.size(); ++k) m1 += s1[k], m2 += s2[k];
    MESSAGE("flicker single " << m1 / static_cast<double>(s1.size()) << " ensemble " << m2 / static_cast<double>(s2.size()));
    CHECK(m2 < m1);
  }
}
