#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mcd/error.hpp"
#include "mcd/spectra.hpp"

namespace fs = std::filesystem;
using namespace mcd;

namespace {

fs::path write_csv(const std::string& name, const std::string& text) {
  auto p = fs::temp_directory_path() / "mcd_spectra_tests" / name;
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_SUITE("spectra") {
  TEST_CASE("three-row two-material table") {
    const auto t = load_mac_table(write_csv("ok.csv", "energy_keV,gd,water\n40,1.5,0.3\n41,1.4,0.29\n42,1.3,0.28\n"));
    REQUIRE(t.materials.size() == 2);
    CHECK(t.materials[0].name == "gd");
    CHECK(t.materials[1].mu.size() == 3);
    CHECK(t.grid.start_keV == 40.0);
    CHECK(t.grid.step_keV == 1.0);
    CHECK(t.materials[1].mu[2] == 0.28);
  }

  TEST_CASE("negative value names the cell") {
    try {
      load_mac_table(write_csv("neg.csv", "energy_keV,gd,water\n40,1.5,0.3\n41,-1.4,0.29\n42,1.3,0.28\n"));
      FAIL("expected a parse error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("gd") != std::string::npos);
      CHECK(msg.find("-1.4") != std::string::npos);
    }
  }

  TEST_CASE("write then load round trip") {
    const auto grid = make_grid(40, 1, 46);
    MacTable t{grid, {synth_kedge_material(grid, "eu", 0.7, 3, 48.5, 4.5), synth_power_law_material(grid, "u", 1.1, 3)}};
    const auto p = fs::temp_directory_path() / "mcd_spectra_tests" / "rt.csv";
    write_mac_table(p, t);
    const auto r = load_mac_table(p);
    CHECK(r.grid == t.grid);
    REQUIRE(r.materials.size() == 2);
    CHECK(r.materials[0].mu == t.materials[0].mu);
    CHECK(r.materials[1].mu == t.materials[1].mu);
  }

  TEST_CASE("k-edge placement and jump") {
    const auto grid = make_grid(15, 1, 136);
    CHECK_THROWS_AS(synth_kedge_material(grid, "x", 1, 3, 48.5, 1.0), ConfigError);
    const auto m = synth_kedge_material(grid, "eu", 2.0, 3.0, 48.5, 4.0);
    CHECK(grid.center(33) == 48.0);
    CHECK(grid.center(34) == 49.0);
    // Strictly decreasing except for the single jump between j=33 and j=34.
    for (std::size_t j = 1; j < grid.n_bins; ++j) {
      if (j == 34)
        CHECK(m.mu[j] > m.mu[j - 1]);
      else
        CHECK(m.mu[j] < m.mu[j - 1]);
    }
    // mu(E+)/mu(E-) equals the jump once the power-law drop is removed.
    const double ratio = m.mu[34] / m.mu[33] * std::pow(49.0 / 48.0, 3.0);
    CHECK(ratio == doctest::Approx(4.0).epsilon(1e-12));
    // mu at 2*E0 = a/8 below the edge: E0 = 15, 30 keV is bin 15
    CHECK(m.mu[15] == doctest::Approx(2.0 / 8.0).epsilon(1e-12));
  }

  TEST_CASE("bin arithmetic is exact") {
    const auto grid = make_grid(15, 1, 136);
    for (std::size_t j = 0; j < grid.n_bins; ++j) CHECK(grid.locate_bin(grid.center(j)) == j);
    const auto g2 = make_grid(40, 1, 46);
    for (std::size_t j = 0; j < g2.n_bins; ++j) CHECK(g2.locate_bin(g2.center(j)) == j);
  }

  TEST_CASE("source spectrum") {
    const auto grid = make_grid(15, 1, 136);
    const auto s = synth_source(grid, 60.0, 20.0, 175e3);
    CHECK(*std::max_element(s.photons_per_mm2.begin(), s.photons_per_mm2.end()) == 175e3);
    // symmetric about the peak (bin 45)
    for (std::size_t d = 1; d < 40; ++d) CHECK(s.photons_per_mm2[45 - d] == doctest::Approx(s.photons_per_mm2[45 + d]));
    const auto flat = synth_source(grid, 60.0, 1e9, 175e3);
    for (double v : flat.photons_per_mm2) CHECK(v == doctest::Approx(175e3).epsilon(1e-9));
  }
}
