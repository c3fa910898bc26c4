#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mcd {

// Uniform energy grid; bin j is centred at start + j*step.
struct EnergyGrid {
  double start_keV = 15.0;
  double step_keV = 1.0;
  std::size_t n_bins = 135;

  double center(std::size_t j) const { return start_keV + static_cast<double>(j) * step_keV; }
  // Index of the bin whose centre is nearest to `keV` (clamped to the grid).
  std::size_t locate_bin(double keV) const;
  std::vector<double> centers() const;
  bool operator==(const EnergyGrid&) const = default;
};

EnergyGrid make_grid(double start_keV, double step_keV, std::size_t n_bins);

// Linear attenuation in 1/mm per grid bin.
struct MaterialSpectrum {
  std::string name;
  std::vector<double> mu;
  std::optional<double> kedge_keV;
};

// Expected photon fluence per bin, photons/mm^2.
struct SourceSpectrum {
  std::vector<double> photons_per_mm2;
};

struct MacTable {
  EnergyGrid grid;
  std::vector<MaterialSpectrum> materials;
};

// CSV with header `energy_keV,<name1>,<name2>,...`.
MacTable load_mac_table(const std::filesystem::path& path);
void write_mac_table(const std::filesystem::path& path, const MacTable& table);

// mu(E) = a * (E/E0)^(-p) below the edge, times `jump` at and above it.
MaterialSpectrum synth_kedge_material(const EnergyGrid& grid, std::string name, double a, double p,
                                      double kedge_keV, double jump);
// Same power law without an edge on the grid.
MaterialSpectrum synth_power_law_material(const EnergyGrid& grid, std::string name, double a, double p);

// Gaussian bell with standard deviation `width_keV`, scaled so its maximum
// over the grid equals `peak_fluence`.
SourceSpectrum synth_source(const EnergyGrid& grid, double peak_keV, double width_keV, double peak_fluence);

void validate(const MaterialSpectrum& m, const EnergyGrid& grid);
void validate(const SourceSpectrum& s, const EnergyGrid& grid);

}  // namespace mcd
