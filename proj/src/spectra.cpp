#include "mcd/spectra.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mcd/error.hpp"

namespace mcd {

EnergyGrid make_grid(double start_keV, double step_keV, std::size_t n_bins) {
  if (!(step_keV > 0)) throw ConfigError("energy grid: step must be > 0");
  if (n_bins < 2) throw ConfigError("energy grid: need at least 2 bins");
  return {start_keV, step_keV, n_bins};
}

std::size_t EnergyGrid::locate_bin(double keV) const {
  const double r = std::round((keV - start_keV) / step_keV);
  if (r <= 0) return 0;
  if (r >= static_cast<double>(n_bins - 1)) return n_bins - 1;
  return static_cast<std::size_t>(r);
}

std::vector<double> EnergyGrid::centers() const {
  std::vector<double> c(n_bins);
  for (std::size_t j = 0; j < n_bins; ++j) c[j] = center(j);
  return c;
}

void validate(const MaterialSpectrum& m, const EnergyGrid& grid) {
  if (m.mu.size() != grid.n_bins)
    throw ConfigError("material '" + m.name + "': " + std::to_string(m.mu.size()) + " values for a " +
                      std::to_string(grid.n_bins) + "-bin grid");
  for (double v : m.mu)
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("material '" + m.name + "': attenuation must be finite and >= 0");
}

void validate(const SourceSpectrum& s, const EnergyGrid& grid) {
  if (s.photons_per_mm2.size() != grid.n_bins) throw ConfigError("source spectrum length does not match grid");
  bool any = false;
  for (double v : s.photons_per_mm2) {
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("source spectrum values must be finite and >= 0");
    any = any || v > 0;
  }
  if (!any) throw ConfigError("source spectrum is identically zero");
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& text, std::size_t row, std::size_t col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw DataError("MAC table row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                    ": cannot parse '" + text + "' as a number");
  }
}

}  // namespace

MacTable load_mac_table(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open MAC table '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line)) throw DataError("MAC table '" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "energy_keV")
    throw DataError("MAC table header must be 'energy_keV,<material>,...'");

  MacTable table;
  for (std::size_t c = 1; c < header.size(); ++c) table.materials.push_back({header[c], {}, std::nullopt});
  std::vector<double> energies;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw DataError("MAC table row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    const double e = parse_cell(cells[0], row, 0);
    if (!energies.empty() && !(e > energies.back()))
      throw DataError("MAC table row " + std::to_string(row) + ": energy " + cells[0] + " is not strictly increasing");
    energies.push_back(e);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = parse_cell(cells[c], row, c);
      if (v < 0)
        throw DataError("MAC table row " + std::to_string(row) + ", column '" + header[c] +
                        "': negative attenuation " + cells[c]);
      table.materials[c - 1].mu.push_back(v);
    }
  }
  if (energies.size() < 2) throw DataError("MAC table needs at least 2 energy rows");
  const double step = (energies.back() - energies.front()) / static_cast<double>(energies.size() - 1);
  for (std::size_t j = 1; j < energies.size(); ++j)
    if (std::abs((energies[j] - energies[j - 1]) - step) > 1e-6 * std::max(1.0, step))
      throw DataError("MAC table row " + std::to_string(j + 2) + ": energies are not uniformly spaced");
  table.grid = {energies.front(), step, energies.size()};
  return table;
}

void write_mac_table(const std::filesystem::path& path, const MacTable& table) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write MAC table '" + path.string() + "'");
  os << "energy_keV";
  for (const auto& m : table.materials) os << ',' << m.name;
  os << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t j = 0; j < table.grid.n_bins; ++j) {
    os << table.grid.center(j);
    for (const auto& m : table.materials) os << ',' << m.mu.at(j);
    os << '\n';
  }
}

MaterialSpectrum synth_power_law_material(const EnergyGrid& grid, std::string name, double a, double p) {
  if (!(a > 0)) throw ConfigError("synthetic material: a must be > 0");
  if (!(p > 0)) throw ConfigError("synthetic material: p must be > 0");
  MaterialSpectrum m{std::move(name), std::vector<double>(grid.n_bins), std::nullopt};
  const double e0 = grid.start_keV;
  for (std::size_t j = 0; j < grid.n_bins; ++j) m.mu[j] = a * std::pow(grid.center(j) / e0, -p);
  return m;
}

MaterialSpectrum synth_kedge_material(const EnergyGrid& grid, std::string name, double a, double p,
                                      double kedge_keV, double jump) {
  if (!(jump > 1)) throw ConfigError("synthetic material: jump must be > 1");
  const double lo = grid.center(0), hi = grid.center(grid.n_bins - 1);
  if (!(kedge_keV > lo && kedge_keV <= hi))
    throw ConfigError("synthetic material '" + name + "': k-edge " + std::to_string(kedge_keV) +
                      " keV lies outside the grid");
  MaterialSpectrum m = synth_power_law_material(grid, std::move(name), a, p);
  for (std::size_t j = 0; j < grid.n_bins; ++j)
    if (grid.center(j) >= kedge_keV) m.mu[j] *= jump;
  m.kedge_keV = kedge_keV;
  return m;
}

SourceSpectrum synth_source(const EnergyGrid& grid, double peak_keV, double width_keV, double peak_fluence) {
  if (!(peak_fluence > 0)) throw ConfigError("source: peak_fluence must be > 0");
  if (!(width_keV > 0)) throw ConfigError("source: width must be > 0");
  SourceSpectrum s{std::vector<double>(grid.n_bins)};
  double mx = 0;
  for (std::size_t j = 0; j < grid.n_bins; ++j) {
    const double d = (grid.center(j) - peak_keV) / width_keV;
    s.photons_per_mm2[j] = std::exp(-0.5 * d * d);
    mx = std::max(mx, s.photons_per_mm2[j]);
  }
  if (!(mx > 0)) throw ConfigError("source: bell vanishes on the grid");
  for (auto& v : s.photons_per_mm2) v = v / mx * peak_fluence;
  return s;
}

}  // namespace mcd
