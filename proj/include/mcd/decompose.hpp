#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcd/ndarray.hpp"
#include "mcd/spectra.hpp"

namespace mcd {

struct DecomposeConfig {
  double tolerance = 1e-8;
  int max_iter = 500;
};

struct SimplexSolution {
  Eigen::VectorXd f;
  bool converged = true;
  int iterations = 0;
  double residual = 0.0;  // ||A f - s||_2
};

// min ||A f - s||_2 subject to f >= 0, sum f = 1, via a primal active-set
// method on the normal equations. Columns of A are material spectra.
class SimplexLeastSquares {
 public:
  explicit SimplexLeastSquares(Eigen::MatrixXd A, DecomposeConfig config = {});

  SimplexSolution solve(const Eigen::VectorXd& s) const;
  const Eigen::MatrixXd& matrix() const noexcept { return A_; }

 private:
  Eigen::VectorXd solve_subspace(std::uint32_t free_mask, const Eigen::VectorXd& b) const;

  Eigen::MatrixXd A_, G_;
  DecomposeConfig config_;
  std::vector<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>> kkt_;  // by free-set mask, when cached
};

// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

// Zero-attenuation background column.
MaterialSpectrum air_material(const EnergyGrid& grid);

struct FractionMap {
  Array fractions;                      // (material, z, y, x)
  NdArray<std::uint8_t> nonconverged;   // (z, y, x), 1 where the solver hit max_iter
  std::vector<std::string> materials;
  std::size_t nonconverged_count() const;
};

// `volume` is (z, channel, y, x) on `grid`; `materials` (background first by
// convention) must be tabulated on the same grid.
FractionMap decompose(const Array& volume, const EnergyGrid& grid, std::span<const MaterialSpectrum> materials,
                      const EnergyGrid& material_grid, const DecomposeConfig& config = {});
// Same, for channels that need not lie on a uniform grid (e.g. after
// rebinning); only the channel counts are checked.
FractionMap decompose(const Array& volume, std::span<const MaterialSpectrum> materials,
                      const DecomposeConfig& config = {});

// Largest |sum f - 1| and most negative fraction over the map.
struct SimplexViolation {
  double max_sum_error = 0.0;
  double min_fraction = 0.0;
};
SimplexViolation simplex_violation(const FractionMap& map);

// Per-voxel argmax over materials; ties go to the lowest index.
NdArray<std::uint16_t> classify(const FractionMap& map);

}  // namespace mcd
