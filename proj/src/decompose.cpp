#include "mcd/decompose.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "mcd/error.hpp"

namespace mcd {

namespace {

constexpr std::size_t kMaxMaterials = 31;
constexpr std::size_t kMaxCachedMaterials = 10;

Eigen::MatrixXd kkt_matrix(const Eigen::MatrixXd& G, std::uint32_t mask) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < G.rows(); ++i)
    if (mask >> i & 1u) idx.push_back(i);
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k + 1, k + 1);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) K(a, b) = G(idx[a], idx[b]);
    K(a, k) = 1.0;
    K(k, a) = 1.0;
  }
  return K;
}

}  // namespace

SimplexLeastSquares::SimplexLeastSquares(Eigen::MatrixXd A, DecomposeConfig config)
    : A_(std::move(A)), config_(config) {
  if (A_.cols() < 1) throw ConfigError("decompose: need at least one material");
  if (static_cast<std::size_t>(A_.cols()) > kMaxMaterials) throw ConfigError("decompose: too many materials");
  if (!(config_.tolerance > 0) || config_.max_iter < 1)
    throw ConfigError("decompose: tolerance must be > 0 and max_iter >= 1");
  G_ = A_.transpose() * A_;
  const auto M = static_cast<std::size_t>(A_.cols());
  if (M <= kMaxCachedMaterials) {
    kkt_.resize(std::size_t{1} << M);
    for (std::uint32_t mask = 1; mask < (1u << M); ++mask) kkt_[mask].compute(kkt_matrix(G_, mask));
  }
}

Eigen::VectorXd SimplexLeastSquares::solve_subspace(std::uint32_t mask, const Eigen::VectorXd& b) const {
  const auto k = std::popcount(mask);
  Eigen::VectorXd rhs(k + 1);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < b.size(); ++i)
    if (mask >> i & 1u) rhs(r++) = b(i);
  rhs(k) = 1.0;
  Eigen::VectorXd sol;
  if (!kkt_.empty()) {
    sol = kkt_[mask].solve(rhs);
  } else {
    sol = kkt_matrix(G_, mask).completeOrthogonalDecomposition().solve(rhs);
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(b.size());
  r = 0;
  for (Eigen::Index i = 0; i < b.size(); ++i)
    if (mask >> i & 1u) f(i) = sol(r++);
  // Singular subspaces (flat directions) can leave the sum slightly off.
  const double s = f.sum();
  if (std::abs(s - 1.0) > 1e-12 && r > 0) {
    const double corr = (1.0 - s) / static_cast<double>(r);
    for (Eigen::Index i = 0; i < b.size(); ++i)
      if (mask >> i & 1u) f(i) += corr;
  }
  return f;
}

SimplexSolution SimplexLeastSquares::solve(const Eigen::VectorXd& s) const {
  if (s.size() != A_.rows())
    throw DataError("decompose: spectrum has " + std::to_string(s.size()) + " channels, matrix has " +
                    std::to_string(A_.rows()));
  const Eigen::Index M = A_.cols();
  const Eigen::VectorXd b = A_.transpose() * s;
  const double tol = config_.tolerance;

  // Start at the best single-material vertex.
  Eigen::Index start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < M; ++m) {
    const double obj = 0.5 * G_(m, m) - b(m);
    if (obj < best) best = obj, start = m;
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(M);
  f(start) = 1.0;
  std::uint32_t mask = 1u << start;

  SimplexSolution out;
  out.converged = false;
  const double scale = std::max(1.0, G_.diagonal().maxCoeff());
  for (int it = 1; it <= config_.max_iter; ++it) {
    out.iterations = it;
    const Eigen::VectorXd p = solve_subspace(mask, b);
    bool feasible = true;
    for (Eigen::Index i = 0; i < M; ++i)
      if ((mask >> i & 1u) && p(i) < 0) feasible = false;
    if (feasible) {
      f = p;
      const Eigen::VectorXd g = G_ * f - b;
      // Multiplier of the sum constraint: the mean gradient over free variables.
      double nu = 0;
      int nf = 0;
      for (Eigen::Index i = 0; i < M; ++i)
        if (mask >> i & 1u) nu += g(i), ++nf;
      nu /= nf;
      Eigen::Index enter = -1;
      double most = -tol * scale;
      for (Eigen::Index i = 0; i < M; ++i)
        if (!(mask >> i & 1u) && g(i) - nu < most) most = g(i) - nu, enter = i;
      if (enter < 0) {
        out.converged = true;
        break;
      }
      mask |= 1u << enter;
      continue;
    }
    // Step towards p until the first free variable hits zero.
    double alpha = 1.0;
    Eigen::Index block = -1;
    for (Eigen::Index i = 0; i < M; ++i)
      if ((mask >> i & 1u) && p(i) < 0) {
        const double a = f(i) / (f(i) - p(i));
        if (a < alpha) alpha = a, block = i;
      }
    f += alpha * (p - f);
    for (Eigen::Index i = 0; i < M; ++i)
      if ((mask >> i & 1u) && (i == block || f(i) <= 0)) {
        f(i) = 0.0;
        mask &= ~(1u << i);
      }
    if (mask == 0) {
      mask = 1u << start;
      f.setZero();
      f(start) = 1.0;
    }
  }
  if (!out.converged) f = project_to_simplex(f);
  for (Eigen::Index i = 0; i < M; ++i) f(i) = std::max(0.0, f(i));
  f /= f.sum();
  out.f = f;
  out.residual = (A_ * f - s).norm();
  return out;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0, theta = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

MaterialSpectrum air_material(const EnergyGrid& grid) {
  return MaterialSpectrum{"air", std::vector<double>(grid.n_bins, 0.0), std::nullopt};
}

std::size_t FractionMap::nonconverged_count() const {
  return static_cast<std::size_t>(std::count(nonconverged.storage().begin(), nonconverged.storage().end(), 1));
}

FractionMap decompose(const Array& volume, const EnergyGrid& grid, std::span<const MaterialSpectrum> materials,
                      const EnergyGrid& material_grid, const DecomposeConfig& config) {
  require_rank(volume.shape(), 4, "decompose");
  if (!(grid == material_grid) || grid.n_bins != volume.dim(1))
    throw ConfigError("decompose: material spectra grid does not match the volume's energy grid");
  return decompose(volume, materials, config);
}

FractionMap decompose(const Array& volume, std::span<const MaterialSpectrum> materials, const DecomposeConfig& config) {
  require_rank(volume.shape(), 4, "decompose");
  const std::size_t Z = volume.dim(0), C = volume.dim(1), Y = volume.dim(2), X = volume.dim(3);
  if (C < 2) throw ConfigError("decompose: needs >= 2 channels");
  if (materials.empty()) throw ConfigError("decompose: no materials");
  Eigen::MatrixXd A(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(materials.size()));
  FractionMap map;
  for (std::size_t m = 0; m < materials.size(); ++m) {
    if (materials[m].mu.size() != C)
      throw ConfigError("decompose: material '" + materials[m].name + "' has " +
                        std::to_string(materials[m].mu.size()) + " bins, volume has " + std::to_string(C));
    for (std::size_t c = 0; c < C; ++c) A(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(m)) = materials[m].mu[c];
    map.materials.push_back(materials[m].name);
  }
  const SimplexLeastSquares solver(A, config);
  const std::size_t M = materials.size(), plane = Y * X;
  map.fractions = Array({M, Z, Y, X});
  map.nonconverged = NdArray<std::uint8_t>({Z, Y, X});
  Eigen::VectorXd s(static_cast<Eigen::Index>(C));
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t p = 0; p < plane; ++p) {
      for (std::size_t c = 0; c < C; ++c) s(static_cast<Eigen::Index>(c)) = volume[(z * C + c) * plane + p];
      const auto sol = solver.solve(s);
      for (std::size_t m = 0; m < M; ++m) map.fractions[(m * Z + z) * plane + p] = sol.f(static_cast<Eigen::Index>(m));
      map.nonconverged[z * plane + p] = sol.converged ? 0 : 1;
    }
  return map;
}

SimplexViolation simplex_violation(const FractionMap& map) {
  SimplexViolation v;
  const std::size_t M = map.fractions.dim(0), n = map.fractions.size() / M;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t m = 0; m < M; ++m) {
      const double f = map.fractions[m * n + i];
      s += f;
      v.min_fraction = std::min(v.min_fraction, f);
    }
    v.max_sum_error = std::max(v.max_sum_error, std::abs(s - 1.0));
  }
  return v;
}

NdArray<std::uint16_t> classify(const FractionMap& map) {
  require_rank(map.fractions.shape(), 4, "classify");
  const std::size_t M = map.fractions.dim(0), n = map.fractions.size() / M;
  NdArray<std::uint16_t> labels({map.fractions.dim(1), map.fractions.dim(2), map.fractions.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < M; ++m)
      if (map.fractions[m * n + i] > map.fractions[best * n + i]) best = m;
    labels[i] = static_cast<std::uint16_t>(best);
  }
  return labels;
}

}  // namespace mcd
