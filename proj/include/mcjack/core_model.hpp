#pragma once

// Fay-Herriot area-level data, the full-model parameter vector and the
// parametric simulator driven by stored standard-normal draws.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mcjack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Observed small-area data: direct estimates y, full-model covariates X
// (row i is x_i'), known sampling variances D.
class AreaDataset {
 public:
  // Throws DimensionError on inconsistent sizes, DomainError when some
  // D_i <= 0 or a value is not finite, SingularDesign when X lacks full
  // column rank. Empty `area_ids` are filled with "1".."m".
  AreaDataset(Vector y, Matrix x, Vector d, std::vector<std::string> area_ids = {},
              std::vector<std::string> covariate_names = {});

  std::size_t m() const noexcept { return static_cast<std::size_t>(y_.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(x_.cols()); }

  const Vector& y() const noexcept { return y_; }
  const Matrix& x() const noexcept { return x_; }
  const Vector& d() const noexcept { return d_; }
  const std::vector<std::string>& area_ids() const noexcept { return area_ids_; }
  const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }

  // Same areas and design, new direct estimates.
  AreaDataset with_y(Vector y) const;

  // Dataset with area j removed (full validation, including rank).
  AreaDataset without(std::size_t j) const;

  // Areas reordered so that new area k is old area order[k].
  AreaDataset permuted(std::span<const std::size_t> order) const;

 private:
  struct Unchecked {};
  AreaDataset(Unchecked, Vector y, Matrix x, Vector d, std::vector<std::string> area_ids,
              std::vector<std::string> covariate_names);

  Vector y_;
  Matrix x_;
  Vector d_;
  std::vector<std::string> area_ids_;
  std::vector<std::string> covariate_names_;
};

// psi = (beta_f', A)'.
struct Psi {
  Vector beta_f;
  double A = 0.0;
};

// Throws DimensionError / DomainError when psi does not fit a design with p columns.
void validate_psi(const Psi& psi, std::size_t p);

// K x m standard normals for random effects (xi) and sampling errors (eta).
struct StandardDraws {
  RowMatrix xi;
  RowMatrix eta;
  std::uint64_t seed = 0;

  std::size_t K() const noexcept { return static_cast<std::size_t>(xi.rows()); }
  std::size_t m() const noexcept { return static_cast<std::size_t>(xi.cols()); }
};

// Row k of the draws generated from `seed`: m xi values, then m eta values,
// both from the substream addressed by (seed, k).
void draw_row(std::uint64_t seed, std::uint64_t k, std::span<double> xi, std::span<double> eta);

StandardDraws draw_standard(std::uint64_t seed, std::size_t K, std::size_t m);

struct SimulatedPair {
  Vector theta;
  Vector y_sim;
};

// theta_i = x_i' beta_f + sqrt(A) xi_i,  y_i = theta_i + sqrt(D_i) eta_i.
SimulatedPair simulate_pair(const Psi& psi, const AreaDataset& shape, std::span<const double> xi_row,
                            std::span<const double> eta_row);

// Allocation-free form used inside Monte-Carlo loops: `mean` is X beta_f,
// `sqrt_d` the per-area sampling standard deviations.
inline void simulate_into(const Vector& mean, double sqrt_a, const Vector& sqrt_d,
                          const double* xi, const double* eta, Vector& theta, Vector& y) {
  const Eigen::Index m = mean.size();
  for (Eigen::Index i = 0; i < m; ++i) {
    theta[i] = mean[i] + sqrt_a * xi[i];
    y[i] = theta[i] + sqrt_d[i] * eta[i];
  }
}

}  // namespace mcjack
