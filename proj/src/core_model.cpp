#include "mcjack/core_model.hpp"

#include <cmath>
#include <unordered_set>

#include "mcjack/errors.hpp"
#include "mcjack/rng.hpp"

namespace mcjack {

namespace {

// Normal-equation condition guard is 1e12, i.e. 1e6 on X itself.
constexpr double kRankTolerance = 1e-6;

void check_rank(const Matrix& x) {
  if (x.cols() == 0) throw DimensionError("design matrix has no columns");
  if (x.cols() > x.rows()) {
    throw SingularDesign("design has " + std::to_string(x.cols()) + " columns but only " +
                         std::to_string(x.rows()) + " areas");
  }
  // Column scaling keeps polynomial terms on very different scales from
  // tripping the guard.
  Matrix scaled = x;
  for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
    const double norm = scaled.col(c).norm();
    if (norm == 0.0) throw SingularDesign("covariate column " + std::to_string(c) + " is zero");
    scaled.col(c) /= norm;
  }
  Eigen::JacobiSVD<Matrix> svd(scaled);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) < kRankTolerance * sv(0)) {
    throw SingularDesign("design matrix is not of full column rank");
  }
}

}  // namespace

AreaDataset::AreaDataset(Vector y, Matrix x, Vector d, std::vector<std::string> area_ids,
                         std::vector<std::string> covariate_names)
    : y_(std::move(y)),
      x_(std::move(x)),
      d_(std::move(d)),
      area_ids_(std::move(area_ids)),
      covariate_names_(std::move(covariate_names)) {
  const auto m = y_.size();
  if (m == 0) throw DimensionError("dataset has no areas");
  if (x_.rows() != m || d_.size() != m) {
    throw DimensionError("y has " + std::to_string(m) + " entries but X has " +
                         std::to_string(x_.rows()) + " rows and D has " +
                         std::to_string(d_.size()) + " entries");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::isfinite(y_[i])) throw DomainError("y is not finite for area " + std::to_string(i + 1));
    if (!(d_[i] > 0.0) || !std::isfinite(d_[i])) {
      throw DomainError("sampling variance must be positive for area " + std::to_string(i + 1));
    }
  }
  if (!x_.allFinite()) throw DomainError("covariates contain non-finite values");
  if (area_ids_.empty()) {
    for (Eigen::Index i = 0; i < m; ++i) area_ids_.push_back(std::to_string(i + 1));
  } else if (static_cast<Eigen::Index>(area_ids_.size()) != m) {
    throw DimensionError("area id count does not match m");
  }
  if (covariate_names_.empty()) {
    for (Eigen::Index c = 0; c < x_.cols(); ++c) covariate_names_.push_back("x" + std::to_string(c));
  } else if (static_cast<Eigen::Index>(covariate_names_.size()) != x_.cols()) {
    throw DimensionError("covariate name count does not match p");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : area_ids_) {
    if (!seen.insert(id).second) throw ValidationError("duplicate area id '" + id + "'");
  }
  check_rank(x_);
}

AreaDataset::AreaDataset(Unchecked, Vector y, Matrix x, Vector d, std::vector<std::string> area_ids,
                         std::vector<std::string> covariate_names)
    : y_(std::move(y)),
      x_(std::move(x)),
      d_(std::move(d)),
      area_ids_(std::move(area_ids)),
      covariate_names_(std::move(covariate_names)) {}

AreaDataset AreaDataset::with_y(Vector y) const {
  if (y.size() != y_.size()) throw DimensionError("replacement y has the wrong length");
  if (!y.allFinite()) throw DomainError("replacement y is not finite");
  return AreaDataset(Unchecked{}, std::move(y), x_, d_, area_ids_, covariate_names_);
}

AreaDataset AreaDataset::without(std::size_t j) const {
  const auto n = static_cast<Eigen::Index>(m());
  if (j >= m()) throw DimensionError("area index out of range");
  if (n == 1) throw InsufficientData("cannot delete the only area");
  Vector y(n - 1), d(n - 1);
  Matrix x(n - 1, x_.cols());
  std::vector<std::string> ids;
  ids.reserve(n - 1);
  for (Eigen::Index i = 0, r = 0; i < n; ++i) {
    if (static_cast<std::size_t>(i) == j) continue;
    y[r] = y_[i];
    d[r] = d_[i];
    x.row(r) = x_.row(i);
    ids.push_back(area_ids_[i]);
    ++r;
  }
  return AreaDataset(std::move(y), std::move(x), std::move(d), std::move(ids), covariate_names_);
}

AreaDataset AreaDataset::permuted(std::span<const std::size_t> order) const {
  if (order.size() != m()) throw DimensionError("permutation has the wrong length");
  Vector y(y_.size()), d(d_.size());
  Matrix x(x_.rows(), x_.cols());
  std::vector<std::string> ids(m());
  std::vector<bool> used(m(), false);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t src = order[k];
    if (src >= m() || used[src]) throw DimensionError("not a permutation");
    used[src] = true;
    const auto kk = static_cast<Eigen::Index>(k);
    const auto ss = static_cast<Eigen::Index>(src);
    y[kk] = y_[ss];
    d[kk] = d_[ss];
    x.row(kk) = x_.row(ss);
    ids[k] = area_ids_[src];
  }
  return AreaDataset(Unchecked{}, std::move(y), std::move(x), std::move(d), std::move(ids),
                     covariate_names_);
}

void validate_psi(const Psi& psi, std::size_t p) {
  if (static_cast<std::size_t>(psi.beta_f.size()) != p) {
    throw DimensionError("beta_f has " + std::to_string(psi.beta_f.size()) + " entries, design has " +
                         std::to_string(p) + " columns");
  }
  if (!(psi.A >= 0.0) || !std::isfinite(psi.A)) throw DomainError("A must be finite and >= 0");
  if (!psi.beta_f.allFinite()) throw DomainError("beta_f is not finite");
}

void draw_row(std::uint64_t seed, std::uint64_t k, std::span<double> xi, std::span<double> eta) {
  auto gen = substream(seed, k);
  fill_standard_normal(gen, xi);
  fill_standard_normal(gen, eta);
}

StandardDraws draw_standard(std::uint64_t seed, std::size_t K, std::size_t m) {
  if (K == 0 || m == 0) throw DomainError("draw_standard needs K >= 1 and m >= 1");
  StandardDraws draws;
  draws.seed = seed;
  draws.xi.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(m));
  draws.eta.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < K; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    draw_row(seed, k, std::span<double>(draws.xi.row(row).data(), m),
             std::span<double>(draws.eta.row(row).data(), m));
  }
  return draws;
}

SimulatedPair simulate_pair(const Psi& psi, const AreaDataset& shape, std::span<const double> xi_row,
                            std::span<const double> eta_row) {
  validate_psi(psi, shape.p());
  if (xi_row.size() != shape.m() || eta_row.size() != shape.m()) {
    throw DimensionError("draw rows must have length m");
  }
  const Vector mean = shape.x() * psi.beta_f;
  const Vector sqrt_d = shape.d().cwiseSqrt();
  SimulatedPair out{Vector(mean.size()), Vector(mean.size())};
  simulate_into(mean, std::sqrt(psi.A), sqrt_d, xi_row.data(), eta_row.data(), out.theta, out.y_sim);
  return out;
}

}  // namespace mcjack
