#include "mcjack/candidate_model.hpp"

#include <algorithm>

#include "mcjack/errors.hpp"

namespace mcjack {

std::size_t CandidateModel::covariate_count() const noexcept {
  return static_cast<std::size_t>(std::count(covariate_mask.begin(), covariate_mask.end(), true));
}

Matrix CandidateModel::design(const Matrix& x_full) const {
  if (covariate_mask.size() != static_cast<std::size_t>(x_full.cols())) {
    throw DimensionError("model mask has " + std::to_string(covariate_mask.size()) +
                         " entries, design has " + std::to_string(x_full.cols()) + " columns");
  }
  const auto q = static_cast<Eigen::Index>(covariate_count());
  if (q == 0) throw DimensionError("model selects no covariates");
  if (q == x_full.cols()) return x_full;
  Matrix x(x_full.rows(), q);
  for (Eigen::Index c = 0, k = 0; c < x_full.cols(); ++c) {
    if (covariate_mask[static_cast<std::size_t>(c)]) x.col(k++) = x_full.col(c);
  }
  return x;
}

std::string CandidateModel::label() const {
  std::string s = "{";
  bool first = true;
  for (std::size_t c = 0; c < covariate_mask.size(); ++c) {
    if (!covariate_mask[c]) continue;
    if (!first) s += ",";
    s += std::to_string(c);
    first = false;
  }
  s += "}";
  if (include_random_effect) s += "+RE";
  return s;
}

std::vector<CandidateModel> enumerate_candidates(std::size_t p_full) {
  if (p_full == 0 || p_full > 20) throw DomainError("enumerate_candidates needs 1 <= p_f <= 20");
  std::vector<CandidateModel> out;
  const std::size_t free_cols = p_full - 1;
  for (std::size_t bits = 0; bits < (std::size_t{1} << free_cols); ++bits) {
    std::vector<bool> mask(p_full, false);
    mask[0] = true;
    for (std::size_t c = 1; c < p_full; ++c) mask[c] = (bits >> (c - 1)) & 1U;
    out.push_back(CandidateModel{mask, false});
    out.push_back(CandidateModel{mask, true});
  }
  return out;
}

}  // namespace mcjack
