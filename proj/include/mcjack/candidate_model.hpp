#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mcjack/core_model.hpp"

namespace mcjack {

// A mean structure (subset of the full-model columns) with or without
// area-level random effects.
struct CandidateModel {
  std::vector<bool> covariate_mask;
  bool include_random_effect = false;

  static CandidateModel full(std::size_t p, bool random_effect) {
    return CandidateModel{std::vector<bool>(p, true), random_effect};
  }

  std::size_t covariate_count() const noexcept;

  // |M| = #covariates (+1 with random effects).
  std::size_t dim() const noexcept { return covariate_count() + (include_random_effect ? 1 : 0); }

  // Columns of `x_full` selected by the mask. Throws DimensionError on a
  // mask/design mismatch or an empty mask.
  Matrix design(const Matrix& x_full) const;

  // e.g. "{0,1}+RE"
  std::string label() const;

  friend bool operator==(const CandidateModel&, const CandidateModel&) = default;
};

// All covariate subsets containing column 0 (the intercept), each with and
// without random effects: 2^(p_f-1) * 2 models.
std::vector<CandidateModel> enumerate_candidates(std::size_t p_full);

}  // namespace mcjack
