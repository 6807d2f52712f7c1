#pragma once

// Model selection ahead of prediction: BIC over an explicit candidate list
// and the chi-square test for the presence of area-level random effects.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mcjack/candidate_model.hpp"
#include "mcjack/core_model.hpp"
#include "mcjack/estimation.hpp"

namespace mcjack {

enum class SelectionProcedure { BIC, DHMTest };

struct BicEntry {
  ModelFit fit;
  double bic = 0.0;
};

struct DhmDecision {
  double statistic = 0.0;
  double critical = 0.0;
  double alpha = 0.0;
  std::size_t df = 0;
  bool rejected = false;
  // GLS coefficients with A = 0.
  Vector beta;
};

struct SelectionOutcome {
  CandidateModel chosen;
  SelectionProcedure procedure = SelectionProcedure::BIC;
  // BIC: one entry per viable candidate, in the order supplied.
  std::vector<BicEntry> scores;
  // DHM: the test result.
  std::optional<DhmDecision> test;
};

// -2 loglik + |M| log m.
double bic_score(double loglik, std::size_t dim, double m);
double bic_score(const ModelFit& fit, std::size_t m);

// Strict weak order used to break exact BIC ties: smaller |M|, then the
// lexicographically smaller mask, then no random effect first.
bool tie_break_less(const CandidateModel& a, const CandidateModel& b);

// Fits every candidate by ML and returns the BIC minimizer. Candidates
// failing with SingularDesign or DegenerateFit are skipped; if none
// survive, NoViableModel is thrown.
SelectionOutcome select_bic(std::span<const CandidateModel> candidates, const AreaDataset& data);

// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

double chi_square_cdf(double df, double x);

// Inverse of chi_square_cdf. Throws DomainError unless 0 < prob < 1 and df >= 1.
double chi_square_quantile(double df, double prob);

// T = sum D_i^-1 (y_i - x_i' beta)^2 with beta the A = 0 GLS estimate;
// rejects A = 0 iff T > chi^2_{m-p} quantile at 1 - alpha. The chosen model
// is `mean_model` with the random effect switched on exactly when rejected.
SelectionOutcome dhm_test(const AreaDataset& data, const CandidateModel& mean_model, double alpha);

}  // namespace mcjack
