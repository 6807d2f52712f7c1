#include "mcjack/selection.hpp"

#include <cmath>

#include "mcjack/errors.hpp"

namespace mcjack {

double bic_score(double loglik, std::size_t dim, double m) {
  return -2.0 * loglik + static_cast<double>(dim) * std::log(m);
}

double bic_score(const ModelFit& fit, std::size_t m) {
  return bic_score(fit.loglik, fit.model.dim(), static_cast<double>(m));
}

bool tie_break_less(const CandidateModel& a, const CandidateModel& b) {
  if (a.dim() != b.dim()) return a.dim() < b.dim();
  if (a.covariate_mask != b.covariate_mask) return a.covariate_mask < b.covariate_mask;
  return !a.include_random_effect && b.include_random_effect;
}

SelectionOutcome select_bic(std::span<const CandidateModel> candidates, const AreaDataset& data) {
  if (candidates.empty()) throw DomainError("candidate list is empty");
  SelectionOutcome out;
  out.procedure = SelectionProcedure::BIC;
  const BicEntry* best = nullptr;
  out.scores.reserve(candidates.size());
  for (const auto& candidate : candidates) {
    try {
      ModelFit fit = fit_ml(candidate, data);
      const double bic = bic_score(fit, data.m());
      out.scores.push_back(BicEntry{std::move(fit), bic});
    } catch (const SingularDesign&) {
      continue;
    } catch (const DegenerateFit&) {
      continue;
    }
  }
  for (const auto& entry : out.scores) {
    if (best == nullptr || entry.bic < best->bic ||
        (entry.bic == best->bic && tie_break_less(entry.fit.model, best->fit.model))) {
      best = &entry;
    }
  }
  if (best == nullptr) throw NoViableModel("no candidate model could be fitted");
  out.chosen = best->fit.model;
  return out;
}

SelectionOutcome dhm_test(const AreaDataset& data, const CandidateModel& mean_model, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const Matrix x = mean_model.design(data.x());
  const auto m = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<std::size_t>(x.cols());
  if (m <= p) throw InsufficientData("random-effect test needs m > p");

  DhmDecision test;
  test.alpha = alpha;
  test.df = m - p;
  test.beta = gls_beta(x, data.d(), 0.0, data.y());
  const Vector r = data.y() - x * test.beta;
  test.statistic = (r.array().square() / data.d().array()).sum();
  test.critical = chi_square_quantile(static_cast<double>(test.df), 1.0 - alpha);
  test.rejected = test.statistic > test.critical;

  SelectionOutcome out;
  out.procedure = SelectionProcedure::DHMTest;
  out.chosen = CandidateModel{mean_model.covariate_mask, test.rejected};
  out.test = std::move(test);
  return out;
}

}  // namespace mcjack
