#pragma once

// Fay-Herriot estimation: GLS, the Prasad-Rao moment estimator of A,
// profile maximum likelihood, the EBLUP and the analytic MSPE formulas.

#include <Eigen/Cholesky>

#include <cstddef>
#include <string_view>

#include "mcjack/candidate_model.hpp"
#include "mcjack/core_model.hpp"

namespace mcjack {

enum class FitMethod { ProfileML, PrasadRao, FixedZero };

std::string_view to_string(FitMethod method) noexcept;

struct ModelFit {
  CandidateModel model;
  Vector beta;
  double A_hat = 0.0;
  double loglik = 0.0;
  FitMethod method = FitMethod::FixedZero;
};

// Cholesky factor of sum_i w_i x_i x_i'. Throws SingularDesign when the
// estimated reciprocal condition number falls below 1e-12.
Eigen::LLT<Matrix> factor_weighted_normal(const Matrix& x, const Vector& weights);

// {sum (A+D_i)^-1 x_i x_i'}^-1 sum (A+D_i)^-1 x_i y_i.
Vector gls_beta(const Matrix& x, const Vector& d, double A, const Vector& y);

// max{0, [y'(I-P_X)y - tr((I-P_X)D)] / (m-p)}. Throws InsufficientData when m <= p.
double prasad_rao_A(const Matrix& x, const Vector& d, const Vector& y);

// Untruncated moment expression; may be negative.
double prasad_rao_A_raw(const Matrix& x, const Vector& d, const Vector& y);

// Profile log-likelihood in A with all constants:
// -(m/2) log 2pi - 1/2 sum log(A+D_i) - 1/2 sum (y_i - x_i' beta(A))^2 / (A+D_i).
double profile_loglik(double A, const Matrix& x, const Vector& d, const Vector& y);

// Upper end of the search interval for A: max(1, 10 * sample variance of y).
double ml_search_upper(const Vector& y);

// Maximum-likelihood fit of `model`. A is fixed at zero for models without
// random effects; otherwise the profile likelihood is maximized over
// [0, ml_search_upper(y)] with the boundary admissible. Throws
// DegenerateFit when the A=0 GLS fit has zero residuals.
ModelFit fit_ml(const CandidateModel& model, const AreaDataset& data);

// Fit whose A is the Prasad-Rao estimate (zero for models without random
// effects) and beta the matching GLS estimate; loglik is evaluated at that A.
ModelFit fit_prasad_rao(const CandidateModel& model, const AreaDataset& data);

// [A/(A+D_i)] y_i + [D_i/(A+D_i)] x_i' beta under `fit`.
double eblup(const ModelFit& fit, const AreaDataset& data, std::size_t i);
Vector eblup_all(const ModelFit& fit, const AreaDataset& data);

// x_i' (X' D^-1 X)^-1 x_i: MSPE of the synthetic predictor when A = 0.
double analytic_mspe_A0(const Matrix& x, const Vector& d, std::size_t i);
Vector analytic_mspe_A0_all(const Matrix& x, const Vector& d);

// Prasad-Rao second-order MSPE approximation g1 + g2 + 2 g3 for the moment
// estimator of A:
//   g1 = A D_i/(A+D_i)
//   g2 = (D_i/(A+D_i))^2 x_i' {sum_j (A+D_j)^-1 x_j x_j'}^-1 x_i
//   g3 = D_i^2 (A+D_i)^-3 (2/m^2) sum_j (A+D_j)^2
double pr_mspe(double A_hat, const Matrix& x, const Vector& d, std::size_t i);
Vector pr_mspe_all(double A_hat, const Matrix& x, const Vector& d);

struct DhmUncertainty {
  Vector mspe;
  bool rejected = false;
  double statistic = 0.0;
  double critical = 0.0;
  // Prasad-Rao estimate used on the reject branch, 0 otherwise.
  double A_hat = 0.0;
};

// MSPE reported by the test-then-predict procedure: the Prasad-Rao MSPE
// when the test rejects A = 0, the synthetic-predictor MSPE otherwise. Only
// the covariate mask of `mean_model` is used.
DhmUncertainty dhm_uncertainty(const AreaDataset& data, const CandidateModel& mean_model,
                               double alpha);

}  // namespace mcjack
