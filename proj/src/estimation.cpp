#include "mcjack/estimation.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <numbers>

#include "mcjack/errors.hpp"
#include "mcjack/selection.hpp"

namespace mcjack {

namespace {

constexpr double kMinReciprocalCondition = 1e-12;
constexpr double kLog2Pi = 1.8378770664093454836;

void check_shapes(const Matrix& x, const Vector& d, const Vector* y = nullptr) {
  if (x.rows() != d.size() || (y != nullptr && y->size() != d.size())) {
    throw DimensionError("X, D and y must have the same number of areas");
  }
  if (x.cols() == 0) throw DimensionError("design matrix has no columns");
}

// x_i' M^-1 x_i for every row, given the Cholesky factor of M.
Vector leverage_forms(const Eigen::LLT<Matrix>& llt, const Matrix& x) {
  const Matrix z = llt.matrixL().solve(x.transpose());
  return z.colwise().squaredNorm().transpose();
}

}  // namespace

std::string_view to_string(FitMethod method) noexcept {
  switch (method) {
    case FitMethod::ProfileML: return "ProfileML";
    case FitMethod::PrasadRao: return "PrasadRao";
    case FitMethod::FixedZero: return "FixedZero";
  }
  return "?";
}

Eigen::LLT<Matrix> factor_weighted_normal(const Matrix& x, const Vector& weights) {
  const Matrix normal = x.transpose() * weights.asDiagonal() * x;
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kMinReciprocalCondition)) {
    throw SingularDesign("weighted normal equations are singular or ill-conditioned");
  }
  return llt;
}

Vector gls_beta(const Matrix& x, const Vector& d, double A, const Vector& y) {
  check_shapes(x, d, &y);
  if (!(A >= 0.0)) throw DomainError("A must be >= 0");
  const Vector w = (d.array() + A).inverse().matrix();
  const auto llt = factor_weighted_normal(x, w);
  return llt.solve(x.transpose() * w.cwiseProduct(y));
}

double prasad_rao_A_raw(const Matrix& x, const Vector& d, const Vector& y) {
  check_shapes(x, d, &y);
  const auto m = x.rows();
  const auto p = x.cols();
  if (m <= p) {
    throw InsufficientData("Prasad-Rao estimator needs m > p (m=" + std::to_string(m) +
                           ", p=" + std::to_string(p) + ")");
  }
  const auto llt = factor_weighted_normal(x, Vector::Ones(m));
  const Vector resid = y - x * llt.solve(x.transpose() * y);
  // tr((I - P_X) D) = sum D_i (1 - h_ii)
  const Vector h = leverage_forms(llt, x);
  const double trace = (d.array() * (1.0 - h.array())).sum();
  return (resid.squaredNorm() - trace) / static_cast<double>(m - p);
}

double prasad_rao_A(const Matrix& x, const Vector& d, const Vector& y) {
  return std::max(0.0, prasad_rao_A_raw(x, d, y));
}

double profile_loglik(double A, const Matrix& x, const Vector& d, const Vector& y) {
  const Vector beta = gls_beta(x, d, A, y);
  const Vector v = d.array() + A;
  const Vector r = y - x * beta;
  const auto m = static_cast<double>(y.size());
  return -0.5 * m * kLog2Pi - 0.5 * v.array().log().sum() - 0.5 * (r.array().square() / v.array()).sum();
}

double ml_search_upper(const Vector& y) {
  if (y.size() < 2) return 1.0;
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
  return std::max(1.0, 10.0 * var);
}

ModelFit fit_ml(const CandidateModel& model, const AreaDataset& data) {
  const Matrix x = model.design(data.x());
  const Vector& d = data.d();
  const Vector& y = data.y();

  const Vector beta0 = gls_beta(x, d, 0.0, y);
  const Vector r0 = y - x * beta0;
  const double wrss0 = (r0.array().square() / d.array()).sum();
  const double scale = (y.array().square() / d.array()).sum();
  if (wrss0 <= 1e-24 * std::max(scale, 1e-300)) {
    throw DegenerateFit("model " + model.label() + " fits the data exactly (zero residuals)");
  }

  ModelFit fit{model, beta0, 0.0, profile_loglik(0.0, x, d, y), FitMethod::FixedZero};
  if (!model.include_random_effect) return fit;

  fit.method = FitMethod::ProfileML;
  const double upper = ml_search_upper(y);
  auto negative = [&](double a) { return -profile_loglik(a, x, d, y); };
  std::uintmax_t max_iter = 500;
  const auto [a_star, neg_at_star] =
      boost::math::tools::brent_find_minima(negative, 0.0, upper, 30, max_iter);
  // Endpoint at zero is admissible and Brent never evaluates it exactly.
  if (-neg_at_star > fit.loglik) {
    fit.A_hat = a_star;
    fit.loglik = -neg_at_star;
    fit.beta = gls_beta(x, d, a_star, y);
  }
  return fit;
}

ModelFit fit_prasad_rao(const CandidateModel& model, const AreaDataset& data) {
  const Matrix x = model.design(data.x());
  ModelFit fit{model, Vector(), 0.0, 0.0, FitMethod::FixedZero};
  if (model.include_random_effect) {
    fit.A_hat = prasad_rao_A(x, data.d(), data.y());
    fit.method = FitMethod::PrasadRao;
  }
  fit.beta = gls_beta(x, data.d(), fit.A_hat, data.y());
  fit.loglik = profile_loglik(fit.A_hat, x, data.d(), data.y());
  return fit;
}

double eblup(const ModelFit& fit, const AreaDataset& data, std::size_t i) {
  if (i >= data.m()) throw DimensionError("area index out of range");
  const Matrix x = fit.model.design(data.x());
  if (x.cols() != fit.beta.size()) throw DimensionError("fit does not match the dataset design");
  const auto r = static_cast<Eigen::Index>(i);
  const double synthetic = x.row(r).dot(fit.beta);
  const double di = data.d()[r];
  if (fit.A_hat == 0.0) return synthetic;
  return fit.A_hat / (fit.A_hat + di) * data.y()[r] + di / (fit.A_hat + di) * synthetic;
}

Vector eblup_all(const ModelFit& fit, const AreaDataset& data) {
  Vector out(static_cast<Eigen::Index>(data.m()));
  for (std::size_t i = 0; i < data.m(); ++i) out[static_cast<Eigen::Index>(i)] = eblup(fit, data, i);
  return out;
}

Vector analytic_mspe_A0_all(const Matrix& x, const Vector& d) {
  check_shapes(x, d);
  const auto llt = factor_weighted_normal(x, d.cwiseInverse());
  return leverage_forms(llt, x);
}

double analytic_mspe_A0(const Matrix& x, const Vector& d, std::size_t i) {
  if (i >= static_cast<std::size_t>(x.rows())) throw DimensionError("area index out of range");
  return analytic_mspe_A0_all(x, d)[static_cast<Eigen::Index>(i)];
}

Vector pr_mspe_all(double A_hat, const Matrix& x, const Vector& d) {
  check_shapes(x, d);
  if (!(A_hat >= 0.0)) throw DomainError("A_hat must be >= 0");
  const Vector v = d.array() + A_hat;
  const auto llt = factor_weighted_normal(x, v.cwiseInverse());
  const Vector lev = leverage_forms(llt, x);
  const auto m = static_cast<double>(x.rows());
  const double var_a = 2.0 / (m * m) * v.squaredNorm();
  const Vector shrink = d.cwiseQuotient(v);
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double g1 = A_hat * d[i] / v[i];
    const double g2 = shrink[i] * shrink[i] * lev[i];
    const double g3 = d[i] * d[i] / (v[i] * v[i] * v[i]) * var_a;
    out[i] = g1 + g2 + 2.0 * g3;
  }
  return out;
}

double pr_mspe(double A_hat, const Matrix& x, const Vector& d, std::size_t i) {
  if (i >= static_cast<std::size_t>(x.rows())) throw DimensionError("area index out of range");
  return pr_mspe_all(A_hat, x, d)[static_cast<Eigen::Index>(i)];
}

DhmUncertainty dhm_uncertainty(const AreaDataset& data, const CandidateModel& mean_model,
                               double alpha) {
  const SelectionOutcome outcome = dhm_test(data, mean_model, alpha);
  const DhmDecision& test = *outcome.test;
  const Matrix x = mean_model.design(data.x());
  DhmUncertainty out;
  out.rejected = test.rejected;
  out.statistic = test.statistic;
  out.critical = test.critical;
  if (test.rejected) {
    out.A_hat = prasad_rao_A(x, data.d(), data.y());
    out.mspe = pr_mspe_all(out.A_hat, x, data.d());
  } else {
    out.mspe = analytic_mspe_A0_all(x, data.d());
  }
  return out;
}

}  // namespace mcjack
