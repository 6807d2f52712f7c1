#include "mcjack/monte_carlo_jackknife.hpp"

#include <algorithm>
#include <cmath>

#include "mcjack/errors.hpp"
#include "mcjack/estimation.hpp"
#include "mcjack/parallel.hpp"

namespace mcjack {

namespace {

struct ErrorMoments {
  Vector sum_sq;    // sum_k e_ik^2
  Vector sum_quad;  // sum_k e_ik^4
};

// Shared inner loop of mc_log_mspe_all and the truth run; `row(k, xi, eta)`
// yields pointers to row k of the standard draws.
template <class RowFn>
ErrorMoments accumulate_errors(const Psi& psi, BoundPredictor& predictor, const AreaDataset& shape,
                               std::size_t K, RowFn&& row) {
  validate_psi(psi, shape.p());
  const auto m = static_cast<Eigen::Index>(shape.m());
  const Vector mean = shape.x() * psi.beta_f;
  const Vector sqrt_d = shape.d().cwiseSqrt();
  const double sqrt_a = std::sqrt(psi.A);
  Vector theta(m), y(m), pred(m);
  ErrorMoments acc{Vector::Zero(m), Vector::Zero(m)};
  const double* xi = nullptr;
  const double* eta = nullptr;
  for (std::size_t k = 0; k < K; ++k) {
    row(k, xi, eta);
    simulate_into(mean, sqrt_a, sqrt_d, xi, eta, theta, y);
    predictor.predict(y, pred);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double e2 = (pred[i] - theta[i]) * (pred[i] - theta[i]);
      acc.sum_sq[i] += e2;
      acc.sum_quad[i] += e2 * e2;
    }
  }
  return acc;
}

Vector log_mean(const Vector& sum_sq, std::size_t K) {
  Vector out(sum_sq.size());
  for (Eigen::Index i = 0; i < sum_sq.size(); ++i) {
    out[i] = sum_sq[i] > 0.0 ? std::log(sum_sq[i] / static_cast<double>(K))
                             : -std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace

Psi m_estimate(const AreaDataset& data, PsiEstimator estimator) {
  const Matrix& x = data.x();
  if (data.m() < data.p()) throw InsufficientData("psi estimation needs m >= p_f");
  Psi psi;
  if (estimator == PsiEstimator::PrasadRao && data.m() > data.p()) {
    psi.A = prasad_rao_A(x, data.d(), data.y());
  }
  psi.beta_f = gls_beta(x, data.d(), psi.A, data.y());
  return psi;
}

JackknifeSet jackknife_set(const AreaDataset& data, PsiEstimator estimator) {
  const std::size_t m = data.m();
  if (m < 2 || m - 1 < data.p()) {
    throw InsufficientData("jackknife needs m - 1 >= p_f (m=" + std::to_string(m) +
                           ", p_f=" + std::to_string(data.p()) + ")");
  }
  JackknifeSet set;
  set.psi_hat = m_estimate(data, estimator);
  set.psi_minus.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    try {
      set.psi_minus.push_back(m_estimate(data.without(j), estimator));
    } catch (const SingularDesign& e) {
      throw JackknifeRankError(j, e.what());
    }
  }
  return set;
}

double TruncationConfig::bound(std::size_t m) const {
  return lambda * std::pow(static_cast<double>(m), rho);
}

void validate(const TruncationConfig& cfg) {
  if (!(cfg.lambda > 0.0) || !(cfg.rho > 0.0) || !std::isfinite(cfg.lambda) || !std::isfinite(cfg.rho)) {
    throw DomainError("truncation lambda and rho must be positive");
  }
}

double truncate_log(double b_tilde, std::size_t m, const TruncationConfig& cfg) {
  const double bound = cfg.bound(m);
  if (std::isnan(b_tilde)) throw DomainError("log-MSPE is NaN");
  return std::clamp(b_tilde, -bound, bound);
}

Vector mc_log_mspe_all(const Psi& psi, BoundPredictor& predictor, const AreaDataset& shape,
                       const StandardDraws& draws) {
  if (draws.K() == 0) throw DomainError("Monte-Carlo size K must be >= 1");
  if (draws.m() != shape.m()) throw DimensionError("draws and dataset disagree on m");
  const auto acc = accumulate_errors(psi, predictor, shape, draws.K(),
                                     [&](std::size_t k, const double*& xi, const double*& eta) {
                                       const auto r = static_cast<Eigen::Index>(k);
                                       xi = draws.xi.row(r).data();
                                       eta = draws.eta.row(r).data();
                                     });
  return log_mean(acc.sum_sq, draws.K());
}

Vector mc_log_mspe_all(const Psi& psi, const PredictionProcedure& procedure, const AreaDataset& shape,
                       const StandardDraws& draws) {
  auto bound = procedure.bind(shape);
  return mc_log_mspe_all(psi, *bound, shape, draws);
}

double mc_log_mspe(const Psi& psi, const PredictionProcedure& procedure, std::size_t area,
                   const AreaDataset& shape, const StandardDraws& draws) {
  if (area >= shape.m()) throw DimensionError("area index out of range");
  return mc_log_mspe_all(psi, procedure, shape, draws)[static_cast<Eigen::Index>(area)];
}

double jackknife_combine(double b0, const std::vector<double>& b_minus) {
  const auto m = static_cast<double>(b_minus.size());
  double correction = 0.0;
  for (double b : b_minus) correction += b - b0;
  return b0 - (m - 1.0) / m * correction;
}

McjackResult mcjack_estimate(const AreaDataset& data, const PredictionProcedure& procedure,
                             std::size_t K, std::uint64_t seed, const McjackOptions& options) {
  validate(options.truncation);
  if (K == 0) throw DomainError("Monte-Carlo size K must be >= 1");
  const std::size_t m = data.m();

  McjackResult result;
  result.K = K;
  result.seed = seed;
  result.truncation = options.truncation;
  if (static_cast<double>(K) < static_cast<double>(m) * static_cast<double>(m)) {
    result.warnings.push_back("K=" + std::to_string(K) + " is below m^2=" + std::to_string(m * m) +
                              "; Monte-Carlo error may not be negligible");
  }
  result.jackknife = jackknife_set(data, options.estimator);
  const StandardDraws draws = draw_standard(seed, K, m);

  // Row 0: psi_hat; row j: psi_minus[j-1]. All rows share `draws`.
  std::vector<Vector> raw(m + 1);
  parallel_for(m + 1, options.threads, [&](std::size_t j) {
    const Psi& psi = j == 0 ? result.jackknife.psi_hat : result.jackknife.psi_minus[j - 1];
    auto bound = procedure.bind(data);
    raw[j] = mc_log_mspe_all(psi, *bound, data, draws);
  });

  const double band = options.truncation.bound(m);
  auto clamp_count = [&](double b, McjackAreaResult& area) {
    if (std::isinf(b) && b < 0) ++result.zero_mspe_events;
    if (b < -band || b > band) {
      ++area.truncation_hits;
      ++result.truncation_hits;
    }
    return truncate_log(b, m, options.truncation);
  };

  result.areas.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto& area = result.areas[i];
    const auto ii = static_cast<Eigen::Index>(i);
    area.b_tilde_hat = raw[0][ii];
    const double b0 = clamp_count(raw[0][ii], area);
    area.b_hat_minus.resize(m);
    for (std::size_t j = 0; j < m; ++j) area.b_hat_minus[j] = clamp_count(raw[j + 1][ii], area);
    area.log_mspe_bootstrap = b0;
    area.log_mspe_mcjack = jackknife_combine(b0, area.b_hat_minus);
  }
  return result;
}

McjackAreaResult mcjack_estimate(const AreaDataset& data, const PredictionProcedure& procedure,
                                 std::size_t area, std::size_t K, std::uint64_t seed,
                                 const McjackOptions& options) {
  if (area >= data.m()) throw DimensionError("area index out of range");
  return mcjack_estimate(data, procedure, K, seed, options).areas[area];
}

TruthEstimate empirical_true_log_mspe_all(const Psi& psi_true, const PredictionProcedure& procedure,
                                          const AreaDataset& shape, std::size_t N,
                                          std::uint64_t seed) {
  if (N == 0) throw DomainError("truth run size N must be >= 1");
  const std::size_t m = shape.m();
  std::vector<double> xi(m), eta(m);
  auto bound = procedure.bind(shape);
  const auto acc = accumulate_errors(psi_true, *bound, shape, N,
                                     [&](std::size_t k, const double*& xp, const double*& ep) {
                                       draw_row(seed, k, xi, eta);
                                       xp = xi.data();
                                       ep = eta.data();
                                     });
  TruthEstimate out;
  out.N = N;
  out.log_mspe = log_mean(acc.sum_sq, N);
  out.std_error.resize(static_cast<Eigen::Index>(m));
  const double n = static_cast<double>(N);
  for (Eigen::Index i = 0; i < out.std_error.size(); ++i) {
    const double mean = acc.sum_sq[i] / n;
    const double var = std::max(0.0, acc.sum_quad[i] / n - mean * mean);
    out.std_error[i] = mean > 0.0 ? std::sqrt(var / n) / mean : 0.0;
  }
  return out;
}

double empirical_true_log_mspe(const Psi& psi_true, const PredictionProcedure& procedure,
                               std::size_t area, const AreaDataset& shape, std::size_t N,
                               std::uint64_t seed) {
  if (area >= shape.m()) throw DimensionError("area index out of range");
  return empirical_true_log_mspe_all(psi_true, procedure, shape, N, seed)
      .log_mspe[static_cast<Eigen::Index>(area)];
}

}  // namespace mcjack
