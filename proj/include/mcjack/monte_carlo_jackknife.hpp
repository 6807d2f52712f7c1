#pragma once

// Monte-Carlo jackknife estimation of the log-MSPE of a prediction
// procedure. The log-MSPE as a function of psi is evaluated by simulation
// from one fixed set of standard draws, at the full-data estimate and at
// every delete-one estimate, and the jackknife bias correction is applied
// to the (clamped) values.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mcjack/core_model.hpp"
#include "mcjack/procedures.hpp"

namespace mcjack {

// How psi is estimated from a dataset.
enum class PsiEstimator {
  // A by the Prasad-Rao moment estimator on the full design, beta_f by GLS at that A.
  PrasadRao,
  // A known to be zero; only beta_f (A = 0 GLS) is estimated.
  KnownZeroA,
};

// Full-data estimate of psi. Throws InsufficientData when m < p_f. With
// m == p_f the moment estimator has no residual degrees of freedom and A
// is set to 0.
Psi m_estimate(const AreaDataset& data, PsiEstimator estimator = PsiEstimator::PrasadRao);

struct JackknifeSet {
  Psi psi_hat;
  // psi_minus[j]: estimate with area j removed.
  std::vector<Psi> psi_minus;
};

// Throws InsufficientData when m - 1 < p_f and JackknifeRankError when a
// leave-one-out design is rank deficient.
JackknifeSet jackknife_set(const AreaDataset& data, PsiEstimator estimator = PsiEstimator::PrasadRao);

struct TruncationConfig {
  double lambda = 2.0;
  double rho = 0.5;

  // lambda * m^rho
  double bound(std::size_t m) const;
};

void validate(const TruncationConfig& cfg);

// Clamps exp(b_tilde) into [e^-bound, e^bound] and returns the log;
// -infinity maps to -bound.
double truncate_log(double b_tilde, std::size_t m, const TruncationConfig& cfg);

// log[K^-1 sum_k (theta_hat_i^(k) - theta_i^(k))^2] for every area i, with
// the k-th dataset simulated from psi and row k of `draws`, and the
// procedure rerun on it in full. Entries are -infinity when every squared
// error is exactly zero.
Vector mc_log_mspe_all(const Psi& psi, BoundPredictor& predictor, const AreaDataset& shape,
                       const StandardDraws& draws);

Vector mc_log_mspe_all(const Psi& psi, const PredictionProcedure& procedure, const AreaDataset& shape,
                       const StandardDraws& draws);

double mc_log_mspe(const Psi& psi, const PredictionProcedure& procedure, std::size_t area,
                   const AreaDataset& shape, const StandardDraws& draws);

struct McjackAreaResult {
  double log_mspe_mcjack = 0.0;
  // Clamped value at psi_hat: the estimate without bias correction.
  double log_mspe_bootstrap = 0.0;
  // Unclamped Monte-Carlo log-MSPE at psi_hat.
  double b_tilde_hat = 0.0;
  // Clamped values at the delete-one estimates, j = 1..m.
  std::vector<double> b_hat_minus;
  std::size_t truncation_hits = 0;
};

struct McjackOptions {
  PsiEstimator estimator = PsiEstimator::PrasadRao;
  TruncationConfig truncation;
  std::size_t threads = 1;
};

struct McjackResult {
  std::vector<McjackAreaResult> areas;
  JackknifeSet jackknife;
  std::size_t K = 0;
  std::uint64_t seed = 0;
  TruncationConfig truncation;
  // Clamped b values over all areas and all m+1 evaluations.
  std::size_t truncation_hits = 0;
  // Evaluations whose empirical MSPE was exactly zero.
  std::size_t zero_mspe_events = 0;
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kDefaultMonteCarloSize = 1000;

// b0 - ((m-1)/m) sum_j (b_j - b0) on clamped values, for every area, using
// one set of draws (seed, K) for all m+1 evaluations. Adds a warning when
// K < m^2. Bit-identical for any thread count.
McjackResult mcjack_estimate(const AreaDataset& data, const PredictionProcedure& procedure,
                             std::size_t K, std::uint64_t seed, const McjackOptions& options = {});

McjackAreaResult mcjack_estimate(const AreaDataset& data, const PredictionProcedure& procedure,
                                 std::size_t area, std::size_t K, std::uint64_t seed,
                                 const McjackOptions& options = {});

// Jackknife combination of already-clamped values.
double jackknife_combine(double b0, const std::vector<double>& b_minus);

struct TruthEstimate {
  Vector log_mspe;
  // Delta-method standard error of each log-MSPE.
  Vector std_error;
  std::size_t N = 0;
};

// Simulation ground truth: same computation as mc_log_mspe_all with N rows
// generated on the fly from `seed`, so it equals mc_log_mspe_all on
// draw_standard(seed, N, m).
TruthEstimate empirical_true_log_mspe_all(const Psi& psi_true, const PredictionProcedure& procedure,
                                          const AreaDataset& shape, std::size_t N,
                                          std::uint64_t seed);

double empirical_true_log_mspe(const Psi& psi_true, const PredictionProcedure& procedure,
                               std::size_t area, const AreaDataset& shape, std::size_t N,
                               std::uint64_t seed);

}  // namespace mcjack
