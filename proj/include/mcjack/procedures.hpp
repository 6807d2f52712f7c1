#pragma once

// Prediction procedures: deterministic maps from a dataset to per-area
// point predictions, possibly with model selection inside.

#include <Eigen/Cholesky>

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mcjack/candidate_model.hpp"
#include "mcjack/core_model.hpp"

namespace mcjack {

// A procedure specialised to one design (X, D). Holds scratch buffers, so
// one instance per thread.
class BoundPredictor {
 public:
  virtual ~BoundPredictor() = default;
  // Writes m predictions for direct estimates y into `out`.
  virtual void predict(const Vector& y, Vector& out) = 0;
};

class PredictionProcedure {
 public:
  virtual ~PredictionProcedure() = default;

  virtual std::string name() const = 0;
  // Human-readable parameters (candidate space, alpha, ...).
  virtual std::string describe() const = 0;

  // Precomputes everything that depends only on the design and D.
  virtual std::unique_ptr<BoundPredictor> bind(const AreaDataset& shape) const = 0;

  Vector predict(const AreaDataset& data) const;
};

// theta_i = y_i.
class DirectProcedure final : public PredictionProcedure {
 public:
  std::string name() const override { return "direct"; }
  std::string describe() const override { return "direct estimator y_i"; }
  std::unique_ptr<BoundPredictor> bind(const AreaDataset& shape) const override;
};

// theta_i = x_i' beta with beta the A = 0 GLS estimate under `mean_model`.
class SyntheticProcedure final : public PredictionProcedure {
 public:
  explicit SyntheticProcedure(CandidateModel mean_model) : mean_model_(std::move(mean_model)) {}
  std::string name() const override { return "synthetic"; }
  std::string describe() const override;
  std::unique_ptr<BoundPredictor> bind(const AreaDataset& shape) const override;

 private:
  CandidateModel mean_model_;
};

// EBLUP under `mean_model` with the Prasad-Rao estimate of A.
class PlainEblupProcedure final : public PredictionProcedure {
 public:
  explicit PlainEblupProcedure(CandidateModel mean_model) : mean_model_(std::move(mean_model)) {}
  std::string name() const override { return "eblup"; }
  std::string describe() const override;
  std::unique_ptr<BoundPredictor> bind(const AreaDataset& shape) const override;

 private:
  CandidateModel mean_model_;
};

// BIC over `candidates` (ML fits), then the EBLUP under the chosen model
// with its ML estimate of A.
class BicEblupProcedure final : public PredictionProcedure {
 public:
  explicit BicEblupProcedure(std::vector<CandidateModel> candidates);
  std::string name() const override { return "bic"; }
  std::string describe() const override;
  std::unique_ptr<BoundPredictor> bind(const AreaDataset& shape) const override;
  const std::vector<CandidateModel>& candidates() const noexcept { return candidates_; }

 private:
  std::vector<CandidateModel> candidates_;
};

// Random-effect test at level alpha under `mean_model`; Prasad-Rao EBLUP
// when A = 0 is rejected, the synthetic predictor otherwise.
class DhmProcedure final : public PredictionProcedure {
 public:
  DhmProcedure(CandidateModel mean_model, double alpha);
  std::string name() const override { return "dhm"; }
  std::string describe() const override;
  std::unique_ptr<BoundPredictor> bind(const AreaDataset& shape) const override;
  double alpha() const noexcept { return alpha_; }

 private:
  CandidateModel mean_model_;
  double alpha_;
};

// Registry lookup: "direct", "synthetic", "eblup", "dhm" (uses mean_model
// and alpha) or "bic" (uses candidates). Throws ValidationError on an
// unknown name.
std::unique_ptr<PredictionProcedure> make_procedure(const std::string& name,
                                                    const CandidateModel& mean_model,
                                                    double alpha,
                                                    const std::vector<CandidateModel>& candidates);

}  // namespace mcjack
