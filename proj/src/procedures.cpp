#include "mcjack/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mcjack/errors.hpp"
#include "mcjack/estimation.hpp"
#include "mcjack/selection.hpp"

namespace mcjack {

namespace {

// Fitted-value map of the A = 0 GLS fit: fitted = H y.
Matrix gls_hat_matrix(const Matrix& x, const Vector& d) {
  const Vector w = d.cwiseInverse();
  const auto llt = factor_weighted_normal(x, w);
  return x * llt.solve(x.transpose() * w.asDiagonal());
}

double weighted_rss(const Vector& y, const Vector& fitted, const Vector& d) {
  return ((y - fitted).array().square() / d.array()).sum();
}

bool zero_residuals(double wrss, const Vector& y, const Vector& d) {
  const double scale = (y.array().square() / d.array()).sum();
  return wrss <= 1e-24 * std::max(scale, 1e-300);
}

// EBLUP with a Prasad-Rao estimate of A, reusing precomputed pieces.
class PrasadRaoEblup {
 public:
  PrasadRaoEblup(const Matrix& x, const Vector& d)
      : x_(x), d_(d), llt_(static_cast<Eigen::Index>(x.cols())) {
    const auto m = x.rows();
    const auto p = x.cols();
    if (m <= p) throw InsufficientData("Prasad-Rao EBLUP needs m > p");
    const auto ols = factor_weighted_normal(x, Vector::Ones(m));
    residual_maker_ = Matrix::Identity(m, m) - x * ols.solve(x.transpose());
    trace_ = (residual_maker_.diagonal().array() * d.array()).sum();
    df_ = static_cast<double>(m - p);
    synthetic_hat_ = gls_hat_matrix(x, d);
    normal_.resize(p, p);
    rhs_.resize(p);
    weights_.resize(m);
    resid_.resize(m);
  }

  double estimate_A(const Vector& y) {
    resid_.noalias() = residual_maker_ * y;
    return std::max(0.0, (resid_.squaredNorm() - trace_) / df_);
  }

  void predict(const Vector& y, Vector& out) {
    const double a = estimate_A(y);
    if (a == 0.0) {
      out.noalias() = synthetic_hat_ * y;
      return;
    }
    weights_ = (d_.array() + a).inverse().matrix();
    normal_.noalias() = x_.transpose() * weights_.asDiagonal() * x_;
    rhs_.noalias() = x_.transpose() * weights_.cwiseProduct(y);
    llt_.compute(normal_);
    if (llt_.info() != Eigen::Success) throw SingularDesign("weighted normal equations are singular");
    const Vector beta = llt_.solve(rhs_);
    out.noalias() = x_ * beta;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const double shrink = d_[i] * weights_[i];
      out[i] = (1.0 - shrink) * y[i] + shrink * out[i];
    }
  }

  const Matrix& synthetic_hat() const noexcept { return synthetic_hat_; }

 private:
  Matrix x_;
  Vector d_;
  Matrix residual_maker_;
  Matrix synthetic_hat_;
  double trace_ = 0.0;
  double df_ = 1.0;
  Matrix normal_;
  Vector rhs_;
  Vector weights_;
  Vector resid_;
  Eigen::LLT<Matrix> llt_;
};

class DirectPredictor final : public BoundPredictor {
 public:
  void predict(const Vector& y, Vector& out) override { out = y; }
};

class SyntheticPredictor final : public BoundPredictor {
 public:
  explicit SyntheticPredictor(Matrix hat) : hat_(std::move(hat)) {}
  void predict(const Vector& y, Vector& out) override { out.noalias() = hat_ * y; }

 private:
  Matrix hat_;
};

class PlainEblupPredictor final : public BoundPredictor {
 public:
  PlainEblupPredictor(const Matrix& x, const Vector& d) : eblup_(x, d) {}
  void predict(const Vector& y, Vector& out) override { eblup_.predict(y, out); }

 private:
  PrasadRaoEblup eblup_;
};

class DhmPredictor final : public BoundPredictor {
 public:
  DhmPredictor(const Matrix& x, const Vector& d, double alpha)
      : d_(d), eblup_(x, d), fitted_(x.rows()) {
    critical_ = chi_square_quantile(static_cast<double>(x.rows() - x.cols()), 1.0 - alpha);
  }

  void predict(const Vector& y, Vector& out) override {
    fitted_.noalias() = eblup_.synthetic_hat() * y;
    const double t = weighted_rss(y, fitted_, d_);
    if (t <= critical_) {
      out = fitted_;
    } else {
      eblup_.predict(y, out);
    }
  }

 private:
  Vector d_;
  PrasadRaoEblup eblup_;
  Vector fitted_;
  double critical_ = 0.0;
};

class BicPredictor final : public BoundPredictor {
 public:
  BicPredictor(const std::vector<CandidateModel>& candidates, const AreaDataset& shape)
      : shape_(shape), fitted_(static_cast<Eigen::Index>(shape.m())) {
    const double log_m = std::log(static_cast<double>(shape.m()));
    const double m = static_cast<double>(shape.m());
    const double base = -0.5 * m * 1.8378770664093454836 - 0.5 * shape.d().array().log().sum();
    for (const auto& candidate : candidates) {
      Entry e;
      e.model = candidate;
      e.penalty = static_cast<double>(candidate.dim()) * log_m;
      e.base_loglik = base;
      try {
        if (!candidate.include_random_effect) {
          e.hat = gls_hat_matrix(candidate.design(shape.x()), shape.d());
        } else {
          (void)factor_weighted_normal(candidate.design(shape.x()), shape.d().cwiseInverse());
        }
      } catch (const SingularDesign&) {
        continue;
      }
      entries_.push_back(std::move(e));
    }
    if (entries_.empty()) throw NoViableModel("no candidate model has a full-rank design");
  }

  void predict(const Vector& y, Vector& out) override {
    const Entry* best = nullptr;
    double best_bic = 0.0;
    ModelFit best_fit;
    for (const auto& e : entries_) {
      double bic = 0.0;
      ModelFit fit;
      if (!e.model.include_random_effect) {
        fitted_.noalias() = e.hat * y;
        const double wrss = weighted_rss(y, fitted_, shape_.d());
        if (zero_residuals(wrss, y, shape_.d())) continue;
        bic = -2.0 * (e.base_loglik - 0.5 * wrss) + e.penalty;
      } else {
        try {
          fit = fit_ml(e.model, shape_.with_y(y));
        } catch (const DegenerateFit&) {
          continue;
        }
        bic = -2.0 * fit.loglik + e.penalty;
      }
      if (best == nullptr || bic < best_bic ||
          (bic == best_bic && tie_break_less(e.model, best->model))) {
        best = &e;
        best_bic = bic;
        best_fit = std::move(fit);
      }
    }
    if (best == nullptr) throw NoViableModel("no candidate model could be fitted");
    if (!best->model.include_random_effect) {
      out.noalias() = best->hat * y;
    } else {
      out = eblup_all(best_fit, shape_.with_y(y));
    }
  }

 private:
  struct Entry {
    CandidateModel model;
    Matrix hat;
    double penalty = 0.0;
    double base_loglik = 0.0;
  };
  AreaDataset shape_;
  std::vector<Entry> entries_;
  Vector fitted_;
};

std::string mask_text(const CandidateModel& model) { return model.label(); }

}  // namespace

Vector PredictionProcedure::predict(const AreaDataset& data) const {
  auto bound = bind(data);
  Vector out(static_cast<Eigen::Index>(data.m()));
  bound->predict(data.y(), out);
  return out;
}

std::unique_ptr<BoundPredictor> DirectProcedure::bind(const AreaDataset&) const {
  return std::make_unique<DirectPredictor>();
}

std::string SyntheticProcedure::describe() const {
  return "synthetic regression x'beta (A=0 GLS), mean " + mask_text(mean_model_);
}

std::unique_ptr<BoundPredictor> SyntheticProcedure::bind(const AreaDataset& shape) const {
  return std::make_unique<SyntheticPredictor>(gls_hat_matrix(mean_model_.design(shape.x()), shape.d()));
}

std::string PlainEblupProcedure::describe() const {
  return "EBLUP with Prasad-Rao A, mean " + mask_text(mean_model_);
}

std::unique_ptr<BoundPredictor> PlainEblupProcedure::bind(const AreaDataset& shape) const {
  return std::make_unique<PlainEblupPredictor>(mean_model_.design(shape.x()), shape.d());
}

BicEblupProcedure::BicEblupProcedure(std::vector<CandidateModel> candidates)
    : candidates_(std::move(candidates)) {
  if (candidates_.empty()) throw DomainError("BIC procedure needs at least one candidate");
}

std::string BicEblupProcedure::describe() const {
  std::ostringstream os;
  os << "BIC over";
  for (const auto& c : candidates_) os << ' ' << c.label();
  os << ", then EBLUP (ML A)";
  return os.str();
}

std::unique_ptr<BoundPredictor> BicEblupProcedure::bind(const AreaDataset& shape) const {
  return std::make_unique<BicPredictor>(candidates_, shape);
}

DhmProcedure::DhmProcedure(CandidateModel mean_model, double alpha)
    : mean_model_(std::move(mean_model)), alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

std::string DhmProcedure::describe() const {
  std::ostringstream os;
  os << "test A=0 at alpha=" << alpha_ << ", then EBLUP (Prasad-Rao A) or synthetic, mean "
     << mask_text(mean_model_);
  return os.str();
}

std::unique_ptr<BoundPredictor> DhmProcedure::bind(const AreaDataset& shape) const {
  const Matrix x = mean_model_.design(shape.x());
  if (x.rows() <= x.cols()) throw InsufficientData("random-effect test needs m > p");
  return std::make_unique<DhmPredictor>(x, shape.d(), alpha_);
}

std::unique_ptr<PredictionProcedure> make_procedure(const std::string& name,
                                                    const CandidateModel& mean_model,
                                                    double alpha,
                                                    const std::vector<CandidateModel>& candidates) {
  if (name == "direct") return std::make_unique<DirectProcedure>();
  if (name == "synthetic") return std::make_unique<SyntheticProcedure>(mean_model);
  if (name == "eblup") return std::make_unique<PlainEblupProcedure>(mean_model);
  if (name == "dhm") return std::make_unique<DhmProcedure>(mean_model, alpha);
  if (name == "bic") return std::make_unique<BicEblupProcedure>(candidates);
  throw ValidationError("unknown prediction procedure '" + name + "'");
}

}  // namespace mcjack
