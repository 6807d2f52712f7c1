#include "doctest.h"

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "mcjack/errors.hpp"
#include "mcjack/estimation.hpp"
#include "mcjack/harness.hpp"
#include "mcjack/monte_carlo_jackknife.hpp"
#include "mcjack/procedures.hpp"
#include "mcjack/selection.hpp"
#include "support.hpp"

using namespace mcjack;
using testing::ones;
using testing::vec;

namespace {

AreaDataset simulate_on(const AreaDataset& shape, const Psi& psi, std::uint64_t seed, std::uint64_t r) {
  std::vector<double> xi(shape.m()), eta(shape.m());
  draw_row(seed, r, xi, eta);
  return shape.with_y(simulate_pair(psi, shape, xi, eta).y_sim);
}

// Predicts theta + c by replaying the same draws the Monte-Carlo loop uses.
class TruthPlusConstant final : public BoundPredictor {
 public:
  TruthPlusConstant(const Psi& psi, const AreaDataset& shape, const StandardDraws& draws, double c)
      : psi_(psi), shape_(shape), draws_(draws), c_(c) {}
  void predict(const Vector&, Vector& out) override {
    const auto r = static_cast<Eigen::Index>(k_++);
    const Vector mean = shape_.x() * psi_.beta_f;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = mean[i] + std::sqrt(psi_.A) * draws_.xi(r, i) + c_;
  }

 private:
  Psi psi_;
  const AreaDataset& shape_;
  const StandardDraws& draws_;
  double c_;
  std::size_t k_ = 0;
};

// x_i' beta with a fixed, known beta.
class KnownMean final : public BoundPredictor {
 public:
  explicit KnownMean(Vector mean) : mean_(std::move(mean)) {}
  void predict(const Vector&, Vector& out) override { out = mean_; }

 private:
  Vector mean_;
};

// Best predictor with psi known.
class KnownPsiBlup final : public PredictionProcedure {
 public:
  explicit KnownPsiBlup(Psi psi) : psi_(std::move(psi)) {}
  std::string name() const override { return "blup"; }
  std::string describe() const override { return "known psi"; }
  std::unique_ptr<BoundPredictor> bind(const AreaDataset& shape) const override {
    struct Bound final : BoundPredictor {
      Vector mean, shrink;
      void predict(const Vector& y, Vector& out) override {
        out = (1.0 - shrink.array()) * y.array() + shrink.array() * mean.array();
      }
    };
    auto b = std::make_unique<Bound>();
    b->mean = shape.x() * psi_.beta_f;
    b->shrink = shape.d().array() / (shape.d().array() + psi_.A);
    return b;
  }

 private:
  Psi psi_;
};

Scenario design41(std::size_t m) {
  auto s = testing::two_group(4.0, true, 0.0, true);
  s.m = m;
  s.beta_true = {1.0, 1.0, 0.0};
  s.x2_source = CovariateSource::Seeded;
  s.seed = 5;
  return s;
}

}  // namespace

TEST_SUITE("monte_carlo_jackknife") {

TEST_CASE("m_estimate") {
  Matrix x(5, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 4, 1, -1;
  const Vector beta = vec({0.7, -0.3});
  AreaDataset exact(x * beta, x, vec({1, 2, 1, 3, 1}));
  const Psi psi = m_estimate(exact);
  CHECK((psi.beta_f - beta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(psi.A == 0.0);

  std::mt19937_64 gen(41);
  const auto data = testing::random_dataset(gen, 11, 3);
  std::vector<std::size_t> order{10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
  const Psi a = m_estimate(data);
  const Psi b = m_estimate(data.permuted(order));
  CHECK(a.A == doctest::Approx(b.A).epsilon(1e-12));
  CHECK((a.beta_f - b.beta_f).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.A == prasad_rao_A(data.x(), data.d(), data.y()));

  const Psi known = m_estimate(data, PsiEstimator::KnownZeroA);
  CHECK(known.A == 0.0);
  CHECK(known.beta_f == gls_beta(data.x(), data.d(), 0.0, data.y()));

  // m == p: no residual degrees of freedom, A is set to zero
  AreaDataset square(vec({1, 2}), Matrix::Identity(2, 2), vec({1, 1}));
  CHECK(m_estimate(square).A == 0.0);
  AreaDataset wide(vec({1}), Matrix::Ones(1, 1), vec({1}));
  CHECK(m_estimate(wide).beta_f[0] == 1.0);
}

TEST_CASE("m_estimate delegates to the moment estimator") {
  auto s = testing::two_group(4.0, true, 1.0, false);
  const auto shape = scenario_shape(s);
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto data = simulate_on(shape, scenario_truth(s), 61, r);
    CHECK(m_estimate(data).A == prasad_rao_A(data.x(), data.d(), data.y()));
  }
}

TEST_CASE("jackknife_set") {
  AreaDataset same(Vector::Constant(6, 2.5), ones(6), Vector::Constant(6, 1.5));
  const auto set = jackknife_set(same);
  for (const auto& p : set.psi_minus) {
    CHECK(p.A == set.psi_hat.A);
    CHECK(p.beta_f[0] == doctest::Approx(set.psi_hat.beta_f[0]).epsilon(1e-15));
  }

  const Vector y = vec({1.0, 4.0, -2.0, 0.5, 3.0});
  const Vector d = vec({1.0, 2.0, 0.5, 4.0, 1.0});
  AreaDataset data(y, ones(5), d);
  const auto jk = jackknife_set(data, PsiEstimator::KnownZeroA);
  REQUIRE(jk.psi_minus.size() == 5);
  for (Eigen::Index j = 0; j < 5; ++j) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i) {
      if (i == j) continue;
      num += y[i] / d[i];
      den += 1.0 / d[i];
    }
    CHECK(jk.psi_minus[static_cast<std::size_t>(j)].beta_f[0] == doctest::Approx(num / den).epsilon(1e-14));
  }

  // deleting area 3 leaves the indicator column all zero
  Matrix x(4, 2);
  x << 1, 0, 1, 0, 1, 0, 1, 1;
  AreaDataset fragile(vec({1, 2, 3, 4}), x, vec({1, 1, 1, 1}));
  try {
    jackknife_set(fragile);
    FAIL("expected JackknifeRankError");
  } catch (const JackknifeRankError& e) {
    CHECK(e.area() == 3);
  }

  AreaDataset tiny(vec({1, 2}), Matrix::Identity(2, 2), vec({1, 1}));
  CHECK_THROWS_AS(jackknife_set(tiny), InsufficientData);
}

TEST_CASE("jackknife spread shrinks like 1/m") {
  auto gap = [](std::size_t m) {
    const auto s = design41(m);
    const auto shape = scenario_shape(s);
    const Psi psi = scenario_truth(s);
    double total = 0.0;
    const int reps = 300;
    for (int r = 0; r < reps; ++r) {
      const auto jk = jackknife_set(simulate_on(shape, psi, 71, static_cast<std::uint64_t>(r)),
                                    PsiEstimator::KnownZeroA);
      double worst = 0.0;
      for (const auto& p : jk.psi_minus) {
        worst = std::max(worst, (p.beta_f - jk.psi_hat.beta_f).cwiseAbs().maxCoeff());
      }
      total += worst;
    }
    return total / reps;
  };
  const double ratio = gap(20) / gap(40);
  MESSAGE("max delete-one gap ratio m=20 / m=40: " << ratio);
  CHECK(ratio >= 1.3);
  CHECK(ratio <= 3.0);
}

TEST_CASE("truncate_log") {
  const TruncationConfig cfg;
  CHECK(cfg.bound(25) == 10.0);
  CHECK(truncate_log(-1.7, 25, cfg) == -1.7);
  CHECK(truncate_log(-1e9, 25, cfg) == -10.0);
  CHECK(truncate_log(1e9, 25, cfg) == 10.0);
  CHECK(truncate_log(-std::numeric_limits<double>::infinity(), 25, cfg) == -10.0);
  CHECK_THROWS_AS(truncate_log(std::nan(""), 25, cfg), DomainError);
  CHECK_THROWS_AS(validate(TruncationConfig{0.0, 0.5}), DomainError);
  CHECK_THROWS_AS(validate(TruncationConfig{1.0, -1.0}), DomainError);
}

TEST_CASE("jackknife_combine") {
  CHECK(jackknife_combine(-1.5, std::vector<double>(10, -1.5)) == -1.5);
  // b0 - (m-1)/m * sum(b_j - b0)
  CHECK(jackknife_combine(1.0, {2.0, 0.0, 3.0, 1.0}) == doctest::Approx(1.0 - 0.75 * 2.0));
  // the correction is not clamped again
  const TruncationConfig cfg;
  const double band = cfg.bound(9);
  CHECK(jackknife_combine(band, std::vector<double>(9, band - 1.0)) == doctest::Approx(band + 8.0));
}

TEST_CASE("mc_log_mspe: truth plus a constant") {
  auto s = design41(20);
  const auto shape = scenario_shape(s);
  const Psi psi{vec({1.0, 1.0, 0.0}), 0.7};
  for (std::size_t K : {1u, 7u, 300u}) {
    const auto draws = draw_standard(3, K, shape.m());
    for (double c : {0.5, -3.0}) {
      TruthPlusConstant pred(psi, shape, draws, c);
      const Vector v = mc_log_mspe_all(psi, pred, shape, draws);
      for (Eigen::Index i = 0; i < v.size(); ++i) CHECK(v[i] == doctest::Approx(2.0 * std::log(std::abs(c))).epsilon(1e-12));
    }
  }
}

TEST_CASE("mc_log_mspe converges for the direct and known-mean predictors") {
  auto s = design41(20);
  const auto shape = scenario_shape(s);
  const Psi psi{vec({1.0, 1.0, 0.0}), 0.5};
  const auto draws = draw_standard(17, 100000, shape.m());

  const Vector direct = mc_log_mspe_all(psi, DirectProcedure{}, shape, draws);
  for (Eigen::Index i = 0; i < direct.size(); ++i) {
    CHECK(std::abs(direct[i] - std::log(shape.d()[i])) < 0.02);
  }
  CHECK(shape.d()[15] == 4.0);
  CHECK(std::abs(mc_log_mspe(psi, DirectProcedure{}, 15, shape, draws) - std::log(4.0)) < 0.02);

  KnownMean known(shape.x() * psi.beta_f);
  const Vector synth = mc_log_mspe_all(psi, known, shape, draws);
  for (Eigen::Index i = 0; i < synth.size(); ++i) CHECK(std::abs(synth[i] - std::log(0.5)) < 0.02);
}

TEST_CASE("mc_log_mspe guards") {
  AreaDataset shape(Vector::Zero(3), ones(3), vec({1, 1, 1}));
  const auto draws = draw_standard(1, 5, 3);
  const Psi psi{vec({0.0}), 0.0};
  // A = 0 and a known mean: every error is exactly zero
  KnownMean zero(Vector::Zero(3));
  const Vector v = mc_log_mspe_all(psi, zero, shape, draws);
  CHECK(std::isinf(v[0]));
  CHECK(v[0] < 0.0);

  const auto wrong = draw_standard(1, 5, 4);
  CHECK_THROWS_AS(mc_log_mspe_all(psi, DirectProcedure{}, shape, wrong), DimensionError);
  CHECK_THROWS_AS(mc_log_mspe(psi, DirectProcedure{}, 3, shape, draws), DimensionError);
  StandardDraws empty;
  empty.xi.resize(0, 3);
  empty.eta.resize(0, 3);
  CHECK_THROWS_AS(mc_log_mspe_all(psi, DirectProcedure{}, shape, empty), DomainError);
}

TEST_CASE("McJack of a psi-free log-MSPE is that value") {
  // The direct estimator's errors are the sampling errors alone, so every
  // jackknife evaluation sees the same b.
  std::mt19937_64 gen(42);
  const auto data = testing::random_dataset(gen, 12, 2);
  const auto res = mcjack_estimate(data, DirectProcedure{}, 500, 9);
  const auto draws = draw_standard(9, 500, 12);
  const Vector b = mc_log_mspe_all(Psi{vec({0.0, 0.0}), 1.0}, DirectProcedure{}, data, draws);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& a = res.areas[i];
    // equal up to the rounding of (theta + e) - theta
    CHECK(a.log_mspe_mcjack == doctest::Approx(b[static_cast<Eigen::Index>(i)]).epsilon(1e-10));
    CHECK(a.log_mspe_bootstrap == doctest::Approx(a.log_mspe_mcjack).epsilon(1e-10));
    for (double bj : a.b_hat_minus) CHECK(bj == doctest::Approx(a.log_mspe_bootstrap).epsilon(1e-12));
  }
}

TEST_CASE("mcjack_estimate clamps the components only") {
  auto s = design41(20);
  const auto shape = scenario_shape(s);
  const auto data = simulate_on(shape, scenario_truth(s), 8, 0);
  McjackOptions opt;
  opt.estimator = PsiEstimator::KnownZeroA;
  opt.truncation = TruncationConfig{0.01, 0.5};
  const double band = opt.truncation.bound(20);
  const auto res = mcjack_estimate(data, DirectProcedure{}, 200, 4, opt);
  CHECK(res.truncation_hits > 0);
  for (const auto& a : res.areas) {
    CHECK(std::abs(a.log_mspe_bootstrap) <= band);
    for (double b : a.b_hat_minus) CHECK(std::abs(b) <= band);
  }
  // direct estimator: second-half areas (D = 4) clamp to the upper band
  CHECK(res.areas[15].log_mspe_bootstrap == band);
  CHECK(res.areas[15].b_tilde_hat > band);
  CHECK(res.areas[15].truncation_hits == 21);
}

TEST_CASE("mcjack_estimate bookkeeping") {
  auto s = design41(20);
  const auto shape = scenario_shape(s);
  const auto data = simulate_on(shape, scenario_truth(s), 8, 1);
  const auto proc = scenario_procedure(s);
  McjackOptions opt;
  opt.estimator = PsiEstimator::KnownZeroA;
  const auto res = mcjack_estimate(data, *proc, 100, 12, opt);
  CHECK(res.K == 100);
  CHECK(res.seed == 12);
  CHECK(res.areas.size() == 20);
  CHECK(res.jackknife.psi_minus.size() == 20);
  CHECK(res.warnings.size() == 1);  // K < m^2
  CHECK(res.truncation_hits == 0);
  for (const auto& a : res.areas) {
    CHECK(a.b_hat_minus.size() == 20);
    CHECK(a.log_mspe_mcjack == jackknife_combine(a.log_mspe_bootstrap, a.b_hat_minus));
  }
  const auto one = mcjack_estimate(data, *proc, 7, 100, 12, opt);
  CHECK(one.log_mspe_mcjack == res.areas[7].log_mspe_mcjack);
  CHECK_THROWS_AS(mcjack_estimate(data, *proc, 0, 12, opt), DomainError);
  CHECK(mcjack_estimate(data, *proc, 400, 12, opt).warnings.empty());
}

TEST_CASE("mcjack_estimate is bit-identical across thread counts") {
  auto s = testing::two_group(4.0, true, 0.5, false);
  const auto shape = scenario_shape(s);
  const auto data = simulate_on(shape, scenario_truth(s), 19, 3);
  for (const auto& proc : {scenario_procedure(s),
                           std::unique_ptr<PredictionProcedure>(std::make_unique<DhmProcedure>(
                               CandidateModel::full(3, false), 0.05))}) {
    std::vector<McjackResult> runs;
    for (std::size_t threads : {1u, 2u, 8u}) {
      McjackOptions opt;
      opt.threads = threads;
      runs.push_back(mcjack_estimate(data, *proc, 300, 77, opt));
    }
    for (std::size_t t = 1; t < runs.size(); ++t) {
      for (std::size_t i = 0; i < 20; ++i) {
        CHECK(runs[t].areas[i].log_mspe_mcjack == runs[0].areas[i].log_mspe_mcjack);
        CHECK(runs[t].areas[i].b_hat_minus == runs[0].areas[i].b_hat_minus);
      }
    }
  }
}

TEST_CASE("empirical truth equals mc_log_mspe on the same draws") {
  auto s = testing::two_group(4.0, true, 1.0, false);
  const auto shape = scenario_shape(s);
  const Psi psi = scenario_truth(s);
  const auto proc = scenario_procedure(s);
  const auto draws = draw_standard(123, 250, shape.m());
  const Vector mc = mc_log_mspe_all(psi, *proc, shape, draws);
  const auto truth = empirical_true_log_mspe_all(psi, *proc, shape, 250, 123);
  CHECK(truth.log_mspe == mc);
  CHECK(truth.N == 250);
  CHECK(empirical_true_log_mspe(psi, *proc, 4, shape, 250, 123) == mc[4]);
  for (Eigen::Index i = 0; i < 20; ++i) CHECK(truth.std_error[i] > 0.0);
}

TEST_CASE("best-predictor lower bound") {
  auto s = testing::two_group(4.0, true, 1.0, false);
  const auto shape = scenario_shape(s);
  const Psi psi = scenario_truth(s);
  const std::size_t N = 100000;
  const auto blup = empirical_true_log_mspe_all(psi, KnownPsiBlup(psi), shape, N, 5);
  const auto eb = empirical_true_log_mspe_all(psi, PlainEblupProcedure(CandidateModel::full(3, true)), shape, N, 5);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const double d = shape.d()[i];
    const double g1 = std::log(psi.A * d / (psi.A + d));
    CHECK(blup.log_mspe[i] >= g1 - 3.0 * blup.std_error[i]);
    CHECK(std::abs(blup.log_mspe[i] - g1) < 4.0 * blup.std_error[i]);
    CHECK(eb.log_mspe[i] >= g1 - 3.0 * eb.std_error[i]);
  }
}

TEST_CASE("bound predictors agree with the direct implementations") {
  auto s = testing::two_group(4.0, true, 0.5, false);
  const auto shape = scenario_shape(s);
  const Psi psi = scenario_truth(s);
  const auto cands = enumerate_candidates(3);
  const auto full = CandidateModel::full(3, false);
  BicEblupProcedure bic(cands);
  PlainEblupProcedure plain(CandidateModel::full(3, true));
  DhmProcedure dhm(full, 0.05);
  SyntheticProcedure synth(full);
  auto bb = bic.bind(shape);
  auto bp = plain.bind(shape);
  auto bd = dhm.bind(shape);
  auto bs = synth.bind(shape);
  Vector out(20);
  for (std::uint64_t r = 0; r < 60; ++r) {
    const auto data = simulate_on(shape, psi, 97, r);

    const auto chosen = select_bic(cands, data).chosen;
    const Vector bic_ref = eblup_all(fit_ml(chosen, data), data);
    bb->predict(data.y(), out);
    CHECK((out - bic_ref).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((bic.predict(data) - bic_ref).cwiseAbs().maxCoeff() < 1e-9);

    const Vector plain_ref = eblup_all(fit_prasad_rao(CandidateModel::full(3, true), data), data);
    bp->predict(data.y(), out);
    CHECK((out - plain_ref).cwiseAbs().maxCoeff() < 1e-10);

    const bool rejected = dhm_test(data, full, 0.05).test->rejected;
    bd->predict(data.y(), out);
    CHECK((out - (rejected ? plain_ref : Vector(data.x() * gls_beta(data.x(), data.d(), 0.0, data.y()))))
              .cwiseAbs()
              .maxCoeff() < 1e-10);

    bs->predict(data.y(), out);
    CHECK((out - data.x() * gls_beta(data.x(), data.d(), 0.0, data.y())).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("procedure registry") {
  const auto full = CandidateModel::full(2, false);
  const auto cands = enumerate_candidates(2);
  for (const char* name : {"direct", "synthetic", "eblup", "dhm", "bic"}) {
    CHECK(make_procedure(name, full, 0.05, cands)->name() == name);
  }
  CHECK_THROWS_AS(make_procedure("lasso", full, 0.05, cands), ValidationError);
}

}  // TEST_SUITE
