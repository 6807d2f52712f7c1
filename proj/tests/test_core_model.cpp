#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mcjack/candidate_model.hpp"
#include "mcjack/core_model.hpp"
#include "mcjack/errors.hpp"
#include "mcjack/harness.hpp"
#include "mcjack/rng.hpp"
#include "support.hpp"

using namespace mcjack;
using testing::ones;
using testing::vec;

TEST_SUITE("core_model") {

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(AreaDataset(vec({1, 2}), ones(3), vec({1, 1, 1})), DimensionError);
  CHECK_THROWS_AS(AreaDataset(vec({1, 2}), ones(2), vec({1, 0})), DomainError);
  CHECK_THROWS_AS(AreaDataset(vec({1, NAN}), ones(2), vec({1, 1})), DomainError);
  CHECK_THROWS_AS(AreaDataset(vec({1, 2}), ones(2), vec({1, 1}), {"a", "a"}), ValidationError);

  Matrix collinear(3, 2);
  collinear << 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(AreaDataset(vec({1, 2, 3}), collinear, vec({1, 1, 1})), SingularDesign);
  // more columns than areas
  CHECK_THROWS_AS(AreaDataset(vec({1}), Matrix::Identity(1, 2), vec({1})), SingularDesign);

  AreaDataset ok(vec({1, 2, 3}), ones(3), vec({1, 1, 1}));
  CHECK(ok.m() == 3);
  CHECK(ok.p() == 1);
  CHECK(ok.area_ids() == std::vector<std::string>{"1", "2", "3"});
}

TEST_CASE("without and permuted") {
  Matrix x(4, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 4;
  AreaDataset data(vec({1, 2, 3, 4}), x, vec({1, 2, 3, 4}), {"a", "b", "c", "d"});
  auto w = data.without(1);
  CHECK(w.m() == 3);
  CHECK(w.area_ids() == std::vector<std::string>{"a", "c", "d"});
  CHECK(w.y()[1] == 3.0);
  CHECK(w.x()(2, 1) == 4.0);

  std::vector<std::size_t> order{3, 0, 2, 1};
  auto pdata = data.permuted(order);
  CHECK(pdata.area_ids() == std::vector<std::string>{"d", "a", "c", "b"});
  CHECK(pdata.d()[0] == 4.0);

  // delete-one design of rank < p
  Matrix x2(3, 2);
  x2 << 1, 0, 1, 0, 1, 1;
  AreaDataset small(vec({1, 2, 3}), x2, vec({1, 1, 1}));
  CHECK_THROWS_AS(small.without(2), SingularDesign);
}

TEST_CASE("simulate_pair zero variance") {
  AreaDataset shape(Vector::Zero(4), ones(4), vec({1, 2, 3, 4}));
  Psi psi{vec({1.0}), 0.0};
  std::vector<double> xi{0.3, -1.2, 5.0, 2.0}, eta(4, 0.0);
  auto pair = simulate_pair(psi, shape, xi, eta);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(pair.theta[i] == 1.0);
    CHECK(pair.y_sim[i] == pair.theta[i]);
  }
}

TEST_CASE("simulate_pair sqrt(A) scaling") {
  AreaDataset shape(Vector::Zero(3), ones(3), vec({0.5, 2, 9}));
  Psi psi{vec({0.0}), 4.0};
  std::vector<double> xi(3, 1.0), eta(3, 0.0);
  auto pair = simulate_pair(psi, shape, xi, eta);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(pair.theta[i] == 2.0);
    CHECK(pair.y_sim[i] == 2.0);
  }
}

TEST_CASE("simulate_pair rejects bad input") {
  AreaDataset shape(Vector::Zero(3), ones(3), vec({1, 1, 1}));
  std::vector<double> r3(3, 0.0), r2(2, 0.0);
  CHECK_THROWS_AS(simulate_pair(Psi{vec({1.0}), 0.0}, shape, r2, r3), DimensionError);
  CHECK_THROWS_AS(simulate_pair(Psi{vec({1.0, 2.0}), 0.0}, shape, r3, r3), DimensionError);
  CHECK_THROWS_AS(simulate_pair(Psi{vec({1.0}), -1.0}, shape, r3, r3), DomainError);
}

TEST_CASE("simulate_pair moments") {
  // Two-group design, psi = (1, 1, 0; A = 0.5).
  auto s = testing::two_group(4.0, true, 0.5, false);
  const auto shape = scenario_shape(s);
  Psi psi{vec({1.0, 1.0, 0.0}), 0.5};
  const std::size_t n = 100000;
  const std::size_t m = shape.m();
  const Vector mean = shape.x() * psi.beta_f;
  std::vector<double> xi(m), eta(m);
  // per-draw sample variance across areas, accumulated over draws
  double sum = 0.0, sum2 = 0.0, se = 0.0, se2 = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    draw_row(4242, k, xi, eta);
    auto pair = simulate_pair(psi, shape, xi, eta);
    for (std::size_t i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double u = pair.theta[ii] - mean[ii];
      sum += u;
      sum2 += u * u;
      const double e = (pair.y_sim[ii] - pair.theta[ii]) / std::sqrt(shape.d()[ii]);
      se += e;
      se2 += e * e;
      ++count;
    }
  }
  const double c = static_cast<double>(count);
  CHECK(sum2 / c - (sum / c) * (sum / c) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(se2 / c - (se / c) * (se / c) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("draw_standard determinism") {
  auto a = draw_standard(99, 7, 5);
  auto b = draw_standard(99, 7, 5);
  CHECK(a.xi == b.xi);
  CHECK(a.eta == b.eta);
  CHECK(a.K() == 7);
  CHECK(a.m() == 5);
  CHECK(a.seed == 99);

  auto c = draw_standard(1, 2, 3);
  auto d = draw_standard(2, 2, 3);
  CHECK(c.xi != d.xi);
  CHECK(c.eta != d.eta);

  // row k is addressable without generating the earlier rows
  std::vector<double> xi(5), eta(5);
  draw_row(99, 4, xi, eta);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(xi[static_cast<std::size_t>(i)] == a.xi(4, i));
    CHECK(eta[static_cast<std::size_t>(i)] == a.eta(4, i));
  }
}

TEST_CASE("draw_standard marginal N(0,1)") {
  auto draws = draw_standard(2024, 50000, 10);
  for (const RowMatrix* mat : {&draws.xi, &draws.eta}) {
    const double n = static_cast<double>(mat->size());
    const double mean = mat->sum() / n;
    const double var = mat->array().square().sum() / n - mean * mean;
    CHECK(std::abs(mean) < 0.004);
    CHECK(std::abs(var - 1.0) < 0.005);
  }
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, "data", 0) != derive_seed(1, "data", 1));
  CHECK(derive_seed(1, "data", 0) != derive_seed(1, "truth", 0));
  CHECK(derive_seed(1, "data", 0) != derive_seed(2, "data", 0));
  static_assert(derive_seed(5, "x") == derive_seed(5, "x", 0));
}

TEST_CASE("simulate_pair continuity in psi") {
  AreaDataset shape(Vector::Zero(3), ones(3), vec({1, 2, 3}));
  std::vector<double> xi{0.4, -0.2, 1.1}, eta{0.3, 0.9, -1.5};
  auto base = simulate_pair(Psi{vec({1.0}), 0.5}, shape, xi, eta);
  auto near = simulate_pair(Psi{vec({1.0 + 1e-9}), 0.5 + 1e-9}, shape, xi, eta);
  CHECK((base.y_sim - near.y_sim).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("candidate models") {
  auto cands = enumerate_candidates(3);
  CHECK(cands.size() == 8);
  for (const auto& c : cands) CHECK(c.covariate_mask[0]);
  auto full = CandidateModel::full(3, true);
  CHECK(full.dim() == 4);
  CHECK(full.label() == "{0,1,2}+RE");
  CHECK(CandidateModel{{true, false, true}, false}.label() == "{0,2}");

  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  auto sub = CandidateModel{{true, false, true}, false}.design(x);
  CHECK(sub.cols() == 2);
  CHECK(sub(1, 1) == 6.0);
  CHECK_THROWS_AS(CandidateModel({{true, false}, false}).design(x), DimensionError);
  CHECK_THROWS_AS(CandidateModel({{false, false, false}, false}).design(x), DimensionError);
}

}  // TEST_SUITE
