#pragma once

#include <cmath>
#include <random>

#include "mcjack/core_model.hpp"
#include "mcjack/harness.hpp"

namespace testing {

using mcjack::AreaDataset;
using mcjack::Matrix;
using mcjack::Vector;

inline Matrix ones(std::size_t m) { return Matrix::Ones(static_cast<Eigen::Index>(m), 1); }

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Random full-rank dataset: intercept plus p-1 N(0,1) columns, D in [0.5, 3].
inline AreaDataset random_dataset(std::mt19937_64& gen, std::size_t m, std::size_t p) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.5, 3.0);
  const auto mi = static_cast<Eigen::Index>(m);
  Matrix x(mi, static_cast<Eigen::Index>(p));
  Vector y(mi), d(mi);
  for (Eigen::Index i = 0; i < mi; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index c = 1; c < x.cols(); ++c) x(i, c) = n01(gen);
    d[i] = u(gen);
    y[i] = x.row(i).sum() + std::sqrt(d[i] + 1.0) * n01(gen);
  }
  return AreaDataset(y, x, d);
}

// Two-group design of the simulation study.
inline mcjack::Scenario two_group(double a, bool x2, double A, bool known_zero_A) {
  mcjack::Scenario s;
  s.a = a;
  s.include_x2 = x2;
  s.A_true = A;
  s.known_zero_A = known_zero_A;
  s.beta_true = x2 ? std::vector<double>{1.0, 1.0, 0.5} : std::vector<double>{1.0, 1.0};
  return s;
}

}  // namespace testing
