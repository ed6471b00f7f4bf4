#pragma once

#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace eqhs::test {

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline Eigen::VectorXd uniform_soc(std::mt19937_64& rng, int n, double lo = 0.4,
                                   double hi = 0.8) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = dist(rng);
  return x;
}

// Initial SOCs of the 8-cell equalizer-removal experiments.
inline Eigen::VectorXd removal_experiment_x0() {
  return vec({0.3337, 0.6573, 0.6210, 0.6978, 0.2975, 0.7487, 0.6410, 0.5395});
}

}  // namespace eqhs::test
