#pragma once

// Test-only oracles and data generators. Nothing here calls the library's
// estimators or samplers, so the checks built on it stay independent.

#include <Eigen/Dense>
#include <array>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msm/ingest.hpp"
#include "msm/predict.hpp"

namespace msm::testing {

using Rates = std::array<double, kNumTransitions>;

// Continuous-time exponential competing-risks path simulation with constant
// transition intensities; administrative censoring at `followup`, plus
// optional independent exponential censoring.
Cohort constant_hazard_cohort(const Rates& rates, std::size_t n, std::mt19937_64& gen, Arm arm,
                              double followup = std::numeric_limits<double>::infinity(),
                              double censor_rate = 0.0, const std::string& prefix = "p");

// Intensity matrix Q (rows sum to 0).
Eigen::Matrix4d intensity_matrix(const Rates& rates);

// exp(Q t) by the Eigen matrix-function module.
Eigen::Matrix4d exact_transition_matrix(const Rates& rates, double t);

// Lambda_k(t) = rate_k * t on the grid h, 2h, ..., t_max.
CumulativeHazards linear_cumhaz(const Rates& rates, double h, double t_max);

// Right-censored data with a single binary covariate.
struct BinaryCoxData {
  std::vector<double> time;
  std::vector<int> status;
  std::vector<int> z;
};

// Breslow log partial likelihood computed from at-risk counts per arm.
double binary_partial_loglik(const BinaryCoxData& d, double beta);

// argmax over beta in [lo, hi] on a uniform grid of the given step.
double grid_search_beta(const BinaryCoxData& d, double lo, double hi, double step);

TransitionTable rows_from(const BinaryCoxData& d);

// Golden-section minimisation of f on [a, b].
template <class F>
double golden_min(F f, double a, double b, double tol = 1e-12) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  while (b - a > tol) {
    if (f(c) < f(d)) b = d;
    else a = c;
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return 0.5 * (a + b);
}

std::string read_text(const std::string& path);

}  // namespace msm::testing
