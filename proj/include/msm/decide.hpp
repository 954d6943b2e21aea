#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm/step_curve.hpp"

namespace msm {

struct ExpRateFit {
  double rate = 0.0;  // per day
  double sse = 0.0;   // weighted residual sum of squares on the log scale
  double t_max = 0.0;
};

class DecisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Weighted through-origin least squares of log S(t_k) on -t_k, each step
// weighted by its width on [0, t_max]:
//   rate = -sum w_k t_k log S(t_k) / sum w_k t_k^2.
// t_max defaults to the curve's last knot. Values are floored at 1e-12.
ExpRateFit fit_exponential_rate(const StepCurve& survival, double t_max = 0.0);

// Ratio of exponential rates after restricting both curves to their common
// horizon.
double hazard_ratio_estimate(const StepCurve& s_experimental, const StepCurve& s_control);

struct DecisionOutcome {
  double hr = 0.0;
  double target = 0.0;
  bool go = false;  // hr < target
};

DecisionOutcome decide(double hr, double target);

struct TargetRate {
  double target = 0.0;
  double fraction_below = 0.0;  // #{hr < target} / N
  double fraction_above = 0.0;  // 1 - fraction_below (ties count here)
};

std::vector<TargetRate> evaluate_decision_rule(std::span<const double> hrs,
                                               std::span<const double> targets);

// {"hr":..,"targets":[..],"rates":[..],"go":[..]} for a single observed HR.
std::string decision_report_json(double hr, std::span<const double> targets);

}  // namespace msm
