#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm/estimate.hpp"
#include "msm/step_curve.hpp"

namespace msm {

// How occupancy between jumps is computed. product_limit multiplies
// (1 - dLambda) over the jumps and agrees with Aalen-Johansen; exponential
// uses exp(-Lambda) exactly as in the integral formulas.
enum class Convention { product_limit, exponential };

Convention parse_convention(const std::string& s);
std::string to_string(Convention c);

// A hazard increment too large for a probability (total exit > 1 at a jump).
class PredictionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using CumulativeHazards = std::array<StepCurve, kNumTransitions>;

// Probabilities of reaching death by t along each of the four paths.
struct PathProbabilities {
  std::vector<double> grid;
  StepCurve p_direct;       // 1 -> 4
  StepCurve p_via_pd;       // 1 -> 3 -> 4
  StepCurve p_via_resp;     // 1 -> 2 -> 4
  StepCurve p_via_resp_pd;  // 1 -> 2 -> 3 -> 4
  Convention convention = Convention::product_limit;

  double total_at(double t) const;
};

// Stieltjes sums over the merged jump grid with the occupancy factor taken at
// the left limit of each jump. Nested path integrals are evaluated by
// carrying the probability mass sitting in each intermediate state along each
// path, which is exact because the inner survival factors are products over
// disjoint intervals. horizon, when larger than the last jump, is appended to
// the grid.
PathProbabilities path_probabilities(const CumulativeHazards& cumhaz, Convention convention,
                                     double horizon = 0.0);
PathProbabilities path_probabilities(const MultistateFit& fit, Arm arm,
                                     Convention convention = Convention::product_limit);

struct TransitionProbabilityMatrix {
  std::vector<double> grid;
  std::vector<Eigen::Matrix4d> p;  // P(0, grid[k])

  // P(0, t); identity before the first jump.
  Eigen::Matrix4d at(double t) const;
};

// Product-limit P(0,t) = prod_{u <= t} (I + dA(u)).
TransitionProbabilityMatrix aalen_johansen(const CumulativeHazards& cumhaz, double horizon = 0.0);
TransitionProbabilityMatrix aalen_johansen(const MultistateFit& fit, Arm arm);

// S_OS = 1 - sum of the four path probabilities.
StepCurve sos_from_paths(const PathProbabilities& paths);
StepCurve predict_sos(const MultistateFit& fit, Arm arm,
                      Convention convention = Convention::product_limit);

// time,s_os,p_direct,p_via_pd,p_via_resp,p_via_resp_pd
std::string sos_curve_csv(const PathProbabilities& paths);

}  // namespace msm
