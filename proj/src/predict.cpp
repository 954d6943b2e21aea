#include "msm/predict.hpp"

#include <cmath>

namespace msm {
namespace {

constexpr double kJumpSlack = 1e-12;

std::vector<double> jump_grid(const CumulativeHazards& cumhaz, double horizon) {
  std::array<const StepCurve*, kNumTransitions> ptrs{};
  for (std::size_t k = 0; k < kNumTransitions; ++k) ptrs[k] = &cumhaz[k];
  std::vector<double> grid = merged_knots(ptrs);
  if (horizon > 0.0) {
    while (!grid.empty() && grid.back() > horizon) grid.pop_back();
    if (grid.empty() || grid.back() < horizon) grid.push_back(horizon);
  }
  return grid;
}

// increments[k][l] = Lambda_k(grid[l]) - Lambda_k(grid[l-1])
std::array<std::vector<double>, kNumTransitions> increments(const CumulativeHazards& cumhaz,
                                                           const std::vector<double>& grid) {
  std::array<std::vector<double>, kNumTransitions> inc;
  for (std::size_t k = 0; k < kNumTransitions; ++k) {
    const auto v = cumhaz[k].evaluate(grid);
    inc[k].resize(grid.size());
    double prev = cumhaz[k].initial_value();
    for (std::size_t l = 0; l < grid.size(); ++l) {
      inc[k][l] = v[l] - prev;
      prev = v[l];
    }
  }
  return inc;
}

void check_total(double total, int state, double t) {
  if (total > 1.0 + kJumpSlack)
    throw PredictionError("hazard increment " + format_number(total) + " > 1 out of state " +
                          std::to_string(state) + " at t=" + format_number(t) +
                          " (tiny risk set in the tail; the exponential convention tolerates this)");
}

}  // namespace

Convention parse_convention(const std::string& s) {
  if (s == "product_limit") return Convention::product_limit;
  if (s == "exponential") return Convention::exponential;
  throw std::invalid_argument("unknown convention '" + s + "'");
}

std::string to_string(Convention c) {
  return c == Convention::product_limit ? "product_limit" : "exponential";
}

double PathProbabilities::total_at(double t) const {
  return p_direct.value_at(t) + p_via_pd.value_at(t) + p_via_resp.value_at(t) + p_via_resp_pd.value_at(t);
}

PathProbabilities path_probabilities(const CumulativeHazards& cumhaz, Convention convention,
                                     double horizon) {
  PathProbabilities out;
  out.convention = convention;
  out.grid = jump_grid(cumhaz, horizon);
  const auto inc = increments(cumhaz, out.grid);
  const bool pl = convention == Convention::product_limit;
  auto stay = [pl](double total) { return pl ? 1.0 - total : std::exp(-total); };

  out.p_direct = StepCurve(0.0);
  out.p_via_pd = StepCurve(0.0);
  out.p_via_resp = StepCurve(0.0);
  out.p_via_resp_pd = StepCurve(0.0);

  double occ1 = 1.0;       // still in state 1
  double in2 = 0.0;        // in state 2, entered from 1
  double in3_direct = 0.0; // in state 3, entered from 1
  double in3_resp = 0.0;   // in state 3, entered from 2
  double dead_direct = 0.0, dead_pd = 0.0, dead_resp = 0.0, dead_resp_pd = 0.0;

  for (std::size_t l = 0; l < out.grid.size(); ++l) {
    const double t = out.grid[l];
    const double out1 = inc[k12][l] + inc[k13][l] + inc[k14][l];
    const double out2 = inc[k23][l] + inc[k24][l];
    const double out3 = inc[k34][l];
    if (pl) {
      check_total(out1, 1, t);
      check_total(out2, 2, t);
      check_total(out3, 3, t);
    }
    const double stay1 = stay(out1), stay2 = stay(out2), stay3 = stay(out3);

    // flows at this jump use occupancies just before it
    const double to2 = occ1 * inc[k12][l];
    const double to3_from1 = occ1 * inc[k13][l];
    const double to3_from2 = in2 * inc[k23][l];
    dead_direct += occ1 * inc[k14][l];
    dead_resp += in2 * inc[k24][l];
    dead_pd += in3_direct * (1.0 - stay3);
    dead_resp_pd += in3_resp * (1.0 - stay3);

    occ1 *= stay1;
    in2 = in2 * stay2 + to2;
    in3_direct = in3_direct * stay3 + to3_from1;
    in3_resp = in3_resp * stay3 + to3_from2;

    out.p_direct.push_back(t, dead_direct);
    out.p_via_pd.push_back(t, dead_pd);
    out.p_via_resp.push_back(t, dead_resp);
    out.p_via_resp_pd.push_back(t, dead_resp_pd);
  }
  return out;
}

PathProbabilities path_probabilities(const MultistateFit& fit, Arm arm, Convention convention) {
  return path_probabilities(arm_cumulative_hazards(fit, arm), convention, fit.horizon);
}

Eigen::Matrix4d TransitionProbabilityMatrix::at(double t) const {
  auto it = std::upper_bound(grid.begin(), grid.end(), t);
  if (it == grid.begin()) return Eigen::Matrix4d::Identity();
  return p[static_cast<std::size_t>(it - grid.begin()) - 1];
}

TransitionProbabilityMatrix aalen_johansen(const CumulativeHazards& cumhaz, double horizon) {
  TransitionProbabilityMatrix out;
  out.grid = jump_grid(cumhaz, horizon);
  const auto inc = increments(cumhaz, out.grid);
  Eigen::Matrix4d prod = Eigen::Matrix4d::Identity();
  out.p.reserve(out.grid.size());
  for (std::size_t l = 0; l < out.grid.size(); ++l) {
    Eigen::Matrix4d step = Eigen::Matrix4d::Identity();
    for (std::size_t k = 0; k < kNumTransitions; ++k) {
      const auto i = kTransitions[k].from - 1;
      const auto j = kTransitions[k].to - 1;
      step(i, j) += inc[k][l];
      step(i, i) -= inc[k][l];
    }
    for (int i = 0; i < 3; ++i) {
      if (step(i, i) < -kJumpSlack)
        throw PredictionError("Aalen-Johansen: negative diagonal in row " + std::to_string(i + 1) +
                              " at t=" + format_number(out.grid[l]));
    }
    prod = prod * step;
    out.p.push_back(prod);
  }
  return out;
}

TransitionProbabilityMatrix aalen_johansen(const MultistateFit& fit, Arm arm) {
  return aalen_johansen(arm_cumulative_hazards(fit, arm), fit.horizon);
}

StepCurve sos_from_paths(const PathProbabilities& paths) {
  StepCurve s(1.0);
  for (std::size_t l = 0; l < paths.grid.size(); ++l) {
    const double dead = paths.p_direct.values()[l] + paths.p_via_pd.values()[l] +
                        paths.p_via_resp.values()[l] + paths.p_via_resp_pd.values()[l];
    s.push_back(paths.grid[l], 1.0 - dead);
  }
  return s;
}

StepCurve predict_sos(const MultistateFit& fit, Arm arm, Convention convention) {
  return sos_from_paths(path_probabilities(fit, arm, convention));
}

std::string sos_curve_csv(const PathProbabilities& paths) {
  std::string out = "time,s_os,p_direct,p_via_pd,p_via_resp,p_via_resp_pd\n";
  out += "0,1,0,0,0,0\n";
  const StepCurve s = sos_from_paths(paths);
  for (std::size_t l = 0; l < paths.grid.size(); ++l) {
    out += format_number(paths.grid[l]) + "," + format_number(s.values()[l]) + "," +
           format_number(paths.p_direct.values()[l]) + "," + format_number(paths.p_via_pd.values()[l]) +
           "," + format_number(paths.p_via_resp.values()[l]) + "," +
           format_number(paths.p_via_resp_pd.values()[l]) + "\n";
  }
  return out;
}

}  // namespace msm
