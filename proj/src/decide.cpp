#include "msm/decide.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"

namespace msm {

ExpRateFit fit_exponential_rate(const StepCurve& survival, double t_max) {
  if (t_max <= 0.0) t_max = survival.last_time();
  const StepCurve s = survival.truncated(t_max);

  // steps [t_k, t_{k+1}) with value S(t_k); the initial step starts at 0
  std::vector<double> left{0.0}, value{s.initial_value()};
  for (std::size_t k = 0; k < s.size(); ++k) {
    left.push_back(s.times()[k]);
    value.push_back(s.values()[k]);
  }
  bool informative = false;
  double num = 0.0, den = 0.0;
  std::vector<double> logs(left.size()), weights(left.size());
  for (std::size_t k = 0; k < left.size(); ++k) {
    const double right = k + 1 < left.size() ? left[k + 1] : t_max;
    weights[k] = std::max(0.0, right - left[k]);
    logs[k] = std::log(std::max(value[k], 1e-12));
    if (value[k] < 1.0 && weights[k] > 0.0) informative = true;
    num += weights[k] * left[k] * logs[k];
    den += weights[k] * left[k] * left[k];
  }
  if (!informative || !(den > 0.0))
    throw DecisionError("fit_exponential_rate: survival curve never drops below 1 on its horizon");
  ExpRateFit fit;
  fit.rate = -num / den;
  fit.t_max = t_max;
  for (std::size_t k = 0; k < left.size(); ++k) {
    const double r = logs[k] + fit.rate * left[k];
    fit.sse += weights[k] * r * r;
  }
  if (!(fit.rate > 0.0) || !std::isfinite(fit.rate))
    throw DecisionError("fit_exponential_rate: non-positive rate");
  return fit;
}

double hazard_ratio_estimate(const StepCurve& s_experimental, const StepCurve& s_control) {
  const double horizon = std::min(s_experimental.last_time(), s_control.last_time());
  if (!(horizon > 0.0)) throw DecisionError("hazard_ratio_estimate: empty common horizon");
  const ExpRateFit e = fit_exponential_rate(s_experimental, horizon);
  const ExpRateFit c = fit_exponential_rate(s_control, horizon);
  return e.rate / c.rate;
}

DecisionOutcome decide(double hr, double target) { return {hr, target, hr < target}; }

std::vector<TargetRate> evaluate_decision_rule(std::span<const double> hrs,
                                               std::span<const double> targets) {
  if (hrs.empty() || targets.empty())
    throw std::invalid_argument("evaluate_decision_rule: empty input");
  std::vector<TargetRate> out;
  const double n = static_cast<double>(hrs.size());
  for (double target : targets) {
    const auto below = std::count_if(hrs.begin(), hrs.end(), [target](double h) { return h < target; });
    const double fb = static_cast<double>(below) / n;
    out.push_back({target, fb, 1.0 - fb});
  }
  return out;
}

std::string decision_report_json(double hr, std::span<const double> targets) {
  nlohmann::ordered_json j;
  j["hr"] = hr;
  j["targets"] = std::vector<double>(targets.begin(), targets.end());
  std::vector<double> rates;
  std::vector<bool> go;
  const std::vector<double> one{hr};
  for (const auto& r : evaluate_decision_rule(one, targets)) rates.push_back(r.fraction_below);
  for (double t : targets) go.push_back(decide(hr, t).go);
  j["rates"] = rates;
  j["go"] = go;
  return j.dump(2) + "\n";
}

}  // namespace msm
