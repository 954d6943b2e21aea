#include "msm/step_curve.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace msm {

StepCurve::StepCurve(std::vector<double> times, std::vector<double> values,
                     double initial_value)
    : times_(std::move(times)), values_(std::move(values)), initial_(initial_value) {
  if (times_.size() != values_.size())
    throw std::invalid_argument("StepCurve: times and values differ in length");
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (!(times_[k] >= 0.0) || (k > 0 && !(times_[k] > times_[k - 1])))
      throw std::invalid_argument("StepCurve: times must be strictly increasing and non-negative");
  }
}

double StepCurve::value_at(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepCurve::left_limit(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepCurve::jump_at(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.end() || *it != t) return 0.0;
  auto k = static_cast<std::size_t>(it - times_.begin());
  return values_[k] - (k == 0 ? initial_ : values_[k - 1]);
}

void StepCurve::push_back(double t, double v) {
  if (!times_.empty() && !(t > times_.back()))
    throw std::invalid_argument("StepCurve::push_back: time not increasing");
  times_.push_back(t);
  values_.push_back(v);
}

StepCurve StepCurve::truncated(double horizon) const {
  StepCurve out(initial_);
  for (std::size_t k = 0; k < times_.size() && times_[k] <= horizon; ++k)
    out.push_back(times_[k], values_[k]);
  if (horizon > 0.0 && (out.empty() || out.last_time() < horizon))
    out.push_back(horizon, value_at(horizon));
  return out;
}

StepCurve StepCurve::scaled(double factor) const {
  StepCurve out = *this;
  out.initial_ *= factor;
  for (double& v : out.values_) v *= factor;
  return out;
}

std::vector<double> StepCurve::evaluate(std::span<const double> grid) const {
  std::vector<double> out;
  out.reserve(grid.size());
  std::size_t k = 0;
  double current = initial_;
  for (double t : grid) {
    while (k < times_.size() && times_[k] <= t) current = values_[k++];
    out.push_back(current);
  }
  return out;
}

std::vector<double> merged_knots(std::span<const StepCurve* const> curves) {
  std::vector<double> grid;
  for (const StepCurve* c : curves)
    grid.insert(grid.end(), c->times().begin(), c->times().end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw std::runtime_error("format_number failed");
  return std::string(buf, end);
}

std::string to_csv(const StepCurve& curve) {
  std::string out = "time,value\n";
  out += "0," + format_number(curve.initial_value()) + "\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (curve.times()[k] == 0.0) continue;
    out += format_number(curve.times()[k]) + "," + format_number(curve.values()[k]) + "\n";
  }
  return out;
}

}  // namespace msm
