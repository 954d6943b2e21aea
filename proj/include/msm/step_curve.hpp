#pragma once

#include <span>
#include <string>
#include <vector>

namespace msm {

// Right-continuous step function on [0, inf). value_at(t) is initial_value for
// t < times.front() and values[k] for times[k] <= t < times[k+1].
class StepCurve {
 public:
  StepCurve() = default;
  explicit StepCurve(double initial_value) : initial_(initial_value) {}
  StepCurve(std::vector<double> times, std::vector<double> values,
            double initial_value);

  double value_at(double t) const;
  // Value on the step immediately before t, i.e. lim_{s -> t-} value(s).
  double left_limit(double t) const;

  // Size of the jump at t (zero when t is not a knot).
  double jump_at(double t) const;

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  double initial_value() const { return initial_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  double last_time() const { return times_.empty() ? 0.0 : times_.back(); }

  // Appends a knot; t must exceed the current last time.
  void push_back(double t, double v);

  // Restriction to [0, horizon]: knots beyond horizon are dropped and a knot
  // at horizon carrying the value there is appended when missing.
  StepCurve truncated(double horizon) const;

  // Values multiplied by factor (knots unchanged).
  StepCurve scaled(double factor) const;

  // Evaluation on an arbitrary sorted grid.
  std::vector<double> evaluate(std::span<const double> grid) const;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  double initial_ = 0.0;
};

// Sorted union of the knots of several curves.
std::vector<double> merged_knots(std::span<const StepCurve* const> curves);

// "time,value" rows with a header line.
std::string to_csv(const StepCurve& curve);

// Shortest round-trip decimal representation; used by every CSV writer.
std::string format_number(double x);

}  // namespace msm
