#include <algorithm>
#include <cmath>
#include <numeric>

#include "msm/estimate.hpp"

namespace msm {

StepCurve kaplan_meier(std::span<const double> times, std::span<const int> status) {
  if (times.empty()) throw std::invalid_argument("kaplan_meier: empty input");
  if (times.size() != status.size())
    throw std::invalid_argument("kaplan_meier: times and status differ in length");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });

  StepCurve curve(1.0);
  double s = 1.0;
  std::size_t at_risk = times.size();
  for (std::size_t i = 0; i < order.size();) {
    const double t = times[order[i]];
    if (!(t > 0.0)) throw std::invalid_argument("kaplan_meier: times must be positive");
    std::size_t d = 0, n_t = 0;
    for (; i < order.size() && times[order[i]] == t; ++i, ++n_t)
      if (status[order[i]] != 0) ++d;
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      curve.push_back(t, s);
    }
    at_risk -= n_t;
  }
  return curve;
}

StepCurve nelson_aalen(const TransitionTable& rows, std::optional<Arm> arm) {
  std::vector<double> starts, stops, events;
  for (const auto& r : rows) {
    if (arm) {
      const bool exp = !r.covariates.empty() && r.covariates[0] != 0.0;
      if (exp != (*arm == Arm::experimental)) continue;
    }
    starts.push_back(r.tstart);
    stops.push_back(r.tstop);
    if (r.status == 1) events.push_back(r.tstop);
  }
  std::sort(starts.begin(), starts.end());
  std::sort(stops.begin(), stops.end());
  std::sort(events.begin(), events.end());

  StepCurve curve(0.0);
  double cum = 0.0;
  for (std::size_t i = 0; i < events.size();) {
    const double t = events[i];
    std::size_t d = 0;
    for (; i < events.size() && events[i] == t; ++i) ++d;
    // at risk: tstart < t <= tstop
    const auto stop_ge = stops.end() - std::lower_bound(stops.begin(), stops.end(), t);
    const auto start_ge = starts.end() - std::lower_bound(starts.begin(), starts.end(), t);
    const double y = static_cast<double>(stop_ge - start_ge);
    if (!(y > 0.0)) throw std::logic_error("nelson_aalen: empty risk set at an event time");
    cum += static_cast<double>(d) / y;
    curve.push_back(t, cum);
  }
  return curve;
}

PostProgressionScenario parse_scenario(const std::string& s) {
  if (s == "shared_pp") return PostProgressionScenario::shared_pp;
  if (s == "proportional_pp") return PostProgressionScenario::proportional_pp;
  if (s == "unrestricted") return PostProgressionScenario::unrestricted;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

std::string to_string(PostProgressionScenario s) {
  switch (s) {
    case PostProgressionScenario::shared_pp: return "shared_pp";
    case PostProgressionScenario::proportional_pp: return "proportional_pp";
    case PostProgressionScenario::unrestricted: return "unrestricted";
  }
  return "?";
}

bool MultistateFit::ok() const {
  return std::all_of(fits.begin(), fits.end(), [](const TransitionFit& f) { return f.error.empty(); });
}

std::string MultistateFit::first_error() const {
  for (std::size_t k = 0; k < kNumTransitions; ++k)
    if (!fits[k].error.empty()) return transition_label(k) + ": " + fits[k].error;
  return {};
}

MultistateFit fit_multistate(const TransitionTable& table, PostProgressionScenario scenario,
                             const CoxOptions& options) {
  MultistateFit out;
  out.scenario = scenario;
  for (const auto& r : table) out.horizon = std::max(out.horizon, r.tstop);

  static constexpr std::array<std::size_t, 1> kArm{0};
  for (std::size_t k = 0; k < kNumTransitions; ++k) {
    const TransitionTable rows = rows_for(table, k);
    const bool drop_arm = k == k34 && scenario != PostProgressionScenario::proportional_pp;
    const std::span<const std::size_t> covs =
        drop_arm ? std::span<const std::size_t>{} : std::span<const std::size_t>(kArm);
    try {
      CoxFit f = cox_fit(rows, covs, options);
      f.transition = k;
      out.fits[k].cox = std::move(f);
    } catch (const std::exception& e) {
      out.fits[k].error = e.what();
    }
    if (k == k34 && scenario == PostProgressionScenario::unrestricted) {
      out.pp_nelson_aalen[0] = nelson_aalen(rows, Arm::control);
      out.pp_nelson_aalen[1] = nelson_aalen(rows, Arm::experimental);
    }
  }
  return out;
}

std::array<StepCurve, kNumTransitions> arm_cumulative_hazards(const MultistateFit& fit, Arm arm) {
  std::array<StepCurve, kNumTransitions> out;
  const double z = arm == Arm::experimental ? 1.0 : 0.0;
  for (std::size_t k = 0; k < kNumTransitions; ++k) {
    if (k == k34 && fit.scenario == PostProgressionScenario::unrestricted) {
      out[k] = fit.pp_nelson_aalen[static_cast<std::size_t>(arm)];
      continue;
    }
    const auto& tf = fit.fits[k];
    if (!tf.error.empty() || !tf.cox)
      throw CoxFitError("transition " + transition_label(k) + " failed: " + tf.error);
    const CoxFit& c = *tf.cox;
    std::vector<double> zv(static_cast<std::size_t>(c.beta.size()), 0.0);
    if (!zv.empty()) zv[0] = z;
    out[k] = predict_cumulative_hazard(c, zv);
  }
  return out;
}

std::array<StepCurve, kNumTransitions> nelson_aalen_hazards(const TransitionTable& table, Arm arm) {
  std::array<StepCurve, kNumTransitions> out;
  for (std::size_t k = 0; k < kNumTransitions; ++k) out[k] = nelson_aalen(rows_for(table, k), arm);
  return out;
}

std::string fit_report_csv(const MultistateFit& fit) {
  std::string out = "transition,hr,ci_lo,ci_hi,p_value,n_events\n";
  const double na = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < kNumTransitions; ++k) {
    const auto& tf = fit.fits[k];
    double hr = na, lo = na, hi = na, p = na;
    int events = 0;
    if (tf.cox) {
      const CoxFit& c = *tf.cox;
      events = c.n_events;
      if (c.beta.size() > 0 && !c.degenerate && !c.aliased[0]) {
        hr = std::exp(c.beta[0]);
        std::tie(lo, hi) = c.hazard_ratio_ci(0);
        p = c.wald_p_value(0);
      }
    }
    out += transition_label(k) + "," + format_number(hr) + "," + format_number(lo) + "," +
           format_number(hi) + "," + format_number(p) + "," + std::to_string(events) + "\n";
  }
  return out;
}

}  // namespace msm
