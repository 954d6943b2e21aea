#include "msm/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <numeric>
#include <thread>

#include "msm/decide.hpp"
#include "msm/rng.hpp"

namespace msm {

Cohort bootstrap_arm(const Cohort& source, std::size_t n, std::uint64_t seed,
                     std::optional<Arm> assign_arm) {
  if (source.empty()) throw std::invalid_argument("bootstrap_arm: empty source");
  CounterRng rng(seed);
  Cohort out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    PatientRecord p = source[rng.below(source.size())];
    p.patient_id += "#" + std::to_string(k + 1);
    if (assign_arm) p.arm = *assign_arm;
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

// Exit jumps of one state with per-destination probabilities.
struct StateJumps {
  std::vector<double> time;
  std::vector<std::array<double, 3>> prob;  // by out-transition slot
  std::array<int, 3> target{-1, -1, -1};
};

StateJumps build_jumps(int state, const CumulativeHazards& baseline,
                       const std::array<double, kNumTransitions>& hr, HazardSimulation& sim) {
  StateJumps sj;
  const auto& outs = kOutTransitions[static_cast<std::size_t>(state - 1)];
  std::vector<const StepCurve*> curves;
  for (int slot = 0; slot < 3; ++slot) {
    if (outs[slot] < 0) continue;
    sj.target[slot] = kTransitions[static_cast<std::size_t>(outs[slot])].to;
    curves.push_back(&baseline[static_cast<std::size_t>(outs[slot])]);
  }
  sj.time = merged_knots(curves);
  for (double t : sj.time) {
    std::array<double, 3> p{0.0, 0.0, 0.0};
    double total = 0.0;
    for (int slot = 0; slot < 3; ++slot) {
      if (outs[slot] < 0) continue;
      const auto k = static_cast<std::size_t>(outs[slot]);
      p[slot] = std::max(0.0, baseline[k].jump_at(t)) * hr[k];
      total += p[slot];
    }
    if (total > 1.0) {
      const double lost = total - 1.0;
      for (double& x : p) x /= total;
      ++sim.capped_jumps;
      sim.max_lost_mass = std::max(sim.max_lost_mass, lost);
      if (lost > 0.01)
        sim.warnings.push_back("state " + std::to_string(state) + " jump at t=" + format_number(t) +
                               " capped, lost mass " + format_number(lost));
    }
    sj.prob.push_back(p);
  }
  return sj;
}

}  // namespace

HazardSimulation simulate_from_hazards(const CumulativeHazards& baseline,
                                       const std::array<double, kNumTransitions>& transition_hr,
                                       std::size_t n, std::uint64_t seed, Arm arm,
                                       const std::string& id_prefix) {
  for (double h : transition_hr)
    if (!(h >= 0.0) || !std::isfinite(h))
      throw std::invalid_argument("simulate_from_hazards: hazard ratios must be finite and non-negative");
  HazardSimulation sim;
  const std::array<StateJumps, 3> jumps{build_jumps(1, baseline, transition_hr, sim),
                                        build_jumps(2, baseline, transition_hr, sim),
                                        build_jumps(3, baseline, transition_hr, sim)};
  CounterRng rng(seed);
  sim.cohort.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    PatientRecord p;
    p.patient_id = id_prefix + std::to_string(i + 1);
    p.arm = arm;
    int state = 1;
    double entry = 0.0;
    for (;;) {
      const StateJumps& sj = jumps[static_cast<std::size_t>(state - 1)];
      auto l = static_cast<std::size_t>(std::upper_bound(sj.time.begin(), sj.time.end(), entry) - sj.time.begin());
      int next = 0;
      double when = 0.0;
      for (; l < sj.time.size(); ++l) {
        const auto& pr = sj.prob[l];
        const double total = pr[0] + pr[1] + pr[2];
        if (total <= 0.0) continue;
        const double u = rng.uniform();
        if (u >= total) continue;
        double acc = 0.0;
        int slot = 0;
        for (; slot < 2; ++slot) {
          acc += pr[slot];
          if (u < acc) break;
        }
        next = sj.target[slot];
        when = sj.time[l];
        break;
      }
      if (next == 0) {
        p.last_contact_time = std::max(entry, sj.time.empty() ? entry : sj.time.back());
        break;
      }
      if (next == 2) p.response_time = when;
      if (next == 3) p.progression_time = when;
      if (next == 4) p.death_time = when;
      state = next;
      entry = when;
      if (state == 4) {
        p.last_contact_time = when;
        break;
      }
    }
    if (!(p.last_contact_time > 0.0)) {
      // no exit jumps at all: keep the record valid with a token follow-up
      p.last_contact_time = std::max(entry, 1.0);
    }
    sim.cohort.push_back(std::move(p));
  }
  return sim;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double replicate_hazard_ratio(const Cohort& control, const Cohort& early_sample,
                              const ScenarioConfig& config, std::uint64_t timeline_seed,
                              bool apply_policy) {
  Cohort sample = early_sample;
  if (apply_policy && config.censor_policy) sample = censor_post_progression(sample, *config.censor_policy);
  sample = apply_trial_timeline(sample, config.accrual_days, config.analysis_after_lpi_days, timeline_seed);
  Cohort pooled = control;
  pooled.insert(pooled.end(), sample.begin(), sample.end());
  const MultistateFit fit = fit_multistate(to_transition_table(pooled), config.pp_scenario);
  if (!fit.ok()) throw CoxFitError(fit.first_error());
  const StepCurve s_exp = predict_sos(fit, Arm::experimental, config.convention);
  const StepCurve s_ctl = predict_sos(fit, Arm::control, config.convention);
  return hazard_ratio_estimate(s_exp, s_ctl);
}

OCResult summarize_oc(OCMode mode, std::vector<ReplicateOutcome> replicates,
                      const std::vector<double>& targets) {
  OCResult r;
  r.mode = mode;
  r.targets = targets;
  r.replicates = std::move(replicates);
  for (const auto& o : r.replicates) {
    if (o.converged) r.hrs.push_back(o.hr);
    else ++r.failures;
  }
  if (r.hrs.empty()) throw StudyError("all replicates failed");
  r.mean_hr = std::accumulate(r.hrs.begin(), r.hrs.end(), 0.0) / static_cast<double>(r.hrs.size());
  for (const auto& t : evaluate_decision_rule(r.hrs, targets)) {
    r.fraction_below.push_back(t.fraction_below);
    r.false_rate.push_back(mode == OCMode::null_source ? t.fraction_below : t.fraction_above);
  }
  return r;
}

namespace {

void check_failures(const std::vector<ReplicateOutcome>& reps, double max_fraction,
                    const std::string& what) {
  std::size_t failed = 0;
  std::string first;
  for (const auto& o : reps) {
    if (o.converged) continue;
    if (failed++ < 3) first += "\n  replicate " + std::to_string(o.replicate) + ": " + o.error;
  }
  if (!reps.empty() && static_cast<double>(failed) > max_fraction * static_cast<double>(reps.size()))
    throw StudyError(what + ": " + std::to_string(failed) + " of " + std::to_string(reps.size()) +
                     " replicates failed" + first);
}

}  // namespace

OCResult run_oc_study(const Cohort& control_in, const Cohort* experimental_source,
                      const ScenarioConfig& config) {
  config.validate();
  const Cohort control = select_arm(control_in, Arm::control);
  if (control.empty()) throw std::invalid_argument("run_oc_study: control arm is empty");
  const Cohort& source = experimental_source ? *experimental_source : control;
  if (source.empty()) throw std::invalid_argument("run_oc_study: empty sampling source");
  const OCMode mode = experimental_source ? OCMode::experimental_source : OCMode::null_source;

  std::vector<ReplicateOutcome> reps(config.n_replicates);
  parallel_for(config.n_replicates, config.threads, [&](std::size_t r) {
    ReplicateOutcome& o = reps[r];
    o.replicate = r;
    try {
      const Cohort sample = bootstrap_arm(source, config.n_patients, derive_seed(config.master_seed, r, 1),
                                          Arm::experimental);
      o.hr = replicate_hazard_ratio(control, sample, config, derive_seed(config.master_seed, r, 2));
      o.converged = std::isfinite(o.hr) && o.hr > 0.0;
      if (!o.converged) o.error = "non-finite hazard ratio";
    } catch (const std::exception& e) {
      o.hr = std::numeric_limits<double>::quiet_NaN();
      o.converged = false;
      o.error = e.what();
    }
  });
  check_failures(reps, config.max_failure_fraction, "OC study");
  return summarize_oc(mode, std::move(reps), config.hr_targets);
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CutTimeResult cut_time_sweep(const Cohort& control_in,
                             const std::array<double, kNumTransitions>& transition_hr,
                             const ScenarioConfig& config) {
  config.validate();
  const Cohort control = select_arm(control_in, Arm::control);
  if (control.empty()) throw std::invalid_argument("cut_time_sweep: control arm is empty");
  const CumulativeHazards hazards = nelson_aalen_hazards(to_transition_table(control), Arm::control);

  const std::size_t n_cuts = config.cut_times.size();
  std::vector<std::vector<ReplicateOutcome>> grid(n_cuts, std::vector<ReplicateOutcome>(config.n_replicates));
  parallel_for(config.n_replicates, config.threads, [&](std::size_t r) {
    const HazardSimulation sim = simulate_from_hazards(hazards, transition_hr, config.n_patients,
                                                       derive_seed(config.master_seed, r, 3), Arm::experimental);
    for (std::size_t c = 0; c < n_cuts; ++c) {
      ReplicateOutcome& o = grid[c][r];
      o.replicate = r;
      try {
        const Cohort cut = censor_post_progression(sim.cohort, CensorPolicy::cut_time(config.cut_times[c]));
        o.hr = replicate_hazard_ratio(control, cut, config, derive_seed(config.master_seed, r, 2), false);
        o.converged = std::isfinite(o.hr) && o.hr > 0.0;
        if (!o.converged) o.error = "non-finite hazard ratio";
      } catch (const std::exception& e) {
        o.hr = std::numeric_limits<double>::quiet_NaN();
        o.error = e.what();
      }
    }
  });

  CutTimeResult out;
  for (std::size_t c = 0; c < n_cuts; ++c) {
    check_failures(grid[c], config.max_failure_fraction, "cut time " + format_number(config.cut_times[c]));
    CutTimePoint pt;
    pt.cut = config.cut_times[c];
    for (const auto& o : grid[c]) {
      if (o.converged) pt.hrs.push_back(o.hr);
      else ++pt.failures;
    }
    pt.n_ok = pt.hrs.size();
    if (pt.hrs.empty()) throw StudyError("cut time " + format_number(pt.cut) + ": all replicates failed");
    pt.mean_hr = std::accumulate(pt.hrs.begin(), pt.hrs.end(), 0.0) / static_cast<double>(pt.n_ok);
    pt.lo = quantile(pt.hrs, 0.025);
    pt.hi = quantile(pt.hrs, 0.975);
    out.points.push_back(std::move(pt));
  }
  return out;
}

std::string replicates_csv(const OCResult& result) {
  std::string out = "replicate,hr,converged\n";
  for (const auto& o : result.replicates)
    out += std::to_string(o.replicate) + "," + format_number(o.hr) + "," + (o.converged ? "1" : "0") + "\n";
  return out;
}

std::string oc_summary_csv(const OCResult& result) {
  const std::string mode = result.mode == OCMode::null_source ? "false_positive" : "false_negative";
  std::string out = "target,rate,mode\n";
  for (std::size_t k = 0; k < result.targets.size(); ++k)
    out += format_number(result.targets[k]) + "," + format_number(result.false_rate[k]) + "," + mode + "\n";
  return out;
}

std::string cut_time_csv(const CutTimeResult& result) {
  std::string out = "cut,mean_hr,lo,hi,n_ok,failures\n";
  for (const auto& p : result.points)
    out += format_number(p.cut) + "," + format_number(p.mean_hr) + "," + format_number(p.lo) + "," +
           format_number(p.hi) + "," + std::to_string(p.n_ok) + "," + std::to_string(p.failures) + "\n";
  return out;
}

}  // namespace msm
