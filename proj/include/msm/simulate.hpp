#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm/estimate.hpp"
#include "msm/ingest.hpp"
#include "msm/predict.hpp"

namespace msm {

struct ScenarioConfig {
  std::size_t n_patients = 40;
  std::size_t n_replicates = 1000;
  double accrual_days = 180.0;
  double analysis_after_lpi_days = 270.0;
  std::optional<CensorPolicy> censor_policy = CensorPolicy::at_pd_plus_1();
  PostProgressionScenario pp_scenario = PostProgressionScenario::shared_pp;
  // Replicate fits extrapolate control-arm baselines into tails where the
  // experimental arm has no one at risk; exp(beta) times a full-risk-set jump
  // can exceed one there, which the product-limit occupancy cannot absorb.
  Convention convention = Convention::exponential;
  std::vector<double> hr_targets{0.8, 0.85, 0.9, 1.0};
  std::array<double, kNumTransitions> transition_hr{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  std::vector<double> cut_times{30, 60, 90, 120, 150, 180, 240, 320};
  std::uint64_t master_seed = 1;
  std::size_t threads = 0;  // 0 = hardware concurrency
  double max_failure_fraction = 0.05;

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

// Named presets: "cleopatra" (accrual 180 d, analysis 270 d after last patient
// in, shared post-progression hazard, post-PD deaths censored at PD + 1),
// "oak" (one-year trial with half a year of accrual, proportional
// post-progression hazards, no extra post-PD censoring) and "cut-time"
// (accrual 365 d, analysis 180 d after last patient in, proportional).
ScenarioConfig preset(const std::string& name);

// Applies "key = value" lines ('#' starts a comment) on top of base.
ScenarioConfig parse_scenario_config(const std::string& text, ScenarioConfig base = {});
ScenarioConfig read_scenario_config(const std::string& path, ScenarioConfig base = {});
std::string describe(const ScenarioConfig& config);

// n records drawn with replacement; ids become "<source id>#<draw>".
Cohort bootstrap_arm(const Cohort& source, std::size_t n, std::uint64_t seed,
                     std::optional<Arm> assign_arm = std::nullopt);

struct HazardSimulation {
  Cohort cohort;
  std::size_t capped_jumps = 0;
  double max_lost_mass = 0.0;  // largest (total exit probability - 1) removed by capping
  std::vector<std::string> warnings;
};

// Markov clock-forward path simulation: at each jump u after the entry time
// into state i, the patient leaves via i->j with probability
// dLambda_ij(u) * HR_ij (capped so the exit total is at most 1). A patient
// outliving every exit jump of its state is censored at the last such jump.
HazardSimulation simulate_from_hazards(const CumulativeHazards& baseline,
                                       const std::array<double, kNumTransitions>& transition_hr,
                                       std::size_t n, std::uint64_t seed,
                                       Arm arm = Arm::experimental,
                                       const std::string& id_prefix = "sim");

class StudyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReplicateOutcome {
  std::size_t replicate = 0;
  double hr = 0.0;  // NaN when the replicate failed
  bool converged = false;
  std::string error;
};

enum class OCMode { null_source, experimental_source };

struct OCResult {
  OCMode mode = OCMode::null_source;
  std::vector<ReplicateOutcome> replicates;
  std::vector<double> hrs;  // successful replicates in replicate order
  double mean_hr = 0.0;
  std::vector<double> targets;
  std::vector<double> fraction_below;
  // false-positive rate (fraction below) in null mode, false-negative rate
  // (fraction not below) when sampling an active arm
  std::vector<double> false_rate;
  std::size_t failures = 0;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// One replicate of the early-phase study: the sample is censored, timed,
// pooled with the full control arm, fitted and reduced to an OS hazard ratio.
double replicate_hazard_ratio(const Cohort& control, const Cohort& early_sample,
                              const ScenarioConfig& config, std::uint64_t timeline_seed,
                              bool apply_policy = true);

// experimental_source == nullptr runs the null (false-positive) study with
// the early-phase arm resampled from the control arm.
OCResult run_oc_study(const Cohort& control, const Cohort* experimental_source,
                      const ScenarioConfig& config);

// Rates recomputed from a result's per-replicate hazard ratios.
OCResult summarize_oc(OCMode mode, std::vector<ReplicateOutcome> replicates,
                      const std::vector<double>& targets);

struct CutTimePoint {
  double cut = 0.0;
  double mean_hr = 0.0;
  double lo = 0.0;  // 2.5th percentile
  double hi = 0.0;  // 97.5th percentile
  std::size_t n_ok = 0;
  std::size_t failures = 0;
  std::vector<double> hrs;
};

struct CutTimeResult {
  std::vector<CutTimePoint> points;
};

CutTimeResult cut_time_sweep(const Cohort& control,
                             const std::array<double, kNumTransitions>& transition_hr,
                             const ScenarioConfig& config);

// Linear-interpolation quantile (type 7) of unsorted data.
double quantile(std::vector<double> values, double prob);

// replicate,hr,converged
std::string replicates_csv(const OCResult& result);
// target,rate,mode
std::string oc_summary_csv(const OCResult& result);
// cut,mean_hr,lo,hi,n_ok,failures
std::string cut_time_csv(const CutTimeResult& result);

}  // namespace msm
