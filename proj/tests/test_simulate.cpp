#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "msm/decide.hpp"
#include "msm/simulate.hpp"
#include "support.hpp"

using namespace msm;

namespace {

const testing::Rates kRates{0.004, 0.002, 0.001, 0.003, 0.001, 0.004};

Cohort control_cohort(std::uint64_t seed, std::size_t n = 200) {
  std::mt19937_64 gen(seed);
  return testing::constant_hazard_cohort(kRates, n, gen, Arm::control, 900.0, 0.0, "c");
}

}  // namespace

TEST_CASE("bootstrap_arm draws with replacement from the source") {
  const Cohort src = control_cohort(1, 10);
  const Cohort a = bootstrap_arm(src, 10000, 7, Arm::experimental);
  CHECK(a.size() == 10000);
  std::map<std::string, int> counts;
  for (const auto& p : a) {
    CHECK(p.arm == Arm::experimental);
    const std::string id = p.patient_id.substr(0, p.patient_id.find('#'));
    counts[id]++;
    const auto it = std::find_if(src.begin(), src.end(), [&](const auto& s) { return s.patient_id == id; });
    REQUIRE(it != src.end());
    CHECK(it->progression_time == p.progression_time);
    CHECK(it->last_contact_time == p.last_contact_time);
  }
  // each record is expected 1000 times with sd 30
  for (const auto& [id, k] : counts) CHECK(std::abs(k - 1000) < 150);
  CHECK(bootstrap_arm(src, 50, 7) == bootstrap_arm(src, 50, 7));
  CHECK_FALSE(bootstrap_arm(src, 50, 7) == bootstrap_arm(src, 50, 8));
  CHECK(bootstrap_arm(src, 5, 7)[0].arm == src[0].arm);
}

TEST_CASE("hazard simulation reproduces competing risks and hazards") {
  const testing::Rates rates{0.02, 0.01, 0.01, 0.01, 0.005, 0.02};
  const auto baseline = testing::linear_cumhaz(rates, 0.5, 400.0);
  const std::array<double, 6> ones{1, 1, 1, 1, 1, 1};
  const HazardSimulation sim = simulate_from_hazards(baseline, ones, 20000, 11);
  CHECK(sim.cohort.size() == 20000);
  CHECK(sim.capped_jumps == 0);
  std::size_t responded = 0;
  for (const auto& p : sim.cohort) responded += p.response_time.has_value();
  CHECK(std::abs(responded / 20000.0 - 0.5) < 0.015);

  const auto na = nelson_aalen_hazards(to_transition_table(sim.cohort), Arm::experimental);
  for (std::size_t k = 0; k < 6; ++k) {
    INFO("transition " << transition_label(k));
    CHECK(std::abs(na[k].value_at(60.0) / (rates[k] * 60.0) - 1.0) < 0.1);
  }

  std::array<double, 6> no_pp{1, 1, 1, 1, 1, 0};
  for (const auto& p : simulate_from_hazards(baseline, no_pp, 5000, 13).cohort)
    if (p.progression_time) CHECK_FALSE(p.death_time.has_value());
  CHECK(simulate_from_hazards(baseline, ones, 100, 3).cohort == simulate_from_hazards(baseline, ones, 100, 3).cohort);
}

TEST_CASE("hazard simulation caps oversized jumps") {
  CumulativeHazards big;
  big[k12].push_back(1.0, 0.7);
  big[k14].push_back(1.0, 0.7);
  const std::array<double, 6> ones{1, 1, 1, 1, 1, 1};
  const HazardSimulation sim = simulate_from_hazards(big, ones, 100, 5);
  CHECK(sim.capped_jumps > 0);
  CHECK(sim.max_lost_mass == doctest::Approx(0.4));
  CHECK_FALSE(sim.warnings.empty());
}

TEST_CASE("scenario presets and config parsing") {
  const ScenarioConfig c = preset("cleopatra");
  CHECK(c.accrual_days == 180);
  CHECK(c.analysis_after_lpi_days == 270);
  CHECK(c.pp_scenario == PostProgressionScenario::shared_pp);
  const ScenarioConfig oak = preset("oak");
  CHECK(oak.pp_scenario == PostProgressionScenario::proportional_pp);
  CHECK_THROWS(preset("unknown"));
  const ScenarioConfig p = parse_scenario_config("# comment\nn_patients = 25\nhr_targets = 0.7, 0.9\n", c);
  CHECK(p.n_patients == 25);
  CHECK(p.hr_targets == std::vector<double>{0.7, 0.9});
  CHECK_THROWS(parse_scenario_config("bogus = 1"));
  ScenarioConfig bad;
  bad.n_patients = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("operating characteristics are deterministic across thread counts") {
  const Cohort control = control_cohort(3);
  ScenarioConfig cfg;
  cfg.n_replicates = 24;
  cfg.master_seed = 99;
  cfg.threads = 1;
  const OCResult a = run_oc_study(control, nullptr, cfg);
  cfg.threads = 4;
  const OCResult b = run_oc_study(control, nullptr, cfg);
  REQUIRE(a.replicates.size() == 24);
  CHECK(a.hrs == b.hrs);
  CHECK(replicates_csv(a) == replicates_csv(b));
  CHECK(oc_summary_csv(a) == oc_summary_csv(b));
  cfg.master_seed = 100;
  CHECK(run_oc_study(control, nullptr, cfg).hrs != a.hrs);

  const OCResult again = summarize_oc(a.mode, a.replicates, a.targets);
  CHECK(again.fraction_below == a.fraction_below);
  CHECK(again.false_rate == a.false_rate);
  for (std::size_t k = 1; k < a.fraction_below.size(); ++k) CHECK(a.fraction_below[k] >= a.fraction_below[k - 1]);

  cfg.n_replicates = 1;
  const OCResult one = run_oc_study(control, nullptr, cfg);
  CHECK(one.replicates.size() == 1);
  for (double r : one.fraction_below) CHECK((r == 0.0 || r == 1.0));
}

TEST_CASE("null study is centred on one and an effective arm lowers the hazard ratio") {
  const Cohort control = control_cohort(5, 300);
  ScenarioConfig cfg;
  cfg.n_replicates = 200;
  cfg.master_seed = 5;
  cfg.hr_targets = {1.0};
  const OCResult null = run_oc_study(control, nullptr, cfg);
  CHECK(null.failures == 0);
  CHECK(null.fraction_below[0] > 0.35);
  CHECK(null.fraction_below[0] < 0.65);
  CHECK(null.false_rate[0] == null.fraction_below[0]);

  testing::Rates better = kRates;
  better[k14] *= 0.3;
  better[k34] *= 0.3;
  better[k24] *= 0.3;
  std::mt19937_64 gen(8);
  const Cohort active = testing::constant_hazard_cohort(better, 300, gen, Arm::experimental, 900.0, 0.0, "e");
  const OCResult eff = run_oc_study(control, &active, cfg);
  CHECK(eff.mode == OCMode::experimental_source);
  CHECK(eff.mean_hr < null.mean_hr);
  CHECK(eff.false_rate[0] == doctest::Approx(1.0 - eff.fraction_below[0]));
}

TEST_CASE("a cut beyond the last observation changes nothing") {
  const Cohort control = control_cohort(9, 100);
  CHECK(censor_post_progression(control, CensorPolicy::cut_time(1e6, CensorPolicy::Scope::both)) == control);

  ScenarioConfig cfg = preset("cut-time");
  cfg.n_replicates = 20;
  cfg.cut_times = {90, 1e6};
  const std::array<double, 6> hr{1, 1, 1, 0.3, 1, 0.6};
  const CutTimeResult r = cut_time_sweep(control, hr, cfg);
  REQUIRE(r.points.size() == 2);
  CHECK(r.points[1].n_ok + r.points[1].failures == 20);
  CHECK(r.points[1].lo <= r.points[1].mean_hr);
  CHECK(r.points[1].mean_hr <= r.points[1].hi);
  CHECK(cut_time_csv(r).rfind("cut,mean_hr,lo,hi,n_ok,failures\n", 0) == 0);
}

TEST_CASE("quantile type 7") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({5, 1, 3}, 0.0) == 1.0);
  CHECK(quantile({5, 1, 3}, 1.0) == 5.0);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.975) == doctest::Approx(4.9));
}

TEST_CASE("a strong effect is rarely missed") {
  // Cleopatra-like control; progression hazard ratios strengthened so that the
  // true OS hazard ratio is about 0.6
  const testing::Rates ctl{0.0028, 0.00107, 0.00014, 0.0016, 0.0001, 0.0011};
  const testing::Rates hr{1.16, 0.55, 0.57, 0.60, 0.21, 0.97};
  testing::Rates exp{};
  for (std::size_t k = 0; k < 6; ++k) exp[k] = ctl[k] * hr[k];
  auto true_sos = [](const testing::Rates& r) {
    StepCurve s(1.0);
    for (double t = 1.0; t <= 1180.0; t += 1.0) s.push_back(t, 1.0 - testing::exact_transition_matrix(r, t)(0, 3));
    return s;
  };
  const double true_hr = hazard_ratio_estimate(true_sos(exp), true_sos(ctl));
  REQUIRE(true_hr == doctest::Approx(0.6).epsilon(0.03));

  std::mt19937_64 gen(89);
  const Cohort control = apply_trial_timeline(
      testing::constant_hazard_cohort(ctl, 406, gen, Arm::control, kNoAnalysisCutoff, 0.0, "c"), 880, 300, 1);
  const Cohort active = apply_trial_timeline(
      testing::constant_hazard_cohort(exp, 402, gen, Arm::experimental, kNoAnalysisCutoff, 0.0, "e"), 880, 300, 2);
  ScenarioConfig cfg = preset("cleopatra");
  cfg.n_replicates = 300;
  cfg.master_seed = 89;
  const OCResult r = run_oc_study(control, &active, cfg);
  INFO("true HR " << true_hr << " mean HR " << r.mean_hr);
  CHECK(r.false_rate[2] < 0.15);  // target 0.9
}
