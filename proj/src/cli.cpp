#include "msm/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "msm/decide.hpp"
#include "msm/estimate.hpp"
#include "msm/ingest.hpp"
#include "msm/predict.hpp"
#include "msm/simulate.hpp"

namespace msm {
namespace {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kFit = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path.string());
  f << content;
}

fs::path output_dir(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::create_directories(out);
  return fs::path(out);
}

void error_record(std::ostream& err, const char* kind, const std::string& message,
                  std::optional<std::size_t> row = std::nullopt) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  if (row) j["row"] = *row;
  err << j.dump() << "\n";
}

struct Common {
  std::string input;
  std::string positional;
  std::string out;

  std::string path() const {
    if (!input.empty()) return input;
    if (!positional.empty()) return positional;
    throw UsageError("an input CSV is required (--input or positional)");
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--input", c.input, "Patient CSV");
  cmd->add_option("input_file", c.positional, "Patient CSV");
  cmd->add_option("--out", c.out, "Output file or directory");
}

std::optional<CensorPolicy> policy_from(const std::string& text) {
  if (text.empty() || text == "none") return std::nullopt;
  return CensorPolicy::parse(text);
}

std::string km_rows(const std::string& curve, int arm, const Cohort& cohort) {
  std::vector<double> t;
  std::vector<int> s;
  for (const auto& p : cohort) {
    const auto o = overall_survival(p);
    t.push_back(o.time);
    s.push_back(o.status);
  }
  std::string out;
  if (t.empty()) return out;
  const StepCurve km = kaplan_meier(t, s);
  const std::string prefix = curve + "," + std::to_string(arm) + ",";
  out += prefix + "0,1\n";
  for (std::size_t k = 0; k < km.size(); ++k)
    out += prefix + format_number(km.times()[k]) + "," + format_number(km.values()[k]) + "\n";
  return out;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number list: '" + s + "'");
    }
  }
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multistate OS prediction and early-phase trial operating characteristics"};
  app.require_subcommand(1);

  Common c_validate, c_fit, c_predict, c_oc, c_cut;

  auto* validate = app.add_subcommand("validate", "Check a patient CSV against the schema");
  add_common(validate, c_validate);

  auto* fit = app.add_subcommand("fit", "Per-transition Cox fits with the treatment covariate");
  add_common(fit, c_fit);
  std::string fit_scenario = "proportional_pp", fit_policy, fit_ties = "breslow", fit_table, fit_ph;
  fit->add_option("--scenario", fit_scenario)->check(CLI::IsMember({"shared_pp", "proportional_pp", "unrestricted"}));
  fit->add_option("--policy", fit_policy, "Post-progression censoring policy applied before fitting");
  fit->add_option("--ties", fit_ties)->check(CLI::IsMember({"breslow", "efron"}));
  fit->add_option("--export-table", fit_table, "Write the long-format transition table here");
  fit->add_option("--ph-out", fit_ph, "Write proportional-hazards test results here");

  auto* predict = app.add_subcommand("predict", "Predicted OS curves per arm");
  add_common(predict, c_predict);
  std::string pr_scenario = "shared_pp", pr_policy, pr_convention = "product_limit", pr_targets = "0.8,0.85,0.9,1";
  predict->add_option("--scenario", pr_scenario)->check(CLI::IsMember({"shared_pp", "proportional_pp", "unrestricted"}));
  predict->add_option("--policy", pr_policy);
  predict->add_option("--convention", pr_convention)->check(CLI::IsMember({"product_limit", "exponential"}));
  predict->add_option("--targets", pr_targets);

  // simulate-oc and cut-time share the scenario flags
  struct SimFlags {
    std::string preset, config, scenario, policy, convention, targets, hr, cut;
    std::size_t n = 0, replicates = 0, threads = 0;
    double accrual = 0, after = 0;
    std::uint64_t seed = 0;
    std::string mode = "null";
  } oc, ct;
  auto add_sim = [](CLI::App* cmd, SimFlags& f) {
    cmd->add_option("--preset", f.preset)->check(CLI::IsMember({"cleopatra", "oak", "cut-time"}));
    cmd->add_option("--config", f.config, "Scenario config file (key = value)");
    cmd->add_option("--scenario", f.scenario)->check(CLI::IsMember({"shared_pp", "proportional_pp", "unrestricted"}));
    cmd->add_option("--policy", f.policy);
    cmd->add_option("--convention", f.convention)->check(CLI::IsMember({"product_limit", "exponential"}));
    cmd->add_option("--targets", f.targets);
    cmd->add_option("--n", f.n);
    cmd->add_option("--replicates", f.replicates);
    cmd->add_option("--threads", f.threads);
    cmd->add_option("--accrual-days", f.accrual);
    cmd->add_option("--analysis-after-days", f.after);
    cmd->add_option("--seed", f.seed);
  };
  auto* sim_oc = app.add_subcommand("simulate-oc", "Operating characteristics of the go/no-go rule");
  add_common(sim_oc, c_oc);
  add_sim(sim_oc, oc);
  sim_oc->add_option("--mode", oc.mode, "null: sample the early arm from control; effect: from the experimental arm")
      ->check(CLI::IsMember({"null", "effect"}));

  auto* cut = app.add_subcommand("cut-time", "HR stability as a function of post-progression follow-up");
  add_common(cut, c_cut);
  add_sim(cut, ct);
  std::vector<double> hr6;
  cut->add_option("--hr", hr6, "Six transition hazard ratios")->expected(6);
  cut->add_option("--cut", ct.cut, "Comma-separated cut times in days");

  auto build_config = [](CLI::App* cmd, const SimFlags& f, const std::string& default_preset) {
    ScenarioConfig c = preset(f.preset.empty() ? default_preset : f.preset);
    if (!f.config.empty()) c = read_scenario_config(f.config, c);
    if (cmd->count("--scenario")) c.pp_scenario = parse_scenario(f.scenario);
    if (cmd->count("--policy")) c.censor_policy = policy_from(f.policy);
    if (cmd->count("--convention")) c.convention = parse_convention(f.convention);
    if (cmd->count("--targets")) c.hr_targets = parse_list(f.targets);
    if (cmd->count("--n")) c.n_patients = f.n;
    if (cmd->count("--replicates")) c.n_replicates = f.replicates;
    if (cmd->count("--threads")) c.threads = f.threads;
    if (cmd->count("--accrual-days")) c.accrual_days = f.accrual;
    if (cmd->count("--analysis-after-days")) c.analysis_after_lpi_days = f.after;
    if (cmd->count("--seed")) c.master_seed = f.seed;
    if (!f.cut.empty()) c.cut_times = parse_list(f.cut);
    return c;
  };

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForAllHelp& e) {
      out << app.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::ParseError& e) {
      error_record(err, "usage", e.what());
      return kUsage;
    }

    if (*validate) {
      const Cohort cohort = read_cohort_file(c_validate.path());
      std::size_t exp = 0;
      for (const auto& p : cohort) exp += p.arm == Arm::experimental;
      out << "ok: " << cohort.size() << " patients (" << cohort.size() - exp << " control, " << exp
          << " experimental)\n";
      return kOk;
    }

    if (*fit) {
      Cohort cohort = read_cohort_file(c_fit.path());
      if (auto pol = policy_from(fit_policy)) cohort = censor_post_progression(cohort, *pol);
      const TransitionTable table = to_transition_table(cohort);
      CoxOptions opt;
      opt.ties = fit_ties == "efron" ? TieMethod::efron : TieMethod::breslow;
      const MultistateFit mf = fit_multistate(table, parse_scenario(fit_scenario), opt);
      if (!fit_table.empty()) write_file(fit_table, write_transition_table_csv(table));
      const std::string report = fit_report_csv(mf);
      if (c_fit.out.empty()) out << report;
      else write_file(c_fit.out, report);
      if (!fit_ph.empty()) {
        std::string ph = "transition,chisq,df,p_value\n";
        for (std::size_t k = 0; k < kNumTransitions; ++k) {
          const auto& tf = mf.fits[k];
          std::string row = transition_label(k) + ",NA,NA,NA\n";
          if (tf.cox && tf.cox->beta.size() > 0) {
            try {
              const PHTestResult r = ph_test(*tf.cox);
              row = transition_label(k) + "," + format_number(r.global_chisq) + "," +
                    format_number(r.global_df) + "," + format_number(r.global_p_value) + "\n";
            } catch (const std::exception&) {
            }
          }
          ph += row;
        }
        write_file(fit_ph, ph);
      }
      if (!mf.ok()) {
        error_record(err, "fit", mf.first_error());
        return kFit;
      }
      return kOk;
    }

    if (*predict) {
      const Cohort original = read_cohort_file(c_predict.path());
      const fs::path dir = output_dir(c_predict.out);
      Cohort cohort = original;
      if (auto pol = policy_from(pr_policy)) cohort = censor_post_progression(cohort, *pol);
      const MultistateFit mf = fit_multistate(to_transition_table(cohort), parse_scenario(pr_scenario));
      if (!mf.ok()) {
        error_record(err, "fit", mf.first_error());
        return kFit;
      }
      const Convention conv = parse_convention(pr_convention);
      const PathProbabilities pc = path_probabilities(mf, Arm::control, conv);
      const PathProbabilities pe = path_probabilities(mf, Arm::experimental, conv);
      write_file(dir / "sos_control.csv", sos_curve_csv(pc));
      write_file(dir / "sos_experimental.csv", sos_curve_csv(pe));

      std::string overlay = "curve,arm,time,value\n";
      for (int arm : {0, 1}) {
        overlay += km_rows("km_full", arm, select_arm(original, static_cast<Arm>(arm)));
        overlay += km_rows("km_observed", arm, select_arm(cohort, static_cast<Arm>(arm)));
        const StepCurve s = sos_from_paths(arm == 0 ? pc : pe);
        overlay += "ms," + std::to_string(arm) + ",0,1\n";
        for (std::size_t k = 0; k < s.size(); ++k)
          overlay += "ms," + std::to_string(arm) + "," + format_number(s.times()[k]) + "," +
                     format_number(s.values()[k]) + "\n";
      }
      write_file(dir / "overlay.csv", overlay);
      const double hr = hazard_ratio_estimate(sos_from_paths(pe), sos_from_paths(pc));
      write_file(dir / "decision.json", decision_report_json(hr, parse_list(pr_targets)));
      out << "predicted OS hazard ratio " << format_number(hr) << "\n";
      return kOk;
    }

    if (*sim_oc) {
      const Cohort cohort = read_cohort_file(c_oc.path());
      const fs::path dir = output_dir(c_oc.out);
      const ScenarioConfig cfg = build_config(sim_oc, oc, "cleopatra");
      const Cohort control = select_arm(cohort, Arm::control);
      const Cohort experimental = select_arm(cohort, Arm::experimental);
      if (oc.mode == "effect" && experimental.empty())
        throw ValidationError("effect mode needs experimental-arm patients in the input", 0);
      const OCResult r = run_oc_study(control, oc.mode == "effect" ? &experimental : nullptr, cfg);
      write_file(dir / "replicates.csv", replicates_csv(r));
      write_file(dir / "oc_summary.csv", oc_summary_csv(r));
      out << "mean HR " << format_number(r.mean_hr) << " over " << r.hrs.size() << " replicates ("
          << r.failures << " failed)\n";
      return kOk;
    }

    if (*cut) {
      const Cohort cohort = read_cohort_file(c_cut.path());
      const fs::path dir = output_dir(c_cut.out);
      ScenarioConfig cfg = build_config(cut, ct, "cut-time");
      if (!hr6.empty()) std::copy(hr6.begin(), hr6.end(), cfg.transition_hr.begin());
      const Cohort control = select_arm(cohort, Arm::control);
      if (control.empty()) throw ValidationError("cut-time needs control-arm patients in the input", 0);
      const CutTimeResult r = cut_time_sweep(control, cfg.transition_hr, cfg);
      write_file(dir / "cut_time.csv", cut_time_csv(r));
      out << cut_time_csv(r);
      return kOk;
    }
  } catch (const ValidationError& e) {
    error_record(err, "validation", e.what(), e.row() ? std::optional(e.row()) : std::nullopt);
    return kValidation;
  } catch (const CoxFitError& e) {
    error_record(err, "fit", e.what());
    return kFit;
  } catch (const PredictionError& e) {
    error_record(err, "fit", e.what());
    return kFit;
  } catch (const DecisionError& e) {
    error_record(err, "fit", e.what());
    return kFit;
  } catch (const StudyError& e) {
    error_record(err, "fit", e.what());
    return kFit;
  } catch (const std::exception& e) {
    error_record(err, "usage", e.what());
    return kUsage;
  }
  return kUsage;
}

}  // namespace msm
