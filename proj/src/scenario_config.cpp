#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "msm/simulate.hpp"

namespace msm {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const std::string t = trim(v);
  if (t == "inf" || t == "Inf") return std::numeric_limits<double>::infinity();
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw std::invalid_argument("config key '" + key + "': not a number: '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const std::string t = trim(v);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw std::invalid_argument("config key '" + key + "': not a non-negative integer: '" + v + "'");
  return x;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_number(xs[i]);
  return s;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_patients < 1) throw std::invalid_argument("n_patients must be at least 1");
  if (n_replicates < 1) throw std::invalid_argument("n_replicates must be at least 1");
  if (!(accrual_days >= 0.0) || !std::isfinite(accrual_days))
    throw std::invalid_argument("accrual_days must be finite and non-negative");
  if (!(analysis_after_lpi_days > 0.0)) throw std::invalid_argument("analysis_after_lpi_days must be positive");
  for (double h : transition_hr)
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("transition hazard ratios must be positive");
  if (hr_targets.empty()) throw std::invalid_argument("hr_targets must not be empty");
  for (double t : hr_targets)
    if (!(t > 0.0)) throw std::invalid_argument("hr_targets must be positive");
  for (double c : cut_times)
    if (!(c > 0.0)) throw std::invalid_argument("cut_times must be positive");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0))
    throw std::invalid_argument("max_failure_fraction must lie in [0, 1]");
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  if (name == "cleopatra") return c;
  if (name == "oak") {
    c.accrual_days = 182.5;
    c.analysis_after_lpi_days = 182.5;
    c.censor_policy.reset();
    c.pp_scenario = PostProgressionScenario::proportional_pp;
    return c;
  }
  if (name == "cut-time") {
    c.accrual_days = 365.0;
    c.analysis_after_lpi_days = 180.0;
    c.censor_policy.reset();
    c.pp_scenario = PostProgressionScenario::proportional_pp;
    c.transition_hr = {1.0, 1.0, 1.0, 0.3, 1.0, 0.6};
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (cleopatra, oak, cut-time)");
}

ScenarioConfig parse_scenario_config(const std::string& text, ScenarioConfig c) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "preset") c = preset(value);
    else if (key == "n_patients") c.n_patients = to_uint(key, value);
    else if (key == "n_replicates") c.n_replicates = to_uint(key, value);
    else if (key == "accrual_days") c.accrual_days = to_double(key, value);
    else if (key == "analysis_after_lpi_days") c.analysis_after_lpi_days = to_double(key, value);
    else if (key == "censor_policy") {
      if (value == "none") c.censor_policy.reset();
      else c.censor_policy = CensorPolicy::parse(value);
    } else if (key == "pp_scenario") c.pp_scenario = parse_scenario(value);
    else if (key == "convention") c.convention = parse_convention(value);
    else if (key == "hr_targets") c.hr_targets = to_list(key, value);
    else if (key == "transition_hr") {
      const auto v = to_list(key, value);
      if (v.size() != kNumTransitions) throw std::invalid_argument("transition_hr needs 6 values");
      std::copy(v.begin(), v.end(), c.transition_hr.begin());
    } else if (key == "cut_times") c.cut_times = to_list(key, value);
    else if (key == "master_seed") c.master_seed = to_uint(key, value);
    else if (key == "threads") c.threads = to_uint(key, value);
    else if (key == "max_failure_fraction") c.max_failure_fraction = to_double(key, value);
    else throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return c;
}

ScenarioConfig read_scenario_config(const std::string& path, ScenarioConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_config(ss.str(), std::move(base));
}

std::string describe(const ScenarioConfig& c) {
  std::string s;
  s += "n_patients = " + std::to_string(c.n_patients) + "\n";
  s += "n_replicates = " + std::to_string(c.n_replicates) + "\n";
  s += "accrual_days = " + format_number(c.accrual_days) + "\n";
  s += "analysis_after_lpi_days = " + format_number(c.analysis_after_lpi_days) + "\n";
  s += "censor_policy = " + (c.censor_policy ? c.censor_policy->to_string() : std::string("none")) + "\n";
  s += "pp_scenario = " + to_string(c.pp_scenario) + "\n";
  s += "convention = " + to_string(c.convention) + "\n";
  s += "hr_targets = " + join(c.hr_targets) + "\n";
  s += "transition_hr = " + join({c.transition_hr.begin(), c.transition_hr.end()}) + "\n";
  s += "cut_times = " + join(c.cut_times) + "\n";
  s += "master_seed = " + std::to_string(c.master_seed) + "\n";
  return s;
}

}  // namespace msm
