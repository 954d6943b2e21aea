#include "msm/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "msm/rng.hpp"
#include "msm/step_curve.hpp"

namespace msm {
namespace {

constexpr const char* kHeader =
    "patient_id,arm,response_time,progression_time,death_time,last_contact_time";

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_time(const std::string& field, const char* name,
                                 std::size_t row, bool required) {
  if (field.empty()) {
    if (required) throw ValidationError(std::string("missing ") + name + " at row " + std::to_string(row), row);
    return std::nullopt;
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v))
    throw ValidationError(std::string("non-numeric ") + name + " '" + field + "' at row " + std::to_string(row), row);
  if (!(v > 0.0))
    throw ValidationError(std::string(name) + " must be positive at row " + std::to_string(row), row);
  return v;
}

std::string at_row(std::size_t row) {
  return row == 0 ? std::string() : " at row " + std::to_string(row);
}

}  // namespace

void validate_record(const PatientRecord& p, std::size_t row) {
  const auto& r = p.response_time;
  const auto& pd = p.progression_time;
  const auto& d = p.death_time;
  if (p.patient_id.empty()) throw ValidationError("empty patient_id" + at_row(row), row);
  if (!(p.last_contact_time > 0.0))
    throw ValidationError("last_contact_time must be positive" + at_row(row), row);
  for (const auto* t : {&r, &pd, &d})
    if (*t && !(**t > 0.0)) throw ValidationError("event times must be positive" + at_row(row), row);
  if (r && pd && !(*r < *pd))
    throw ValidationError("response_time ≥ progression_time" + at_row(row), row);
  if (d && r && !(*r < *d)) throw ValidationError("response_time ≥ death_time" + at_row(row), row);
  if (d && pd && !(*pd < *d)) throw ValidationError("progression_time ≥ death_time" + at_row(row), row);
  for (const auto* t : {&r, &pd, &d})
    if (*t && **t > p.last_contact_time)
      throw ValidationError("last_contact_time before an event time" + at_row(row), row);
}

Cohort parse_and_validate(std::istream& csv) {
  std::string line;
  if (!std::getline(csv, line)) throw ValidationError("empty input: missing header", 0);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (trim(line) != kHeader)
    throw ValidationError("malformed header: expected '" + std::string(kHeader) + "'", 0);

  Cohort cohort;
  std::unordered_set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(csv, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto f = split_fields(line);
    if (f.size() != 6)
      throw ValidationError("expected 6 fields, found " + std::to_string(f.size()) + " at row " + std::to_string(row), row);
    PatientRecord p;
    p.patient_id = f[0];
    if (p.patient_id.empty()) throw ValidationError("empty patient_id at row " + std::to_string(row), row);
    if (f[1] == "0") p.arm = Arm::control;
    else if (f[1] == "1") p.arm = Arm::experimental;
    else throw ValidationError("arm must be 0 or 1 at row " + std::to_string(row), row);
    p.response_time = parse_time(f[2], "response_time", row, false);
    p.progression_time = parse_time(f[3], "progression_time", row, false);
    p.death_time = parse_time(f[4], "death_time", row, false);
    p.last_contact_time = *parse_time(f[5], "last_contact_time", row, true);
    validate_record(p, row);
    if (!seen.insert(p.patient_id).second)
      throw ValidationError("duplicate patient_id '" + p.patient_id + "' at row " + std::to_string(row), row);
    cohort.push_back(std::move(p));
  }
  return cohort;
}

Cohort parse_and_validate(const std::string& csv_text) {
  std::istringstream in(csv_text);
  return parse_and_validate(in);
}

Cohort read_cohort_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_and_validate(in);
}

std::string write_cohort_csv(const Cohort& cohort) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  std::string out = std::string(kHeader) + "\n";
  for (const auto& p : cohort) {
    out += p.patient_id + "," + std::to_string(static_cast<int>(p.arm)) + "," +
           opt(p.response_time) + "," + opt(p.progression_time) + "," + opt(p.death_time) +
           "," + format_number(p.last_contact_time) + "\n";
  }
  return out;
}

TransitionTable to_transition_table(const Cohort& cohort) {
  TransitionTable rows;
  for (const auto& p : cohort) {
    const double z = p.arm == Arm::experimental ? 1.0 : 0.0;
    std::vector<std::pair<double, int>> events;
    if (p.response_time) events.emplace_back(*p.response_time, 2);
    if (p.progression_time) events.emplace_back(*p.progression_time, 3);
    if (p.death_time) events.emplace_back(*p.death_time, 4);
    std::sort(events.begin(), events.end());

    int state = 1;
    double entry = 0.0;
    auto emit = [&](double stop, int target) {
      if (!(stop > entry)) return;
      for (int k : kOutTransitions[static_cast<std::size_t>(state - 1)]) {
        if (k < 0) continue;
        const auto idx = static_cast<std::size_t>(k);
        rows.push_back({p.patient_id, idx, entry, stop, kTransitions[idx].to == target ? 1 : 0, {z}});
      }
    };
    for (auto [t, target] : events) {
      emit(t, target);
      state = target;
      entry = t;
    }
    if (state != 4) emit(p.last_contact_time, 0);
  }
  return rows;
}

Cohort from_transition_table(const TransitionTable& table) {
  Cohort out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : table) {
    auto [it, fresh] = index.try_emplace(r.patient_id, out.size());
    if (fresh) {
      PatientRecord p;
      p.patient_id = r.patient_id;
      p.arm = (!r.covariates.empty() && r.covariates[0] != 0.0) ? Arm::experimental : Arm::control;
      out.push_back(std::move(p));
    }
    PatientRecord& p = out[it->second];
    p.last_contact_time = std::max(p.last_contact_time, r.tstop);
    if (r.status == 1) {
      switch (kTransitions[r.transition].to) {
        case 2: p.response_time = r.tstop; break;
        case 3: p.progression_time = r.tstop; break;
        case 4: p.death_time = r.tstop; break;
      }
    }
  }
  return out;
}

std::string write_transition_table_csv(const TransitionTable& table) {
  std::string out = "patient_id,from,to,tstart,tstop,status,arm\n";
  for (const auto& r : table) {
    const auto& tr = kTransitions[r.transition];
    out += r.patient_id + "," + std::to_string(tr.from) + "," + std::to_string(tr.to) + "," +
           format_number(r.tstart) + "," + format_number(r.tstop) + "," +
           std::to_string(r.status) + "," +
           (r.covariates.empty() ? std::string("0") : format_number(r.covariates[0])) + "\n";
  }
  return out;
}

TransitionTable rows_for(const TransitionTable& table, std::size_t transition,
                         std::optional<Arm> arm) {
  TransitionTable out;
  for (const auto& r : table) {
    if (r.transition != transition) continue;
    if (arm) {
      const bool exp = !r.covariates.empty() && r.covariates[0] != 0.0;
      if (exp != (*arm == Arm::experimental)) continue;
    }
    out.push_back(r);
  }
  return out;
}

CensorPolicy CensorPolicy::parse(const std::string& text) {
  std::string body = text;
  Scope scope = Scope::experimental;
  if (auto at = body.find('@'); at != std::string::npos) {
    const std::string s = body.substr(at + 1);
    if (s == "both") scope = Scope::both;
    else if (s != "experimental") throw std::invalid_argument("unknown policy scope '" + s + "'");
    body = body.substr(0, at);
  }
  if (body == "at_pd_plus_1") return at_pd_plus_1(scope);
  auto colon = body.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown censor policy '" + text + "'");
  const std::string kind = body.substr(0, colon);
  double day = 0.0;
  const std::string num = body.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), day);
  if (ec != std::errc{} || ptr != num.data() + num.size() || !(day > 0.0) || !std::isfinite(day))
    throw std::invalid_argument("censor policy day must be a positive number in '" + text + "'");
  if (kind == "pp_after_day") return pp_after_day(day, scope);
  if (kind == "cut_time") return cut_time(day, scope);
  if (kind == "analysis_time") return analysis_time(day, scope);
  throw std::invalid_argument("unknown censor policy '" + text + "'");
}

std::string CensorPolicy::to_string() const {
  std::string s;
  switch (kind) {
    case Kind::at_pd_plus_1: s = "at_pd_plus_1"; break;
    case Kind::pp_after_day: s = "pp_after_day:" + format_number(day); break;
    case Kind::cut_time: s = "cut_time:" + format_number(day); break;
    case Kind::analysis_time: s = "analysis_time:" + format_number(day); break;
  }
  if (applies_to == Scope::both) s += "@both";
  return s;
}

Cohort censor_post_progression(const Cohort& cohort, const CensorPolicy& policy) {
  if (policy.kind != CensorPolicy::Kind::at_pd_plus_1 && !(policy.day > 0.0))
    throw std::invalid_argument("censor policy day must be positive");
  Cohort out = cohort;
  for (auto& p : out) {
    if (!p.progression_time) continue;
    if (policy.applies_to == CensorPolicy::Scope::experimental && p.arm != Arm::experimental) continue;
    const double pd = *p.progression_time;
    double bound = pd + 1.0;
    switch (policy.kind) {
      case CensorPolicy::Kind::at_pd_plus_1: break;
      case CensorPolicy::Kind::pp_after_day: bound = std::max(policy.day, pd + 1.0); break;
      case CensorPolicy::Kind::cut_time: bound = pd < policy.day ? policy.day : pd + 1.0; break;
      case CensorPolicy::Kind::analysis_time: bound = std::max(policy.day, pd); break;
    }
    if (p.death_time && *p.death_time > bound) p.death_time.reset();
    p.last_contact_time = std::min(p.last_contact_time, bound);
  }
  return out;
}

Cohort censor_post_progression(const Cohort& cohort, const std::vector<CensorPolicy>& policies) {
  Cohort out = cohort;
  for (const auto& policy : policies) out = censor_post_progression(out, policy);
  return out;
}

PatientRecord censor_at(const PatientRecord& p, double bound) {
  PatientRecord q = p;
  for (auto* t : {&q.response_time, &q.progression_time, &q.death_time})
    if (*t && **t > bound) t->reset();
  q.last_contact_time = std::min(q.last_contact_time, bound);
  return q;
}

Cohort apply_entry_offsets(const Cohort& cohort, const std::vector<double>& offsets,
                           double accrual_days, double analysis_after_lpi_days) {
  if (offsets.size() != cohort.size())
    throw std::invalid_argument("apply_entry_offsets: one offset per patient required");
  Cohort out;
  out.reserve(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i)
    out.push_back(censor_at(cohort[i], accrual_days + analysis_after_lpi_days - offsets[i]));
  return out;
}

Cohort apply_trial_timeline(const Cohort& cohort, double accrual_days,
                            double analysis_after_lpi_days, std::uint64_t seed) {
  if (!(accrual_days >= 0.0) || !std::isfinite(accrual_days))
    throw std::invalid_argument("accrual_days must be finite and non-negative");
  if (!(analysis_after_lpi_days > 0.0))
    throw std::invalid_argument("analysis_after_lpi_days must be positive");
  CounterRng rng(seed);
  std::vector<double> offsets;
  offsets.reserve(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i)
    offsets.push_back(accrual_days > 0.0 ? rng.uniform(0.0, accrual_days) : 0.0);
  return apply_entry_offsets(cohort, offsets, accrual_days, analysis_after_lpi_days);
}

SurvivalObservation overall_survival(const PatientRecord& p) {
  if (p.death_time) return {*p.death_time, 1};
  return {p.last_contact_time, 0};
}

Cohort select_arm(const Cohort& cohort, Arm arm) {
  Cohort out;
  std::copy_if(cohort.begin(), cohort.end(), std::back_inserter(out),
               [arm](const PatientRecord& p) { return p.arm == arm; });
  return out;
}

}  // namespace msm
