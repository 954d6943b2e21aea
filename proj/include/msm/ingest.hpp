#pragma once

#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm/state_model.hpp"

namespace msm {

// Thrown for malformed or inconsistent patient data. row() is the 1-based data
// row (header excluded), or 0 when the problem is not tied to a row.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, std::size_t row)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

enum class Arm : int { control = 0, experimental = 1 };

// All times are days since the patient's study entry.
struct PatientRecord {
  std::string patient_id;
  Arm arm = Arm::control;
  std::optional<double> response_time;
  std::optional<double> progression_time;
  std::optional<double> death_time;
  double last_contact_time = 0.0;

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

using Cohort = std::vector<PatientRecord>;

// Throws ValidationError (row 0) when the record breaks an ordering invariant.
void validate_record(const PatientRecord& p, std::size_t row = 0);

// CSV with header patient_id,arm,response_time,progression_time,death_time,last_contact_time.
// Empty fields mean "absent". Row order is preserved.
Cohort parse_and_validate(std::istream& csv);
Cohort parse_and_validate(const std::string& csv_text);
Cohort read_cohort_file(const std::string& path);
std::string write_cohort_csv(const Cohort& cohort);

struct TransitionRow {
  std::string patient_id;
  std::size_t transition = 0;  // index into kTransitions
  double tstart = 0.0;
  double tstop = 0.0;
  int status = 0;
  std::vector<double> covariates;  // covariates[0] is the arm indicator

  friend bool operator==(const TransitionRow&, const TransitionRow&) = default;
};

using TransitionTable = std::vector<TransitionRow>;

// Long-format risk-set expansion on the clock-forward time scale.
// Zero-length sojourns (a state entered at the last contact time) add no rows.
TransitionTable to_transition_table(const Cohort& cohort);

// Inverse of to_transition_table for the event history. Arm is read from the
// first covariate; last_contact_time is the end of the final sojourn.
Cohort from_transition_table(const TransitionTable& table);

// patient_id,from,to,tstart,tstop,status,arm
std::string write_transition_table_csv(const TransitionTable& table);

// Rows of one transition, optionally restricted to an arm.
TransitionTable rows_for(const TransitionTable& table, std::size_t transition,
                         std::optional<Arm> arm = std::nullopt);

struct CensorPolicy {
  enum class Kind { at_pd_plus_1, pp_after_day, cut_time, analysis_time };
  enum class Scope { experimental, both };

  Kind kind = Kind::at_pd_plus_1;
  double day = 0.0;  // d, c or a; unused for at_pd_plus_1
  Scope applies_to = Scope::experimental;

  static CensorPolicy at_pd_plus_1(Scope s = Scope::experimental) { return {Kind::at_pd_plus_1, 0.0, s}; }
  static CensorPolicy pp_after_day(double d, Scope s = Scope::experimental) { return {Kind::pp_after_day, d, s}; }
  static CensorPolicy cut_time(double c, Scope s = Scope::experimental) { return {Kind::cut_time, c, s}; }
  static CensorPolicy analysis_time(double a, Scope s = Scope::experimental) { return {Kind::analysis_time, a, s}; }

  // "at_pd_plus_1", "pp_after_day:180", "cut_time:90", "analysis_time:365",
  // optionally suffixed with "@both".
  static CensorPolicy parse(const std::string& text);
  std::string to_string() const;
};

// Rewrites post-progression follow-up only; response and progression times are
// never touched.
Cohort censor_post_progression(const Cohort& cohort, const CensorPolicy& policy);
Cohort censor_post_progression(const Cohort& cohort,
                               const std::vector<CensorPolicy>& policies);

inline constexpr double kNoAnalysisCutoff = std::numeric_limits<double>::infinity();

// Staggered uniform entry over [0, accrual_days] with the analysis held
// analysis_after_lpi_days after the end of accrual. Each patient is
// administratively censored at accrual + analysis_after - entry_offset.
Cohort apply_trial_timeline(const Cohort& cohort, double accrual_days,
                            double analysis_after_lpi_days, std::uint64_t seed);

// Same, with explicit per-patient entry offsets.
Cohort apply_entry_offsets(const Cohort& cohort, const std::vector<double>& offsets,
                           double accrual_days, double analysis_after_lpi_days);

// Administrative censoring of the whole record at time `bound`.
PatientRecord censor_at(const PatientRecord& p, double bound);

// Observed overall survival time and death flag.
struct SurvivalObservation {
  double time;
  int status;
};
SurvivalObservation overall_survival(const PatientRecord& p);

Cohort select_arm(const Cohort& cohort, Arm arm);

}  // namespace msm
