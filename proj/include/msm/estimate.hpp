#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm/ingest.hpp"
#include "msm/step_curve.hpp"

namespace msm {

// Product-limit survival estimate. Throws std::invalid_argument on empty or
// inconsistent input.
StepCurve kaplan_meier(std::span<const double> times, std::span<const int> status);

// Cumulative hazard sum_{t_k <= t} d_k / Y_k with risk sets built from the
// (tstart, tstop] intervals, so delayed entry is honoured.
StepCurve nelson_aalen(const TransitionTable& rows, std::optional<Arm> arm = std::nullopt);

enum class TieMethod { breslow, efron };

struct CoxOptions {
  TieMethod ties = TieMethod::breslow;
  int max_iterations = 50;
  double score_tolerance = 1e-9;
  double loglik_tolerance = 1e-12;
  double monotone_threshold = 15.0;
  int max_step_halvings = 30;
};

// Counting-process survival data for one Cox regression.
struct CoxData {
  std::vector<double> tstart;
  std::vector<double> tstop;
  std::vector<int> status;
  Eigen::MatrixXd z;  // one row per observation

  std::size_t size() const { return tstop.size(); }
  std::size_t n_covariates() const { return static_cast<std::size_t>(z.cols()); }
};

// Extracts the requested covariate columns (indices into TransitionRow::covariates).
CoxData make_cox_data(const TransitionTable& rows, std::span<const std::size_t> covariates);

class CoxFitError : public std::runtime_error {
 public:
  CoxFitError(const std::string& what, std::vector<std::string> trace = {})
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<std::string>& trace() const { return trace_; }

 private:
  std::vector<std::string> trace_;
};

struct CoxFit {
  std::optional<std::size_t> transition;
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  StepCurve baseline_cumhaz;  // Breslow estimate at beta, for Z = 0
  TieMethod tie_method = TieMethod::breslow;
  int n_events = 0;
  bool converged = false;
  int iterations = 0;
  double loglik_null = 0.0;  // at beta = 0
  double loglik = 0.0;       // at beta
  bool monotone = false;     // some |beta| exceeded the monotone-likelihood threshold
  bool degenerate = false;   // no events; zero hazard
  std::vector<bool> aliased; // covariate constant on the data; coefficient fixed at 0
  std::vector<std::string> trace;
  std::shared_ptr<const CoxData> data;

  double standard_error(std::size_t j) const;
  // Two-sided Wald p-value; NaN when the coefficient is aliased.
  double wald_p_value(std::size_t j) const;
  // exp(beta_j +- 1.96 se_j).
  std::pair<double, double> hazard_ratio_ci(std::size_t j, double z = 1.959963984540054) const;
  bool usable() const { return converged || monotone; }
};

// Log partial likelihood at beta.
double partial_loglik(const CoxData& data, const Eigen::VectorXd& beta,
                      TieMethod ties = TieMethod::breslow);

// Newton-Raphson maximisation of the partial likelihood with step halving.
// Throws CoxFitError on non-convergence (with the iteration trace) or a
// singular information matrix.
CoxFit cox_fit(std::shared_ptr<const CoxData> data, const CoxOptions& options = {});
CoxFit cox_fit(const TransitionTable& rows, std::span<const std::size_t> covariates,
               const CoxOptions& options = {});

// Lambda(t | Z) = Lambda_0(t) exp(beta'Z).
StepCurve predict_cumulative_hazard(const CoxFit& fit, std::span<const double> z);

enum class TimeTransform { identity, km, rank };

struct PHTestResult {
  std::vector<double> chisq;
  std::vector<double> df;
  std::vector<double> p_value;
  double global_chisq = 0.0;
  double global_df = 0.0;
  double global_p_value = 1.0;
  TimeTransform transform = TimeTransform::identity;
};

// Grambsch-Therneau test of zero slope of the scaled Schoenfeld residuals
// against g(event time), as a score test for beta(t) = beta + theta g(t)
// using the per-event information (not its average). Per-covariate entries
// for aliased covariates are NaN.
PHTestResult ph_test(const CoxFit& fit, TimeTransform transform = TimeTransform::identity);

// Schoenfeld residuals (one row per event) and their event times.
struct SchoenfeldResiduals {
  std::vector<double> time;
  Eigen::MatrixXd residual;
};
SchoenfeldResiduals schoenfeld_residuals(const CoxFit& fit);

double chi_square_upper_tail(double x, double df);

enum class PostProgressionScenario { shared_pp, proportional_pp, unrestricted };

PostProgressionScenario parse_scenario(const std::string& s);
std::string to_string(PostProgressionScenario s);

struct TransitionFit {
  std::optional<CoxFit> cox;
  std::string error;  // non-empty when the fit failed
};

struct MultistateFit {
  PostProgressionScenario scenario = PostProgressionScenario::shared_pp;
  std::array<TransitionFit, kNumTransitions> fits;
  // Per-arm Nelson-Aalen curves for 3->4 under the unrestricted scenario.
  std::array<StepCurve, 2> pp_nelson_aalen;
  double horizon = 0.0;  // last event or censoring time across both arms

  bool ok() const;
  std::string first_error() const;
};

MultistateFit fit_multistate(const TransitionTable& table, PostProgressionScenario scenario,
                             const CoxOptions& options = {});

// Cumulative hazards for one arm, indexed like kTransitions. Throws
// CoxFitError when a needed transition failed to fit.
std::array<StepCurve, kNumTransitions> arm_cumulative_hazards(const MultistateFit& fit, Arm arm);

// Per-transition Nelson-Aalen curves for one arm.
std::array<StepCurve, kNumTransitions> nelson_aalen_hazards(const TransitionTable& table, Arm arm);

// transition,hr,ci_lo,ci_hi,p_value,n_events
std::string fit_report_csv(const MultistateFit& fit);

}  // namespace msm
