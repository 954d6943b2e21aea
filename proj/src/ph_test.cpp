#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "cox_internal.hpp"
#include "msm/estimate.hpp"

namespace msm {

double chi_square_upper_tail(double x, double df) {
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

SchoenfeldResiduals schoenfeld_residuals(const CoxFit& fit) {
  if (!fit.data) throw std::invalid_argument("schoenfeld_residuals: fit carries no data");
  const CoxData& d = *fit.data;
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < fit.aliased.size(); ++j)
    if (!fit.aliased[j]) active.push_back(j);
  detail::RiskSetSweep sweep(d, active);
  Eigen::VectorXd beta(static_cast<Eigen::Index>(active.size()));
  for (std::size_t a = 0; a < active.size(); ++a)
    beta[static_cast<Eigen::Index>(a)] = fit.beta[static_cast<Eigen::Index>(active[a])];

  std::vector<std::pair<double, Eigen::VectorXd>> rows;
  sweep.sweep(beta, fit.tie_method, false, [&](const detail::EventGroup& g, const detail::GroupTotals& t) {
    for (auto i : g.members)
      rows.emplace_back(g.time, sweep.centered().row(static_cast<Eigen::Index>(i)).transpose() - t.mean);
  });
  std::reverse(rows.begin(), rows.end());

  SchoenfeldResiduals out;
  const auto p = static_cast<Eigen::Index>(d.n_covariates());
  out.residual = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(rows.size()), p,
                                           std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.time.push_back(rows[k].first);
    for (std::size_t a = 0; a < active.size(); ++a)
      out.residual(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(active[a])) =
          rows[k].second[static_cast<Eigen::Index>(a)];
  }
  return out;
}

namespace {

std::vector<double> transform_times(const CoxFit& fit, const std::vector<double>& times,
                                    TimeTransform transform) {
  std::vector<double> g(times.size());
  switch (transform) {
    case TimeTransform::identity:
      return times;
    case TimeTransform::rank: {
      // average ranks for ties; times are already sorted
      for (std::size_t i = 0; i < times.size();) {
        std::size_t j = i;
        while (j < times.size() && times[j] == times[i]) ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) g[k] = r;
        i = j;
      }
      return g;
    }
    case TimeTransform::km: {
      TransitionTable rows;
      const CoxData& d = *fit.data;
      for (std::size_t i = 0; i < d.size(); ++i)
        rows.push_back({"", 0, d.tstart[i], d.tstop[i], d.status[i], {}});
      const StepCurve h = nelson_aalen(rows);
      // left-continuous product-limit survival at each event time
      StepCurve s(1.0);
      double surv = 1.0;
      double prev = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) {
        surv *= 1.0 - (h.values()[k] - prev);
        prev = h.values()[k];
        s.push_back(h.times()[k], surv);
      }
      for (std::size_t k = 0; k < times.size(); ++k) g[k] = 1.0 - s.left_limit(times[k]);
      return g;
    }
  }
  return g;
}

}  // namespace

PHTestResult ph_test(const CoxFit& fit, TimeTransform transform) {
  if (!fit.data) throw std::invalid_argument("ph_test: fit carries no data");
  if (fit.n_events < 2) throw CoxFitError("insufficient events for the proportional-hazards test");
  if (!fit.usable() || fit.degenerate) throw CoxFitError("ph_test: fit did not converge");

  const CoxData& d = *fit.data;
  const auto p = static_cast<std::size_t>(fit.beta.size());
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < p; ++j)
    if (!fit.aliased[j]) active.push_back(j);
  if (active.empty()) throw CoxFitError("singular residual covariance: no estimable covariates");
  const auto q = static_cast<Eigen::Index>(active.size());

  detail::RiskSetSweep sweep(d, active);
  Eigen::VectorXd beta(q);
  for (Eigen::Index a = 0; a < q; ++a) beta[a] = fit.beta[static_cast<Eigen::Index>(active[static_cast<std::size_t>(a)])];

  // per event time: summed Schoenfeld residuals and information
  struct Group {
    double time;
    std::size_t events;
    Eigen::VectorXd resid;
    Eigen::MatrixXd info;
  };
  std::vector<Group> groups;
  sweep.sweep(beta, fit.tie_method, true, [&](const detail::EventGroup& g, const detail::GroupTotals& t) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(q);
    for (auto i : g.members) r += sweep.centered().row(static_cast<Eigen::Index>(i)).transpose() - t.mean;
    groups.push_back({g.time, g.members.size(), r, t.info});
  });
  std::reverse(groups.begin(), groups.end());

  std::vector<double> times;
  for (const auto& g : groups) times.insert(times.end(), g.events, g.time);
  const std::vector<double> g_all = transform_times(fit, times, transform);
  const double gbar = std::accumulate(g_all.begin(), g_all.end(), 0.0) / static_cast<double>(g_all.size());

  // Score test of theta = 0 in beta(t) = beta + theta * g(t): the score is
  // the g-weighted sum of Schoenfeld residuals, and its variance is the
  // theta block of the information after adjusting for beta.
  Eigen::VectorXd u = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd i_tt = Eigen::MatrixXd::Zero(q, q), i_tb = i_tt, i_bb = i_tt;
  std::size_t pos = 0;
  for (const auto& grp : groups) {
    const double x = g_all[pos] - gbar;  // constant within a tied group
    pos += grp.events;
    u += x * grp.resid;
    i_tt += x * x * grp.info;
    i_tb += x * grp.info;
    i_bb += grp.info;
  }
  const Eigen::LDLT<Eigen::MatrixXd> bb(i_bb);
  if (bb.info() != Eigen::Success || !(bb.vectorD().array() > 0.0).all())
    throw CoxFitError("singular residual covariance");
  const Eigen::MatrixXd s = i_tt - i_tb * bb.solve(i_tb.transpose());
  const Eigen::LDLT<Eigen::MatrixXd> ss(s);
  if (ss.info() != Eigen::Success || !(ss.vectorD().array() > 1e-12 * s.diagonal().cwiseAbs().maxCoeff()).all())
    throw CoxFitError("singular residual covariance: all event times transform equally");

  PHTestResult out;
  out.transform = transform;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.chisq.assign(p, nan);
  out.df.assign(p, nan);
  out.p_value.assign(p, nan);
  for (Eigen::Index a = 0; a < q; ++a) {
    const auto j = active[static_cast<std::size_t>(a)];
    out.chisq[j] = u[a] * u[a] / s(a, a);
    out.df[j] = 1.0;
    out.p_value[j] = chi_square_upper_tail(out.chisq[j], 1.0);
  }
  out.global_chisq = u.dot(ss.solve(u));
  out.global_df = static_cast<double>(q);
  out.global_p_value = chi_square_upper_tail(out.global_chisq, out.global_df);
  return out;
}

}  // namespace msm
