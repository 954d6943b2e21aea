#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "msm/estimate.hpp"
#include "cox_internal.hpp"

namespace msm {

CoxData make_cox_data(const TransitionTable& rows, std::span<const std::size_t> covariates) {
  CoxData d;
  const auto n = rows.size();
  d.tstart.reserve(n);
  d.tstop.reserve(n);
  d.status.reserve(n);
  d.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i];
    d.tstart.push_back(r.tstart);
    d.tstop.push_back(r.tstop);
    d.status.push_back(r.status);
    for (std::size_t j = 0; j < covariates.size(); ++j) {
      if (covariates[j] >= r.covariates.size())
        throw std::invalid_argument("make_cox_data: covariate index out of range");
      d.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.covariates[covariates[j]];
    }
  }
  return d;
}

namespace detail {

RiskSetSweep::RiskSetSweep(const CoxData& data, std::vector<std::size_t> active)
    : data_(data), active_(std::move(active)) {
  const std::size_t n = data.size();
  const auto p = static_cast<Eigen::Index>(active_.size());
  zc_.resize(static_cast<Eigen::Index>(n), p);
  center_.setZero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto col = data.z.col(static_cast<Eigen::Index>(active_[static_cast<std::size_t>(j)]));
    center_[j] = n ? col.mean() : 0.0;
    zc_.col(j) = col.array() - center_[j];
  }
  by_stop_.resize(n);
  std::iota(by_stop_.begin(), by_stop_.end(), 0);
  by_start_ = by_stop_;
  std::sort(by_stop_.begin(), by_stop_.end(),
            [&](auto a, auto b) { return data.tstop[a] > data.tstop[b]; });
  std::sort(by_start_.begin(), by_start_.end(),
            [&](auto a, auto b) { return data.tstart[a] > data.tstart[b]; });
  std::vector<std::size_t> ev;
  for (std::size_t i = 0; i < n; ++i)
    if (data.status[i] == 1) ev.push_back(i);
  std::sort(ev.begin(), ev.end(), [&](auto a, auto b) { return data.tstop[a] > data.tstop[b]; });
  for (std::size_t i = 0; i < ev.size();) {
    EventGroup g;
    g.time = data.tstop[ev[i]];
    for (; i < ev.size() && data.tstop[ev[i]] == g.time; ++i) g.members.push_back(ev[i]);
    groups_.push_back(std::move(g));
  }
}

void RiskSetSweep::sweep(const Eigen::VectorXd& beta, TieMethod ties, bool derivatives,
                         const GroupVisitor& visit) const {
  const auto p = static_cast<Eigen::Index>(active_.size());
  const std::size_t n = data_.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = p ? std::exp(zc_.row(static_cast<Eigen::Index>(i)).dot(beta)) : 1.0;

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  std::size_t add = 0, drop = 0;

  GroupTotals tot;
  tot.mean.resize(0);
  for (const auto& g : groups_) {
    while (add < n && data_.tstop[by_stop_[add]] >= g.time) {
      const auto i = by_stop_[add++];
      s0 += w[i];
      if (p) {
        const auto zi = zc_.row(static_cast<Eigen::Index>(i)).transpose();
        s1 += w[i] * zi;
        if (derivatives) s2.noalias() += w[i] * zi * zi.transpose();
      }
    }
    while (drop < n && data_.tstart[by_start_[drop]] >= g.time) {
      const auto i = by_start_[drop++];
      s0 -= w[i];
      if (p) {
        const auto zi = zc_.row(static_cast<Eigen::Index>(i)).transpose();
        s1 -= w[i] * zi;
        if (derivatives) s2.noalias() -= w[i] * zi * zi.transpose();
      }
    }
    // event-set sums
    const auto d = g.members.size();
    double d0 = 0.0;
    Eigen::VectorXd d1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd zsum = Eigen::VectorXd::Zero(p);
    double eta_sum = 0.0;
    for (auto i : g.members) {
      const auto zi = zc_.row(static_cast<Eigen::Index>(i)).transpose();
      d0 += w[i];
      if (p) {
        d1 += w[i] * zi;
        if (derivatives) d2.noalias() += w[i] * zi * zi.transpose();
        zsum += zi;
        eta_sum += zi.dot(beta);
      }
    }
    tot.time = g.time;
    tot.n_events = d;
    tot.risk_weight = s0;
    tot.loglik = eta_sum;
    tot.score = zsum;
    tot.info = Eigen::MatrixXd::Zero(p, p);
    tot.mean = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k < d; ++k) {
      const double f = ties == TieMethod::efron ? static_cast<double>(k) / static_cast<double>(d) : 0.0;
      const double den = s0 - f * d0;
      tot.loglik -= std::log(den);
      if (p) {
        const Eigen::VectorXd a = (s1 - f * d1) / den;
        tot.score -= a;
        tot.mean += a / static_cast<double>(d);
        if (derivatives) tot.info += (s2 - f * d2) / den - a * a.transpose();
      }
    }
    visit(g, tot);
  }
}

}  // namespace detail

namespace {

std::vector<std::size_t> active_columns(const CoxData& data, std::vector<bool>& aliased) {
  const auto p = data.n_covariates();
  aliased.assign(p, false);
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = data.z.col(static_cast<Eigen::Index>(j));
    const bool constant = data.size() == 0 || (col.array() == col[0]).all();
    aliased[j] = constant;
    if (!constant) active.push_back(j);
  }
  return active;
}

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

Evaluation evaluate(const detail::RiskSetSweep& sweep, const Eigen::VectorXd& beta,
                    TieMethod ties, bool derivatives) {
  const auto p = beta.size();
  Evaluation e;
  e.score = Eigen::VectorXd::Zero(p);
  e.info = Eigen::MatrixXd::Zero(p, p);
  sweep.sweep(beta, ties, derivatives, [&](const detail::EventGroup&, const detail::GroupTotals& t) {
    e.loglik += t.loglik;
    if (p) {
      e.score += t.score;
      if (derivatives) e.info += t.info;
    }
  });
  return e;
}

std::string fmt_trace(int iter, double loglik, const Eigen::VectorXd& beta, double max_score, int halvings) {
  std::ostringstream os;
  os.precision(12);
  os << "iter " << iter << ": loglik=" << loglik << " max|score|=" << max_score << " halvings=" << halvings
     << " beta=[";
  for (Eigen::Index j = 0; j < beta.size(); ++j) os << (j ? "," : "") << beta[j];
  os << "]";
  return os.str();
}

// Breslow increments d_k / sum_{risk} exp(beta'z), with z uncentered so the
// curve is the hazard at Z = 0.
StepCurve breslow_baseline(const detail::RiskSetSweep& sweep, const Eigen::VectorXd& beta) {
  std::vector<std::pair<double, double>> inc;
  const double shift = std::exp(sweep.center().dot(beta));
  sweep.sweep(beta, TieMethod::breslow, false, [&](const detail::EventGroup& g, const detail::GroupTotals& t) {
    inc.emplace_back(g.time, static_cast<double>(g.members.size()) / (t.risk_weight * shift));
  });
  std::reverse(inc.begin(), inc.end());
  StepCurve curve(0.0);
  double cum = 0.0;
  for (auto [time, dh] : inc) {
    cum += dh;
    curve.push_back(time, cum);
  }
  return curve;
}

}  // namespace

double partial_loglik(const CoxData& data, const Eigen::VectorXd& beta, TieMethod ties) {
  if (static_cast<std::size_t>(beta.size()) != data.n_covariates())
    throw std::invalid_argument("partial_loglik: beta has wrong dimension");
  std::vector<std::size_t> all(data.n_covariates());
  std::iota(all.begin(), all.end(), 0);
  // centring shifts numerator and denominator of every term equally
  detail::RiskSetSweep sweep(data, all);
  return evaluate(sweep, beta, ties, false).loglik;
}

double CoxFit::standard_error(std::size_t j) const {
  const auto jj = static_cast<Eigen::Index>(j);
  return std::sqrt(std::max(0.0, covariance(jj, jj)));
}

double CoxFit::wald_p_value(std::size_t j) const {
  if (j < aliased.size() && aliased[j]) return std::numeric_limits<double>::quiet_NaN();
  const double se = standard_error(j);
  if (!(se > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::abs(beta[static_cast<Eigen::Index>(j)]) / se / std::sqrt(2.0));
}

std::pair<double, double> CoxFit::hazard_ratio_ci(std::size_t j, double z) const {
  const double b = beta[static_cast<Eigen::Index>(j)];
  const double se = standard_error(j);
  return {std::exp(b - z * se), std::exp(b + z * se)};
}

CoxFit cox_fit(std::shared_ptr<const CoxData> data, const CoxOptions& options) {
  if (!data) throw std::invalid_argument("cox_fit: no data");
  const CoxData& d = *data;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!(d.tstart[i] < d.tstop[i])) throw std::invalid_argument("cox_fit: rows need tstart < tstop");

  CoxFit fit;
  fit.data = data;
  fit.tie_method = options.ties;
  const auto p_all = static_cast<Eigen::Index>(d.n_covariates());
  fit.beta = Eigen::VectorXd::Zero(p_all);
  fit.covariance = Eigen::MatrixXd::Zero(p_all, p_all);
  fit.n_events = static_cast<int>(std::count(d.status.begin(), d.status.end(), 1));
  fit.baseline_cumhaz = StepCurve(0.0);
  fit.aliased.assign(d.n_covariates(), false);

  if (fit.n_events == 0) {
    fit.degenerate = true;
    fit.converged = true;
    return fit;
  }

  const auto active = active_columns(d, fit.aliased);
  const auto p = static_cast<Eigen::Index>(active.size());
  detail::RiskSetSweep sweep(d, active);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Evaluation cur = evaluate(sweep, beta, options.ties, true);
  fit.loglik_null = cur.loglik;

  if (p == 0) {
    fit.converged = true;
    fit.loglik = cur.loglik;
  } else {
    for (int iter = 1;; ++iter) {
      const double max_score = cur.score.cwiseAbs().maxCoeff();
      if (max_score < options.score_tolerance) {
        fit.converged = true;
        break;
      }
      if (iter > options.max_iterations) break;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.info);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
          (ldlt.vectorD().array() <= 1e-300).any()) {
        // no curvature left: the likelihood is flat along some direction
        if ((beta.cwiseAbs().array() > options.monotone_threshold).any()) break;
        throw CoxFitError("singular information matrix", fit.trace);
      }
      const Eigen::VectorXd step = ldlt.solve(cur.score);
      Eigen::VectorXd next = beta + step;
      Evaluation cand = evaluate(sweep, next, options.ties, true);
      int halvings = 0;
      while (!(cand.loglik >= cur.loglik) && halvings < options.max_step_halvings) {
        ++halvings;
        next = beta + step * std::ldexp(1.0, -halvings);
        cand = evaluate(sweep, next, options.ties, true);
      }
      if (!(cand.loglik >= cur.loglik)) {
        // no ascent along the Newton direction: treat as stationary
        fit.trace.push_back(fmt_trace(iter, cur.loglik, beta, max_score, halvings));
        fit.converged = true;
        break;
      }
      const double rel = std::abs(cand.loglik - cur.loglik) / std::max(std::abs(cand.loglik), 1e-300);
      beta = next;
      cur = std::move(cand);
      fit.iterations = iter;
      fit.trace.push_back(fmt_trace(iter, cur.loglik, beta, cur.score.cwiseAbs().maxCoeff(), halvings));
      if (rel < options.loglik_tolerance) {
        fit.converged = true;
        break;
      }
    }
    fit.loglik = cur.loglik;
    fit.monotone = (beta.cwiseAbs().array() > options.monotone_threshold).any();
    if (!fit.converged && !fit.monotone)
      throw CoxFitError("Newton-Raphson did not converge in " + std::to_string(options.max_iterations) +
                            " iterations",
                        fit.trace);

    Eigen::MatrixXd cov_active = Eigen::MatrixXd::Zero(p, p);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cur.info);
    if (lu.isInvertible()) cov_active = lu.inverse();
    else if (!fit.monotone) throw CoxFitError("singular information matrix at the solution", fit.trace);
    cov_active = 0.5 * (cov_active + cov_active.transpose());
    for (Eigen::Index a = 0; a < p; ++a) {
      fit.beta[static_cast<Eigen::Index>(active[static_cast<std::size_t>(a)])] = beta[a];
      for (Eigen::Index b = 0; b < p; ++b)
        fit.covariance(static_cast<Eigen::Index>(active[static_cast<std::size_t>(a)]),
                       static_cast<Eigen::Index>(active[static_cast<std::size_t>(b)])) = cov_active(a, b);
    }
  }
  fit.baseline_cumhaz = breslow_baseline(sweep, beta);
  return fit;
}

CoxFit cox_fit(const TransitionTable& rows, std::span<const std::size_t> covariates,
               const CoxOptions& options) {
  return cox_fit(std::make_shared<const CoxData>(make_cox_data(rows, covariates)), options);
}

StepCurve predict_cumulative_hazard(const CoxFit& fit, std::span<const double> z) {
  if (z.size() != static_cast<std::size_t>(fit.beta.size()))
    throw std::invalid_argument("predict_cumulative_hazard: covariate dimension mismatch");
  if (!fit.usable()) throw CoxFitError("predict_cumulative_hazard: fit did not converge");
  double eta = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) eta += fit.beta[static_cast<Eigen::Index>(j)] * z[j];
  if (eta == 0.0) return fit.baseline_cumhaz;
  return fit.baseline_cumhaz.scaled(std::exp(eta));
}

}  // namespace msm
