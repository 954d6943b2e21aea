#include "support.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace msm::testing {

Cohort constant_hazard_cohort(const Rates& rates, std::size_t n, std::mt19937_64& gen, Arm arm,
                              double followup, double censor_rate, const std::string& prefix) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto expo = [&](double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-unif(gen)) / rate;
  };
  Cohort out;
  for (std::size_t i = 0; i < n; ++i) {
    PatientRecord p;
    p.patient_id = prefix + std::to_string(i + 1);
    p.arm = arm;
    double cens = followup;
    if (censor_rate > 0.0) cens = std::min(cens, expo(censor_rate));
    int state = 1;
    double t = 0.0;
    for (;;) {
      double total = 0.0;
      std::vector<std::pair<int, double>> outs;
      for (std::size_t k = 0; k < kNumTransitions; ++k)
        if (kTransitions[k].from == state && rates[k] > 0.0) {
          outs.emplace_back(kTransitions[k].to, rates[k]);
          total += rates[k];
        }
      const double next = t + expo(total);
      if (!(next <= cens)) {
        p.last_contact_time = std::isfinite(cens) ? cens : t + 1.0;
        break;
      }
      double u = unif(gen) * total;
      int to = outs.back().first;
      for (auto [s, r] : outs) {
        if (u < r) { to = s; break; }
        u -= r;
      }
      t = next;
      if (to == 2) p.response_time = t;
      if (to == 3) p.progression_time = t;
      if (to == 4) {
        p.death_time = t;
        p.last_contact_time = t;
        break;
      }
      state = to;
    }
    out.push_back(p);
  }
  return out;
}

Eigen::Matrix4d intensity_matrix(const Rates& rates) {
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  for (std::size_t k = 0; k < kNumTransitions; ++k) {
    q(kTransitions[k].from - 1, kTransitions[k].to - 1) += rates[k];
    q(kTransitions[k].from - 1, kTransitions[k].from - 1) -= rates[k];
  }
  return q;
}

Eigen::Matrix4d exact_transition_matrix(const Rates& rates, double t) {
  const Eigen::Matrix4d qt = intensity_matrix(rates) * t;
  return qt.exp();
}

CumulativeHazards linear_cumhaz(const Rates& rates, double h, double t_max) {
  CumulativeHazards out;
  const auto steps = static_cast<std::size_t>(std::llround(t_max / h));
  for (std::size_t k = 0; k < kNumTransitions; ++k) {
    out[k] = StepCurve(0.0);
    if (rates[k] <= 0.0) continue;
    for (std::size_t i = 1; i <= steps; ++i) out[k].push_back(h * static_cast<double>(i), rates[k] * h * static_cast<double>(i));
  }
  return out;
}

double binary_partial_loglik(const BinaryCoxData& d, double beta) {
  // at-risk counts per arm at each event time, by direct counting
  std::vector<double> times;
  for (std::size_t i = 0; i < d.time.size(); ++i)
    if (d.status[i]) times.push_back(d.time[i]);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double ll = 0.0;
  const double eb = std::exp(beta);
  for (double t : times) {
    double n0 = 0, n1 = 0, d_all = 0, d1 = 0;
    for (std::size_t i = 0; i < d.time.size(); ++i) {
      if (d.time[i] >= t) (d.z[i] ? n1 : n0) += 1.0;
      if (d.time[i] == t && d.status[i]) {
        d_all += 1.0;
        d1 += d.z[i];
      }
    }
    ll += d1 * beta - d_all * std::log(n0 + n1 * eb);
  }
  return ll;
}

double grid_search_beta(const BinaryCoxData& d, double lo, double hi, double step) {
  // precompute (n0, n1, d, d1) per event time, then scan the grid
  std::vector<double> times;
  for (std::size_t i = 0; i < d.time.size(); ++i)
    if (d.status[i]) times.push_back(d.time[i]);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  struct Term { double n0, n1, d, d1; };
  std::vector<Term> terms;
  for (double t : times) {
    Term term{0, 0, 0, 0};
    for (std::size_t i = 0; i < d.time.size(); ++i) {
      if (d.time[i] >= t) (d.z[i] ? term.n1 : term.n0) += 1.0;
      if (d.time[i] == t && d.status[i]) {
        term.d += 1.0;
        term.d1 += d.z[i];
      }
    }
    terms.push_back(term);
  }
  const auto n = static_cast<long>(std::llround((hi - lo) / step));
  double best = lo, best_ll = -std::numeric_limits<double>::infinity();
  for (long k = 0; k <= n; ++k) {
    const double b = lo + step * static_cast<double>(k);
    const double eb = std::exp(b);
    double ll = 0.0;
    for (const auto& t : terms) ll += t.d1 * b - t.d * std::log(t.n0 + t.n1 * eb);
    if (ll > best_ll) {
      best_ll = ll;
      best = b;
    }
  }
  return best;
}

TransitionTable rows_from(const BinaryCoxData& d) {
  TransitionTable rows;
  for (std::size_t i = 0; i < d.time.size(); ++i)
    rows.push_back({"r" + std::to_string(i), 0, 0.0, d.time[i], d.status[i], {static_cast<double>(d.z[i])}});
  return rows;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace msm::testing
