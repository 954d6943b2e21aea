#include <cmath>
#include <random>

#include "doctest.h"
#include "msm/estimate.hpp"
#include "support.hpp"

using namespace msm;

namespace {

TransitionTable two_arm(std::mt19937_64& gen, std::size_t n, double weibull_shape_exp) {
  std::uniform_real_distribution<double> u(0, 1);
  TransitionTable rows;
  for (std::size_t i = 0; i < n; ++i) {
    const int z = static_cast<int>(i % 2);
    const double e = -std::log(u(gen));
    // control: exponential(0.1); experimental: Weibull with the given shape
    const double t = z ? 10.0 * std::pow(e, 1.0 / weibull_shape_exp) : 10.0 * e;
    const double c = -std::log(u(gen)) * 40.0;
    rows.push_back({"r", 0, 0.0, std::min(t, c), t <= c ? 1 : 0, {static_cast<double>(z)}});
  }
  return rows;
}

// score test for one covariate from risk sets computed directly
double brute_ph_chisq(const TransitionTable& rows, const CoxFit& fit) {
  const double b = fit.beta[0];
  std::vector<double> times, resid, var;
  for (const auto& r : rows) {
    if (!r.status) continue;
    double s0 = 0, s1 = 0, s2 = 0;
    for (const auto& q : rows) {
      if (q.tstart < r.tstop && r.tstop <= q.tstop) {
        const double z = q.covariates[0], w = std::exp(b * z);
        s0 += w;
        s1 += w * z;
        s2 += w * z * z;
      }
    }
    times.push_back(r.tstop);
    resid.push_back(r.covariates[0] - s1 / s0);
    var.push_back(s2 / s0 - (s1 / s0) * (s1 / s0));
  }
  double gbar = 0;
  for (double t : times) gbar += t;
  gbar /= times.size();
  double u = 0, itt = 0, itb = 0, ibb = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double x = times[k] - gbar;
    u += x * resid[k];
    itt += x * x * var[k];
    itb += x * var[k];
    ibb += var[k];
  }
  return u * u / (itt - itb * itb / ibb);
}

}  // namespace

TEST_CASE("chi-square tail") {
  CHECK(chi_square_upper_tail(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_square_upper_tail(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_square_upper_tail(0.0, 1) == 1.0);
}

TEST_CASE("ph_test statistic matches a direct computation") {
  std::mt19937_64 gen(3);
  const auto rows = two_arm(gen, 150, 1.0);
  const std::array<std::size_t, 1> arm{0};
  const CoxFit fit = cox_fit(rows, arm);
  const PHTestResult r = ph_test(fit);
  CHECK(r.chisq[0] == doctest::Approx(brute_ph_chisq(rows, fit)).epsilon(1e-9));
  CHECK(r.global_chisq == doctest::Approx(r.chisq[0]).epsilon(1e-12));
  CHECK(r.df[0] == 1.0);
  CHECK(r.p_value[0] == doctest::Approx(chi_square_upper_tail(r.chisq[0], 1)).epsilon(1e-12));
  for (auto tr : {TimeTransform::km, TimeTransform::rank}) {
    const PHTestResult other = ph_test(fit, tr);
    CHECK(other.p_value[0] >= 0.0);
    CHECK(other.p_value[0] <= 1.0);
  }
}

TEST_CASE("ph_test needs at least two events") {
  TransitionTable rows{{"a", 0, 0, 5, 1, {0}}, {"b", 0, 0, 6, 0, {1}}, {"c", 0, 0, 7, 0, {1}}};
  const std::array<std::size_t, 1> arm{0};
  CHECK_THROWS_WITH_AS(ph_test(cox_fit(rows, arm)), doctest::Contains("insufficient events"), CoxFitError);
}

TEST_CASE("ph_test detects crossing hazards and holds size under proportionality") {
  std::mt19937_64 gen(5);
  const std::array<std::size_t, 1> arm{0};
  const PHTestResult crossing = ph_test(cox_fit(two_arm(gen, 600, 2.5), arm));
  CHECK(crossing.p_value[0] < 1e-4);

  int reject = 0;
  const int fits = 300;
  for (int i = 0; i < fits; ++i) reject += ph_test(cox_fit(two_arm(gen, 100, 1.0), arm)).p_value[0] < 0.05;
  INFO("rejections " << reject);
  CHECK(reject >= 6);
  CHECK(reject <= 27);
}

TEST_CASE("ph_test has power against a hazard ratio that flips at the median") {
  // hazard ratio 2 before the control median, 0.5 after it
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0, 1);
  const std::array<std::size_t, 1> arm{0};
  const double lambda = 0.1, m = std::log(2.0) / lambda;
  int reject = 0;
  for (int rep = 0; rep < 100; ++rep) {
    TransitionTable rows;
    for (int i = 0; i < 600; ++i) {
      const int z = i % 2;
      const double e = -std::log(u(gen));
      const double h1 = lambda * (z ? 2.0 : 1.0), h2 = lambda * (z ? 0.5 : 1.0);
      const double t = e < h1 * m ? e / h1 : m + (e - h1 * m) / h2;
      const double c = -std::log(u(gen)) / 0.02;
      rows.push_back({"r", 0, 0.0, std::min(t, c), t <= c ? 1 : 0, {static_cast<double>(z)}});
    }
    reject += ph_test(cox_fit(rows, arm)).p_value[0] < 0.05;
  }
  CHECK(reject > 80);
}
