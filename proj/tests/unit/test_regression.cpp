#include "oracles.hpp"
#include "survregime/errors.hpp"
#include "survregime/nonparam.hpp"
#include "survregime/regression.hpp"
#include "survregime/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace survregime;

namespace {

Eigen::MatrixXd intercept_only(std::size_t n) { return Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 1); }

}  // namespace

TEST_CASE("intercept-only logistic fits") {
  const std::vector<int> balanced{1, 1, 0, 0};
  CHECK(std::abs(fit_logistic(intercept_only(4), balanced).theta(0)) < 1e-10);
  const std::vector<int> three{1, 1, 1, 0};
  const auto fit = fit_logistic(intercept_only(4), three);
  CHECK(fit.theta(0) == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(fit.converged);
}

TEST_CASE("perfect prediction is a separation error") {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  try {
    fit_logistic(with_intercept(x), y);
    FAIL("expected separation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::separation);
  }
}

TEST_CASE("collinear logistic design is singular") {
  Eigen::MatrixXd x(5, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
  const std::vector<int> y{0, 1, 0, 1, 1};
  try {
    fit_logistic(with_intercept(x), y);
    FAIL("expected singular design");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singular_design);
  }
}

TEST_CASE("predict_propensity examples") {
  LogisticFit f;
  f.theta = Eigen::Vector2d(0.0, 0.0);
  const double x[] = {3.7};
  CHECK(predict_propensity(f, x) == 0.5);
  f.theta = Eigen::Vector2d(std::log(3.0), 0.0);
  CHECK(predict_propensity(f, x) == doctest::Approx(0.75));
  LogisticFit g;
  g.theta = Eigen::Vector3d(0.0, 1.0, 0.0);
  const double x0[] = {0.0, 5.0};
  CHECK(predict_propensity(g, x0) == 0.5);
}

TEST_CASE("logistic score vanishes at the fit") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 200;
    Eigen::MatrixXd x(n, 2);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform(-2, 2);
      x(i, 1) = rng.uniform(-2, 2);
      y[static_cast<std::size_t>(i)] = rng.bernoulli(inverse_logit(x(i, 0) - 0.5 * x(i, 1)));
    }
    const auto d = with_intercept(x);
    const auto fit = fit_logistic(d, y);
    CHECK(logistic_score(d, y, fit.theta).norm() < 1e-6);
  }
}

TEST_CASE("cox on a null design reproduces Nelson-Aalen") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5, 1);
  SurvivalSample s(x, {0, 0, 0, 0, 0}, {1, 2, 2, 3, 5}, {1, 1, 0, 1, 1});
  const auto fit = fit_cox(s);
  CHECK(fit.beta.norm() == 0.0);
  const std::vector<double> ones(5, 1.0);
  const auto na = weighted_nelson_aalen(s.time(), s.event(), ones);
  for (double u : {0.5, 1.0, 2.0, 2.5, 3.0, 5.0, 9.0}) CHECK(fit.breslow_baseline(u) == doctest::Approx(na(u)).epsilon(1e-14));
}

TEST_CASE("cox 1-d fit matches the grid oracle") {
  const std::vector<double> z{0, 1, 0, 1, 1, 0};
  const std::vector<double> t{1, 2, 3, 4, 5, 6};
  const std::vector<int> e(6, 1);
  Eigen::MatrixXd d(6, 1);
  for (int i = 0; i < 6; ++i) d(i, 0) = z[static_cast<std::size_t>(i)];
  const auto fit = fit_cox(d, t, e);
  const double grid = oracle::cox_grid_1d(z, t, e, -5.0, 5.0);
  CHECK(std::abs(fit.beta(0) - grid) < 1e-4);
  CHECK(cox_score(d, t, e, fit.beta).norm() < 1e-6);
}

TEST_CASE("cox is invariant to rescaling time") {
  Rng rng(5);
  const int n = 40;
  Eigen::MatrixXd d(n, 2);
  std::vector<double> t(n), t2(n);
  std::vector<int> e(n);
  for (int i = 0; i < n; ++i) {
    d(i, 0) = rng.uniform(-1, 1);
    d(i, 1) = rng.bernoulli(0.5);
    t[static_cast<std::size_t>(i)] = rng.exponential(std::exp(0.5 * d(i, 0)));
    t2[static_cast<std::size_t>(i)] = 2.0 * t[static_cast<std::size_t>(i)];
    e[static_cast<std::size_t>(i)] = rng.bernoulli(0.8);
  }
  const auto a = fit_cox(d, t, e);
  const auto b = fit_cox(d, t2, e);
  CHECK((a.beta - b.beta).norm() < 1e-12);
}

TEST_CASE("predict_survival arithmetic") {
  CoxFit fit;
  fit.beta = Eigen::VectorXd::Zero(3);
  fit.breslow_baseline.jump_times = {1.0, 2.0};
  fit.breslow_baseline.values = {0.25, 0.6};
  fit.breslow_baseline.initial_value = 0.0;
  const double xv[] = {0.5};
  CHECK(predict_survival(fit, 0.0, 1, xv) == 1.0);
  CHECK(predict_survival(fit, 2.5, 1, xv) == doctest::Approx(std::exp(-fit.breslow_baseline(2.5))));
  // beta' nu = log 2 through the treatment coefficient alone
  fit.beta(1) = std::log(2.0);
  const double x0[] = {0.0};
  CHECK(predict_survival(fit, 2.5, 1, x0) == doctest::Approx(std::exp(-2.0 * fit.breslow_baseline(2.5))));
  CHECK(relative_hazard(fit, 1, x0) == doctest::Approx(2.0));
}

TEST_CASE("cox design row layout") {
  const double x[] = {2.0, -1.0};
  const auto r = cox_design_row(1.0, x);
  REQUIRE(r.size() == 5);
  CHECK(r(0) == 2.0);
  CHECK(r(1) == -1.0);
  CHECK(r(2) == 1.0);
  CHECK(r(3) == 2.0);
  CHECK(r(4) == -1.0);
  CHECK(cox_design_row(0.0, x)(3) == 0.0);
}

TEST_CASE("cox score vanishes and breslow at zero equals Nelson-Aalen on random data") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 120;
    Eigen::MatrixXd x(n, 2);
    std::vector<int> a(n), e(n);
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      x(i, 0) = rng.uniform(-2, 2);
      x(i, 1) = rng.uniform(-2, 2);
      a[ii] = rng.bernoulli(0.5);
      t[ii] = std::round(10.0 * rng.exponential(std::exp(0.3 * x(i, 0) - 0.5 * a[ii]))) / 10.0 + 0.1;
      e[ii] = rng.bernoulli(0.8);
    }
    SurvivalSample s(x, a, t, e);
    const auto fit = fit_cox(s);
    const auto d = cox_design(s);
    CHECK(cox_score(d, t, e, fit.beta).norm() < 1e-6);
    const auto b0 = breslow_baseline(d, t, e, Eigen::VectorXd::Zero(d.cols()));
    const auto na = weighted_nelson_aalen(t, e, std::vector<double>(n, 1.0));
    REQUIRE(b0.jump_times == na.jump_times);
    for (std::size_t k = 0; k < na.values.size(); ++k) CHECK(b0.values[k] == na.values[k]);
  }
}

TEST_CASE("cox influence of beta averages to zero") {
  Rng rng(9);
  const int n = 150;
  Eigen::MatrixXd x(n, 1);
  std::vector<int> a(n), e(n);
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    x(i, 0) = rng.uniform(-1, 1);
    a[ii] = rng.bernoulli(0.5);
    t[ii] = rng.exponential(std::exp(0.4 * x(i, 0)));
    e[ii] = rng.bernoulli(0.85);
  }
  SurvivalSample s(x, a, t, e);
  const auto fit = fit_cox(s);
  const auto inf = cox_influence(fit, cox_design(s), t, e);
  CHECK(inf.beta.colwise().mean().norm() < 1e-8);
  CHECK(inf.baseline_increments.colwise().mean().norm() < 1e-8);
}
