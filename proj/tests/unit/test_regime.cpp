#include "oracles.hpp"
#include "survregime/errors.hpp"
#include "survregime/estimator.hpp"
#include "survregime/regime.hpp"
#include "survregime/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace survregime;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SurvivalSample random_sample(Rng& rng, std::size_t n, std::size_t p, double censor = 0.3) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  std::vector<int> a(n), e(n);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.uniform(-2, 2);
    a[i] = rng.bernoulli(0.5);
    t[i] = std::round(rng.exponential(1.0) * 8.0) / 8.0 + 0.125;
    e[i] = rng.bernoulli(1.0 - censor);
  }
  return SurvivalSample(std::move(x), std::move(a), std::move(t), std::move(e));
}

}  // namespace

TEST_CASE("hard and smooth assignment examples") {
  const LinearRegime r(Eigen::Vector2d(0.0, 1.0));
  const double x2[] = {2.0};
  CHECK(assign(r, x2, SmoothingSpec{}) == 1.0);
  SmoothingSpec sm;
  sm.enabled = true;
  sm.bandwidth = 0.37;
  const double x0[] = {0.0};
  CHECK(assign(r, x0, sm) == 0.5);
  const double xh[] = {0.37};
  CHECK(assign(r, xh, sm) == doctest::Approx(0.8413).epsilon(1e-4));
}

TEST_CASE("regime normalization and validation") {
  const LinearRegime r(Eigen::Vector3d(3.0, 0.0, 4.0));
  CHECK(r.eta()(0) == doctest::Approx(0.6));
  CHECK(r.eta()(2) == doctest::Approx(0.8));
  CHECK_THROWS_AS(LinearRegime(Eigen::Vector2d(0.0, 0.0)), Error);
  CHECK_THROWS_AS(LinearRegime(Eigen::VectorXd()), Error);
  CHECK_THROWS_AS(LinearRegime(Eigen::Vector2d(kNaN, 1.0)), Error);
  CHECK(LinearRegime::treat_all(2).linear_predictor(std::vector<double>{5.0, -5.0}) > 0.0);
  CHECK(LinearRegime::treat_none(2).linear_predictor(std::vector<double>{5.0, -5.0}) < 0.0);
}

TEST_CASE("bandwidth arithmetic") {
  std::vector<double> lp(250);
  Rng rng(1);
  for (auto& v : lp) v = rng.normal();
  double m = 0.0;
  for (double v : lp) m += v;
  m /= 250.0;
  const double sd = oracle::sample_sd(lp);
  for (auto& v : lp) v = (v - m) / sd;
  CHECK(select_bandwidth(lp, std::cbrt(4.0)) == doctest::Approx(std::cbrt(4.0 / 250.0)).epsilon(1e-12));
  CHECK(std::cbrt(4.0 / 250.0) == doctest::Approx(0.2520).epsilon(1e-3));
  const std::vector<double> flat(10, 0.3);
  CHECK_THROWS_AS(select_bandwidth(flat, 1.0), Error);
  CHECK(normal_cdf(1.0) == doctest::Approx(0.841344746).epsilon(1e-9));
}

TEST_CASE("degenerate direction falls back to the hard rule") {
  const std::vector<double> flat(10, 0.3);
  SmoothingSpec sm;
  sm.enabled = true;
  const auto a = assign_all(flat, sm);
  CHECK_FALSE(a.smoothed);
  for (double g : a.g) CHECK(g == 1.0);
}

TEST_CASE("inverse weight examples") {
  const std::vector<int> a{1, 0, 1};
  const std::vector<double> g{1.0, 1.0, 0.5};
  const std::vector<double> ps{0.25, 0.5, 0.5};
  const auto w = ipsw_weights(a, g, ps);
  CHECK(w[0] == doctest::Approx(4.0));
  CHECK(w[1] == 0.0);
  CHECK(w[2] == doctest::Approx(1.0));
  const std::vector<double> extreme{0.0};
  const std::vector<int> one{1};
  const std::vector<double> g1{1.0};
  CHECK(ipsw_weights(one, g1, extreme)[0] == doctest::Approx(100.0));
}

TEST_CASE("treat-all value curve is the A / 0.5 weighted KM") {
  Rng rng(21);
  const auto s = random_sample(rng, 30, 2);
  const std::vector<double> ps(30, 0.5);
  const auto v = value_curve_ipsw(s, LinearRegime(Eigen::Vector3d(1, 0, 0)), ps, SmoothingSpec{});
  std::vector<double> w(30);
  for (std::size_t i = 0; i < 30; ++i) w[i] = s.treatment()[i] / 0.5;
  for (double u = 0.0; u < 5.0; u += 0.1) CHECK(v(u) == doctest::Approx(oracle::km(s.time(), s.event(), w, u)).epsilon(1e-12));
}

TEST_CASE("hard regime uses only consistent subjects") {
  Rng rng(22);
  const auto s = random_sample(rng, 25, 1, 0.0);
  const std::vector<double> ps(25, 0.5);
  const LinearRegime r(Eigen::Vector2d(0.2, 1.0));
  const auto w = ipsw_weights(s, r, ps, SmoothingSpec{});
  for (std::size_t i = 0; i < 25; ++i) {
    const bool g = 0.2 + s.covariates()(static_cast<Eigen::Index>(i), 0) >= 0.0;
    CHECK((w[i] > 0.0) == (g == (s.treatment()[i] == 1)));
  }
}

TEST_CASE("positive scaling leaves hard and auto-smoothed curves unchanged") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_sample(rng, 40, 2);
    const std::vector<double> ps(40, 0.4);
    Eigen::Vector3d eta(rng.normal(), rng.normal(), rng.normal());
    const double c = rng.uniform(0.1, 10.0);
    for (bool smooth : {false, true}) {
      SmoothingSpec sm;
      sm.enabled = smooth;
      const auto a = value_curve_ipsw(s, LinearRegime(eta), ps, sm);
      const auto b = value_curve_ipsw(s, LinearRegime(c * eta), ps, sm);
      for (double u = 0.0; u < 5.0; u += 0.25) CHECK(a(u) == doctest::Approx(b(u)).epsilon(1e-12));
    }
  }
}

TEST_CASE("smoothed curve approaches the hard curve as h shrinks") {
  Rng rng(24);
  const auto s = random_sample(rng, 50, 2);
  const std::vector<double> ps(50, 0.5);
  const LinearRegime r(Eigen::Vector3d(0.1, 0.7, -0.4));
  const auto hard = value_curve_ipsw(s, r, ps, SmoothingSpec{});
  double prev = std::numeric_limits<double>::infinity();
  for (double h : {1.0, 0.1, 0.001}) {
    SmoothingSpec sm;
    sm.enabled = true;
    sm.bandwidth = h;
    const auto soft = value_curve_ipsw(s, r, ps, sm);
    double gap = 0.0;
    for (double u = 0.0; u < 5.0; u += 0.1) gap = std::max(gap, std::abs(soft(u) - hard(u)));
    CHECK(gap <= prev + 1e-12);
    prev = gap;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("value curves match the straight-loop oracles") {
  Rng rng(25);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 12 + rng.index(9);
    const auto s = random_sample(rng, n, 2);
    std::vector<double> ps(n);
    for (auto& p : ps) p = rng.uniform(0.2, 0.8);
    const Eigen::Vector3d eta(rng.normal(), rng.normal(), rng.normal());
    const bool smooth = trial % 2 == 0;
    SmoothingSpec sm;
    sm.enabled = smooth;
    const auto v = value_curve_ipsw(s, LinearRegime(eta), ps, sm);
    for (double u = 0.0; u < 5.0; u += 0.125)
      CHECK(std::abs(v(u) - oracle::ipsw_value(s, eta, ps, smooth, sm.c0, u)) <= 1e-10);

    CoxFit cox;
    try {
      cox = fit_cox(s);
    } catch (const Error&) {
      continue;
    }
    const bool strat = trial % 4 < 2;
    CensoringModel cm = fit_censoring(s, strat);
    const auto va = value_curve_aipsw(s, LinearRegime(eta), ps, cox, cm, sm);
    std::vector<int> arm1(n), arm0(n);
    for (std::size_t i = 0; i < n; ++i) {
      arm1[i] = s.treatment()[i];
      arm0[i] = 1 - s.treatment()[i];
    }
    auto sc = [&](int a, double u) {
      const std::vector<int>* mask = strat ? (a ? &arm1 : &arm0) : nullptr;
      return oracle::censoring_km(s.time(), s.event(), u, mask, true);
    };
    auto lambda0 = [&](double u) { return cox.breslow_baseline(u); };
    for (double u = 0.0; u < 5.0; u += 0.125)
      CHECK(std::abs(va(u) - oracle::aipsw_value(s, eta, ps, smooth, sm.c0, cox.beta, lambda0, sc, u)) <= 1e-10);
  }
}

TEST_CASE("single-stage evaluator agrees with the curve functions") {
  Rng rng(26);
  const auto s = random_sample(rng, 80, 2);
  for (Method m : {Method::ipsw, Method::aipsw}) {
    EstimatorSpec spec;
    spec.method = m;
    spec.smoothing.enabled = true;
    const auto nz = fit_nuisance(s, spec);
    const SingleStageEvaluator ev(s, nz, spec, 1.5);
    const Eigen::Vector3d eta(0.3, -0.5, 0.8);
    const auto curve = m == Method::ipsw
                           ? value_curve_ipsw(s, LinearRegime(eta), nz.propensity, spec.smoothing)
                           : value_curve_aipsw(s, LinearRegime(eta), nz.propensity, *nz.cox, nz.censor, spec.smoothing);
    CHECK(ev.value(eta) == doctest::Approx(curve(1.5)).epsilon(1e-12));
    CHECK(ev.curve(eta)(1.5) == doctest::Approx(curve(1.5)).epsilon(1e-12));
  }
}

TEST_CASE("nobody following the regime is degenerate") {
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  SurvivalSample s(x, {0, 0, 0, 0}, {1, 2, 3, 4}, {1, 1, 1, 1});
  EstimatorSpec spec;
  spec.propensity = PropensitySpec::known_values(std::vector<double>(4, 0.5));
  const auto nz = fit_nuisance(s, spec);
  const SingleStageEvaluator ev(s, nz, spec, 2.0);
  CHECK_THROWS_AS(ev.value(Eigen::Vector2d(1.0, 0.0)), Error);
  CHECK(ev.objective(Eigen::Vector2d(1.0, 0.0)) == -std::numeric_limits<double>::infinity());
}

// ---------------------------------------------------------------------------
// Two stages
// ---------------------------------------------------------------------------

namespace {

TwoStageSample small_two_stage() {
  // rows: alive & consistent, censored before s, died before s consistent, alive inconsistent
  Eigen::MatrixXd x0(4, 1), x1(4, 1);
  x0 << 1.0, 1.0, 1.0, 1.0;
  x1 << 0.5, kNaN, kNaN, 0.5;
  return TwoStageSample(x0, {1, 1, 1, 1}, 1.0, x1, {1, -1, -1, 0}, {2.0, 0.4, 0.5, 3.0}, {1, 0, 1, 1});
}

}  // namespace

TEST_CASE("two-stage weight examples") {
  const auto s = small_two_stage();
  const TwoStageRegime r(LinearRegime(Eigen::Vector2d(1.0, 0.0)), LinearRegime(Eigen::Vector2d(1.0, 0.0)));
  const std::vector<double> half(4, 0.5);
  StepCurve none;
  auto w = two_stage_weights(s, r, half, half, none, SmoothingSpec{});
  CHECK(w[0] == doctest::Approx(4.0));
  CHECK(w[1] == 0.0);
  CHECK(w[2] == doctest::Approx(2.0));
  CHECK(w[3] == 0.0);
  StepCurve sc;
  sc.jump_times = {0.4};
  sc.values = {0.8};
  w = two_stage_weights(s, r, half, half, sc, SmoothingSpec{});
  CHECK(w[2] == doctest::Approx(2.5));
  CHECK(w[0] == doctest::Approx(1.0 / (0.8 * 0.25)));
}

TEST_CASE("two-stage weights evaluate censoring at the left limit unless asked not to") {
  const auto s = small_two_stage();
  const TwoStageRegime r(LinearRegime(Eigen::Vector2d(1.0, 0.0)), LinearRegime(Eigen::Vector2d(1.0, 0.0)));
  const std::vector<double> half(4, 0.5);
  StepCurve sc;
  sc.jump_times = {0.5};
  sc.values = {0.8};
  CHECK(two_stage_weights(s, r, half, half, sc, SmoothingSpec{})[2] == doctest::Approx(2.0));
  TwoStageOptions printed;
  printed.censor_left_limit = false;
  CHECK(two_stage_weights(s, r, half, half, sc, SmoothingSpec{}, printed)[2] == doctest::Approx(2.5));
}

TEST_CASE("two-stage positivity floor") {
  const auto s = small_two_stage();
  const TwoStageRegime r(LinearRegime(Eigen::Vector2d(1.0, 0.0)), LinearRegime(Eigen::Vector2d(1.0, 0.0)));
  const std::vector<double> half(4, 0.5);
  StepCurve sc;
  sc.jump_times = {0.45};
  sc.values = {0.01};
  try {
    two_stage_weights(s, r, half, half, sc, SmoothingSpec{});
    FAIL("expected positivity error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::positivity);
  }
}

TEST_CASE("everyone following with no censoring and deaths before s gives plain KM") {
  Rng rng(31);
  const std::size_t n = 15;
  Eigen::MatrixXd x0(n, 1), x1(n, 1);
  std::vector<int> a0(n, 1), a1(n), e(n, 1);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    x0(ii, 0) = rng.uniform(0, 4);
    t[i] = rng.uniform(0.01, 1.0);
    x1(ii, 0) = t[i] > 1.0 ? rng.uniform(0, 2) : kNaN;
    a1[i] = t[i] > 1.0 ? 1 : -1;
  }
  const TwoStageSample s(x0, a0, 1.0, x1, a1, t, e);
  const TwoStageRegime r(LinearRegime(Eigen::Vector2d(1.0, 0.0)), LinearRegime(Eigen::Vector2d(1.0, 0.0)));
  const std::vector<double> half(n, 0.5);
  const auto v = value_curve_two_stage(s, r, half, half, censoring_km(t, e), SmoothingSpec{});
  const std::vector<double> ones(n, 1.0);
  for (double u = 0.0; u < 1.2; u += 0.05) CHECK(v(u) == doctest::Approx(oracle::km(t, e, ones, u)).epsilon(1e-12));
}

TEST_CASE("followers alive at s carry the extra stage-1 factor") {
  Eigen::MatrixXd x0(3, 1), x1(3, 1);
  x0 << 1.0, 1.0, 1.0;
  x1 << kNaN, 0.5, 0.5;
  const TwoStageSample s(x0, {1, 1, 1}, 1.0, x1, {-1, 1, 1}, {0.5, 2.0, 3.0}, {1, 1, 1});
  const TwoStageRegime r(LinearRegime(Eigen::Vector2d(1.0, 0.0)), LinearRegime(Eigen::Vector2d(1.0, 0.0)));
  const std::vector<double> half(3, 0.5);
  const auto w = two_stage_weights(s, r, half, half, StepCurve{}, SmoothingSpec{});
  CHECK(w[0] == doctest::Approx(2.0));
  CHECK(w[1] == doctest::Approx(4.0));
  CHECK(w[2] == doctest::Approx(4.0));
}

TEST_CASE("two-stage weights match the straight loop") {
  Rng rng(32);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 8 + rng.index(13);
    Eigen::MatrixXd x0(n, 1), x1(n, 1);
    std::vector<int> a0(n), a1(n), e(n);
    std::vector<double> t(n), ps0(n), ps1(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      x0(ii, 0) = rng.uniform(0, 4);
      a0[i] = rng.bernoulli(0.5);
      t[i] = rng.exponential(0.4) + 0.05;
      e[i] = rng.bernoulli(0.8);
      const bool alive = t[i] > 1.0;
      x1(ii, 0) = alive ? rng.uniform(0, 3) : kNaN;
      a1[i] = alive ? rng.bernoulli(0.5) : -1;
      ps0[i] = rng.uniform(0.3, 0.7);
      ps1[i] = alive ? rng.uniform(0.3, 0.7) : kNaN;
    }
    const TwoStageSample s(x0, a0, 1.0, x1, a1, t, e);
    const bool full = trial % 2 == 0;
    const bool smooth = trial % 3 != 0;
    const Eigen::Vector2d eta0(rng.normal(), rng.normal());
    const Eigen::VectorXd eta1 = full ? Eigen::VectorXd(Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal()))
                                      : Eigen::VectorXd(Eigen::Vector2d(rng.normal(), rng.normal()));
    const TwoStageRegime r(LinearRegime(eta0), LinearRegime(eta1),
                           full ? StageOneFeatures::full : StageOneFeatures::interim_only);
    const auto cens = censoring_km(t, e);
    SmoothingSpec sm;
    sm.enabled = smooth;
    TwoStageOptions opt;
    opt.positivity_floor = 0.0;
    std::vector<double> w;
    try {
      w = two_stage_weights(s, r, ps0, ps1, cens, sm, opt);
    } catch (const Error&) {
      continue;  // degenerate smoothing direction on a tiny alive set
    }
    const auto wo = oracle::two_stage_weights(
        s, eta0, eta1, full, ps0, ps1, [&](double u) { return oracle::censoring_km(t, e, u); },
        [&](double u) { return oracle::censoring_km(t, e, u, nullptr, true); }, smooth, sm.c0);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(w[i] - wo[i]) <= 1e-10 * std::max(1.0, std::abs(wo[i])));
    const auto v = value_curve_two_stage(s, r, ps0, ps1, cens, sm, opt);
    for (double u = 0.0; u < 6.0; u += 0.2) CHECK(std::abs(v(u) - oracle::km(t, e, wo, u)) <= 1e-10);
  }
}
