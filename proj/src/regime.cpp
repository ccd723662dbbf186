#include "survregime/regime.hpp"

#include "survregime/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace survregime {

// ---------------------------------------------------------------------------
// Regimes
// ---------------------------------------------------------------------------

LinearRegime::LinearRegime(Eigen::VectorXd eta) : eta_(std::move(eta)) {
  if (eta_.size() == 0) throw Error(ErrorCode::validation, "regime coefficients are empty");
  if (!eta_.allFinite()) throw Error(ErrorCode::validation, "regime coefficients must be finite");
  const double norm = eta_.norm();
  if (!(norm > 0.0)) throw Error(ErrorCode::validation, "regime coefficients must not be all zero");
  eta_ /= norm;
}

LinearRegime LinearRegime::treat_all(std::size_t p) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  eta(0) = 1.0;
  return LinearRegime(eta);
}

LinearRegime LinearRegime::treat_none(std::size_t p) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  eta(0) = -1.0;
  return LinearRegime(eta);
}

double LinearRegime::linear_predictor(std::span<const double> x) const {
  if (x.size() != dim()) throw Error(ErrorCode::validation, "covariate dimension does not match regime");
  double lp = eta_(0);
  for (std::size_t j = 0; j < x.size(); ++j) lp += eta_(static_cast<Eigen::Index>(j + 1)) * x[j];
  return lp;
}

Eigen::VectorXd LinearRegime::linear_predictor(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != dim()) {
    throw Error(ErrorCode::validation, "covariate dimension does not match regime");
  }
  Eigen::VectorXd lp = x * eta_.tail(eta_.size() - 1);
  lp.array() += eta_(0);
  return lp;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double select_bandwidth(std::span<const double> lp, double c0) {
  if (lp.size() < 2) throw Error(ErrorCode::validation, "bandwidth needs at least two subjects");
  if (!(c0 > 0.0)) throw Error(ErrorCode::validation, "c0 must be positive");
  const double n = static_cast<double>(lp.size());
  const double mean = std::accumulate(lp.begin(), lp.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : lp) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  // relative to the predictor's magnitude, so rounding noise counts as zero
  const double scale = std::max(1.0, std::abs(mean));
  if (!(sd > 1e-12 * scale)) {
    throw Error(ErrorCode::degenerate_direction, "linear predictor has zero spread");
  }
  return std::max(c0 * std::pow(n, -1.0 / 3.0) * sd, 1e-8 * sd);
}

double select_bandwidth(const Eigen::MatrixXd& covariates, const LinearRegime& regime, double c0) {
  const Eigen::VectorXd lp = regime.linear_predictor(covariates);
  return select_bandwidth(std::span<const double>(lp.data(), static_cast<std::size_t>(lp.size())), c0);
}

double assign(const LinearRegime& regime, std::span<const double> x, const SmoothingSpec& smoothing) {
  const double lp = regime.linear_predictor(x);
  if (!smoothing.enabled) return lp >= 0.0 ? 1.0 : 0.0;
  if (!smoothing.bandwidth || !(*smoothing.bandwidth > 0.0)) {
    throw Error(ErrorCode::validation, "single-subject smooth assignment needs a fixed bandwidth");
  }
  return normal_cdf(lp / *smoothing.bandwidth);
}

Assignment assign_all(std::span<const double> lp, const SmoothingSpec& smoothing) {
  Assignment out;
  out.g.resize(lp.size());
  if (smoothing.enabled) {
    double h = 0.0;
    if (smoothing.bandwidth) {
      h = *smoothing.bandwidth;
      if (!(h > 0.0)) throw Error(ErrorCode::validation, "bandwidth must be positive");
    } else {
      try {
        h = select_bandwidth(lp, smoothing.c0);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::degenerate_direction) throw;
      }
    }
    if (h > 0.0) {
      out.smoothed = true;
      out.bandwidth = h;
      for (std::size_t i = 0; i < lp.size(); ++i) out.g[i] = normal_cdf(lp[i] / h);
      return out;
    }
  }
  for (std::size_t i = 0; i < lp.size(); ++i) out.g[i] = lp[i] >= 0.0 ? 1.0 : 0.0;
  return out;
}

Assignment assign_all(const LinearRegime& regime, const Eigen::MatrixXd& covariates,
                      const SmoothingSpec& smoothing) {
  const Eigen::VectorXd lp = regime.linear_predictor(covariates);
  return assign_all(std::span<const double>(lp.data(), static_cast<std::size_t>(lp.size())), smoothing);
}

double clamp_propensity(double p) {
  if (!std::isfinite(p)) throw Error(ErrorCode::validation, "propensity must be finite");
  return std::clamp(p, kPropensityFloor, 1.0 - kPropensityFloor);
}

// ---------------------------------------------------------------------------
// Single-stage curves
// ---------------------------------------------------------------------------

std::vector<double> ipsw_weights(std::span<const int> treatment, std::span<const double> g,
                                 std::span<const double> propensity) {
  if (treatment.size() != g.size() || treatment.size() != propensity.size()) {
    throw Error(ErrorCode::validation, "treatment/assignment/propensity lengths differ");
  }
  std::vector<double> w(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double p = clamp_propensity(propensity[i]);
    w[i] = treatment[i] == 1 ? g[i] / p : (1.0 - g[i]) / (1.0 - p);
  }
  return w;
}

std::vector<double> ipsw_weights(const SurvivalSample& sample, const LinearRegime& regime,
                                 std::span<const double> propensity, const SmoothingSpec& smoothing) {
  const Assignment a = assign_all(regime, sample.covariates(), smoothing);
  return ipsw_weights(sample.treatment(), a.g, propensity);
}

StepCurve value_curve_ipsw(const SurvivalSample& sample, const LinearRegime& regime,
                           std::span<const double> propensity, const SmoothingSpec& smoothing) {
  const auto w = ipsw_weights(sample, regime, propensity, smoothing);
  return weighted_km(sample.time(), sample.event(), w);
}

CensoringModel fit_censoring(const SurvivalSample& sample, bool stratified) {
  CensoringModel model(censoring_km(sample.time(), sample.event()));
  if (stratified) {
    std::array<StepCurve, 2> arms;
    for (int a = 0; a < 2; ++a) {
      std::vector<int> mask(sample.size());
      for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = sample.treatment()[i] == a ? 1 : 0;
      if (std::none_of(mask.begin(), mask.end(), [](int m) { return m != 0; })) {
        throw Error(ErrorCode::validation, "stratified censoring needs subjects in both arms");
      }
      arms[static_cast<std::size_t>(a)] = censoring_km(sample.time(), sample.event(), mask);
    }
    model.by_arm = std::move(arms);
  }
  return model;
}

Eigen::VectorXd baseline_increments_on(const CoxFit& cox, std::span<const double> grid) {
  Eigen::VectorXd inc(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    inc(static_cast<Eigen::Index>(k)) =
        cox.breslow_baseline.eval(grid[k], Side::right) - cox.breslow_baseline.eval(grid[k], Side::left);
  }
  return inc;
}

AugmentationTerms augmentation_terms(const Eigen::MatrixXd& covariates, std::span<const double> grid,
                                     const Eigen::VectorXd& beta,
                                     const Eigen::VectorXd& baseline_increments,
                                     const CensoringModel& censor) {
  const auto n = covariates.rows();
  const auto p = covariates.cols();
  const auto K = static_cast<Eigen::Index>(grid.size());
  if (beta.size() != 2 * p + 1) throw Error(ErrorCode::validation, "Cox coefficients do not match covariates");
  if (baseline_increments.size() != K) throw Error(ErrorCode::validation, "baseline increments do not match grid");

  AugmentationTerms aug;
  aug.baseline_increments = baseline_increments;
  const Eigen::VectorXd bx = beta.head(p);
  const Eigen::VectorXd bax = beta.tail(p);
  const Eigen::VectorXd base_lp = covariates * bx;
  const Eigen::VectorXd inter_lp = covariates * bax;
  // Lambda0(s_k-) = sum of increments strictly before s_k
  Eigen::VectorXd cum_before(K);
  double cum = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    cum_before(k) = cum;
    cum += baseline_increments(k);
  }
  for (int a = 0; a < 2; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    Eigen::VectorXd lp = base_lp;
    if (a == 1) lp += inter_lp + Eigen::VectorXd::Constant(n, beta(p));
    aug.relative[ua] = lp.array().exp();
    aug.censor[ua].resize(K);
    const StepCurve& sc = censor.curve(a);
    for (Eigen::Index k = 0; k < K; ++k) aug.censor[ua](k) = sc.eval(grid[static_cast<std::size_t>(k)], Side::left);
    aug.outcome[ua] = (-(aug.relative[ua] * cum_before.transpose())).array().exp();
    aug.at_risk[ua] = aug.outcome[ua] * aug.censor[ua].asDiagonal();
    aug.hazard[ua] = aug.relative[ua].asDiagonal() * aug.at_risk[ua];
  }
  return aug;
}

AugmentationTerms augmentation_terms(const SurvivalSample& sample, const EventGrid& grid,
                                     const CoxFit& cox, const CensoringModel& censor) {
  return augmentation_terms(sample.covariates(), grid.times(), cox.beta,
                            baseline_increments_on(cox, grid.times()), censor);
}

void value_increments(const EventGrid& grid, std::span<const double> weights,
                      const AugmentationTerms* aug, const Eigen::VectorXd& c1,
                      const Eigen::VectorXd& c0, std::size_t kmax, std::vector<double>& num,
                      std::vector<double>& den) {
  grid.weighted_counts(weights, num, den);
  if (aug == nullptr || kmax == 0) return;
  const auto kk = static_cast<Eigen::Index>(kmax);
  const Eigen::VectorXd at_risk =
      aug->at_risk[1].leftCols(kk).transpose() * c1 + aug->at_risk[0].leftCols(kk).transpose() * c0;
  const Eigen::VectorXd hazard =
      aug->hazard[1].leftCols(kk).transpose() * c1 + aug->hazard[0].leftCols(kk).transpose() * c0;
  for (Eigen::Index k = 0; k < kk; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    num[uk] += hazard(k) * aug->baseline_increments(k);
    den[uk] += at_risk(k);
  }
}

double product_limit_value(std::span<const double> num, std::span<const double> den,
                           std::size_t kmax, bool* clamped) {
  double s = 1.0;
  for (std::size_t k = 0; k < kmax; ++k) {
    if (!(den[k] > 0.0) || num[k] == 0.0) continue;
    double factor = 1.0 - num[k] / den[k];
    if (factor < 0.0 || factor > 1.0) {
      factor = std::clamp(factor, 0.0, 1.0);
      if (clamped) *clamped = true;
    }
    s *= factor;
  }
  return s;
}

StepCurve value_curve_aipsw(const SurvivalSample& sample, const LinearRegime& regime,
                            std::span<const double> propensity, const CoxFit& cox,
                            const CensoringModel& censor, const SmoothingSpec& smoothing) {
  const Assignment a = assign_all(regime, sample.covariates(), smoothing);
  const auto w = ipsw_weights(sample.treatment(), a.g, propensity);
  EventGrid grid(sample.time(), sample.event());
  const AugmentationTerms aug = augmentation_terms(sample, grid, cox, censor);
  const auto n = static_cast<Eigen::Index>(sample.size());
  Eigen::VectorXd c1(n), c0(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    c1(i) = (1.0 - w[ui]) * a.g[ui];
    c0(i) = (1.0 - w[ui]) * (1.0 - a.g[ui]);
  }
  std::vector<double> num, den;
  value_increments(grid, w, &aug, c1, c0, grid.size(), num, den);
  const double end = *std::max_element(sample.time().begin(), sample.time().end());
  return product_limit(grid.times(), num, den, end);
}

// ---------------------------------------------------------------------------
// Two decision points
// ---------------------------------------------------------------------------

TwoStageRegime::TwoStageRegime(LinearRegime stage0, LinearRegime stage1, StageOneFeatures layout)
    : stage0_(std::move(stage0)), stage1_(std::move(stage1)), layout_(layout) {}

std::size_t TwoStageRegime::stage1_dim(StageOneFeatures layout, std::size_t p0, std::size_t p1) {
  return layout == StageOneFeatures::full ? p0 + 1 + p1 : p1;
}

std::vector<double> TwoStageRegime::stage1_features(std::span<const double> x0, int g0,
                                                    std::span<const double> x1) const {
  std::vector<double> f;
  if (layout_ == StageOneFeatures::full) {
    f.assign(x0.begin(), x0.end());
    f.push_back(static_cast<double>(g0));
  }
  f.insert(f.end(), x1.begin(), x1.end());
  return f;
}

namespace {

std::vector<double> row_of(const Eigen::MatrixXd& m, Eigen::Index i) {
  std::vector<double> r(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
  return r;
}

}  // namespace

std::vector<double> two_stage_weights(const TwoStageSample& sample, const TwoStageRegime& regime,
                                      std::span<const double> ps0, std::span<const double> ps1,
                                      const StepCurve& censor, const SmoothingSpec& smoothing,
                                      const TwoStageOptions& options) {
  const std::size_t n = sample.size();
  if (ps0.size() != n || ps1.size() != n) throw Error(ErrorCode::validation, "propensity lengths differ from sample");
  const double s = sample.interim_time();
  const auto& alive = sample.alive_uncensored_at_s();

  const Eigen::VectorXd lp0 = regime.stage0().linear_predictor(sample.baseline_covariates());
  const Assignment g0 = assign_all(std::span<const double>(lp0.data(), n), smoothing);

  std::vector<std::size_t> alive_rows;
  std::vector<double> lp1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const auto x0 = row_of(sample.baseline_covariates(), ii);
    const auto x1 = row_of(sample.interim_covariates(), ii);
    const int hard0 = lp0(ii) >= 0.0 ? 1 : 0;
    lp1.push_back(regime.stage1().linear_predictor(regime.stage1_features(x0, hard0, x1)));
    alive_rows.push_back(i);
  }
  const Assignment g1 = alive_rows.size() >= 2 ? assign_all(lp1, smoothing) : assign_all(lp1, SmoothingSpec{});

  const double sc_s = censor(s);
  if (!alive_rows.empty() && sc_s < options.positivity_floor) {
    throw Error(ErrorCode::positivity, "censoring survival at the interim time is below the positivity floor");
  }
  std::vector<double> w(n, 0.0);
  std::size_t next_alive = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int a0 = sample.stage0_treatment()[i];
    const double p0 = clamp_propensity(ps0[i]);
    const double pa0 = a0 == 1 ? p0 : 1.0 - p0;
    const double m0 = a0 == 1 ? g0.g[i] : 1.0 - g0.g[i];
    if (alive[i]) {
      const int a1 = sample.stage1_treatment()[i];
      const double p1 = clamp_propensity(ps1[i]);
      const double pa1 = a1 == 1 ? p1 : 1.0 - p1;
      const double g = g1.g[next_alive++];
      const double m1 = a1 == 1 ? g : 1.0 - g;
      w[i] = m0 * m1 / (sc_s * pa0 * pa1);
    } else if (sample.event()[i] == 1 && sample.time()[i] <= s) {
      const double sc = options.censor_left_limit ? censor.eval(sample.time()[i], Side::left)
                                                  : censor(sample.time()[i]);
      if (sc < options.positivity_floor) {
        throw Error(ErrorCode::positivity, "censoring survival at a death time is below the positivity floor");
      }
      w[i] = m0 / (sc * pa0);
    }
  }
  return w;
}

StepCurve value_curve_two_stage(const TwoStageSample& sample, const TwoStageRegime& regime,
                                std::span<const double> ps0, std::span<const double> ps1,
                                const StepCurve& censor, const SmoothingSpec& smoothing,
                                const TwoStageOptions& options) {
  const auto w = two_stage_weights(sample, regime, ps0, ps1, censor, smoothing, options);
  return weighted_km(sample.time(), sample.event(), w);
}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

double survival_at(const StepCurve& curve, double t) { return curve(t); }

double restricted_mean(const StepCurve& curve, double limit) {
  if (!(limit > 0.0)) throw Error(ErrorCode::validation, "restricted mean horizon must be positive");
  double area = 0.0;
  double prev_t = 0.0;
  double level = curve.initial_value;
  for (std::size_t k = 0; k < curve.jump_times.size(); ++k) {
    const double tk = curve.jump_times[k];
    if (tk >= limit) break;
    area += level * (tk - prev_t);
    prev_t = tk;
    level = curve.values[k];
  }
  return area + level * (limit - prev_t);
}

double median_survival(const StepCurve& curve) {
  if (curve.initial_value < 0.5) return 0.0;
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    if (curve.values[k] < 0.5) return curve.jump_times[k];
  }
  return std::numeric_limits<double>::infinity();
}

double functional(const StepCurve& curve, const Functional& f) {
  switch (f.kind) {
    case Functional::Kind::survival_at: return survival_at(curve, f.at);
    case Functional::Kind::restricted_mean: return restricted_mean(curve, f.at);
    case Functional::Kind::median: return median_survival(curve);
  }
  throw Error(ErrorCode::validation, "unknown functional");
}

}  // namespace survregime
