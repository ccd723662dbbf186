#include "survregime/estimator.hpp"

#include "survregime/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace survregime {

const char* to_string(Method m) { return m == Method::ipsw ? "ipsw" : "aipsw"; }

const char* to_string(PropensitySpec::Kind k) {
  switch (k) {
    case PropensitySpec::Kind::logistic: return "logistic";
    case PropensitySpec::Kind::constant: return "constant";
    case PropensitySpec::Kind::known: return "known";
  }
  return "unknown";
}

PropensitySpec PropensitySpec::subset(std::span<const std::size_t> rows) const {
  PropensitySpec out{kind, {}};
  if (kind == Kind::known) {
    out.known.reserve(rows.size());
    for (auto r : rows) out.known.push_back(known.at(r));
  }
  return out;
}

namespace {

std::vector<double> fitted_propensity(const LogisticFit& fit, const Eigen::MatrixXd& design) {
  const Eigen::VectorXd eta = design * fit.theta;
  std::vector<double> p(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i) p[static_cast<std::size_t>(i)] = clamp_propensity(inverse_logit(eta(i)));
  return p;
}

}  // namespace

Nuisance fit_nuisance(const SurvivalSample& sample, const EstimatorSpec& spec) {
  Nuisance nz;
  const auto n = static_cast<Eigen::Index>(sample.size());
  switch (spec.propensity.kind) {
    case PropensitySpec::Kind::known: {
      if (spec.propensity.known.size() != sample.size()) {
        throw Error(ErrorCode::validation, "known propensity length differs from sample size");
      }
      nz.propensity.reserve(sample.size());
      for (double p : spec.propensity.known) {
        if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::validation, "known propensities must lie in (0, 1)");
        nz.propensity.push_back(clamp_propensity(p));
      }
      break;
    }
    case PropensitySpec::Kind::constant:
      nz.ps_design = Eigen::MatrixXd::Ones(n, 1);
      break;
    case PropensitySpec::Kind::logistic:
      nz.ps_design = with_intercept(sample.covariates());
      break;
  }
  if (spec.propensity.kind != PropensitySpec::Kind::known) {
    nz.ps_fit = fit_logistic(nz.ps_design, sample.treatment());
    nz.propensity = fitted_propensity(*nz.ps_fit, nz.ps_design);
  }
  if (spec.method == Method::aipsw) nz.cox = fit_cox(sample);
  nz.censor = fit_censoring(sample, spec.stratified_censoring);
  return nz;
}

// ---------------------------------------------------------------------------
// Single stage
// ---------------------------------------------------------------------------

SingleStageEvaluator::SingleStageEvaluator(const SurvivalSample& sample, const Nuisance& nuisance,
                                           const EstimatorSpec& spec, double t)
    : spec_(spec),
      nuisance_(nuisance),
      t_(t),
      covariates_(sample.covariates()),
      treatment_(sample.treatment()),
      time_(sample.time()),
      event_(sample.event()),
      grid_(sample.time(), sample.event()) {
  if (!std::isfinite(t) || t < 0.0) throw Error(ErrorCode::validation, "target time must be finite and non-negative");
  if (nuisance.propensity.size() != sample.size()) {
    throw Error(ErrorCode::validation, "propensity length differs from sample size");
  }
  k_t_ = grid_.count_until(t);
  risk_at_t_ = static_cast<std::size_t>(std::count_if(time_.begin(), time_.end(), [&](double v) { return v >= t; }));
  support_end_ = *std::max_element(time_.begin(), time_.end());
  if (spec.method == Method::aipsw) {
    if (!nuisance.cox) throw Error(ErrorCode::validation, "augmented estimator needs a Cox fit");
    aug_ = augmentation_terms(sample, grid_, *nuisance.cox, nuisance.censor);
  }
}

Assignment SingleStageEvaluator::assignment(const Eigen::VectorXd& eta) const {
  return assign_all(LinearRegime(eta), covariates_, spec_.smoothing);
}

void SingleStageEvaluator::increments(const Assignment& a, std::size_t kmax, std::vector<double>& w,
                                      std::vector<double>& num, std::vector<double>& den) const {
  w = ipsw_weights(treatment_, a.g, nuisance_.propensity);
  if (!aug_) {
    if (std::none_of(w.begin(), w.end(), [](double v) { return v > 0.0; })) {
      throw Error(ErrorCode::degenerate_weights, "no subject follows the regime");
    }
    grid_.weighted_counts(w, num, den);
    return;
  }
  const auto n = static_cast<Eigen::Index>(w.size());
  Eigen::VectorXd c1(n), c0(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    c1(i) = (1.0 - w[ui]) * a.g[ui];
    c0(i) = (1.0 - w[ui]) * (1.0 - a.g[ui]);
  }
  value_increments(grid_, w, &*aug_, c1, c0, kmax, num, den);
}

double SingleStageEvaluator::value(const Eigen::VectorXd& eta) const {
  std::vector<double> w, num, den;
  increments(assignment(eta), k_t_, w, num, den);
  return product_limit_value(num, den, k_t_);
}

double SingleStageEvaluator::objective(const Eigen::VectorXd& eta) const {
  try {
    return value(eta);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::degenerate_weights) return -std::numeric_limits<double>::infinity();
    throw;
  }
}

StepCurve SingleStageEvaluator::curve(const Eigen::VectorXd& eta) const {
  std::vector<double> w, num, den;
  increments(assignment(eta), grid_.size(), w, num, den);
  const double end = aug_ ? support_end_ : grid_.support_end(w);
  return product_limit(grid_.times(), num, den, end);
}

// ---------------------------------------------------------------------------
// Two stages
// ---------------------------------------------------------------------------

TwoStageEvaluator::TwoStageEvaluator(const TwoStageSample& sample, std::vector<double> ps0,
                                     std::vector<double> ps1, const StepCurve& censor,
                                     const SmoothingSpec& smoothing, StageOneFeatures layout, double t,
                                     const TwoStageOptions& options)
    : layout_(layout),
      smoothing_(smoothing),
      t_(t),
      p0_(sample.baseline_dim()),
      p1_(sample.interim_dim()),
      x0_(sample.baseline_covariates()),
      a0_(sample.stage0_treatment()),
      time_(sample.time()),
      event_(sample.event()),
      grid_(sample.time(), sample.event()) {
  const std::size_t n = sample.size();
  if (ps0.size() != n || ps1.size() != n) throw Error(ErrorCode::validation, "propensity lengths differ from sample");
  if (!std::isfinite(t) || t < 0.0) throw Error(ErrorCode::validation, "target time must be finite and non-negative");
  const double s = sample.interim_time();
  const double sc_s = censor(s);
  term_death_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double p0 = clamp_propensity(ps0[i]);
    const double pa0 = a0_[i] == 1 ? p0 : 1.0 - p0;
    if (sample.alive_uncensored_at_s()[i]) {
      if (sc_s < options.positivity_floor) {
        throw Error(ErrorCode::positivity, "censoring survival at the interim time is below the positivity floor");
      }
      const int a1 = sample.stage1_treatment()[i];
      const double p1 = clamp_propensity(ps1[i]);
      const double pa1 = a1 == 1 ? p1 : 1.0 - p1;
      alive_.push_back(i);
      a1_alive_.push_back(a1);
      term_alive_.push_back(1.0 / (sc_s * pa0 * pa1));
    } else if (event_[i] == 1 && time_[i] <= s) {
      const double sc = options.censor_left_limit ? censor.eval(time_[i], Side::left) : censor(time_[i]);
      if (sc < options.positivity_floor) {
        throw Error(ErrorCode::positivity, "censoring survival at a death time is below the positivity floor");
      }
      term_death_[i] = 1.0 / (sc * pa0);
    }
  }
  x1_alive_.resize(static_cast<Eigen::Index>(alive_.size()), static_cast<Eigen::Index>(p1_));
  for (std::size_t r = 0; r < alive_.size(); ++r) {
    x1_alive_.row(static_cast<Eigen::Index>(r)) = sample.interim_covariates().row(static_cast<Eigen::Index>(alive_[r]));
  }
  k_t_ = grid_.count_until(t);
  risk_at_t_ = static_cast<std::size_t>(std::count_if(time_.begin(), time_.end(), [&](double v) { return v >= t; }));
}

TwoStageRegime TwoStageEvaluator::regime(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const {
  return TwoStageRegime(LinearRegime(eta0), LinearRegime(eta1), layout_);
}

std::vector<double> TwoStageEvaluator::weights(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const {
  const LinearRegime r0(eta0);
  const LinearRegime r1(eta1);
  if (static_cast<std::size_t>(eta1.size()) != stage1_dim()) {
    throw Error(ErrorCode::validation, "stage-1 coefficients do not match the feature layout");
  }
  const std::size_t n = time_.size();
  const Eigen::VectorXd lp0 = r0.linear_predictor(x0_);
  const Assignment g0 = assign_all(std::span<const double>(lp0.data(), n), smoothing_);

  const Eigen::VectorXd& e1 = r1.eta();
  std::vector<double> lp1(alive_.size());
  for (std::size_t r = 0; r < alive_.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(alive_[r]);
    const auto rr = static_cast<Eigen::Index>(r);
    double v = e1(0);
    Eigen::Index off = 1;
    if (layout_ == StageOneFeatures::full) {
      v += x0_.row(i).dot(e1.segment(1, static_cast<Eigen::Index>(p0_)));
      v += (lp0(i) >= 0.0 ? 1.0 : 0.0) * e1(static_cast<Eigen::Index>(p0_) + 1);
      off = static_cast<Eigen::Index>(p0_) + 2;
    }
    v += x1_alive_.row(rr).dot(e1.segment(off, static_cast<Eigen::Index>(p1_)));
    lp1[r] = v;
  }
  const Assignment g1 = alive_.size() >= 2 ? assign_all(lp1, smoothing_) : assign_all(lp1, SmoothingSpec{});

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m0 = a0_[i] == 1 ? g0.g[i] : 1.0 - g0.g[i];
    w[i] = term_death_[i] * m0;
  }
  for (std::size_t r = 0; r < alive_.size(); ++r) {
    const std::size_t i = alive_[r];
    const double m0 = a0_[i] == 1 ? g0.g[i] : 1.0 - g0.g[i];
    const double m1 = a1_alive_[r] == 1 ? g1.g[r] : 1.0 - g1.g[r];
    w[i] = term_alive_[r] * m0 * m1;
  }
  return w;
}

double TwoStageEvaluator::value(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const {
  const auto w = weights(eta0, eta1);
  if (std::none_of(w.begin(), w.end(), [](double v) { return v > 0.0; })) {
    throw Error(ErrorCode::degenerate_weights, "no subject follows the regime");
  }
  std::vector<double> num, den;
  grid_.weighted_counts(w, num, den);
  return product_limit_value(num, den, k_t_);
}

double TwoStageEvaluator::objective(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const {
  try {
    return value(eta0, eta1);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::degenerate_weights) return -std::numeric_limits<double>::infinity();
    throw;
  }
}

StepCurve TwoStageEvaluator::curve(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const {
  return weighted_km(time_, event_, weights(eta0, eta1));
}

TwoStagePropensity fit_two_stage_propensity(const TwoStageSample& sample, PropensitySpec::Kind kind) {
  if (kind == PropensitySpec::Kind::known) {
    throw Error(ErrorCode::validation, "known two-stage propensities must be supplied directly");
  }
  const std::size_t n = sample.size();
  TwoStagePropensity out;
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd d0 = kind == PropensitySpec::Kind::constant ? Eigen::MatrixXd::Ones(nn, 1)
                                                              : with_intercept(sample.baseline_covariates());
  out.ps0 = fitted_propensity(fit_logistic(d0, sample.stage0_treatment()), d0);

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (sample.alive_uncensored_at_s()[i]) rows.push_back(i);
  }
  out.ps1.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (rows.empty()) return out;
  const auto p0 = static_cast<Eigen::Index>(sample.baseline_dim());
  const auto p1 = static_cast<Eigen::Index>(sample.interim_dim());
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd d1;
  if (kind == PropensitySpec::Kind::constant) {
    d1 = Eigen::MatrixXd::Ones(m, 1);
  } else {
    d1.resize(m, 2 + p0 + p1);
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
      d1(r, 0) = 1.0;
      d1.block(r, 1, 1, p0) = sample.baseline_covariates().row(i);
      d1(r, 1 + p0) = sample.stage0_treatment()[static_cast<std::size_t>(i)];
      d1.block(r, 2 + p0, 1, p1) = sample.interim_covariates().row(i);
    }
  }
  std::vector<int> a1(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) a1[r] = sample.stage1_treatment()[rows[r]];
  const auto p = fitted_propensity(fit_logistic(d1, a1), d1);
  for (std::size_t r = 0; r < rows.size(); ++r) out.ps1[rows[r]] = p[r];
  return out;
}

}  // namespace survregime
