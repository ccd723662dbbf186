#include "survregime/inference.hpp"

#include "survregime/errors.hpp"
#include "survregime/parallel.hpp"
#include "survregime/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace survregime {

const char* to_string(InferenceResult::Kind k) {
  return k == InferenceResult::Kind::plugin ? "plugin" : "bootstrap";
}

namespace {

double fd_step(double x) { return 1e-5 * std::max(1.0, std::abs(x)); }

std::vector<double> propensity_at(const Eigen::MatrixXd& design, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd eta = design * theta;
  std::vector<double> p(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i) p[static_cast<std::size_t>(i)] = clamp_propensity(inverse_logit(eta(i)));
  return p;
}

// sum_{k < kmax, den_k > 0} num_k / den_k
double cumulative_hazard(std::span<const double> num, std::span<const double> den, std::size_t kmax) {
  double cum = 0.0;
  for (std::size_t k = 0; k < kmax; ++k) {
    if (den[k] > 0.0) cum += num[k] / den[k];
  }
  return cum;
}

void check_positive(std::span<const double> w) {
  if (std::none_of(w.begin(), w.end(), [](double v) { return v > 0.0; })) {
    throw Error(ErrorCode::degenerate_weights, "no subject follows the regime");
  }
}

void check_truncation(std::span<const double> time, std::span<const double> w, double t, double value) {
  double at_risk = 0.0;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (time[i] >= t) at_risk += w[i];
  }
  if (!(at_risk > 0.0) && value > 0.0) {
    throw Error(ErrorCode::truncation, "weighted risk set is empty before the target time");
  }
}

struct Coefficients {
  std::vector<double> w;
  Eigen::VectorXd c1, c0;
};

Coefficients coefficients(std::span<const int> treatment, const std::vector<double>& g,
                          std::span<const double> propensity) {
  Coefficients c;
  c.w = ipsw_weights(treatment, g, propensity);
  const auto n = static_cast<Eigen::Index>(g.size());
  c.c1.resize(n);
  c.c0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    c.c1(i) = (1.0 - c.w[ui]) * g[ui];
    c.c0(i) = (1.0 - c.w[ui]) * (1.0 - g[ui]);
  }
  return c;
}

Eigen::MatrixXd design_of(const SingleStageEvaluator& ev) {
  const auto& x = ev.covariates();
  const auto n = x.rows();
  const auto p = x.cols();
  Eigen::MatrixXd nu(n, 2 * p + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = ev.treatment()[static_cast<std::size_t>(i)];
    nu.block(i, 0, 1, p) = x.row(i);
    nu(i, p) = a;
    nu.block(i, p + 1, 1, p) = a * x.row(i);
  }
  return nu;
}

PluginEstimate finish(double value, const Eigen::VectorXd& zeta) {
  PluginEstimate out;
  out.value = value;
  out.influence = -value * zeta;
  const double n = static_cast<double>(zeta.size());
  out.variance = out.influence.squaredNorm() / (n * n);
  return out;
}

}  // namespace

Eigen::VectorXd weighted_hazard_influence(const EventGrid& grid, std::span<const double> weights, double t) {
  std::vector<double> dn, y;
  grid.weighted_counts(weights, dn, y);
  const std::size_t kt = grid.count_until(t);
  const std::size_t n = weights.size();
  const double nn = static_cast<double>(n);
  std::vector<double> scale(kt, 0.0), cum(kt, 0.0);
  double run = 0.0;
  for (std::size_t k = 0; k < kt; ++k) {
    if (y[k] > 0.0) {
      scale[k] = nn / y[k];
      run += scale[k] * dn[k] / y[k];
    }
    cum[k] = run;
  }
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (kt == 0) return zeta;
  for (std::size_t i = 0; i < n; ++i) {
    const int b = grid.last_at_risk(i);
    if (b < 0 || weights[i] == 0.0) continue;
    const auto ub = static_cast<std::size_t>(b);
    double z = -cum[std::min(ub, kt - 1)];
    if (grid.is_event(i) && ub < kt) z += scale[ub];
    zeta(static_cast<Eigen::Index>(i)) = weights[i] * z;
  }
  return zeta;
}

PluginEstimate plugin_variance_ipsw(const SingleStageEvaluator& ev, const Eigen::VectorXd& eta, bool known_ps) {
  const Assignment a = ev.assignment(eta);
  const auto& nz = ev.nuisance();
  const auto w = ipsw_weights(ev.treatment(), a.g, nz.propensity);
  check_positive(w);
  const double t = ev.horizon();
  const std::size_t kt = ev.grid().count_until(t);
  std::vector<double> dn, y;
  ev.grid().weighted_counts(w, dn, y);
  const double value = product_limit_value(dn, y, kt);
  check_truncation(ev.time(), w, t, value);

  Eigen::VectorXd zeta = weighted_hazard_influence(ev.grid(), w, t);
  if (!known_ps) {
    if (!nz.ps_fit) throw Error(ErrorCode::validation, "estimated-propensity variance needs a logistic fit");
    const Eigen::VectorXd& theta = nz.ps_fit->theta;
    Eigen::VectorXd d1(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double h = fd_step(theta(j));
      double side[2];
      for (int s = 0; s < 2; ++s) {
        Eigen::VectorXd th = theta;
        th(j) += s == 0 ? h : -h;
        const auto wp = ipsw_weights(ev.treatment(), a.g, propensity_at(nz.ps_design, th));
        ev.grid().weighted_counts(wp, dn, y);
        side[s] = cumulative_hazard(dn, y, kt);
      }
      d1(j) = (side[0] - side[1]) / (2.0 * h);
    }
    const Eigen::MatrixXd phi1 = logistic_influence(*nz.ps_fit, nz.ps_design, ev.treatment());
    zeta += phi1 * d1;
  }
  return finish(value, zeta);
}

Eigen::MatrixXd censoring_influence(std::span<const double> time, std::span<const int> event,
                                    std::span<const int> treatment, const CensoringModel& model, int arm,
                                    std::span<const double> grid) {
  const std::size_t n = time.size();
  const double nn = static_cast<double>(n);
  auto in_stratum = [&](std::size_t i) { return !model.stratified() || treatment[i] == arm; };

  std::vector<double> ctimes;
  for (std::size_t i = 0; i < n; ++i) {
    if (in_stratum(i) && event[i] == 0) ctimes.push_back(time[i]);
  }
  std::sort(ctimes.begin(), ctimes.end());
  ctimes.erase(std::unique(ctimes.begin(), ctimes.end()), ctimes.end());
  const std::size_t J = ctimes.size();
  // censoring risk set: T > u, or T = u and censored (deaths leave first)
  std::vector<double> risk(J, 0.0), count(J, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_stratum(i)) continue;
    for (std::size_t j = 0; j < J && ctimes[j] <= time[i]; ++j) {
      if (ctimes[j] < time[i] || event[i] == 0) risk[j] += 1.0;
    }
    if (event[i] == 0) {
      const auto j = static_cast<std::size_t>(std::lower_bound(ctimes.begin(), ctimes.end(), time[i]) - ctimes.begin());
      count[j] += 1.0;
    }
  }
  const StepCurve& curve = model.curve(arm);
  const auto K = grid.size();
  std::vector<double> sc(K);
  for (std::size_t k = 0; k < K; ++k) sc[k] = curve.eval(grid[k], Side::left);

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_stratum(i)) continue;
    double run = 0.0;
    std::size_t j = 0;
    for (std::size_t k = 0; k < K; ++k) {
      while (j < J && ctimes[j] < grid[k]) {
        const bool at_risk = ctimes[j] < time[i] || (ctimes[j] == time[i] && event[i] == 0);
        if (at_risk && risk[j] > 0.0) {
          double dm = -count[j] / risk[j];
          if (ctimes[j] == time[i] && event[i] == 0) dm += 1.0;
          run += dm * nn / risk[j];
        }
        ++j;
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = -sc[k] * run;
    }
  }
  return out;
}

PluginEstimate plugin_variance_aipsw(const SingleStageEvaluator& ev, const Eigen::VectorXd& eta, bool known_ps) {
  const AugmentationTerms* aug = ev.augmentation();
  const auto& nz = ev.nuisance();
  if (aug == nullptr || !nz.cox) throw Error(ErrorCode::validation, "augmented variance needs an augmented evaluator");
  const Assignment a = ev.assignment(eta);
  const Coefficients c = coefficients(ev.treatment(), a.g, nz.propensity);
  const EventGrid& grid = ev.grid();
  const double t = ev.horizon();
  const std::size_t kt = grid.count_until(t);
  const auto kk = static_cast<Eigen::Index>(kt);
  const auto n = static_cast<Eigen::Index>(c.w.size());
  const double nn = static_cast<double>(n);

  std::vector<double> num, den;
  value_increments(grid, c.w, aug, c.c1, c.c0, kt, num, den);
  const double value = product_limit_value(num, den, kt);
  if (kt > 0 && !(den[kt - 1] > 0.0) && value > 0.0) {
    throw Error(ErrorCode::truncation, "augmented risk set is empty before the target time");
  }

  // psi_1: augmented martingale increments scaled by n / den_k
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(kk), dlam = Eigen::VectorXd::Zero(kk);
  for (Eigen::Index k = 0; k < kk; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    if (den[uk] > 0.0) {
      scale(k) = nn / den[uk];
      dlam(k) = num[uk] / den[uk];
    }
  }
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  {
    std::vector<double> cum(kt, 0.0);
    double run = 0.0;
    for (std::size_t k = 0; k < kt; ++k) {
      run += scale(static_cast<Eigen::Index>(k)) * dlam(static_cast<Eigen::Index>(k));
      cum[k] = run;
    }
    for (Eigen::Index i = 0; i < n && kt > 0; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const int b = grid.last_at_risk(ui);
      if (b < 0 || c.w[ui] == 0.0) continue;
      const auto ub = static_cast<std::size_t>(b);
      double z = -cum[std::min(ub, kt - 1)];
      if (grid.is_event(ui) && ub < kt) z += scale(b);
      psi(i) = c.w[ui] * z;
    }
    const Eigen::VectorXd u = scale.cwiseProduct(aug->baseline_increments.head(kk));
    const Eigen::VectorXd v = scale.cwiseProduct(dlam);
    psi += c.c1.cwiseProduct(aug->hazard[1].leftCols(kk) * u - aug->at_risk[1].leftCols(kk) * v);
    psi += c.c0.cwiseProduct(aug->hazard[0].leftCols(kk) * u - aug->at_risk[0].leftCols(kk) * v);
  }

  // propensity coefficients
  if (!known_ps) {
    if (!nz.ps_fit) throw Error(ErrorCode::validation, "estimated-propensity variance needs a logistic fit");
    const Eigen::VectorXd& theta = nz.ps_fit->theta;
    Eigen::VectorXd d(theta.size());
    std::vector<double> pn, pd;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double h = fd_step(theta(j));
      double side[2];
      for (int s = 0; s < 2; ++s) {
        Eigen::VectorXd th = theta;
        th(j) += s == 0 ? h : -h;
        const Coefficients cp = coefficients(ev.treatment(), a.g, propensity_at(nz.ps_design, th));
        value_increments(grid, cp.w, aug, cp.c1, cp.c0, kt, pn, pd);
        side[s] = cumulative_hazard(pn, pd, kt);
      }
      d(j) = (side[0] - side[1]) / (2.0 * h);
    }
    psi += logistic_influence(*nz.ps_fit, nz.ps_design, ev.treatment()) * d;
  }

  // Cox coefficients
  const Eigen::MatrixXd design = design_of(ev);
  const CoxInfluence cox_phi = cox_influence(*nz.cox, design, ev.time(), ev.event());
  {
    const Eigen::VectorXd& beta = nz.cox->beta;
    Eigen::VectorXd d(beta.size());
    std::vector<double> pn, pd;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      const double h = fd_step(beta(j));
      double side[2];
      for (int s = 0; s < 2; ++s) {
        Eigen::VectorXd b = beta;
        b(j) += s == 0 ? h : -h;
        const AugmentationTerms shifted =
            augmentation_terms(ev.covariates(), grid.times(), b, aug->baseline_increments, nz.censor);
        value_increments(grid, c.w, &shifted, c.c1, c.c0, kt, pn, pd);
        side[s] = cumulative_hazard(pn, pd, kt);
      }
      d(j) = (side[0] - side[1]) / (2.0 * h);
    }
    psi += cox_phi.beta * d;
  }

  // Breslow increments (analytic)
  if (kt > 0) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(kk), pk = Eigen::VectorXd::Zero(kk);
    for (int arm = 0; arm < 2; ++arm) {
      const auto ua = static_cast<std::size_t>(arm);
      const Eigen::VectorXd& ca = arm == 1 ? c.c1 : c.c0;
      q += aug->hazard[ua].leftCols(kk).transpose() * ca;
      pk += aug->hazard[ua].leftCols(kk).transpose() * ca.cwiseProduct(aug->relative[ua]);
    }
    pk = pk.cwiseProduct(aug->baseline_increments.head(kk));
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    double tail = 0.0;  // sum over later k of dF/d(den_k, num_k) chain terms
    for (Eigen::Index m = kk - 1; m >= 0; --m) {
      const auto um = static_cast<std::size_t>(m);
      grad(m) = (den[um] > 0.0 ? q(m) / den[um] : 0.0) + tail;
      if (den[um] > 0.0) tail += -pk(m) / den[um] + num[um] * q(m) / (den[um] * den[um]);
    }
    psi += cox_phi.baseline_increments * grad;
  }

  // censoring survival (analytic)
  if (kt > 0) {
    std::array<Eigen::VectorXd, 2> grad;
    for (int arm = 0; arm < 2; ++arm) {
      const auto ua = static_cast<std::size_t>(arm);
      const Eigen::VectorXd& ca = arm == 1 ? c.c1 : c.c0;
      const Eigen::VectorXd bden = aug->outcome[ua].leftCols(kk).transpose() * ca;
      const Eigen::VectorXd bnum = (aug->outcome[ua].leftCols(kk).transpose() * ca.cwiseProduct(aug->relative[ua]))
                                       .cwiseProduct(aug->baseline_increments.head(kk));
      grad[ua] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
      for (Eigen::Index k = 0; k < kk; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        if (den[uk] > 0.0) grad[ua](k) = (bnum(k) * den[uk] - num[uk] * bden(k)) / (den[uk] * den[uk]);
      }
    }
    if (nz.censor.stratified()) {
      for (int arm = 0; arm < 2; ++arm) {
        const Eigen::MatrixXd phi4 =
            censoring_influence(ev.time(), ev.event(), ev.treatment(), nz.censor, arm, grid.times());
        psi += phi4 * grad[static_cast<std::size_t>(arm)];
      }
    } else {
      const Eigen::MatrixXd phi4 = censoring_influence(ev.time(), ev.event(), ev.treatment(), nz.censor, 0, grid.times());
      psi += phi4 * (grad[0] + grad[1]);
    }
  }
  return finish(value, psi);
}

PluginEstimate plugin_variance(const SingleStageEvaluator& ev, const Eigen::VectorXd& eta) {
  const bool known = !ev.nuisance().ps_fit.has_value();
  return ev.method() == Method::aipsw ? plugin_variance_aipsw(ev, eta, known) : plugin_variance_ipsw(ev, eta, known);
}

InferenceResult wald_interval(double value, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::validation, "confidence level must lie in (0, 1)");
  // inverse normal CDF by bisection on erfc; exact enough for interval ends
  const double target = 0.5 + level / 2.0;
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < target) lo = mid; else hi = mid;
  }
  const double z = 0.5 * (lo + hi);
  InferenceResult r;
  r.value = value;
  r.se = se;
  r.ci_lower = value - z * se;
  r.ci_upper = value + z * se;
  r.method = InferenceResult::Kind::plugin;
  r.level = level;
  return r;
}

void BootstrapConfig::validate() const {
  if (replicates < 50) throw Error(ErrorCode::validation, "bootstrap needs at least 50 replicates");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::validation, "confidence level must lie in (0, 1)");
}

BootstrapDraws bootstrap_replicates(std::size_t n, const BootstrapConfig& config,
                                    const std::function<std::vector<double>(std::size_t, std::span<const std::size_t>)>& statistic) {
  config.validate();
  std::vector<std::optional<std::vector<double>>> slots(config.replicates);
  parallel_for(config.replicates, config.threads, [&](std::size_t b) {
    Rng rng(derive_seed(config.seed, b));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = rng.index(n);
    try {
      slots[b] = statistic(b, rows);
    } catch (const Error&) {
      slots[b].reset();
    }
  });
  BootstrapDraws draws;
  for (auto& s : slots) {
    if (s) draws.values.push_back(std::move(*s)); else ++draws.failures;
  }
  return draws;
}

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

InferenceResult summarize_bootstrap(double value, const BootstrapDraws& draws, std::size_t column,
                                    const BootstrapConfig& config) {
  const std::size_t total = draws.values.size() + draws.failures;
  if (draws.values.size() < 2 || static_cast<double>(draws.failures) > 0.2 * static_cast<double>(total)) {
    std::ostringstream msg;
    msg << draws.failures << " of " << total << " bootstrap replicates failed";
    throw Error(ErrorCode::bootstrap_failure, msg.str());
  }
  std::vector<double> v;
  v.reserve(draws.values.size());
  for (const auto& row : draws.values) v.push_back(row.at(column));
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  InferenceResult r;
  r.value = value;
  r.se = std::sqrt(ss / static_cast<double>(v.size() - 1));
  const double alpha = 1.0 - config.level;
  r.ci_lower = quantile(v, alpha / 2.0);
  r.ci_upper = quantile(v, 1.0 - alpha / 2.0);
  r.method = InferenceResult::Kind::bootstrap;
  r.level = config.level;
  r.replicates = draws.values.size();
  r.failures = draws.failures;
  return r;
}

namespace {

Nuisance resampled_nuisance(const SurvivalSample& sub, const EstimatorSpec& spec, const Nuisance& full,
                            std::span<const std::size_t> rows, bool refit, EstimatorSpec& sub_spec) {
  sub_spec = spec;
  sub_spec.propensity = spec.propensity.subset(rows);
  if (refit) return fit_nuisance(sub, sub_spec);
  Nuisance nz = full;
  nz.propensity.clear();
  for (auto r : rows) nz.propensity.push_back(full.propensity[r]);
  if (nz.ps_design.rows() > 0) {
    Eigen::MatrixXd d(static_cast<Eigen::Index>(rows.size()), full.ps_design.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) d.row(static_cast<Eigen::Index>(i)) = full.ps_design.row(static_cast<Eigen::Index>(rows[i]));
    nz.ps_design = std::move(d);
  }
  return nz;
}

double replicate_value(const SingleStageEvaluator& ev, const Eigen::VectorXd& eta_hat,
                       const BootstrapConfig& config, std::size_t replicate) {
  if (!config.re_optimize) return ev.value(eta_hat);
  SearchConfig search = config.search;
  search.seed = derive_seed(config.search.seed, replicate);
  search.threads = 1;
  return maximize_value(ev, search).value;
}

}  // namespace

InferenceResult bootstrap_inference(const SurvivalSample& sample, const EstimatorSpec& spec, double t,
                                    const Eigen::VectorXd& eta_hat, const BootstrapConfig& config) {
  const Nuisance full = fit_nuisance(sample, spec);
  const SingleStageEvaluator ev(sample, full, spec, t);
  const double value = ev.value(eta_hat);
  auto statistic = [&](std::size_t replicate, std::span<const std::size_t> rows) {
    const SurvivalSample sub = sample.subset(rows);
    EstimatorSpec sub_spec;
    const Nuisance nz = resampled_nuisance(sub, spec, full, rows, config.refit_models, sub_spec);
    const SingleStageEvaluator sev(sub, nz, sub_spec, t);
    return std::vector<double>{replicate_value(sev, eta_hat, config, replicate)};
  };
  return summarize_bootstrap(value, bootstrap_replicates(sample.size(), config, statistic), 0, config);
}

InferenceResult bootstrap_inference(const TwoStageSample& sample, std::span<const double> ps0,
                                    std::span<const double> ps1, const StepCurve& censor,
                                    const SmoothingSpec& smoothing, StageOneFeatures layout, double t,
                                    const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1,
                                    const BootstrapConfig& config) {
  const TwoStageEvaluator ev(sample, {ps0.begin(), ps0.end()}, {ps1.begin(), ps1.end()}, censor, smoothing, layout, t);
  const double value = ev.value(eta0, eta1);
  auto statistic = [&](std::size_t replicate, std::span<const std::size_t> rows) {
    const TwoStageSample sub = sample.subset(rows);
    std::vector<double> p0, p1;
    for (auto r : rows) {
      p0.push_back(ps0[r]);
      p1.push_back(ps1[r]);
    }
    const StepCurve sc = config.refit_models ? censoring_km(sub.time(), sub.event()) : censor;
    const TwoStageEvaluator sev(sub, std::move(p0), std::move(p1), sc, smoothing, layout, t);
    if (!config.re_optimize) return std::vector<double>{sev.value(eta0, eta1)};
    SearchConfig search = config.search;
    search.seed = derive_seed(config.search.seed, replicate);
    search.threads = 1;
    return std::vector<double>{maximize_value(sev, search).value};
  };
  return summarize_bootstrap(value, bootstrap_replicates(sample.size(), config, statistic), 0, config);
}

SimpleComparisons compare_to_simple(const SurvivalSample& sample, const EstimatorSpec& spec, double t,
                                    const Eigen::VectorXd& eta_hat,
                                    const std::optional<BootstrapConfig>& bootstrap) {
  const Nuisance full = fit_nuisance(sample, spec);
  const SingleStageEvaluator ev(sample, full, spec, t);
  const std::size_t p = sample.dim();
  const double n = static_cast<double>(sample.size());
  const PluginEstimate best = plugin_variance(ev, eta_hat);

  auto compare = [&](const LinearRegime& simple) {
    const PluginEstimate base = plugin_variance(ev, simple.eta());
    const Eigen::VectorXd d = best.influence - base.influence;
    const double diff = best.value - base.value;
    Comparison c{simple, diff, wald_interval(diff, std::sqrt(d.squaredNorm() / (n * n)), bootstrap ? bootstrap->level : 0.95), std::nullopt};
    return c;
  };
  SimpleComparisons out{compare(LinearRegime::treat_all(p)), compare(LinearRegime::treat_none(p))};

  if (bootstrap) {
    const Eigen::VectorXd all = LinearRegime::treat_all(p).eta();
    const Eigen::VectorXd none = LinearRegime::treat_none(p).eta();
    auto statistic = [&](std::size_t replicate, std::span<const std::size_t> rows) {
      const SurvivalSample sub = sample.subset(rows);
      EstimatorSpec sub_spec;
      const Nuisance nz = resampled_nuisance(sub, spec, full, rows, bootstrap->refit_models, sub_spec);
      const SingleStageEvaluator sev(sub, nz, sub_spec, t);
      const double v = replicate_value(sev, eta_hat, *bootstrap, replicate);
      return std::vector<double>{v - sev.value(all), v - sev.value(none)};
    };
    const BootstrapDraws draws = bootstrap_replicates(sample.size(), *bootstrap, statistic);
    out.vs_treat_all.bootstrap = summarize_bootstrap(out.vs_treat_all.difference, draws, 0, *bootstrap);
    out.vs_treat_none.bootstrap = summarize_bootstrap(out.vs_treat_none.difference, draws, 1, *bootstrap);
  }
  return out;
}

}  // namespace survregime
