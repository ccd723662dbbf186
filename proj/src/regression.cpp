#include "survregime/regression.hpp"

#include "survregime/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace survregime {

namespace {

constexpr double kDecrementFloor = 1e-16;

int full_rank(const Eigen::MatrixXd& x) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  return static_cast<int>(qr.rank());
}

// Ascending time order; ties keep input order.
std::vector<std::size_t> time_order(std::span<const double> time) {
  std::vector<std::size_t> order(time.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
  return order;
}

struct CoxDerivatives {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

// Breslow partial likelihood and derivatives, walking tie groups from the
// largest time down so the risk-set sums accumulate.
CoxDerivatives cox_derivatives(const Eigen::MatrixXd& design, std::span<const double> time,
                               std::span<const int> event, const Eigen::VectorXd& beta,
                               bool want_information) {
  const auto d = design.cols();
  const auto order = time_order(time);
  const Eigen::VectorXd eta = design * beta;

  CoxDerivatives out;
  out.score = Eigen::VectorXd::Zero(d);
  if (want_information) out.information = Eigen::MatrixXd::Zero(d, d);

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(want_information ? d : 0, want_information ? d : 0);

  std::size_t e = order.size();
  while (e > 0) {
    std::size_t b = e;
    const double t = time[order[e - 1]];
    while (b > 0 && time[order[b - 1]] == t) --b;
    int deaths = 0;
    Eigen::VectorXd event_sum = Eigen::VectorXd::Zero(d);
    double event_eta = 0.0;
    for (std::size_t m = b; m < e; ++m) {
      const auto i = static_cast<Eigen::Index>(order[m]);
      const double r = std::exp(eta(i));
      s0 += r;
      s1.noalias() += r * design.row(i).transpose();
      if (want_information) s2.noalias() += r * design.row(i).transpose() * design.row(i);
      if (event[order[m]] == 1) {
        ++deaths;
        event_sum += design.row(i).transpose();
        event_eta += eta(i);
      }
    }
    if (deaths > 0) {
      const Eigen::VectorXd mean = s1 / s0;
      out.loglik += event_eta - deaths * std::log(s0);
      out.score += event_sum - deaths * mean;
      if (want_information) out.information += deaths * (s2 / s0 - mean * mean.transpose());
    }
    e = b;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Logistic
// ---------------------------------------------------------------------------

double inverse_logit(double eta) {
  if (eta >= 0.0) {
    const double z = std::exp(-eta);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(eta);
  return z / (1.0 + z);
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

double logistic_loglik(const Eigen::MatrixXd& design, std::span<const int> response,
                       const Eigen::VectorXd& theta) {
  const Eigen::VectorXd eta = design * theta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // y*eta - log(1 + e^eta), computed stably
    const double e = eta(i);
    const double log1pexp = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += response[static_cast<std::size_t>(i)] * e - log1pexp;
  }
  return ll;
}

Eigen::VectorXd logistic_score(const Eigen::MatrixXd& design, std::span<const int> response,
                               const Eigen::VectorXd& theta) {
  const Eigen::VectorXd eta = design * theta;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    resid(i) = response[static_cast<std::size_t>(i)] - inverse_logit(eta(i));
  }
  return design.transpose() * resid;
}

LogisticFit fit_logistic(const Eigen::MatrixXd& design, std::span<const int> response,
                         const NewtonOptions& options) {
  const auto n = design.rows();
  const auto q = design.cols();
  if (static_cast<std::size_t>(n) != response.size()) {
    throw Error(ErrorCode::validation, "design and response lengths differ");
  }
  for (int y : response) {
    if (y != 0 && y != 1) throw Error(ErrorCode::validation, "response must be 0 or 1");
  }
  if (n <= q) {
    throw Error(ErrorCode::singular_design, "logistic fit needs more rows than columns");
  }
  if (full_rank(design) < q) {
    throw Error(ErrorCode::singular_design, "logistic design is rank deficient");
  }

  LogisticFit fit;
  fit.theta = Eigen::VectorXd::Zero(q);
  double ll = logistic_loglik(design, response, fit.theta);
  Eigen::MatrixXd info(q, q);
  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const Eigen::VectorXd eta = design * fit.theta;
    Eigen::VectorXd resid(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = inverse_logit(eta(i));
      resid(i) = response[static_cast<std::size_t>(i)] - p;
      w(i) = p * (1.0 - p);
    }
    const Eigen::VectorXd score = design.transpose() * resid;
    info = design.transpose() * w.asDiagonal() * design;
    fit.iterations = iter;
    if (score.cwiseAbs().maxCoeff() < options.tolerance) {
      fit.converged = true;
      break;
    }
    if (iter == options.max_iterations) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(score);
    if (score.dot(step) < kDecrementFloor) {
      fit.converged = true;
      break;
    }
    double scale = 1.0;
    Eigen::VectorXd next = fit.theta + step;
    double next_ll = logistic_loglik(design, response, next);
    for (int h = 0; h < options.max_halvings && next_ll < ll; ++h) {
      scale *= 0.5;
      next = fit.theta + scale * step;
      next_ll = logistic_loglik(design, response, next);
    }
    fit.theta = next;
    ll = next_ll;
    if (fit.theta.norm() > options.separation_bound) {
      throw Error(ErrorCode::separation, "logistic coefficients diverge (separation)");
    }
  }
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "logistic fit did not converge in " << options.max_iterations << " iterations";
    throw Error(ErrorCode::no_convergence, msg.str());
  }
  // perfect prediction with a converged score is still separation
  const Eigen::VectorXd eta = design * fit.theta;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    worst = std::max(worst, std::abs(response[static_cast<std::size_t>(i)] - inverse_logit(eta(i))));
  }
  if (worst < 1e-6) {
    throw Error(ErrorCode::separation, "response perfectly predicted (separation)");
  }
  fit.covariance = info.inverse();
  return fit;
}

Eigen::MatrixXd logistic_influence(const LogisticFit& fit, const Eigen::MatrixXd& design,
                                   std::span<const int> response) {
  const auto n = design.rows();
  const Eigen::VectorXd eta = design * fit.theta;
  Eigen::MatrixXd out(n, design.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = response[static_cast<std::size_t>(i)] - inverse_logit(eta(i));
    out.row(i) = (static_cast<double>(n) * (fit.covariance * design.row(i).transpose()) * r).transpose();
  }
  return out;
}

double predict_propensity(const LogisticFit& fit, std::span<const double> covariates) {
  if (covariates.size() + 1 != static_cast<std::size_t>(fit.theta.size())) {
    throw Error(ErrorCode::validation, "covariate dimension does not match propensity fit");
  }
  double eta = fit.theta(0);
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    eta += fit.theta(static_cast<Eigen::Index>(j + 1)) * covariates[j];
  }
  return inverse_logit(eta);
}

// ---------------------------------------------------------------------------
// Cox
// ---------------------------------------------------------------------------

Eigen::VectorXd cox_design_row(double a, std::span<const double> x) {
  const auto p = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd nu(2 * p + 1);
  for (Eigen::Index j = 0; j < p; ++j) {
    nu(j) = x[static_cast<std::size_t>(j)];
    nu(p + 1 + j) = a * x[static_cast<std::size_t>(j)];
  }
  nu(p) = a;
  return nu;
}

Eigen::MatrixXd cox_design(const SurvivalSample& sample) {
  const auto& x = sample.covariates();
  const auto n = x.rows();
  const auto p = x.cols();
  Eigen::MatrixXd nu(n, 2 * p + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = sample.treatment()[static_cast<std::size_t>(i)];
    nu.block(i, 0, 1, p) = x.row(i);
    nu(i, p) = a;
    nu.block(i, p + 1, 1, p) = a * x.row(i);
  }
  return nu;
}

double cox_partial_loglik(const Eigen::MatrixXd& design, std::span<const double> time,
                          std::span<const int> event, const Eigen::VectorXd& beta) {
  return cox_derivatives(design, time, event, beta, false).loglik;
}

Eigen::VectorXd cox_score(const Eigen::MatrixXd& design, std::span<const double> time,
                          std::span<const int> event, const Eigen::VectorXd& beta) {
  return cox_derivatives(design, time, event, beta, false).score;
}

StepCurve breslow_baseline(const Eigen::MatrixXd& design, std::span<const double> time,
                           std::span<const int> event, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  EventGrid grid(time, event);
  std::vector<double> weights(time.size());
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = std::exp(eta(static_cast<Eigen::Index>(i)));
  // dLambda0(s_k) = d_k / sum_{risk} exp(eta): unit-weight deaths over weighted risk.
  std::vector<double> deaths(grid.size(), 0.0);
  std::vector<double> unused, risk;
  grid.weighted_counts(weights, unused, risk);
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (event[i] == 1) deaths[static_cast<std::size_t>(grid.last_at_risk(i))] += 1.0;
  }
  StepCurve curve;
  curve.initial_value = 0.0;
  double cum = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    cum += deaths[k] / risk[k];
    curve.jump_times.push_back(grid.times()[k]);
    curve.values.push_back(cum);
  }
  curve.support_end = time.empty() ? 0.0 : *std::max_element(time.begin(), time.end());
  return curve;
}

CoxFit fit_cox(const Eigen::MatrixXd& design, std::span<const double> time,
               std::span<const int> event, const NewtonOptions& options) {
  const auto n = design.rows();
  const auto d = design.cols();
  if (static_cast<std::size_t>(n) != time.size() || time.size() != event.size()) {
    throw Error(ErrorCode::validation, "design/time/event lengths differ");
  }
  if (std::none_of(event.begin(), event.end(), [](int e) { return e == 1; })) {
    throw Error(ErrorCode::validation, "Cox fit needs at least one event");
  }

  // Center columns; constant columns carry no information and stay at zero.
  const Eigen::RowVectorXd center = design.colwise().mean();
  Eigen::MatrixXd centered = design.rowwise() - center;
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (centered.col(j).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + std::abs(center(j)))) active.push_back(j);
  }
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t j = 0; j < active.size(); ++j) z.col(static_cast<Eigen::Index>(j)) = centered.col(active[j]);
  if (!active.empty() && full_rank(z) < z.cols()) {
    throw Error(ErrorCode::singular_design, "Cox design is rank deficient");
  }

  const auto q = z.cols();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
  CoxFit fit;
  CoxDerivatives cur = cox_derivatives(z, time, event, b, true);
  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    fit.iterations = iter;
    fit.score_norm = q > 0 ? cur.score.cwiseAbs().maxCoeff() : 0.0;
    if (fit.score_norm < options.tolerance) {
      fit.converged = true;
      break;
    }
    if (iter == options.max_iterations) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorCode::singular_design, "Cox information matrix is singular");
    }
    const Eigen::VectorXd step = ldlt.solve(cur.score);
    if (cur.score.dot(step) < kDecrementFloor) {
      fit.converged = true;
      break;
    }
    double scale = 1.0;
    Eigen::VectorXd next = b + step;
    CoxDerivatives cand = cox_derivatives(z, time, event, next, true);
    for (int h = 0; h < options.max_halvings && !(cand.loglik >= cur.loglik); ++h) {
      scale *= 0.5;
      next = b + scale * step;
      cand = cox_derivatives(z, time, event, next, true);
    }
    b = next;
    cur = std::move(cand);
    if (b.norm() > options.separation_bound) {
      throw Error(ErrorCode::separation, "Cox coefficients diverge (monotone likelihood)");
    }
  }
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "Cox fit did not converge; last score norm " << fit.score_norm;
    throw Error(ErrorCode::no_convergence, msg.str());
  }

  fit.beta = Eigen::VectorXd::Zero(d);
  fit.information = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t j = 0; j < active.size(); ++j) {
    fit.beta(active[j]) = b(static_cast<Eigen::Index>(j));
    for (std::size_t k = 0; k < active.size(); ++k) {
      fit.information(active[j], active[k]) =
          cur.information(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
    }
  }
  fit.breslow_baseline = breslow_baseline(design, time, event, fit.beta);
  return fit;
}

CoxFit fit_cox(const SurvivalSample& sample, const NewtonOptions& options) {
  return fit_cox(cox_design(sample), sample.time(), sample.event(), options);
}

double relative_hazard(const CoxFit& fit, int a, std::span<const double> covariates) {
  if (2 * covariates.size() + 1 != static_cast<std::size_t>(fit.beta.size())) {
    throw Error(ErrorCode::validation, "covariate dimension does not match Cox fit");
  }
  return std::exp(fit.beta.dot(cox_design_row(a, covariates)));
}

double predict_survival(const CoxFit& fit, double s, int a, std::span<const double> covariates) {
  return std::exp(-fit.breslow_baseline(s) * relative_hazard(fit, a, covariates));
}

CoxInfluence cox_influence(const CoxFit& fit, const Eigen::MatrixXd& design,
                           std::span<const double> time, std::span<const int> event) {
  const auto n = design.rows();
  const auto d = design.cols();
  EventGrid grid(time, event);
  const auto K = grid.size();
  const Eigen::VectorXd eta = design * fit.beta;
  std::vector<double> r(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = std::exp(eta(i));

  std::vector<double> deaths(K, 0.0), unused, r0;
  grid.weighted_counts(r, unused, r0);
  Eigen::MatrixXd r1 = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(K));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const int b = grid.last_at_risk(ui);
    if (b < 0) continue;
    r1.col(b) += r[ui] * design.row(i).transpose();
    if (event[ui] == 1) deaths[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto k = static_cast<Eigen::Index>(K); k-- > 1;) r1.col(k - 1) += r1.col(k);

  Eigen::MatrixXd nubar(d, static_cast<Eigen::Index>(K));
  std::vector<double> dlam(K);
  for (std::size_t k = 0; k < K; ++k) {
    nubar.col(static_cast<Eigen::Index>(k)) = r1.col(static_cast<Eigen::Index>(k)) / r0[k];
    dlam[k] = deaths[k] / r0[k];
  }

  // Score residuals U_i = sum_k (nu_i - nubar_k) dM_i(s_k).
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, d);
  Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(K));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const int b = grid.last_at_risk(ui);
    for (int k = 0; k <= b; ++k) {
      double m = -r[ui] * dlam[static_cast<std::size_t>(k)];
      if (k == b && event[ui] == 1) m += 1.0;
      dm(i, k) = m;
      u.row(i) += m * (design.row(i) - nubar.col(k).transpose());
    }
  }

  CoxInfluence out;
  out.event_times = grid.times();
  const Eigen::MatrixXd inv_info = fit.information.completeOrthogonalDecomposition().pseudoInverse();
  out.beta = static_cast<double>(n) * u * inv_info;  // inv_info symmetric
  out.baseline_increments.resize(n, static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    out.baseline_increments.col(kk) = static_cast<double>(n) * dm.col(kk) / r0[k] -
                                      (out.beta * nubar.col(kk)) * dlam[k];
  }
  return out;
}

}  // namespace survregime
