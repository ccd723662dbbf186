#include "survregime/simulation.hpp"

#include "survregime/errors.hpp"
#include "survregime/parallel.hpp"
#include "survregime/rng.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace survregime {

const char* to_string(ErrorDist e) { return e == ErrorDist::extreme_value ? "extreme_value" : "logistic"; }
const char* to_string(PsModel m) { return m == PsModel::correct ? "correct" : "intercept_only"; }

namespace {

double softplus(double x) { return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double draw_error(ErrorDist e, double u) {
  // minimum-type extreme value: log of a unit exponential
  if (e == ErrorDist::extreme_value) return std::log(-std::log(u));
  return std::log(u / (1.0 - u));
}

double single_stage_time(double x1, double x2, int a, double eps) {
  const double z = -0.5 * x1 + a * (x1 - x2) + eps;
  return softplus(z + 2.0);
}

// Per-subject uniforms for the single-stage design, in draw order.
struct SingleDraw {
  double x1, x2, ua, ue, uc;
};

SingleDraw single_draw(Rng& rng) {
  SingleDraw d;
  d.x1 = rng.uniform(-2.0, 2.0);
  d.x2 = rng.uniform(-2.0, 2.0);
  d.ua = rng.uniform01();
  d.ue = rng.uniform01();
  d.uc = rng.uniform01();
  return d;
}

struct TwoDraw {
  double x0, ua0, ua1, u1, uc, ue, u2;
};

TwoDraw two_draw(Rng& rng) {
  TwoDraw d;
  d.x0 = rng.uniform(0.0, 4.0);
  d.ua0 = rng.uniform01();
  d.ua1 = rng.uniform01();
  d.u1 = rng.uniform01();
  d.uc = rng.uniform01();
  d.ue = rng.uniform01();
  d.u2 = rng.uniform01();
  return d;
}

double interim_covariate(double x0, int a0, double ue) { return 0.5 * x0 - 0.4 * (a0 - 0.5) + 2.0 * ue; }

double propensity_of(double x1, double x2) { return inverse_logit(x1 - 0.5 * x2); }

// Observed (time, event) of a two-stage subject; fills x1/a1 when alive at s.
struct TwoOutcome {
  double time;
  int event;
  bool alive;
  double x1;
};

TwoOutcome two_outcome(int scenario, const TwoDraw& d, int a0, int a1, double c) {
  TwoOutcome o{0.0, 0, false, std::numeric_limits<double>::quiet_NaN()};
  const double t1 = -std::log(d.u1) / stage0_rate(scenario, a0, d.x0);
  if (t1 <= kInterimTime) {
    o.time = std::min(t1, c);
    o.event = t1 <= c ? 1 : 0;
    return o;
  }
  if (c <= kInterimTime) {
    o.time = c;
    return o;
  }
  o.alive = true;
  o.x1 = interim_covariate(d.x0, a0, d.ue);
  const double t = kInterimTime - std::log(d.u2) / stage1_rate(scenario, a0, a1, d.x0, o.x1);
  o.time = std::min(t, c);
  o.event = t <= c ? 1 : 0;
  return o;
}

}  // namespace

double default_horizon(int scenario) { return scenario == 2 ? 6.0 : 3.0; }

void validate(const SingleStageDesign& d) {
  if (d.n < 2) throw Error(ErrorCode::validation, "design needs n >= 2");
  if (d.censor_rate != 0.15 && d.censor_rate != 0.40) {
    throw Error(ErrorCode::validation, "censoring rate must be 0.15 or 0.40");
  }
  if (!(d.t > 0.0)) throw Error(ErrorCode::validation, "target time must be positive");
}

void validate(const TwoStageDesign& d) {
  if (d.scenario < 1 || d.scenario > 3) {
    throw Error(ErrorCode::validation, fmt::format("unknown scenario {}; expected 1, 2 or 3", d.scenario));
  }
  if (d.n < 2) throw Error(ErrorCode::validation, "design needs n >= 2");
  if (d.censor_rate != 0.15 && d.censor_rate != 0.40) {
    throw Error(ErrorCode::validation, "censoring rate must be 0.15 or 0.40");
  }
  if (!(d.t > kInterimTime)) throw Error(ErrorCode::validation, "target time must exceed the interim time");
}

double stage0_rate(int scenario, int a0, double x0) {
  switch (scenario) {
    case 1: return 0.5 * std::exp(1.75 * (a0 - 0.5) * (x0 - 2.0));
    case 2: return 0.1 * std::exp(2.0 * (a0 - 0.5) * (x0 - 2.0));
    case 3: return 0.2 * std::exp(1.5 * (a0 - 0.3) * (x0 - 3.0));
  }
  throw Error(ErrorCode::validation, fmt::format("unknown scenario {}", scenario));
}

double stage1_rate(int scenario, int a0, int a1, double x0, double x1) {
  switch (scenario) {
    case 1: return 0.3 * std::exp(2.5 * (a1 - 0.4) * (x1 - 2.0) - a0 * (x1 - 2.0));
    case 2: return 0.2 * std::exp(3.0 * (a1 - 0.4) * (x1 - 2.0) - 3.0 * (a0 - 0.5) * (x0 - 2.0));
    case 3: return 0.3 * std::exp(2.0 * (a1 - 0.5) * (x1 - 2.0) + 0.5 * (a0 - 0.7) * (x0 - 1.0));
  }
  throw Error(ErrorCode::validation, fmt::format("unknown scenario {}", scenario));
}

// ---------------------------------------------------------------------------
// Censoring calibration
// ---------------------------------------------------------------------------

double censoring_fraction(const SingleStageDesign& design, double c0, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t censored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const SingleDraw d = single_draw(rng);
    const int a = d.ua < propensity_of(d.x1, d.x2) ? 1 : 0;
    const double t = single_stage_time(d.x1, d.x2, a, draw_error(design.error, d.ue));
    if (c0 * d.uc < t) ++censored;
  }
  return static_cast<double>(censored) / static_cast<double>(n);
}

double censoring_fraction(const TwoStageDesign& design, double c0, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t censored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const TwoDraw d = two_draw(rng);
    const int a0 = d.ua0 < 0.5 ? 1 : 0;
    const int a1 = d.ua1 < 0.5 ? 1 : 0;
    if (two_outcome(design.scenario, d, a0, a1, c0 * d.uc).event == 0) ++censored;
  }
  return static_cast<double>(censored) / static_cast<double>(n);
}

namespace {

template <class Fraction>
double bisect_c0(double target, Fraction fraction) {
  // censored fraction decreases in C0
  double lo = 1e-3, hi = 1.0;
  while (fraction(hi) > target) {
    hi *= 2.0;
    if (hi > 1e6) throw Error(ErrorCode::validation, "censoring target unreachable");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fraction(mid) > target) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double calibrate_censoring(const SingleStageDesign& design, std::size_t n, std::uint64_t seed) {
  return bisect_c0(design.censor_rate, [&](double c0) { return censoring_fraction(design, c0, n, seed); });
}

double calibrate_censoring(const TwoStageDesign& design, std::size_t n, std::uint64_t seed) {
  return bisect_c0(design.censor_rate, [&](double c0) { return censoring_fraction(design, c0, n, seed); });
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

SurvivalSample generate_single_stage(const SingleStageDesign& design) {
  validate(design);
  return generate_single_stage(design, censoring_constant(design.error, design.censor_rate));
}

SurvivalSample generate_single_stage(const SingleStageDesign& design, double c0) {
  Rng rng(design.seed);
  const auto n = static_cast<Eigen::Index>(design.n);
  Eigen::MatrixXd x(n, 2);
  std::vector<int> a(design.n), event(design.n);
  std::vector<double> time(design.n);
  for (std::size_t i = 0; i < design.n; ++i) {
    const SingleDraw d = single_draw(rng);
    const auto ii = static_cast<Eigen::Index>(i);
    x(ii, 0) = d.x1;
    x(ii, 1) = d.x2;
    a[i] = d.ua < propensity_of(d.x1, d.x2) ? 1 : 0;
    const double t = single_stage_time(d.x1, d.x2, a[i], draw_error(design.error, d.ue));
    const double c = c0 * d.uc;
    time[i] = std::min(t, c);
    event[i] = t <= c ? 1 : 0;
  }
  return SurvivalSample(std::move(x), std::move(a), std::move(time), std::move(event), {"X1", "X2"});
}

TwoStageSample generate_two_stage(const TwoStageDesign& design) {
  validate(design);
  return generate_two_stage(design, censoring_constant(design.scenario, design.censor_rate));
}

TwoStageSample generate_two_stage(const TwoStageDesign& design, double c0) {
  Rng rng(design.seed);
  const auto n = static_cast<Eigen::Index>(design.n);
  Eigen::MatrixXd x0(n, 1), x1(n, 1);
  std::vector<int> a0(design.n), a1(design.n), event(design.n);
  std::vector<double> time(design.n);
  for (std::size_t i = 0; i < design.n; ++i) {
    const TwoDraw d = two_draw(rng);
    const auto ii = static_cast<Eigen::Index>(i);
    x0(ii, 0) = d.x0;
    a0[i] = d.ua0 < 0.5 ? 1 : 0;
    const int stage1 = d.ua1 < 0.5 ? 1 : 0;
    const TwoOutcome o = two_outcome(design.scenario, d, a0[i], stage1, c0 * d.uc);
    time[i] = o.time;
    event[i] = o.event;
    x1(ii, 0) = o.x1;
    a1[i] = o.alive ? stage1 : -1;
  }
  return TwoStageSample(std::move(x0), std::move(a0), kInterimTime, std::move(x1), std::move(a1),
                        std::move(time), std::move(event));
}

std::vector<double> true_propensity(const SurvivalSample& sample) {
  if (sample.dim() != 2) throw Error(ErrorCode::validation, "true propensity needs two covariates");
  std::vector<double> p(sample.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    p[i] = propensity_of(sample.covariates()(ii, 0), sample.covariates()(ii, 1));
  }
  return p;
}

LinearRegime optimal_single_stage_regime() { return LinearRegime(Eigen::Vector3d(0.0, 1.0, -1.0)); }

TwoStageRegime reference_two_stage_regime(int scenario) {
  Eigen::Vector2d eta0;
  switch (scenario) {
    case 1: eta0 << 0.890, -0.456; break;
    case 2: eta0 << -0.891, 0.454; break;
    case 3: eta0 << 0.908, -0.419; break;
    default: throw Error(ErrorCode::validation, fmt::format("unknown scenario {}", scenario));
  }
  return TwoStageRegime(LinearRegime(eta0), LinearRegime(Eigen::Vector2d(2.0, -1.0)),
                        StageOneFeatures::interim_only);
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

double oracle_value(const LinearRegime& regime, const SingleStageDesign& design, double t,
                    std::size_t n_mc, std::uint64_t seed) {
  if (regime.dim() != 2) throw Error(ErrorCode::validation, "single-stage regime needs two covariates");
  if (n_mc == 0) throw Error(ErrorCode::validation, "oracle needs at least one draw");
  Rng rng(seed);
  std::size_t alive = 0;
  const double x[2] = {0.0, 0.0};
  (void)x;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double x1 = rng.uniform(-2.0, 2.0);
    const double x2 = rng.uniform(-2.0, 2.0);
    const double ue = rng.uniform01();
    const double xs[2] = {x1, x2};
    const int a = regime.linear_predictor(xs) >= 0.0 ? 1 : 0;
    if (single_stage_time(x1, x2, a, draw_error(design.error, ue)) > t) ++alive;
  }
  return static_cast<double>(alive) / static_cast<double>(n_mc);
}

namespace {

int stage1_assignment(const TwoStageRegime& regime, double x0, int a0, double x1) {
  const double xs0[1] = {x0};
  const double xs1[1] = {x1};
  const auto f = regime.stage1_features(xs0, a0, xs1);
  return regime.stage1().linear_predictor(f) >= 0.0 ? 1 : 0;
}

}  // namespace

double oracle_value(const TwoStageRegime& regime, const TwoStageDesign& design, double t,
                    std::size_t n_mc, std::uint64_t seed) {
  if (regime.stage0().dim() != 1) throw Error(ErrorCode::validation, "two-stage regime needs one baseline covariate");
  if (n_mc == 0) throw Error(ErrorCode::validation, "oracle needs at least one draw");
  Rng rng(seed);
  std::size_t alive = 0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double x0 = rng.uniform(0.0, 4.0);
    const double u1 = rng.uniform01();
    const double ue = rng.uniform01();
    const double u2 = rng.uniform01();
    const double xs0[1] = {x0};
    const int a0 = regime.stage0().linear_predictor(xs0) >= 0.0 ? 1 : 0;
    const double t1 = -std::log(u1) / stage0_rate(design.scenario, a0, x0);
    double total = t1;
    if (t1 > kInterimTime) {
      const double x1 = interim_covariate(x0, a0, ue);
      const int a1 = stage1_assignment(regime, x0, a0, x1);
      total = kInterimTime - std::log(u2) / stage1_rate(design.scenario, a0, a1, x0, x1);
    }
    if (total > t) ++alive;
  }
  return static_cast<double>(alive) / static_cast<double>(n_mc);
}

Eigen::MatrixXd draw_covariates(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.uniform(-2.0, 2.0);
    x(i, 1) = rng.uniform(-2.0, 2.0);
  }
  return x;
}

double misclassification_rate(const LinearRegime& estimated, const LinearRegime& truth,
                              const Eigen::MatrixXd& covariates) {
  if (covariates.rows() == 0) throw Error(ErrorCode::validation, "misclassification needs covariate draws");
  const Eigen::VectorXd a = estimated.linear_predictor(covariates);
  const Eigen::VectorXd b = truth.linear_predictor(covariates);
  std::size_t diff = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if ((a(i) >= 0.0) != (b(i) >= 0.0)) ++diff;
  }
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

double misclassification_rate(const TwoStageRegime& estimated, const TwoStageRegime& truth,
                              std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::validation, "misclassification needs covariate draws");
  Rng rng(seed);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = rng.uniform(0.0, 4.0);
    const double ue = rng.uniform01();
    const double xs0[1] = {x0};
    const int e0 = estimated.stage0().linear_predictor(xs0) >= 0.0 ? 1 : 0;
    const int t0 = truth.stage0().linear_predictor(xs0) >= 0.0 ? 1 : 0;
    if (e0 != t0) {
      ++diff;
      continue;
    }
    const double x1 = interim_covariate(x0, e0, ue);
    if (stage1_assignment(estimated, x0, e0, x1) != stage1_assignment(truth, x0, t0, x1)) ++diff;
  }
  return static_cast<double>(diff) / static_cast<double>(n);
}

StageZeroGrid grid_search_stage0(int scenario, double t, std::size_t n_mc, std::uint64_t seed,
                                 std::size_t steps) {
  if (steps < 2) throw Error(ErrorCode::validation, "grid needs at least two steps");
  TwoStageDesign design;
  design.scenario = scenario;
  StageZeroGrid best;
  best.value = -1.0;
  const LinearRegime stage1(Eigen::Vector2d(2.0, -1.0));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double e1 = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(steps);
    const double r = std::sqrt(std::max(0.0, 1.0 - e1 * e1));
    for (double sign : {1.0, -1.0}) {
      const Eigen::Vector2d eta(e1, sign * r);
      if (eta.norm() == 0.0) continue;
      const TwoStageRegime regime(LinearRegime(eta), stage1, StageOneFeatures::interim_only);
      const double v = oracle_value(regime, design, t, n_mc, seed);
      if (v > best.value) {
        best.value = v;
        best.eta = eta;
      }
      if (r == 0.0) break;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

namespace {

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd m;
  if (v.empty()) return m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

void check_failures(const std::vector<StudyRow>& rows, std::size_t replications) {
  for (const auto& r : rows) {
    if (static_cast<double>(r.failures) > 0.05 * static_cast<double>(replications)) {
      throw Error(ErrorCode::study_failure,
                  fmt::format("configuration '{}' failed in {} of {} replications", r.config.label, r.failures,
                              replications));
    }
  }
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> flatten(const Eigen::VectorXd& a) { return {a.data(), a.data() + a.size()}; }

}  // namespace

std::vector<StudyRow> aggregate(const std::vector<StudyConfig>& configs,
                                const std::vector<ReplicationResult>& results, std::size_t replications) {
  std::vector<StudyRow> rows;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    StudyRow row;
    row.config = configs[c];
    std::vector<double> est, se, oracle, mr;
    std::vector<std::vector<double>> eta;
    std::size_t covered = 0;
    for (const auto& r : results) {
      if (r.config != c) continue;
      if (r.failed) {
        ++row.failures;
        continue;
      }
      est.push_back(r.estimate);
      se.push_back(r.se);
      oracle.push_back(r.oracle);
      mr.push_back(r.misclassification);
      if (r.covered) ++covered;
      if (eta.size() < r.eta.size()) eta.resize(r.eta.size());
      for (std::size_t j = 0; j < r.eta.size(); ++j) eta[j].push_back(r.eta[j]);
    }
    row.replications = est.size();
    row.estimate = mean_sd(est);
    row.mean_se = mean_sd(se).mean;
    row.coverage = est.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(est.size());
    row.oracle = mean_sd(oracle);
    row.misclassification = mean_sd(mr);
    for (const auto& e : eta) row.eta.push_back(mean_sd(e));
    rows.push_back(row);
  }
  (void)replications;
  return rows;
}

StudyReport run_study(const SingleStageDesign& design, const std::vector<StudyConfig>& configs,
                      std::size_t replications, std::uint64_t seed, const StudyOptions& options) {
  validate(design);
  if (replications < 1) throw Error(ErrorCode::validation, "a study needs at least one replication");
  const auto start = std::chrono::steady_clock::now();
  StudyReport report;
  report.seed = seed;
  report.design = fmt::format("single-stage, {} errors, {:.0f}% censoring, {} PS model, n = {}, t = {}",
                              to_string(design.error), 100.0 * design.censor_rate, to_string(design.ps), design.n,
                              design.t);
  nlohmann::ordered_json dj{{"design", "single"},         {"error", to_string(design.error)},
                            {"censor_rate", design.censor_rate}, {"ps_model", to_string(design.ps)},
                            {"n", design.n},                {"t", design.t},
                            {"c0", censoring_constant(design.error, design.censor_rate)}};
  report.design_json = dj.dump();

  const LinearRegime truth_regime = optimal_single_stage_regime();
  report.truth = oracle_value(truth_regime, design, design.t, options.truth_draws, derive_seed(seed, 1000001));
  const std::uint64_t oracle_seed = derive_seed(seed, 1000002);
  const Eigen::MatrixXd mr_x = draw_covariates(options.misclassification_draws, derive_seed(seed, 1000003));

  const std::size_t nc = configs.size();
  std::vector<ReplicationResult> results(replications * nc);
  parallel_for(replications, options.threads, [&](std::size_t r) {
    SingleStageDesign d = design;
    d.seed = derive_seed(seed, r);
    std::optional<SurvivalSample> sample;
    std::string gen_error;
    try {
      sample = generate_single_stage(d);
    } catch (const Error& e) {
      gen_error = e.what();
    }
    for (std::size_t c = 0; c < nc; ++c) {
      ReplicationResult& out = results[r * nc + c];
      out.replication = r;
      out.config = c;
      if (!sample) {
        out.failed = true;
        out.error = gen_error;
        continue;
      }
      try {
        EstimatorSpec spec;
        spec.method = configs[c].method;
        spec.propensity = design.ps == PsModel::correct ? PropensitySpec::logistic() : PropensitySpec::constant();
        spec.smoothing.enabled = configs[c].smoothed;
        const Nuisance nz = fit_nuisance(*sample, spec);
        const SingleStageEvaluator ev(*sample, nz, spec, design.t);
        SearchConfig search = options.search;
        search.seed = derive_seed(d.seed, 100 + c);
        search.threads = 1;
        const RegimeSearch found = maximize_value(ev, search);
        const PluginEstimate pe = plugin_variance(ev, found.regime.eta());
        const InferenceResult ci = wald_interval(found.value, pe.se(), options.level);
        out.eta = flatten(found.regime.eta());
        out.estimate = found.value;
        out.se = pe.se();
        out.covered = ci.ci_lower <= report.truth && report.truth <= ci.ci_upper;
        out.oracle = oracle_value(found.regime, design, design.t, options.oracle_draws, oracle_seed);
        out.misclassification = misclassification_rate(found.regime, truth_regime, mr_x);
      } catch (const Error& e) {
        out.failed = true;
        out.error = e.what();
      }
    }
  });
  report.replications = std::move(results);
  report.rows = aggregate(configs, report.replications, replications);
  report.runtime_seconds = elapsed(start);
  check_failures(report.rows, replications);
  return report;
}

StudyReport run_study(const TwoStageDesign& design, const std::vector<StudyConfig>& configs,
                      std::size_t replications, std::uint64_t seed, const StudyOptions& options) {
  validate(design);
  if (replications < 1) throw Error(ErrorCode::validation, "a study needs at least one replication");
  const auto start = std::chrono::steady_clock::now();
  StudyReport report;
  report.seed = seed;
  report.design = fmt::format("two-stage scenario {}, {:.0f}% censoring, n = {}, t = {}", design.scenario,
                              100.0 * design.censor_rate, design.n, design.t);
  nlohmann::ordered_json dj{{"design", "two-stage"}, {"scenario", design.scenario},
                            {"censor_rate", design.censor_rate}, {"n", design.n},
                            {"t", design.t}, {"c0", censoring_constant(design.scenario, design.censor_rate)}};
  report.design_json = dj.dump();

  const TwoStageRegime truth_regime = reference_two_stage_regime(design.scenario);
  report.truth = oracle_value(truth_regime, design, design.t, options.truth_draws, derive_seed(seed, 1000001));
  const std::uint64_t oracle_seed = derive_seed(seed, 1000002);
  const std::uint64_t mr_seed = derive_seed(seed, 1000003);

  const std::size_t nc = configs.size();
  std::vector<ReplicationResult> results(replications * nc);
  parallel_for(replications, options.threads, [&](std::size_t r) {
    TwoStageDesign d = design;
    d.seed = derive_seed(seed, r);
    std::optional<TwoStageSample> sample;
    std::string gen_error;
    try {
      sample = generate_two_stage(d);
    } catch (const Error& e) {
      gen_error = e.what();
    }
    for (std::size_t c = 0; c < nc; ++c) {
      ReplicationResult& out = results[r * nc + c];
      out.replication = r;
      out.config = c;
      if (!sample) {
        out.failed = true;
        out.error = gen_error;
        continue;
      }
      try {
        if (configs[c].method != Method::ipsw) {
          throw Error(ErrorCode::validation, "two-stage studies support inverse weighting only");
        }
        SmoothingSpec smoothing;
        smoothing.enabled = configs[c].smoothed;
        const std::vector<double> ps(sample->size(), 0.5);
        const StepCurve censor = censoring_km(sample->time(), sample->event());
        const TwoStageEvaluator ev(*sample, ps, ps, censor, smoothing, StageOneFeatures::interim_only, design.t);
        SearchConfig search = options.search;
        search.seed = derive_seed(d.seed, 100 + c);
        search.threads = 1;
        const TwoStageSearch found = maximize_value(ev, search);
        BootstrapConfig boot;
        boot.replicates = options.bootstrap_replicates;
        boot.level = options.level;
        boot.refit_models = true;
        boot.re_optimize = false;
        boot.seed = derive_seed(d.seed, 200 + c);
        boot.threads = 1;
        const InferenceResult bi =
            bootstrap_inference(*sample, ps, ps, censor, smoothing, StageOneFeatures::interim_only, design.t,
                                found.regime.stage0().eta(), found.regime.stage1().eta(), boot);
        const InferenceResult ci = wald_interval(found.value, bi.se, options.level);
        out.eta = flatten(found.regime.stage0().eta());
        const auto e1 = flatten(found.regime.stage1().eta());
        out.eta.insert(out.eta.end(), e1.begin(), e1.end());
        out.estimate = found.value;
        out.se = bi.se;
        out.covered = ci.ci_lower <= report.truth && report.truth <= ci.ci_upper;
        out.oracle = oracle_value(found.regime, design, design.t, options.oracle_draws, oracle_seed);
        out.misclassification =
            misclassification_rate(found.regime, truth_regime, options.misclassification_draws, mr_seed);
      } catch (const Error& e) {
        out.failed = true;
        out.error = e.what();
      }
    }
  });
  report.replications = std::move(results);
  report.rows = aggregate(configs, report.replications, replications);
  report.runtime_seconds = elapsed(start);
  check_failures(report.rows, replications);
  return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string to_json(const StudyReport& report, bool include_timing) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["design"] = ordered_json::parse(report.design_json);
  j["seed"] = report.seed;
  j["truth"] = report.truth;
  auto ms = [](const MeanSd& m) { return ordered_json{{"mean", m.mean}, {"sd", m.sd}}; };
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json eta = ordered_json::array();
    for (const auto& e : r.eta) eta.push_back(ms(e));
    rows.push_back({{"label", r.config.label},
                    {"method", to_string(r.config.method)},
                    {"smoothed", r.config.smoothed},
                    {"eta", eta},
                    {"estimate", ms(r.estimate)},
                    {"mean_se", r.mean_se},
                    {"coverage", r.coverage},
                    {"oracle_value", ms(r.oracle)},
                    {"misclassification", ms(r.misclassification)},
                    {"replications", r.replications},
                    {"failures", r.failures}});
  }
  j["rows"] = rows;
  ordered_json reps = ordered_json::array();
  for (const auto& r : report.replications) {
    ordered_json o{{"replication", r.replication}, {"config", r.config}, {"failed", r.failed}};
    if (r.failed) {
      o["error"] = r.error;
    } else {
      o["eta"] = r.eta;
      o["estimate"] = r.estimate;
      o["se"] = r.se;
      o["covered"] = r.covered;
      o["oracle_value"] = r.oracle;
      o["misclassification"] = r.misclassification;
    }
    reps.push_back(o);
  }
  j["replications"] = reps;
  if (include_timing) j["runtime_seconds"] = report.runtime_seconds;
  return j.dump(2);
}

std::string to_text(const StudyReport& report) {
  std::ostringstream out;
  out << report.design << "\n";
  out << fmt::format("S(t; eta_opt) = {:.3f}   seed = {}\n", report.truth, report.seed);
  std::size_t neta = 0;
  for (const auto& r : report.rows) neta = std::max(neta, r.eta.size());
  std::string header = fmt::format("{:<24}", "config");
  for (std::size_t j = 0; j < neta; ++j) header += fmt::format("{:>17}", fmt::format("eta{}", j + 1));
  header += fmt::format("{:>17}{:>8}{:>8}{:>17}{:>17}{:>6}\n", "S_hat", "SE", "CP", "S(eta_hat)", "MR", "fail");
  out << header;
  auto cell = [](const MeanSd& m) { return fmt::format("{:>17}", fmt::format("{:.3f} ({:.3f})", m.mean, m.sd)); };
  for (const auto& r : report.rows) {
    std::string line = fmt::format("{:<24}", r.config.label);
    for (std::size_t j = 0; j < neta; ++j) line += j < r.eta.size() ? cell(r.eta[j]) : fmt::format("{:>17}", "");
    line += cell(r.estimate);
    line += fmt::format("{:>8.3f}{:>8.3f}", r.mean_se, r.coverage);
    line += cell(r.oracle) + cell(r.misclassification);
    line += fmt::format("{:>6}\n", r.failures);
    out << line;
  }
  return out.str();
}

}  // namespace survregime
