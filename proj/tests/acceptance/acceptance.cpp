#include "oracles.hpp"
#include "survregime/errors.hpp"
#include "survregime/estimator.hpp"
#include "survregime/inference.hpp"
#include "survregime/nonparam.hpp"
#include "survregime/optimizer.hpp"
#include "survregime/regression.hpp"
#include "survregime/rng.hpp"
#include "survregime/simulation.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>

using namespace survregime;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kStudySeed = 2024;

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned max_threads() { return std::max(4u, std::thread::hardware_concurrency()); }

bool within(double v, double center, double tol) { return std::abs(v - center) <= tol; }

SurvivalSample random_sample(Rng& rng, std::size_t n, std::size_t p, double censor, bool ties) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  std::vector<int> a(n), e(n);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(static_cast<Eigen::Index>(i), j) = rng.uniform(-2, 2);
    a[i] = rng.bernoulli(0.5);
    const double raw = rng.exponential(1.0);
    t[i] = ties ? std::round(raw * 8.0) / 8.0 + 0.125 : raw + 0.01;
    e[i] = rng.bernoulli(1.0 - censor);
  }
  return SurvivalSample(std::move(x), std::move(a), std::move(t), std::move(e));
}

std::vector<double> probe_times(const std::vector<double>& time) {
  std::set<double> u(time.begin(), time.end());
  std::vector<double> out{0.0};
  double prev = 0.0;
  for (double v : u) {
    out.push_back(0.5 * (prev + v));
    out.push_back(v);
    prev = v;
  }
  out.push_back(prev + 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// 1. estimator oracles
// ---------------------------------------------------------------------------

Outcome estimator_oracles() {
  Rng rng(101);
  double worst = 0.0;
  int instances = 0, redraws = 0;
  while (instances < 100) {
    const std::size_t n = 5 + rng.index(16);
    const bool ties = instances % 2 == 0;
    const auto s = random_sample(rng, n, 2, 0.3, ties);
    const auto probes = probe_times(s.time());

    std::vector<double> w(n);
    for (auto& v : w) v = rng.uniform(0.0, 3.0);
    w[0] = 1.0;
    const auto km = weighted_km(s.time(), s.event(), w);
    for (double u : probes) worst = std::max(worst, std::abs(km(u) - oracle::km(s.time(), s.event(), w, u)));

    std::vector<double> ps(n);
    for (auto& p : ps) p = rng.uniform(0.2, 0.8);
    const Eigen::Vector3d eta(rng.normal(), rng.normal(), rng.normal());
    SmoothingSpec sm;
    sm.enabled = instances % 3 != 0;
    const bool strat = instances % 4 < 2;
    try {
      const auto vi = value_curve_ipsw(s, LinearRegime(eta), ps, sm);
      for (double u : probes)
        worst = std::max(worst, std::abs(vi(u) - oracle::ipsw_value(s, eta, ps, sm.enabled, sm.c0, u)));

      CoxFit cox;
      cox.beta = Eigen::VectorXd(5);
      for (Eigen::Index j = 0; j < 5; ++j) cox.beta(j) = rng.uniform(-0.5, 0.5);
      cox.breslow_baseline = breslow_baseline(cox_design(s), s.time(), s.event(), cox.beta);
      cox.converged = true;
      const CensoringModel cm = fit_censoring(s, strat);
      const auto va = value_curve_aipsw(s, LinearRegime(eta), ps, cox, cm, sm);
      std::vector<int> arm1(n), arm0(n);
      for (std::size_t i = 0; i < n; ++i) {
        arm1[i] = s.treatment()[i];
        arm0[i] = 1 - s.treatment()[i];
      }
      auto sc = [&](int a, double u) {
        return oracle::censoring_km(s.time(), s.event(), u, strat ? (a ? &arm1 : &arm0) : nullptr, true);
      };
      auto lambda0 = [&](double u) { return cox.breslow_baseline(u); };
      for (double u : probes)
        worst = std::max(worst, std::abs(va(u) - oracle::aipsw_value(s, eta, ps, sm.enabled, sm.c0, cox.beta,
                                                                       lambda0, sc, u)));

      // two decision points on a fresh instance of the same size
      Eigen::MatrixXd x0(static_cast<Eigen::Index>(n), 1), x1(static_cast<Eigen::Index>(n), 1);
      std::vector<int> a0(n), a1(n), e(n);
      std::vector<double> t(n), ps0(n), ps1(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        x0(ii, 0) = rng.uniform(0, 4);
        a0[i] = rng.bernoulli(0.5);
        t[i] = ties ? std::round(8.0 * rng.exponential(0.4)) / 8.0 + 0.125 : rng.exponential(0.4) + 0.05;
        e[i] = rng.bernoulli(0.8);
        const bool alive = t[i] > 1.0;
        x1(ii, 0) = alive ? rng.uniform(0, 3) : kNaN;
        a1[i] = alive ? rng.bernoulli(0.5) : -1;
        ps0[i] = rng.uniform(0.3, 0.7);
        ps1[i] = alive ? rng.uniform(0.3, 0.7) : kNaN;
      }
      const TwoStageSample ts(x0, a0, 1.0, x1, a1, t, e);
      const bool full = instances % 2 == 1;
      const Eigen::Vector2d eta0(rng.normal(), rng.normal());
      const Eigen::VectorXd eta1 =
          full ? Eigen::VectorXd(Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal()))
               : Eigen::VectorXd(Eigen::Vector2d(rng.normal(), rng.normal()));
      const TwoStageRegime r(LinearRegime(eta0), LinearRegime(eta1),
                             full ? StageOneFeatures::full : StageOneFeatures::interim_only);
      TwoStageOptions opt;
      opt.positivity_floor = 0.0;
      const auto vt = value_curve_two_stage(ts, r, ps0, ps1, censoring_km(t, e), sm, opt);
      const auto wo = oracle::two_stage_weights(
          ts, eta0, eta1, full, ps0, ps1, [&](double u) { return oracle::censoring_km(t, e, u); },
          [&](double u) { return oracle::censoring_km(t, e, u, nullptr, true); }, sm.enabled, sm.c0);
      for (double u : probe_times(t)) worst = std::max(worst, std::abs(vt(u) - oracle::km(t, e, wo, u)));
    } catch (const Error&) {
      ++redraws;  // e.g. nobody follows the regime on a tiny sample
      continue;
    }
    ++instances;
  }
  return {worst <= 1e-10, fmt::format("100 instances (n <= 20, {} redrawn), max |diff| = {:.2e} (tol 1e-10)",
                                      redraws, worst)};
}

// ---------------------------------------------------------------------------
// 2. invariance suite
// ---------------------------------------------------------------------------

Outcome invariance_suite() {
  Rng rng(202);
  std::map<std::string, int> failures{{"scaling", 0}, {"constant weights", 0}, {"no censoring", 0},
                                      {"KM <= exp(-NA)", 0}, {"monotone", 0}};
  int degenerate = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 10 + rng.index(51);
    const auto s = random_sample(rng, n, 2, rng.uniform(0.0, 0.6), trial % 2 == 0);
    const auto probes = probe_times(s.time());
    std::vector<double> ps(n);
    for (auto& p : ps) p = rng.uniform(0.1, 0.9);
    const Eigen::Vector3d eta(rng.normal(), rng.normal(), rng.normal());
    const double c = std::exp(rng.uniform(-3.0, 3.0));

    try {
      for (bool smooth : {false, true}) {
        SmoothingSpec sm;
        sm.enabled = smooth;
        const auto a = value_curve_ipsw(s, LinearRegime(eta), ps, sm);
        const auto b = value_curve_ipsw(s, LinearRegime(c * eta), ps, sm);
        bool ok = true, mono = true;
        for (double u : probes) ok = ok && std::abs(a(u) - b(u)) <= 1e-12;
        for (std::size_t k = 0; k < a.values.size(); ++k) {
          const double prev = k == 0 ? a.initial_value : a.values[k - 1];
          mono = mono && a.values[k] <= prev + 1e-15 && a.values[k] >= 0.0 && a.values[k] <= 1.0;
        }
        if (!ok) ++failures["scaling"];
        if (!mono) ++failures["monotone"];
      }
    } catch (const Error&) {
      ++degenerate;
    }

    std::vector<double> w(n);
    for (auto& v : w) v = rng.uniform(0.1, 2.0);
    const auto k1 = weighted_km(s.time(), s.event(), w);
    std::vector<double> cw(w);
    for (auto& v : cw) v *= c;
    const auto k2 = weighted_km(s.time(), s.event(), cw);
    bool ok = true;
    for (double u : probes) ok = ok && std::abs(k1(u) - k2(u)) <= 1e-12;
    if (!ok) ++failures["constant weights"];

    const std::vector<double> ones(n, 1.0);
    const std::vector<int> all_events(n, 1);
    const auto plain = weighted_km(s.time(), all_events, ones);
    ok = true;
    for (double u : probes) {
      const double surv = static_cast<double>(std::count_if(s.time().begin(), s.time().end(),
                                                            [&](double v) { return v > u; })) /
                          static_cast<double>(n);
      ok = ok && std::abs(plain(u) - surv) <= 1e-12;
    }
    if (!ok) ++failures["no censoring"];

    const auto km = weighted_km(s.time(), s.event(), ones);
    const auto na = weighted_nelson_aalen(s.time(), s.event(), ones);
    ok = true;
    for (double u : probes) ok = ok && km(u) <= std::exp(-na(u)) + 1e-12;
    if (!ok) ++failures["KM <= exp(-NA)"];
  }
  int total = 0;
  std::string detail = "1000 trials;";
  for (const auto& [name, f] : failures) {
    total += f;
    detail += fmt::format(" {} {} fail,", name, f);
  }
  detail += fmt::format(" {} degenerate draws skipped", degenerate);
  return {total == 0, detail};
}

// ---------------------------------------------------------------------------
// 3. model fits
// ---------------------------------------------------------------------------

Outcome model_fits() {
  Rng rng(303);
  double logit_score = 0.0, cox_score_max = 0.0, grid_gap = 0.0;
  bool breslow_exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 150;
    Eigen::MatrixXd x(n, 2);
    std::vector<int> a(n), e(n);
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      x(i, 0) = rng.uniform(-2, 2);
      x(i, 1) = rng.uniform(-2, 2);
      a[ii] = rng.bernoulli(inverse_logit(x(i, 0) - 0.5 * x(i, 1)));
      t[ii] = std::round(10.0 * rng.exponential(std::exp(0.3 * x(i, 0) - 0.5 * a[ii]))) / 10.0 + 0.1;
      e[ii] = rng.bernoulli(0.75);
    }
    const Eigen::MatrixXd design = with_intercept(x);
    const auto lf = fit_logistic(design, a);
    logit_score = std::max(logit_score, logistic_score(design, a, lf.theta).cwiseAbs().maxCoeff());

    const SurvivalSample s(x, a, t, e);
    const auto cf = fit_cox(s);
    const auto cd = cox_design(s);
    cox_score_max = std::max(cox_score_max, cox_score(cd, t, e, cf.beta).cwiseAbs().maxCoeff());

    const auto b0 = breslow_baseline(cd, t, e, Eigen::VectorXd::Zero(cd.cols()));
    const auto na = weighted_nelson_aalen(t, e, std::vector<double>(n, 1.0));
    breslow_exact = breslow_exact && b0.jump_times == na.jump_times && b0.values == na.values;

    std::vector<double> z(n);
    Eigen::MatrixXd d1(n, 1);
    for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = d1(i, 0) = x(i, 0);
    const auto c1 = fit_cox(d1, t, e);
    grid_gap = std::max(grid_gap, std::abs(c1.beta(0) - oracle::cox_grid_1d(z, t, e, -5.0, 5.0)));
  }
  const bool pass = logit_score < 1e-6 && cox_score_max < 1e-6 && grid_gap < 1e-3 && breslow_exact;
  return {pass, fmt::format("20 instances; max |logistic score| {:.1e}, max |Cox score| {:.1e}, Cox vs grid {:.1e}, "
                            "Breslow(0) == Nelson-Aalen: {}",
                            logit_score, cox_score_max, grid_gap, breslow_exact ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// studies
// ---------------------------------------------------------------------------

StudyOptions study_options() {
  StudyOptions o;
  o.threads = 0;
  return o;
}

const StudyRow& row(const StudyReport& r, const std::string& label) {
  for (const auto& x : r.rows)
    if (x.config.label == label) return x;
  throw std::runtime_error("missing row " + label);
}

std::ofstream& study_log() {
  static std::ofstream out("acceptance_studies.txt");
  return out;
}

StudyReport single_study(ErrorDist error, PsModel ps, const std::vector<StudyConfig>& configs) {
  SingleStageDesign d;
  d.error = error;
  d.ps = ps;
  d.seed = kStudySeed;
  auto r = run_study(d, configs, 200, kStudySeed, study_options());
  study_log() << to_text(r) << fmt::format("runtime {:.1f} s\n\n", r.runtime_seconds);
  study_log().flush();
  return r;
}

const StudyReport& study4() {
  static const StudyReport r = single_study(ErrorDist::extreme_value, PsModel::correct,
                                            {{"S-IPSW", Method::ipsw, true}, {"IPSW", Method::ipsw, false}});
  return r;
}

Outcome study_table1() {
  const auto& r = study4();
  const auto& s = row(r, "S-IPSW");
  const auto& h = row(r, "IPSW");
  const bool ok_s = within(s.estimate.mean, 0.612, 0.015) && within(s.oracle.mean, 0.593, 0.010) &&
                    s.coverage >= 0.92 && s.coverage <= 0.99 && within(s.misclassification.mean, 0.107, 0.025);
  const bool ok_h = h.estimate.mean - r.truth >= 0.02 && h.coverage <= 0.90;
  const bool ok_t = r.runtime_seconds < 15 * 60;
  return {ok_s && ok_h && ok_t,
          fmt::format("truth {:.3f}; S-IPSW S_hat {:.3f} (0.612+-0.015), S(eta_hat) {:.3f} (0.593+-0.010), CP {:.3f} "
                      "[0.92,0.99], MR {:.3f} (0.107+-0.025); IPSW S_hat-truth {:+.3f} (>=0.02), CP {:.3f} (<=0.90); "
                      "{:.0f} s",
                      r.truth, s.estimate.mean, s.oracle.mean, s.coverage, s.misclassification.mean,
                      h.estimate.mean - r.truth, h.coverage, r.runtime_seconds)};
}

Outcome study_double_robust() {
  const auto r = single_study(ErrorDist::extreme_value, PsModel::intercept_only,
                              {{"S-IPSW", Method::ipsw, true}, {"S-AIPSW", Method::aipsw, true}});
  const auto& i = row(r, "S-IPSW");
  const auto& a = row(r, "S-AIPSW");
  const double gain = a.oracle.mean - i.oracle.mean;
  const bool pass = gain >= 0.015 && within(a.oracle.mean, 0.593, 0.012) && r.runtime_seconds < 20 * 60;
  return {pass, fmt::format("S(eta_hat) S-AIPSW {:.3f} (0.593+-0.012) vs S-IPSW {:.3f}, gain {:+.3f} (>=0.015); {:.0f} s",
                            a.oracle.mean, i.oracle.mean, gain, r.runtime_seconds)};
}

Outcome study_logistic() {
  const auto r = single_study(ErrorDist::logistic, PsModel::correct, {{"S-IPSW", Method::ipsw, true}});
  const auto& s = row(r, "S-IPSW");
  const bool pass = within(s.oracle.mean, 0.655, 0.010) && r.runtime_seconds < 15 * 60;
  return {pass, fmt::format("S-IPSW S(eta_hat) {:.3f} (0.655+-0.010), truth {:.3f}; {:.0f} s", s.oracle.mean, r.truth,
                            r.runtime_seconds)};
}

Outcome study_two_stage() {
  TwoStageDesign d;
  d.scenario = 1;
  d.n = 1000;
  d.seed = kStudySeed;
  const auto r = run_study(d, {{"S-IPSW", Method::ipsw, true}}, 200, kStudySeed, study_options());
  study_log() << to_text(r) << fmt::format("runtime {:.1f} s\n\n", r.runtime_seconds);
  const auto& s = row(r, "S-IPSW");
  const double target[] = {0.884, -0.463, 0.894, -0.448};
  double gap = 0.0;
  for (std::size_t k = 0; k < 4; ++k) gap = std::max(gap, std::abs(s.eta.at(k).mean - target[k]));
  const bool pass = gap <= 0.03 && within(s.oracle.mean, 0.561, 0.010) && s.coverage >= 0.91 && s.coverage <= 0.99 &&
                    r.runtime_seconds < 25 * 60;
  return {pass, fmt::format("n = {}; mean eta ({:.3f}, {:.3f}, {:.3f}, {:.3f}) max gap {:.3f} (<=0.03), S(eta_hat) {:.3f} "
                            "(0.561+-0.010), CP {:.3f} [0.91,0.99]; {:.0f} s",
                            d.n, s.eta[0].mean, s.eta[1].mean, s.eta[2].mean, s.eta[3].mean, gap, s.oracle.mean,
                            s.coverage, r.runtime_seconds)};
}

// ---------------------------------------------------------------------------
// 8. oracle values
// ---------------------------------------------------------------------------

Outcome oracle_values() {
  constexpr std::size_t draws = 500000;
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::pair<double, double>> got;
  for (ErrorDist e : {ErrorDist::extreme_value, ErrorDist::logistic}) {
    SingleStageDesign d;
    d.error = e;
    got.emplace_back(oracle_value(optimal_single_stage_regime(), d, 2.0, draws, 8001),
                     e == ErrorDist::extreme_value ? 0.605 : 0.672);
  }
  const double two[] = {0.567, 0.624, 0.702};
  for (int sc = 1; sc <= 3; ++sc) {
    TwoStageDesign d;
    d.scenario = sc;
    got.emplace_back(oracle_value(reference_two_stage_regime(sc), d, default_horizon(sc), draws, 8001), two[sc - 1]);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool pass = secs < 5 * 60;
  std::string detail;
  const char* names[] = {"extreme", "logistic", "scenario 1", "scenario 2", "scenario 3"};
  for (std::size_t k = 0; k < got.size(); ++k) {
    const bool ok = within(got[k].first, got[k].second, 0.005);
    pass = pass && ok;
    detail += fmt::format("{} {:.4f}/{:.3f}{}; ", names[k], got[k].first, got[k].second, ok ? "" : " (out)");
  }
  return {pass, detail + fmt::format("{:.0f} s", secs)};
}

// ---------------------------------------------------------------------------
// 9. inference
// ---------------------------------------------------------------------------

Outcome inference_checks() {
  const auto start = std::chrono::steady_clock::now();
  const auto& s = row(study4(), "S-IPSW");
  const double ratio = s.mean_se / s.estimate.sd;

  std::string boot_detail;
  bool boot_ok = true;
  for (std::uint64_t k = 0; k < 10; ++k) {
    SingleStageDesign d;
    d.seed = derive_seed(kStudySeed, 9000 + k);
    const auto sample = generate_single_stage(d);
    EstimatorSpec spec;
    spec.method = Method::ipsw;
    spec.smoothing.enabled = true;
    const auto nz = fit_nuisance(sample, spec);
    const SingleStageEvaluator ev(sample, nz, spec, d.t);
    SearchConfig sc;
    sc.seed = derive_seed(d.seed, 1);
    sc.threads = 0;
    const auto found = maximize_value(ev, sc);
    const double plug = plugin_variance(ev, found.regime.eta()).se();
    BootstrapConfig bc;
    bc.replicates = 200;
    bc.re_optimize = false;
    bc.seed = derive_seed(d.seed, 2);
    bc.threads = 0;
    const auto boot = bootstrap_inference(sample, spec, d.t, found.regime.eta(), bc);
    const double r = boot.se / plug;
    boot_ok = boot_ok && r >= 0.75 && r <= 1.25;
    boot_detail += fmt::format("{}{:.2f}", k ? " " : "", r);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = ratio >= 0.75 && ratio <= 1.25 && boot_ok && secs < 20 * 60;
  return {pass, fmt::format("plug-in SE {:.4f} / MC SD {:.4f} = {:.2f} [0.75,1.25]; bootstrap/plug-in per dataset: {}; "
                            "{:.0f} s",
                            s.mean_se, s.estimate.sd, ratio, boot_detail, secs)};
}

// ---------------------------------------------------------------------------
// 10. determinism
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string run_cli(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / fmt::format("sr_accept_{}", ::getpid());
  const int raw = std::system(fmt::format("{} {} > {} 2>/dev/null", SURVREGIME_CLI, args, out.string()).c_str());
  std::string s = slurp(out);
  fs::remove(out);
  if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) return "exit failure";
  return s;
}

Outcome determinism() {
  const unsigned mt = max_threads();
  StudyOptions o;
  o.oracle_draws = 20000;
  o.truth_draws = 50000;
  o.misclassification_draws = 20000;
  o.bootstrap_replicates = 50;

  SingleStageDesign sd;
  sd.seed = 17;
  TwoStageDesign td;
  td.n = 250;
  td.seed = 17;
  const std::vector<StudyConfig> one{{"S-IPSW", Method::ipsw, true}, {"S-AIPSW", Method::aipsw, true}};
  const std::vector<StudyConfig> two{{"S-IPSW", Method::ipsw, true}};
  std::vector<std::string> singles, twos;
  for (unsigned th : {1u, 1u, mt, mt}) {
    o.threads = th;
    singles.push_back(to_json(run_study(sd, one, 6, 17, o), false));
    twos.push_back(to_json(run_study(td, two, 4, 17, o), false));
  }
  const bool study_ok = std::all_of(singles.begin(), singles.end(), [&](auto& s) { return s == singles[0]; }) &&
                        std::all_of(twos.begin(), twos.end(), [&](auto& s) { return s == twos[0]; });

  const std::string est = fmt::format("estimate --input {} --time 400,800 --covariates Karnof,CD40,Age "
                                      "--treatment-col trt --bootstrap 50 --format text",
                                      SURVREGIME_FIXTURE);
  const std::string sim = "simulate --reps 3 --oracle-draws 5000 --truth-draws 5000 --seed 5 --format json";
  std::vector<std::string> cli_est, cli_sim;
  for (unsigned th : {1u, 1u, mt, mt}) {
    cli_est.push_back(run_cli(est + fmt::format(" --threads {}", th)));
    cli_sim.push_back(run_cli(sim + fmt::format(" --threads {}", th)));
  }
  const bool cli_ok = cli_est[0] != "exit failure" && cli_sim[0] != "exit failure" &&
                      std::all_of(cli_est.begin(), cli_est.end(), [&](auto& s) { return s == cli_est[0]; }) &&
                      std::all_of(cli_sim.begin(), cli_sim.end(), [&](auto& s) { return s == cli_sim[0]; });
  return {study_ok && cli_ok,
          fmt::format("threads 1 and {}: studies (single + two-stage) identical: {}; CLI estimate + simulate identical: {}",
                      mt, study_ok ? "yes" : "no", cli_ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"estimator oracles", estimator_oracles},
      {"invariance suite", invariance_suite},
      {"model fits", model_fits},
      {"single-stage study", study_table1},
      {"double robustness", study_double_robust},
      {"logistic-error study", study_logistic},
      {"two-stage study", study_two_stage},
      {"oracle values", oracle_values},
      {"inference", inference_checks},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failed += !o.pass;
    std::cout << fmt::format("[{}] criterion {:>2} {}: {}\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first,
                             o.detail)
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
