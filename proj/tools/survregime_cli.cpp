#include "survregime/errors.hpp"
#include "survregime/estimator.hpp"
#include "survregime/inference.hpp"
#include "survregime/optimizer.hpp"
#include "survregime/rng.hpp"
#include "survregime/simulation.hpp"
#include "survregime/survival_data.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sr = survregime;
using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Option bundles
// ---------------------------------------------------------------------------

struct SearchFlags {
  std::size_t population = 50;
  std::size_t generations = 200;
  std::size_t restarts = 3;
  std::size_t stall = 40;

  void add(CLI::App* app) {
    app->add_option("--population", population, "Differential-evolution population size")->capture_default_str();
    app->add_option("--generations", generations, "Generations per restart")->capture_default_str();
    app->add_option("--restarts", restarts, "Independent restarts")->capture_default_str();
    app->add_option("--stall", stall, "Stop a restart after this many flat generations (0 = never)")
        ->capture_default_str();
  }

  sr::SearchConfig config(std::uint64_t seed, unsigned threads) const {
    sr::SearchConfig c;
    c.population_size = population;
    c.generations = generations;
    c.restarts = restarts;
    c.stall_generations = stall;
    c.seed = seed;
    c.threads = threads;
    c.validate();
    return c;
  }

  json to_json() const {
    return {{"population", population}, {"generations", generations}, {"restarts", restarts}, {"stall", stall}};
  }
};

struct DataFlags {
  std::string input;
  std::string time_col = "time";
  std::string event_col = "event";
  std::string treatment_col = "treatment";
  std::vector<std::string> covariates;
  std::vector<double> times;
  std::string method = "both";
  std::string ps = "logistic";
  bool smooth = true;
  double c0 = std::cbrt(4.0);
  std::optional<double> bandwidth;
  bool stratified = false;
  bool two_stage = false;
  std::optional<double> interim_time;
  std::string a0_col = "a0";
  std::string a1_col = "a1";
  std::vector<std::string> baseline;
  std::vector<std::string> interim;
  std::string layout = "interim";

  void add(CLI::App* app) {
    app->add_option("--input", input, "CSV file")->required()->check(CLI::ExistingFile);
    app->add_option("--time", times, "Target time(s) t; repeat or list several")->required()->delimiter(',');
    app->add_option("--covariates", covariates, "Covariate columns (single decision)")->delimiter(',');
    app->add_option("--time-col", time_col)->capture_default_str();
    app->add_option("--event-col", event_col)->capture_default_str();
    app->add_option("--treatment-col", treatment_col)->capture_default_str();
    app->add_option("--method", method, "ipsw, aipsw or both")
        ->check(CLI::IsMember({"ipsw", "aipsw", "both"}))
        ->capture_default_str();
    app->add_option("--ps", ps, "logistic | constant | known=<column>[,<column>]")->capture_default_str();
    app->add_flag("--smooth,!--no-smooth", smooth, "Normal-CDF smoothing of the regime indicator")
        ->capture_default_str();
    app->add_option("--c0", c0, "Bandwidth constant")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--bandwidth", bandwidth, "Fixed bandwidth (default: automatic)")->check(CLI::PositiveNumber);
    app->add_flag("--stratified-censoring", stratified, "Censoring Kaplan-Meier by treatment arm");
    app->add_flag("--two-stage", two_stage, "Two decision points");
    app->add_option("--interim-time", interim_time, "Second decision time s")->check(CLI::PositiveNumber);
    app->add_option("--a0-col", a0_col)->capture_default_str();
    app->add_option("--a1-col", a1_col)->capture_default_str();
    app->add_option("--baseline-covariates", baseline)->delimiter(',');
    app->add_option("--interim-covariates", interim)->delimiter(',');
    app->add_option("--layout", layout, "Stage-1 rule features: interim (1, X1) or full (1, X0, g0, X1)")
        ->check(CLI::IsMember({"interim", "full"}))
        ->capture_default_str();
  }

  void validate() const {
    if (two_stage) {
      if (!interim_time) throw sr::Error(sr::ErrorCode::validation, "--two-stage requires --interim-time");
      if (baseline.empty() || interim.empty()) {
        throw sr::Error(sr::ErrorCode::validation,
                        "--two-stage requires --baseline-covariates and --interim-covariates");
      }
      if (method == "aipsw") throw sr::Error(sr::ErrorCode::validation, "two decision points support ipsw only");
    } else {
      if (interim_time) throw sr::Error(sr::ErrorCode::validation, "--interim-time requires --two-stage");
      if (covariates.empty()) throw sr::Error(sr::ErrorCode::validation, "--covariates is required");
    }
    for (double t : times) {
      if (!(t > 0.0) || !std::isfinite(t)) throw sr::Error(sr::ErrorCode::validation, "target times must be positive");
      if (two_stage && !(t > *interim_time)) {
        throw sr::Error(sr::ErrorCode::validation, "target times must exceed the interim time");
      }
    }
  }

  std::vector<sr::Method> methods() const {
    if (method == "ipsw" || two_stage) return {sr::Method::ipsw};
    if (method == "aipsw") return {sr::Method::aipsw};
    return {sr::Method::ipsw, sr::Method::aipsw};
  }

  sr::SmoothingSpec smoothing() const {
    sr::SmoothingSpec s;
    s.enabled = smooth;
    s.c0 = c0;
    s.bandwidth = bandwidth;
    return s;
  }

  /// Known-propensity columns named after "known=".
  std::vector<std::string> known_columns() const {
    if (ps.rfind("known=", 0) != 0) return {};
    std::vector<std::string> cols;
    std::stringstream ss(ps.substr(6));
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    return cols;
  }

  sr::PropensitySpec::Kind ps_kind() const {
    if (ps == "logistic") return sr::PropensitySpec::Kind::logistic;
    if (ps == "constant") return sr::PropensitySpec::Kind::constant;
    if (!known_columns().empty()) return sr::PropensitySpec::Kind::known;
    throw sr::Error(sr::ErrorCode::validation, fmt::format("unknown propensity model '{}'", ps));
  }

  sr::PropensitySpec propensity() const {
    switch (ps_kind()) {
      case sr::PropensitySpec::Kind::logistic: return sr::PropensitySpec::logistic();
      case sr::PropensitySpec::Kind::constant: return sr::PropensitySpec::constant();
      case sr::PropensitySpec::Kind::known: {
        const auto cols = known_columns();
        if (cols.size() != 1) throw sr::Error(sr::ErrorCode::validation, "known=<column> names one column");
        return sr::PropensitySpec::known_values(sr::load_csv_column(input, cols[0]));
      }
    }
    throw sr::Error(sr::ErrorCode::validation, "unknown propensity model");
  }

  sr::SurvivalSample load() const {
    sr::CsvSchema schema;
    schema.time = time_col;
    schema.event = event_col;
    schema.treatment = treatment_col;
    schema.covariates = covariates;
    return sr::load_survival_csv(input, schema);
  }

  sr::TwoStageSample load_two_stage() const {
    sr::TwoStageCsvSchema schema;
    schema.time = time_col;
    schema.event = event_col;
    schema.stage0_treatment = a0_col;
    schema.stage1_treatment = a1_col;
    schema.baseline_covariates = baseline;
    schema.interim_covariates = interim;
    return sr::load_two_stage_csv(input, *interim_time, schema);
  }

  sr::StageOneFeatures stage_one() const {
    return layout == "full" ? sr::StageOneFeatures::full : sr::StageOneFeatures::interim_only;
  }

  json to_json() const {
    json j{{"input", input},
           {"time_col", time_col},
           {"event_col", event_col},
           {"times", times},
           {"method", method},
           {"ps", ps},
           {"smooth", smooth},
           {"c0", c0},
           {"bandwidth", bandwidth ? json(*bandwidth) : json("auto")},
           {"stratified_censoring", stratified},
           {"two_stage", two_stage}};
    if (two_stage) {
      j["interim_time"] = *interim_time;
      j["a0_col"] = a0_col;
      j["a1_col"] = a1_col;
      j["baseline_covariates"] = baseline;
      j["interim_covariates"] = interim;
      j["layout"] = layout;
    } else {
      j["treatment_col"] = treatment_col;
      j["covariates"] = covariates;
    }
    return j;
  }
};

struct OutputFlags {
  std::string format = "json";
  std::string output;

  void add(CLI::App* app) {
    app->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}))->capture_default_str();
    app->add_option("--output", output, "Output file (default: stdout)");
  }

  void emit(const std::string& body) const {
    if (output.empty()) {
      std::cout << body;
      return;
    }
    std::ofstream out(output);
    if (!out) throw sr::Error(sr::ErrorCode::validation, fmt::format("cannot write '{}'", output));
    out << body;
  }
};

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json inference_json(const sr::InferenceResult& r) {
  json j{{"method", sr::to_string(r.method)},
         {"value", r.value},
         {"se", r.se},
         {"level", r.level},
         {"ci", {r.ci_lower, r.ci_upper}}};
  if (r.method == sr::InferenceResult::Kind::bootstrap) {
    j["replicates"] = r.replicates;
    j["failures"] = r.failures;
  }
  return j;
}

json trace_json(const sr::SearchDiagnostics& d) {
  json t = json::array();
  for (const auto& p : d.trace) {
    t.push_back({{"restart", p.restart}, {"generation", p.generation}, {"value", p.value}, {"point", to_vector(p.point)}});
  }
  return t;
}

json search_json(const sr::SearchDiagnostics& d, bool trace) {
  json j{{"evaluations", d.evaluations}, {"restart_best", d.restart_best}, {"warnings", d.warnings}};
  if (trace) j["trace"] = trace_json(d);
  return j;
}

std::string fmt_vec(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{:.3f}", i ? ", " : "", v[i]);
  return s + ")";
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateCommand {
  DataFlags data;
  SearchFlags search;
  OutputFlags out;
  std::optional<std::size_t> bootstrap;
  double level = 0.95;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;
  bool trace = false;

  void add(CLI::App* app) {
    data.add(app);
    search.add(app);
    out.add(app);
    app->add_option("--bootstrap", bootstrap, "Bootstrap replicates for an additional percentile interval");
    app->add_option("--level", level, "Confidence level")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    app->add_flag("--trace", trace, "Include the optimizer trace");
  }

  json config() const {
    json j{{"command", "estimate"}, {"data", data.to_json()}, {"search", search.to_json()}, {"seed", seed},
           {"threads", threads},    {"level", level}};
    j["bootstrap"] = bootstrap ? json(*bootstrap) : json(nullptr);
    return j;
  }

  sr::BootstrapConfig boot_config(std::uint64_t stream) const {
    sr::BootstrapConfig b;
    b.replicates = *bootstrap;
    b.level = level;
    b.seed = sr::derive_seed(seed, stream);
    b.threads = threads;
    b.validate();
    return b;
  }

  json run_single() const {
    const sr::SurvivalSample sample = data.load();
    json results = json::array();
    std::uint64_t stream = 0;
    for (sr::Method m : data.methods()) {
      sr::EstimatorSpec spec;
      spec.method = m;
      spec.propensity = data.propensity();
      spec.smoothing = data.smoothing();
      spec.stratified_censoring = data.stratified;
      const sr::Nuisance nz = sr::fit_nuisance(sample, spec);
      for (double t : data.times) {
        ++stream;
        const sr::SingleStageEvaluator ev(sample, nz, spec, t);
        const sr::RegimeSearch found = sr::maximize_value(ev, search.config(sr::derive_seed(seed, stream), threads));
        const sr::PluginEstimate pe = sr::plugin_variance(ev, found.regime.eta());
        json r{{"t", t},
               {"method", sr::to_string(m)},
               {"eta", to_vector(found.regime.eta())},
               {"value", found.value},
               {"plugin", inference_json(sr::wald_interval(found.value, pe.se(), level))}};
        if (bootstrap) {
          r["bootstrap"] = inference_json(
              sr::bootstrap_inference(sample, spec, t, found.regime.eta(), boot_config(1000 + stream)));
        }
        r["search"] = search_json(found.diagnostics, trace);
        results.push_back(r);
      }
    }
    json j{{"config", config()}, {"n", sample.size()}, {"warnings", sample.warnings()}, {"results", results}};
    return j;
  }

  json run_two_stage() const {
    const sr::TwoStageSample sample = data.load_two_stage();
    std::vector<double> ps0, ps1;
    const auto kind = data.ps_kind();
    if (kind == sr::PropensitySpec::Kind::known) {
      const auto cols = data.known_columns();
      if (cols.size() != 2) throw sr::Error(sr::ErrorCode::validation, "two stages need known=<col0>,<col1>");
      ps0 = sr::load_csv_column(data.input, cols[0]);
      ps1 = sr::load_csv_column(data.input, cols[1]);
    } else {
      auto fitted = sr::fit_two_stage_propensity(sample, kind);
      ps0 = std::move(fitted.ps0);
      ps1 = std::move(fitted.ps1);
    }
    const sr::StepCurve censor = sr::censoring_km(sample.time(), sample.event());
    const sr::SmoothingSpec sm = data.smoothing();
    json results = json::array();
    std::uint64_t stream = 0;
    for (double t : data.times) {
      ++stream;
      const sr::TwoStageEvaluator ev(sample, ps0, ps1, censor, sm, data.stage_one(), t);
      const sr::TwoStageSearch found = sr::maximize_value(ev, search.config(sr::derive_seed(seed, stream), threads));
      json r{{"t", t},
             {"method", "ipsw"},
             {"eta0", to_vector(found.regime.stage0().eta())},
             {"eta1", to_vector(found.regime.stage1().eta())},
             {"value", found.value}};
      if (bootstrap) {
        r["bootstrap"] = inference_json(sr::bootstrap_inference(sample, ps0, ps1, censor, sm, data.stage_one(), t,
                                                                found.regime.stage0().eta(),
                                                                found.regime.stage1().eta(), boot_config(1000 + stream)));
      }
      r["search"] = search_json(found.diagnostics, trace);
      results.push_back(r);
    }
    return {{"config", config()}, {"n", sample.size()}, {"warnings", sample.warnings()}, {"results", results}};
  }

  static std::string text(const json& j) {
    std::string s = fmt::format("n = {}, seed = {}\n", j["n"].get<std::size_t>(), j["config"]["seed"].get<std::uint64_t>());
    for (const auto& w : j["warnings"]) s += fmt::format("warning: {}\n", w.get<std::string>());
    for (const auto& r : j["results"]) {
      const bool two = r.contains("eta0");
      s += fmt::format("t = {:<8} {:<6} ", r["t"].get<double>(), r["method"].get<std::string>());
      if (two) {
        s += fmt::format("eta0 = {} eta1 = {} ", fmt_vec(r["eta0"]), fmt_vec(r["eta1"]));
      } else {
        s += fmt::format("eta = {} ", fmt_vec(r["eta"]));
      }
      s += fmt::format("S = {:.3f}", r["value"].get<double>());
      for (const char* key : {"plugin", "bootstrap"}) {
        if (!r.contains(key)) continue;
        const auto& inf = r[key];
        s += fmt::format("  {} SE {:.3f} CI ({:.3f}, {:.3f})", key, inf["se"].get<double>(), inf["ci"][0].get<double>(),
                         inf["ci"][1].get<double>());
      }
      s += "\n";
      for (const auto& w : r["search"]["warnings"]) s += fmt::format("  warning: {}\n", w.get<std::string>());
    }
    return s;
  }

  void run() const {
    data.validate();
    const json j = data.two_stage ? run_two_stage() : run_single();
    out.emit(out.format == "json" ? j.dump(2) + "\n" : text(j));
  }
};

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareCommand {
  DataFlags data;
  SearchFlags search;
  OutputFlags out;
  std::size_t bootstrap = 500;
  double level = 0.95;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;

  void add(CLI::App* app) {
    data.add(app);
    search.add(app);
    out.add(app);
    app->add_option("--bootstrap", bootstrap, "Bootstrap replicates (at least 50)")->capture_default_str();
    app->add_option("--level", level, "Confidence level")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
  }

  static json comparison_json(const char* name, const sr::Comparison& c) {
    json j{{"simple", name}, {"difference", c.difference}, {"wald", inference_json(c.wald)}};
    if (c.bootstrap) j["bootstrap"] = inference_json(*c.bootstrap);
    return j;
  }

  void run() const {
    data.validate();
    if (data.two_stage) throw sr::Error(sr::ErrorCode::validation, "compare supports a single decision point");
    sr::BootstrapConfig boot;
    boot.replicates = bootstrap;
    boot.level = level;
    boot.threads = threads;
    boot.validate();
    const sr::SurvivalSample sample = data.load();
    json results = json::array();
    std::uint64_t stream = 0;
    for (sr::Method m : data.methods()) {
      sr::EstimatorSpec spec;
      spec.method = m;
      spec.propensity = data.propensity();
      spec.smoothing = data.smoothing();
      spec.stratified_censoring = data.stratified;
      const sr::Nuisance nz = sr::fit_nuisance(sample, spec);
      for (double t : data.times) {
        ++stream;
        const sr::SingleStageEvaluator ev(sample, nz, spec, t);
        const auto found = sr::maximize_value(ev, search.config(sr::derive_seed(seed, stream), threads));
        boot.seed = sr::derive_seed(seed, 1000 + stream);
        const auto cmp = sr::compare_to_simple(sample, spec, t, found.regime.eta(), boot);
        results.push_back(json{{"t", t},
                               {"method", sr::to_string(m)},
                               {"eta", to_vector(found.regime.eta())},
                               {"value", found.value},
                               {"comparisons", json::array({comparison_json("treat_all", cmp.vs_treat_all),
                                                            comparison_json("treat_none", cmp.vs_treat_none)})}});
      }
    }
    json config{{"command", "compare"}, {"data", data.to_json()}, {"search", search.to_json()}, {"seed", seed},
                {"threads", threads},   {"bootstrap", bootstrap},   {"level", level}};
    const json j{{"config", config}, {"n", sample.size()}, {"warnings", sample.warnings()}, {"results", results}};
    if (out.format == "json") {
      out.emit(j.dump(2) + "\n");
      return;
    }
    std::string s;
    for (const auto& r : results) {
      for (const auto& c : r["comparisons"]) {
        s += fmt::format("t = {:<8} {:<6} vs {:<10} diff {:+.3f}  Wald ({:.3f}, {:.3f})  Boot ({:.3f}, {:.3f})\n",
                         r["t"].get<double>(), r["method"].get<std::string>(), c["simple"].get<std::string>(),
                         c["difference"].get<double>(), c["wald"]["ci"][0].get<double>(),
                         c["wald"]["ci"][1].get<double>(), c["bootstrap"]["ci"][0].get<double>(),
                         c["bootstrap"]["ci"][1].get<double>());
      }
    }
    out.emit(s);
  }
};

// ---------------------------------------------------------------------------
// simulate / oracle / calibrate
// ---------------------------------------------------------------------------

struct DesignFlags {
  std::string design = "single";
  std::string error = "extreme";
  double censor = 0.15;
  std::string ps = "correct";
  int scenario = 1;
  std::optional<std::size_t> n;
  std::optional<double> t;

  void add(CLI::App* app, bool with_sample_size) {
    app->add_option("--design", design, "single or two-stage")
        ->check(CLI::IsMember({"single", "two-stage"}))
        ->capture_default_str();
    app->add_option("--error", error, "extreme or logistic (single decision)")
        ->check(CLI::IsMember({"extreme", "logistic"}))
        ->capture_default_str();
    app->add_option("--censor", censor, "Censoring rate 0.15 or 0.40")->capture_default_str();
    app->add_option("--scenario", scenario, "Two-stage scenario 1, 2 or 3")->capture_default_str();
    app->add_option("--t", t, "Target time (default 2, or 3 / 6 by scenario)");
    if (with_sample_size) {
      app->add_option("--n", n, "Sample size (default 250, or 1000 for two stages)");
      app->add_option("--ps", ps, "Propensity model: correct or intercept")
          ->check(CLI::IsMember({"correct", "intercept"}))
          ->capture_default_str();
    }
  }

  bool single() const { return design == "single"; }

  sr::SingleStageDesign single_design(std::uint64_t seed) const {
    sr::SingleStageDesign d;
    d.n = n.value_or(d.n);
    d.error = error == "extreme" ? sr::ErrorDist::extreme_value : sr::ErrorDist::logistic;
    d.censor_rate = censor;
    d.ps = ps == "correct" ? sr::PsModel::correct : sr::PsModel::intercept_only;
    d.t = t.value_or(2.0);
    d.seed = seed;
    sr::validate(d);
    return d;
  }

  sr::TwoStageDesign two_stage_design(std::uint64_t seed) const {
    sr::TwoStageDesign d;
    d.scenario = scenario;
    d.n = n.value_or(d.n);
    d.censor_rate = censor;
    if (scenario < 1 || scenario > 3) {
      throw sr::Error(sr::ErrorCode::validation, fmt::format("unknown scenario {}; expected 1, 2 or 3", scenario));
    }
    d.t = t.value_or(sr::default_horizon(scenario));
    d.seed = seed;
    sr::validate(d);
    return d;
  }
};

std::vector<sr::StudyConfig> parse_configs(const std::vector<std::string>& labels, bool single) {
  std::vector<sr::StudyConfig> out;
  for (const auto& l : labels) {
    if (l == "I") out.push_back({"IPSW", sr::Method::ipsw, false});
    else if (l == "S-I") out.push_back({"S-IPSW", sr::Method::ipsw, true});
    else if (l == "A" && single) out.push_back({"AIPSW", sr::Method::aipsw, false});
    else if (l == "S-A" && single) out.push_back({"S-AIPSW", sr::Method::aipsw, true});
    else throw sr::Error(sr::ErrorCode::validation, fmt::format("unknown estimator '{}'", l));
  }
  return out;
}

struct SimulateCommand {
  DesignFlags design;
  SearchFlags search;
  std::vector<std::string> estimators;
  std::size_t reps = 200;
  std::uint64_t seed = 7;
  unsigned threads = 0;
  std::size_t oracle_draws = 100000;
  std::size_t truth_draws = 500000;
  std::size_t bootstrap = 200;
  std::string format = "text";
  std::string output;
  bool timing = false;

  void add(CLI::App* app) {
    design.add(app, true);
    search.add(app);
    app->add_option("--estimators", estimators, "Subset of I, S-I, A, S-A (default: all that apply)")->delimiter(',');
    app->add_option("--reps", reps, "Replications")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    app->add_option("--oracle-draws", oracle_draws, "Monte Carlo draws for S(eta_hat)")->capture_default_str();
    app->add_option("--truth-draws", truth_draws, "Monte Carlo draws for the target value")->capture_default_str();
    app->add_option("--bootstrap", bootstrap, "Bootstrap replicates for two-stage SEs")->capture_default_str();
    app->add_option("--format", format, "json or text (ignored with --output, which writes both)")
        ->check(CLI::IsMember({"json", "text"}))
        ->capture_default_str();
    app->add_option("--output", output, "Path prefix; writes <prefix>.json and <prefix>.txt");
    app->add_flag("--timing", timing, "Record the wall-clock runtime in the JSON report");
  }

  void run() const {
    sr::StudyOptions o;
    o.search = search.config(seed, 1);
    o.oracle_draws = oracle_draws;
    o.truth_draws = truth_draws;
    o.misclassification_draws = oracle_draws;
    o.bootstrap_replicates = bootstrap;
    o.threads = threads;
    std::vector<std::string> labels = estimators;
    if (labels.empty()) labels = design.single() ? std::vector<std::string>{"I", "S-I", "A", "S-A"} : std::vector<std::string>{"I", "S-I"};
    const auto configs = parse_configs(labels, design.single());
    if (reps < 1) throw sr::Error(sr::ErrorCode::validation, "--reps must be at least 1");
    const sr::StudyReport report = design.single()
                                       ? sr::run_study(design.single_design(seed), configs, reps, seed, o)
                                       : sr::run_study(design.two_stage_design(seed), configs, reps, seed, o);
    std::cerr << fmt::format("{} replications in {:.1f} s\n", reps, report.runtime_seconds);
    json j = json::parse(sr::to_json(report, timing));
    j["config"] = {{"command", "simulate"},     {"estimators", labels},         {"reps", reps},
                   {"seed", seed},              {"oracle_draws", oracle_draws}, {"truth_draws", truth_draws},
                   {"bootstrap", bootstrap},    {"search", search.to_json()}};
    const std::string js = j.dump(2) + "\n";
    const std::string txt = sr::to_text(report);
    if (!output.empty()) {
      std::ofstream(output + ".json") << js;
      std::ofstream(output + ".txt") << txt;
      if (!std::ofstream(output + ".txt", std::ios::app)) {
        throw sr::Error(sr::ErrorCode::validation, fmt::format("cannot write '{}'", output));
      }
      return;
    }
    std::cout << (format == "json" ? js : txt);
  }
};

struct OracleCommand {
  DesignFlags design;
  std::vector<double> eta;
  std::vector<double> eta1;
  std::size_t draws = 500000;
  std::uint64_t seed = 1;
  std::size_t grid = 0;

  void add(CLI::App* app) {
    design.add(app, false);
    app->add_option("--eta", eta, "Regime coefficients (stage 0 for two stages); default: optimal/reference")
        ->delimiter(',');
    app->add_option("--eta1", eta1, "Stage-1 coefficients over (1, X1)")->delimiter(',');
    app->add_option("--draws", draws, "Monte Carlo sample size")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--grid", grid, "Two stages: grid-search the stage-0 rule with this many steps");
  }

  static Eigen::VectorXd vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  void run() const {
    json j;
    if (design.single()) {
      const auto d = design.single_design(seed);
      const sr::LinearRegime r = eta.empty() ? sr::optimal_single_stage_regime() : sr::LinearRegime(vec(eta));
      j = {{"design", "single"}, {"error", design.error}, {"t", d.t}, {"eta", to_vector(r.eta())},
           {"draws", draws},     {"seed", seed},          {"value", sr::oracle_value(r, d, d.t, draws, seed)}};
    } else {
      const auto d = design.two_stage_design(seed);
      if (grid > 0) {
        const auto g = sr::grid_search_stage0(d.scenario, d.t, draws, seed, grid);
        j = {{"design", "two-stage"}, {"scenario", d.scenario}, {"t", d.t},   {"grid", grid},
             {"draws", draws},        {"seed", seed},           {"eta0", to_vector(g.eta)}, {"value", g.value}};
      } else {
        sr::TwoStageRegime r = sr::reference_two_stage_regime(d.scenario);
        if (!eta.empty() || !eta1.empty()) {
          r = sr::TwoStageRegime(eta.empty() ? r.stage0() : sr::LinearRegime(vec(eta)),
                                 eta1.empty() ? r.stage1() : sr::LinearRegime(vec(eta1)),
                                 sr::StageOneFeatures::interim_only);
        }
        j = {{"design", "two-stage"},
             {"scenario", d.scenario},
             {"t", d.t},
             {"eta0", to_vector(r.stage0().eta())},
             {"eta1", to_vector(r.stage1().eta())},
             {"draws", draws},
             {"seed", seed},
             {"value", sr::oracle_value(r, d, d.t, draws, seed)}};
      }
    }
    std::cout << j.dump(2) << "\n";
  }
};

struct CalibrateCommand {
  DesignFlags design;
  std::size_t n = 100000;
  std::uint64_t seed = 20240601;

  void add(CLI::App* app) {
    design.add(app, false);
    app->add_option("--draws", n, "Subjects in the calibration sample")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
  }

  void run() const {
    json j;
    if (design.single()) {
      const auto d = design.single_design(seed);
      const double c0 = sr::calibrate_censoring(d, n, seed);
      j = {{"design", "single"}, {"error", design.error}, {"censor", d.censor_rate}, {"c0", c0},
           {"stored", sr::censoring_constant(d.error, d.censor_rate)}};
    } else {
      const auto d = design.two_stage_design(seed);
      const double c0 = sr::calibrate_censoring(d, n, seed);
      j = {{"design", "two-stage"}, {"scenario", d.scenario}, {"censor", d.censor_rate}, {"c0", c0},
           {"stored", sr::censoring_constant(d.scenario, d.censor_rate)}};
    }
    std::cout << j.dump(2) << "\n";
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal treatment regimes for t-year survival from censored data"};
  app.require_subcommand(1);

  EstimateCommand estimate;
  CompareCommand compare;
  SimulateCommand simulate;
  OracleCommand oracle;
  CalibrateCommand calibrate;
  auto* est = app.add_subcommand("estimate", "Estimate the optimal linear regime for each target time");
  estimate.add(est);
  auto* cmp = app.add_subcommand("compare", "Compare the estimated regime with treat-all and treat-none");
  compare.add(cmp);
  auto* sim = app.add_subcommand("simulate", "Run a simulation study");
  simulate.add(sim);
  auto* orc = app.add_subcommand("oracle", "Monte Carlo value of a regime under a simulation design");
  oracle.add(orc);
  auto* cal = app.add_subcommand("calibrate", "Recompute a censoring constant");
  calibrate.add(cal);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (est->parsed()) estimate.run();
    else if (cmp->parsed()) compare.run();
    else if (sim->parsed()) simulate.run();
    else if (orc->parsed()) oracle.run();
    else if (cal->parsed()) calibrate.run();
  } catch (const sr::Error& e) {
    std::cerr << "error (" << sr::to_string(e.code()) << "): " << e.what() << "\n";
    return sr::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
