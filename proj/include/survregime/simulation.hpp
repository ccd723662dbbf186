#pragma once

#include "survregime/estimator.hpp"
#include "survregime/inference.hpp"
#include "survregime/optimizer.hpp"
#include "survregime/regime.hpp"
#include "survregime/survival_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace survregime {

// ---------------------------------------------------------------------------
// Designs
// ---------------------------------------------------------------------------

enum class ErrorDist { extreme_value, logistic };
enum class PsModel { correct, intercept_only };

const char* to_string(ErrorDist e);
const char* to_string(PsModel m);

/// X1, X2 ~ U(-2, 2); logit pi = X1 - 0.5 X2; T = log(1 + exp(Z + 2)) with
/// Z = -0.5 X1 + A (X1 - X2) + eps; C ~ U(0, C0).
struct SingleStageDesign {
  std::size_t n = 250;
  ErrorDist error = ErrorDist::extreme_value;
  double censor_rate = 0.15;
  PsModel ps = PsModel::correct;
  double t = 2.0;
  std::uint64_t seed = 1;
};

/// X0 ~ U(0, 4); A0, A1 ~ Bernoulli(0.5); T1 ~ Exp(lambda1); if min(T1, C) > 1:
/// X1 = 0.5 X0 - 0.4 (A0 - 0.5) + U(0, 2), T2 ~ Exp(lambda2); T = T1 if T1 <= 1
/// else 1 + T2. Interim time s = 1.
struct TwoStageDesign {
  int scenario = 1;
  std::size_t n = 1000;
  double censor_rate = 0.15;
  double t = 3.0;
  std::uint64_t seed = 1;
};

constexpr double kInterimTime = 1.0;

/// t = 3 for scenarios 1 and 3, t = 6 for scenario 2.
double default_horizon(int scenario);
void validate(const SingleStageDesign& d);
void validate(const TwoStageDesign& d);

double stage0_rate(int scenario, int a0, double x0);
double stage1_rate(int scenario, int a0, int a1, double x0, double x1);

/// Stored censoring upper bounds C0 for the 15% and 40% targets.
double censoring_constant(ErrorDist error, double rate);
double censoring_constant(int scenario, double rate);

/// Bisection for C0 on a common-random-numbers sample of size n.
double calibrate_censoring(const SingleStageDesign& design, std::size_t n, std::uint64_t seed);
double calibrate_censoring(const TwoStageDesign& design, std::size_t n, std::uint64_t seed);

/// Censored fraction for an explicit C0.
double censoring_fraction(const SingleStageDesign& design, double c0, std::size_t n, std::uint64_t seed);
double censoring_fraction(const TwoStageDesign& design, double c0, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Generators and oracles
// ---------------------------------------------------------------------------

SurvivalSample generate_single_stage(const SingleStageDesign& design);
SurvivalSample generate_single_stage(const SingleStageDesign& design, double c0);
TwoStageSample generate_two_stage(const TwoStageDesign& design);
TwoStageSample generate_two_stage(const TwoStageDesign& design, double c0);

/// expit(X1 - 0.5 X2) for each row of a single-stage sample.
std::vector<double> true_propensity(const SurvivalSample& sample);

/// I{X1 - X2 >= 0}: eta = (0, 1, -1) / sqrt(2).
LinearRegime optimal_single_stage_regime();

/// Best linear two-stage regime per scenario from the stage-0 grid search (interim-only layout).
TwoStageRegime reference_two_stage_regime(int scenario);

/// Monte Carlo S(t; regime) from n_mc uncensored subjects treated by the regime.
double oracle_value(const LinearRegime& regime, const SingleStageDesign& design, double t,
                    std::size_t n_mc, std::uint64_t seed);
double oracle_value(const TwoStageRegime& regime, const TwoStageDesign& design, double t,
                    std::size_t n_mc, std::uint64_t seed);

/// Covariates drawn from the single-stage design law (n x 2).
Eigen::MatrixXd draw_covariates(std::size_t n, std::uint64_t seed);

/// Fraction of rows where the two hard rules disagree.
double misclassification_rate(const LinearRegime& estimated, const LinearRegime& truth,
                              const Eigen::MatrixXd& covariates);

/// Two stages: a subject is misclassified if the stage-0 rules disagree, or
/// if they agree and the stage-1 rules disagree at the X1 generated under
/// that common stage-0 treatment.
double misclassification_rate(const TwoStageRegime& estimated, const TwoStageRegime& truth,
                              std::size_t n, std::uint64_t seed);

/// Grid search for the stage-0 rule (eta1, eta2) with stage 1 fixed at
/// I(2 - X1 > 0), as used to define the reference regimes.
struct StageZeroGrid {
  Eigen::Vector2d eta;
  double value = 0.0;
};
StageZeroGrid grid_search_stage0(int scenario, double t, std::size_t n_mc, std::uint64_t seed,
                                 std::size_t steps);

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

struct StudyConfig {
  std::string label;
  Method method = Method::ipsw;
  bool smoothed = true;
};

struct StudyOptions {
  SearchConfig search;
  std::size_t oracle_draws = 100000;      // per-replication S(eta_hat)
  std::size_t truth_draws = 500000;       // S(t; eta_opt) for coverage
  std::size_t misclassification_draws = 100000;
  std::size_t bootstrap_replicates = 200; // two-stage standard errors
  double level = 0.95;
  unsigned threads = 1;
};

struct ReplicationResult {
  std::size_t replication = 0;
  std::size_t config = 0;
  bool failed = false;
  std::string error;
  std::vector<double> eta;  // concatenated (eta0, eta1) for two stages
  double estimate = 0.0;
  double se = 0.0;
  bool covered = false;
  double oracle = 0.0;
  double misclassification = 0.0;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

struct StudyRow {
  StudyConfig config;
  std::vector<MeanSd> eta;
  MeanSd estimate;
  double mean_se = 0.0;
  double coverage = 0.0;
  MeanSd oracle;
  MeanSd misclassification;
  std::size_t replications = 0;
  std::size_t failures = 0;
};

struct StudyReport {
  std::string design;          // human-readable design summary
  std::string design_json;     // resolved design parameters
  double truth = 0.0;          // S(t; eta_opt)
  std::uint64_t seed = 0;
  std::vector<StudyRow> rows;
  std::vector<ReplicationResult> replications;
  double runtime_seconds = 0.0;
};

StudyReport run_study(const SingleStageDesign& design, const std::vector<StudyConfig>& configs,
                      std::size_t replications, std::uint64_t seed, const StudyOptions& options);
StudyReport run_study(const TwoStageDesign& design, const std::vector<StudyConfig>& configs,
                      std::size_t replications, std::uint64_t seed, const StudyOptions& options);

/// Aggregates replication results (exposed for testing the degenerate cases).
std::vector<StudyRow> aggregate(const std::vector<StudyConfig>& configs,
                                const std::vector<ReplicationResult>& results, std::size_t replications);

/// JSON document; `include_timing` false omits the only non-deterministic field.
std::string to_json(const StudyReport& report, bool include_timing = true);
/// Aligned text table, one row per configuration (no timing).
std::string to_text(const StudyReport& report);

}  // namespace survregime
