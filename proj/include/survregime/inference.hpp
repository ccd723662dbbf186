#pragma once

#include "survregime/estimator.hpp"
#include "survregime/optimizer.hpp"
#include "survregime/regime.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace survregime {

struct InferenceResult {
  enum class Kind { plugin, bootstrap };
  double value = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  Kind method = Kind::plugin;
  double level = 0.95;
  std::size_t replicates = 0;
  std::size_t failures = 0;
};

const char* to_string(InferenceResult::Kind k);

/// Plug-in estimate at a fixed regime: value S(t), its variance, and the
/// per-subject influence values of S(t) (variance = mean(influence^2) / n).
struct PluginEstimate {
  double value = 0.0;
  double variance = 0.0;
  Eigen::VectorXd influence;
  double se() const { return std::sqrt(variance); }
};

/// zeta_i(t) = sum_{s_k <= t} w_i {dN_i(s_k) - Y_i(s_k) dLambda(s_k)} / (n^{-1} sum_j w_j Y_j(s_k))
/// for a weighted Kaplan-Meier curve with fixed weights.
Eigen::VectorXd weighted_hazard_influence(const EventGrid& grid, std::span<const double> weights, double t);

/// Inverse-weighting variance. With known_ps = false the logistic
/// propensity fit's influence enters through a central-difference
/// derivative of the cumulative hazard in theta.
PluginEstimate plugin_variance_ipsw(const SingleStageEvaluator& evaluator, const Eigen::VectorXd& eta,
                                    bool known_ps);

/// Augmented variance: psi_1 from the augmented increments plus psi_2 from
/// the propensity, Cox coefficient, Breslow increment and censoring
/// survival influence functions.
PluginEstimate plugin_variance_aipsw(const SingleStageEvaluator& evaluator, const Eigen::VectorXd& eta,
                                     bool known_ps);

/// Dispatches on the evaluator's method; the propensity counts as known
/// when the nuisance carries no logistic fit.
PluginEstimate plugin_variance(const SingleStageEvaluator& evaluator, const Eigen::VectorXd& eta);

/// Influence of the Kaplan-Meier censoring survival S_C(s_k-) at each grid time
/// (n x K). Stratified models give zero rows outside each subject's arm for
/// the other arm's curve; `arm` selects the curve.
Eigen::MatrixXd censoring_influence(std::span<const double> time, std::span<const int> event,
                                    std::span<const int> treatment, const CensoringModel& model, int arm,
                                    std::span<const double> grid);

/// Symmetric normal-theory interval.
InferenceResult wald_interval(double value, double se, double level);

struct BootstrapConfig {
  std::size_t replicates = 200;
  double level = 0.95;
  bool refit_models = true;
  bool re_optimize = false;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  /// Search settings for re-optimizing replicates.
  SearchConfig search;

  void validate() const;
};

/// statistic(replicate, rows) -> values for one resample; a thrown Error marks the
/// replicate as failed. Rows are drawn with replacement from a stream
/// derived from (seed, replicate).
struct BootstrapDraws {
  std::vector<std::vector<double>> values;  // successful replicates, in replicate order
  std::size_t failures = 0;
};
BootstrapDraws bootstrap_replicates(std::size_t n, const BootstrapConfig& config,
                                    const std::function<std::vector<double>(std::size_t, std::span<const std::size_t>)>& statistic);

/// SE = SD of the replicate values; percentile CI (linear interpolation
/// between order statistics). Throws bootstrap_failure above 20% failures.
InferenceResult summarize_bootstrap(double value, const BootstrapDraws& draws, std::size_t column,
                                    const BootstrapConfig& config);

/// Bootstrap of S(t) at the estimated regime for a single-stage sample.
InferenceResult bootstrap_inference(const SurvivalSample& sample, const EstimatorSpec& spec, double t,
                                    const Eigen::VectorXd& eta_hat, const BootstrapConfig& config);

/// Bootstrap for two decision points with supplied (known) propensities;
/// the censoring curve is refit per replicate when refit_models is set.
InferenceResult bootstrap_inference(const TwoStageSample& sample, std::span<const double> ps0,
                                    std::span<const double> ps1, const StepCurve& censor,
                                    const SmoothingSpec& smoothing, StageOneFeatures layout, double t,
                                    const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1,
                                    const BootstrapConfig& config);

struct Comparison {
  LinearRegime simple;  // treat-all or treat-none
  double difference = 0.0;
  InferenceResult wald;
  std::optional<InferenceResult> bootstrap;
};

struct SimpleComparisons {
  Comparison vs_treat_all;
  Comparison vs_treat_none;
};

/// S(t; eta_hat) - S(t; simple) with Wald intervals from the difference of
/// the plug-in influence values, plus bootstrap intervals when requested.
SimpleComparisons compare_to_simple(const SurvivalSample& sample, const EstimatorSpec& spec, double t,
                                    const Eigen::VectorXd& eta_hat,
                                    const std::optional<BootstrapConfig>& bootstrap);

}  // namespace survregime
