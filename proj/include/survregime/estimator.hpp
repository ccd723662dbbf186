#pragma once

#include "survregime/nonparam.hpp"
#include "survregime/regime.hpp"
#include "survregime/regression.hpp"
#include "survregime/survival_data.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace survregime {

enum class Method { ipsw, aipsw };

const char* to_string(Method m);

struct PropensitySpec {
  enum class Kind { logistic, constant, known };
  Kind kind = Kind::logistic;
  /// Per-subject probabilities for Kind::known, aligned with the sample rows.
  std::vector<double> known;

  static PropensitySpec logistic() { return {Kind::logistic, {}}; }
  static PropensitySpec constant() { return {Kind::constant, {}}; }
  static PropensitySpec known_values(std::vector<double> p) { return {Kind::known, std::move(p)}; }

  /// The same specification for resampled rows (only `known` depends on rows).
  PropensitySpec subset(std::span<const std::size_t> rows) const;
};

const char* to_string(PropensitySpec::Kind k);

struct EstimatorSpec {
  Method method = Method::ipsw;
  PropensitySpec propensity;
  SmoothingSpec smoothing;
  bool stratified_censoring = false;
};

/// Fitted working models for one sample.
struct Nuisance {
  std::vector<double> propensity;  // clamped
  Eigen::MatrixXd ps_design;       // design of the propensity fit; empty when known
  std::optional<LogisticFit> ps_fit;
  std::optional<CoxFit> cox;       // fitted only for the augmented method
  CensoringModel censor;
};

Nuisance fit_nuisance(const SurvivalSample& sample, const EstimatorSpec& spec);

/// Precomputes everything regime-independent so that evaluating the value at
/// a candidate eta costs O(n + K) (inverse weighting) or O(n K_t) (augmented).
/// Holds copies of the data; safe to share across threads.
class SingleStageEvaluator {
 public:
  SingleStageEvaluator(const SurvivalSample& sample, const Nuisance& nuisance,
                       const EstimatorSpec& spec, double t);

  std::size_t dim() const { return static_cast<std::size_t>(covariates_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(covariates_.rows()); }
  double horizon() const { return t_; }
  Method method() const { return spec_.method; }
  const SmoothingSpec& smoothing() const { return spec_.smoothing; }
  const EventGrid& grid() const { return grid_; }
  const Nuisance& nuisance() const { return nuisance_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<int>& treatment() const { return treatment_; }
  const std::vector<double>& time() const { return time_; }
  const std::vector<int>& event() const { return event_; }
  const AugmentationTerms* augmentation() const { return aug_ ? &*aug_ : nullptr; }

  /// Subjects with observed time >= t.
  std::size_t risk_set_at_horizon() const { return risk_at_t_; }

  Assignment assignment(const Eigen::VectorXd& eta) const;

  /// S(t; eta). Throws degenerate_weights if no subject carries weight.
  double value(const Eigen::VectorXd& eta) const;

  /// value() with -infinity in place of a degenerate-weights error.
  double objective(const Eigen::VectorXd& eta) const;

  /// Whole value curve for eta.
  StepCurve curve(const Eigen::VectorXd& eta) const;

 private:
  void increments(const Assignment& a, std::size_t kmax, std::vector<double>& w,
                  std::vector<double>& num, std::vector<double>& den) const;

  EstimatorSpec spec_;
  Nuisance nuisance_;
  double t_;
  Eigen::MatrixXd covariates_;
  std::vector<int> treatment_;
  std::vector<double> time_;
  std::vector<int> event_;
  EventGrid grid_;
  std::size_t k_t_;
  std::size_t risk_at_t_;
  double support_end_;
  std::optional<AugmentationTerms> aug_;
};

/// Two decision points with inverse weighting. Propensities for both stages
/// are supplied (known in randomized designs) or fitted with fit_two_stage_propensity.
class TwoStageEvaluator {
 public:
  TwoStageEvaluator(const TwoStageSample& sample, std::vector<double> ps0, std::vector<double> ps1,
                    const StepCurve& censor, const SmoothingSpec& smoothing, StageOneFeatures layout,
                    double t, const TwoStageOptions& options = {});

  std::size_t stage0_dim() const { return p0_ + 1; }
  std::size_t stage1_dim() const { return TwoStageRegime::stage1_dim(layout_, p0_, p1_) + 1; }
  StageOneFeatures layout() const { return layout_; }
  double horizon() const { return t_; }
  std::size_t risk_set_at_horizon() const { return risk_at_t_; }
  const SmoothingSpec& smoothing() const { return smoothing_; }

  TwoStageRegime regime(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const;

  std::vector<double> weights(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const;
  double value(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const;
  double objective(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const;
  StepCurve curve(const Eigen::VectorXd& eta0, const Eigen::VectorXd& eta1) const;

 private:
  StageOneFeatures layout_;
  SmoothingSpec smoothing_;
  double t_;
  std::size_t p0_, p1_;
  Eigen::MatrixXd x0_;                // n x p0
  std::vector<std::size_t> alive_;    // rows alive and uncensored at s
  Eigen::MatrixXd x1_alive_;          // |alive| x p1
  std::vector<double> term_death_;    // I(T<=s) delta / (S_C(T-) pi_A0)
  std::vector<double> term_alive_;    // 1 / (S_C(s) pi_A0 pi_A1), alive rows
  std::vector<int> a0_;
  std::vector<int> a1_alive_;
  std::vector<double> time_;
  std::vector<int> event_;
  EventGrid grid_;
  std::size_t k_t_;
  std::size_t risk_at_t_;
};

/// Stage-wise propensity fits: A0 on X0 over everyone, A1 on (X0, A0, X1)
/// over subjects alive at s. Returns ps1 = NaN for the others.
struct TwoStagePropensity {
  std::vector<double> ps0;
  std::vector<double> ps1;
};
TwoStagePropensity fit_two_stage_propensity(const TwoStageSample& sample, PropensitySpec::Kind kind);

}  // namespace survregime
