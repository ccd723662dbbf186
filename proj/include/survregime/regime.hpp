#pragma once

#include "survregime/nonparam.hpp"
#include "survregime/regression.hpp"
#include "survregime/survival_data.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace survregime {

// ---------------------------------------------------------------------------
// Regimes and assignment
// ---------------------------------------------------------------------------

/// g(x) = I{eta' (1, x')' >= 0} with ||eta|| = 1, intercept coefficient first.
class LinearRegime {
 public:
  /// Normalizes eta; rejects empty, zero or non-finite vectors.
  explicit LinearRegime(Eigen::VectorXd eta);

  static LinearRegime treat_all(std::size_t p);
  static LinearRegime treat_none(std::size_t p);

  const Eigen::VectorXd& eta() const { return eta_; }
  /// Number of covariates (eta has one more entry).
  std::size_t dim() const { return static_cast<std::size_t>(eta_.size()) - 1; }

  double linear_predictor(std::span<const double> x) const;
  /// eta' x~ for every row of x.
  Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& x) const;

 private:
  Eigen::VectorXd eta_;
};

struct SmoothingSpec {
  bool enabled = false;
  double c0 = std::cbrt(4.0);
  /// Fixed bandwidth; empty selects h = c0 n^{-1/3} sd(eta' x~) per regime.
  std::optional<double> bandwidth;
};

/// h = c0 n^{-1/3} sd(lp) with the sample sd (n - 1 divisor).
/// Throws degenerate_direction when sd(lp) is zero.
double select_bandwidth(std::span<const double> linear_predictor, double c0);
double select_bandwidth(const Eigen::MatrixXd& covariates, const LinearRegime& regime, double c0);

double normal_cdf(double z);

/// Hard: I{eta' x~ >= 0}. Smooth: Phi(eta' x~ / h) with h taken from the
/// spec, which must then hold a fixed bandwidth.
double assign(const LinearRegime& regime, std::span<const double> x, const SmoothingSpec& smoothing);

/// Per-subject assignments (hard indicators or Phi-smoothed probabilities).
struct Assignment {
  std::vector<double> g;
  bool smoothed = false;
  double bandwidth = 0.0;  // 0 in hard mode
};

/// Resolves an automatic bandwidth over the rows given. A degenerate
/// direction (constant linear predictor, e.g. treat-all) falls back to the
/// hard rule, which the smooth rule equals in the limit anyway.
Assignment assign_all(std::span<const double> linear_predictor, const SmoothingSpec& smoothing);
Assignment assign_all(const LinearRegime& regime, const Eigen::MatrixXd& covariates,
                      const SmoothingSpec& smoothing);

/// Propensities are clamped into [0.01, 0.99] before weighting.
constexpr double kPropensityFloor = 0.01;
double clamp_propensity(double p);

// ---------------------------------------------------------------------------
// Single-stage value curves
// ---------------------------------------------------------------------------

/// w_i = [A_i g_i + (1 - A_i)(1 - g_i)] / [pi_i A_i + (1 - pi_i)(1 - A_i)].
std::vector<double> ipsw_weights(std::span<const int> treatment, std::span<const double> g,
                                 std::span<const double> propensity);
std::vector<double> ipsw_weights(const SurvivalSample& sample, const LinearRegime& regime,
                                 std::span<const double> propensity, const SmoothingSpec& smoothing);

/// Inverse-propensity weighted Kaplan-Meier curve for the regime.
StepCurve value_curve_ipsw(const SurvivalSample& sample, const LinearRegime& regime,
                           std::span<const double> propensity, const SmoothingSpec& smoothing);

/// Censoring survival, pooled or separately by treatment arm.
struct CensoringModel {
  StepCurve pooled;
  std::optional<std::array<StepCurve, 2>> by_arm;

  CensoringModel() = default;
  CensoringModel(StepCurve curve) : pooled(std::move(curve)) {}  // NOLINT(implicit)

  bool stratified() const { return by_arm.has_value(); }
  const StepCurve& curve(int arm) const { return by_arm ? (*by_arm)[arm != 0 ? 1 : 0] : pooled; }
};

CensoringModel fit_censoring(const SurvivalSample& sample, bool stratified);

/// Augmented estimator. Increments at each distinct event time s_k:
///   num_k = sum_i w_i dN_i + sum_i sum_a c_ai S_T(s_k-|a,x_i) S_C(s_k-) r_ai dLambda0_k
///   den_k = sum_i w_i Y_i  + sum_i sum_a c_ai S_T(s_k-|a,x_i) S_C(s_k-)
/// with c_1i = (1 - w_i) g_i, c_0i = (1 - w_i)(1 - g_i), r_ai = exp(beta' nu(a, x_i)).
StepCurve value_curve_aipsw(const SurvivalSample& sample, const LinearRegime& regime,
                            std::span<const double> propensity, const CoxFit& cox,
                            const CensoringModel& censor, const SmoothingSpec& smoothing);

/// Regime-independent pieces of the augmented increments on an event grid.
/// Index a = 0, 1 is the counterfactual treatment.
struct AugmentationTerms {
  std::array<Eigen::MatrixXd, 2> outcome;    // n x K, S_T(s_k-|a, x_i)
  std::array<Eigen::VectorXd, 2> censor;     // K, S_C(s_k-) (arm-specific when stratified)
  std::array<Eigen::VectorXd, 2> relative;   // n, r_ai
  std::array<Eigen::MatrixXd, 2> at_risk;    // n x K, outcome * censor
  std::array<Eigen::MatrixXd, 2> hazard;     // n x K, at_risk * r_ai
  Eigen::VectorXd baseline_increments;       // K, dLambda0 at the grid times
};

AugmentationTerms augmentation_terms(const Eigen::MatrixXd& covariates, std::span<const double> grid,
                                     const Eigen::VectorXd& beta,
                                     const Eigen::VectorXd& baseline_increments,
                                     const CensoringModel& censor);
AugmentationTerms augmentation_terms(const SurvivalSample& sample, const EventGrid& grid,
                                     const CoxFit& cox, const CensoringModel& censor);

/// Breslow increments of the fit at each grid time (zero where it has no jump).
Eigen::VectorXd baseline_increments_on(const CoxFit& cox, std::span<const double> grid);

/// num/den increments for the first `kmax` grid times. `aug` may be null
/// (plain inverse weighting). c1, c0 are the augmentation coefficients.
void value_increments(const EventGrid& grid, std::span<const double> weights,
                      const AugmentationTerms* aug, const Eigen::VectorXd& c1,
                      const Eigen::VectorXd& c0, std::size_t kmax, std::vector<double>& num,
                      std::vector<double>& den);

/// Product of clamped factors (1 - num/den) over the first kmax positions;
/// positions with den <= 0 are skipped. Sets `clamped` if any factor was clamped.
double product_limit_value(std::span<const double> num, std::span<const double> den,
                           std::size_t kmax, bool* clamped = nullptr);

// ---------------------------------------------------------------------------
// Two decision points
// ---------------------------------------------------------------------------

/// Features seen by the stage-1 rule: (1, X0', g0, X1') or just (1, X1').
enum class StageOneFeatures { full, interim_only };

class TwoStageRegime {
 public:
  TwoStageRegime(LinearRegime stage0, LinearRegime stage1,
                 StageOneFeatures layout = StageOneFeatures::interim_only);

  const LinearRegime& stage0() const { return stage0_; }
  const LinearRegime& stage1() const { return stage1_; }
  StageOneFeatures layout() const { return layout_; }

  /// Stage-1 feature vector (without intercept) given baseline covariates,
  /// the hard stage-0 assignment and interim covariates.
  std::vector<double> stage1_features(std::span<const double> x0, int g0, std::span<const double> x1) const;
  static std::size_t stage1_dim(StageOneFeatures layout, std::size_t p0, std::size_t p1);

 private:
  LinearRegime stage0_;
  LinearRegime stage1_;
  StageOneFeatures layout_;
};

struct TwoStageOptions {
  /// Evaluate S_C at T~- (true) or at T~ as printed in the weight definition.
  bool censor_left_limit = true;
  /// Needed S_C values below this raise a positivity error.
  double positivity_floor = 0.05;
};

/// w_i = I(T~ <= s) delta / S_C(T~-) * m0_i / pi_A0
///     + I(T~ > s) / S_C(s) * m0_i m1_i / (pi_A0 pi_A1),
/// with m0 = A0 g0 + (1 - A0)(1 - g0) and m1 likewise for stage 1.
std::vector<double> two_stage_weights(const TwoStageSample& sample, const TwoStageRegime& regime,
                                      std::span<const double> ps0, std::span<const double> ps1,
                                      const StepCurve& censor, const SmoothingSpec& smoothing,
                                      const TwoStageOptions& options = {});

StepCurve value_curve_two_stage(const TwoStageSample& sample, const TwoStageRegime& regime,
                                std::span<const double> ps0, std::span<const double> ps1,
                                const StepCurve& censor, const SmoothingSpec& smoothing,
                                const TwoStageOptions& options = {});

// ---------------------------------------------------------------------------
// Functionals of a survival curve
// ---------------------------------------------------------------------------

struct Functional {
  enum class Kind { survival_at, restricted_mean, median };
  Kind kind = Kind::survival_at;
  double at = 0.0;  // t for survival_at, L for restricted_mean

  static Functional survival(double t) { return {Kind::survival_at, t}; }
  static Functional rmst(double limit) { return {Kind::restricted_mean, limit}; }
  static Functional median_time() { return {Kind::median, 0.0}; }
};

double survival_at(const StepCurve& curve, double t);
/// Integral of the step curve over [0, L]; L <= 0 is a validation error.
double restricted_mean(const StepCurve& curve, double limit);
/// sup{u : S(u) >= 0.5}; +infinity when the curve never drops below 0.5.
double median_survival(const StepCurve& curve);
double functional(const StepCurve& curve, const Functional& f);

}  // namespace survregime
