#pragma once

#include "survregime/nonparam.hpp"
#include "survregime/survival_data.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace survregime {

// ---------------------------------------------------------------------------
// Logistic regression (propensity score working model)
// ---------------------------------------------------------------------------

struct LogisticFit {
  Eigen::VectorXd theta;       // intercept first
  Eigen::MatrixXd covariance;  // inverse observed information
  bool converged = false;
  int iterations = 0;
};

struct NewtonOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
  int max_halvings = 20;
  double separation_bound = 30.0;
};

/// Newton-Raphson MLE. `design` must already contain the intercept column.
LogisticFit fit_logistic(const Eigen::MatrixXd& design, std::span<const int> response,
                         const NewtonOptions& options = {});

double logistic_loglik(const Eigen::MatrixXd& design, std::span<const int> response,
                       const Eigen::VectorXd& theta);
Eigen::VectorXd logistic_score(const Eigen::MatrixXd& design, std::span<const int> response,
                               const Eigen::VectorXd& theta);

/// Per-subject influence functions n * I^{-1} x_i (y_i - pi_i), one row per subject.
Eigen::MatrixXd logistic_influence(const LogisticFit& fit, const Eigen::MatrixXd& design,
                                   std::span<const int> response);

/// Inverse logit of theta' x~ where x~ = (1, x').
double predict_propensity(const LogisticFit& fit, std::span<const double> covariates);
double inverse_logit(double eta);

/// (1, X) design for the given covariate matrix.
Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x);

// ---------------------------------------------------------------------------
// Cox proportional hazards with design nu = (X', A, A X')'
// ---------------------------------------------------------------------------

struct CoxFit {
  Eigen::VectorXd beta;        // length 2p + 1
  StepCurve breslow_baseline;  // cumulative baseline hazard
  Eigen::MatrixXd information; // observed information at beta
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
};

/// nu(a, x) = (x', a, a x')'.
Eigen::VectorXd cox_design_row(double a, std::span<const double> x);
Eigen::MatrixXd cox_design(const SurvivalSample& sample);

/// Log partial likelihood with Breslow ties.
double cox_partial_loglik(const Eigen::MatrixXd& design, std::span<const double> time,
                          std::span<const int> event, const Eigen::VectorXd& beta);
Eigen::VectorXd cox_score(const Eigen::MatrixXd& design, std::span<const double> time,
                          std::span<const int> event, const Eigen::VectorXd& beta);

/// Breslow estimator of the cumulative baseline hazard at the given beta.
StepCurve breslow_baseline(const Eigen::MatrixXd& design, std::span<const double> time,
                           std::span<const int> event, const Eigen::VectorXd& beta);

/// Fits on an arbitrary design matrix (rows aligned with time/event).
CoxFit fit_cox(const Eigen::MatrixXd& design, std::span<const double> time,
               std::span<const int> event, const NewtonOptions& options = {});

/// Fits the working model on nu = (X', A, A X')'.
CoxFit fit_cox(const SurvivalSample& sample, const NewtonOptions& options = {});

/// exp{-Lambda0(s) exp(beta' nu(a, x))}.
double predict_survival(const CoxFit& fit, double s, int a, std::span<const double> covariates);

/// exp(beta' nu(a, x)): the multiplier turning dLambda0 into dLambda_T(.|a, x).
double relative_hazard(const CoxFit& fit, int a, std::span<const double> covariates);

/// Influence functions of beta (n x d, rows phi_2i) and of the Breslow
/// increments at the distinct event times of the sample (n x K, rows phi_3i).
struct CoxInfluence {
  Eigen::MatrixXd beta;
  Eigen::MatrixXd baseline_increments;
  std::vector<double> event_times;
};
CoxInfluence cox_influence(const CoxFit& fit, const Eigen::MatrixXd& design,
                           std::span<const double> time, std::span<const int> event);

}  // namespace survregime
