#pragma once

#include <limits>
#include <span>
#include <vector>

namespace survregime {

enum class Side { right, left };

/// Right-continuous step function on [0, inf): `initial_value` on
/// [0, jump_times[0]) and `values[k]` on [jump_times[k], jump_times[k+1]).
struct StepCurve {
  std::vector<double> jump_times;
  std::vector<double> values;
  double initial_value = 1.0;

  /// Largest time at which the (weighted) risk set was still positive. Beyond
  /// it the curve is frozen at its last value.
  double support_end = std::numeric_limits<double>::infinity();

  /// Set when a product-limit factor had to be clamped into [0, 1].
  bool clamped = false;

  double operator()(double t) const { return eval(t, Side::right); }
  double eval(double t, Side side) const;

  bool truncated_before(double t) const { return t > support_end; }
  std::size_t jumps() const { return jump_times.size(); }
};

/// Product-limit estimator with subject weights:
///   S(u) = prod_{s <= u} (1 - sum_i w_i dN_i(s) / sum_i w_i Y_i(s)).
/// Y_i(s) = I{time_i >= s}, so subjects censored at s stay in the risk set of
/// deaths at s.
StepCurve weighted_km(std::span<const double> time, std::span<const int> event,
                      std::span<const double> weights);

/// Weighted Nelson-Aalen cumulative hazard with the same risk-set convention.
StepCurve weighted_nelson_aalen(std::span<const double> time, std::span<const int> event,
                                std::span<const double> weights);

/// Kaplan-Meier of the censoring distribution (1 - event as the indicator).
/// Deaths precede censorings at tied times, so a subject dying at t is not in
/// the censoring risk set at t.
StepCurve censoring_km(std::span<const double> time, std::span<const int> event);

/// Same, restricted to subjects with mask[i] != 0.
StepCurve censoring_km(std::span<const double> time, std::span<const int> event,
                       std::span<const int> mask);

/// Sorted distinct event times of a sample and, per subject, the last grid
/// index at which the subject is still at risk. Weight-independent, so it is
/// built once per sample and reused across many weight vectors.
class EventGrid {
 public:
  EventGrid(std::span<const double> time, std::span<const int> event);

  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }

  /// -1 when the subject leaves the risk set before the first event time.
  int last_at_risk(std::size_t i) const { return last_at_risk_[i]; }
  bool is_event(std::size_t i) const { return event_[i] != 0; }

  /// Grid positions with times <= horizon.
  std::size_t count_until(double horizon) const;

  /// Weighted numerator / denominator sums at each grid time:
  ///   dn[k] = sum_i w_i dN_i(s_k),  y[k] = sum_i w_i Y_i(s_k).
  void weighted_counts(std::span<const double> weights, std::vector<double>& dn,
                       std::vector<double>& y) const;

  /// Largest observed time with positive weight (end of the weighted support).
  double support_end(std::span<const double> weights) const;

 private:
  std::vector<double> times_;
  std::vector<int> last_at_risk_;
  std::vector<int> event_;
  std::vector<double> time_;
};

/// Builds the product-limit curve from per-grid increments; factors are
/// clamped into [0, 1] and positions with y <= 0 are skipped (frozen).
StepCurve product_limit(std::span<const double> grid, std::span<const double> dn,
                        std::span<const double> y, double support_end);

}  // namespace survregime
