#include "survregime/nonparam.hpp"

#include "survregime/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace survregime {

namespace {

void check_inputs(std::span<const double> time, std::span<const int> event,
                  std::span<const double> weights) {
  if (time.size() != event.size() || time.size() != weights.size()) {
    throw Error(ErrorCode::validation, "time/event/weight lengths differ");
  }
  bool positive = false;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw Error(ErrorCode::validation, "weights must be finite and non-negative");
    }
    if (!(time[i] >= 0.0)) {
      throw Error(ErrorCode::validation, "times must be non-negative");
    }
    if (event[i] != 0 && event[i] != 1) {
      throw Error(ErrorCode::validation, "event must be 0 or 1");
    }
    positive = positive || weights[i] > 0.0;
  }
  if (!positive) {
    throw Error(ErrorCode::degenerate_weights, "all weights are zero");
  }
}

}  // namespace

double StepCurve::eval(double t, Side side) const {
  // first jump strictly greater than t (right) or >= t (left)
  auto it = side == Side::right ? std::upper_bound(jump_times.begin(), jump_times.end(), t)
                                : std::lower_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return initial_value;
  return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

EventGrid::EventGrid(std::span<const double> time, std::span<const int> event)
    : last_at_risk_(time.size(), -1), event_(event.begin(), event.end()), time_(time.begin(), time.end()) {
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (event[i] == 1) times_.push_back(time[i]);
  }
  std::sort(times_.begin(), times_.end());
  times_.erase(std::unique(times_.begin(), times_.end()), times_.end());
  for (std::size_t i = 0; i < time.size(); ++i) {
    // number of grid times <= time_i, minus one
    auto it = std::upper_bound(times_.begin(), times_.end(), time[i]);
    last_at_risk_[i] = static_cast<int>(it - times_.begin()) - 1;
  }
}

std::size_t EventGrid::count_until(double horizon) const {
  return static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), horizon) -
                                  times_.begin());
}

void EventGrid::weighted_counts(std::span<const double> weights, std::vector<double>& dn,
                                std::vector<double>& y) const {
  const auto k = times_.size();
  dn.assign(k, 0.0);
  y.assign(k, 0.0);
  for (std::size_t i = 0; i < last_at_risk_.size(); ++i) {
    const int b = last_at_risk_[i];
    if (b < 0) continue;
    y[static_cast<std::size_t>(b)] += weights[i];
    if (event_[i] != 0) dn[static_cast<std::size_t>(b)] += weights[i];
  }
  // Suffix sums: at risk at s_k iff last_at_risk >= k.
  for (std::size_t m = k; m-- > 1;) y[m - 1] += y[m];
}

double EventGrid::support_end(std::span<const double> weights) const {
  double end = 0.0;
  for (std::size_t i = 0; i < time_.size(); ++i) {
    if (weights[i] > 0.0) end = std::max(end, time_[i]);
  }
  return end;
}

StepCurve product_limit(std::span<const double> grid, std::span<const double> dn,
                        std::span<const double> y, double support_end) {
  StepCurve curve;
  curve.initial_value = 1.0;
  curve.support_end = support_end;
  double s = 1.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(y[k] > 0.0) || dn[k] == 0.0) continue;
    double factor = 1.0 - dn[k] / y[k];
    if (factor < 0.0) {
      factor = 0.0;
      curve.clamped = true;
    } else if (factor > 1.0) {
      factor = 1.0;
      curve.clamped = true;
    }
    s *= factor;
    curve.jump_times.push_back(grid[k]);
    curve.values.push_back(s);
  }
  return curve;
}

StepCurve weighted_km(std::span<const double> time, std::span<const int> event,
                      std::span<const double> weights) {
  check_inputs(time, event, weights);
  EventGrid grid(time, event);
  std::vector<double> dn, y;
  grid.weighted_counts(weights, dn, y);
  return product_limit(grid.times(), dn, y, grid.support_end(weights));
}

StepCurve weighted_nelson_aalen(std::span<const double> time, std::span<const int> event,
                                std::span<const double> weights) {
  check_inputs(time, event, weights);
  EventGrid grid(time, event);
  std::vector<double> dn, y;
  grid.weighted_counts(weights, dn, y);
  StepCurve curve;
  curve.initial_value = 0.0;
  curve.support_end = grid.support_end(weights);
  double cum = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(y[k] > 0.0) || dn[k] == 0.0) continue;
    cum += dn[k] / y[k];
    curve.jump_times.push_back(grid.times()[k]);
    curve.values.push_back(cum);
  }
  return curve;
}

StepCurve censoring_km(std::span<const double> time, std::span<const int> event,
                       std::span<const int> mask) {
  if (time.size() != event.size() || time.size() != mask.size()) {
    throw Error(ErrorCode::validation, "time/event lengths differ");
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (event[i] != 0 && event[i] != 1) throw Error(ErrorCode::validation, "event must be 0 or 1");
    if (mask[i] != 0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });

  StepCurve curve;
  curve.initial_value = 1.0;
  curve.support_end = order.empty() ? 0.0 : time[order.back()];
  double s = 1.0;
  std::size_t at_risk = order.size();
  std::size_t g = 0;
  while (g < order.size()) {
    const double t = time[order[g]];
    std::size_t deaths = 0;
    std::size_t censored = 0;
    std::size_t e = g;
    while (e < order.size() && time[order[e]] == t) {
      if (event[order[e]] == 1) ++deaths; else ++censored;
      ++e;
    }
    // deaths at t leave before the censorings at t are counted
    const std::size_t risk = at_risk - deaths;
    if (censored > 0 && risk > 0) {
      s *= 1.0 - static_cast<double>(censored) / static_cast<double>(risk);
      curve.jump_times.push_back(t);
      curve.values.push_back(s);
    }
    at_risk -= deaths + censored;
    g = e;
  }
  return curve;
}

StepCurve censoring_km(std::span<const double> time, std::span<const int> event) {
  std::vector<int> all(time.size(), 1);
  return censoring_km(time, event, all);
}

}  // namespace survregime
