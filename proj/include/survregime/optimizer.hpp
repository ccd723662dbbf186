#pragma once

#include "survregime/estimator.hpp"
#include "survregime/regime.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace survregime {

struct SearchConfig {
  std::size_t population_size = 50;
  std::size_t generations = 200;
  std::size_t restarts = 3;
  double crossover = 0.9;
  double mutation = 0.8;
  std::uint64_t seed = 20240101;
  /// Improvements of the best value below this do not reset the stall counter.
  double tolerance = 1e-10;
  /// Stop a restart after this many generations without improvement; 0 disables.
  std::size_t stall_generations = 40;
  unsigned threads = 1;

  void validate() const;
};

struct TracePoint {
  std::size_t restart = 0;
  std::size_t generation = 0;
  double value = 0.0;
  Eigen::VectorXd point;  // concatenated blocks
};

struct SearchDiagnostics {
  std::size_t evaluations = 0;
  std::vector<TracePoint> trace;  // best member after each generation
  std::vector<double> restart_best;
  std::vector<std::string> warnings;
};

/// A point on a product of unit spheres.
using SpherePoint = std::vector<Eigen::VectorXd>;

struct SphereSearchResult {
  SpherePoint best;
  double value = 0.0;
  SearchDiagnostics diagnostics;
};

/// Differential evolution (rand/1/bin) with every candidate block projected
/// onto its unit sphere before evaluation. `initial` points are injected
/// into each restart's first population. Trial vectors are drawn serially
/// from the restart's stream and evaluated in parallel into fixed slots, so
/// the result does not depend on the thread count. An objective of -inf
/// marks a degenerate candidate.
SphereSearchResult maximize_on_spheres(const std::function<double(const SpherePoint&)>& objective,
                                       const std::vector<std::size_t>& block_dims,
                                       const std::vector<SpherePoint>& initial,
                                       const SearchConfig& config);

struct RegimeSearch {
  LinearRegime regime;
  double value;
  SearchDiagnostics diagnostics;
};

/// Treat-all, treat-none and the +/- single-covariate axis rules are injected.
RegimeSearch maximize_value(const SingleStageEvaluator& evaluator, const SearchConfig& config);

struct TwoStageSearch {
  TwoStageRegime regime;
  double value;
  SearchDiagnostics diagnostics;
};

/// Joint search over (eta0, eta1).
TwoStageSearch maximize_value(const TwoStageEvaluator& evaluator, const SearchConfig& config);

/// Simple and axis-aligned rules in dimension p + 1.
std::vector<Eigen::VectorXd> simple_directions(std::size_t p);

}  // namespace survregime
