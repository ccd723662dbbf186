#include "survregime/optimizer.hpp"

#include "survregime/errors.hpp"
#include "survregime/parallel.hpp"
#include "survregime/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace survregime {

void SearchConfig::validate() const {
  if (population_size < 10) throw Error(ErrorCode::validation, "population size must be at least 10");
  if (restarts < 1) throw Error(ErrorCode::validation, "restarts must be at least 1");
  if (!(crossover >= 0.0 && crossover <= 1.0)) throw Error(ErrorCode::validation, "crossover must lie in [0, 1]");
  if (!(mutation > 0.0)) throw Error(ErrorCode::validation, "mutation factor must be positive");
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

SpherePoint split(const Eigen::VectorXd& v, const std::vector<std::size_t>& dims) {
  SpherePoint out;
  Eigen::Index off = 0;
  for (auto d : dims) {
    out.push_back(v.segment(off, static_cast<Eigen::Index>(d)));
    off += static_cast<Eigen::Index>(d);
  }
  return out;
}

Eigen::VectorXd join(const SpherePoint& p, std::size_t total) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(total));
  Eigen::Index off = 0;
  for (const auto& b : p) {
    v.segment(off, b.size()) = b;
    off += b.size();
  }
  return v;
}

// Normalizes each block; a collapsed block falls back to `fallback`.
void project(Eigen::VectorXd& v, const Eigen::VectorXd& fallback, const std::vector<std::size_t>& dims) {
  Eigen::Index off = 0;
  for (auto d : dims) {
    auto seg = v.segment(off, static_cast<Eigen::Index>(d));
    const double norm = seg.norm();
    if (!(norm > 1e-12) || !std::isfinite(norm)) {
      seg = fallback.segment(off, static_cast<Eigen::Index>(d));
    } else {
      seg /= norm;
    }
    off += static_cast<Eigen::Index>(d);
  }
}

Eigen::VectorXd random_point(Rng& rng, const std::vector<std::size_t>& dims, std::size_t total) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(total));
  Eigen::Index off = 0;
  for (auto d : dims) {
    double norm = 0.0;
    do {
      for (std::size_t j = 0; j < d; ++j) v(off + static_cast<Eigen::Index>(j)) = rng.normal();
      norm = v.segment(off, static_cast<Eigen::Index>(d)).norm();
    } while (!(norm > 1e-12));
    v.segment(off, static_cast<Eigen::Index>(d)) /= norm;
    off += static_cast<Eigen::Index>(d);
  }
  return v;
}

}  // namespace

SphereSearchResult maximize_on_spheres(const std::function<double(const SpherePoint&)>& objective,
                                       const std::vector<std::size_t>& block_dims,
                                       const std::vector<SpherePoint>& initial,
                                       const SearchConfig& config) {
  config.validate();
  const std::size_t total = std::accumulate(block_dims.begin(), block_dims.end(), std::size_t{0});
  if (total == 0) throw Error(ErrorCode::validation, "search space is empty");
  const std::size_t np = config.population_size;

  SphereSearchResult result;
  double best_value = kNegInf;
  Eigen::VectorXd best_point;

  auto evaluate_all = [&](const std::vector<Eigen::VectorXd>& pts, std::vector<double>& out) {
    out.assign(pts.size(), kNegInf);
    parallel_for(pts.size(), config.threads, [&](std::size_t i) {
      const double v = objective(split(pts[i], block_dims));
      out[i] = std::isnan(v) ? kNegInf : v;
    });
    result.diagnostics.evaluations += pts.size();
  };

  for (std::size_t restart = 0; restart < config.restarts; ++restart) {
    Rng rng(derive_seed(config.seed, restart));
    std::vector<Eigen::VectorXd> pop;
    pop.reserve(np);
    for (const auto& p : initial) {
      if (pop.size() >= np) break;
      Eigen::VectorXd v = join(p, total);
      project(v, random_point(rng, block_dims, total), block_dims);
      pop.push_back(v);
    }
    while (pop.size() < np) pop.push_back(random_point(rng, block_dims, total));

    std::vector<double> fit;
    evaluate_all(pop, fit);
    auto best_index = [&] {
      std::size_t b = 0;
      for (std::size_t i = 1; i < np; ++i) {
        if (fit[i] > fit[b]) b = i;
      }
      return b;
    };
    double restart_best = fit[best_index()];
    std::size_t last_improvement = 0;

    std::vector<Eigen::VectorXd> trials(np);
    std::vector<double> trial_fit;
    for (std::size_t gen = 1; gen <= config.generations; ++gen) {
      for (std::size_t i = 0; i < np; ++i) {
        std::size_t r1, r2, r3;
        do { r1 = rng.index(np); } while (r1 == i);
        do { r2 = rng.index(np); } while (r2 == i || r2 == r1);
        do { r3 = rng.index(np); } while (r3 == i || r3 == r1 || r3 == r2);
        const std::size_t jrand = rng.index(total);
        Eigen::VectorXd trial = pop[i];
        for (std::size_t j = 0; j < total; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          if (j == jrand || rng.uniform01() < config.crossover) {
            trial(jj) = pop[r1](jj) + config.mutation * (pop[r2](jj) - pop[r3](jj));
          }
        }
        project(trial, pop[i], block_dims);
        trials[i] = std::move(trial);
      }
      evaluate_all(trials, trial_fit);
      for (std::size_t i = 0; i < np; ++i) {
        if (trial_fit[i] >= fit[i]) {
          pop[i] = trials[i];
          fit[i] = trial_fit[i];
        }
      }
      const std::size_t b = best_index();
      result.diagnostics.trace.push_back({restart, gen, fit[b], pop[b]});
      if (fit[b] > restart_best + config.tolerance || (std::isinf(restart_best) && std::isfinite(fit[b]))) {
        last_improvement = gen;
      }
      restart_best = std::max(restart_best, fit[b]);
      if (config.stall_generations > 0 && gen - last_improvement >= config.stall_generations) break;
    }
    const std::size_t b = best_index();
    result.diagnostics.restart_best.push_back(fit[b]);
    if (fit[b] > best_value || best_point.size() == 0) {
      best_value = fit[b];
      best_point = pop[b];
    }
  }
  if (!std::isfinite(best_value)) {
    std::ostringstream msg;
    msg << "every candidate regime was degenerate after " << result.diagnostics.evaluations << " evaluations";
    throw Error(ErrorCode::search_failure, msg.str());
  }
  result.best = split(best_point, block_dims);
  result.value = objective(result.best);
  return result;
}

std::vector<Eigen::VectorXd> simple_directions(std::size_t p) {
  std::vector<Eigen::VectorXd> out;
  const auto d = static_cast<Eigen::Index>(p + 1);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (double sign : {1.0, -1.0}) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
      v(j) = sign;
      out.push_back(v);
    }
  }
  return out;
}

namespace {

void warn_small_risk_set(std::size_t risk, SearchDiagnostics& diag) {
  if (risk < 10) {
    std::ostringstream msg;
    msg << "only " << risk << " subjects at risk at the target time";
    diag.warnings.push_back(msg.str());
  }
}

}  // namespace

RegimeSearch maximize_value(const SingleStageEvaluator& evaluator, const SearchConfig& config) {
  const std::vector<std::size_t> dims{evaluator.dim() + 1};
  std::vector<SpherePoint> initial;
  for (auto& v : simple_directions(evaluator.dim())) initial.push_back({v});
  auto objective = [&](const SpherePoint& p) { return evaluator.objective(p[0]); };
  auto found = maximize_on_spheres(objective, dims, initial, config);
  warn_small_risk_set(evaluator.risk_set_at_horizon(), found.diagnostics);
  return {LinearRegime(found.best[0]), found.value, std::move(found.diagnostics)};
}

TwoStageSearch maximize_value(const TwoStageEvaluator& evaluator, const SearchConfig& config) {
  const std::vector<std::size_t> dims{evaluator.stage0_dim(), evaluator.stage1_dim()};
  std::vector<SpherePoint> initial;
  const auto d0 = simple_directions(evaluator.stage0_dim() - 1);
  const auto d1 = simple_directions(evaluator.stage1_dim() - 1);
  // simple regimes at both stages first, then axis rules paired with treat-all
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) initial.push_back({d0[a], d1[b]});
  }
  for (std::size_t a = 2; a < d0.size(); ++a) initial.push_back({d0[a], d1[0]});
  for (std::size_t b = 2; b < d1.size(); ++b) initial.push_back({d0[0], d1[b]});
  auto objective = [&](const SpherePoint& p) { return evaluator.objective(p[0], p[1]); };
  auto found = maximize_on_spheres(objective, dims, initial, config);
  warn_small_risk_set(evaluator.risk_set_at_horizon(), found.diagnostics);
  return {evaluator.regime(found.best[0], found.best[1]), found.value, std::move(found.diagnostics)};
}

}  // namespace survregime
