#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "metabbo/problems.hpp"
#include "metabbo/rng.hpp"

namespace metabbo {

struct EvalBudget {
  long max_evaluations = 100000;
  long max_generations = 1000;

  void validate() const {
    if (max_evaluations < 1 || max_generations < 1)
      throw std::invalid_argument("EvalBudget: limits must be >= 1");
  }
};

/// Every candidate evaluation in order, plus the running incumbent.
class SolveTrace {
 public:
  void record(Eigen::VectorXd x, double f) {
    if (best_so_far_.empty() || f < best_so_far_.back()) {
      best_so_far_.push_back(f);
      best_index_ = points_.size();
    } else {
      best_so_far_.push_back(best_so_far_.back());
    }
    points_.push_back(std::move(x));
    values_.push_back(f);
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Eigen::VectorXd& point(std::size_t i) const { return points_.at(i); }
  double value(std::size_t i) const { return values_.at(i); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& best_so_far() const { return best_so_far_; }

  double best_value() const {
    if (empty()) throw std::logic_error("SolveTrace: empty trace has no best value");
    return best_so_far_.back();
  }
  const Eigen::VectorXd& best_point() const {
    if (empty()) throw std::logic_error("SolveTrace: empty trace has no best point");
    return points_[best_index_];
  }

 private:
  std::vector<Eigen::VectorXd> points_;
  std::vector<double> values_;
  std::vector<double> best_so_far_;
  std::size_t best_index_ = 0;
};

/// Differential evolution, rand/1/bin: mutant v = x_a + F (x_b - x_c) over
/// distinct random donors, binomial crossover with one forced component,
/// greedy one-to-one selection. All candidates are clipped to the domain and
/// every evaluation lands in the trace.
inline SolveTrace differential_evolution(
    const std::function<double(const Eigen::VectorXd&)>& objective, const BoxDomain& domain,
    int pop_size, double F, double CR, const EvalBudget& budget, RngStream rng) {
  if (pop_size < 4)
    throw std::invalid_argument(
        "differential_evolution: pop_size must be >= 4 (three donors plus target)");
  if (!(F > 0.0 && F <= 2.0))
    throw std::invalid_argument("differential_evolution: F must lie in (0, 2]");
  if (!(CR >= 0.0 && CR <= 1.0))
    throw std::invalid_argument("differential_evolution: CR must lie in [0, 1]");
  budget.validate();

  const int n = domain.dim();
  SolveTrace trace;
  std::vector<Eigen::VectorXd> pop;
  std::vector<double> fitness;
  pop.reserve(static_cast<std::size_t>(pop_size));

  long evals = 0;
  for (int i = 0; i < pop_size && evals < budget.max_evaluations; ++i) {
    Eigen::VectorXd x(n);
    for (int d = 0; d < n; ++d) x[d] = rng.uniform(domain.lower[d], domain.upper[d]);
    const double f = objective(x);
    ++evals;
    trace.record(x, f);
    pop.push_back(std::move(x));
    fitness.push_back(f);
  }
  if (static_cast<int>(pop.size()) < pop_size) return trace;  // budget consumed by init

  const auto npop = static_cast<std::uint64_t>(pop_size);
  for (long gen = 0; gen < budget.max_generations && evals < budget.max_evaluations; ++gen) {
    for (int i = 0; i < pop_size && evals < budget.max_evaluations; ++i) {
      std::uint64_t a, b, c;
      do a = rng.uniform_index(npop); while (static_cast<int>(a) == i);
      do b = rng.uniform_index(npop); while (static_cast<int>(b) == i || b == a);
      do c = rng.uniform_index(npop); while (static_cast<int>(c) == i || c == a || c == b);
      const int forced = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      Eigen::VectorXd trial = pop[static_cast<std::size_t>(i)];
      for (int d = 0; d < n; ++d) {
        const bool cross = rng.uniform() < CR;
        if (d == forced || cross) trial[d] = pop[a][d] + F * (pop[b][d] - pop[c][d]);
      }
      trial = clip_to_domain(trial, domain);
      const double f = objective(trial);
      ++evals;
      trace.record(trial, f);
      if (f <= fitness[static_cast<std::size_t>(i)]) {
        pop[static_cast<std::size_t>(i)] = std::move(trial);
        fitness[static_cast<std::size_t>(i)] = f;
      }
    }
  }
  return trace;
}

/// Global-best particle swarm with per-axis velocity clamping at 20% of the
/// domain width and position clipping to the box.
inline SolveTrace particle_swarm(const std::function<double(const Eigen::VectorXd&)>& objective,
                                 const BoxDomain& domain, int swarm_size, double inertia,
                                 double c1, double c2, const EvalBudget& budget, RngStream rng) {
  if (swarm_size < 2) throw std::invalid_argument("particle_swarm: swarm_size must be >= 2");
  if (!(inertia >= 0.0 && inertia <= 1.2))
    throw std::invalid_argument("particle_swarm: inertia must lie in [0, 1.2]");
  if (c1 < 0.0 || c2 < 0.0)
    throw std::invalid_argument("particle_swarm: c1 and c2 must be nonnegative");
  budget.validate();

  const int n = domain.dim();
  const Eigen::VectorXd vmax = 0.2 * domain.width();
  SolveTrace trace;

  std::vector<Eigen::VectorXd> position(static_cast<std::size_t>(swarm_size));
  std::vector<Eigen::VectorXd> velocity(static_cast<std::size_t>(swarm_size),
                                        Eigen::VectorXd::Zero(n));
  std::vector<Eigen::VectorXd> best_position(static_cast<std::size_t>(swarm_size));
  std::vector<double> best_value(static_cast<std::size_t>(swarm_size));
  Eigen::VectorXd global_best;
  double global_best_value = 0.0;
  bool have_global = false;

  long evals = 0;
  for (int i = 0; i < swarm_size && evals < budget.max_evaluations; ++i) {
    auto& x = position[static_cast<std::size_t>(i)];
    x.resize(n);
    for (int d = 0; d < n; ++d) x[d] = rng.uniform(domain.lower[d], domain.upper[d]);
    const double f = objective(x);
    ++evals;
    trace.record(x, f);
    best_position[static_cast<std::size_t>(i)] = x;
    best_value[static_cast<std::size_t>(i)] = f;
    if (!have_global || f < global_best_value) {
      global_best = x;
      global_best_value = f;
      have_global = true;
    }
  }
  if (!have_global) return trace;

  for (long gen = 0; gen < budget.max_generations && evals < budget.max_evaluations; ++gen) {
    for (int i = 0; i < swarm_size && evals < budget.max_evaluations; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      auto& v = velocity[idx];
      auto& x = position[idx];
      for (int d = 0; d < n; ++d) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        v[d] = inertia * v[d] + c1 * r1 * (best_position[idx][d] - x[d]) +
               c2 * r2 * (global_best[d] - x[d]);
        v[d] = std::clamp(v[d], -vmax[d], vmax[d]);
        x[d] += v[d];
      }
      x = clip_to_domain(x, domain);
      const double f = objective(x);
      ++evals;
      trace.record(x, f);
      if (f < best_value[idx]) {
        best_value[idx] = f;
        best_position[idx] = x;
      }
      if (f < global_best_value) {
        global_best_value = f;
        global_best = x;
      }
    }
  }
  return trace;
}

/// The K lowest-valued candidates of a trace after deduplication. Two points
/// are considered equal when their componentwise distance, divided by the
/// optional per-axis scale, stays within tol in every coordinate. Output is
/// sorted ascending by objective value.
inline std::vector<std::pair<Eigen::VectorXd, double>> top_k_distinct(
    const SolveTrace& trace, int K, double tol, const Eigen::VectorXd& scale = {}) {
  if (K < 1) throw std::invalid_argument("top_k_distinct: K must be >= 1");
  if (!(tol >= 0.0)) throw std::invalid_argument("top_k_distinct: tol must be >= 0");

  std::vector<std::size_t> order(trace.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&trace](std::size_t a, std::size_t b) {
    return trace.value(a) < trace.value(b);
  });

  auto same_point = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index d = 0; d < a.size(); ++d) {
      const double s = scale.size() > 0 ? scale[d] : 1.0;
      if (std::abs(a[d] - b[d]) > tol * s) return false;
    }
    return true;
  };

  std::vector<std::pair<Eigen::VectorXd, double>> selected;
  selected.reserve(static_cast<std::size_t>(K));
  for (const std::size_t idx : order) {
    const Eigen::VectorXd& candidate = trace.point(idx);
    bool duplicate = false;
    for (const auto& [kept, value] : selected) {
      if (same_point(candidate, kept)) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      selected.emplace_back(candidate, trace.value(idx));
      if (static_cast<int>(selected.size()) == K) break;
    }
  }
  if (static_cast<int>(selected.size()) < K)
    throw std::runtime_error("top_k_distinct: only " + std::to_string(selected.size()) +
                             " distinct points available, " + std::to_string(K) + " requested");
  return selected;
}

/// Named solver configuration used for meta-dataset generation and the
/// full-space baselines.
struct SolverSpec {
  std::string method = "de";  // "de" | "pso"
  int population = 0;         // 0 = default for the method and dimension
  double de_weight = 0.8;
  double de_crossover = 0.9;
  double pso_inertia = 0.72;
  double pso_c1 = 1.49;
  double pso_c2 = 1.49;
  EvalBudget budget;

  int effective_population(int dim) const {
    if (population > 0) return population;
    if (method == "de") return std::min(10 * dim, 100);
    return 30;
  }

  SolveTrace solve(const std::function<double(const Eigen::VectorXd&)>& objective,
                   const BoxDomain& domain, RngStream rng) const {
    if (method == "de")
      return differential_evolution(objective, domain, effective_population(domain.dim()),
                                    de_weight, de_crossover, budget, rng);
    if (method == "pso")
      return particle_swarm(objective, domain, effective_population(domain.dim()), pso_inertia,
                            pso_c1, pso_c2, budget, rng);
    throw std::invalid_argument("SolverSpec: unknown method '" + method + "'");
  }
};

}  // namespace metabbo
