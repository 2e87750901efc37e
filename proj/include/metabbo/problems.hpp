#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "metabbo/rng.hpp"

namespace metabbo {

/// Axis-aligned box constraint set.
struct BoxDomain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  BoxDomain(Eigen::VectorXd lo, Eigen::VectorXd hi)
      : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw std::invalid_argument("BoxDomain: bounds must be nonempty and of equal length");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]))
        throw std::invalid_argument("BoxDomain: lower bound must be strictly below upper bound");
  }

  static BoxDomain cube(int n, double lo, double hi) {
    return BoxDomain(Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi));
  }

  /// [0, 1]^n, the canonical latent search box.
  static BoxDomain unit(int n) { return cube(n, 0.0, 1.0); }

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd width() const { return upper - lower; }

  bool contains(const Eigen::VectorXd& x) const {
    return x.size() == lower.size() && (x.array() >= lower.array()).all() &&
           (x.array() <= upper.array()).all();
  }
};

/// Componentwise projection onto the box. Idempotent.
inline Eigen::VectorXd clip_to_domain(const Eigen::VectorXd& x, const BoxDomain& domain) {
  if (x.size() != domain.lower.size())
    throw std::invalid_argument("clip_to_domain: dimension mismatch");
  return x.cwiseMax(domain.lower).cwiseMin(domain.upper);
}

using Objective = std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& theta)>;
using ParamSampler = std::function<Eigen::VectorXd(RngStream&)>;

/// A family of box-constrained objectives f(x; theta) indexed by a parameter
/// vector theta with a known sampling distribution.
///
/// Evaluators must be deterministic in (x, theta) and safe to call from
/// multiple workers; all randomness flows through caller-owned RngStream
/// state.
struct ProblemClass {
  std::string name;
  int dim_x = 0;
  BoxDomain domain;
  Objective objective;
  ParamSampler param_sampler;
  int param_dim = 0;
};

/// Parameters of the generalized Rosenbrock family: curvature weight theta1,
/// offset weight theta2, and per-coordinate targets theta3 (length n_x - 1).
struct RosenbrockParams {
  double theta1 = 100.0;
  double theta2 = 1.0;
  Eigen::VectorXd theta3;

  static RosenbrockParams nominal(int n_x) {
    RosenbrockParams p;
    p.theta3 = Eigen::VectorXd::Ones(n_x - 1);
    return p;
  }

  /// Layout: [theta1, theta2, theta3...], total length n_x + 1.
  static RosenbrockParams from_vector(const Eigen::VectorXd& theta) {
    if (theta.size() < 3)
      throw std::invalid_argument("RosenbrockParams: parameter vector too short");
    RosenbrockParams p;
    p.theta1 = theta[0];
    p.theta2 = theta[1];
    p.theta3 = theta.tail(theta.size() - 2);
    return p;
  }

  Eigen::VectorXd to_vector() const {
    Eigen::VectorXd theta(theta3.size() + 2);
    theta[0] = theta1;
    theta[1] = theta2;
    theta.tail(theta3.size()) = theta3;
    return theta;
  }
};

inline double rosenbrock_eval(const Eigen::VectorXd& x, const RosenbrockParams& p) {
  if (x.size() < 2)
    throw std::invalid_argument("rosenbrock_eval: need at least two coordinates");
  if (p.theta3.size() != x.size() - 1)
    throw std::invalid_argument("rosenbrock_eval: theta3 length must equal len(x) - 1");
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double valley = x[i + 1] - x[i] * x[i];
    const double offset = p.theta3[i] - x[i];
    total += p.theta1 * valley * valley + p.theta2 * offset * offset;
  }
  return total;
}

/// Rosenbrock problem class on [-h, h]^{n_x} with theta1 ~ U[10, 1000],
/// theta2 ~ U[0.1, 10] and theta3 componentwise U[0.1, 10].
inline ProblemClass rosenbrock_class(int n_x, double domain_halfwidth) {
  if (n_x < 2) throw std::invalid_argument("rosenbrock_class: n_x must be >= 2");
  if (!(domain_halfwidth > 0.0))
    throw std::invalid_argument("rosenbrock_class: domain_halfwidth must be positive");
  ProblemClass problem{
      "rosenbrock",
      n_x,
      BoxDomain::cube(n_x, -domain_halfwidth, domain_halfwidth),
      [](const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
        return rosenbrock_eval(x, RosenbrockParams::from_vector(theta));
      },
      [n_x](RngStream& rng) {
        Eigen::VectorXd theta(n_x + 1);
        theta[0] = rng.uniform(10.0, 1000.0);
        theta[1] = rng.uniform(0.1, 10.0);
        for (int i = 2; i <= n_x; ++i) theta[i] = rng.uniform(0.1, 10.0);
        return theta;
      },
      n_x + 1};
  return problem;
}

using ProblemFactory = std::function<ProblemClass(int n_x, double domain_halfwidth)>;

inline std::map<std::string, ProblemFactory>& problem_registry() {
  static std::map<std::string, ProblemFactory> registry{
      {"rosenbrock", [](int n_x, double h) { return rosenbrock_class(n_x, h); }}};
  return registry;
}

/// Registers an externally supplied problem family under a lookup name.
inline void register_problem(const std::string& name, ProblemFactory factory) {
  problem_registry()[name] = std::move(factory);
}

inline ProblemClass make_problem(const std::string& name, int n_x, double domain_halfwidth) {
  const auto& registry = problem_registry();
  auto it = registry.find(name);
  if (it == registry.end())
    throw std::invalid_argument("unknown problem '" + name + "'");
  return it->second(n_x, domain_halfwidth);
}

}  // namespace metabbo
