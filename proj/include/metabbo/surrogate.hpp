#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "metabbo/problems.hpp"
#include "metabbo/rng.hpp"
#include "metabbo/solvers.hpp"

namespace metabbo {

enum class KernelFamily { inverse_quadratic, squared_exponential };

inline std::string kernel_family_name(KernelFamily family) {
  return family == KernelFamily::inverse_quadratic ? "inverse_quadratic" : "squared_exponential";
}

inline KernelFamily kernel_family_from_name(const std::string& name) {
  if (name == "inverse_quadratic" || name == "invquad") return KernelFamily::inverse_quadratic;
  if (name == "squared_exponential" || name == "sqexp") return KernelFamily::squared_exponential;
  throw std::invalid_argument("unknown kernel family '" + name + "'");
}

struct KernelSpec {
  KernelFamily family = KernelFamily::inverse_quadratic;
  double mu = 1.0;
  double gamma = 1e-6;

  void validate() const {
    if (!(mu > 0.0)) throw std::invalid_argument("KernelSpec: mu must be positive");
    if (!(gamma >= 0.0)) throw std::invalid_argument("KernelSpec: gamma must be nonnegative");
  }
};

/// Radial basis value at d, where d is the squared Euclidean distance between
/// the query and a center (the kernel argument is mu * d as-is).
inline double kernel_value(const KernelSpec& kernel, double d) {
  const double scaled = kernel.mu * d;
  if (kernel.family == KernelFamily::inverse_quadratic) return 1.0 / (1.0 + scaled * scaled);
  return std::exp(-scaled * scaled);
}

/// Interpolant f_hat(z) = sum_k beta_k phi(mu * |z - z_k|^2).
struct RbfSurrogate {
  Eigen::MatrixXd centers;  // M x n
  Eigen::VectorXd beta;     // M
  KernelSpec kernel;
};

namespace detail {

inline Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& points, const KernelSpec& kernel) {
  const Eigen::Index m = points.rows();
  Eigen::MatrixXd gram(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    gram(j, j) = kernel_value(kernel, 0.0);
    for (Eigen::Index k = j + 1; k < m; ++k) {
      const double d = (points.row(j) - points.row(k)).squaredNorm();
      const double value = kernel_value(kernel, d);
      gram(j, k) = value;
      gram(k, j) = value;
    }
  }
  return gram;
}

}  // namespace detail

/// Ridge fit of the RBF coefficients: minimizes |f - Phi beta|^2 + gamma |beta|^2
/// through the normal equations (Phi^T Phi + gamma I) beta = Phi^T f, solved by
/// an LDLT factorization.
inline RbfSurrogate fit_surrogate(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                                  const KernelSpec& kernel) {
  kernel.validate();
  const Eigen::Index m = points.rows();
  if (m < 1) throw std::invalid_argument("fit_surrogate: need at least one point");
  if (values.size() != m)
    throw std::invalid_argument("fit_surrogate: values length must match point count");
  if (!values.allFinite()) throw std::invalid_argument("fit_surrogate: values must be finite");

  if (kernel.gamma == 0.0) {
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index k = j + 1; k < m; ++k)
        if ((points.row(j) - points.row(k)).squaredNorm() == 0.0)
          throw std::invalid_argument(
              "fit_surrogate: duplicate centers make the unregularized system singular; "
              "use gamma > 0 or deduplicate the points");
  }

  const Eigen::MatrixXd gram = detail::rbf_gram(points, kernel);
  Eigen::MatrixXd normal = gram.transpose() * gram;
  normal.diagonal().array() += kernel.gamma;
  const Eigen::VectorXd rhs = gram.transpose() * values;
  Eigen::LDLT<Eigen::MatrixXd> solver(normal);
  Eigen::VectorXd beta = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !beta.allFinite())
    throw std::runtime_error(
        "fit_surrogate: normal equations could not be solved; "
        "use gamma > 0 or deduplicate the points");
  return RbfSurrogate{points, std::move(beta), kernel};
}

inline double surrogate_eval(const RbfSurrogate& s, const Eigen::VectorXd& z) {
  if (z.size() != s.centers.cols())
    throw std::invalid_argument("surrogate_eval: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index k = 0; k < s.centers.rows(); ++k) {
    const double d = (s.centers.row(k).transpose() - z).squaredNorm();
    total += s.beta[k] * kernel_value(s.kernel, d);
  }
  return total;
}

/// Inverse-distance-weighting exploration term: zero on visited samples,
/// (2/pi) atan(1 / sum_i |z - z_i|^{-2}) elsewhere, always in [0, 1).
inline double idw_exploration(const Eigen::MatrixXd& samples, const Eigen::VectorXd& z) {
  if (samples.rows() < 1) throw std::invalid_argument("idw_exploration: need at least one sample");
  if (z.size() != samples.cols())
    throw std::invalid_argument("idw_exploration: dimension mismatch");
  constexpr double kMatchDistance = 1e-12;  // proximity treated as an exact revisit
  double inverse_sum = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const double d2 = (samples.row(i).transpose() - z).squaredNorm();
    if (d2 <= kMatchDistance * kMatchDistance) return 0.0;
    inverse_sum += 1.0 / d2;
  }
  return (2.0 / std::numbers::pi) * std::atan(1.0 / inverse_sum);
}

/// a(z) = f_hat(z) - delta * h(z).
inline double acquisition(const RbfSurrogate& s, const Eigen::MatrixXd& samples, double delta,
                          const Eigen::VectorXd& z) {
  if (!(delta >= 0.0)) throw std::invalid_argument("acquisition: delta must be >= 0");
  return surrogate_eval(s, z) - delta * idw_exploration(samples, z);
}

/// Approximate global minimizer of the acquisition over the box, computed by
/// differential evolution. The returned point lies inside the box.
inline Eigen::VectorXd minimize_acquisition(const RbfSurrogate& s, const Eigen::MatrixXd& samples,
                                            double delta, const BoxDomain& domain, RngStream rng,
                                            int de_population = 20, int de_generations = 50) {
  if (domain.dim() != s.centers.cols())
    throw std::invalid_argument("minimize_acquisition: domain and surrogate dimensions differ");
  const auto objective = [&](const Eigen::VectorXd& z) {
    return acquisition(s, samples, delta, z);
  };
  EvalBudget budget{static_cast<long>(de_population) * (de_generations + 1), de_generations};
  const SolveTrace trace =
      differential_evolution(objective, domain, de_population, 0.8, 0.9, budget, rng);
  return trace.best_point();
}

inline std::vector<double> default_mu_grid() { return {0.1, 0.5, 1.0, 2.0, 5.0}; }
inline std::vector<double> default_gamma_grid() { return {1e-6, 1e-4, 1e-2, 1.0}; }

/// K-fold cross-validation over a (mu, gamma) grid. Returns the pair with the
/// lowest mean held-out squared error; ties prefer larger gamma, then smaller
/// mu (smoother models).
inline KernelSpec cross_validate_kernel(const Eigen::MatrixXd& points,
                                        const Eigen::VectorXd& values,
                                        const std::vector<double>& mu_grid,
                                        const std::vector<double>& gamma_grid, int folds,
                                        RngStream rng,
                                        KernelFamily family = KernelFamily::inverse_quadratic) {
  const Eigen::Index m = points.rows();
  if (mu_grid.empty() || gamma_grid.empty())
    throw std::invalid_argument("cross_validate_kernel: grids must be nonempty");
  if (folds < 2) throw std::invalid_argument("cross_validate_kernel: folds must be >= 2");
  if (m < folds)
    throw std::invalid_argument("cross_validate_kernel: need at least `folds` points");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (Eigen::Index i = m - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);

  const auto held_out_error = [&](const KernelSpec& kernel) {
    double total = 0.0;
    for (int fold = 0; fold < folds; ++fold) {
      std::vector<Eigen::Index> train, test;
      for (std::size_t p = 0; p < order.size(); ++p)
        (static_cast<int>(p % static_cast<std::size_t>(folds)) == fold ? test : train)
            .push_back(order[p]);
      Eigen::MatrixXd train_points(static_cast<Eigen::Index>(train.size()), points.cols());
      Eigen::VectorXd train_values(static_cast<Eigen::Index>(train.size()));
      for (std::size_t r = 0; r < train.size(); ++r) {
        train_points.row(static_cast<Eigen::Index>(r)) = points.row(train[r]);
        train_values[static_cast<Eigen::Index>(r)] = values[train[r]];
      }
      const RbfSurrogate fitted = fit_surrogate(train_points, train_values, kernel);
      for (const Eigen::Index t : test) {
        const double r = surrogate_eval(fitted, points.row(t).transpose()) - values[t];
        total += r * r;
      }
    }
    return total / static_cast<double>(m);
  };

  KernelSpec best;
  double best_error = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (const double mu : mu_grid) {
    for (const double gamma : gamma_grid) {
      KernelSpec candidate{family, mu, gamma};
      candidate.validate();
      double error;
      try {
        error = held_out_error(candidate);
      } catch (const std::exception&) {
        error = std::numeric_limits<double>::infinity();
      }
      const bool better =
          !have_best || error < best_error ||
          (error == best_error &&
           (candidate.gamma > best.gamma ||
            (candidate.gamma == best.gamma && candidate.mu < best.mu)));
      if (better) {
        best = candidate;
        best_error = error;
        have_best = true;
      }
    }
  }
  return best;
}

}  // namespace metabbo
