#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "metabbo/autoencoder.hpp"
#include "metabbo/io.hpp"
#include "metabbo/problems.hpp"
#include "metabbo/rng.hpp"
#include "metabbo/sampling.hpp"
#include "metabbo/surrogate.hpp"

namespace metabbo {

struct GlisConfig {
  int m_init = 0;
  int m_max = 0;
  double delta = 1.0;  // exploration weight, applied on the standardized scale
  std::optional<KernelSpec> kernel;  // fixed kernel; unset -> cross-validated
  KernelFamily kernel_family = KernelFamily::inverse_quadratic;
  std::vector<double> mu_grid = default_mu_grid();
  std::vector<double> gamma_grid = default_gamma_grid();
  int cv_folds = 5;
  int refit_kernel_every = 10;  // new samples between kernel re-selections
  int acq_population = 20;
  int acq_generations = 50;
  RngStream seed{0, 0};

  void validate() const {
    if (m_init < 1 || m_init > m_max)
      throw std::invalid_argument("GlisConfig: require 1 <= m_init <= m_max");
    if (!(delta >= 0.0)) throw std::invalid_argument("GlisConfig: delta must be >= 0");
    if (refit_kernel_every < 1)
      throw std::invalid_argument("GlisConfig: refit_kernel_every must be >= 1");
    if (kernel) kernel->validate();
  }
};

struct IterationRecord {
  Eigen::VectorXd z;  // search-space point (equals x when no decoder is active)
  Eigen::VectorXd x;  // evaluated input
  double f = 0.0;
  double best_f = 0.0;
  double fit_seconds = 0.0;
  double acq_seconds = 0.0;
};

struct RunResult {
  Eigen::VectorXd best_x;
  double best_f = std::numeric_limits<double>::infinity();
  std::optional<Eigen::VectorXd> best_z;
  std::vector<IterationRecord> trace;
};

namespace detail {

inline double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::string point_to_string(const Eigen::VectorXd& x) {
  std::ostringstream out;
  out << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) out << (i ? ", " : "") << x[i];
  out << ")";
  return out.str();
}

}  // namespace detail

/// Surrogate-based minimization loop. Draws m_init space-filling points,
/// then alternates surrogate fit (on range-standardized values), acquisition
/// construction and acquisition minimization until exactly m_max evaluations
/// have been spent. With a decoder the search runs over the latent box
/// [0, 1]^{n_z} and every candidate is decoded before evaluation; without one
/// the search domain is the problem domain itself.
inline RunResult run_glis(const std::function<double(const Eigen::VectorXd&)>& objective,
                          const BoxDomain& search_domain, const Embedding* decoder,
                          const GlisConfig& cfg) {
  cfg.validate();
  const int n = search_domain.dim();
  if (decoder) {
    if (n != decoder->n_z)
      throw std::invalid_argument("run_glis: search domain must match the latent dimension");
    if ((search_domain.lower.array() != 0.0).any() ||
        (search_domain.upper.array() != 1.0).any())
      throw std::invalid_argument("run_glis: latent search domain must be the unit box");
  }

  const auto to_input = [&](const Eigen::VectorXd& z) {
    return decoder ? decode(*decoder, z) : z;
  };
  const auto check_finite = [&](double f, const Eigen::VectorXd& x) {
    if (!std::isfinite(f))
      throw std::runtime_error("run_glis: objective returned a non-finite value at " +
                               detail::point_to_string(x));
  };

  Eigen::MatrixXd samples(cfg.m_max, n);
  Eigen::VectorXd values(cfg.m_max);
  RunResult result;
  result.trace.reserve(static_cast<std::size_t>(cfg.m_max));

  const auto append = [&](const Eigen::VectorXd& z, double t_fit, double t_acq) {
    const int idx = static_cast<int>(result.trace.size());
    const Eigen::VectorXd x = to_input(z);
    const double f = objective(x);
    check_finite(f, x);
    samples.row(idx) = z.transpose();
    values[idx] = f;
    if (f < result.best_f) {
      result.best_f = f;
      result.best_x = x;
      if (decoder) result.best_z = z;
    }
    result.trace.push_back(IterationRecord{z, x, f, result.best_f, t_fit, t_acq});
  };

  RngStream lhs_rng = cfg.seed.derive(1);
  const Eigen::MatrixXd init =
      scale_to_box(latin_hypercube(cfg.m_init, n, lhs_rng), search_domain);
  for (int i = 0; i < cfg.m_init; ++i) append(init.row(i).transpose(), 0.0, 0.0);

  KernelSpec current_kernel{cfg.kernel_family, 1.0, 1e-6};
  int last_selection_at = -1;
  int iteration = 0;
  while (static_cast<int>(result.trace.size()) < cfg.m_max) {
    const int m = static_cast<int>(result.trace.size());
    const auto points = samples.topRows(m);
    const auto raw = values.head(m);

    const auto t_fit_start = std::chrono::steady_clock::now();
    const double lo = raw.minCoeff();
    const double hi = raw.maxCoeff();
    const double span = hi - lo;
    const Eigen::VectorXd standardized =
        span > 0.0 ? Eigen::VectorXd(((raw.array() - lo) / span).matrix())
                   : Eigen::VectorXd(Eigen::VectorXd::Zero(m));

    if (cfg.kernel) {
      current_kernel = *cfg.kernel;
    } else if (last_selection_at < 0 || m - last_selection_at >= cfg.refit_kernel_every) {
      const int folds = std::min(cfg.cv_folds, m);
      if (folds >= 2) {
        current_kernel =
            cross_validate_kernel(points, standardized, cfg.mu_grid, cfg.gamma_grid, folds,
                                  cfg.seed.derive(4).derive(static_cast<std::uint64_t>(m)),
                                  cfg.kernel_family);
      } else {
        // Too few points to hold any out; take the middle of the grids.
        current_kernel = KernelSpec{cfg.kernel_family, cfg.mu_grid[cfg.mu_grid.size() / 2],
                                    cfg.gamma_grid[cfg.gamma_grid.size() / 2]};
      }
      last_selection_at = m;
    }
    const RbfSurrogate surrogate = fit_surrogate(points, standardized, current_kernel);
    const double t_fit = detail::elapsed_seconds(t_fit_start);

    const auto t_acq_start = std::chrono::steady_clock::now();
    Eigen::VectorXd proposal = minimize_acquisition(
        surrogate, points, cfg.delta, search_domain,
        cfg.seed.derive(2).derive(static_cast<std::uint64_t>(iteration)), cfg.acq_population,
        cfg.acq_generations);
    const double t_acq = detail::elapsed_seconds(t_acq_start);

    // Distinct centers are required by the surrogate fit: nudge duplicates.
    RngStream perturb_rng = cfg.seed.derive(3).derive(static_cast<std::uint64_t>(iteration));
    const auto is_duplicate = [&](const Eigen::VectorXd& z) {
      for (int i = 0; i < m; ++i)
        if (((samples.row(i).transpose() - z).cwiseAbs().array() <= 1e-9).all()) return true;
      return false;
    };
    for (int attempt = 0; attempt < 64 && is_duplicate(proposal); ++attempt) {
      Eigen::VectorXd nudged = proposal;
      for (int d = 0; d < n; ++d) nudged[d] += perturb_rng.uniform(-1e-3, 1e-3);
      proposal = clip_to_domain(nudged, search_domain);
    }

    append(proposal, t_fit, t_acq);
    ++iteration;
  }
  return result;
}

/// Cumulative minimum of the evaluated objective values.
inline std::vector<double> best_so_far_curve(const RunResult& result) {
  if (result.trace.empty()) throw std::invalid_argument("best_so_far_curve: empty trace");
  std::vector<double> curve;
  curve.reserve(result.trace.size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& record : result.trace) {
    best = std::min(best, record.f);
    curve.push_back(best);
  }
  return curve;
}

/// Trace CSV: iter, z..., x..., f, best_f, t_fit_s, t_acq_s. Timing columns
/// are zeroed unless requested, keeping default output byte-reproducible.
inline void write_trace_csv(const RunResult& result, const std::string& path,
                            bool include_timings = false) {
  if (result.trace.empty()) throw std::invalid_argument("write_trace_csv: empty trace");
  std::ostringstream out;
  const Eigen::Index nz = result.trace.front().z.size();
  const Eigen::Index nx = result.trace.front().x.size();
  out << "iter";
  for (Eigen::Index i = 0; i < nz; ++i) out << ",z" << i;
  for (Eigen::Index i = 0; i < nx; ++i) out << ",x" << i;
  out << ",f,best_f,t_fit_s,t_acq_s\n";
  for (std::size_t row = 0; row < result.trace.size(); ++row) {
    const auto& record = result.trace[row];
    out << row;
    for (Eigen::Index i = 0; i < nz; ++i) out << "," << format_double(record.z[i]);
    for (Eigen::Index i = 0; i < nx; ++i) out << "," << format_double(record.x[i]);
    out << "," << format_double(record.f) << "," << format_double(record.best_f);
    out << "," << format_double(include_timings ? record.fit_seconds : 0.0);
    out << "," << format_double(include_timings ? record.acq_seconds : 0.0) << "\n";
  }
  write_file(path, out.str());
}

}  // namespace metabbo
