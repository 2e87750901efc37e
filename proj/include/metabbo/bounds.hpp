#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "metabbo/io.hpp"
#include "metabbo/parallel.hpp"
#include "metabbo/problems.hpp"
#include "metabbo/rng.hpp"

namespace metabbo {

inline constexpr const char* kGapsFormat = "meta-bbo-gaps-v1";
inline constexpr const char* kCertificateFormat = "meta-bbo-cert-v1";

struct GapConfig {
  double epsilon = 1e-6;  // denominator guard

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("GapConfig: epsilon must be positive");
  }
};

/// Relative performance gap (f_latent - f_full) / (|f_full| + epsilon).
/// Negative values are admissible: the full-space solver need not reach the
/// global optimum.
inline double performance_gap(double f_latent, double f_full, const GapConfig& cfg = {}) {
  cfg.validate();
  if (!std::isfinite(f_latent) || !std::isfinite(f_full))
    throw std::invalid_argument("performance_gap: objective values must be finite");
  return (f_latent - f_full) / (std::abs(f_full) + cfg.epsilon);
}

struct GapProvenance {
  std::uint64_t theta_key = 0;  // derive keys of the three per-sample streams
  std::uint64_t xi_key = 0;
  std::uint64_t omega_key = 0;
  double f_full = 0.0;
  double f_latent = 0.0;
};

struct GapSampleSet {
  std::vector<double> gaps;
  std::vector<GapProvenance> provenance;  // may be empty for synthetic sets
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// DKW-Massart uniform deviation sqrt(ln(2/delta) / (2m)).
inline double epsilon_m(long m, double delta) {
  if (m < 1) throw std::invalid_argument("epsilon_m: m must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("epsilon_m: delta must lie in (0, 1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(m)));
}

/// Smallest m with epsilon_m(m, delta) <= alpha.
inline long min_validation_samples(double alpha, double delta) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("min_validation_samples: levels must lie in (0, 1)");
  return static_cast<long>(std::ceil(std::log(2.0 / delta) / (2.0 * alpha * alpha)));
}

/// Raised when the requested (alpha, delta) cannot be certified from m
/// samples; carries the minimal sufficient sample count.
class InsufficientSamplesError : public std::runtime_error {
 public:
  InsufficientSamplesError(long m, double alpha, double delta, long minimal)
      : std::runtime_error(make_message(m, alpha, delta, minimal)), minimal_m(minimal) {}
  long minimal_m;

 private:
  static std::string make_message(long m, double alpha, double delta, long minimal) {
    std::ostringstream out;
    out << "insufficient validation samples for requested (alpha=" << alpha
        << ", delta=" << delta << "): have m=" << m << ", need m >= " << minimal;
    return out.str();
  }
};

/// k-th smallest value, 1-indexed.
inline double order_statistic(std::vector<double> values, long k) {
  if (values.empty()) throw std::invalid_argument("order_statistic: empty sample");
  if (k < 1 || k > static_cast<long>(values.size()))
    throw std::invalid_argument("order_statistic: k out of range");
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[static_cast<std::size_t>(k - 1)];
}

struct GapCertificate {
  double alpha = 0.0;
  double delta = 0.0;
  long m = 0;
  double epsilon_m = 0.0;
  long k_star = 0;
  double bound = 0.0;  // k_star-th smallest validation gap
};

/// Distribution-free upper bound on the (1-alpha)-quantile of the gap: with
/// probability at least 1-delta over the validation set, a new draw falls
/// below the returned order statistic with probability at least 1-alpha.
inline GapCertificate certify(const std::vector<double>& gaps, double alpha, double delta) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("certify: alpha and delta must lie in (0, 1)");
  const long m = static_cast<long>(gaps.size());
  if (m < 1) throw std::invalid_argument("certify: need at least one gap sample");
  for (const double g : gaps)
    if (!std::isfinite(g)) throw std::invalid_argument("certify: gaps must be finite");

  const double eps = epsilon_m(m, delta);
  if (alpha < eps)
    throw InsufficientSamplesError(m, alpha, delta, min_validation_samples(alpha, delta));
  long k_star =
      static_cast<long>(std::ceil(static_cast<double>(m) * (1.0 - alpha + eps)));
  k_star = std::min(k_star, m);  // alpha >= eps guarantees this mathematically
  return GapCertificate{alpha, delta, m, eps, k_star, order_statistic(gaps, k_star)};
}

inline GapCertificate certify(const GapSampleSet& samples, double alpha, double delta) {
  return certify(samples.gaps, alpha, delta);
}

/// Fraction of samples at or below t.
inline double empirical_cdf(const std::vector<double>& samples, double t) {
  if (samples.empty()) throw std::invalid_argument("empirical_cdf: empty sample");
  std::size_t count = 0;
  for (const double s : samples)
    if (s <= t) ++count;
  return static_cast<double>(count) / static_cast<double>(samples.size());
}

/// Solver adapter for gap collection: given the objective with theta already
/// bound and a private stream, returns the best objective value found.
using InstanceSolver =
    std::function<double(const std::function<double(const Eigen::VectorXd&)>&, RngStream)>;

/// Runs the full-space and latent-space solvers on m i.i.d. problem draws and
/// records the relative performance gaps. Sample i consumes the three
/// independent child streams derive(3i), derive(3i+1), derive(3i+2) for the
/// parameter draw and the two solvers, so samples may be processed by
/// parallel workers.
inline GapSampleSet collect_gaps(const ProblemClass& problem, const InstanceSolver& solver_full,
                                 const InstanceSolver& solver_latent, int m,
                                 const GapConfig& cfg, RngStream rng) {
  if (m < 1) throw std::invalid_argument("collect_gaps: m must be >= 1");
  cfg.validate();
  GapSampleSet set;
  set.epsilon = cfg.epsilon;
  set.seed = rng.seed();
  set.stream = rng.stream_id();
  set.gaps.resize(static_cast<std::size_t>(m));
  set.provenance.resize(static_cast<std::size_t>(m));

  parallel_for(m, [&](int i) {
    const auto theta_key = static_cast<std::uint64_t>(3 * i);
    const auto xi_key = static_cast<std::uint64_t>(3 * i + 1);
    const auto omega_key = static_cast<std::uint64_t>(3 * i + 2);
    RngStream theta_rng = rng.derive(theta_key);
    const Eigen::VectorXd theta = problem.param_sampler(theta_rng);
    const auto objective = [&](const Eigen::VectorXd& x) { return problem.objective(x, theta); };
    const double f_full = solver_full(objective, rng.derive(xi_key));
    const double f_latent = solver_latent(objective, rng.derive(omega_key));
    if (!std::isfinite(f_full) || !std::isfinite(f_latent))
      throw std::runtime_error("collect_gaps: sample " + std::to_string(i) +
                               " produced a non-finite objective value");
    set.gaps[static_cast<std::size_t>(i)] = performance_gap(f_latent, f_full, cfg);
    set.provenance[static_cast<std::size_t>(i)] =
        GapProvenance{theta_key, xi_key, omega_key, f_full, f_latent};
  });
  return set;
}

/// Validates the certificate's coverage claim against a distribution with
/// known CDF: the fraction of trials where the true CDF at the certified
/// bound reaches 1-alpha. The guarantee puts this fraction at >= 1 - delta in
/// expectation over trials.
inline double coverage_monte_carlo(const std::function<double(RngStream&)>& sampler,
                                   const std::function<double(double)>& true_cdf, int m,
                                   double alpha, double delta, int trials, RngStream rng) {
  if (trials < 1) throw std::invalid_argument("coverage_monte_carlo: trials must be >= 1");
  std::vector<char> covered(static_cast<std::size_t>(trials), 0);
  parallel_for(trials, [&](int t) {
    RngStream trial_rng = rng.derive(static_cast<std::uint64_t>(t));
    std::vector<double> gaps(static_cast<std::size_t>(m));
    for (auto& g : gaps) g = sampler(trial_rng);
    const GapCertificate cert = certify(gaps, alpha, delta);
    covered[static_cast<std::size_t>(t)] = true_cdf(cert.bound) >= 1.0 - alpha ? 1 : 0;
  });
  long hits = 0;
  for (const char c : covered) hits += c;
  return static_cast<double>(hits) / static_cast<double>(trials);
}

inline json gap_samples_to_json(const GapSampleSet& set) {
  json gaps = json::array();
  for (const double g : set.gaps) gaps.push_back(g);
  json provenance = json::array();
  for (const auto& p : set.provenance)
    provenance.push_back(json{{"theta_key", p.theta_key},
                              {"xi_key", p.xi_key},
                              {"omega_key", p.omega_key},
                              {"f_full", p.f_full},
                              {"f_latent", p.f_latent}});
  return json{{"format", kGapsFormat},
              {"epsilon", set.epsilon},
              {"seed", set.seed},
              {"stream", set.stream},
              {"gaps", std::move(gaps)},
              {"provenance", std::move(provenance)}};
}

inline GapSampleSet gap_samples_from_json(const json& j, const std::string& path) {
  require_format(j, kGapsFormat, path);
  GapSampleSet set;
  try {
    set.epsilon = j.at("epsilon").get<double>();
    set.seed = j.at("seed").get<std::uint64_t>();
    set.stream = j.at("stream").get<std::uint64_t>();
    for (const auto& g : j.at("gaps")) set.gaps.push_back(g.get<double>());
    if (j.contains("provenance"))
      for (const auto& p : j.at("provenance"))
        set.provenance.push_back(GapProvenance{p.at("theta_key").get<std::uint64_t>(),
                                               p.at("xi_key").get<std::uint64_t>(),
                                               p.at("omega_key").get<std::uint64_t>(),
                                               p.at("f_full").get<double>(),
                                               p.at("f_latent").get<double>()});
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path + "': malformed gap set: " + e.what());
  }
  if (set.gaps.empty()) throw std::runtime_error("'" + path + "': gap set is empty");
  return set;
}

inline json certificate_to_json(const GapCertificate& cert) {
  return json{{"format", kCertificateFormat}, {"alpha", cert.alpha},
              {"delta", cert.delta},         {"m", cert.m},
              {"epsilon_m", cert.epsilon_m}, {"k_star", cert.k_star},
              {"bound", cert.bound}};
}

inline GapCertificate certificate_from_json(const json& j, const std::string& path) {
  require_format(j, kCertificateFormat, path);
  try {
    return GapCertificate{j.at("alpha").get<double>(),     j.at("delta").get<double>(),
                          j.at("m").get<long>(),           j.at("epsilon_m").get<double>(),
                          j.at("k_star").get<long>(),      j.at("bound").get<double>()};
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path + "': malformed certificate: " + e.what());
  }
}

/// Step curve of the empirical CDF as (t, F_hat(t)) rows over the sorted
/// sample values.
inline void write_cdf_csv(const std::vector<double>& gaps, const std::string& path) {
  if (gaps.empty()) throw std::invalid_argument("write_cdf_csv: empty sample");
  std::vector<double> sorted = gaps;
  std::sort(sorted.begin(), sorted.end());
  std::ostringstream out;
  out << "t,cdf\n";
  const auto m = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    // Highest step at each distinct value.
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out << format_double(sorted[i]) << "," << format_double((i + 1) / m) << "\n";
  }
  write_file(path, out.str());
}

}  // namespace metabbo
