#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "metabbo/io.hpp"
#include "metabbo/parallel.hpp"
#include "metabbo/problems.hpp"
#include "metabbo/rng.hpp"
#include "metabbo/solvers.hpp"

namespace metabbo {

inline constexpr const char* kDatasetFormat = "meta-bbo-ds-v1";

/// One parameter draw with its K best distinct candidates, rows sorted
/// ascending by objective value.
struct MetaInstance {
  Eigen::VectorXd theta;
  Eigen::MatrixXd points;  // K x n_x
  Eigen::VectorXd values;  // K
};

struct DatasetProvenance {
  std::string problem;
  std::string solver;
  long budget_evaluations = 0;
  long budget_generations = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

struct MetaDataset {
  int n_x = 0;
  int n_theta = 0;
  int K = 0;
  int N = 0;
  BoxDomain domain{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  DatasetProvenance provenance;
  std::vector<MetaInstance> instances;
};

/// Default dedup tolerance, measured in domain-normalized coordinates.
inline constexpr double kDedupTolerance = 1e-9;

/// Draws N parameters, solves each instance with the given solver, and keeps
/// the K best distinct candidates per instance. Instance i derives its own
/// random streams from rng, so instances can be solved on parallel workers
/// while the assembled dataset stays deterministic.
inline MetaDataset build_meta_dataset(const ProblemClass& problem, const SolverSpec& solver,
                                      int N, int K, RngStream rng) {
  if (N < 1 || K < 1) throw std::invalid_argument("build_meta_dataset: N and K must be >= 1");
  solver.budget.validate();

  MetaDataset dataset;
  dataset.n_x = problem.dim_x;
  dataset.n_theta = problem.param_dim;
  dataset.K = K;
  dataset.N = N;
  dataset.domain = problem.domain;
  dataset.provenance = DatasetProvenance{problem.name,
                                         solver.method,
                                         solver.budget.max_evaluations,
                                         solver.budget.max_generations,
                                         rng.seed(),
                                         rng.stream_id()};
  dataset.instances.resize(static_cast<std::size_t>(N));

  const Eigen::VectorXd scale = problem.domain.width();
  parallel_for(N, [&](int i) {
    const RngStream instance_rng = rng.derive(static_cast<std::uint64_t>(i));
    RngStream theta_rng = instance_rng.derive(0);
    const Eigen::VectorXd theta = problem.param_sampler(theta_rng);
    const auto objective = [&](const Eigen::VectorXd& x) { return problem.objective(x, theta); };
    const SolveTrace trace = solver.solve(objective, problem.domain, instance_rng.derive(1));
    std::vector<std::pair<Eigen::VectorXd, double>> best;
    try {
      best = top_k_distinct(trace, K, kDedupTolerance, scale);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("build_meta_dataset: instance " + std::to_string(i) + ": " +
                               e.what());
    }
    MetaInstance& instance = dataset.instances[static_cast<std::size_t>(i)];
    instance.theta = theta;
    instance.points.resize(K, problem.dim_x);
    instance.values.resize(K);
    for (int k = 0; k < K; ++k) {
      instance.points.row(k) = best[static_cast<std::size_t>(k)].first;
      instance.values[k] = best[static_cast<std::size_t>(k)].second;
    }
  });
  return dataset;
}

inline json dataset_to_json(const MetaDataset& d) {
  json instances = json::array();
  for (const auto& instance : d.instances) {
    json points = json::array();
    for (Eigen::Index k = 0; k < instance.points.rows(); ++k)
      points.push_back(json{{"x", vector_to_json(instance.points.row(k).transpose())},
                            {"f", instance.values[k]}});
    instances.push_back(json{{"theta", vector_to_json(instance.theta)},
                             {"points", std::move(points)}});
  }
  return json{{"format", kDatasetFormat},
              {"problem", d.provenance.problem},
              {"n_x", d.n_x},
              {"n_theta", d.n_theta},
              {"K", d.K},
              {"N", d.N},
              {"domain", json{{"lower", vector_to_json(d.domain.lower)},
                              {"upper", vector_to_json(d.domain.upper)}}},
              {"provenance", json{{"problem", d.provenance.problem},
                                  {"solver", d.provenance.solver},
                                  {"budget_evaluations", d.provenance.budget_evaluations},
                                  {"budget_generations", d.provenance.budget_generations},
                                  {"seed", d.provenance.seed},
                                  {"stream", d.provenance.stream}}},
              {"instances", std::move(instances)}};
}

inline MetaDataset dataset_from_json(const json& j, const std::string& path) {
  require_format(j, kDatasetFormat, path);
  MetaDataset d;
  try {
    d.n_x = j.at("n_x").get<int>();
    d.n_theta = j.at("n_theta").get<int>();
    d.K = j.at("K").get<int>();
    d.N = j.at("N").get<int>();
    d.domain = BoxDomain(vector_from_json(j.at("domain").at("lower")),
                         vector_from_json(j.at("domain").at("upper")));
    const json& prov = j.at("provenance");
    d.provenance.problem = prov.at("problem").get<std::string>();
    d.provenance.solver = prov.at("solver").get<std::string>();
    d.provenance.budget_evaluations = prov.at("budget_evaluations").get<long>();
    d.provenance.budget_generations = prov.at("budget_generations").get<long>();
    d.provenance.seed = prov.at("seed").get<std::uint64_t>();
    d.provenance.stream = prov.at("stream").get<std::uint64_t>();
    for (const json& ji : j.at("instances")) {
      MetaInstance instance;
      instance.theta = vector_from_json(ji.at("theta"));
      const json& points = ji.at("points");
      instance.points.resize(static_cast<Eigen::Index>(points.size()), d.n_x);
      instance.values.resize(static_cast<Eigen::Index>(points.size()));
      Eigen::Index k = 0;
      for (const json& jp : points) {
        instance.points.row(k) = vector_from_json(jp.at("x")).transpose();
        instance.values[k] = jp.at("f").get<double>();
        ++k;
      }
      d.instances.push_back(std::move(instance));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path + "': malformed dataset: " + e.what());
  }
  if (static_cast<int>(d.instances.size()) != d.N)
    throw std::runtime_error("'" + path + "': instance count does not match N");
  for (const auto& instance : d.instances)
    if (instance.points.rows() != d.K || instance.points.cols() != d.n_x)
      throw std::runtime_error("'" + path + "': instance shape does not match (K, n_x)");
  return d;
}

inline void save_meta_dataset(const MetaDataset& d, const std::string& path,
                              bool gzip = false) {
  write_file(path, dataset_to_json(d).dump(2) + "\n", gzip);
}

inline MetaDataset load_meta_dataset(const std::string& path) {
  return dataset_from_json(load_json_file(path), path);
}

/// Instance-level train/test split; the test side receives
/// floor(N * test_fraction) instances. Relative instance order is preserved
/// on both sides.
inline std::pair<MetaDataset, MetaDataset> split_meta_dataset(const MetaDataset& d,
                                                              double test_fraction,
                                                              RngStream rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split_meta_dataset: test_fraction must lie in (0, 1)");
  const int n_test = static_cast<int>(static_cast<double>(d.N) * test_fraction);
  if (n_test < 1 || n_test >= d.N)
    throw std::invalid_argument("split_meta_dataset: split would leave an empty side");

  std::vector<int> order(static_cast<std::size_t>(d.N));
  std::iota(order.begin(), order.end(), 0);
  for (int i = d.N - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
  std::vector<bool> in_test(static_cast<std::size_t>(d.N), false);
  for (int i = 0; i < n_test; ++i) in_test[static_cast<std::size_t>(order[i])] = true;

  MetaDataset train = d;
  MetaDataset test = d;
  train.instances.clear();
  test.instances.clear();
  for (int i = 0; i < d.N; ++i)
    (in_test[static_cast<std::size_t>(i)] ? test : train)
        .instances.push_back(d.instances[static_cast<std::size_t>(i)]);
  train.N = static_cast<int>(train.instances.size());
  test.N = static_cast<int>(test.instances.size());
  return {std::move(train), std::move(test)};
}

}  // namespace metabbo
