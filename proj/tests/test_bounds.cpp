#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <numbers>

#include <metabbo/bounds.hpp>
#include <metabbo/solvers.hpp>

using namespace metabbo;

TEST_CASE("performance gap matches hand evaluations", "[bounds]") {
  REQUIRE(performance_gap(1.0, 1.0) == 0.0);
  REQUIRE_THAT(performance_gap(1.2, 1.0), Catch::Matchers::WithinAbs(0.19999980000019998, 1e-15));
  REQUIRE_THAT(performance_gap(0.8, 1.0), Catch::Matchers::WithinAbs(-0.19999980000019998, 1e-15));

  // Sign antisymmetry of the numerator when |f_full| == |f_latent|.
  RngStream rng(1, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(-5.0, 5.0);
    const double b = rng.uniform(-5.0, 5.0);
    const double forward = performance_gap(a, b);
    const double swapped = performance_gap(b, a);
    if (std::abs(a) == std::abs(b)) REQUIRE(forward == -swapped);
    REQUIRE(std::signbit(forward * swapped) == (forward != 0.0 && swapped != 0.0));
  }

  REQUIRE_THROWS_AS(performance_gap(std::numeric_limits<double>::infinity(), 1.0),
                    std::invalid_argument);
  GapConfig bad;
  bad.epsilon = 0.0;
  REQUIRE_THROWS_AS(performance_gap(1.0, 1.0, bad), std::invalid_argument);
}

TEST_CASE("epsilon_m evaluates the deviation bound", "[bounds]") {
  REQUIRE_THAT(epsilon_m(1000, 0.05), Catch::Matchers::WithinAbs(0.042947, 1e-6));
  double previous = 1.0;
  for (const long m : {10L, 100L, 1000L, 10000L}) {
    const double eps = epsilon_m(m, 0.05);
    REQUIRE(eps < previous);
    previous = eps;
  }
  REQUIRE_THROWS_AS(epsilon_m(1000, 2.0), std::invalid_argument);
  REQUIRE_THROWS_AS(epsilon_m(1000, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(epsilon_m(0, 0.05), std::invalid_argument);
}

TEST_CASE("certify computes the documented order statistic", "[bounds]") {
  RngStream rng(6, 0);
  std::vector<double> gaps(1000);
  for (auto& g : gaps) g = rng.normal();
  const GapCertificate cert = certify(gaps, 0.1, 0.05);
  REQUIRE(cert.k_star == 943);
  REQUIRE(cert.m == 1000);
  REQUIRE(cert.bound == order_statistic(gaps, 943));

  // Forced-k order statistic on the documented example.
  const std::vector<double> four{0.5, -0.2, 0.9, 0.1};
  REQUIRE(order_statistic(four, 3) == 0.5);
  REQUIRE(order_statistic(four, 1) == -0.2);
  REQUIRE_THROWS_AS(order_statistic(four, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(order_statistic(four, 5), std::invalid_argument);
}

TEST_CASE("certify rejects infeasible confidence levels", "[bounds]") {
  const std::vector<double> gaps(100, 0.0);
  REQUIRE_THROWS_AS(certify(gaps, 0.1, 0.1), InsufficientSamplesError);
  try {
    certify(gaps, 0.1, 0.1);
  } catch (const InsufficientSamplesError& e) {
    REQUIRE(e.minimal_m == 150);
  }
  REQUIRE_THROWS_AS(certify(gaps, 1.5, 0.1), std::invalid_argument);
}

TEST_CASE("certify is monotone in alpha", "[bounds]") {
  RngStream rng(7, 0);
  std::vector<double> gaps(2000);
  for (auto& g : gaps) g = rng.normal();
  long previous_k = 0;
  double previous_bound = -std::numeric_limits<double>::infinity();
  for (const double alpha : {0.4, 0.3, 0.2, 0.1}) {
    const GapCertificate cert = certify(gaps, alpha, 0.05);
    REQUIRE(cert.k_star >= previous_k);
    REQUIRE(cert.bound >= previous_bound);
    previous_k = cert.k_star;
    previous_bound = cert.bound;
  }
}

TEST_CASE("empirical cdf counts with a closed lower tail", "[bounds]") {
  const std::vector<double> samples{1.0, 2.0, 3.0, 4.0};
  REQUIRE(empirical_cdf(samples, 2.5) == 0.5);
  REQUIRE(empirical_cdf(samples, 0.5) == 0.0);
  REQUIRE(empirical_cdf(samples, 4.0) == 1.0);
  REQUIRE(empirical_cdf(samples, 2.0) == 0.5);  // <=, not <
  REQUIRE(empirical_cdf(samples, 1.0) == 0.25);

  // Values always land on the 1/m grid.
  RngStream rng(8, 0);
  std::vector<double> random(16);
  for (auto& s : random) s = rng.normal();
  for (int trial = 0; trial < 100; ++trial) {
    const double f = empirical_cdf(random, rng.uniform(-3.0, 3.0));
    REQUIRE(f * 16.0 == std::round(f * 16.0));
  }
  REQUIRE_THROWS_AS(empirical_cdf({}, 0.0), std::invalid_argument);
}

TEST_CASE("coverage fractions are degenerate for a single trial", "[bounds]") {
  const auto sampler = [](RngStream& r) { return r.uniform(); };
  const auto cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  const double f = coverage_monte_carlo(sampler, cdf, 400, 0.2, 0.2, 1, RngStream(9, 0));
  REQUIRE((f == 0.0 || f == 1.0));
}

TEST_CASE("coverage holds on a quick uniform check", "[bounds]") {
  const auto sampler = [](RngStream& r) { return r.uniform(); };
  const auto cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  const double f = coverage_monte_carlo(sampler, cdf, 500, 0.15, 0.1, 60, RngStream(10, 0));
  REQUIRE(f >= 0.9);
}

TEST_CASE("identical solvers produce identically zero gaps", "[bounds]") {
  const ProblemClass problem = rosenbrock_class(2, 2.5);
  const InstanceSolver solver = [&problem](
                                    const std::function<double(const Eigen::VectorXd&)>& obj,
                                    RngStream rng) {
    SolverSpec de;
    de.population = 10;
    de.budget = EvalBudget{100, 5};
    return de.solve(obj, problem.domain, rng).best_value();
  };
  const GapSampleSet set = collect_gaps(problem, solver, solver, 5, GapConfig{}, RngStream(11, 0));
  REQUIRE(set.gaps.size() == 5);
  for (const double g : set.gaps) REQUIRE(g == 0.0);
  REQUIRE(set.provenance[2].theta_key == 6);
  REQUIRE(set.provenance[2].xi_key == 7);
  REQUIRE(set.provenance[2].omega_key == 8);
  REQUIRE(set.provenance[0].f_full == set.provenance[0].f_latent);

  const GapSampleSet again =
      collect_gaps(problem, solver, solver, 5, GapConfig{}, RngStream(11, 0));
  REQUIRE(again.gaps == set.gaps);

  const GapSampleSet single =
      collect_gaps(problem, solver, solver, 1, GapConfig{}, RngStream(12, 0));
  REQUIRE(single.gaps.size() == 1);
}

TEST_CASE("non-finite objective values identify the failing sample", "[bounds]") {
  const ProblemClass problem = rosenbrock_class(2, 2.5);
  const InstanceSolver good = [](const std::function<double(const Eigen::VectorXd&)>&,
                                 RngStream) { return 1.0; };
  const InstanceSolver bad = [](const std::function<double(const Eigen::VectorXd&)>&,
                                RngStream) { return std::numeric_limits<double>::quiet_NaN(); };
  REQUIRE_THROWS_WITH(collect_gaps(problem, good, bad, 3, GapConfig{}, RngStream(13, 0)),
                      Catch::Matchers::ContainsSubstring("sample"));
}

TEST_CASE("gaps from distinct sub-streams show no lag-1 correlation", "[bounds]") {
  const ProblemClass problem = rosenbrock_class(2, 2.5);
  // Cheap randomized solver: best of a handful of uniform draws.
  const InstanceSolver solver = [&problem](
                                    const std::function<double(const Eigen::VectorXd&)>& obj,
                                    RngStream rng) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 8; ++i) {
      Eigen::Vector2d x(rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5));
      best = std::min(best, obj(x));
    }
    return best;
  };
  const int m = 400;
  const GapSampleSet set =
      collect_gaps(problem, solver, solver, m, GapConfig{}, RngStream(14, 0));
  double mean = 0.0;
  for (const double g : set.gaps) mean += g;
  mean /= m;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < m; ++i) {
    const double d = set.gaps[static_cast<std::size_t>(i)] - mean;
    den += d * d;
    if (i + 1 < m) num += d * (set.gaps[static_cast<std::size_t>(i + 1)] - mean);
  }
  const double r1 = num / den;
  REQUIRE(std::abs(r1) < 3.0 / std::sqrt(static_cast<double>(m)));
}

TEST_CASE("gap sets and certificates round-trip through JSON", "[bounds]") {
  GapSampleSet set;
  set.gaps = {0.5, -0.2, 0.9, 0.1};
  set.provenance = {GapProvenance{0, 1, 2, 1.0, 1.5}, GapProvenance{3, 4, 5, 2.0, 1.6},
                    GapProvenance{6, 7, 8, 0.5, 0.95}, GapProvenance{9, 10, 11, 1.1, 1.21}};
  set.seed = 77;
  set.stream = 3;
  const json j = gap_samples_to_json(set);
  const GapSampleSet loaded = gap_samples_from_json(j, "mem");
  REQUIRE(loaded.gaps == set.gaps);
  REQUIRE(loaded.provenance.size() == 4);
  REQUIRE(loaded.provenance[1].f_latent == 1.6);
  REQUIRE(loaded.seed == 77);

  json wrong = j;
  wrong["format"] = "nope";
  REQUIRE_THROWS_AS(gap_samples_from_json(wrong, "mem"), std::runtime_error);

  const GapCertificate cert = certify(set.gaps, 0.5, 0.9);
  const GapCertificate loaded_cert = certificate_from_json(certificate_to_json(cert), "mem");
  REQUIRE(loaded_cert.k_star == cert.k_star);
  REQUIRE(loaded_cert.bound == cert.bound);
  REQUIRE(loaded_cert.epsilon_m == cert.epsilon_m);
}

TEST_CASE("cdf csv export is deterministic", "[bounds]") {
  const std::vector<double> gaps{0.3, -0.1, 0.3, 0.7};
  const std::string path_a = "test_cdf_a.csv";
  const std::string path_b = "test_cdf_b.csv";
  write_cdf_csv(gaps, path_a);
  write_cdf_csv(gaps, path_b);
  const std::string a = read_file(path_a);
  REQUIRE(a == read_file(path_b));
  REQUIRE(a.rfind("t,cdf\n", 0) == 0);
  REQUIRE(a.find("0.3,0.75") != std::string::npos);  // duplicate collapses to top step
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}
