#include <catch2/catch_amalgamated.hpp>

#include <metabbo/sampling.hpp>

using namespace metabbo;

TEST_CASE("rng streams are reproducible and stream-distinct", "[sampling]") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  RngStream c(42, 8);
  RngStream d(42, 7);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += (c.next_u64() == d.next_u64());
  REQUIRE(equal == 0);
}

TEST_CASE("derived streams are deterministic and independent of parent state", "[sampling]") {
  RngStream parent(5, 1);
  RngStream child1 = parent.derive(3);
  parent.next_u64();  // advancing the parent must not affect derivation
  RngStream child2 = RngStream(5, 1).derive(3);
  for (int i = 0; i < 32; ++i) REQUIRE(child1.next_u64() == child2.next_u64());
  RngStream other = RngStream(5, 1).derive(4);
  REQUIRE(other.next_u64() != RngStream(5, 1).derive(3).next_u64());
}

TEST_CASE("uniform draws stay in range", "[sampling]") {
  RngStream rng(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    const auto k = rng.uniform_index(7);
    REQUIRE(k < 7);
  }
}

TEST_CASE("latin hypercube stratifies each column", "[sampling]") {
  RngStream rng(11, 0);
  const Eigen::MatrixXd u = latin_hypercube(4, 2, rng);
  for (int j = 0; j < 2; ++j) {
    std::vector<bool> hit(4, false);
    for (int i = 0; i < 4; ++i) {
      const int stratum = std::min(3, static_cast<int>(u(i, j) * 4));
      REQUIRE_FALSE(hit[stratum]);
      hit[stratum] = true;
    }
  }
}

TEST_CASE("latin hypercube stratification holds across sizes", "[sampling]") {
  for (const int m : {1, 2, 3, 7, 16, 61, 128}) {
    for (const int n : {1, 2, 5}) {
      RngStream rng(static_cast<std::uint64_t>(m * 131 + n), 2);
      const Eigen::MatrixXd u = latin_hypercube(m, n, rng);
      REQUIRE(u.minCoeff() >= 0.0);
      REQUIRE(u.maxCoeff() <= 1.0);
      for (int j = 0; j < n; ++j) {
        std::vector<bool> hit(static_cast<std::size_t>(m), false);
        for (int i = 0; i < m; ++i) {
          const int stratum =
              std::min(m - 1, static_cast<int>(u(i, j) * m));
          REQUIRE_FALSE(hit[static_cast<std::size_t>(stratum)]);
          hit[static_cast<std::size_t>(stratum)] = true;
        }
      }
    }
  }
}

TEST_CASE("latin hypercube degenerate and error cases", "[sampling]") {
  RngStream rng(3, 0);
  const Eigen::MatrixXd single = latin_hypercube(1, 3, rng);
  REQUIRE(single.rows() == 1);
  REQUIRE(single.cols() == 3);
  REQUIRE(single.minCoeff() >= 0.0);
  REQUIRE(single.maxCoeff() <= 1.0);

  REQUIRE_THROWS_AS(latin_hypercube(0, 3, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(latin_hypercube(3, 0, rng), std::invalid_argument);
}

TEST_CASE("latin hypercube is deterministic in the stream", "[sampling]") {
  RngStream a(9, 4);
  RngStream b(9, 4);
  REQUIRE(latin_hypercube(8, 3, a) == latin_hypercube(8, 3, b));
}

TEST_CASE("scale_to_box maps corners and midpoint", "[sampling]") {
  const BoxDomain box = BoxDomain::cube(2, -2.5, 2.5);
  REQUIRE(scale_to_box(Eigen::MatrixXd::Zero(3, 2), box).isApprox(
      Eigen::MatrixXd::Constant(3, 2, -2.5)));
  REQUIRE(scale_to_box(Eigen::MatrixXd::Ones(3, 2), box).isApprox(
      Eigen::MatrixXd::Constant(3, 2, 2.5)));
  REQUIRE(scale_to_box(Eigen::MatrixXd::Constant(1, 2, 0.5), box).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE_THROWS_AS(scale_to_box(Eigen::MatrixXd::Zero(1, 3), box), std::invalid_argument);
}

TEST_CASE("scale_to_box inverts to the unit cube", "[sampling]") {
  RngStream rng(17, 0);
  const BoxDomain box(Eigen::Vector3d(-1.0, 0.5, 10.0), Eigen::Vector3d(2.0, 0.75, 1000.0));
  const Eigen::MatrixXd u = latin_hypercube(20, 3, rng);
  const Eigen::MatrixXd x = scale_to_box(u, box);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const Eigen::ArrayXd back =
        (x.col(j).array() - box.lower[j]) / (box.upper[j] - box.lower[j]);
    REQUIRE((back - u.col(j).array()).abs().maxCoeff() < 1e-14);
  }
}
