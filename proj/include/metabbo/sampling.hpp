#pragma once

#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "metabbo/problems.hpp"
#include "metabbo/rng.hpp"

namespace metabbo {

/// m space-filling points in [0, 1]^n. Each column is partitioned into m
/// equal strata with exactly one jittered sample per stratum.
inline Eigen::MatrixXd latin_hypercube(int m, int n, RngStream& rng) {
  if (m < 1 || n < 1)
    throw std::invalid_argument("latin_hypercube: m and n must be >= 1");
  Eigen::MatrixXd u(m, n);
  std::vector<int> perm(static_cast<std::size_t>(m));
  for (int j = 0; j < n; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = m - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
    for (int i = 0; i < m; ++i)
      u(i, j) = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / m;
  }
  return u;
}

/// Affine map of unit-cube rows onto the box, componentwise
/// u -> lower + u * (upper - lower).
inline Eigen::MatrixXd scale_to_box(const Eigen::MatrixXd& u, const BoxDomain& domain) {
  if (u.cols() != domain.dim())
    throw std::invalid_argument("scale_to_box: dimension mismatch");
  Eigen::MatrixXd out(u.rows(), u.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j)
    out.col(j) = domain.lower[j] + (domain.upper[j] - domain.lower[j]) * u.col(j).array();
  return out;
}

}  // namespace metabbo
