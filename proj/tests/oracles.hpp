// Independent reference computations used only by tests. Everything here
// deliberately avoids the library's solution paths: distances enumerate the
// whole symmetry group, paths are enumerated outright, and the polar factor
// comes from an eigendecomposition instead of the SVD.
#pragma once

#include <perdl/matching.hpp>
#include <perdl/types.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <vector>

namespace oracle {

// Minimum over all 2^r * r! signed permutations of the max column gap.
inline double exhaustive_dist_12(const perdl::Dictionary& d1,
                                 const perdl::Dictionary& d2) {
  const int r = d1.num_atoms();
  std::vector<int> perm(static_cast<std::size_t>(r));
  for (int k = 0; k < r; ++k) perm[static_cast<std::size_t>(k)] = k;
  double best = std::numeric_limits<double>::infinity();
  do {
    for (unsigned mask = 0; mask < (1u << r); ++mask) {
      double worst = 0.0;
      for (int k = 0; k < r; ++k) {
        const double s = (mask >> k) & 1u ? -1.0 : 1.0;
        worst = std::max(
            worst, (s * d1.atoms().col(perm[static_cast<std::size_t>(k)]) -
                    d2.atoms().col(k))
                       .norm());
      }
      best = std::min(best, worst);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// All source-terminal paths of a layered DAG, accumulated right-to-left to
// match the relaxation order of the implementation bit-for-bit.
inline perdl::PathResult enumerate_shortest_path(const perdl::LayeredDag& dag) {
  const int n = dag.num_layers();
  std::vector<int> cursor(static_cast<std::size_t>(n), 0);
  perdl::PathResult best;
  best.length = std::numeric_limits<double>::infinity();
  std::vector<int> nodes(static_cast<std::size_t>(n));
  bool done = false;
  while (!done) {
    for (int i = 0; i < n; ++i) {
      nodes[static_cast<std::size_t>(i)] =
          dag.layers[static_cast<std::size_t>(i)][static_cast<std::size_t>(
              cursor[static_cast<std::size_t>(i)])];
    }
    double length = 0.0;
    for (int i = n - 2; i >= 0; --i) {
      length = dag.weights[static_cast<std::size_t>(i)](
                   nodes[static_cast<std::size_t>(i)],
                   nodes[static_cast<std::size_t>(i + 1)]) +
               length;
    }
    if (length < best.length) {
      best.length = length;
      best.nodes = nodes;
    }
    int level = n - 1;
    while (level >= 0) {
      if (++cursor[static_cast<std::size_t>(level)] <
          static_cast<int>(dag.layers[static_cast<std::size_t>(level)].size())) {
        break;
      }
      cursor[static_cast<std::size_t>(level)] = 0;
      --level;
    }
    done = level < 0;
  }
  return best;
}

// Polar factor as A (A'A)^{-1/2} via a self-adjoint eigendecomposition.
inline Eigen::MatrixXd polar_via_gram(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd gram = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  return a * eig.eigenvectors() * inv_sqrt.asDiagonal() *
         eig.eigenvectors().transpose();
}

// Central finite differences of f(D) = ||D X - Y||_F^2 at fixed X.
inline Eigen::MatrixXd finite_difference_gradient(const Eigen::MatrixXd& d,
                                                  const Eigen::MatrixXd& x,
                                                  const Eigen::MatrixXd& y,
                                                  double h = 1e-6) {
  Eigen::MatrixXd grad(d.rows(), d.cols());
  Eigen::MatrixXd probe = d;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      probe(i, j) = d(i, j) + h;
      const double up = (probe * x - y).squaredNorm();
      probe(i, j) = d(i, j) - h;
      const double down = (probe * x - y).squaredNorm();
      probe(i, j) = d(i, j);
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

}  // namespace oracle
