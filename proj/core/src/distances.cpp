#include "perdl/distances.hpp"

#include "perdl/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace perdl {

namespace {

void check_pair_shapes(const Dictionary& d1, const Dictionary& d2,
                       const char* what) {
  if (d1.dim() != d2.dim() || d1.num_atoms() != d2.num_atoms()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(d1.dim()) + "x" +
                                std::to_string(d1.num_atoms()) + " vs " +
                                std::to_string(d2.dim()) + "x" +
                                std::to_string(d2.num_atoms()) + ")");
  }
}

// Cost matrix C(j, k) = vector_d2(d1 atom j, d2 atom k).
Eigen::MatrixXd column_cost_matrix(const Dictionary& d1, const Dictionary& d2) {
  const int r1 = d1.num_atoms();
  const int r2 = d2.num_atoms();
  Eigen::MatrixXd cost(r1, r2);
  for (int j = 0; j < r1; ++j) {
    for (int k = 0; k < r2; ++k) {
      cost(j, k) = vector_d2(d1.atoms().col(j), d2.atoms().col(k));
    }
  }
  return cost;
}

// Kuhn augmenting path. `positions` are the columns of the cost matrix's
// transpose view: we match every position k to a distinct source row j with
// cost(j, k) <= threshold. `fixed_source[k] >= 0` pins position k.
struct BottleneckMatcher {
  const Eigen::MatrixXd& cost;  // sources x positions
  double threshold = 0.0;
  std::vector<int> fixed_source;        // per position, -1 if free
  std::vector<int> match_of_source;     // source -> position, -1 if free
  std::vector<int> source_of_position;  // position -> source, -1 if free

  explicit BottleneckMatcher(const Eigen::MatrixXd& c)
      : cost(c),
        fixed_source(static_cast<std::size_t>(c.cols()), -1),
        match_of_source(static_cast<std::size_t>(c.rows()), -1),
        source_of_position(static_cast<std::size_t>(c.cols()), -1) {}

  bool augment(int position, std::vector<bool>& visited) {
    for (int j = 0; j < cost.rows(); ++j) {
      if (visited[static_cast<std::size_t>(j)]) continue;
      if (cost(j, position) > threshold) continue;
      visited[static_cast<std::size_t>(j)] = true;
      int other = match_of_source[static_cast<std::size_t>(j)];
      if (other == -1 || (fixed_source[static_cast<std::size_t>(other)] == -1 &&
                          augment(other, visited))) {
        match_of_source[static_cast<std::size_t>(j)] = position;
        source_of_position[static_cast<std::size_t>(position)] = j;
        return true;
      }
    }
    return false;
  }

  // Perfect matching of all positions under `threshold`, honoring pins.
  bool feasible(double thr) {
    threshold = thr;
    std::fill(match_of_source.begin(), match_of_source.end(), -1);
    std::fill(source_of_position.begin(), source_of_position.end(), -1);
    const int positions = static_cast<int>(cost.cols());
    for (int k = 0; k < positions; ++k) {
      int pin = fixed_source[static_cast<std::size_t>(k)];
      if (pin < 0) continue;
      if (cost(pin, k) > thr || match_of_source[static_cast<std::size_t>(pin)] != -1) {
        return false;
      }
      match_of_source[static_cast<std::size_t>(pin)] = k;
      source_of_position[static_cast<std::size_t>(k)] = pin;
    }
    for (int k = 0; k < positions; ++k) {
      if (source_of_position[static_cast<std::size_t>(k)] != -1) continue;
      std::vector<bool> visited(static_cast<std::size_t>(cost.rows()), false);
      if (!augment(k, visited)) return false;
    }
    return true;
  }
};

// Minimax assignment of every position (column of `cost`) to a distinct
// source (row). Returns the optimal bottleneck value and, among optimal
// assignments, the lexicographically smallest (source per position).
std::pair<double, std::vector<int>> bottleneck_assign(
    const Eigen::MatrixXd& cost) {
  const int positions = static_cast<int>(cost.cols());
  if (positions == 0) return {0.0, {}};
  if (cost.rows() < cost.cols()) {
    throw std::invalid_argument("bottleneck_assign: not enough sources");
  }

  std::vector<double> levels(cost.data(), cost.data() + cost.size());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  BottleneckMatcher matcher(cost);
  // Smallest threshold admitting a perfect matching.
  std::size_t lo = 0, hi = levels.size() - 1;
  if (!matcher.feasible(levels[hi])) {
    throw std::logic_error("bottleneck_assign: full cost matrix infeasible");
  }
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (matcher.feasible(levels[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  const double value = levels[lo];

  // Greedy lexicographic refinement: pin the smallest workable source per
  // position, left to right.
  std::vector<int> chosen(static_cast<std::size_t>(positions), -1);
  for (int k = 0; k < positions; ++k) {
    for (int j = 0; j < cost.rows(); ++j) {
      bool used = false;
      for (int prev = 0; prev < k; ++prev) {
        if (chosen[static_cast<std::size_t>(prev)] == j) {
          used = true;
          break;
        }
      }
      if (used || cost(j, k) > value) continue;
      matcher.fixed_source[static_cast<std::size_t>(k)] = j;
      if (matcher.feasible(value)) {
        chosen[static_cast<std::size_t>(k)] = j;
        break;
      }
      matcher.fixed_source[static_cast<std::size_t>(k)] = -1;
    }
    if (chosen[static_cast<std::size_t>(k)] == -1) {
      throw std::logic_error("bottleneck_assign: refinement lost feasibility");
    }
  }
  return {value, chosen};
}

}  // namespace

double vector_d2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("vector_d2: dimension mismatch");
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("vector_d2: non-finite entry");
  }
  return std::min((a - b).norm(), (a + b).norm());
}

int vector_d2_sign(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("vector_d2_sign: dimension mismatch");
  }
  // ||a - s*b|| is minimized by s = sign(<a, b>); s = +1 on a tie.
  return a.dot(b) >= 0.0 ? 1 : -1;
}

Dist12Result dist_12(const Dictionary& d1, const Dictionary& d2) {
  check_pair_shapes(d1, d2, "dist_12");
  const int r = d1.num_atoms();
  if (r == 0) {
    return {0.0, SignedPermutation::identity(0)};
  }
  Eigen::MatrixXd cost = column_cost_matrix(d1, d2);
  auto [value, perm] = bottleneck_assign(cost);
  std::vector<int> signs(static_cast<std::size_t>(r), 1);
  for (int k = 0; k < r; ++k) {
    signs[static_cast<std::size_t>(k)] =
        vector_d2_sign(d2.atoms().col(k), d1.atoms().col(perm[static_cast<std::size_t>(k)]));
  }
  return {value, SignedPermutation(std::move(perm), std::move(signs))};
}

std::vector<double> dist_2_columns(const Dictionary& d1, const Dictionary& d2,
                                   const SignedPermutation& pi) {
  check_pair_shapes(d1, d2, "dist_2_columns");
  if (pi.size() != d1.num_atoms()) {
    throw std::invalid_argument("dist_2_columns: permutation size mismatch");
  }
  Eigen::MatrixXd permuted = pi.apply(d1.atoms());
  std::vector<double> residuals(static_cast<std::size_t>(d1.num_atoms()));
  for (int j = 0; j < d1.num_atoms(); ++j) {
    residuals[static_cast<std::size_t>(j)] =
        (permuted.col(j) - d2.atoms().col(j)).norm();
  }
  return residuals;
}

double incoherence(const Dictionary& d) {
  if (d.num_atoms() < 2) return 0.0;
  Eigen::MatrixXd gram = d.atoms().transpose() * d.atoms();
  double max_off = 0.0;
  for (int j = 0; j < d.num_atoms(); ++j) {
    for (int k = 0; k < d.num_atoms(); ++k) {
      if (j == k) continue;
      max_off = std::max(max_off, std::abs(gram(j, k)));
    }
  }
  return std::sqrt(static_cast<double>(d.dim())) * max_off;
}

double estimate_beta(const std::vector<Dictionary>& locals,
                     int random_candidates, std::uint64_t seed) {
  if (locals.empty()) {
    throw std::invalid_argument("estimate_beta: no local dictionaries");
  }
  const int dim = locals.front().dim();
  for (std::size_t i = 0; i < locals.size(); ++i) {
    if (locals[i].dim() != dim) {
      throw std::invalid_argument("estimate_beta: dimension mismatch");
    }
    if (locals[i].is_empty()) {
      throw std::invalid_argument("estimate_beta: client " + std::to_string(i) +
                                  " has an empty local dictionary");
    }
  }

  std::vector<Eigen::VectorXd> candidates;
  for (const auto& d : locals) {
    for (int j = 0; j < d.num_atoms(); ++j) {
      candidates.push_back(d.atoms().col(j));
    }
  }
  SplitMix64 rng(seed);
  for (int s = 0; s < random_candidates; ++s) {
    Eigen::VectorXd v(dim);
    do {
      for (int i = 0; i < dim; ++i) v(i) = rng.next_gaussian();
    } while (v.norm() < 1e-12);
    candidates.push_back(v.normalized());
  }

  double best = std::numeric_limits<double>::infinity();
  for (const auto& v : candidates) {
    double worst_client = 0.0;
    for (const auto& d : locals) {
      double nearest = std::numeric_limits<double>::infinity();
      for (int j = 0; j < d.num_atoms(); ++j) {
        nearest = std::min(nearest, vector_d2(d.atoms().col(j), v));
      }
      worst_client = std::max(worst_client, nearest);
    }
    best = std::min(best, worst_client);
  }
  return best;
}

double dist_2_matrix(const Dictionary& d1, const Dictionary& d2) {
  check_pair_shapes(d1, d2, "dist_2_matrix");
  const int r = d1.num_atoms();
  if (r == 0) return 0.0;
  if (r > 8) {
    throw std::invalid_argument(
        "dist_2_matrix: exhaustive enumeration limited to r <= 8 (got r = " +
        std::to_string(r) + ")");
  }
  std::vector<int> perm(static_cast<std::size_t>(r));
  for (int k = 0; k < r; ++k) perm[static_cast<std::size_t>(k)] = k;
  double best = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd diff(d1.dim(), r);
  do {
    for (unsigned mask = 0; mask < (1u << r); ++mask) {
      for (int k = 0; k < r; ++k) {
        double s = (mask >> k) & 1u ? -1.0 : 1.0;
        diff.col(k) =
            s * d1.atoms().col(perm[static_cast<std::size_t>(k)]) -
            d2.atoms().col(k);
      }
      double spectral =
          diff.jacobiSvd().singularValues()(0);
      best = std::min(best, spectral);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

SubsetAlignment align_subset(const Dictionary& reference,
                             const Dictionary& candidates) {
  if (reference.dim() != candidates.dim()) {
    throw std::invalid_argument("align_subset: dimension mismatch");
  }
  if (reference.num_atoms() > candidates.num_atoms()) {
    throw std::invalid_argument(
        "align_subset: reference has more atoms than candidates");
  }
  SubsetAlignment out;
  if (reference.num_atoms() == 0) return out;
  // Sources are candidate atoms, positions are reference columns.
  Eigen::MatrixXd cost = column_cost_matrix(candidates, reference);
  auto [value, chosen] = bottleneck_assign(cost);
  out.value = value;
  out.indices = std::move(chosen);
  out.signs.resize(out.indices.size());
  for (std::size_t j = 0; j < out.indices.size(); ++j) {
    out.signs[j] = vector_d2_sign(
        reference.atoms().col(static_cast<Eigen::Index>(j)),
        candidates.atoms().col(out.indices[j]));
  }
  return out;
}

}  // namespace perdl
