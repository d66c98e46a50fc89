#include "perdl/matching.hpp"

#include "perdl/distances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace perdl {

std::uint64_t LayeredDag::edge_count() const {
  if (layers.empty()) return 0;
  std::uint64_t count = layers.front().size() + layers.back().size();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    count += static_cast<std::uint64_t>(layers[i].size()) *
             static_cast<std::uint64_t>(layers[i + 1].size());
  }
  return count;
}

void LayeredDag::remove_path(const std::vector<int>& nodes) {
  if (nodes.size() != layers.size()) {
    throw std::invalid_argument("LayeredDag::remove_path: one node per layer required");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& layer = layers[i];
    auto it = std::find(layer.begin(), layer.end(), nodes[i]);
    if (it == layer.end()) {
      throw std::invalid_argument("LayeredDag::remove_path: node not alive in layer " +
                                  std::to_string(i));
    }
    layer.erase(it);
  }
}

LayeredDag build_dag(const std::vector<Dictionary>& dicts) {
  if (dicts.size() < 2) {
    throw std::invalid_argument("build_dag: matching needs at least two layers");
  }
  const int dim = dicts.front().dim();
  LayeredDag dag;
  dag.layers.resize(dicts.size());
  for (std::size_t i = 0; i < dicts.size(); ++i) {
    if (dicts[i].dim() != dim) {
      throw std::invalid_argument("build_dag: dimension mismatch at layer " +
                                  std::to_string(i));
    }
    if (dicts[i].num_atoms() == 0) {
      throw std::invalid_argument("build_dag: layer " + std::to_string(i) +
                                  " has no atoms");
    }
    dag.layers[i].resize(static_cast<std::size_t>(dicts[i].num_atoms()));
    for (int a = 0; a < dicts[i].num_atoms(); ++a) dag.layers[i][static_cast<std::size_t>(a)] = a;
  }
  dag.weights.reserve(dicts.size() - 1);
  for (std::size_t i = 0; i + 1 < dicts.size(); ++i) {
    Eigen::MatrixXd w(dicts[i].num_atoms(), dicts[i + 1].num_atoms());
    for (int a = 0; a < dicts[i].num_atoms(); ++a) {
      for (int b = 0; b < dicts[i + 1].num_atoms(); ++b) {
        w(a, b) = vector_d2(dicts[i].atoms().col(a), dicts[i + 1].atoms().col(b));
      }
    }
    dag.weights.push_back(std::move(w));
  }
  return dag;
}

PathResult shortest_path(LayeredDag& dag) {
  const int n = dag.num_layers();
  if (n < 2) throw std::invalid_argument("shortest_path: need at least two layers");
  for (int i = 0; i < n; ++i) {
    if (dag.layers[static_cast<std::size_t>(i)].empty()) {
      throw std::runtime_error("shortest_path: layer " + std::to_string(i) +
                               " is empty (r_g larger than the available atoms)");
    }
  }

  // Suffix distances to the terminal, relaxed backwards in layer order; the
  // forward pass then greedily picks the smallest node id per layer among
  // those on a shortest path. Suffix values are stored and compared as-is,
  // never re-derived by subtraction, so the equality tests below are exact.
  std::vector<std::vector<double>> suffix(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Eigen::Index width =
        i + 1 < n ? dag.weights[static_cast<std::size_t>(i)].rows()
                  : dag.weights[static_cast<std::size_t>(i - 1)].cols();
    suffix[static_cast<std::size_t>(i)].assign(
        static_cast<std::size_t>(width), std::numeric_limits<double>::infinity());
  }
  for (int node : dag.layers[static_cast<std::size_t>(n - 1)]) {
    suffix[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(node)] = 0.0;
  }
  dag.relaxations += dag.layers[static_cast<std::size_t>(n - 1)].size();  // terminal edges
  for (int i = n - 2; i >= 0; --i) {
    const auto& w = dag.weights[static_cast<std::size_t>(i)];
    for (int a : dag.layers[static_cast<std::size_t>(i)]) {
      double best = std::numeric_limits<double>::infinity();
      for (int b : dag.layers[static_cast<std::size_t>(i + 1)]) {
        ++dag.relaxations;
        best = std::min(best,
                        w(a, b) + suffix[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(b)]);
      }
      suffix[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = best;
    }
  }

  PathResult result;
  result.nodes.resize(static_cast<std::size_t>(n));
  dag.relaxations += dag.layers[0].size();  // source edges
  double best = std::numeric_limits<double>::infinity();
  for (int a : dag.layers[0]) best = std::min(best, suffix[0][static_cast<std::size_t>(a)]);
  result.length = best;

  int current = -1;
  for (int a : dag.layers[0]) {
    if (suffix[0][static_cast<std::size_t>(a)] == best) {
      current = a;
      break;
    }
  }
  result.nodes[0] = current;
  double target = best;
  for (int i = 0; i + 1 < n; ++i) {
    const auto& w = dag.weights[static_cast<std::size_t>(i)];
    int next = -1;
    for (int b : dag.layers[static_cast<std::size_t>(i + 1)]) {
      if (w(current, b) + suffix[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(b)] ==
          target) {
        next = b;
        break;
      }
    }
    if (next < 0) {
      throw std::logic_error("shortest_path: path reconstruction failed");
    }
    target = suffix[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(next)];
    result.nodes[static_cast<std::size_t>(i + 1)] = next;
    current = next;
  }
  return result;
}

MatchResult global_matching(const std::vector<Dictionary>& dicts, int r_g,
                            bool renormalize) {
  if (r_g < 0) throw std::invalid_argument("global_matching: r_g >= 0 required");
  if (dicts.size() < 2) {
    throw std::invalid_argument("global_matching: at least two clients required");
  }
  int min_atoms = std::numeric_limits<int>::max();
  for (const auto& d : dicts) min_atoms = std::min(min_atoms, d.num_atoms());
  if (r_g > min_atoms) {
    throw std::invalid_argument("global_matching: r_g = " + std::to_string(r_g) +
                                " exceeds the smallest client dictionary (" +
                                std::to_string(min_atoms) + " atoms)");
  }

  const int n = static_cast<int>(dicts.size());
  const int dim = dicts.front().dim();
  MatchResult result;
  result.layer_order.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) result.layer_order[static_cast<std::size_t>(i)] = i;
  result.matched_indices.assign(static_cast<std::size_t>(n), {});
  result.matched_signs.assign(static_cast<std::size_t>(n), {});

  LayeredDag dag = build_dag(dicts);
  Eigen::MatrixXd global(dim, r_g);
  for (int round = 0; round < r_g; ++round) {
    PathResult path = shortest_path(dag);
    const Eigen::VectorXd anchor = dicts[0].atoms().col(path.nodes[0]);
    Eigen::VectorXd column = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd atom =
          dicts[static_cast<std::size_t>(i)].atoms().col(path.nodes[static_cast<std::size_t>(i)]);
      double inner = atom.dot(anchor);
      int sign = inner > 0.0 ? 1 : (inner < 0.0 ? -1 : 1);
      if (inner == 0.0) {
        result.warnings.push_back("round " + std::to_string(round) + ", client " +
                                  std::to_string(i) +
                                  ": zero inner product while sign-aligning, using +1");
      }
      column += sign * atom;
      result.matched_indices[static_cast<std::size_t>(i)].push_back(
          path.nodes[static_cast<std::size_t>(i)]);
      result.matched_signs[static_cast<std::size_t>(i)].push_back(sign);
    }
    column /= static_cast<double>(n);
    if (renormalize) {
      double norm = column.norm();
      if (norm < 1e-12) {
        throw std::runtime_error("global_matching: averaged column " +
                                 std::to_string(round) + " vanished");
      }
      column /= norm;
    }
    global.col(round) = column;
    dag.remove_path(path.nodes);
  }
  result.relaxations = dag.relaxations;
  result.global_estimate = Dictionary(std::move(global), renormalize);

  result.local_estimates.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& matched = result.matched_indices[static_cast<std::size_t>(i)];
    std::vector<int> rest;
    for (int a = 0; a < dicts[static_cast<std::size_t>(i)].num_atoms(); ++a) {
      if (std::find(matched.begin(), matched.end(), a) == matched.end()) {
        rest.push_back(a);
      }
    }
    Eigen::MatrixXd local(dim, static_cast<Eigen::Index>(rest.size()));
    for (std::size_t k = 0; k < rest.size(); ++k) {
      local.col(static_cast<Eigen::Index>(k)) =
          dicts[static_cast<std::size_t>(i)].atoms().col(rest[k]);
    }
    result.local_estimates.push_back(
        Dictionary(std::move(local), dicts[static_cast<std::size_t>(i)].unit_norm()));
  }
  return result;
}

double matching_cost(const MatchResult& result,
                     const std::vector<Dictionary>& dicts) {
  const std::size_t n = dicts.size();
  if (result.matched_indices.size() != n) {
    throw std::invalid_argument("matching_cost: client count mismatch");
  }
  std::size_t r_g = result.matched_indices.empty() ? 0 : result.matched_indices[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& idx = result.matched_indices[i];
    if (idx.size() != r_g) {
      throw std::invalid_argument("matching_cost: ragged assignment");
    }
    std::vector<int> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument("matching_cost: duplicate atom index for client " +
                                  std::to_string(i));
    }
    for (int a : idx) {
      if (a < 0 || a >= dicts[i].num_atoms()) {
        throw std::invalid_argument("matching_cost: atom index out of range");
      }
    }
  }
  double cost = 0.0;
  for (std::size_t j = 0; j < r_g; ++j) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      cost += vector_d2(dicts[i].atoms().col(result.matched_indices[i][j]),
                        dicts[i + 1].atoms().col(result.matched_indices[i + 1][j]));
    }
  }
  return cost;
}

void dump_dag(const LayeredDag& dag, std::ostream& os) {
  os << "layers " << dag.num_layers() << ", alive edges " << dag.edge_count()
     << "\n";
  for (int i = 0; i < dag.num_layers(); ++i) {
    os << "layer " << i << ":";
    for (int a : dag.layers[static_cast<std::size_t>(i)]) os << " " << a;
    os << "\n";
  }
  for (std::size_t i = 0; i + 1 < dag.layers.size(); ++i) {
    for (int a : dag.layers[i]) {
      for (int b : dag.layers[i + 1]) {
        os << "edge " << i << ":" << a << " -> " << (i + 1) << ":" << b << " w="
           << dag.weights[i](a, b) << "\n";
      }
    }
  }
}

}  // namespace perdl
