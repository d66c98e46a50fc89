#pragma once

#include "perdl/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace perdl {

/// N-layer DAG over client atoms. Layer i holds one node per still-alive
/// atom of client i; an edge connects every layer-i node to every
/// layer-(i+1) node with weight vector_d2 of the two atoms. A source feeds
/// layer 1 and layer N feeds a terminal, both at weight zero.
struct LayeredDag {
  std::vector<std::vector<int>> layers;     // alive atom ids per layer
  std::vector<Eigen::MatrixXd> weights;     // weights[i](a, b), original ids
  std::uint64_t relaxations = 0;            // edges examined so far

  int num_layers() const { return static_cast<int>(layers.size()); }

  /// Alive edges including the source and terminal connections.
  std::uint64_t edge_count() const;

  /// Drop one node (original atom id) from every layer.
  void remove_path(const std::vector<int>& nodes);
};

LayeredDag build_dag(const std::vector<Dictionary>& dicts);

struct PathResult {
  std::vector<int> nodes;  // one original atom id per layer
  double length = 0.0;
};

/// Minimum-total-weight source-to-terminal path via single-pass relaxation
/// in layer order. Ties break toward the lexicographically smallest id
/// sequence, scanning from layer 1. Increments dag.relaxations per edge
/// examined.
PathResult shortest_path(LayeredDag& dag);

struct MatchResult {
  Dictionary global_estimate;
  std::vector<Dictionary> local_estimates;
  // Per client: atom index and sign matched to each global column, in the
  // order the global columns were extracted.
  std::vector<std::vector<int>> matched_indices;
  std::vector<std::vector<int>> matched_signs;
  std::vector<int> layer_order;  // client order defining the chain objective
  std::uint64_t relaxations = 0;
  std::vector<std::string> warnings;
};

/// r_g rounds of shortest-path extraction: each round matches one atom per
/// client, sign-aligns them to the layer-1 atom, averages them into a new
/// global column, records the indices and removes the path. Unmatched
/// columns become the local estimates, in their original order. Averaged
/// columns are renormalized only when `renormalize` is set.
MatchResult global_matching(const std::vector<Dictionary>& dicts, int r_g,
                            bool renormalize);

/// Chained objective of an assignment: sum over global columns and
/// consecutive client pairs of the matched-atom column distance.
double matching_cost(const MatchResult& result,
                     const std::vector<Dictionary>& dicts);

/// Plain-text adjacency listing (nodes and weights) for inspection.
void dump_dag(const LayeredDag& dag, std::ostream& os);

}  // namespace perdl
