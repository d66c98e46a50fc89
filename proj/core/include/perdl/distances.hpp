#pragma once

#include "perdl/types.hpp"

#include <cstdint>
#include <vector>

namespace perdl {

/// min over s in {-1,+1} of ||a - s*b||_2. Symmetric; in [0, sqrt(2)] for
/// unit vectors.
double vector_d2(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Sign minimizing ||a - s*b||_2; ties resolved toward +1.
int vector_d2_sign(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct Dist12Result {
  double value = 0.0;
  SignedPermutation pi;  // minimizer of ||d1 * pi - d2||_{1,2}
};

/// Signed-permutation-invariant l_{1,2} distance: the minimax column gap
/// over all signed permutations. Solved exactly as a bottleneck assignment
/// (binary search over distinct column distances with a bipartite-matching
/// feasibility check). Among optimal permutations the lexicographically
/// smallest source sequence is returned, signs resolved toward +1 on ties.
Dist12Result dist_12(const Dictionary& d1, const Dictionary& d2);

/// Per-column residual norms of d1*pi - d2. Their max equals the l_{1,2}
/// norm under that pi.
std::vector<double> dist_2_columns(const Dictionary& d1, const Dictionary& d2,
                                   const SignedPermutation& pi);

/// sqrt(d) * max_{j != k} |<atom_j, atom_k>|. Zero iff mutually orthogonal
/// columns; equals sqrt(d) when an atom repeats. Returns 0 for r < 2.
double incoherence(const Dictionary& d);

/// Surrogate upper bound on the identifiability margin of a family of local
/// dictionaries: min over candidate unit vectors v of
/// max_i min_j vector_d2(atom_{i,j}, v). Candidates are the union of all
/// local atoms plus `random_candidates` uniform unit vectors.
double estimate_beta(const std::vector<Dictionary>& locals,
                     int random_candidates = 0, std::uint64_t seed = 0);

/// Spectral-norm variant: min over signed permutations of ||d1*pi - d2||_2.
/// Exhaustive over all 2^r * r! candidates; rejects r > 8. No algorithm here
/// needs the matrix-level form, so it stays a diagnostic.
double dist_2_matrix(const Dictionary& d1, const Dictionary& d2);

struct SubsetAlignment {
  double value = 0.0;
  std::vector<int> indices;  // candidate atom matched to reference column j
  std::vector<int> signs;
};

/// Injective bottleneck alignment of every reference atom onto a distinct
/// candidate atom (reference.num_atoms() <= candidates.num_atoms()),
/// minimizing the maximum matched column distance. This is how a dictionary
/// without a declared global block is scored against a known global part.
SubsetAlignment align_subset(const Dictionary& reference,
                             const Dictionary& candidates);

}  // namespace perdl
