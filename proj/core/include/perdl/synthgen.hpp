#pragma once

#include "perdl/rng.hpp"
#include "perdl/types.hpp"

#include <utility>
#include <vector>

namespace perdl {

/// Synthetic-benchmark parameters. Defaults reproduce the reference
/// configuration (10 clients, 6x6 orthogonal dictionaries sharing the first
/// 3 atoms, 200 samples, Bernoulli 0.2 codes truncated at 0.3).
struct SynthConfig {
  int num_clients = 10;
  int dim = 6;               // d
  int atoms_per_client = 6;  // r_i
  int global_atoms = 3;      // r^g
  int samples_per_client = 200;
  double bernoulli_p = 0.2;
  double truncation = 0.3;  // c; nonzeros smaller than this are pushed to it
  std::uint64_t seed = 1;

  void validate() const;
};

/// Exact generative state of one synthetic run: Y_i = [D^g D^l_i] * X_i.
struct GroundTruth {
  Dictionary global_dict;
  std::vector<Dictionary> local_dicts;
  std::vector<SparseCode> codes;
  std::vector<Eigen::MatrixXd> data;

  int num_clients() const { return static_cast<int>(local_dicts.size()); }
  PartitionedDictionary client_partition(int i) const;
  Dictionary client_dictionary(int i) const;
};

/// Shared global block plus per-client local blocks; each concatenation
/// [global local_i] has orthonormal columns. Requires atoms_per_client <= dim.
std::pair<Dictionary, std::vector<Dictionary>> generate_dictionaries(
    const SynthConfig& cfg);

/// Gaussian-Bernoulli code matrix (r x samples_per_client): standard normal
/// entries kept with probability bernoulli_p, then every surviving entry
/// with |x| < truncation is replaced by truncation * sign(x). `client`
/// selects the deterministic per-client stream.
SparseCode generate_codes(const SynthConfig& cfg, int r, int client = 0);

GroundTruth generate_ground_truth(const SynthConfig& cfg);

/// Same, with per-client sample counts (weak-learner studies).
GroundTruth generate_ground_truth(const SynthConfig& cfg,
                                  const std::vector<int>& samples_per_client);

struct Perturbation {
  Dictionary dict;
  SignedPermutation applied;  // dict == (column-perturbed D) * applied
};

/// Unit-norm dictionary with dist_12 to D at most eps: each column gets a
/// tangent offset of norm eps and is renormalized, then a random signed
/// permutation is applied.
Perturbation perturb_dictionary(const Dictionary& d, double eps,
                                std::uint64_t seed);

/// Orthonormalized Gaussian matrix with sign-fixed R diagonal.
Dictionary random_orthogonal_dictionary(int dim, int r, SplitMix64& rng);

/// Independent unit-norm Gaussian columns (non-orthogonal; also the
/// constructor used for overcomplete fixtures).
Dictionary random_unit_dictionary(int dim, int r, SplitMix64& rng);

Eigen::MatrixXd gaussian_matrix(int rows, int cols, SplitMix64& rng);

SignedPermutation random_signed_permutation(int r, SplitMix64& rng);

}  // namespace perdl
