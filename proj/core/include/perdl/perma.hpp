#pragma once

#include "perdl/dl.hpp"
#include "perdl/matching.hpp"
#include "perdl/synthgen.hpp"
#include "perdl/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace perdl {

/// One row of the convergence trace (one client per round). Errors are NaN
/// when no ground truth was supplied. wall_ms stays 0 unless timing capture
/// is switched on, keeping default outputs byte-reproducible.
struct RoundTrace {
  int round = 0;
  int client_id = 0;
  double global_err = 0.0;
  double local_err = 0.0;
  double recon_residual = 0.0;
  double wall_ms = 0.0;
};

enum class Direction { kClientToServer, kServerToClient };

/// Shape record of one dictionary payload that crossed the client/server
/// boundary. The payload itself is not retained; the log exists so tests
/// can audit what was communicated.
struct MessageRecord {
  int round = 0;
  Direction direction = Direction::kClientToServer;
  int client_id = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::string kind;
};

/// A client's data, solver and evolving dictionary split. `id` addresses
/// messages and trace rows, and selects the client's blocks inside a
/// GroundTruth when one is supplied for evaluation; ids must be unique.
struct ClientState {
  int id = 0;
  Eigen::MatrixXd data;
  DlAlgorithm algorithm;
  WarmStartConfig warm_cfg;
  int num_atoms = 0;  // r_i
  int t_refine = 0;
  std::optional<Dictionary> initial;  // D_i^(0); warm-started when absent
  PartitionedDictionary partition;    // maintained across rounds
};

struct ServerState {
  int round = 0;
  Dictionary global;
  std::vector<RoundTrace> history;
  std::vector<MessageRecord> messages;
};

struct PermaOptions {
  int r_global = 3;
  int rounds = 50;
  bool renormalize = true;  // matching output and per-round averages
  int threads = 1;
  bool record_timings = false;
};

struct PermaResult {
  ServerState server;
  std::vector<PartitionedDictionary> partitions;
  MatchResult initial_match;
};

/// One DL iteration on the concatenated dictionary, then re-identification
/// of the global block: each reference atom grabs its nearest output atom
/// (greedy in reference order, without replacement), sign-corrected toward
/// the reference. The leftover atoms become the local block in their
/// original order. r_g = 0 degenerates to a plain DL step.
PartitionedDictionary local_update(const Eigen::MatrixXd& y,
                                   const PartitionedDictionary& part,
                                   const DlAlgorithm& alg,
                                   std::vector<std::string>* log = nullptr);

/// Federated matching-and-averaging: warm-start clients that carry no
/// initial dictionary, run global matching once, then `rounds` rounds of
/// per-client local updates, server averaging and broadcast. Clients within
/// a round run concurrently (opts.threads); results are identical for any
/// thread count.
PermaResult run_perma(std::vector<ClientState> clients,
                      const PermaOptions& opts,
                      const GroundTruth* truth = nullptr);

/// Baseline without collaboration: every client iterates its own solver on
/// the full dictionary. Ground truth is required because scoring aligns
/// the best-matching atoms onto the true global block.
std::vector<RoundTrace> run_independent(std::vector<ClientState> clients,
                                        int rounds, const GroundTruth& truth,
                                        int threads = 1);

struct SplitReconstruction {
  Eigen::MatrixXd global_part;
  Eigen::MatrixXd local_part;
};

/// Top-k reconstruction split by block: code against the concatenated
/// dictionary, keep the k largest-magnitude coefficients per sample, then
/// emit the global and local contributions separately.
SplitReconstruction reconstruct_split(const Eigen::MatrixXd& y,
                                      const PartitionedDictionary& part,
                                      double zeta, int k);

}  // namespace perdl
