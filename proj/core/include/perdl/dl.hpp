#pragma once

#include "perdl/types.hpp"

#include <cstdint>
#include <vector>

namespace perdl {

// Both step families contract the per-column dictionary error linearly
// inside a neighborhood of the generating dictionary: under incoherent
// sparse generative models, one gradient-family iteration is known to be
// (delta, rho, psi)-linearly convergent with delta = O(1/log d), rho in
// (1/2, 1) and a floor psi vanishing superpolynomially in d. estimate_rate
// fits (rho, psi) empirically from an observed error sequence.
enum class DlKind {
  kOrthogonalAltMin,  // X = HT(D'Y); D+ = Polar(Y X')
  kGeneralAltMin,     // X = HT(D'Y); D+ = D - 2 eta (D X - Y) X'
};

/// One client's dictionary-learning iteration, behind a single interface so
/// heterogeneous clients can plug in different solvers.
struct DlAlgorithm {
  DlKind kind = DlKind::kOrthogonalAltMin;
  double threshold = 0.15;  // zeta
  double step_size = 0.0;   // eta for the general kind; <= 0 picks the
                            // per-step default 1 / (2 ||X||_2^2)
  bool renormalize = true;  // column renormalization after the gradient step

  void validate() const;
};

/// Shrinking-threshold schedule for random warm starts: zeta_k =
/// max(final_threshold, shrink^k * initial_threshold), a fixed number of
/// iterations per level, stopping once the final level has run.
struct WarmStartConfig {
  double initial_threshold = 0.5;
  double shrink = 0.9;
  double final_threshold = 0.15;
  int iterations_per_level = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Entrywise: keep entries with |a| >= zeta (boundary kept), zero the rest.
Eigen::MatrixXd hard_threshold(const Eigen::MatrixXd& a, double zeta);

/// Orthonormal polar factor U V' from the thin SVD. Rejects rank-deficient
/// input (smallest singular value <= 1e-12).
Eigen::MatrixXd polar(const Eigen::MatrixXd& a);

struct StepResult {
  Dictionary dictionary;
  SparseCode code;
};

StepResult step_orthogonal(const Eigen::MatrixXd& y, const Dictionary& d,
                           double zeta);

StepResult step_general(const Eigen::MatrixXd& y, const Dictionary& d,
                        double zeta, double eta, bool renormalize);

/// Dispatch on alg.kind.
StepResult dl_step(const Eigen::MatrixXd& y, const Dictionary& d,
                   const DlAlgorithm& alg);

/// Random initial dictionary refined by the shrinking-threshold schedule.
Dictionary warm_start(const Eigen::MatrixXd& y, const WarmStartConfig& cfg,
                      const DlAlgorithm& alg, int r);

struct SparseCodeResult {
  SparseCode code;
  double residual = 0.0;  // ||Y - D X||_F
};

/// Thresholded analysis code X = HT_zeta(D'Y) with its reconstruction
/// residual.
SparseCodeResult sparse_code(const Eigen::MatrixXd& y, const Dictionary& d,
                             double zeta);

/// Refit the local block against the residual left by the global block:
/// code the full partition, subtract the global contribution, then iterate
/// the DL step on (Y - D^g X^g, D^l) for t_refine rounds.
Dictionary refine_local(const Eigen::MatrixXd& y,
                        const PartitionedDictionary& part,
                        const DlAlgorithm& alg, int t_refine);

struct RateFit {
  double rho = 0.0;
  double psi = 0.0;
  bool contracting = false;  // rho < 1
};

/// Least-squares fit of e_{t+1} = rho * e_t + psi over consecutive pairs.
/// Needs at least 3 values; a constant sequence fits as (0, mean). When
/// contracting, the sequence settles near the implied floor psi/(1 - rho).
RateFit estimate_rate(const std::vector<double>& errors);

/// Default general-kind step size for a given code matrix: 1 / (2 sigma^2)
/// with sigma the largest singular value of X.
double default_step_size(const Eigen::MatrixXd& x);

}  // namespace perdl
