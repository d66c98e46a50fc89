#include "perdl/dl.hpp"

#include "perdl/rng.hpp"
#include "perdl/synthgen.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace perdl {

void DlAlgorithm::validate() const {
  // step_size <= 0 selects the per-step default, so only zeta needs a check.
  if (threshold < 0.0) throw std::invalid_argument("DlAlgorithm: threshold >= 0 required");
}

void WarmStartConfig::validate() const {
  if (!(initial_threshold > 0.0)) throw std::invalid_argument("WarmStartConfig: initial_threshold > 0 required");
  if (!(final_threshold > 0.0)) throw std::invalid_argument("WarmStartConfig: final_threshold > 0 required");
  if (initial_threshold < final_threshold) {
    throw std::invalid_argument("WarmStartConfig: initial_threshold must be >= final_threshold");
  }
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("WarmStartConfig: shrink must be in (0, 1)");
  if (iterations_per_level < 1) throw std::invalid_argument("WarmStartConfig: iterations_per_level >= 1 required");
}

Eigen::MatrixXd hard_threshold(const Eigen::MatrixXd& a, double zeta) {
  if (zeta < 0.0) throw std::invalid_argument("hard_threshold: zeta >= 0 required");
  return (a.array().abs() >= zeta).select(a, 0.0);
}

Eigen::MatrixXd polar(const Eigen::MatrixXd& a) {
  if (a.rows() < a.cols()) {
    throw std::invalid_argument("polar: more columns than rows");
  }
  // BDCSVD: divide-and-conquer, needed at video-patch scale (r in the
  // hundreds); falls back to Jacobi internally for small blocks.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (!(smallest > 1e-12)) {
    throw std::runtime_error(
        "polar: rank-deficient input (smallest singular value = " +
        std::to_string(smallest) + ")");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

double default_step_size(const Eigen::MatrixXd& x) {
  // Largest singular value via the r x r Gram matrix; X is r x n with small r.
  Eigen::MatrixXd gram = x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0)) {
    throw std::runtime_error("default_step_size: zero code matrix");
  }
  return 1.0 / (2.0 * top);
}

StepResult step_orthogonal(const Eigen::MatrixXd& y, const Dictionary& d,
                           double zeta) {
  if (y.rows() != d.dim()) {
    throw std::invalid_argument("step_orthogonal: data/dictionary dimension mismatch");
  }
  Eigen::MatrixXd x = hard_threshold(d.atoms().transpose() * y, zeta);
  Eigen::MatrixXd m = y * x.transpose();
  try {
    Eigen::MatrixXd q = polar(m);
    return {Dictionary(std::move(q), true), SparseCode(std::move(x))};
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string(e.what()) +
                             "; the thresholded code is too sparse, retry with a smaller zeta");
  }
}

StepResult step_general(const Eigen::MatrixXd& y, const Dictionary& d,
                        double zeta, double eta, bool renormalize) {
  if (y.rows() != d.dim()) {
    throw std::invalid_argument("step_general: data/dictionary dimension mismatch");
  }
  Eigen::MatrixXd x = hard_threshold(d.atoms().transpose() * y, zeta);
  if (eta <= 0.0) eta = default_step_size(x);
  Eigen::MatrixXd updated =
      d.atoms() - 2.0 * eta * (d.atoms() * x - y) * x.transpose();
  if (!updated.allFinite()) {
    throw std::runtime_error("step_general: non-finite update (eta too large?)");
  }
  if (renormalize) {
    for (Eigen::Index j = 0; j < updated.cols(); ++j) {
      double n = updated.col(j).norm();
      if (n < 1e-12) {
        throw std::runtime_error("step_general: column " + std::to_string(j) +
                                 " collapsed to zero, cannot renormalize");
      }
      updated.col(j) /= n;
    }
    return {Dictionary(std::move(updated), true), SparseCode(std::move(x))};
  }
  return {Dictionary(std::move(updated), false), SparseCode(std::move(x))};
}

StepResult dl_step(const Eigen::MatrixXd& y, const Dictionary& d,
                   const DlAlgorithm& alg) {
  alg.validate();
  switch (alg.kind) {
    case DlKind::kOrthogonalAltMin:
      return step_orthogonal(y, d, alg.threshold);
    case DlKind::kGeneralAltMin:
      return step_general(y, d, alg.threshold, alg.step_size, alg.renormalize);
  }
  throw std::logic_error("dl_step: unknown kind");
}

Dictionary warm_start(const Eigen::MatrixXd& y, const WarmStartConfig& cfg,
                      const DlAlgorithm& alg, int r) {
  cfg.validate();
  if (r < 1) throw std::invalid_argument("warm_start: r >= 1 required");
  SplitMix64 rng(cfg.seed);
  Dictionary current =
      alg.kind == DlKind::kOrthogonalAltMin
          ? random_orthogonal_dictionary(static_cast<int>(y.rows()), r, rng)
          : random_unit_dictionary(static_cast<int>(y.rows()), r, rng);
  DlAlgorithm leveled = alg;
  double level = cfg.initial_threshold;
  while (true) {
    leveled.threshold = std::max(level, cfg.final_threshold);
    for (int it = 0; it < cfg.iterations_per_level; ++it) {
      current = dl_step(y, current, leveled).dictionary;
    }
    if (leveled.threshold <= cfg.final_threshold) break;
    level *= cfg.shrink;
  }
  return current;
}

SparseCodeResult sparse_code(const Eigen::MatrixXd& y, const Dictionary& d,
                             double zeta) {
  if (y.rows() != d.dim()) {
    throw std::invalid_argument("sparse_code: data/dictionary dimension mismatch");
  }
  Eigen::MatrixXd x = hard_threshold(d.atoms().transpose() * y, zeta);
  double residual = (y - d.atoms() * x).norm();
  return {SparseCode(std::move(x)), residual};
}

Dictionary refine_local(const Eigen::MatrixXd& y,
                        const PartitionedDictionary& part,
                        const DlAlgorithm& alg, int t_refine) {
  if (t_refine < 0) throw std::invalid_argument("refine_local: t_refine >= 0 required");
  if (part.num_local() == 0) {
    throw std::invalid_argument("refine_local: local part is empty");
  }
  if (t_refine == 0) return part.local_part;
  Eigen::MatrixXd x_full =
      hard_threshold(part.concatenated().atoms().transpose() * y, alg.threshold);
  Eigen::MatrixXd local_residual =
      y - part.global_part.atoms() * x_full.topRows(part.num_global());
  Dictionary local = part.local_part;
  for (int t = 0; t < t_refine; ++t) {
    local = dl_step(local_residual, local, alg).dictionary;
  }
  return local;
}

RateFit estimate_rate(const std::vector<double>& errors) {
  if (errors.size() < 3) {
    throw std::invalid_argument("estimate_rate: need at least 3 error values");
  }
  for (double e : errors) {
    if (!std::isfinite(e) || e < 0.0) {
      throw std::invalid_argument("estimate_rate: errors must be finite and nonnegative");
    }
  }
  const std::size_t n = errors.size() - 1;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double x = errors[t];
    const double y = errors[t + 1];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  RateFit fit;
  const double scale = std::max(1.0, sxx);
  if (std::abs(denom) <= 1e-15 * scale * static_cast<double>(n)) {
    // Predictor has no variance (constant sequence): any (rho, psi) on the
    // line rho*e + psi = e fits; report the flat one.
    fit.rho = 0.0;
    fit.psi = sy / static_cast<double>(n);
  } else {
    fit.rho = (static_cast<double>(n) * sxy - sx * sy) / denom;
    fit.psi = (sy - fit.rho * sx) / static_cast<double>(n);
  }
  fit.contracting = fit.rho < 1.0;
  return fit;
}

}  // namespace perdl
