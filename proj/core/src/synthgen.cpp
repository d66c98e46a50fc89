#include "perdl/synthgen.hpp"

#include <Eigen/QR>

#include <cmath>
#include <string>

namespace perdl {

namespace {

// Stream tags for deriving per-purpose child seeds from a master seed.
constexpr std::uint64_t kStreamGlobalDict = 0x01;
constexpr std::uint64_t kStreamLocalDictBase = 0x1000;
constexpr std::uint64_t kStreamCodesBase = 0x2000;

// Thin QR with the R diagonal forced positive, so the factor is a
// deterministic function of the input.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() *
                      Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd r_fact =
      qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (r_fact(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_clients < 1) throw std::invalid_argument("SynthConfig: num_clients >= 1 required");
  if (dim < 1) throw std::invalid_argument("SynthConfig: dim >= 1 required");
  if (atoms_per_client < 1) throw std::invalid_argument("SynthConfig: atoms_per_client >= 1 required");
  if (global_atoms < 0 || global_atoms > atoms_per_client) {
    throw std::invalid_argument("SynthConfig: need 0 <= global_atoms <= atoms_per_client");
  }
  if (samples_per_client < 1) throw std::invalid_argument("SynthConfig: samples_per_client >= 1 required");
  if (!(bernoulli_p > 0.0) || bernoulli_p > 1.0) {
    throw std::invalid_argument("SynthConfig: bernoulli_p must be in (0, 1]");
  }
  if (truncation < 0.0) throw std::invalid_argument("SynthConfig: truncation >= 0 required");
}

PartitionedDictionary GroundTruth::client_partition(int i) const {
  return PartitionedDictionary(global_dict, local_dicts.at(static_cast<std::size_t>(i)));
}

Dictionary GroundTruth::client_dictionary(int i) const {
  return client_partition(i).concatenated();
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, SplitMix64& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = rng.next_gaussian();
    }
  }
  return m;
}

Dictionary random_orthogonal_dictionary(int dim, int r, SplitMix64& rng) {
  if (r > dim) {
    throw std::invalid_argument("random_orthogonal_dictionary: r > dim");
  }
  return Dictionary(orthonormalize(gaussian_matrix(dim, r, rng)), true);
}

Dictionary random_unit_dictionary(int dim, int r, SplitMix64& rng) {
  return Dictionary::normalized(gaussian_matrix(dim, r, rng));
}

SignedPermutation random_signed_permutation(int r, SplitMix64& rng) {
  std::vector<int> perm(static_cast<std::size_t>(r));
  for (int k = 0; k < r; ++k) perm[static_cast<std::size_t>(k)] = k;
  for (int k = r - 1; k > 0; --k) {
    int j = rng.next_int(k + 1);
    std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<int> signs(static_cast<std::size_t>(r));
  for (int k = 0; k < r; ++k) signs[static_cast<std::size_t>(k)] = rng.next_bool() ? 1 : -1;
  return SignedPermutation(std::move(perm), std::move(signs));
}

std::pair<Dictionary, std::vector<Dictionary>> generate_dictionaries(
    const SynthConfig& cfg) {
  cfg.validate();
  if (cfg.atoms_per_client > cfg.dim) {
    throw std::invalid_argument(
        "generate_dictionaries: orthogonal construction needs atoms_per_client <= dim");
  }
  SplitMix64 global_rng(derive_seed(cfg.seed, kStreamGlobalDict));
  Eigen::MatrixXd global =
      cfg.global_atoms > 0
          ? orthonormalize(gaussian_matrix(cfg.dim, cfg.global_atoms, global_rng))
          : Eigen::MatrixXd(cfg.dim, 0);

  const int r_local = cfg.atoms_per_client - cfg.global_atoms;
  std::vector<Dictionary> locals;
  locals.reserve(static_cast<std::size_t>(cfg.num_clients));
  for (int i = 0; i < cfg.num_clients; ++i) {
    if (r_local == 0) {
      locals.push_back(Dictionary::empty(cfg.dim));
      continue;
    }
    SplitMix64 rng(derive_seed(cfg.seed, kStreamLocalDictBase + static_cast<std::uint64_t>(i)));
    Eigen::MatrixXd raw = gaussian_matrix(cfg.dim, r_local, rng);
    // Complete the shared block to an orthonormal client basis: project the
    // global span out, then orthonormalize the remainder.
    if (cfg.global_atoms > 0) {
      raw -= global * (global.transpose() * raw);
    }
    locals.push_back(Dictionary(orthonormalize(raw), true));
  }
  return {cfg.global_atoms > 0 ? Dictionary(std::move(global), true)
                               : Dictionary::empty(cfg.dim),
          std::move(locals)};
}

SparseCode generate_codes(const SynthConfig& cfg, int r, int client) {
  cfg.validate();
  if (r < 1) throw std::invalid_argument("generate_codes: r >= 1 required");
  SplitMix64 rng(derive_seed(cfg.seed, kStreamCodesBase + static_cast<std::uint64_t>(client)));
  Eigen::MatrixXd x(r, cfg.samples_per_client);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      // Draw both variates unconditionally so the stream layout does not
      // depend on the Bernoulli outcomes.
      const bool keep = rng.next_double() < cfg.bernoulli_p;
      const double g = rng.next_gaussian();
      double v = keep ? g : 0.0;
      if (v != 0.0 && std::abs(v) < cfg.truncation) {
        v = cfg.truncation * (v > 0.0 ? 1.0 : -1.0);
      }
      x(i, j) = v;
    }
  }
  return SparseCode(std::move(x));
}

GroundTruth generate_ground_truth(const SynthConfig& cfg) {
  return generate_ground_truth(
      cfg, std::vector<int>(static_cast<std::size_t>(cfg.num_clients),
                            cfg.samples_per_client));
}

GroundTruth generate_ground_truth(const SynthConfig& cfg,
                                  const std::vector<int>& samples_per_client) {
  cfg.validate();
  if (static_cast<int>(samples_per_client.size()) != cfg.num_clients) {
    throw std::invalid_argument(
        "generate_ground_truth: samples_per_client size mismatch");
  }
  GroundTruth gt;
  auto [global, locals] = generate_dictionaries(cfg);
  gt.global_dict = std::move(global);
  gt.local_dicts = std::move(locals);
  gt.codes.reserve(static_cast<std::size_t>(cfg.num_clients));
  gt.data.reserve(static_cast<std::size_t>(cfg.num_clients));
  for (int i = 0; i < cfg.num_clients; ++i) {
    SynthConfig per_client = cfg;
    per_client.samples_per_client = samples_per_client[static_cast<std::size_t>(i)];
    if (per_client.samples_per_client < 1) {
      throw std::invalid_argument("generate_ground_truth: client " +
                                  std::to_string(i) + " has no samples");
    }
    SparseCode code = generate_codes(per_client, cfg.atoms_per_client, i);
    Eigen::MatrixXd dict = gt.client_dictionary(i).atoms();
    gt.data.push_back(dict * code.values());
    gt.codes.push_back(std::move(code));
  }
  return gt;
}

Perturbation perturb_dictionary(const Dictionary& d, double eps,
                                std::uint64_t seed) {
  if (eps < 0.0) throw std::invalid_argument("perturb_dictionary: eps >= 0 required");
  SplitMix64 rng(seed);
  Eigen::MatrixXd atoms = d.atoms();
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    if (eps == 0.0) break;
    Eigen::VectorXd col = atoms.col(j);
    Eigen::VectorXd tangent;
    double norm = 0.0;
    do {
      Eigen::VectorXd w(d.dim());
      for (int i = 0; i < d.dim(); ++i) w(i) = rng.next_gaussian();
      tangent = w - col.dot(w) * col / col.squaredNorm();
      norm = tangent.norm();
    } while (norm < 1e-12);
    // After renormalization the column moves by at most eps, so the
    // un-permuted pairing certifies dist_12 <= eps.
    atoms.col(j) = (col + (eps / norm) * tangent).normalized();
  }
  SignedPermutation pi = random_signed_permutation(d.num_atoms(), rng);
  return {Dictionary(pi.apply(atoms), d.unit_norm()), pi};
}

}  // namespace perdl
