#include "perdl/types.hpp"

#include <algorithm>
#include <string>

namespace perdl {

namespace detail {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

}  // namespace detail

Dictionary::Dictionary(Eigen::MatrixXd atoms, bool unit_norm)
    : atoms_(std::move(atoms)), unit_norm_(unit_norm) {
  if (atoms_.rows() < 1) {
    throw std::invalid_argument("Dictionary: dimension must be >= 1");
  }
  detail::require_finite(atoms_, "Dictionary");
  if (unit_norm_) {
    for (Eigen::Index j = 0; j < atoms_.cols(); ++j) {
      if (std::abs(atoms_.col(j).norm() - 1.0) > kUnitNormTol) {
        throw std::invalid_argument("Dictionary: column " + std::to_string(j) +
                                    " is not unit-norm (norm = " +
                                    std::to_string(atoms_.col(j).norm()) + ")");
      }
    }
  }
}

Dictionary Dictionary::normalized(Eigen::MatrixXd atoms) {
  detail::require_finite(atoms, "Dictionary::normalized");
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    double n = atoms.col(j).norm();
    if (n < 1e-300) {
      throw std::invalid_argument("Dictionary::normalized: column " +
                                  std::to_string(j) + " has zero norm");
    }
    atoms.col(j) /= n;
  }
  return Dictionary(std::move(atoms), true);
}

Dictionary Dictionary::empty(int dim) {
  return Dictionary(Eigen::MatrixXd(dim, 0), true);
}

SignedPermutation::SignedPermutation(std::vector<int> perm,
                                     std::vector<int> signs)
    : perm_(std::move(perm)), signs_(std::move(signs)) {
  if (perm_.size() != signs_.size()) {
    throw std::invalid_argument("SignedPermutation: perm/sign length mismatch");
  }
  const int r = static_cast<int>(perm_.size());
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  for (int k = 0; k < r; ++k) {
    int j = perm_[static_cast<std::size_t>(k)];
    if (j < 0 || j >= r || seen[static_cast<std::size_t>(j)]) {
      throw std::invalid_argument("SignedPermutation: not a bijection on [r]");
    }
    seen[static_cast<std::size_t>(j)] = true;
    int s = signs_[static_cast<std::size_t>(k)];
    if (s != 1 && s != -1) {
      throw std::invalid_argument("SignedPermutation: signs must be +/-1");
    }
  }
}

SignedPermutation SignedPermutation::identity(int r) {
  std::vector<int> perm(static_cast<std::size_t>(r));
  for (int k = 0; k < r; ++k) perm[static_cast<std::size_t>(k)] = k;
  return SignedPermutation(std::move(perm),
                           std::vector<int>(static_cast<std::size_t>(r), 1));
}

SignedPermutation SignedPermutation::inverse() const {
  const int r = size();
  std::vector<int> perm(static_cast<std::size_t>(r));
  std::vector<int> signs(static_cast<std::size_t>(r));
  for (int k = 0; k < r; ++k) {
    perm[static_cast<std::size_t>(source_of(k))] = k;
    signs[static_cast<std::size_t>(source_of(k))] = sign_of(k);
  }
  return SignedPermutation(std::move(perm), std::move(signs));
}

SignedPermutation SignedPermutation::compose(
    const SignedPermutation& inner) const {
  if (size() != inner.size()) {
    throw std::invalid_argument("SignedPermutation::compose: size mismatch");
  }
  const int r = size();
  std::vector<int> perm(static_cast<std::size_t>(r));
  std::vector<int> signs(static_cast<std::size_t>(r));
  for (int k = 0; k < r; ++k) {
    perm[static_cast<std::size_t>(k)] = source_of(inner.source_of(k));
    signs[static_cast<std::size_t>(k)] =
        inner.sign_of(k) * sign_of(inner.source_of(k));
  }
  return SignedPermutation(std::move(perm), std::move(signs));
}

Eigen::MatrixXd SignedPermutation::apply(const Eigen::MatrixXd& m) const {
  if (static_cast<int>(m.cols()) != size()) {
    throw std::invalid_argument("SignedPermutation::apply: column mismatch");
  }
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (int k = 0; k < size(); ++k) {
    out.col(k) = sign_of(k) * m.col(source_of(k));
  }
  return out;
}

Dictionary SignedPermutation::apply(const Dictionary& d) const {
  return Dictionary(apply(d.atoms()), d.unit_norm());
}

Eigen::MatrixXd SignedPermutation::matrix() const {
  const int r = size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(r, r);
  for (int k = 0; k < r; ++k) {
    m(source_of(k), k) = sign_of(k);
  }
  return m;
}

PartitionedDictionary::PartitionedDictionary(Dictionary global,
                                             Dictionary local)
    : global_part(std::move(global)), local_part(std::move(local)) {
  if (global_part.dim() != local_part.dim()) {
    throw std::invalid_argument(
        "PartitionedDictionary: global/local dimension mismatch");
  }
}

int PartitionedDictionary::dim() const { return global_part.dim(); }

Dictionary PartitionedDictionary::concatenated() const {
  Eigen::MatrixXd cat(dim(), num_atoms());
  cat << global_part.atoms(), local_part.atoms();
  return Dictionary(std::move(cat),
                    global_part.unit_norm() && local_part.unit_norm());
}

SparseCode::SparseCode(Eigen::MatrixXd values) : values_(std::move(values)) {
  detail::require_finite(values_, "SparseCode");
}

double SparseCode::sparsity() const {
  if (values_.size() == 0) return 0.0;
  Eigen::Index nnz = 0;
  for (Eigen::Index j = 0; j < values_.cols(); ++j) {
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (values_(i, j) != 0.0) ++nnz;
    }
  }
  return static_cast<double>(nnz) / static_cast<double>(values_.size());
}

}  // namespace perdl
