#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace perdl {

/// Tolerance used when validating unit-norm atoms.
inline constexpr double kUnitNormTol = 1e-9;

/// A d-by-r matrix whose columns ("atoms") sparsely combine into data
/// samples. When `unit_norm` is set, every column has Euclidean norm 1
/// within kUnitNormTol. r = 0 is allowed so that a partition side may be
/// empty; operations that need atoms check for themselves.
class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(Eigen::MatrixXd atoms, bool unit_norm = true);

  /// Rescales every column to unit norm and returns the result.
  static Dictionary normalized(Eigen::MatrixXd atoms);

  /// d-by-0 dictionary (empty partition side).
  static Dictionary empty(int dim);

  int dim() const { return static_cast<int>(atoms_.rows()); }
  int num_atoms() const { return static_cast<int>(atoms_.cols()); }
  bool is_empty() const { return atoms_.cols() == 0; }
  bool unit_norm() const { return unit_norm_; }

  const Eigen::MatrixXd& atoms() const { return atoms_; }
  Eigen::VectorXd atom(int j) const { return atoms_.col(j); }

 private:
  Eigen::MatrixXd atoms_;
  bool unit_norm_ = false;
};

/// Permutation of column indices with a sign per column; the symmetry
/// group of dictionary-learning solutions. Column k of D*Pi equals
/// sign_of(k) * column source_of(k) of D.
class SignedPermutation {
 public:
  SignedPermutation() = default;
  SignedPermutation(std::vector<int> perm, std::vector<int> signs);

  static SignedPermutation identity(int r);

  int size() const { return static_cast<int>(perm_.size()); }
  int source_of(int k) const { return perm_[static_cast<std::size_t>(k)]; }
  int sign_of(int k) const { return signs_[static_cast<std::size_t>(k)]; }

  const std::vector<int>& perm() const { return perm_; }
  const std::vector<int>& signs() const { return signs_; }

  SignedPermutation inverse() const;

  /// this after `inner`: apply(D, compose(inner)) == apply(apply(D, *this), inner)
  SignedPermutation compose(const SignedPermutation& inner) const;

  Dictionary apply(const Dictionary& d) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const;

  /// Dense r-by-r signed permutation matrix.
  Eigen::MatrixXd matrix() const;

  bool operator==(const SignedPermutation& other) const {
    return perm_ == other.perm_ && signs_ == other.signs_;
  }

 private:
  std::vector<int> perm_;
  std::vector<int> signs_;
};

/// Global block shared across clients next to a client-specific local
/// block. Either side may be empty; both share the same row dimension.
struct PartitionedDictionary {
  Dictionary global_part;
  Dictionary local_part;

  PartitionedDictionary() = default;
  PartitionedDictionary(Dictionary global, Dictionary local);

  int dim() const;
  int num_global() const { return global_part.num_atoms(); }
  int num_local() const { return local_part.num_atoms(); }
  int num_atoms() const { return num_global() + num_local(); }

  Dictionary concatenated() const;
};

/// Coefficient matrix (r-by-n) expressing samples as combinations of atoms.
class SparseCode {
 public:
  SparseCode() = default;
  explicit SparseCode(Eigen::MatrixXd values);

  const Eigen::MatrixXd& values() const { return values_; }
  int num_atoms() const { return static_cast<int>(values_.rows()); }
  int num_samples() const { return static_cast<int>(values_.cols()); }

  /// Fraction of nonzero entries.
  double sparsity() const;

 private:
  Eigen::MatrixXd values_;
};

namespace detail {
void require_finite(const Eigen::MatrixXd& m, const char* what);
}

}  // namespace perdl
