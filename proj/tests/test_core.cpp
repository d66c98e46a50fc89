#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <perdl/distances.hpp>
#include <perdl/rng.hpp>
#include <perdl/synthgen.hpp>
#include <perdl/types.hpp>

#include "oracles.hpp"

#include <cmath>

using namespace perdl;

namespace {

Dictionary unit_dict(int d, int r, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return random_unit_dictionary(d, r, rng);
}

}  // namespace

TEST_CASE("vector_d2 basics") {
  Eigen::Vector2d a(1, 0), b(-1, 0), c(0, 1);
  CHECK(vector_d2(a, b) == doctest::Approx(0.0));
  CHECK(vector_d2(a, c) == doctest::Approx(std::sqrt(2.0)));

  Eigen::Vector2d p(0.8, 0.6), q(0.6, 0.8);
  // Two-case evaluation by hand.
  const double expect = std::min((p - q).norm(), (p + q).norm());
  CHECK(vector_d2(p, q) == doctest::Approx(expect));
  CHECK(vector_d2(p, q) == doctest::Approx(0.2828427124746190));

  Eigen::Vector3d wrong(1, 0, 0);
  CHECK_THROWS_AS(vector_d2(a, wrong), std::invalid_argument);
  Eigen::Vector2d bad(std::nan(""), 0);
  CHECK_THROWS_AS(vector_d2(a, bad), std::invalid_argument);
}

TEST_CASE("vector_d2 symmetry and range on unit vectors") {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd a = gaussian_matrix(5, 1, rng).col(0).normalized();
    Eigen::VectorXd b = gaussian_matrix(5, 1, rng).col(0).normalized();
    const double ab = vector_d2(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= std::sqrt(2.0) + 1e-12);
    CHECK(ab == doctest::Approx(vector_d2(b, a)).epsilon(1e-12));
    CHECK(ab == doctest::Approx(vector_d2(-a, b)).epsilon(1e-12));
  }
}

TEST_CASE("dist_12 identifies symmetry-group members") {
  // Swap columns of I2 and negate the first result column.
  Eigen::Matrix2d m;
  m << 0, 1, -1, 0;  // columns: (0,-1), (1,0)
  Dictionary d2x2(Eigen::Matrix2d::Identity(), true);
  Dictionary swapped(m, true);
  auto res = dist_12(swapped, d2x2);
  CHECK(res.value == doctest::Approx(0.0));
  // Exactly the swap, with the negated column's sign restored.
  CHECK(res.pi.perm() == std::vector<int>{1, 0});
  CHECK(res.pi.signs() == std::vector<int>{1, -1});
  // Verify the returned permutation actually maps one onto the other.
  auto residuals = dist_2_columns(swapped, d2x2, res.pi);
  for (double r : residuals) CHECK(r == doctest::Approx(0.0));

  Dictionary d = unit_dict(4, 3, 11);
  auto self = dist_12(d, d);
  CHECK(self.value == doctest::Approx(0.0));
  CHECK(self.pi == SignedPermutation::identity(3));
}

TEST_CASE("dist_12 matches exhaustive enumeration for small r") {
  SplitMix64 seeds(100);
  for (int trial = 0; trial < 40; ++trial) {
    const int r = 2 + trial % 3;  // 2..4
    Dictionary d1 = unit_dict(4, r, seeds.next_u64());
    Dictionary d2 = unit_dict(4, r, seeds.next_u64());
    const double expect = oracle::exhaustive_dist_12(d1, d2);
    auto got = dist_12(d1, d2);
    CHECK(std::abs(got.value - expect) <= 1e-12);
    // The reported value must be realized by the returned permutation.
    auto residuals = dist_2_columns(d1, d2, got.pi);
    double worst = 0.0;
    for (double v : residuals) worst = std::max(worst, v);
    CHECK(worst == doctest::Approx(got.value).epsilon(1e-12));
  }
}

TEST_CASE("dist_12 symmetry-group invariance under random signed permutations") {
  SplitMix64 rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    Dictionary d = unit_dict(5, 4, rng.next_u64());
    SignedPermutation pi = random_signed_permutation(4, rng);
    CHECK(dist_12(pi.apply(d), d).value == doctest::Approx(0.0));
  }
}

TEST_CASE("dist_12 tie-breaking is deterministic") {
  // Two copies of the same atom: every assignment and both signs tie at
  // zero, so the lexicographically smallest permutation with +1 signs wins.
  Eigen::MatrixXd m(3, 2);
  m.col(0) = Eigen::Vector3d::Unit(1);
  m.col(1) = Eigen::Vector3d::Unit(1);
  Dictionary d(m, true);
  auto res = dist_12(d, d);
  CHECK(res.value == 0.0);
  CHECK(res.pi.perm() == std::vector<int>{0, 1});
  CHECK(res.pi.signs() == std::vector<int>{1, 1});

  // Orthogonal columns against themselves negated: distances tie between
  // the +/- pairing only on the diagonal; signs resolve to the minimizing
  // -1, never flipped back by the tie rule.
  Dictionary eye(Eigen::MatrixXd::Identity(3, 3), true);
  Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(3, 3);
  auto flipped = dist_12(Dictionary(neg, true), eye);
  CHECK(flipped.value == 0.0);
  CHECK(flipped.pi.perm() == std::vector<int>{0, 1, 2});
  CHECK(flipped.pi.signs() == std::vector<int>{-1, -1, -1});
}

TEST_CASE("dist_12 triangle inequality") {
  SplitMix64 rng(303);
  for (int trial = 0; trial < 200; ++trial) {
    Dictionary a = unit_dict(5, 4, rng.next_u64());
    Dictionary b = unit_dict(5, 4, rng.next_u64());
    Dictionary c = unit_dict(5, 4, rng.next_u64());
    const double ab = dist_12(a, b).value;
    const double ac = dist_12(a, c).value;
    const double cb = dist_12(c, b).value;
    CHECK(ab <= ac + cb + 1e-9);
  }
}

TEST_CASE("dist_2_columns") {
  Dictionary d = unit_dict(4, 3, 21);
  auto id = SignedPermutation::identity(3);

  SUBCASE("zero for equal dictionaries") {
    for (double r : dist_2_columns(d, d, id)) CHECK(r == doctest::Approx(0.0));
  }

  SUBCASE("single perturbed column") {
    Eigen::MatrixXd atoms = d.atoms();
    Eigen::VectorXd col = atoms.col(1);
    // Orthogonal unit direction against column 1.
    Eigen::VectorXd other = Eigen::VectorXd::Unit(4, 0);
    Eigen::VectorXd tangent = (other - col.dot(other) * col).normalized();
    atoms.col(1) = (col + 0.1 * tangent).normalized();
    Dictionary perturbed = Dictionary(atoms, true);
    auto residuals = dist_2_columns(perturbed, d, id);
    const double expect = (atoms.col(1) - col).norm();
    CHECK(residuals[0] == doctest::Approx(0.0));
    CHECK(residuals[1] == doctest::Approx(expect));
    CHECK(residuals[2] == doctest::Approx(0.0));
  }

  SUBCASE("max matches dist_12 under the optimal permutation") {
    Dictionary e = unit_dict(4, 3, 22);
    auto res = dist_12(d, e);
    auto residuals = dist_2_columns(d, e, res.pi);
    double worst = 0.0;
    for (double v : residuals) worst = std::max(worst, v);
    CHECK(worst == doctest::Approx(res.value).epsilon(1e-12));
  }

  SUBCASE("invalid permutation rejected") {
    CHECK_THROWS_AS(dist_2_columns(d, d, SignedPermutation::identity(2)),
                    std::invalid_argument);
  }
}

TEST_CASE("incoherence") {
  SUBCASE("orthogonal dictionary gives zero") {
    Dictionary d(Eigen::MatrixXd::Identity(4, 4), true);
    CHECK(incoherence(d) == doctest::Approx(0.0));
  }

  SUBCASE("repeated column hits sqrt(d)") {
    Eigen::MatrixXd m(4, 2);
    m.col(0) = Eigen::VectorXd::Unit(4, 1);
    m.col(1) = Eigen::VectorXd::Unit(4, 1);
    CHECK(incoherence(Dictionary(m, true)) == doctest::Approx(2.0));
  }

  SUBCASE("matches the Gram-matrix computation") {
    Dictionary d = unit_dict(3, 3, 33);
    Eigen::MatrixXd gram = d.atoms().transpose() * d.atoms();
    double off = 0.0;
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        if (j != k) off = std::max(off, std::abs(gram(j, k)));
      }
    }
    CHECK(incoherence(d) == doctest::Approx(std::sqrt(3.0) * off).epsilon(1e-12));
  }

  SUBCASE("single atom returns zero") {
    CHECK(incoherence(unit_dict(4, 1, 1)) == 0.0);
  }

  SUBCASE("invariant under signed permutation") {
    SplitMix64 rng(77);
    Dictionary d = unit_dict(5, 4, 9);
    SignedPermutation pi = random_signed_permutation(4, rng);
    CHECK(incoherence(pi.apply(d)) == doctest::Approx(incoherence(d)).epsilon(1e-12));
  }
}

TEST_CASE("estimate_beta") {
  SUBCASE("shared atom collapses to zero") {
    Eigen::MatrixXd a(3, 2), b(3, 2);
    a.col(0) = Eigen::Vector3d(1, 0, 0);
    a.col(1) = Eigen::Vector3d(0, 1, 0);
    b.col(0) = Eigen::Vector3d(1, 0, 0);  // identical atom across clients
    b.col(1) = Eigen::Vector3d(0, 0, 1);
    CHECK(estimate_beta({Dictionary(a, true), Dictionary(b, true)}) ==
          doctest::Approx(0.0));
  }

  SUBCASE("cross-client orthogonal atoms give sqrt(2)") {
    Eigen::MatrixXd a(4, 2), b(4, 2);
    a.col(0) = Eigen::Vector4d(1, 0, 0, 0);
    a.col(1) = Eigen::Vector4d(0, 1, 0, 0);
    b.col(0) = Eigen::Vector4d(0, 0, 1, 0);
    b.col(1) = Eigen::Vector4d(0, 0, 0, 1);
    CHECK(estimate_beta({Dictionary(a, true), Dictionary(b, true)}) ==
          doctest::Approx(std::sqrt(2.0)));
  }

  SUBCASE("matches the nested min/max oracle") {
    SynthConfig cfg;
    cfg.num_clients = 3;
    cfg.dim = 8;
    cfg.atoms_per_client = 4;
    cfg.global_atoms = 2;
    cfg.seed = 99;
    auto [global, locals] = generate_dictionaries(cfg);
    (void)global;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& source : locals) {
      for (int j = 0; j < source.num_atoms(); ++j) {
        Eigen::VectorXd v = source.atoms().col(j);
        double worst = 0.0;
        for (const auto& d : locals) {
          double nearest = std::numeric_limits<double>::infinity();
          for (int k = 0; k < d.num_atoms(); ++k) {
            nearest = std::min(nearest, vector_d2(d.atoms().col(k), v));
          }
          worst = std::max(worst, nearest);
        }
        best = std::min(best, worst);
      }
    }
    CHECK(estimate_beta(locals) == doctest::Approx(best).epsilon(1e-12));
  }

  SUBCASE("empty local dictionary rejected") {
    CHECK_THROWS_AS(
        estimate_beta({unit_dict(3, 2, 5), Dictionary::empty(3)}),
        std::invalid_argument);
  }

  SUBCASE("random candidates can only tighten the bound") {
    std::vector<Dictionary> locals{unit_dict(6, 3, 71), unit_dict(6, 3, 72),
                                   unit_dict(6, 3, 73)};
    const double atoms_only = estimate_beta(locals);
    const double with_random = estimate_beta(locals, 500, 99);
    CHECK(with_random <= atoms_only + 1e-15);
    CHECK(with_random >= 0.0);
  }
}

TEST_CASE("dist_2_matrix exhaustive variant") {
  Dictionary d = unit_dict(4, 3, 41);
  CHECK(dist_2_matrix(d, d) == doctest::Approx(0.0));
  SplitMix64 rng(42);
  SignedPermutation pi = random_signed_permutation(3, rng);
  CHECK(dist_2_matrix(pi.apply(d), d) == doctest::Approx(0.0).epsilon(1e-12));
  Dictionary big = unit_dict(4, 9, 43);
  CHECK_THROWS_AS(dist_2_matrix(big, big), std::invalid_argument);
}

TEST_CASE("SignedPermutation round trips") {
  SplitMix64 rng(88);
  for (int trial = 0; trial < 20; ++trial) {
    const int r = 1 + rng.next_int(6);
    SignedPermutation pi = random_signed_permutation(r, rng);
    Dictionary d = unit_dict(5, r, rng.next_u64());
    Dictionary back = pi.inverse().apply(pi.apply(d));
    CHECK((back.atoms() - d.atoms()).norm() == doctest::Approx(0.0));
    // compose(inverse) is the identity
    auto composed = pi.compose(pi.inverse());
    CHECK(composed == SignedPermutation::identity(r));
    // matrix form agrees with apply
    Eigen::MatrixXd lifted = d.atoms() * pi.matrix();
    CHECK((lifted - pi.apply(d).atoms()).norm() == doctest::Approx(0.0));
  }
  CHECK_THROWS_AS(SignedPermutation({0, 0}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(SignedPermutation({0, 1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("align_subset agrees with dist_12 on square instances") {
  SplitMix64 rng(501);
  for (int trial = 0; trial < 30; ++trial) {
    Dictionary d1 = unit_dict(5, 4, rng.next_u64());
    Dictionary d2 = unit_dict(5, 4, rng.next_u64());
    // Both solve the same bottleneck problem when no atoms are left over.
    CHECK(align_subset(d2, d1).value ==
          doctest::Approx(dist_12(d1, d2).value).epsilon(1e-15));
  }
}

TEST_CASE("composition is application order") {
  SplitMix64 rng(502);
  for (int trial = 0; trial < 20; ++trial) {
    Dictionary d = unit_dict(4, 5, rng.next_u64());
    SignedPermutation outer = random_signed_permutation(5, rng);
    SignedPermutation inner = random_signed_permutation(5, rng);
    Dictionary via_compose = outer.compose(inner).apply(d);
    Dictionary stepwise = inner.apply(outer.apply(d));
    CHECK((via_compose.atoms() - stepwise.atoms()).norm() ==
          doctest::Approx(0.0));
  }
}

TEST_CASE("align_subset finds embedded references") {
  SplitMix64 rng(404);
  Dictionary big = unit_dict(6, 5, 405);
  // Reference = two of big's atoms, sign-flipped and reordered.
  Eigen::MatrixXd ref(6, 2);
  ref.col(0) = -big.atoms().col(3);
  ref.col(1) = big.atoms().col(1);
  auto got = align_subset(Dictionary(ref, true), big);
  CHECK(got.value == doctest::Approx(0.0));
  CHECK(got.indices == std::vector<int>{3, 1});
  CHECK(got.signs == std::vector<int>{-1, 1});
  (void)rng;
}

TEST_CASE("Dictionary validation") {
  Eigen::MatrixXd m(3, 2);
  m.setZero();
  m(0, 0) = 1.0;
  m(1, 1) = 2.0;  // not unit
  CHECK_THROWS_AS(Dictionary(m, true), std::invalid_argument);
  CHECK_NOTHROW(Dictionary(m, false));
  CHECK(Dictionary::normalized(m).atoms().col(1).norm() == doctest::Approx(1.0));
  Eigen::MatrixXd zero_col(3, 1);
  zero_col.setZero();
  CHECK_THROWS_AS(Dictionary::normalized(zero_col), std::invalid_argument);
}
