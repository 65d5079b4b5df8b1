#include <Eigen/Eigenvalues>
#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "iqcc/dressing.hpp"
#include "iqcc/io.hpp"

using namespace iqcc;
using testutil::Mat;

namespace {

/// Dense oracle for e^{i tau/2 P} H e^{-i tau/2 P}; P^2 = I makes the
/// exponential cos(tau/2) I + i sin(tau/2) P.
Mat dense_dressed(const PauliSum& h, const DressOp& op) {
  Eigen::Index dim = Eigen::Index{1} << h.n_qubits();
  Mat p = testutil::word_matrix(op.generator);
  Mat u = std::cos(op.amplitude / 2) * Mat::Identity(dim, dim) +
          Complex{0, 1} * std::sin(op.amplitude / 2) * p;
  return u * testutil::sum_matrix(h) * u.adjoint();
}

/// The same conjugation through an eigendecomposition-based matrix
/// exponential, fully independent of the closed form.
Mat dense_dressed_expm(const PauliSum& h, const DressOp& op) {
  Mat p = testutil::word_matrix(op.generator);
  Eigen::SelfAdjointEigenSolver<Mat> es(p);
  Mat u = es.eigenvectors() *
          (Complex{0, 0.5 * op.amplitude} * es.eigenvalues().array())
              .exp()
              .matrix()
              .asDiagonal() *
          es.eigenvectors().adjoint();
  return u * testutil::sum_matrix(h) * u.adjoint();
}

double max_coeff_delta(const PauliSum& a, const PauliSum& b) {
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j >= b.size() ||
        (i < a.size() && canonical_compare(a.word(i), b.word(j)) < 0)) {
      d = std::max(d, std::abs(a.coeff(i)));
      ++i;
    } else if (i >= a.size() ||
               canonical_compare(a.word(i), b.word(j)) > 0) {
      d = std::max(d, std::abs(b.coeff(j)));
      ++j;
    } else {
      d = std::max(d, std::abs(a.coeff(i) - b.coeff(j)));
      ++i;
      ++j;
    }
  }
  return d;
}

}  // namespace

TEST_CASE("zero amplitude leaves the Hamiltonian unchanged", "[dressing]") {
  std::mt19937_64 rng(501);
  auto h = testutil::random_sum(rng, 4, 30);
  DressOp op{testutil::random_word(rng, 4, false), 0.0};
  CHECK(dress_single(h, op) == h);
  CHECK(sortless_dress(h, op) == h);
}

TEST_CASE("rotating Z0 by pi/2 about Y0 lands on -X0", "[dressing]") {
  PauliSum h(1);
  h.append(PauliWord::from_string("Z"), 1.0);
  DressOp op{PauliWord::from_string("Y"), std::numbers::pi / 2};
  PauliSum d = dress_single(h, op);
  REQUIRE(d.size() == 1);
  CHECK(words_equal(d.word(0), PauliWord::from_string("X").view()));
  CHECK(d.coeff(0).real() == Catch::Approx(-1.0));
  CHECK(testutil::max_abs_diff(testutil::sum_matrix(d),
                               dense_dressed(h, op)) < 1e-14);
  // and against the eigendecomposition matrix exponential
  CHECK(testutil::max_abs_diff(testutil::sum_matrix(d),
                               dense_dressed_expm(h, op)) < 1e-13);
}

TEST_CASE("dress_single matches the dense conjugation oracle",
          "[dressing]") {
  std::mt19937_64 rng(503);
  std::uniform_real_distribution<double> amp(-3.5, 3.5);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t n = 2 + trial % 5;
    auto h = testutil::random_sum(rng, n, 10 + 8 * n);
    DressOp op{testutil::random_word(rng, n, false), amp(rng)};
    PauliSum d = dress_single(h, op);
    CHECK(testutil::max_abs_diff(testutil::sum_matrix(d),
                                 dense_dressed(h, op)) < 1e-10);
    CHECK_NOTHROW(d.assert_hermitian());
    CHECK(d.is_canonical());
  }
}

TEST_CASE("dressing preserves the spectrum", "[dressing]") {
  std::mt19937_64 rng(509);
  std::uniform_real_distribution<double> amp(-3.0, 3.0);
  for (int trial = 0; trial < 15; ++trial) {
    std::size_t n = 2 + trial % 4;
    auto h = testutil::random_sum(rng, n, 8 * n);
    DressOp op{testutil::random_word(rng, n, false), amp(rng)};
    PauliSum d = dress_single(h, op);
    Eigen::SelfAdjointEigenSolver<Mat> before(testutil::sum_matrix(h));
    Eigen::SelfAdjointEigenSolver<Mat> after(testutil::sum_matrix(d));
    CHECK((before.eigenvalues() - after.eigenvalues())
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
}

TEST_CASE("amplitudes are 2pi periodic", "[dressing]") {
  std::mt19937_64 rng(521);
  std::uniform_real_distribution<double> amp(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    auto h = testutil::random_sum(rng, 4, 25);
    PauliWord p = testutil::random_word(rng, 4, false);
    double tau = amp(rng);
    PauliSum a = dress_single(h, {p, tau});
    PauliSum b = dress_single(h, {p, tau + 2 * std::numbers::pi});
    CHECK(max_coeff_delta(a, b) < 1e-14);
  }
}

TEST_CASE("dressing by (P,tau) then (P,-tau) is the identity",
          "[dressing]") {
  std::mt19937_64 rng(523);
  std::uniform_real_distribution<double> amp(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    auto h = testutil::random_sum(rng, 5, 40);
    PauliWord p = testutil::random_word(rng, 5, false);
    double tau = amp(rng);
    PauliSum fwd = dress_single(h, {p, tau});
    PauliSum back = dress_single(fwd, {p, -tau});
    CHECK(max_coeff_delta(back, h) < 1e-12);
  }
}

TEST_CASE("empty ansatz and commuting-generator order invariance",
          "[dressing]") {
  std::mt19937_64 rng(541);
  auto h = testutil::random_sum(rng, 3, 20);
  CHECK(dress_sequence(h, Ansatz{}, 0.0) == h);

  // XX and ZZ on the same pair commute
  Ansatz fwd, rev;
  fwd.push(PauliWord::from_string("XXI"), 0.6);
  fwd.push(PauliWord::from_string("ZZI"), -1.1);
  rev.push(PauliWord::from_string("ZZI"), -1.1);
  rev.push(PauliWord::from_string("XXI"), 0.6);
  PauliSum a = dress_sequence(h, fwd, 0.0);
  PauliSum b = dress_sequence(h, rev, 0.0);
  CHECK(max_coeff_delta(a, b) < 1e-12);
  CHECK(testutil::max_abs_diff(testutil::sum_matrix(a),
                               testutil::sum_matrix(b)) < 1e-12);
}

TEST_CASE("the dressed H2 Hamiltonian keeps its spectrum", "[dressing]") {
  IntegralSet ints = read_fcidump(std::string(IQCC_DATA_DIR) +
                                  "/h2_sto3g.fcidump");
  PauliSum h = jordan_wigner(ints);
  std::mt19937_64 rng(547);
  std::uniform_real_distribution<double> amp(-1.5, 1.5);
  Ansatz ansatz;
  for (int k = 0; k < 3; ++k)
    ansatz.push(testutil::random_word(rng, 4, false), amp(rng));
  PauliSum d = dress_sequence(h, ansatz, 0.0);
  Eigen::SelfAdjointEigenSolver<Mat> before(testutil::sum_matrix(h));
  Eigen::SelfAdjointEigenSolver<Mat> after(testutil::sum_matrix(d));
  CHECK((before.eigenvalues() - after.eigenvalues()).cwiseAbs().maxCoeff() <
        1e-9);
}

TEST_CASE("sortless_dress reproduces dress_single exactly", "[dressing]") {
  std::mt19937_64 rng(557);
  std::uniform_real_distribution<double> amp(-3.0, 3.0);
  for (int trial = 0; trial < 120; ++trial) {
    std::size_t n = 2 + trial % 7;
    auto h = testutil::random_sum(rng, n, 12 * n);
    DressOp op{testutil::random_word(rng, n, false), amp(rng)};
    PauliSum conventional = dress_single(h, op);
    SortlessStats stats;
    PauliSum sortless = sortless_dress(h, op, {}, &stats);
    REQUIRE(sortless.size() == conventional.size());
    for (std::size_t i = 0; i < sortless.size(); ++i) {
      CHECK(words_equal(sortless.word(i), conventional.word(i)));
      CHECK(std::abs(sortless.coeff(i) - conventional.coeff(i)) <=
            1e-14 * std::abs(conventional.coeff(i)));
    }
    CHECK(stats.new_stream_sorts == 0);
    CHECK(sortless.is_canonical());
  }
}

TEST_CASE("sortless_dress degenerates to one merge when every term agrees "
          "on the entangler support",
          "[dressing]") {
  // all terms are identity on qubit 2 where the entangler acts
  std::vector<WeightedTerm> terms = {
      {0.5, PauliWord::from_string("ZII")},
      {0.25, PauliWord::from_string("XXI")},
      {0.1, PauliWord::from_string("YXI")},
  };
  auto h = PauliSum::from_terms(3, terms);
  DressOp op{PauliWord::from_string("IIX"), 0.7};
  SortlessStats stats;
  PauliSum d = sortless_dress(h, op, {}, &stats);
  CHECK(stats.n_buckets == 1);
  CHECK(stats.new_stream_sorts == 0);
  CHECK(max_coeff_delta(d, dress_single(h, op)) == 0.0);
}

TEST_CASE("growth_split counts commuting structure", "[dressing]") {
  // all-diagonal sum against X0: anything containing Z0 anticommutes
  std::vector<WeightedTerm> terms = {
      {0.5, PauliWord::from_string("ZI")},
      {0.25, PauliWord::from_string("ZZ")},
      {0.1, PauliWord::from_string("IZ")},
      {0.05, PauliWord(2)},
  };
  auto h = PauliSum::from_terms(2, terms);
  GrowthSplit split = growth_split(h, PauliWord::from_string("XI"));
  CHECK(split.n_anticommuting == 2);
  CHECK(split.n_commuting == 2);

  // disjoint support: everything commutes and dressing adds nothing
  DressOp op{PauliWord::from_string("IX"), 0.9};
  GrowthSplit disjoint = growth_split(h, op.generator);
  // IZ and ZZ anticommute with IX; construct a truly disjoint case
  std::vector<WeightedTerm> zonly = {{0.5, PauliWord::from_string("ZI")}};
  auto hz = PauliSum::from_terms(2, zonly);
  GrowthSplit dj = growth_split(hz, op.generator);
  CHECK(dj.n_anticommuting == 0);
  CHECK(dress_single(hz, op).size() == hz.size());
  (void)disjoint;
}

TEST_CASE("dressed term count obeys the growth bound", "[dressing]") {
  std::mt19937_64 rng(563);
  std::uniform_real_distribution<double> amp(-3.0, 3.0);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 2 + trial % 5;
    auto h = testutil::random_sum(rng, n, 10 * n);
    DressOp op{testutil::random_word(rng, n, false), amp(rng)};
    GrowthSplit split = growth_split(h, op.generator);
    PauliSum d = dress_single(h, op, {0.0, true});
    CHECK(d.size() <= split.bound());
  }
}

TEST_CASE("identity generators are rejected", "[dressing]") {
  PauliSum h(2);
  h.append(PauliWord::from_string("XI"), 1.0);
  CHECK_THROWS_AS(dress_single(h, {PauliWord(2), 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(sortless_dress(h, {PauliWord(2), 0.5}),
                  std::invalid_argument);
}
