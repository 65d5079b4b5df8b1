#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "helpers.hpp"
#include "iqcc/dis.hpp"
#include "iqcc/oracle.hpp"

using namespace iqcc;

namespace {

/// Random sum whose terms all carry an even number of Y letters, the
/// structure of real-matrix (molecular) Hamiltonians.
PauliSum random_even_y_sum(std::mt19937_64& rng, std::size_t n,
                           std::size_t max_terms) {
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  std::vector<WeightedTerm> terms;
  while (terms.size() < max_terms) {
    PauliWord w = testutil::random_word(rng, n);
    if (y_parity_odd(w)) continue;
    terms.push_back({coeff(rng), w});
  }
  return PauliSum::from_terms(n, std::move(terms));
}

/// All odd-Y X/Y-words on a flip set, by brute force.
std::vector<PauliWord> all_odd_y_words(std::span<const Block> flip,
                                       std::size_t n) {
  std::vector<std::size_t> pos;
  for (std::size_t j = 0; j < n; ++j)
    if ((flip[j / kBlockBits] >> (j % kBlockBits)) & 1) pos.push_back(j);
  std::vector<PauliWord> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pos.size());
       ++mask) {
    if (std::popcount(mask) % 2 == 0) continue;
    PauliWord w(n);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      w.set_x(pos[i]);
      if ((mask >> i) & 1) w.set_z(pos[i]);
    }
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

TEST_CASE("group_by_flip collects diagonal terms into one group", "[dis]") {
  std::vector<WeightedTerm> terms = {
      {0.5, PauliWord::from_string("ZI")},
      {0.25, PauliWord::from_string("IZ")},
  };
  auto h = PauliSum::from_terms(2, terms);
  auto groups = group_by_flip(h);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].flip_bits[0] == 0);
  CHECK(groups[0].member_terms.size() == 2);
}

TEST_CASE("group_by_flip separates flip patterns", "[dis]") {
  std::vector<WeightedTerm> terms = {
      {0.5, PauliWord::from_string("XX")},
      {0.25, PauliWord::from_string("YY")},
      {0.1, PauliWord::from_string("ZI")},
  };
  auto h = PauliSum::from_terms(2, terms);
  auto groups = group_by_flip(h);
  REQUIRE(groups.size() == 2);
  std::size_t total = 0;
  for (auto& g : groups) total += g.member_terms.size();
  CHECK(total == h.size());
  // the {11} group holds XX and YY
  bool found = false;
  for (auto& g : groups)
    if (g.flip_bits[0] == 0b11) {
      found = true;
      CHECK(g.member_terms.size() == 2);
    }
  CHECK(found);
}

TEST_CASE("group_by_flip matches a hash-based oracle on random sums",
          "[dis]") {
  std::mt19937_64 rng(401);
  for (int trial = 0; trial < 20; ++trial) {
    auto h = testutil::random_sum(rng, 8, 120);
    auto groups = group_by_flip(h);
    std::map<std::vector<Block>, std::size_t> expected;
    for (std::size_t i = 0; i < h.size(); ++i) {
      PauliView w = h.word(i);
      expected[{w.x.begin(), w.x.end()}]++;
    }
    REQUIRE(groups.size() == expected.size());
    std::size_t covered = 0;
    for (auto& g : groups) {
      REQUIRE(expected.count(g.flip_bits) == 1);
      CHECK(expected[g.flip_bits] == g.member_terms.size());
      for (std::size_t i : g.member_terms) {
        PauliView w = h.word(i);
        CHECK(std::equal(w.x.begin(), w.x.end(), g.flip_bits.begin()));
      }
      covered += g.member_terms.size();
    }
    CHECK(covered == h.size());
  }
}

TEST_CASE("gradient of X0 against Y0 at the north pole is one", "[dis]") {
  PauliSum h(1);
  h.append(PauliWord::from_string("X"), 1.0);
  QmfState omega(1);  // theta = 0
  CHECK(gradient(h, omega, PauliWord::from_string("Y")) ==
        Catch::Approx(1.0));
}

TEST_CASE("even-Y candidates have zero gradient for even-Y Hamiltonians",
          "[dis]") {
  std::mt19937_64 rng(409);
  for (int trial = 0; trial < 20; ++trial) {
    auto h = random_even_y_sum(rng, 3, 25);
    std::vector<bool> occ(3);
    for (int j = 0; j < 3; ++j) occ[j] = rng() & 1;
    QmfState omega = hf_reference(occ);
    PauliWord p = testutil::random_word(rng, 3, false);
    if (!y_parity_odd(p))
      CHECK(std::abs(gradient(h, omega, p)) < 1e-12);
  }
}

TEST_CASE("gradient equals the finite-difference dressed energy slope",
          "[dis]") {
  std::mt19937_64 rng(419);
  for (int trial = 0; trial < 25; ++trial) {
    auto h = testutil::random_sum(rng, 5, 40);
    QmfState omega = testutil::random_qmf(rng, 5);
    PauliWord p = testutil::random_word(rng, 5, false);
    double g = gradient(h, omega, p);
    const double step = 1e-5;
    auto energy_at = [&](double tau) {
      Ansatz a;
      a.push(p, tau);
      oracle::DenseState psi = oracle::ansatz_state(omega, a);
      return oracle::expectation(h, psi).real();
    };
    double fd = (energy_at(step) - energy_at(-step)) / (2 * step);
    double scale = std::max({1.0, std::abs(fd), std::abs(g)});
    CHECK(std::abs(g - fd) / scale < 1e-6);
  }
}

TEST_CASE("dis_candidates excludes even-Y words on a two-qubit coupler",
          "[dis]") {
  PauliSum h(2);
  h.append(PauliWord::from_string("XX"), 0.7);
  std::mt19937_64 rng(421);
  QmfState omega = hf_reference({true, false});
  auto picks = dis_candidates(h, omega, 10);
  REQUIRE_FALSE(picks.empty());
  for (const auto& pick : picks) {
    CHECK(y_parity_odd(pick.word));
    CHECK(pick.word != PauliWord::from_string("YY"));
    bool is_yx = pick.word == PauliWord::from_string("YX");
    bool is_xy = pick.word == PauliWord::from_string("XY");
    CHECK((is_yx || is_xy));
  }
}

TEST_CASE("diagonal Hamiltonians have an empty DIS", "[dis]") {
  std::vector<WeightedTerm> terms = {
      {0.5, PauliWord::from_string("ZZ")},
      {0.25, PauliWord::from_string("IZ")},
      {0.1, PauliWord(2)},
  };
  auto h = PauliSum::from_terms(2, terms);
  std::mt19937_64 rng(431);
  QmfState omega = testutil::random_qmf(rng, 2);
  CHECK(dis_candidates(h, omega, 5).empty());
}

TEST_CASE("parity exclusion holds exhaustively on all 2-qubit words",
          "[dis]") {
  std::mt19937_64 rng(433);
  for (int trial = 0; trial < 10; ++trial) {
    auto h = random_even_y_sum(rng, 2, 12);
    QmfState omega = hf_reference({static_cast<bool>(rng() & 1),
                                   static_cast<bool>(rng() & 1)});
    const char letters[] = {'I', 'X', 'Y', 'Z'};
    for (char a : letters)
      for (char b : letters) {
        PauliWord w = PauliWord::from_string(std::string{a, b});
        if (w.is_identity()) continue;
        double g = gradient(h, omega, w);
        if (!y_parity_odd(w)) CHECK(std::abs(g) < 1e-12);
      }
    auto picks = dis_candidates(h, omega, 16);
    for (const auto& pick : picks) CHECK(y_parity_odd(pick.word));
  }
}

TEST_CASE("emitted gradients attain the flip-set maximum", "[dis]") {
  std::mt19937_64 rng(439);
  for (int trial = 0; trial < 10; ++trial) {
    auto h = testutil::random_sum(rng, 6, 60);
    std::vector<bool> occ(6);
    for (int j = 0; j < 6; ++j) occ[j] = rng() & 1;
    QmfState omega = hf_reference(occ);
    auto picks = dis_candidates(h, omega, 1000);
    auto groups = group_by_flip(h);
    for (const auto& pick : picks) {
      // locate the matching flip group
      const FlipGroup* group = nullptr;
      for (const auto& g : groups) {
        PauliView w = pick.word.view();
        if (std::equal(w.x.begin(), w.x.end(), g.flip_bits.begin(),
                       g.flip_bits.end())) {
          group = &g;
          break;
        }
      }
      REQUIRE(group != nullptr);
      double best = 0.0;
      for (const auto& cand : all_odd_y_words(group->flip_bits, 6))
        best = std::max(best, std::abs(gradient(h, omega, cand)));
      CHECK(std::abs(pick.gradient) == Catch::Approx(best).margin(1e-12));
      // both DIS conditions hold per item
      CHECK(y_parity_odd(pick.word));
    }
  }
}

TEST_CASE("ranking is deterministic and capped at top_k", "[dis]") {
  std::mt19937_64 rng(443);
  auto h = testutil::random_sum(rng, 6, 80);
  QmfState omega = testutil::random_qmf(rng, 6);
  auto a = dis_candidates(h, omega, 4);
  auto b = dis_candidates(h, omega, 4);
  REQUIRE(a.size() == b.size());
  CHECK(a.size() <= 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].word == b[i].word);
    CHECK(a[i].gradient == b[i].gradient);
  }
  for (std::size_t i = 0; i + 1 < a.size(); ++i)
    CHECK(std::abs(a[i].gradient) >= std::abs(a[i + 1].gradient));
  // DIS size is bounded by the number of flip groups
  auto all = dis_candidates(h, omega, 100000);
  CHECK(all.size() <= group_by_flip(h).size());
}

TEST_CASE("pole-restricted screening agrees with the full gradient",
          "[dis]") {
  std::mt19937_64 rng(449);
  for (int trial = 0; trial < 10; ++trial) {
    auto h = testutil::random_sum(rng, 5, 50);
    std::vector<bool> occ(5);
    for (int j = 0; j < 5; ++j) occ[j] = rng() & 1;
    QmfState omega = hf_reference(occ);
    auto picks = dis_candidates(h, omega, 50);
    for (const auto& pick : picks)
      CHECK(pick.gradient ==
            Catch::Approx(gradient(h, omega, pick.word)).margin(1e-12));
  }
}

TEST_CASE("seeded tie-break only reorders equal magnitudes", "[dis]") {
  // two flip groups constructed to carry equal gradient magnitudes
  std::vector<WeightedTerm> terms = {
      {0.5, PauliWord::from_string("XXII")},
      {0.5, PauliWord::from_string("IIXX")},
  };
  auto h = PauliSum::from_terms(4, terms);
  QmfState omega = hf_reference({true, false, true, false});
  DisOptions opts;
  auto plain = dis_candidates(h, omega, 2, opts);
  REQUIRE(plain.size() == 2);
  CHECK(std::abs(plain[0].gradient) ==
        Catch::Approx(std::abs(plain[1].gradient)));
  opts.tie_break_seed = 7;
  auto shuffled = dis_candidates(h, omega, 2, opts);
  REQUIRE(shuffled.size() == 2);
  // same set of words either way
  auto same_set = (plain[0].word == shuffled[0].word &&
                   plain[1].word == shuffled[1].word) ||
                  (plain[0].word == shuffled[1].word &&
                   plain[1].word == shuffled[0].word);
  CHECK(same_set);
}
