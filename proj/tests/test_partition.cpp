#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "helpers.hpp"
#include "iqcc/partition.hpp"

using namespace iqcc;

namespace {

PartitionMap fixed_map(std::size_t n_qubits,
                       std::vector<std::size_t> bits,
                       std::size_t n_workers) {
  PartitionMap map;
  map.n_qubits = n_qubits;
  map.partition_bits = std::move(bits);
  map.n_workers = n_workers;
  map.owner.resize(std::size_t{1} << map.partition_bits.size());
  for (std::size_t p = 0; p < map.owner.size(); ++p)
    map.owner[p] = p % n_workers;
  return map;
}

PauliSum serial_pipeline(const PauliSum& h, const DressOp& op,
                         double epsilon, std::size_t max_terms) {
  PauliSum d = dress_single(h, op);
  if (epsilon > 0.0 || d.size() > max_terms)
    d = compress(d, epsilon, max_terms);
  return d;
}

}  // namespace

TEST_CASE("partition_key gathers the selected bits", "[partition]") {
  PartitionMap map = fixed_map(2, {0, 1}, 1);  // both x-plane bits
  CHECK(partition_key(PauliWord::from_string("ZZ").view(), map) == 0);
  CHECK(partition_key(PauliWord::from_string("XI").view(), map) == 1);
  CHECK(partition_key(PauliWord::from_string("IY").view(), map) == 2);
  CHECK(partition_key(PauliWord::from_string("XX").view(), map) == 3);

  // all 16 two-qubit words fall into 4 equal classes
  std::map<std::size_t, int> classes;
  const char letters[] = {'I', 'X', 'Y', 'Z'};
  for (char a : letters)
    for (char b : letters)
      classes[partition_key(PauliWord::from_string(std::string{a, b}).view(),
                            map)]++;
  REQUIRE(classes.size() == 4);
  for (auto& [key, count] : classes) CHECK(count == 4);
}

TEST_CASE("partition keys route products by XOR", "[partition]") {
  std::mt19937_64 rng(601);
  PartitionMap map = fixed_map(6, {0, 3, 7, 10}, 1);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = testutil::random_word(rng, 6);
    auto q = testutil::random_word(rng, 6);
    auto prod = multiply(p, q);
    CHECK(partition_key(prod.word.view(), map) ==
          (partition_key(p.view(), map) ^ partition_key(q.view(), map)));
  }
}

TEST_CASE("choose_partition_bits prefers the evenly splitting bit",
          "[partition]") {
  CHECK(choose_partition_bits(PauliSum(3), 0).bits.empty());

  std::vector<WeightedTerm> terms = {
      {1.0, PauliWord::from_string("XII")},
      {1.0, PauliWord::from_string("XZI")},
      {1.0, PauliWord::from_string("XIZ")},
      {1.0, PauliWord::from_string("XZZ")},
      {1.0, PauliWord::from_string("IZI")},
      {1.0, PauliWord::from_string("IIZ")},
      {1.0, PauliWord::from_string("IZZ")},
      {1.0, PauliWord::from_string("ZZI")},
  };
  auto h = PauliSum::from_terms(3, terms);
  PartitionChoice choice = choose_partition_bits(h, 1);
  REQUIRE(choice.bits.size() == 1);
  CHECK(choice.bits[0] == 0);  // x bit of qubit 0 splits 4/4
  CHECK(choice.imbalance == Catch::Approx(1.0));

  CHECK_THROWS_AS(choose_partition_bits(h, 7), std::invalid_argument);
}

TEST_CASE("greedy bits beat the median random choice", "[partition]") {
  std::mt19937_64 rng(607);
  for (int trial = 0; trial < 5; ++trial) {
    auto h = testutil::random_sum(rng, 8, 150);
    const std::size_t m = 3;
    PartitionChoice greedy = choose_partition_bits(h, m);
    std::vector<double> random_imbalances;
    for (int sample = 0; sample < 100; ++sample) {
      std::vector<std::size_t> all(2 * h.n_qubits());
      std::iota(all.begin(), all.end(), 0);
      std::shuffle(all.begin(), all.end(), rng);
      std::vector<std::size_t> counts(std::size_t{1} << m, 0);
      for (std::size_t i = 0; i < h.size(); ++i)
        ++counts[detail::gather_key(h.word(i), h.n_qubits(),
                                    std::span(all.data(), m))];
      double worst =
          static_cast<double>(*std::max_element(counts.begin(), counts.end()));
      random_imbalances.push_back(worst /
                                  (h.size() / double(counts.size())));
    }
    std::nth_element(random_imbalances.begin(),
                     random_imbalances.begin() + 50,
                     random_imbalances.end());
    CHECK(greedy.imbalance <= random_imbalances[50] + 1e-12);
  }
}

TEST_CASE("distribute then gather is the identity", "[partition]") {
  std::mt19937_64 rng(613);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 3 + trial % 5;
    auto h = testutil::random_sum(rng, n, 20 * n);
    PartitionedSum ph = distribute(h, make_partition_map(h, 3, 4));
    CHECK_NOTHROW(ph.validate());
    CHECK(gather(ph) == h);
  }

  PauliSum empty(4);
  PartitionedSum pe = distribute(empty, fixed_map(4, {0, 1}, 2));
  for (const auto& s : pe.shards) CHECK(s.empty());

  PauliSum single(4);
  single.append(PauliWord::from_string("XYZI"), 0.5);
  PartitionedSum ps = distribute(single, fixed_map(4, {0, 1}, 2));
  std::size_t nonempty = 0;
  for (const auto& s : ps.shards) nonempty += s.empty() ? 0 : 1;
  CHECK(nonempty == 1);
}

TEST_CASE("local entanglers move nothing between partitions",
          "[partition]") {
  std::mt19937_64 rng(617);
  auto h = testutil::random_sum(rng, 5, 60);
  // partition on x bits of qubits 0 and 1; a Z-only generator never
  // touches them
  PartitionedSum ph = distribute(h, fixed_map(5, {0, 1}, 2));
  DressOp op{PauliWord::from_string("ZZIII"), 0.8};
  MessageLog log;
  ParallelDressStats stats;
  PartitionedSum out = parallel_dress(ph, op, 0.0,
                                      std::numeric_limits<std::size_t>::max(),
                                      &log, ExecutionMode::kDeterministic,
                                      &stats);
  CHECK(stats.mask == 0);
  CHECK(log.records.empty());
  CHECK_NOTHROW(out.validate());
  PauliSum expect = serial_pipeline(h, op, 0.0, h.size() * 3);
  CHECK(gather(out) == expect);
}

TEST_CASE("partition-bit-flipping entanglers form a perfect matching",
          "[partition]") {
  std::mt19937_64 rng(619);
  for (int trial = 0; trial < 20; ++trial) {
    auto h = testutil::random_sum(rng, 5, 80);
    PartitionedSum ph = distribute(h, fixed_map(5, {0, 2, 6}, 4));
    DressOp op{testutil::random_word(rng, 5, false), 1.1};
    std::size_t mask = partition_key(op.generator.view(), ph.map);
    MessageLog log;
    PartitionedSum out = parallel_dress(
        ph, op, 0.0, std::numeric_limits<std::size_t>::max(), &log,
        ExecutionMode::kDeterministic, nullptr);
    CHECK_NOTHROW(out.validate());
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& r : log.records) {
      CHECK(r.destination == (r.source ^ mask));
      CHECK(r.terms > 0);
      CHECK(seen.insert({r.source, r.destination}).second);  // one per pair
    }
    if (mask == 0) CHECK(log.records.empty());
  }
}

TEST_CASE("parallel dressing equals the serial pipeline for all worker "
          "counts",
          "[partition]") {
  std::mt19937_64 rng(631);
  std::uniform_real_distribution<double> amp(-3.0, 3.0);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 3 + trial % 4;
    auto h = testutil::random_sum(rng, n, 25 * n);
    DressOp op{testutil::random_word(rng, n, false), amp(rng)};
    double eps = (trial % 3 == 0) ? 1e-3 : 0.0;
    std::size_t max_terms = (trial % 4 == 0) ? 40 : 100000;
    PauliSum serial = serial_pipeline(h, op, eps, max_terms);
    for (std::size_t workers : {1, 2, 4, 8}) {
      std::size_t m = workers == 1 ? 2 : 3;
      auto map = make_partition_map(h, m, workers);
      PartitionedSum ph = distribute(h, map);
      PartitionedSum out = parallel_dress(ph, op, eps, max_terms, nullptr,
                                          ExecutionMode::kDeterministic,
                                          nullptr);
      PauliSum gathered = gather(out);
      REQUIRE(gathered.size() == serial.size());
      for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(words_equal(gathered.word(i), serial.word(i)));
        CHECK(std::abs(gathered.coeff(i) - serial.coeff(i)) <=
              1e-12 * std::max(1.0, std::abs(serial.coeff(i))));
      }
    }
  }
}

TEST_CASE("threaded execution reproduces deterministic execution",
          "[partition]") {
  std::mt19937_64 rng(641);
  auto h = testutil::random_sum(rng, 6, 150);
  auto map = make_partition_map(h, 3, 4);
  DressOp op{testutil::random_word(rng, 6, false), 0.9};
  PartitionedSum det = parallel_dress(distribute(h, map), op, 1e-10, 500,
                                      nullptr,
                                      ExecutionMode::kDeterministic, nullptr);
  PartitionedSum thr = parallel_dress(distribute(h, map), op, 1e-10, 500,
                                      nullptr, ExecutionMode::kThreaded,
                                      nullptr);
  REQUIRE(det.shards.size() == thr.shards.size());
  for (std::size_t p = 0; p < det.shards.size(); ++p)
    CHECK(det.shards[p] == thr.shards[p]);
}

TEST_CASE("deterministic mode is bit-reproducible including the log",
          "[partition]") {
  std::mt19937_64 rng(643);
  auto h = testutil::random_sum(rng, 5, 90);
  auto map = make_partition_map(h, 3, 4);
  DressOp op{testutil::random_word(rng, 5, false), -0.7};
  MessageLog log_a, log_b;
  PartitionedSum a = parallel_dress(distribute(h, map), op, 1e-9, 300,
                                    &log_a, ExecutionMode::kDeterministic,
                                    nullptr);
  PartitionedSum b = parallel_dress(distribute(h, map), op, 1e-9, 300,
                                    &log_b, ExecutionMode::kDeterministic,
                                    nullptr);
  REQUIRE(a.shards.size() == b.shards.size());
  for (std::size_t p = 0; p < a.shards.size(); ++p)
    CHECK(a.shards[p] == b.shards[p]);
  REQUIRE(log_a.records.size() == log_b.records.size());
  for (std::size_t i = 0; i < log_a.records.size(); ++i) {
    CHECK(log_a.records[i].source == log_b.records[i].source);
    CHECK(log_a.records[i].terms == log_b.records[i].terms);
  }
}

TEST_CASE("reduce_scalar sums in worker order", "[partition]") {
  std::vector<double> one = {3.25};
  CHECK(reduce_scalar(one) == 3.25);
  std::vector<double> cancel = {1.5, -1.5, 2.0, -2.0};
  CHECK(reduce_scalar(cancel) == 0.0);
}

TEST_CASE("partitioned energies match the serial expectation",
          "[partition]") {
  std::mt19937_64 rng(647);
  for (int trial = 0; trial < 20; ++trial) {
    auto h = testutil::random_sum(rng, 6, 100);
    QmfState omega = testutil::random_qmf(rng, 6);
    double serial = expect_sum(omega, h);
    for (std::size_t workers : {1, 2, 4}) {
      PartitionedSum ph = distribute(h, make_partition_map(h, 3, workers));
      double par = parallel_expect(ph, omega);
      CHECK(std::abs(par - serial) <= 1e-12 * std::max(1.0, std::abs(serial)));
      double thr = parallel_expect(ph, omega, ExecutionMode::kThreaded);
      CHECK(thr == par);
    }
  }
}

TEST_CASE("rebalance moves partitions off the overloaded worker",
          "[partition]") {
  std::mt19937_64 rng(653);
  auto h = testutil::random_sum(rng, 6, 160);
  PartitionMap map = fixed_map(6, {0, 1, 2}, 4);
  // pile everything onto worker 0
  for (auto& o : map.owner) o = 0;
  PartitionedSum ph = distribute(h, map);
  double before = parallel_expect(ph, QmfState(6));
  PartitionMap balanced = rebalance(ph, 1.5);
  auto loads = ph.worker_loads();
  double ratio = static_cast<double>(
                     *std::max_element(loads.begin(), loads.end())) /
                 std::max<std::size_t>(
                     1, *std::min_element(loads.begin(), loads.end()));
  CHECK(ratio <= 1.5);
  // ownership changes only; the math is untouched
  CHECK(parallel_expect(ph, QmfState(6)) == before);
  CHECK_NOTHROW(ph.validate());
  (void)balanced;
}

TEST_CASE("rebalance leaves balanced systems alone", "[partition]") {
  std::mt19937_64 rng(659);
  auto h = testutil::random_sum(rng, 6, 120);
  PartitionedSum ph = distribute(h, make_partition_map(h, 3, 4));
  auto before = ph.map.owner;
  auto loads = ph.worker_loads();
  double ratio = static_cast<double>(
                     *std::max_element(loads.begin(), loads.end())) /
                 std::max<std::size_t>(
                     1, *std::min_element(loads.begin(), loads.end()));
  PartitionMap map = rebalance(ph, std::max(2.0, ratio + 0.5));
  CHECK(map.owner == before);
  CHECK_THROWS_AS(rebalance(ph, 1.0), std::invalid_argument);
}
