#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>
#include <vector>

#include "iqcc/dressing.hpp"
#include "iqcc/pauli.hpp"
#include "iqcc/qmf.hpp"

namespace iqcc {

/// Assignment of bit-keyed partitions to workers. Key bits are positions
/// into the concatenated (x,z) representation, so the key of a product
/// word is the XOR of the factor keys and dressing-induced routing is a
/// pure XOR by the entangler's own key.
struct PartitionMap {
  std::size_t n_qubits = 0;
  std::vector<std::size_t> partition_bits;
  std::vector<std::size_t> owner;  // partition id -> worker id
  std::size_t n_workers = 1;

  std::size_t n_partitions() const { return owner.size(); }

  void validate() const {
    if (owner.size() != (std::size_t{1} << partition_bits.size()))
      throw std::invalid_argument("PartitionMap: owner table size");
    for (std::size_t pos : partition_bits)
      if (pos >= 2 * n_qubits)
        throw std::invalid_argument("PartitionMap: bit position out of range");
    for (std::size_t w : owner)
      if (w >= n_workers)
        throw std::invalid_argument("PartitionMap: owner out of range");
  }
};

inline std::size_t partition_key(PauliView w, const PartitionMap& map) {
  return detail::gather_key(w, map.n_qubits, map.partition_bits);
}

struct PartitionChoice {
  std::vector<std::size_t> bits;
  /// max shard size over the ideal (total / 2^m).
  double imbalance = 1.0;
};

/// Greedy key-bit selection: each round adds the position that minimizes
/// the largest shard.
inline PartitionChoice choose_partition_bits(const PauliSum& h,
                                             std::size_t m) {
  const std::size_t width = 2 * h.n_qubits();
  if (m > width)
    throw std::invalid_argument(
        "choose_partition_bits: m exceeds representation width");
  PartitionChoice choice;
  std::vector<std::size_t> keys(h.size(), 0);
  for (std::size_t round = 0; round < m; ++round) {
    std::size_t best_pos = width;
    std::size_t best_max = std::numeric_limits<std::size_t>::max();
    for (std::size_t pos = 0; pos < width; ++pos) {
      if (std::find(choice.bits.begin(), choice.bits.end(), pos) !=
          choice.bits.end())
        continue;
      std::vector<std::size_t> counts(std::size_t{2} << round, 0);
      for (std::size_t i = 0; i < h.size(); ++i) {
        PauliView w = h.word(i);
        bool bit;
        if (pos < h.n_qubits())
          bit = (w.x[pos / kBlockBits] >> (pos % kBlockBits)) & 1;
        else
          bit = (w.z[(pos - h.n_qubits()) / kBlockBits] >>
                 ((pos - h.n_qubits()) % kBlockBits)) &
                1;
        ++counts[keys[i] | (std::size_t{bit} << round)];
      }
      std::size_t worst = *std::max_element(counts.begin(), counts.end());
      if (worst < best_max) {
        best_max = worst;
        best_pos = pos;
      }
    }
    choice.bits.push_back(best_pos);
    for (std::size_t i = 0; i < h.size(); ++i) {
      PauliView w = h.word(i);
      bool bit;
      if (best_pos < h.n_qubits())
        bit = (w.x[best_pos / kBlockBits] >> (best_pos % kBlockBits)) & 1;
      else
        bit = (w.z[(best_pos - h.n_qubits()) / kBlockBits] >>
               ((best_pos - h.n_qubits()) % kBlockBits)) &
              1;
      keys[i] |= std::size_t{bit} << round;
    }
  }
  if (!h.empty() && m > 0) {
    std::vector<std::size_t> counts(std::size_t{1} << m, 0);
    for (std::size_t k : keys) ++counts[k];
    double ideal =
        static_cast<double>(h.size()) / static_cast<double>(counts.size());
    choice.imbalance =
        static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
        std::max(1.0, ideal);
  }
  return choice;
}

/// Round-robin ownership over 2^m partitions.
inline PartitionMap make_partition_map(const PauliSum& h, std::size_t m,
                                       std::size_t n_workers) {
  if (n_workers < 1)
    throw std::invalid_argument("make_partition_map: no workers");
  PartitionMap map;
  map.n_qubits = h.n_qubits();
  map.partition_bits = choose_partition_bits(h, m).bits;
  map.n_workers = n_workers;
  map.owner.resize(std::size_t{1} << m);
  for (std::size_t p = 0; p < map.owner.size(); ++p)
    map.owner[p] = p % n_workers;
  return map;
}

/// Disjoint shards whose union is the logical global sum.
struct PartitionedSum {
  std::vector<PauliSum> shards;
  PartitionMap map;

  std::size_t total_terms() const {
    std::size_t n = 0;
    for (const auto& s : shards) n += s.size();
    return n;
  }

  std::vector<std::size_t> worker_loads() const {
    std::vector<std::size_t> loads(map.n_workers, 0);
    for (std::size_t p = 0; p < shards.size(); ++p)
      loads[map.owner[p]] += shards[p].size();
    return loads;
  }

  void validate() const {
    map.validate();
    for (std::size_t p = 0; p < shards.size(); ++p) {
      if (!shards[p].is_canonical())
        throw std::runtime_error("shard not canonical");
      for (std::size_t i = 0; i < shards[p].size(); ++i)
        if (partition_key(shards[p].word(i), map) != p)
          throw std::runtime_error("term in wrong shard");
    }
  }
};

struct MessageRecord {
  std::size_t source = 0;       // partition id
  std::size_t destination = 0;  // partition id
  std::size_t terms = 0;
  std::size_t bytes = 0;
};

/// Append-only record of routed term batches.
struct MessageLog {
  std::vector<MessageRecord> records;

  std::size_t total_terms() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.terms;
    return n;
  }
  std::size_t total_bytes() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.bytes;
    return n;
  }
  void to_csv(std::ostream& out) const {
    out << "source,destination,terms,bytes\n";
    for (const auto& r : records)
      out << r.source << ',' << r.destination << ',' << r.terms << ','
          << r.bytes << '\n';
  }
};

enum class ExecutionMode { kDeterministic, kThreaded };

namespace detail {

/// Runs tasks 0..n-1; threaded mode farms them out, deterministic mode
/// runs in index order. Tasks must touch disjoint state.
template <typename Fn>
inline void run_tasks(std::size_t n, ExecutionMode mode, Fn&& fn) {
  if (mode == ExecutionMode::kDeterministic || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::size_t n_threads = std::min<std::size_t>(hw, n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t)
    pool.emplace_back([&fn, t, n, n_threads] {
      for (std::size_t i = t; i < n; i += n_threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

inline PartitionedSum distribute(const PauliSum& h, PartitionMap map) {
  map.validate();
  if (map.n_qubits != h.n_qubits())
    throw std::invalid_argument("distribute: mismatched qubit counts");
  PartitionedSum ph;
  ph.shards.assign(map.n_partitions(), PauliSum(h.n_qubits()));
  for (std::size_t i = 0; i < h.size(); ++i)
    ph.shards[detail::gather_key(h.word(i), h.n_qubits(),
                                 map.partition_bits)]
        .append(h.word(i), h.coeff(i));
  ph.map = std::move(map);
  return ph;
}

/// Reassembles the logical global sum (deterministic multiway merge; the
/// shards are disjoint so no coefficients combine).
inline PauliSum gather(const PartitionedSum& ph) {
  std::vector<const PauliSum*> streams;
  streams.reserve(ph.shards.size());
  for (const auto& s : ph.shards) streams.push_back(&s);
  return detail::kway_merge_combine(streams, ph.map.n_qubits,
                                    {0.0, true});
}

/// Deterministic sum of per-worker scalars in worker-id order.
inline double reduce_scalar(std::span<const double> locals) {
  double s = 0.0;
  for (double v : locals) s += v;
  return s;
}

/// Partitioned expectation: each worker sums its shards in partition
/// order, then a single reduction combines worker contributions.
inline double parallel_expect(const PartitionedSum& ph,
                              const QmfState& omega,
                              ExecutionMode mode = ExecutionMode::kDeterministic) {
  std::vector<double> worker_local(ph.map.n_workers, 0.0);
  std::vector<std::vector<std::size_t>> owned(ph.map.n_workers);
  for (std::size_t p = 0; p < ph.shards.size(); ++p)
    owned[ph.map.owner[p]].push_back(p);
  detail::run_tasks(ph.map.n_workers, mode, [&](std::size_t w) {
    double local = 0.0;
    for (std::size_t p : owned[w]) local += expect_sum(omega, ph.shards[p]);
    worker_local[w] = local;
  });
  return reduce_scalar(worker_local);
}

namespace detail {

struct ShardStreams {
  PauliSum survivors;             // sorted, cos-scaled where anticommuting
  std::vector<PauliSum> products;  // sorted streams, all to one destination
  std::size_t product_terms = 0;
};

/// Splits one shard's dressing into its stay-local survivor stream and
/// the per-support-bucket sorted product streams.
inline ShardStreams dress_shard(const PauliSum& shard, const DressOp& op,
                                std::span<const std::size_t> positions) {
  const double c = std::cos(op.amplitude), s = std::sin(op.amplitude);
  ShardStreams out{PauliSum(shard.n_qubits()), {}, 0};
  out.survivors.reserve(shard.size());
  std::unordered_map<std::uint64_t, std::size_t> lookup;
  auto buckets = bucket_by_support(shard, op.generator, positions, &lookup);
  std::vector<std::size_t> bucket_product(buckets.size(), PauliSum::npos);
  std::vector<PauliSum> products;
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    if (!buckets[b].anticommuting) continue;
    bucket_product[b] = products.size();
    products.emplace_back(shard.n_qubits());
    products.back().reserve(buckets[b].terms.size());
  }
  // single pass in canonical order keeps every stream sorted
  for (std::size_t i = 0; i < shard.size(); ++i) {
    std::uint64_t key =
        gather_key(shard.word(i), shard.n_qubits(), positions);
    std::size_t b = lookup.at(key);
    if (!buckets[b].anticommuting) {
      out.survivors.append(shard.word(i), shard.coeff(i));
    } else {
      out.survivors.append(shard.word(i), shard.coeff(i) * c);
      if (s != 0.0) {
        products[bucket_product[b]].append_product(
            shard.word(i), op.generator.view(),
            product_scale(shard.coeff(i), s));
        ++out.product_terms;
      }
    }
  }
  for (auto& p : products)
    if (!p.empty()) out.products.push_back(std::move(p));
  return out;
}

}  // namespace detail

struct ParallelDressStats {
  CompressStats compress;
  std::size_t mask = 0;
};

/// Applies one dressing step to the partitioned sum. Survivor terms keep
/// their partition; product terms route from partition i to i ^ mask,
/// where mask is the entangler's key on the partition bits. The result
/// gathers to exactly dress_single + compress of the logical sum.
inline PartitionedSum parallel_dress(
    const PartitionedSum& ph, const DressOp& op, double epsilon,
    std::size_t max_terms = std::numeric_limits<std::size_t>::max(),
    MessageLog* log = nullptr,
    ExecutionMode mode = ExecutionMode::kDeterministic,
    ParallelDressStats* stats = nullptr);

/// Global compression over shards with the same semantics as compress():
/// per-shard epsilon cut, then a coordinated max_terms selection keeping
/// the globally largest |coeff| (canonical order breaking ties, identity
/// always kept).
inline void compress_partitioned(std::vector<PauliSum>& shards,
                                 double epsilon, std::size_t max_terms,
                                 CompressStats* stats = nullptr) {
  if (max_terms < 1)
    throw std::invalid_argument("compress_partitioned: max_terms < 1");
  std::size_t total = 0;
  for (auto& shard : shards) {
    PauliSum kept(shard.n_qubits());
    kept.reserve(shard.size());
    for (std::size_t i = 0; i < shard.size(); ++i) {
      if (is_identity(shard.word(i)) ||
          std::abs(shard.coeff(i)) >= epsilon) {
        kept.append(shard.word(i), shard.coeff(i));
      } else if (stats) {
        ++stats->dropped_terms;
        stats->dropped_weight += std::abs(shard.coeff(i));
      }
    }
    shard = std::move(kept);
    total += shard.size();
  }
  if (total <= max_terms) return;

  struct Ref {
    double mag;
    std::size_t shard, idx;
  };
  std::vector<Ref> refs;
  refs.reserve(total);
  for (std::size_t s = 0; s < shards.size(); ++s)
    for (std::size_t i = 0; i < shards[s].size(); ++i)
      refs.push_back({std::abs(shards[s].coeff(i)), s, i});
  std::sort(refs.begin(), refs.end(), [&](const Ref& a, const Ref& b) {
    if (a.mag != b.mag) return a.mag > b.mag;
    return canonical_less(shards[a.shard].word(a.idx),
                          shards[b.shard].word(b.idx));
  });
  std::vector<std::vector<char>> keep(shards.size());
  for (std::size_t s = 0; s < shards.size(); ++s)
    keep[s].assign(shards[s].size(), 0);
  std::size_t budget = max_terms;
  // identity lives in the all-zero-key shard at index 0 when present
  std::size_t id_shard = PauliSum::npos, id_idx = PauliSum::npos;
  for (std::size_t s = 0; s < shards.size() && id_shard == PauliSum::npos;
       ++s)
    if (!shards[s].empty() && is_identity(shards[s].word(0))) {
      id_shard = s;
      id_idx = 0;
    }
  if (id_shard != PauliSum::npos) {
    keep[id_shard][id_idx] = 1;
    --budget;
  }
  for (const Ref& r : refs) {
    if (budget == 0) break;
    if (r.shard == id_shard && r.idx == id_idx) continue;
    keep[r.shard][r.idx] = 1;
    --budget;
  }
  for (std::size_t s = 0; s < shards.size(); ++s) {
    PauliSum kept(shards[s].n_qubits());
    for (std::size_t i = 0; i < shards[s].size(); ++i) {
      if (keep[s][i]) {
        kept.append(shards[s].word(i), shards[s].coeff(i));
      } else if (stats) {
        ++stats->dropped_terms;
        stats->dropped_weight += std::abs(shards[s].coeff(i));
      }
    }
    shards[s] = std::move(kept);
  }
}

inline PartitionedSum parallel_dress(const PartitionedSum& ph,
                                     const DressOp& op, double epsilon,
                                     std::size_t max_terms,
                                     MessageLog* log, ExecutionMode mode,
                                     ParallelDressStats* stats) {
  if (ph.map.n_qubits != op.generator.n_qubits())
    throw std::invalid_argument("parallel_dress: mismatched qubit counts");
  if (op.generator.is_identity())
    throw std::invalid_argument("parallel_dress: identity generator");
  const std::size_t n_parts = ph.shards.size();
  const std::size_t mask = partition_key(op.generator.view(), ph.map);
  auto positions =
      detail::support_positions(op.generator.view(), ph.map.n_qubits);

  std::vector<detail::ShardStreams> streams(n_parts);
  detail::run_tasks(n_parts, mode, [&](std::size_t p) {
    streams[p] = detail::dress_shard(ph.shards[p], op, positions);
  });

  if (log) {
    for (std::size_t p = 0; p < n_parts; ++p) {
      if (mask == 0 || streams[p].product_terms == 0) continue;
      std::size_t bytes =
          streams[p].product_terms *
          (sizeof(Complex) + 2 * ph.shards[p].blocks() * sizeof(Block));
      log->records.push_back(
          {p, p ^ mask, streams[p].product_terms, bytes});
    }
  }

  PartitionedSum out;
  out.map = ph.map;
  out.shards.assign(n_parts, PauliSum(ph.map.n_qubits));
  detail::run_tasks(n_parts, mode, [&](std::size_t d) {
    std::vector<const PauliSum*> inbound;
    inbound.push_back(&streams[d].survivors);
    std::size_t src = d ^ mask;
    if (src < n_parts)
      for (const auto& prod : streams[src].products)
        inbound.push_back(&prod);
    MergeOptions opts;
    opts.check_hermitian = false;
    out.shards[d] =
        detail::kway_merge_combine(inbound, ph.map.n_qubits, opts);
  });

  CompressStats cstats;
  if (epsilon > 0.0 || out.total_terms() > max_terms)
    compress_partitioned(out.shards, epsilon, max_terms, &cstats);
  if (stats) {
    stats->compress = cstats;
    stats->mask = mask;
  }
  return out;
}

/// Moves whole partitions from overloaded to underloaded workers until
/// the max/min load ratio drops under the threshold or no single move
/// helps. Shard contents are untouched; only ownership changes.
inline PartitionMap rebalance(PartitionedSum& ph, double threshold) {
  if (!(threshold > 1.0))
    throw std::invalid_argument("rebalance: threshold must exceed 1");
  PartitionMap map = ph.map;
  auto loads = [&]() {
    std::vector<std::size_t> l(map.n_workers, 0);
    for (std::size_t p = 0; p < ph.shards.size(); ++p)
      l[map.owner[p]] += ph.shards[p].size();
    return l;
  };
  for (;;) {
    std::vector<std::size_t> l = loads();
    auto max_it = std::max_element(l.begin(), l.end());
    auto min_it = std::min_element(l.begin(), l.end());
    double ratio = *min_it == 0
                       ? std::numeric_limits<double>::infinity()
                       : static_cast<double>(*max_it) /
                             static_cast<double>(*min_it);
    if (*max_it == 0 || ratio <= threshold) break;
    std::size_t donor = max_it - l.begin();
    std::size_t receiver = min_it - l.begin();
    // the largest partition whose move strictly shrinks the gap
    std::size_t best = PauliSum::npos, best_size = 0;
    for (std::size_t p = 0; p < ph.shards.size(); ++p) {
      if (map.owner[p] != donor) continue;
      std::size_t sz = ph.shards[p].size();
      if (sz == 0) continue;
      if (*min_it + sz < *max_it && sz > best_size) {
        best = p;
        best_size = sz;
      }
    }
    if (best == PauliSum::npos) break;  // no move helps
    map.owner[best] = receiver;
  }
  ph.map = map;
  return map;
}

}  // namespace iqcc
