#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <unordered_map>
#include <vector>

#include "iqcc/pauli.hpp"

namespace iqcc {

/// One entangler of the QCC unitary: exp(-i tau/2 * generator).
struct DressOp {
  PauliWord generator;
  double amplitude = 0.0;  // radians
};

/// Ordered entangler list with amplitudes; entangler 0 is applied to the
/// Hamiltonian first (innermost conjugation).
struct Ansatz {
  std::vector<PauliWord> entanglers;
  std::vector<double> tau;

  std::size_t size() const { return entanglers.size(); }
  void push(PauliWord p, double amplitude) {
    entanglers.push_back(std::move(p));
    tau.push_back(amplitude);
  }
};

struct GrowthSplit {
  std::size_t n_commuting = 0;
  std::size_t n_anticommuting = 0;
  /// Worst-case dressed term count.
  std::size_t bound() const { return n_commuting + 2 * n_anticommuting; }
};

/// Counts terms of h commuting / anticommuting with p.
inline GrowthSplit growth_split(const PauliSum& h, PauliView p) {
  GrowthSplit g;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (commutes(h.word(i), p))
      ++g.n_commuting;
    else
      ++g.n_anticommuting;
  }
  return g;
}

namespace detail {

/// Scale for the new term born from an anticommuting term c*T:
/// the dressed pair is cos(tau)*c*T + (-i sin(tau) c) * (T*P), and T*P
/// itself carries a phase i^t supplied by append_product.
inline Complex product_scale(Complex c, double sin_tau) {
  return c * sin_tau * Complex{0.0, -1.0};
}

/// Merges canonically sorted streams, combining coefficients of shared
/// words in stream-index order. Every output term passes the drop rule.
inline PauliSum kway_merge_combine(
    const std::vector<const PauliSum*>& streams, std::size_t n_qubits,
    const MergeOptions& opts = {}, std::uint64_t* comparisons = nullptr) {
  struct Head {
    std::size_t stream;
    std::size_t pos;
  };
  std::uint64_t cmp_count = 0;
  auto view_of = [&](const Head& h) {
    return streams[h.stream]->word(h.pos);
  };
  auto greater = [&](const Head& a, const Head& b) {
    ++cmp_count;
    int c = canonical_compare(view_of(a), view_of(b));
    if (c != 0) return c > 0;
    return a.stream > b.stream;
  };
  std::priority_queue<Head, std::vector<Head>, decltype(greater)> heap(
      greater);
  std::size_t total = 0;
  for (std::size_t s = 0; s < streams.size(); ++s) {
    total += streams[s]->size();
    if (!streams[s]->empty()) heap.push({s, 0});
  }
  PauliSum out(n_qubits);
  out.reserve(total);
  while (!heap.empty()) {
    Head top = heap.top();
    heap.pop();
    PauliView w = view_of(top);
    Complex c = streams[top.stream]->coeff(top.pos);
    while (!heap.empty() && words_equal(view_of(heap.top()), w)) {
      Head dup = heap.top();
      heap.pop();
      c += streams[dup.stream]->coeff(dup.pos);
      if (dup.pos + 1 < streams[dup.stream]->size())
        heap.push({dup.stream, dup.pos + 1});
    }
    if (keep_term(c, w, opts.drop_threshold)) out.append(w, c);
    if (top.pos + 1 < streams[top.stream]->size())
      heap.push({top.stream, top.pos + 1});
  }
  if (comparisons) *comparisons += cmp_count;
  if (opts.check_hermitian) out.assert_hermitian(opts.hermitian_tol);
  return out;
}

/// Concatenated-plane positions pinning both the x and z bit of every
/// qubit the word touches. Fixing all of them makes the commutation
/// relation and the product phase constant within a bucket, and the
/// entangler's XOR action order preserving. Positions [0,n) address the
/// x plane, [n,2n) the z plane.
inline std::vector<std::size_t> support_positions(PauliView w,
                                                  std::size_t n_qubits) {
  std::vector<std::size_t> pos;
  for (std::size_t blk = 0; blk < w.x.size(); ++blk) {
    Block b = w.x[blk] | w.z[blk];
    while (b) {
      std::size_t j = blk * kBlockBits + std::countr_zero(b);
      pos.push_back(j);
      pos.push_back(n_qubits + j);
      b &= b - 1;
    }
  }
  return pos;
}

/// Gathers the bits of w at the given concatenated positions into an
/// integer key (position i -> key bit i).
inline std::uint64_t gather_key(PauliView w, std::size_t n_qubits,
                                std::span<const std::size_t> positions) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    std::size_t p = positions[i];
    bool bit;
    if (p < n_qubits)
      bit = (w.x[p / kBlockBits] >> (p % kBlockBits)) & 1;
    else
      bit = (w.z[(p - n_qubits) / kBlockBits] >>
             ((p - n_qubits) % kBlockBits)) &
            1;
    key |= std::uint64_t{bit} << i;
  }
  return key;
}

struct SupportBucket {
  std::uint64_t key = 0;
  bool anticommuting = false;
  std::vector<std::size_t> terms;  // indices into the source sum, ascending
};

/// Groups terms by their bit pattern on the entangler's support, in
/// first-occurrence order. Within a bucket every term has the same
/// commutation relation with the entangler, and multiplying by the
/// entangler preserves canonical order.
inline std::vector<SupportBucket> bucket_by_support(
    const PauliSum& h, PauliView entangler,
    std::span<const std::size_t> positions,
    std::unordered_map<std::uint64_t, std::size_t>* key_to_bucket) {
  if (positions.size() > 64)
    throw std::runtime_error(
        "entangler support exceeds 64 bits; not supported");
  std::vector<SupportBucket> buckets;
  auto& lookup = *key_to_bucket;
  lookup.clear();
  for (std::size_t i = 0; i < h.size(); ++i) {
    std::uint64_t key = gather_key(h.word(i), h.n_qubits(), positions);
    auto [it, inserted] = lookup.try_emplace(key, buckets.size());
    if (inserted)
      buckets.push_back({key, !commutes(h.word(i), entangler), {}});
    buckets[it->second].terms.push_back(i);
  }
  return buckets;
}

}  // namespace detail

/// Instrumentation for the sortless dressing path.
struct SortlessStats {
  std::size_t n_buckets = 0;
  std::size_t new_term_streams = 0;
  /// Comparison sorts applied to new-term streams. Zero by construction;
  /// nonzero means an order-preservation violation had to be repaired.
  std::size_t new_stream_sorts = 0;
  std::uint64_t merge_comparisons = 0;
};

/// Exact single-generator dressing,
///   H_d = H - (i/2) sin(tau) [H,P] + (1/2)(1-cos(tau)) P[H,P],
/// computed by splitting H into the part commuting with P (unchanged) and
/// the anticommuting part (each term c*T -> cos(tau)*c*T plus the
/// phase-corrected product with P). Conventional path: new terms are
/// produced unsorted and sorted once before the final merge.
inline PauliSum dress_single(const PauliSum& h, const DressOp& op,
                             const MergeOptions& opts = {}) {
  if (h.n_qubits() != op.generator.n_qubits())
    throw std::invalid_argument("dress_single: mismatched qubit counts");
  if (op.generator.is_identity())
    throw std::invalid_argument("dress_single: identity generator");
  const double c = std::cos(op.amplitude), s = std::sin(op.amplitude);
  PauliSum survivors(h.n_qubits());
  survivors.reserve(h.size());
  PauliSum products_raw(h.n_qubits());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (commutes(h.word(i), op.generator)) {
      survivors.append(h.word(i), h.coeff(i));
    } else {
      survivors.append(h.word(i), h.coeff(i) * c);
      if (s != 0.0)
        products_raw.append_product(h.word(i), op.generator.view(),
                                    detail::product_scale(h.coeff(i), s));
    }
  }
  PauliSum products = PauliSum::from_terms(
      h.n_qubits(), products_raw.to_terms(), {0.0, false});
  return merge_sums(survivors, products, opts);
}

/// Dressing identical to dress_single but organized so that no
/// comparison sort ever touches the newly generated terms: the sum is
/// partitioned by the entangler's set bits, each partition's product
/// stream comes out already sorted, per-partition linear merges combine
/// coefficients, and a deterministic multiway merge restores a single
/// globally sorted sum.
inline PauliSum sortless_dress(const PauliSum& h, const DressOp& op,
                               const MergeOptions& opts = {},
                               SortlessStats* stats = nullptr) {
  if (h.n_qubits() != op.generator.n_qubits())
    throw std::invalid_argument("sortless_dress: mismatched qubit counts");
  if (op.generator.is_identity())
    throw std::invalid_argument("sortless_dress: identity generator");
  const double c = std::cos(op.amplitude), s = std::sin(op.amplitude);
  const std::size_t n = h.n_qubits();
  auto positions = detail::support_positions(op.generator.view(), n);
  std::unordered_map<std::uint64_t, std::size_t> key_to_bucket;
  auto buckets =
      detail::bucket_by_support(h, op.generator, positions, &key_to_bucket);
  // products move from bucket key to key ^ mask, the entangler's own
  // bit pattern on its support
  const std::uint64_t full_mask =
      detail::gather_key(op.generator.view(), n, positions);

  SortlessStats local_stats;
  local_stats.n_buckets = buckets.size();

  std::vector<PauliSum> survivors(buckets.size(), PauliSum(n));
  std::vector<PauliSum> products(buckets.size(), PauliSum(n));
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    auto& bucket = buckets[b];
    survivors[b].reserve(bucket.terms.size());
    if (!bucket.anticommuting) {
      for (std::size_t i : bucket.terms)
        survivors[b].append(h.word(i), h.coeff(i));
      continue;
    }
    products[b].reserve(bucket.terms.size());
    for (std::size_t i : bucket.terms) {
      survivors[b].append(h.word(i), h.coeff(i) * c);
      if (s != 0.0)
        products[b].append_product(h.word(i), op.generator.view(),
                                   detail::product_scale(h.coeff(i), s));
    }
    if (!products[b].empty()) {
      ++local_stats.new_term_streams;
      if (!products[b].is_canonical()) {
        ++local_stats.new_stream_sorts;
        products[b] =
            PauliSum::from_terms(n, products[b].to_terms(), {0.0, false});
      }
    }
  }

  // per-partition linear merges: each destination combines its survivors
  // with the product stream of the partner bucket (key ^ full_mask)
  MergeOptions merge_opts = opts;
  merge_opts.check_hermitian = false;
  std::vector<PauliSum> dressed;
  dressed.reserve(2 * buckets.size());
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    auto it = key_to_bucket.find(buckets[b].key ^ full_mask);
    const PauliSum* incoming =
        (it != key_to_bucket.end() && !products[it->second].empty())
            ? &products[it->second]
            : nullptr;
    if (incoming)
      dressed.push_back(merge_sums(survivors[b], *incoming, merge_opts));
    else
      dressed.push_back(std::move(survivors[b]));
  }
  // product streams whose destination has no existing bucket stand alone
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    if (products[b].empty()) continue;
    if (!key_to_bucket.contains(buckets[b].key ^ full_mask))
      dressed.push_back(std::move(products[b]));
  }

  std::vector<const PauliSum*> streams;
  streams.reserve(dressed.size());
  for (const auto& d : dressed) streams.push_back(&d);
  PauliSum out = detail::kway_merge_combine(streams, n, opts,
                                            &local_stats.merge_comparisons);
  if (stats) *stats = local_stats;
  return out;
}

/// Applies dress_single for each entangler in ansatz order (entangler 0
/// first), compressing with (epsilon, max_terms) after every step.
inline PauliSum dress_sequence(
    const PauliSum& h, const Ansatz& ansatz, double epsilon,
    std::size_t max_terms = std::numeric_limits<std::size_t>::max(),
    CompressStats* stats = nullptr, const MergeOptions& opts = {}) {
  if (max_terms < 1)
    throw std::invalid_argument("dress_sequence: max_terms < 1");
  PauliSum out = h;
  for (std::size_t k = 0; k < ansatz.size(); ++k) {
    out = dress_single(out, {ansatz.entanglers[k], ansatz.tau[k]}, opts);
    if (epsilon > 0.0 || out.size() > max_terms)
      out = compress(out, epsilon, max_terms, stats);
  }
  return out;
}

}  // namespace iqcc
