#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <vector>

#include "iqcc/pauli.hpp"
#include "iqcc/qmf.hpp"

namespace iqcc {

/// Terms of the Hamiltonian sharing one set of qubit flips (one x-bit
/// pattern). Because the canonical order sorts on x first, members are a
/// contiguous index range of the source sum.
struct FlipGroup {
  std::vector<Block> flip_bits;
  std::vector<std::size_t> member_terms;
};

/// Partitions h's terms by their x-bit pattern; the union of all groups
/// is the full term set.
inline std::vector<FlipGroup> group_by_flip(const PauliSum& h) {
  std::vector<FlipGroup> groups;
  for (std::size_t i = 0; i < h.size(); ++i) {
    PauliView w = h.word(i);
    if (groups.empty() ||
        !std::equal(w.x.begin(), w.x.end(), groups.back().flip_bits.begin(),
                    groups.back().flip_bits.end())) {
      groups.push_back({{w.x.begin(), w.x.end()}, {}});
    }
    groups.back().member_terms.push_back(i);
  }
  return groups;
}

/// Zero-amplitude energy gradient of candidate generator p:
///   g = Im <omega| H p |omega> = -(i/2) <omega| [H, p] |omega>.
inline double gradient(const PauliSum& h, const QmfState& omega,
                       PauliView p) {
  if (!h.empty() && h.word(0).x.size() != p.x.size())
    throw std::invalid_argument("gradient: mismatched qubit counts");
  PauliWord scratch(h.n_qubits());
  double g = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    int t = multiply_into(h.word(k), p, scratch.x_bits(), scratch.z_bits());
    Complex weight = h.coeff(k) * phase_value(t);
    if (weight.imag() == 0.0) continue;
    g += weight.imag() * expect_word(omega, scratch);
  }
  return g;
}

/// A DIS member with its screening gradient.
struct RankedGenerator {
  PauliWord word;
  double gradient = 0.0;  // hartree/radian
};

struct DisOptions {
  /// Candidates with |gradient| below this are dropped.
  double screen_threshold = 1e-8;
  /// Upper bound on enumerated odd-Y placements per flip group; groups
  /// whose exhaustive enumeration would exceed it fall back to the
  /// single-Y placements.
  std::size_t per_group_cap = 128;
  /// When set, candidates whose gradient magnitudes tie are ordered by a
  /// seeded shuffle instead of canonical word order.
  std::optional<std::uint64_t> tie_break_seed;
};

namespace detail {

inline std::vector<std::size_t> x_positions(std::span<const Block> x) {
  std::vector<std::size_t> pos;
  for (std::size_t blk = 0; blk < x.size(); ++blk) {
    Block b = x[blk];
    while (b) {
      pos.push_back(blk * kBlockBits + std::countr_zero(b));
      b &= b - 1;
    }
  }
  return pos;
}

/// All odd-Y X/Y-words on the given flip set, capped: exhaustive when
/// 2^(w-1) fits the cap, otherwise one single-Y word per flipped
/// position. Deterministic enumeration order.
inline std::vector<PauliWord> odd_y_candidates(
    std::span<const Block> flip_bits, std::size_t n_qubits,
    std::size_t cap) {
  auto pos = x_positions(flip_bits);
  const std::size_t w = pos.size();
  std::vector<PauliWord> out;
  if (w == 0) return out;
  auto make = [&](std::uint64_t y_mask) {
    PauliWord word(n_qubits);
    for (std::size_t i = 0; i < w; ++i) {
      word.set_x(pos[i]);
      if ((y_mask >> i) & 1) word.set_z(pos[i]);
    }
    return word;
  };
  bool exhaustive =
      w < 2 || (w <= 63 && (std::uint64_t{1} << (w - 1)) <= cap);
  if (exhaustive) {
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << w); ++mask) {
      if (std::popcount(mask) % 2 == 1) out.push_back(make(mask));
      if (out.size() >= cap) break;
    }
  } else {
    for (std::size_t i = 0; i < w && out.size() < cap; ++i)
      out.push_back(make(std::uint64_t{1} << i));
  }
  return out;
}

/// Gradient restricted to one flip group's member terms. Exact whenever
/// the reference sits at computational-basis poles, where every other
/// term's contribution vanishes.
inline double group_gradient(const PauliSum& h, const QmfState& omega,
                             PauliView p, const FlipGroup& group) {
  PauliWord scratch(h.n_qubits());
  double g = 0.0;
  for (std::size_t k : group.member_terms) {
    int t = multiply_into(h.word(k), p, scratch.x_bits(), scratch.z_bits());
    Complex weight = h.coeff(k) * phase_value(t);
    if (weight.imag() == 0.0) continue;
    g += weight.imag() * expect_word(omega, scratch);
  }
  return g;
}

}  // namespace detail

/// Screens the Direct Interaction Space: per flip group of h, enumerates
/// odd-Y candidate generators, keeps the best representative, and returns
/// the strongest top_k across groups sorted by |gradient| descending.
/// An empty result signals convergence (or a fully diagonal Hamiltonian).
inline std::vector<RankedGenerator> dis_candidates(
    const PauliSum& h, const QmfState& omega, std::size_t top_k,
    const DisOptions& opts = {}) {
  if (top_k < 1) throw std::invalid_argument("dis_candidates: top_k < 1");
  const bool poles = omega.at_poles();
  std::vector<RankedGenerator> picks;
  for (const FlipGroup& group : group_by_flip(h)) {
    auto candidates =
        detail::odd_y_candidates(group.flip_bits, h.n_qubits(),
                                 opts.per_group_cap);
    RankedGenerator best;
    bool have = false;
    for (auto& cand : candidates) {
      double g = poles ? detail::group_gradient(h, omega, cand, group)
                       : gradient(h, omega, cand);
      if (!have || std::abs(g) > std::abs(best.gradient) ||
          (std::abs(g) == std::abs(best.gradient) &&
           canonical_less(cand, best.word))) {
        best = {std::move(cand), g};
        have = true;
      }
    }
    if (have && std::abs(best.gradient) >= opts.screen_threshold)
      picks.push_back(std::move(best));
  }

  std::stable_sort(picks.begin(), picks.end(),
                   [](const RankedGenerator& a, const RankedGenerator& b) {
                     if (std::abs(a.gradient) != std::abs(b.gradient))
                       return std::abs(a.gradient) > std::abs(b.gradient);
                     return canonical_less(a.word, b.word);
                   });

  if (opts.tie_break_seed) {
    // reshuffle runs of equal-magnitude gradients
    std::mt19937_64 rng(*opts.tie_break_seed);
    std::size_t i = 0;
    while (i < picks.size()) {
      std::size_t j = i + 1;
      double mag = std::abs(picks[i].gradient);
      while (j < picks.size() &&
             std::abs(std::abs(picks[j].gradient) - mag) <=
                 1e-12 * std::max(1.0, mag))
        ++j;
      std::shuffle(picks.begin() + i, picks.begin() + j, rng);
      i = j;
    }
  }

  if (picks.size() > top_k) picks.resize(top_k);
  return picks;
}

}  // namespace iqcc
