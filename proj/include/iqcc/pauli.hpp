#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace iqcc {

using Block = std::uint64_t;
using Complex = std::complex<double>;

constexpr std::size_t kBlockBits = 64;

inline std::size_t blocks_for(std::size_t n_qubits) {
  return n_qubits == 0 ? 1 : (n_qubits + kBlockBits - 1) / kBlockBits;
}

/// Non-owning view of a Pauli word in symplectic form. Bit j of x is set
/// iff qubit j carries X or Y; bit j of z iff it carries Z or Y.
struct PauliView {
  std::span<const Block> x;
  std::span<const Block> z;
};

/// A multi-qubit Pauli operator (tensor product of I/X/Y/Z) stored as a
/// pair of fixed-width bit vectors. Immutable in spirit: mutate only
/// during construction.
class PauliWord {
 public:
  PauliWord() : n_qubits_(0), x_(1, 0), z_(1, 0) {}

  explicit PauliWord(std::size_t n_qubits)
      : n_qubits_(n_qubits),
        x_(blocks_for(n_qubits), 0),
        z_(blocks_for(n_qubits), 0) {}

  PauliWord(std::size_t n_qubits, std::span<const Block> x,
            std::span<const Block> z)
      : n_qubits_(n_qubits),
        x_(x.begin(), x.end()),
        z_(z.begin(), z.end()) {}

  /// Parses letters left-to-right from qubit 0, e.g. "XYIZ".
  static PauliWord from_string(std::string_view letters) {
    PauliWord w(letters.size());
    for (std::size_t j = 0; j < letters.size(); ++j) {
      switch (letters[j]) {
        case 'I': break;
        case 'X': w.set_x(j); break;
        case 'Z': w.set_z(j); break;
        case 'Y': w.set_x(j); w.set_z(j); break;
        default:
          throw std::invalid_argument("invalid Pauli letter '" +
                                      std::string(1, letters[j]) + "'");
      }
    }
    return w;
  }

  std::size_t n_qubits() const { return n_qubits_; }
  std::size_t blocks() const { return x_.size(); }

  PauliView view() const { return {x_, z_}; }
  operator PauliView() const { return view(); }

  std::span<Block> x_bits() { return x_; }
  std::span<Block> z_bits() { return z_; }
  std::span<const Block> x_bits() const { return x_; }
  std::span<const Block> z_bits() const { return z_; }

  void set_x(std::size_t j) { x_[j / kBlockBits] |= Block{1} << (j % kBlockBits); }
  void set_z(std::size_t j) { z_[j / kBlockBits] |= Block{1} << (j % kBlockBits); }

  bool x_at(std::size_t j) const {
    return (x_[j / kBlockBits] >> (j % kBlockBits)) & 1;
  }
  bool z_at(std::size_t j) const {
    return (z_[j / kBlockBits] >> (j % kBlockBits)) & 1;
  }

  char letter(std::size_t j) const {
    static constexpr char table[4] = {'I', 'X', 'Z', 'Y'};
    return table[(x_at(j) ? 1 : 0) | (z_at(j) ? 2 : 0)];
  }

  bool is_identity() const {
    for (std::size_t b = 0; b < x_.size(); ++b)
      if (x_[b] | z_[b]) return false;
    return true;
  }

  /// Number of qubits carrying X or Y (the flip-set weight).
  std::size_t flip_weight() const {
    std::size_t w = 0;
    for (Block b : x_) w += std::popcount(b);
    return w;
  }

  std::string to_string() const {
    std::string s(n_qubits_, 'I');
    for (std::size_t j = 0; j < n_qubits_; ++j) s[j] = letter(j);
    return s;
  }

  friend bool operator==(const PauliWord& a, const PauliWord& b) {
    return a.n_qubits_ == b.n_qubits_ && a.x_ == b.x_ && a.z_ == b.z_;
  }

 private:
  std::size_t n_qubits_;
  std::vector<Block> x_;
  std::vector<Block> z_;
};

struct WeightedTerm {
  Complex coeff;
  PauliWord word;
};

namespace detail {

inline void require_same_width(PauliView a, PauliView b) {
  if (a.x.size() != b.x.size())
    throw std::invalid_argument("Pauli words have mismatched qubit counts");
}

inline std::size_t popcount_and(std::span<const Block> a,
                                std::span<const Block> b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    n += std::popcount(a[i] & b[i]);
  return n;
}

}  // namespace detail

/// Strict total order: the concatenated (x, z) bit string, qubit 0 first,
/// read as a big-endian unsigned integer. Identity sorts first.
inline int canonical_compare(PauliView a, PauliView b) {
  detail::require_same_width(a, b);
  auto cmp_plane = [](std::span<const Block> p, std::span<const Block> q) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      Block diff = p[i] ^ q[i];
      if (diff) {
        // lowest differing bit is the most significant position
        Block low = diff & (~diff + 1);
        return (p[i] & low) ? 1 : -1;
      }
    }
    return 0;
  };
  if (int c = cmp_plane(a.x, b.x)) return c;
  return cmp_plane(a.z, b.z);
}

inline bool canonical_less(PauliView a, PauliView b) {
  return canonical_compare(a, b) < 0;
}

inline bool words_equal(PauliView a, PauliView b) {
  return std::equal(a.x.begin(), a.x.end(), b.x.begin()) &&
         std::equal(a.z.begin(), a.z.end(), b.z.begin());
}

inline bool is_identity(PauliView w) {
  for (std::size_t i = 0; i < w.x.size(); ++i)
    if (w.x[i] | w.z[i]) return false;
  return true;
}

/// Uniform drop rule for sums: the identity term is always kept; other
/// terms are dropped when exactly zero or below the threshold.
inline bool keep_term(Complex c, PauliView w, double threshold) {
  if (is_identity(w)) return true;
  if (c == Complex{}) return false;
  return std::abs(c) >= threshold;
}

/// True iff p and q commute: the symplectic form
/// <p.x,q.z> xor <p.z,q.x> vanishes.
inline bool commutes(PauliView p, PauliView q) {
  detail::require_same_width(p, q);
  std::size_t s =
      detail::popcount_and(p.x, q.z) + detail::popcount_and(p.z, q.x);
  return (s & 1) == 0;
}

/// True iff the word carries an odd number of Y letters.
inline bool y_parity_odd(PauliView p) {
  return detail::popcount_and(p.x, p.z) & 1;
}

/// Writes the product word p*q into (xo, zo) and returns t such that
/// p*q = i^t * word. t is reduced mod 4.
inline int multiply_into(PauliView p, PauliView q, std::span<Block> xo,
                         std::span<Block> zo) {
  detail::require_same_width(p, q);
  int t = 0;
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    Block px = p.x[i], pz = p.z[i], qx = q.x[i], qz = q.z[i];
    Block rx = px ^ qx, rz = pz ^ qz;
    t += std::popcount(px & pz) + std::popcount(qx & qz) -
         std::popcount(rx & rz) + 2 * std::popcount(pz & qx);
    xo[i] = rx;
    zo[i] = rz;
  }
  return ((t % 4) + 4) % 4;
}

constexpr Complex phase_value(int exponent) {
  constexpr Complex table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return table[exponent & 3];
}

struct WordProduct {
  int phase_exponent;  // p*q = i^phase_exponent * word
  PauliWord word;
  Complex phase() const { return phase_value(phase_exponent); }
};

inline WordProduct multiply(const PauliWord& p, const PauliWord& q) {
  if (p.n_qubits() != q.n_qubits())
    throw std::invalid_argument("Pauli words have mismatched qubit counts");
  PauliWord out(p.n_qubits());
  int t = multiply_into(p, q, out.x_bits(), out.z_bits());
  return {t, std::move(out)};
}

struct MergeOptions {
  double drop_threshold = 1e-12;
  bool check_hermitian = true;
  double hermitian_tol = 1e-10;
};

/// A canonically sorted, duplicate-free, weighted list of Pauli words.
/// Terms are stored columnar: one coefficient array plus a flat bit
/// matrix with 2*blocks() words per row (x plane then z plane).
class PauliSum {
 public:
  PauliSum() : PauliSum(0) {}
  explicit PauliSum(std::size_t n_qubits)
      : n_qubits_(n_qubits), blocks_(blocks_for(n_qubits)) {}

  std::size_t n_qubits() const { return n_qubits_; }
  std::size_t blocks() const { return blocks_; }
  std::size_t size() const { return coeffs_.size(); }
  bool empty() const { return coeffs_.empty(); }

  Complex coeff(std::size_t i) const { return coeffs_[i]; }
  Complex& coeff(std::size_t i) { return coeffs_[i]; }

  PauliView word(std::size_t i) const {
    const Block* row = bits_.data() + i * 2 * blocks_;
    return {{row, blocks_}, {row + blocks_, blocks_}};
  }

  PauliWord word_copy(std::size_t i) const {
    PauliView v = word(i);
    return PauliWord(n_qubits_, v.x, v.z);
  }

  std::span<const Block> row_x(std::size_t i) const { return word(i).x; }
  std::span<const Block> row_z(std::size_t i) const { return word(i).z; }

  void reserve(std::size_t n) {
    coeffs_.reserve(n);
    bits_.reserve(n * 2 * blocks_);
  }

  /// Appends a term; the caller is responsible for canonical order.
  void append(PauliView w, Complex c) {
    coeffs_.push_back(c);
    bits_.insert(bits_.end(), w.x.begin(), w.x.end());
    bits_.insert(bits_.end(), w.z.begin(), w.z.end());
  }

  void append(const PauliWord& w, Complex c) { append(w.view(), c); }

  /// Appends the product i^t * (row of other sum), pre-scaled.
  void append_product(PauliView a, PauliView b, Complex scale) {
    std::size_t base = bits_.size();
    bits_.resize(base + 2 * blocks_);
    int t = multiply_into(a, b, {bits_.data() + base, blocks_},
                          {bits_.data() + base + blocks_, blocks_});
    coeffs_.push_back(scale * phase_value(t));
  }

  void clear() {
    coeffs_.clear();
    bits_.clear();
  }

  /// Builds a canonical sum from arbitrary weighted terms: sorts,
  /// combines duplicates, applies the drop threshold.
  static PauliSum from_terms(std::size_t n_qubits,
                             std::vector<WeightedTerm> terms,
                             const MergeOptions& opts = {}) {
    std::sort(terms.begin(), terms.end(),
              [](const WeightedTerm& a, const WeightedTerm& b) {
                return canonical_less(a.word, b.word);
              });
    PauliSum out(n_qubits);
    out.reserve(terms.size());
    std::size_t i = 0;
    while (i < terms.size()) {
      Complex c = terms[i].coeff;
      std::size_t j = i + 1;
      while (j < terms.size() &&
             words_equal(terms[i].word, terms[j].word)) {
        c += terms[j].coeff;
        ++j;
      }
      if (keep_term(c, terms[i].word, opts.drop_threshold))
        out.append(terms[i].word, c);
      i = j;
    }
    if (opts.check_hermitian) out.assert_hermitian(opts.hermitian_tol);
    return out;
  }

  std::vector<WeightedTerm> to_terms() const {
    std::vector<WeightedTerm> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i)
      out.push_back({coeffs_[i], word_copy(i)});
    return out;
  }

  /// Index of the given word, or npos.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t find(PauliView w) const {
    std::size_t lo = 0, hi = size();
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      int c = canonical_compare(word(mid), w);
      if (c == 0) return mid;
      if (c < 0)
        lo = mid + 1;
      else
        hi = mid;
    }
    return npos;
  }

  bool is_canonical() const {
    for (std::size_t i = 0; i + 1 < size(); ++i)
      if (canonical_compare(word(i), word(i + 1)) >= 0) return false;
    return true;
  }

  void assert_hermitian(double tol = 1e-10) const {
    for (std::size_t i = 0; i < size(); ++i) {
      double re = std::abs(coeffs_[i].real());
      if (std::abs(coeffs_[i].imag()) >= tol * std::max(1.0, re))
        throw std::runtime_error(
            "hermiticity violated: coefficient " + std::to_string(i) +
            " has imaginary part " + std::to_string(coeffs_[i].imag()));
    }
  }

  friend bool operator==(const PauliSum& a, const PauliSum& b) {
    return a.n_qubits_ == b.n_qubits_ && a.coeffs_ == b.coeffs_ &&
           a.bits_ == b.bits_;
  }

 private:
  std::size_t n_qubits_;
  std::size_t blocks_;
  std::vector<Complex> coeffs_;
  std::vector<Block> bits_;
};

/// Linear-time two-pointer merge of two canonical sums. Coefficients of
/// shared words are summed (a's contribution first); results below the
/// drop threshold are removed, except the identity term.
inline PauliSum merge_sums(const PauliSum& a, const PauliSum& b,
                           const MergeOptions& opts = {}) {
  if (a.n_qubits() != b.n_qubits())
    throw std::invalid_argument("merge_sums: mismatched qubit counts");
  PauliSum out(a.n_qubits());
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    int c = canonical_compare(a.word(i), b.word(j));
    if (c < 0) {
      if (keep_term(a.coeff(i), a.word(i), opts.drop_threshold))
        out.append(a.word(i), a.coeff(i));
      ++i;
    } else if (c > 0) {
      if (keep_term(b.coeff(j), b.word(j), opts.drop_threshold))
        out.append(b.word(j), b.coeff(j));
      ++j;
    } else {
      Complex s = a.coeff(i) + b.coeff(j);
      if (keep_term(s, a.word(i), opts.drop_threshold)) out.append(a.word(i), s);
      ++i;
      ++j;
    }
  }
  for (; i < a.size(); ++i)
    if (keep_term(a.coeff(i), a.word(i), opts.drop_threshold))
      out.append(a.word(i), a.coeff(i));
  for (; j < b.size(); ++j)
    if (keep_term(b.coeff(j), b.word(j), opts.drop_threshold))
      out.append(b.word(j), b.coeff(j));
  if (opts.check_hermitian) out.assert_hermitian(opts.hermitian_tol);
  return out;
}

struct CompressStats {
  std::size_t dropped_terms = 0;
  double dropped_weight = 0.0;  // sum of |coeff| over dropped terms
};

/// Drops terms with |coeff| < epsilon; if still over max_terms, keeps the
/// max_terms largest by |coeff| (ties broken by canonical word order).
/// The identity term is never dropped.
inline PauliSum compress(const PauliSum& h, double epsilon,
                         std::size_t max_terms,
                         CompressStats* stats = nullptr) {
  if (epsilon < 0) throw std::invalid_argument("compress: epsilon < 0");
  if (max_terms < 1) throw std::invalid_argument("compress: max_terms < 1");

  std::vector<char> keep(h.size(), 0);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (is_identity(h.word(i)) || std::abs(h.coeff(i)) >= epsilon) {
      keep[i] = 1;
      ++kept;
    }
  }
  if (kept > max_terms) {
    std::vector<std::size_t> idx;
    idx.reserve(kept);
    for (std::size_t i = 0; i < h.size(); ++i)
      if (keep[i]) idx.push_back(i);
    // larger |coeff| first; canonical (= index) order breaks ties
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) {
                       return std::abs(h.coeff(a)) > std::abs(h.coeff(b));
                     });
    std::size_t identity_idx = PauliSum::npos;
    if (!h.empty() && is_identity(h.word(0))) identity_idx = 0;
    std::fill(keep.begin(), keep.end(), 0);
    std::size_t budget = max_terms;
    if (identity_idx != PauliSum::npos) {
      keep[identity_idx] = 1;
      --budget;
    }
    for (std::size_t r = 0; r < idx.size() && budget > 0; ++r) {
      if (idx[r] == identity_idx) continue;
      keep[idx[r]] = 1;
      --budget;
    }
  }
  PauliSum out(h.n_qubits());
  out.reserve(std::min(max_terms + 1, h.size()));
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (keep[i]) {
      out.append(h.word(i), h.coeff(i));
    } else if (stats) {
      ++stats->dropped_terms;
      stats->dropped_weight += std::abs(h.coeff(i));
    }
  }
  return out;
}

}  // namespace iqcc
