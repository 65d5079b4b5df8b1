#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "iqcc/pauli.hpp"

namespace iqcc {

namespace detail {

[[noreturn]] inline void parse_error(const std::string& path,
                                     std::size_t line,
                                     const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace detail

/// Reads the Pauli text format: '#' comment lines, then one term per
/// line as `<decimal coefficient> <letters>` with qubit 0 leftmost.
/// Duplicate words are merged. A `# qubits: N` comment pins the qubit
/// count (required only for empty sums).
inline PauliSum parse_pauli_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<WeightedTerm> terms;
  std::size_t n_qubits = 0;
  bool have_width = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::istringstream hdr(line.substr(first + 1));
      std::string key;
      std::size_t n;
      if (hdr >> key >> n && key == "qubits:") {
        n_qubits = n;
        have_width = true;
      }
      continue;
    }
    std::istringstream ls(line);
    std::string coeff_str, letters;
    if (!(ls >> coeff_str >> letters))
      detail::parse_error(path, lineno, "expected `<coefficient> <letters>`");
    std::string rest;
    if (ls >> rest)
      detail::parse_error(path, lineno, "trailing content '" + rest + "'");
    double c;
    auto [ptr, ec] = std::from_chars(
        coeff_str.data(), coeff_str.data() + coeff_str.size(), c);
    if (ec != std::errc{} || ptr != coeff_str.data() + coeff_str.size())
      detail::parse_error(path, lineno,
                          "bad coefficient '" + coeff_str + "'");
    if (!std::isfinite(c))
      detail::parse_error(path, lineno, "non-finite coefficient");
    if (!have_width) {
      n_qubits = letters.size();
      have_width = true;
    } else if (letters.size() != n_qubits) {
      detail::parse_error(path, lineno,
                          "inconsistent string length (expected " +
                              std::to_string(n_qubits) + ")");
    }
    PauliWord w(0);
    try {
      w = PauliWord::from_string(letters);
    } catch (const std::invalid_argument& e) {
      detail::parse_error(path, lineno, e.what());
    }
    terms.push_back({c, std::move(w)});
  }
  if (!have_width)
    throw std::runtime_error(path + ": no terms and no `# qubits:` header");
  return PauliSum::from_terms(n_qubits, std::move(terms));
}

/// Writes the canonical sum in the format parse_pauli_file reads back
/// bit-exactly (full-precision decimal coefficients).
inline void write_pauli_file(const PauliSum& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# qubits: " << h.n_qubits() << "\n";
  char buf[64];
  for (std::size_t i = 0; i < h.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", h.coeff(i).real());
    out << buf << ' ' << h.word_copy(i).to_string() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

/// One- and two-electron integrals over spatial orbitals, chemist
/// notation (pq|rs) for the two-electron table.
struct IntegralSet {
  std::size_t n_orbitals = 0;
  int n_electrons = 0;
  int ms2 = 0;
  double core_energy = 0.0;
  std::vector<double> h;  // n^2
  std::vector<double> g;  // n^4

  explicit IntegralSet(std::size_t n = 0)
      : n_orbitals(n), h(n * n, 0.0), g(n * n * n * n, 0.0) {}

  double& h_at(std::size_t p, std::size_t q) { return h[p * n_orbitals + q]; }
  double h_at(std::size_t p, std::size_t q) const {
    return h[p * n_orbitals + q];
  }
  double& g_at(std::size_t p, std::size_t q, std::size_t r, std::size_t s) {
    std::size_t n = n_orbitals;
    return g[((p * n + q) * n + r) * n + s];
  }
  double g_at(std::size_t p, std::size_t q, std::size_t r,
              std::size_t s) const {
    std::size_t n = n_orbitals;
    return g[((p * n + q) * n + r) * n + s];
  }

  /// h must be symmetric and g must obey the 8-fold real-integral
  /// symmetry.
  void validate_symmetry(double tol = 1e-10) const {
    std::size_t n = n_orbitals;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q)
        if (std::abs(h_at(p, q) - h_at(q, p)) > tol)
          throw std::runtime_error("integral symmetry violation in h");
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q)
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t s = 0; s < n; ++s) {
            double v = g_at(p, q, r, s);
            if (std::abs(v - g_at(q, p, r, s)) > tol ||
                std::abs(v - g_at(p, q, s, r)) > tol ||
                std::abs(v - g_at(r, s, p, q)) > tol)
              throw std::runtime_error("integral symmetry violation in g");
          }
  }
};

/// FCIDUMP-compatible reader: a header carrying NORB, NELEC and MS2,
/// then `value i j k l` records with 1-based orbital indices. Two-electron
/// values are expanded to all eight symmetric index images.
inline IntegralSet read_fcidump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::size_t lineno = 0;
  long norb = -1, nelec = -1, ms2 = 0;
  std::string line;
  // header: everything through &END (or a line ending in '/')
  while (std::getline(in, line)) {
    ++lineno;
    header += line + " ";
    if (line.find("&END") != std::string::npos ||
        line.find('/') != std::string::npos)
      break;
    if (lineno > 100)
      detail::parse_error(path, lineno, "unterminated FCIDUMP header");
  }
  auto find_field = [&](const std::string& key, long& out) {
    std::size_t pos = header.find(key + "=");
    if (pos == std::string::npos) return false;
    out = std::strtol(header.c_str() + pos + key.size() + 1, nullptr, 10);
    return true;
  };
  if (!find_field("NORB", norb) || norb <= 0)
    detail::parse_error(path, lineno, "missing NORB");
  if (!find_field("NELEC", nelec) || nelec < 0)
    detail::parse_error(path, lineno, "missing NELEC");
  find_field("MS2", ms2);

  IntegralSet ints(static_cast<std::size_t>(norb));
  ints.n_electrons = static_cast<int>(nelec);
  ints.ms2 = static_cast<int>(ms2);

  double val;
  long i, j, k, l;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    if (!(ls >> val >> i >> j >> k >> l))
      detail::parse_error(path, lineno, "bad integral record");
    if (i == 0 && j == 0 && k == 0 && l == 0) {
      ints.core_energy = val;
    } else if (k == 0 && l == 0) {
      if (i < 1 || i > norb || j < 1 || j > norb)
        detail::parse_error(path, lineno, "orbital index out of range");
      ints.h_at(i - 1, j - 1) = val;
      ints.h_at(j - 1, i - 1) = val;
    } else {
      if (i < 1 || i > norb || j < 1 || j > norb || k < 1 || k > norb ||
          l < 1 || l > norb)
        detail::parse_error(path, lineno, "orbital index out of range");
      std::size_t p = i - 1, q = j - 1, r = k - 1, s = l - 1;
      for (auto [a, b] : {std::pair{p, q}, {q, p}})
        for (auto [c, d] : {std::pair{r, s}, {s, r}}) {
          ints.g_at(a, b, c, d) = val;
          ints.g_at(c, d, a, b) = val;
        }
    }
  }
  return ints;
}

namespace detail {

/// The two Pauli terms of a Jordan-Wigner ladder operator on spin
/// orbital p: (1/2)(X_p -+ i Y_p) times the Z string on qubits < p.
inline std::array<WeightedTerm, 2> jw_ladder(std::size_t n_so, std::size_t p,
                                             bool creation) {
  PauliWord xw(n_so), yw(n_so);
  for (std::size_t j = 0; j < p; ++j) {
    xw.set_z(j);
    yw.set_z(j);
  }
  xw.set_x(p);
  yw.set_x(p);
  yw.set_z(p);
  Complex y_coeff = creation ? Complex{0.0, -0.5} : Complex{0.0, 0.5};
  return {WeightedTerm{0.5, std::move(xw)},
          WeightedTerm{y_coeff, std::move(yw)}};
}

}  // namespace detail

/// Maps one-/two-electron integrals to a qubit Hamiltonian via the
/// Jordan-Wigner transformation with interleaved spin orbitals
/// (qubit 2p = orbital p alpha, qubit 2p+1 = beta). The dense matrix of
/// the result equals the second-quantized Hamiltonian in the occupation
/// basis; core_energy rides on the identity term.
inline PauliSum jordan_wigner(const IntegralSet& ints) {
  ints.validate_symmetry();
  const std::size_t n = ints.n_orbitals;
  const std::size_t n_so = 2 * n;
  std::vector<WeightedTerm> terms;
  terms.reserve(1 << 16);
  terms.push_back({ints.core_energy, PauliWord(n_so)});

  // cache ladder terms
  std::vector<std::array<WeightedTerm, 2>> cre, ann;
  cre.reserve(n_so);
  ann.reserve(n_so);
  for (std::size_t p = 0; p < n_so; ++p) {
    cre.push_back(detail::jw_ladder(n_so, p, true));
    ann.push_back(detail::jw_ladder(n_so, p, false));
  }

  auto emit2 = [&](const std::array<WeightedTerm, 2>& a,
                   const std::array<WeightedTerm, 2>& b, Complex scale) {
    for (const auto& ta : a)
      for (const auto& tb : b) {
        WordProduct prod = multiply(ta.word, tb.word);
        terms.push_back({scale * ta.coeff * tb.coeff * prod.phase(),
                         std::move(prod.word)});
      }
  };
  auto emit4 = [&](const std::array<WeightedTerm, 2>& a,
                   const std::array<WeightedTerm, 2>& b,
                   const std::array<WeightedTerm, 2>& c,
                   const std::array<WeightedTerm, 2>& d, Complex scale) {
    for (const auto& ta : a)
      for (const auto& tb : b) {
        WordProduct ab = multiply(ta.word, tb.word);
        Complex cab = ta.coeff * tb.coeff * ab.phase();
        for (const auto& tc : c) {
          WordProduct abc = multiply(ab.word, tc.word);
          Complex cabc = cab * tc.coeff * abc.phase();
          for (const auto& td : d) {
            WordProduct abcd = multiply(abc.word, td.word);
            terms.push_back({scale * cabc * td.coeff * abcd.phase(),
                             std::move(abcd.word)});
          }
        }
      }
  };

  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q) {
      double hpq = ints.h_at(p, q);
      if (std::abs(hpq) < 1e-14) continue;
      for (std::size_t sp = 0; sp < 2; ++sp)
        emit2(cre[2 * p + sp], ann[2 * q + sp], hpq);
    }

  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t s = 0; s < n; ++s) {
          double gpqrs = ints.g_at(p, q, r, s);
          if (std::abs(gpqrs) < 1e-14) continue;
          for (std::size_t sa = 0; sa < 2; ++sa)
            for (std::size_t sb = 0; sb < 2; ++sb)
              emit4(cre[2 * p + sa], cre[2 * r + sb], ann[2 * s + sb],
                    ann[2 * q + sa], 0.5 * gpqrs);
        }

  return PauliSum::from_terms(n_so, std::move(terms));
}

/// Particle-number operator N = sum_p (I - Z_p)/2 as a PauliSum.
inline PauliSum number_operator(std::size_t n_so) {
  std::vector<WeightedTerm> terms;
  terms.push_back({0.5 * static_cast<double>(n_so), PauliWord(n_so)});
  for (std::size_t p = 0; p < n_so; ++p) {
    PauliWord z(n_so);
    z.set_z(p);
    terms.push_back({-0.5, std::move(z)});
  }
  return PauliSum::from_terms(n_so, std::move(terms));
}

/// Spin projection Sz = (1/4) sum_p (Z_{2p+1} - Z_{2p}) under the
/// interleaved convention.
inline PauliSum sz_operator(std::size_t n_so) {
  if (n_so % 2 != 0)
    throw std::invalid_argument("sz_operator: odd qubit count");
  std::vector<WeightedTerm> terms;
  for (std::size_t p = 0; p < n_so / 2; ++p) {
    PauliWord za(n_so), zb(n_so);
    za.set_z(2 * p);
    zb.set_z(2 * p + 1);
    terms.push_back({-0.25, std::move(za)});
    terms.push_back({0.25, std::move(zb)});
  }
  return PauliSum::from_terms(n_so, std::move(terms));
}

/// All pairwise products a_i * b_j, merged canonically.
inline PauliSum multiply_sums(const PauliSum& a, const PauliSum& b,
                              const MergeOptions& opts = {}) {
  std::vector<WeightedTerm> terms;
  terms.reserve(a.size() * b.size());
  PauliWord scratch(a.n_qubits());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      int t = multiply_into(a.word(i), b.word(j), scratch.x_bits(),
                            scratch.z_bits());
      terms.push_back({a.coeff(i) * b.coeff(j) * phase_value(t), scratch});
    }
  return PauliSum::from_terms(a.n_qubits(), std::move(terms), opts);
}

struct PenaltyConfig {
  double mu_n = 0.0;       // hartree
  double n_target = 0.0;   // electrons
  double mu_s = 0.0;       // hartree
  double sz_target = 0.0;  // spin projection
};

/// h + mu_n (N - n_target)^2 + mu_s (Sz - sz_target)^2, expanded and
/// merged.
inline PauliSum add_penalties(const PauliSum& h, const PenaltyConfig& cfg) {
  if (cfg.mu_n < 0 || cfg.mu_s < 0)
    throw std::invalid_argument("add_penalties: negative weight");
  if (h.n_qubits() % 2 != 0)
    throw std::invalid_argument("add_penalties: odd qubit count");
  if (cfg.mu_n == 0.0 && cfg.mu_s == 0.0) return h;
  PauliSum out = h;
  auto add_quadratic = [&](PauliSum op, double target, double weight) {
    if (weight == 0.0) return;
    PauliSum shifted = op;
    std::vector<WeightedTerm> shift_terms = shifted.to_terms();
    shift_terms.push_back({-target, PauliWord(h.n_qubits())});
    shifted = PauliSum::from_terms(h.n_qubits(), std::move(shift_terms));
    PauliSum sq = multiply_sums(shifted, shifted);
    std::vector<WeightedTerm> scaled = sq.to_terms();
    for (auto& t : scaled) t.coeff *= weight;
    out = merge_sums(
        out, PauliSum::from_terms(h.n_qubits(), std::move(scaled)));
  };
  add_quadratic(number_operator(h.n_qubits()), cfg.n_target, cfg.mu_n);
  add_quadratic(sz_operator(h.n_qubits()), cfg.sz_target, cfg.mu_s);
  return out;
}

}  // namespace iqcc
