#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "iqcc/dressing.hpp"
#include "iqcc/pauli.hpp"
#include "iqcc/qmf.hpp"

namespace iqcc::oracle {

/// Largest qubit count the dense reference machinery accepts (16M
/// amplitudes).
constexpr std::size_t kMaxQubits = 20;

/// Exact statevector on n <= kMaxQubits qubits; qubit 0 is the least
/// significant bit of the basis index.
struct DenseState {
  std::size_t n_qubits = 0;
  std::vector<Complex> amp;

  DenseState() = default;
  explicit DenseState(std::size_t n) : n_qubits(n) {
    if (n > kMaxQubits)
      throw std::invalid_argument("DenseState: qubit cap exceeded");
    amp.assign(std::size_t{1} << n, Complex{});
  }

  static DenseState basis(std::size_t n, std::uint64_t index) {
    DenseState s(n);
    s.amp[index] = 1.0;
    return s;
  }

  std::size_t dim() const { return amp.size(); }

  double norm() const {
    double s = 0.0;
    for (const Complex& a : amp) s += std::norm(a);
    return std::sqrt(s);
  }

  void normalize() {
    double n = norm();
    if (n == 0.0) throw std::runtime_error("cannot normalize zero state");
    for (Complex& a : amp) a /= n;
  }
};

inline Complex dot(const DenseState& a, const DenseState& b) {
  Complex s{};
  for (std::size_t i = 0; i < a.amp.size(); ++i)
    s += std::conj(a.amp[i]) * b.amp[i];
  return s;
}

namespace detail {

struct TermBits {
  std::uint64_t x = 0;
  std::uint64_t z = 0;
  Complex base;  // coeff * i^(y count)
};

inline TermBits term_bits(PauliView w, Complex coeff) {
  TermBits t;
  t.x = w.x[0];
  t.z = w.z[0];
  int yc = std::popcount(t.x & t.z) & 3;
  t.base = coeff * phase_value(yc);
  return t;
}

template <typename Body>
inline void parallel_blocks(std::size_t size, Body&& body) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw == 1 || size < (std::size_t{1} << 14)) {
    body(0, size);
    return;
  }
  std::size_t chunk = (size + hw - 1) / hw;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < hw; ++t) {
    std::size_t lo = t * chunk, hi = std::min(size, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Exact action of a Pauli word: bit flips from the x bits, sign flips
/// from the z bits, i-phases from the Y letters.
inline DenseState apply_word(const DenseState& state, PauliView p) {
  DenseState out(state.n_qubits);
  detail::TermBits t = detail::term_bits(p, 1.0);
  const Complex* in = state.amp.data();
  Complex* o = out.amp.data();
  detail::parallel_blocks(state.dim(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      std::uint64_t m = r ^ t.x;
      bool neg = std::popcount(t.z & m) & 1;
      o[r] = neg ? -t.base * in[m] : t.base * in[m];
    }
  });
  return out;
}

inline DenseState apply_word(const DenseState& state, const PauliWord& p) {
  if (p.n_qubits() != state.n_qubits)
    throw std::invalid_argument("apply_word: mismatched qubit counts");
  return apply_word(state, p.view());
}

/// out = H |state>, matrix-free, blocked over the output index so the
/// working set stays cache resident.
inline void apply_sum(const PauliSum& h, const DenseState& state,
                      DenseState& out) {
  if (h.n_qubits() != state.n_qubits)
    throw std::invalid_argument("apply_sum: mismatched qubit counts");
  std::vector<detail::TermBits> terms(h.size());
  for (std::size_t k = 0; k < h.size(); ++k)
    terms[k] = detail::term_bits(h.word(k), h.coeff(k));
  const Complex* in = state.amp.data();
  Complex* o = out.amp.data();
  const std::size_t dim = state.dim();
  constexpr std::size_t kBlock = std::size_t{1} << 14;
  detail::parallel_blocks(dim, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t base = lo; base < hi; base += kBlock) {
      std::size_t end = std::min(hi, base + kBlock);
      for (std::size_t r = base; r < end; ++r) o[r] = Complex{};
      for (const auto& t : terms) {
        for (std::size_t r = base; r < end; ++r) {
          std::uint64_t m = r ^ t.x;
          bool neg = std::popcount(t.z & m) & 1;
          o[r] += neg ? -t.base * in[m] : t.base * in[m];
        }
      }
    }
  });
}

inline DenseState apply_sum(const PauliSum& h, const DenseState& state) {
  DenseState out(state.n_qubits);
  apply_sum(h, state, out);
  return out;
}

inline Complex expectation(const PauliSum& h, const DenseState& state) {
  DenseState hs = apply_sum(h, state);
  return dot(state, hs);
}

/// Diagonal of H in the computational basis (sum over x-free terms).
inline std::vector<double> diagonal(const PauliSum& h) {
  std::size_t dim = std::size_t{1} << h.n_qubits();
  std::vector<double> d(dim, 0.0);
  for (std::size_t k = 0; k < h.size(); ++k) {
    PauliView w = h.word(k);
    if (w.x[0] != 0) continue;
    double c = h.coeff(k).real();
    std::uint64_t z = w.z[0];
    for (std::size_t b = 0; b < dim; ++b)
      d[b] += (std::popcount(z & b) & 1) ? -c : c;
  }
  return d;
}

namespace detail {

/// Jacobi eigensolver for small real symmetric matrices (row-major).
inline void jacobi_eigh(std::vector<double>& a, std::size_t n,
                        std::vector<double>& eigvals,
                        std::vector<double>& eigvecs) {
  eigvecs.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eigvecs[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double cth = 1.0 / std::sqrt(t * t + 1.0), sth = t * cth;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = cth * akp - sth * akq;
          a[k * n + q] = sth * akp + cth * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = cth * apk - sth * aqk;
          a[q * n + k] = sth * apk + cth * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = eigvecs[k * n + p], vkq = eigvecs[k * n + q];
          eigvecs[k * n + p] = cth * vkp - sth * vkq;
          eigvecs[k * n + q] = sth * vkp + cth * vkq;
        }
      }
    }
  }
  eigvals.resize(n);
  for (std::size_t i = 0; i < n; ++i) eigvals[i] = a[i * n + i];
}

/// Lowest eigenpair of a small complex Hermitian matrix via the real
/// symmetric embedding [[Re,-Im],[Im,Re]].
inline void hermitian_lowest(const std::vector<Complex>& a, std::size_t n,
                             double& eigval, std::vector<Complex>& eigvec) {
  std::size_t m = 2 * n;
  std::vector<double> emb(m * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double re = a[i * n + j].real(), im = a[i * n + j].imag();
      emb[i * m + j] = re;
      emb[(i + n) * m + (j + n)] = re;
      emb[i * m + (j + n)] = -im;
      emb[(i + n) * m + j] = im;
    }
  }
  std::vector<double> vals, vecs;
  jacobi_eigh(emb, m, vals, vecs);
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (vals[i] < vals[best]) best = i;
  eigval = vals[best];
  eigvec.assign(n, Complex{});
  double nrm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    eigvec[i] = Complex(vecs[i * m + best], vecs[(i + n) * m + best]);
    nrm += std::norm(eigvec[i]);
  }
  nrm = std::sqrt(nrm);
  for (auto& v : eigvec) v /= nrm;
}

}  // namespace detail

struct GroundStateOptions {
  double residual_tol = 1e-9;
  std::size_t max_subspace = 16;
  std::size_t restart_keep = 4;
  std::size_t max_matvecs = 2000;
};

struct GroundStateResult {
  double energy = 0.0;
  double residual = 0.0;
  std::size_t matvecs = 0;
  bool converged = false;
  DenseState vector;
};

/// Minimum eigenvalue via a diagonally preconditioned Davidson iteration
/// on the matrix-free apply_sum action.
inline GroundStateResult ground_state(const PauliSum& h,
                                      const GroundStateOptions& opts = {}) {
  if (h.n_qubits() > kMaxQubits)
    throw std::invalid_argument("ground_state: qubit cap exceeded");
  const std::size_t dim = std::size_t{1} << h.n_qubits();
  GroundStateResult res;
  if (h.empty()) {  // zero operator
    res.energy = 0.0;
    res.converged = true;
    res.vector = DenseState::basis(h.n_qubits(), 0);
    return res;
  }

  std::vector<double> diag = diagonal(h);
  std::size_t start =
      std::min_element(diag.begin(), diag.end()) - diag.begin();

  std::vector<DenseState> basis, h_basis;
  std::mt19937_64 rng(0x51c39ULL);
  auto orthonormalize = [&](DenseState& v) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) {
        Complex c = dot(b, v);
        for (std::size_t i = 0; i < dim; ++i) v.amp[i] -= c * b.amp[i];
      }
    double n = v.norm();
    if (n < 1e-10) return false;
    for (auto& a : v.amp) a /= n;
    return true;
  };

  DenseState v0 = DenseState::basis(h.n_qubits(), start);
  basis.push_back(std::move(v0));
  h_basis.push_back(apply_sum(h, basis.back()));
  ++res.matvecs;

  std::vector<Complex> proj;
  while (res.matvecs < opts.max_matvecs) {
    std::size_t k = basis.size();
    proj.assign(k * k, Complex{});
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        proj[i * k + j] = dot(basis[i], h_basis[j]);
    double theta;
    std::vector<Complex> y;
    detail::hermitian_lowest(proj, k, theta, y);

    DenseState ritz(h.n_qubits()), h_ritz(h.n_qubits());
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < dim; ++i) {
        ritz.amp[i] += y[j] * basis[j].amp[i];
        h_ritz.amp[i] += y[j] * h_basis[j].amp[i];
      }
    DenseState resid(h.n_qubits());
    for (std::size_t i = 0; i < dim; ++i)
      resid.amp[i] = h_ritz.amp[i] - theta * ritz.amp[i];
    double rnorm = resid.norm();
    res.energy = theta;
    res.residual = rnorm;
    if (rnorm < opts.residual_tol) {
      res.converged = true;
      res.vector = std::move(ritz);
      return res;
    }

    if (k >= opts.max_subspace) {
      // thick restart: keep the current Ritz vector plus fresh headroom
      std::vector<DenseState> nb, nhb;
      nb.push_back(ritz);
      nhb.push_back(h_ritz);
      basis = std::move(nb);
      h_basis = std::move(nhb);
    }

    // diagonal preconditioner
    DenseState t(h.n_qubits());
    for (std::size_t i = 0; i < dim; ++i) {
      double d = diag[i] - theta;
      if (std::abs(d) < 1e-2) d = d < 0 ? -1e-2 : 1e-2;
      t.amp[i] = resid.amp[i] / d;
    }
    if (!orthonormalize(t)) {
      // stagnation: inject a deterministic random direction
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (std::size_t i = 0; i < dim; ++i) t.amp[i] = Complex(u(rng), u(rng));
      if (!orthonormalize(t)) break;
    }
    basis.push_back(std::move(t));
    h_basis.push_back(apply_sum(h, basis.back()));
    ++res.matvecs;
  }
  return res;
}

/// Minimum eigenvalue of h; throws if the iteration does not reach the
/// residual tolerance.
inline double ground_energy(const PauliSum& h,
                            const GroundStateOptions& opts = {}) {
  GroundStateResult r = ground_state(h, opts);
  if (!r.converged)
    throw std::runtime_error("ground_energy: Davidson did not converge");
  return r.energy;
}

/// The QMF product state of the given Bloch angles.
inline DenseState qmf_state(const QmfState& omega) {
  DenseState s(omega.n_qubits());
  const std::size_t n = omega.n_qubits();
  s.amp[0] = 1.0;
  // build up qubit by qubit: amplitudes factorize
  for (std::size_t j = 0; j < n; ++j) {
    Complex a0 = std::cos(omega.theta[j] / 2.0);
    Complex a1 = std::polar(std::sin(omega.theta[j] / 2.0), omega.phi[j]);
    std::size_t stride = std::size_t{1} << j;
    for (std::size_t base = 0; base < s.dim(); base += 2 * stride) {
      for (std::size_t i = base; i < base + stride; ++i) {
        Complex lo = s.amp[i];
        s.amp[i] = lo * a0;
        s.amp[i + stride] = lo * a1;
      }
    }
  }
  return s;
}

/// Applies the QCC unitary exactly:
///   prod_k exp(-i tau_k/2 P_k) |omega>,
/// entangler 0 leftmost, so the factor for the last entangler acts first.
inline DenseState ansatz_state(const QmfState& omega, const Ansatz& ansatz) {
  DenseState s = qmf_state(omega);
  for (std::size_t k = ansatz.size(); k-- > 0;) {
    double half = ansatz.tau[k] / 2.0;
    DenseState ps = apply_word(s, ansatz.entanglers[k]);
    Complex c = std::cos(half), ms = Complex(0.0, -std::sin(half));
    for (std::size_t i = 0; i < s.dim(); ++i)
      s.amp[i] = c * s.amp[i] + ms * ps.amp[i];
  }
  return s;
}

struct Observables {
  double n_electrons = 0.0;
  double sz = 0.0;
};

/// <N> and <Sz> under the interleaved spin-orbital convention (qubit 2p
/// is orbital p alpha, qubit 2p+1 beta).
inline Observables observables(const DenseState& state) {
  if (state.n_qubits % 2 != 0)
    throw std::invalid_argument("observables: odd qubit count");
  constexpr std::uint64_t kAlpha = 0x5555555555555555ULL;
  Observables obs;
  for (std::size_t b = 0; b < state.dim(); ++b) {
    double w = std::norm(state.amp[b]);
    if (w == 0.0) continue;
    int na = std::popcount(b & kAlpha);
    int nb = std::popcount(b & ~kAlpha & (state.dim() - 1));
    obs.n_electrons += w * (na + nb);
    obs.sz += w * 0.5 * (na - nb);
  }
  return obs;
}

}  // namespace iqcc::oracle
