#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "iqcc/minimize.hpp"
#include "iqcc/pauli.hpp"

namespace iqcc {

/// Qubit mean-field reference state: one Bloch-sphere direction per
/// qubit, |omega> = prod_j (cos(theta_j/2)|0> + e^{i phi_j} sin(theta_j/2)|1>).
struct QmfState {
  std::vector<double> theta;
  std::vector<double> phi;

  QmfState() = default;
  explicit QmfState(std::size_t n_qubits)
      : theta(n_qubits, 0.0), phi(n_qubits, 0.0) {}

  std::size_t n_qubits() const { return theta.size(); }

  /// True when every qubit sits at a pole (theta a multiple of pi), where
  /// |omega> is a computational basis state.
  bool at_poles(double tol = 1e-12) const {
    for (double t : theta)
      if (std::abs(std::sin(t)) > tol) return false;
    return true;
  }
};

/// theta_j = pi for occupied spin orbitals, 0 otherwise; all phi zero.
inline QmfState hf_reference(const std::vector<bool>& occupations) {
  QmfState omega(occupations.size());
  for (std::size_t j = 0; j < occupations.size(); ++j)
    if (occupations[j]) omega.theta[j] = std::numbers::pi;
  return omega;
}

namespace detail {

template <typename Fn>
inline void for_each_set_bit(std::span<const Block> bits, Fn&& fn) {
  for (std::size_t blk = 0; blk < bits.size(); ++blk) {
    Block b = bits[blk];
    while (b) {
      unsigned bit = std::countr_zero(b);
      fn(blk * kBlockBits + bit);
      b &= b - 1;
    }
  }
}

/// Single-qubit expectation of the letter at qubit j.
inline double qmf_factor(const QmfState& omega, std::size_t j, bool x,
                         bool z) {
  if (x && z) return std::sin(omega.theta[j]) * std::sin(omega.phi[j]);  // Y
  if (x) return std::sin(omega.theta[j]) * std::cos(omega.phi[j]);       // X
  return std::cos(omega.theta[j]);                                       // Z
}

}  // namespace detail

/// <omega|P|omega>: product over qubits of I->1, Z->cos t,
/// X->sin t cos p, Y->sin t sin p.
inline double expect_word(const QmfState& omega, PauliView p) {
  double val = 1.0;
  for (std::size_t blk = 0; blk < p.x.size(); ++blk) {
    Block support = p.x[blk] | p.z[blk];
    while (support) {
      unsigned bit = std::countr_zero(support);
      std::size_t j = blk * kBlockBits + bit;
      Block mask = Block{1} << bit;
      val *= detail::qmf_factor(omega, j, p.x[blk] & mask, p.z[blk] & mask);
      support &= support - 1;
    }
  }
  return val;
}

/// <omega|H|omega> in hartree; terms accumulated in canonical order.
inline double expect_sum(const QmfState& omega, const PauliSum& h) {
  if (!h.empty() && h.n_qubits() != omega.n_qubits())
    throw std::invalid_argument("expect_sum: mismatched qubit counts");
  double e = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    e += h.coeff(i).real() * expect_word(omega, h.word(i));
  return e;
}

/// Energy plus analytic gradient with respect to all angles, packed as
/// (theta_0..theta_{n-1}, phi_0..phi_{n-1}).
inline double qmf_energy_gradient(const PauliSum& h, const QmfState& omega,
                                  std::span<double> grad) {
  const std::size_t n = omega.n_qubits();
  std::fill(grad.begin(), grad.end(), 0.0);
  double energy = 0.0;
  std::vector<std::size_t> support;
  std::vector<double> factor, prefix, suffix;
  for (std::size_t t = 0; t < h.size(); ++t) {
    PauliView w = h.word(t);
    support.clear();
    factor.clear();
    for (std::size_t blk = 0; blk < w.x.size(); ++blk) {
      Block s = w.x[blk] | w.z[blk];
      while (s) {
        unsigned bit = std::countr_zero(s);
        support.push_back(blk * kBlockBits + bit);
        s &= s - 1;
      }
    }
    const double c = h.coeff(t).real();
    for (std::size_t j : support) {
      bool x = (w.x[j / kBlockBits] >> (j % kBlockBits)) & 1;
      bool z = (w.z[j / kBlockBits] >> (j % kBlockBits)) & 1;
      factor.push_back(detail::qmf_factor(omega, j, x, z));
    }
    const std::size_t m = support.size();
    prefix.assign(m + 1, 1.0);
    suffix.assign(m + 1, 1.0);
    for (std::size_t k = 0; k < m; ++k) prefix[k + 1] = prefix[k] * factor[k];
    for (std::size_t k = m; k-- > 0;) suffix[k] = suffix[k + 1] * factor[k];
    energy += c * prefix[m];
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t j = support[k];
      bool x = (w.x[j / kBlockBits] >> (j % kBlockBits)) & 1;
      bool z = (w.z[j / kBlockBits] >> (j % kBlockBits)) & 1;
      double rest = prefix[k] * suffix[k + 1];
      double st = std::sin(omega.theta[j]), ct = std::cos(omega.theta[j]);
      double sp = std::sin(omega.phi[j]), cp = std::cos(omega.phi[j]);
      double dth, dph;
      if (x && z) {  // Y
        dth = ct * sp;
        dph = st * cp;
      } else if (x) {  // X
        dth = ct * cp;
        dph = -st * sp;
      } else {  // Z
        dth = -st;
        dph = 0.0;
      }
      grad[j] += c * rest * dth;
      grad[n + j] += c * rest * dph;
    }
  }
  return energy;
}

struct QmfResult {
  QmfState omega;
  double energy = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Quasi-Newton minimization of <omega|H|omega> over all Bloch angles,
/// starting from omega0. Angles are unconstrained.
inline QmfResult optimize_qmf(const PauliSum& h, const QmfState& omega0,
                              const MinimizeOptions& opts = {}) {
  const std::size_t n = omega0.n_qubits();
  std::vector<double> x0(2 * n);
  std::copy(omega0.theta.begin(), omega0.theta.end(), x0.begin());
  std::copy(omega0.phi.begin(), omega0.phi.end(), x0.begin() + n);
  QmfState scratch(n);
  auto fg = [&](std::span<const double> x, std::span<double> g) {
    std::copy(x.begin(), x.begin() + n, scratch.theta.begin());
    std::copy(x.begin() + n, x.end(), scratch.phi.begin());
    return qmf_energy_gradient(h, scratch, g);
  };
  MinimizeResult r = minimize(fg, std::move(x0), opts);
  QmfResult out;
  out.omega = QmfState(n);
  std::copy(r.x.begin(), r.x.begin() + n, out.omega.theta.begin());
  std::copy(r.x.begin() + n, r.x.end(), out.omega.phi.begin());
  out.energy = r.f;
  out.converged = r.converged;
  out.iterations = r.iterations;
  return out;
}

}  // namespace iqcc
