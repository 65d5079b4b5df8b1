#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "iqcc/dis.hpp"
#include "iqcc/dressing.hpp"
#include "iqcc/minimize.hpp"
#include "iqcc/partition.hpp"
#include "iqcc/pauli.hpp"
#include "iqcc/qmf.hpp"

namespace iqcc {

/// Exact variational energy E(tau) = <omega| U^dag H U |omega> through
/// the fully dressed Hamiltonian; no compression.
inline double qcc_energy(const PauliSum& h, const QmfState& omega,
                         const Ansatz& ansatz) {
  return expect_sum(
      omega, dress_sequence(h, ansatz, 0.0,
                            std::numeric_limits<std::size_t>::max(), nullptr,
                            {0.0, true}));
}

namespace detail {

/// d/dtau of a single dressing applied to `a`: the anticommuting part of
/// a maps to -sin(tau) c T + cos(tau) (phase) c (T*P).
inline PauliSum dress_derivative(const PauliSum& a, const DressOp& op) {
  const double c = std::cos(op.amplitude), s = std::sin(op.amplitude);
  PauliSum survivors(a.n_qubits());
  PauliSum products_raw(a.n_qubits());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (commutes(a.word(i), op.generator)) continue;
    survivors.append(a.word(i), -s * a.coeff(i));
    products_raw.append_product(a.word(i), op.generator.view(),
                                a.coeff(i) * c * Complex{0.0, -1.0});
  }
  PauliSum products = PauliSum::from_terms(
      a.n_qubits(), products_raw.to_terms(), {0.0, false});
  MergeOptions opts;
  opts.drop_threshold = 0.0;
  opts.check_hermitian = false;
  return merge_sums(survivors, products, opts);
}

}  // namespace detail

/// Analytic dE/dtau_k for all k. Component k is the expectation of the
/// k-th dressing's derivative operator, itself dressed through the
/// remaining entanglers; at tau = 0 it reduces to the DIS screening
/// gradient of the corresponding generator.
inline std::vector<double> qcc_gradient(const PauliSum& h,
                                        const QmfState& omega,
                                        const Ansatz& ansatz) {
  const std::size_t n_ops = ansatz.size();
  std::vector<double> grad(n_ops, 0.0);
  MergeOptions exact{0.0, true};
  // forward chain A_k = h dressed through entanglers [0, k)
  std::vector<PauliSum> chain;
  chain.reserve(n_ops);
  chain.push_back(h);
  for (std::size_t k = 0; k + 1 < n_ops; ++k)
    chain.push_back(dress_single(
        chain.back(), {ansatz.entanglers[k], ansatz.tau[k]}, exact));
  for (std::size_t k = 0; k < n_ops; ++k) {
    PauliSum d = detail::dress_derivative(
        chain[k], {ansatz.entanglers[k], ansatz.tau[k]});
    for (std::size_t j = k + 1; j < n_ops; ++j)
      d = dress_single(d, {ansatz.entanglers[j], ansatz.tau[j]},
                       {0.0, false});
    grad[k] = expect_sum(omega, d);
  }
  return grad;
}

struct AmplitudeOptions {
  std::size_t max_iterations = 200;
  double grad_tol = 1e-8;
};

struct AmplitudeResult {
  std::vector<double> tau;
  double energy = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Quasi-Newton minimization of E(tau) from tau = 0 with the exact
/// analytic gradient. A stationary start that is not a minimum (the
/// gradient vanishes but a coordinate probe lowers the energy) is
/// escaped through the probe point. The returned energy never exceeds
/// E(0).
inline AmplitudeResult optimize_amplitudes(
    const PauliSum& h, const QmfState& omega,
    const std::vector<PauliWord>& entanglers,
    const AmplitudeOptions& opts = {}) {
  if (entanglers.empty())
    throw std::invalid_argument("optimize_amplitudes: no entanglers");
  Ansatz scratch;
  scratch.entanglers = entanglers;
  scratch.tau.assign(entanglers.size(), 0.0);
  auto energy_at = [&](std::span<const double> x) {
    std::copy(x.begin(), x.end(), scratch.tau.begin());
    return qcc_energy(h, omega, scratch);
  };
  auto fg = [&](std::span<const double> x, std::span<double> g) {
    std::copy(x.begin(), x.end(), scratch.tau.begin());
    std::vector<double> grad = qcc_gradient(h, omega, scratch);
    std::copy(grad.begin(), grad.end(), g.begin());
    return qcc_energy(h, omega, scratch);
  };
  std::vector<double> x0(entanglers.size(), 0.0);
  {
    std::vector<double> g0(entanglers.size());
    double e0 = fg(x0, g0);
    double gmax = 0.0;
    for (double g : g0) gmax = std::max(gmax, std::abs(g));
    if (gmax < opts.grad_tol) {
      // stationary start: probe each coordinate for a descent
      double best = e0;
      std::vector<double> best_x = x0;
      for (std::size_t k = 0; k < entanglers.size(); ++k) {
        for (double delta : {0.1, -0.1}) {
          std::vector<double> probe = x0;
          probe[k] = delta;
          double ep = energy_at(probe);
          if (ep < best - 1e-14 * std::max(1.0, std::abs(best))) {
            best = ep;
            best_x = probe;
          }
        }
      }
      if (best_x == x0)  // a genuine (local) minimum: keep tau = 0
        return {std::move(x0), e0, true, 0};
      x0 = std::move(best_x);
    }
  }
  MinimizeOptions mopts;
  mopts.max_iterations = opts.max_iterations;
  mopts.grad_tol = opts.grad_tol;
  MinimizeResult r = minimize(fg, std::move(x0), mopts);
  return {std::move(r.x), r.f, r.converged, r.iterations};
}

/// One subset term of the truncated unitary expansion: the ordered
/// product of the chosen entanglers collapsed to i^phase * word.
struct PolySubset {
  std::vector<std::uint32_t> indices;  // ascending entangler indices
  PauliWord word;
  int phase_exponent = 0;
};

/// Truncated symmetric-polynomial expansion of the QCC unitary,
///   U = prod_k (cos(tau_k/2) I - i sin(tau_k/2) P_k),
/// keeping products over entangler subsets of size <= order_k.
struct PolyExpansion {
  std::size_t order_k = 0;
  std::size_t n_entanglers = 0;
  std::size_t n_qubits = 0;
  std::vector<PolySubset> subsets;

  /// Subset weight vector q(tau): q_S = i^{phase_S} (-i)^{|S|}
  /// prod_{k in S} sin(tau_k/2) prod_{k not in S} cos(tau_k/2).
  void weights(std::span<const double> tau,
               std::vector<Complex>& q) const {
    q.resize(subsets.size());
    std::vector<double> ch(n_entanglers), sh(n_entanglers);
    for (std::size_t k = 0; k < n_entanglers; ++k) {
      ch[k] = std::cos(tau[k] / 2.0);
      sh[k] = std::sin(tau[k] / 2.0);
    }
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      double mag = 1.0;
      std::size_t pos = 0;
      const auto& idx = subsets[s].indices;
      for (std::size_t k = 0; k < n_entanglers; ++k) {
        if (pos < idx.size() && idx[pos] == k) {
          mag *= sh[k];
          ++pos;
        } else {
          mag *= ch[k];
        }
      }
      int exp = (subsets[s].phase_exponent + 3 * int(idx.size())) & 3;
      q[s] = mag * phase_value(exp);
    }
  }

  /// d q / d tau_m (the factor for entangler m differentiated).
  void weight_derivatives(std::span<const double> tau, std::size_t m,
                          std::vector<Complex>& dq) const {
    dq.resize(subsets.size());
    std::vector<double> ch(n_entanglers), sh(n_entanglers);
    for (std::size_t k = 0; k < n_entanglers; ++k) {
      ch[k] = std::cos(tau[k] / 2.0);
      sh[k] = std::sin(tau[k] / 2.0);
    }
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      double mag = 1.0;
      std::size_t pos = 0;
      const auto& idx = subsets[s].indices;
      for (std::size_t k = 0; k < n_entanglers; ++k) {
        bool in = pos < idx.size() && idx[pos] == k;
        if (in) ++pos;
        if (k == m)
          mag *= in ? 0.5 * ch[k] : -0.5 * sh[k];
        else
          mag *= in ? sh[k] : ch[k];
      }
      int exp = (subsets[s].phase_exponent + 3 * int(idx.size())) & 3;
      dq[s] = mag * phase_value(exp);
    }
  }
};

/// Builds the expansion over all entangler subsets of size <= k.
/// Throws when the subset count would exceed the budget.
inline PolyExpansion build_poly(const std::vector<PauliWord>& entanglers,
                                const QmfState& omega, std::size_t k,
                                std::size_t subset_budget = 200000) {
  const std::size_t n = entanglers.size();
  if (k > n) throw std::invalid_argument("build_poly: order exceeds N");
  for (const auto& p : entanglers)
    if (p.n_qubits() != omega.n_qubits())
      throw std::invalid_argument("build_poly: mismatched qubit counts");
    else if (p.is_identity())
      throw std::invalid_argument("build_poly: identity entangler");

  PolyExpansion ex;
  ex.order_k = k;
  ex.n_entanglers = n;
  ex.n_qubits = omega.n_qubits();

  // count first so the budget check precedes any allocation
  double count = 0;
  {
    double binom = 1;
    for (std::size_t j = 0; j <= k; ++j) {
      count += binom;
      binom = binom * double(n - j) / double(j + 1);
      if (count > double(subset_budget))
        throw std::runtime_error("build_poly: subset budget exceeded");
    }
  }

  ex.subsets.push_back({{}, PauliWord(ex.n_qubits), 0});
  std::size_t size_begin = 0, size_end = 1;
  for (std::size_t sz = 1; sz <= k; ++sz) {
    std::size_t next_begin = ex.subsets.size();
    for (std::size_t s = size_begin; s < size_end; ++s) {
      std::uint32_t lo =
          ex.subsets[s].indices.empty() ? 0 : ex.subsets[s].indices.back() + 1;
      for (std::uint32_t e = lo; e < n; ++e) {
        // extend the ordered product on the right
        WordProduct prod = multiply(ex.subsets[s].word, entanglers[e]);
        PolySubset sub;
        sub.indices = ex.subsets[s].indices;
        sub.indices.push_back(e);
        sub.word = std::move(prod.word);
        sub.phase_exponent =
            (ex.subsets[s].phase_exponent + prod.phase_exponent) & 3;
        ex.subsets.push_back(std::move(sub));
      }
    }
    size_begin = next_begin;
    size_end = ex.subsets.size();
  }
  return ex;
}

/// Pairwise expectation kernels of an expansion: everything tau-independent.
///   n_kernel[a,b] = <omega| W_a W_b |omega>
///   h_kernel[a,b] = sum_k C_k <omega| W_a P_k W_b |omega>
struct PolyKernels {
  std::size_t t = 0;
  std::vector<Complex> h_kernel;
  std::vector<Complex> n_kernel;
};

namespace detail {

/// <omega| W_a H W_b |omega> for one canonical sum. When omega sits at
/// poles only terms whose flip pattern equals x_a xor x_b contribute and
/// the canonical x-major order makes them one contiguous run.
inline Complex sandwich(const PauliSum& h, const QmfState& omega,
                        PauliView wa, PauliView wb, bool poles,
                        PauliWord& tmp1, PauliWord& tmp2,
                        PauliWord& target) {
  Complex acc{};
  std::size_t lo = 0, hi = h.size();
  if (poles) {
    for (std::size_t blk = 0; blk < wa.x.size(); ++blk) {
      target.x_bits()[blk] = wa.x[blk] ^ wb.x[blk];
      target.z_bits()[blk] = 0;
    }
    // locate the contiguous x-run via binary search on the x plane
    auto x_less = [&](std::size_t i, PauliView t) {
      PauliView w = h.word(i);
      for (std::size_t b = 0; b < w.x.size(); ++b) {
        Block diff = w.x[b] ^ t.x[b];
        if (diff) {
          Block low = diff & (~diff + 1);
          return (w.x[b] & low) == 0;
        }
      }
      return false;
    };
    std::size_t l = 0, r = h.size();
    while (l < r) {
      std::size_t mid = (l + r) / 2;
      if (x_less(mid, target.view()))
        l = mid + 1;
      else
        r = mid;
    }
    lo = l;
    hi = lo;
    while (hi < h.size() &&
           std::equal(h.word(hi).x.begin(), h.word(hi).x.end(),
                      target.view().x.begin()))
      ++hi;
  }
  for (std::size_t i = lo; i < hi; ++i) {
    int t1 = multiply_into(wa, h.word(i), tmp1.x_bits(), tmp1.z_bits());
    int t2 =
        multiply_into(tmp1.view(), wb, tmp2.x_bits(), tmp2.z_bits());
    double e = expect_word(omega, tmp2.view());
    if (e != 0.0) acc += h.coeff(i) * phase_value((t1 + t2) & 3) * e;
  }
  return acc;
}

}  // namespace detail

/// Assembles the kernels against one Hamiltonian sum (additive in its
/// terms, so partitioned assembly just sums per-shard h_kernels).
inline PolyKernels build_poly_kernels(const PauliSum& h,
                                      const QmfState& omega,
                                      const PolyExpansion& ex) {
  const std::size_t t = ex.subsets.size();
  PolyKernels ker;
  ker.t = t;
  ker.h_kernel.assign(t * t, Complex{});
  ker.n_kernel.assign(t * t, Complex{});
  const bool poles = omega.at_poles();
  PauliWord tmp1(ex.n_qubits), tmp2(ex.n_qubits), target(ex.n_qubits);
  for (std::size_t a = 0; a < t; ++a) {
    for (std::size_t b = a; b < t; ++b) {
      PauliView wa = ex.subsets[a].word.view();
      PauliView wb = ex.subsets[b].word.view();
      int tw = multiply_into(wa, wb, tmp1.x_bits(), tmp1.z_bits());
      Complex nv = phase_value(tw) * expect_word(omega, tmp1.view());
      Complex hv = detail::sandwich(h, omega, wa, wb, poles, tmp1, tmp2,
                                    target);
      ker.n_kernel[a * t + b] = nv;
      ker.n_kernel[b * t + a] = std::conj(nv);
      ker.h_kernel[a * t + b] = hv;
      ker.h_kernel[b * t + a] = std::conj(hv);
    }
  }
  return ker;
}

/// Partitioned kernel assembly: each worker accumulates the h_kernel
/// contribution of its shards; elements combine through the same
/// fixed-order scalar reduction used for energies. The tau-independent
/// n_kernel comes from the expansion alone.
inline PolyKernels build_poly_kernels(const PartitionedSum& ph,
                                      const QmfState& omega,
                                      const PolyExpansion& ex,
                                      ExecutionMode mode =
                                          ExecutionMode::kDeterministic) {
  const std::size_t t = ex.subsets.size();
  std::vector<PolyKernels> per_worker(ph.map.n_workers);
  std::vector<std::vector<std::size_t>> owned(ph.map.n_workers);
  for (std::size_t p = 0; p < ph.shards.size(); ++p)
    owned[ph.map.owner[p]].push_back(p);
  detail::run_tasks(ph.map.n_workers, mode, [&](std::size_t w) {
    PolyKernels local;
    local.t = t;
    local.h_kernel.assign(t * t, Complex{});
    PauliWord tmp1(ex.n_qubits), tmp2(ex.n_qubits), target(ex.n_qubits);
    const bool poles = omega.at_poles();
    for (std::size_t p : owned[w])
      for (std::size_t a = 0; a < t; ++a)
        for (std::size_t b = a; b < t; ++b) {
          Complex hv = detail::sandwich(ph.shards[p], omega,
                                        ex.subsets[a].word.view(),
                                        ex.subsets[b].word.view(), poles,
                                        tmp1, tmp2, target);
          local.h_kernel[a * t + b] += hv;
          if (b != a) local.h_kernel[b * t + a] += std::conj(hv);
        }
    per_worker[w] = std::move(local);
  });
  PolyKernels ker;
  ker.t = t;
  ker.h_kernel.assign(t * t, Complex{});
  ker.n_kernel.assign(t * t, Complex{});
  std::vector<double> re(ph.map.n_workers), im(ph.map.n_workers);
  for (std::size_t e = 0; e < t * t; ++e) {
    for (std::size_t w = 0; w < ph.map.n_workers; ++w) {
      re[w] = per_worker[w].h_kernel[e].real();
      im[w] = per_worker[w].h_kernel[e].imag();
    }
    ker.h_kernel[e] = Complex{reduce_scalar(re), reduce_scalar(im)};
  }
  PauliWord tmp1(ex.n_qubits);
  for (std::size_t a = 0; a < t; ++a)
    for (std::size_t b = a; b < t; ++b) {
      int tw = multiply_into(ex.subsets[a].word.view(),
                             ex.subsets[b].word.view(), tmp1.x_bits(),
                             tmp1.z_bits());
      Complex nv = phase_value(tw) * expect_word(omega, tmp1.view());
      ker.n_kernel[a * t + b] = nv;
      ker.n_kernel[b * t + a] = std::conj(nv);
    }
  return ker;
}

namespace detail {

inline void kernel_matvec(const std::vector<Complex>& m, std::size_t t,
                          const std::vector<Complex>& v,
                          std::vector<Complex>& out) {
  out.assign(t, Complex{});
  for (std::size_t a = 0; a < t; ++a) {
    Complex acc{};
    for (std::size_t b = 0; b < t; ++b) acc += m[a * t + b] * v[b];
    out[a] = acc;
  }
}

inline double quad_re(const std::vector<Complex>& v,
                      const std::vector<Complex>& mv) {
  Complex acc{};
  for (std::size_t i = 0; i < v.size(); ++i)
    acc += std::conj(v[i]) * mv[i];
  return acc.real();
}

}  // namespace detail

struct PolyValue {
  double energy = 0.0;
  double norm = 0.0;  // <Psi_K | Psi_K>
};

/// Rayleigh quotient <Psi_K|H|Psi_K> / <Psi_K|Psi_K> from prebuilt
/// kernels. Throws when the truncated state's norm vanishes.
inline PolyValue poly_energy_from_kernels(const PolyExpansion& ex,
                                          const PolyKernels& ker,
                                          std::span<const double> tau) {
  std::vector<Complex> q, hq, nq;
  ex.weights(tau, q);
  detail::kernel_matvec(ker.h_kernel, ker.t, q, hq);
  detail::kernel_matvec(ker.n_kernel, ker.t, q, nq);
  double num = detail::quad_re(q, hq);
  double nrm = detail::quad_re(q, nq);
  if (nrm < 1e-14)
    throw std::runtime_error(
        "poly_energy: vanishing norm (over-truncation)");
  return {num / nrm, nrm};
}

/// Gradient of the Rayleigh quotient; also returns the value.
inline PolyValue poly_gradient_from_kernels(const PolyExpansion& ex,
                                            const PolyKernels& ker,
                                            std::span<const double> tau,
                                            std::span<double> grad) {
  std::vector<Complex> q, hq, nq, dq;
  ex.weights(tau, q);
  detail::kernel_matvec(ker.h_kernel, ker.t, q, hq);
  detail::kernel_matvec(ker.n_kernel, ker.t, q, nq);
  double num = detail::quad_re(q, hq);
  double nrm = detail::quad_re(q, nq);
  if (nrm < 1e-14)
    throw std::runtime_error(
        "poly_energy: vanishing norm (over-truncation)");
  double energy = num / nrm;
  for (std::size_t m = 0; m < ex.n_entanglers; ++m) {
    ex.weight_derivatives(tau, m, dq);
    Complex dh{}, dn{};
    for (std::size_t i = 0; i < q.size(); ++i) {
      dh += std::conj(dq[i]) * hq[i];
      dn += std::conj(dq[i]) * nq[i];
    }
    grad[m] = (2.0 * dh.real() - energy * 2.0 * dn.real()) / nrm;
  }
  return {energy, nrm};
}

/// Gauss-Newton-style Hessian of the Rayleigh quotient (second weight
/// derivatives dropped); useful for the exact-Newton mode on moderate
/// entangler counts.
inline std::vector<double> poly_hessian_from_kernels(
    const PolyExpansion& ex, const PolyKernels& ker,
    std::span<const double> tau) {
  const std::size_t n = ex.n_entanglers;
  std::vector<Complex> q;
  ex.weights(tau, q);
  std::vector<Complex> hq, nq;
  detail::kernel_matvec(ker.h_kernel, ker.t, q, hq);
  detail::kernel_matvec(ker.n_kernel, ker.t, q, nq);
  double num = detail::quad_re(q, hq);
  double nrm = detail::quad_re(q, nq);
  double energy = num / nrm;
  std::vector<std::vector<Complex>> dqs(n);
  for (std::size_t m = 0; m < n; ++m) ex.weight_derivatives(tau, m, dqs[m]);
  std::vector<double> hess(n * n, 0.0);
  std::vector<Complex> hdq, ndq;
  for (std::size_t m = 0; m < n; ++m) {
    detail::kernel_matvec(ker.h_kernel, ker.t, dqs[m], hdq);
    detail::kernel_matvec(ker.n_kernel, ker.t, dqs[m], ndq);
    for (std::size_t l = 0; l < n; ++l) {
      Complex hml{}, nml{};
      for (std::size_t i = 0; i < ker.t; ++i) {
        hml += std::conj(dqs[l][i]) * hdq[i];
        nml += std::conj(dqs[l][i]) * ndq[i];
      }
      hess[m * n + l] = 2.0 * (hml.real() - energy * nml.real()) / nrm;
    }
  }
  return hess;
}

/// One-shot evaluation: builds the kernels and evaluates the quotient.
inline double poly_energy(const PauliSum& h, const QmfState& omega,
                          const PolyExpansion& ex,
                          std::span<const double> tau) {
  PolyKernels ker = build_poly_kernels(h, omega, ex);
  return poly_energy_from_kernels(ex, ker, tau).energy;
}

struct PolyOptimizeOptions {
  std::size_t max_iterations = 300;
  double grad_tol = 1e-8;
  /// Line-search guard: reject steps whose truncated norm falls below.
  double min_norm = 1e-6;
  /// Exact-Hessian Newton steps instead of L-BFGS (moderate N only).
  bool use_newton = false;
  /// Additional deterministic starting points (e.g. the optimum of a
  /// lower truncation order during an order sweep); the best run wins.
  std::vector<std::vector<double>> extra_starts;
};

struct PolyOptimizeResult {
  std::vector<double> tau;
  double energy = 0.0;
  double norm = 1.0;
  bool converged = false;
  std::size_t iterations = 0;
};

namespace detail {

/// Newton iteration with Levenberg damping on the Gauss-Newton Hessian.
inline PolyOptimizeResult poly_newton(const PolyExpansion& ex,
                                      const PolyKernels& ker,
                                      const PolyOptimizeOptions& opts,
                                      std::vector<double> start) {
  const std::size_t n = ex.n_entanglers;
  PolyOptimizeResult res;
  res.tau = std::move(start);
  std::vector<double> grad(n);
  PolyValue val = poly_gradient_from_kernels(ex, ker, res.tau, grad);
  res.energy = val.energy;
  res.norm = val.norm;
  double lambda = 1e-8;
  for (; res.iterations < opts.max_iterations; ++res.iterations) {
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax < opts.grad_tol) {
      res.converged = true;
      return res;
    }
    std::vector<double> hess = poly_hessian_from_kernels(ex, ker, res.tau);
    bool stepped = false;
    for (int attempt = 0; attempt < 40 && !stepped; ++attempt) {
      std::vector<double> a = hess;
      for (std::size_t i = 0; i < n; ++i) a[i * n + i] += lambda;
      // Gaussian elimination with partial pivoting
      std::vector<double> rhs(n);
      for (std::size_t i = 0; i < n; ++i) rhs[i] = -grad[i];
      bool singular = false;
      std::vector<std::size_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      for (std::size_t col = 0; col < n && !singular; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
          if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < 1e-14) {
          singular = true;
          break;
        }
        if (piv != col) {
          for (std::size_t c = 0; c < n; ++c)
            std::swap(a[piv * n + c], a[col * n + c]);
          std::swap(rhs[piv], rhs[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
          double f = a[r * n + col] / a[col * n + col];
          for (std::size_t c = col; c < n; ++c)
            a[r * n + c] -= f * a[col * n + c];
          rhs[r] -= f * rhs[col];
        }
      }
      if (singular) {
        lambda = std::max(lambda * 10.0, 1e-6);
        continue;
      }
      std::vector<double> delta(n);
      for (std::size_t i = n; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t c = i + 1; c < n; ++c)
          s -= a[i * n + c] * delta[c];
        delta[i] = s / a[i * n + i];
      }
      // backtracking on the damped Newton step
      double step = 1.0;
      for (int bt = 0; bt < 30; ++bt, step *= 0.5) {
        std::vector<double> trial(n);
        for (std::size_t i = 0; i < n; ++i)
          trial[i] = res.tau[i] + step * delta[i];
        PolyValue tv;
        try {
          tv = poly_energy_from_kernels(ex, ker, trial);
        } catch (const std::runtime_error&) {
          continue;
        }
        if (tv.norm < opts.min_norm) continue;
        if (tv.energy < res.energy - 1e-15) {
          res.tau = std::move(trial);
          res.energy = tv.energy;
          res.norm = tv.norm;
          stepped = true;
          lambda = std::max(lambda * 0.3, 1e-12);
          break;
        }
      }
      if (!stepped) lambda = std::max(lambda * 10.0, 1e-6);
    }
    if (!stepped) return res;  // no further progress
    poly_gradient_from_kernels(ex, ker, res.tau, grad);
  }
  double gmax = 0.0;
  for (double g : grad) gmax = std::max(gmax, std::abs(g));
  res.converged = gmax < opts.grad_tol;
  return res;
}

}  // namespace detail

/// Minimizes the truncated-unitary Rayleigh quotient from tau = 0 (and
/// any extra starting points); the best run wins. The reported energy is
/// a true expectation of H in the truncated state and therefore a
/// variational upper bound on the ground energy.
inline PolyOptimizeResult poly_optimize(const PolyExpansion& ex,
                                        const PolyKernels& ker,
                                        const PolyOptimizeOptions& opts = {}) {
  const std::size_t n = ex.n_entanglers;
  std::vector<std::vector<double>> starts;
  starts.emplace_back(n, 0.0);
  for (const auto& s : opts.extra_starts)
    if (s.size() == n) starts.push_back(s);

  auto run_one = [&](std::vector<double> x0) -> PolyOptimizeResult {
    if (opts.use_newton)
      return detail::poly_newton(ex, ker, opts, std::move(x0));
    auto fg = [&](std::span<const double> x, std::span<double> g) {
      return poly_gradient_from_kernels(ex, ker, x, g).energy;
    };
    MinimizeOptions mopts;
    mopts.max_iterations = opts.max_iterations;
    mopts.grad_tol = opts.grad_tol;
    mopts.feasible = [&](std::span<const double> x) {
      try {
        return poly_energy_from_kernels(ex, ker, x).norm >= opts.min_norm;
      } catch (const std::runtime_error&) {
        return false;
      }
    };
    // escape a stationary non-minimum start through a coordinate probe
    {
      std::vector<double> g0(n);
      double e0 = fg(x0, g0);
      double gmax = 0.0;
      for (double g : g0) gmax = std::max(gmax, std::abs(g));
      if (gmax < opts.grad_tol) {
        double best = e0;
        std::vector<double> best_x = x0;
        for (std::size_t k = 0; k < n; ++k)
          for (double delta : {0.1, -0.1}) {
            std::vector<double> probe = x0;
            probe[k] += delta;
            try {
              PolyValue pv = poly_energy_from_kernels(ex, ker, probe);
              if (pv.norm >= opts.min_norm && pv.energy < best - 1e-14)
                best = pv.energy, best_x = probe;
            } catch (const std::runtime_error&) {
            }
          }
        x0 = std::move(best_x);
      }
    }
    MinimizeResult r = minimize(fg, std::move(x0), mopts);
    PolyValue final_v = poly_energy_from_kernels(ex, ker, r.x);
    return {std::move(r.x), final_v.energy, final_v.norm, r.converged,
            r.iterations};
  };

  PolyOptimizeResult best = run_one(starts[0]);
  for (std::size_t s = 1; s < starts.size(); ++s) {
    PolyOptimizeResult r = run_one(starts[s]);
    if (r.energy < best.energy) best = std::move(r);
  }
  return best;
}

inline PolyOptimizeResult poly_optimize(const PauliSum& h,
                                        const QmfState& omega,
                                        const PolyExpansion& ex,
                                        const PolyOptimizeOptions& opts = {}) {
  PolyKernels ker = build_poly_kernels(h, omega, ex);
  return poly_optimize(ex, ker, opts);
}

}  // namespace iqcc
