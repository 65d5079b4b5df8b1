#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace iqcc {

/// Objective callback: fills grad (same length as x) and returns f(x).
using ObjectiveFn =
    std::function<double(std::span<const double>, std::span<double>)>;

struct MinimizeOptions {
  std::size_t max_iterations = 500;
  double grad_tol = 1e-8;  // infinity norm
  std::size_t history = 8;
  double min_step = 1e-14;
  /// Optional feasibility guard; the line search shrinks past points
  /// rejected by it.
  std::function<bool(std::span<const double>)> feasible;
};

struct MinimizeResult {
  std::vector<double> x;
  double f = 0.0;
  double grad_inf_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Limited-memory BFGS with a backtracking Armijo line search. Accepted
/// iterates are strictly non-increasing in f.
inline MinimizeResult minimize(const ObjectiveFn& fg, std::vector<double> x0,
                               const MinimizeOptions& opts = {}) {
  const std::size_t n = x0.size();
  MinimizeResult res;
  res.x = std::move(x0);
  std::vector<double> grad(n), x_new(n), grad_new(n), dir(n);
  res.f = fg(res.x, grad);
  res.grad_inf_norm = detail::inf_norm(grad);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;
  double gamma = 1.0;

  for (res.iterations = 0; res.iterations < opts.max_iterations;
       ++res.iterations) {
    if (res.grad_inf_norm < opts.grad_tol) {
      res.converged = true;
      return res;
    }
    // two-loop recursion
    dir.assign(grad.begin(), grad.end());
    std::vector<double> alpha(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
      alpha[k] = mem[k].rho * detail::dot(mem[k].s, dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * mem[k].y[i];
    }
    for (double& d : dir) d *= gamma;
    for (std::size_t k = 0; k < mem.size(); ++k) {
      double beta = mem[k].rho * detail::dot(mem[k].y, dir);
      for (std::size_t i = 0; i < n; ++i)
        dir[i] += (alpha[k] - beta) * mem[k].s[i];
    }
    for (double& d : dir) d = -d;

    double g_dot_d = detail::dot(grad, dir);
    if (g_dot_d >= 0) {  // not a descent direction; fall back
      for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i];
      g_dot_d = -detail::dot(grad, grad);
      mem.clear();
      gamma = 1.0;
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    while (step >= opts.min_step) {
      for (std::size_t i = 0; i < n; ++i)
        x_new[i] = res.x[i] + step * dir[i];
      if (!opts.feasible || opts.feasible(x_new)) {
        f_new = fg(x_new, grad_new);
        if (f_new <= res.f + 1e-4 * step * g_dot_d) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) return res;  // best point so far, not converged

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - res.x[i];
      y[i] = grad_new[i] - grad[i];
    }
    double sy = detail::dot(s, y);
    if (sy > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
      gamma = sy / detail::dot(y, y);
      mem.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (mem.size() > opts.history) mem.pop_front();
    }
    res.x = x_new;
    res.f = f_new;
    grad = grad_new;
    res.grad_inf_norm = detail::inf_norm(grad);
  }
  res.converged = res.grad_inf_norm < opts.grad_tol;
  return res;
}

}  // namespace iqcc
