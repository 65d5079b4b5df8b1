#pragma once

#include <Eigen/Dense>
#include <complex>
#include <random>

#include "iqcc/dressing.hpp"
#include "iqcc/pauli.hpp"
#include "iqcc/qmf.hpp"

namespace testutil {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using iqcc::Complex;

// Dense matrices built from letters only, independent of the symplectic
// phase arithmetic under test.
inline Mat letter_matrix(char c) {
  Mat m(2, 2);
  const Complex i{0.0, 1.0};
  switch (c) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, -i, i, 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: throw std::invalid_argument("bad letter");
  }
  return m;
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) =
          a(i, j) * b;
  return out;
}

/// Matrix of a Pauli word with qubit 0 as the least significant bit of
/// the basis index: kron runs from the highest qubit down.
inline Mat word_matrix(const iqcc::PauliWord& w) {
  Mat m = Mat::Identity(1, 1);
  for (std::size_t j = w.n_qubits(); j-- > 0;)
    m = kron(m, letter_matrix(w.letter(j)));
  return m;
}

inline Mat sum_matrix(const iqcc::PauliSum& h) {
  Eigen::Index dim = Eigen::Index{1} << h.n_qubits();
  Mat m = Mat::Zero(dim, dim);
  for (std::size_t k = 0; k < h.size(); ++k)
    m += h.coeff(k) * word_matrix(h.word_copy(k));
  return m;
}

inline Vec qmf_vector(const iqcc::QmfState& omega) {
  Vec v = Vec::Ones(1);
  // ascending: each new qubit occupies the next-higher index bit
  for (std::size_t j = 0; j < omega.n_qubits(); ++j) {
    Vec q(2);
    q << std::cos(omega.theta[j] / 2.0),
        std::polar(std::sin(omega.theta[j] / 2.0), omega.phi[j]);
    Vec out(v.size() * 2);
    for (Eigen::Index b = 0; b < 2; ++b)
      for (Eigen::Index i = 0; i < v.size(); ++i)
        out(b * v.size() + i) = q(b) * v(i);
    v = out;
  }
  return v;
}

inline iqcc::PauliWord random_word(std::mt19937_64& rng, std::size_t n,
                                   bool allow_identity = true) {
  std::uniform_int_distribution<int> letter(0, 3);
  for (;;) {
    iqcc::PauliWord w(n);
    bool nonid = false;
    for (std::size_t j = 0; j < n; ++j) {
      switch (letter(rng)) {
        case 0: break;
        case 1: w.set_x(j); nonid = true; break;
        case 2: w.set_z(j); nonid = true; break;
        case 3: w.set_x(j); w.set_z(j); nonid = true; break;
      }
    }
    if (nonid || allow_identity) return w;
  }
}

inline iqcc::PauliSum random_sum(std::mt19937_64& rng, std::size_t n,
                                 std::size_t max_terms) {
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  std::vector<iqcc::WeightedTerm> terms;
  for (std::size_t k = 0; k < max_terms; ++k)
    terms.push_back({coeff(rng), random_word(rng, n)});
  return iqcc::PauliSum::from_terms(n, std::move(terms));
}

inline iqcc::QmfState random_qmf(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> angle(-3.0, 3.0);
  iqcc::QmfState omega(n);
  for (std::size_t j = 0; j < n; ++j) {
    omega.theta[j] = angle(rng);
    omega.phi[j] = angle(rng);
  }
  return omega;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testutil
