#pragma once

// Seeded generators shared by the test binaries. Everything here is
// deterministic: the same seed always yields the same tensor, so failures
// reproduce exactly.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "qhosvd/tensor.hpp"

namespace testutil {

using qhosvd::cdouble;
using qhosvd::DenseTensor;

inline DenseTensor random_tensor(const std::vector<int64_t>& dims, uint64_t seed,
                                 bool complex_entries = true, bool normalize = true) {
  DenseTensor a(dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int64_t i = 0; i < a.size(); ++i) {
    double re = gauss(rng);
    double im = complex_entries ? gauss(rng) : 0.0;
    a[i] = cdouble{re, im};
  }
  if (normalize) {
    double norm = qhosvd::frobenius_norm(a);
    for (int64_t i = 0; i < a.size(); ++i) a[i] /= norm;
  }
  return a;
}

/// Fixed 50-shape corpus: orders 2 to 4, dimensions 2 to 4, unit Frobenius
/// norm, complex entries.
inline std::vector<std::vector<int64_t>> corpus_shapes() {
  std::vector<std::vector<int64_t>> shapes;
  std::mt19937_64 rng(0xc0de);
  std::uniform_int_distribution<int> dim(2, 4);
  for (int i = 0; i < 50; ++i) {
    int order = 2 + i % 3;
    std::vector<int64_t> s;
    for (int k = 0; k < order; ++k) s.push_back(dim(rng));
    shapes.push_back(s);
  }
  return shapes;
}

inline DenseTensor corpus_tensor(int i) {
  static const std::vector<std::vector<int64_t>> shapes = corpus_shapes();
  return random_tensor(shapes[i % shapes.size()], 1000 + i);
}

/// Haar-ish unitary via QR of a Gaussian matrix; the R-diagonal phase fix
/// makes the result a deterministic function of the seed.
inline Eigen::MatrixXcd random_unitary(int64_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd g(n, n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) g(i, j) = cdouble{gauss(rng), gauss(rng)};
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ();
  Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int64_t j = 0; j < n; ++j) {
    cdouble d = r(j, j);
    if (std::abs(d) > 0.0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

inline Eigen::VectorXcd random_state(int64_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXcd v(n);
  for (int64_t i = 0; i < n; ++i) v(i) = cdouble{gauss(rng), gauss(rng)};
  v.normalize();
  return v;
}

}  // namespace testutil
