#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qhosvd {

using cdouble = std::complex<double>;

// Thrown when an input is structurally valid but numerically unusable:
// a zero tensor handed to a normalizer, a zero row handed to a state
// preparer, and so on. Plain shape/argument mistakes use
// std::invalid_argument instead.
struct DegenerateInputError : std::runtime_error {
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

inline int64_t next_pow2(int64_t n) {
  int64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Number of qubits needed to address n levels.
inline int qubits_for(int64_t n) {
  int q = 0;
  while ((int64_t{1} << q) < n) ++q;
  return q;
}

// Worker cap for the embarrassingly parallel loops. QHOSVD_THREADS overrides
// the hardware default; a value of 1 forces sequential execution.
inline int worker_count() {
  if (const char* env = std::getenv("QHOSVD_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

template <typename Body>
void parallel_for(int64_t n, Body&& body) {
  int workers = static_cast<int>(std::min<int64_t>(worker_count(), n));
  if (workers <= 1) {
    for (int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Rotates every column so its largest-magnitude entry becomes real and
// positive. Ties in magnitude go to the lowest index. This is the phase
// convention shared by the classical decomposition and the reconstructed
// quantum factors, so columns can be compared directly.
inline void fix_column_phases(Eigen::MatrixXcd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::Index best = 0;
    double best_mag = -1.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      double mag = std::abs(m(r, c));
      if (mag > best_mag) {
        best_mag = mag;
        best = r;
      }
    }
    if (best_mag <= 0.0) continue;
    cdouble pivot = m(best, c);
    m.col(c) *= std::conj(pivot) / std::abs(pivot);
  }
}

inline void fix_vector_phase(Eigen::VectorXcd& v) {
  Eigen::MatrixXcd m = v;
  fix_column_phases(m);
  v = m.col(0);
}

}  // namespace qhosvd
