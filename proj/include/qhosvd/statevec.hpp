#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "qhosvd/qram.hpp"
#include "qhosvd/tensor.hpp"

namespace qhosvd {

// ---- register permutations ----------------------------------------------

/// Permutation acting on computational basis states: dest[src] is where the
/// basis ket |src> goes.
struct PermutationUnitary {
  std::vector<int64_t> dest;

  int64_t dim() const { return static_cast<int64_t>(dest.size()); }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
    for (int64_t i = 0; i < v.size(); ++i) out(dest[i]) = v(i);
    return out;
  }

  Eigen::MatrixXcd dense() const {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim(), dim());
    for (int64_t i = 0; i < dim(); ++i) m(dest[i], i) = 1.0;
    return m;
  }
};

namespace detail {

// Swaps the adjacent register blocks at positions p and p+1 (msb-first
// widths); returns the permutation and updates the width list.
inline PermutationUnitary adjacent_register_swap(std::vector<int>& widths, int p) {
  int total = 0;
  for (int w : widths) total += w;
  int tail = 0;
  for (size_t q = p + 2; q < widths.size(); ++q) tail += widths[q];
  const int wa = widths[p], wb = widths[p + 1];
  PermutationUnitary perm;
  perm.dest.resize(int64_t{1} << total);
  for (int64_t src = 0; src < perm.dim(); ++src) {
    int64_t t = src & ((int64_t{1} << tail) - 1);
    int64_t b = (src >> tail) & ((int64_t{1} << wb) - 1);
    int64_t a = (src >> (tail + wb)) & ((int64_t{1} << wa) - 1);
    int64_t head = src >> (tail + wb + wa);
    perm.dest[src] = (((((head << wb) | b) << wa) | a) << tail) | t;
  }
  std::swap(widths[p], widths[p + 1]);
  return perm;
}

}  // namespace detail

/// Register permutation that brings mode k to the front, realizing the
/// read-out order of the mode-k unfolding: |i_1...i_m> becomes
/// |i_{k+1}...i_m i_1...i_k> rotated so i_k leads. Composed from adjacent
/// register SWAP layers. All dimensions must already be powers of two.
inline PermutationUnitary unfolding_swap_unitary(const std::vector<int64_t>& dims, int mode) {
  if (mode < 0 || mode >= static_cast<int>(dims.size()))
    throw std::invalid_argument("unfolding_swap_unitary: mode out of range");
  std::vector<int> widths;
  int total = 0;
  for (int64_t d : dims) {
    if (d != next_pow2(d))
      throw std::invalid_argument("unfolding_swap_unitary: dimensions must be powers of two (pad first)");
    widths.push_back(qubits_for(d));
    total += widths.back();
  }
  PermutationUnitary perm;
  perm.dest.resize(int64_t{1} << total);
  for (int64_t i = 0; i < perm.dim(); ++i) perm.dest[i] = i;
  const int m = static_cast<int>(dims.size());
  // Rotate the register list left by `mode`: each pass bubbles the leading
  // register to the back through m-1 adjacent swaps.
  for (int pass = 0; pass < mode; ++pass) {
    for (int p = 0; p + 1 < m; ++p) {
      PermutationUnitary swap = detail::adjacent_register_swap(widths, p);
      for (int64_t i = 0; i < perm.dim(); ++i) perm.dest[i] = swap.dest[perm.dest[i]];
    }
  }
  return perm;
}

namespace detail {

/// Unitary sending |0> to the given unit vector, built from one Householder
/// reflection plus a phase; exact for any input and free of cancellation
/// (the pivot is chosen along the first component's phase).
inline Eigen::MatrixXcd basis_prep_unitary(const Eigen::VectorXcd& w) {
  const int64_t n = w.size();
  double theta = std::arg(w(0));
  cdouble beta = -std::exp(cdouble{0.0, theta});
  Eigen::VectorXcd u = w;
  u(0) -= beta;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Identity(n, n) - (2.0 / u.squaredNorm()) * (u * u.adjoint());
  h.col(0) *= beta;
  return h;
}

}  // namespace detail

// ---- sparse Hermitian operators -----------------------------------------

struct SparseHermitian {
  int64_t dim = 0;
  struct Entry {
    int64_t row, col;
    cdouble value;
  };
  std::vector<Entry> entries;  // every nonzero, conjugate pairs both present

  bool one_sparse() const {
    std::vector<int8_t> row_seen(dim, 0);
    for (const auto& e : entries) {
      if (row_seen[e.row]++) return false;
    }
    return true;
  }

  Eigen::MatrixXcd dense() const {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& e : entries) m(e.row, e.col) += e.value;
    return m;
  }

  SparseHermitian scaled(double factor) const {
    SparseHermitian out = *this;
    for (auto& e : out.entries) e.value *= factor;
    return out;
  }
};

/// Hermitian dilation [[0, A], [A^H, 0]] of an n x p matrix, dimension
/// n + p. Its eigenvalues are the paired +/- singular values of A (plus
/// zeros), with eigenvectors stacking (u_i; +/- v_i), each half of norm
/// 1/sqrt(2).
inline SparseHermitian hermitian_extension(const Eigen::MatrixXcd& a) {
  SparseHermitian h;
  h.dim = a.rows() + a.cols();
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) == cdouble{0.0, 0.0}) continue;
      h.entries.push_back({i, a.rows() + j, a(i, j)});
      h.entries.push_back({a.rows() + j, i, std::conj(a(i, j))});
    }
  return h;
}

/// One-sparse swap-like operator S = sum_{l,j} B_{lj} |j><l| (x) |l><j|
/// built from the Hermitian dilation B of the mode-k unfolding, without ever
/// materializing B. It acts on two copies of the dilation space; embed_dim
/// (>= n + prod other dims) pads that space, zero rows staying zero.
inline SparseHermitian swap_like_operator(const DenseTensor& a, int mode, int64_t embed_dim = 0) {
  UnfoldingMatrix u = unfold(a, mode);
  const int64_t n = u.data.rows(), p = u.data.cols();
  const int64_t big_n = n + p;
  if (embed_dim == 0) embed_dim = big_n;
  if (embed_dim < big_n) throw std::invalid_argument("swap_like_operator: embed_dim too small");
  SparseHermitian s;
  s.dim = embed_dim * embed_dim;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < p; ++j) {
      cdouble v = u.data(i, j);
      if (v == cdouble{0.0, 0.0}) continue;
      int64_t row = i, col = n + j;  // B_{row, col} = v, B_{col, row} = conj(v)
      s.entries.push_back({col * embed_dim + row, row * embed_dim + col, v});
      s.entries.push_back({row * embed_dim + col, col * embed_dim + row, std::conj(v)});
    }
  return s;
}

/// Exact unitary e^{-i h dt}. A one-sparse operator decomposes into 1x1 and
/// 2x2 invariant blocks that exponentiate in closed form; anything else goes
/// through a dense eigendecomposition.
inline Eigen::MatrixXcd evolve(const SparseHermitian& h, double dt) {
  using namespace std::complex_literals;
  if (h.one_sparse()) {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(h.dim, h.dim);
    for (const auto& e : h.entries) {
      if (e.row == e.col) {
        u(e.row, e.row) = std::exp(-1i * e.value.real() * dt);
      } else if (e.row < e.col) {  // conjugate partner handles the other half
        double w = std::abs(e.value);
        cdouble ph = e.value / w;
        u(e.row, e.row) = std::cos(w * dt);
        u(e.col, e.col) = std::cos(w * dt);
        u(e.row, e.col) = -1i * std::sin(w * dt) * ph;
        u(e.col, e.row) = -1i * std::sin(w * dt) * std::conj(ph);
      }
    }
    return u;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense());
  Eigen::VectorXcd phases(h.dim);
  for (int64_t i = 0; i < h.dim; ++i) phases(i) = std::exp(-1i * es.eigenvalues()(i) * dt);
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

// ---- density matrices ----------------------------------------------------

struct DensityMatrix {
  Eigen::MatrixXcd rho;
  std::vector<int64_t> dims;  // subsystem dimensions, most significant first

  int64_t dim() const { return rho.rows(); }
};

inline DensityMatrix pure_density(const Eigen::VectorXcd& psi, std::vector<int64_t> dims) {
  return {psi * psi.adjoint(), std::move(dims)};
}

/// |1-bar><1-bar| with |1-bar> uniform over the first `levels` of `dim`
/// levels; the reference state feeding each swap-like evolution step.
inline DensityMatrix uniform_levels_density(int64_t dim, int64_t levels) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
  v.head(levels).setConstant(1.0 / std::sqrt(double(levels)));
  return pure_density(v, {dim});
}

inline DensityMatrix partial_trace(const DensityMatrix& dm, const std::vector<int>& keep) {
  const int r = static_cast<int>(dm.dims.size());
  std::vector<int8_t> keep_mask(r, 0);
  for (int k : keep) {
    if (k < 0 || k >= r) throw std::invalid_argument("partial_trace: bad subsystem index");
    keep_mask[k] = 1;
  }
  std::vector<int64_t> kept_dims, traced_dims;
  for (int k = 0; k < r; ++k) (keep_mask[k] ? kept_dims : traced_dims).push_back(dm.dims[k]);

  int64_t kept_total = 1, traced_total = 1;
  for (int64_t d : kept_dims) kept_total *= d;
  for (int64_t d : traced_dims) traced_total *= d;

  // Map (kept index, traced index) back to the full flat index.
  auto full_index = [&](int64_t kept, int64_t traced) {
    int64_t digits[64];
    for (int k = r - 1; k >= 0; --k) {
      if (keep_mask[k]) {
        digits[k] = kept % dm.dims[k];
        kept /= dm.dims[k];
      } else {
        digits[k] = traced % dm.dims[k];
        traced /= dm.dims[k];
      }
    }
    int64_t flat = 0;
    for (int k = 0; k < r; ++k) flat = flat * dm.dims[k] + digits[k];
    return flat;
  };

  DensityMatrix out{Eigen::MatrixXcd::Zero(kept_total, kept_total), kept_dims};
  for (int64_t i = 0; i < kept_total; ++i)
    for (int64_t j = 0; j < kept_total; ++j) {
      cdouble acc{0.0, 0.0};
      for (int64_t t = 0; t < traced_total; ++t) acc += dm.rho(full_index(i, t), full_index(j, t));
      out.rho(i, j) = acc;
    }
  return out;
}

/// One step of the simulated-evolution channel: conjugate rho1 (x) rho2 by
/// e^{-i s dt} and trace out the first register. With rho1 uniform over N
/// levels this approximates conjugation of rho2 by e^{-i (B/N) dt} up to
/// O(dt^2), B being the dilated unfolding behind s.
inline DensityMatrix qpca_step(const SparseHermitian& s, const DensityMatrix& rho1,
                               const DensityMatrix& rho2, double dt) {
  if (s.dim != rho1.dim() * rho2.dim())
    throw std::invalid_argument("qpca_step: operator dimension must be the product of the register dimensions");
  Eigen::MatrixXcd u = evolve(s, dt);
  Eigen::MatrixXcd joint = Eigen::MatrixXcd::Zero(s.dim, s.dim);
  // kron(rho1, rho2)
  const int64_t d1 = rho1.dim(), d2 = rho2.dim();
  for (int64_t a = 0; a < d1; ++a)
    for (int64_t b = 0; b < d1; ++b)
      if (rho1.rho(a, b) != cdouble{0.0, 0.0})
        joint.block(a * d2, b * d2, d2, d2) = rho1.rho(a, b) * rho2.rho;
  joint = u * joint * u.adjoint();
  return partial_trace({std::move(joint), {d1, d2}}, {1});
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a.rho - b.rho);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// ---- phase estimation -----------------------------------------------------

struct PhaseBucket {
  int64_t y = 0;
  double phase = 0.0;  // in [-pi, pi)
  double probability = 0.0;
  Eigen::VectorXcd residual;  // normalized post-measurement system state
};

struct PhaseEstimationResult {
  int d = 0;
  Eigen::MatrixXcd joint;  // (2^d) x dim; row y = unnormalized system state given reading y
  Eigen::VectorXd probabilities;

  int64_t bucket_count() const { return int64_t{1} << d; }

  double phase(int64_t y) const {
    double ph = 2.0 * std::numbers::pi * double(y) / double(bucket_count());
    if (ph >= std::numbers::pi) ph -= 2.0 * std::numbers::pi;
    return ph;
  }

  Eigen::VectorXcd residual(int64_t y) const {
    double p = probabilities(y);
    if (p <= 0.0) throw DegenerateInputError("phase estimation: bucket has zero probability");
    return joint.row(y).transpose() / std::sqrt(p);
  }

  std::vector<PhaseBucket> buckets(double min_probability) const {
    std::vector<PhaseBucket> out;
    for (int64_t y = 0; y < bucket_count(); ++y)
      if (probabilities(y) >= min_probability && probabilities(y) > 0.0)
        out.push_back({y, phase(y), probabilities(y), residual(y)});
    return out;
  }
};

/// Textbook phase estimation with d control qubits, simulated exactly:
/// Hadamards, controlled powers U^(2^j), inverse Fourier transform on the
/// control register. Returns the full joint state resolved by control value.
inline PhaseEstimationResult phase_estimation(const Eigen::MatrixXcd& u, const Eigen::VectorXcd& psi, int d) {
  if (u.rows() != u.cols() || u.rows() != psi.size())
    throw std::invalid_argument("phase_estimation: dimension mismatch");
  if (d < 1 || d > 24) throw std::invalid_argument("phase_estimation: control qubits out of range");
  if (std::abs(psi.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("phase_estimation: input state must be normalized");

  const int64_t big_m = int64_t{1} << d;
  const int64_t dim = psi.size();
  // Column l = system state conditioned on control value l.
  Eigen::MatrixXcd work(dim, big_m);
  double root = std::sqrt(double(big_m));
  for (int64_t l = 0; l < big_m; ++l) work.col(l) = psi / root;
  Eigen::MatrixXcd upow = u;
  for (int j = 0; j < d; ++j) {
    for (int64_t l = 0; l < big_m; ++l)
      if ((l >> j) & 1) work.col(l) = upow * work.col(l);
    if (j + 1 < d) upow = upow * upow;
  }

  // Inverse QFT along the control axis.
  PhaseEstimationResult out;
  out.d = d;
  out.joint.resize(big_m, dim);
  Eigen::FFT<double> fft;
  std::vector<cdouble> in(big_m), transformed(big_m);
  for (int64_t x = 0; x < dim; ++x) {
    for (int64_t l = 0; l < big_m; ++l) in[l] = work(x, l);
    fft.fwd(transformed, in);
    for (int64_t y = 0; y < big_m; ++y) out.joint(y, x) = transformed[y] / root;
  }
  out.probabilities = out.joint.rowwise().squaredNorm();
  return out;
}

/// Draws a bucket from the exact distribution; the tests read the
/// distribution directly, this exists for sampling-style use.
inline int64_t sample_bucket(const PhaseEstimationResult& pe, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double x = unit(rng), acc = 0.0;
  for (int64_t y = 0; y < pe.bucket_count(); ++y) {
    acc += pe.probabilities(y);
    if (x <= acc) return y;
  }
  return pe.bucket_count() - 1;
}

// ---- bucket collation ------------------------------------------------------

/// One eigenbranch recovered from a phase-estimation readout: a founding
/// peak bucket plus all probability mass assigned to it.
struct BucketCluster {
  int64_t peak = 0;
  double value = 0.0;
  double weight = 0.0;
  Eigen::VectorXcd vector;
};

/// Greedy collation of a bucket distribution into eigenbranches. Local
/// maxima found in decreasing probability order found a cluster unless their
/// candidate vector already overlaps an accepted cluster (>= overlap_min,
/// which absorbs leakage side lobes). Afterwards every bucket's mass is
/// assigned to the best-overlapping cluster, so cluster weights approximate
/// the eigencomponent weights of the input state. `vectors` entries may be
/// empty to skip a bucket.
inline std::vector<BucketCluster> cluster_buckets(const Eigen::VectorXd& probabilities,
                                                  const std::vector<Eigen::VectorXcd>& vectors,
                                                  const std::vector<double>& values,
                                                  double overlap_min = 0.9,
                                                  double found_floor = 1e-7) {
  const int64_t big_m = probabilities.size();
  auto overlap2 = [](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    return std::norm(a.dot(b));  // Eigen's dot conjugates the first argument
  };

  std::vector<int64_t> order;
  for (int64_t y = 0; y < big_m; ++y) {
    if (probabilities(y) < found_floor || vectors[y].size() == 0) continue;
    int64_t prev = (y + big_m - 1) % big_m, next = (y + 1) % big_m;
    if (probabilities(y) >= probabilities(prev) && probabilities(y) >= probabilities(next))
      order.push_back(y);
  }
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    if (probabilities(a) != probabilities(b)) return probabilities(a) > probabilities(b);
    return a < b;
  });

  std::vector<BucketCluster> clusters;
  for (int64_t y : order) {
    bool absorbed = false;
    for (const auto& c : clusters)
      if (overlap2(c.vector, vectors[y]) >= overlap_min) {
        absorbed = true;
        break;
      }
    if (!absorbed) clusters.push_back({y, values[y], 0.0, vectors[y]});
  }

  for (int64_t y = 0; y < big_m; ++y) {
    if (probabilities(y) <= 0.0 || vectors[y].size() == 0) continue;
    double best = 0.0;
    BucketCluster* target = nullptr;
    for (auto& c : clusters) {
      double o = overlap2(c.vector, vectors[y]);
      if (o > best) {
        best = o;
        target = &c;
      }
    }
    if (target != nullptr && best >= 0.5) target->weight += probabilities(y);
  }
  return clusters;
}

}  // namespace qhosvd
