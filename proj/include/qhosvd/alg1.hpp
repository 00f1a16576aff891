#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "qhosvd/hosvd.hpp"
#include "qhosvd/statevec.hpp"

namespace qhosvd {

struct Alg1Config {
  double epsilon = 1e-2;  // shared accuracy target for simulation, estimation, truncation
  double sim_time = 2.0 * std::numbers::pi;
  int64_t steps = 0;              // 0: ceil(t^2 max|a|^2 / epsilon); used by the stepped channel
  int control_qubits = 0;         // 0: ceil(log2(1/epsilon))
  double eigen_threshold = -1.0;  // < 0: epsilon; estimates with |lambda|/N below it are dropped
  bool use_channel = false;       // stepped partial-trace channel instead of the exact exponential
  double found_floor = 1e-7;      // minimum bucket probability that can seed a cluster

  int resolved_control_qubits() const {
    if (control_qubits > 0) return control_qubits;
    return std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / epsilon))));
  }
  double resolved_threshold() const { return eigen_threshold >= 0.0 ? eigen_threshold : epsilon; }
  int64_t resolved_steps(double max_abs) const {
    if (steps > 0) return steps;
    double want = sim_time * sim_time * max_abs * max_abs / epsilon;
    return std::max<int64_t>(1, static_cast<int64_t>(std::ceil(want)));
  }
};

/// Shape bookkeeping for the dilated mode-k unfolding: the dilation acts on
/// n + p levels, zero-padded up to the next power of two.
struct ModeGeometry {
  int64_t n = 0;      // I_k
  int64_t p = 0;      // product of the remaining dimensions
  int64_t big_n = 0;  // n + p
  int64_t embed = 0;  // next_pow2(big_n)
};

inline ModeGeometry mode_geometry(const DenseTensor& a, int k) {
  detail::check_mode(a.dims(), k);
  ModeGeometry g;
  g.n = a.dim(k);
  g.p = a.size() / g.n;
  g.big_n = g.n + g.p;
  g.embed = next_pow2(g.big_n);
  return g;
}

inline double max_abs_entry(const DenseTensor& a) {
  double best = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i]));
  return best;
}

/// Exact e^{-i (B/N) t} on the padded dilation space, B being the Hermitian
/// extension of the mode-k unfolding; the padding block contributes
/// eigenvalue 0 exactly.
inline Eigen::MatrixXcd dilation_unitary(const DenseTensor& a, int k, double t) {
  ModeGeometry geo = mode_geometry(a, k);
  SparseHermitian h = hermitian_extension(unfold(a, k).data);
  h.dim = geo.embed;
  return evolve(h, t / double(geo.big_n));
}

/// Raw phase-estimation readout for one mode: the bucket distribution and
/// the post-measurement system state per bucket (absent where the bucket is
/// numerically empty).
struct ModeReadout {
  int d = 0;
  double sim_time = 0.0;
  ModeGeometry geo;
  Eigen::VectorXd probabilities;
  std::vector<Eigen::VectorXcd> residuals;

  int64_t bucket_count() const { return int64_t{1} << d; }

  double phase(int64_t y) const {
    double ph = 2.0 * std::numbers::pi * double(y) / double(bucket_count());
    if (ph >= std::numbers::pi) ph -= 2.0 * std::numbers::pi;
    return ph;
  }

  // Decoded eigenvalue of B/N for a bucket: eigenphase theta = -lambda t / N.
  double value(int64_t y) const { return -phase(y) / sim_time; }
  double resolution() const { return 2.0 * std::numbers::pi / (double(bucket_count()) * sim_time); }
};

namespace detail {

inline Eigen::VectorXcd vec_of(const Eigen::MatrixXcd& x) {
  return Eigen::Map<const Eigen::VectorXcd>(x.data(), x.size());
}

inline Eigen::MatrixXcd unvec(const Eigen::VectorXcd& v, int64_t d) {
  return Eigen::Map<const Eigen::MatrixXcd>(v.data(), d, d);
}

// Matrix on vec(X) of the map X -> tr_1{ L (rho1 (x) X) R^dagger }: the four
// control-branch combinations of one channel step are L, R in {U, I}.
inline Eigen::MatrixXcd stepped_block_map(const Eigen::MatrixXcd& l, const Eigen::MatrixXcd& r,
                                          const Eigen::MatrixXcd& rho1, int64_t d2) {
  const int64_t d1 = rho1.rows();
  Eigen::MatrixXcd t(d2 * d2, d2 * d2);
  Eigen::MatrixXcd joint(d1 * d2, d1 * d2), reduced(d2, d2);
  for (int64_t b = 0; b < d2; ++b)
    for (int64_t a = 0; a < d2; ++a) {
      joint.setZero();
      for (int64_t i = 0; i < d1; ++i)
        for (int64_t j = 0; j < d1; ++j) joint(i * d2 + a, j * d2 + b) = rho1(i, j);
      Eigen::MatrixXcd evolved = l * joint * r.adjoint();
      for (int64_t x = 0; x < d2; ++x)
        for (int64_t y = 0; y < d2; ++y) {
          cdouble acc{0.0, 0.0};
          for (int64_t i = 0; i < d1; ++i) acc += evolved(i * d2 + x, i * d2 + y);
          reduced(x, y) = acc;
        }
      t.col(a + d2 * b) = vec_of(reduced);
    }
  return t;
}

inline Eigen::MatrixXcd matrix_power(Eigen::MatrixXcd base, int64_t e) {
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(base.rows(), base.cols());
  while (e > 0) {
    if (e & 1) acc = acc * base;
    base = base * base;
    e >>= 1;
  }
  return acc;
}

}  // namespace detail

/// Phase estimation against the exact dilation exponential.
inline ModeReadout mode_readout_exact(const DenseTensor& a, int k, const Eigen::VectorXcd& b,
                                      const Alg1Config& cfg) {
  ModeReadout out;
  out.geo = mode_geometry(a, k);
  out.d = cfg.resolved_control_qubits();
  out.sim_time = cfg.sim_time;
  if (b.size() != out.geo.embed)
    throw std::invalid_argument("mode_readout: input state must live on the padded dilation space");
  PhaseEstimationResult pe = phase_estimation(dilation_unitary(a, k, cfg.sim_time), b, out.d);
  out.probabilities = pe.probabilities;
  out.residuals.resize(pe.bucket_count());
  for (int64_t y = 0; y < pe.bucket_count(); ++y)
    if (pe.probabilities(y) >= 1e-14) out.residuals[y] = pe.residual(y);
  return out;
}

/// Phase estimation where each controlled power is realized as repeated
/// applications of the partial-trace channel (s steps per unit power), the
/// faithful simulation of the density-matrix pipeline. Control-block
/// coherences are tracked as vectorized operators, so cost grows as 4^d;
/// capped at d = 8.
inline ModeReadout mode_readout_channel(const DenseTensor& a, int k, const Eigen::VectorXcd& b,
                                        const Alg1Config& cfg) {
  ModeReadout out;
  out.geo = mode_geometry(a, k);
  out.d = cfg.resolved_control_qubits();
  out.sim_time = cfg.sim_time;
  if (out.d > 8) throw std::invalid_argument("mode_readout_channel: capped at 8 control qubits");
  if (b.size() != out.geo.embed)
    throw std::invalid_argument("mode_readout: input state must live on the padded dilation space");

  const int64_t dim = out.geo.embed;
  const int64_t steps = cfg.resolved_steps(max_abs_entry(a));
  const double dt = cfg.sim_time / double(steps);
  SparseHermitian s = swap_like_operator(a, k, dim);
  Eigen::MatrixXcd u_step = evolve(s, dt);
  Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(dim * dim, dim * dim);
  Eigen::MatrixXcd rho1 = uniform_levels_density(dim, out.geo.big_n).rho;
  Eigen::MatrixXcd t11 = detail::stepped_block_map(u_step, u_step, rho1, dim);
  Eigen::MatrixXcd t10 = detail::stepped_block_map(u_step, eye, rho1, dim);
  Eigen::MatrixXcd t01 = detail::stepped_block_map(eye, u_step, rho1, dim);

  const int64_t big_m = int64_t{1} << out.d;
  Eigen::VectorXcd rho2 = detail::vec_of(Eigen::MatrixXcd(b * b.adjoint()));
  std::vector<Eigen::VectorXcd> blocks(big_m * big_m, rho2);
  for (int j = 0; j < out.d; ++j) {
    int64_t reps = steps << j;
    Eigen::MatrixXcd p11 = detail::matrix_power(t11, reps);
    Eigen::MatrixXcd p10 = detail::matrix_power(t10, reps);
    Eigen::MatrixXcd p01 = detail::matrix_power(t01, reps);
    for (int64_t l = 0; l < big_m; ++l)
      for (int64_t lp = 0; lp < big_m; ++lp) {
        bool cl = (l >> j) & 1, cr = (lp >> j) & 1;
        if (!cl && !cr) continue;
        Eigen::VectorXcd& blk = blocks[l * big_m + lp];
        blk = (cl && cr ? p11 : cl ? p10 : p01) * blk;
      }
  }

  // Inverse Fourier transform on the control register; only diagonal output
  // blocks are needed for the readout.
  using namespace std::complex_literals;
  out.probabilities = Eigen::VectorXd::Zero(big_m);
  out.residuals.resize(big_m);
  for (int64_t y = 0; y < big_m; ++y) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(dim * dim);
    for (int64_t l = 0; l < big_m; ++l)
      for (int64_t lp = 0; lp < big_m; ++lp) {
        double ang = -2.0 * std::numbers::pi * double(y) * double(l - lp) / double(big_m);
        acc += std::exp(1i * ang) * blocks[l * big_m + lp];
      }
    Eigen::MatrixXcd sigma = detail::unvec(acc, dim) / double(big_m * big_m);
    sigma = 0.5 * (sigma + sigma.adjoint()).eval();
    double p = std::max(0.0, sigma.real().trace());
    out.probabilities(y) = p;
    if (p >= 1e-14) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sigma);
      out.residuals[y] = es.eigenvectors().col(dim - 1);
    }
  }
  return out;
}

inline ModeReadout mode_readout(const DenseTensor& a, int k, const Eigen::VectorXcd& b,
                                const Alg1Config& cfg) {
  return cfg.use_channel ? mode_readout_channel(a, k, b, cfg) : mode_readout_exact(a, k, b, cfg);
}

/// One recovered eigenbranch of the dilated unfolding.
struct EigenPairEstimate {
  int mode = 0;
  double value = 0.0;       // lambda / N
  double weight = 0.0;      // probability mass assigned to the branch
  double resolution = 0.0;  // bucket width in lambda / N units
  int64_t big_n = 0;
  double half_norm = 0.0;        // norm of the upper half before projection, ~ 1/sqrt(2)
  Eigen::VectorXcd residual;     // padded dilation-space state
  Eigen::VectorXcd left_vector;  // normalized upper half, dimension n
};

/// Collates a readout into eigenpair estimates, dropping branches below the
/// eigen threshold (those are treated as zero modes).
inline std::vector<EigenPairEstimate> collate_readout(const ModeReadout& r, int k, const Alg1Config& cfg) {
  std::vector<double> values(r.bucket_count());
  for (int64_t y = 0; y < r.bucket_count(); ++y) values[y] = r.value(y);
  std::vector<BucketCluster> clusters =
      cluster_buckets(r.probabilities, r.residuals, values, 0.9, cfg.found_floor);

  std::vector<EigenPairEstimate> out;
  for (const auto& c : clusters) {
    if (std::abs(c.value) < cfg.resolved_threshold()) continue;
    EigenPairEstimate e;
    e.mode = k;
    e.value = c.value;
    e.weight = c.weight;
    e.resolution = r.resolution();
    e.big_n = r.geo.big_n;
    e.residual = c.vector;
    Eigen::VectorXcd half = c.vector.head(r.geo.n);
    e.half_norm = half.norm();
    e.left_vector = e.half_norm > 1e-9 ? Eigen::VectorXcd(half / e.half_norm)
                                       : Eigen::VectorXcd(Eigen::VectorXcd::Zero(r.geo.n));
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const EigenPairEstimate& a, const EigenPairEstimate& b) {
    if (std::abs(a.value) != std::abs(b.value)) return std::abs(a.value) > std::abs(b.value);
    return a.value > b.value;
  });
  return out;
}

/// Simulated evolution + phase estimation for mode k on input |b>.
inline std::vector<EigenPairEstimate> run_mode(const DenseTensor& a, int k, const QuantumState& b,
                                               const Alg1Config& cfg) {
  if (frobenius_norm(a) == 0.0) throw DegenerateInputError("run_mode: zero tensor");
  return collate_readout(mode_readout(a, k, b.amps, cfg), k, cfg);
}

// ---- factor reconstruction -------------------------------------------------

/// One measured singular branch as used for factor assembly; alg2 produces
/// the same shape from QSVE readouts.
struct FactorSample {
  double sigma = 0.0;
  double weight = 0.0;
  double resolution = 0.0;  // sigma units
  Eigen::VectorXcd vector;  // candidate factor column, length >= n
};

struct ExtractedFactor {
  Eigen::MatrixXcd u;      // n x n unitary, columns ordered by nonincreasing sigma
  Eigen::VectorXd sigma;   // per column; 0 for completed columns
  bool completed = false;  // true when basis completion filled missing columns
};

/// Merges per-input-state singular branches into one factor matrix: branches
/// cluster by sigma at bucket resolution (folding the +/- dilation pair),
/// each cluster contributes round(weight) columns spanned by the top
/// eigenvectors of its weighted outer-product accumulator, and any missing
/// columns are completed to a basis. The result is polished to the nearest
/// unitary so downstream post-selection arithmetic stays exact.
inline ExtractedFactor extract_factor(std::vector<FactorSample> samples, int64_t n) {
  std::erase_if(samples, [&](const FactorSample& s) {
    return s.vector.size() < n || s.weight <= 0.0 || s.vector.head(n).norm() < 0.5;
  });
  std::sort(samples.begin(), samples.end(), [](const FactorSample& a, const FactorSample& b) {
    return a.sigma > b.sigma;
  });

  struct Cluster {
    double sigma_weighted = 0.0, weight = 0.0, resolution = 0.0;
    Eigen::MatrixXcd accum;
    double sigma() const { return sigma_weighted / weight; }
  };
  std::vector<Cluster> clusters;
  for (const auto& s : samples) {
    Eigen::VectorXcd v = s.vector.head(n).normalized();
    Cluster* home = nullptr;
    for (auto& c : clusters)
      if (std::abs(c.sigma() - s.sigma) <= 2.0 * std::max(c.resolution, s.resolution)) {
        home = &c;
        break;
      }
    if (home == nullptr) {
      clusters.push_back({0.0, 0.0, 0.0, Eigen::MatrixXcd::Zero(n, n)});
      home = &clusters.back();
    }
    home->sigma_weighted += s.weight * s.sigma;
    home->weight += s.weight;
    home->resolution = std::max(home->resolution, s.resolution);
    home->accum += s.weight * (v * v.adjoint());
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.sigma() > b.sigma(); });

  ExtractedFactor f;
  f.u = Eigen::MatrixXcd::Zero(n, n);
  f.sigma = Eigen::VectorXd::Zero(n);
  int64_t col = 0;
  for (const auto& c : clusters) {
    if (col >= n) break;
    int64_t mult = std::clamp<int64_t>(std::llround(c.weight), 1, n - col);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(c.accum);
    for (int64_t t = 0; t < mult; ++t) {
      f.u.col(col) = es.eigenvectors().col(n - 1 - t);
      f.sigma(col) = c.sigma();
      ++col;
    }
  }
  if (col < n) {
    f.completed = true;
    for (int64_t i = 0; i < n && col < n; ++i) {
      Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
      v(i) = 1.0;
      v -= f.u.leftCols(col) * (f.u.leftCols(col).adjoint() * v);
      if (v.norm() > 1e-6) f.u.col(col++) = v.normalized();
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(f.u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  f.u = svd.matrixU() * svd.matrixV().adjoint();
  fix_column_phases(f.u);
  return f;
}

/// Assembles the mode-k factor from estimates gathered over basis inputs
/// |0>..|n-1>; sigma values are reported in the scale of the analyzed tensor.
inline ExtractedFactor extract_singular_matrix(const std::vector<EigenPairEstimate>& estimates, int64_t n) {
  std::vector<FactorSample> samples;
  samples.reserve(estimates.size());
  for (const auto& e : estimates)
    samples.push_back({std::abs(e.value) * double(e.big_n), e.weight,
                       e.resolution * double(e.big_n), e.left_vector});
  return extract_factor(std::move(samples), n);
}

// ---- quantum tensor-matrix multiplication -----------------------------------

namespace detail {

inline std::vector<int> register_shifts(const std::vector<int64_t>& dims) {
  std::vector<int> shifts(dims.size(), 0);
  int shift = 0;
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    shifts[k] = shift;
    shift += qubits_for(dims[k]);
  }
  return shifts;
}

inline QuantumState tensor_state(const DenseTensor& a) {
  double norm = frobenius_norm(a);
  if (norm == 0.0) throw DegenerateInputError("tensor_state: zero tensor");
  QuantumState s = make_state(mode_registers(a.dims()));
  const int m = a.order();
  std::vector<int> shifts = register_shifts(a.dims());
  std::vector<int64_t> idx(m, 0);
  for (int64_t flat = 0; flat < a.size(); ++flat) {
    int64_t packed = 0;
    for (int k = 0; k < m; ++k) packed |= idx[k] << shifts[k];
    s.amps(packed) = a[flat] / norm;
    for (int k = m - 1; k >= 0; --k) {
      if (++idx[k] < a.dim(k)) break;
      idx[k] = 0;
    }
  }
  return s;
}

inline DenseTensor tensor_from_state(const Eigen::VectorXcd& amps, const std::vector<int64_t>& dims,
                                     double scale) {
  DenseTensor t(dims);
  const int m = static_cast<int>(dims.size());
  std::vector<int> shifts = register_shifts(dims);
  std::vector<int64_t> idx(m, 0);
  for (int64_t flat = 0; flat < t.size(); ++flat) {
    int64_t packed = 0;
    for (int k = 0; k < m; ++k) packed |= idx[k] << shifts[k];
    t[flat] = amps(packed) * scale;
    for (int k = m - 1; k >= 0; --k) {
      if (++idx[k] < dims[k]) break;
      idx[k] = 0;
    }
  }
  return t;
}

}  // namespace detail

struct ModeMultiplyOutcome {
  QuantumState state;  // post-selected state, amplitudes = entries of A x_k U^dagger normalized
  double success_probability = 0.0;
  double output_norm = 0.0;  // Frobenius norm of A x_k U^dagger
};

/// Mode product against a factor's adjoint realized as a post-selected
/// quantum map: success probability ||A x_k U^H||^2 / (||A||^2 ||U||^2).
inline ModeMultiplyOutcome quantum_mode_multiply(const DenseTensor& a, const Eigen::MatrixXcd& factor, int k) {
  detail::check_mode(a.dims(), k);
  if (factor.rows() != a.dim(k) || factor.cols() != a.dim(k))
    throw std::invalid_argument("quantum_mode_multiply: factor must be square over mode dimension");
  Eigen::MatrixXcd gram = factor.adjoint() * factor;
  gram -= Eigen::MatrixXcd::Identity(gram.rows(), gram.cols());
  if (gram.cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("quantum_mode_multiply: factor must be unitary");

  DenseTensor prod = mode_multiply(a, Eigen::MatrixXcd(factor.adjoint()), k);
  double a_norm = frobenius_norm(a), p_norm = frobenius_norm(prod);
  ModeMultiplyOutcome out;
  out.output_norm = p_norm;
  out.success_probability = (p_norm * p_norm) / (a_norm * a_norm * factor.squaredNorm());
  out.state = detail::tensor_state(prod);
  return out;
}

// ---- end-to-end pipeline ----------------------------------------------------

struct CoreChain {
  DenseTensor core;
  double success_probability = 1.0;
};

/// Chains post-selected mode products over every mode; with unitary factors
/// the success probability is exactly the product of 1/I_k.
inline CoreChain chained_core(const DenseTensor& a, const std::vector<Eigen::MatrixXcd>& factors) {
  CoreChain out{a, 1.0};
  for (int k = 0; k < a.order(); ++k) {
    ModeMultiplyOutcome step = quantum_mode_multiply(out.core, factors[k], k);
    out.success_probability *= step.success_probability;
    out.core = detail::tensor_from_state(step.state.amps, out.core.dims(), step.output_norm);
  }
  return out;
}

struct Alg1Output {
  HosvdResult result;
  double chained_success_probability = 1.0;
  bool completed = false;  // some factor required basis completion
};

/// Full simulated pipeline: per mode, phase-estimate the dilated unfolding
/// over all basis inputs and assemble the factor; then chain post-selected
/// mode products for the core. Factors are estimated on the normalized
/// tensor and spectra rescaled afterwards.
inline Alg1Output qhosvd1(const DenseTensor& a, const Alg1Config& cfg = {}) {
  double norm = frobenius_norm(a);
  if (norm == 0.0) throw DegenerateInputError("qhosvd1: zero tensor");
  DenseTensor an = a * cdouble{1.0 / norm, 0.0};
  const int m = a.order();

  std::vector<ExtractedFactor> extracted(m);
  parallel_for(m, [&](int64_t k) {
    ModeGeometry geo = mode_geometry(an, static_cast<int>(k));
    std::vector<EigenPairEstimate> estimates;
    for (int64_t j = 0; j < geo.n; ++j) {
      QuantumState b = make_state({{"dilation", qubits_for(geo.embed)}});
      b.amps(j) = 1.0;
      auto part = run_mode(an, static_cast<int>(k), b, cfg);
      estimates.insert(estimates.end(), part.begin(), part.end());
    }
    extracted[k] = extract_singular_matrix(estimates, geo.n);
  });

  Alg1Output out;
  out.result.factors.resize(m);
  out.result.spectra.resize(m);
  for (int k = 0; k < m; ++k) {
    out.result.factors[k] = extracted[k].u;
    out.result.spectra[k] = extracted[k].sigma * norm;
    out.completed = out.completed || extracted[k].completed;
  }

  CoreChain chain = chained_core(a, out.result.factors);
  out.chained_success_probability = chain.success_probability;
  out.result.core = std::move(chain.core);
  return out;
}

}  // namespace qhosvd
