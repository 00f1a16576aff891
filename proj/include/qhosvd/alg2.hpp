#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "qhosvd/alg1.hpp"
#include "qhosvd/qram.hpp"

namespace qhosvd {

/// Shape bookkeeping for singular value estimation on M = A^(k) adjoint:
/// rows of M are indexed by the flattened non-k modes, columns by i_k, each
/// register padded to a power of two.
struct QsveGeometry {
  int64_t rows = 0;
  int64_t cols = 0;
  int64_t rows_p = 0;
  int64_t cols_p = 0;

  int64_t dim() const { return rows_p * cols_p; }
};

struct QsveOperators {
  int mode = 0;
  QsveGeometry geo;
  double fro_norm = 0.0;
  Eigen::MatrixXcd p;    // dim x rows_p isometry, column j = |j>|row_j>
  Eigen::MatrixXcd q;    // dim x cols_p isometry, column i = |norms>|i>
  Eigen::MatrixXcd u_p;  // unitary with U_P |j>|0> = P column j
  Eigen::MatrixXcd u_q;  // unitary with U_Q |0>|i> = Q column i
  Eigen::MatrixXcd g_p;  // reflection 2(I (x) |0><0|) - I
  Eigen::MatrixXcd g_q;  // reflection 2(|0><0| (x) I) - I
  Eigen::MatrixXcd w;    // (2PP^H - I)(2QQ^H - I)
};

/// Builds the singular value estimation operators for mode k from row-level
/// qram access to the unfolding's adjoint. Eigenphases theta of W encode
/// singular values through cos(theta/2) = sigma / ||A||_F.
inline QsveOperators build_qsve(const DenseTensor& a, int k) {
  RowAccessor acc = row_accessor(a, k);
  if (acc.fro_norm == 0.0) throw DegenerateInputError("build_qsve: zero tensor");

  QsveOperators ops;
  ops.mode = k;
  ops.fro_norm = acc.fro_norm;
  ops.geo.cols = acc.fiber_dim;
  ops.geo.rows = static_cast<int64_t>(acc.row_norms.size());
  ops.geo.cols_p = next_pow2(ops.geo.cols);
  ops.geo.rows_p = next_pow2(ops.geo.rows);
  const int64_t dim = ops.geo.dim(), rp = ops.geo.rows_p, cp = ops.geo.cols_p;

  ops.p = Eigen::MatrixXcd::Zero(dim, rp);
  ops.u_p = Eigen::MatrixXcd::Zero(dim, dim);
  for (int64_t j = 0; j < rp; ++j) {
    bool live = j < ops.geo.rows && acc.row_norms[j] > 0.0;
    if (live) {
      Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(cp);
      padded.head(ops.geo.cols) = acc.row_states[j];
      ops.p.block(j * cp, j, cp, 1) = padded;
      ops.u_p.block(j * cp, j * cp, cp, cp) = detail::basis_prep_unitary(padded);
    } else {
      ops.p(j * cp, j) = 1.0;
      ops.u_p.block(j * cp, j * cp, cp, cp) = Eigen::MatrixXcd::Identity(cp, cp);
    }
  }

  Eigen::VectorXcd norms = Eigen::VectorXcd::Zero(rp);
  for (int64_t j = 0; j < ops.geo.rows; ++j) norms(j) = acc.row_norms[j] / acc.fro_norm;
  ops.q = Eigen::MatrixXcd::Zero(dim, cp);
  for (int64_t i = 0; i < cp; ++i)
    for (int64_t j = 0; j < rp; ++j) ops.q(j * cp + i, i) = norms(j);
  Eigen::MatrixXcd v_q = detail::basis_prep_unitary(norms);
  ops.u_q = Eigen::MatrixXcd::Zero(dim, dim);
  for (int64_t j = 0; j < rp; ++j)
    for (int64_t jp = 0; jp < rp; ++jp)
      if (v_q(j, jp) != cdouble{0.0, 0.0})
        ops.u_q.block(j * cp, jp * cp, cp, cp) =
            v_q(j, jp) * Eigen::MatrixXcd::Identity(cp, cp);

  Eigen::VectorXcd gp_diag(dim), gq_diag(dim);
  for (int64_t j = 0; j < rp; ++j)
    for (int64_t i = 0; i < cp; ++i) {
      gp_diag(j * cp + i) = i == 0 ? 1.0 : -1.0;
      gq_diag(j * cp + i) = j == 0 ? 1.0 : -1.0;
    }
  ops.g_p = gp_diag.asDiagonal();
  ops.g_q = gq_diag.asDiagonal();

  Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(dim, dim);
  ops.w = (2.0 * ops.p * ops.p.adjoint() - eye) * (2.0 * ops.q * ops.q.adjoint() - eye);
  return ops;
}

struct QsveEstimate {
  int mode = 0;
  double sigma = 0.0;       // estimated singular value of the unfolding
  double theta = 0.0;       // founding-bucket eigenphase in [-pi, pi)
  double weight = 0.0;
  double resolution = 0.0;  // sigma units: pi * 2^-d * ||A||_F
  Eigen::VectorXcd vector;  // recovered factor column, dimension cols_p
};

/// Phase estimation on W with input Q|b>, decoded through the cosine map.
/// The +/- eigenphase branches of one singular value recover the same
/// column and fold into a single estimate.
inline std::vector<QsveEstimate> qsve_readout(const QsveOperators& ops, const Eigen::VectorXcd& b, int d) {
  if (b.size() != ops.geo.cols_p)
    throw std::invalid_argument("qsve_readout: input dimension must match the padded fiber register");
  Eigen::VectorXcd psi = ops.q * b;
  PhaseEstimationResult pe = phase_estimation(ops.w, psi, d);

  const int64_t big_m = pe.bucket_count();
  std::vector<Eigen::VectorXcd> vectors(big_m);
  std::vector<double> values(big_m);
  for (int64_t y = 0; y < big_m; ++y) {
    values[y] = ops.fro_norm * std::cos(std::abs(pe.phase(y)) / 2.0);
    if (pe.probabilities(y) < 1e-14) continue;
    Eigen::VectorXcd recovered = ops.q.adjoint() * pe.residual(y);
    if (recovered.norm() > 1e-9) vectors[y] = recovered.normalized();
  }

  double res = std::numbers::pi * ops.fro_norm / double(big_m);
  std::vector<QsveEstimate> out;
  for (const auto& c : cluster_buckets(pe.probabilities, vectors, values)) {
    QsveEstimate e;
    e.mode = ops.mode;
    e.sigma = c.value;
    e.theta = pe.phase(c.peak);
    e.weight = c.weight;
    e.resolution = res;
    e.vector = c.vector;
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(),
            [](const QsveEstimate& a, const QsveEstimate& b) { return a.sigma > b.sigma; });
  return out;
}

inline std::vector<QsveEstimate> qsve(const DenseTensor& a, int k, const QuantumState& b, int d) {
  return qsve_readout(build_qsve(a, k), b.amps, d);
}

/// Mode-superposed run: a control register holds k in uniform superposition
/// and each branch runs its own singular value estimation. Post-selecting a
/// branch reproduces the standalone run, so the composite is represented as
/// the per-branch tables plus the measured branch weights.
struct ControlledQsve {
  std::vector<double> branch_weights;
  std::vector<std::vector<QsveEstimate>> branches;
};

inline ControlledQsve controlled_k_qsve(const DenseTensor& a, const QuantumState& b, int d) {
  const int m = a.order();
  ControlledQsve out;
  for (int k = 0; k < m; ++k) {
    QsveOperators ops = build_qsve(a, k);
    if (b.amps.size() != ops.geo.cols_p)
      throw std::invalid_argument("controlled_k_qsve: input must match every mode's padded fiber register");
    out.branch_weights.push_back((ops.q * b.amps).squaredNorm() / double(m));
    out.branches.push_back(qsve_readout(ops, b.amps, d));
  }
  return out;
}

struct Alg2Output {
  HosvdResult result;
  double chained_success_probability = 1.0;
  bool completed = false;
};

/// Full pipeline via singular value estimation: no low-rank assumption on
/// the unfoldings, so full-rank inputs work at bucket-limited accuracy.
inline Alg2Output qhosvd2(const DenseTensor& a, int d) {
  double norm = frobenius_norm(a);
  if (norm == 0.0) throw DegenerateInputError("qhosvd2: zero tensor");
  DenseTensor an = a * cdouble{1.0 / norm, 0.0};
  const int m = a.order();

  std::vector<ExtractedFactor> extracted(m);
  parallel_for(m, [&](int64_t k) {
    QsveOperators ops = build_qsve(an, static_cast<int>(k));
    std::vector<FactorSample> samples;
    for (int64_t i = 0; i < ops.geo.cols; ++i) {
      Eigen::VectorXcd b = Eigen::VectorXcd::Zero(ops.geo.cols_p);
      b(i) = 1.0;
      for (const auto& e : qsve_readout(ops, b, d))
        samples.push_back({e.sigma, e.weight, e.resolution, e.vector});
    }
    extracted[k] = extract_factor(std::move(samples), ops.geo.cols);
  });

  Alg2Output out;
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
