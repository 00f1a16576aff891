#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "qhosvd/tensor.hpp"

namespace qhosvd {

struct Register {
  std::string name;
  int width = 0;  // qubits
};

/// Pure state over a list of registers, first register most significant.
/// The amplitude vector always has length 2^(total qubits).
struct QuantumState {
  Eigen::VectorXcd amps;
  std::vector<Register> registers;

  int qubits() const {
    int q = 0;
    for (const auto& r : registers) q += r.width;
    return q;
  }
  double norm() const { return amps.norm(); }
};

inline QuantumState make_state(std::vector<Register> regs) {
  QuantumState s;
  s.registers = std::move(regs);
  s.amps = Eigen::VectorXcd::Zero(int64_t{1} << s.qubits());
  return s;
}

/// One register of ceil(log2 I_k) qubits per tensor mode.
inline std::vector<Register> mode_registers(const std::vector<int64_t>& dims) {
  std::vector<Register> regs;
  for (size_t k = 0; k < dims.size(); ++k)
    regs.push_back({"m" + std::to_string(k), qubits_for(dims[k])});
  return regs;
}

// Binary-tree storage of squared Frobenius norms. Level t holds one node per
// index suffix of length t: level 0 is the root ||a||_F^2, level m holds the
// squared entry magnitudes. Every interior node is the sum of its children
// (the suffix extended by one more index). A real tensor keeps a sign per
// leaf; a complex one splits each leaf once more into (Re^2, Im^2) with two
// signs. Nodes of one level live in a contiguous array addressed by the
// mixed-radix value of the suffix, which is the tensor's flat index reduced
// modulo the level size.
struct QRamTree {
  std::vector<int64_t> dims;
  std::vector<std::vector<double>> levels;  // levels[t], t = 0..m
  bool complex_field = false;
  // Real leaves: sign per entry. Complex leaves: the split layer.
  std::vector<int8_t> sign;            // real only: -1, 0, +1
  std::vector<double> re_sq, im_sq;    // complex only
  std::vector<int8_t> re_sign, im_sign;

  int order() const { return static_cast<int>(dims.size()); }
  double root() const { return levels[0][0]; }

  // Reconstructs the stored entry of one leaf. sqrt(fl(x^2)) == |x| for
  // IEEE doubles in the representable range, so this is exact.
  cdouble leaf_value(int64_t flat) const {
    if (complex_field)
      return {re_sign[flat] * std::sqrt(re_sq[flat]), im_sign[flat] * std::sqrt(im_sq[flat])};
    return {sign[flat] * std::sqrt(levels.back()[flat]), 0.0};
  }
};

namespace detail {
inline int8_t sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? int8_t{-1} : int8_t{0}); }
}

inline QRamTree build_qram_tree(const DenseTensor& a) {
  QRamTree tree;
  tree.dims = a.dims();
  const int m = a.order();
  for (int64_t i = 0; i < a.size(); ++i)
    if (a[i].imag() != 0.0) tree.complex_field = true;

  tree.levels.resize(m + 1);
  tree.levels[m].resize(a.size());
  if (tree.complex_field) {
    tree.re_sq.resize(a.size());
    tree.im_sq.resize(a.size());
    tree.re_sign.resize(a.size());
    tree.im_sign.resize(a.size());
    for (int64_t i = 0; i < a.size(); ++i) {
      tree.re_sq[i] = a[i].real() * a[i].real();
      tree.im_sq[i] = a[i].imag() * a[i].imag();
      tree.re_sign[i] = detail::sign_of(a[i].real());
      tree.im_sign[i] = detail::sign_of(a[i].imag());
      tree.levels[m][i] = tree.re_sq[i] + tree.im_sq[i];
    }
  } else {
    tree.sign.resize(a.size());
    for (int64_t i = 0; i < a.size(); ++i) {
      tree.sign[i] = detail::sign_of(a[i].real());
      tree.levels[m][i] = a[i].real() * a[i].real();
    }
  }

  // Interior levels, summed bottom up so parent-sum holds bitwise. The
  // children of a length-t suffix extend it by the next index to the left,
  // so level t has levels[t+1].size() / I_{m-1-t} nodes.
  for (int t = m - 1; t >= 0; --t) {
    int64_t branching = a.dim(m - 1 - t);
    int64_t width = static_cast<int64_t>(tree.levels[t + 1].size()) / branching;
    tree.levels[t].assign(width, 0.0);
    for (int64_t child = 0; child < branching; ++child)
      for (int64_t s = 0; s < width; ++s)
        tree.levels[t][s] += tree.levels[t + 1][child * width + s];
  }
  if (tree.root() <= 0.0)
    throw DegenerateInputError("qram tree: zero tensor cannot be normalized");
  return tree;
}

/// Re-derives the single root-to-leaf path affected by changing one entry;
/// one node per level is rewritten (each recomputed as the exact sum of its
/// children, preserving the parent-sum identity bitwise).
inline void update_qram_tree(QRamTree& tree, int64_t flat, cdouble value) {
  const int m = tree.order();
  if (flat < 0 || flat >= static_cast<int64_t>(tree.levels[m].size()))
    throw std::invalid_argument("qram update: index out of range");
  if (tree.complex_field) {
    tree.re_sq[flat] = value.real() * value.real();
    tree.im_sq[flat] = value.imag() * value.imag();
    tree.re_sign[flat] = detail::sign_of(value.real());
    tree.im_sign[flat] = detail::sign_of(value.imag());
    tree.levels[m][flat] = tree.re_sq[flat] + tree.im_sq[flat];
  } else {
    if (value.imag() != 0.0)
      throw std::invalid_argument("qram update: complex value in a real tree");
    tree.sign[flat] = detail::sign_of(value.real());
    tree.levels[m][flat] = value.real() * value.real();
  }
  for (int t = m - 1; t >= 0; --t) {
    int64_t width = tree.levels[t].size();
    int64_t suffix = flat % width;
    int64_t children = tree.levels[t + 1].size() / width;
    double sum = 0.0;
    for (int64_t c = 0; c < children; ++c) sum += tree.levels[t + 1][c * width + suffix];
    tree.levels[t][suffix] = sum;
  }
  if (tree.root() <= 0.0)
    throw DegenerateInputError("qram update: tree became the zero tensor");
}

/// State preparation from the tree: amplitude a_idx / ||a||_F on the basis
/// ket |i_1>|i_2>...|i_m> over per-mode registers (each padded to a power of
/// two; padded slots carry zero amplitude).
inline QuantumState prepare_full_state(const QRamTree& tree) {
  QuantumState s = make_state(mode_registers(tree.dims));
  const int m = tree.order();
  double scale = 1.0 / std::sqrt(tree.root());
  std::vector<int64_t> idx(m, 0);
  std::vector<int> shifts(m, 0);
  int shift = 0;
  for (int k = m - 1; k >= 0; --k) {
    shifts[k] = shift;
    shift += qubits_for(tree.dims[k]);
  }
  int64_t total = static_cast<int64_t>(tree.levels[m].size());
  for (int64_t flat = 0; flat < total; ++flat) {
    int64_t rem = flat, padded = 0;
    for (int k = m - 1; k >= 0; --k) {
      padded |= (rem % tree.dims[k]) << shifts[k];
      rem /= tree.dims[k];
    }
    s.amps(padded) = tree.leaf_value(flat) * scale;
  }
  return s;
}

/// Row access for unfold(a, mode)^dagger, whose rows are indexed by the
/// column-group index j of the unfolding. The stored row states carry the
/// conjugates of those rows, i.e. the original fiber entries; this is the
/// convention that lets the singular-value estimation recover unconjugated
/// left singular vectors on complex inputs.
struct RowAccessor {
  int mode = 0;
  int64_t fiber_dim = 0;                      // I_k
  double fro_norm = 0.0;                      // ||a||_F
  std::vector<double> row_norms;              // per j, sums of squares equal ||a||_F^2
  std::vector<Eigen::VectorXcd> row_states;   // normalized; empty vector for zero rows
};

inline RowAccessor row_accessor(const DenseTensor& a, int mode) {
  detail::check_mode(a.dims(), mode);
  UnfoldingMatrix u = unfold(a, mode);
  RowAccessor acc;
  acc.mode = mode;
  acc.fiber_dim = u.data.rows();
  int64_t rows = u.data.cols();  // rows of the adjoint
  acc.row_norms.resize(rows);
  acc.row_states.resize(rows);
  double total = 0.0;
  for (int64_t j = 0; j < rows; ++j) {
    Eigen::VectorXcd fiber = u.data.col(j);  // conjugate of the adjoint's row j
    double n = fiber.norm();
    acc.row_norms[j] = n;
    total += n * n;
    if (n > 0.0) acc.row_states[j] = fiber / n;
  }
  acc.fro_norm = std::sqrt(total);
  return acc;
}

inline QuantumState prepare_row_state(const RowAccessor& acc, int64_t row) {
  if (row < 0 || row >= static_cast<int64_t>(acc.row_norms.size()))
    throw std::invalid_argument("prepare_row_state: row out of range");
  if (acc.row_norms[row] == 0.0)
    throw DegenerateInputError("prepare_row_state: zero row has no state");
  QuantumState s = make_state({{"col", qubits_for(acc.fiber_dim)}});
  s.amps.head(acc.fiber_dim) = acc.row_states[row];
  return s;
}

inline QuantumState prepare_norm_state(const RowAccessor& acc) {
  if (acc.fro_norm == 0.0)
    throw DegenerateInputError("prepare_norm_state: zero tensor");
  int64_t rows = static_cast<int64_t>(acc.row_norms.size());
  QuantumState s = make_state({{"row", qubits_for(rows)}});
  for (int64_t j = 0; j < rows; ++j) s.amps(j) = acc.row_norms[j] / acc.fro_norm;
  return s;
}

}  // namespace qhosvd
