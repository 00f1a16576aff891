#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "qhosvd/common.hpp"

namespace qhosvd {

/// Dense order-m tensor with row-major storage: the last index varies
/// fastest. Entries are always complex doubles; real tensors simply carry
/// zero imaginary parts.
class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(std::vector<int64_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw std::invalid_argument("tensor needs at least one mode");
    int64_t n = 1;
    for (int64_t d : dims_) {
      if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
      n *= d;
    }
    entries_.assign(n, cdouble{0.0, 0.0});
  }

  int order() const { return static_cast<int>(dims_.size()); }
  const std::vector<int64_t>& dims() const { return dims_; }
  int64_t dim(int mode) const { return dims_.at(mode); }
  int64_t size() const { return static_cast<int64_t>(entries_.size()); }

  cdouble& operator[](int64_t flat) { return entries_[flat]; }
  const cdouble& operator[](int64_t flat) const { return entries_[flat]; }

  int64_t flat_index(std::span<const int64_t> idx) const {
    int64_t flat = 0;
    for (int k = 0; k < order(); ++k) {
      if (idx[k] < 0 || idx[k] >= dims_[k]) throw std::invalid_argument("tensor index out of range");
      flat = flat * dims_[k] + idx[k];
    }
    return flat;
  }

  void unflatten(int64_t flat, std::span<int64_t> idx) const {
    for (int k = order() - 1; k >= 0; --k) {
      idx[k] = flat % dims_[k];
      flat /= dims_[k];
    }
  }

  cdouble& at(std::initializer_list<int64_t> idx) {
    return entries_[flat_index(std::span<const int64_t>(idx.begin(), idx.size()))];
  }
  const cdouble& at(std::initializer_list<int64_t> idx) const {
    return entries_[flat_index(std::span<const int64_t>(idx.begin(), idx.size()))];
  }

  std::vector<cdouble>& entries() { return entries_; }
  const std::vector<cdouble>& entries() const { return entries_; }

 private:
  std::vector<int64_t> dims_;
  std::vector<cdouble> entries_;
};

/// Mode-k unfolding. Row index is i_k; the column index is the mixed-radix
/// number with digits (i_{k+1}, ..., i_{m-1}, i_0, ..., i_{k-1}), most
/// significant first, everything zero based. With power-of-two dimensions
/// this is exactly the ket obtained by cyclically rotating the index
/// registers so that mode k leads.
struct UnfoldingMatrix {
  int mode = 0;
  Eigen::MatrixXcd data;
};

namespace detail {

// Column strides of the cyclic digit order, indexed by original mode; the
// entry for `mode` itself is unused and left at zero.
inline std::vector<int64_t> cyclic_column_strides(const std::vector<int64_t>& dims, int mode) {
  const int m = static_cast<int>(dims.size());
  std::vector<int> digit_order;
  digit_order.reserve(m - 1);
  for (int j = mode + 1; j < m; ++j) digit_order.push_back(j);
  for (int j = 0; j < mode; ++j) digit_order.push_back(j);
  std::vector<int64_t> strides(m, 0);
  int64_t running = 1;
  for (int p = static_cast<int>(digit_order.size()) - 1; p >= 0; --p) {
    strides[digit_order[p]] = running;
    running *= dims[digit_order[p]];
  }
  return strides;
}

inline void check_mode(const std::vector<int64_t>& dims, int mode) {
  if (mode < 0 || mode >= static_cast<int>(dims.size()))
    throw std::invalid_argument("mode out of range");
}

}  // namespace detail

inline UnfoldingMatrix unfold(const DenseTensor& a, int mode) {
  detail::check_mode(a.dims(), mode);
  const auto& dims = a.dims();
  const int m = a.order();
  int64_t cols = a.size() / dims[mode];
  UnfoldingMatrix out{mode, Eigen::MatrixXcd::Zero(dims[mode], cols)};
  auto strides = detail::cyclic_column_strides(dims, mode);
  std::vector<int64_t> idx(m, 0);
  for (int64_t flat = 0; flat < a.size(); ++flat) {
    int64_t col = 0;
    for (int j = 0; j < m; ++j)
      if (j != mode) col += idx[j] * strides[j];
    out.data(idx[mode], col) = a[flat];
    for (int j = m - 1; j >= 0; --j) {
      if (++idx[j] < dims[j]) break;
      idx[j] = 0;
    }
  }
  return out;
}

inline DenseTensor fold(const Eigen::MatrixXcd& data, int mode, const std::vector<int64_t>& dims) {
  detail::check_mode(dims, mode);
  DenseTensor out(dims);
  if (data.rows() != dims[mode] || data.rows() * data.cols() != out.size())
    throw std::invalid_argument("folded shape does not match the target dimensions");
  const int m = out.order();
  auto strides = detail::cyclic_column_strides(dims, mode);
  std::vector<int64_t> idx(m, 0);
  for (int64_t flat = 0; flat < out.size(); ++flat) {
    int64_t col = 0;
    for (int j = 0; j < m; ++j)
      if (j != mode) col += idx[j] * strides[j];
    out[flat] = data(idx[mode], col);
    for (int j = m - 1; j >= 0; --j) {
      if (++idx[j] < dims[j]) break;
      idx[j] = 0;
    }
  }
  return out;
}

inline DenseTensor fold(const UnfoldingMatrix& m, const std::vector<int64_t>& dims) {
  return fold(m.data, m.mode, dims);
}

/// Contracts mode k of the tensor with the columns of b:
/// (a x_k b)_{..j..} = sum_i b(j, i) a_{..i..}. b has shape J x I_k.
inline DenseTensor mode_multiply(const DenseTensor& a, const Eigen::MatrixXcd& b, int mode) {
  detail::check_mode(a.dims(), mode);
  if (b.cols() != a.dim(mode))
    throw std::invalid_argument("mode_multiply: matrix columns must match the contracted dimension");
  UnfoldingMatrix u = unfold(a, mode);
  std::vector<int64_t> dims = a.dims();
  dims[mode] = b.rows();
  return fold(b * u.data, mode, dims);
}

/// <a, b> = sum conj(a_i) b_i.
inline cdouble inner_product(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("inner_product: shape mismatch");
  cdouble acc{0.0, 0.0};
  for (int64_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

inline double frobenius_norm(const DenseTensor& a) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) acc += std::norm(a[i]);
  return std::sqrt(acc);
}

inline double l1_norm(const DenseTensor& a) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) acc += std::abs(a[i]);
  return acc;
}

/// Entry (i_1, ..., i_m) = prod_t v_t(i_t); no conjugation anywhere.
inline DenseTensor outer_product(std::span<const Eigen::VectorXcd> vectors) {
  if (vectors.empty()) throw std::invalid_argument("outer_product: needs at least one vector");
  std::vector<int64_t> dims;
  for (const auto& v : vectors) {
    if (v.size() == 0) throw std::invalid_argument("outer_product: empty vector");
    dims.push_back(v.size());
  }
  DenseTensor out(dims);
  std::vector<int64_t> idx(dims.size(), 0);
  for (int64_t flat = 0; flat < out.size(); ++flat) {
    out.unflatten(flat, idx);
    cdouble p{1.0, 0.0};
    for (size_t t = 0; t < vectors.size(); ++t) p *= vectors[t](idx[t]);
    out[flat] = p;
  }
  return out;
}

inline DenseTensor operator-(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("tensor subtraction: shape mismatch");
  DenseTensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline DenseTensor operator*(const DenseTensor& a, cdouble scale) {
  DenseTensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= scale;
  return out;
}

}  // namespace qhosvd
