#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <filesystem>
#include <fstream>
#include <vector>

#include "qhosvd/qten.hpp"
#include "qhosvd/tensor.hpp"

namespace qhosvd {

/// Orthogonal Tucker decomposition a = core x_1 U^(1) x_2 ... x_m U^(m).
/// factors[k] holds the left singular vectors of the mode-k unfolding as
/// columns (I_k x r_k); spectra[k] the matching singular values, which equal
/// the Frobenius norms of the core subtensors with fixed mode-k index.
struct HosvdResult {
  DenseTensor core;
  std::vector<Eigen::MatrixXcd> factors;
  std::vector<Eigen::VectorXd> spectra;
};

inline HosvdResult truncated_hosvd(const DenseTensor& a, const std::vector<int64_t>& ranks) {
  const int m = a.order();
  if (m < 2) throw std::invalid_argument("truncated_hosvd: needs order >= 2");
  if (static_cast<int>(ranks.size()) != m)
    throw std::invalid_argument("truncated_hosvd: need one rank per mode");
  for (int k = 0; k < m; ++k)
    if (ranks[k] < 1 || ranks[k] > a.dim(k))
      throw std::invalid_argument("truncated_hosvd: ranks must lie in [1, I_k]");

  HosvdResult out;
  out.factors.resize(m);
  out.spectra.resize(m);
  parallel_for(m, [&](int64_t k) {
    UnfoldingMatrix u = unfold(a, static_cast<int>(k));
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(u.data, Eigen::ComputeFullU);
    Eigen::MatrixXcd full = svd.matrixU();
    fix_column_phases(full);
    Eigen::VectorXd sigma = Eigen::VectorXd::Zero(a.dim(k));
    sigma.head(svd.singularValues().size()) = svd.singularValues();
    out.factors[k] = full.leftCols(ranks[k]);
    out.spectra[k] = sigma.head(ranks[k]);
  });
  out.core = a;
  for (int k = 0; k < m; ++k)
    out.core = mode_multiply(out.core, out.factors[k].adjoint(), k);
  return out;
}

inline HosvdResult hosvd(const DenseTensor& a) {
  return truncated_hosvd(a, a.dims());
}

/// Cuts an existing decomposition down to the leading ranks[k] components per
/// mode: factor columns, spectrum entries, and the matching corner of the
/// core. Ordering of the core subtensor norms makes that corner the dominant
/// one, so this matches recomputing the truncated decomposition directly.
inline HosvdResult truncate_result(const HosvdResult& r, const std::vector<int64_t>& ranks) {
  const int m = static_cast<int>(r.factors.size());
  if (static_cast<int>(ranks.size()) != m)
    throw std::invalid_argument("truncate_result: need one rank per mode");
  for (int k = 0; k < m; ++k)
    if (ranks[k] < 1 || ranks[k] > r.factors[k].cols())
      throw std::invalid_argument("truncate_result: ranks must lie in [1, r_k]");

  HosvdResult out;
  out.core = DenseTensor(ranks);
  std::vector<int64_t> idx(m);
  for (int64_t flat = 0; flat < out.core.size(); ++flat) {
    out.core.unflatten(flat, idx);
    out.core[flat] = r.core[r.core.flat_index(idx)];
  }
  out.factors.resize(m);
  out.spectra.resize(m);
  for (int k = 0; k < m; ++k) {
    out.factors[k] = r.factors[k].leftCols(ranks[k]);
    out.spectra[k] = r.spectra[k].head(std::min<int64_t>(ranks[k], r.spectra[k].size()));
  }
  return out;
}

inline DenseTensor reconstruct(const HosvdResult& r) {
  DenseTensor out = r.core;
  for (size_t k = 0; k < r.factors.size(); ++k)
    out = mode_multiply(out, r.factors[k], static_cast<int>(k));
  return out;
}

/// Stored scalars of a truncated representation: the core plus the factor
/// entries. Full decompositions count I^m + m I^2.
inline int64_t parameter_count(const HosvdResult& r) {
  int64_t total = r.core.size();
  for (const auto& f : r.factors) total += f.rows() * f.cols();
  return total;
}

struct VerifyReport {
  double max_factor_orthogonality = 0.0;  // max |U^H U - I|
  double max_core_orthogonality = 0.0;    // max |<S_{i_k=a}, S_{i_k=b}>|, a != b
  double max_ordering_violation = 0.0;    // max increase of core slice norms
  double reconstruction_residual = 0.0;   // ||a - reconstruct||_F

  bool passed(double tol) const {
    return max_factor_orthogonality <= tol && max_core_orthogonality <= tol &&
           max_ordering_violation <= tol && reconstruction_residual <= tol;
  }
};

/// Checks the defining properties of the decomposition against the original
/// tensor: factor orthonormality, all-orthogonality and ordering of the core
/// subtensor norms, and the reconstruction residual. Truncated results are
/// verified the same way; their residual is the discarded energy.
inline VerifyReport verify(const HosvdResult& r, const DenseTensor& a, double /*tol*/ = 0.0) {
  VerifyReport rep;
  const int m = static_cast<int>(r.factors.size());
  for (int k = 0; k < m; ++k) {
    const auto& u = r.factors[k];
    Eigen::MatrixXcd gram = u.adjoint() * u;
    gram -= Eigen::MatrixXcd::Identity(gram.rows(), gram.cols());
    rep.max_factor_orthogonality = std::max(rep.max_factor_orthogonality, gram.cwiseAbs().maxCoeff());

    UnfoldingMatrix s = unfold(r.core, k);
    Eigen::MatrixXcd slice_gram = s.data * s.data.adjoint();
    for (Eigen::Index i = 0; i < slice_gram.rows(); ++i) {
      for (Eigen::Index j = 0; j < slice_gram.cols(); ++j) {
        if (i != j)
          rep.max_core_orthogonality = std::max(rep.max_core_orthogonality, std::abs(slice_gram(i, j)));
      }
      if (i > 0) {
        double prev = std::sqrt(std::abs(slice_gram(i - 1, i - 1).real()));
        double cur = std::sqrt(std::abs(slice_gram(i, i).real()));
        rep.max_ordering_violation = std::max(rep.max_ordering_violation, cur - prev);
      }
    }
  }
  rep.reconstruction_residual = frobenius_norm(a - reconstruct(r));
  return rep;
}

/// Groups a nonincreasing spectrum into clusters of degenerate values;
/// returns [begin, end) column ranges. Values closer than cluster_tol are
/// treated as equal, so factor columns inside a cluster are only determined
/// up to a rotation of the spanned subspace.
inline std::vector<std::pair<int, int>> spectral_clusters(const Eigen::VectorXd& s, double cluster_tol = 1e-8) {
  std::vector<std::pair<int, int>> out;
  int begin = 0;
  for (int i = 1; i <= s.size(); ++i) {
    if (i == s.size() || s(begin) - s(i) > cluster_tol) {
      out.emplace_back(begin, i);
      begin = i;
    }
  }
  return out;
}

/// Largest principal angle (radians) between the column spans of two
/// orthonormal blocks of equal width.
inline double subspace_angle(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("subspace_angle: shape mismatch");
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a.adjoint() * b);
  double c = std::min(1.0, svd.singularValues().minCoeff());
  return std::acos(c);
}

/// Compares two factor matrices cluster by cluster, using the reference
/// spectrum to find degenerate groups. Individual columns inside a
/// degenerate cluster are unconstrained; only the spanned subspace counts.
inline double max_cluster_angle(const Eigen::MatrixXcd& ua, const Eigen::MatrixXcd& ub,
                                const Eigen::VectorXd& spectrum, double cluster_tol = 1e-8) {
  if (ua.cols() != ub.cols()) throw std::invalid_argument("max_cluster_angle: column count mismatch");
  double worst = 0.0;
  for (auto [b, e] : spectral_clusters(spectrum, cluster_tol)) {
    if (e > ua.cols()) break;
    worst = std::max(worst, subspace_angle(ua.middleCols(b, e - b), ub.middleCols(b, e - b)));
  }
  return worst;
}

// ---- result directory format -------------------------------------------
//
// <dir>/core.qten, <dir>/factor_k.qten (one per mode, k zero based, stored
// as order-2 QTEN tensors), <dir>/spectra.tsv with lines "mode<TAB>index
// <TAB>value".

inline void write_hosvd_result(const std::filesystem::path& dir, const HosvdResult& r) {
  std::filesystem::create_directories(dir);
  write_qten_file(dir / "core.qten", r.core);
  for (size_t k = 0; k < r.factors.size(); ++k) {
    const auto& f = r.factors[k];
    DenseTensor t(std::vector<int64_t>{f.rows(), f.cols()});
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index j = 0; j < f.cols(); ++j) t.at({i, j}) = f(i, j);
    write_qten_file(dir / ("factor_" + std::to_string(k) + ".qten"), t);
  }
  std::ofstream tsv(dir / "spectra.tsv");
  if (!tsv) throw std::invalid_argument("cannot write spectra.tsv");
  for (size_t k = 0; k < r.spectra.size(); ++k)
    for (Eigen::Index i = 0; i < r.spectra[k].size(); ++i)
      tsv << k << '\t' << i << '\t' << format_g17(r.spectra[k](i)) << '\n';
}

inline HosvdResult read_hosvd_result(const std::filesystem::path& dir) {
  HosvdResult r;
  r.core = read_qten_file(dir / "core.qten");
  for (int k = 0; k < r.core.order(); ++k) {
    DenseTensor t = read_qten_file(dir / ("factor_" + std::to_string(k) + ".qten"));
    if (t.order() != 2) throw std::invalid_argument("factor file is not a matrix");
    Eigen::MatrixXcd f(t.dim(0), t.dim(1));
    for (int64_t i = 0; i < t.dim(0); ++i)
      for (int64_t j = 0; j < t.dim(1); ++j) f(i, j) = t.at({i, j});
    r.factors.push_back(std::move(f));
  }
  std::ifstream tsv(dir / "spectra.tsv");
  if (!tsv) throw std::invalid_argument("cannot read spectra.tsv");
  r.spectra.assign(r.core.order(), Eigen::VectorXd());
  std::vector<std::vector<double>> acc(r.core.order());
  int64_t mode = 0, index = 0;
  double value = 0.0;
  while (tsv >> mode >> index >> value) {
    if (mode < 0 || mode >= r.core.order() || index != static_cast<int64_t>(acc[mode].size()))
      throw std::invalid_argument("spectra.tsv is inconsistent");
    acc[mode].push_back(value);
  }
  for (int k = 0; k < r.core.order(); ++k)
    r.spectra[k] = Eigen::Map<Eigen::VectorXd>(acc[k].data(), acc[k].size());
  return r;
}

}  // namespace qhosvd
