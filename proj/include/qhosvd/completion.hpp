#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qhosvd/qten.hpp"
#include "qhosvd/statevec.hpp"
#include "qhosvd/tensor.hpp"

namespace qhosvd {

// ---- ratings data -----------------------------------------------------------

struct RatingEntry {
  std::vector<int64_t> index;
  double rating = 0.0;
};

/// Sparse observed ratings over a (user, item, context...) grid. A missing
/// cell means "not rated"; stored ratings lie in [1, 5].
struct RatingsTensor {
  std::vector<int64_t> dims;
  std::vector<RatingEntry> observed;

  int order() const { return static_cast<int>(dims.size()); }
};

/// Reads `i1 <tab> ... <tab> im <tab> rating` lines (0-based indices). Any
/// whitespace separates fields; blank lines are skipped. Duplicate index
/// tuples keep the last value, with a note to `warnings` when given.
inline RatingsTensor read_ratings_tsv(std::istream& in, const std::vector<int64_t>& dims,
                                      std::ostream* warnings = nullptr) {
  RatingsTensor r;
  r.dims = dims;
  const int m = r.order();
  std::map<std::vector<int64_t>, size_t> seen;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream row(line);
    RatingEntry e;
    e.index.resize(m);
    bool blank = true;
    for (int k = 0; k < m; ++k) {
      if (!(row >> e.index[k])) {
        if (k == 0 && row.eof() && line.find_first_not_of(" \t\r") == std::string::npos) {
          blank = true;
          break;
        }
        throw std::invalid_argument("ratings line " + std::to_string(line_no) + ": expected " +
                                    std::to_string(m) + " indices and a rating");
      }
      blank = false;
      if (e.index[k] < 0 || e.index[k] >= dims[k])
        throw std::invalid_argument("ratings line " + std::to_string(line_no) + ": index out of range");
    }
    if (blank) continue;
    if (!(row >> e.rating) || !std::isfinite(e.rating))
      throw std::invalid_argument("ratings line " + std::to_string(line_no) + ": missing rating");
    std::string tail;
    if (row >> tail)
      throw std::invalid_argument("ratings line " + std::to_string(line_no) + ": trailing fields");
    if (e.rating < 1.0 || e.rating > 5.0)
      throw std::invalid_argument("ratings line " + std::to_string(line_no) + ": rating outside [1, 5]");
    auto [it, fresh] = seen.try_emplace(e.index, r.observed.size());
    if (fresh) {
      r.observed.push_back(std::move(e));
    } else {
      if (warnings)
        *warnings << "warning: duplicate rating at line " << line_no << ", keeping the later value\n";
      r.observed[it->second].rating = e.rating;
    }
  }
  return r;
}

inline void write_ratings_tsv(std::ostream& out, const RatingsTensor& r) {
  for (const auto& e : r.observed) {
    for (int64_t i : e.index) out << i << '\t';
    out << format_g17(e.rating) << '\n';
  }
}

// ---- model ------------------------------------------------------------------

/// Pointwise loss l(t, y) with its derivative in the prediction argument.
struct PointLoss {
  double (*value)(double t, double y) = nullptr;
  double (*deriv)(double t, double y) = nullptr;
};

inline PointLoss squared_loss() {
  return {[](double t, double y) { return 0.5 * (t - y) * (t - y); },
          [](double t, double y) { return t - y; }};
}

/// Truncated HOSVD-shaped model: real core of shape (ranks) and one real
/// I_k x d_k factor per mode. The core reuses DenseTensor storage with zero
/// imaginary parts so checkpoints share the tensor file format.
struct CompletionModel {
  DenseTensor core{{1}};
  std::vector<Eigen::MatrixXd> factors;
  std::vector<int64_t> ranks;

  std::vector<int64_t> dims() const {
    std::vector<int64_t> d;
    for (const auto& f : factors) d.push_back(f.rows());
    return d;
  }
};

inline CompletionModel init_model(const std::vector<int64_t>& dims, const std::vector<int64_t>& ranks,
                                  uint64_t seed) {
  if (ranks.size() != dims.size()) throw std::invalid_argument("init_model: rank count mismatch");
  for (size_t k = 0; k < dims.size(); ++k)
    if (ranks[k] < 1 || ranks[k] > dims[k])
      throw std::invalid_argument("init_model: ranks must lie in [1, dim]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> small(-0.01, 0.01);
  CompletionModel m;
  m.ranks = ranks;
  for (size_t k = 0; k < dims.size(); ++k) {
    Eigen::MatrixXd f(dims[k], ranks[k]);
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = small(rng);
    m.factors.push_back(std::move(f));
  }
  m.core = DenseTensor(ranks);
  for (int64_t i = 0; i < m.core.size(); ++i) m.core[i] = small(rng);
  return m;
}

inline double predict(const CompletionModel& m, std::span<const int64_t> index) {
  const int order = static_cast<int>(m.factors.size());
  if (static_cast<int>(index.size()) != order) throw std::invalid_argument("predict: index order mismatch");
  for (int k = 0; k < order; ++k)
    if (index[k] < 0 || index[k] >= m.factors[k].rows())
      throw std::invalid_argument("predict: index out of range");
  double t = 0.0;
  std::vector<int64_t> a(order, 0);
  for (int64_t flat = 0; flat < m.core.size(); ++flat) {
    double term = m.core[flat].real();
    for (int k = 0; k < order; ++k) term *= m.factors[k](index[k], a[k]);
    t += term;
    for (int k = order - 1; k >= 0; --k) {
      if (++a[k] < m.ranks[k]) break;
      a[k] = 0;
    }
  }
  return t;
}

inline double predict(const CompletionModel& m, const std::vector<int64_t>& index) {
  return predict(m, std::span<const int64_t>(index));
}

inline DenseTensor reconstruct(const CompletionModel& m) {
  DenseTensor t = m.core;
  for (int k = 0; k < static_cast<int>(m.factors.size()); ++k)
    t = mode_multiply(t, m.factors[k].cast<cdouble>(), k);
  return t;
}

inline double loss(const CompletionModel& m, const RatingsTensor& ratings, const PointLoss& pl = squared_loss()) {
  double s1 = l1_norm(m.core);
  if (s1 == 0.0) throw DegenerateInputError("loss: core has zero L1 norm");
  double acc = 0.0;
  for (const auto& e : ratings.observed) acc += pl.value(predict(m, e.index), e.rating);
  return acc / s1;
}

inline double objective(const CompletionModel& m, const RatingsTensor& ratings, double lambda,
                        double lambda_core, const PointLoss& pl = squared_loss()) {
  double reg = 0.0;
  for (const auto& f : m.factors) reg += lambda * f.squaredNorm();
  double core2 = 0.0;
  for (int64_t i = 0; i < m.core.size(); ++i) core2 += std::norm(m.core[i]);
  return loss(m, ratings, pl) + reg + lambda_core * core2;
}

inline double rmse(const CompletionModel& m, const RatingsTensor& ratings) {
  if (ratings.observed.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& e : ratings.observed) {
    double d = predict(m, e.index) - e.rating;
    acc += d * d;
  }
  return std::sqrt(acc / double(ratings.observed.size()));
}

// ---- quantum inner-product gradient subroutine --------------------------------

/// Posterior-mean amplitude estimation of a = (1 - <s|z>)/2 for real unit
/// vectors: prepares |phi> = (|+>|s> + |->|z>)/sqrt(2), phase-estimates the
/// Grover rotation about the ancilla=1 subspace, and averages sin^2(pi m/M)
/// over the exact outcome distribution, which keeps |h - a| <= 2^-t.
inline double amplitude_estimate(const Eigen::VectorXd& s_unit, const Eigen::VectorXd& z_unit, int t_qubits) {
  if (s_unit.size() != z_unit.size()) throw std::invalid_argument("amplitude_estimate: size mismatch");
  const int64_t cells = s_unit.size();
  const int64_t padded = next_pow2(cells);
  const int64_t dim = 2 * padded;

  Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(dim);
  phi.head(cells) = (0.5 * (s_unit + z_unit)).cast<cdouble>();
  phi.segment(padded, cells) = (0.5 * (s_unit - z_unit)).cast<cdouble>();
  phi.normalize();

  Eigen::MatrixXcd prep = detail::basis_prep_unitary(phi);
  Eigen::VectorXcd flip_good = Eigen::VectorXcd::Ones(dim);
  flip_good.tail(padded).setConstant(-1.0);  // ancilla = 1 marks the "good" branch
  Eigen::MatrixXcd s0 = Eigen::MatrixXcd::Identity(dim, dim);
  s0(0, 0) = -1.0;
  Eigen::MatrixXcd grover = -(prep * s0 * prep.adjoint() * Eigen::MatrixXcd(flip_good.asDiagonal()));

  PhaseEstimationResult pe = phase_estimation(grover, phi, t_qubits);
  double h = 0.0;
  for (int64_t y = 0; y < pe.bucket_count(); ++y) {
    double sin_half = std::sin(std::numbers::pi * double(y) / double(pe.bucket_count()));
    h += pe.probabilities(y) * sin_half * sin_half;
  }
  return h;
}

struct QuantumDot {
  double value = 0.0;
  bool degenerate = false;  // a zero slice or zero outer product has no encoding state
};

/// The simulated quantum estimate of <core slice, outer(rows)>: amplitude
/// estimation recovers h ~ (1 - <s|z>)/2 and the inner product returns as
/// ||slice|| * ||Z|| * (1 - 2h).
inline QuantumDot quantum_gradient_component(const DenseTensor& core_slice,
                                             std::span<const Eigen::VectorXd> rows, int t_qubits) {
  std::vector<Eigen::VectorXcd> cast;
  for (const auto& r : rows) cast.push_back(r.cast<cdouble>());
  DenseTensor z = outer_product(cast);
  if (z.dims() != core_slice.dims())
    throw std::invalid_argument("quantum_gradient_component: shape mismatch");

  Eigen::VectorXd s_vec(core_slice.size()), z_vec(z.size());
  for (int64_t i = 0; i < core_slice.size(); ++i) s_vec(i) = core_slice[i].real();
  for (int64_t i = 0; i < z.size(); ++i) z_vec(i) = z[i].real();
  double ns = s_vec.norm(), nz = z_vec.norm();
  if (ns == 0.0 || nz == 0.0) return {0.0, true};

  double h = amplitude_estimate(s_vec / ns, z_vec / nz, t_qubits);
  return {ns * nz * (1.0 - 2.0 * h), false};
}

// ---- stochastic gradient descent ---------------------------------------------

inline DenseTensor core_slice(const DenseTensor& core, int mode, int64_t at) {
  detail::check_mode(core.dims(), mode);
  std::vector<int64_t> slice_dims;
  for (int k = 0; k < core.order(); ++k)
    if (k != mode) slice_dims.push_back(core.dim(k));
  if (slice_dims.empty()) slice_dims.push_back(1);
  DenseTensor out(slice_dims);
  std::vector<int64_t> idx(core.order(), 0);
  int64_t w = 0;
  for (int64_t flat = 0; flat < core.size(); ++flat) {
    if (idx[mode] == at) out[w++] = core[flat];
    for (int k = core.order() - 1; k >= 0; --k) {
      if (++idx[k] < core.dim(k)) break;
      idx[k] = 0;
    }
  }
  return out;
}

struct SgdOptions {
  double eta = 0.05;
  double lambda = 1e-4;       // factor weight decay
  double lambda_core = 1e-4;  // core weight decay
  bool hybrid = false;        // route factor gradients through amplitude estimation
  int t_qubits = 12;
  PointLoss loss = squared_loss();
};

/// Gradients of the pointwise loss at one sample, evaluated at the current
/// parameters; the prediction and its error come along for reuse.
struct SampleGradients {
  double t = 0.0;
  double e = 0.0;                            // d l / d t
  std::vector<Eigen::VectorXd> factor_rows;  // d l / d U_k(i_k, :)
  DenseTensor core{{1}};                     // d l / d S
};

inline SampleGradients sample_gradients(const CompletionModel& m, const RatingEntry& sample,
                                        const SgdOptions& opt) {
  const int order = static_cast<int>(m.factors.size());
  SampleGradients g;
  g.t = predict(m, sample.index);
  g.e = opt.loss.deriv(g.t, sample.rating);

  std::vector<Eigen::VectorXd> rows;
  for (int k = 0; k < order; ++k) rows.push_back(m.factors[k].row(sample.index[k]).transpose());

  g.factor_rows.resize(order);
  for (int k = 0; k < order; ++k) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.ranks[k]);
    std::vector<Eigen::VectorXd> others;
    for (int j = 0; j < order; ++j)
      if (j != k) others.push_back(rows[j]);
    for (int64_t a = 0; a < m.ranks[k]; ++a) {
      DenseTensor slice = core_slice(m.core, k, a);
      if (opt.hybrid) {
        grad(a) = g.e * quantum_gradient_component(slice, others, opt.t_qubits).value;
      } else {
        std::vector<Eigen::VectorXcd> cast;
        for (const auto& r : others) cast.push_back(r.cast<cdouble>());
        grad(a) = g.e * inner_product(slice, outer_product(cast)).real();
      }
    }
    g.factor_rows[k] = std::move(grad);
  }

  std::vector<Eigen::VectorXcd> cast;
  for (const auto& r : rows) cast.push_back(r.cast<cdouble>());
  g.core = outer_product(cast) * cdouble{g.e, 0.0};
  return g;
}

/// One SGD update: x <- x - eta*lambda*x - eta * dl/dx, all gradients taken
/// at the pre-update parameters. Touched factor rows and the whole core are
/// updated.
inline void sgd_step(CompletionModel& m, const RatingEntry& sample, const SgdOptions& opt) {
  SampleGradients g = sample_gradients(m, sample, opt);
  const int order = static_cast<int>(m.factors.size());
  for (int k = 0; k < order; ++k) {
    Eigen::VectorXd row = m.factors[k].row(sample.index[k]).transpose();
    m.factors[k].row(sample.index[k]) =
        (row - opt.eta * opt.lambda * row - opt.eta * g.factor_rows[k]).transpose();
  }
  for (int64_t i = 0; i < m.core.size(); ++i) {
    double cur = m.core[i].real();
    m.core[i] = cur - opt.eta * opt.lambda_core * cur - opt.eta * g.core[i].real();
  }
}

inline void sgd_epoch(CompletionModel& m, const RatingsTensor& ratings, std::mt19937_64& rng,
                      const SgdOptions& opt) {
  std::vector<size_t> order(ratings.observed.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (size_t i : order) sgd_step(m, ratings.observed[i], opt);
}

inline void sgd_epoch(CompletionModel& m, const RatingsTensor& ratings, uint64_t seed,
                      const SgdOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  sgd_epoch(m, ratings, rng, opt);
}

struct TrainOptions {
  SgdOptions sgd;
  int64_t epochs = 200;
  uint64_t seed = 1;
};

/// Seeded end-to-end training: uniform [-0.01, 0.01] initialization, then
/// `epochs` shuffled passes driven by one generator, so identical options
/// reproduce identical models bit for bit.
inline CompletionModel train(const RatingsTensor& ratings, const std::vector<int64_t>& ranks,
                             const TrainOptions& opt = {}) {
  CompletionModel m = init_model(ratings.dims, ranks, opt.seed);
  std::mt19937_64 rng(opt.seed + 0x9e3779b97f4a7c15ull);
  for (int64_t epoch = 0; epoch < opt.epochs; ++epoch) sgd_epoch(m, ratings, rng, opt.sgd);
  return m;
}

// ---- recommendation -----------------------------------------------------------

struct Recommendation {
  int64_t index = 0;
  double score = 0.0;
};

/// Ranks unobserved cells along the one axis marked free (-1) in `fixed`,
/// all other indices held. Already-rated cells are skipped.
inline std::vector<Recommendation> recommend(const CompletionModel& m, const RatingsTensor& ratings,
                                             const std::vector<int64_t>& fixed, int64_t top_n) {
  const int order = static_cast<int>(m.factors.size());
  if (static_cast<int>(fixed.size()) != order) throw std::invalid_argument("recommend: index order mismatch");
  int free_axis = -1;
  for (int k = 0; k < order; ++k) {
    if (fixed[k] == -1) {
      if (free_axis != -1) throw std::invalid_argument("recommend: exactly one free axis expected");
      free_axis = k;
    } else if (fixed[k] < 0 || fixed[k] >= m.factors[k].rows()) {
      throw std::invalid_argument("recommend: fixed index out of range");
    }
  }
  if (free_axis == -1) throw std::invalid_argument("recommend: exactly one free axis expected");

  std::vector<Recommendation> out;
  std::vector<int64_t> probe = fixed;
  for (int64_t i = 0; i < m.factors[free_axis].rows(); ++i) {
    probe[free_axis] = i;
    bool rated = false;
    for (const auto& e : ratings.observed)
      if (e.index == probe) {
        rated = true;
        break;
      }
    if (!rated) out.push_back({i, predict(m, probe)});
  }
  std::sort(out.begin(), out.end(), [](const Recommendation& a, const Recommendation& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  });
  if (top_n >= 0 && static_cast<int64_t>(out.size()) > top_n) out.resize(top_n);
  return out;
}

// ---- checkpoints ----------------------------------------------------------------

inline void write_model(const std::filesystem::path& dir, const CompletionModel& m) {
  std::filesystem::create_directories(dir);
  write_qten_file(dir / "core.qten", m.core);
  for (size_t k = 0; k < m.factors.size(); ++k) {
    DenseTensor f({m.factors[k].rows(), m.factors[k].cols()});
    for (Eigen::Index i = 0; i < m.factors[k].rows(); ++i)
      for (Eigen::Index j = 0; j < m.factors[k].cols(); ++j)
        f.at({i, j}) = m.factors[k](i, j);
    write_qten_file(dir / ("factor_" + std::to_string(k) + ".qten"), f);
  }
  nlohmann::json meta;
  meta["dims"] = m.dims();
  meta["ranks"] = m.ranks;
  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << '\n';
}

inline CompletionModel read_model(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw std::invalid_argument("read_model: missing meta.json");
  nlohmann::json meta = nlohmann::json::parse(meta_in);
  std::vector<int64_t> dims = meta.at("dims").get<std::vector<int64_t>>();
  std::vector<int64_t> ranks = meta.at("ranks").get<std::vector<int64_t>>();

  CompletionModel m;
  m.ranks = ranks;
  m.core = read_qten_file(dir / "core.qten");
  if (m.core.dims() != ranks) throw std::invalid_argument("read_model: core shape mismatch");
  for (size_t k = 0; k < dims.size(); ++k) {
    DenseTensor f = read_qten_file(dir / ("factor_" + std::to_string(k) + ".qten"));
    if (f.order() != 2 || f.dim(0) != dims[k] || f.dim(1) != ranks[k])
      throw std::invalid_argument("read_model: factor shape mismatch");
    Eigen::MatrixXd fm(f.dim(0), f.dim(1));
    for (Eigen::Index i = 0; i < fm.rows(); ++i)
      for (Eigen::Index j = 0; j < fm.cols(); ++j) fm(i, j) = f.at({i, j}).real();
    m.factors.push_back(std::move(fm));
  }
  return m;
}

}  // namespace qhosvd
