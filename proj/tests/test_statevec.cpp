#include <catch2/catch_amalgamated.hpp>
#include <numbers>

#include "helpers.hpp"
#include "qhosvd/qram.hpp"
#include "qhosvd/statevec.hpp"

using namespace qhosvd;
using testutil::random_state;
using testutil::random_tensor;

namespace {

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::MatrixXcd two_qubit_swap() {
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(4, 4);
  s(0, 0) = s(3, 3) = 1.0;
  s(1, 2) = s(2, 1) = 1.0;
  return s;
}

double unitarity_defect(const Eigen::MatrixXcd& u) {
  return (u.adjoint() * u - Eigen::MatrixXcd::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

// Dense unitary e^{-i B t / N} on the padded dilation space of the mode-k
// unfolding: the oracle for both the one-sparse evolve path and the qPCA
// channel target.
Eigen::MatrixXcd padded_dilation_exponential(const DenseTensor& a, int k, double t) {
  Eigen::MatrixXcd u = unfold(a, k).data;
  int64_t big_n = u.rows() + u.cols();
  int64_t embed = next_pow2(big_n);
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(embed, embed);
  b.block(0, u.rows(), u.rows(), u.cols()) = u;
  b.block(u.rows(), 0, u.cols(), u.rows()) = u.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
  Eigen::VectorXcd ph(embed);
  for (int64_t i = 0; i < embed; ++i)
    ph(i) = std::exp(cdouble{0.0, -es.eigenvalues()(i) * t / double(big_n)});
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

TEST_CASE("register rotation for the last mode is the two-layer swap", "[statevec]") {
  PermutationUnitary perm = unfolding_swap_unitary({2, 2, 2}, 2);
  Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(2, 2);
  Eigen::MatrixXcd want = kron(two_qubit_swap(), eye) * kron(eye, two_qubit_swap());
  REQUIRE((perm.dense() - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("register rotation for the first mode is the identity", "[statevec]") {
  for (auto dims : std::vector<std::vector<int64_t>>{{2, 2}, {4, 2, 8}, {2, 2, 2, 2}}) {
    PermutationUnitary perm = unfolding_swap_unitary(dims, 0);
    for (int64_t i = 0; i < perm.dim(); ++i) REQUIRE(perm.dest[i] == i);
  }
}

TEST_CASE("register rotation matches the digit-rotation oracle", "[statevec]") {
  std::vector<int64_t> dims{2, 4, 2, 2};
  for (int mode = 0; mode < 4; ++mode) {
    PermutationUnitary perm = unfolding_swap_unitary(dims, mode);
    // Oracle: decode digits, rotate the digit list left by `mode`, re-encode.
    std::vector<int64_t> idx(4);
    DenseTensor shape(dims);
    for (int64_t src = 0; src < perm.dim(); ++src) {
      shape.unflatten(src, idx);
      int64_t want = 0;
      for (int j = 0; j < 4; ++j) {
        int rot = (mode + j) % 4;
        want = want * dims[rot] + idx[rot];
      }
      REQUIRE(perm.dest[src] == want);
    }
    REQUIRE(unitarity_defect(perm.dense()) == 0.0);
  }
}

TEST_CASE("rotating a prepared state reads out the unfolding", "[statevec]") {
  for (auto dims : std::vector<std::vector<int64_t>>{{2, 2, 2}, {4, 2}, {2, 2, 4}}) {
    DenseTensor a = random_tensor(dims, 800 + dims.size());
    QuantumState s = prepare_full_state(build_qram_tree(a));
    for (int k = 0; k < a.order(); ++k) {
      Eigen::VectorXcd rotated = unfolding_swap_unitary(dims, k).apply(s.amps);
      Eigen::MatrixXcd u = unfold(a, k).data;
      for (int64_t i = 0; i < u.rows(); ++i)
        for (int64_t j = 0; j < u.cols(); ++j)
          REQUIRE(std::abs(rotated(i * u.cols() + j) - u(i, j)) < 1e-12);
    }
  }
}

TEST_CASE("register rotation rejects unusable inputs", "[statevec]") {
  REQUIRE_THROWS_AS(unfolding_swap_unitary({2, 3, 2}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(unfolding_swap_unitary({2, 2}, 2), std::invalid_argument);
}

TEST_CASE("state preparation unitary pins |0> to the target state", "[statevec]") {
  for (uint64_t seed : {900, 901, 902}) {
    Eigen::VectorXcd w = random_state(5, seed);
    Eigen::MatrixXcd v = detail::basis_prep_unitary(w);
    REQUIRE(unitarity_defect(v) < 1e-14);
    REQUIRE((v.col(0) - w).cwiseAbs().maxCoeff() < 1e-15);
  }
  // Edge cases: zero first component, exact basis states.
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(3);
  w(1) = 1.0;
  REQUIRE((detail::basis_prep_unitary(w).col(0) - w).cwiseAbs().maxCoeff() < 1e-15);
  w.setZero();
  w(0) = 1.0;
  REQUIRE((detail::basis_prep_unitary(w).col(0) - w).cwiseAbs().maxCoeff() < 1e-15);
  w(0) = -1.0;
  REQUIRE((detail::basis_prep_unitary(w).col(0) - w).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("the dilation pairs up singular values", "[statevec]") {
  SECTION("scalar matrix") {
    Eigen::MatrixXcd a(1, 1);
    a(0, 0) = 1.0;
    SparseHermitian h = hermitian_extension(a);
    Eigen::MatrixXcd d = h.dense();
    REQUIRE(d(0, 1) == cdouble{1.0, 0.0});
    REQUIRE(d(1, 0) == cdouble{1.0, 0.0});
    REQUIRE(d(0, 0) == cdouble{0.0, 0.0});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d);
    REQUIRE(std::abs(es.eigenvalues()(0) + 1.0) < 1e-15);
    REQUIRE(std::abs(es.eigenvalues()(1) - 1.0) < 1e-15);
  }
  SECTION("diagonal matrix") {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(2, 2);
    a(0, 0) = 3.0;
    a(1, 1) = 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitian_extension(a).dense());
    Eigen::VectorXd want(4);
    want << -3.0, -2.0, 2.0, 3.0;
    REQUIRE((es.eigenvalues() - want).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("seeded unfolding: +/- pairs and equal-norm halves") {
    DenseTensor t = random_tensor({2, 2, 2}, 903);
    Eigen::MatrixXcd a = unfold(t, 0).data;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitian_extension(a).dense());
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
      double s = svd.singularValues()(i);
      REQUIRE((es.eigenvalues().array() - s).abs().minCoeff() < 1e-10);
      REQUIRE((es.eigenvalues().array() + s).abs().minCoeff() < 1e-10);
    }
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      if (std::abs(es.eigenvalues()(i)) < 1e-8) continue;
      double half = es.eigenvectors().col(i).head(a.rows()).norm();
      REQUIRE(std::abs(half - 1.0 / std::sqrt(2.0)) < 1e-10);
    }
  }
}

TEST_CASE("swap-like operator structure", "[statevec]") {
  SECTION("scalar case swaps the two middle levels") {
    DenseTensor one({1, 1});
    one[0] = 1.0;
    SparseHermitian s = swap_like_operator(one, 0);
    REQUIRE(s.dim == 4);
    Eigen::MatrixXcd d = s.dense();
    Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(4, 4);
    want(2, 1) = want(1, 2) = 1.0;
    REQUIRE((d - want).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("Hermitian and one-sparse on seeded input") {
    DenseTensor a = random_tensor({2, 2, 2}, 904);
    for (int k = 0; k < 3; ++k) {
      SparseHermitian s = swap_like_operator(a, k);
      REQUIRE(s.one_sparse());
      Eigen::MatrixXcd d = s.dense();
      REQUIRE((d - d.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SECTION("matches the dilation arranged as |j><l| x |l><j|") {
    DenseTensor a = random_tensor({2, 2}, 905);
    Eigen::MatrixXcd b = hermitian_extension(unfold(a, 0).data).dense();
    int64_t n = b.rows();
    SparseHermitian s = swap_like_operator(a, 0);
    Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(n * n, n * n);
    for (int64_t l = 0; l < n; ++l)
      for (int64_t j = 0; j < n; ++j) want(j * n + l, l * n + j) += b(l, j);
    REQUIRE((s.dense() - want).cwiseAbs().maxCoeff() < 1e-15);
  }
  SECTION("embedding dimension must cover the dilation") {
    DenseTensor a = random_tensor({2, 2}, 906);
    REQUIRE_THROWS_AS(swap_like_operator(a, 0, 2), std::invalid_argument);
  }
}

TEST_CASE("closed-form evolution of one-sparse operators is exact", "[statevec]") {
  DenseTensor a = random_tensor({2, 2, 2}, 907);
  SparseHermitian s = swap_like_operator(a, 1);
  REQUIRE(s.one_sparse());
  double dt = 0.37;
  Eigen::MatrixXcd fast = evolve(s, dt);

  // Dense-eigendecomposition oracle.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s.dense());
  Eigen::VectorXcd ph(s.dim);
  for (int64_t i = 0; i < s.dim; ++i) ph(i) = std::exp(cdouble{0.0, -es.eigenvalues()(i) * dt});
  Eigen::MatrixXcd slow = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
  REQUIRE((fast - slow).cwiseAbs().maxCoeff() < 1e-12);

  REQUIRE(unitarity_defect(fast) < 1e-12);
  REQUIRE((evolve(s, dt) * evolve(s, -dt) - Eigen::MatrixXcd::Identity(s.dim, s.dim))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  REQUIRE((evolve(s, 0.0) - Eigen::MatrixXcd::Identity(s.dim, s.dim)).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("partial trace", "[statevec]") {
  SECTION("discards an uncorrelated factor") {
    Eigen::VectorXcd psi1 = random_state(2, 908), psi2 = random_state(3, 909);
    DensityMatrix rho1 = pure_density(psi1, {2});
    DensityMatrix rho2 = pure_density(psi2, {3});
    Eigen::MatrixXcd joint = kron(rho1.rho, rho2.rho);
    DensityMatrix reduced = partial_trace({joint, {2, 3}}, {1});
    REQUIRE((reduced.rho - rho2.rho).cwiseAbs().maxCoeff() < 1e-14);
    DensityMatrix other = partial_trace({joint, {2, 3}}, {0});
    REQUIRE((other.rho - rho1.rho).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("maximally entangled pair reduces to the maximally mixed state") {
    Eigen::VectorXcd bell = Eigen::VectorXcd::Zero(4);
    bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
    DensityMatrix reduced = partial_trace(pure_density(bell, {2, 2}), {1});
    REQUIRE((reduced.rho - 0.5 * Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("reduced spectrum equals squared Schmidt coefficients") {
    Eigen::VectorXcd psi = random_state(12, 910);
    DensityMatrix reduced = partial_trace(pure_density(psi, {4, 3}), {0});
    REQUIRE(std::abs(reduced.rho.trace().real() - 1.0) < 1e-12);
    Eigen::Map<const Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        amp(psi.data(), 4, 3);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(amp);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(reduced.rho);
    for (int i = 0; i < 3; ++i) {
      double schmidt2 = svd.singularValues()(i) * svd.singularValues()(i);
      REQUIRE((es.eigenvalues().array() - schmidt2).abs().minCoeff() < 1e-12);
    }
  }
  SECTION("bad subsystem indices are rejected") {
    DensityMatrix rho = pure_density(random_state(4, 911), {2, 2});
    REQUIRE_THROWS_AS(partial_trace(rho, {2}), std::invalid_argument);
    REQUIRE_THROWS_AS(partial_trace(rho, {-1}), std::invalid_argument);
    // Keeping nothing is the full trace.
    DensityMatrix scalar = partial_trace(rho, {});
    REQUIRE(scalar.rho.rows() == 1);
    REQUIRE(std::abs(scalar.rho(0, 0) - cdouble{1.0, 0.0}) < 1e-14);
  }
}

TEST_CASE("one channel step approximates conjugation to second order", "[statevec]") {
  DenseTensor a = random_tensor({2, 2, 2}, 912);
  const int k = 0;
  SparseHermitian s = swap_like_operator(a, k, 8);
  DensityMatrix rho1 = uniform_levels_density(8, 6);

  SECTION("zero time is the identity channel") {
    DensityMatrix rho2 = pure_density(random_state(8, 913), {8});
    DensityMatrix out = qpca_step(s, rho1, rho2, 0.0);
    REQUIRE((out.rho - rho2.rho).cwiseAbs().maxCoeff() < 1e-14);
  }

  SECTION("halving dt quarters the one-step error") {
    for (uint64_t seed : {914, 915}) {
      DensityMatrix rho2 = pure_density(random_state(8, seed), {8});
      auto err = [&](double dt) {
        Eigen::MatrixXcd u = padded_dilation_exponential(a, k, dt);
        DensityMatrix target{u * rho2.rho * u.adjoint(), {8}};
        return trace_distance(qpca_step(s, rho1, rho2, dt), target);
      };
      for (double dt : {0.25, 0.125}) {
        double ratio = err(dt) / err(dt / 2.0);
        REQUIRE(ratio > 3.5);
        REQUIRE(ratio < 4.5);
      }
    }
  }

  SECTION("trace-preserving and completely positive") {
    DensityMatrix rho2 = pure_density(random_state(8, 916), {8});
    DensityMatrix out = qpca_step(s, rho1, rho2, 0.3);
    REQUIRE(std::abs(out.rho.trace().real() - 1.0) < 1e-10);
    REQUIRE((out.rho - out.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(out.rho);
    REQUIRE(es.eigenvalues().minCoeff() > -1e-10);
  }

  SECTION("step budget reaches the accuracy target") {
    DensityMatrix rho2 = pure_density(random_state(8, 917), {8});
    double max_abs = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) max_abs = std::max(max_abs, std::abs(a[i]));
    const double t = 1.0, eps = 1e-2;
    int64_t steps = static_cast<int64_t>(std::ceil(t * t * max_abs * max_abs / eps));
    DensityMatrix cur = rho2;
    for (int64_t i = 0; i < steps; ++i) cur = qpca_step(s, rho1, cur, t / double(steps));
    Eigen::MatrixXcd u = padded_dilation_exponential(a, k, t);
    DensityMatrix target{u * rho2.rho * u.adjoint(), {8}};
    REQUIRE(trace_distance(cur, target) <= eps);
  }
}

TEST_CASE("phase estimation on exact eigenstates", "[statevec]") {
  SECTION("dyadic eigenphase lands in a single bucket") {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(2, 2);
    u(1, 1) = std::exp(cdouble{0.0, std::numbers::pi});
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(2);
    psi(1) = 1.0;
    PhaseEstimationResult pe = phase_estimation(u, psi, 3);
    REQUIRE(std::abs(pe.probabilities(4) - 1.0) < 1e-12);
    for (int64_t y = 0; y < 8; ++y)
      if (y != 4) REQUIRE(pe.probabilities(y) < 1e-12);
    // Bucket 4 of 8 wraps to phase -pi.
    REQUIRE(pe.phase(4) == -std::numbers::pi);
    REQUIRE((pe.residual(4) - psi).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("identity concentrates on bucket zero for any state") {
    Eigen::VectorXcd psi = random_state(4, 918);
    PhaseEstimationResult pe = phase_estimation(Eigen::MatrixXcd::Identity(4, 4), psi, 5);
    REQUIRE(std::abs(pe.probabilities(0) - 1.0) < 1e-12);
  }
  SECTION("input validation") {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(2, 2);
    Eigen::VectorXcd bad = Eigen::VectorXcd::Ones(2);
    REQUIRE_THROWS_AS(phase_estimation(u, bad, 3), std::invalid_argument);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(2);
    psi(0) = 1.0;
    REQUIRE_THROWS_AS(phase_estimation(u, psi, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(phase_estimation(u, psi, 25), std::invalid_argument);
    REQUIRE_THROWS_AS(phase_estimation(Eigen::MatrixXcd::Identity(3, 3), psi, 3),
                      std::invalid_argument);
  }
}

TEST_CASE("phase estimation resolves dilation eigenvalues", "[statevec]") {
  DenseTensor a = random_tensor({2, 2, 2}, 919);
  const int k = 0;
  const int d = 8;
  const double t = 2.0 * std::numbers::pi;
  const int64_t big_n = 6;

  Eigen::MatrixXcd u = padded_dilation_exponential(a, k, t);

  // Dense reference spectrum of the padded dilation.
  Eigen::MatrixXcd unf = unfold(a, k).data;
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(8, 8);
  b.block(0, 2, 2, 4) = unf;
  b.block(2, 0, 4, 2) = unf.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);

  // Pick the top +/- pair and a 30/70 superposition of them.
  Eigen::Index hi = 7, lo = 0;  // eigenvalues sorted ascending: extremes are +/- sigma_1
  double sigma1 = es.eigenvalues()(hi);
  REQUIRE(std::abs(es.eigenvalues()(lo) + sigma1) < 1e-12);
  Eigen::VectorXcd psi =
      std::sqrt(0.3) * es.eigenvectors().col(hi) + std::sqrt(0.7) * es.eigenvectors().col(lo);

  PhaseEstimationResult pe = phase_estimation(u, psi, d);

  std::vector<Eigen::VectorXcd> vectors(pe.bucket_count());
  std::vector<double> values(pe.bucket_count());
  for (int64_t y = 0; y < pe.bucket_count(); ++y) {
    if (pe.probabilities(y) > 1e-14) vectors[y] = pe.residual(y);
    values[y] = -pe.phase(y) / t;  // lambda / N
  }
  auto clusters = cluster_buckets(pe.probabilities, vectors, values);
  REQUIRE(clusters.size() == 2);

  // Heavier branch first: the -sigma_1 eigenvector carries weight 0.7.
  REQUIRE(std::abs(clusters[0].weight - 0.7) < 0.02);
  REQUIRE(std::abs(clusters[1].weight - 0.3) < 0.02);
  double resolution = 1.0 / double(int64_t{1} << d);  // of lambda/N at t = 2 pi
  REQUIRE(std::abs(clusters[0].value - (-sigma1 / big_n)) <= resolution);
  REQUIRE(std::abs(clusters[1].value - (sigma1 / big_n)) <= resolution);
  REQUIRE(std::norm(clusters[0].vector.dot(es.eigenvectors().col(lo))) > 0.98);
  REQUIRE(std::norm(clusters[1].vector.dot(es.eigenvectors().col(hi))) > 0.98);
}

TEST_CASE("bucket collation groups mass by residual direction", "[statevec]") {
  Eigen::VectorXd p(8);
  p << 0.05, 0.45, 0.05, 0.0, 0.02, 0.38, 0.05, 0.0;
  Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(2), e1 = Eigen::VectorXcd::Zero(2);
  e0(0) = 1.0;
  e1(1) = 1.0;
  std::vector<Eigen::VectorXcd> vectors{e0, e0, e0, {}, e1, e1, e1, {}};
  std::vector<double> values{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};

  auto clusters = cluster_buckets(p, vectors, values);
  REQUIRE(clusters.size() == 2);
  REQUIRE(clusters[0].peak == 1);
  REQUIRE(clusters[0].value == 0.1);
  REQUIRE(std::abs(clusters[0].weight - 0.55) < 1e-12);
  REQUIRE(clusters[1].peak == 5);
  REQUIRE(std::abs(clusters[1].weight - 0.45) < 1e-12);

  // A second peak with the same residual direction is absorbed, not founded.
  Eigen::VectorXd p2(4);
  p2 << 0.6, 0.1, 0.3, 0.0;
  std::vector<Eigen::VectorXcd> v2{e0, e0, e0, e0};
  std::vector<double> val2{0.0, 0.1, 0.2, 0.3};
  auto merged = cluster_buckets(p2, v2, val2);
  REQUIRE(merged.size() == 1);
  REQUIRE(merged[0].peak == 0);
  REQUIRE(std::abs(merged[0].weight - 1.0) < 1e-12);
}

TEST_CASE("states stay normalized through long unitary pipelines", "[statevec]") {
  DenseTensor a = random_tensor({2, 2, 2}, 920);
  Eigen::MatrixXcd u = padded_dilation_exponential(a, 0, 0.7);
  Eigen::VectorXcd psi = random_state(8, 921);
  for (int i = 0; i < 10000; ++i) psi = u * psi;
  REQUIRE(std::abs(psi.norm() - 1.0) < 1e-10);
}
