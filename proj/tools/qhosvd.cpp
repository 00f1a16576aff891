// Command line front end: decompose / verify / complete / selftest.
//
// Exit codes: 0 success, 2 bad input (unreadable or malformed files, invalid
// flags), 3 property failure (verification beyond tolerance, failed selftest).
// Reports are JSON with sorted keys and 17-significant-digit floats, so a
// fixed flag set (plus seed) reproduces the file byte for byte. Wall time is
// printed to the console only, never into the report.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qhosvd/alg1.hpp"
#include "qhosvd/alg2.hpp"
#include "qhosvd/completion.hpp"
#include "qhosvd/hosvd.hpp"
#include "qhosvd/qram.hpp"
#include "qhosvd/report.hpp"

namespace {

using nlohmann::json;
using namespace qhosvd;

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitPropertyFailure = 3;

std::vector<int64_t> parse_int_list(const std::string& text) {
  std::vector<int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    int64_t v = std::stoll(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad integer list: " + text);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty integer list");
  return out;
}

json spectra_json(const std::vector<Eigen::VectorXd>& spectra) {
  json out = json::array();
  for (const auto& s : spectra) out.push_back(std::vector<double>(s.begin(), s.end()));
  return out;
}

void emit_report(const json& report, const std::string& path) {
  if (path.empty()) {
    dump_json(std::cout, report);
    std::cout << '\n';
  } else {
    write_report(path, report);
  }
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// --- decompose ---------------------------------------------------------

struct DecomposeArgs {
  std::string input;
  std::string method = "classical";
  std::string truncate;
  std::string output;
  std::string report;
  double tol = -1.0;  // < 0: report only, no gating
  int precision_qubits = 0;
  double epsilon = 1e-2;
  double sim_time = 2.0 * std::numbers::pi;
  int64_t steps = 0;
  double eigen_threshold = -1.0;
  bool channel = false;
};

int cmd_decompose(const DecomposeArgs& args) {
  Timer timer;
  DenseTensor a = read_qten_file(args.input);

  std::vector<int64_t> ranks;
  if (!args.truncate.empty()) {
    ranks = parse_int_list(args.truncate);
    if (static_cast<int>(ranks.size()) != a.order())
      throw std::invalid_argument("--truncate needs one rank per mode");
  }

  json config;
  config["method"] = args.method;
  config["tol"] = args.tol;
  if (!ranks.empty()) config["truncate"] = ranks;

  HosvdResult result;
  double success_probability = -1.0;
  if (args.method == "classical") {
    result = ranks.empty() ? hosvd(a) : truncated_hosvd(a, ranks);
  } else if (args.method == "alg1") {
    Alg1Config cfg;
    cfg.epsilon = args.epsilon;
    cfg.sim_time = args.sim_time;
    cfg.steps = args.steps;
    cfg.control_qubits = args.precision_qubits;
    cfg.eigen_threshold = args.eigen_threshold;
    cfg.use_channel = args.channel;
    config["channel"] = cfg.use_channel;
    config["epsilon"] = cfg.epsilon;
    config["precision_qubits"] = cfg.resolved_control_qubits();
    config["sim_time"] = cfg.sim_time;
    if (cfg.use_channel) config["steps"] = cfg.resolved_steps(max_abs_entry(a) / frobenius_norm(a));
    Alg1Output out = qhosvd1(a, cfg);
    result = std::move(out.result);
    success_probability = out.chained_success_probability;
    if (!ranks.empty()) result = truncate_result(result, ranks);
  } else if (args.method == "alg2") {
    int d = args.precision_qubits > 0 ? args.precision_qubits : 8;
    config["precision_qubits"] = d;
    Alg2Output out = qhosvd2(a, d);
    result = std::move(out.result);
    success_probability = out.chained_success_probability;
    if (!ranks.empty()) result = truncate_result(result, ranks);
  } else {
    throw std::invalid_argument("unknown method: " + args.method);
  }

  VerifyReport check = verify(result, a);

  json report;
  report["config"] = config;
  report["dims"] = a.dims();
  report["input"] = args.input;
  report["input_digest"] = file_digest(args.input);
  report["method"] = args.method;
  report["parameter_count"] = parameter_count(result);
  report["spectra"] = spectra_json(result.spectra);
  if (success_probability >= 0.0) report["success_probability"] = success_probability;
  report["verify"] = {{"factor_orthogonality", check.max_factor_orthogonality},
                      {"core_orthogonality", check.max_core_orthogonality},
                      {"ordering_violation", check.max_ordering_violation},
                      {"reconstruction_residual", check.reconstruction_residual}};

  if (!args.output.empty()) write_hosvd_result(args.output, result);
  emit_report(report, args.report);
  std::cerr << "wall time: " << timer.seconds() << " s\n";

  if (args.tol >= 0.0 && !check.passed(args.tol)) {
    std::cerr << "verification failed beyond tol " << args.tol << "\n";
    return kExitPropertyFailure;
  }
  return kExitOk;
}

// --- verify ------------------------------------------------------------

struct VerifyArgs {
  std::string input;
  std::string result;
  std::string report;
  double tol = 1e-9;
};

int cmd_verify(const VerifyArgs& args) {
  Timer timer;
  DenseTensor a = read_qten_file(args.input);
  HosvdResult r = read_hosvd_result(args.result);
  VerifyReport check = verify(r, a);

  json report;
  report["config"] = {{"tol", args.tol}};
  report["input"] = args.input;
  report["input_digest"] = file_digest(args.input);
  report["result"] = args.result;
  report["verify"] = {{"factor_orthogonality", check.max_factor_orthogonality},
                      {"core_orthogonality", check.max_core_orthogonality},
                      {"ordering_violation", check.max_ordering_violation},
                      {"reconstruction_residual", check.reconstruction_residual}};
  report["passed"] = check.passed(args.tol);
  emit_report(report, args.report);
  std::cerr << "wall time: " << timer.seconds() << " s\n";
  return check.passed(args.tol) ? kExitOk : kExitPropertyFailure;
}

// --- complete ----------------------------------------------------------

struct CompleteArgs {
  std::string ratings;
  std::string test_ratings;
  std::string dims;
  std::string ranks;
  std::string mode = "classical";
  std::string output;
  std::string report;
  double eta = 0.05;
  double lambda = 1e-4;
  double lambda_core = 1e-4;
  int64_t epochs = 200;
  uint64_t seed = 0;
  int phase_qubits = 12;
};

RatingsTensor read_ratings_file(const std::string& path, const std::vector<int64_t>& dims,
                                std::ostream* warnings) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open ratings file: " + path);
  return read_ratings_tsv(in, dims, warnings);
}

int cmd_complete(const CompleteArgs& args) {
  Timer timer;
  std::vector<int64_t> dims = parse_int_list(args.dims);
  std::vector<int64_t> ranks = parse_int_list(args.ranks);
  if (args.mode != "classical" && args.mode != "hybrid")
    throw std::invalid_argument("--mode must be classical or hybrid");

  std::ostringstream warning_text;
  RatingsTensor train_set = read_ratings_file(args.ratings, dims, &warning_text);
  std::vector<std::string> warnings;
  {
    std::istringstream lines(warning_text.str());
    std::string line;
    while (std::getline(lines, line))
      if (!line.empty()) {
        warnings.push_back(line);
        std::cerr << "warning: " << line << "\n";
      }
  }

  TrainOptions opt;
  opt.epochs = args.epochs;
  opt.seed = args.seed;
  opt.sgd.eta = args.eta;
  opt.sgd.lambda = args.lambda;
  opt.sgd.lambda_core = args.lambda_core;
  opt.sgd.hybrid = (args.mode == "hybrid");
  opt.sgd.t_qubits = args.phase_qubits;

  CompletionModel model = train(train_set, ranks, opt);

  json report;
  report["config"] = {{"dims", dims},        {"epochs", args.epochs},
                      {"eta", args.eta},     {"lambda", args.lambda},
                      {"lambda_core", args.lambda_core}, {"mode", args.mode},
                      {"phase_qubits", args.phase_qubits}, {"ranks", ranks},
                      {"seed", args.seed}};
  report["objective"] = objective(model, train_set, args.lambda, args.lambda_core);
  report["ratings"] = args.ratings;
  report["ratings_digest"] = file_digest(args.ratings);
  report["rmse_train"] = rmse(model, train_set);
  report["samples"] = train_set.observed.size();
  if (!warnings.empty()) report["warnings"] = warnings;
  if (!args.test_ratings.empty()) {
    RatingsTensor test_set = read_ratings_file(args.test_ratings, dims, nullptr);
    report["rmse_test"] = rmse(model, test_set);
    report["test_samples"] = test_set.observed.size();
  }

  if (!args.output.empty()) write_model(args.output, model);
  emit_report(report, args.report);
  std::cerr << "wall time: " << timer.seconds() << " s\n";
  return kExitOk;
}

// --- selftest ----------------------------------------------------------

struct SelftestArgs {
  std::string fixture;
  double tol = 1e-9;
};

DenseTensor seeded_tensor(const std::vector<int64_t>& dims, uint64_t seed) {
  DenseTensor a(dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int64_t i = 0; i < a.size(); ++i) a[i] = cdouble{gauss(rng), gauss(rng)};
  double norm = frobenius_norm(a);
  for (int64_t i = 0; i < a.size(); ++i) a[i] /= norm;
  return a;
}

int cmd_selftest(const SelftestArgs& args) {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  DenseTensor a = seeded_tensor({3, 3, 3}, 11);

  {
    HosvdResult r = hosvd(a);
    check("classical decomposition properties", verify(r, a).passed(1e-9));
  }
  {
    DenseTensor onehot({2, 2, 2});
    onehot[0] = 1.0;
    HosvdResult r = hosvd(onehot);
    bool ok = true;
    for (const auto& s : r.spectra) ok = ok && std::abs(s(0) - 1.0) < 1e-12 && std::abs(s(1)) < 1e-12;
    check("one-hot spectra", ok);
  }
  {
    QRamTree tree = build_qram_tree(seeded_tensor({2, 3, 2}, 5));
    double fro2 = 1.0;  // seeded tensors are normalized
    bool ok = std::abs(tree.root() - fro2) < 1e-12;
    for (size_t t = 0; t + 1 < tree.levels.size() && ok; ++t) {
      int64_t width = tree.levels[t].size();
      int64_t b = tree.levels[t + 1].size() / width;
      for (int64_t s = 0; s < width && ok; ++s) {
        double sum = 0.0;
        for (int64_t c = 0; c < b; ++c) sum += tree.levels[t + 1][c * width + s];
        ok = std::abs(sum - tree.levels[t][s]) < 1e-12;
      }
    }
    check("amplitude tree invariants", ok);
  }
  {
    UnfoldingMatrix u = unfold(a, 0);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(u.data);
    SparseHermitian h = hermitian_extension(u.data);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense());
    bool ok = true;
    for (int64_t i = 0; i < svd.singularValues().size(); ++i) {
      double s = svd.singularValues()(i);
      ok = ok && (es.eigenvalues().array() - s).abs().minCoeff() < 1e-10 &&
           (es.eigenvalues().array() + s).abs().minCoeff() < 1e-10;
    }
    check("dilation carries singular values as +/- pairs", ok);
  }
  {
    HosvdResult r = hosvd(a);
    ModeMultiplyOutcome outcome = quantum_mode_multiply(a, r.factors[0], 0);
    check("mode product success probability",
          std::abs(outcome.success_probability - 1.0 / 3.0) < 1e-12);
  }
  {
    Eigen::VectorXd s(4), z(4);
    s << 0.5, 0.5, 0.5, 0.5;
    bool ok = std::abs(amplitude_estimate(s, s, 6)) < 1e-12;
    z << 0.5, -0.5, 0.5, -0.5;
    double h = amplitude_estimate(s, z, 6);
    ok = ok && std::abs(h - 0.5) <= std::pow(2.0, -6);
    check("amplitude estimation bound", ok);
  }
  {
    DenseTensor b = seeded_tensor({2, 2, 2}, 7);
    QsveOperators ops = build_qsve(b, 0);
    bool ok = (ops.w * ops.w.adjoint() - Eigen::MatrixXcd::Identity(ops.w.rows(), ops.w.cols()))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(unfold(b, 0).data);
    Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(ops.geo.cols_p);
    e0(0) = 1.0;
    auto est = qsve_readout(ops, e0, 8);
    ok = ok && !est.empty() &&
         std::abs(est.front().sigma - svd.singularValues()(0)) <= est.front().resolution;
    check("singular value estimation", ok);
  }
  {
    RatingsTensor ratings;
    ratings.dims = {3, 3, 2};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> val(1.0, 5.0);
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 3; ++j) ratings.observed.push_back({{i, j, (i + j) % 2}, val(rng)});
    CompletionModel m = init_model(ratings.dims, {2, 2, 1}, 17);
    SgdOptions opt;
    bool ok = true;
    for (const auto& sample : ratings.observed) {
      SampleGradients g = sample_gradients(m, sample, opt);
      for (int k = 0; k < 3 && ok; ++k) {
        Eigen::VectorXd row = m.factors[k].row(sample.index[k]);
        for (int64_t c = 0; c < row.size() && ok; ++c) {
          const double step = 1e-6;
          CompletionModel plus = m, minus = m;
          plus.factors[k](sample.index[k], c) += step;
          minus.factors[k](sample.index[k], c) -= step;
          double fd = (opt.loss.value(predict(plus, sample.index), sample.rating) -
                       opt.loss.value(predict(minus, sample.index), sample.rating)) /
                      (2.0 * step);
          ok = std::abs(fd - g.factor_rows[k](c)) <= 1e-5 * std::max(1.0, std::abs(fd));
        }
      }
    }
    check("completion gradients match finite differences", ok);
  }
  if (!args.fixture.empty()) {
    DenseTensor fin = read_qten_file(std::filesystem::path(args.fixture) / "input.qten");
    HosvdResult r = read_hosvd_result(std::filesystem::path(args.fixture) / "result");
    check("fixture verification", verify(r, fin).passed(args.tol));
  }

  std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
  return failures == 0 ? kExitOk : kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor decomposition toolbox: classical and simulated quantum pipelines"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  CLI::App* decompose = app.add_subcommand("decompose", "Decompose a QTEN tensor");
  decompose->add_option("--input", dec.input, "input tensor (QTEN)")->required();
  decompose->add_option("--method", dec.method, "classical | alg1 | alg2")
      ->check(CLI::IsMember({"classical", "alg1", "alg2"}));
  decompose->add_option("--truncate", dec.truncate, "per-mode ranks r1,r2,...");
  decompose->add_option("--output", dec.output, "result directory to write");
  decompose->add_option("--report", dec.report, "report path (default: stdout)");
  decompose->add_option("--tol", dec.tol,
                        "gate verification at this tolerance (exit 3 beyond it); with --truncate "
                        "the residual is the discarded energy, gate accordingly");
  decompose->add_option("--precision-qubits", dec.precision_qubits, "phase register width");
  decompose->add_option("--epsilon", dec.epsilon, "alg1 accuracy target");
  decompose->add_option("--sim-time", dec.sim_time, "alg1 evolution time");
  decompose->add_option("--steps", dec.steps, "alg1 channel step count (0: derived)");
  decompose->add_option("--eigen-threshold", dec.eigen_threshold, "alg1 eigenvalue floor");
  decompose->add_flag("--channel", dec.channel, "alg1: stepped density-matrix channel");

  VerifyArgs ver;
  CLI::App* verify_cmd = app.add_subcommand("verify", "Verify a result directory against its input");
  verify_cmd->add_option("--input", ver.input, "input tensor (QTEN)")->required();
  verify_cmd->add_option("--result", ver.result, "result directory")->required();
  verify_cmd->add_option("--report", ver.report, "report path (default: stdout)");
  verify_cmd->add_option("--tol", ver.tol, "pass/fail tolerance");

  CompleteArgs com;
  CLI::App* complete = app.add_subcommand("complete", "Train a completion model on sparse ratings");
  complete->add_option("--ratings", com.ratings, "observed entries (TSV)")->required();
  complete->add_option("--dims", com.dims, "tensor dimensions d1,d2,...")->required();
  complete->add_option("--ranks", com.ranks, "model ranks r1,r2,...")->required();
  complete->add_option("--eta", com.eta, "learning rate");
  complete->add_option("--lambda", com.lambda, "factor weight decay");
  complete->add_option("--lambda-core", com.lambda_core, "core weight decay");
  complete->add_option("--epochs", com.epochs, "training epochs");
  complete->add_option("--seed", com.seed, "RNG seed")->required();
  complete->add_option("--mode", com.mode, "classical | hybrid")
      ->check(CLI::IsMember({"classical", "hybrid"}));
  complete->add_option("--phase-qubits", com.phase_qubits, "hybrid estimation register width");
  complete->add_option("--output", com.output, "model directory to write");
  complete->add_option("--report", com.report, "report path (default: stdout)");
  complete->add_option("--test-ratings", com.test_ratings, "held-out entries for test RMSE");

  SelftestArgs self;
  CLI::App* selftest = app.add_subcommand("selftest", "Run the built-in property suite");
  selftest->add_option("--fixture", self.fixture, "directory with input.qten and result/");
  selftest->add_option("--tol", self.tol, "fixture verification tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadInput;
  }

  try {
    if (decompose->parsed()) return cmd_decompose(dec);
    if (verify_cmd->parsed()) return cmd_verify(ver);
    if (complete->parsed()) return cmd_complete(com);
    if (selftest->parsed()) return cmd_selftest(self);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}
