// Copyright 2026 The BONN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Arguments select a subset by number.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bonn/anomaly.hpp"
#include "bonn/bayes_train.hpp"
#include "bonn/experiments.hpp"
#include "bonn/metrics.hpp"
#include "bonn/ortho_nn.hpp"
#include "bonn/rng.hpp"
#include "bonn/runner.hpp"
#include "bonn/subspace_sim.hpp"

namespace bonn {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t uniform_index(Rng& rng, std::size_t count) {
  return std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);
}

Eigen::VectorXd random_angles(int count, Rng& rng) {
  Eigen::VectorXd a(count);
  for (int i = 0; i < count; ++i) a[i] = 2.0 * std::numbers::pi * uniform01(rng) - std::numbers::pi;
  return a;
}

Eigen::VectorXd random_vector(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = standard_normal(rng);
  return v;
}

Tensor3D random_tensor(int channels, std::array<int, 3> shape, Rng& rng) {
  Tensor3D t(channels, shape);
  for (double& v : t.data) v = standard_normal(rng);
  return t;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Runs the command line front end in-process; diagnostics are discarded.
int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bonn");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != kExitOk) std::cerr << err.str();
  return code;
}

std::vector<std::vector<double>> read_csv_numbers(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

// Scratch directory shared by the criteria that drive the command line.
const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("bonn_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Small single-scan dataset for the quick end-to-end checks.
fs::path small_dataset() {
  const fs::path data = workdir() / "small" / "dataset.bonn";
  if (!fs::exists(data)) {
    if (run_cli({"gen-data", "--seed", "2", "--out", (workdir() / "small").string(), "--set",
                 "scans=1", "prevalence=0.1"}) != kExitOk) {
      throw std::runtime_error("gen-data failed");
    }
  }
  return data;
}

// Ten-scan dataset with every generator default.
fs::path default_dataset() {
  const fs::path data = workdir() / "default" / "dataset.bonn";
  if (!fs::exists(data)) {
    if (run_cli({"gen-data", "--seed", "1", "--out", (workdir() / "default").string()}) != kExitOk) {
      throw std::runtime_error("gen-data failed");
    }
  }
  return data;
}

// QCNN3D autoencoder trained on the default dataset.
fs::path trained_qcnn() {
  const fs::path ckpt = workdir() / "qcnn" / "model.ckpt";
  if (!fs::exists(ckpt)) {
    if (run_cli({"train", "--seed", "2", "--out", (workdir() / "qcnn").string(), "--set",
                 "dataset=" + default_dataset().string(), "variant=QCNN3D", "epochs=10",
                 "optimizer=adam"}) != kExitOk) {
      throw std::runtime_error("QCNN3D training failed");
    }
  }
  return ckpt;
}

Outcome orthogonality() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(101);
  const int sizes[] = {2, 4, 8, 16, 64};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = sizes[trial % 5];
    const Topology topo = (trial / 5) % 2 == 0 ? Topology::kPyramid : Topology::kButterfly;
    const CircuitLayout layout = build_layout(topo, n);
    const Eigen::MatrixXd o = layer_matrix(layout, random_angles(layout.num_params, rng));
    const Eigen::MatrixXd gram = o.transpose() * o - Eigen::MatrixXd::Identity(n, n);
    worst = std::max(worst, gram.cwiseAbs().maxCoeff());
  }
  const double elapsed = seconds_since(t0);
  return {worst < 1e-9 && elapsed < 60.0,
          "max |O^T O - I| = " + fmt(worst) + " over 1000 circuits in " + fmt(elapsed) + " s"};
}

Outcome gate_golden_vectors() {
  const double thetas[] = {0.0, std::numbers::pi / 4, std::numbers::pi / 2, std::numbers::pi};
  const int n = 6;
  double worst = 0.0;
  int cases = 0;
  for (double theta : thetas) {
    const double c = std::cos(theta), s = std::sin(theta);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        for (int k = 0; k < n; ++k) {
          Eigen::VectorXd expect = Eigen::VectorXd::Unit(n, k);
          if (k == i) {
            expect[i] = c;
            expect[j] = -s;
          } else if (k == j) {
            expect[i] = s;
            expect[j] = c;
          }
          const UnaryState out = apply_rbs(UnaryState::basis(n, k), i, j, theta);
          worst = std::max(worst, (out.amplitudes() - expect).cwiseAbs().maxCoeff());
          ++cases;
        }
      }
    }
  }
  return {worst < 1e-12, std::to_string(cases) + " basis cases, max error " + fmt(worst)};
}

Outcome loader_round_trip() {
  Rng rng = make_rng(103);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 63));
    Eigen::VectorXd x = random_vector(n, rng);
    x /= x.norm();
    for (Topology topo : {Topology::kDiagonalLoader, Topology::kParallelLoader}) {
      const UnaryState out =
          simulate(build_layout(topo, n), loader_angles(x, topo), UnaryState::basis(n, 0));
      worst = std::max(worst, (out.amplitudes() - x).cwiseAbs().maxCoeff());
    }
  }
  return {worst < 1e-9, "500 vectors x 2 loaders, max error " + fmt(worst)};
}

// Reference convolution: every output voxel is a filter row dotted with
// the zero-padded input window.
Tensor3D direct_conv(const Eigen::MatrixXd& filters, const Tensor3D& x, int d, int stride,
                     Padding padding) {
  const ConvGeometry g = make_conv_geometry(x.channels, x.shape, d, stride, padding);
  Tensor3D out(static_cast<int>(filters.rows()), g.out_shape);
  for (int k = 0; k < filters.rows(); ++k) {
    for (int oz = 0; oz < g.out_shape[0]; ++oz) {
      for (int oy = 0; oy < g.out_shape[1]; ++oy) {
        for (int ox = 0; ox < g.out_shape[2]; ++ox) {
          double acc = 0.0;
          int row = 0;
          for (int c = 0; c < x.channels; ++c) {
            for (int dz = 0; dz < d; ++dz) {
              for (int dy = 0; dy < d; ++dy) {
                for (int dx = 0; dx < d; ++dx, ++row) {
                  const int z = oz * stride + dz - g.pad_before[0];
                  const int y = oy * stride + dy - g.pad_before[1];
                  const int xx = ox * stride + dx - g.pad_before[2];
                  if (z < 0 || y < 0 || xx < 0 || z >= x.shape[0] || y >= x.shape[1] ||
                      xx >= x.shape[2]) {
                    continue;
                  }
                  acc += filters(k, row) * x.at(c, z, y, xx);
                }
              }
            }
          }
          out.at(k, oz, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

Outcome conv_matches_direct() {
  Rng rng = make_rng(104);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int filters = 2 + static_cast<int>(uniform_index(rng, 7));
    const int stride = 1 + trial % 2;
    const Padding pad = trial % 3 == 0 ? Padding::kValid : Padding::kSame;
    const Topology topo = trial % 2 == 0 ? Topology::kPyramid : Topology::kButterfly;
    OrthoConv3DLayer l = make_ortho_conv3d(2, filters, stride, pad, topo);
    l.theta = random_angles(l.layout.num_params, rng);
    const Tensor3D x = random_tensor(1, {8, 8, 8}, rng);
    const Eigen::MatrixXd rows =
        layer_matrix(l.layout, l.theta).topLeftCorner(filters, l.patch_size());
    const Tensor3D y = conv3d_forward(l, x);
    const Tensor3D ref = direct_conv(rows, x, 2, stride, pad);
    if (y.shape != ref.shape || y.channels != ref.channels) return {false, "shape mismatch"};
    worst = std::max(worst, mse(y.data, ref.data));
  }
  return {worst < 1e-18, "100 random 8^3 inputs, max MSE " + fmt(worst)};
}

// |analytic - numeric| / max(1, |numeric|), the largest over all components.
struct GradientCheck {
  double worst = 0.0;
  int configs = 0;
  void add(double analytic, double numeric) {
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
  }
};

Outcome gradient_checks() {
  Rng rng = make_rng(105);
  const double h = 1e-5;
  GradientCheck ortho, conv, elbo;
  for (int trial = 0; trial < 40; ++trial) {
    const int in = 2 + static_cast<int>(uniform_index(rng, 9));
    const int out = 2 + static_cast<int>(uniform_index(rng, 9));
    OrthoLinearLayer l = make_ortho_linear(in, out, Topology::kPyramid);
    l.theta = random_angles(l.layout.num_params, rng);
    const Eigen::VectorXd x = random_vector(in, rng), w = random_vector(out, rng);
    const OrthoGradients g = ortho_backward(l, x, w);
    for (int k = 0; k < l.theta.size(); ++k) {
      OrthoLinearLayer p = l, m = l;
      p.theta[k] += h;
      m.theta[k] -= h;
      ortho.add(g.grad_theta[k], (w.dot(ortho_forward(p, x)) - w.dot(ortho_forward(m, x))) / (2 * h));
    }
    for (int i = 0; i < in; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      ortho.add(g.grad_x[i], (w.dot(ortho_forward(l, xp)) - w.dot(ortho_forward(l, xm))) / (2 * h));
    }
    ++ortho.configs;
  }
  for (int trial = 0; trial < 40; ++trial) {
    const int channels = 1 + trial % 2;
    OrthoConv3DLayer l = make_ortho_conv3d(2, 2 + static_cast<int>(uniform_index(rng, 7)),
                                           1 + trial % 2, trial % 3 == 0 ? Padding::kSame : Padding::kValid,
                                           trial % 4 < 2 ? Topology::kPyramid : Topology::kButterfly,
                                           channels);
    l.theta = random_angles(l.layout.num_params, rng);
    const Tensor3D x = random_tensor(channels, {4, 3, 4}, rng);
    const Tensor3D y = conv3d_forward(l, x);
    const Tensor3D w = random_tensor(y.channels, y.shape, rng);
    auto loss = [&](const OrthoConv3DLayer& layer, const Tensor3D& in) {
      return conv3d_forward(layer, in).flat().dot(w.flat());
    };
    const ConvGradients g = conv3d_backward(l, x, w);
    for (int k = 0; k < l.theta.size(); ++k) {
      OrthoConv3DLayer p = l, m = l;
      p.theta[k] += h;
      m.theta[k] -= h;
      conv.add(g.grad_theta[k], (loss(p, x) - loss(m, x)) / (2 * h));
    }
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      Tensor3D xp = x, xm = x;
      xp.data[i] += h;
      xm.data[i] -= h;
      conv.add(g.grad_x.data[i], (loss(l, xp) - loss(l, xm)) / (2 * h));
    }
    ++conv.configs;
  }
  for (int trial = 0; trial < 20; ++trial) {
    Sequential net;
    const int width = 3 + trial % 3;
    net.add(std::make_unique<DenseLayer>(4, width));
    net.add(std::make_unique<TanhLayer>(FeatureShape::flat(width)));
    net.add(std::make_unique<OrthoDenseLayer>(width, 2, Topology::kPyramid));
    net.add(std::make_unique<DenseLayer>(2, 4));
    VariationalParams vp{net.init_params(rng), random_vector(static_cast<int>(net.num_params()), rng)};
    vp.rho.array() = 0.5 * vp.rho.array() - 2.0;
    Eigen::MatrixXd batch(4, 5);
    for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = standard_normal(rng);
    std::vector<Eigen::VectorXd> eps;
    for (int t = 0; t < 3; ++t) eps.push_back(random_vector(static_cast<int>(vp.size()), rng));
    ElboOptions opts;
    opts.samples = 3;
    opts.kl_scale = 0.05;
    opts.sigma_lik = 0.5;
    const ElboResult r = elbo_loss_with_noise(net, vp, batch, eps, opts);
    const double he = 1e-6;
    for (Eigen::Index i = 0; i < vp.size(); ++i) {
      for (int which = 0; which < 2; ++which) {
        VariationalParams p = vp, m = vp;
        (which == 0 ? p.mu : p.rho)[i] += he;
        (which == 0 ? m.mu : m.rho)[i] -= he;
        const double fd = (elbo_loss_with_noise(net, p, batch, eps, opts).loss -
                           elbo_loss_with_noise(net, m, batch, eps, opts).loss) /
                          (2 * he);
        elbo.add(which == 0 ? r.grad_mu[i] : r.grad_rho[i], fd);
      }
    }
    ++elbo.configs;
  }
  const int total = ortho.configs + conv.configs + elbo.configs;
  const bool pass = total >= 100 && ortho.worst < 1e-4 && conv.worst < 1e-4 && elbo.worst < 1e-3;
  return {pass, std::to_string(total) + " configurations; max relative error ortho " +
                    fmt(ortho.worst) + ", conv " + fmt(conv.worst) + ", ELBO " + fmt(elbo.worst)};
}

Outcome kl_values() {
  const double unit_rho = inverse_softplus(1.0);
  auto kl_at = [&](double mu) {
    return kl_term({Eigen::VectorXd::Constant(1, mu), Eigen::VectorXd::Constant(1, unit_rho)});
  };
  const double k0 = kl_at(0.0), k1 = kl_at(1.0), k2 = kl_at(2.0);
  const bool pass =
      std::abs(k0) < 1e-9 && std::abs(k1 - 0.5) < 1e-9 && std::abs(k2 - 2.0) < 1e-9;
  return {pass, "KL(0,1) = " + fmt(k0) + ", KL(1,1) = " + fmt(k1) + ", KL(2,1) = " + fmt(k2)};
}

Outcome ece_oracle() {
  const std::vector<double> conf(4, 0.9);
  const std::vector<std::uint8_t> correct = {1, 1, 1, 0};
  const double hand = ece(conf, correct, 2).ece;
  Rng rng = make_rng(107);
  std::vector<double> c(10000);
  std::vector<std::uint8_t> ok(10000);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = 0.5 + 0.5 * uniform01(rng);
    ok[i] = uniform01(rng) < c[i];
  }
  const double calibrated = ece(c, ok).ece;
  return {std::abs(hand - 0.15) < 1e-12 && calibrated < 0.02,
          "hand example " + fmt(hand) + ", calibrated predictor " + fmt(calibrated)};
}

Outcome fidelity_replication() {
  const auto t0 = Clock::now();
  FidelityConfig cfg;
  cfg.num_inputs = 32;
  cfg.seed = 108;
  cfg.modes = {{"shots_1k", NoiseModel{1000, 0.0, 0.0}}, {"shots_10k", NoiseModel{10000, 0.0, 0.0}}};
  const FidelityResult r = run_fidelity(cfg);
  const double f1k = r.average(0).value_or(0.0), f10k = r.average(1).value_or(0.0);
  const double elapsed = seconds_since(t0);
  return {f10k >= 0.999 && f1k >= 0.996 && elapsed < 120.0,
          "n = 8 pyramid, 32 inputs: 10k shots " + fmt(f10k) + ", 1k shots " + fmt(f1k) + " in " +
              fmt(elapsed) + " s"};
}

Outcome hw_fraction_replication() {
  const auto t0 = Clock::now();
  const fs::path out = workdir() / "hw";
  if (run_cli({"experiment", "hw-fraction", "--seed", "9", "--out", out.string(), "--set",
               "checkpoint=" + trained_qcnn().string(), "dataset=" + default_dataset().string()}) !=
      kExitOk) {
    return {false, "hw-fraction experiment failed"};
  }
  const auto rows = read_csv_numbers(out / "hw_fraction.csv");
  std::vector<double> fraction, layer;
  bool zero_exact = true;
  for (const auto& row : rows) {
    fraction.push_back(row[0]);
    layer.push_back(row[3]);
    if (row[0] == 0.0) zero_exact = zero_exact && row[3] == 0.0 && row[4] == 0.0 && row[5] == 0.0;
  }
  const double rho = rank_correlation(fraction, layer);
  const auto summary = read_csv_numbers(out / "hw_fraction_summary.csv");
  const auto& full = summary.back();  // fraction,layer_mean,layer_std,conv_mean,conv_std,ae_mean,ae_std
  const bool ordered = full[0] == 100.0 && full[1] > full[3] && full[3] > full[5];
  const double elapsed = seconds_since(t0);
  return {zero_exact && rho > 0.9 && ordered && elapsed < 600.0,
          "MSE(0%) exact: " + std::string(zero_exact ? "yes" : "no") + ", layer rank correlation " +
              fmt(rho) + ", MSE at 100% layer " + fmt(full[1]) + ", conv " + fmt(full[3]) +
              ", autoencoder " + fmt(full[5]) + " (layer > conv > autoencoder: " +
              (ordered ? "yes" : "no") + ") in " + fmt(elapsed) + " s"};
}

Outcome bayesian_calibration() {
  const auto t0 = Clock::now();
  const BlockDataset data = load_dataset(default_dataset());
  const Eigen::MatrixXd train_blocks = data.matrix(data.indices(Split::kTrain));
  const Eigen::MatrixXd val_blocks = data.matrix(data.indices(Split::kVal));
  std::ostringstream detail;
  detail << data.size() << " blocks;";
  bool pass = data.size() >= 2000;
  for (Variant variant : {Variant::kFnn, Variant::kQfnn}) {
    AutoencoderSpec spec;
    spec.variant = variant;
    const Sequential model = build_autoencoder(spec);
    int wins = 0;
    detail << " " << variant_name(variant) << " ECE PE/Bayesian";
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      TrainConfig cfg;
      cfg.optimizer = OptimizerKind::kAdam;
      cfg.seed = seed;
      cfg.init_sigma = 0.001;
      EvaluationOptions eval;
      eval.seed = seed;
      double result[2];
      for (TrainMode mode : {TrainMode::kPointEstimate, TrainMode::kBayesian}) {
        const TrainedModel trained = train(model, mode, train_blocks, val_blocks, cfg);
        const EvaluationReport r = evaluate(model, trained, data, std::string(mode_name(mode)), eval);
        result[mode == TrainMode::kBayesian] = r.calibration.ece;
      }
      wins += result[1] < result[0];
      detail << " " << fmt(result[0]) << "/" << fmt(result[1]);
    }
    detail << " (Bayesian lower in " << wins << "/5);";
    pass = pass && wins >= 4;
  }
  const double elapsed = seconds_since(t0);
  detail << " " << fmt(elapsed / 60.0) << " min";
  return {pass && elapsed < 1800.0, detail.str()};
}

Outcome sda_luda_oracle() {
  Rng rng = make_rng(111);
  int agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 30));
    std::vector<std::uint8_t> truth, predicted;
    std::vector<std::uint32_t> sizes;
    for (int i = 0; i < n; ++i) {
      truth.push_back(uniform01(rng) < 0.4);
      predicted.push_back(uniform01(rng) < 0.5);
      sizes.push_back(truth.back() ? 1 + static_cast<std::uint32_t>(uniform_index(rng, 500)) : 0);
    }
    // Brute force: smallest detected and largest missed by exhaustive scan.
    std::optional<std::uint32_t> sda, luda;
    for (int i = 0; i < n; ++i) {
      if (!truth[i]) continue;
      bool smallest = predicted[i], largest = !predicted[i];
      for (int k = 0; k < n; ++k) {
        if (!truth[k]) continue;
        if (predicted[k] && sizes[k] < sizes[i]) smallest = false;
        if (!predicted[k] && sizes[k] > sizes[i]) largest = false;
      }
      if (smallest) sda = sizes[i];
      if (largest) luda = sizes[i];
    }
    const AnomalySizeExtremes e = sda_luda(truth, predicted, sizes);
    agree += e.sda == sda && e.luda == luda;
  }
  return {agree == 1000, std::to_string(agree) + "/1000 random sets agree"};
}

Outcome determinism() {
  const std::string data = "dataset=" + small_dataset().string();
  const fs::path root = workdir() / "determinism";
  if (run_cli({"train", "--seed", "4", "--out", (root / "model").string(), "--set", data,
               "epochs=1", "mode=Bayesian", "variant=QFNN", "optimizer=adam"}) != kExitOk) {
    return {false, "training failed"};
  }
  const std::string ckpt = "checkpoint=" + (root / "model" / "model.ckpt").string();
  struct Job {
    std::vector<std::string> args;
    std::vector<std::string> files;
  };
  const std::vector<Job> jobs = {
      {{"evaluate", "--seed", "4", "--set", data, ckpt, "name=QFNN (Bayesian)"},
       {"metrics.json", "metrics.csv", "decisions.jsonl"}},
      {{"experiment", "fidelity", "--seed", "5"}, {"fidelity.csv"}},
      {{"experiment", "hw-fraction", "--seed", "6", "--set", data,
        "checkpoint=" + trained_qcnn().string(), "repeats=2"},
       {"hw_fraction.csv", "hw_fraction_summary.csv"}},
  };
  int compared = 0;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    std::vector<fs::path> dirs;
    for (const char* run : {"a", "b"}) {
      dirs.push_back(root / ("job" + std::to_string(j) + run));
      std::vector<std::string> args = jobs[j].args;
      args.insert(args.begin() + (args[0] == "experiment" ? 2 : 1), {"--out", dirs.back().string()});
      if (run_cli(args) != kExitOk) return {false, args[0] + " run failed"};
    }
    for (const std::string& file : jobs[j].files) {
      const std::string a = read_text(dirs[0] / file);
      if (a.empty() || a != read_text(dirs[1] / file)) return {false, file + " differs or is empty"};
      ++compared;
    }
  }
  return {true, std::to_string(compared) + " output files byte-identical across repeated runs"};
}

}  // namespace
}  // namespace bonn

int main(int argc, char** argv) {
  using namespace bonn;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"orthogonality", orthogonality},
      {"gate golden vectors", gate_golden_vectors},
      {"loader round trip", loader_round_trip},
      {"convolution as matmul", conv_matches_direct},
      {"gradient checks", gradient_checks},
      {"KL analytics", kl_values},
      {"ECE oracle", ece_oracle},
      {"fidelity", fidelity_replication},
      {"hardware fraction", hw_fraction_replication},
      {"Bayesian calibration", bayesian_calibration},
      {"SDA/LuDA oracle", sda_luda_oracle},
      {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << number << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::error_code ec;
  std::filesystem::remove_all(workdir(), ec);
  return failures == 0 ? 0 : 1;
}
